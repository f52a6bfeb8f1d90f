"""Tests for contour inversion, residue operators, and resolvent continuation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _fd_helpers import gauss, identity_residual
from cuspflow.bcontinuation import (
    ContourSpec,
    CuspFunction,
    CuspTerm,
    ResidueOperator,
    SphereFunction,
    continue_resolvent,
    default_r_grid,
    residue_apply,
    resolvent_line,
    rho_max,
    rho_max_prime,
    solve_indicial,
    visible_roots,
)
from cuspflow.errors import (
    ContourOnRootError,
    InvalidEnclosureError,
    NearSingularError,
    PoleError,
    ValidationError,
)
from cuspflow.indicial import ModelOperator

XG = np.linspace(-0.9, 0.6, 41)


def term(d, m, mu, radial, poly=(1.0,)):
    return CuspFunction(d=d, terms=(CuspTerm(m=m, mu=mu, poly=poly, radial=radial),))


# ---------------------------------------------------------------------------
# solve_indicial
# ---------------------------------------------------------------------------


def test_zero_input_gives_zero_solution():
    op = ModelOperator(d=1)
    g = SphereFunction.monomial(1, m=0, poly=(0.0,))
    sol = solve_indicial(op, 0.3, 1.1 + 0.2j, g)
    assert sol.sup_norm() == 0.0


@pytest.mark.parametrize("d,h,m,A", [(1, 1.0, 0, 0.0), (2, 0.5, 1, 0.3), (3, 1.0, 2, 0.0)])
@pytest.mark.parametrize("lam_t", [2.3 + 0.7j, -1.7 + 11.0j, 0.4 - 37.0j])
def test_manufactured_mode_solutions(d, h, m, A, lam_t):
    # plug F = 1 and F = x into the mode reduction of (I(lam) - hs) and check
    # the solver reproduces them from the corresponding right-hand sides
    from cuspflow.bcontinuation import _solve_mode_profiles

    op = ModelOperator(d=d, h=h, A=A)
    s = 0.7 - 0.4j
    lam = h * lam_t
    c = lam / h + d / 2.0 + m
    e = A - s
    x = np.linspace(-1.0, 1.0 - 5e-3, 97)
    v1 = _solve_mode_profiles(op, s, m, (h * e, h * c), [lam], x)[0]
    assert np.abs(v1 - 1.0).max() < 1e-9
    v2 = _solve_mode_profiles(op, s, m, (-h, h * e, h * (1 + c)), [lam], x)[0]
    assert np.abs(v2 - x).max() < 1e-9


def test_random_solves_reproduce_input():
    rng = np.random.default_rng(0)
    worst = 0.0
    solved = 0
    while solved < 10:
        d = int(rng.integers(1, 3))
        op = ModelOperator(d=d, h=float(rng.choice([1.0, 0.5])), A=0.0)
        s = complex(rng.normal(), rng.normal())
        lam = complex(rng.normal(scale=2), rng.normal(scale=5))
        g = SphereFunction.monomial(
            d, m=int(rng.integers(0, 3)), poly=tuple(rng.normal(size=3))
        )
        try:
            sol = solve_indicial(op, s, lam, g)
        except NearSingularError:
            continue
        solved += 1
        worst = max(worst, sol.residual())
    assert worst < 1e-8


def test_solution_operator_stays_bounded_along_contour():
    for h in (1.0, 0.5):
        op = ModelOperator(d=1, h=h)
        g = SphereFunction.monomial(1, m=0, poly=(1.0, 0.5))
        sups = [
            solve_indicial(op, 10.0, h * (1j * im), g).sup_norm()
            for im in (0.0, 10.0, 35.0)
        ]
        assert sups[1] < 2 * sups[0] + 1
        assert sups[2] < 2 * sups[0] + 1


def test_near_root_raises_with_datum():
    op = ModelOperator(d=1)
    g = SphereFunction.monomial(1, m=0, poly=(1.0,))
    with pytest.raises(NearSingularError) as exc:
        solve_indicial(op, 1.3, -1.8 + 5e-9, g)
    root = exc.value.root
    assert root.sign == -1
    assert root.n == 0
    # slightly outside the guard the solve succeeds
    sol = solve_indicial(op, 1.3, -1.8 + 1e-6, g)
    assert np.isfinite(sol.sup_norm())


@settings(max_examples=10, deadline=None)
@given(
    p1=st.tuples(*[st.floats(-2, 2) for _ in range(3)]),
    p2=st.tuples(*[st.floats(-2, 2) for _ in range(3)]),
)
def test_solve_linearity(p1, p2):
    op = ModelOperator(d=1)
    alpha = 0.7 - 0.2j
    s, lam = 0.7, 1.1 + 0.2j
    g1 = SphereFunction.monomial(1, m=0, poly=p1)
    g2 = SphereFunction.monomial(1, m=0, poly=p2)
    g12 = SphereFunction.monomial(
        1, m=0, poly=tuple(alpha * np.array(p1) + np.array(p2))
    )
    xs = np.linspace(-0.95, 0.9, 17)
    lhs = solve_indicial(op, s, lam, g12).profile_at(0, xs)
    rhs = alpha * solve_indicial(op, s, lam, g1).profile_at(0, xs) + solve_indicial(
        op, s, lam, g2
    ).profile_at(0, xs)
    scale = max(np.abs(lhs).max(), 1e-12)
    assert np.abs(lhs - rhs).max() / scale < 1e-10


# ---------------------------------------------------------------------------
# ContourSpec validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        {"rho": 0.0, "height": 0.0},
        {"rho": 0.0, "height": -3.0},
        {"rho": 0.0, "panels": 3},
        {"rho": 0.0, "tail_tol": 0.0},
    ],
)
def test_contour_spec_invalid(kwargs):
    with pytest.raises(ValidationError):
        ContourSpec(**kwargs)


def test_contour_spec_nodes_and_window():
    spec = ContourSpec(rho=0.3, height=20.0, panels=10)
    eta, wq = spec.eta_nodes()
    assert eta.size == 10 * 16
    assert abs(float(wq.sum()) - 40.0) < 1e-10
    assert spec.r_window() > 0


# ---------------------------------------------------------------------------
# resolvent_line
# ---------------------------------------------------------------------------


def test_line_satisfies_generator_identity():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    U = resolvent_line(op, 5.0, ContourSpec(rho=0.0), f, x_grid=np.linspace(-0.9, 0.6, 301))
    assert U.meta["tail_ok"]
    assert identity_residual(U, op, 5.0, f) < 1e-6


def test_root_free_abscissas_agree():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    U1 = resolvent_line(op, 1.3, ContourSpec(rho=0.2), f, x_grid=XG)
    U2 = resolvent_line(op, 1.3, ContourSpec(rho=0.9), f, x_grid=XG)
    win = np.abs(U1.r_grid) <= 6.0
    rel = np.abs((U2 - U1).term_values(0)[win]).max() / np.abs(
        U1.term_values(0)[win]
    ).max()
    assert rel < 1e-6


def test_output_decay_is_governed_by_nearest_root():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    U = resolvent_line(op, 5.0, ContourSpec(rho=0.0), f, x_grid=XG)
    r = U.r_grid
    vals = U.term_values(0)
    col = int(np.argmin(np.abs(U.x_grid)))
    sel = (r >= 2.0) & (r <= 3.6)
    slope = np.polyfit(r[sel], np.log(np.abs(vals[sel, col])), 1)[0]
    # nearest root past the contour for this mode sits at -(s + d/2) = -5.5
    assert abs(slope + 5.5) < 0.11
    # and the prefactor matches the residue operator of that root
    B = residue_apply(ResidueOperator(s=5.0, lambda0=-5.5), op, f, x_grid=XG)
    Bf = B.field(r)
    i35 = int(np.argmin(np.abs(r - 3.5)))
    ratio = np.abs(vals[i35] / Bf.term_values(0)[i35] - 1.0).max()
    assert ratio < 2e-2


def test_contour_on_root_raises():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    with pytest.raises(ContourOnRootError):
        resolvent_line(op, 1.3, ContourSpec(rho=-1.8), f, x_grid=XG)


def test_dimension_mismatch_raises():
    op = ModelOperator(d=2)
    f = term(1, 0, (0,), gauss())
    with pytest.raises(ValidationError):
        resolvent_line(op, 5.0, ContourSpec(rho=0.0), f, x_grid=XG)


def test_line_reports_error_estimates():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    U = resolvent_line(op, 5.0, ContourSpec(rho=0.0), f, x_grid=XG)
    assert {"abscissa", "contour_tail_rel", "tail_ok", "r_window", "root_gap"} <= set(
        U.meta
    )
    assert U.meta["contour_tail_rel"] < 1e-9
    assert U.meta["tail_ok"] is True


def test_linearity_in_f():
    op = ModelOperator(d=1)
    alpha = 0.7 - 0.2j
    a1, a2 = gauss(), gauss(0.5)
    f1 = term(1, 0, (0,), a1)
    f2 = term(1, 0, (0,), a2)
    f12 = term(1, 0, (0,), lambda rr: alpha * a1(rr) + a2(rr))
    spec = ContourSpec(rho=0.0)
    u1 = resolvent_line(op, 5.0, spec, f1, x_grid=XG)
    u2 = resolvent_line(op, 5.0, spec, f2, x_grid=XG)
    u12 = resolvent_line(op, 5.0, spec, f12, x_grid=XG)
    win = np.abs(u1.r_grid) <= 10.0
    diff = (u12 - (u1.scaled(alpha) + u2)).term_values(0)[win]
    assert np.abs(diff).max() / np.abs(u12.term_values(0)[win]).max() < 1e-12


def test_translation_equivariance_in_r():
    op = ModelOperator(d=1)
    r = default_r_grid()
    k = 34
    r0 = k * (r[1] - r[0])
    spec = ContourSpec(rho=0.0)
    U0 = resolvent_line(op, 5.0, spec, term(1, 0, (0,), gauss()), x_grid=XG)
    Us = resolvent_line(op, 5.0, spec, term(1, 0, (0,), gauss(r0)), x_grid=XG)
    rolled = np.roll(U0.term_values(0), k, axis=0)
    win = np.abs(r) <= 10.0
    rel = np.abs((Us.term_values(0) - rolled)[win]).max() / np.abs(
        Us.term_values(0)[win]
    ).max()
    assert rel < 1e-8


# ---------------------------------------------------------------------------
# residue_apply
# ---------------------------------------------------------------------------


def test_empty_enclosure_gives_zero():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    U = resolvent_line(op, 1.3, ContourSpec(rho=0.2), f, x_grid=XG)
    res = residue_apply(ResidueOperator(s=1.3, lambda0=-2.5 + 0.3j), op, f, x_grid=XG)
    assert res.max_abs() < 1e-10 * np.abs(U.term_values(0)).max()


def test_rank_matches_multiplicity():
    # minus-branch root at level n=1 in d=2 has multiplicity 2: one rank per
    # angular channel, two channels in total
    op = ModelOperator(d=2)
    s, w0 = 1.3, -(1.3 + 1.0 + 1.0)
    u_probes = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.6, 0.8])]
    cols = []
    for mu in [(1, 0), (0, 1)]:
        for r0 in (-0.4, 0.3, 0.9):
            f = term(2, 1, mu, gauss(r0))
            res = residue_apply(ResidueOperator(s=s, lambda0=w0), op, f, x_grid=XG)
            rf = res.field(np.linspace(-3, 3, 24))
            cols.append(
                np.concatenate([rf.scalar_values(u).ravel() for u in u_probes])
            )
    M = np.stack(cols, axis=1)
    sv = np.linalg.svd(M, compute_uv=False)
    assert sv[1] / sv[0] > 1e-6  # genuinely rank 2 across channels
    assert sv[2] / sv[0] < 1e-8  # and no more
    blk1 = np.linalg.svd(M[:, :3], compute_uv=False)
    blk2 = np.linalg.svd(M[:, 3:], compute_uv=False)
    assert blk1[1] / blk1[0] < 1e-8
    assert blk2[1] / blk2[0] < 1e-8


@pytest.mark.parametrize("d", [1, 2])
def test_one_root_strip_shift_identity(d):
    op = ModelOperator(d=d)
    s = 1.3
    base = s + d / 2.0
    f = term(d, 0, tuple([0] * d), gauss())
    Ua = resolvent_line(op, s, ContourSpec(rho=-(base + 0.5)), f, x_grid=XG)
    Ub = resolvent_line(op, s, ContourSpec(rho=-(base - 0.5)), f, x_grid=XG)
    res = residue_apply(ResidueOperator(s=s, lambda0=-base), op, f, x_grid=XG)
    diff = Ub - Ua - res.field(Ua.r_grid)
    win = np.abs(Ua.r_grid) <= 10.0
    num = np.abs(diff.term_values(0)[win]).max()
    den = max(
        np.abs(Ub.term_values(0)[win]).max(),
        np.abs(res.field(Ua.r_grid).term_values(0)[win]).max(),
    )
    assert num / den < 1e-6


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("n_roots", [2, 3])
def test_multi_root_strip_sum_rule(d, n_roots):
    op = ModelOperator(d=d)
    s = 1.3
    base = s + d / 2.0
    mu0 = tuple([0] * d)
    mu1 = tuple([1] + [0] * (d - 1))
    f = CuspFunction(
        d=d,
        terms=(
            CuspTerm(m=0, mu=mu0, poly=(1.0,), radial=gauss()),
            CuspTerm(m=1, mu=mu1, poly=(0.8,), radial=gauss(0.3)),
        ),
    )
    Ua = resolvent_line(
        op, s, ContourSpec(rho=-(base + 0.5 + (n_roots - 1))), f, x_grid=XG
    )
    Ub = resolvent_line(op, s, ContourSpec(rho=-(base - 0.5)), f, x_grid=XG)
    total = Ub - Ua
    for k in range(n_roots):
        res = residue_apply(ResidueOperator(s=s, lambda0=-(base + k)), op, f, x_grid=XG)
        total = total - res.field(Ua.r_grid)
    win = np.abs(Ua.r_grid) <= 6.0
    for i in range(2):
        num = np.abs(total.term_values(i)[win]).max()
        den = max(
            np.abs(Ub.term_values(i)[win]).max(),
            np.abs(Ua.term_values(i)[win]).max(),
        )
        assert num / den < 1e-6


def test_invalid_enclosure_raises():
    # -2.3 sits midway between the roots -1.8 and -2.8; a circle of radius
    # 0.6 violates the 2-eps separation requirement
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    with pytest.raises(InvalidEnclosureError):
        residue_apply(ResidueOperator(s=1.3, lambda0=-2.3, eps=0.6), op, f, x_grid=XG)


def test_simple_pole_structure():
    op = ModelOperator(d=2)
    f = term(2, 1, (1, 0), gauss())
    res = residue_apply(
        ResidueOperator(s=1.3, lambda0=-(1.3 + 2.0)), op, f, x_grid=XG
    )
    assert res.meta["third_moment_rel"] < 1e-10
    h0 = max(np.abs(v).max() for v in res.H0)
    h1 = max(np.abs(v).max() for v in res.H1)
    assert h1 < 1e-8 * h0


# ---------------------------------------------------------------------------
# Jordan crossings
# ---------------------------------------------------------------------------


def test_jordan_r_term_appears_exactly_at_crossing():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    # s0 = -3/2: the level-0 minus root meets the level-2 plus root at w = 1
    at = residue_apply(ResidueOperator(s=-1.5, lambda0=1.0), op, f, psi=(1.0,))
    assert abs(at.H1[0]) > 1e-3 * abs(at.H0[0])
    away = residue_apply(
        ResidueOperator(s=-1.3, lambda0=0.8), op, f, psi=(1.0,)
    )
    assert abs(away.H1[0]) < 1e-8 * abs(away.H0[0])


def test_plus_root_residue_concentrates_at_north_pole():
    # pointwise the plus-root residue vanishes; the paired channel sees it
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    paired = residue_apply(ResidueOperator(s=-1.3, lambda0=-0.8), op, f, psi=(1.0,))
    pointwise = residue_apply(ResidueOperator(s=-1.3, lambda0=-0.8), op, f, x_grid=XG)
    assert abs(paired.H0[0]) > 1e-12
    assert pointwise.max_abs() < 1e-9 * abs(paired.H0[0])


# ---------------------------------------------------------------------------
# continue_resolvent
# ---------------------------------------------------------------------------


def test_continuation_equals_line_on_invertible_halfplane():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    Ur = continue_resolvent(op, 5.0, f, x_grid=XG)
    Ul = resolvent_line(op, 5.0, ContourSpec(rho=0.0), f, x_grid=XG)
    assert Ur.meta["branch"] == "regular"
    assert Ur.meta["corrections"] == 0
    win = np.abs(Ur.r_grid) <= 10.0
    rel = np.abs((Ur - Ul).term_values(0)[win]).max() / np.abs(
        Ul.term_values(0)[win]
    ).max()
    assert rel < 1e-8


def test_continued_resolvent_satisfies_identity():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    s = -1.0 + 0.3j
    U = continue_resolvent(op, s, f, x_grid=np.linspace(-0.9, 0.6, 301))
    assert U.meta["branch"] == "regular"
    assert U.meta["corrections"] == 2  # one visible root per branch
    assert identity_residual(U, op, s, f) < 1e-5


def test_patching_expressions_agree():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    s = -0.5 + 0.3j  # the axis carries the roots +-0.3i: patched branch
    Ub = continue_resolvent(op, s, f, x_grid=XG, patch_side="below")
    Ua = continue_resolvent(op, s, f, x_grid=XG, patch_side="above")
    assert Ub.meta["branch"] == "patched"
    assert Ua.meta["branch"] == "patched"
    win = np.abs(Ub.r_grid) <= 10.0
    rel = np.abs((Ub - Ua).term_values(0)[win]).max() / np.abs(
        Ub.term_values(0)[win]
    ).max()
    assert rel < 1e-6


def test_crossing_raises_pole_error_with_datum():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    with pytest.raises(PoleError) as exc:
        continue_resolvent(op, -1.5, f, x_grid=XG)
    assert exc.value.j == 2
    assert exc.value.k == 0


def test_invalid_patch_side_raises():
    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    with pytest.raises(ValidationError):
        continue_resolvent(op, 5.0, f, x_grid=XG, patch_side="sideways")


# ---------------------------------------------------------------------------
# visible roots and the visibility radius
# ---------------------------------------------------------------------------


def test_visible_root_halfplane_conditions():
    op = ModelOperator(d=1)
    vis = visible_roots(op, -2.2 + 0.4j)
    assert len(vis.positive_visible) == len(vis.negative_visible) == 2
    for w in vis.positive_visible:
        assert w.real < 0
    for w in vis.negative_visible:
        assert w.real > 0
    # on the invertible half-plane nothing is visible
    empty = visible_roots(op, 5.0)
    assert empty.positive_visible == () and empty.negative_visible == ()


def test_rho_max_closed_form_examples():
    assert rho_max_prime(ModelOperator(d=2), 0.0) == 0.0
    assert abs(rho_max_prime(ModelOperator(d=1), -3.0) - 2.5) < 1e-12


def test_rho_max_prime_matches_enumeration():
    for A in (0.0, 0.7):
        for d in (1, 2):
            op = ModelOperator(d=d, A=A)
            for tau in np.linspace(-4, 3, 13):
                brute = max(
                    rho_max(op, complex(tt, 0.17))
                    for tt in np.linspace(tau, tau + 6, 241)
                )
                assert abs(brute - rho_max_prime(op, tau)) < 1e-9


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_field_serializes_to_gridded_json():
    import json

    op = ModelOperator(d=1)
    f = term(1, 0, (0,), gauss())
    U = resolvent_line(op, 5.0, ContourSpec(rho=0.0), f, x_grid=XG)
    doc = U.to_json_dict()
    text = json.dumps(doc)  # must be JSON-clean
    back = json.loads(text)
    assert back["d"] == 1
    assert len(back["r_grid"]) == U.r_grid.size
    t0 = back["terms"][0]
    assert t0["m"] == 0 and t0["mu"] == [0]
    re = np.array(t0["re"])
    im = np.array(t0["im"])
    assert np.allclose(re + 1j * im, U.term_values(0))


def test_mode_cap_enforced():
    with pytest.raises(ValidationError):
        term(1, 9, (9,), gauss())
