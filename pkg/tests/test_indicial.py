"""Tests for the model-operator module: exact roots, jets, shooting."""

import itertools
import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cuspflow._sphere import homogeneous_dimension, multi_indices
from cuspflow._testfunctions import TestFunction, random_test_function
from cuspflow.errors import ValidationError
from cuspflow.indicial import (
    IndicialRoot,
    ModelOperator,
    apply_P,
    eigendistribution,
    indicial_roots,
    jet_matrix,
    jordan_partner_level,
    numeric_roots_jet,
    numeric_roots_shooting,
)


# ---------------------------------------------------------------------------
# apply_P
# ---------------------------------------------------------------------------


def test_apply_p_constant_at_equator():
    op = ModelOperator(d=2, h=1.0, lam=0.3)
    f = (lambda phi, u: 1.0, lambda phi, u: 0.0)
    val = apply_P(op, f, (math.pi / 2, np.array([1.0, 0.0])))
    assert abs(val) < 1e-14


def test_apply_p_constant_at_pole():
    op = ModelOperator(d=2, h=1.0, lam=1.0)
    f = (lambda phi, u: 1.0, lambda phi, u: 0.0)
    val = apply_P(op, f, (0.0, np.array([1.0, 0.0])))
    assert abs(val - 2.0) < 1e-14


@pytest.mark.parametrize(
    "d,h,s,lam",
    [
        (1, 1.0, -2.0, 1.5),
        (2, 0.5, 0.3 + 0.2j, 0.7 - 0.4j),
        (3, 1.0, 1.25, -0.6),
    ],
)
def test_apply_p_closed_form_kernel(d, h, s, lam):
    # f = (sin phi)^alpha (2 tan(phi/2))^s with alpha = -d/2 - lam/h solves
    # (P_lam - h s) f = 0 pointwise
    alpha = -d / 2.0 - lam / h
    op = ModelOperator(d=d, h=h, lam=lam)

    def f(phi, u):
        return math.sin(phi) ** complex(alpha) * (2.0 * math.tan(phi / 2.0)) ** complex(s)

    def fphi(phi, u):
        return f(phi, u) * (alpha * math.cos(phi) / math.sin(phi) + s / math.sin(phi))

    u = np.zeros(d)
    u[0] = 1.0
    for phi in np.linspace(0.2, math.pi - 0.2, 23):
        val = apply_P(op, (f, fphi), (phi, u))
        ref = h * s * f(phi, u)
        assert abs(val - ref) <= 1e-10 * max(1.0, abs(ref))


# ---------------------------------------------------------------------------
# indicial_roots: closed forms, multiplicities, Jordan structure
# ---------------------------------------------------------------------------


def test_roots_d1_closed_form():
    op = ModelOperator(d=1, h=1.0, lam=0.0)
    roots = indicial_roots(op, s=0.0, n_max=4)
    assert len(roots) == 10
    for r in roots:
        assert r.multiplicity == 1
        assert r.jordan_index == 1
        assert r.a == pytest.approx(r.sign * 1.0)
        assert r.lambda_at(0.0) == pytest.approx(r.sign * (0.5 + r.n))


def test_root_multiplicity_examples():
    r2 = indicial_roots(ModelOperator(d=2, h=1.0, lam=0.0), s=0.0, n_max=1)
    assert {r.n: r.multiplicity for r in r2 if r.sign == 1}[1] == 2
    r3 = indicial_roots(ModelOperator(d=3, h=1.0, lam=0.0), s=0.0, n_max=2)
    assert {r.n: r.multiplicity for r in r3 if r.sign == 1}[2] == 6


def test_multiplicity_brute_force():
    for d in range(1, 5):
        op = ModelOperator(d=d, h=1.0, lam=0.0)
        roots = indicial_roots(op, s=0.17, n_max=5)
        for r in roots:
            count = sum(
                1
                for combo in itertools.product(range(r.n + 1), repeat=d)
                if sum(combo) == r.n
            )
            assert r.multiplicity == count


@settings(max_examples=30, deadline=None)
@given(
    d=st.integers(min_value=1, max_value=3),
    h=st.sampled_from([0.5, 1.0, 2.0]),
    s_re=st.floats(min_value=-3, max_value=3, allow_nan=False),
    s_im=st.floats(min_value=-2, max_value=2, allow_nan=False),
)
def test_root_symmetry_under_negation(d, h, s_re, s_im):
    s = complex(s_re, s_im)
    op = ModelOperator(d=d, h=h, lam=0.0)
    roots = indicial_roots(op, s=s, n_max=4)
    plus = sorted(
        (round(r.lambda_at(s).real, 9), round(r.lambda_at(s).imag, 9), r.multiplicity)
        for r in roots
        if r.sign == 1
    )
    minus = sorted(
        (round(-r.lambda_at(s).real, 9), round(-r.lambda_at(s).imag, 9), r.multiplicity)
        for r in roots
        if r.sign == -1
    )
    assert plus == minus


def test_scale_invariance_in_h():
    s = 0.4
    base = indicial_roots(ModelOperator(d=2, h=1.0, lam=0.0), s=s, n_max=3)
    half = indicial_roots(ModelOperator(d=2, h=0.5, lam=0.0), s=s, n_max=3)
    for rb, rh in zip(base, half):
        assert (rb.sign, rb.n, rb.multiplicity, rb.jordan_index) == (
            rh.sign,
            rh.n,
            rh.multiplicity,
            rh.jordan_index,
        )
        assert rh.lambda_at(s) == pytest.approx(0.5 * rb.lambda_at(s))


def test_jordan_flags_odd_gap_semisimple():
    # s = -1, d = 1: collisions exist but always with odd level gap
    roots = indicial_roots(ModelOperator(d=1, h=1.0, lam=0.0), s=-1.0, n_max=3)
    assert all(r.jordan_index == 1 for r in roots)


def test_jordan_flags_even_gap():
    # s = -1.5, d = 1: partner level 2 - n, an index-2 block iff it is a
    # nonnegative integer of the same parity
    roots = indicial_roots(ModelOperator(d=1, h=1.0, lam=0.0), s=-1.5, n_max=3)
    flags = {(r.sign, r.n): r.jordan_index for r in roots}
    for sign in (1, -1):
        assert flags[(sign, 0)] == 2
        assert flags[(sign, 1)] == 2
        assert flags[(sign, 2)] == 2
        assert flags[(sign, 3)] == 1


def test_jordan_partner_level_formula():
    for d in (1, 2):
        for k in (0, 1, 2):
            for j in (k, k + 2, k + 4):
                s = -(j + k + d) / 2.0
                assert jordan_partner_level(ModelOperator(d=d, h=1.0, lam=0.0), s, k) == j
            s_odd = -(2 * k + 1 + d) / 2.0  # partner would be k+1: odd gap
            assert jordan_partner_level(ModelOperator(d=d, h=1.0, lam=0.0), s_odd, k) is None


def test_root_json_fields():
    roots = indicial_roots(ModelOperator(d=2, h=1.0, lam=0.0), s=0.3 + 0.2j, n_max=1)
    payload = json.dumps([r.to_json() for r in roots])
    data = json.loads(payload)
    for row in data:
        assert set(row) == {"sign", "n", "a", "b_re", "b_im", "multiplicity", "jordan_index"}
    r0 = next(r for r in roots if r.sign == 1 and r.n == 0)
    assert r0.to_json()["a"] == pytest.approx(1.0)
    assert r0.to_json()["b_re"] == pytest.approx(1.0)  # h(d/2+n) = 1


def test_model_operator_validation():
    with pytest.raises(ValidationError):
        ModelOperator(d=0, h=1.0, lam=0.0)
    with pytest.raises(ValidationError):
        ModelOperator(d=1, h=-1.0, lam=0.0)


# ---------------------------------------------------------------------------
# eigendistributions
# ---------------------------------------------------------------------------


def _pole_value(psi):
    """psi at the distinguished pole (phi = 0)."""
    u = np.zeros((1, psi.d))
    u[0, 0] = 1.0
    return complex(np.asarray(psi.value(0.0, u)).ravel()[0])


def test_dirac_zeroth_jet_is_point_evaluation():
    for lam in (0.0, 0.8 - 0.3j):
        for d in (1, 2):
            op = ModelOperator(d=d, h=1.0, lam=lam)
            s = lam / 1.0 - d / 2.0  # level-0 plus root relation
            roots = indicial_roots(op, s=s, n_max=0)
            r0 = next(r for r in roots if r.sign == 1 and r.n == 0)
            rep = eigendistribution(r0, op, (0,) * d)
            rng = np.random.default_rng(3)
            for _ in range(3):
                psi = random_test_function(d, rng, n_terms=3, max_deg=2)
                psi = psi + TestFunction.constant(d, 0.7)
                assert rep.pair(psi) == pytest.approx(_pole_value(psi), abs=1e-12)


def test_euler_weight_of_jets_sympy_oracle():
    # partial^mu (sum_i x_i d_i psi)(0) = |mu| partial^mu psi(0); checked
    # against explicit symbolic differentiation
    for d in (1, 2):
        xs = sp.symbols(f"x0:{d}", real=True)
        t = sum(x**2 for x in xs)
        psi_expr = (1 + xs[0] + (xs[0] ** 2) * 0.5 + (xs[-1] ** 2 if d > 1 else 0)) * sp.exp(
            -0.7 * t
        ) * sp.sqrt(1 - t)
        euler_expr = sum(x * sp.diff(psi_expr, x) for x in xs)
        subs0 = {x: 0 for x in xs}
        for order in range(0, 3):
            for mu in multi_indices(d, order):
                dpsi = psi_expr
                deul = euler_expr
                for x, m in zip(xs, mu):
                    dpsi = sp.diff(dpsi, x, m)
                    deul = sp.diff(deul, x, m)
                lhs = complex(deul.subs(subs0))
                rhs = order * complex(dpsi.subs(subs0))
                assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_radial_scaling_of_dirac_jets_weak():
    # <rho d_rho delta^(mu), psi> = -(|mu|+d) <delta^(mu), psi> where the
    # left side unfolds as -<delta^(mu), (d + sum x_i d_i) psi>, with the
    # Euler term evaluated by symbolic differentiation (independent oracle).
    rng = np.random.default_rng(11)
    for d in (1, 2):
        xs = sp.symbols(f"x0:{d}", real=True)
        t = sum(x**2 for x in xs)
        subs0 = {x: 0 for x in xs}
        for trial in range(5):
            coeffs = rng.standard_normal(3)
            psi_expr = (
                coeffs[0] + coeffs[1] * xs[0] + coeffs[2] * xs[0] ** 2
            ) * sp.exp(-0.4 * t)
            psi_pkg = (
                TestFunction.from_monomial(d, (0,) * d, 0.4, (coeffs[0],))
                + TestFunction.from_monomial(d, (1,) + (0,) * (d - 1), 0.4, (coeffs[1],))
                + TestFunction.from_monomial(d, (2,) + (0,) * (d - 1), 0.4, (coeffs[2],))
            )
            euler_expr = sum(x * sp.diff(psi_expr, x) for x in xs)
            for order in (0, 1, 2):
                for mu in multi_indices(d, order):
                    deul = euler_expr
                    for x, m in zip(xs, mu):
                        deul = sp.diff(deul, x, m)
                    lhs = -(d * psi_pkg.flat_jet(mu) + complex(deul.subs(subs0)))
                    rhs = -(order + d) * psi_pkg.flat_jet(mu)
                    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))


def test_weak_eigen_equation_dirac_jets():
    rng = np.random.default_rng(5)
    s = 0.23
    for d in (1, 2):
        for n in (0, 1, 2):
            op0 = ModelOperator(d=d, h=1.0, lam=0.0)
            roots = indicial_roots(op0, s=s, n_max=n)
            root = next(r for r in roots if r.sign == 1 and r.n == n)
            lam = root.lambda_at(s)
            op = ModelOperator(d=d, h=1.0, lam=lam)
            mu = (n,) + (0,) * (d - 1)
            rep = eigendistribution(root, op, mu)
            for _ in range(5):
                psi = random_test_function(d, rng, n_terms=3, max_deg=2)
                g = psi.apply_model_transpose(1.0, lam, 0.0) + psi * (-1.0 * s)
                residual = abs(rep.pair(g))
                assert residual < 1e-8 * psi.ck_norm(n + 1)


def test_weak_eigen_equation_south_branch():
    rng = np.random.default_rng(9)
    s = 0.37
    for d in (1, 2):
        for k in (0, 1):
            op0 = ModelOperator(d=d, h=1.0, lam=0.0)
            roots = indicial_roots(op0, s=s, n_max=k)
            root = next(r for r in roots if r.sign == -1 and r.n == k)
            lam = root.lambda_at(s)
            op = ModelOperator(d=d, h=1.0, lam=lam)
            ups = tuple(1.0 for _ in range(homogeneous_dimension(d, k)))
            rep = eigendistribution(root, op, ups)
            for _ in range(3):
                psi = random_test_function(d, rng, n_terms=2, max_deg=2)
                g = psi.apply_model_transpose(1.0, lam, 0.0) + psi * (-1.0 * s)
                residual = abs(rep.pair(g))
                assert residual < 1e-8 * psi.ck_norm(k + 1)


def test_eigendistribution_selector_mismatch():
    op0 = ModelOperator(d=2, h=1.0, lam=0.0)
    roots = indicial_roots(op0, s=0.1, n_max=1)
    r_plus = next(r for r in roots if r.sign == 1 and r.n == 1)
    with pytest.raises(ValidationError):
        eigendistribution(r_plus, ModelOperator(d=2, h=1.0, lam=r_plus.lambda_at(0.1)), (3, 0))


# ---------------------------------------------------------------------------
# jet matrix cross-check
# ---------------------------------------------------------------------------


def test_jet_matrix_k0_single_eigenvalue():
    op = ModelOperator(d=1, h=1.0, lam=0.0)
    eigs = numeric_roots_jet(op, s=0.0, K=0)
    assert len(eigs) == 1
    assert eigs[0] == pytest.approx(-0.5)


def test_jet_matrix_zero_pattern():
    # entries couple nu to mu only when mu - nu is a nonnegative even
    # multi-index: block upper triangular in degree, diagonal within a degree
    op = ModelOperator(d=2, h=1.0, lam=0.3)
    basis, M = jet_matrix(op, K=4, exact=False)
    assert list(basis) == [mu for n in range(5) for mu in multi_indices(2, n)]
    for i, nu in enumerate(basis):
        for j, mu in enumerate(basis):
            gap = tuple(a - b for a, b in zip(mu, nu))
            allowed = all(g >= 0 and g % 2 == 0 for g in gap)
            if not allowed:
                assert M[i, j] == 0


def test_jet_matrix_exact_vs_float_and_eigenvalues():
    op = ModelOperator(d=2, h=1.0, lam=0.25)
    K = 4
    _, M_float = jet_matrix(op, K=K, exact=False)
    _, M_exact = jet_matrix(op, K=K, exact=True)
    for i, row in enumerate(M_exact):
        for j, entry in enumerate(row):
            assert abs(complex(entry) - M_float[i, j]) < 1e-12
    eigs = numeric_roots_jet(op, s=0.0, K=K)
    expected = sorted(
        (0.25 - (n + 1.0) for n in range(K + 1) for _ in multi_indices(2, n)),
        reverse=True,
    )
    got = sorted((e.real for e in eigs), reverse=True)
    assert np.allclose(got, expected, atol=1e-12)
    assert max(abs(e.imag) for e in eigs) < 1e-12


# ---------------------------------------------------------------------------
# shooting cross-check
# ---------------------------------------------------------------------------


def test_shooting_detects_level0_minus_root():
    op = ModelOperator(d=1, h=1.0, lam=1.5)
    res = numeric_roots_shooting(op, s=-2.0, m=0)
    assert res.is_root
    assert (-1, 0) in res.branches
    assert abs(res.exponent_minus - res.expected_minus) < 1e-6
    assert abs(res.exponent_plus - res.expected_plus) < 1e-6


def test_shooting_endpoint_exponents_match_closed_form():
    # exponents of the reduced ODE: (e - c)/2 at x = -1 and (-e - c)/2 at
    # x = +1 with c = lam/h + d/2 + m and e = A - s
    rng = np.random.default_rng(21)
    for _ in range(6):
        d = int(rng.integers(1, 3))
        h = 1.0
        lam = complex(rng.uniform(-2, 2), 0.0)
        s = complex(rng.uniform(-2, 2), 0.0)
        m = int(rng.integers(0, 2))
        op = ModelOperator(d=d, h=h, lam=lam)
        res = numeric_roots_shooting(op, s=s, m=m)
        c = lam / h + d / 2.0 + m
        e = -s
        assert abs(res.exponent_minus - (e - c) / 2.0) < 1e-6
        assert abs(res.exponent_plus - (-e - c) / 2.0) < 1e-6


def test_shooting_rejects_non_roots():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 20:
        d = int(rng.integers(1, 3))
        lam = rng.uniform(-3, 3)
        s = rng.uniform(-3, 3)
        # keep a safe distance from both affine families
        dist = min(
            min(abs(lam - (s + d / 2.0 + n)), abs(lam + (s + d / 2.0 + n)))
            for n in range(0, 12)
        )
        if dist < 0.3:
            continue
        op = ModelOperator(d=d, h=1.0, lam=lam)
        res = numeric_roots_shooting(op, s=s, m=int(rng.integers(0, 2)))
        assert not res.is_root
        checked += 1


def test_shooting_sees_all_d1_roots_up_to_level3():
    s = -0.85
    for n in range(4):
        for sign in (1, -1):
            lam = sign * (s + 0.5 + n)
            op = ModelOperator(d=1, h=1.0, lam=lam)
            # the level-n root appears in modes m = n, n-2, ... (parity)
            res = numeric_roots_shooting(op, s=s, m=n)
            assert res.is_root
            assert (sign, n) in res.branches
            if n >= 2:
                res2 = numeric_roots_shooting(op, s=s, m=n - 2)
                assert res2.is_root
                assert (sign, n) in res2.branches
            # opposite parity mode must not see it
            res_bad = numeric_roots_shooting(op, s=s, m=n + 1)
            assert (sign, n) not in res_bad.branches


# ---------------------------------------------------------------------------
# conjugation identities
# ---------------------------------------------------------------------------


def _smooth_f():
    def f(phi, u):
        return math.cos(phi) ** 2 * (1.0 + 0.3 * float(np.atleast_1d(u)[0]))

    def fphi(phi, u):
        return -2.0 * math.cos(phi) * math.sin(phi) * (1.0 + 0.3 * float(np.atleast_1d(u)[0]))

    return f, fphi


@pytest.mark.parametrize("d,h,lam,s", [(1, 1.0, 0.6, 0.35), (2, 0.5, -0.4 + 0.2j, -1.1)])
def test_conjugation_identity_north(d, h, lam, s):
    # w^{-s} (P_lam - h s) (w^s f) = sqrt(1-rho^2) (h rho d_rho - h s + lam + h d/2) f
    # with w = 2 tan(phi/2)/sin(phi) and rho = sin(phi)
    op = ModelOperator(d=d, h=h, lam=lam)
    f, fphi = _smooth_f()
    u = np.zeros(d)
    u[0] = 1.0
    for phi in np.linspace(0.15, 1.45, 17):
        w = 2.0 * math.tan(phi / 2.0) / math.sin(phi)
        dlogw = math.tan(phi / 2.0)
        big = (
            lambda p, uu: w**complex(s) * f(p, uu),
            lambda p, uu: (2.0 * math.tan(p / 2.0) / math.sin(p)) ** complex(s)
            * (fphi(p, uu) + s * math.tan(p / 2.0) * f(p, uu)),
        )
        lhs = (apply_P(op, big, (phi, u)) - h * s * big[0](phi, u)) / w**complex(s)
        rho = math.sin(phi)
        rhs = math.sqrt(1.0 - rho * rho) * (
            h * math.tan(phi) * fphi(phi, u) + (lam + h * d / 2.0 - h * s) * f(phi, u)
        )
        assert abs(lhs - rhs) < 1e-9


@pytest.mark.parametrize("d,h,lam,k", [(1, 1.0, 0.45, 1), (2, 1.0, -0.3, 2)])
def test_conjugation_identity_south(d, h, lam, k):
    # with w = 2 tan(phi/2) sin(phi), sigma = -(k + d/2 + lam/h) and
    # h s = -(lam + h(d/2 + k)), the conjugated operator annihilates
    # (sin phi)^k exactly: w^{-sigma}(P_lam - hs)(w^sigma sin^k) = 0
    op = ModelOperator(d=d, h=h, lam=lam)
    sigma = -(k + d / 2.0 + lam / h)
    hs = -(lam + h * (d / 2.0 + k))
    u = np.zeros(d)
    u[0] = 1.0

    def wfun(p):
        return 2.0 * math.tan(p / 2.0) * math.sin(p)

    def big(p, uu):
        return wfun(p) ** complex(sigma) * math.sin(p) ** k

    def bigphi(p, uu):
        dlogw = 1.0 / math.tan(p / 2.0)  # d/dphi log(2 tan(phi/2) sin(phi)) = cot(phi/2)
        return big(p, uu) * (sigma * dlogw + k * math.cos(p) / math.sin(p))

    for phi in np.linspace(0.3, math.pi - 0.3, 17):
        lhs = (apply_P(op, (big, bigphi), (phi, u)) - hs * big(phi, u)) / wfun(phi) ** complex(
            sigma
        )
        assert abs(lhs) < 1e-9


def test_conjugation_identity_south_generic_function():
    # generic f: w^{-sigma}(P_lam - hs)(w^sigma f)
    #          = h sin(phi) f' + [(lam + h d/2 + h sigma) cos(phi) + h sigma - h s] f
    d, h, lam, s = 2, 1.0, 0.7, 0.4
    sigma = -1.3
    op = ModelOperator(d=d, h=h, lam=lam)
    f, fphi = _smooth_f()
    u = np.array([1.0, 0.0])

    def wfun(p):
        return 2.0 * math.tan(p / 2.0) * math.sin(p)

    def big(p, uu):
        return wfun(p) ** sigma * f(p, uu)

    def bigphi(p, uu):
        return wfun(p) ** sigma * (fphi(p, uu) + sigma / math.tan(p / 2.0) * f(p, uu))

    for phi in np.linspace(0.3, math.pi - 0.3, 15):
        lhs = (apply_P(op, (big, bigphi), (phi, u)) - h * s * big(phi, u)) / wfun(phi) ** sigma
        rhs = h * math.sin(phi) * fphi(phi, u) + (
            (lam + h * d / 2.0 + h * sigma) * math.cos(phi) + h * sigma - h * s
        ) * f(phi, u)
        assert abs(lhs - rhs) < 1e-9
