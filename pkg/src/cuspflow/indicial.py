"""The model operator on the transverse sphere: roots, jets, eigendistributions.

The radial model of the cusp transfers, mode by mode, to the operator

    P f = h sin(phi) d_phi f + (lambda + h d/2 + h A) cos(phi) f

on S^d, whose generalized boundary spectrum ("indicial roots") is the pair of
affine families  lambda = +-h [s - A + (d/2 + n)], n = 0, 1, 2, ...  The plus
family is spanned by Dirac-type jets at the regular pole N; the minus family
by homogeneous distributions anchored at the opposite pole S (handled by the
:mod:`cuspflow.hadamard` module).  When a plus root and a minus root of equal
parity collide, the two families merge into an index-2 Jordan block.

This module provides the exact root tables with multiplicities and Jordan
flags, eigendistribution representations, and two independent numerical
cross-checks of the root structure: a finite triangular jet matrix and a
first-order ODE shooting test per angular mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ._jets import delta_in_volume_basis, transpose_matrix_on_volume_jets
from ._sphere import homogeneous_dimension, multi_indices
from .errors import ValidationError

__all__ = [
    "ModelOperator",
    "IndicialRoot",
    "DistributionRep",
    "ShootingResult",
    "apply_P",
    "indicial_roots",
    "eigendistribution",
    "numeric_roots_jet",
    "jet_matrix",
    "numeric_roots_shooting",
]

_INT_TOL = 1e-12


@dataclass(frozen=True)
class ModelOperator:
    """Parameters of the transverse model operator.

    d     : dimension of the sphere factor (>= 1)
    h     : the small parameter scaling the vector field (> 0, default 1)
    lam   : the spectral weight lambda (complex)
    A     : optional scalar shift (irreducible bundle case reduces to a
            scalar by Schur's lemma); 0 for the scalar problem
    """

    d: int
    h: float = 1.0
    lam: complex = 0.0
    A: complex = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"need d >= 1, got d={self.d}")
        if not self.h > 0:
            raise ValidationError(f"need h > 0, got h={self.h}")


@dataclass(frozen=True)
class IndicialRoot:
    """One affine root  lambda_k(s) = a * s + b  of the model family.

    sign: branch (+1 Dirac-jet family at N, -1 homogeneous family at S)
    n:    level (polynomial degree of the angular factor)
    a:    slope, +- h
    b:    intercept, sign * h * (d/2 + n - A)
    multiplicity: dimension of degree-n homogeneous polynomials in d variables
    jordan_index: 2 exactly at an equal-parity collision of the two branches
    """

    sign: int
    n: int
    a: float
    b: complex
    multiplicity: int
    jordan_index: int

    def lambda_at(self, s: complex) -> complex:
        return self.a * s + self.b

    def to_json(self) -> dict:
        return {
            "sign": self.sign,
            "n": self.n,
            "a": self.a,
            "b_re": float(np.real(self.b)),
            "b_im": float(np.imag(self.b)),
            "multiplicity": self.multiplicity,
            "jordan_index": self.jordan_index,
        }


@dataclass
class DistributionRep:
    """A representation of a generalized eigendistribution.

    kind 'dirac_jet':          a jet functional at the pole N; ``jet_dict``
                               holds its volume-jet expansion and pairing is
                               exact (no quadrature).
    kind 'homogeneous_south':  the degree-k homogeneous family anchored at S
                               with angular polynomial ``upsilon``; pairings
                               go through the regularized radial integral in
                               :mod:`cuspflow.hadamard`.
    kind 'jordan_vector':      finite part of the south family at a crossing
                               plus a jet correction at N (fields of both).

    prefactor_exponent records the power of the conjugating factor
    2 tan(phi/2)/sin(phi) at N, or 2 tan(phi/2) * sin(phi) at S.
    """

    kind: str
    d: int
    h: float
    lam: complex
    eigenvalue: complex
    prefactor_exponent: complex
    pole: str
    mu: tuple | None = None
    jet_dict: dict | None = None
    k: int | None = None
    j: int | None = None
    upsilon: tuple | None = None
    n_reg: int | None = None
    finite_part_shift: complex = 0.0
    meta: dict = field(default_factory=dict)

    def pair(self, psi) -> complex:
        """Pair against a test function (exact for jets, quadrature at S)."""
        if self.kind == "dirac_jet":
            return complex(psi.pair_volume_dict(self.jet_dict))
        from . import hadamard

        return hadamard.pair_distribution(self, psi)


# ---------------------------------------------------------------------------
# Operator application
# ---------------------------------------------------------------------------


def apply_P(op: ModelOperator, f, point) -> complex:
    """Apply the model operator to a test function at one point (phi, u).

    ``f`` may be a TestFunction-like object (attributes ``value`` and
    ``dphi_value``) or a pair of callables (value(phi, u), dphi(phi, u)).
    Returns  h sin(phi) f_phi + (lambda + h d/2 + h A) cos(phi) f.
    """
    phi, u = point
    u = np.asarray(u, dtype=float)
    if isinstance(f, tuple):
        fval, fphi = f[0](phi, u), f[1](phi, u)
    else:
        fval, fphi = f.value(phi, u), f.dphi_value(phi, u)
    lam_eff = op.lam + op.h * op.d / 2.0 + op.h * op.A
    return complex(op.h * math.sin(phi) * fphi + lam_eff * math.cos(phi) * fval)


# ---------------------------------------------------------------------------
# Exact root tables
# ---------------------------------------------------------------------------


def _jordan_partner(op: ModelOperator, s: complex, n: int) -> int | None:
    """Level of the opposite-branch root colliding with level n, if any.

    The two branches collide at level pair (n, p) exactly when
    2(s - A) + d + n + p = 0; the collision produces an index-2 block only
    when additionally n and p have equal parity (odd-gap collisions couple
    angular factors of opposite parity, whose sphere integrals vanish, and
    the block stays semisimple).
    """
    p = -2.0 * (complex(s) - complex(op.A)) - op.d - n
    if abs(p.imag) > _INT_TOL:
        return None
    pr = round(p.real)
    if abs(p.real - pr) > _INT_TOL or pr < 0:
        return None
    if (n - pr) % 2 != 0:
        return None
    return int(pr)


def jordan_partner_level(op: ModelOperator, s: complex, n: int) -> int | None:
    """Public alias of the collision test (used by the hadamard module)."""
    return _jordan_partner(op, s, n)


def indicial_roots(op: ModelOperator, s: complex, n_max: int) -> list[IndicialRoot]:
    """The exact affine roots lambda = +-h[s - A + (d/2 + n)], n = 0..n_max.

    Returned sorted by (sign, n): the minus branch first.  multiplicity is
    the count of degree-n monomials in d variables; jordan_index is 2 exactly
    when the opposite branch collides at equal parity (see _jordan_partner).
    """
    if n_max < 0:
        raise ValidationError(f"need n_max >= 0, got {n_max}")
    roots = []
    for sign in (-1, 1):
        for n in range(n_max + 1):
            a = sign * op.h
            b = sign * op.h * (op.d / 2.0 + n - complex(op.A))
            jordan = 2 if _jordan_partner(op, s, n) is not None else 1
            roots.append(
                IndicialRoot(
                    sign=sign,
                    n=n,
                    a=float(a),
                    b=complex(b),
                    multiplicity=homogeneous_dimension(op.d, n),
                    jordan_index=jordan,
                )
            )
    return sorted(roots, key=lambda r: (r.sign, r.n))


# ---------------------------------------------------------------------------
# Eigendistributions
# ---------------------------------------------------------------------------


def eigendistribution(root: IndicialRoot, op: ModelOperator, selector) -> DistributionRep:
    """A DistributionRep D with (P - hs) D = 0 weakly (or (P - hs)^2 D = 0
    at a jordan_index-2 root), hs being fixed by the root relation at op.lam.

    selector: a multi-index of degree root.n (plus branch) or a coefficient
    vector over the degree-root.n monomials (minus branch).
    """
    d, h = op.d, op.h
    n = root.n
    if root.sign == +1:
        if isinstance(selector, int):
            selector = multi_indices(d, n)[selector]
        mu = tuple(selector)
        if len(mu) != d or sum(mu) != n or any(v < 0 for v in mu):
            raise ValidationError(
                f"selector {mu} inconsistent with root level n={n} in d={d}"
            )
        lam_eff = op.lam + h * op.A
        return DistributionRep(
            kind="dirac_jet",
            d=d,
            h=h,
            lam=op.lam,
            eigenvalue=lam_eff - h * (n + d / 2.0),
            prefactor_exponent=lam_eff / h - n - d / 2.0,
            pole="N",
            mu=mu,
            jet_dict=delta_in_volume_basis(d, h, lam_eff, mu),
        )

    # minus branch
    if op.A != 0:
        raise ValidationError(
            "south-branch eigendistributions are implemented for A = 0 "
            "(the scalar problem); the jet branch supports any scalar A"
        )
    k = n
    dim = homogeneous_dimension(d, k)
    if isinstance(selector, tuple) and len(selector) == d and sum(selector) == k:
        coeffs = [0.0] * dim
        coeffs[multi_indices(d, k).index(tuple(selector))] = 1.0
        upsilon = tuple(coeffs)
    else:
        upsilon = tuple(complex(c) for c in np.atleast_1d(selector))
        if len(upsilon) != dim:
            raise ValidationError(
                f"selector length {len(upsilon)} != dim of degree-{k} "
                f"polynomials in {d} variables ({dim})"
            )
    if root.jordan_index == 2:
        from . import hadamard

        # The block sits at lam0 = h(j-k)/2, so j = 2 lam/h + k.
        j = int(round((2 * op.lam / h + k).real))
        lam0 = h * (j - k) / 2.0
        if abs(op.lam - lam0) > 1e-9:
            raise ValidationError(
                f"op.lam={op.lam} is not at the crossing value {lam0} "
                f"for the (j={j}, k={k}) Jordan block"
            )
        return hadamard.jordan_vector(j, k, upsilon, op)
    return DistributionRep(
        kind="homogeneous_south",
        d=d,
        h=h,
        lam=op.lam,
        eigenvalue=-op.lam - h * (k + d / 2.0),
        prefactor_exponent=-(k + d / 2.0 + op.lam / h),
        pole="S",
        k=k,
        upsilon=upsilon,
        n_reg=None,
    )


# ---------------------------------------------------------------------------
# Numeric cross-check 1: the triangular jet matrix
# ---------------------------------------------------------------------------


def jet_matrix(op: ModelOperator, K: int, exact: bool = False):
    """(basis, matrix) of the transposed operator on jets of order <= K.

    Upper triangular in graded-ascending order with parity-preserving
    couplings; diagonal entries  lambda + hA - h(|mu| + d/2).
    """
    if K < 0:
        raise ValidationError(f"need K >= 0, got {K}")
    if exact:
        from fractions import Fraction

        if abs(complex(op.lam).imag) > 0 or abs(complex(op.A).imag) > 0:
            raise ValidationError("exact jet matrix requires real lambda and A")
        return transpose_matrix_on_volume_jets(
            op.d,
            Fraction(op.h).limit_denominator(10**12),
            Fraction(complex(op.lam).real).limit_denominator(10**12),
            Fraction(complex(op.A).real).limit_denominator(10**12),
            K,
            exact=True,
        )
    return transpose_matrix_on_volume_jets(op.d, op.h, op.lam, op.A, K, exact=False)


def numeric_roots_jet(op: ModelOperator, s: complex, K: int) -> np.ndarray:
    """Eigenvalues of the finite jet matrix (values of hs hit by jets).

    The returned values must reproduce  hs = lambda + hA - h(n + d/2) for
    n = 0..K, with multiplicities; ``s`` is accepted for interface symmetry
    with the shooting check and does not enter the matrix.
    """
    _, M = jet_matrix(op, K, exact=False)
    eig = np.linalg.eigvals(M)
    return eig[np.lexsort((eig.imag, -eig.real))]


# ---------------------------------------------------------------------------
# Numeric cross-check 2: mode-by-mode shooting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShootingResult:
    """Outcome of the mode-m ODE shot.

    exponent_minus / exponent_plus: measured local growth exponents of the
    solution at x = -1 / x = +1 in the variables (1+x) / (1-x).
    branches: list of (sign, level) memberships detected; is_root iff
    nonempty.
    """

    is_root: bool
    branches: tuple
    exponent_minus: complex
    exponent_plus: complex
    expected_minus: complex
    expected_plus: complex
    mode: int
    details: dict


def numeric_roots_shooting(op: ModelOperator, s: complex, m: int) -> ShootingResult:
    """Integrate the reduced mode-m radial ODE and classify (lambda, s).

    In x = cos(phi) the mode-m equation (P - hs) w = 0 reduces to
        -h (1-x^2) w' + [(lambda + h(d/2+m)) x + h(A - s)] w = 0,
    whose (unique up to scale) solution behaves like (1+x)^{a-} near -1 and
    (1-x)^{a+} near +1 with
        a- = (A - s - lambda/h - d/2 - m)/2,
        a+ = (s - A - lambda/h - d/2 - m)/2.
    Membership:
        minus branch: a- a non-negative integer  -> level n = m + 2 a-;
        plus  branch: a+ + d/2 + m a non-positive integer -ell
                      -> level n = m + 2 ell.
    The exponents are measured by log-distance slope fits with Richardson
    extrapolation, integrating log w with a 2-term local series seed at
    x0 = -1 + 1e-6 (the endpoints are characteristic, so the integrator
    cannot start exactly there).
    """
    if m < 0:
        raise ValidationError(f"need mode m >= 0, got {m}")
    h, d = op.h, op.d
    c = op.lam / h + d / 2.0 + m
    e = complex(op.A) - complex(s)

    def rhs(x, y):
        val = (c * x + e) / (1.0 - x * x)
        return [val.real, val.imag]

    xi0 = 1e-6
    x0 = -1.0 + xi0
    a_minus_exact = (e - c) / 2.0
    a_plus_exact = (-e - c) / 2.0
    k_minus = (e + c) / 4.0
    y0c = a_minus_exact * math.log(xi0) + np.log(1.0 + k_minus * xi0)
    offsets = [1e-4, 1e-5, 1e-6]
    probes = [-1.0 + 1e-5, -1.0 + 1e-4, 1.0 - 1e-4, 1.0 - 1e-5, 1.0 - 1e-6]
    sol = solve_ivp(
        rhs,
        (x0, probes[-1]),
        [y0c.real, y0c.imag],
        t_eval=probes,
        method="DOP853",
        rtol=1e-12,
        atol=1e-12,
    )
    if not sol.success:
        raise RuntimeError(f"shooting integration failed: {sol.message}")
    yv = sol.y[0] + 1j * sol.y[1]
    y_at = dict(zip(probes, yv))
    y_at[x0] = complex(y0c)

    def _slope_fit(samples):
        # samples: [(log-distance, y)] at offsets 1e-4, 1e-5, 1e-6
        (l1, y1), (l2, y2), (l3, y3) = samples
        s1 = (y2 - y1) / (l2 - l1)
        s2 = (y3 - y2) / (l3 - l2)
        return s2 + (s2 - s1) / 9.0, abs(s2 - s1)

    minus_samples = [(math.log(t), y_at[-1.0 + t]) for t in offsets]
    plus_samples = [(math.log(t), y_at[1.0 - t]) for t in offsets]
    a_minus, dm = _slope_fit(minus_samples)
    a_plus, dp = _slope_fit(plus_samples)

    branches = []
    int_tol = 1e-6
    am = a_minus
    if abs(am.imag) < int_tol:
        r = round(am.real)
        if abs(am.real - r) < int_tol and r >= 0:
            branches.append((-1, int(m + 2 * r)))
    ap = a_plus + d / 2.0 + m
    if abs(ap.imag) < int_tol:
        r = round(ap.real)
        if abs(ap.real - r) < int_tol and r <= 0:
            branches.append((+1, int(m - 2 * r)))

    return ShootingResult(
        is_root=bool(branches),
        branches=tuple(branches),
        exponent_minus=complex(a_minus),
        exponent_plus=complex(a_plus),
        expected_minus=complex(a_minus_exact),
        expected_plus=complex(a_plus_exact),
        mode=m,
        details={
            "fit_spread_minus": float(dm),
            "fit_spread_plus": float(dp),
            "x0": x0,
        },
    )
