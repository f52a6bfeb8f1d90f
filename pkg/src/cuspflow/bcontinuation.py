"""Meromorphic continuation of the cusp resolvent by contour deformation.

The radial model on the half-cylinder couples a translation variable r with
the transverse sphere.  Conjugating the generator by ``exp(lambda r / h)``
freezes r and leaves the one-parameter indicial family

    I(lambda) = lambda cos(phi) + h ( (d/2) cos(phi) + sin(phi) d/dphi + A )

acting on the sphere (see :mod:`cuspflow.indicial`).  For spectral parameter
s, the weighted resolvent along the abscissa rho is the contour transform

    (R_rho f)(r, x) = (1/2 pi) \\int e^{(rho + i eta) r}
                       [I(h(rho + i eta)) - h s]^{-1}  fhat(rho + i eta)  deta,

with ``fhat(w) = \\int e^{-w r} f(r) dr``.  Throughout this module contour
coordinates (``rho``, ``lambda0``, root positions, returned residue
locations) use the h-normalized variable ``w = lambda / h``; only
:func:`solve_indicial` takes the un-normalized ``lambda`` of the displayed
family.

Moving the abscissa across an indicial root picks up the residue operator of
the transform at that root; summing the residues of the *visible* roots (the
finitely many that sit on the wrong side of the axis for the weight to be
tempered) continues the resolvent beyond the axis in s.  The pieces exposed
here:

``solve_indicial``     one tempered sphere solve of (I(lambda) - h s) f = g,
``resolvent_line``     the contour transform along a regular abscissa,
``residue_apply``      the residue operator of one enclosed root, via a small
                       circle in w (with an optional distribution-paired
                       channel that sees the rank concentrated at the north
                       pole and the r e^{w0 r} Jordan component),
``continue_resolvent`` the visible-root continuation, including the two
                       equivalent strip-patched expressions when roots sit on
                       the imaginary axis,
``rho_max``            the visibility radius at one s,
``rho_max_prime``      its supremum over the half-plane Re s >= tau.

Inputs live on the sphere as finite sums of separated terms
``P(cos phi) sin(phi)^m u^mu`` (:class:`SphereFunction`), or on the cylinder
with an additional radial amplitude per term (:class:`CuspFunction`).
Outputs are gridded fields (:class:`CuspField`) carrying error-estimate
metadata.  All lambda-solves over a contour are independent; they are
evaluated in deterministic vectorized batches, so results are reproducible
run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from ._sphere import homogeneous_dimension
from .errors import (
    ContourOnRootError,
    InvalidEnclosureError,
    NearSingularError,
    PoleError,
    ToleranceError,
    ValidationError,
)
from .indicial import IndicialRoot, ModelOperator, jordan_partner_level

__all__ = [
    "X_MAX",
    "ModeTerm",
    "SphereFunction",
    "SphereSolution",
    "CuspTerm",
    "CuspFunction",
    "CuspField",
    "ContourSpec",
    "ResidueOperator",
    "ResidueOutput",
    "VisibleRootSet",
    "default_x_grid",
    "default_r_grid",
    "solve_indicial",
    "resolvent_line",
    "residue_apply",
    "continue_resolvent",
    "visible_roots",
    "rho_max",
    "rho_max_prime",
]

# Evaluation grids stay a fixed distance below the north pole x = 1, where
# generic solutions carry the algebraic singularity (1 - x)^{a+}.
X_MAX = 1.0 - 5e-3

_MODE_CAP = 8           # largest transverse mode order accepted
_SERIES_EDGE = 0.2      # switch point between the series and quadrature legs
_N_SERIES = 150         # Taylor order of the south series (radius 2, |y|<=1.2)
_N_PART = 64            # Taylor order of the north-side particular series
_EXP_CLAMP = 650.0      # largest exponent magnitude accepted in ratio form
_ROOT_GUARD = 1e-8      # pointwise-solve exclusion distance, lambda units
_ABSCISSA_GUARD = 1e-6  # abscissa-to-root real-part separation, w units
_CROSSING_GUARD = 1e-8  # continuation exclusion distance to s-crossings
_X_PAIR_SPLIT = 0.85    # split point of the paired channel near the pole
_RES_GUARD = 5e-4       # particular-series resonance clearance


def _gl(order: int):
    if order not in _gl.cache:
        _gl.cache[order] = leggauss(order)
    return _gl.cache[order]


_gl.cache = {}


def _panel_nodes(edges, order):
    """Gauss-Legendre nodes/weights on consecutive panels [e_k, e_{k+1}]."""
    t, w = _gl(order)
    edges = np.asarray(edges, float)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _taylor_shift(poly, x0: complex) -> np.ndarray:
    """Coefficients of P(x0 + z) in powers of z."""
    poly = np.asarray(poly, complex).ravel()
    out = np.zeros(poly.size, complex)
    for k in range(poly.size):
        ck = poly[k]
        if ck == 0:
            continue
        for j in range(k + 1):
            out[j] += ck * math.comb(k, j) * x0 ** (k - j)
    return out


def _polyval(poly, x):
    poly = np.asarray(poly, complex).ravel()
    x = np.asarray(x)
    out = np.zeros(np.broadcast(x, 0.0).shape, complex)
    for ck in poly[::-1]:
        out = out * x + ck
    return out


# ---------------------------------------------------------------------------
# Root geometry in the normalized variable w = lambda / h
# ---------------------------------------------------------------------------


def _branch_base(op: ModelOperator, s: complex) -> complex:
    return complex(s) - complex(op.A) + op.d / 2.0


def _root_value(op: ModelOperator, s: complex, sign: int, n: int) -> complex:
    return sign * (_branch_base(op, s) + n)


def _make_root(op: ModelOperator, s: complex, sign: int, n: int) -> IndicialRoot:
    return IndicialRoot(
        sign=sign,
        n=n,
        a=float(sign * op.h),
        b=complex(sign * op.h * (op.d / 2.0 + n - complex(op.A))),
        multiplicity=homogeneous_dimension(op.d, n),
        jordan_index=2 if jordan_partner_level(op, s, n) is not None else 1,
    )


def _nearest_root(op: ModelOperator, s: complex, w: complex):
    """(sign, n, value, distance) of the root table point closest to w."""
    base = _branch_base(op, s)
    best = None
    for sign in (-1, 1):
        t = sign * w - base  # distance |w - sign(base+n)| = |t - n|
        for n in {0, max(0, math.floor(t.real)), max(0, math.floor(t.real) + 1)}:
            dist = abs(t - n)
            if best is None or dist < best[3]:
                best = (sign, n, _root_value(op, s, sign, n), dist)
    return best


def _roots_in_disc(op: ModelOperator, s: complex, w0: complex, radius: float):
    """All (sign, n, value) with |value - w0| <= radius."""
    base = _branch_base(op, s)
    found = []
    for sign in (-1, 1):
        t = sign * w0 - base
        lo = math.floor(t.real - radius) - 1
        hi = math.ceil(t.real + radius) + 1
        for n in range(max(0, lo), max(0, hi) + 1):
            val = _root_value(op, s, sign, n)
            if abs(val - w0) <= radius:
                found.append((sign, n, val))
    return found


def _min_abscissa_gap(op: ModelOperator, s: complex, rho: float) -> float:
    """min over the root table of |Re root - rho| (w units)."""
    base_re = _branch_base(op, s).real
    best = math.inf
    for sign in (-1, 1):
        # Re root = sign*(base_re + n); minimize |sign*(base_re+n) - rho|
        t = sign * rho - base_re
        for n in {0, max(0, math.floor(t)), max(0, math.floor(t) + 1)}:
            best = min(best, abs(sign * (base_re + n) - rho))
    return best


# ---------------------------------------------------------------------------
# Input / output containers
# ---------------------------------------------------------------------------


def _validate_term(d: int, m: int, mu, poly) -> tuple:
    if not (0 <= int(m) <= _MODE_CAP):
        raise ValidationError(
            f"transverse mode order m={m} outside the supported band 0..{_MODE_CAP}"
        )
    mu = tuple(int(v) for v in mu)
    if len(mu) != d or any(v < 0 for v in mu):
        raise ValidationError(f"angular multi-index {mu} invalid for d={d}")
    poly = tuple(complex(cv) for cv in poly)
    if len(poly) == 0:
        raise ValidationError("empty profile polynomial")
    return mu, poly


@dataclass(frozen=True)
class ModeTerm:
    """One separated sphere term  P(cos phi) sin(phi)^m u^mu.

    m    : power of sin(phi) (0..8)
    mu   : angular monomial multi-index over the d ambient coordinates of u
    poly : coefficients of P in x = cos(phi), ascending
    """

    m: int
    mu: tuple
    poly: tuple


@dataclass(frozen=True)
class SphereFunction:
    """A finite sum of separated terms on the transverse sphere."""

    d: int
    terms: tuple

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"need d >= 1, got d={self.d}")
        fixed = []
        for t in self.terms:
            mu, poly = _validate_term(self.d, t.m, t.mu, t.poly)
            fixed.append(ModeTerm(m=int(t.m), mu=mu, poly=poly))
        object.__setattr__(self, "terms", tuple(fixed))

    @classmethod
    def monomial(cls, d: int, m: int = 0, mu=None, poly=(1.0,)) -> "SphereFunction":
        if mu is None:
            mu = (0,) * d
        return cls(d=d, terms=(ModeTerm(m=m, mu=tuple(mu), poly=tuple(poly)),))

    def value(self, phi: float, u) -> complex:
        u = np.atleast_1d(np.asarray(u, float))
        x = math.cos(phi)
        sp = math.sin(phi)
        total = 0.0 + 0.0j
        for t in self.terms:
            ang = float(np.prod(u ** np.asarray(t.mu)))
            total += complex(_polyval(t.poly, x)) * sp ** t.m * ang
        return total

    def sup_scale(self) -> float:
        """A sup-norm scale: max over terms of sum |poly| (|x|,|sin| <= 1)."""
        return max(float(np.abs(np.asarray(t.poly)).sum()) for t in self.terms)


@dataclass(frozen=True)
class CuspTerm:
    """One separated cylinder term  a(r) P(cos phi) sin(phi)^m u^mu."""

    m: int
    mu: tuple
    poly: tuple
    radial: object  # vectorized callable r -> complex amplitude


@dataclass(frozen=True)
class CuspFunction:
    """A finite sum of separated terms on the half-cylinder."""

    d: int
    terms: tuple

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"need d >= 1, got d={self.d}")
        fixed = []
        for t in self.terms:
            mu, poly = _validate_term(self.d, t.m, t.mu, t.poly)
            if not callable(t.radial):
                raise ValidationError("CuspTerm.radial must be callable")
            fixed.append(CuspTerm(m=int(t.m), mu=mu, poly=poly, radial=t.radial))
        object.__setattr__(self, "terms", tuple(fixed))


def default_x_grid(n: int = 64, lo: float = -1.0, hi: float = X_MAX) -> np.ndarray:
    return np.linspace(lo, min(hi, X_MAX), n)


def default_r_grid(span: float = 30.0, n: int = 4096) -> np.ndarray:
    step = 2.0 * span / n
    return -span + step * np.arange(n)


@dataclass
class CuspField:
    """A gridded field on the half-cylinder, one value block per input term.

    terms holds (m, mu, values) with values of shape (n_r, n_x); the full
    scalar field at an angular point u is the sum of
    values * sin(phi)^m * u^mu over the terms, phi = arccos(x_grid).
    """

    d: int
    r_grid: np.ndarray
    x_grid: np.ndarray
    terms: tuple
    meta: dict = field(default_factory=dict)

    def term_values(self, i: int) -> np.ndarray:
        return self.terms[i][2]

    def scalar_values(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, float))
        sx = np.sqrt(np.maximum(0.0, 1.0 - self.x_grid**2))
        out = np.zeros((self.r_grid.size, self.x_grid.size), complex)
        for m, mu, vals in self.terms:
            ang = float(np.prod(u ** np.asarray(mu)))
            out += vals * (sx**m)[None, :] * ang
        return out

    def max_abs(self) -> float:
        return max(float(np.abs(v).max()) for _, _, v in self.terms)

    def _binary(self, other: "CuspField", sign: float) -> "CuspField":
        if not isinstance(other, CuspField):
            raise ValidationError("can only combine with another CuspField")
        if self.d != other.d or len(self.terms) != len(other.terms):
            raise ValidationError("field term structures differ")
        if self.r_grid.shape != other.r_grid.shape or not np.allclose(
            self.r_grid, other.r_grid
        ):
            raise ValidationError("field r-grids differ")
        if self.x_grid.shape != other.x_grid.shape or not np.allclose(
            self.x_grid, other.x_grid
        ):
            raise ValidationError("field x-grids differ")
        terms = []
        for (m1, mu1, v1), (m2, mu2, v2) in zip(self.terms, other.terms):
            if m1 != m2 or mu1 != mu2:
                raise ValidationError("field term structures differ")
            terms.append((m1, mu1, v1 + sign * v2))
        return CuspField(
            d=self.d,
            r_grid=self.r_grid,
            x_grid=self.x_grid,
            terms=tuple(terms),
            meta={},
        )

    def __add__(self, other):
        return self._binary(other, +1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def scaled(self, alpha: complex) -> "CuspField":
        return CuspField(
            d=self.d,
            r_grid=self.r_grid,
            x_grid=self.x_grid,
            terms=tuple((m, mu, alpha * v) for m, mu, v in self.terms),
            meta=dict(self.meta),
        )

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "r_grid": [float(v) for v in self.r_grid],
            "x_grid": [float(v) for v in self.x_grid],
            "terms": [
                {
                    "m": m,
                    "mu": list(mu),
                    "re": np.real(v).tolist(),
                    "im": np.imag(v).tolist(),
                }
                for m, mu, v in self.terms
            ],
            "meta": {k: v for k, v in self.meta.items() if _json_safe(v)},
        }


def _json_safe(v) -> bool:
    return isinstance(v, (int, float, str, bool, list, tuple, dict, type(None)))


# ---------------------------------------------------------------------------
# The per-mode tempered solve
# ---------------------------------------------------------------------------
#
# On the mode  F(x) sin(phi)^m u^mu  the family reduces to the first-order ODE
#
#     -h (1 - x^2) F'(x) + (h c x + h e) F(x) = G(x),
#     c = lambda/h + d/2 + m,   e = A - s,
#
# whose homogeneous solution is w(x) = (1-x)^{a+} (1+x)^{a-} with
# a+ = -(c+e)/2, a- = (e-c)/2.  The tempered branch is regular at the south
# pole x = -1; it is computed by its Taylor series in y = 1 + x (radius 2)
# on x <= _SERIES_EDGE and carried to the north by variation of constants in
# ratio form, with Gauss-Legendre panels graded toward x = 1.


def _exponents(op: ModelOperator, s: complex, m: int, lams: np.ndarray):
    c = lams / op.h + op.d / 2.0 + m
    e = complex(op.A) - complex(s)
    a_p = -(c + e) / 2.0
    a_m = (e - c) / 2.0
    return c, e, a_p, a_m


def _clamp_check(expo_real: np.ndarray):
    worst = float(np.max(expo_real)) if expo_real.size else 0.0
    if worst > _EXP_CLAMP:
        raise ToleranceError(
            f"ratio-form exponent {worst:.1f} exceeds the representable budget "
            f"{_EXP_CLAMP}; the requested weight/abscissa combination is out of "
            "range for double precision"
        )


def _series_coeffs(op: ModelOperator, c, e, a_m, b, n_terms: int) -> np.ndarray:
    """Taylor coefficients in y = 1 + x of the south-regular solution."""
    h = op.h
    n_lam = c.size
    coeff = np.zeros((n_lam, n_terms), complex)
    prev = np.zeros(n_lam, complex)
    for i in range(n_terms):
        bi = b[i] if i < b.size else 0.0
        num = bi - h * (i - 1 + c) * prev if i > 0 else np.full(n_lam, bi, complex)
        prev = num / (2.0 * h * (a_m - i))
        coeff[:, i] = prev
    return coeff


def _series_eval(coeff: np.ndarray, y: np.ndarray) -> np.ndarray:
    powers = y[None, :] ** np.arange(coeff.shape[1])[:, None]
    return coeff @ powers


def _voc_edges(x_targets: np.ndarray, x0: float) -> np.ndarray:
    """Panel edges of [x0, max target], geometric in (1 - x) toward 1."""
    edges = set(float(v) for v in x_targets)
    edges.add(x0)
    top = float(np.max(x_targets))
    dist, floor_dist, sigma = 1.0 - x0, 1.0 - top, 0.6
    k = 1
    while dist * sigma**k > floor_dist:
        cand = 1.0 - dist * sigma**k
        if x0 < cand < top:
            edges.add(cand)
        k += 1
    return np.array(sorted(edges))


def _solve_mode_profiles(
    op: ModelOperator,
    s: complex,
    m: int,
    poly,
    lams,
    x_eval,
    order: int = 24,
) -> np.ndarray:
    """Tempered mode profiles F(x) at x_eval, shape (n_lam, n_x).

    lams are the un-normalized lambda values of the displayed family.
    """
    lams = np.asarray(lams, complex).ravel()
    x_eval = np.asarray(x_eval, float).ravel()
    if x_eval.size == 0:
        return np.zeros((lams.size, 0), complex)
    if float(x_eval.max()) > X_MAX + 1e-12 or float(x_eval.min()) < -1.0 - 1e-12:
        raise ValidationError(
            f"evaluation grid must lie in [-1, {X_MAX}]; got "
            f"[{x_eval.min()}, {x_eval.max()}]"
        )
    srt = np.argsort(x_eval)
    xs = x_eval[srt]
    c, e, a_p, a_m = _exponents(op, s, m, lams)
    b = _taylor_shift(poly, -1.0)
    coeff = _series_coeffs(op, c, e, a_m, b, _N_SERIES)
    out = np.empty((lams.size, xs.size), complex)

    left = xs <= _SERIES_EDGE
    if left.any():
        out[:, left] = _series_eval(coeff, 1.0 + xs[left])
    if (~left).any():
        x0 = _SERIES_EDGE
        f0 = _series_eval(coeff, np.array([1.0 + x0]))[:, 0]
        xr = xs[~left]
        edges = _voc_edges(xr, x0)
        xi, wq = _panel_nodes(edges, order)
        l1_0, l2_0 = math.log(1.0 - x0), math.log(1.0 + x0)
        dl1 = np.log1p(-xi) - l1_0
        dl2 = np.log1p(xi) - l2_0
        src = -_polyval(poly, xi) / (op.h * (1.0 - xi**2))
        expo = -(a_p[:, None] * dl1[None, :] + a_m[:, None] * dl2[None, :])
        _clamp_check(expo.real)
        integ = np.exp(expo) * (src * wq)[None, :]
        prefix = np.cumsum(integ, axis=1)
        idx = np.searchsorted(xi, xr, side="right")
        acc = np.zeros((lams.size, xr.size), complex)
        pos = idx > 0
        acc[:, pos] = prefix[:, idx[pos] - 1]
        cl1 = np.log1p(-xr) - l1_0
        cl2 = np.log1p(xr) - l2_0
        carry_expo = a_p[:, None] * cl1[None, :] + a_m[:, None] * cl2[None, :]
        _clamp_check(carry_expo.real)
        out[:, ~left] = np.exp(carry_expo) * (f0[:, None] + acc)

    inv = np.empty_like(srt)
    inv[srt] = np.arange(srt.size)
    return out[:, inv]


# ---------------------------------------------------------------------------
# solve_indicial
# ---------------------------------------------------------------------------


@dataclass
class SphereSolution:
    """The tempered solution of (I(lambda) - h s) f = g on the sphere."""

    op: ModelOperator
    s: complex
    lam: complex
    terms: tuple
    x_grid: np.ndarray
    profiles: tuple  # per-term arrays (n_x,)
    meta: dict = field(default_factory=dict)

    def term_profile(self, i: int) -> np.ndarray:
        return self.profiles[i]

    def profile_at(self, i: int, x) -> np.ndarray:
        t = self.terms[i]
        return _solve_mode_profiles(self.op, self.s, t.m, t.poly, [self.lam], x)[0]

    def value(self, phi: float, u) -> complex:
        u = np.atleast_1d(np.asarray(u, float))
        x = math.cos(phi)
        sp = math.sin(phi)
        total = 0.0 + 0.0j
        for i, t in enumerate(self.terms):
            ang = float(np.prod(u ** np.asarray(t.mu)))
            total += complex(self.profile_at(i, [x])[0]) * sp ** t.m * ang
        return total

    def sup_norm(self) -> float:
        if not self.profiles:
            return 0.0
        return max(float(np.abs(p).max()) for p in self.profiles)

    def residual(self, n_probe: int = 24, delta: float = 1e-3) -> float:
        """sup of |(I - hs)f - g| over interior probes, via 7-point FD.

        An independent check of the solve: the mode ODE is re-applied with
        sixth-order central finite differences on fresh profile evaluations.
        """
        op, s, lam = self.op, self.s, self.lam
        scale = max(
            max(float(np.abs(np.asarray(t.poly)).sum()) for t in self.terms), 1e-300
        )
        # the profile oscillates on the x-scale 1/|lam/h|, so the probe step
        # shrinks accordingly to keep the stencil truncation term flat in lam
        delta = delta / (1.0 + abs(complex(lam)) / (4.0 * op.h))
        probes = np.linspace(-0.92, 0.79, n_probe)
        c6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
        worst = 0.0
        for i, t in enumerate(self.terms):
            c, e, _, _ = _exponents(op, s, t.m, np.array([lam], complex))
            stencil = np.concatenate(
                [probes + k * delta for k in (-3, -2, -1, 0, 1, 2, 3)]
            )
            vals = self.profile_at(i, stencil).reshape(7, n_probe)
            fx = vals[3]
            dfx = (c6[:, None] * vals).sum(axis=0) / delta
            lhs = -op.h * (1 - probes**2) * dfx + op.h * (
                c[0] * probes + e
            ) * fx
            res = lhs - _polyval(t.poly, probes)
            worst = max(worst, float(np.abs(res).max()))
        return worst / scale


def solve_indicial(
    op: ModelOperator,
    s: complex,
    lam: complex,
    g: SphereFunction,
    x_grid=None,
) -> SphereSolution:
    """Solve (I(lambda) - h s) f = g for the tempered branch on the sphere.

    lam is the un-normalized spectral weight of the displayed family.  Raises
    NearSingularError (carrying the offending root) when lam is within 1e-8
    of the root set at this s, where the tempered solve degenerates.
    """
    if not isinstance(g, SphereFunction):
        raise ValidationError("g must be a SphereFunction")
    if g.d != op.d:
        raise ValidationError(f"dimension mismatch: g.d={g.d}, op.d={op.d}")
    w = complex(lam) / op.h
    sign, n, val, dist = _nearest_root(op, s, w)
    if dist * op.h < _ROOT_GUARD:
        raise NearSingularError(
            f"lambda={complex(lam)} lies within {_ROOT_GUARD} of the indicial "
            f"root {val * op.h} (branch {sign:+d}, level {n}) at s={complex(s)}",
            root=_make_root(op, s, sign, n),
        )
    xg = default_x_grid() if x_grid is None else np.asarray(x_grid, float)
    profiles = tuple(
        _solve_mode_profiles(op, s, t.m, t.poly, [lam], xg)[0] for t in g.terms
    )
    return SphereSolution(
        op=op,
        s=s,
        lam=complex(lam),
        terms=g.terms,
        x_grid=xg,
        profiles=profiles,
        meta={"root_distance": dist * op.h, "series_order": _N_SERIES},
    )


# ---------------------------------------------------------------------------
# Contour transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContourSpec:
    """A vertical contour Re w = rho in the normalized variable w = lambda/h.

    rho      : abscissa (w units)
    height   : truncation half-height of the eta-integral
    panels   : number of Gauss-Legendre panels (order 16 each) on [-H, H]
    tail_tol : reporting threshold for the truncation-tail estimate
    """

    rho: float
    height: float = 40.0
    panels: int = 48
    tail_tol: float = 1e-9

    def __post_init__(self):
        if not self.height > 0:
            raise ValidationError(f"need height > 0, got {self.height}")
        if self.panels < 4:
            raise ValidationError(f"need panels >= 4, got {self.panels}")
        if not self.tail_tol > 0:
            raise ValidationError(f"need tail_tol > 0, got {self.tail_tol}")

    def eta_nodes(self):
        edges = np.linspace(-self.height, self.height, self.panels + 1)
        return _panel_nodes(edges, 16)

    def r_window(self) -> float:
        """|r| up to which the panel quadrature resolves e^{i eta r}."""
        return 11.2 * self.panels / self.height


def _refined_eta_nodes(op: ModelOperator, s: complex, contour: ContourSpec):
    """Panel nodes on [-H, H], refined near the ordinates of minus-branch
    roots that lie close to the contour line.

    The pointwise profile family w -> v_w has simple poles exactly at the
    minus-branch roots; when such a root sits within one panel height of
    Re w = rho the integrand spikes on an eta-scale equal to the horizontal
    gap, which uniform panels cannot resolve.  Edges are inserted in a
    geometric ladder around the root ordinate so every panel is at least as
    far from the pole as it is wide.  Returns (eta, weights, base_panel).
    """
    H, P = contour.height, contour.panels
    hpanel = 2.0 * H / P
    edges = list(np.linspace(-H, H, P + 1))
    base = _branch_base(op, s)
    eta0 = -base.imag  # shared ordinate of every minus root
    if abs(eta0) < H:
        n_c = -base.real - contour.rho
        n_lo = max(0, int(math.ceil(n_c - hpanel)))
        n_hi = int(math.floor(n_c + hpanel))
        ladder = None
        for n in range(n_lo, n_hi + 1):
            dist = abs(-base.real - n - contour.rho)
            if dist < hpanel:
                ladder = dist if ladder is None else min(ladder, dist)
        if ladder is not None:
            d = max(ladder / 2.0, 1e-7)
            edges.append(eta0)
            while d < hpanel:
                if abs(eta0 + d) < H:
                    edges.append(eta0 + d)
                if abs(eta0 - d) < H:
                    edges.append(eta0 - d)
                d *= 2.0
    arr = np.asarray(sorted(edges))
    keep = np.concatenate([[True], np.diff(arr) > 1e-11 * max(H, 1.0)])
    arr = arr[keep]
    arr[-1] = H
    eta, wq = _panel_nodes(arr, 16)
    return eta, wq, hpanel


def _fhat(term: CuspTerm, wl: np.ndarray, r: np.ndarray, step: float) -> np.ndarray:
    """Trapezoid transform fhat(w) = int e^{-w r} a(r) dr on the r-grid."""
    a = np.asarray(term.radial(r), complex)
    out = np.empty(wl.size, complex)
    block = 128
    for k in range(0, wl.size, block):
        wb = wl[k : k + block]
        out[k : k + block] = step * (np.exp(-np.outer(wb, r)) @ a)
    return out


def resolvent_line(
    op: ModelOperator,
    s: complex,
    contour: ContourSpec,
    f: CuspFunction,
    x_grid=None,
    r_span: float = 30.0,
    n_r: int = 4096,
) -> CuspField:
    """The weighted resolvent along a regular abscissa, as a gridded field.

    Raises ContourOnRootError when some indicial root has Re within 1e-6 of
    contour.rho, where the line ceases to separate the root set.
    """
    if not isinstance(f, CuspFunction):
        raise ValidationError("f must be a CuspFunction")
    if f.d != op.d:
        raise ValidationError(f"dimension mismatch: f.d={f.d}, op.d={op.d}")
    gap = _min_abscissa_gap(op, s, contour.rho)
    if gap < _ABSCISSA_GUARD:
        raise ContourOnRootError(
            f"abscissa rho={contour.rho} passes within {gap:.3e} of an indicial "
            f"root's real part at s={complex(s)}; move the contour"
        )
    xg = default_x_grid() if x_grid is None else np.asarray(x_grid, float)
    r = default_r_grid(r_span, n_r)
    step = r[1] - r[0]
    eta, wq, base_panel = _refined_eta_nodes(op, s, contour)
    wl = contour.rho + 1j * eta
    tail_sel = np.abs(eta) >= contour.height - base_panel - 1e-12
    tail_rel = 0.0
    terms_out = []
    for term in f.terms:
        fh = _fhat(term, wl, r, step)
        prof = _solve_mode_profiles(op, s, term.m, term.poly, op.h * wl, xg)
        coeff = (wq * fh)[:, None] * prof  # (n_q, n_x)
        vals = np.zeros((r.size, xg.size), complex)
        block = 128
        for k in range(0, wl.size, block):
            kernel = np.exp(np.outer(r, wl[k : k + block]))
            vals += kernel @ coeff[k : k + block]
        tails = np.exp(np.outer(r, wl[tail_sel])) @ coeff[tail_sel]
        vals /= 2.0 * math.pi
        tails /= 2.0 * math.pi
        # estimate the truncation tail inside the window where the panel
        # quadrature resolves e^{i eta r}; beyond it both numerator and
        # denominator are dominated by the e^{rho r} roundoff floor
        rwin = np.abs(r) <= contour.r_window()
        scale = float(np.abs(vals[rwin]).max()) or 1.0
        tail_rel = max(tail_rel, float(np.abs(tails[rwin]).max()) / scale)
        terms_out.append((term.m, term.mu, vals))
    meta = {
        "abscissa": contour.rho,
        "contour_tail_rel": tail_rel,
        "tail_ok": tail_rel <= contour.tail_tol,
        "r_window": contour.r_window(),
        "root_gap": gap,
    }
    return CuspField(d=op.d, r_grid=r, x_grid=xg, terms=tuple(terms_out), meta=meta)


# ---------------------------------------------------------------------------
# Residue operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidueOperator:
    """A small positively-oriented circle |w - lambda0| = eps in w = lambda/h.

    s       : spectral parameter the root table is evaluated at
    lambda0 : circle center (w units)
    eps     : circle radius
    order   : trapezoid node count on the circle
    """

    s: complex
    lambda0: complex
    eps: float = 1e-2
    order: int = 24

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError(f"need eps > 0, got {self.eps}")
        if self.order < 8:
            raise ValidationError(f"need order >= 8, got {self.order}")


class _ResonanceError(Exception):
    """Internal: a circle node fell on a particular-series resonance."""


@dataclass
class ResidueOutput:
    """The residue operator applied to f:  e^{w0 r} (H0 + r H1) per term.

    Pointwise channel (paired=False): H0/H1 are x-profiles on x_grid.  The
    part of the residue concentrated at the north pole (the Dirac-jet family
    of the plus branch) has zero pointwise trace on interior grids, so plain
    grids see only the south-branch rank; rank and Jordan structure carried
    by the jets appear in the paired channel (paired=True), where H0/H1 are
    scalars  <residue f, Q(x)>  against the weight (1-x^2)^{m + d/2 - 1}
    continued across the pole.
    """

    d: int
    s: complex
    lambda0: complex
    term_keys: tuple  # (m, mu) per input term
    H0: tuple
    H1: tuple
    paired: bool
    x_grid: np.ndarray | None
    meta: dict = field(default_factory=dict)

    def field(self, r_grid) -> CuspField:
        if self.paired:
            raise ValidationError("paired residue output has no gridded field")
        r = np.asarray(r_grid, float)
        ex = np.exp(self.lambda0 * r)
        terms = []
        for (m, mu), h0, h1 in zip(self.term_keys, self.H0, self.H1):
            vals = ex[:, None] * (h0[None, :] + r[:, None] * h1[None, :])
            terms.append((m, mu, vals))
        return CuspField(
            d=self.d, r_grid=r, x_grid=self.x_grid, terms=tuple(terms), meta={}
        )

    def paired_series(self, r) -> np.ndarray:
        if not self.paired:
            raise ValidationError("pointwise residue output has no paired series")
        r = np.asarray(r, float)
        h0 = sum(self.H0)
        h1 = sum(self.H1)
        return np.exp(self.lambda0 * r) * (h0 + r * h1)

    def max_abs(self) -> float:
        if self.paired:
            return max(
                max(abs(v) for v in self.H0), max(abs(v) for v in self.H1)
            )
        m0 = max(float(np.abs(v).max()) for v in self.H0)
        m1 = max(float(np.abs(v).max()) for v in self.H1)
        return max(m0, m1)


def _validate_enclosure(op: ModelOperator, res_op: ResidueOperator):
    """The circle must cleanly separate at most one root-table point."""
    w0, eps = complex(res_op.lambda0), res_op.eps
    near = _roots_in_disc(op, res_op.s, w0, 2.0 * eps)
    clusters: list[list] = []
    for item in near:
        for cl in clusters:
            if abs(item[2] - cl[0][2]) < 1e-10:
                cl.append(item)
                break
        else:
            clusters.append([item])
    inside = []
    for cl in clusters:
        dist = abs(cl[0][2] - w0)
        if 0.8 * eps <= dist <= 2.0 * eps:
            raise InvalidEnclosureError(
                f"root at w={cl[0][2]} sits at distance {dist:.3e} from the "
                f"circle center, within [0.8, 2] x eps={eps}; shrink eps or "
                "recenter"
            )
        if dist < 0.8 * eps:
            inside.append(cl)
    if len(inside) > 1:
        raise InvalidEnclosureError(
            f"circle of radius {eps} at w={w0} encloses "
            f"{len(inside)} distinct root locations; shrink eps"
        )
    return [item for cl in inside for item in cl]


def residue_apply(
    res_op: ResidueOperator,
    op: ModelOperator,
    f: CuspFunction,
    psi=None,
    x_grid=None,
    r_span: float = 30.0,
    n_r: int = 4096,
) -> ResidueOutput:
    """Apply the residue operator of the enclosed root to f.

    psi=None      : pointwise channel; H0/H1 gridded on x_grid.
    psi=(q0,q1..) : paired channel against the polynomial probe Q(x) with the
                    per-term weight (1-x^2)^{m + d/2 - 1}, meromorphically
                    continued across the north pole; H0/H1 scalars per term.

    The circle moments are trapezoid sums over res_op.order nodes, spectrally
    accurate in the node count; H1 is nonzero exactly when the enclosed point
    carries a second-order pole (the Jordan crossings), producing the
    r e^{w0 r} component.
    """
    if not isinstance(f, CuspFunction):
        raise ValidationError("f must be a CuspFunction")
    if f.d != op.d:
        raise ValidationError(f"dimension mismatch: f.d={f.d}, op.d={op.d}")
    enclosed = _validate_enclosure(op, res_op)
    s, w0, eps, order = res_op.s, complex(res_op.lambda0), res_op.eps, res_op.order
    r = default_r_grid(r_span, n_r)
    step = r[1] - r[0]
    xg = default_x_grid() if x_grid is None else np.asarray(x_grid, float)

    offsets = (0.37, 0.11, 0.64, 0.89)
    last_err: Exception | None = None
    for off in offsets:
        theta = 2.0 * math.pi * (np.arange(order) + off) / order
        wl = w0 + eps * np.exp(1j * theta)
        try:
            H0, H1, m2_rel = [], [], 0.0
            for term in f.terms:
                fh = _fhat(term, wl, r, step)
                if psi is None:
                    g_vals = (
                        _solve_mode_profiles(op, s, term.m, term.poly, op.h * wl, xg)
                        * fh[:, None]
                    )
                else:
                    paired = _paired_mode_values(
                        op, s, term.m, term.poly, op.h * wl, tuple(psi)
                    )
                    g_vals = (paired * fh)[:, None]
                phase1 = np.exp(1j * theta)
                phase2 = np.exp(2j * theta)
                m0 = eps * np.mean(phase1[:, None] * g_vals, axis=0)
                m1 = eps**2 * np.mean(phase2[:, None] * g_vals, axis=0)
                m2 = eps**3 * np.mean(
                    np.exp(3j * theta)[:, None] * g_vals, axis=0
                )
                scale = max(float(np.abs(m0).max()), float(np.abs(m1).max()), 1e-300)
                m2_rel = max(m2_rel, float(np.abs(m2).max()) / scale)
                if psi is None:
                    H0.append(m0)
                    H1.append(m1)
                else:
                    H0.append(complex(m0[0]))
                    H1.append(complex(m1[0]))
            return ResidueOutput(
                d=op.d,
                s=complex(s),
                lambda0=w0,
                term_keys=tuple((t.m, t.mu) for t in f.terms),
                H0=tuple(H0),
                H1=tuple(H1),
                paired=psi is not None,
                x_grid=None if psi is not None else xg,
                meta={
                    "eps": eps,
                    "order": order,
                    "enclosed": [(sg, n) for sg, n, _ in enclosed],
                    "third_moment_rel": m2_rel,
                    "node_offset": off,
                },
            )
        except _ResonanceError as exc:  # rotate the nodes and retry
            last_err = exc
    raise ToleranceError(
        f"could not place circle nodes clear of particular-series resonances "
        f"around w0={w0}: {last_err}"
    )


# -- the paired (distribution) channel --------------------------------------


def _npart_coeffs(op: ModelOperator, c, a_p, gcoef, n_terms: int) -> np.ndarray:
    """Taylor coefficients in y = 1 - x of the particular solution at N.

    d_i = (g_i + h (c + i - 1) d_{i-1}) / (2 h (i - a+)); resonances at
    a+ = i >= 0 (not indicial roots) abort to a node rotation.
    """
    h = op.h
    coeff = np.zeros((c.size, n_terms), complex)
    prev = np.zeros(c.size, complex)
    for i in range(n_terms):
        den = 2.0 * h * (i - a_p)
        if float(np.min(np.abs(den))) < _RES_GUARD * h:
            raise _ResonanceError(f"resonance a+ ~ {i} on a circle node")
        gi = gcoef[i] if i < len(gcoef) else 0.0
        num = gi + h * (c + i - 1) * prev if i > 0 else np.full(c.size, gi, complex)
        prev = num / den
        coeff[:, i] = prev
    return coeff


def _binom_series(p: np.ndarray, n_terms: int) -> np.ndarray:
    """Coefficients of (2 - y)^p = sum_j coef_j y^j, per row of p."""
    coef = np.zeros((p.size, n_terms), complex)
    coef[:, 0] = np.exp(p * math.log(2.0))
    for j in range(1, n_terms):
        coef[:, j] = coef[:, j - 1] * (p - (j - 1)) / j * (-0.5)
    return coef


def _paired_mode_values(
    op: ModelOperator,
    s: complex,
    m: int,
    poly,
    lams: np.ndarray,
    q_poly: tuple,
    order: int = 24,
) -> np.ndarray:
    """<F_lam, Q>_beta = int_{-1}^{1} F_lam Q (1-x^2)^beta dx, continued.

    beta = m + d/2 - 1 (the mode's own sin-power joined with the sphere
    volume weight).  The integral over [-1, x_c] uses the solved profile; on
    [x_c, 1] the solution is split as (analytic particular series at N) +
    K * (1-x)^{a+} (1+x)^{a-}, the analytic part is integrated directly and
    the homogeneous part through the Taylor-subtracted moment continuation,
    whose denominators 2(a+ + beta + j + 1) vanish exactly on the plus-branch
    root condition a+ + d/2 + m = -j.
    """
    lams = np.asarray(lams, complex).ravel()
    d, h = op.d, op.h
    beta = m + d / 2.0 - 1.0
    c, e, a_p, a_m = _exponents(op, s, m, lams)
    x_c = _X_PAIR_SPLIT
    q_poly = tuple(complex(v) for v in q_poly)

    # piece 1: [-1, x_c] on the solved profile, desingularized by 1+x = tau^2.
    # Panel edges are graded in x toward the north end: both the profile
    # (~ (1-x)^{Re a+}) and, for odd d, the half-integer weight (2-tau^2)^beta
    # steepen toward x = 1, so uniform panels would sit too close to that
    # branch point for the quadrature to converge.
    x_edges = [-1.0, -0.55, -0.1, _SERIES_EDGE]
    gap = 1.0 - _SERIES_EDGE
    while gap * 0.55 > 1.0 - x_c:
        gap *= 0.55
        x_edges.append(1.0 - gap)
    x_edges.append(x_c)
    tau_edges = np.sqrt(1.0 + np.asarray(x_edges))
    tau, wt = _panel_nodes(tau_edges, order)
    x1 = tau**2 - 1.0
    prof = _solve_mode_profiles(op, s, m, poly, lams, np.minimum(x1, x_c))
    w1 = (2.0 - tau**2) ** beta * tau ** (2.0 * beta + 1.0) * 2.0 * wt
    I1 = prof @ (w1 * _polyval(q_poly, x1))

    # north-side split pieces
    g1 = _taylor_shift(poly, 1.0)
    g1 = g1 * ((-1.0) ** np.arange(g1.size))  # coefficients in y = 1 - x
    dpart = _npart_coeffs(op, c, a_p, g1, _N_PART)

    # piece 2: [x_c, 1] on the analytic particular series, 1 - x = t^2
    t_hi = math.sqrt(1.0 - x_c)
    t2, wt2 = _panel_nodes(np.linspace(0.0, t_hi, 4), order)
    y2 = t2**2
    powers = y2[None, :] ** np.arange(_N_PART)[:, None]
    fpart_vals = dpart @ powers
    w2 = (
        t2 ** (2.0 * beta + 1.0)
        * (2.0 - y2) ** beta
        * 2.0
        * wt2
        * _polyval(q_poly, 1.0 - y2)
    )
    I2 = fpart_vals @ w2

    # piece 3: K * continued int (1-x)^{a+ + beta} (1+x)^{a- + beta} Q dx
    fp_xc = dpart @ ((1.0 - x_c) ** np.arange(_N_PART))
    f_xc = _solve_mode_profiles(op, s, m, poly, lams, np.array([x_c]))[:, 0]
    w_xc = np.exp(a_p * math.log(1.0 - x_c) + a_m * math.log(1.0 + x_c))
    K = (f_xc - fp_xc) / w_xc

    gamma = a_p + beta
    # Taylor of Atil(y) = (2-y)^{a- + beta} Q(1-y) to J terms
    j_terms = int(max(0.0, math.ceil(-2.0 * float(np.max(gamma.real)) - 1.0)) + 6)
    qa = _taylor_shift(q_poly, 1.0)
    qa = qa * ((-1.0) ** np.arange(qa.size))
    bin_ser = _binom_series(a_m + beta, j_terms)
    atil = np.zeros((lams.size, j_terms), complex)
    for j in range(j_terms):
        kmax = min(j, qa.size - 1)
        for k in range(kmax + 1):
            atil[:, j] += bin_ser[:, j - k] * qa[k]
    jj = np.arange(j_terms)
    mom_den = 2.0 * gamma[:, None] + 2.0 * jj[None, :] + 2.0
    tc_pow = np.exp((2.0 * gamma[:, None] + 2.0 * jj[None, :] + 2.0) * math.log(t_hi))
    moments = 2.0 * np.sum(atil * tc_pow / mom_den, axis=1)

    # Taylor-subtracted remainder, geometric panels toward t = 0.  The true
    # integrand decays like t^kappa with kappa = 2 Re gamma + 1 + 2 j_terms
    # (>= 11 by the choice of j_terms), while the computed a_tail bottoms out
    # at the cancellation floor ~1e-16 of a_full - (Taylor sum).  Panels are
    # therefore cut off at t* where t*^(kappa+1) ~ 1e-17: below that the
    # integrand is roundoff noise amplified by t^{2 Re gamma + 1} < 0, and the
    # neglected genuine tail is below 1e-17 by construction.
    rem = np.zeros(lams.size, complex)
    p_ang = a_m + beta
    kappa = 2.0 * float(np.min(gamma.real)) + 1.0 + 2.0 * j_terms
    t_star = 10.0 ** (-17.0 / (kappa + 1.0))
    levels = max(1, int(math.ceil(math.log2(t_hi / min(t_star, t_hi / 2.0)))))
    hi = t_hi
    for _ in range(levels):
        lo = hi * 0.5
        tn, wn = _panel_nodes(np.array([lo, hi]), order)
        yn = tn**2
        a_full = np.exp(p_ang[:, None] * np.log(2.0 - yn)[None, :]) * _polyval(
            q_poly, 1.0 - yn
        )
        a_tail = a_full - atil @ (yn[None, :] ** np.arange(j_terms)[:, None])
        t_fac = np.exp((2.0 * gamma[:, None] + 1.0) * np.log(tn)[None, :])
        panel = 2.0 * np.sum(a_tail * t_fac * wn[None, :], axis=1)
        rem += panel
        hi = lo
    I3 = K * (moments + rem)
    return I1 + I2 + I3


# ---------------------------------------------------------------------------
# Visible roots and the continued resolvent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VisibleRootSet:
    """The finitely many roots strictly crossed by tempering the weight.

    positive_visible: plus-branch roots with Re w < 0 (each with its level in
    positive_levels); negative_visible: minus-branch roots with Re w > 0.
    """

    positive_visible: tuple
    negative_visible: tuple
    positive_levels: tuple = ()
    negative_levels: tuple = ()


def visible_roots(op: ModelOperator, s: complex) -> VisibleRootSet:
    base = _branch_base(op, s)
    pos, neg, pos_n, neg_n = [], [], [], []
    n = 0
    while base.real + n < 0:
        pos.append(base + n)
        pos_n.append(n)
        neg.append(-(base + n))
        neg_n.append(n)
        n += 1
    return VisibleRootSet(
        positive_visible=tuple(pos),
        negative_visible=tuple(neg),
        positive_levels=tuple(pos_n),
        negative_levels=tuple(neg_n),
    )


def rho_max(op: ModelOperator, s: complex) -> float:
    """max(0, |Re w|) over the visible roots at s (w units)."""
    vis = visible_roots(op, s)
    worst = 0.0
    for w in vis.positive_visible + vis.negative_visible:
        worst = max(worst, abs(w.real))
    return worst


def rho_max_prime(op: ModelOperator, tau: float) -> float:
    """sup of rho_max over Re s >= tau: max(0, Re A - tau - d/2)."""
    return max(0.0, complex(op.A).real - float(tau) - op.d / 2.0)


def _crossing_check(op: ModelOperator, s: complex):
    """Raise PoleError when s sits on an equal-parity branch collision.

    Collisions solve 2(s - A) + d + n + p = 0 with integer levels n, p >= 0;
    the colliding pair produces a rank-deficient (index-2) point exactly when
    n - p is even, i.e. when t = -2(s - A) - d is an even integer >= 0.
    """
    t = -2.0 * (complex(s) - complex(op.A)) - op.d
    if abs(t.imag) > _CROSSING_GUARD:
        return
    t_even = 2.0 * round(t.real / 2.0)
    if t_even < 0:
        return
    if abs(t.real - t_even) < 2.0 * _CROSSING_GUARD:
        raise PoleError(
            f"s={complex(s)} lies within {_CROSSING_GUARD} of the root-crossing "
            f"set (branch levels summing to {int(t_even)} collide); the "
            "continued resolvent has a pole here",
            j=int(t_even),
            k=0,
        )


def _auto_residue(op: ModelOperator, s: complex, w0: complex) -> ResidueOperator:
    """A safely-enclosing circle at w0, shrunk below half the root gap."""
    others = [
        abs(val - w0)
        for _, _, val in _roots_in_disc(op, s, w0, 1.0)
        if abs(val - w0) > 1e-10
    ]
    eps = 1e-2
    if others:
        eps = min(eps, 0.35 * min(others))
    eps = max(eps, 1e-5)
    return ResidueOperator(s=s, lambda0=w0, eps=eps, order=24)


def continue_resolvent(
    op: ModelOperator,
    s: complex,
    f: CuspFunction,
    x_grid=None,
    r_span: float = 30.0,
    n_r: int = 4096,
    contour: ContourSpec | None = None,
    patch_side: str = "below",
    strip_half_width: float = 0.1,
) -> CuspField:
    """The continued resolvent at s, beyond the axis of absolute convergence.

    When the imaginary axis is regular (no root with |Re w| < 1e-6) this is
    the axis transform corrected by the visible residues,

        R(s) = R_0(s) - sum_{plus visible} B + sum_{minus visible} B.

    When roots sit on the axis the strip patch is used instead: with
    rho < 0 < rho' enclosing only the axis roots,

      patch_side='below':  R_rho  + sum_{minus roots in strip} B + tails,
      patch_side='above':  R_rho' - sum_{plus  roots in strip} B + tails,

    where tails are the visible corrections beyond the strip; the two
    expressions agree identically.  Raises PoleError when s sits within 1e-8
    of the root-crossing set, where the continuation itself has a pole.
    """
    if patch_side not in ("below", "above"):
        raise ValidationError(f"patch_side must be 'below' or 'above', got {patch_side}")
    _crossing_check(op, s)
    xg = default_x_grid() if x_grid is None else np.asarray(x_grid, float)
    base = ContourSpec(rho=0.0) if contour is None else contour
    vis = visible_roots(op, s)
    axis_gap = _min_abscissa_gap(op, s, 0.0)
    meta: dict = {
        "visible_plus": [complex(v) for v in vis.positive_visible],
        "visible_minus": [complex(v) for v in vis.negative_visible],
    }

    def _residue_field(w0: complex) -> CuspField:
        res = residue_apply(
            _auto_residue(op, s, w0), op, f, x_grid=xg, r_span=r_span, n_r=n_r
        )
        return res.field(default_r_grid(r_span, n_r))

    if axis_gap >= _ABSCISSA_GUARD:
        line = ContourSpec(
            rho=0.0,
            height=base.height,
            panels=base.panels,
            tail_tol=base.tail_tol,
        )
        out = resolvent_line(op, s, line, f, x_grid=xg, r_span=r_span, n_r=n_r)
        corrections = 0
        for w0 in vis.positive_visible:
            out = out - _residue_field(w0)
            corrections += 1
        for w0 in vis.negative_visible:
            out = out + _residue_field(w0)
            corrections += 1
        meta.update(
            branch="regular", corrections=corrections, contour_meta=out.meta
        )
        out.meta = meta
        return out

    # strip patch around the axis roots
    nonaxis = []
    for sign in (-1, 1):
        t = 0.0  # enumerate |Re| of roots near the axis
        basec = _branch_base(op, s)
        n0 = max(0, math.floor(-basec.real) - 2)
        for n in range(n0, n0 + 5):
            re = (sign * (basec + n)).real
            if abs(re) > _ABSCISSA_GUARD:
                nonaxis.append(abs(re))
        del t
    gap = min(nonaxis) if nonaxis else 1.0
    width = min(strip_half_width, 0.5 * gap)
    rho_lo, rho_hi = -width, +width
    basec = _branch_base(op, s)
    strip_minus, strip_plus = [], []
    n = 0
    while True:
        re_m = (-(basec + n)).real
        re_p = (basec + n).real
        hit = False
        if rho_lo < re_m < rho_hi:
            strip_minus.append(-(basec + n))
            hit = True
        if rho_lo < re_p < rho_hi:
            strip_plus.append(basec + n)
            hit = True
        if not hit and n > abs(basec.real) + 2:
            break
        n += 1

    if patch_side == "below":
        line = ContourSpec(
            rho=rho_lo, height=base.height, panels=base.panels, tail_tol=base.tail_tol
        )
        out = resolvent_line(op, s, line, f, x_grid=xg, r_span=r_span, n_r=n_r)
        for w0 in strip_minus:
            out = out + _residue_field(w0)
    else:
        line = ContourSpec(
            rho=rho_hi, height=base.height, panels=base.panels, tail_tol=base.tail_tol
        )
        out = resolvent_line(op, s, line, f, x_grid=xg, r_span=r_span, n_r=n_r)
        for w0 in strip_plus:
            out = out - _residue_field(w0)
    corrections = len(strip_minus) if patch_side == "below" else len(strip_plus)
    for w0 in vis.negative_visible:
        if w0.real > rho_hi:
            out = out + _residue_field(w0)
            corrections += 1
    for w0 in vis.positive_visible:
        if w0.real < rho_lo:
            out = out - _residue_field(w0)
            corrections += 1
    meta.update(
        branch="patched",
        strip=(rho_lo, rho_hi),
        patch_side=patch_side,
        corrections=corrections,
        contour_meta=out.meta,
    )
    out.meta = meta
    return out
