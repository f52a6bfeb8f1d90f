"""Jet-space algebra at the regular pole of the transverse sphere.

The chart used throughout the package maps a neighbourhood of the pole
``N`` of S^d to a ball in R^d via  x = sin(phi) * u  (u in S^{d-1}), so
rho = |x| = sin(phi) and cos(phi) = sqrt(1 - rho^2) on the upper hemisphere.
The sphere volume element is  dVol = (1 - rho^2)^{-1/2} dx.

Two families of order-mu functionals at x = 0 appear:

* the *flat jet*      D_mu[F]  = d^mu F(0)        on chart functions F,
* the *volume jet*    B_mu[psi] = D_mu[J psi]     with J = (1-rho^2)^{-1/2},

and the Dirac-type eigenfunctionals are weighted volume jets

    delta_mu(lambda)[psi] = D_mu[ w^(lambda/h - |mu| - d/2) * J * psi ],

where  w = 2 / (1 + sqrt(1 - rho^2))  is the pole-conjugation factor
(equal to 2*tan(phi/2)/sin(phi)).

This module provides truncated power series in t = rho^2 with exact
(Fraction) or complex coefficients, the multiplication/composition rules of
the jet functionals, the finite triangular matrix of the transposed model
operator on volume jets, and the unit-triangular change of basis between
volume jets and the Dirac eigenfunctionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._sphere import multi_indices, multi_indices_upto

__all__ = [
    "RadialSeries",
    "radial_multiply",
    "monomial_multiply",
    "derivative_transpose",
    "euler_weight",
    "transpose_matrix_on_volume_jets",
    "delta_in_volume_basis",
    "delta_basis_matrix",
    "volume_dict_to_delta_basis",
    "jet_eigenvalue",
]


# ---------------------------------------------------------------------------
# Truncated power series in t = rho^2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialSeries:
    """Truncated power series sum_m c_m t^m in the radial variable t = rho^2.

    Coefficients may be Fractions (exact path) or floats/complex; arithmetic
    is duck-typed. All operations truncate at the fixed ``order`` (the highest
    retained power of t).
    """

    coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, order: int) -> "RadialSeries":
        zero = value * 0
        return RadialSeries((value,) + (zero,) * order)

    @staticmethod
    def one(order: int, exact: bool = True) -> "RadialSeries":
        one = Fraction(1) if exact else 1.0
        return RadialSeries.constant(one, order)

    @staticmethod
    def t(order: int, exact: bool = True) -> "RadialSeries":
        one = Fraction(1) if exact else 1.0
        c = [one * 0] * (order + 1)
        if order >= 1:
            c[1] = one
        return RadialSeries(tuple(c))

    @staticmethod
    def sqrt_one_minus_t(order: int, exact: bool = True) -> "RadialSeries":
        """(1 - t)^{1/2}: c_0 = 1, c_m = c_{m-1} (2m-3)/(2m)."""
        c = [Fraction(1) if exact else 1.0]
        for m in range(1, order + 1):
            if exact:
                c.append(c[-1] * Fraction(2 * m - 3, 2 * m))
            else:
                c.append(c[-1] * (2 * m - 3) / (2 * m))
        return RadialSeries(tuple(c))

    @staticmethod
    def inv_sqrt_one_minus_t(order: int, exact: bool = True) -> "RadialSeries":
        """(1 - t)^{-1/2}: c_0 = 1, c_m = c_{m-1} (2m-1)/(2m)."""
        c = [Fraction(1) if exact else 1.0]
        for m in range(1, order + 1):
            if exact:
                c.append(c[-1] * Fraction(2 * m - 1, 2 * m))
            else:
                c.append(c[-1] * (2 * m - 1) / (2 * m))
        return RadialSeries(tuple(c))

    @staticmethod
    def pole_factor(order: int, exact: bool = True) -> "RadialSeries":
        """w = 2/(1 + sqrt(1-t)), the conjugating factor; w(0) = 1."""
        s = RadialSeries.sqrt_one_minus_t(order, exact)
        half = Fraction(1, 2) if exact else 0.5
        q = (s + RadialSeries.one(order, exact)) * half
        return q.power(-1)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "RadialSeries") -> "RadialSeries":
        n = min(self.order, other.order)
        return RadialSeries(
            tuple(self.coeffs[m] + other.coeffs[m] for m in range(n + 1))
        )

    def __sub__(self, other: "RadialSeries") -> "RadialSeries":
        n = min(self.order, other.order)
        return RadialSeries(
            tuple(self.coeffs[m] - other.coeffs[m] for m in range(n + 1))
        )

    def __mul__(self, other):
        if isinstance(other, RadialSeries):
            n = min(self.order, other.order)
            out = []
            for m in range(n + 1):
                acc = self.coeffs[0] * other.coeffs[m]
                for i in range(1, m + 1):
                    acc = acc + self.coeffs[i] * other.coeffs[m - i]
                out.append(acc)
            return RadialSeries(tuple(out))
        return RadialSeries(tuple(c * other for c in self.coeffs))

    __rmul__ = __mul__

    def log(self) -> "RadialSeries":
        """log of a series with constant term 1."""
        u = RadialSeries((self.coeffs[0] * 0,) + self.coeffs[1:])
        acc = RadialSeries.constant(self.coeffs[0] * 0, self.order)
        term = RadialSeries.one(self.order, isinstance(self.coeffs[0], Fraction))
        sign = 1
        for k in range(1, self.order + 1):
            term = term * u
            acc = acc + term * (Fraction(sign, k) if isinstance(self.coeffs[0], Fraction) else sign / k)
            sign = -sign
        return acc

    def exp(self) -> "RadialSeries":
        """exp of a series with zero constant term."""
        acc = RadialSeries.constant(1 + self.coeffs[0] * 0, self.order)
        term = acc
        for k in range(1, self.order + 1):
            term = term * self * (Fraction(1, k) if isinstance(term.coeffs[0], Fraction) else 1.0 / k)
            acc = acc + term
        return acc

    def power(self, sigma) -> "RadialSeries":
        """Series of self**sigma (constant term of self must be 1)."""
        return (self.log() * sigma).exp()

    def __call__(self, t):
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * t + c
        return acc


# ---------------------------------------------------------------------------
# Jet-functional composition rules
# ---------------------------------------------------------------------------
# A functional is stored as a dict {mu: coeff} meaning  F |-> sum c_mu D_mu[F].


def _falling(mu: tuple[int, ...], nu: tuple[int, ...]):
    """mu! / nu! for nu <= mu componentwise (integer)."""
    out = 1
    for a, b in zip(mu, nu):
        out *= math.factorial(a) // math.factorial(b)
    return out


def _multinomial(w: tuple[int, ...]):
    """|w|! / w! (integer)."""
    out = math.factorial(sum(w))
    for a in w:
        out //= math.factorial(a)
    return out


def radial_multiply(jet: dict, series: RadialSeries) -> dict:
    """Functional F |-> L[g(t) F] for a radial series g.

    Rule:  D_mu[t^m F] = sum_{|w|=m, 2w<=mu} (m!/w!) (mu!/(mu-2w)!) D_{mu-2w}[F].
    """
    out: dict = {}
    for mu, c in jet.items():
        d = len(mu)
        max_m = min(series.order, sum(mu) // 2)
        for m in range(max_m + 1):
            g = series.coeffs[m]
            if g == 0:
                continue
            for w in multi_indices(d, m):
                nu = tuple(a - 2 * b for a, b in zip(mu, w))
                if any(v < 0 for v in nu):
                    continue
                coeff = c * g * _multinomial(w) * _falling(mu, nu)
                out[nu] = out.get(nu, coeff * 0) + coeff
    return out


def monomial_multiply(jet: dict, nu: tuple[int, ...]) -> dict:
    """Functional F |-> L[x^nu F]:  D_mu[x^nu F] = (mu!/(mu-nu)!) D_{mu-nu}[F]."""
    out: dict = {}
    for mu, c in jet.items():
        tgt = tuple(a - b for a, b in zip(mu, nu))
        if any(v < 0 for v in tgt):
            continue
        coeff = c * _falling(mu, tgt)
        out[tgt] = out.get(tgt, coeff * 0) + coeff
    return out


def derivative_transpose(jet: dict, i: int) -> dict:
    """Functional F |-> L[d_i F]:  D_mu[d_i F] = D_{mu+e_i}[F]."""
    out: dict = {}
    for mu, c in jet.items():
        tgt = tuple(a + (1 if k == i else 0) for k, a in enumerate(mu))
        out[tgt] = out.get(tgt, c * 0) + c
    return out


def euler_weight(jet: dict) -> dict:
    """Functional F |-> L[(x . grad) F]:  D_mu[E F] = |mu| D_mu[F]."""
    return {mu: c * sum(mu) for mu, c in jet.items()}


# ---------------------------------------------------------------------------
# Transposed model operator on volume jets
# ---------------------------------------------------------------------------


def jet_eigenvalue(d: int, h, lam, A, n: int):
    """Diagonal entry on jets of order n:  lambda + h*A - h*(n + d/2)."""
    return lam + h * A - h * (n + Fraction(d, 2) if isinstance(h, Fraction) else n + d / 2.0)


def transpose_matrix_on_volume_jets(d: int, h, lam, A, K: int, exact: bool = False):
    """Matrix of the distributional model-operator action on volume jets.

    With P f = h sin(phi) d_phi f + (lambda + h d/2 + h A) cos(phi) f and the
    transpose taken against the sphere volume pairing, the action on the
    functionals B_mu (|mu| <= K) is upper triangular in graded-ascending
    order with parity-preserving couplings:

        M[nu, mu] = (|w|!/w!) (mu!/nu!) *
                    [ (lambda + hA) s_{|w|} - h (a_{|w|} + s_{|w|} (|nu| + d/2)) ]

    for mu - nu = 2w >= 0, where s_m are the coefficients of sqrt(1-t) and
    a_m those of -t (1-t)^{-1/2}.  Diagonal entries: lambda + hA - h(|mu| + d/2).

    Returns (basis, M) with basis = multi_indices_upto(d, K); M is a list of
    lists (exact path, Fraction/complex entries) or a complex ndarray.
    """
    basis = multi_indices_upto(d, K)
    index = {mu: i for i, mu in enumerate(basis)}
    order = K // 2
    s = RadialSeries.sqrt_one_minus_t(order, exact=exact)
    inv = RadialSeries.inv_sqrt_one_minus_t(order, exact=exact)
    # a(t) = -t (1-t)^{-1/2}:  a_0 = 0, a_m = -inv_{m-1}
    a = [s.coeffs[0] * 0] + [-inv.coeffs[m - 1] for m in range(1, order + 1)]

    half_d = Fraction(d, 2) if exact else d / 2.0
    n = len(basis)
    if exact:
        M = [[Fraction(0) for _ in range(n)] for _ in range(n)]
    else:
        M = np.zeros((n, n), dtype=complex)
    for mu in basis:
        j = index[mu]
        for m in range(0, sum(mu) // 2 + 1):
            if m > order:
                break
            for w in multi_indices(d, m):
                nu = tuple(p - 2 * q for p, q in zip(mu, w))
                if any(v < 0 for v in nu):
                    continue
                i = index[nu]
                coeff = _multinomial(w) * _falling(mu, nu)
                val = coeff * (
                    (lam + h * A) * s.coeffs[m]
                    - h * (a[m] + s.coeffs[m] * (sum(nu) + half_d))
                )
                if exact:
                    M[i][j] += val
                else:
                    M[i, j] += val
    return basis, M


# ---------------------------------------------------------------------------
# Dirac eigenfunctionals in the volume-jet basis
# ---------------------------------------------------------------------------


def delta_in_volume_basis(d: int, h, lam, mu: tuple[int, ...], exact: bool = False) -> dict:
    """The order-mu Dirac eigenfunctional as a volume-jet dict.

    delta_mu(lambda)[psi] = D_mu[w^sigma J psi] with sigma = lambda/h - |mu| - d/2,
    expanded as  sum_nu U[nu] B_nu  via the radial multiplication rule.
    """
    order = sum(mu) // 2
    w = RadialSeries.pole_factor(order, exact=exact)
    if exact:
        sigma = Fraction(lam) / Fraction(h) - sum(mu) - Fraction(d, 2)
        one = Fraction(1)
    else:
        sigma = lam / h - sum(mu) - d / 2.0
        one = 1.0 + 0.0j
    return radial_multiply({mu: one}, w.power(sigma))


def delta_basis_matrix(d: int, h, lam, K: int, exact: bool = False):
    """Unit upper-triangular change of basis: columns are delta_mu in B-basis."""
    basis = multi_indices_upto(d, K)
    index = {mu: i for i, mu in enumerate(basis)}
    n = len(basis)
    if exact:
        U = [[Fraction(0) for _ in range(n)] for _ in range(n)]
    else:
        U = np.zeros((n, n), dtype=complex)
    for mu in basis:
        col = delta_in_volume_basis(d, h, lam, mu, exact=exact)
        j = index[mu]
        for nu, c in col.items():
            if exact:
                U[index[nu]][j] += c
            else:
                U[index[nu], j] += c
    return basis, U


def volume_dict_to_delta_basis(d: int, h, lam, jet: dict) -> dict:
    """Express a volume-jet functional in the Dirac-eigenfunctional basis.

    The change of basis is unit triangular with respect to the graded order,
    so a descending-degree sweep inverts it exactly.
    """
    residual = dict(jet)
    out: dict = {}
    if not residual:
        return out
    for n in range(max(sum(mu) for mu in residual), -1, -1):
        for mu in [m for m in residual if sum(m) == n]:
            c = residual.pop(mu)
            if c == 0:
                continue
            out[mu] = out.get(mu, c * 0) + c
            expansion = delta_in_volume_basis(d, h, lam, mu, exact=False)
            for nu, u in expansion.items():
                if nu == mu:
                    continue
                residual[nu] = residual.get(nu, u * 0) - c * u
    return out
