"""Smooth test functions on S^d with exact derivatives and exact pole jets.

The family is built from terms

    rho^q * u^mu * p(z0) * exp(-c * (1 - z0^2)),

where z0 = cos(phi), rho = sin(phi), u in S^{d-1}, p is a polynomial, c >= 0,
and q >= |mu| with q - |mu| even (so each term is a polynomial in the ambient
coordinates (z0, rho*u) times a radial Gaussian factor, hence smooth on S^d).

The family is closed under multiplication by cos(phi) and under the vector
field sin(phi) d/dphi, so the model operator and its transpose act *exactly*
within the family.  It is also closed under plain d/dphi (at the cost of
odd rho-powers), which yields exact higher phi-derivatives for C^k norms.
All jets at the pole N (flat, volume-weighted, or with an extra radial
series weight) are computed from truncated series — no numerical
differentiation anywhere.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as npoly

from ._jets import RadialSeries
from ._sphere import sphere_quadrature

__all__ = ["TestFunction", "AwaySupportedFunction", "random_test_function"]


def _poly_of_series(p_coeffs, s: RadialSeries) -> RadialSeries:
    """Evaluate the polynomial p at a radial series argument (Horner)."""
    order = s.order
    acc = RadialSeries.constant(complex(p_coeffs[-1]), order)
    for c in reversed(p_coeffs[:-1]):
        acc = acc * s + RadialSeries.constant(complex(c), order)
    return acc


def _exp_series(c: float, order: int) -> RadialSeries:
    """Series of exp(-c t)."""
    coeffs = [1.0 + 0.0j]
    for m in range(1, order + 1):
        coeffs.append(coeffs[-1] * (-c) / m)
    return RadialSeries(tuple(coeffs))


def _canonical(terms):
    merged = {}
    for q, mu, c, p in terms:
        p = np.trim_zeros(np.atleast_1d(np.asarray(p, dtype=complex)), "b")
        if p.size == 0:
            continue
        key = (q, tuple(mu), float(c), p.size)
        # p length participates in the key only to avoid needless padding
        base = merged.get((q, tuple(mu), float(c)))
        if base is None:
            merged[(q, tuple(mu), float(c))] = p
        else:
            merged[(q, tuple(mu), float(c))] = npoly.polyadd(base, p)
    out = []
    for (q, mu, c), p in merged.items():
        p = np.trim_zeros(np.atleast_1d(p), "b")
        if p.size:
            out.append((q, mu, c, p))
    return out


class TestFunction:
    """A finite sum of smooth terms, closed under the operator algebra."""

    __test__ = False  # not a pytest collection target

    def __init__(self, terms, d: int):
        self.d = int(d)
        self.terms = _canonical(terms)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def from_monomial(d: int, mu, c: float = 0.0, p=(1.0,), extra_t_power: int = 0):
        mu = tuple(mu)
        q = sum(mu) + 2 * extra_t_power
        return TestFunction([(q, mu, c, np.asarray(p, dtype=complex))], d)

    @staticmethod
    def constant(d: int, value=1.0):
        return TestFunction([(0, (0,) * d, 0.0, np.array([value], dtype=complex))], d)

    # -- linear structure ----------------------------------------------------

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.terms + other.terms, self.d)

    def __mul__(self, scalar) -> "TestFunction":
        return TestFunction(
            [(q, mu, c, np.asarray(p) * scalar) for q, mu, c, p in self.terms], self.d
        )

    __rmul__ = __mul__

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + other * (-1.0)

    # -- exact operator algebra ----------------------------------------------

    def mult_z0(self) -> "TestFunction":
        """Multiply by cos(phi)."""
        out = []
        for q, mu, c, p in self.terms:
            out.append((q, mu, c, npoly.polymul([0.0, 1.0], p)))
        return TestFunction(out, self.d)

    def x_gr(self) -> "TestFunction":
        """Apply sin(phi) d/dphi exactly."""
        out = []
        for q, mu, c, p in self.terms:
            newp = npoly.polymul([0.0, float(q)], p)
            newp = npoly.polyadd(newp, npoly.polymul([-1.0, 0.0, 1.0], npoly.polyder(p)))
            if c != 0.0:
                newp = npoly.polyadd(
                    newp, npoly.polymul([0.0, -2.0 * c, 0.0, 2.0 * c], p)
                )
            out.append((q, mu, c, newp))
        return TestFunction(out, self.d)

    def d_phi(self) -> "TestFunction":
        """Apply d/dphi exactly (leaves the smooth subfamily)."""
        out = []
        for q, mu, c, p in self.terms:
            if q >= 1:
                out.append((q - 1, mu, c, npoly.polymul([0.0, float(q)], p)))
            newp = npoly.polyder(p) * (-1.0)
            if c != 0.0:
                newp = npoly.polyadd(newp, npoly.polymul([0.0, -2.0 * c], p))
            out.append((q + 1, mu, c, newp))
        return TestFunction(out, self.d)

    def apply_model(self, h, lam, A=0.0) -> "TestFunction":
        """Apply P = h sin(phi) d_phi + (lam + h d/2 + h A) cos(phi) exactly."""
        return self.x_gr() * h + self.mult_z0() * (lam + h * self.d / 2.0 + h * A)

    def apply_model_transpose(self, h, lam, A=0.0) -> "TestFunction":
        """Apply the volume-pairing transpose  -P_{-lam} + h A cos(phi)."""
        return self.x_gr() * (-h) + self.mult_z0() * (lam - h * self.d / 2.0 + h * A)

    # -- evaluation ------------------------------------------------------------

    def value(self, phi, u):
        """Evaluate at angles phi (array) and directions u (shape (..., d))."""
        phi = np.asarray(phi, dtype=float)
        u = np.asarray(u, dtype=float)
        z0 = np.cos(phi)
        rho = np.sin(phi)
        acc = np.zeros(np.broadcast(phi, u[..., 0]).shape, dtype=complex)
        for q, mu, c, p in self.terms:
            upart = np.ones_like(acc, dtype=float)
            for i, m in enumerate(mu):
                if m:
                    upart = upart * u[..., i] ** m
            acc = acc + npoly.polyval(z0, p) * rho**q * upart * np.exp(
                -c * (1.0 - z0**2)
            )
        return acc

    def dphi_value(self, phi, u):
        return self.d_phi().value(phi, u)

    # -- exact jets at the pole N ----------------------------------------------

    def jet(self, nu, weight: RadialSeries | None = None, with_volume: bool = True):
        """d^nu [ g(t) * J^{0/1} * psi ](x=0) in the chart x = sin(phi) u.

        weight: optional extra radial series g(t); with_volume multiplies by
        J = (1-t)^{-1/2}.  Exact up to float rounding.
        """
        nu = tuple(nu)
        total = 0.0 + 0.0j
        nfact = 1.0
        for a in nu:
            nfact *= float(math.factorial(a))
        for q, mu, c, p in self.terms:
            if any(b > a for a, b in zip(nu, mu)):
                continue
            w = tuple(a - b for a, b in zip(nu, mu))
            if any(v % 2 for v in w):
                continue
            w = tuple(v // 2 for v in w)
            m = sum(w)
            e = (q - sum(mu)) // 2
            rest_order = m - e
            if rest_order < 0:
                continue
            s = RadialSeries.sqrt_one_minus_t(rest_order, exact=False)
            rest = _poly_of_series(p, s)
            if c != 0.0:
                rest = rest * _exp_series(c, rest_order)
            if with_volume:
                rest = rest * RadialSeries.inv_sqrt_one_minus_t(rest_order, exact=False)
            if weight is not None:
                wser = RadialSeries(tuple(complex(x) for x in weight.coeffs[: rest_order + 1]))
                if wser.order < rest_order:
                    raise ValueError("weight series order too small for requested jet")
                rest = rest * wser
            g_m = rest.coeffs[rest_order]
            mult = math.factorial(m)
            for v in w:
                mult //= math.factorial(v)
            total += g_m * mult * nfact
        return total

    def volume_jet(self, nu):
        """B_nu[psi] = d^nu[(1-rho^2)^{-1/2} psi](0)."""
        return self.jet(nu, with_volume=True)

    def flat_jet(self, nu):
        """D_nu[psi] = d^nu psi(0)."""
        return self.jet(nu, with_volume=False)

    def pair_volume_dict(self, jet_dict: dict):
        """Pair a volume-jet functional {mu: coeff} against this function."""
        return sum(c * self.volume_jet(mu) for mu, c in jet_dict.items())

    # -- norms -------------------------------------------------------------------

    def ck_norm(self, k: int, n_phi: int = 200) -> float:
        """Surrogate C^k norm: sup over a grid of |d_phi^a psi| for a <= k.

        Angular derivatives are not included; the radial (phi) derivatives
        dominate for the pole-concentrated functionals this norm calibrates.
        """
        phi = np.linspace(0.0, np.pi, n_phi)
        nodes, _ = sphere_quadrature(self.d, 3)
        out = 0.0
        f = self
        for _ in range(k + 1):
            vals = f.value(phi[:, None], nodes[None, :, :])
            out = max(out, float(np.max(np.abs(vals))))
            f = f.d_phi()
        return out


class AwaySupportedFunction:
    """Smooth function supported in {cos(phi) < z_star}, away from the pole N.

    value = x^mu * g(cos phi) with g(z) = exp(-1/(z_star - z)) for z < z_star
    and 0 otherwise.  All jets at N vanish identically.
    """

    def __init__(self, d: int, z_star: float = 0.0, mu=None):
        self.d = int(d)
        self.z_star = float(z_star)
        self.mu = tuple(mu) if mu is not None else (0,) * d

    def value(self, phi, u):
        phi = np.asarray(phi, dtype=float)
        u = np.asarray(u, dtype=float)
        z0 = np.cos(phi)
        rho = np.sin(phi)
        gap = self.z_star - z0
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            g = np.where(gap > 0, np.exp(-1.0 / np.where(gap > 0, gap, 1.0)), 0.0)
        upart = np.ones(np.broadcast(phi, u[..., 0]).shape, dtype=float)
        for i, m in enumerate(self.mu):
            if m:
                upart = upart * u[..., i] ** m
        return g * rho ** sum(self.mu) * upart

    def volume_jet(self, nu):
        return 0.0 + 0.0j

    def flat_jet(self, nu):
        return 0.0 + 0.0j

    def jet(self, nu, weight=None, with_volume=True):
        return 0.0 + 0.0j

    def pair_volume_dict(self, jet_dict: dict):
        return 0.0 + 0.0j


def random_test_function(d: int, rng: np.random.Generator, n_terms: int = 3,
                         max_deg: int = 2) -> TestFunction:
    """A random member of the smooth family (reproducible via rng)."""
    terms = []
    for _ in range(n_terms):
        mu = tuple(int(rng.integers(0, max_deg + 1)) for _ in range(d))
        while sum(mu) > max_deg:
            mu = tuple(int(rng.integers(0, max_deg + 1)) for _ in range(d))
        c = float(rng.uniform(0.3, 2.0))
        p = rng.normal(size=int(rng.integers(1, 4)))
        extra = int(rng.integers(0, 2))
        terms.append((sum(mu) + 2 * extra, mu, c, np.asarray(p, dtype=complex)))
    return TestFunction(terms, d)
