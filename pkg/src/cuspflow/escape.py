"""Weight and escape-function construction for the cusp geodesic flow (d = 1).

This module builds, on the constant-curvature full cusp, the slowly varying
weight ``m`` and the escape function ``G`` used to control the lifted geodesic
flow on the cotangent bundle of the unit sphere bundle, together with a
sampled certificate of the defining inequalities.

Geometry of the construction
----------------------------
The lifted flow acts diagonally on covector components in the dual invariant
frame: with components ``(xi_0, xi_u, xi_s)`` (flow-dual, growing, decaying),

    ``Phi_t: (xi_0, xi_u, xi_s) -> (xi_0, e^t xi_u, e^{-t} xi_s)``

while the base point moves by the geodesic flow.  Every ingredient below is
0- or 1-homogeneous in the covector and invariant under the cusp's local
isometries, so the whole construction descends to the reduced space

    ``(alpha in S^1) x (xihat in S^2)``

where ``alpha`` is the flow-direction angle and ``xihat`` the unit covector
direction in the dual frame.  On that reduced space the flow is the product of
``d alpha/dt = sin(alpha)`` with the projective linear flow on the sphere; both
have closed forms, so all transports here are exact up to floating point.

The weight is a flow average of smoothed cone indicators,

    ``m = (m_T^+ + m_T^-)/2,   m_T^+ = int_{-T}^{T} m0_+ (Phi~_t) dt``,

computed by composite Simpson quadrature.  Because every cone distance evolves
monotonically along reduced trajectories, the integrand is nondecreasing along
every flow line; consequently finite differences of the computed average along
the flow are nonnegative *exactly* (to roundoff), and at step equal to the
quadrature step they telescope to endpoint clusters, reproducing the saturated
values of the smoothed indicators with no quadrature noise.

The elliptic symbol ``f`` is the log-averaged frame norm glued log-linearly
with the flow-invariant ``|p|`` near the flow-dual directions, and

    ``G = C_G' [1 - chi(|xi|/delta)] m(xihat) log(2 f / (c_f delta))``.

``verify`` samples the defining inequalities of ``G`` on a reduced grid and
emits a JSON-serializable certificate with margins, witnesses and all
constants, so the quantifier structure (which constant depends on which) is
auditable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UnsupportedDimensionError, ValidationError
from .flow import flow_cusp_exact
from .geometry import (PhasePoint, apply_local_isometry, direction_angle,
                       splitting_frame_at)

__all__ = [
    "ReducedPhaseGrid",
    "WeightField",
    "SymbolField",
    "EscapeData",
    "EscapeCertificate",
    "lifted_flow",
    "reduced_flow",
    "estimate_tau_max",
    "build_weight",
    "build_f",
    "assemble_G",
    "verify",
]

# Contraction rate of the decaying dual line in constant curvature -1.  The
# frame-comparison constant is 1 as well (the frame action is exactly
# diagonal), and both values are reported in the certificate.
BETA = 1.0

# Flow-average quadrature step, shared by the weight and symbol averages and
# by the along-flow finite differences (so that the weight's difference
# quotients telescope; see module docstring).
FLOW_STEP = 0.05

# Default averaging window of the glued symbol.
DEFAULT_T_PRIME = 2.0

_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


# ---------------------------------------------------------------------------
# scalar profiles
# ---------------------------------------------------------------------------

def _smoothstep(v):
    """Polynomial step: 0 for v <= 0, 1 for v >= 1, quintic in between."""
    v = np.clip(v, 0.0, 1.0)
    return v * v * v * (10.0 + v * (6.0 * v - 15.0))


def _band_profile(dist, eps):
    """Mollified indicator of a ``2 eps`` cone neighbourhood.

    Radial profile of the convolution of the indicator of ``{dist < 2 eps}``
    with a polynomial bump of width ``eps/2``: equals 1 for
    ``dist <= 1.75 eps``, 0 for ``dist >= 2.25 eps``, and steps smoothly in
    between.
    """
    return _smoothstep((2.25 * eps - dist) / (0.5 * eps))


def _chi_cutoff(u):
    """Even cutoff, 1 on [-1/2, 1/2], supported in (-1, 1)."""
    return _smoothstep(2.0 * (1.0 - np.abs(u)))


def _glue_profile(dist0, eps):
    """Partition weight of the ``|p|`` piece of the symbol.

    Equals 1 for ``dist0 <= 1.5 eps`` (covering the invariant cone where the
    symbol must be a function of p alone) and 0 for ``dist0 >= 2.5 eps``.
    """
    return _smoothstep((2.5 * eps - dist0) / eps)


# ---------------------------------------------------------------------------
# sphere distances and the reduced flow
# ---------------------------------------------------------------------------

def _as_unit_rows(xihat):
    """Validate/normalize an (..., 3) array of sphere directions."""
    x = np.atleast_2d(np.asarray(xihat, dtype=float))
    if x.shape[-1] != 3:
        raise ValidationError(
            f"covector directions need 3 dual-frame components, got shape {x.shape}")
    n = np.sqrt((x * x).sum(axis=-1))
    if np.any(n <= 0.0) or not np.all(np.isfinite(n)):
        raise ValidationError("covector directions must be nonzero and finite")
    return x / n[..., None]


def _dist_u(x):
    """Angle to the nearest growing-dual pole (0, +-1, 0)."""
    return np.arctan2(np.hypot(x[..., 0], x[..., 2]), np.abs(x[..., 1]))


def _dist_s(x):
    """Angle to the nearest decaying-dual pole (0, 0, +-1)."""
    return np.arctan2(np.hypot(x[..., 0], x[..., 1]), np.abs(x[..., 2]))


def _dist_0(x):
    """Angle to the nearest flow-dual pole (+-1, 0, 0)."""
    return np.arctan2(np.hypot(x[..., 1], x[..., 2]), np.abs(x[..., 0]))


def _dist_0s(x):
    """Angle to the great circle {xi_u = 0} (flow-dual + decaying plane)."""
    return np.arcsin(np.clip(np.abs(x[..., 1]), 0.0, 1.0))


def _dist_0u(x):
    """Angle to the great circle {xi_s = 0} (flow-dual + growing plane)."""
    return np.arcsin(np.clip(np.abs(x[..., 2]), 0.0, 1.0))


def _sphere_flow(x, t):
    """Projective diagonal flow on unit directions: scale and renormalize."""
    w = np.empty_like(x)
    w[..., 0] = x[..., 0]
    w[..., 1] = x[..., 1] * math.exp(t)
    w[..., 2] = x[..., 2] * math.exp(-t)
    n = np.sqrt((w * w).sum(axis=-1))
    return w / n[..., None]


def _stretch(x, t):
    """Norm growth factor |diag(1, e^t, e^{-t}) xihat| for unit xihat."""
    return np.sqrt(x[..., 0] ** 2
                   + (x[..., 1] * math.exp(t)) ** 2
                   + (x[..., 2] * math.exp(-t)) ** 2)


def _advance_angle(alpha, t):
    """Closed form of d alpha/dt = sin(alpha) on (-pi, pi].

    ``tan(alpha/2)`` is scaled by ``e^t``; the evaluation is branched on the
    hemisphere so neither end loses accuracy.  The fixed points 0 and pi are
    preserved exactly.
    """
    alpha = np.asarray(alpha, dtype=float)
    a = np.abs(alpha)
    sgn = np.where(alpha < 0.0, -1.0, 1.0)
    north = a <= _HALF_PI
    with np.errstate(divide="ignore"):
        ell = np.where(north,
                       np.log(np.tan(0.5 * a)),
                       -np.log(np.tan(0.5 * (np.pi - np.minimum(a, np.pi)))))
    ell = ell + t
    out = np.where(ell <= 0.0,
                   2.0 * np.arctan(np.exp(np.minimum(ell, 0.0))),
                   np.pi - 2.0 * np.arctan(np.exp(np.minimum(-ell, 0.0))))
    return sgn * out


def reduced_flow(alpha, xihat, t):
    """Time-t reduced flow on (alpha, xihat).

    Parameters
    ----------
    alpha : array_like
        Flow-direction angles in (-pi, pi].
    xihat : array_like, shape (..., 3)
        Unit covector directions in the dual frame (flow-dual, growing,
        decaying components).
    t : float

    Returns
    -------
    (alpha_t, xihat_t)
        Both transported; the two factors evolve independently.
    """
    x = _as_unit_rows(xihat)
    return _advance_angle(alpha, float(t)), _sphere_flow(x, float(t))


def lifted_flow(point, covector, t):
    """Exact lifted geodesic flow on a cotangent vector of the sphere bundle.

    The base point advances by the exact geodesic flow; the covector is
    decomposed on the dual invariant frame at the starting point, its
    components are scaled ``(xi_0, e^t xi_u, e^{-t} xi_s)`` (the flow-dual
    component is conserved, the component annihilating flow+growing directions
    grows, the one annihilating flow+decaying directions decays), and the
    result is re-expressed in coordinates at the image point.

    Parameters
    ----------
    point : PhasePoint
        d = 1 phase point.
    covector : array_like, shape (3,)
        Components ``(xi_r, xi_theta, xi_alpha)`` in cusp coordinates.
    t : float

    Returns
    -------
    (PhasePoint, ndarray)
        The advanced point and the transported covector components.

    Raises
    ------
    UnsupportedDimensionError
        If the point is not one-dimensional in the cross-section.
    """
    if point.d != 1:
        raise UnsupportedDimensionError("the lifted flow is implemented for d = 1")
    xi = np.asarray(covector, dtype=float)
    if xi.shape != (3,):
        raise ValidationError(f"covector must have 3 components, got shape {xi.shape}")
    t = float(t)
    alpha0 = direction_angle(point)
    flow0, stable0, unstable0 = splitting_frame_at(point.r, alpha0)
    comps = np.array([xi @ flow0, xi @ stable0, xi @ unstable0])
    comps_t = np.array([comps[0], math.exp(t) * comps[1], math.exp(-t) * comps[2]])
    image = flow_cusp_exact(point, t)
    alpha1 = direction_angle(image)
    frame1 = np.column_stack(splitting_frame_at(image.r, alpha1))
    xi_t = np.linalg.solve(frame1.T, comps_t)
    return image, xi_t


# ---------------------------------------------------------------------------
# reduced grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedPhaseGrid:
    """Sampling grid on the reduced space (alpha in S^1) x (xihat in S^2).

    The direction sphere is parametrized by colatitude from the flow-dual
    axis and azimuth in the (growing, decaying) plane; both coordinates use
    midpoint values so no grid point lies exactly on an invariant set.  The
    angle fiber is exactly degenerate for every quantity built here (the
    constructions read only ``xihat``), which is what makes the isometry
    invariance exact by representation; it is kept as part of the grid so
    certificates sample the full reduced space.

    Parameters
    ----------
    n_alpha, n_theta, n_phi : int
        Resolution of the angle circle and of the direction sphere.
    eps : float
        Cone-neighbourhood width.  The mollified indicators extend to
        ``2.25 eps``, so the construction needs ``4.5 eps < pi/2``.
    delta : float
        Small-scale cutoff under which the escape function is switched off.
    """

    n_alpha: int = 64
    n_theta: int = 32
    n_phi: int = 32
    eps: float = 0.15
    delta: float = 1e-3
    alpha: np.ndarray = field(default=None, repr=False, compare=False)
    xihat: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("n_alpha", "n_theta", "n_phi"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 2:
                raise ValidationError(f"{name} must be an integer >= 2, got {n!r}")
        if not (0.0 < self.eps < _HALF_PI):
            raise ValidationError(f"eps must lie in (0, pi/2), got {self.eps}")
        if not (0.0 < self.delta):
            raise ValidationError(f"delta must be positive, got {self.delta}")
        alpha = -np.pi + _TWO_PI * (np.arange(self.n_alpha) + 0.5) / self.n_alpha
        theta = np.pi * (np.arange(self.n_theta) + 0.5) / self.n_theta
        phi = _TWO_PI * (np.arange(self.n_phi) + 0.5) / self.n_phi
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        xihat = np.column_stack([
            np.cos(tt).ravel(),
            (np.sin(tt) * np.cos(pp)).ravel(),
            (np.sin(tt) * np.sin(pp)).ravel(),
        ])
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "xihat", xihat)
        both = self.in_cone_u(xihat) & self.in_cone_0s(xihat)
        if np.any(both):
            raise ConfigurationError(
                "cone neighbourhoods overlap on the grid: widths eps = "
                f"{self.eps} put {int(both.sum())} sampled directions in both "
                "the growing-dual and flow+decaying neighbourhoods")

    @property
    def n_points(self):
        """Total number of reduced grid points (angle x sphere)."""
        return self.n_alpha * self.n_theta * self.n_phi

    # -- cone neighbourhood memberships (on unit direction rows) -----------
    def in_cone_u(self, x):
        """Membership in the eps-neighbourhood of the growing-dual poles."""
        return _dist_u(_as_unit_rows(x)) < self.eps

    def in_cone_s(self, x):
        """Membership in the eps-neighbourhood of the decaying-dual poles."""
        return _dist_s(_as_unit_rows(x)) < self.eps

    def in_cone_0(self, x):
        """Membership in the eps-neighbourhood of the flow-dual poles."""
        return _dist_0(_as_unit_rows(x)) < self.eps

    def in_cone_0s(self, x):
        """Membership in the eps-neighbourhood of the flow+decaying circle."""
        return _dist_0s(_as_unit_rows(x)) < self.eps

    def in_cone_0u(self, x):
        """Membership in the eps-neighbourhood of the flow+growing circle."""
        return _dist_0u(_as_unit_rows(x)) < self.eps

    def as_dict(self):
        """Plain-data description (resolution and widths)."""
        return {
            "n_alpha": int(self.n_alpha),
            "n_theta": int(self.n_theta),
            "n_phi": int(self.n_phi),
            "eps": float(self.eps),
            "delta": float(self.delta),
        }


def _require_construction_widths(grid: ReducedPhaseGrid):
    """The mollified bands (up to 2.25 eps) around the growing-dual poles and
    the flow+decaying circle must not meet; they are pi/2 apart."""
    if 4.5 * grid.eps >= _HALF_PI:
        raise ConfigurationError(
            f"cone neighbourhoods overlap: eps = {grid.eps} needs 4.5*eps < pi/2 "
            "for the mollified indicators to have disjoint supports")


# ---------------------------------------------------------------------------
# transition-time estimate
# ---------------------------------------------------------------------------

def _first_entry_times(x, target, step, horizon):
    """First t > 0 (in multiples of step) with target(flowed x) true, per row."""
    n = x.shape[0]
    times = np.full(n, np.nan)
    pending = np.ones(n, dtype=bool)
    t = 0.0
    while np.any(pending) and t < horizon:
        t += step
        hit = np.zeros(n, dtype=bool)
        hit[pending] = target(_sphere_flow(x[pending], t))
        times[hit] = t
        pending &= ~hit
    if np.any(pending):
        raise ConfigurationError(
            f"{int(pending.sum())} sampled directions did not reach the target "
            f"cone within transport time {horizon}")
    return times


def _swapped(y):
    """Exchange the growing and decaying dual-frame components."""
    return y[..., [0, 2, 1]]


def estimate_tau_max(grid: ReducedPhaseGrid, step=FLOW_STEP, horizon=200.0):
    """Empirical maximal transition time between the cone neighbourhoods.

    Transports every grid direction outside one neighbourhood until its cone
    membership flips (entering the attracting neighbourhood): forward into the
    growing-dual cone, backward into the flow+decaying band, backward into the
    decaying-dual cone, forward into the flow+growing band.  The worst time
    over the grid is doubled for safety.

    Backward transports are run as forward transports of the swapped data:
    exchanging the growing and decaying components conjugates the sphere flow
    to its time reversal.
    """
    x = grid.xihat
    worst = 0.0

    # outside the flow+decaying band, forward into the growing-dual cone
    sel = ~grid.in_cone_0s(x)
    if np.any(sel):
        t = _first_entry_times(x[sel], lambda y: _dist_u(y) < grid.eps,
                               step, horizon)
        worst = max(worst, float(t.max()))
    # outside the growing-dual cone, backward into the flow+decaying band
    sel = ~grid.in_cone_u(x)
    if np.any(sel):
        t = _first_entry_times(_swapped(x[sel]),
                               lambda y: _dist_0s(_swapped(y)) < grid.eps,
                               step, horizon)
        worst = max(worst, float(t.max()))
    # outside the flow+growing band, backward into the decaying-dual cone
    sel = ~grid.in_cone_0u(x)
    if np.any(sel):
        t = _first_entry_times(_swapped(x[sel]),
                               lambda y: _dist_s(_swapped(y)) < grid.eps,
                               step, horizon)
        worst = max(worst, float(t.max()))
    # outside the decaying-dual cone, forward into the flow+growing band
    sel = ~grid.in_cone_s(x)
    if np.any(sel):
        t = _first_entry_times(x[sel], lambda y: _dist_0u(y) < grid.eps,
                               step, horizon)
        worst = max(worst, float(t.max()))
    return 2.0 * worst


# ---------------------------------------------------------------------------
# flow-averaged weight
# ---------------------------------------------------------------------------

def _simpson_nodes_weights(T, step):
    """Composite-Simpson nodes and weights on [-T, T].

    Requires 2T to be an (even-count) multiple of the step; callers snap T to
    the step grid, which makes the interval count 2*(T/step), always even.
    """
    n_intervals = int(round(2.0 * T / step))
    if n_intervals < 2 or n_intervals % 2:
        raise ValidationError(
            f"averaging window T = {T} is not compatible with step {step}")
    if abs(n_intervals * step - 2.0 * T) > 1e-9 * max(1.0, T):
        raise ValidationError(
            f"averaging window T = {T} must be a multiple of the step {step}")
    nodes = -T + step * np.arange(n_intervals + 1)
    weights = np.full(n_intervals + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    weights *= step / 3.0
    return nodes, weights


def _snap_to_step(T, step):
    """Smallest step multiple >= T (within roundoff)."""
    return step * math.ceil(T / step - 1e-9)


def _cone_integrand(x, eps):
    """Average of the two smoothed cone indicators at unit directions x.

    The first tracks approach to the growing-dual poles against escape from
    the flow+decaying band; the second tracks the flow+growing band against
    the decaying-dual poles.  Every distance involved evolves monotonically
    along reduced trajectories, so this integrand is nondecreasing along
    every flow line; it equals +1 at the growing-dual poles, -1 at the
    decaying-dual poles and 0 at the flow-dual poles.
    """
    up = _band_profile(_dist_u(x), eps) - _band_profile(_dist_0s(x), eps)
    down = _band_profile(_dist_0u(x), eps) - _band_profile(_dist_s(x), eps)
    return 0.5 * (up + down)


def _weight_average(x, T, step, eps):
    """Composite-Simpson flow average of the cone integrand over [-T, T]."""
    nodes, weights = _simpson_nodes_weights(T, step)
    acc = np.zeros(x.shape[0])
    for t_j, w_j in zip(nodes, weights):
        acc += w_j * _cone_integrand(_sphere_flow(x, t_j), eps)
    return acc


def _plateau_radii(T, step, eps):
    """Direction-ball radii on which the averaged weight saturates exactly.

    Within these radii of the growing/decaying/flow-dual poles the cone
    integrand stays saturated for all transport times up to T + step (the
    extra step covers the finite differences), so the Simpson average equals
    +2T, -2T and 0 exactly.  The growing/decaying radii shrink at rate 2
    (worst relative drift between the two scaled components), the flow-dual
    radius at rate 1.
    """
    reach = T + step
    return {
        "u": 0.5 * (1.75 * eps) * math.exp(-2.0 * reach),
        "s": 0.5 * (1.75 * eps) * math.exp(-2.0 * reach),
        "0": 0.5 * math.asin(math.sin(1.75 * eps) * math.exp(-reach)),
    }


def _in_V_u(x, T, eps):
    """Forward-T image of the complement of the flow+decaying band."""
    return np.abs(_sphere_flow(x, -T)[..., 1]) >= math.sin(eps)


def _in_V_s(x, T, eps):
    """Backward-T image of the complement of the flow+growing band."""
    return np.abs(_sphere_flow(x, T)[..., 2]) >= math.sin(eps)


@dataclass(frozen=True)
class WeightField:
    """Flow-averaged weight on covector directions.

    ``values`` samples the field on ``grid.xihat``; calling the field
    evaluates it at arbitrary directions.  The field is odd under the
    growing<->decaying component swap, takes values in [-2T, 2T], saturates
    exactly on the plateau balls (see ``plateau_radii``), and its finite
    differences along the reduced flow at the quadrature step are
    nonnegative everywhere and >= 1 outside the transported cones and the
    flow-dual neighbourhood.
    """

    grid: ReducedPhaseGrid
    T: float
    step: float
    tau_max: float
    values: np.ndarray = field(repr=False, compare=False)
    properties: dict = field(repr=False, compare=False)

    def __call__(self, xihat):
        """Evaluate the averaged weight at unit directions."""
        return _weight_average(_as_unit_rows(xihat), self.T, self.step,
                               self.grid.eps)

    def derivative(self, xihat):
        """Finite difference along the reduced flow at the quadrature step.

        At this specific step the two shifted Simpson sums telescope: interior
        nodes cancel and only endpoint clusters remain, so the result
        reproduces the saturated endpoint values without quadrature noise.
        """
        x = _as_unit_rows(xihat)
        fwd = _weight_average(_sphere_flow(x, self.step), self.T, self.step,
                              self.grid.eps)
        bwd = _weight_average(_sphere_flow(x, -self.step), self.T, self.step,
                              self.grid.eps)
        return (fwd - bwd) / (2.0 * self.step)

    @property
    def plateau_radii(self):
        """Radii of exact saturation around the three pole families."""
        return _plateau_radii(self.T, self.step, self.grid.eps)


def _plateau_samples(radii, rng=None):
    """Direction samples inside the exact-saturation balls.

    For each pole family: the pole itself plus rings at fractions of the
    plateau radius, mixed over azimuths (for the growing/decaying poles the
    worst drift direction is toward the opposite pole; for the flow-dual pole
    all azimuths behave alike).
    """
    fracs = (0.0, 0.35, 0.9)
    mixes = ((1.0, 0.0), (0.0, 1.0), (math.sqrt(0.5), math.sqrt(0.5)))
    out = {"u": [], "s": [], "0": []}
    for frac in fracs:
        for c0, c1 in mixes:
            d = frac * radii["u"]
            out["u"].append([math.sin(d) * c0, math.cos(d), math.sin(d) * c1])
            d = frac * radii["s"]
            out["s"].append([math.sin(d) * c0, math.sin(d) * c1, math.cos(d)])
            d = frac * radii["0"]
            out["0"].append([math.cos(d), math.sin(d) * c0, math.sin(d) * c1])
    return {k: _as_unit_rows(np.array(v)) for k, v in out.items()}


def build_weight(grid: ReducedPhaseGrid, T=None, step=FLOW_STEP):
    """Build the flow-averaged weight field on the reduced space.

    The weight is the symmetrized composite-Simpson average over [-T, T] of
    smoothed cone indicators transported by the reduced flow.  ``T`` defaults
    to twice the (already safety-doubled) empirical transition time and must
    be at least that; it is snapped up to the quadrature step grid.

    Returns a :class:`WeightField` whose ``properties`` record the measured
    construction guarantees: range bound 2T, nonnegative flow derivative,
    derivative >= 1 outside the transported cones and the flow-dual
    neighbourhood, exact plateau values, saturation beyond +-T on the
    transported cones, and oddness under the growing<->decaying swap.

    Raises
    ------
    ConfigurationError
        If the mollified cone neighbourhoods would overlap at this ``eps``,
        or if ``T`` is below twice the measured transition time.
    """
    _require_construction_widths(grid)
    if step <= 0.0:
        raise ValidationError(f"step must be positive, got {step}")
    tau_max = estimate_tau_max(grid, step=step)
    if T is None:
        T = 2.0 * tau_max
    if T < 2.0 * tau_max - 1e-12:
        raise ConfigurationError(
            f"averaging window T = {T} is below twice the measured "
            f"transition time 2*tau_max = {2.0 * tau_max}")
    T = _snap_to_step(T, step)
    x = grid.xihat
    values = _weight_average(x, T, step, grid.eps)

    fwd = _weight_average(_sphere_flow(x, step), T, step, grid.eps)
    bwd = _weight_average(_sphere_flow(x, -step), T, step, grid.eps)
    deriv = (fwd - bwd) / (2.0 * step)
    strict = ~(_in_V_u(x, T, grid.eps) | _in_V_s(x, T, grid.eps)
               | grid.in_cone_0(x))
    radii = _plateau_radii(T, step, grid.eps)
    plat = _plateau_samples(radii)
    plat_vals = {k: _weight_average(v, T, step, grid.eps)
                 for k, v in plat.items()}
    on_v_u = _in_V_u(x, T, grid.eps)
    on_v_s = _in_V_s(x, T, grid.eps)
    swap_vals = _weight_average(_swapped(x), T, step, grid.eps)

    two_T = 2.0 * T
    properties = {
        "range": {
            "value": float(np.max(np.abs(values))),
            "bound": two_T,
            "passed": bool(np.max(np.abs(values)) <= two_T * (1.0 + 1e-12)),
        },
        "flow_derivative_min": {
            "value": float(deriv.min()),
            "threshold": -1e-6,
            "passed": bool(deriv.min() >= -1e-6),
        },
        "flow_derivative_strict_min": {
            "value": float(deriv[strict].min()) if np.any(strict) else None,
            "threshold": 1.0 - 1e-3,
            "n_samples": int(strict.sum()),
            "passed": bool(np.all(deriv[strict] >= 1.0 - 1e-3)),
        },
        "plateau": {
            "radii": {k: float(v) for k, v in radii.items()},
            "max_error_u": float(np.max(np.abs(plat_vals["u"] - two_T))),
            "max_error_s": float(np.max(np.abs(plat_vals["s"] + two_T))),
            "max_error_0": float(np.max(np.abs(plat_vals["0"]))),
            "threshold": 1e-9 * two_T,
            "passed": bool(
                np.max(np.abs(plat_vals["u"] - two_T)) <= 1e-9 * two_T
                and np.max(np.abs(plat_vals["s"] + two_T)) <= 1e-9 * two_T
                and np.max(np.abs(plat_vals["0"])) <= 1e-9 * two_T),
        },
        "transported_cone_saturation": {
            "min_on_forward_cone": float(values[on_v_u].min())
            if np.any(on_v_u) else None,
            "max_on_backward_cone": float(values[on_v_s].max())
            if np.any(on_v_s) else None,
            "threshold": T,
            "passed": bool(
                (not np.any(on_v_u) or values[on_v_u].min() >= T - 1e-9)
                and (not np.any(on_v_s) or values[on_v_s].max() <= -T + 1e-9)),
        },
        "swap_oddness": {
            "value": float(np.max(np.abs(values + swap_vals))),
            "threshold": 1e-9 * two_T,
            "passed": bool(np.max(np.abs(values + swap_vals))
                           <= 1e-9 * two_T),
        },
    }
    return WeightField(grid=grid, T=T, step=step, tau_max=tau_max,
                       values=values, properties=properties)


# ---------------------------------------------------------------------------
# elliptic symbol
# ---------------------------------------------------------------------------

def _log_norm_average(x, T_prime, step):
    """exp of the Simpson average of log |transported direction| over
    [-T', T'], normalized by the window length 2T'."""
    nodes, weights = _simpson_nodes_weights(T_prime, step)
    acc = np.zeros(x.shape[0])
    for t_j, w_j in zip(nodes, weights):
        acc += w_j * np.log(_stretch(x, t_j))
    return np.exp(acc / (2.0 * T_prime))


def _glued_hat(x, T_prime, step, eps):
    """0-homogeneous symbol factor: log-linear glue of |flow-dual component|
    (near the flow-dual poles) with the log-averaged transported norm."""
    f_us = _log_norm_average(x, T_prime, step)
    w0 = _glue_profile(_dist_0(x), eps)
    ax0 = np.abs(x[..., 0])
    log_ax0 = np.where(w0 > 0.0, np.log(np.maximum(ax0, 1e-300)), 0.0)
    return np.exp(w0 * log_ax0 + (1.0 - w0) * np.log(f_us))


def _measure_frame_constant(step=FLOW_STEP, horizon=10.0):
    """Measured comparison constant of the decaying dual line.

    Supremum over transport times of e^{beta t} times the contraction factor
    of the decaying component; the frame action is exactly diagonal here, so
    this is 1 up to roundoff.  Measured rather than asserted so the window
    precondition of the symbol average is checked against data.
    """
    ts = np.arange(0.0, horizon + step, step)
    return float(np.max(np.exp(BETA * ts) * np.exp(-ts)))


@dataclass(frozen=True)
class SymbolField:
    """Glued 1-homogeneous elliptic symbol on covectors.

    ``hat`` is the 0-homogeneous factor (glued symbol on unit directions);
    the full symbol is ``|xi| * hat(direction)``, exactly 1-homogeneous by
    construction.  Near the flow-dual poles the symbol equals the conserved
    flow-dual component exactly, so it is flow-invariant there; deep in the
    growing (resp. decaying) dual cones its logarithmic flow derivative
    approaches +1 (resp. -1).
    """

    grid: ReducedPhaseGrid
    T_prime: float
    step: float
    frame_constant: float
    c_f: float
    values: np.ndarray = field(repr=False, compare=False)
    values_us: np.ndarray = field(repr=False, compare=False)
    properties: dict = field(repr=False, compare=False)

    def hat(self, xihat):
        """Glued 0-homogeneous factor at unit directions."""
        return _glued_hat(_as_unit_rows(xihat), self.T_prime, self.step,
                          self.grid.eps)

    def us(self, xihat):
        """Unglued log-averaged transported-norm factor."""
        return _log_norm_average(_as_unit_rows(xihat), self.T_prime, self.step)

    def __call__(self, xihat, rho):
        """Full 1-homogeneous symbol at directions ``xihat`` and radii ``rho``."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise ValidationError("covector magnitude must be positive")
        return rho * self.hat(xihat)

    def log_derivative(self, xihat):
        """Finite difference of log(symbol) along the lifted flow (step-sized,
        radius-independent by homogeneity)."""
        x = _as_unit_rows(xihat)
        h = self.step
        fwd = np.log(_stretch(x, h)) + np.log(self.hat(_sphere_flow(x, h)))
        bwd = np.log(_stretch(x, -h)) + np.log(self.hat(_sphere_flow(x, -h)))
        return (fwd - bwd) / (2.0 * h)


def _deep_cone_samples(pole, radii):
    """Direction samples near a pole family at the given angular radii.

    ``pole`` is "u", "s" or "0"; each radius contributes three azimuth mixes
    (toward each of the two complementary components and diagonal).
    """
    mixes = ((1.0, 0.0), (0.0, 1.0), (math.sqrt(0.5), math.sqrt(0.5)))
    rows = []
    for rad in radii:
        for c0, c1 in mixes:
            s, c = math.sin(rad), math.cos(rad)
            if pole == "u":
                rows.append([s * c0, c, s * c1])
            elif pole == "s":
                rows.append([s * c0, s * c1, c])
            else:
                rows.append([c, s * c0, s * c1])
    return _as_unit_rows(np.array(rows))


def _dense_sphere(n_theta, n_phi):
    """Midpoint latitude-longitude direction set (no point on invariant sets)."""
    theta = np.pi * (np.arange(n_theta) + 0.5) / n_theta
    phi = _TWO_PI * (np.arange(n_phi) + 0.5) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return np.column_stack([
        np.cos(tt).ravel(),
        (np.sin(tt) * np.cos(pp)).ravel(),
        (np.sin(tt) * np.sin(pp)).ravel(),
    ])


def build_f(grid: ReducedPhaseGrid, T_prime=DEFAULT_T_PRIME, step=FLOW_STEP):
    """Build the glued elliptic symbol on the reduced space.

    The unglued factor is the exponential of the windowed log average of the
    transported covector norm; near the flow-dual poles it is glued
    log-linearly to the conserved flow-dual component, making the full symbol
    exactly flow-invariant there.  The window must exceed twice the measured
    frame-comparison constant's log over the contraction rate (that constant
    is 1 here, so any positive window qualifies); the default window 2 puts
    the logarithmic flow derivative within a percent of +-1 deep in the
    growing/decaying dual cones.

    Returns a :class:`SymbolField` with the measured infimum ``c_f`` of the
    glued factor over the direction sphere and a property report: exact
    1-homogeneity, cone log-derivative bounds, decaying-pole value, and
    flow invariance (zero flow derivative) on the flow-dual neighbourhood.
    """
    _require_construction_widths(grid)
    if step <= 0.0:
        raise ValidationError(f"step must be positive, got {step}")
    frame_constant = _measure_frame_constant(step=step)
    window_floor = 2.0 * math.log(frame_constant) / BETA
    if T_prime <= window_floor:
        raise ConfigurationError(
            f"symbol window T' = {T_prime} must exceed {window_floor} "
            "(twice the measured frame-comparison log over the contraction rate)")
    T_prime = _snap_to_step(T_prime, step)

    x = grid.xihat
    values = _glued_hat(x, T_prime, step, grid.eps)
    values_us = _log_norm_average(x, T_prime, step)

    probe = np.vstack([
        _dense_sphere(max(4 * grid.n_theta, 96), max(4 * grid.n_phi, 96)),
        x,
    ])
    probe_vals = _glued_hat(probe, T_prime, step, grid.eps)
    i_min = int(np.argmin(probe_vals))
    c_f = float(probe_vals[i_min])

    sym = SymbolField(grid=grid, T_prime=T_prime, step=step,
                      frame_constant=frame_constant, c_f=c_f,
                      values=values, values_us=values_us, properties={})

    # exact 1-homogeneity of the full symbol
    hom = sym(probe[:64], 2.0) / sym(probe[:64], 1.0)
    hom_err = float(np.max(np.abs(hom - 2.0)))

    # log-derivative bounds deep in the growing/decaying dual cones (the
    # assembled transported cones live at angular scale e^{-T} and below)
    deep_radii = (0.0, 1e-12, 1e-9, 1e-7, 1e-6)
    du = sym.log_derivative(_deep_cone_samples("u", deep_radii))
    ds = sym.log_derivative(_deep_cone_samples("s", deep_radii))
    s_pole = float(sym.log_derivative(np.array([[0.0, 0.0, 1.0]]))[0])

    # flow invariance on the flow-dual neighbourhood: the full symbol equals
    # the conserved component there, so its flow derivative vanishes
    inv_dirs = _deep_cone_samples("0", (0.0, 0.3 * grid.eps, 0.6 * grid.eps,
                                        0.99 * grid.eps))
    inv_fd = np.abs(sym.log_derivative(inv_dirs))

    properties = {
        "one_homogeneous": {
            "value": hom_err,
            "threshold": 1e-10,
            "passed": bool(hom_err <= 1e-10),
        },
        "log_derivative_growing_cone": {
            "value": float(du.min()),
            "threshold": 0.5 * BETA - 1e-3,
            "passed": bool(du.min() >= 0.5 * BETA - 1e-3),
        },
        "log_derivative_decaying_cone": {
            "value": float(ds.max()),
            "threshold": -0.5 * BETA + 1e-3,
            "passed": bool(ds.max() <= -0.5 * BETA + 1e-3),
        },
        "log_derivative_decaying_pole": {
            "value": s_pole,
            "threshold": -0.75 * BETA + 1e-3,
            "passed": bool(s_pole <= -0.75 * BETA + 1e-3),
        },
        "invariant_cone_flow_derivative": {
            "value": float(inv_fd.max()),
            "threshold": 1e-8,
            "passed": bool(inv_fd.max() <= 1e-8),
        },
        "unit_infimum": {
            "value": c_f,
            "attained_at": [float(v) for v in probe[i_min]],
            "n_samples": int(probe.shape[0]),
        },
        "frame_constant": {
            "value": frame_constant,
            "window_floor": window_floor,
        },
    }
    object.__setattr__(sym, "properties", properties)
    return sym


# ---------------------------------------------------------------------------
# escape function and certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EscapeData:
    """Assembled escape function and its auditable constants.

    ``m`` samples the 0-homogeneous weight symbol (the scaled flow average)
    on ``grid.xihat``; it equals ``+C_G`` on the growing-dual plateau,
    ``-C_G`` on the decaying-dual plateau and 0 on the flow-dual plateau
    exactly.  ``G`` evaluates the escape function on a phase point and a
    covector in cusp coordinates; it depends on the covector only through its
    dual-frame direction and magnitude, which is what makes it invariant
    under the cusp's local isometries by representation.
    """

    grid: ReducedPhaseGrid
    delta: float
    weight: WeightField
    symbol: SymbolField
    m: np.ndarray = field(repr=False, compare=False)
    C_G: float = 0.0
    C_G_prime: float = 0.0
    T: float = 0.0
    T_prime: float = 0.0
    R: float = 0.0
    beta: float = BETA
    c_f: float = 0.0
    constants: dict = field(default_factory=dict, repr=False, compare=False)

    def weight_symbol(self, xihat):
        """Scaled 0-homogeneous weight at unit directions (values in
        [-C_G, C_G])."""
        return self.C_G_prime * self.weight(xihat)

    def reduced_G(self, xihat, rho):
        """Escape function on reduced data: directions and magnitudes.

        ``rho`` broadcasts against the direction batch.  The angle fiber does
        not enter: the escape function is exactly constant along it.
        """
        x = _as_unit_rows(xihat)
        rho = np.broadcast_to(np.asarray(rho, dtype=float), x.shape[:-1])
        if np.any(rho <= 0.0):
            raise ValidationError("covector magnitude must be positive")
        cut = 1.0 - _chi_cutoff(rho / self.delta)
        mval = self.C_G_prime * self.weight(x)
        fhat = self.symbol.hat(x)
        log_factor = np.log(2.0 * rho * fhat / (self.c_f * self.delta))
        return cut * mval * log_factor

    def G(self, point, covector):
        """Escape function at a phase point and covector in cusp coordinates.

        The covector components are ``(xi_r, xi_theta, xi_alpha)``; they are
        decomposed on the dual invariant frame at the point, and the value
        depends only on the resulting direction and magnitude.
        """
        if point.d != 1:
            raise UnsupportedDimensionError(
                "the escape function is implemented for d = 1")
        xi = np.asarray(covector, dtype=float)
        if xi.shape != (3,):
            raise ValidationError(
                f"covector must have 3 components, got shape {xi.shape}")
        alpha = direction_angle(point)
        f0, st, un = splitting_frame_at(point.r, alpha)
        comps = np.array([xi @ f0, xi @ st, xi @ un])
        rho = float(np.linalg.norm(comps))
        if rho <= 0.0:
            raise ValidationError("covector must be nonzero")
        return float(self.reduced_G(comps / rho, rho)[0])


_ALLOWED_CONSTANT_KEYS = frozenset({"T", "T_prime", "C_G_prime", "R", "step"})


def _escape_probe_directions(grid: ReducedPhaseGrid):
    """Direction probe for the measured constants of the escape function.

    A refined midpoint sphere grid, the user grid itself, dense rings through
    the glue band around the flow-dual poles (where the symbol interpolates),
    and rings near the swap-symmetric surface (where the weight changes sign).
    """
    eps = grid.eps
    pieces = [
        _dense_sphere(max(2 * grid.n_theta, 64), max(2 * grid.n_phi, 64)),
        grid.xihat,
    ]
    az = _TWO_PI * (np.arange(128) + 0.5) / 128
    for d0 in (1.05 * eps, 1.3 * eps, 1.6 * eps, 2.0 * eps, 2.4 * eps,
               3.0 * eps):
        pieces.append(np.column_stack([
            np.full(az.shape, math.cos(d0)),
            math.sin(d0) * np.cos(az),
            math.sin(d0) * np.sin(az),
        ]))
    # near the swap-symmetric surface |growing| = |decaying|
    lat = np.linspace(0.05, _HALF_PI - 0.05, 64)
    for off in (-0.02, -0.004, 0.004, 0.02):
        pieces.append(np.column_stack([
            np.cos(lat),
            np.sin(lat) * np.cos(0.25 * np.pi + off),
            np.sin(lat) * np.sin(0.25 * np.pi + off),
        ]))
    return _as_unit_rows(np.vstack(pieces))


def assemble_G(grid: ReducedPhaseGrid, delta=None, constants=None):
    """Assemble the escape function from the weight and the glued symbol.

    ``G = C_G' [1 - chi(|xi|/delta)] m(direction) log(2 f / (c_f delta))``

    where ``m`` is the flow-averaged weight, ``f`` the glued 1-homogeneous
    symbol, ``chi`` a smooth cutoff equal to 1 on [-1/2, 1/2] and supported
    in (-1, 1), and ``C_G'`` at least ``max(2/(beta T), 1)``.

    The small-scale radius ``R`` beyond which the escape derivative is
    certified strictly positive is computed from measured quantities: with
    ``D`` the largest sampled value of ``(-m * X log f)_+`` off the flow-dual
    neighbourhood (the product is sign-aligned by the swap symmetry, so this
    is roundoff-small) and ``x_min >= 1`` the sampled floor of the weight's
    flow derivative outside the transported cones,

        ``R = (1/2) exp((D + 1.5 / C_G') / x_min)``

    which makes the escape derivative at magnitudes >= R*delta at least 1.5
    by construction.  All measured inputs are recorded in ``constants``.

    Parameters
    ----------
    grid : ReducedPhaseGrid
    delta : float, optional
        Cutoff scale; defaults to ``grid.delta``.
    constants : mapping, optional
        Expert overrides: ``T`` (weight window), ``T_prime`` (symbol window),
        ``C_G_prime`` (prefactor; must be at least its floor), ``R``
        (small-scale radius; overriding may fail the certificate), ``step``
        (quadrature step).

    Raises
    ------
    ConfigurationError
        If the cone neighbourhoods overlap, a window is below its floor, the
        prefactor is below ``max(2/(beta T), 1)``, or the measured weight
        derivative floor degenerates.
    """
    constants = dict(constants or {})
    unknown = set(constants) - _ALLOWED_CONSTANT_KEYS
    if unknown:
        raise ValidationError(
            f"unknown constant overrides: {sorted(unknown)}; "
            f"allowed: {sorted(_ALLOWED_CONSTANT_KEYS)}")
    delta = grid.delta if delta is None else float(delta)
    if delta <= 0.0:
        raise ValidationError(f"delta must be positive, got {delta}")
    step = float(constants.get("step", FLOW_STEP))

    weight = build_weight(grid, T=constants.get("T"), step=step)
    symbol = build_f(grid, T_prime=constants.get("T_prime", DEFAULT_T_PRIME),
                     step=step)
    T = weight.T
    beta = BETA
    floor = max(2.0 / (beta * T), 1.0)
    C_G_prime = float(constants.get("C_G_prime", floor))
    if C_G_prime < floor - 1e-12:
        raise ConfigurationError(
            f"C_G_prime = {C_G_prime} is below its floor {floor} "
            "= max(2/(beta*T), 1)")
    C_G = 2.0 * C_G_prime * T

    probe = _escape_probe_directions(grid)
    m_probe = weight(probe)
    xm_probe = weight.derivative(probe)
    xlogf_probe = symbol.log_derivative(probe)
    off_invariant = _dist_0(probe) >= grid.eps
    strict = off_invariant & ~(_in_V_u(probe, T, grid.eps)
                               | _in_V_s(probe, T, grid.eps))
    product_bound = float(np.max(np.maximum(
        -(m_probe[off_invariant] * xlogf_probe[off_invariant]), 0.0)))
    xm_floor = float(xm_probe[strict].min())
    if xm_floor <= 0.5:
        raise ConfigurationError(
            f"measured weight-derivative floor {xm_floor} outside the "
            "transported cones is degenerate; the averaging window is too "
            "short for this grid")
    slack = 0.5
    R_derived = 0.5 * math.exp(
        (product_bound + (1.0 + slack) / C_G_prime) / xm_floor)
    R = float(constants.get("R", R_derived))
    if R <= 0.0:
        raise ValidationError(f"R must be positive, got {R}")

    record = {
        "C_G": C_G,
        "C_G_prime": C_G_prime,
        "C_G_prime_floor": floor,
        "T": T,
        "T_prime": symbol.T_prime,
        "R": R,
        "R_derived": R_derived,
        "beta": beta,
        "c_f": symbol.c_f,
        "delta": delta,
        "eps": grid.eps,
        "step": step,
        "tau_max": weight.tau_max,
        "frame_constant": symbol.frame_constant,
        "product_bound": product_bound,
        "weight_derivative_floor": xm_floor,
        "slack": slack,
        "n_probe_directions": int(probe.shape[0]),
        "plateau_radii": {k: float(v)
                          for k, v in weight.plateau_radii.items()},
    }
    return EscapeData(grid=grid, delta=delta, weight=weight, symbol=symbol,
                      m=C_G_prime * weight.values, C_G=C_G,
                      C_G_prime=C_G_prime, T=T, T_prime=symbol.T_prime,
                      R=R, beta=beta, c_f=symbol.c_f, constants=record)


def _jsonify(obj):
    """Recursively convert numpy scalars/arrays to plain JSON-ready data."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


@dataclass(frozen=True)
class EscapeCertificate:
    """Sampled certificate of the escape-function inequalities.

    ``conditions`` holds one record per certified condition: strict
    positivity of the flow derivative at large magnitude off the invariant
    cone ("i"), nonnegativity of the flow derivative above the cutoff scale
    ("ii"), logarithmic growth with the stated slopes along the saturated
    cones ("iii"), and exact invariance plus weight plateaus ("iv").  Each
    record carries the measured margin, its tolerance, the sample count and
    any witnesses of failure.  ``constants`` repeats the auditable constant
    record of the assembled data.
    """

    passed: bool
    conditions: dict
    constants: dict
    grid: dict
    notes: tuple

    def as_dict(self):
        """Plain-data form of the certificate."""
        return _jsonify({
            "passed": self.passed,
            "conditions": self.conditions,
            "constants": self.constants,
            "grid": self.grid,
            "notes": list(self.notes),
        })

    def to_json(self, path=None, indent=2):
        """Serialize to JSON; optionally also write to ``path``."""
        text = json.dumps(self.as_dict(), indent=indent, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _transported_cone_samples(T, eps):
    """Directions inside the forward/backward transported cones.

    The forward cone reaches angular radius ``atan(e^-T cot eps)`` toward the
    flow-dual poles and ``atan(e^-2T cot eps)`` toward the decaying-dual
    poles; samples sit at 70% of those radii (plus the poles), the backward
    cone is the swap mirror.
    """
    r0 = math.atan(math.exp(-T) / math.tan(eps))
    rs = math.atan(math.exp(-2.0 * T) / math.tan(eps))
    c = math.sqrt(0.5)
    rows_u = [
        [0.0, 1.0, 0.0],
        [math.sin(0.7 * r0), math.cos(0.7 * r0), 0.0],
        [0.0, math.cos(0.7 * rs), math.sin(0.7 * rs)],
        [c * math.sin(0.7 * rs), math.cos(0.7 * rs), c * math.sin(0.7 * rs)],
    ]
    u_dirs = _as_unit_rows(np.array(rows_u))
    s_dirs = _swapped(u_dirs)
    return u_dirs, s_dirs


def verify(grid: ReducedPhaseGrid, data: EscapeData, seed=0):
    """Sample the escape-function inequalities and emit a certificate.

    Conditions certified (finite differences along the lifted flow are taken
    at the shared quadrature step):

    i.   The flow derivative of G is >= 1 - 1e-3 at magnitudes above
         ``R * delta`` away from the flow-dual cone neighbourhood, including
         explicit samples inside the transported cones.
    ii.  The flow derivative of G is >= -1e-6 at all sampled magnitudes
         above the cutoff scale ``delta``.
    iii. Along the saturated directions G grows as ``+-C_G log|xi|`` (slope
         fit within 2% over the recorded magnitude range) and vanishes along
         the flow-dual plateau directions.
    iv.  The scaled weight equals ``+C_G``/``-C_G``/``0`` exactly on the
         plateau balls, and G is invariant under the cusp's local isometries
         (exact at the reduced level by representation; spot-checked through
         the coordinate interface).

    Returns an :class:`EscapeCertificate`; any sampled violation beyond
    tolerance fails the certificate and lists the worst witnesses.

    Parameters
    ----------
    grid : ReducedPhaseGrid
        Sampling grid; must share ``eps`` with the data's construction grid.
    data : EscapeData
    seed : int
        Seed of the coordinate-level invariance spot-check.
    """
    if not isinstance(data, EscapeData):
        raise ValidationError("verify needs the assembled escape data")
    if grid.eps != data.grid.eps:
        raise ValidationError(
            "sampling grid must share the cone width eps with the data "
            f"(got {grid.eps} vs {data.grid.eps})")
    eps = grid.eps
    delta = data.delta
    h = data.weight.step
    T = data.T
    Cp = data.C_G_prime
    C_G = data.C_G
    cf = data.c_f
    R = data.R

    def bundle(dirs):
        """Weight, symbol and stretch data at dirs and their step shifts."""
        fwd = _sphere_flow(dirs, h)
        bwd = _sphere_flow(dirs, -h)
        return {
            "m0": data.weight(dirs),
            "mf": data.weight(fwd),
            "mb": data.weight(bwd),
            "f0": data.symbol.hat(dirs),
            "ff": data.symbol.hat(fwd),
            "fb": data.symbol.hat(bwd),
            "nf": _stretch(dirs, h),
            "nb": _stretch(dirs, -h),
        }

    def g_of(rho, m, fh):
        cut = 1.0 - _chi_cutoff(rho / delta)
        return Cp * cut * m * np.log(2.0 * rho * fh / (cf * delta))

    def flow_fd(b, rho):
        gf = g_of(rho * b["nf"], b["mf"], b["ff"])
        gb = g_of(rho * b["nb"], b["mb"], b["fb"])
        return (gf - gb) / (2.0 * h)

    x = grid.xihat
    bx = bundle(x)
    n_fiber = grid.n_alpha

    # -- condition ii: nonnegative flow derivative above the cutoff scale --
    levels_ii = sorted({1.06, 1.3, 2.0, 4.0, 10.0}
                       | {r for r in (1.001 * R, 3.0 * R, 30.0 * R,
                                      1e3 * R) if r > 1.06})
    tol_ii = -1e-6
    margin_ii = math.inf
    witnesses_ii = []
    for lvl in levels_ii:
        fd = flow_fd(bx, lvl * delta)
        i_min = int(np.argmin(fd))
        if fd[i_min] < margin_ii:
            margin_ii = float(fd[i_min])
        if fd[i_min] < tol_ii:
            bad = np.argsort(fd)[:4]
            witnesses_ii += [{"magnitude_over_delta": float(lvl),
                              "xihat": [float(v) for v in x[k]],
                              "flow_derivative": float(fd[k])}
                             for k in bad if fd[k] < tol_ii]
    cond_ii = {
        "description": "flow derivative of G nonnegative at sampled "
                       "magnitudes above the cutoff scale",
        "passed": bool(margin_ii >= tol_ii),
        "margin": margin_ii,
        "threshold": tol_ii,
        "magnitude_levels_over_delta": [float(v) for v in levels_ii],
        "n_samples": len(levels_ii) * x.shape[0] * n_fiber,
        "n_distinct_directions": x.shape[0],
        "witnesses": witnesses_ii[:10],
    }

    # -- condition i: strict positivity beyond R*delta, off the flow-dual
    #    cone, with explicit transported-cone samples ----------------------
    levels_i = [1.0001 * R, 4.0 * R, 100.0 * R, 1e4 * R]
    tol_i = 1.0 - 1e-3
    region = _dist_0(x) >= eps
    u_dirs, s_dirs = _transported_cone_samples(T, eps)
    keep_u = _in_V_u(u_dirs, T, eps)
    keep_s = _in_V_s(s_dirs, T, eps)
    cone_dirs = np.vstack([u_dirs[keep_u], s_dirs[keep_s]])
    bc = bundle(cone_dirs)
    margin_i = math.inf
    witnesses_i = []
    for lvl in levels_i:
        for dirs, b, mask in ((x, bx, region),
                              (cone_dirs, bc, np.ones(cone_dirs.shape[0],
                                                      dtype=bool))):
            fd = flow_fd(b, lvl * delta)[mask]
            kept = dirs[mask]
            i_min = int(np.argmin(fd))
            if fd[i_min] < margin_i:
                margin_i = float(fd[i_min])
            if fd[i_min] < tol_i:
                bad = np.argsort(fd)[:4]
                witnesses_i += [{"magnitude_over_delta": float(lvl),
                                 "xihat": [float(v) for v in kept[k]],
                                 "flow_derivative": float(fd[k])}
                                for k in bad if fd[k] < tol_i]
    cond_i = {
        "description": "flow derivative of G >= 1 beyond R*delta away from "
                       "the flow-dual cone neighbourhood",
        "passed": bool(margin_i >= tol_i),
        "margin": margin_i,
        "threshold": tol_i,
        "magnitude_levels_over_delta": [float(v) for v in levels_i],
        "n_samples": (len(levels_i)
                      * (int(region.sum()) + cone_dirs.shape[0]) * n_fiber),
        "n_distinct_directions": int(region.sum()) + cone_dirs.shape[0],
        "n_transported_cone_samples": int(cone_dirs.shape[0]),
        "witnesses": witnesses_i[:10],
    }

    # -- condition iii: logarithmic slopes along the plateaus --------------
    plat = _plateau_samples(data.weight.plateau_radii)
    fit_lo = max(100.0, 2.0 * R * delta, 2.0 * delta)
    fit_hi = fit_lo * 1e4
    rhos = np.exp(np.linspace(math.log(fit_lo), math.log(fit_hi), 9))
    slope_dev = 0.0
    slopes = {}
    for fam, sign in (("u", 1.0), ("s", -1.0)):
        rows = []
        for d in plat[fam]:
            gvals = data.reduced_G(np.tile(d, (rhos.size, 1)), rhos)
            rows.append(float(np.polyfit(np.log(rhos), gvals, 1)[0]))
        slopes[fam] = rows
        slope_dev = max(slope_dev,
                        float(np.max(np.abs(np.array(rows) / (sign * C_G)
                                            - 1.0))))
    zero_mag = 0.0
    for d in plat["0"]:
        gvals = data.reduced_G(np.tile(d, (rhos.size, 1)), rhos)
        zero_mag = max(zero_mag, float(np.max(np.abs(gvals))))
    tol_iii = 0.02
    tol_zero = 1e-10 * max(1.0, C_G)
    cond_iii = {
        "description": "G grows as +-C_G log|xi| along the saturated "
                       "plateaus and vanishes along the flow-dual plateau",
        "passed": bool(slope_dev <= tol_iii and zero_mag <= tol_zero),
        "margin": float(slope_dev),
        "threshold": tol_iii,
        "flow_dual_max_abs": zero_mag,
        "flow_dual_threshold": tol_zero,
        "fit_range": [float(fit_lo), float(fit_hi)],
        "mean_slope_growing": float(np.mean(slopes["u"])),
        "mean_slope_decaying": float(np.mean(slopes["s"])),
        "C_G": float(C_G),
        "n_samples": (len(plat["u"]) + len(plat["s"]) + len(plat["0"]))
        * rhos.size * n_fiber,
        "n_distinct_directions": len(plat["u"]) + len(plat["s"])
        + len(plat["0"]),
        "witnesses": [],
    }
    if not cond_iii["passed"]:
        cond_iii["witnesses"] = [{"slopes_growing": slopes["u"],
                                  "slopes_decaying": slopes["s"],
                                  "flow_dual_max_abs": zero_mag}]

    # -- condition iv: plateau values and isometry invariance --------------
    plat_err = 0.0
    for fam, target in (("u", C_G), ("s", -C_G), ("0", 0.0)):
        vals = data.weight_symbol(plat[fam])
        plat_err = max(plat_err, float(np.max(np.abs(vals - target))))
    plat_rel = plat_err / max(C_G, 1.0)

    rng = np.random.default_rng(seed)
    iso_dev = 0.0
    n_iso = 48
    for _ in range(n_iso):
        p = PhasePoint(float(rng.uniform(-2.0, 4.0)),
                       np.array([float(rng.uniform(-3.0, 3.0))]),
                       float(rng.uniform(0.1, math.pi - 0.1)),
                       np.array([float(rng.choice((-1.0, 1.0)))]))
        xi = rng.normal(size=3) * 10.0 ** rng.uniform(-1.0, 5.0)
        tau = float(rng.uniform(-3.0, 3.0))
        r2, theta2 = apply_local_isometry(tau, [float(rng.uniform(-5.0, 5.0))],
                                          (p.r, p.theta))
        p2 = PhasePoint(r2, theta2, p.phi, p.u)
        xi2 = np.array([xi[0], math.exp(-tau) * xi[1], xi[2]])
        g1 = data.G(p, xi)
        g2 = data.G(p2, xi2)
        iso_dev = max(iso_dev, abs(g1 - g2) / (1.0 + abs(g1)))
    tol_iv = 1e-9
    margin_iv = max(plat_rel, iso_dev)
    cond_iv = {
        "description": "weight plateaus exact and G invariant under the "
                       "cusp's local isometries",
        "passed": bool(margin_iv <= tol_iv),
        "margin": float(margin_iv),
        "threshold": tol_iv,
        "plateau_error_relative": float(plat_rel),
        "isometry_deviation_relative": float(iso_dev),
        "reduced_representation_exact": True,
        "n_samples": n_iso + (len(plat["u"]) + len(plat["s"])
                              + len(plat["0"])) * n_fiber,
        "witnesses": [],
    }

    conditions = {"i": cond_i, "ii": cond_ii, "iii": cond_iii, "iv": cond_iv}
    passed = all(c["passed"] for c in conditions.values())
    notes = (
        "All reduced quantities depend on the covector only through its "
        "dual-frame direction and magnitude; the direction-angle fiber is "
        "exactly degenerate, so sampled values replicate exactly across the "
        f"{n_fiber} fiber copies counted in n_samples.",
        "Finite differences along the flow use the shared quadrature step, "
        "at which the weight's difference quotients telescope to endpoint "
        "clusters of the averaging window.",
        "R is derived from the measured product bound and weight-derivative "
        "floor recorded in constants; the certificate is a sampled statement "
        "at the recorded directions and magnitudes.",
    )
    return EscapeCertificate(passed=passed, conditions=conditions,
                             constants=dict(data.constants),
                             grid=grid.as_dict(), notes=notes)
