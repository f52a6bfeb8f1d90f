"""Shared finite-difference oracle for the generator identity checks.

The generator on scalar fields W(r, x) of the cylinder R x S^d reads

    X_b W = h [ x dW/dr - (1 - x^2) dW/dx + (d/2) x W + A W ],

independent of this package's internals: the tests re-apply it to gridded
resolvent outputs with sixth-order central differences, Richardson-combined
across strides 1 and 2 for an eighth-order oracle.
"""

import numpy as np

_C6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


def gauss(r0=0.0):
    """Gaussian radial profile exp(-4 (r - r0)^2): effectively compact on the
    default grid and with fast-decaying transform along vertical contours."""

    def a(r):
        return np.exp(-4.0 * (np.asarray(r, float) - r0) ** 2)

    return a


def _d6(W, axis, step, stride=1):
    out = sum(_C6[k] * np.roll(W, (3 - k) * stride, axis=axis) for k in range(7))
    return out / (step * stride)


def apply_generator_fd(field, op, s, u_node=None):
    """(X_b - hs) applied to field.scalar_values(u_node) by finite differences."""
    if u_node is None:
        u_node = np.array([1.0] + [0.0] * (op.d - 1))
    W = field.scalar_values(u_node)
    r, x = field.r_grid, field.x_grid
    dr, dx = r[1] - r[0], x[1] - x[0]
    Wr = (64.0 * _d6(W, 0, dr, 1) - _d6(W, 0, dr, 2)) / 63.0
    Wx = (64.0 * _d6(W, 1, dx, 1) - _d6(W, 1, dx, 2)) / 63.0
    lhs = op.h * (
        x[None, :] * Wr - (1.0 - x[None, :] ** 2) * Wx + (op.d / 2.0) * x[None, :] * W
    ) + (op.h * complex(op.A) - op.h * complex(s)) * W
    return lhs


def identity_residual(field, op, s, source, r_win=8.0, x_lo=-0.85, x_hi=0.55):
    """sup |(X_b - hs) field - source| / sup |source| over the trusted window."""
    lhs = apply_generator_fd(field, op, s)
    r, x = field.r_grid, field.x_grid
    F = source.terms[0].radial(r)[:, None] * np.ones_like(x)[None, :]
    wr = np.abs(r) <= r_win
    wx = (x >= x_lo) & (x <= x_hi)
    err = np.abs(lhs[np.ix_(wr, wx)] - F[np.ix_(wr, wx)]).max()
    return float(err / np.abs(F).max())
