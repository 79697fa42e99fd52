"""Quadrature oracles for the window-restricted scaling integrals.

Two brute-force integrals control the frequency-restricted operator bounds:
a quadratic one (1-D window integral) and a cubic one (2-D inner integral).
Both live on the support geometry of the downward cascade: the high input
slot sits *above* the output frequency (xi_1 > xi > 1; the pair of remaining
cubic frequencies sums to xi - xi_1 < 0).  Reading the regions the other way
round places a near-resonant corner at xi_1 -> 1 inside the window and the
sup over xi diverges like xi^3, so no scaling law would be visible.

Quadratic.  With xi = xi_1 + xi_2 and xi_2 < 0 on the support, the phase is
Psi = 2 xi xi_2, of a single sign; the mirrored term realises the other sign,
so only |alpha| matters and the window is taken on the magnitude:

    J(alpha, M) = sup_{xi > 1}  int  <xi>^(2s+2eps+2) xi2^2
                  / (xi1^2 <xi1>^(2s) <xi2>^(2s))  dxi2
                  over { | 2 xi |xi2| - |alpha| | < M }.

Cubic.  With xi = xi_1 + xi_2 + xi_3 and a conjugated middle slot, the
windowed phase is

    Phi = |xi| xi - |xi1| xi1 + |xi2| xi2 - |xi3| xi3 ,

which at fixed (xi, xi_1) is strictly increasing in xi_2 (three smooth
pieces, knots where xi_2 or xi_3 changes sign), so {|Phi - alpha| < M} is a
single interval with closed-form endpoints:

    I(alpha, M) = sup_{xi > 1}  int dxi1  int_window dxi2
                  <xi>^(2s+2eps+2) |xi2+xi3|^2
                  / (xi1^2 <xi1>^(2s) <xi2>^(2s+2) <xi3>^(2s)).

Phi spans all of R in xi_2, so alpha of either sign is meaningful here and
is used as given.

Quadrature: midpoint rule inside the exact window; the xi_1 direction uses a
quadratically graded mesh (dense near xi_1 = xi, where the resonant curve
enters and the integrand peaks); the sup runs over a log-spaced xi mesh with
fixed per-octave density plus a linear zoom pass around the coarse argmax.
Empty windows integrate to zero exactly.  Deterministic given (mesh, cutoff).
"""

import numpy as np

__all__ = ["quad_integral_J", "cubic_integral_I"]


def _jap(x):
    """Japanese bracket <x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + x * x)


def _validate(M, cutoff, mesh):
    if not M > 0:
        raise ValueError(f"window width M must be positive, got {M}")
    if not cutoff > 1:
        raise ValueError(f"cutoff must exceed 1, got {cutoff}")
    if mesh < 8:
        raise ValueError(f"mesh must be at least 8, got {mesh}")


def _xi_mesh(cutoff, mesh):
    """Log-spaced output-frequency mesh with cutoff-independent density."""
    n = max(mesh, int(round(mesh * np.log2(cutoff) / 4.0)))
    return np.geomspace(1.001, cutoff, n)


# ---------------------------------------------------------------------------
# quadratic


def _quad_inner(xi, alpha, M, s, eps, cutoff, mesh):
    """Window integral at each output frequency in the array `xi`."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    a = abs(alpha)
    vlo = np.maximum(a - M, 0.0) / (2.0 * xi)
    vhi = np.minimum((a + M) / (2.0 * xi), cutoff)
    w = np.maximum(vhi - vlo, 0.0)
    t = (np.arange(mesh) + 0.5) / mesh
    v = vlo[:, None] + t[None, :] * w[:, None]        # |xi_2|
    x1 = xi[:, None] + v
    wt = (_jap(xi)[:, None] ** (2 * s + 2 * eps + 2) * v ** 2
          / (x1 ** 2 * _jap(x1) ** (2 * s) * _jap(v) ** (2 * s)))
    return (w / mesh) * wt.sum(axis=1)


def quad_integral_J(alpha, M, s, eps, cutoff, mesh=96):
    """Sup over the output frequency of the quadratic window integral."""
    _validate(M, cutoff, mesh)
    xis = _xi_mesh(cutoff, mesh)
    vals = _quad_inner(xis, alpha, M, s, eps, cutoff, mesh)
    i = int(vals.argmax())
    zoom = np.linspace(xis[max(i - 1, 0)], xis[min(i + 1, len(xis) - 1)], mesh)
    vz = _quad_inner(zoom, alpha, M, s, eps, cutoff, mesh)
    return float(max(vals[i], vz.max()))


# ---------------------------------------------------------------------------
# cubic


def _cubic_phase(xi, x1, xi2):
    """Phi at fixed output xi, high slot x1, and middle frequency xi2."""
    xi3 = xi - x1 - xi2
    return (np.abs(xi) * xi - np.abs(x1) * x1
            + np.abs(xi2) * xi2 - np.abs(xi3) * xi3)


def _cubic_window(xi, x1, t):
    """The xi2 with Phi(xi2) = t, for x1 > xi > 1 (Phi strictly increasing).

    Piecewise inverse: two parabolic pieces where xi2 and xi3 = xi - x1 - xi2
    have equal signs, a linear piece between the knots.
    """
    eta = xi - x1                       # = xi2 + xi3 < 0 on the support
    c0 = xi * xi - x1 * x1
    T1 = c0 - eta * eta                 # Phi at the knot xi2 = eta
    T2 = c0 + eta * eta                 # Phi at the knot xi2 = 0
    low = (eta - np.sqrt(np.maximum(2.0 * (c0 - t) - eta * eta, 0.0))) / 2.0
    mid = (c0 + eta * eta - t) / (2.0 * eta)
    high = (eta + np.sqrt(np.maximum(2.0 * (t - c0) - eta * eta, 0.0))) / 2.0
    return np.where(t < T1, low, np.where(t > T2, high, mid))


def _cubic_inner(xi, alpha, M, s, eps, cutoff, mesh):
    """Inner 2-D integral over (xi_1, xi_2) at one output frequency."""
    span = cutoff - xi
    if span <= 0.0:
        return 0.0
    t = (np.arange(mesh) + 0.5) / mesh
    x1 = xi + span * t ** 2             # graded: dense near x1 = xi
    dx1 = 2.0 * span * t / mesh
    eta = xi - x1
    lo = np.clip(_cubic_window(xi, x1, alpha - M), -cutoff, cutoff)
    hi = np.clip(_cubic_window(xi, x1, alpha + M), -cutoff, cutoff)
    w = np.maximum(hi - lo, 0.0)
    xi2 = lo[:, None] + t[None, :] * w[:, None]
    xi3 = eta[:, None] - xi2
    wt = (_jap(xi) ** (2 * s + 2 * eps + 2) * (eta ** 2)[:, None]
          / ((x1 ** 2 * _jap(x1) ** (2 * s))[:, None]
             * _jap(xi2) ** (2 * s + 2) * _jap(xi3) ** (2 * s)))
    return float((dx1 * (w / mesh) * wt.sum(axis=1)).sum())


def cubic_integral_I(alpha, M, s, eps, cutoff, mesh=64):
    """Sup over the output frequency of the cubic window integral."""
    _validate(M, cutoff, mesh)
    xis = _xi_mesh(cutoff, mesh)
    vals = np.array([_cubic_inner(x, alpha, M, s, eps, cutoff, mesh)
                     for x in xis])
    i = int(vals.argmax())
    zoom = np.linspace(xis[max(i - 1, 0)], xis[min(i + 1, len(xis) - 1)], mesh)
    vz = max(_cubic_inner(x, alpha, M, s, eps, cutoff, mesh) for x in zoom)
    return float(max(vals[i], vz))
