"""Gauge transform for u_t + H u_xx = u u_x and the pieces of its evolution.

The gauge variable is V = exp(-i F / 2) - 1, where F is the zero-mean
antiderivative of u.  The map has the exact pointwise inverse

    u = 2i (1 + conj(V)) V_x,

and along the flow V satisfies (with W = (1 + conj(V)) V_x and Pm / Pp the
negative / positive frequency projections)

    V_t + H V_xx = -2i (1 + V) Pm dx W + 2i Pm dx^2 V - i mean(W^2) (1 + V).

Restricted to frequencies xi > 1 the right side collapses to a paraproduct
pair: a quadratic piece -P_{+hi}(V_+ . Pm dx^2 V) and a cubic piece
-P_{+hi}(V_+ . Pm dx (conj(V) V_x)), each coupled with coefficient 2i, plus
the mean correction.  Those band pieces (`rhs_quadratic`, `rhs_cubic`) are
the objects the normal form machinery expands; `rhs_exact` is the full right
side and is what the reference solver integrates.

All products are dealiased on the doubled lattice; cascaded products keep
their intermediates on the doubled lattice so the restriction to the base
band is exact.
"""

import warnings
from functools import lru_cache

import numpy as np

from .spectral import (
    SpectralField,
    antiderivative_symbol,
    coeffs_to_samples,
    pad_coeffs,
    padded_grid,
    region_mask,
    samples_to_coeffs,
    sobolev_norm,
    unpad_coeffs,
    zero_mean_project,
)

# Smallest allowed min_x |1 + V| before the inverse map is refused.
GAUGE_FLOOR = 0.1


@lru_cache(maxsize=64)
def _padded(grid):
    return padded_grid(grid)


def _as_field(obj):
    if isinstance(obj, SpectralField):
        return obj
    if hasattr(obj, "V"):
        return obj.V
    raise TypeError(f"expected a SpectralField or GaugeState, got {type(obj)!r}")


def _conj_reflect(c):
    out = np.zeros_like(c)
    out[1:] = np.conj(c[1:][::-1])
    return out


def antiderivative(u):
    """Zero-mean antiderivative F (the zero mode of F is fixed to 0).

    A nonzero mean has no periodic antiderivative; if present it is projected
    away with a warning.
    """
    g = u.grid
    norm = sobolev_norm(u, 0)
    if abs(u.coeffs[g.n // 2]) > 1e-13 * max(norm, 1e-300):
        warnings.warn("dropping nonzero mean before antidifferentiation")
        u = zero_mean_project(u)
    return SpectralField(g, u.coeffs * antiderivative_symbol(g), _checked=True)


class GaugeState:
    """The gauge variable of a real field together with its band projections.

    Attributes
    ----------
    u, F, V : SpectralField
        the input field, its zero-mean antiderivative, and V = e^{-iF/2} - 1
    V_plus, V_minus, V_lo : SpectralField
        projections of V to xi > 1, xi < -1 and |xi| <= 1
    w : SpectralField
        V_x
    recon_residual : float
        L2 error of the exact reconstruction u = 2i (1 + conj V) V_x
    norm_control_ratio : float
        ||V||_{H^{s+1}} / (||F||_{H^{s+1}} e^{||F||/2}) at the control
        exponent; O(1) on data in the perturbative regime
    min_one_plus_v : float
        min_x |1 + V|, the invertibility margin of the gauge
    """

    __slots__ = (
        "u",
        "F",
        "V",
        "V_plus",
        "V_minus",
        "V_lo",
        "w",
        "recon_residual",
        "norm_control_ratio",
        "min_one_plus_v",
    )

    def __repr__(self):
        return (
            f"GaugeState(n={self.V.grid.n}, recon_residual={self.recon_residual:.2e}, "
            f"min|1+V|={self.min_one_plus_v:.3f})"
        )


def gauge_forward(u, control_s=0.5):
    """Gauge a real zero-mean field: V = exp(-i F / 2) - 1, F = dx^{-1} u.

    The exponential is evaluated pointwise on the doubled lattice and then
    restricted to the base band, so the stored V is the band-limited gauge
    variable.  The norm-control ratio is monitored at H^{control_s + 1}.
    """
    g = u.grid
    F = antiderivative(u)
    pg = _padded(g)
    f_samples = coeffs_to_samples(pad_coeffs(F.coeffs, g.n), pg)
    v_samples = np.exp(-0.5j * f_samples) - 1.0
    V = SpectralField(g, unpad_coeffs(samples_to_coeffs(v_samples, pg), g.n), _checked=True)

    st = GaugeState.__new__(GaugeState)
    st.u = u
    st.F = F
    st.V = V
    mask_p = region_mask(g.xi, "+hi")
    mask_m = region_mask(g.xi, "-hi")
    mask_lo = region_mask(g.xi, "lo")
    st.V_plus = SpectralField(g, V.coeffs * mask_p, _checked=True)
    st.V_minus = SpectralField(g, V.coeffs * mask_m, _checked=True)
    st.V_lo = SpectralField(g, V.coeffs * mask_lo, _checked=True)
    st.w = SpectralField(g, V.coeffs * (1j * g.xi), _checked=True)

    margin, uc = _reconstruct(V)
    st.min_one_plus_v = margin
    herm = 0.5 * (uc + _conj_reflect(uc))
    diff = u.coeffs - herm
    st.recon_residual = float(np.sqrt(np.sum(np.abs(diff) ** 2) * g.dxi / (2 * np.pi)))

    nf = sobolev_norm(F, control_s + 1.0)
    if nf == 0.0:
        st.norm_control_ratio = 0.0
    else:
        st.norm_control_ratio = sobolev_norm(V, control_s + 1.0) / (nf * np.exp(nf / 2.0))
    if st.norm_control_ratio > 4.0:
        warnings.warn(
            f"gauge norm-control ratio {st.norm_control_ratio:.2f} > 4; "
            "the data is far outside the perturbative regime"
        )
    return st


def _reconstruct(V):
    """Invertibility margin and coefficients of 2i (1 + conj V) V_x."""
    g = V.grid
    pg = _padded(g)
    cpad = pad_coeffs(V.coeffs, g.n)
    vs = coeffs_to_samples(cpad, pg)
    dvs = coeffs_to_samples(cpad * (1j * pg.xi), pg)
    margin = float(np.min(np.abs(1.0 + vs)))
    uc = unpad_coeffs(samples_to_coeffs(2j * (1.0 + np.conj(vs)) * dvs, pg), g.n)
    return margin, uc


def gauge_inverse(V):
    """Invert the gauge: u = 2i (1 + conj V) V_x, realified.

    Raises ValueError when min |1 + V| < GAUGE_FLOOR (the phase F = 2i log(1+V)
    is no longer well defined on the lattice at that amplitude).
    """
    V = _as_field(V)
    g = V.grid
    margin, uc = _reconstruct(V)
    if margin < GAUGE_FLOOR:
        raise ValueError(
            f"gauge not invertible at this amplitude: min |1 + V| = {margin:.3g} "
            f"< {GAUGE_FLOOR}"
        )
    herm = 0.5 * (uc + _conj_reflect(uc))
    residue = float(np.max(np.abs(uc - herm)))
    scale = float(np.max(np.abs(herm)))
    if residue > 1e-10 * max(scale, 1e-300):
        warnings.warn(
            f"reconstructed field has imaginary residue {residue:.2e}; realified"
        )
    return SpectralField(g, herm, _checked=True)


def _product(c1, c2, g):
    """Dealiased product of two base-band coefficient arrays."""
    pg = _padded(g)
    s1 = coeffs_to_samples(pad_coeffs(c1, g.n), pg)
    s2 = coeffs_to_samples(pad_coeffs(c2, g.n), pg)
    return unpad_coeffs(samples_to_coeffs(s1 * s2, pg), g.n)


def _signs(sign):
    if sign == "+":
        return "+hi", "-"
    if sign == "-":
        return "-hi", "+"
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def rhs_quadratic(state, sign):
    """Quadratic band piece -P_{hi}(V_hi . P_opp dx^2 V) for the given sign."""
    V = _as_field(state)
    g = V.grid
    hi, opp = _signs(sign)
    a = V.coeffs * region_mask(g.xi, hi)
    b = V.coeffs * (-(g.xi**2)) * region_mask(g.xi, opp)
    out = -_product(a, b, g) * region_mask(g.xi, hi)
    return SpectralField(g, out, _checked=True)


def rhs_cubic(state, sign):
    """Cubic band piece -P_{hi}(V_hi . P_opp dx (conj(V) V_x))."""
    V = _as_field(state)
    g = V.grid
    pg = _padded(g)
    hi, opp = _signs(sign)
    cpad = pad_coeffs(V.coeffs, g.n)
    vs = coeffs_to_samples(cpad, pg)
    dvs = coeffs_to_samples(cpad * (1j * pg.xi), pg)
    inner = samples_to_coeffs(np.conj(vs) * dvs, pg)  # stays on the doubled lattice
    inner *= (1j * pg.xi) * region_mask(pg.xi, opp)
    s_hi = coeffs_to_samples(pad_coeffs(V.coeffs * region_mask(g.xi, hi), g.n), pg)
    out2 = samples_to_coeffs(s_hi * coeffs_to_samples(inner, pg), pg)
    out = -unpad_coeffs(out2, g.n) * region_mask(g.xi, hi)
    return SpectralField(g, out, _checked=True)


def rhs_low(state):
    """Low-band forcing -P_{+lo}(V . Pm u_x) - P_{-lo}(V . Pp u_x)."""
    V = state.V
    u = state.u
    g = V.grid
    du = u.coeffs * (1j * g.xi)
    t1 = _product(V.coeffs, du * region_mask(g.xi, "-"), g) * region_mask(g.xi, "+lo")
    t2 = _product(V.coeffs, du * region_mask(g.xi, "+"), g) * region_mask(g.xi, "-lo")
    return SpectralField(g, -(t1 + t2), _checked=True)


def mean_w_squared(V):
    """Complex mean over the torus of W^2, W = (1 + conj V) V_x."""
    V = _as_field(V)
    g = V.grid
    pg = _padded(g)
    cpad = pad_coeffs(V.coeffs, g.n)
    vs = coeffs_to_samples(cpad, pg)
    dvs = coeffs_to_samples(cpad * (1j * pg.xi), pg)
    ws = (1.0 + np.conj(vs)) * dvs
    return complex(np.mean(ws * ws))


def rhs_exact_coeffs(c, g):
    """Coefficient array of the full gauged right side (everything but -H V_xx).

    V_t + H V_xx = -2i (1 + V) Pm dx W + 2i Pm dx^2 V - i mean(W^2) (1 + V).
    Valid for any complex band-limited V, not only gauge images.
    """
    pg = _padded(g)
    cpad = pad_coeffs(c, g.n)
    vs = coeffs_to_samples(cpad, pg)
    dvs = coeffs_to_samples(cpad * (1j * pg.xi), pg)
    ws = (1.0 + np.conj(vs)) * dvs
    wc = samples_to_coeffs(ws, pg)
    mean_w2 = np.mean(ws * ws)
    gs = coeffs_to_samples(wc * (1j * pg.xi) * (pg.xi < 0.0), pg)
    out = -2j * unpad_coeffs(samples_to_coeffs((1.0 + vs) * gs, pg), g.n)
    out += 2j * (-(g.xi**2)) * (g.xi < 0.0) * c
    out += -1j * mean_w2 * c
    out[g.n // 2] += -1j * mean_w2 * (2.0 * g.half_length)
    out[0] = 0.0
    return out


def rhs_exact(V):
    V = _as_field(V)
    return SpectralField(V.grid, rhs_exact_coeffs(V.coeffs, V.grid), _checked=True)


def rhs_terms_total_coeffs(c, g):
    """Right side of the truncated band system used by the normal form layer:

        2i (Q_+ + Q_- + C_+ + C_-)  +  P_lo(full right side).

    The high bands keep only the four paraproduct pieces (the mean correction
    is dropped there); the low band keeps the exact forcing, which is never
    expanded.
    """
    V = SpectralField(g, c, _checked=True)
    total = rhs_exact_coeffs(c, g) * region_mask(g.xi, "lo")
    for sign in ("+", "-"):
        total += 2j * (rhs_quadratic(V, sign).coeffs + rhs_cubic(V, sign).coeffs)
    total[0] = 0.0
    return total


def rhs_terms_total(V):
    V = _as_field(V)
    return SpectralField(V.grid, rhs_terms_total_coeffs(V.coeffs, V.grid), _checked=True)


def profile_time_derivative_sup(state):
    """sup_xi |Q_hat + C_hat| over both signs (the band time-derivative size).

    The evolution couples these pieces with coefficient 2i; the returned
    value carries no such constant.
    """
    V = _as_field(state)
    best = 0.0
    for sign in ("+", "-"):
        c = rhs_quadratic(V, sign).coeffs + rhs_cubic(V, sign).coeffs
        best = max(best, float(np.max(np.abs(c))))
    return best
