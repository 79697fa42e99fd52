"""Tests for phase-weighted operators, tuple bookkeeping and iteration params.

The brute-force oracle below enumerates every lattice tuple with plain python
index arithmetic, independently of the vectorized summation kernels.
"""

import numpy as np
import pytest

from bolab.gauge import rhs_cubic, rhs_quadratic
from bolab.infr import (
    COUPLING,
    apply_T_alpha_M,
    apply_T_sigma,
    bo_terms,
    dyadic_sigma_from_restricted,
    gamma_cubic,
    gamma_quadratic,
    infr_params,
    oscillation_phase,
    phase,
    split_resonant,
    term_values_on_lattice,
)
from bolab.spectral import Grid, SpectralField, region_mask


def field_from_modes(grid, modes):
    c = np.zeros(grid.n, dtype=complex)
    for k, val in modes.items():
        c[int(k) + grid.n // 2] = val
    return SpectralField(grid, c)


def random_complex_field(grid, rng, kmax):
    c = np.zeros(grid.n, dtype=complex)
    half = grid.n // 2
    for k in range(-kmax, kmax + 1):
        c[half + k] = rng.standard_normal() + 1j * rng.standard_normal()
    return SpectralField(grid, c)


def omega(x):
    return abs(x) * x


def brute_weighted(term, inputs, weight_fn):
    """Direct tuple-by-tuple evaluation of a weighted term application."""
    g = inputs[0].grid
    n = g.n
    half = n // 2
    xi = g.xi

    def slot_value(j, i):
        if term.conj[j]:
            ir = n - i
            if not 0 <= ir < n:
                return 0.0
            v = np.conj(inputs[j].coeffs[ir])
        else:
            v = inputs[j].coeffs[i]
        reg = term.slot_regions[j]
        if reg is not None and not region_mask(np.array([xi[i]]), reg)[0]:
            return 0.0
        return v

    signs = term.phase_signs()
    out = np.zeros(n, dtype=complex)
    for io in range(1, n):
        if not region_mask(np.array([xi[io]]), term.out_region)[0]:
            continue
        acc = 0.0
        if term.arity == 2:
            for i1 in range(n):
                i2 = io - i1 + half
                if not 0 <= i2 < n:
                    continue
                v = slot_value(0, i1) * slot_value(1, i2)
                if v == 0.0:
                    continue
                ph = omega(xi[io]) - signs[0] * omega(xi[i1]) - signs[1] * omega(xi[i2])
                acc += v * xi[i2] ** 2 * weight_fn(ph)
        else:
            for i1 in range(n):
                v1 = slot_value(0, i1)
                if v1 == 0.0:
                    continue
                for i2 in range(n):
                    v2 = slot_value(1, i2)
                    if v2 == 0.0:
                        continue
                    i3 = io - i1 - i2 + n
                    if not 0 <= i3 < n:
                        continue
                    pair = xi[i2] + xi[i3]
                    if term.pair_sign == "-" and not pair < 0:
                        continue
                    if term.pair_sign == "+" and not pair > 0:
                        continue
                    v = v1 * v2 * slot_value(2, i3)
                    if v == 0.0:
                        continue
                    ph = (
                        omega(xi[io])
                        - signs[0] * omega(xi[i1])
                        - signs[1] * omega(xi[i2])
                        - signs[2] * omega(xi[i3])
                    )
                    acc += v * pair * xi[i3] * weight_fn(ph)
        out[io] = acc * (g.dxi / (2 * np.pi)) ** (term.arity - 1)
    return out


# ---------------------------------------------------------------------------
# term registry and phases


def test_terms_registry():
    terms = bo_terms()
    assert set(terms) == {"Q+", "Q-", "C+", "C-"}
    assert terms["Q+"].arity == 2 and terms["C+"].arity == 3
    assert terms["Q+"].conj == (False, False)
    assert terms["C+"].conj == (False, True, False)
    assert terms["Q+"].out_region == "+hi" and terms["Q-"].out_region == "-hi"
    assert terms["Q+"].slot_regions == ("+hi", "-")
    assert terms["C-"].pair_sign == "+"
    assert COUPLING == 2j
    # multiplier hand values
    assert terms["Q+"].multiplier((5.0, -3.0)) == 9.0
    assert terms["C+"].multiplier((9.0, -1.0, -2.0)) == 6.0
    # region membership
    assert terms["Q+"].in_region(2.0, (3.0, -1.0))
    assert not terms["Q+"].in_region(2.0, (0.5, 1.5))  # slot 1 not hi
    assert not terms["C+"].in_region(2.0, (1.5, 0.3, 0.2))  # xi_2 + xi_3 > 0


def test_phase_pinned_examples():
    terms = bo_terms()
    # quadratic: omega(2) - omega(5) - omega(-3) = 4 - 25 + 9
    assert phase(terms["Q+"], 2.0, (5.0, -3.0)) == -12.0
    # cubic flips the conjugated slot: 4 - 16 - 9 - 1
    assert phase(terms["C+"], 2.0, (4.0, -3.0, 1.0)) == -22.0
    # the time-integrand phase does not flip: 4 - 16 + 9 - 1
    assert oscillation_phase(terms["C+"], 2.0, (4.0, -3.0, 1.0)) == -4.0
    # they differ by 2 omega(xi_2) on the cubic pieces, agree on the quadratic
    assert phase(terms["C+"], 2.0, (4.0, -3.0, 1.0)) == -4.0 + 2 * omega(-3.0)
    assert oscillation_phase(terms["Q+"], 2.0, (5.0, -3.0)) == -12.0


def test_phase_rejects_bad_tuples():
    terms = bo_terms()
    with pytest.raises(ValueError, match="sum"):
        phase(terms["Q+"], 2.0, (5.0, -2.0))
    with pytest.raises(ValueError, match="slot"):
        phase(terms["C+"], 2.0, (5.0, -3.0))


def test_phase_identity_on_quadratic_region():
    # on xi_1 > xi > 1 (so xi_2 < 0) the quadratic phase is exactly 2 xi xi_2
    terms = bo_terms()
    for k in range(2, 21):
        for k1 in range(k + 1, 41):
            k2 = k - k1
            assert phase(terms["Q+"], float(k), (float(k1), float(k2))) == 2.0 * k * k2


# ---------------------------------------------------------------------------
# parameter bookkeeping


def test_params_pinned_table():
    p = infr_params(0.5, 0.0)
    assert p.gamma_quad == 0.0 and p.gamma_cubic == 0.0 and p.gamma == 0.0
    assert p.beta == 0.5
    assert p.sigma == 0.75
    assert p.theta == pytest.approx(0.25, rel=1e-14)
    assert p.delta == pytest.approx(0.25, rel=1e-14)
    assert p.mu == 0.0
    assert p.feasible and p.message == ""
    assert p.c(1) == pytest.approx(256.0, rel=1e-12)
    assert p.c(2) == pytest.approx(6561.0, rel=1e-12)
    assert p.level_threshold(1) == 1000.0
    assert p.level_threshold(2, 256.0) == pytest.approx(26244.0, rel=1e-12)
    assert infr_params(0.5, 0.0, N_threshold=50.0).level_threshold(1) == 50.0
    names = [row[0] for row in p.table()]
    assert "sigma" in names and "quadratic.theta" in names


def test_params_reports_infeasible_instead_of_refusing():
    p = infr_params(0.5, 0.4)
    assert p.gamma_quad == pytest.approx(0.4)
    assert p.gamma_cubic == pytest.approx(0.2)
    assert not p.feasible
    assert "Assumption 1" in p.message
    per = {tp.name: tp for tp in p.per_term}
    assert not per["quadratic"].feasible
    assert per["cubic"].feasible
    assert per["cubic"].theta == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(ValueError, match="Assumption 1"):
        p.c(1)
    with pytest.raises(ValueError, match="Assumption 1"):
        p.level_threshold(2, 100.0)


def test_params_custom_sigma():
    p = infr_params(0.5, 0.0, sigma=0.6)
    assert p.theta == pytest.approx(0.4)
    assert p.delta == pytest.approx(0.4)
    with pytest.raises(ValueError, match="sigma"):
        infr_params(0.5, 0.0, sigma=0.5)  # not above gamma + beta
    with pytest.raises(ValueError, match="sigma"):
        infr_params(0.5, 0.0, sigma=1.0)
    # custom sigma in the infeasible regime: accepted, still reported infeasible
    p = infr_params(0.5, 0.4, sigma=0.95)
    assert not p.feasible


def test_params_domain_errors():
    with pytest.raises(ValueError, match="s must"):
        infr_params(0.0, 0.0)
    with pytest.raises(ValueError, match="eps"):
        infr_params(0.5, -0.1)
    with pytest.raises(ValueError, match="eps"):
        infr_params(0.5, 0.5)
    with pytest.raises(ValueError, match="eps"):
        infr_params(2.0, 0.75)
    infr_params(2.0, 0.74)  # just inside
    with pytest.raises(ValueError, match="N_threshold"):
        infr_params(0.5, 0.0, N_threshold=1.0)


def test_gamma_formulas():
    assert gamma_quadratic(0.5, 0.4) == pytest.approx(0.4)
    assert gamma_cubic(0.5, 0.4) == pytest.approx(0.2)
    assert gamma_cubic(0.3, 0.25) == pytest.approx(max(0.25 - 0.025, -0.25, 0.0))


# ---------------------------------------------------------------------------
# operators vs the band right-hand sides and the brute-force oracle


def test_sigma_zero_matches_band_rhs():
    g = Grid(64, np.pi)
    rng = np.random.default_rng(7)
    V = random_complex_field(g, rng, 28)
    terms = bo_terms()
    for sign in "+-":
        got = apply_T_sigma(terms["Q" + sign], (V, V), 0.0)
        want = rhs_quadratic(V, sign)
        scale = np.abs(want.coeffs).max()
        assert np.abs(got.coeffs - want.coeffs).max() <= 1e-12 * scale
        got = apply_T_sigma(terms["C" + sign], (V, V, V), 0.0)
        want = rhs_cubic(V, sign)
        scale = np.abs(want.coeffs).max()
        assert np.abs(got.coeffs - want.coeffs).max() <= 1e-12 * scale


def test_sigma_weight_hand_tuple():
    # single active pair: V(3) = a, V(-1) = b feeds only xi = 2 with Phi = -4
    g = Grid(32, np.pi)
    a, b = 0.4 + 0.2j, 0.1 - 0.3j
    V = field_from_modes(g, {3: a, -1: b})
    out = apply_T_sigma(bo_terms()["Q+"], (V, V), 0.7)
    expected = a * b * 1.0 * (1.0 + 16.0) ** (-0.35) / (2 * np.pi)
    io = g.n // 2 + 2
    assert out.coeffs[io] == pytest.approx(expected, rel=1e-13)
    mask = np.ones(g.n, dtype=bool)
    mask[io] = False
    assert np.abs(out.coeffs[mask]).max() == 0.0


def test_alpha_window_selects_single_tuple():
    g = Grid(32, np.pi)
    a, b = 0.4 + 0.2j, 0.1 - 0.3j
    V = field_from_modes(g, {3: a, -1: b, -2: 0.2j})
    term = bo_terms()["Q+"]
    # tuples: (3,-1) -> xi=2, Phi=-4; (3,-2) -> xi=1 (not hi); nothing else
    hit = apply_T_alpha_M(term, (V, V), alpha=-4.0, M=0.5)
    io = g.n // 2 + 2
    assert hit.coeffs[io] == pytest.approx(a * b / (2 * np.pi), rel=1e-13)
    # huge window == unweighted application
    wide = apply_T_alpha_M(term, (V, V), alpha=0.0, M=1e9)
    plain = apply_T_sigma(term, (V, V), 0.0)
    assert np.abs(wide.coeffs - plain.coeffs).max() <= 1e-15
    # empty window
    empty = apply_T_alpha_M(term, (V, V), alpha=1e6, M=1.0)
    assert np.abs(empty.coeffs).max() == 0.0
    with pytest.raises(ValueError, match="M"):
        apply_T_alpha_M(term, (V, V), alpha=0.0, M=0.0)


def test_alpha_window_is_strict():
    g = Grid(32, np.pi)
    V = field_from_modes(g, {3: 1.0, -1: 1.0})
    term = bo_terms()["Q+"]
    # Phi = -4; |Phi - (-2)| = 2 must NOT pass a window of width 2
    out = apply_T_alpha_M(term, (V, V), alpha=-2.0, M=2.0)
    assert np.abs(out.coeffs).max() == 0.0
    out = apply_T_alpha_M(term, (V, V), alpha=-2.0, M=2.0 + 1e-9)
    assert np.abs(out.coeffs).max() > 0.0


def test_operator_is_multilinear():
    g = Grid(32, np.pi)
    rng = np.random.default_rng(11)
    V1 = random_complex_field(g, rng, 10)
    V2 = random_complex_field(g, rng, 10)
    W = random_complex_field(g, rng, 10)
    term = bo_terms()["Q+"]
    left = apply_T_sigma(term, (V1 + V2, W), 0.75).coeffs
    right = apply_T_sigma(term, (V1, W), 0.75).coeffs + apply_T_sigma(term, (V2, W), 0.75).coeffs
    assert np.abs(left - right).max() <= 1e-13 * max(1.0, np.abs(right).max())
    lam = 0.7 - 0.3j
    scaled = apply_T_sigma(term, (V1, W * lam), 0.75).coeffs
    assert np.abs(scaled - lam * apply_T_sigma(term, (V1, W), 0.75).coeffs).max() <= 1e-13


def test_brute_force_quadratic():
    g = Grid(32, np.pi)
    rng = np.random.default_rng(3)
    terms = bo_terms()
    for trial in range(3):
        V1 = random_complex_field(g, rng, 9)
        V2 = random_complex_field(g, rng, 9)
        for name in ("Q+", "Q-"):
            want = brute_weighted(
                terms[name], (V1, V2), lambda ph: (1.0 + np.asarray(ph) ** 2) ** (-0.375)
            )
            got = apply_T_sigma(terms[name], (V1, V2), 0.75)
            scale = max(np.abs(want).max(), 1e-30)
            assert np.abs(got.coeffs - want).max() <= 1e-12 * scale

            want = brute_weighted(
                terms[name], (V1, V2), lambda ph: float(np.abs(ph - 8.0) < 20.0)
            )
            got = apply_T_alpha_M(terms[name], (V1, V2), 8.0, 20.0)
            scale = max(np.abs(want).max(), 1e-30)
            assert np.abs(got.coeffs - want).max() <= 1e-12 * scale


def test_brute_force_cubic():
    g = Grid(32, np.pi)
    rng = np.random.default_rng(5)
    terms = bo_terms()
    V1 = random_complex_field(g, rng, 8)
    V2 = random_complex_field(g, rng, 8)
    V3 = random_complex_field(g, rng, 8)
    for name in ("C+", "C-"):
        want = brute_weighted(
            terms[name], (V1, V2, V3), lambda ph: (1.0 + np.asarray(ph) ** 2) ** (-0.375)
        )
        got = apply_T_sigma(terms[name], (V1, V2, V3), 0.75)
        scale = max(np.abs(want).max(), 1e-30)
        assert np.abs(got.coeffs - want).max() <= 1e-12 * scale
        want = brute_weighted(
            terms[name], (V1, V2, V3), lambda ph: float(np.abs(ph + 6.0) < 30.0)
        )
        got = apply_T_alpha_M(terms[name], (V1, V2, V3), -6.0, 30.0)
        scale = max(np.abs(want).max(), 1e-30)
        assert np.abs(got.coeffs - want).max() <= 1e-12 * scale


def test_zero_inputs_give_zero():
    g = Grid(32, np.pi)
    zero = SpectralField(g, np.zeros(g.n, dtype=complex))
    for term in bo_terms().values():
        inputs = (zero,) * term.arity
        assert np.abs(apply_T_sigma(term, inputs, 0.75).coeffs).max() == 0.0
        assert np.abs(apply_T_alpha_M(term, inputs, 0.0, 5.0).coeffs).max() == 0.0
        assert len(term_values_on_lattice(term, inputs)) == 0


# ---------------------------------------------------------------------------
# dyadic reconstruction and the resonant split


def test_dyadic_rebuild_is_bitwise():
    g = Grid(64, np.pi)
    rng = np.random.default_rng(17)
    V = random_complex_field(g, rng, 24)
    terms = bo_terms()
    for name in ("Q+", "Q-"):
        d = dyadic_sigma_from_restricted(terms[name], (V, V), 0.75)
        t = apply_T_sigma(terms[name], (V, V), 0.75)
        assert np.array_equal(d.coeffs, t.coeffs)
    g_small = Grid(32, np.pi)
    W = random_complex_field(g_small, rng, 10)
    d = dyadic_sigma_from_restricted(terms["C+"], (W, W, W), 0.6)
    t = apply_T_sigma(terms["C+"], (W, W, W), 0.6)
    assert np.array_equal(d.coeffs, t.coeffs)


def test_term_values_roundtrip():
    g = Grid(32, np.pi)
    rng = np.random.default_rng(23)
    V = random_complex_field(g, rng, 10)
    terms = bo_terms()
    for name in ("Q+", "C-"):
        term = terms[name]
        inputs = (V,) * term.arity
        tv = term_values_on_lattice(term, inputs)
        assert len(tv) > 0
        plain = apply_T_sigma(term, inputs, 0.0)
        scale = np.abs(plain.coeffs).max()
        assert np.abs(tv.field().coeffs - plain.coeffs).max() <= 1e-13 * scale
        # phases recomputed from the stored indices agree with the phase op
        for col in rng.choice(len(tv), size=min(20, len(tv)), replace=False):
            slot_xis = [g.xi[tv.slot_idx[j, col]] for j in range(term.arity)]
            assert tv.phase[col] == pytest.approx(
                phase(term, g.xi[tv.out_idx[col]], slot_xis), abs=1e-12
            )
            assert tv.osc_phase[col] == pytest.approx(
                oscillation_phase(term, g.xi[tv.out_idx[col]], slot_xis), abs=1e-12
            )
        # evaluate() reproduces the build-time values and scales multilinearly
        again = tv.evaluate(inputs)
        assert np.array_equal(again, tv.value)
        doubled = tv.evaluate(tuple(SpectralField(g, 2.0 * V.coeffs) for _ in range(term.arity)))
        assert np.allclose(doubled, 2.0**term.arity * tv.value, rtol=1e-13, atol=0.0)


def test_split_resonant_partition():
    g = Grid(32, np.pi)
    rng = np.random.default_rng(29)
    V = random_complex_field(g, rng, 10)
    term = bo_terms()["Q+"]
    tv = term_values_on_lattice(term, (V, V))
    near, non = split_resonant(tv, 25.0)
    assert len(near) + len(non) == len(tv)
    assert np.all(np.abs(near.phase) < 25.0)
    assert np.all(np.abs(non.phase) >= 25.0)
    # the value arrays are partitioned, not recomputed
    mask = np.abs(tv.phase) < 25.0
    assert np.array_equal(near.value, tv.value[mask])
    assert np.array_equal(non.value, tv.value[~mask])
    whole = tv.field().coeffs
    back = near.field().coeffs + non.field().coeffs
    assert np.abs(back - whole).max() <= 1e-14 * max(1.0, np.abs(whole).max())
    with pytest.raises(ValueError, match="threshold"):
        split_resonant(tv, 0.0)


def test_split_resonant_tie_goes_nonresonant():
    g = Grid(32, np.pi)
    V = field_from_modes(g, {3: 1.0, -1: 0.5})
    tv = term_values_on_lattice(bo_terms()["Q+"], (V, V))
    assert len(tv) == 1 and tv.phase[0] == -4.0
    near, non = split_resonant(tv, 4.0)
    assert len(near) == 0 and len(non) == 1


def test_term_values_cost_guard():
    g = Grid(64, np.pi)
    rng = np.random.default_rng(31)
    V = random_complex_field(g, rng, 30)
    with pytest.raises(ValueError, match="max_tuples"):
        term_values_on_lattice(bo_terms()["C+"], (V, V, V), max_tuples=100)
