"""Phase-weighted multilinear operators and normal-form parameter bookkeeping.

The gauged high-band evolution is driven by four paraproduct pieces, two
quadratic and two cubic (see :mod:`bolab.gauge`).  Written out on the
frequency lattice, each piece is a sum over tuples (xi_1, ..., xi_k) with
xi_1 + ... + xi_k = xi, and each tuple carries a resonance function built
from the dispersion omega(xi) = |xi| xi.  This module exposes that lattice
structure directly:

* ``bo_terms`` describes the four pieces (arity, conjugation pattern,
  frequency regions, multiplier) in normalized form -- the evolution
  equation couples each piece with an overall factor 2i, which is *not*
  included here.
* ``phase`` evaluates the resonance function in the parameterization used
  by the frequency-restricted operator estimates: the sign of omega is
  flipped on conjugated slots.  ``oscillation_phase`` evaluates the phase
  of the factor e^{i s Phi} actually present in the profile time integrand
  (no flip; the conjugated-slot value conj(V_hat(-xi_2)) oscillates like a
  plain slot because omega is odd).  The two agree on the quadratic pieces
  and differ by 2 omega(xi_2) on the cubic ones.
* ``apply_T_sigma``, ``apply_T_alpha_M`` and ``dyadic_sigma_from_restricted``
  apply a term with a weight on the resonance function: <Phi>^{-sigma}, the
  window indicator |Phi - alpha| < M, and the dyadic-shell reconstruction of
  the sigma weight.  sigma = 0 reproduces the plain right-hand-side pieces.
* ``term_values_on_lattice`` materializes the individual lattice tuples of
  one term application (indices, phases, kernels, values), and
  ``split_resonant`` partitions them by a threshold on |Phi|.
* ``infr_params`` fixes the exponent bookkeeping (gamma, beta, sigma, theta,
  delta, the thresholds c_j) for the normal-form iteration at a given
  regularity (s, eps).

All operators sum the lattice directly (no FFT), with modes below
1e-14 x max|coefficient| dropped per slot; results are deterministic --
the summation order per output frequency is fixed by the loops below.
"""

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .spectral import SpectralField, dispersion, region_mask

COUPLING = 2j  # factor multiplying every term in the evolution equation

_TRUNC = 1e-14  # relative active-mode cutoff per slot


@dataclass(frozen=True)
class NonlinearTerm:
    """One multilinear lattice piece of the gauged evolution.

    ``conj`` marks slots whose value is conj(V_hat(-xi_j)) rather than
    V_hat(xi_j); ``slot_regions`` restrict individual slot frequencies,
    ``pair_sign`` (cubic only) the sign of xi_2 + xi_3.
    """

    name: str
    arity: int
    conj: tuple
    out_region: str
    slot_regions: tuple
    pair_sign: str = ""

    def multiplier(self, slot_xis):
        """m(Xi): xi_2^2 for the quadratic pieces, (xi_2 + xi_3) xi_3 cubic."""
        if self.arity == 2:
            xi2 = slot_xis[1]
            return xi2 * xi2
        xi2, xi3 = slot_xis[1], slot_xis[2]
        return (xi2 + xi3) * xi3

    def phase_signs(self):
        return tuple(-1.0 if c else 1.0 for c in self.conj)

    def in_region(self, out_xi, slot_xis):
        """Boolean indicator of the term's frequency constraints."""
        ok = region_mask(np.asarray(out_xi, dtype=float), self.out_region)
        for reg, x in zip(self.slot_regions, slot_xis):
            if reg is not None:
                ok = ok & region_mask(np.asarray(x, dtype=float), reg)
        if self.pair_sign:
            pair = np.asarray(slot_xis[1], dtype=float) + slot_xis[2]
            ok = ok & (pair < 0 if self.pair_sign == "-" else pair > 0)
        return ok


def bo_terms():
    """The four normalized high-band pieces keyed by name.

    Q+ collects tuples xi = xi_1 + xi_2 with xi > 1, xi_1 > 1, xi_2 < 0 and
    multiplier xi_2^2; C+ collects xi = xi_1 + xi_2 + xi_3 with xi > 1,
    xi_1 > 1, xi_2 + xi_3 < 0, multiplier (xi_2 + xi_3) xi_3, and the second
    slot conjugated.  Q-/C- are the sign mirrors.  The evolution right-hand
    side on the high bands is 2i (Q_pm + C_pm) plus a mean-product correction
    (see gauge.rhs_exact).
    """
    return {
        "Q+": NonlinearTerm("Q+", 2, (False, False), "+hi", ("+hi", "-")),
        "Q-": NonlinearTerm("Q-", 2, (False, False), "-hi", ("-hi", "+")),
        "C+": NonlinearTerm("C+", 3, (False, True, False), "+hi", ("+hi", None, None), "-"),
        "C-": NonlinearTerm("C-", 3, (False, True, False), "-hi", ("-hi", None, None), "+"),
    }


def phase(term, output_xi, slot_xis):
    """Resonance function, restricted-operator parameterization.

    Phi = omega(xi) - sum_j s_j omega(xi_j) with s_j = -1 on conjugated
    slots and +1 otherwise, over convolution frequencies summing to xi.
    Scalars or broadcastable arrays.
    """
    slot_xis = [np.asarray(x, dtype=float) for x in slot_xis]
    if len(slot_xis) != term.arity:
        raise ValueError(f"{term.name} takes {term.arity} slot frequencies, got {len(slot_xis)}")
    out = np.asarray(output_xi, dtype=float)
    total = sum(slot_xis)
    if not np.allclose(total, out, rtol=0.0, atol=1e-9 * max(1.0, float(np.max(np.abs(out))))):
        raise ValueError("slot frequencies must sum to the output frequency")
    ph = dispersion(out)
    for s, x in zip(term.phase_signs(), slot_xis):
        ph = ph - s * dispersion(x)
    return float(ph) if np.ndim(ph) == 0 else ph


def oscillation_phase(term, output_xi, slot_xis):
    """Phase of the e^{i s Phi} factor in the profile time integrand (no flip)."""
    slot_xis = [np.asarray(x, dtype=float) for x in slot_xis]
    if len(slot_xis) != term.arity:
        raise ValueError(f"{term.name} takes {term.arity} slot frequencies, got {len(slot_xis)}")
    ph = dispersion(np.asarray(output_xi, dtype=float))
    for x in slot_xis:
        ph = ph - dispersion(x)
    return float(ph) if np.ndim(ph) == 0 else ph


# ---------------------------------------------------------------------------
# parameter bookkeeping


BETA = 0.5


def gamma_quadratic(s, eps):
    return max(0.5 + eps - s, 0.0)


def gamma_cubic(s, eps):
    return max(0.25 + 0.5 * (eps - s), eps - 0.5, 0.0)


@dataclass(frozen=True)
class TermParams:
    name: str
    gamma: float
    sigma: float
    theta: float
    delta: float
    feasible: bool


@dataclass(frozen=True)
class InfrParams:
    """Exponent bookkeeping for the normal-form iteration.

    theta = 1 - max{gamma + beta, sigma + gamma} must be positive for the
    iteration gains; delta in (0, theta/beta) is fixed at the midpoint
    theta/(2 beta); the level thresholds are N at level 1 and
    c_j |Phi_1|^delta afterwards with c_j = (j+1)^{2/theta}.  ``mu`` is the
    weight exponent of the time-derivative bound and is 0 for this system
    (the band time derivatives are uniformly bounded; see
    gauge.profile_time_derivative_sup).

    When no admissible sigma exists the instance is still constructed with
    ``feasible = False`` and the per-term table filled, so callers can see
    which pieces keep a positive theta; the threshold accessors raise.
    """

    s: float
    eps: float
    gamma_quad: float
    gamma_cubic: float
    gamma: float
    beta: float
    sigma: float
    theta: float
    delta: float
    N_threshold: float
    feasible: bool
    message: str
    mu: float = 0.0
    per_term: tuple = dataclass_field(default=())

    def c(self, j):
        """Nonresonance threshold coefficient c_j = (j+1)^(2/theta), j >= 1."""
        if not self.feasible:
            raise ValueError(self.message)
        if j < 1:
            raise ValueError(f"level index must be >= 1, got {j}")
        return float(j + 1) ** (2.0 / self.theta)

    def level_threshold(self, j, phi1=None):
        """Splitting threshold at level j: N at level 1, c_j |Phi_1|^delta after.

        ``phi1`` is the level-1 phase of the branch (required for j >= 2).
        """
        if j == 1:
            return float(self.N_threshold)
        if phi1 is None:
            raise ValueError("levels >= 2 need the level-1 phase of the branch")
        return self.c(j) * abs(float(phi1)) ** self.delta

    def table(self):
        """Rows of (name, value) pairs for report printing."""
        rows = [
            ("s", self.s), ("eps", self.eps),
            ("gamma_quad", self.gamma_quad), ("gamma_cubic", self.gamma_cubic),
            ("gamma", self.gamma), ("beta", self.beta), ("sigma", self.sigma),
            ("theta", self.theta), ("delta", self.delta), ("mu", self.mu),
            ("N_threshold", self.N_threshold), ("feasible", self.feasible),
        ]
        if self.feasible:
            rows += [("c_1", self.c(1)), ("c_2", self.c(2))]
        for tp in self.per_term:
            rows += [
                (f"{tp.name}.gamma", tp.gamma),
                (f"{tp.name}.theta", tp.theta),
                (f"{tp.name}.feasible", tp.feasible),
            ]
        return rows


def infr_params(s, eps, sigma=None, N_threshold=1000.0):
    """Fix the iteration exponents at regularity (s, eps).

    gamma_quad = max{1/2 + eps - s, 0}, gamma_cubic = max{1/4 + (eps - s)/2,
    eps - 1/2, 0}, beta = 1/2.  The default sigma sits at the midpoint of the
    admissible window (gamma + beta, 1 - gamma), which works out to
    (1 + beta)/2 = 3/4 independent of gamma.  A custom sigma must satisfy
    gamma + beta < sigma < 1.

    Requires s > 0 and 0 <= eps < min{s, 3/4}.  If theta ends up
    nonpositive the result is reported infeasible rather than rejected (the
    per-term table shows which pieces survive); the threshold accessors then
    raise.
    """
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if eps >= min(s, 0.75):
        raise ValueError(f"eps must satisfy eps < min(s, 3/4); got eps={eps}, s={s}")
    if N_threshold <= 1:
        raise ValueError(f"N_threshold must exceed 1, got {N_threshold}")

    gq = gamma_quadratic(s, eps)
    gc = gamma_cubic(s, eps)
    gamma = max(gq, gc)
    if sigma is None:
        sigma = gamma + BETA + 0.5 * (1.0 - 2.0 * gamma - BETA)  # = (1 + beta)/2
    else:
        sigma = float(sigma)
        if not gamma + BETA < sigma < 1.0:
            raise ValueError(
                f"sigma must lie in (gamma + beta, 1) = ({gamma + BETA}, 1), got {sigma}"
            )

    def _theta(g):
        return 1.0 - max(g + BETA, sigma + g)

    theta = _theta(gamma)
    feasible = theta > 0
    delta = 0.5 * theta / BETA if feasible else 0.0
    message = "" if feasible else (
        f"parameters violate Assumption 1 at this (s, eps) = ({s}, {eps}): "
        f"theta = {theta:.4g} <= 0 at sigma = {sigma}"
    )

    per_term = []
    for name, g in (("quadratic", gq), ("cubic", gc)):
        th = _theta(g)
        ok = th > 0
        per_term.append(TermParams(name, g, sigma, th, 0.5 * th / BETA if ok else 0.0, ok))

    return InfrParams(
        s=float(s), eps=float(eps), gamma_quad=gq, gamma_cubic=gc, gamma=gamma,
        beta=BETA, sigma=float(sigma), theta=theta, delta=delta,
        N_threshold=float(N_threshold), feasible=feasible, message=message,
        per_term=tuple(per_term),
    )


# ---------------------------------------------------------------------------
# lattice summation core


def _coeffs_of(obj, grid=None):
    c = getattr(obj, "coeffs", obj)
    c = np.asarray(c, dtype=complex)
    if grid is not None and c.shape != (grid.n,):
        raise ValueError(f"input has {c.shape[0]} modes, grid has {grid.n}")
    return c


def _slot_inputs(term, inputs):
    """Normalize ``inputs`` to one object per slot (a single field is shared)."""
    if isinstance(inputs, SpectralField) or hasattr(inputs, "coeffs"):
        return (inputs,) * term.arity
    inputs = tuple(inputs)
    if len(inputs) == 1:
        return inputs * term.arity
    if len(inputs) != term.arity:
        raise ValueError(f"{term.name} takes {term.arity} inputs, got {len(inputs)}")
    return inputs


def _grid_of(inputs):
    for f in inputs:
        if hasattr(f, "grid"):
            return f.grid
    raise ValueError("at least one input must be a SpectralField (to carry the grid)")


def _slot_values(term, inputs, grid):
    """Value arrays indexed by each slot's convolution frequency.

    Conjugated slots hold conj(c[-xi]) (zero at the unpaired end mode);
    slot-region masks are applied here.
    """
    out = []
    for j, f in enumerate(inputs):
        c = _coeffs_of(f, grid)
        if term.conj[j]:
            b = np.zeros_like(c)
            b[1:] = np.conj(c[1:][::-1])
            c = b
        reg = term.slot_regions[j]
        if reg is not None:
            c = c * region_mask(grid.xi, reg)
        out.append(c)
    return out


def _active(values):
    m = np.abs(values)
    top = m.max()
    if top == 0.0:
        return np.empty(0, dtype=int)
    return np.nonzero(m > _TRUNC * top)[0]


def _apply(term, inputs, weight_fn):
    """Sum the term's lattice tuples with weight_fn(Phi) per tuple.

    Phi is the restricted-operator phase (conjugated slots flipped).  The
    (dxi/2pi)^(k-1) convolution measure and the output region mask are
    applied at the end; the output end mode is zeroed like everywhere else.
    """
    inputs = _slot_inputs(term, inputs)
    grid = _grid_of(inputs)
    vals = _slot_values(term, inputs, grid)
    n = grid.n
    half = n // 2
    xi = grid.xi
    om = dispersion(xi)
    signs = term.phase_signs()
    out = np.zeros(n, dtype=complex)

    if term.arity == 2:
        a1, a2 = vals
        s1, s2 = signs
        for i1 in _active(a1):
            lo = max(0, i1 - half)
            hi = min(n, i1 + half)
            if lo >= hi:
                continue
            i2 = np.arange(lo, hi) - (i1 - half)
            m = term.multiplier((xi[i1], xi[i2]))
            ph = om[lo:hi] - s1 * om[i1] - s2 * om[i2]
            out[lo:hi] += (a1[i1] * m * weight_fn(ph)) * a2[i2]
    else:
        a1, a2, a3 = vals
        s1, s2, s3 = signs
        want_neg = term.pair_sign == "-"
        act2 = _active(a2)
        for i1 in _active(a1):
            c1 = a1[i1]
            base1 = s1 * om[i1]
            for i2 in act2:
                off = i1 + i2 - n
                lo = max(0, off)
                hi = min(n, n + off)
                if lo >= hi:
                    continue
                i3 = np.arange(lo, hi) - off
                xi3 = xi[i3]
                pair = xi[i2] + xi3
                keep = pair < 0 if want_neg else pair > 0
                if not keep.any():
                    continue
                m = pair * xi3 * keep
                ph = om[lo:hi] - base1 - s2 * om[i2] - s3 * om[i3]
                out[lo:hi] += (c1 * a2[i2]) * (m * weight_fn(ph) * a3[i3])

    out *= region_mask(xi, term.out_region) * (grid.dxi / (2.0 * np.pi)) ** (term.arity - 1)
    out[0] = 0.0
    return SpectralField(grid, out, _checked=True)


def apply_T_sigma(term, inputs, sigma):
    """Apply the term with the phase weight <Phi>^(-sigma).

    sigma = 0 gives weight exactly 1 and reproduces the plain band piece
    (gauge.rhs_quadratic / gauge.rhs_cubic).
    """
    sigma = float(sigma)

    def w(ph):
        return (1.0 + ph * ph) ** (-0.5 * sigma)

    return _apply(term, inputs, w)


def apply_T_alpha_M(term, inputs, alpha, M):
    """Apply the term restricted to the phase window |Phi - alpha| < M (strict)."""
    if M <= 0:
        raise ValueError(f"window width M must be positive, got {M}")
    alpha = float(alpha)
    M = float(M)

    def w(ph):
        return (np.abs(ph - alpha) < M).astype(float)

    return _apply(term, inputs, w)


def _shell_index(abs_ph):
    """Dyadic shell of |Phi|: 0 for |Phi| <= 1, r for 2^(r-1) < |Phi| <= 2^r."""
    r = np.zeros(abs_ph.shape, dtype=int)
    pos = abs_ph > 1.0
    r[pos] = np.ceil(np.log2(abs_ph[pos])).astype(int)
    return r


def dyadic_sigma_from_restricted(term, inputs, sigma):
    """Rebuild T_sigma from its dyadic phase-shell restrictions.

    The shells S_0 = {|Phi| <= 1}, S_r = {2^(r-1) < |Phi| <= 2^r} partition
    the lattice phases, so summing the shell-restricted weighted pieces
    recovers apply_T_sigma exactly: per tuple, exactly one shell indicator
    is nonzero and the weight values are computed by the same expression,
    so the accumulated sums agree bit for bit.
    """
    sigma = float(sigma)

    def w(ph):
        base = (1.0 + ph * ph) ** (-0.5 * sigma)
        r = _shell_index(np.abs(ph))
        total = np.zeros_like(base)
        for shell in range(int(r.max(initial=0)) + 1):
            total = total + np.where(r == shell, base, 0.0)
        return total

    return _apply(term, inputs, w)


# ---------------------------------------------------------------------------
# materialized tuples


@dataclass
class TermValues:
    """Flattened lattice tuples of one term application.

    Arrays over tuples: ``out_idx`` (output lattice index), ``slot_idx``
    (arity x m, slot convolution-frequency indices), ``slot_read`` (indices
    actually read from the inputs; the reflection of slot_idx on conjugated
    slots), ``phase`` (restricted-operator convention), ``osc_phase`` (time
    integrand convention), ``kernel`` (multiplier x convolution measure, no
    slot values) and ``value`` (kernel x slot values at build time).
    """

    term: NonlinearTerm
    grid: object
    out_idx: np.ndarray
    slot_idx: np.ndarray
    slot_read: np.ndarray
    phase: np.ndarray
    osc_phase: np.ndarray
    kernel: np.ndarray
    value: np.ndarray

    def __len__(self):
        return self.out_idx.shape[0]

    def field(self):
        """Accumulate the tuple values into a spectral field."""
        out = np.zeros(self.grid.n, dtype=complex)
        np.add.at(out, self.out_idx, self.value)
        return SpectralField(self.grid, out, _checked=True)

    def restrict(self, mask):
        mask = np.asarray(mask)
        return TermValues(
            self.term, self.grid, self.out_idx[mask], self.slot_idx[:, mask],
            self.slot_read[:, mask], self.phase[mask], self.osc_phase[mask],
            self.kernel[mask], self.value[mask],
        )

    def evaluate(self, inputs):
        """Per-tuple values recomputed from fresh coefficients (kernel included)."""
        inputs = _slot_inputs(self.term, inputs)
        val = self.kernel.astype(complex)
        for j in range(self.term.arity):
            c = _coeffs_of(inputs[j], self.grid)
            vj = c[self.slot_read[j]]
            if self.term.conj[j]:
                vj = np.conj(vj)
            val *= vj
        return val


def term_values_on_lattice(term, inputs, max_tuples=2_000_000):
    """Materialize the active lattice tuples of one term application.

    Active modes are selected per slot exactly as in the operator
    applications (1e-14 relative cutoff); tuples with zero multiplier, an
    out-of-band output, or an output on the end mode are dropped, so
    ``field()`` agrees with ``apply_T_sigma(term, inputs, 0)`` up to
    accumulation rounding.  Raises if more than ``max_tuples`` tuples would
    be kept (cost guard for the cubic pieces).
    """
    inputs = _slot_inputs(term, inputs)
    grid = _grid_of(inputs)
    vals = _slot_values(term, inputs, grid)
    n = grid.n
    half = n // 2
    xi = grid.xi
    om = dispersion(xi)
    signs = term.phase_signs()
    out_ok = region_mask(xi, term.out_region)
    out_ok = out_ok.copy()
    out_ok[0] = False
    measure = (grid.dxi / (2.0 * np.pi)) ** (term.arity - 1)

    rows_out, rows_slots, rows_ph, rows_osc, rows_kern, rows_val = [], [], [], [], [], []
    count = 0

    def _push(io, slots, kern, val):
        nonlocal count
        count += io.size
        if count > max_tuples:
            raise ValueError(
                f"term lattice too large: more than {max_tuples} active tuples "
                f"for {term.name}; raise max_tuples or restrict the inputs"
            )
        rows_out.append(io)
        rows_slots.append(slots)
        ph = om[io].copy()
        osc = om[io].copy()
        for s, idx in zip(signs, slots):
            ph -= s * om[idx]
            osc -= om[idx]
        rows_ph.append(ph)
        rows_osc.append(osc)
        rows_kern.append(kern)
        rows_val.append(val)

    if term.arity == 2:
        a1, a2 = vals
        s1, s2 = signs
        for i1 in _active(a1):
            lo = max(0, i1 - half)
            hi = min(n, i1 + half)
            if lo >= hi:
                continue
            io = np.arange(lo, hi)
            i2 = io - (i1 - half)
            m = term.multiplier((xi[i1], xi[i2]))
            keep = out_ok[io] & (m != 0.0) & (np.abs(a2[i2]) > 0.0)
            if not keep.any():
                continue
            io = io[keep]
            i2 = i2[keep]
            kern = m[keep] * measure
            _push(io, np.stack([np.full(io.shape, i1), i2]), kern, kern * a1[i1] * a2[i2])
    else:
        a1, a2, a3 = vals
        s1, s2, s3 = signs
        want_neg = term.pair_sign == "-"
        act2 = _active(a2)
        for i1 in _active(a1):
            for i2 in act2:
                off = i1 + i2 - n
                lo = max(0, off)
                hi = min(n, n + off)
                if lo >= hi:
                    continue
                io = np.arange(lo, hi)
                i3 = io - off
                xi3 = xi[i3]
                pair = xi[i2] + xi3
                sign_ok = pair < 0 if want_neg else pair > 0
                m = pair * xi3
                keep = out_ok[io] & sign_ok & (m != 0.0) & (np.abs(a3[i3]) > 0.0)
                if not keep.any():
                    continue
                io = io[keep]
                i3 = i3[keep]
                kern = m[keep] * measure
                _push(
                    io,
                    np.stack([np.full(io.shape, i1), np.full(io.shape, i2), i3]),
                    kern,
                    kern * a1[i1] * a2[i2] * a3[i3],
                )

    if count == 0:
        k = term.arity
        empty_i = np.empty(0, dtype=int)
        return TermValues(
            term, grid, empty_i, np.empty((k, 0), dtype=int), np.empty((k, 0), dtype=int),
            np.empty(0), np.empty(0), np.empty(0), np.empty(0, dtype=complex),
        )

    out_idx = np.concatenate(rows_out)
    slot_idx = np.concatenate(rows_slots, axis=1)
    slot_read = slot_idx.copy()
    for j in range(term.arity):
        if term.conj[j]:
            slot_read[j] = n - slot_idx[j]  # slot_idx 0 never appears (zeroed end mode)
    return TermValues(
        term, grid, out_idx, slot_idx, slot_read,
        np.concatenate(rows_ph), np.concatenate(rows_osc),
        np.concatenate(rows_kern), np.concatenate(rows_val),
    )


def split_resonant(term_values, threshold):
    """Partition tuples by the phase indicator: (near, non).

    near holds |Phi| < threshold strictly, non the rest (ties are
    nonresonant, which keeps 1/Phi bounded on that side).  The two parts
    carry disjoint slices of the same value arrays, so the partition is
    exact at the tuple level.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    near = np.abs(term_values.phase) < threshold
    return term_values.restrict(near), term_values.restrict(~near)
