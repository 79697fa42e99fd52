"""Normal form expansion trees and truncation residuals for the gauged flow.

The profile W(t) = e^{it omega} V_hat(t) of the truncated band system
(:func:`bolab.gauge.rhs_terms_total_coeffs`) satisfies, tuple by tuple on the
frequency lattice,

    d/dt W(t, xi) = sum_tuples e^{i t Phi} * 2i * K * prod_slots W(t, xi_j)
                    + (low-band forcing),

with Phi the oscillation phase of the tuple (:func:`bolab.infr
.oscillation_phase`).  The infinite normal form reduction splits the tuples
at |Phi| = N, integrates the nonresonant part by parts (boundary terms plus a
remainder in which the time derivative falls on one slot), substitutes the
equation back into the differentiated slot, and repeats with thresholds
c_J |Phi_1|^delta at depth J.  Two layers live here:

* a symbolic layer (:class:`TermNode`, :func:`initial_trees`,
  :func:`expand_infr`, :func:`trees_to_json`) that records the bookkeeping of
  the expansion -- composition records, marked derivative slots, accumulated
  phase denominators, conjugation patterns -- without touching data;

* a numeric layer (:func:`nfe_residual`) that measures, on a stored
  trajectory, how much of W(T) - W(0) the depth-J truncation explains.

The numeric layer exploits a telescoping identity: with every kept integral
and boundary term evaluated through the same integration-by-parts identity
used to define it, the depth-J truncation collapses to

    trunc_J = trapz(full integrand) - trapz(I_{J+1}),

where I_{J+1} is the remainder integrand over the depth-J nonresonant tuple
set, with the differentiated slot read from the exact right side.  Only the
thin nonresonant sets are ever enumerated (via :func:`bolab.infr
.term_values_on_lattice` on a support envelope of the trajectory), boundary
terms cancel exactly, and the reported residual

    residual_J = || W(T) - W(0) - trunc_J ||_{H^{s+1}}

equals the norm of (quadrature defect) + trapz(I_{J+1}).  When the depth-J
nonresonant set is empty -- provable a priori once c_J N^delta exceeds the
largest phase the lattice can produce -- the residual equals the measured
quadrature defect exactly, which the report exposes as ``quadrature_error``.

Low-band slots are never expanded: the differentiated slot reads the full
right side, and the low-band part of that read simply stays inside the kept
integrand at every depth.
"""

import json
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField, dispersion, sobolev_norm
from .gauge import rhs_terms_total_coeffs
from .infr import COUPLING, bo_terms, term_values_on_lattice


# ---------------------------------------------------------------------------
# symbolic expansion trees


@dataclass(frozen=True)
class TermNode:
    """One node of the expansion bookkeeping.

    ``composition`` starts with a base term name and appends (slot, name)
    pairs, each meaning "the time derivative fell on `slot` of the current
    pattern and the equation was substituted there"; name "lo" marks a kept
    low-band read.  ``kind`` is "resonant" (kept integrand), "boundary"
    (kept endpoint evaluation), "remainder" (time derivative still unresolved
    on ``marked_slot``) or "low" (kept low-band part, never expanded).
    ``denominators`` lists the expansion depths whose phase divides the node,
    one factor 1/(i Phi_level) each; ``threshold`` records the phase split
    that created the node.
    """

    level: int
    kind: str
    composition: tuple
    marked_slot: int = -1
    denominators: tuple = ()
    threshold: str = ""

    def arity(self):
        if self.composition[0] == "lo":
            return 1
        terms = bo_terms()
        k = terms[self.composition[0]].arity
        for _slot, name in self.composition[1:]:
            if name != "lo":
                k = k - 1 + terms[name].arity
        return k

    def conj_pattern(self):
        """Conjugation flags of the fully composed slot pattern."""
        if self.composition[0] == "lo":
            return (False,)
        terms = bo_terms()
        pattern = list(terms[self.composition[0]].conj)
        for slot, name in self.composition[1:]:
            if not 0 <= slot < len(pattern):
                raise ValueError(
                    f"composition substitutes slot {slot} of a "
                    f"{len(pattern)}-slot pattern"
                )
            if name == "lo":
                continue  # the slot stays in place as a low-band read
            child = list(terms[name].conj)
            if pattern[slot]:
                child = [not c for c in child]
            pattern[slot:slot + 1] = child
        return tuple(pattern)

    def to_dict(self):
        return {
            "level": self.level,
            "kind": self.kind,
            "composition": [self.composition[0]]
            + [[s, name] for s, name in self.composition[1:]],
            "marked_slot": self.marked_slot,
            "denominators": list(self.denominators),
            "threshold": self.threshold,
            "arity": self.arity(),
            "conjugated_slots": [int(c) for c in self.conj_pattern()],
        }


def _threshold_label(level, params, resonant):
    op = "<" if resonant else ">="
    if level == 1:
        return f"|Phi_1| {op} {params.N_threshold:g}"
    if params.feasible:
        return f"|Phi_{level}| {op} {params.c(level):g} |Phi_1|^{params.delta:g}"
    return f"|Phi_{level}| {op} c_{level} |Phi_1|^delta (infeasible parameters)"


def initial_trees(params):
    """Level-1 split of the profile equation.

    Returns the kept low-band node, one resonant node per term, and the
    boundary/remainder bookkeeping of the first integration by parts.
    """
    nodes = [TermNode(1, "low", ("lo",), -1, (), "kept: low band, never expanded")]
    non = _threshold_label(1, params, False)
    for name in sorted(bo_terms()):
        term = bo_terms()[name]
        nodes.append(TermNode(1, "resonant", (name,), -1, (),
                              _threshold_label(1, params, True)))
        nodes.append(TermNode(2, "boundary", (name,), -1, (1,), non))
        for j in range(term.arity):
            nodes.append(TermNode(2, "remainder", (name,), j, (1,), non))
    return nodes


def expand_infr(trees, params):
    """Substitute the equation into every remainder tree, one depth down.

    Each remainder node at level J (time derivative on ``marked_slot``)
    produces four substitution trees -- the marked slot replaced by each of
    Q+, Q-, C+, C- -- recorded by their kept resonant node at level J plus
    the boundary and remainder bookkeeping of the next integration by parts
    at level J+1, and one kept "low" node for the low-band part of the
    substituted right side, which is never expanded.  Nodes of other kinds
    are terminal and contribute nothing.
    """
    out = []
    names = sorted(bo_terms())
    for node in trees:
        if node.kind != "remainder":
            continue
        level = node.level
        res = _threshold_label(level, params, True)
        non = _threshold_label(level, params, False)
        for name in names:
            comp = node.composition + ((node.marked_slot, name),)
            kept = TermNode(level, "resonant", comp, -1, node.denominators, res)
            out.append(kept)
            out.append(TermNode(level + 1, "boundary", comp, -1,
                                node.denominators + (level,), non))
            for j in range(kept.arity()):
                out.append(TermNode(level + 1, "remainder", comp, j,
                                    node.denominators + (level,), non))
        out.append(TermNode(level, "low",
                            node.composition + ((node.marked_slot, "lo"),),
                            -1, node.denominators,
                            "kept: low-band slot, never expanded"))
    return out


def trees_to_json(trees):
    """Deterministic JSON dump of a tree collection."""
    def key(node):
        return (node.level, node.kind, repr(node.composition), node.marked_slot)

    return json.dumps([n.to_dict() for n in sorted(trees, key=key)],
                      indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# predicted sizes


def predicted_term_bound(J, params, M_norm, difference=False,
                         kind="resonant", arity=2):
    """Predicted size of the depth-J terms on data of norm ``M_norm``.

    Resonant and boundary terms at depth J carry the factor
    N^(-theta - delta theta (J-2) + delta beta); the unexpanded remainder at
    depth J carries N^(delta (beta - 1)).  The accompanying norm power is
    J (arity-1) + 1; with ``difference=True`` the bound is the Lipschitz
    prefactor (||u|| and ||v|| both at M_norm), i.e. the coefficient of
    ||u - v|| rather than a size: 2 M^(J (arity-1)).
    """
    if not isinstance(J, int) or J < 1:
        raise ValueError("J must be a positive integer")
    if not params.feasible:
        raise ValueError(params.message)
    if kind in ("resonant", "boundary"):
        exponent = (-params.theta - params.delta * params.theta * (J - 2)
                    + params.delta * params.beta)
    elif kind == "remainder":
        exponent = params.delta * (params.beta - 1.0)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    power = J * (arity - 1) + 1
    scale = float(params.N_threshold) ** exponent
    if difference:
        return scale * 2.0 * float(M_norm) ** (power - 1)
    return scale * float(M_norm) ** power


# ---------------------------------------------------------------------------
# numeric residuals


@dataclass
class _Batch:
    """Flattened nonresonant tuples of one composition shape at one depth.

    Represents the integrand sum_p e^{i s phase_p} coef_p prod_cols(slot
    value); ``conj`` fixes which columns read conjugated coefficients,
    ``reads`` the lattice indices actually read, ``phase1`` the depth-1
    phase magnitude that steers deeper thresholds.
    """

    conj: tuple
    out_idx: np.ndarray
    cols: np.ndarray
    reads: np.ndarray
    phase: np.ndarray
    phase1: np.ndarray
    coef: np.ndarray

    def __len__(self):
        return self.out_idx.size


def _trapz_weights(times):
    t = np.asarray(times, dtype=float)
    if t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("need at least two strictly increasing snapshot times")
    w = np.zeros(t.size)
    w[:-1] += 0.5 * np.diff(t)
    w[1:] += 0.5 * np.diff(t)
    return w


def _ibp_trapz(batches, Vt, Nt, times):
    """Trapezoid in time of the integration-by-parts remainder integrand.

    For every batch tuple this accumulates
        sum_i w_i e^{i t_i phase} (-coef/(i phase)) d/dt prod_cols
    with the differentiated column read from the exact right-side profiles
    ``Nt``, and adds the result at the tuple's output index.
    """
    n = Vt.shape[1]
    total = np.zeros(n, dtype=complex)
    if not batches:
        return total
    w = _trapz_weights(times)
    steps = np.diff(times)
    uniform = bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))
    for b in batches:
        if len(b) == 0:
            continue
        damp = -b.coef / (1j * b.phase)
        rot = np.exp(1j * times[0] * b.phase)
        step = np.exp(1j * steps[0] * b.phase) if uniform else None
        acc = np.zeros(len(b), dtype=complex)
        k = len(b.conj)
        for i in range(times.size):
            vals = Vt[i][b.reads]
            dvals = Nt[i][b.reads]
            for j, cflag in enumerate(b.conj):
                if cflag:
                    np.conj(vals[j], out=vals[j])
                    np.conj(dvals[j], out=dvals[j])
            dprod = np.zeros(len(b), dtype=complex)
            for j in range(k):
                piece = dvals[j]
                for l in range(k):
                    if l != j:
                        piece = piece * vals[l]
                dprod += piece
            acc += (w[i] * rot) * dprod
            if i + 1 < times.size:
                rot = rot * step if uniform else np.exp(1j * times[i + 1] * b.phase)
        np.add.at(total, b.out_idx, damp * acc)
    return total


def _level_one(tvs, N):
    """Nonresonant depth-1 batches (|Phi| >= N in the oscillation convention)."""
    batches, counts = [], {}
    for name in sorted(tvs):
        tv = tvs[name]
        mask = np.abs(tv.osc_phase) >= N
        counts[name] = {"tuples": int(len(tv)), "nonresonant": int(mask.sum())}
        if not mask.any():
            continue
        sel = tv.restrict(mask)
        batches.append(_Batch(
            conj=sel.term.conj,
            out_idx=sel.out_idx,
            cols=sel.slot_idx,
            reads=sel.slot_read,
            phase=sel.osc_phase,
            phase1=np.abs(sel.osc_phase),
            coef=COUPLING * sel.kernel,
        ))
    return batches, counts


def _child_index(tvs):
    """Per term: tuple rows sorted by output index, for join-by-frequency."""
    index = {}
    for name, tv in tvs.items():
        order = np.argsort(tv.out_idx, kind="stable")
        index[name] = (order, tv.out_idx[order])
    return index


def _compose_estimate(batches, tvs, n):
    """Number of composed tuples substitution would create, before thresholds."""
    cnt = np.zeros(n, dtype=np.int64)
    for tv in tvs.values():
        cnt += np.bincount(tv.out_idx, minlength=n)
    total = 0
    for b in batches:
        for col in range(len(b.conj)):
            total += int(cnt[b.reads[col]].sum())
    return total


def _compose(batches, tvs, child_sorted, level, params, n):
    """Substitute every term into every column of every parent tuple.

    Returns only the composed tuples that are nonresonant at this depth
    (|Phi_level| >= c_level |Phi_1|^delta), already equipped with the
    accumulated 1/(i Phi_parent) factor and the child coupling.
    """
    out = []
    c_level = params.c(level)
    delta = params.delta
    for b in batches:
        k = len(b.conj)
        for col in range(k):
            conj_mark = b.conj[col]
            targets = b.reads[col]
            keep_cols = [c for c in range(k) if c != col]
            for name in sorted(tvs):
                tv = tvs[name]
                order, sorted_out = child_sorted[name]
                starts = np.searchsorted(sorted_out, targets, side="left")
                ends = np.searchsorted(sorted_out, targets, side="right")
                match = ends - starts
                total = int(match.sum())
                if total == 0:
                    continue
                prow = np.repeat(np.arange(targets.size), match)
                cum = np.cumsum(match)
                local = np.repeat(ends - cum, match) + np.arange(total)
                crow = order[local]

                ccols = tv.slot_idx[:, crow]
                cphase = tv.osc_phase[crow]
                cconj = tv.term.conj
                couple = COUPLING
                if conj_mark:
                    # conj(n_tilde(-xi)): conjugate-transform the child tuple
                    ccols = n - ccols
                    cphase = -cphase
                    cconj = tuple(not c for c in cconj)
                    couple = np.conj(COUPLING)
                cols = np.vstack([b.cols[keep_cols][:, prow], ccols])
                conj = tuple(b.conj[c] for c in keep_cols) + cconj
                phase = b.phase[prow] + cphase
                phase1 = b.phase1[prow]
                coef = (-b.coef[prow] / (1j * b.phase[prow])) \
                    * (couple * tv.kernel[crow])

                keep = np.abs(phase) >= c_level * phase1 ** delta
                if not keep.any():
                    continue
                cols = cols[:, keep]
                reads = cols.copy()
                for j, cflag in enumerate(conj):
                    if cflag:
                        reads[j] = n - cols[j]
                out.append(_Batch(conj, b.out_idx[prow][keep], cols, reads,
                                  phase[keep], phase1[keep], coef[keep]))
    return out


def _lattice_phase_cap(grid):
    """Largest |oscillation phase| any single term tuple can produce."""
    xi_max = float(np.abs(grid.xi).max())
    caps = [(t.arity + 1) * xi_max * xi_max for t in bo_terms().values()]
    return max(caps)


@dataclass
class NfeReport:
    """Result of :func:`nfe_residual`.

    ``residuals`` maps depth J to ||W(T) - W(0) - trunc_J||_{H^{s+1}};
    ``quadrature_error`` is the measured trapezoid defect
    ||W(T) - W(0) - trapz(dW/dt)|| in the same norm, the exact value of any
    residual whose remainder set is empty.  ``counts`` reports the depth-1
    tuple census per term, ``composed`` the status of each deeper expansion
    ("empty-by-phase-bound", "empty-frontier", or tuple counts).
    """

    residuals: dict
    quadrature_error: float
    norm_index: float
    counts: dict
    composed: dict
    J_max: int
    n_snapshots: int
    t_span: tuple
    h_max: float
    phase_cap: float
    warnings: list
    params: object

    def summary(self):
        bits = ", ".join(f"J={j}: {self.residuals[j]:.3e}"
                         for j in sorted(self.residuals))
        return (f"nfe residuals in H^{self.norm_index:g}: {bits}; "
                f"quadrature floor {self.quadrature_error:.3e}")


def nfe_residual(traj, J_max, params, max_composed=2_000_000,
                 allow_expensive=False):
    """Truncation residuals of the depth-J normal form on a stored trajectory.

    ``traj`` must hold the gauged coefficients V_hat(t) of the truncated
    band system (``evolve_gauged(..., rhs_mode="terms")``); the identity
    dW/dt = e^{it omega} rhs_terms_total(V_hat) is exact for that flow, and
    the residuals then measure only the unexpanded remainder plus the
    trapezoid defect.  Depth-1 splits tuples at |Phi| = N_threshold, deeper
    splits at c_J |Phi_1|^delta; composed enumerations are skipped whenever
    the threshold provably exceeds every phase the lattice can form.

    Snapshot cadence matters: the trapezoid rule must resolve e^{it Phi} for
    the largest retained |Phi|, so keep max_step * phase_cap below about 0.5
    (the report carries both numbers and warns when the product is large).

    Costs are guarded: J_max > 3 requires ``allow_expensive=True``, and any
    substitution step that would build more than ``max_composed`` tuples
    raises with the estimated count.
    """
    if not isinstance(J_max, int) or J_max < 1:
        raise ValueError("J_max must be a positive integer")
    if J_max > 3 and not allow_expensive:
        raise ValueError(
            f"J_max = {J_max} expansions are disabled by default (tuple "
            "counts grow combinatorially); pass allow_expensive=True")
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two snapshots")

    grid = traj.grid
    n = grid.n
    times = np.asarray(traj.times, dtype=float)
    warnings = []
    if traj.metadata.get("rhs", "terms") != "terms":
        warnings.append(
            "trajectory was not generated by the truncated band system; "
            "the profile-derivative identity is only approximate")

    om = dispersion(grid.xi)
    carriers = np.exp(1j * times[:, None] * om[None, :])
    Vt = carriers * traj.data
    Nt = np.empty_like(Vt)
    for i in range(times.size):
        Nt[i] = carriers[i] * rhs_terms_total_coeffs(traj.data[i], grid)

    w = _trapz_weights(times)
    vdelta = Vt[-1] - Vt[0]
    qvec = vdelta - np.einsum("i,ij->j", w, Nt)
    norm_index = params.s + 1.0

    def norm_of(vec):
        return float(sobolev_norm(SpectralField(grid, vec, _checked=True),
                                  norm_index))

    quadrature_error = norm_of(qvec)

    envelope = np.abs(traj.data).max(axis=0).astype(complex)
    envelope[0] = 0.0
    env_field = SpectralField(grid, envelope, _checked=True)
    cap_tuples = max_composed if not allow_expensive else 2 ** 62
    tvs = {name: term_values_on_lattice(term, env_field, max_tuples=cap_tuples)
           for name, term in bo_terms().items()}

    frontier, counts = _level_one(tvs, params.N_threshold)
    child_cap = _lattice_phase_cap(grid)
    h_max = float(np.diff(times).max())
    if h_max * child_cap > 0.75:
        warnings.append(
            f"snapshot cadence is coarse for this lattice: max_step x "
            f"phase_cap = {h_max * child_cap:.2f} (aim for < 0.5)")

    residuals = {}
    composed = {}
    child_sorted = None
    residuals[1] = norm_of(qvec + _ibp_trapz(frontier, Vt, Nt, times))
    for J in range(2, J_max + 1):
        if not frontier:
            composed[J] = {"status": "empty-frontier"}
            residuals[J] = quadrature_error
            continue
        c_J = params.c(J)  # raises with the assumption message if infeasible
        phase1_min = min(float(b.phase1.min()) for b in frontier)
        frontier_cap = max(float(np.abs(b.phase).max()) for b in frontier)
        threshold_min = c_J * phase1_min ** params.delta
        if threshold_min > frontier_cap + child_cap:
            composed[J] = {
                "status": "empty-by-phase-bound",
                "threshold_min": threshold_min,
                "phase_reachable": frontier_cap + child_cap,
            }
            frontier = []
            residuals[J] = quadrature_error
            continue
        estimate = _compose_estimate(frontier, tvs, n)
        if estimate > max_composed and not allow_expensive:
            raise ValueError(
                f"depth-{J} substitution would build about {estimate} "
                f"composed tuples (cap {max_composed}); raise max_composed "
                "or pass allow_expensive=True")
        if child_sorted is None:
            child_sorted = _child_index(tvs)
        frontier = _compose(frontier, tvs, child_sorted, J, params, n)
        kept = sum(len(b) for b in frontier)
        composed[J] = {
            "status": "expanded",
            "composed": estimate,
            "nonresonant": kept,
            "threshold_min": threshold_min,
        }
        residuals[J] = norm_of(qvec + _ibp_trapz(frontier, Vt, Nt, times))

    return NfeReport(
        residuals=residuals,
        quadrature_error=quadrature_error,
        norm_index=norm_index,
        counts=counts,
        composed=composed,
        J_max=J_max,
        n_snapshots=int(times.size),
        t_span=(float(times[0]), float(times[-1])),
        h_max=h_max,
        phase_cap=child_cap,
        warnings=warnings,
        params=params,
    )
