"""Per-block reference selection under a Lagrangian rate-distortion objective.

Three selection modes share one machinery:

  reactive      source distortion + lambda * bits, restricted to references
                untouched by known or inherited loss taint;
  independent   adds the expected channel distortion of each view on its own
                (texture: tracked error; depth: quadratic disparity penalty);
  cross         for blocks visible in the opposing view, caps the expected
                distortion by what the other view can deliver, optimized in
                two steps (texture against the depth error-minimizer, then
                depth against the chosen texture).

Candidate costs are assembled as (source distortion + channel term)
+ lambda * bits and minimized per block over all candidates at once; the
INTRA predictor is context free, so no block depends on another's choice.
All reductions keep a fixed operand order so results are reproducible bit
for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .codec import (MODE_INTRA, MODE_SKIP, CandidateSet, CodecConfig,
                    EncodedPlane, assemble_plane, build_inter_candidates,
                    build_intra_candidates, plane_blocks)
from .errortrack import (ExpectedErrorTracker, candidate_expected_errors,
                         footprint_state_sum, intra_expected_error)
from .frames import MB_SIZE
from .sensitivity import g_eval
from .synthesis import CorrespondenceSets

OPTIMIZER_MODES = ("reactive", "independent", "cross")


class OptimizerError(ValueError):
    """Invalid optimizer usage."""


# ---------------------------------------------------------------------------
# candidate preparation
# ---------------------------------------------------------------------------

@dataclass
class PlaneCandidates:
    """Per-candidate atoms of one plane: coding options plus channel terms."""

    cset: CandidateSet
    chan: np.ndarray        # (n_mb, n_cand) expected error per candidate
    chan_intra: np.ndarray  # (n_mb,) expected error of the INTRA choice
    delta: np.ndarray       # (n_mb,) innovation used in the e_minus branch

    @property
    def n_mb(self) -> int:
        return self.chan.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.chan.shape[1]


def build_plane_candidates(orig: np.ndarray, refs: list[np.ndarray],
                           cfg: CodecConfig, tracker: ExpectedErrorTracker,
                           t: int, delta: np.ndarray, p: float) -> PlaneCandidates:
    cset = build_inter_candidates(orig, refs, cfg)
    ref_states = tracker.reference_states(t, len(refs))
    prev = tracker.state(t - 1) if t >= 1 else np.zeros(tracker.n_mb)
    chan = candidate_expected_errors(ref_states, prev, delta, p, tracker.gamma,
                                     cset.mode_col, cset.ref_col, cset.mv,
                                     tracker.grid)
    chan_intra = intra_expected_error(prev, delta, p)
    return PlaneCandidates(cset=cset, chan=chan, chan_intra=chan_intra,
                           delta=delta)


def step1_minimum(pc: PlaneCandidates) -> tuple[np.ndarray, np.ndarray]:
    """Per-MB first index and value of the smallest expected error over the
    motion candidates (INTRA excluded: the step picks a reference)."""
    idx = np.argmin(pc.chan, axis=1)
    return idx, pc.chan[np.arange(pc.n_mb), idx]


def opposing_cap(corr: CorrespondenceSets, opp_error_prev: np.ndarray,
                 opp_penalty_prev: np.ndarray, delta_tex: np.ndarray
                 ) -> np.ndarray:
    """Distortion the opposing view guarantees for each visible block.

    Worst covered opposing block (previous-frame error plus disparity
    penalty) plus this block's own innovation; +inf for blocks without a
    correspondence so a min() against it is a no-op.
    """
    n_mb = opp_error_prev.shape[0]
    cap = np.full(n_mb, np.inf)
    for m in np.flatnonzero(corr.member):
        ks = corr.covering[m]
        cap[m] = np.max(opp_error_prev[ks] + opp_penalty_prev[ks]) + delta_tex[m]
    return cap


def texture_channel_columns(pc: PlaneCandidates, mode: str,
                            member: np.ndarray | None = None,
                            penalty_fixed: np.ndarray | None = None,
                            cap: np.ndarray | None = None) -> np.ndarray:
    """(n_mb, n_cand + 1) channel distortion per texture candidate, INTRA last."""
    cols = np.concatenate([pc.chan, pc.chan_intra[:, None]], axis=1)
    if mode == "reactive":
        return np.zeros_like(cols)
    if mode == "independent":
        return cols
    if mode != "cross":
        raise OptimizerError(f"unknown mode {mode}")
    capped = np.minimum(cols + penalty_fixed[:, None], cap[:, None])
    return np.where(member[:, None], capped, cols)


def depth_channel_columns(pc: PlaneCandidates, mode: str, curvature: np.ndarray,
                          member: np.ndarray | None = None,
                          error_fixed: np.ndarray | None = None,
                          cap: np.ndarray | None = None) -> np.ndarray:
    """(n_mb, n_cand + 1) channel distortion per depth candidate, INTRA last."""
    eps = np.concatenate([pc.chan, pc.chan_intra[:, None]], axis=1)
    if mode == "reactive":
        return np.zeros_like(eps)
    penalty = g_eval(curvature[:, None], eps)
    if mode == "independent":
        return penalty
    if mode != "cross":
        raise OptimizerError(f"unknown mode {mode}")
    capped = np.minimum(error_fixed[:, None] + penalty, cap[:, None])
    return np.where(member[:, None], capped, penalty)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

@dataclass
class PlaneSelection:
    """Outcome of one plane's per-block minimization."""

    enc: EncodedPlane
    recon: np.ndarray
    total_bits: int
    cost: np.ndarray          # per-MB chosen Lagrangian cost
    bits: np.ndarray          # per-MB rate
    dsrc: np.ndarray          # per-MB source distortion of the chosen option
    channel: np.ndarray       # per-MB channel term entering the cost
    chan_error: np.ndarray    # per-MB expected error of the chosen option
    chosen_col: np.ndarray    # candidate column; n_cand means INTRA
    intra_dsrc: np.ndarray    # per-MB INTRA source distortion
    intra_bits: np.ndarray    # per-MB INTRA rate


def select_plane(orig: np.ndarray, pc: PlaneCandidates, channel_cols: np.ndarray,
                 lam: float, quant_step: int,
                 valid: np.ndarray | None = None) -> PlaneSelection:
    """Pick the cheapest candidate per block and reconstruct the plane.

    channel_cols has one column per motion candidate plus an INTRA column at
    the end; valid (same layout, optional) disables candidates.  Cost is
    (source distortion + channel term) + lambda * bits; ties keep the first
    column, INTRA last.
    """
    cset = pc.cset
    n_mb, n_cand = pc.chan.shape
    h, w = orig.shape
    hb, wb = h // MB_SIZE, w // MB_SIZE

    q_i, rec_i, intra_bits, intra_dsrc, intra_base = \
        build_intra_candidates(orig, quant_step)

    cost_cols = np.empty((n_mb, n_cand + 1))
    cost_cols[:, :n_cand] = (cset.distortion + channel_cols[:, :n_cand]) \
        + lam * cset.bits
    cost_cols[:, n_cand] = (intra_dsrc + channel_cols[:, n_cand]) \
        + lam * intra_bits
    if valid is not None:
        cost_cols = np.where(valid, cost_cols, np.inf)

    # first minimum wins ties, with INTRA in the last column
    chosen = np.argmin(cost_cols, axis=1).astype(np.int32)
    rows = np.arange(n_mb)
    is_intra = chosen == n_cand
    kc = np.where(is_intra, 0, chosen)  # in-range column for candidate gathers

    modes = np.where(is_intra, MODE_INTRA, cset.mode_col[kc]).astype(np.uint8)
    ref_dist = np.where(is_intra, 0, cset.ref_col[kc]).astype(np.uint8)
    # intra rows ride the mv slot with (base, 0)
    intra_mv = np.stack([intra_base, np.zeros_like(intra_base)], axis=1)
    mv = np.where(is_intra[:, None], intra_mv, cset.mv[rows, kc]).astype(np.int16)
    coeffs = np.where(is_intra[:, None, None], q_i,
                      cset.coeffs[rows, kc]).astype(np.int32)
    blocks = np.where(is_intra[:, None, None], rec_i, cset.recon[rows, kc])
    bits = np.where(is_intra, intra_bits, cset.bits[rows, kc]).astype(np.int64)
    dsrc = np.where(is_intra, intra_dsrc, cset.distortion[rows, kc])
    chan_error = np.where(is_intra, pc.chan_intra, pc.chan[rows, kc])
    recon = assemble_plane(blocks.astype(np.uint8), (hb, wb))

    enc = EncodedPlane(modes=modes, ref_dist=ref_dist, mv=mv, coeffs=coeffs,
                       quant_step=quant_step, grid=(hb, wb))
    return PlaneSelection(enc=enc, recon=recon, total_bits=int(bits.sum()),
                          cost=cost_cols[rows, chosen], bits=bits, dsrc=dsrc,
                          channel=channel_cols[rows, chosen],
                          chan_error=chan_error, chosen_col=chosen,
                          intra_dsrc=intra_dsrc,
                          intra_bits=intra_bits.astype(np.int64))


def code_plane_all_intra(orig: np.ndarray, quant_step: int
                         ) -> tuple[EncodedPlane, np.ndarray, np.ndarray]:
    """Force every block INTRA (first frame); returns (enc, recon, per-MB bits)."""
    h, w = orig.shape
    hb, wb = h // MB_SIZE, w // MB_SIZE
    n_mb = hb * wb
    q, rec, bits, _, base = build_intra_candidates(orig, quant_step)
    mv = np.zeros((n_mb, 2), dtype=np.int16)
    mv[:, 0] = base
    enc = EncodedPlane(modes=np.full(n_mb, MODE_INTRA, dtype=np.uint8),
                       ref_dist=np.zeros(n_mb, dtype=np.uint8),
                       mv=mv, coeffs=q.astype(np.int32),
                       quant_step=quant_step, grid=(hb, wb))
    return enc, assemble_plane(rec, (hb, wb)), bits.astype(np.int64)


# ---------------------------------------------------------------------------
# reactive taint
# ---------------------------------------------------------------------------

class ReactiveTaint:
    """Loss-affected region bookkeeping for the feedback-only baseline.

    A block is tainted when its packet is known lost, or when it predicted
    (at any remove) from a tainted region; INTRA coding clears inherited
    taint.  Frames with unknown outcomes propagate taint but contribute no
    losses of their own yet.
    """

    def __init__(self, grid: tuple[int, int]):
        self.grid = grid
        self.n_mb = grid[0] * grid[1]
        self._decisions: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._lost: list[np.ndarray | None] = []

    def push_decisions(self, modes: np.ndarray, ref_dist: np.ndarray,
                       mv: np.ndarray) -> None:
        self._decisions.append((np.asarray(modes), np.asarray(ref_dist),
                                np.asarray(mv)))
        self._lost.append(None)

    def set_outcome(self, t: int, received: np.ndarray) -> None:
        self._lost[t] = ~np.asarray(received, dtype=bool)

    def lattice(self) -> list[np.ndarray]:
        """Taint mask per pushed frame, recomputed from scratch."""
        out: list[np.ndarray] = []
        idx = np.arange(self.n_mb)
        for f, (modes, ref_dist, mv) in enumerate(self._decisions):
            taint = (self._lost[f].copy() if self._lost[f] is not None
                     else np.zeros(self.n_mb, dtype=bool))
            inter = modes != MODE_INTRA
            if f > 0 and inter.any():
                depth = int(ref_dist[inter].max())
                stack = np.zeros((depth, self.n_mb))
                for d in range(1, depth + 1):
                    if f - d >= 0:
                        stack[d - 1] = out[f - d].astype(np.float64)
                dist = np.where(inter, ref_dist, 1).astype(np.int64)
                # intra mv slots hold base levels, not displacements
                dx = np.where(inter, mv[:, 0], 0).astype(np.int64)
                dy = np.where(inter, mv[:, 1], 0).astype(np.int64)
                overlap = footprint_state_sum(stack, dist, dx, dy, idx,
                                              self.grid)
                taint |= inter & (overlap > 0.0)
            out.append(taint)
        return out

    def valid_candidates(self, cset: CandidateSet, t: int) -> np.ndarray:
        """(n_mb, n_cand + 1) mask of candidates with untainted references."""
        lattice = self.lattice()
        n_mb, n_cand = cset.mv.shape[0], cset.n_candidates
        valid = np.ones((n_mb, n_cand + 1), dtype=bool)
        idx = np.arange(n_mb)
        depth = int(cset.ref_col.max())
        stack = np.zeros((depth, self.n_mb))
        for d in range(1, depth + 1):
            if t - d >= 0:
                stack[d - 1] = lattice[t - d].astype(np.float64)
        for c in range(n_cand):
            dist = np.full(n_mb, int(cset.ref_col[c]), dtype=np.int64)
            overlap = footprint_state_sum(stack, dist,
                                          cset.mv[:, c, 0].astype(np.int64),
                                          cset.mv[:, c, 1].astype(np.int64),
                                          idx, self.grid)
            valid[:, c] = overlap == 0.0
        return valid


# ---------------------------------------------------------------------------
# lambda control
# ---------------------------------------------------------------------------

def tune_lambda(lam: float, bits: int, target: float, band: float = 0.05,
                step: float = 1.25) -> float:
    """Single adjustment: reuse inside the band, else scale toward it."""
    if target * (1.0 - band) <= bits <= target * (1.0 + band):
        return lam
    return lam * step if bits > target else lam / step


@dataclass
class TuneResult:
    lam: float
    bits: int
    payload: object
    in_band: bool
    infeasible: bool
    trials: int


def tune_to_band(run: Callable[[float], tuple[int, object]], lam0: float,
                 target: float, band: float = 0.05, max_trials: int = 8,
                 step: float = 1.25) -> TuneResult:
    """Drive the produced bits into target*(1 +/- band) by adjusting lambda.

    Bits are nonincreasing in lambda, so one-sided misses scale lambda
    geometrically until the band brackets, then bisect in log space.  The
    best trial (in band, else closest in log ratio) is kept.  If even a
    near-infinite lambda overshoots the band the budget is infeasible and
    that maximum-compression result is returned.
    """
    lo = target * (1.0 - band)
    hi = target * (1.0 + band)
    lam_low = lam_high = None   # bracket: bits(lam_low) > hi, bits(lam_high) < lo
    best: TuneResult | None = None
    lam = lam0
    trials = 0
    for _ in range(max_trials):
        bits, payload = run(lam)
        trials += 1
        in_band = lo <= bits <= hi
        score = abs(np.log(max(bits, 1) / target))
        if best is None or (in_band and not best.in_band) or (
                in_band == best.in_band
                and score < abs(np.log(max(best.bits, 1) / target))):
            best = TuneResult(lam=lam, bits=bits, payload=payload,
                              in_band=in_band, infeasible=False, trials=trials)
        if in_band:
            break
        if bits > hi:
            lam_low = lam
        else:
            lam_high = lam
        if lam_low is not None and lam_high is not None:
            lam = float(np.sqrt(lam_low * lam_high))
        elif lam_low is not None:
            lam = lam * step
        else:
            lam = lam / step
    if not best.in_band and best.bits > hi:
        bits, payload = run(1.0e12)
        trials += 1
        if bits > hi:
            return TuneResult(lam=1.0e12, bits=bits, payload=payload,
                              in_band=False, infeasible=True, trials=trials)
        score = abs(np.log(max(bits, 1) / target))
        if score < abs(np.log(max(best.bits, 1) / target)):
            best = TuneResult(lam=1.0e12, bits=bits, payload=payload,
                              in_band=False, infeasible=False, trials=trials)
    best.trials = trials
    return best
