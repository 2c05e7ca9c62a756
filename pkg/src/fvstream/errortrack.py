"""Recursive per-macroblock error tracking on both ends of the channel.

Error unit is mean absolute intensity difference per pixel of a macroblock.
A received block inherits the attenuated, overlap-weighted error of the
region its predictor came from (zero for INTRA); a lost block is concealed
by the co-located block of the previous frame, so its error is the previous
error plus the frame-to-frame innovation delta:

    e_plus  = 0                     if INTRA
            = gamma * sum_k a_k * e[tau, k]   otherwise
    e_minus = e[t-1, m] + delta
    e[t, m] = p * e_plus + (1 - p) * e_minus

The sender runs the recursion in expectation with p the per-packet delivery
probability, overridden by 0/1 once feedback for a frame arrives; the
receiver runs it with actual outcomes and estimates delta from what it has:
the previous two decoded frames, spatial neighbors on early frames, or (for
texture) a warp from the opposing view when that view is strictly more
reliable.  Disparity planes never use the cross-view estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import MODE_INTRA, EncodedPlane
from .frames import MB_SIZE
from .synthesis import expand_block_values, warp_view

DEFAULT_GAMMA = 0.9


class TrackingError(ValueError):
    """Invalid tracker usage."""


# ---------------------------------------------------------------------------
# shared primitives
# ---------------------------------------------------------------------------

def block_footprint(mb_index: int, mv: tuple[int, int], grid: tuple[int, int]
                    ) -> list[tuple[int, float]]:
    """MBs covered by a block's predictor with their pixel-overlap fractions.

    Enumeration order is top-left, top-right, bottom-left, bottom-right;
    zero-overlap entries are dropped.  Fractions sum to 1 exactly.
    """
    hb, wb = grid
    r, c = divmod(mb_index, wb)
    pr = r * MB_SIZE - mv[1]
    pc = c * MB_SIZE - mv[0]
    if pr < 0 or pc < 0 or pr + MB_SIZE > hb * MB_SIZE or pc + MB_SIZE > wb * MB_SIZE:
        raise TrackingError(f"predictor of block {mb_index} at mv {mv} leaves the frame")
    br0, fr = divmod(pr, MB_SIZE)
    bc0, fc = divmod(pc, MB_SIZE)
    out = []
    for bi, oh in ((br0, MB_SIZE - fr), (br0 + 1, fr)):
        for bj, ow in ((bc0, MB_SIZE - fc), (bc0 + 1, fc)):
            if oh > 0 and ow > 0:
                out.append((bi * wb + bj, (oh * ow) / (MB_SIZE * MB_SIZE)))
    return out


def footprint_state_sum(states_by_dist: np.ndarray, dist: np.ndarray,
                        dx: np.ndarray, dy: np.ndarray, mb_index: np.ndarray,
                        grid: tuple[int, int]) -> np.ndarray:
    """Overlap-weighted sum of prior error states under each predictor.

    states_by_dist: (D, n_mb) with row d-1 the state at distance d; dist, dx,
    dy, mb_index: equal-length int arrays.  Summation order matches
    block_footprint (top-left, top-right, bottom-left, bottom-right) with
    zero-weight terms contributing exact zeros, so results are bit-stable.
    """
    hb, wb = grid
    pr = (mb_index // wb) * MB_SIZE - dy
    pc = (mb_index % wb) * MB_SIZE - dx
    br0, fr = np.divmod(pr, MB_SIZE)
    bc0, fc = np.divmod(pc, MB_SIZE)
    br1 = np.minimum(br0 + 1, hb - 1)
    bc1 = np.minimum(bc0 + 1, wb - 1)
    frf = fr.astype(np.float64)
    fcf = fc.astype(np.float64)
    area = float(MB_SIZE * MB_SIZE)
    w_tl = (MB_SIZE - frf) * (MB_SIZE - fcf) / area
    w_tr = (MB_SIZE - frf) * fcf / area
    w_bl = frf * (MB_SIZE - fcf) / area
    w_br = frf * fcf / area
    row = dist - 1
    s = w_tl * states_by_dist[row, br0 * wb + bc0]
    s = s + w_tr * states_by_dist[row, br0 * wb + bc1]
    s = s + w_bl * states_by_dist[row, br1 * wb + bc0]
    s = s + w_br * states_by_dist[row, br1 * wb + bc1]
    return s


def innovation_term(cur_plane: np.ndarray, prev_plane: np.ndarray | None
                    ) -> np.ndarray:
    """Per-MB mean absolute frame-to-frame change (vs mid-gray before frame 0)."""
    cur = cur_plane.astype(np.int64)
    prev = np.full_like(cur, 128) if prev_plane is None else prev_plane.astype(np.int64)
    h, w = cur.shape
    hb, wb = h // MB_SIZE, w // MB_SIZE
    diff = np.abs(cur - prev)
    sums = diff.reshape(hb, MB_SIZE, wb, MB_SIZE).sum(axis=(1, 3))
    return (sums / float(MB_SIZE * MB_SIZE)).reshape(hb * wb)


def propagate_received(states_by_dist: np.ndarray, modes: np.ndarray,
                       ref_dist: np.ndarray, mv: np.ndarray,
                       gamma: float, grid: tuple[int, int]) -> np.ndarray:
    """e_plus for every block of a frame given its decisions."""
    n_mb = modes.shape[0]
    intra = modes == MODE_INTRA
    dist = np.where(intra, 1, ref_dist).astype(np.int64)
    # intra mv slots hold base levels, not displacements
    dx = np.where(intra, 0, mv[:, 0]).astype(np.int64)
    dy = np.where(intra, 0, mv[:, 1]).astype(np.int64)
    s = footprint_state_sum(states_by_dist, dist, dx, dy, np.arange(n_mb), grid)
    return np.where(intra, 0.0, gamma * s)


# ---------------------------------------------------------------------------
# sender-side expectation lattice
# ---------------------------------------------------------------------------

@dataclass
class _FrameRecord:
    modes: np.ndarray
    ref_dist: np.ndarray
    mv: np.ndarray
    delta: np.ndarray
    p: np.ndarray               # per-MB delivery probability currently assumed
    known: bool = False


class ExpectedErrorTracker:
    """Expected decoder error per MB for one (view, component) stream.

    States are pushed one frame at a time with the final coding decisions.
    Delivery outcomes learned later rewrite the affected frame's
    probabilities to 0/1 and re-propagate everything newer.
    """

    def __init__(self, grid: tuple[int, int], planned_receive_prob: float,
                 gamma: float = DEFAULT_GAMMA):
        if not 0.0 <= planned_receive_prob <= 1.0:
            raise TrackingError("planned_receive_prob must be in [0, 1]")
        if not 0.0 < gamma <= 1.0:
            raise TrackingError("gamma must be in (0, 1]")
        self.grid = grid
        self.n_mb = grid[0] * grid[1]
        self.gamma = gamma
        self.p_plan = planned_receive_prob
        self._frames: list[_FrameRecord] = []
        self._states: list[np.ndarray] = []

    @property
    def frame_count(self) -> int:
        return len(self._frames)

    def state(self, t: int) -> np.ndarray:
        return self._states[t]

    def reference_states(self, t: int, depth: int) -> np.ndarray:
        """(depth, n_mb) stack of states at t-1 .. t-depth, zeros past the start."""
        out = np.zeros((depth, self.n_mb))
        for d in range(1, depth + 1):
            if t - d >= 0:
                out[d - 1] = self._states[t - d]
        return out

    def _compute_state(self, t: int) -> np.ndarray:
        rec = self._frames[t]
        depth = max(1, int(rec.ref_dist.max()) if rec.ref_dist.size else 1)
        refs = self.reference_states(t, depth)
        e_plus = propagate_received(refs, rec.modes, rec.ref_dist, rec.mv,
                                    self.gamma, self.grid)
        prev = self._states[t - 1] if t >= 1 else np.zeros(self.n_mb)
        e_minus = prev + rec.delta
        return rec.p * e_plus + (1.0 - rec.p) * e_minus

    def push_frame(self, modes: np.ndarray, ref_dist: np.ndarray,
                   mv: np.ndarray, delta: np.ndarray) -> np.ndarray:
        t = len(self._frames)
        self._frames.append(_FrameRecord(
            modes=np.asarray(modes), ref_dist=np.asarray(ref_dist),
            mv=np.asarray(mv), delta=np.asarray(delta, dtype=np.float64),
            p=np.full(self.n_mb, self.p_plan)))
        self._states.append(np.zeros(self.n_mb))
        self._states[t] = self._compute_state(t)
        return self._states[t]

    def set_frame_outcome(self, t: int, received: np.ndarray) -> None:
        """Replace frame t's assumed probabilities with known 0/1 outcomes."""
        if not 0 <= t < len(self._frames):
            raise TrackingError(f"no frame {t} pushed yet")
        rec = self._frames[t]
        rec.p = np.asarray(received, dtype=np.float64)
        rec.known = True
        for f in range(t, len(self._frames)):
            self._states[f] = self._compute_state(f)


def candidate_expected_errors(ref_states: np.ndarray, prev_state: np.ndarray,
                              delta: np.ndarray, p: float, gamma: float,
                              mode_col: np.ndarray, ref_col: np.ndarray,
                              mv: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Expected error of every (block, candidate) pair before transmission.

    ref_states: (D, n_mb) prior states by distance; mv: (n_mb, n_cand, 2).
    The e_minus branch is candidate-independent; only the inherited e_plus
    varies with the reference and motion choice.
    """
    n_mb, n_cand = mv.shape[0], mv.shape[1]
    e_minus = prev_state + delta
    idx = np.arange(n_mb)
    out = np.empty((n_mb, n_cand))
    for c in range(n_cand):
        if mode_col[c] == MODE_INTRA:
            e_plus = np.zeros(n_mb)
        else:
            dist = np.full(n_mb, int(ref_col[c]), dtype=np.int64)
            s = footprint_state_sum(ref_states, dist,
                                    mv[:, c, 0].astype(np.int64),
                                    mv[:, c, 1].astype(np.int64), idx, grid)
            e_plus = gamma * s
        out[:, c] = p * e_plus + (1.0 - p) * e_minus
    return out


def intra_expected_error(prev_state: np.ndarray, delta: np.ndarray,
                         p: float) -> np.ndarray:
    """Expected error of the INTRA candidate (e_plus is identically zero)."""
    return (1.0 - p) * (prev_state + delta)


# ---------------------------------------------------------------------------
# receiver-side tracking
# ---------------------------------------------------------------------------

def estimate_delta_history(dec_prev: np.ndarray | None,
                           dec_prevprev: np.ndarray | None,
                           grid: tuple[int, int]) -> np.ndarray:
    """Per-MB receiver delta from decoded history (no cross-view term).

    Co-located mean absolute difference of the two previous decoded frames.
    With fewer than two frames of history no co-located pair exists anywhere,
    so the spatial-neighbor fallback averages an empty set: zero everywhere.
    """
    if dec_prev is None or dec_prevprev is None:
        return np.zeros(grid[0] * grid[1])
    return innovation_term(dec_prev, dec_prevprev)


class DecoderTracker:
    """Receiver-side error states for all four planes of a stereo stream."""

    #: minimum warped pixels inside a block for the cross-view delta estimate
    MIN_COVERAGE = (MB_SIZE * MB_SIZE) // 2

    def __init__(self, grid: tuple[int, int], gamma: float = DEFAULT_GAMMA,
                 eta: float = 1.0):
        self.grid = grid
        self.n_mb = grid[0] * grid[1]
        self.gamma = gamma
        self.eta = eta
        self._states: dict[tuple[int, int], list[np.ndarray]] = {
            (v, comp): [] for v in (0, 1) for comp in (0, 1)}
        self._history: dict[tuple[int, int], list[np.ndarray]] = {
            (v, comp): [] for v in (0, 1) for comp in (0, 1)}

    def state(self, view: int, component: int, t: int | None = None) -> np.ndarray:
        series = self._states[(view, int(component))]
        return series[-1 if t is None else t]

    def frame_count(self) -> int:
        return len(self._states[(0, 0)])

    def _prev_decoded(self, view: int, comp: int, back: int) -> np.ndarray | None:
        series = self._history[(view, comp)]
        return series[-back] if len(series) >= back else None

    def _track_plane(self, view: int, comp: int, t: int, enc: EncodedPlane,
                     received: np.ndarray, delta: np.ndarray) -> np.ndarray:
        series = self._states[(view, comp)]
        depth = max(1, int(enc.ref_dist.max()) if t > 0 else 1)
        refs = np.zeros((depth, self.n_mb))
        for d in range(1, depth + 1):
            if t - d >= 0:
                refs[d - 1] = series[t - d]
        e_plus = propagate_received(refs, enc.modes, enc.ref_dist, enc.mv,
                                    self.gamma, self.grid)
        prev = series[t - 1] if t >= 1 else np.zeros(self.n_mb)
        e_minus = prev + delta
        return np.where(received, e_plus, e_minus)

    def update_frame(self, t: int,
                     decoded: dict[tuple[int, int], np.ndarray],
                     encoded: dict[tuple[int, int], EncodedPlane],
                     received: dict[tuple[int, int], np.ndarray]) -> None:
        """Advance all four planes to frame t.

        decoded holds the frame-t decoder reconstructions keyed by
        (view, component); component 0 is texture, 1 is disparity.
        Disparity planes are tracked first (history rules only); texture
        then gets a second pass that upgrades delta estimates of lost blocks
        from the opposing view's warped texture when that view is strictly
        more reliable and covers at least half the block.
        """
        if t != self.frame_count():
            raise TrackingError(f"expected frame {self.frame_count()}, got {t}")

        for view in (0, 1):
            key = (view, 1)
            delta = estimate_delta_history(self._prev_decoded(view, 1, 1),
                                           self._prev_decoded(view, 1, 2),
                                           self.grid)
            self._states[key].append(self._track_plane(view, 1, t, encoded[key],
                                                       received[key], delta))

        # texture pass A: history-based deltas for both views
        pass_a: dict[int, np.ndarray] = {}
        for view in (0, 1):
            delta = estimate_delta_history(self._prev_decoded(view, 0, 1),
                                           self._prev_decoded(view, 0, 2),
                                           self.grid)
            pass_a[view] = self._track_plane(view, 0, t, encoded[(view, 0)],
                                             received[(view, 0)], delta)

        # texture pass B: cross-view delta for lost blocks where the
        # opposing view is strictly more reliable
        final: dict[int, np.ndarray] = {view: pass_a[view].copy() for view in (0, 1)}
        for view in (0, 1):
            lost = ~received[(view, 0)]
            if not lost.any():
                continue
            opp = 1 - view
            warped = warp_view(decoded[(opp, 0)], decoded[(opp, 1)], opp,
                               float(view), self.eta)
            src_mb_err = expand_block_values(pass_a[opp], self.grid)
            src_err_at_t = np.where(
                warped.covered,
                np.take_along_axis(src_mb_err,
                                   np.clip(warped.src_col, 0,
                                           src_mb_err.shape[1] - 1), axis=1),
                0.0)
            prev_tex = self._prev_decoded(view, 0, 1)
            if prev_tex is None:
                prev_tex = np.full(decoded[(view, 0)].shape, 128, dtype=np.uint8)
            prev_state = (self._states[(view, 0)][t - 1] if t >= 1
                          else np.zeros(self.n_mb))
            hb, wb = self.grid
            for m in np.flatnonzero(lost):
                r0 = (m // wb) * MB_SIZE
                c0 = (m % wb) * MB_SIZE
                sl = np.s_[r0:r0 + MB_SIZE, c0:c0 + MB_SIZE]
                cov = warped.covered[sl]
                n_cov = int(cov.sum())
                if n_cov < self.MIN_COVERAGE:
                    continue
                if float(src_err_at_t[sl][cov].max()) >= float(pass_a[view][m]):
                    continue
                diff = np.abs(warped.value[sl].astype(np.float64)
                              - prev_tex[sl].astype(np.float64))
                delta1 = float(diff[cov].sum() / n_cov)
                final[view][m] = prev_state[m] + delta1
        for view in (0, 1):
            self._states[(view, 0)].append(final[view])

        for view in (0, 1):
            for comp in (0, 1):
                hist = self._history[(view, comp)]
                hist.append(decoded[(view, comp)].copy())
                if len(hist) > 2:
                    del hist[0]
