"""Depth-image-based rendering of a virtual view between two captured views.

Pixels of the left view (view 0) shift left by round(Y*v*eta) columns toward
a virtual position v in [0, 1]; right-view pixels shift right by
round(Y*(1-v)*eta).  Colliding pixels resolve by larger disparity (nearer
object), then smaller source column.  Uncovered pixels are holes, filled by
horizontal propagation from the background side.

Blending is either distance-weighted (1-v, v) or additionally modulated by
per-pixel reliability derived from worst-case distortion bounds of both
contributions.  With equal reliabilities the adaptive path reproduces the
distance-weighted result bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import MB_SIZE

BLEND_MODES = ("standard", "adaptive")


class SynthesisError(ValueError):
    """Invalid synthesis parameters."""


@dataclass(frozen=True)
class SynthesisParams:
    position: float = 0.5       # virtual view position v in [0, 1]
    eta: float = 1.0            # pixel shift per disparity level at full baseline
    reliability_c: float = 1.0  # additive constant keeping weights finite
    mode: str = "standard"

    def __post_init__(self) -> None:
        if not 0.0 <= self.position <= 1.0:
            raise SynthesisError("position must lie in [0, 1]")
        if self.eta <= 0:
            raise SynthesisError("eta must be positive")
        if self.reliability_c <= 0:
            raise SynthesisError("reliability_c must be positive")
        if self.mode not in BLEND_MODES:
            raise SynthesisError(f"mode must be one of {BLEND_MODES}")


def shift_factor(source_view: int, position: float, eta: float) -> float:
    """Columns of shift per disparity level for the given source view."""
    return position * eta if source_view == 0 else (1.0 - position) * eta


@dataclass
class WarpedView:
    """One view forward-warped to the virtual position."""

    covered: np.ndarray    # (H, W) bool
    value: np.ndarray      # (H, W) uint8, 0 where not covered
    disparity: np.ndarray  # (H, W) int64, 0 where not covered
    src_col: np.ndarray    # (H, W) int64, -1 where not covered


def warp_view(texture: np.ndarray, disparity: np.ndarray, source_view: int,
              position: float, eta: float = 1.0) -> WarpedView:
    """Forward-warp one view to the virtual position with z-buffering."""
    if source_view not in (0, 1):
        raise SynthesisError("source_view must be 0 or 1")
    h, w = texture.shape
    factor = shift_factor(source_view, position, eta)
    shift = np.rint(disparity.astype(np.float64) * factor).astype(np.int64)
    cols = np.broadcast_to(np.arange(w, dtype=np.int64), (h, w))
    tcol = cols - shift if source_view == 0 else cols + shift

    inframe = (tcol >= 0) & (tcol < w)
    rows = np.broadcast_to(np.arange(h, dtype=np.int64)[:, None], (h, w))
    src_r = rows[inframe]
    src_c = cols[inframe]
    tgt = src_r * w + tcol[inframe]
    disp = disparity.astype(np.int64)[inframe]

    # per target: larger disparity wins, then smaller source column
    order = np.lexsort((src_c, -disp, tgt))
    tgt_sorted = tgt[order]
    first = np.ones(tgt_sorted.shape[0], dtype=bool)
    first[1:] = tgt_sorted[1:] != tgt_sorted[:-1]
    win = order[first]

    covered = np.zeros(h * w, dtype=bool)
    value = np.zeros(h * w, dtype=np.uint8)
    out_disp = np.zeros(h * w, dtype=np.int64)
    out_src = np.full(h * w, -1, dtype=np.int64)
    covered[tgt_sorted[first]] = True
    value[tgt_sorted[first]] = texture[inframe][win]
    out_disp[tgt_sorted[first]] = disp[win]
    out_src[tgt_sorted[first]] = src_c[win]
    return WarpedView(covered=covered.reshape(h, w),
                      value=value.reshape(h, w),
                      disparity=out_disp.reshape(h, w),
                      src_col=out_src.reshape(h, w))


def fill_holes(plane: np.ndarray, holes: np.ndarray,
               disparity: np.ndarray) -> np.ndarray:
    """Fill holes per row from the nearest covered neighbor on the
    smaller-disparity side; rows with no covered pixel become 128."""
    out = plane.copy()
    h, w = plane.shape
    for i in np.flatnonzero(holes.any(axis=1)):
        known = np.flatnonzero(~holes[i])
        if known.size == 0:
            out[i, :] = 128
            continue
        hidx = np.flatnonzero(holes[i])
        pos = np.searchsorted(known, hidx)
        has_left = pos > 0
        has_right = pos < known.size
        left = known[np.clip(pos - 1, 0, known.size - 1)]
        right = known[np.clip(pos, 0, known.size - 1)]
        dl = disparity[i, left]
        dr = disparity[i, right]
        use_left = has_left & (~has_right | (dl <= dr))
        out[i, hidx] = np.where(use_left, plane[i, left], plane[i, right])
    return out


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def blend_standard(left: WarpedView, right: WarpedView, position: float
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Distance-weighted blend; returns (plane, hole mask)."""
    v = position
    x0 = left.value.astype(np.float64)
    x1 = right.value.astype(np.float64)
    both = left.covered & right.covered
    mixed = _round_half_up((1.0 - v) * x0 + v * x1)
    plane = np.where(both, mixed,
                     np.where(left.covered, x0,
                              np.where(right.covered, x1, 0.0)))
    holes = ~(left.covered | right.covered)
    return plane.astype(np.uint8), holes


def reliability_weights(d0, d1, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Normalized per-pixel reliabilities from worst-case distortions."""
    d0 = np.asarray(d0, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    den = d0 + d1 + c
    raw0 = (d1 + c) / den
    raw1 = (d0 + c) / den
    s = raw0 + raw1
    return raw0 / s, raw1 / s


def blend_adaptive(left: WarpedView, right: WarpedView, position: float,
                   d0_target: np.ndarray, d1_target: np.ndarray,
                   reliability_c: float
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Reliability-modulated blend.

    d0_target / d1_target are the per-target-pixel worst-case distortions of
    the two contributions.  Returns (plane, holes, r0, r1).  Where the two
    reliabilities are exactly equal the distance-weighted value is used
    unchanged, which keeps the zero-error case bit-identical to
    blend_standard.
    """
    v = position
    x0 = left.value.astype(np.float64)
    x1 = right.value.astype(np.float64)
    r0, r1 = reliability_weights(d0_target, d1_target, reliability_c)
    w0 = (1.0 - v) * r0
    w1 = v * r1
    with np.errstate(invalid="ignore", divide="ignore"):
        modulated = _round_half_up((w0 * x0 + w1 * x1) / (w0 + w1))
    std = _round_half_up((1.0 - v) * x0 + v * x1)
    mixed = np.where(r0 == r1, std, modulated)
    both = left.covered & right.covered
    plane = np.where(both, mixed,
                     np.where(left.covered, x0,
                              np.where(right.covered, x1, 0.0)))
    holes = ~(left.covered | right.covered)
    return plane.astype(np.uint8), holes, r0, r1


def expand_block_values(values: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Per-MB values broadcast to per-pixel resolution."""
    hb, wb = grid
    m = np.asarray(values, dtype=np.float64).reshape(hb, wb)
    return np.repeat(np.repeat(m, MB_SIZE, axis=0), MB_SIZE, axis=1)


def worst_case_distortion_map(texture: np.ndarray, block_texture_error: np.ndarray,
                              block_disparity_error: np.ndarray,
                              factor: float) -> np.ndarray:
    """Per-source-pixel worst-case intensity distortion of a warped pixel.

    Scans the columns the pixel could have come from had its disparity been
    off by up to the block's tracked disparity error: the radius (in target
    columns) is ceil(eps * factor), with factor the view's shift per
    disparity level.  Each scanned column contributes its block's texture
    error plus the intensity difference against the pixel itself.
    """
    h, w = texture.shape
    grid = (h // MB_SIZE, w // MB_SIZE)
    e_pix = expand_block_values(block_texture_error, grid)
    eps_pix = expand_block_values(block_disparity_error, grid)
    radius = np.ceil(eps_pix * factor).astype(np.int64)
    x = texture.astype(np.float64)
    d = e_pix.copy()
    max_r = int(radius.max()) if radius.size else 0
    cols = np.broadcast_to(np.arange(w, dtype=np.int64), (h, w))
    for off in range(1, max_r + 1):
        for sgn in (-1, 1):
            l = cols + sgn * off
            ok = (l >= 0) & (l < w) & (off <= radius)
            lc = np.clip(l, 0, w - 1)
            xg = np.take_along_axis(x, lc, axis=1)
            eg = np.take_along_axis(e_pix, lc, axis=1)
            cand = eg + np.abs(xg - x)
            d = np.where(ok, np.maximum(d, cand), d)
    return d


def gather_at_targets(source_map: np.ndarray, warped: WarpedView) -> np.ndarray:
    """Pull a per-source-pixel map to the warp's target grid (0 where uncovered)."""
    src = np.clip(warped.src_col, 0, source_map.shape[1] - 1)
    vals = np.take_along_axis(source_map, src, axis=1)
    return np.where(warped.covered, vals, 0.0)


@dataclass
class SynthesisResult:
    plane: np.ndarray            # (H, W) uint8, holes filled
    holes: np.ndarray            # (H, W) bool, pre-fill hole mask
    left: WarpedView
    right: WarpedView
    r0: np.ndarray | None = None
    r1: np.ndarray | None = None


def synthesize_view(left_texture: np.ndarray, left_disparity: np.ndarray,
                    right_texture: np.ndarray, right_disparity: np.ndarray,
                    params: SynthesisParams,
                    left_errors: tuple[np.ndarray, np.ndarray] | None = None,
                    right_errors: tuple[np.ndarray, np.ndarray] | None = None
                    ) -> SynthesisResult:
    """Full synthesis of the virtual view from two decoded views.

    left_errors / right_errors are per-MB (texture error, disparity error)
    pairs from receiver-side tracking, required for adaptive blending.
    """
    wl = warp_view(left_texture, left_disparity, 0, params.position, params.eta)
    wr = warp_view(right_texture, right_disparity, 1, params.position, params.eta)
    r0 = r1 = None
    if params.mode == "adaptive":
        if left_errors is None or right_errors is None:
            raise SynthesisError("adaptive blending needs tracked errors for both views")
        d0_src = worst_case_distortion_map(left_texture, left_errors[0], left_errors[1],
                                           shift_factor(0, params.position, params.eta))
        d1_src = worst_case_distortion_map(right_texture, right_errors[0], right_errors[1],
                                           shift_factor(1, params.position, params.eta))
        d0_t = gather_at_targets(d0_src, wl)
        d1_t = gather_at_targets(d1_src, wr)
        plane, holes, r0, r1 = blend_adaptive(wl, wr, params.position, d0_t, d1_t,
                                              params.reliability_c)
    else:
        plane, holes = blend_standard(wl, wr, params.position)
    disp_ctx = np.maximum(np.where(wl.covered, wl.disparity, 0),
                          np.where(wr.covered, wr.disparity, 0))
    filled = fill_holes(plane, holes, disp_ctx)
    return SynthesisResult(plane=filled, holes=holes, left=wl, right=wr,
                           r0=r0, r1=r1)


# ---------------------------------------------------------------------------
# cross-view correspondence at the block level
# ---------------------------------------------------------------------------

@dataclass
class CorrespondenceSets:
    """Block-level visibility of one view inside the opposing view.

    member[m] is True when at least half of the block's pixels land in-frame
    and survive z-buffering in the opposing view; covering[m] lists the
    opposing MBs containing those surviving pixels (sorted, empty for
    non-members).
    """

    member: np.ndarray
    covering: list[np.ndarray] = field(default_factory=list)


def correspondence_sets(texture: np.ndarray, disparity: np.ndarray,
                        source_view: int, eta: float) -> CorrespondenceSets:
    """Warp a view onto the opposing one and collect per-MB coverage."""
    position = 1.0 if source_view == 0 else 0.0
    w = warp_view(texture, disparity, source_view, position, eta)
    h, width = texture.shape
    grid = (h // MB_SIZE, width // MB_SIZE)
    hb, wb = grid
    n_mb = hb * wb

    rows, tcols = np.nonzero(w.covered)
    src_cols = w.src_col[rows, tcols]
    src_mb = (rows // MB_SIZE) * wb + src_cols // MB_SIZE
    tgt_mb = (rows // MB_SIZE) * wb + tcols // MB_SIZE

    counts = np.bincount(src_mb, minlength=n_mb)
    member = counts >= (MB_SIZE * MB_SIZE) // 2

    covering: list[np.ndarray] = []
    pairs = np.unique(src_mb * n_mb + tgt_mb)
    srcs, tgts = pairs // n_mb, pairs % n_mb
    for m in range(n_mb):
        if member[m]:
            covering.append(tgts[srcs == m])
        else:
            covering.append(np.empty(0, dtype=np.int64))
    return CorrespondenceSets(member=member, covering=covering)
