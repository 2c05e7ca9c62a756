"""Simplified block codec: 16x16 macroblocks, three modes, per-block
reference picture selection.

Modes are INTRA (flat prediction at an explicitly transmitted base level),
INTER (integer motion vector into any reference frame within the window) and
SKIP (reference t-1, zero motion, no residual).  Residuals go through a 4x4
orthonormal DCT per tile and uniform scalar quantization.  The rate model
counts, per macroblock:

    mode            2 bits
    INTRA base      8 bits (the flat predictor level)
    INTER reference unary in the frame distance (distance d costs d bits)
    INTER motion    signed exp-Golomb length per component
    residual        empirical zero-order entropy of the 256 quantized
                    coefficients, rounded up to whole bits

so SKIP costs exactly 2 bits and an INTER block into t-1 with zero motion and
zero residual costs 2 + 1 + 2 = 5 bits.  Encoder and decoder share the
reconstruction arithmetic, so without losses the two stay bit identical.

A motion vector is the displacement of scene content: mv (dx, dy) predicts
the block at (row - dy, col - dx) of the reference frame.  The search emits
only vectors whose predictor lies fully inside the frame.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import Component
from .frames import MB_SIZE

MODE_INTRA = 0
MODE_INTER = 1
MODE_SKIP = 2

MODE_BITS = 2
SKIP_BITS = MODE_BITS

# Intra blocks predict from a flat plane at a transmitted 8-bit level.  The
# predictor uses no neighboring samples on purpose: a decoder holding
# corrupted neighbors still rebuilds the block exactly, so an intra refresh
# always lands clean.
INTRA_BASE_BITS = 8

STREAM_MAGIC = b"FVBS"
STREAM_VERSION = 1


class CodecError(ValueError):
    """Invalid codec configuration, decision or bitstream."""


@dataclass(frozen=True)
class CodecConfig:
    quant_step: int = 10
    search_range: int = 16
    ref_window: int = 8

    def __post_init__(self) -> None:
        if self.quant_step < 1:
            raise CodecError("quant_step must be at least 1")
        if not 1 <= self.search_range <= 64:
            raise CodecError("search_range must be in [1, 64]")
        if not 1 <= self.ref_window <= 16:
            raise CodecError("ref_window must be in [1, 16]")


@dataclass(frozen=True)
class BlockDecision:
    """Coding choice for one macroblock."""

    mode: int
    ref_distance: int = 0          # t - tau, at least 1 for INTER and SKIP
    mv: tuple[int, int] = (0, 0)   # (dx, dy) content displacement
    intra_base: int = 128          # flat predictor level, INTRA only

    def __post_init__(self) -> None:
        if self.mode not in (MODE_INTRA, MODE_INTER, MODE_SKIP):
            raise CodecError(f"unknown mode {self.mode}")
        if self.mode == MODE_INTRA and self.ref_distance != 0:
            raise CodecError("intra blocks carry no reference")
        if self.mode == MODE_INTRA and not 0 <= self.intra_base <= 255:
            raise CodecError("intra base level must fit in 8 bits")
        if self.mode in (MODE_INTER, MODE_SKIP) and self.ref_distance < 1:
            raise CodecError("inter and skip blocks need a reference distance >= 1")
        if self.mode == MODE_SKIP and self.mv != (0, 0):
            raise CodecError("skip implies zero motion")


# ---------------------------------------------------------------------------
# transforms and quantization
# ---------------------------------------------------------------------------

def _dct_matrix(n: int = 4) -> np.ndarray:
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * x + 1) * k / (2 * n))
    m[0, :] = np.sqrt(1.0 / n)
    return m


_DCT4 = _dct_matrix(4)


def _tiles(blocks: np.ndarray) -> np.ndarray:
    # (N, 16, 16) -> (N*16, 4, 4), tile (bi, bj) of block n at n*16 + bi*4 + bj
    n = blocks.shape[0]
    return (blocks.reshape(n, 4, 4, 4, 4)
                  .transpose(0, 1, 3, 2, 4)
                  .reshape(n * 16, 4, 4))


def _untile(tiles: np.ndarray) -> np.ndarray:
    n = tiles.shape[0] // 16
    return (tiles.reshape(n, 4, 4, 4, 4)
                 .transpose(0, 1, 3, 2, 4)
                 .reshape(n, 16, 16))


def dct16(blocks: np.ndarray) -> np.ndarray:
    """Tile-wise 4x4 DCT of (N, 16, 16) blocks; output keeps the tile layout."""
    t = _tiles(np.asarray(blocks, dtype=np.float64))
    return _untile(_DCT4 @ t @ _DCT4.T)


def idct16(coeffs: np.ndarray) -> np.ndarray:
    t = _tiles(np.asarray(coeffs, dtype=np.float64))
    return _untile(_DCT4.T @ t @ _DCT4)


def quantize(coeffs: np.ndarray, step: int) -> np.ndarray:
    return np.rint(np.asarray(coeffs, dtype=np.float64) / step).astype(np.int32)


def dequantize(qcoeffs: np.ndarray, step: int) -> np.ndarray:
    return np.asarray(qcoeffs, dtype=np.float64) * step


def apply_residual(pred: np.ndarray, qcoeffs: np.ndarray, step: int) -> np.ndarray:
    """Reconstruct blocks from predictions and quantized coefficients."""
    pred = np.asarray(pred, dtype=np.float64)
    single = pred.ndim == 2
    if single:
        pred = pred[None]
        qcoeffs = np.asarray(qcoeffs)[None]
    res = idct16(dequantize(qcoeffs, step))
    rec = np.clip(np.rint(pred + res), 0, 255).astype(np.uint8)
    return rec[0] if single else rec


# ---------------------------------------------------------------------------
# rate model
# ---------------------------------------------------------------------------

def exp_golomb_signed_bits(values) -> np.ndarray:
    """Code length of the signed exp-Golomb code, elementwise."""
    v = np.asarray(values, dtype=np.int64)
    u = np.where(v > 0, 2 * v - 1, -2 * v)
    floor_log2 = np.frexp((u + 1).astype(np.float64))[1] - 1
    return (2 * floor_log2 + 1).astype(np.int64)


def residual_bits(qcoeffs) -> np.ndarray:
    """Empirical zero-order entropy of quantized coefficients, in whole bits.

    Accepts (..., 16, 16) or (..., 256); returns an int64 array over the
    leading axes (a scalar array for a single block).
    """
    q = np.asarray(qcoeffs, dtype=np.int64)
    if q.shape[-2:] == (MB_SIZE, MB_SIZE):
        q = q.reshape(q.shape[:-2] + (MB_SIZE * MB_SIZE,))
    lead = q.shape[:-1]
    m = q.shape[-1]
    flat = q.reshape(-1, m)
    n = flat.shape[0]
    s = np.sort(flat, axis=1)
    newrun = np.ones((n, m), dtype=bool)
    newrun[:, 1:] = s[:, 1:] != s[:, :-1]
    starts = np.flatnonzero(newrun.ravel())
    lengths = np.diff(np.append(starts, n * m)).astype(np.float64)
    contrib = lengths * (np.log2(float(m)) - np.log2(lengths))
    rows = starts // m
    sums = np.bincount(rows, weights=contrib, minlength=n)
    bits = np.ceil(sums).astype(np.int64)
    return bits.reshape(lead) if lead else bits.reshape(())


def decision_bits(decision: BlockDecision, residual_bit_count: int) -> int:
    """Total rate of one macroblock under the bit accounting model."""
    if decision.mode == MODE_SKIP:
        return SKIP_BITS
    if decision.mode == MODE_INTRA:
        return MODE_BITS + INTRA_BASE_BITS + int(residual_bit_count)
    dx, dy = decision.mv
    mv_bits = int(exp_golomb_signed_bits(np.array([dx, dy])).sum())
    return MODE_BITS + decision.ref_distance + mv_bits + int(residual_bit_count)


# ---------------------------------------------------------------------------
# motion search
# ---------------------------------------------------------------------------

def displacement_order(search_range: int) -> list[tuple[int, int]]:
    """Candidate displacements sorted by the deterministic tie-break key."""
    return sorted(((dx, dy)
                   for dy in range(-search_range, search_range + 1)
                   for dx in range(-search_range, search_range + 1)),
                  key=lambda d: (abs(d[0]) + abs(d[1]), d[1], d[0]))


def motion_search(cur: np.ndarray, refs: np.ndarray, search_range: int
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exhaustive SAD search for every macroblock against every reference.

    cur: (H, W) samples; refs: (R, H, W) stacked reference planes.
    Returns (best_mv, best_sad, zero_sad) with best_mv of shape (R, n_mb, 2)
    as (dx, dy).  Ties resolve to the smallest |dx|+|dy|, then smallest dy,
    then smallest dx.  Displacements whose predictor leaves the frame are
    never selected.
    """
    H, W = cur.shape
    R = refs.shape[0]
    hb, wb = H // MB_SIZE, W // MB_SIZE
    n_mb = hb * wb
    curf = cur.astype(np.float32)
    reff = refs.astype(np.float32)
    big = np.float32(1.0e7)

    disps = displacement_order(search_range)
    shifted = np.empty_like(reff)
    best_sad = np.full((R, n_mb), np.inf)
    best_k = np.zeros((R, n_mb), dtype=np.int32)
    zero_sad = None
    for k, (dx, dy) in enumerate(disps):
        shifted[...] = big
        r0, r1 = max(0, dy), H + min(0, dy)
        c0, c1 = max(0, dx), W + min(0, dx)
        if r0 < r1 and c0 < c1:
            shifted[:, r0:r1, c0:c1] = reff[:, r0 - dy:r1 - dy, c0 - dx:c1 - dx]
        diff = np.abs(curf[None, :, :] - shifted)
        sad = diff.reshape(R, hb, MB_SIZE, wb, MB_SIZE).sum(axis=(2, 4),
                                                            dtype=np.float64)
        sad = sad.reshape(R, n_mb)
        if k == 0:
            zero_sad = sad.copy()
        better = sad < best_sad
        best_sad = np.where(better, sad, best_sad)
        best_k = np.where(better, k, best_k)

    dvec = np.array(disps, dtype=np.int16)
    best_mv = dvec[best_k]
    return best_mv, best_sad, zero_sad


# ---------------------------------------------------------------------------
# candidate construction
# ---------------------------------------------------------------------------

def plane_blocks(plane: np.ndarray) -> np.ndarray:
    """Raster-order (n_mb, 16, 16) block view of a plane (copies)."""
    h, w = plane.shape
    hb, wb = h // MB_SIZE, w // MB_SIZE
    return (plane.reshape(hb, MB_SIZE, wb, MB_SIZE)
                 .transpose(0, 2, 1, 3)
                 .reshape(hb * wb, MB_SIZE, MB_SIZE))


def assemble_plane(blocks: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Inverse of plane_blocks: raster-order blocks back into one plane."""
    hb, wb = grid
    return (blocks.reshape(hb, wb, MB_SIZE, MB_SIZE)
                  .transpose(0, 2, 1, 3)
                  .reshape(hb * MB_SIZE, wb * MB_SIZE))


def mb_origins(grid: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    hb, wb = grid
    idx = np.arange(hb * wb)
    return (idx // wb) * MB_SIZE, (idx % wb) * MB_SIZE


@dataclass
class CandidateSet:
    """Per-macroblock INTER and SKIP coding options for one plane.

    Column order fixes the selection tie-break: SKIP first, then for each
    reference distance in increasing order a zero-motion column followed by
    the searched best-motion column.  INTRA is built separately (it needs no
    references) and joins as the final column at selection time.
    """

    mode_col: np.ndarray        # (n_cand,) uint8
    ref_col: np.ndarray         # (n_cand,) int16 reference distance
    mv: np.ndarray              # (n_mb, n_cand, 2) int16 (dx, dy)
    sad: np.ndarray             # (n_mb, n_cand) float64
    bits: np.ndarray            # (n_mb, n_cand) int64
    distortion: np.ndarray      # (n_mb, n_cand) mean-abs reconstruction error
    recon: np.ndarray           # (n_mb, n_cand, 16, 16) uint8
    coeffs: np.ndarray          # (n_mb, n_cand, 16, 16) int32 quantized

    @property
    def n_candidates(self) -> int:
        return self.mode_col.shape[0]

    @property
    def n_mb(self) -> int:
        return self.mv.shape[0]


def code_against_prediction(pred: np.ndarray, orig: np.ndarray, step: int
                            ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Quantize the prediction residual; return (q, recon, rbits, distortion)."""
    pred = np.asarray(pred, dtype=np.float64)
    orig = np.asarray(orig, dtype=np.float64)
    single = pred.ndim == 2
    if single:
        pred, orig = pred[None], orig[None]
    q = quantize(dct16(orig - pred), step)
    recon = apply_residual(pred, q, step)
    rbits = residual_bits(q)
    dist = np.abs(recon.astype(np.float64) - orig).mean(axis=(1, 2))
    if single:
        return q[0], recon[0], rbits.reshape(()), dist[0]
    return q, recon, rbits, dist


def build_inter_candidates(cur: np.ndarray, refs: list[np.ndarray],
                           cfg: CodecConfig) -> CandidateSet:
    """Search and trial-code all INTER and SKIP candidates of one plane.

    refs[d-1] is the reconstructed plane at distance d; the list is already
    limited to the frames available inside the reference window.
    """
    if not refs:
        raise CodecError("inter candidates need at least one reference")
    h, w = cur.shape
    grid = (h // MB_SIZE, w // MB_SIZE)
    n_mb = grid[0] * grid[1]
    n_refs = len(refs)
    n_cand = 1 + 2 * n_refs

    ref_stack = np.stack(refs)
    best_mv, best_sad, zero_sad = motion_search(cur, ref_stack, cfg.search_range)

    mode_col = np.empty(n_cand, dtype=np.uint8)
    ref_col = np.empty(n_cand, dtype=np.int16)
    mv = np.zeros((n_mb, n_cand, 2), dtype=np.int16)
    sad = np.empty((n_mb, n_cand))
    bits = np.empty((n_mb, n_cand), dtype=np.int64)
    distortion = np.empty((n_mb, n_cand))
    recon = np.empty((n_mb, n_cand, MB_SIZE, MB_SIZE), dtype=np.uint8)
    coeffs = np.zeros((n_mb, n_cand, MB_SIZE, MB_SIZE), dtype=np.int32)

    orig_blocks = plane_blocks(cur).astype(np.float64)
    mb_r0, mb_c0 = mb_origins(grid)
    span = np.arange(MB_SIZE)

    # column 0: SKIP
    coloc0 = plane_blocks(refs[0])
    mode_col[0] = MODE_SKIP
    ref_col[0] = 1
    sad[:, 0] = zero_sad[0]
    bits[:, 0] = SKIP_BITS
    recon[:, 0] = coloc0
    distortion[:, 0] = np.abs(coloc0.astype(np.float64) - orig_blocks).mean(axis=(1, 2))

    for d in range(1, n_refs + 1):
        cz, cb = 2 * d - 1, 2 * d
        mode_col[cz] = mode_col[cb] = MODE_INTER
        ref_col[cz] = ref_col[cb] = d
        mv[:, cb, :] = best_mv[d - 1]
        sad[:, cz] = zero_sad[d - 1]
        sad[:, cb] = best_sad[d - 1]

        coloc = plane_blocks(refs[d - 1]).astype(np.float64)
        dxs, dys = best_mv[d - 1, :, 0], best_mv[d - 1, :, 1]
        r_idx = (mb_r0 - dys)[:, None] + span[None, :]
        c_idx = (mb_c0 - dxs)[:, None] + span[None, :]
        searched = refs[d - 1][r_idx[:, :, None], c_idx[:, None, :]].astype(np.float64)

        for col, pred in ((cz, coloc), (cb, searched)):
            q, rec, rbits, dist = code_against_prediction(pred, orig_blocks,
                                                          cfg.quant_step)
            coeffs[:, col] = q
            recon[:, col] = rec
            distortion[:, col] = dist
            mv_bits = exp_golomb_signed_bits(mv[:, col, :]).sum(axis=1)
            bits[:, col] = MODE_BITS + d + mv_bits + rbits

    return CandidateSet(mode_col=mode_col, ref_col=ref_col, mv=mv, sad=sad,
                        bits=bits, distortion=distortion, recon=recon,
                        coeffs=coeffs)


def intra_base_level(orig_block: np.ndarray) -> int:
    """Transmitted flat-predictor level: the rounded block mean, clipped to 8 bits."""
    return int(np.clip(np.rint(np.asarray(orig_block, dtype=np.float64).mean()),
                       0, 255))


def code_intra_block(orig_block: np.ndarray, step: int
                     ) -> tuple[np.ndarray, np.ndarray, int, float, int]:
    """Code one block INTRA; returns (q, recon, bits, distortion, base)."""
    base = intra_base_level(orig_block)
    pred = np.full((MB_SIZE, MB_SIZE), float(base))
    q, rec, rbits, dist = code_against_prediction(pred, orig_block, step)
    return q, rec, MODE_BITS + INTRA_BASE_BITS + int(rbits), float(dist), base


def build_intra_candidates(plane: np.ndarray, step: int
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                      np.ndarray, np.ndarray]:
    """Trial-code every block INTRA; returns (coeffs, recon, bits, distortion, base)."""
    orig_blocks = plane_blocks(plane).astype(np.float64)
    base = np.clip(np.rint(orig_blocks.mean(axis=(1, 2))), 0, 255).astype(np.int16)
    pred = np.broadcast_to(base.astype(np.float64)[:, None, None],
                           orig_blocks.shape)
    q, rec, rbits, dist = code_against_prediction(pred, orig_blocks, step)
    return q, rec, MODE_BITS + INTRA_BASE_BITS + rbits, dist, base


def candidate_search(plane: np.ndarray, mb_index: int, refs: list[np.ndarray],
                     cfg: CodecConfig) -> list[dict]:
    """Candidate list for a single macroblock, in selection order.

    Convenience wrapper over the batched path; the INTRA candidate comes last.
    """
    out = []
    if refs:
        cset = build_inter_candidates(plane, refs[:cfg.ref_window], cfg)
        for c in range(cset.n_candidates):
            out.append({
                "decision": BlockDecision(int(cset.mode_col[c]),
                                          int(cset.ref_col[c]),
                                          (int(cset.mv[mb_index, c, 0]),
                                           int(cset.mv[mb_index, c, 1]))),
                "sad": float(cset.sad[mb_index, c]),
                "bits": int(cset.bits[mb_index, c]),
                "distortion": float(cset.distortion[mb_index, c]),
                "recon": cset.recon[mb_index, c],
                "coeffs": cset.coeffs[mb_index, c],
            })
    orig = plane_blocks(plane)[mb_index].astype(np.float64)
    q, rec, ibits, idist, base = code_intra_block(orig, cfg.quant_step)
    out.append({
        "decision": BlockDecision(MODE_INTRA, intra_base=base),
        "sad": float(np.abs(orig - float(base)).sum()),
        "bits": ibits,
        "distortion": idist,
        "recon": rec,
        "coeffs": q,
    })
    return out


# ---------------------------------------------------------------------------
# encoded frames and decoding
# ---------------------------------------------------------------------------

@dataclass
class EncodedPlane:
    """Coded representation of one plane: per-MB decisions plus coefficients."""

    modes: np.ndarray       # (n_mb,) uint8
    ref_dist: np.ndarray    # (n_mb,) uint8, 0 for intra
    mv: np.ndarray          # (n_mb, 2) int16 (dx, dy); (base, 0) for intra
    coeffs: np.ndarray      # (n_mb, 16, 16) int32, tiled quantized coefficients
    quant_step: int
    grid: tuple[int, int]

    def decision(self, m: int) -> BlockDecision:
        mode = int(self.modes[m])
        if mode == MODE_INTRA:
            return BlockDecision(MODE_INTRA, intra_base=int(self.mv[m, 0]))
        return BlockDecision(mode, int(self.ref_dist[m]),
                             (int(self.mv[m, 0]), int(self.mv[m, 1])))


def conceal_block(prev_plane: np.ndarray | None, mb_r: int, mb_c: int) -> np.ndarray:
    """Temporal copy concealment; mid-gray for a first frame without history."""
    if prev_plane is None:
        return np.full((MB_SIZE, MB_SIZE), 128, dtype=np.uint8)
    r0, c0 = mb_r * MB_SIZE, mb_c * MB_SIZE
    return prev_plane[r0:r0 + MB_SIZE, c0:c0 + MB_SIZE].copy()


def reconstruct_block(decision: BlockDecision, qcoeffs: np.ndarray,
                      refs: list[np.ndarray], step: int,
                      mb_r: int, mb_c: int) -> np.ndarray:
    """Rebuild one block from its decision, validating the reference access."""
    r0, c0 = mb_r * MB_SIZE, mb_c * MB_SIZE
    if decision.mode == MODE_INTRA:
        pred = np.full((MB_SIZE, MB_SIZE), float(decision.intra_base))
        return apply_residual(pred, qcoeffs, step)
    if decision.ref_distance > len(refs):
        raise CodecError(
            f"reference distance {decision.ref_distance} outside the buffer "
            f"({len(refs)} planes)")
    ref = refs[decision.ref_distance - 1]
    if decision.mode == MODE_SKIP:
        return ref[r0:r0 + MB_SIZE, c0:c0 + MB_SIZE].copy()
    dx, dy = decision.mv
    pr, pc = r0 - dy, c0 - dx
    h, w = ref.shape
    if pr < 0 or pc < 0 or pr + MB_SIZE > h or pc + MB_SIZE > w:
        raise CodecError(f"motion vector {decision.mv} leaves the frame")
    pred = ref[pr:pr + MB_SIZE, pc:pc + MB_SIZE].astype(np.float64)
    return apply_residual(pred, qcoeffs, step)


def decode_plane(enc: EncodedPlane, refs: list[np.ndarray],
                 conceal_source: np.ndarray | None,
                 received: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode one plane in raster order, concealing lost macroblocks.

    refs[d-1] is the decoder's own reconstruction at distance d; lost blocks
    copy from `conceal_source` (the previous decoded frame) or fill with 128
    when there is none.  Returns (plane, concealed_mask).
    """
    hb, wb = enc.grid
    out = np.empty((hb * MB_SIZE, wb * MB_SIZE), dtype=np.uint8)
    concealed = np.zeros(hb * wb, dtype=bool)
    for m in range(hb * wb):
        mb_r, mb_c = divmod(m, wb)
        r0, c0 = mb_r * MB_SIZE, mb_c * MB_SIZE
        if not received[m]:
            block = conceal_block(conceal_source, mb_r, mb_c)
            concealed[m] = True
        else:
            block = reconstruct_block(enc.decision(m), enc.coeffs[m], refs,
                                      enc.quant_step, mb_r, mb_c)
        out[r0:r0 + MB_SIZE, c0:c0 + MB_SIZE] = block
    return out, concealed


# ---------------------------------------------------------------------------
# bitstream container
# ---------------------------------------------------------------------------
#
# Field order of the container (all little endian):
#   magic           4 bytes  b"FVBS"
#   version         u8
#   width, height   u16, u16
#   frame_count     u16
#   quant_step      u16      (texture planes)
#   depth_step      u16      (depth planes)
#   per frame, planes in the order (view 0 texture, view 0 depth,
#   view 1 texture, view 1 depth); per plane, macroblocks in raster order:
#     mode          u8
#     ref_dist      u8
#     mvx, mvy      i16, i16  (for INTRA the mvx slot carries the base level)
#     coefficients  256 x i16 (omitted for SKIP)

PLANE_ORDER = ((0, Component.TEXTURE), (0, Component.DEPTH),
               (1, Component.TEXTURE), (1, Component.DEPTH))


def serialize_stream(width: int, height: int, quant_step: int,
                     frames: list[dict[tuple[int, Component], EncodedPlane]],
                     depth_quant_step: int | None = None) -> bytes:
    buf = bytearray()
    buf += STREAM_MAGIC
    if depth_quant_step is None:
        depth_quant_step = quant_step
    buf += struct.pack("<BHHHHH", STREAM_VERSION, width, height, len(frames),
                       quant_step, depth_quant_step)
    for frame in frames:
        for key in PLANE_ORDER:
            enc = frame[key]
            n_mb = enc.modes.shape[0]
            for m in range(n_mb):
                buf += struct.pack("<BBhh", int(enc.modes[m]), int(enc.ref_dist[m]),
                                   int(enc.mv[m, 0]), int(enc.mv[m, 1]))
                if enc.modes[m] != MODE_SKIP:
                    buf += enc.coeffs[m].astype("<i2").tobytes()
    return bytes(buf)


def parse_stream(data: bytes
                 ) -> tuple[int, int, int, list[dict[tuple[int, Component], EncodedPlane]]]:
    if data[:4] != STREAM_MAGIC:
        raise CodecError("bad stream magic")
    version, width, height, frame_count, quant_step, depth_quant_step = \
        struct.unpack_from("<BHHHHH", data, 4)
    if version != STREAM_VERSION:
        raise CodecError(f"unsupported stream version {version}")
    pos = 4 + struct.calcsize("<BHHHHH")
    grid = (height // MB_SIZE, width // MB_SIZE)
    n_mb = grid[0] * grid[1]
    frames = []
    for _ in range(frame_count):
        frame: dict[tuple[int, Component], EncodedPlane] = {}
        for key in PLANE_ORDER:
            modes = np.empty(n_mb, dtype=np.uint8)
            ref_dist = np.empty(n_mb, dtype=np.uint8)
            mv = np.empty((n_mb, 2), dtype=np.int16)
            coeffs = np.zeros((n_mb, MB_SIZE, MB_SIZE), dtype=np.int32)
            for m in range(n_mb):
                mode, rd, mvx, mvy = struct.unpack_from("<BBhh", data, pos)
                pos += struct.calcsize("<BBhh")
                modes[m], ref_dist[m] = mode, rd
                mv[m] = (mvx, mvy)
                if mode != MODE_SKIP:
                    tile = np.frombuffer(data, dtype="<i2", count=256, offset=pos)
                    coeffs[m] = tile.reshape(MB_SIZE, MB_SIZE).astype(np.int32)
                    pos += 512
            step = depth_quant_step if key[1] == Component.DEPTH else quant_step
            frame[key] = EncodedPlane(modes=modes, ref_dist=ref_dist, mv=mv,
                                      coeffs=coeffs, quant_step=step,
                                      grid=grid)
        frames.append(frame)
    if pos != len(data):
        raise CodecError("trailing bytes in stream")
    return width, height, quant_step, frames
