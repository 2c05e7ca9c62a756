"""Hand-rolled reference computations for the derived behaviour checks.

Everything here sticks to the plainest formulation available (explicit
loops, Counter-based entropy, Fraction arithmetic) so a disagreement with
the vectorized implementations actually means something.
"""
from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import numpy as np

from fvstream.codec import MODE_INTRA

MB = 16


# --- rate model -------------------------------------------------------------

def exp_golomb_signed_len(v: int) -> int:
    """Signed order-0 exp-Golomb code length."""
    u = 2 * v - 1 if v > 0 else -2 * v
    return 2 * (u + 1).bit_length() - 1


def entropy_bits(symbols) -> int:
    """Ceil of the zero-order empirical entropy of the symbols, in bits."""
    syms = [int(s) for s in symbols]
    n = len(syms)
    total = 0.0
    for c in Counter(syms).values():
        total += c * (math.log2(n) - math.log2(c))
    # tiny slack so exact power-of-two distributions do not round up
    return math.ceil(total - 1e-9)


def entropy_exact(symbols) -> float:
    syms = [int(s) for s in symbols]
    n = len(syms)
    return sum(c * (math.log2(n) - math.log2(c)) for c in Counter(syms).values())


# --- motion search ----------------------------------------------------------

def naive_best_mv(cur_block, ref_plane, top: int, left: int, search_range: int):
    """Exhaustive full-overlap SAD search, ties by (|dx|+|dy|, dy, dx).

    Returns ((dx, dy), sad) with the predictor taken at (top-dy, left-dx).
    """
    h, w = ref_plane.shape
    cur = np.asarray(cur_block, dtype=np.int64)
    ref = np.asarray(ref_plane, dtype=np.int64)
    best_key = None
    best = None
    for dy in range(-search_range, search_range + 1):
        for dx in range(-search_range, search_range + 1):
            pr, pc = top - dy, left - dx
            if pr < 0 or pc < 0 or pr + MB > h or pc + MB > w:
                continue
            sad = int(np.abs(cur - ref[pr:pr + MB, pc:pc + MB]).sum())
            key = (sad, abs(dx) + abs(dy), dy, dx)
            if best_key is None or key < best_key:
                best_key, best = key, ((dx, dy), sad)
    return best


# --- expected-error recursion -----------------------------------------------

def footprint_weights(mb_index: int, mv, grid) -> dict[int, float]:
    """Per-pixel count of where a block's predictor lands, as fractions."""
    hb, wb = grid
    r0 = (mb_index // wb) * MB
    c0 = (mb_index % wb) * MB
    dx, dy = int(mv[0]), int(mv[1])
    counts: Counter = Counter()
    for i in range(MB):
        for j in range(MB):
            pr, pc = r0 + i - dy, c0 + j - dx
            if not (0 <= pr < hb * MB and 0 <= pc < wb * MB):
                raise ValueError("predictor pixel outside the frame")
            counts[(pr // MB) * wb + (pc // MB)] += 1
    return {m: n / 256.0 for m, n in counts.items()}


def mc_decoder_mean(frames, p_receive: float, gamma: float, grid,
                    trials: int, seed: int, protected_frames=()):
    """Monte-Carlo mean of the receiver error recursion under iid reception.

    frames is a list of (modes, ref_dist, mv, delta) tuples, one per coded
    frame; every block is received independently with probability p_receive,
    except in protected_frames where delivery is certain.  Returns one
    (n_mb,) mean array per frame.
    """
    rng = np.random.default_rng(seed)
    n_mb = grid[0] * grid[1]
    hist: list[np.ndarray] = []
    means = []
    for modes, ref_dist, mv, delta in frames:
        t = len(hist)
        e_plus = np.zeros((trials, n_mb))
        for m in range(n_mb):
            if modes[m] == MODE_INTRA:
                continue
            src = hist[t - int(ref_dist[m])]
            acc = np.zeros(trials)
            for ref_mb, wgt in footprint_weights(m, mv[m], grid).items():
                acc += wgt * src[:, ref_mb]
            e_plus[:, m] = gamma * acc
        prev = hist[-1] if hist else np.zeros((trials, n_mb))
        e_minus = prev + np.asarray(delta, dtype=np.float64)[None, :]
        if t in protected_frames:
            got = np.ones((trials, n_mb), dtype=bool)
        else:
            got = rng.random((trials, n_mb)) < p_receive
        cur = np.where(got, e_plus, e_minus)
        hist.append(cur)
        means.append(cur.mean(axis=0))
    return means


def replay_recursion(frames, receive_prob, gamma: float, grid):
    """Deterministic error recursion for known per-frame delivery odds.

    receive_prob[t] is a per-MB array of delivery probabilities (0/1 for a
    known outcome); returns the state after each frame.
    """
    n_mb = grid[0] * grid[1]
    hist: list[np.ndarray] = []
    for t, (modes, ref_dist, mv, delta) in enumerate(frames):
        e_plus = np.zeros(n_mb)
        for m in range(n_mb):
            if modes[m] == MODE_INTRA:
                continue
            src = hist[t - int(ref_dist[m])]
            e_plus[m] = gamma * sum(w * src[r] for r, w
                                    in footprint_weights(m, mv[m], grid).items())
        prev = hist[-1] if hist else np.zeros(n_mb)
        e_minus = prev + np.asarray(delta, dtype=np.float64)
        p = np.asarray(receive_prob[t], dtype=np.float64)
        hist.append(p * e_plus + (1.0 - p) * e_minus)
    return hist


# --- disparity sensitivity --------------------------------------------------

def brute_profile(own_tex, own_disp, opp_tex, view: int, eta: float,
                  max_dev: int, r: int, c: int) -> np.ndarray:
    """d(eps) for one pixel over eps in [-max_dev, max_dev]."""
    w = own_tex.shape[1]
    sign = -1 if view == 0 else 1
    vals = []
    for eps in range(-max_dev, max_dev + 1):
        shift = int(np.rint((float(own_disp[r, c]) + eps) * eta))
        mapped = min(max(c + sign * shift, 0), w - 1)
        vals.append(abs(float(own_tex[r, c]) - float(opp_tex[r, mapped])))
    return np.array(vals)


def brute_pixel_curvature(profile, threshold: float, max_dev: int) -> float:
    """Parabola coefficient from the nearest threshold crossing, either side."""
    center = max_dev
    b_pos = b_neg = 0
    for i in range(1, max_dev + 1):
        if profile[center + i] >= threshold:
            b_pos = i
            break
    for i in range(1, max_dev + 1):
        if profile[center - i] >= threshold:
            b_neg = i
            break
    sides = [b for b in (b_pos, b_neg) if b > 0]
    if not sides:
        return 0.0
    b = min(sides)
    return 2.0 * threshold / float(b * b)


# --- warping and blending ---------------------------------------------------

def brute_warp(texture, disparity, view: int, position: float, eta: float):
    """Forward warp with explicit z-buffering.

    Larger disparity wins a target pixel; ties go to the smaller source
    column.  Returns (covered, value, disparity, src_col) arrays.
    """
    h, w = texture.shape
    covered = np.zeros((h, w), dtype=bool)
    value = np.zeros((h, w), dtype=np.int64)
    out_disp = np.zeros((h, w), dtype=np.int64)
    src_col = np.full((h, w), -1, dtype=np.int64)
    factor = position * eta if view == 0 else (1.0 - position) * eta
    for i in range(h):
        for j in range(w):
            d = int(disparity[i, j])
            shift = int(np.rint(d * factor))
            tc = j - shift if view == 0 else j + shift
            if not 0 <= tc < w:
                continue
            if covered[i, tc]:
                if d < out_disp[i, tc]:
                    continue
                if d == out_disp[i, tc] and j > src_col[i, tc]:
                    continue
            covered[i, tc] = True
            value[i, tc] = texture[i, j]
            out_disp[i, tc] = d
            src_col[i, tc] = j
    return covered, value, out_disp, src_col


def fraction_weights(d0, d1, c):
    """Exact normalized reliability pair."""
    d0, d1, c = Fraction(d0), Fraction(d1), Fraction(c)
    r0 = d1 + c
    r1 = d0 + c
    s = r0 + r1
    return r0 / s, r1 / s


def brute_correspondence(texture, disparity, view: int, eta: float):
    """Block membership and covering sets from a full-baseline warp."""
    h, w = texture.shape
    wb = w // MB
    n_mb = (h // MB) * wb
    position = 1.0 if view == 0 else 0.0
    covered, _, _, src_col = brute_warp(texture, disparity, view, position, eta)
    counts = Counter()
    pairs = set()
    for i in range(h):
        for tc in range(w):
            if not covered[i, tc]:
                continue
            sc = int(src_col[i, tc])
            smb = (i // MB) * wb + sc // MB
            tmb = (i // MB) * wb + tc // MB
            counts[smb] += 1
            pairs.add((smb, tmb))
    member = np.zeros(n_mb, dtype=bool)
    covering: list[list[int]] = [[] for _ in range(n_mb)]
    for m in range(n_mb):
        member[m] = counts.get(m, 0) >= (MB * MB) // 2
        if member[m]:
            covering[m] = sorted(t for s, t in pairs if s == m)
    return member, covering


# --- rate-distortion selection ----------------------------------------------

def oracle_select(dsrc_cols, chan_cols, bits_cols, lam: float, valid=None):
    """Per-block argmin of (dsrc + chan) + lam * bits, first minimum wins.

    All inputs are (n_mb, n_cols) with the INTRA column last; returns
    (chosen columns, chosen costs) as plain Python lists.
    """
    n_mb, n_cols = np.asarray(dsrc_cols).shape
    chosen, costs = [], []
    for m in range(n_mb):
        best_k, best_cost = None, None
        for k in range(n_cols):
            if valid is not None and not valid[m][k]:
                continue
            cost = (float(dsrc_cols[m][k]) + float(chan_cols[m][k])) \
                + lam * float(bits_cols[m][k])
            if best_cost is None or cost < best_cost:
                best_k, best_cost = k, cost
        if best_k is None:
            best_k, best_cost = 0, float("inf")
        chosen.append(best_k)
        costs.append(best_cost)
    return chosen, costs


def oracle_texture_columns(chan, chan_intra, mode: str, member=None,
                           penalty_fixed=None, cap=None):
    """Channel-term columns for a texture plane, one row per block."""
    n_mb, n_cand = np.asarray(chan).shape
    out = [[0.0] * (n_cand + 1) for _ in range(n_mb)]
    for m in range(n_mb):
        for k in range(n_cand):
            e = float(chan[m][k])
            if mode == "reactive":
                out[m][k] = 0.0
            elif mode == "independent":
                out[m][k] = e
            else:
                if member[m]:
                    out[m][k] = min(e + float(penalty_fixed[m]), float(cap[m]))
                else:
                    out[m][k] = e
        if mode == "reactive":
            out[m][n_cand] = 0.0
        elif mode == "independent":
            out[m][n_cand] = float(chan_intra[m])
        else:
            if member[m]:
                out[m][n_cand] = min(float(chan_intra[m]) + float(penalty_fixed[m]),
                                     float(cap[m]))
            else:
                out[m][n_cand] = float(chan_intra[m])
    return out


def oracle_depth_columns(chan, chan_intra, mode: str, curvature,
                         member=None, error_fixed=None, cap=None):
    """Channel-term columns for a depth plane under the quadratic penalty."""
    n_mb, n_cand = np.asarray(chan).shape
    out = [[0.0] * (n_cand + 1) for _ in range(n_mb)]
    for m in range(n_mb):
        a = float(curvature[m])
        for k in range(n_cand + 1):
            eps = float(chan_intra[m]) if k == n_cand else float(chan[m][k])
            if mode == "reactive":
                out[m][k] = 0.0
            elif mode == "independent":
                out[m][k] = 0.5 * a * eps * eps
            else:
                if member[m]:
                    out[m][k] = min(float(error_fixed[m]) + 0.5 * a * eps * eps,
                                    float(cap[m]))
                else:
                    out[m][k] = 0.5 * a * eps * eps
    return out


def oracle_opposing_cap(member, covering, opp_error_prev, opp_penalty_prev,
                        delta_tex):
    """Worst covering-block fallback value, one entry per block."""
    n_mb = len(member)
    out = []
    for m in range(n_mb):
        if not member[m]:
            out.append(float("inf"))
            continue
        worst = max(float(opp_error_prev[k]) + float(opp_penalty_prev[k])
                    for k in covering[m])
        out.append(worst + float(delta_tex[m]))
    return out
