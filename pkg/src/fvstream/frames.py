"""Frame containers, 8-bit plane I/O and quality metrics.

Planes are stored as numpy uint8 arrays of shape (height, width) with both
dimensions positive multiples of the macroblock size.  Texture planes hold
luma intensities, disparity planes hold per-pixel horizontal shifts at unit
baseline (the disparity scale factor is applied at synthesis time).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

MB_SIZE = 16
PSNR_CAP_DB = 99.0

PLANE_FORMATS = ("pgm", "yuv420")


class PlaneError(ValueError):
    """Malformed plane data or plane file."""


def _validated_samples(samples) -> np.ndarray:
    arr = np.asarray(samples)
    if arr.ndim != 2:
        raise PlaneError(f"plane must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    if h <= 0 or w <= 0 or h % MB_SIZE or w % MB_SIZE:
        raise PlaneError(
            f"plane dimensions must be positive multiples of {MB_SIZE}, got {w}x{h}"
        )
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise PlaneError(f"plane samples must be integers, got dtype {arr.dtype}")
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise PlaneError("plane samples outside [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


@dataclass(eq=False)
class FramePlane:
    """One 8-bit sample grid, macroblock aligned."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        self.samples = _validated_samples(self.samples)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def mb_grid(self) -> tuple[int, int]:
        """(rows, cols) of the macroblock grid."""
        return self.samples.shape[0] // MB_SIZE, self.samples.shape[1] // MB_SIZE

    def copy(self) -> "FramePlane":
        return FramePlane(self.samples.copy())

    def same_as(self, other: "FramePlane") -> bool:
        return np.array_equal(self.samples, other.samples)


@dataclass(eq=False)
class ViewFrame:
    """Texture plus aligned disparity for one captured view at one instant."""

    view_id: int
    frame_index: int
    texture: FramePlane
    disparity: FramePlane

    def __post_init__(self) -> None:
        if self.view_id not in (0, 1):
            raise ValueError(f"view_id must be 0 or 1, got {self.view_id}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        if self.texture.samples.shape != self.disparity.samples.shape:
            raise ValueError(
                "texture and disparity dimensions differ: "
                f"{self.texture.samples.shape} vs {self.disparity.samples.shape}"
            )


def _as_samples(plane) -> np.ndarray:
    if isinstance(plane, FramePlane):
        return plane.samples
    return np.asarray(plane)


def mean_abs_error(a, b) -> float:
    x = _as_samples(a).astype(np.float64)
    y = _as_samples(b).astype(np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return float(np.mean(np.abs(x - y)))


def mse(a, b) -> float:
    x = _as_samples(a).astype(np.float64)
    y = _as_samples(b).astype(np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return float(np.mean((x - y) ** 2))


def psnr(a, b, cap_db: float = PSNR_CAP_DB) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit planes, capped for identical input."""
    err = mse(a, b)
    if err <= 0.0:
        return cap_db
    return min(cap_db, 10.0 * np.log10(255.0 * 255.0 / err))


@dataclass
class QualityReport:
    """Per-frame fidelity of a synthesized sequence against its reference."""

    frame_psnr: list[float] = field(default_factory=list)
    frame_mae: list[float] = field(default_factory=list)
    cap_db: float = PSNR_CAP_DB

    @classmethod
    def from_sequences(cls, reference, test, cap_db: float = PSNR_CAP_DB) -> "QualityReport":
        if len(reference) != len(test):
            raise ValueError("sequence lengths differ")
        rep = cls(cap_db=cap_db)
        for ref, out in zip(reference, test):
            rep.add_frame(ref, out)
        return rep

    def add_frame(self, reference, test) -> None:
        self.frame_psnr.append(psnr(reference, test, self.cap_db))
        self.frame_mae.append(mean_abs_error(reference, test))

    @property
    def average_psnr(self) -> float:
        return float(np.mean(self.frame_psnr)) if self.frame_psnr else 0.0

    @property
    def average_mae(self) -> float:
        return float(np.mean(self.frame_mae)) if self.frame_mae else 0.0


# ---------------------------------------------------------------------------
# plane file I/O
# ---------------------------------------------------------------------------

def save_pgm(path, plane) -> None:
    """Write a plane as binary PGM (P5, maxval 255)."""
    arr = _as_samples(plane)
    if arr.dtype != np.uint8:
        arr = _validated_samples(arr)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    # Tokenizer for the PGM header: whitespace separated fields, '#' comments
    # run to end of line.
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise PlaneError("truncated PGM header")
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PlaneError("truncated PGM comment")
            pos = nl + 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    return tokens, pos


def load_pgm(path) -> FramePlane:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = _read_pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise PlaneError(f"not a binary PGM file: {path}")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise PlaneError(f"bad PGM header in {path}") from exc
    if maxval != 255:
        raise PlaneError(f"unsupported PGM maxval {maxval}, expected 255")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos:pos + w * h]
    if len(payload) != w * h:
        raise PlaneError(f"PGM payload truncated in {path}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return FramePlane(arr.copy())


def load_yuv420_luma(path, width: int, height: int, frame_index: int = 0) -> FramePlane:
    """Read the luma plane of one frame from a raw planar YUV 4:2:0 file."""
    frame_bytes = width * height * 3 // 2
    offset = frame_index * frame_bytes
    size = os.path.getsize(path)
    if offset + width * height > size:
        raise PlaneError(
            f"YUV file too short for frame {frame_index} at {width}x{height}"
        )
    with open(path, "rb") as fh:
        fh.seek(offset)
        payload = fh.read(width * height)
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return FramePlane(arr.copy())


def save_yuv420_luma(path, plane, append: bool = False) -> None:
    """Write a plane as one YUV 4:2:0 frame with neutral chroma."""
    arr = _as_samples(plane)
    h, w = arr.shape
    chroma = np.full((h // 2, w // 2), 128, dtype=np.uint8)
    mode = "ab" if append else "wb"
    with open(path, mode) as fh:
        fh.write(arr.astype(np.uint8).tobytes())
        fh.write(chroma.tobytes())
        fh.write(chroma.tobytes())


def load_plane(path, fmt: str = "pgm", width: int | None = None,
               height: int | None = None, frame_index: int = 0) -> FramePlane:
    if fmt == "pgm":
        return load_pgm(path)
    if fmt == "yuv420":
        if width is None or height is None:
            raise PlaneError("yuv420 input needs explicit width and height")
        return load_yuv420_luma(path, width, height, frame_index)
    raise PlaneError(f"unknown plane format {fmt!r}, expected one of {PLANE_FORMATS}")


def save_plane(path, plane, fmt: str = "pgm") -> None:
    if fmt == "pgm":
        save_pgm(path, plane)
    elif fmt == "yuv420":
        save_yuv420_luma(path, plane)
    else:
        raise PlaneError(f"unknown plane format {fmt!r}, expected one of {PLANE_FORMATS}")
