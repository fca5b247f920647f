"""Image representation, PNG I/O, eye alignment, augmentation and range maps.

Repo-wide image convention: float32 numpy arrays of shape (H, W, C) with
C in {1, 3} and every value in [0, 1]. Coordinates are (x, y) = (column,
row) with pixel centers on the integer grid. Single-channel occlusion maps
share the same layout with C = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .rng import SeededRng

# Canonical eye targets as fractions of the output size: left eye at
# (0.315*S, 0.40*S), right eye at (0.685*S, 0.40*S).
CANONICAL_LEFT_EYE = (0.315, 0.40)
CANONICAL_RIGHT_EYE = (0.685, 0.40)


@dataclass(frozen=True)
class EyeLandmarks:
    """Eye centers in source-image pixel coordinates (x, y)."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]


@dataclass(frozen=True)
class AugmentParams:
    """One drawn augmentation: mirror decision plus crop origin (row, col)."""

    mirror: bool
    top: int
    left: int
    crop: int


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the (H, W, C) float [0,1] convention, returning the array."""
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, C) with C in {{1, 3}}, got shape {img.shape}")
    if img.dtype != np.float32:
        raise ValueError(f"expected float32 image, got {img.dtype}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG as a float32 (H, W, C) array; pixel p maps to p/255."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ValueError(f"unsupported format {im.format!r} for {path}; expected PNG")
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)[:, :, None]
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.uint8)
        elif im.mode in ("I;16", "I;16B", "I"):
            raise ValueError(f"unsupported bit depth in {path}; expected 8-bit")
        else:
            raise ValueError(f"unsupported PNG mode {im.mode!r} for {path}")
    return (arr.astype(np.float32)) / np.float32(255.0)


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Write as 8-bit PNG, quantizing with round(v*255)."""
    check_image(img)
    q = np.rint(img.astype(np.float64) * 255.0).astype(np.uint8)
    if q.shape[2] == 1:
        pil = Image.fromarray(q[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(q, mode="RGB")
    path = Path(path)
    try:
        pil.save(path, format="PNG")
    except OSError as e:
        raise OSError(f"cannot write image to {path}: {e}") from e


def to_model_range(img: np.ndarray) -> np.ndarray:
    """Affine map [0,1] -> [-1,1] (matches tanh-headed decoders)."""
    return img.astype(np.float32) * np.float32(2.0) - np.float32(1.0)


def from_model_range(t: np.ndarray) -> np.ndarray:
    """Inverse of to_model_range with clamping back into [0,1]."""
    return np.clip((np.asarray(t, dtype=np.float32) + np.float32(1.0)) / np.float32(2.0), 0.0, 1.0)


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: str = "zero") -> np.ndarray:
    """Sample img at fractional (x, y) positions.

    fill="zero": out-of-bounds taps contribute 0. fill="edge": taps clamp to
    the border (weights then sum to 1, preserving constants).
    """
    h, w = img.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0).astype(np.float32)[..., None]
    fy = (ys - y0).astype(np.float32)[..., None]

    def tap(yi, xi):
        if fill == "edge":
            yc = np.clip(yi, 0, h - 1)
            xc = np.clip(xi, 0, w - 1)
            return img[yc, xc]
        valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        yc = np.clip(yi, 0, h - 1)
        xc = np.clip(xi, 0, w - 1)
        return np.where(valid[..., None], img[yc, xc], np.float32(0.0))

    top = tap(y0, x0) * (1 - fx) + tap(y0, x0 + 1) * fx
    bot = tap(y0 + 1, x0) * (1 - fx) + tap(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with edge-clamped taps (constant images stay constant)."""
    h, w = img.shape[:2]
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_sample(img, gx, gy, fill="edge")


def solve_similarity(src: tuple[tuple[float, float], tuple[float, float]],
                     dst: tuple[tuple[float, float], tuple[float, float]]) -> np.ndarray:
    """Similarity transform (rotation+scale+translation) mapping two source
    points exactly onto two destination points. Returns a 2x3 matrix A with
    [x', y']^T = A @ [x, y, 1]^T."""
    p0 = complex(*src[0])
    p1 = complex(*src[1])
    q0 = complex(*dst[0])
    q1 = complex(*dst[1])
    if p0 == p1:
        raise ValueError("source points coincide; cannot solve similarity")
    m = (q1 - q0) / (p1 - p0)  # scale * e^{i theta}
    t = q0 - m * p0
    return np.array([[m.real, -m.imag, t.real],
                     [m.imag, m.real, t.imag]], dtype=np.float64)


def invert_similarity(A: np.ndarray) -> np.ndarray:
    m = complex(A[0, 0], A[1, 0])
    t = complex(A[0, 2], A[1, 2])
    mi = 1.0 / m
    ti = -mi * t
    return np.array([[mi.real, -mi.imag, ti.real],
                     [mi.imag, mi.real, ti.imag]], dtype=np.float64)


def canonical_eye_positions(out_size: int) -> tuple[tuple[float, float], tuple[float, float]]:
    s = float(out_size)
    return ((CANONICAL_LEFT_EYE[0] * s, CANONICAL_LEFT_EYE[1] * s),
            (CANONICAL_RIGHT_EYE[0] * s, CANONICAL_RIGHT_EYE[1] * s))


def align_by_eyes(img: np.ndarray, lm: EyeLandmarks, out_size: int) -> np.ndarray:
    """Warp so the eyes land on canonical positions; bilinear, zero fill."""
    check_image(img)
    if out_size < 8:
        raise ValueError(f"out_size must be >= 8, got {out_size}")
    if tuple(lm.left_eye) == tuple(lm.right_eye):
        raise ValueError("eye landmarks coincide")
    left, right = canonical_eye_positions(out_size)
    A = solve_similarity((tuple(lm.left_eye), tuple(lm.right_eye)), (left, right))
    Ainv = invert_similarity(A)
    u, v = np.meshgrid(np.arange(out_size, dtype=np.float64),
                       np.arange(out_size, dtype=np.float64))
    xs = Ainv[0, 0] * u + Ainv[0, 1] * v + Ainv[0, 2]
    ys = Ainv[1, 0] * u + Ainv[1, 1] * v + Ainv[1, 2]
    out = bilinear_sample(img, xs, ys, fill="zero")
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def draw_augment_params(height: int, width: int, crop: int, rng: SeededRng) -> AugmentParams:
    """Draw one mirror/crop decision; offsets uniform over the valid range."""
    if crop > min(height, width):
        raise ValueError(f"crop {crop} larger than image {height}x{width}")
    mirror = bool(rng.random() < 0.5)
    top = int(rng.integers(0, height - crop + 1))
    left = int(rng.integers(0, width - crop + 1))
    return AugmentParams(mirror=mirror, top=top, left=left, crop=crop)


def apply_augment(img: np.ndarray, params: AugmentParams) -> np.ndarray:
    """Apply a drawn mirror+crop to one image."""
    out = img[:, ::-1, :] if params.mirror else img
    c = params.crop
    return np.ascontiguousarray(out[params.top:params.top + c, params.left:params.left + c, :])


def augment(img: np.ndarray, crop: int, rng: SeededRng) -> np.ndarray:
    """Random horizontal mirror (p=0.5) then a random crop to crop x crop."""
    check_image(img)
    params = draw_augment_params(img.shape[0], img.shape[1], crop, rng)
    return apply_augment(img, params)


def augment_triple(x: np.ndarray, y: np.ndarray, z: np.ndarray, crop: int,
                   rng: SeededRng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Augment a synthesized (meshface, clean, mesh) triple with ONE shared
    mirror/crop draw, preserving their pixel correspondence."""
    if x.shape[:2] != y.shape[:2] or x.shape[:2] != z.shape[:2]:
        raise ValueError("triple members must share height/width")
    params = draw_augment_params(x.shape[0], x.shape[1], crop, rng)
    return apply_augment(x, params), apply_augment(y, params), apply_augment(z, params)


def write_landmark_sidecar(path: str | Path, entries: list[tuple[str, EyeLandmarks]]) -> None:
    """One line per image: `<filename> <lx> <ly> <rx> <ry>` (pixels, floats)."""
    lines = []
    for name, lm in entries:
        lx, ly = lm.left_eye
        rx, ry = lm.right_eye
        lines.append(f"{name} {lx:.3f} {ly:.3f} {rx:.3f} {ry:.3f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_landmark_sidecar(path: str | Path) -> dict[str, EyeLandmarks]:
    out: dict[str, EyeLandmarks] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"bad landmark line: {line!r}")
        name, lx, ly, rx, ry = parts
        out[name] = EyeLandmarks((float(lx), float(ly)), (float(rx), float(ry)))
    return out
