"""Mesh occlusion synthesis: binary line patterns, Gaussian smoothing, and
the transparency blend that corrupts a clean face into a meshface.

Polarity is fixed throughout: mask value 1 means unoccluded, occluding
lines sit near 0. Wherever the smoothed mesh M equals 1 exactly, the blend
returns the clean pixel bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .imageops import check_image
from .rng import SeededRng


@dataclass(frozen=True)
class MeshParams:
    """Knobs of the occlusion factory.

    freq_range is in cycles per image width; line_thresh sets the width of
    the zero-crossing band that becomes an occluding line; beta_range is
    the transparency band (strictly inside (0,1)).
    """

    num_waves: int = 3
    freq_range: tuple[float, float] = (2.0, 6.0)
    line_thresh: float = 0.12
    blur_sigma_range: tuple[float, float] = (0.5, 1.5)
    beta_range: tuple[float, float] = (0.3, 0.8)

    def __post_init__(self):
        if self.num_waves < 1:
            raise ValueError("num_waves must be >= 1")
        for name in ("freq_range", "blur_sigma_range", "beta_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} is empty: {(lo, hi)}")
        if not (0.0 < self.line_thresh < 1.0):
            raise ValueError("line_thresh must lie in (0, 1)")
        lo, hi = self.beta_range
        if not (0.0 < lo and hi < 1.0):
            raise ValueError("beta_range must be strictly inside (0, 1)")

    def to_dict(self) -> dict:
        return {
            "num_waves": self.num_waves,
            "freq_range": list(self.freq_range),
            "line_thresh": self.line_thresh,
            "blur_sigma_range": list(self.blur_sigma_range),
            "beta_range": list(self.beta_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeshParams":
        known = {"num_waves", "freq_range", "line_thresh", "blur_sigma_range", "beta_range"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown mesh config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for k in ("freq_range", "blur_sigma_range", "beta_range"):
            if k in kwargs:
                kwargs[k] = tuple(kwargs[k])
        return cls(**kwargs)


@dataclass(frozen=True)
class BlendResult:
    """One synthesized corruption: the meshface, its mesh, and the drawn beta."""

    meshface: np.ndarray   # (H, W, C) float32
    mesh: np.ndarray       # (H, W, 1) float32, 1 = unoccluded
    beta: float


def gen_binary_pattern(params: MeshParams, rng: SeededRng, size: int) -> np.ndarray:
    """Random thin-line mask in {0,1}: zero-crossing bands of a superposition
    of num_waves random sinusoids become the occluding lines (value 0)."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    amps = rng.uniform(0.5, 1.0, size=params.num_waves)
    freqs = rng.uniform(params.freq_range[0], params.freq_range[1], size=params.num_waves)
    thetas = rng.uniform(0.0, np.pi, size=params.num_waves)
    phases = rng.uniform(0.0, 2 * np.pi, size=params.num_waves)

    ys, xs = np.mgrid[0:size, 0:size]
    u = xs.astype(np.float64) / size
    v = ys.astype(np.float64) / size
    fieldv = np.zeros((size, size), dtype=np.float64)
    for a, f, th, ph in zip(amps, freqs, thetas, phases):
        fieldv += a * np.sin(2 * np.pi * f * (u * np.cos(th) + v * np.sin(th)) + ph)
    return (np.abs(fieldv) >= params.line_thresh).astype(np.float32)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def smooth(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicated edges; sigma=0 is identity.

    Computed as 1 - blur(1 - mask) so pixels farther than the kernel radius
    from any line keep the exact value 1.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    m = mask[:, :, 0] if mask.ndim == 3 else mask
    if sigma == 0:
        out = m.astype(np.float32)
    else:
        k = gaussian_kernel(sigma)
        inv = (1.0 - m).astype(np.float64)
        inv = correlate1d(inv, k, axis=0, mode="nearest")
        inv = correlate1d(inv, k, axis=1, mode="nearest")
        out = np.maximum(1.0 - inv, 0.0).astype(np.float32)
    return out[:, :, None]


def blend(clean: np.ndarray, mesh: np.ndarray, beta: float) -> np.ndarray:
    """Transparency blend: x = beta*M + (1-beta)*y where M < 1, x = y where M = 1."""
    check_image(clean)
    if not (0.0 <= beta <= 1.0):
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    m = mesh if mesh.ndim == 3 else mesh[:, :, None]
    if m.shape[:2] != clean.shape[:2] or m.shape[2] != 1:
        raise ValueError(f"mesh shape {m.shape} does not match clean {clean.shape}")
    b = np.float32(beta)
    mixed = b * m + (np.float32(1.0) - b) * clean
    return np.where(m < 1.0, mixed, clean).astype(np.float32)


def synth_meshface(clean: np.ndarray, params: MeshParams, rng: SeededRng) -> BlendResult:
    """Full corruption pipeline: pattern -> smooth(sigma~range) -> blend(beta~range)."""
    check_image(clean)
    size = clean.shape[0]
    if clean.shape[1] != size:
        raise ValueError("clean face must be square")
    binary = gen_binary_pattern(params, rng, size)
    sigma = float(rng.uniform(*params.blur_sigma_range))
    beta = float(rng.uniform(*params.beta_range))
    mesh = smooth(binary, sigma)
    meshface = blend(clean, mesh, beta)
    return BlendResult(meshface=meshface, mesh=mesh, beta=beta)
