"""Procedural toy-face corpus.

Stands in for licensed face datasets so the whole pipeline (synthesis,
training, evaluation) runs hermetically. Each identity owns a fixed set of
geometry/albedo parameters derived from its id; per-image nuisance
(illumination gain, small pose jitter) comes from the caller's rng.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .imageops import EyeLandmarks
from .rng import SeededRng, make_rng

_IDENTITY_SALT = 0x7A11FACE


@dataclass(frozen=True)
class ToyFace:
    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    landmarks: EyeLandmarks
    identity_id: int


def _smooth(alpha: np.ndarray) -> np.ndarray:
    return alpha * alpha * (3.0 - 2.0 * alpha)


def _ellipse(gx, gy, cx, cy, rx, ry, rot=0.0, edge=0.15):
    """Soft ellipse mask in [0,1]; edge is the fade band in boundary units."""
    dx = gx - cx
    dy = gy - cy
    if rot != 0.0:
        c, s = np.cos(rot), np.sin(rot)
        dx, dy = c * dx + s * dy, -s * dx + c * dy
    q = np.sqrt((dx / rx) ** 2 + (dy / ry) ** 2)
    return _smooth(np.clip((1.0 + edge - q) / edge, 0.0, 1.0))


def _paint(img: np.ndarray, mask: np.ndarray, color: np.ndarray) -> np.ndarray:
    return img + mask[:, :, None] * (color[None, None, :] - img)


def identity_params(identity_id: int) -> dict:
    """Geometry and albedo for one identity, fixed for all its images."""
    rng = make_rng(_IDENTITY_SALT, "identity", identity_id)
    p = {
        "skin": rng.uniform([0.55, 0.42, 0.34], [0.92, 0.78, 0.66]),
        "bg": rng.uniform([0.08, 0.08, 0.10], [0.38, 0.38, 0.42]),
        "bg_freq": rng.uniform(1.5, 4.0, size=2),
        "bg_phase": rng.uniform(0.0, 2 * np.pi, size=2),
        "bg_amp": rng.uniform(0.02, 0.08),
        "face_rx": rng.uniform(0.26, 0.34),
        "face_ry": rng.uniform(0.33, 0.42),
        "eye_dx": rng.uniform(0.11, 0.17),
        "eye_y": rng.uniform(-0.10, -0.04),  # offset from face center, up
        "eye_rx": rng.uniform(0.040, 0.058),
        "eye_ry": rng.uniform(0.024, 0.038),
        "pupil_shade": rng.uniform(0.05, 0.25),
        "brow_dy": rng.uniform(0.055, 0.085),
        "brow_tilt": rng.uniform(-0.25, 0.25),
        "brow_shade": rng.uniform(0.15, 0.40),
        "nose_len": rng.uniform(0.10, 0.16),
        "nose_w": rng.uniform(0.018, 0.032),
        "mouth_y": rng.uniform(0.16, 0.24),
        "mouth_w": rng.uniform(0.08, 0.14),
        "mouth_h": rng.uniform(0.018, 0.034),
        "mouth_color": rng.uniform([0.45, 0.10, 0.10], [0.75, 0.30, 0.30]),
        "hair_shade": rng.uniform(0.10, 0.55),
        "hair_ry": rng.uniform(0.10, 0.18),
    }
    return p


def toy_face(identity_id: int, rng: SeededRng, size: int) -> ToyFace:
    """Render one face image of the given identity.

    Deterministic in (identity_id, rng stream); landmarks report the drawn
    eye centers in pixel coordinates.
    """
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    p = identity_params(identity_id)

    # nuisance draws, fixed order
    gain = rng.uniform(0.85, 1.15)
    jx = rng.uniform(-0.015, 0.015)
    jy = rng.uniform(-0.015, 0.015)
    rot = rng.uniform(-0.05, 0.05)

    s = float(size)
    ys, xs = np.mgrid[0:size, 0:size]
    gx = xs.astype(np.float64) / s
    gy = ys.astype(np.float64) / s

    # textured background
    tex = (np.sin(2 * np.pi * p["bg_freq"][0] * gx + p["bg_phase"][0])
           + np.sin(2 * np.pi * p["bg_freq"][1] * gy + p["bg_phase"][1]))
    img = np.clip(p["bg"][None, None, :] + (p["bg_amp"] * 0.5 * tex)[:, :, None], 0.0, 1.0)

    cx, cy = 0.5 + jx, 0.53 + jy
    cr, sr = np.cos(rot), np.sin(rot)

    def place(ox, oy):
        # feature offset rotated by the pose jitter around the face center
        return cx + cr * ox - sr * oy, cy + sr * ox + cr * oy

    # head with a simple vertical shading ramp
    head = _ellipse(gx, gy, cx, cy, p["face_rx"], p["face_ry"], rot=rot, edge=0.06)
    shade = 1.0 - 0.18 * np.clip((gy - cy) / p["face_ry"], -1.0, 1.0)
    skin = np.clip(p["skin"][None, None, :] * shade[:, :, None], 0.0, 1.0)
    img = img + head[:, :, None] * (skin - img)

    # hair cap along the top of the head
    hx, hy = place(0.0, -p["face_ry"] * 0.78)
    hair = _ellipse(gx, gy, hx, hy, p["face_rx"] * 1.02, p["hair_ry"], rot=rot, edge=0.10)
    img = _paint(img, hair, p["skin"] * p["hair_shade"])

    # eyes: sclera blob + darker pupil; centers are the landmarks
    eye_centers = []
    for side in (-1.0, 1.0):
        ex, ey = place(side * p["eye_dx"], p["eye_y"])
        eye_centers.append((ex * s, ey * s))
        sclera = _ellipse(gx, gy, ex, ey, p["eye_rx"], p["eye_ry"], rot=rot, edge=0.20)
        img = _paint(img, sclera, np.array([0.93, 0.93, 0.93]))
        pupil = _ellipse(gx, gy, ex, ey, p["eye_rx"] * 0.45, p["eye_ry"] * 0.8, rot=rot, edge=0.25)
        img = _paint(img, pupil, np.full(3, p["pupil_shade"]))
        # brow above
        bx, by = place(side * p["eye_dx"], p["eye_y"] - p["brow_dy"])
        brow = _ellipse(gx, gy, bx, by, p["eye_rx"] * 1.3, p["eye_ry"] * 0.45,
                        rot=rot + side * p["brow_tilt"], edge=0.30)
        img = _paint(img, brow, p["skin"] * p["brow_shade"])

    # nose stroke down the midline
    nx, ny = place(0.0, p["eye_y"] + p["nose_len"] * 0.7)
    nose = _ellipse(gx, gy, nx, ny, p["nose_w"], p["nose_len"] * 0.5, rot=rot, edge=0.35)
    img = _paint(img, nose, p["skin"] * 0.72)

    # mouth
    mx, my = place(0.0, p["mouth_y"])
    mouth = _ellipse(gx, gy, mx, my, p["mouth_w"], p["mouth_h"], rot=rot, edge=0.25)
    img = _paint(img, mouth, p["mouth_color"])

    img = np.clip(img * gain, 0.0, 1.0).astype(np.float32)
    left, right = sorted(eye_centers, key=lambda c: c[0])
    lm = EyeLandmarks(left_eye=left, right_eye=right)
    return ToyFace(image=img, landmarks=lm, identity_id=identity_id)


def toy_face_set(seed: int, identities: int, per_identity: int, size: int,
                 first_identity: int = 0) -> Iterator[tuple[str, ToyFace]]:
    """Deterministic corpus stream: yields (stem, face) as id0000_k00, ..."""
    for i in range(first_identity, first_identity + identities):
        for k in range(per_identity):
            rng = make_rng(seed, "toyface", i, k)
            yield f"id{i:04d}_k{k:02d}", toy_face(i, rng, size)
