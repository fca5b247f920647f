"""Adversarial and cycle objectives for the three-domain min-max game.

Discriminators maximize log-likelihood of telling real from generated in
their own domain; the generator side either minimizes log(1-D(fake))
literally (minimax) or maximizes log D(fake) (non-saturating, the default
— same fixed points, stronger early gradients). Cycle terms are per-element
mean L1 between round-trip reconstructions and their targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import torch

SCORE_EPS = 1e-7


def _clamp(scores: torch.Tensor) -> torch.Tensor:
    return scores.clamp(SCORE_EPS, 1.0 - SCORE_EPS)


def adv_d_loss(scores_real: torch.Tensor, scores_fake: torch.Tensor) -> torch.Tensor:
    """-mean(log D(real)) - mean(log(1 - D(fake)))."""
    return -torch.log(_clamp(scores_real)).mean() - torch.log(1.0 - _clamp(scores_fake)).mean()


def adv_g_loss(scores_fake: torch.Tensor, mode: str = "non_saturating") -> torch.Tensor:
    if mode == "minimax":
        return torch.log(1.0 - _clamp(scores_fake)).mean()
    if mode == "non_saturating":
        return -torch.log(_clamp(scores_fake)).mean()
    raise ValueError(f"unknown generator loss mode {mode!r}")


def cycle_loss(x: torch.Tensor, x_rec: torch.Tensor,
               y: torch.Tensor, y_rec: torch.Tensor,
               z: torch.Tensor, z_rec: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Mean-absolute round-trip errors (cyc_x, cyc_y, cyc_z)."""
    for a, b, name in ((x, x_rec, "x"), (y, y_rec, "y"), (z, z_rec, "z")):
        if a.shape != b.shape:
            raise ValueError(f"cycle pair {name} shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return ((x_rec - x).abs().mean(), (y_rec - y).abs().mean(), (z_rec - z).abs().mean())


def total_objective(g_adv_x, g_adv_y, g_adv_z, cyc_x, cyc_y, cyc_z, lam: float):
    """Generator total: adversarial terms plus lambda times the cycle sum."""
    return g_adv_x + g_adv_y + g_adv_z + lam * (cyc_x + cyc_y + cyc_z)


@dataclass(frozen=True)
class LossReport:
    """Per-step loss values, serialized as one JSON line in train_log.jsonl."""

    step: int
    d_x: float
    d_y: float
    d_z: float
    g_adv_x: float
    g_adv_y: float
    g_adv_z: float
    cyc_x: float
    cyc_y: float
    cyc_z: float
    lam: float
    total_g: float

    @classmethod
    def from_parts(cls, step, d_x, d_y, d_z, g_adv_x, g_adv_y, g_adv_z,
                   cyc_x, cyc_y, cyc_z, lam) -> "LossReport":
        def f(v):
            return float(v.item()) if torch.is_tensor(v) else float(v)
        parts = dict(d_x=f(d_x), d_y=f(d_y), d_z=f(d_z),
                     g_adv_x=f(g_adv_x), g_adv_y=f(g_adv_y), g_adv_z=f(g_adv_z),
                     cyc_x=f(cyc_x), cyc_y=f(cyc_y), cyc_z=f(cyc_z))
        total = (parts["g_adv_x"] + parts["g_adv_y"] + parts["g_adv_z"]
                 + float(lam) * (parts["cyc_x"] + parts["cyc_y"] + parts["cyc_z"]))
        return cls(step=step, lam=float(lam), total_g=total, **parts)

    def is_finite(self) -> bool:
        import math
        return all(math.isfinite(v) for v in (
            self.d_x, self.d_y, self.d_z, self.g_adv_x, self.g_adv_y, self.g_adv_z,
            self.cyc_x, self.cyc_y, self.cyc_z, self.total_g))

    def to_json_line(self) -> str:
        return json.dumps({
            "step": self.step,
            "d_x": self.d_x, "d_y": self.d_y, "d_z": self.d_z,
            "g_adv_x": self.g_adv_x, "g_adv_y": self.g_adv_y, "g_adv_z": self.g_adv_z,
            "cyc_x": self.cyc_x, "cyc_y": self.cyc_y, "cyc_z": self.cyc_z,
            "lambda": self.lam, "total_g": self.total_g,
        })

    @classmethod
    def from_json_line(cls, line: str) -> "LossReport":
        d = json.loads(line)
        return cls(step=d["step"], d_x=d["d_x"], d_y=d["d_y"], d_z=d["d_z"],
                   g_adv_x=d["g_adv_x"], g_adv_y=d["g_adv_y"], g_adv_z=d["g_adv_z"],
                   cyc_x=d["cyc_x"], cyc_y=d["cyc_y"], cyc_z=d["cyc_z"],
                   lam=d["lambda"], total_g=d["total_g"])
