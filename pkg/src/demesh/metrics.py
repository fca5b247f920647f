"""Image-quality metrics (PSNR, SSIM), verification scoring (cosine, ROC,
TPR@FPR) and the gallery/probe protocol with pluggable embeddings.

PSNR/SSIM operate on the repo-wide [0,1] float convention (MAX=1). The
default embedder is a plain pixel embedding; anything producing unit-norm
vectors can be dropped in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imageops import check_image, resize_bilinear

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)

TPR_TARGETS = (0.01, 0.001, 0.0001)


@dataclass(frozen=True)
class ScoredPair:
    score: float
    label: bool  # True = same identity


@dataclass(frozen=True)
class RocCurve:
    """Operating points at every distinct score, plus the predict-nothing
    point (threshold=inf, fpr=0, tpr=0); both coordinates are monotone."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray  # unit L2 norm
    embedder: str


@dataclass(frozen=True)
class VerifyItem:
    image: np.ndarray
    identity: str
    name: str = ""


@dataclass
class VerifyResult:
    pairs: list[ScoredPair]
    curve: RocCurve
    tpr_at: dict[float, float]
    mean_psnr: float | None = None
    mean_ssim: float | None = None


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299/0.587/0.114); single-channel passes through."""
    if img.ndim == 3 and img.shape[2] == 3:
        return img.astype(np.float64) @ LUMA
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0].astype(np.float64)
    return img.astype(np.float64)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) with MAX=1; capped at 99 dB (zero-MSE sentinel)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def _ssim_window() -> np.ndarray:
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x ** 2) / (2.0 * SSIM_SIGMA ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
    L=1; color inputs are converted to luma first. Windows are taken fully
    inside the image (no padding)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ga, gb = to_gray(a), to_gray(b)
    h, w = ga.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than SSIM window {SSIM_WINDOW}")
    win = _ssim_window()

    def wmean(x):
        v = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
        return np.tensordot(v, win, axes=([2, 3], [0, 1]))

    mu1, mu2 = wmean(ga), wmean(gb)
    s11 = wmean(ga * ga) - mu1 * mu1
    s22 = wmean(gb * gb) - mu2 * mu2
    s12 = wmean(ga * gb) - mu1 * mu2
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


def cosine_score(e1: Embedding, e2: Embedding) -> float:
    return float(np.dot(e1.vector, e2.vector))


def embed_pixel(img: np.ndarray) -> Embedding:
    """Downsample to 32x32 gray, subtract the mean, L2-normalize (1024-dim).

    Mean subtraction makes the embedding exactly invariant to uniform
    brightness offsets.
    """
    check_image(img)
    g = to_gray(resize_bilinear(img, 32, 32).astype(np.float64))
    v = g.reshape(-1)
    v = v - v.mean()
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("constant image has no pixel embedding")
    return Embedding(vector=v / n, embedder="pixel32")


def roc(pairs: Sequence[ScoredPair]) -> RocCurve:
    """Sweep thresholds over all distinct scores; predict same-identity when
    score >= threshold."""
    scores = np.array([p.score for p in pairs], dtype=np.float64)
    labels = np.array([p.label for p in pairs], dtype=bool)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int(labels.sum())
    n_neg = int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative pair")

    distinct = np.unique(scores)[::-1]  # descending
    pos_sorted = np.sort(scores[labels])
    neg_sorted = np.sort(scores[~labels])
    # count of elements >= t
    tp = n_pos - np.searchsorted(pos_sorted, distinct, side="left")
    fp = n_neg - np.searchsorted(neg_sorted, distinct, side="left")
    thresholds = np.concatenate([[np.inf], distinct])
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr)


def tpr_at_fpr(curve: RocCurve, target_fpr: float) -> float:
    """Best TPR among operating points with FPR <= target (no interpolation)."""
    ok = curve.fpr <= target_fpr
    return float(curve.tpr[ok].max())


def verify_protocol(gallery: Sequence[VerifyItem], probe: Sequence[VerifyItem],
                    embedder: Callable[[np.ndarray], Embedding] = embed_pixel,
                    clean_refs: Sequence[np.ndarray] | None = None) -> VerifyResult:
    """Score every gallery x probe pair; labels come from identity equality.

    When clean_refs (ground-truth clean images aligned with probe) are
    supplied, mean PSNR/SSIM of the probes against them are reported too.
    """
    if len(gallery) == 0 or len(probe) == 0:
        raise ValueError("gallery and probe must be nonempty")
    g_ids = {g.identity for g in gallery}
    p_ids = {p.identity for p in probe}
    if g_ids.isdisjoint(p_ids):
        raise ValueError("gallery and probe identities are disjoint (no positive pairs)")

    g_emb = [embedder(g.image) for g in gallery]
    p_emb = [embedder(p.image) for p in probe]
    pairs = [
        ScoredPair(score=cosine_score(ge, pe), label=(g.identity == p.identity))
        for g, ge in zip(gallery, g_emb)
        for p, pe in zip(probe, p_emb)
    ]
    curve = roc(pairs)
    tprs = {t: tpr_at_fpr(curve, t) for t in TPR_TARGETS}

    mean_psnr = mean_ssim = None
    if clean_refs is not None:
        if len(clean_refs) != len(probe):
            raise ValueError("clean_refs must align with probe")
        mean_psnr = float(np.mean([psnr(p.image, r) for p, r in zip(probe, clean_refs)]))
        mean_ssim = float(np.mean([ssim(p.image, r) for p, r in zip(probe, clean_refs)]))
    return VerifyResult(pairs=pairs, curve=curve, tpr_at=tprs,
                        mean_psnr=mean_psnr, mean_ssim=mean_ssim)
