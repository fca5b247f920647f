import numpy as np
import pytest
import torch

from demesh.losses import adv_g_loss, cycle_loss, total_objective
from demesh.networks import NetConfig, discriminate, disentangle, fuse, init_weights
from demesh.rng import make_rng


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    yield


def tiny_net_config() -> NetConfig:
    """Smallest sane model: 8x8 gray images, <=5k parameters, norm-free so
    the loss landscape is smooth at the finite-difference step size."""
    return NetConfig(image_size=8, channels=1, base_channels=1,
                     res_blocks_face=1, res_blocks_mesh=1, disc_layers=1,
                     norm="none")


def small_net_config() -> NetConfig:
    """Cheap but non-degenerate model for short training runs."""
    return NetConfig(image_size=32, channels=3, base_channels=4,
                     res_blocks_face=1, res_blocks_mesh=1, disc_layers=2)


def random_image(rng: np.random.Generator, size: int, channels: int = 3) -> np.ndarray:
    return rng.random((size, size, channels)).astype(np.float32)


def generator_objective(bundle, x, y, z, lam=10.0, mode="non_saturating"):
    """The full generator-side total: adversarial terms plus weighted cycle."""
    y_hat, z_hat, _ = disentangle(bundle, x)
    x_hat = fuse(bundle, y, z)
    x_rec = fuse(bundle, y_hat, z_hat)
    y_rec, z_rec, _ = disentangle(bundle, x_hat)
    g_adv_x = adv_g_loss(discriminate(bundle, "x", x_hat), mode)
    g_adv_y = adv_g_loss(discriminate(bundle, "y", y_hat), mode)
    g_adv_z = adv_g_loss(discriminate(bundle, "z", z_hat), mode)
    cyc_x, cyc_y, cyc_z = cycle_loss(x, x_rec, y, y_rec, z, z_rec)
    return total_objective(g_adv_x, g_adv_y, g_adv_z, cyc_x, cyc_y, cyc_z, lam)


def run_total_objective_gradcheck(seed: int, n_samples: int, h: float = 1e-3,
                                  rel_tol: float = 1e-2) -> float:
    """Fraction of sampled generator parameters whose autograd gradient of
    the total objective matches central finite differences within rel_tol.

    Runs the tiny (<=5k parameter) model in float64 so the h=1e-3 stencil is
    not drowned by arithmetic noise.
    """
    cfg = tiny_net_config()
    bundle = init_weights(cfg, seed).double()
    g = torch.Generator().manual_seed(seed + 1)
    x = (torch.rand((2, 1, 8, 8), generator=g, dtype=torch.float64) * 2 - 1)
    y = (torch.rand((2, 1, 8, 8), generator=g, dtype=torch.float64) * 2 - 1)
    z = (torch.rand((2, 1, 8, 8), generator=g, dtype=torch.float64) * 2 - 1)

    params = [p for p in bundle.generator_parameters()]
    loss = generator_objective(bundle, x, y, z)
    grads = torch.autograd.grad(loss, params)

    sizes = np.array([p.numel() for p in params])
    total = int(sizes.sum())
    rng = make_rng(seed, "gradcheck")
    coords = rng.choice(total, size=min(n_samples, total), replace=False)
    bounds = np.cumsum(sizes)

    ok = 0
    with torch.no_grad():
        for flat_idx in coords:
            pi = int(np.searchsorted(bounds, flat_idx, side="right"))
            ei = int(flat_idx - (bounds[pi - 1] if pi > 0 else 0))
            p = params[pi].view(-1)
            orig = p[ei].item()
            p[ei] = orig + h
            lp = generator_objective(bundle, x, y, z).item()
            p[ei] = orig - h
            lm = generator_objective(bundle, x, y, z).item()
            p[ei] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[pi].view(-1)[ei].item()
            denom = max(abs(fd), abs(an))
            rel = 0.0 if denom < 1e-12 else abs(fd - an) / denom
            if rel <= rel_tol:
                ok += 1
    return ok / len(coords)
