"""Alternating min-max training of the disentangler/fuser against the three
domain discriminators, with deterministic replay and resumable checkpoints.

Every step's sampling and augmentation stream is derived statelessly from
(seed, step index), so resuming from a checkpoint continues bit-identically
without serializing RNG state; checkpoints carry model parameters plus Adam
moments and per-parameter step counts.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .data import DomainPools, sample_unpaired_batch
from .losses import LossReport, adv_d_loss, adv_g_loss, cycle_loss, total_objective
from .networks import ModelBundle, NetConfig, discriminate, disentangle, fuse, init_weights
from .rng import make_rng

FINAL_CHECKPOINT = "checkpoint_final"


class TrainingDiverged(RuntimeError):
    """Raised when a step produces a non-finite loss; the offending batch is
    dumped next to the log for inspection."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    lr0: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    lam: float = 10.0
    seed: int = 0
    non_saturating: bool = True
    checkpoint_every: int = 1000
    desk_scale: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def desk_preset(cls, seed: int = 0) -> "TrainConfig":
        return cls(epochs=30, seed=seed, checkpoint_every=500, desk_scale=True)


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Constant for the first half of the epochs, then linear decay to zero."""
    const = config.epochs // 2
    decay = config.epochs - const
    if epoch < const:
        return config.lr0
    return config.lr0 * max(0, config.epochs - epoch) / decay


def _make_optimizers(bundle: ModelBundle, config: TrainConfig):
    betas = (config.adam_beta1, config.adam_beta2)
    opt_g = torch.optim.Adam(bundle.generator_parameters(), lr=config.lr0, betas=betas)
    opt_d = torch.optim.Adam(bundle.discriminator_parameters(), lr=config.lr0, betas=betas)
    return opt_g, opt_d


def train_step(bundle: ModelBundle, batch, config: TrainConfig, opt_g, opt_d,
               lr: float) -> LossReport:
    """One discriminator pass then one generator pass on an unpaired batch."""
    x, y, z = batch
    for opt in (opt_g, opt_d):
        for group in opt.param_groups:
            group["lr"] = lr

    # discriminators vs detached fakes
    with torch.no_grad():
        y_hat_d, z_hat_d, _ = disentangle(bundle, x)
        x_hat_d = fuse(bundle, y, z)
    d_x = adv_d_loss(discriminate(bundle, "x", x), discriminate(bundle, "x", x_hat_d))
    d_y = adv_d_loss(discriminate(bundle, "y", y), discriminate(bundle, "y", y_hat_d))
    d_z = adv_d_loss(discriminate(bundle, "z", z), discriminate(bundle, "z", z_hat_d))
    opt_d.zero_grad(set_to_none=True)
    (d_x + d_y + d_z).backward()
    opt_d.step()

    # generators: adversarial terms plus the three-domain cycle
    mode = "non_saturating" if config.non_saturating else "minimax"
    y_hat, z_hat, _ = disentangle(bundle, x)
    x_hat = fuse(bundle, y, z)
    x_rec = fuse(bundle, y_hat, z_hat)
    y_rec, z_rec, _ = disentangle(bundle, x_hat)
    g_adv_x = adv_g_loss(discriminate(bundle, "x", x_hat), mode)
    g_adv_y = adv_g_loss(discriminate(bundle, "y", y_hat), mode)
    g_adv_z = adv_g_loss(discriminate(bundle, "z", z_hat), mode)
    cyc_x, cyc_y, cyc_z = cycle_loss(x, x_rec, y, y_rec, z, z_rec)
    total = total_objective(g_adv_x, g_adv_y, g_adv_z, cyc_x, cyc_y, cyc_z, config.lam)
    opt_g.zero_grad(set_to_none=True)
    total.backward()
    opt_g.step()

    report = LossReport.from_parts(bundle.step, d_x, d_y, d_z, g_adv_x, g_adv_y, g_adv_z,
                                   cyc_x, cyc_y, cyc_z, config.lam)
    bundle.step += 1
    return report


def _optimizer_tensors(opt, prefix: str, param_names: list[str]):
    """Flatten Adam moments into named float32 arrays plus step counts."""
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    steps: dict[str, float] = {}
    params = [p for g in opt.param_groups for p in g["params"]]
    assert len(params) == len(param_names)
    for name, p in zip(param_names, params):
        state = opt.state.get(p)
        if not state:
            continue
        tensors[f"{prefix}.{name}.exp_avg"] = state["exp_avg"].detach().cpu().numpy()
        tensors[f"{prefix}.{name}.exp_avg_sq"] = state["exp_avg_sq"].detach().cpu().numpy()
        steps[f"{prefix}.{name}"] = float(state["step"])
    return tensors, steps


def _restore_optimizer(opt, prefix: str, param_names: list[str], tensors, steps) -> None:
    params = [p for g in opt.param_groups for p in g["params"]]
    for name, p in zip(param_names, params):
        key = f"{prefix}.{name}"
        if key not in steps:
            continue
        opt.state[p] = {
            "step": torch.tensor(steps[key]),
            "exp_avg": torch.from_numpy(tensors[f"{key}.exp_avg"]).clone(),
            "exp_avg_sq": torch.from_numpy(tensors[f"{key}.exp_avg_sq"]).clone(),
        }


def _gen_param_names(bundle: ModelBundle) -> list[str]:
    return [n for n, _ in bundle.named_parameters()
            if n.split(".")[0] in ("g_enc", "g_dec_y", "g_dec_z", "f_enc_y", "f_enc_z", "f_dec")]


def _disc_param_names(bundle: ModelBundle) -> list[str]:
    return [n for n, _ in bundle.named_parameters() if n.split(".")[0] in ("d_x", "d_y", "d_z")]


def save_train_checkpoint(bundle: ModelBundle, opt_g, opt_d, config: TrainConfig,
                          ckpt_dir: str | Path) -> Path:
    tg, sg = _optimizer_tensors(opt_g, "optim.g", _gen_param_names(bundle))
    td, sd = _optimizer_tensors(opt_d, "optim.d", _disc_param_names(bundle))
    extra_tensors = OrderedDict(**tg, **td)
    extra = {"train_config": config.to_dict(), "adam_steps": {**sg, **sd}}
    return save_checkpoint(bundle, ckpt_dir, extra_tensors=extra_tensors, extra=extra)


def load_train_checkpoint(ckpt_dir: str | Path):
    """Rebuild (bundle, opt_g, opt_d, train_config) for bit-identical resume."""
    bundle, leftovers, extra = load_checkpoint(ckpt_dir)
    config = TrainConfig.from_dict(extra["train_config"])
    opt_g, opt_d = _make_optimizers(bundle, config)
    steps = extra.get("adam_steps", {})
    _restore_optimizer(opt_g, "optim.g", _gen_param_names(bundle), leftovers, steps)
    _restore_optimizer(opt_d, "optim.d", _disc_param_names(bundle), leftovers, steps)
    return bundle, opt_g, opt_d, config


def steps_per_epoch(pools: DomainPools, config: TrainConfig) -> int:
    return max(1, min(len(pools.x), len(pools.y), len(pools.z)) // config.batch_size)


def _dump_bad_batch(out_dir: Path, step: int, batch) -> Path:
    x, y, z = batch
    path = out_dir / f"diverged_step_{step}.npz"
    np.savez(path, x=x.cpu().numpy(), y=y.cpu().numpy(), z=z.cpu().numpy())
    return path


def train(config: TrainConfig, net_config: NetConfig, pools: DomainPools,
          out_dir: str | Path, resume_from: str | Path | None = None,
          log_every: int = 0) -> Path:
    """Run the full schedule; returns the final checkpoint directory.

    Deterministic in (config, net_config, pools): rerunning writes an
    identical train_log.jsonl and bit-identical final checkpoint; resuming
    from any saved step matches the uninterrupted run.
    """
    torch.use_deterministic_algorithms(True)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"

    if resume_from is not None:
        bundle, opt_g, opt_d, saved_cfg = load_train_checkpoint(resume_from)
        if saved_cfg != config:
            raise ValueError("resume config differs from checkpoint's train config")
        log_mode = "a"
    else:
        bundle = init_weights(net_config, config.seed)
        opt_g, opt_d = _make_optimizers(bundle, config)
        log_mode = "w"

    spe = steps_per_epoch(pools, config)
    total_steps = config.epochs * spe
    crop = bundle.config.image_size

    with open(log_path, log_mode) as log:
        while bundle.step < total_steps:
            step = bundle.step
            epoch = step // spe
            rng = make_rng(config.seed, "step", step)
            batch = sample_unpaired_batch(pools, rng, config.batch_size, crop)
            report = train_step(bundle, batch, config, opt_g, opt_d, lr_at(epoch, config))
            if not report.is_finite():
                dump = _dump_bad_batch(out_dir, step, batch)
                raise TrainingDiverged(f"non-finite loss at step {step}; batch dumped to {dump}")
            log.write(report.to_json_line() + "\n")
            if log_every and (step + 1) % log_every == 0:
                log.flush()
                print(f"step {step + 1}/{total_steps} epoch {epoch} "
                      f"cyc_x={report.cyc_x:.4f} total_g={report.total_g:.4f}", flush=True)
            if config.checkpoint_every and bundle.step % config.checkpoint_every == 0 \
                    and bundle.step < total_steps:
                save_train_checkpoint(bundle, opt_g, opt_d, config,
                                      out_dir / f"checkpoint_step_{bundle.step:07d}")

    final = out_dir / FINAL_CHECKPOINT
    save_train_checkpoint(bundle, opt_g, opt_d, config, final)
    return final
