"""Disentangler, fuser and the three domain discriminators.

The disentangler maps an occluded face to a channel-partitioned latent
(face slice + mesh slice) decoded separately into a clean-face estimate
and a mesh estimate; the fuser encodes a clean face and a mesh separately
and decodes their channel concatenation back into an occluded face. The
partition is structural: each decoder reads only its own slice, so the
face/mesh information cannot interweave.

Model tensors are NCHW float in [-1, 1] (tanh heads).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch
import torch.nn as nn

from .rng import split_seed

WEIGHT_INIT_STD = 0.02


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters shared by desk- and full-scale models.

    Encoders downsample twice (stride 2), so latent maps are image_size/4
    on a side; the encoder trunk is 4*base_channels wide, split into
    (4*base_channels - mesh_latent_channels) face channels and
    mesh_latent_channels mesh channels.
    """

    image_size: int = 128
    channels: int = 3
    base_channels: int = 64
    res_blocks_face: int = 5
    res_blocks_mesh: int = 1
    disc_layers: int = 3
    mesh_latent_channels: int = 1
    norm: str = "instance"

    def __post_init__(self):
        if self.image_size < 8 or self.image_size % 4 != 0:
            raise ValueError("image_size must be >= 8 and divisible by 4")
        if self.norm not in ("instance", "none"):
            raise ValueError(f"unknown normalization kind {self.norm!r}")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.latent_channels <= self.mesh_latent_channels:
            raise ValueError("latent too narrow for the mesh slice")
        if self.score_map_size < 1:
            raise ValueError("discriminator collapses this image size; lower disc_layers")

    @property
    def latent_channels(self) -> int:
        return 4 * self.base_channels

    @property
    def face_latent_channels(self) -> int:
        return self.latent_channels - self.mesh_latent_channels

    @property
    def latent_size(self) -> int:
        return self.image_size // 4

    @property
    def score_map_size(self) -> int:
        # disc_layers stride-2 convs then one k4/s1/p1 classifier conv
        return self.image_size // (2 ** self.disc_layers) - 1

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "channels": self.channels,
            "base_channels": self.base_channels,
            "res_blocks_face": self.res_blocks_face,
            "res_blocks_mesh": self.res_blocks_mesh,
            "disc_layers": self.disc_layers,
            "mesh_latent_channels": self.mesh_latent_channels,
            "norm": self.norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown net config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def full_scale(cls) -> "NetConfig":
        return cls()

    @classmethod
    def desk_scale(cls) -> "NetConfig":
        return cls(image_size=64, base_channels=16)


class LatentCode(NamedTuple):
    """Disjoint channel slices of one encoder output map."""

    face_part: torch.Tensor  # (N, C_y, h, w)
    mesh_part: torch.Tensor  # (N, C_z, h, w)


def _norm(kind: str, channels: int) -> nn.Module:
    return nn.InstanceNorm2d(channels) if kind == "instance" else nn.Identity()


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, norm: str = "instance"):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1),
            _norm(norm, channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, 1, 1),
            _norm(norm, channels),
        )

    def forward(self, x):
        return x + self.body(x)


def _conv_in_relu(cin, cout, k, s, p, norm="instance"):
    return nn.Sequential(nn.Conv2d(cin, cout, k, s, p), _norm(norm, cout), nn.ReLU(inplace=True))


class Encoder(nn.Module):
    """Stem conv, two stride-2 downsamples, residual trunk, linear projection."""

    def __init__(self, in_channels: int, out_channels: int, base: int, res_blocks: int,
                 norm: str = "instance"):
        super().__init__()
        self.stem = _conv_in_relu(in_channels, base, 7, 1, 3, norm)
        self.down1 = _conv_in_relu(base, 2 * base, 3, 2, 1, norm)
        self.down2 = _conv_in_relu(2 * base, 4 * base, 3, 2, 1, norm)
        self.blocks = nn.Sequential(*[ResidualBlock(4 * base, norm) for _ in range(res_blocks)])
        self.proj = nn.Conv2d(4 * base, out_channels, 3, 1, 1)

    def forward(self, x):
        return self.proj(self.blocks(self.down2(self.down1(self.stem(x)))))


class Decoder(nn.Module):
    """Residual trunk then two nearest-neighbor upsample+conv stages; tanh head."""

    def __init__(self, in_channels: int, out_channels: int, base: int, res_blocks: int,
                 norm: str = "instance"):
        super().__init__()
        self.pre = _conv_in_relu(in_channels, 4 * base, 3, 1, 1, norm)
        self.blocks = nn.Sequential(*[ResidualBlock(4 * base, norm) for _ in range(res_blocks)])
        self.up1 = nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"),
                                 *_conv_in_relu(4 * base, 2 * base, 3, 1, 1, norm))
        self.up2 = nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"),
                                 *_conv_in_relu(2 * base, base, 3, 1, 1, norm))
        self.head = nn.Sequential(nn.Conv2d(base, out_channels, 7, 1, 3), nn.Tanh())

    def forward(self, x):
        return self.head(self.up2(self.up1(self.blocks(self.pre(x)))))


class PatchDiscriminator(nn.Module):
    """Strided conv patch classifier; sigmoid score per patch."""

    def __init__(self, in_channels: int, base: int, layers: int, norm: str = "instance"):
        super().__init__()
        seq: list[nn.Module] = [nn.Conv2d(in_channels, base, 4, 2, 1), nn.LeakyReLU(0.2, inplace=True)]
        c = base
        for _ in range(layers - 1):
            seq += [nn.Conv2d(c, 2 * c, 4, 2, 1), _norm(norm, 2 * c), nn.LeakyReLU(0.2, inplace=True)]
            c *= 2
        seq += [nn.Conv2d(c, 1, 4, 1, 1), nn.Sigmoid()]
        self.model = nn.Sequential(*seq)

    def forward(self, x):
        return self.model(x)


class ModelBundle(nn.Module):
    """All trainable pieces plus the config and a training step counter."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        c, b, nm = config.channels, config.base_channels, config.norm
        cy, cz = config.face_latent_channels, config.mesh_latent_channels
        self.g_enc = Encoder(c, cy + cz, b, config.res_blocks_face, nm)
        self.g_dec_y = Decoder(cy, c, b, config.res_blocks_face, nm)
        self.g_dec_z = Decoder(cz, 1, b, config.res_blocks_mesh, nm)
        self.f_enc_y = Encoder(c, cy, b, config.res_blocks_face, nm)
        self.f_enc_z = Encoder(1, cz, b, config.res_blocks_mesh, nm)
        self.f_dec = Decoder(cy + cz, c, b, config.res_blocks_face, nm)
        self.d_x = PatchDiscriminator(c, b, config.disc_layers, nm)
        self.d_y = PatchDiscriminator(c, b, config.disc_layers, nm)
        self.d_z = PatchDiscriminator(1, b, config.disc_layers, nm)
        self.step = 0

    def generator_parameters(self):
        for m in (self.g_enc, self.g_dec_y, self.g_dec_z, self.f_enc_y, self.f_enc_z, self.f_dec):
            yield from m.parameters()

    def discriminator_parameters(self):
        for m in (self.d_x, self.d_y, self.d_z):
            yield from m.parameters()


def init_weights(config: NetConfig, seed: int) -> ModelBundle:
    """Fresh bundle with N(0, 0.02) conv weights and zero biases."""
    bundle = ModelBundle(config)
    gen = torch.Generator().manual_seed(split_seed(seed, "init") & 0x7FFFFFFFFFFFFFFF)
    with torch.no_grad():
        for name, p in bundle.named_parameters():
            if name.endswith(".bias"):
                p.zero_()
            else:
                p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * WEIGHT_INIT_STD)
    return bundle


def _check_finite(name: str, *tensors: torch.Tensor) -> None:
    for t in tensors:
        if not torch.isfinite(t).all():
            raise FloatingPointError(f"non-finite values in {name} output")


def _check_input(t: torch.Tensor, channels: int, what: str) -> None:
    # fully convolutional: any square size divisible by the 4x stride plan works
    if t.dim() != 4 or t.shape[1] != channels:
        raise ValueError(f"{what} must be (N, {channels}, S, S), got {tuple(t.shape)}")
    if t.shape[2] != t.shape[3] or t.shape[2] % 4 != 0:
        raise ValueError(f"{what} must be square with side divisible by 4, got {tuple(t.shape)}")


def disentangle(bundle: ModelBundle, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, LatentCode]:
    """Occluded face -> (clean-face estimate, mesh estimate, latent code)."""
    cfg = bundle.config
    _check_input(x, cfg.channels, "x")
    code_map = bundle.g_enc(x)
    code = LatentCode(face_part=code_map[:, :cfg.face_latent_channels],
                      mesh_part=code_map[:, cfg.face_latent_channels:])
    y_hat = bundle.g_dec_y(code.face_part)
    z_hat = bundle.g_dec_z(code.mesh_part)
    _check_finite("disentangle", y_hat, z_hat)
    return y_hat, z_hat, code


def encode_face(bundle: ModelBundle, y: torch.Tensor) -> torch.Tensor:
    _check_input(y, bundle.config.channels, "y")
    return bundle.f_enc_y(y)


def encode_mesh(bundle: ModelBundle, z: torch.Tensor) -> torch.Tensor:
    _check_input(z, 1, "z")
    return bundle.f_enc_z(z)


def decode_fused(bundle: ModelBundle, face_lat: torch.Tensor, mesh_lat: torch.Tensor) -> torch.Tensor:
    cfg = bundle.config
    if face_lat.shape[1] != cfg.face_latent_channels or mesh_lat.shape[1] != cfg.mesh_latent_channels:
        raise ValueError("latent channel counts do not match the config")
    x_hat = bundle.f_dec(torch.cat([face_lat, mesh_lat], dim=1))
    _check_finite("decode_fused", x_hat)
    return x_hat


def fuse(bundle: ModelBundle, y: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """Clean face + mesh -> occluded face, via latent concatenation."""
    return decode_fused(bundle, encode_face(bundle, y), encode_mesh(bundle, z))


def discriminate(bundle: ModelBundle, which: str, img: torch.Tensor) -> torch.Tensor:
    """Patch score map in (0,1) from the domain discriminator ('x'|'y'|'z')."""
    nets = {"x": bundle.d_x, "y": bundle.d_y, "z": bundle.d_z}
    if which not in nets:
        raise ValueError(f"which must be one of x, y, z; got {which!r}")
    channels = 1 if which == "z" else bundle.config.channels
    _check_input(img, channels, f"d_{which} input")
    scores = nets[which](img)
    _check_finite(f"d_{which}", scores)
    return scores


def latent_interp(bundle: ModelBundle, z1: torch.Tensor, z2: torch.Tensor, t: float) -> torch.Tensor:
    """Linear interpolation between two mesh latents; t=0 -> z1's, t=1 -> z2's."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must be in [0, 1], got {t}")
    e1, e2 = encode_mesh(bundle, z1), encode_mesh(bundle, z2)
    return (1.0 - t) * e1 + t * e2


def latent_arith(bundle: ModelBundle, z1: torch.Tensor, z2: torch.Tensor | None,
                 op: str, alpha: float = 1.0) -> torch.Tensor:
    """Elementwise add/sub of two mesh latents, or scale(alpha) of the first."""
    e1 = encode_mesh(bundle, z1)
    if op == "scale":
        return alpha * e1
    if z2 is None:
        raise ValueError(f"op {op!r} needs a second mesh")
    e2 = encode_mesh(bundle, z2)
    if op == "add":
        return e1 + e2
    if op == "sub":
        return e1 - e2
    raise ValueError(f"unknown latent op {op!r}")


def batch_to_torch(images: list[np.ndarray]) -> torch.Tensor:
    """Stack (H, W, C) model-range arrays into an NCHW float32 tensor."""
    arr = np.stack([np.ascontiguousarray(im.transpose(2, 0, 1)) for im in images])
    return torch.from_numpy(arr.astype(np.float32, copy=False))


def torch_to_images(t: torch.Tensor) -> list[np.ndarray]:
    """NCHW tensor back to a list of (H, W, C) float32 arrays."""
    return [np.ascontiguousarray(im.transpose(1, 2, 0)) for im in t.detach().cpu().numpy()]
