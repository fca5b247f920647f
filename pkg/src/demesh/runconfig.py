"""Run configuration: one strict JSON document covering network, training,
mesh synthesis and data settings.

Unknown keys and version mismatches are rejected loudly — a silently
ignored typo is how irreproducible runs happen. Defaults equal the
full-scale values; the desk preset shrinks everything to smoke size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .meshes import MeshParams
from .networks import NetConfig
from .training import TrainConfig

CONFIG_VERSION = 1


@dataclass(frozen=True)
class DataConfig:
    """Corpus shape: synthesis size must exceed the crop (net image_size)."""

    root: str | None = None
    size: int = 148
    identities: int = 200
    images_per_identity: int = 5
    meshes_per_face: int = 1
    align: bool = True

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "DataConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown data config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def desk_scale(cls) -> "DataConfig":
        return cls(size=72)


@dataclass(frozen=True)
class RunConfig:
    net: NetConfig
    train: TrainConfig
    mesh: MeshParams
    data: DataConfig
    version: int = CONFIG_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "net": self.net.to_dict(),
            "train": self.train.to_dict(),
            "mesh": self.mesh.to_dict(),
            "data": self.data.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"version", "net", "train", "mesh", "data"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        version = d.get("version")
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version!r}; expected {CONFIG_VERSION}")
        return cls(
            net=NetConfig.from_dict(d.get("net", {})),
            train=TrainConfig.from_dict(d.get("train", {})),
            mesh=MeshParams.from_dict(d.get("mesh", {})),
            data=DataConfig.from_dict(d.get("data", {})),
            version=version,
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ValueError(f"config {path} is not valid JSON: {e}") from e
        return cls.from_dict(doc)

    @classmethod
    def full_preset(cls, seed: int = 0) -> "RunConfig":
        return cls(net=NetConfig.full_scale(), train=TrainConfig(seed=seed),
                   mesh=MeshParams(), data=DataConfig())

    @classmethod
    def desk_preset(cls, seed: int = 0) -> "RunConfig":
        return cls(net=NetConfig.desk_scale(), train=TrainConfig.desk_preset(seed=seed),
                   mesh=MeshParams(), data=DataConfig.desk_scale())

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(net=self.net, train=TrainConfig.from_dict({**self.train.to_dict(), "seed": seed}),
                         mesh=self.mesh, data=self.data, version=self.version)
