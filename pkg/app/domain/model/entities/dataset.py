# domain/model/entities/dataset.py

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import torch


class Provenance(Enum):
    """Where the latent codes of a dataset come from."""
    SYNTHETIC = "synthetic"
    IMPORTED = "imported"


@dataclass
class LabeledLatentDataset:
    """
    Latent codes with K binary attribute labels.

    Attributes:
        codes: (N, D) float64 latent codes
        labels: (N, K) uint8 labels in {0, 1}
        attribute_names: K attribute names
        provenance: SYNTHETIC for generated worlds, IMPORTED for external exports
        seed: Seed that produced the dataset, if any
    """
    codes: torch.Tensor
    labels: torch.Tensor
    attribute_names: List[str]
    provenance: Provenance = Provenance.SYNTHETIC
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return int(self.codes.shape[0])

    @property
    def dim(self) -> int:
        return int(self.codes.shape[1])

    @property
    def num_attributes(self) -> int:
        return int(self.labels.shape[1])

    def labels_as_float(self) -> torch.Tensor:
        return self.labels.to(torch.float64)

    def subset(self, indices: torch.Tensor) -> "LabeledLatentDataset":
        """Returns the rows selected by indices, keeping names and provenance."""
        return LabeledLatentDataset(
            codes=self.codes[indices],
            labels=self.labels[indices],
            attribute_names=list(self.attribute_names),
            provenance=self.provenance,
            seed=self.seed
        )

    def map_codes(self, fn: Callable[[torch.Tensor], torch.Tensor]) -> "LabeledLatentDataset":
        """Returns a dataset with the same labels whose codes are fn(codes)."""
        return LabeledLatentDataset(
            codes=fn(self.codes),
            labels=self.labels,
            attribute_names=list(self.attribute_names),
            provenance=self.provenance,
            seed=self.seed
        )


@dataclass(frozen=True)
class WorldSpec:
    """
    Ground-truth structure of a synthetic entangled latent world.

    Codes are w = psi(Q [g; n]) with g in {-gamma, +gamma}^K, n ~ N(0, s^2 I),
    Q orthogonal and psi(x) = x + nonlinearity * tanh(x). At the default s the
    rotated coordinates mostly sit on the saturating part of tanh, and linear
    probes in code space misclassify part of every attribute.

    Attributes:
        num_attributes: K
        dim: D (>= K); the last D - K coordinates are nuisance
        nonlinearity: a in psi, must exceed -1 so psi stays increasing
        gamma: Label margin of the factors (> 0)
        rho: Pairwise correlation of the factor signs, in [0, 1)
        nuisance_scale: Standard deviation s of the nuisance coordinates (> 0)
        random_rotation: Use a seeded random orthogonal Q instead of the identity
        seed: Seed of Q
        attribute_names: Optional names, defaults to attr_0..attr_{K-1}
    """
    num_attributes: int = 4
    dim: int = 32
    nonlinearity: float = 2.0
    gamma: float = 1.0
    rho: float = 0.3
    random_rotation: bool = True
    seed: int = 0
    nuisance_scale: float = 5.0
    attribute_names: Optional[List[str]] = field(default=None, hash=False, compare=False)

    @property
    def nuisance_dim(self) -> int:
        return self.dim - self.num_attributes

    def names(self) -> List[str]:
        if self.attribute_names:
            return list(self.attribute_names)
        return [f"attr_{index}" for index in range(self.num_attributes)]

    def to_dict(self) -> dict:
        return {
            "num_attributes": self.num_attributes,
            "dim": self.dim,
            "nonlinearity": self.nonlinearity,
            "gamma": self.gamma,
            "rho": self.rho,
            "random_rotation": self.random_rotation,
            "seed": self.seed,
            "nuisance_scale": self.nuisance_scale,
            "attribute_names": self.names()
        }


@dataclass
class GenerateSyntheticRequest:
    """
    Parameters of the `gen-synthetic` subcommand.

    Attributes:
        world: Structure of the synthetic world
        num_samples: Number of codes N (>= 1)
        seed: Seed of the factor, nuisance and label draws
        out_path: LDS1 destination
    """
    world: WorldSpec
    num_samples: int
    seed: int
    out_path: str


@dataclass
class GenerateSyntheticResponse:
    """Summary of a generated dataset."""
    out_path: str
    num_samples: int
    positive_rates: dict

    def to_dict(self) -> dict:
        return {
            "out_path": self.out_path,
            "num_samples": self.num_samples,
            "positive_rates": self.positive_rates
        }
