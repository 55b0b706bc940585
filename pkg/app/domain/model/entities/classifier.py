# domain/model/entities/classifier.py

from dataclasses import dataclass
from enum import Enum
from typing import List

import torch

from domain.model.entities.errors import ConfigurationError, DegenerateDataError


class LatentSpace(Enum):
    """Space a hyperplane or edit lives in."""
    ORIGINAL = "orig"
    PROXY = "proxy"


@dataclass
class LinearAttributeClassifier:
    """
    Affine score followed by a sigmoid: C(w) = sigmoid(weight . w + bias).

    Attributes:
        weight: (D,) weight vector a
        bias: Scalar bias b
        frozen: Set once pretraining ends; proxy training never updates it
    """
    weight: torch.Tensor
    bias: float
    frozen: bool = False

    @property
    def norm(self) -> float:
        return float(torch.linalg.vector_norm(self.weight))

    def unit_normal(self) -> torch.Tensor:
        """Hyperplane normal d = a / ||a||."""
        norm = self.norm
        if norm <= 0.0:
            raise DegenerateDataError("Classifier weight is zero; its hyperplane normal is undefined")
        return self.weight / norm


@dataclass
class ClassifierBank:
    """
    One frozen linear classifier per attribute.

    Attributes:
        classifiers: K classifiers sharing the latent width D
        attribute_names: K names aligned with classifiers
    """
    classifiers: List[LinearAttributeClassifier]
    attribute_names: List[str]

    def __post_init__(self):
        if not self.classifiers:
            raise ConfigurationError("A classifier bank needs at least one classifier")
        dims = {int(c.weight.numel()) for c in self.classifiers}
        if len(dims) != 1:
            raise ConfigurationError(f"Classifiers disagree on latent width: {sorted(dims)}")
        if len(self.attribute_names) != len(self.classifiers):
            raise ConfigurationError("attribute_names must have one entry per classifier")

    @property
    def size(self) -> int:
        return len(self.classifiers)

    @property
    def dim(self) -> int:
        return int(self.classifiers[0].weight.numel())

    @property
    def frozen(self) -> bool:
        return all(c.frozen for c in self.classifiers)

    def weight_matrix(self) -> torch.Tensor:
        """(D, K) matrix whose columns are the classifier weights."""
        return torch.stack([c.weight for c in self.classifiers], dim=1)

    def bias_row(self) -> torch.Tensor:
        """(1, K) biases."""
        return torch.tensor([[c.bias for c in self.classifiers]], dtype=torch.float64)

    def normal_matrix(self) -> torch.Tensor:
        """(D, K) matrix of unit normals d_i."""
        return torch.stack([c.unit_normal() for c in self.classifiers], dim=1)

    def distance_bias_row(self) -> torch.Tensor:
        """(1, K) offsets b_i / ||a_i|| of the signed distances."""
        return torch.tensor([[c.bias / c.norm for c in self.classifiers]], dtype=torch.float64)

    def state_snapshot(self) -> List[bytes]:
        """Raw bytes of every parameter, for bitwise comparisons."""
        snapshot = []
        for classifier in self.classifiers:
            snapshot.append(classifier.weight.numpy().tobytes())
            snapshot.append(torch.tensor([classifier.bias], dtype=torch.float64).numpy().tobytes())
        return snapshot


@dataclass
class SvmHyperplane:
    """
    Linear SVM decision boundary weight . w + bias = 0.

    Attributes:
        weight: (D,) weight vector
        bias: Scalar bias
        attribute_index: Attribute the hyperplane separates
        space: Space of the codes the SVM was trained on
    """
    weight: torch.Tensor
    bias: float
    attribute_index: int
    space: LatentSpace = LatentSpace.ORIGINAL

    @property
    def norm(self) -> float:
        return float(torch.linalg.vector_norm(self.weight))

    def unit_normal(self) -> torch.Tensor:
        norm = self.norm
        if norm <= 0.0:
            raise DegenerateDataError(f"Hyperplane of attribute {self.attribute_index} has a zero normal")
        return self.weight / norm

    def scores(self, codes: torch.Tensor) -> torch.Tensor:
        return codes @ self.weight + self.bias

    def signed_distance(self, codes: torch.Tensor) -> torch.Tensor:
        return self.scores(codes) / self.norm

    def predict(self, codes: torch.Tensor) -> torch.Tensor:
        """Labels in {0, 1}; a score of exactly 0 counts as positive."""
        return (self.scores(codes) >= 0).to(torch.uint8)
