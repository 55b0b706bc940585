# domain/model/entities/metrics.py

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import torch


class SpaceSelector(Enum):
    """
    Which latent space an evaluation runs in.

    Options:
        ORIGINAL: Codes as stored in the dataset (W+)
        PROXY: Codes mapped by the trained flow (W*)
        BOTH: Evaluate both and report the deltas
    """
    ORIGINAL = "orig"
    PROXY = "proxy"
    BOTH = "both"


@dataclass
class SeparabilityReport:
    """
    Validation accuracy of one fresh linear SVM per attribute.

    Attributes:
        space: "orig" or "proxy"
        attribute_names: Names of the evaluated attributes
        accuracies: Validation accuracy per evaluated attribute
        skipped: Names of attributes skipped as single-class
    """
    space: str
    attribute_names: List[str]
    accuracies: List[float]
    skipped: List[str] = field(default_factory=list)

    @property
    def min_accuracy(self) -> float:
        return min(self.accuracies)

    @property
    def max_accuracy(self) -> float:
        return max(self.accuracies)

    @property
    def mean_accuracy(self) -> float:
        return sum(self.accuracies) / len(self.accuracies)

    def to_dict(self) -> dict:
        return {
            "space": self.space,
            "per_attribute": dict(zip(self.attribute_names, self.accuracies)),
            "skipped": self.skipped,
            "min_accuracy": self.min_accuracy,
            "max_accuracy": self.max_accuracy,
            "mean_accuracy": self.mean_accuracy
        }


@dataclass
class LassoResult:
    """
    Coordinate-descent Lasso fit on internally standardized features.

    Attributes:
        coefficients: (D,) coefficients in standardized units; zero for constant features
        intercept: mean(y)
        feature_means: (D,) column means used for centering
        feature_scales: (D,) column standard deviations (1 for constant features)
        objective_history: Objective after every sweep, starting with beta = 0
        iterations: Sweeps performed
        converged: Whether the max coefficient change fell below the tolerance
    """
    coefficients: torch.Tensor
    intercept: float
    feature_means: torch.Tensor
    feature_scales: torch.Tensor
    objective_history: List[float]
    iterations: int
    converged: bool

    def predict(self, codes: torch.Tensor) -> torch.Tensor:
        return ((codes - self.feature_means) / self.feature_scales) @ self.coefficients + self.intercept


@dataclass
class ImportanceMatrix:
    """
    R[k, d] = |Lasso coefficient| of latent dimension d for attribute k.

    Attributes:
        values: (K, D) non-negative finite importances
        attribute_names: K row names
    """
    values: torch.Tensor
    attribute_names: List[str]

    def to_dict(self) -> dict:
        return {
            "attribute_names": self.attribute_names,
            "values": self.values.tolist()
        }


@dataclass
class DciReport:
    """
    Disentanglement, completeness and informativeness.

    Attributes:
        disentanglement: Importance-weighted mean of per-dimension scores, in [0, 1]
        completeness: Mean of per-attribute scores, in [0, 1]
        informativeness: Mean held-out classification error (lower is better)
        dimension_scores: 1 - H_K of every dimension (0 for unused dimensions)
        attribute_scores: 1 - H_D of every attribute (0 for attributes with a zero row)
        degenerate: True when the importance matrix was identically zero
    """
    disentanglement: float
    completeness: float
    informativeness: float
    dimension_scores: List[float]
    attribute_scores: List[float]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "disentanglement": self.disentanglement,
            "completeness": self.completeness,
            "informativeness": self.informativeness,
            "dimension_scores": self.dimension_scores,
            "attribute_scores": self.attribute_scores,
            "degenerate": self.degenerate
        }


@dataclass
class FlipRateReport:
    """
    Side effects of editing one attribute.

    Attributes:
        attribute: Name of the edited attribute
        alpha: Edit step in distance units of the editing space
        space: "orig" or "proxy"
        flip_rate: Mean over codes and non-target attributes of changed decisions
        target_flip_rate: Fraction of codes whose target decision changed
        flip_counts: Changed decisions per attribute (the target included)
        num_codes: Number of edited codes
    """
    attribute: str
    alpha: float
    space: str
    flip_rate: float
    target_flip_rate: float
    flip_counts: Dict[str, int]
    num_codes: int

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "alpha": self.alpha,
            "space": self.space,
            "flip_rate": self.flip_rate,
            "target_flip_rate": self.target_flip_rate,
            "flip_counts": self.flip_counts,
            "num_codes": self.num_codes
        }


@dataclass
class SpaceComparison:
    """
    The same evaluation in both spaces.

    Attributes:
        original: Report fields in the original space
        proxy: Report fields in the proxy space
        deltas: proxy minus original for every shared numeric field
    """
    original: dict
    proxy: dict
    deltas: Dict[str, float]

    def to_dict(self) -> dict:
        return {"orig": self.original, "proxy": self.proxy, "delta": self.deltas}


@dataclass
class EvaluationSettings:
    """
    Tunables of the evaluation suite.

    Attributes:
        svm_reg: Pegasos regularization of the separability SVMs
        svm_epochs: Pegasos passes over the training split
        train_fraction: Share of the data used for fitting
        dci_samples: Codes sampled for DCI (capped at the dataset size)
        lasso_alpha: L1 strength of the DCI regressors
        lasso_max_iterations: Coordinate-descent sweep limit
        lasso_tol: Coordinate-descent convergence threshold
        flip_alpha: Default edit step of flip-rate evaluations
    """
    svm_reg: float = 1e-3
    svm_epochs: int = 20
    train_fraction: float = 0.8
    dci_samples: int = 2000
    lasso_alpha: float = 0.05
    lasso_max_iterations: int = 1000
    lasso_tol: float = 1e-6
    flip_alpha: float = 3.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationSettings":
        return cls(**data)


@dataclass
class EvaluationRequest:
    """
    Parameters shared by the eval-* subcommands.

    Attributes:
        dataset_path: LDS1 dataset to evaluate
        out_path: JSON report path
        model_path: NFM1 model; required for the proxy space and for flip rates
        space: ORIGINAL, PROXY or BOTH
        seed: Seed of splits and samples
        settings: Effective evaluation settings
        attribute_index: Edited attribute for flip rates; None evaluates every attribute
        alpha: Edit step for flip rates; None uses settings.flip_alpha
    """
    dataset_path: str
    out_path: str
    model_path: Optional[str] = None
    space: SpaceSelector = SpaceSelector.ORIGINAL
    seed: int = 0
    settings: EvaluationSettings = field(default_factory=EvaluationSettings)
    attribute_index: Optional[int] = None
    alpha: Optional[float] = None

    def config_echo(self) -> dict:
        return {
            "space": self.space.value,
            "seed": self.seed,
            "settings": self.settings.to_dict(),
            "attribute_index": self.attribute_index,
            "alpha": self.alpha
        }


@dataclass
class EvaluationResponse:
    """Report written by an eval-* subcommand."""
    out_path: str
    report: dict

    def to_dict(self) -> dict:
        return {"out_path": self.out_path, "report": self.report}
