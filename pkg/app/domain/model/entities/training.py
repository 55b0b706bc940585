# domain/model/entities/training.py

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import torch

from domain.model.entities.autodiff import TapeNode
from domain.model.entities.errors import ConfigurationError
from domain.model.entities.flow import FlowModel


class TrainingVariant(Enum):
    """
    Which supervision terms are active.

    Options:
        FULL: Attribute, large-margin and attribute-preservation losses
        ATTRIBUTE_ONLY: Attribute loss alone (the ablation without margin and preservation terms)
    """
    FULL = "full"
    ATTRIBUTE_ONLY = "attribute-only"


@dataclass
class TrainConfig:
    """
    Hyperparameters of proxy-space training.

    Attributes:
        lambda_lm: Weight of the large-margin loss
        lambda_ap: Weight of the attribute-preservation loss
        lr: Adam learning rate
        beta1: Adam first-moment decay
        beta2: Adam second-moment decay
        eps: Adam denominator floor
        batch_size: Codes per mini-batch
        epochs: Passes over the dataset
        edit_step_range: Half-width r of the uniform edit step U[-r, r];
            None means 3x the median |signed distance| of each batch
        seed: Seed of batching and edit sampling
        variant: FULL or ATTRIBUTE_ONLY
    """
    lambda_lm: float = 0.1
    lambda_ap: float = 0.1
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    epochs: int = 5
    edit_step_range: Optional[float] = None
    seed: int = 0
    variant: TrainingVariant = TrainingVariant.FULL

    def validate(self) -> None:
        if self.lambda_lm < 0 or self.lambda_ap < 0:
            raise ConfigurationError("Loss weights must be non-negative")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ConfigurationError("Adam betas must lie in (0, 1)")
        if self.lr <= 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.edit_step_range is not None and self.edit_step_range < 0:
            raise ConfigurationError("edit_step_range must be non-negative")

    def effective_weights(self) -> Dict[str, float]:
        if self.variant == TrainingVariant.ATTRIBUTE_ONLY:
            return {"lambda_lm": 0.0, "lambda_ap": 0.0}
        return {"lambda_lm": self.lambda_lm, "lambda_ap": self.lambda_ap}

    def to_dict(self) -> dict:
        data = asdict(self)
        data["variant"] = self.variant.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        values = dict(data)
        if "variant" in values:
            values["variant"] = TrainingVariant(values["variant"])
        return cls(**values)


@dataclass
class AdamState:
    """
    Adam moment estimates.

    Attributes:
        first_moment: Per-parameter running mean of gradients
        second_moment: Per-parameter running mean of squared gradients
        step: Number of updates applied so far
    """
    first_moment: Dict[str, torch.Tensor] = field(default_factory=dict)
    second_moment: Dict[str, torch.Tensor] = field(default_factory=dict)
    step: int = 0


@dataclass
class LossBreakdown:
    """Taped total loss with its three components."""
    total: TapeNode
    attribute: TapeNode
    large_margin: TapeNode
    preservation: TapeNode

    def values(self) -> Dict[str, float]:
        return {
            "attribute": self.attribute.item(),
            "large_margin": self.large_margin.item(),
            "preservation": self.preservation.item(),
            "total": self.total.item()
        }


@dataclass
class LossRecord:
    """One line of the training loss log."""
    epoch: int
    batch: int
    attribute: float
    large_margin: float
    preservation: float
    total: float
    edit_attribute: int
    edit_step: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingResult:
    """
    Output of proxy training.

    Attributes:
        model: Trained flow (a copy; the input model is left untouched)
        loss_log: One record per batch
        epoch_means: Mean total loss of every epoch
    """
    model: FlowModel
    loss_log: List[LossRecord]
    epoch_means: List[float]


@dataclass
class PretrainRequest:
    """
    Parameters of the `pretrain-classifiers` subcommand.

    Attributes:
        dataset_path: LDS1 training dataset
        out_path: NFM1 destination (identity flow plus frozen bank)
        epochs: Gradient-descent passes
        lr: Learning rate
        batch_size: Codes per step
        seed: Seed of the shuffling and of the flow initialization
        layers: Coupling layers of the identity flow written alongside the bank
        hidden: Hidden width of that flow (None means D)
    """
    dataset_path: str
    out_path: str
    epochs: int = 50
    lr: float = 1e-2
    batch_size: int = 32
    seed: int = 0
    layers: int = 3
    hidden: Optional[int] = None

    def config_echo(self) -> dict:
        return {
            "pretrain": {"epochs": self.epochs, "lr": self.lr, "batch_size": self.batch_size},
            "layers": self.layers,
            "hidden": self.hidden,
            "seed": self.seed
        }


@dataclass
class PretrainResponse:
    out_path: str
    training_accuracy: Dict[str, float]

    def to_dict(self) -> dict:
        return {"out_path": self.out_path, "training_accuracy": self.training_accuracy}


@dataclass
class TrainProxyRequest:
    """
    Parameters of the `train-proxy` subcommand.

    Attributes:
        dataset_path: LDS1 training dataset
        model_path: NFM1 file written by pretrain-classifiers
        out_path: NFM1 destination of the trained model
        config: Proxy training hyperparameters
        layers: Re-initialize the flow with this many layers (None keeps the stored flow)
        hidden: Hidden width used when re-initializing (None means D)
        loss_log_path: JSON-lines destination of the per-batch losses
        svm_reg: Regularization of the editing hyperplanes
        svm_epochs: Pegasos passes for the editing hyperplanes
        train_fraction: Share of the dataset the hyperplanes are fitted on
    """
    dataset_path: str
    model_path: str
    out_path: str
    config: TrainConfig = field(default_factory=TrainConfig)
    layers: Optional[int] = None
    hidden: Optional[int] = None
    loss_log_path: Optional[str] = None
    svm_reg: float = 1e-3
    svm_epochs: int = 20
    train_fraction: float = 0.8

    def config_echo(self) -> dict:
        return {
            "train": self.config.to_dict(),
            "layers": self.layers,
            "hidden": self.hidden,
            "hyperplanes": {"svm_reg": self.svm_reg, "svm_epochs": self.svm_epochs,
                            "train_fraction": self.train_fraction}
        }


@dataclass
class TrainProxyResponse:
    """
    Outcome of `train-proxy`.

    Attributes:
        out_path: Model file written
        loss_log_path: Loss log written
        epoch_means: Mean total loss per epoch
        hyperplane_accuracy: Validation accuracy of the fitted hyperplanes per space and attribute
    """
    out_path: str
    loss_log_path: str
    epoch_means: List[float]
    hyperplane_accuracy: Dict[str, Dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "out_path": self.out_path,
            "loss_log_path": self.loss_log_path,
            "epoch_means": self.epoch_means,
            "hyperplane_accuracy": self.hyperplane_accuracy
        }
