# domain/services/trainer_service.py

import logging
import math
from typing import Callable, List, Optional

import torch

from domain.model.entities.classifier import ClassifierBank
from domain.model.entities.dataset import LabeledLatentDataset
from domain.model.entities.errors import ContractError, DataError, DimensionError, TrainingDivergedError
from domain.model.entities.flow import FlowModel
from domain.model.entities.training import AdamState, LossRecord, TrainConfig, TrainingResult
from domain.services.autodiff_service import DTYPE, Tape
from domain.services.flow_service import FlowService
from domain.services.loss_service import LossService
from domain.services.optimizer_service import AdamOptimizer

logger = logging.getLogger(__name__)

EDIT_RANGE_MEDIAN_FACTOR = 3.0


class TrainerService:
    """
    Optimizes the flow T against the frozen classifier bank.

    Responsibilities:
    - Seeded mini-batching over the original-space dataset
    - Sampling the edited attribute and edit step of every batch
    - Building the total loss on a tape and applying Adam to the flow only
    - Aborting with diagnostics when the loss stops being finite
    """

    def __init__(self, flow_service: Optional[FlowService] = None,
                 loss_service: Optional[LossService] = None,
                 optimizer: Optional[AdamOptimizer] = None):
        self.flow_service = flow_service or FlowService()
        self.loss_service = loss_service or LossService(self.flow_service)
        self.optimizer = optimizer or AdamOptimizer()

    def train_proxy(self, dataset: LabeledLatentDataset, bank: ClassifierBank, model: FlowModel,
                    config: TrainConfig,
                    on_record: Optional[Callable[[LossRecord], None]] = None) -> TrainingResult:
        """
        Trains a copy of the flow.

        Args:
            dataset: Labeled original-space codes
            bank: Frozen classifier bank; never modified
            model: Starting flow; never modified
            config: Training hyperparameters
            on_record: Optional callback receiving every LossRecord as it is produced

        Returns:
            TrainingResult: Trained copy, per-batch loss log and per-epoch means

        Raises:
            ContractError: The bank is not frozen
            TrainingDivergedError: A loss became NaN or infinite
        """
        config.validate()
        self._validate_inputs(dataset, bank, model)

        trained = model.clone()
        params = trained.parameters()
        state = AdamState()
        generator = torch.Generator().manual_seed(config.seed)
        weights = config.effective_weights()
        codes = dataset.codes.to(DTYPE)
        labels = dataset.labels

        loss_log: List[LossRecord] = []
        epoch_means: List[float] = []
        logger.info("Training proxy flow: %d codes, %d epochs, batch %d, lambda_lm=%g, lambda_ap=%g (%s)",
                    dataset.size, config.epochs, config.batch_size,
                    weights["lambda_lm"], weights["lambda_ap"], config.variant.value)

        for epoch in range(config.epochs):
            order = torch.randperm(dataset.size, generator=generator)
            epoch_total = 0.0
            for batch, start in enumerate(range(0, dataset.size, config.batch_size)):
                index = order[start:start + config.batch_size]
                record = self._train_batch(trained, params, state, bank, codes[index], labels[index],
                                           config, weights, generator, epoch, batch,
                                           loss_log[-1] if loss_log else None)
                loss_log.append(record)
                epoch_total += record.total * len(index)
                if on_record is not None:
                    on_record(record)
            epoch_means.append(epoch_total / dataset.size)
            logger.info("Epoch %d/%d: mean total loss %.6f", epoch + 1, config.epochs, epoch_means[-1])

        return TrainingResult(model=trained, loss_log=loss_log, epoch_means=epoch_means)

    def _train_batch(self, model: FlowModel, params, state: AdamState, bank: ClassifierBank,
                     codes: torch.Tensor, labels: torch.Tensor, config: TrainConfig, weights,
                     generator: torch.Generator, epoch: int, batch: int,
                     last_record: Optional[LossRecord]) -> LossRecord:
        tape = Tape()
        nodes = self.flow_service.bind_parameters(tape, model)
        z, _ = self.flow_service.forward_nodes(tape, model, nodes, tape.constant(codes))

        edit_attribute = int(torch.randint(0, bank.size, (1,), generator=generator))
        edit_range = self._edit_range(bank, z.value, config)
        edit_step = float((torch.rand(1, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * edit_range)
        applied_step = edit_step if weights["lambda_ap"] > 0 else 0.0

        breakdown = self.loss_service.total_from_proxy(
            tape, bank, model, nodes, codes, z, labels, edit_attribute, applied_step,
            weights["lambda_lm"], weights["lambda_ap"]
        )
        values = breakdown.values()
        if not all(math.isfinite(v) for v in values.values()):
            logger.error("Non-finite loss at epoch %d, batch %d: %s", epoch, batch, values)
            raise TrainingDivergedError(
                f"Training diverged at epoch {epoch}, batch {batch}: {values}",
                epoch=epoch, batch=batch,
                last_record=last_record.to_dict() if last_record else None
            )

        grads_by_id = tape.backward(breakdown.total)
        grads = {name: grads_by_id[node.node_id] for name, node in nodes.items()}
        self.optimizer.adam_step(params, grads, state, config)

        logger.debug("Epoch %d batch %d: %s (edit attr %d, step %.4f)", epoch, batch, values,
                     edit_attribute, edit_step)
        return LossRecord(epoch=epoch, batch=batch, edit_attribute=edit_attribute, edit_step=edit_step, **values)

    def _edit_range(self, bank: ClassifierBank, z: torch.Tensor, config: TrainConfig) -> float:
        if config.edit_step_range is not None:
            return config.edit_step_range
        distances = z @ bank.normal_matrix() + bank.distance_bias_row()
        return EDIT_RANGE_MEDIAN_FACTOR * float(torch.median(torch.abs(distances)))

    def _validate_inputs(self, dataset: LabeledLatentDataset, bank: ClassifierBank, model: FlowModel) -> None:
        if dataset.size == 0:
            raise DataError("Cannot train on an empty dataset")
        if not bank.frozen:
            raise ContractError("The classifier bank must be pretrained and frozen before proxy training")
        if dataset.dim != model.dim or bank.dim != model.dim:
            raise DimensionError(f"Dataset width {dataset.dim}, bank width {bank.dim} and flow width "
                                 f"{model.dim} must agree")
        if dataset.num_attributes != bank.size:
            raise DimensionError(f"Dataset has {dataset.num_attributes} attributes, bank has {bank.size}")
