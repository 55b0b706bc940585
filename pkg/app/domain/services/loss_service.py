# domain/services/loss_service.py

import logging
from typing import Dict, Optional

import torch

from domain.model.entities.autodiff import TapeNode
from domain.model.entities.classifier import ClassifierBank
from domain.model.entities.errors import ContractError, DimensionError
from domain.model.entities.flow import FlowModel
from domain.model.entities.training import LossBreakdown
from domain.services.autodiff_service import DTYPE, Tape, as_matrix
from domain.services.classifier_service import ClassifierService
from domain.services.flow_service import FlowService

logger = logging.getLogger(__name__)


class LossService:
    """
    Supervision losses of the proxy space.

    All losses are built on a tape from the proxy codes z = T(w), so one
    forward pass feeds the attribute, large-margin and preservation terms and
    gradients reach only the flow parameters (the bank enters as constants).
    """

    def __init__(self, flow_service: Optional[FlowService] = None,
                 classifier_service: Optional[ClassifierService] = None):
        self.flow_service = flow_service or FlowService()
        self.classifier_service = classifier_service or ClassifierService()

    # Taped building blocks

    def signed_distance_nodes(self, tape: Tape, bank: ClassifierBank, z: TapeNode) -> TapeNode:
        """(N, K) signed distances d_i . z + b_i / ||a_i||."""
        return tape.add(tape.matmul(z, tape.constant(bank.normal_matrix())),
                        tape.constant(bank.distance_bias_row()))

    def attribute_nodes(self, tape: Tape, bank: ClassifierBank, z: TapeNode, labels: torch.Tensor) -> TapeNode:
        """Mean over the batch of the summed per-attribute BCE of C_i(T(w))."""
        logits = tape.add(tape.matmul(z, tape.constant(bank.weight_matrix())), tape.constant(bank.bias_row()))
        return self.classifier_service.bce_nodes(tape, logits, tape.constant(labels.to(DTYPE)), z.shape[0])

    def large_margin_nodes(self, tape: Tape, bank: ClassifierBank, z: TapeNode, labels: torch.Tensor) -> TapeNode:
        """
        Rewards distance on the correct side and penalizes it on the wrong side.

        m_i is 1 where the sign decision (ties positive) matches the label and is
        re-evaluated at the current z; contribution (1 - 2 m_i) |s_i|.
        """
        distances = self.signed_distance_nodes(tape, bank, z)
        correct = ((distances.value >= 0).to(DTYPE) == labels.to(DTYPE)).to(DTYPE)
        sign = tape.constant(1.0 - 2.0 * correct)
        return tape.mean_all(tape.hadamard(sign, tape.abs(distances)), z.shape[0])

    def preservation_nodes(self, tape: Tape, bank: ClassifierBank, model: FlowModel,
                           params: Dict[str, TapeNode], codes: torch.Tensor, z: TapeNode,
                           edit_attribute: int, edit_step: float) -> TapeNode:
        """
        Change of the non-edited classifiers after an edit in proxy space.

        w_hat = T^-1(T(w) + step * d_j); returns the batch mean of
        sum_{i != j} |C_i(w) - C_i(w_hat)| with C_i evaluated in the original space.
        """
        if not 0 <= edit_attribute < bank.size:
            raise ContractError(f"Edit attribute {edit_attribute} outside [0, {bank.size})")
        if edit_step == 0.0:
            return tape.constant([[0.0]])

        direction = bank.classifiers[edit_attribute].unit_normal().reshape(1, -1) * edit_step
        edited, _ = self.flow_service.inverse_nodes(tape, model, params, tape.add(z, tape.constant(direction)))
        logits = tape.add(tape.matmul(edited, tape.constant(bank.weight_matrix())), tape.constant(bank.bias_row()))
        before = tape.constant(self.classifier_service.bank_probabilities(bank, codes))
        mask = torch.ones(z.shape[0], bank.size, dtype=DTYPE)
        mask[:, edit_attribute] = 0.0
        change = tape.hadamard(tape.constant(mask), tape.abs(tape.sub(before, tape.sigmoid(logits))))
        return tape.mean_all(change, z.shape[0])

    @staticmethod
    def weighted_total(tape: Tape, attribute: TapeNode, large_margin: TapeNode, preservation: TapeNode,
                       lambda_lm: float, lambda_ap: float) -> LossBreakdown:
        """L_a + lambda_lm * L_lm + lambda_ap * L_ap."""
        total = tape.add(attribute, tape.add(tape.scale(large_margin, lambda_lm), tape.scale(preservation, lambda_ap)))
        return LossBreakdown(total=total, attribute=attribute, large_margin=large_margin, preservation=preservation)

    def total_from_proxy(self, tape: Tape, bank: ClassifierBank, model: FlowModel, params: Dict[str, TapeNode],
                         codes: torch.Tensor, z: TapeNode, labels: torch.Tensor, edit_attribute: int,
                         edit_step: float, lambda_lm: float, lambda_ap: float) -> LossBreakdown:
        attribute = self.attribute_nodes(tape, bank, z, labels)
        large_margin = self.large_margin_nodes(tape, bank, z, labels)
        preservation = self.preservation_nodes(tape, bank, model, params, codes, z, edit_attribute, edit_step)
        return self.weighted_total(tape, attribute, large_margin, preservation, lambda_lm, lambda_ap)

    def total_loss(self, bank: ClassifierBank, model: FlowModel, codes, labels: torch.Tensor,
                   edit_attribute: int, edit_step: float, lambda_lm: float = 0.1, lambda_ap: float = 0.1,
                   tape: Optional[Tape] = None, params: Optional[Dict[str, TapeNode]] = None) -> LossBreakdown:
        """
        Builds the full objective on a tape.

        Args:
            bank: Frozen classifier bank
            model: Flow being trained
            codes: (N, D) original-space batch
            labels: (N, K) labels
            edit_attribute: Attribute j edited by the preservation term
            edit_step: Edit magnitude in proxy distance units
            lambda_lm: Large-margin weight
            lambda_ap: Preservation weight
            tape: Tape to record on (a new one by default)
            params: Parameter leaves already bound on tape (bound here by default)

        Returns:
            LossBreakdown: total and component nodes; call tape.backward(result.total)
        """
        tape = tape or Tape()
        params = params if params is not None else self.flow_service.bind_parameters(tape, model)
        matrix = self._check_batch(bank, codes, labels)
        z, _ = self.flow_service.forward_nodes(tape, model, params, tape.constant(matrix))
        return self.total_from_proxy(tape, bank, model, params, matrix, z, labels,
                                     edit_attribute, edit_step, lambda_lm, lambda_ap)

    # Plain evaluations

    def loss_attribute(self, bank: ClassifierBank, model: FlowModel, codes, labels: torch.Tensor) -> float:
        tape, z, _ = self._proxy(bank, model, codes, labels)
        return self.attribute_nodes(tape, bank, z, labels).item()

    def loss_large_margin(self, bank: ClassifierBank, model: FlowModel, codes, labels: torch.Tensor) -> float:
        tape, z, _ = self._proxy(bank, model, codes, labels)
        return self.large_margin_nodes(tape, bank, z, labels).item()

    def loss_attribute_preservation(self, bank: ClassifierBank, model: FlowModel, codes,
                                    edit_attribute: int, edit_step: float) -> float:
        matrix = as_matrix(codes)
        tape = Tape(enabled=False)
        params = self.flow_service.bind_parameters(tape, model, requires_grad=False)
        z, _ = self.flow_service.forward_nodes(tape, model, params, tape.constant(matrix))
        return self.preservation_nodes(tape, bank, model, params, matrix, z, edit_attribute, edit_step).item()

    def _proxy(self, bank: ClassifierBank, model: FlowModel, codes, labels: torch.Tensor):
        matrix = self._check_batch(bank, codes, labels)
        tape = Tape(enabled=False)
        params = self.flow_service.bind_parameters(tape, model, requires_grad=False)
        z, _ = self.flow_service.forward_nodes(tape, model, params, tape.constant(matrix))
        return tape, z, matrix

    def _check_batch(self, bank: ClassifierBank, codes, labels: torch.Tensor) -> torch.Tensor:
        matrix = as_matrix(codes)
        if labels.dim() != 2 or labels.shape != (matrix.shape[0], bank.size):
            raise DimensionError(f"Labels of shape {tuple(labels.shape)} do not match "
                                 f"{matrix.shape[0]} codes and {bank.size} attributes")
        return matrix
