# domain/services/editor_service.py

import logging
from typing import Dict, Optional, Union

import torch

from domain.model.entities.classifier import LatentSpace, SvmHyperplane
from domain.model.entities.editing import EditMode, EditRequest, EditResult
from domain.model.entities.errors import ContractError, DimensionError
from domain.model.entities.flow import FlowModel
from domain.services.autodiff_service import DTYPE, as_matrix
from domain.services.flow_service import FlowService

logger = logging.getLogger(__name__)

Step = Union[float, torch.Tensor]


class EditorService:
    """
    Moves latent codes along unit hyperplane normals.

    Steps are in distance units of the editing space. Proxy-space edits go
    through T, translate there and come back with T^-1, so the result is
    always an original-space code.
    """

    def __init__(self, flow_service: Optional[FlowService] = None):
        self.flow_service = flow_service or FlowService()

    def edit_original(self, codes, hyperplane: SvmHyperplane, alpha: Step) -> torch.Tensor:
        """w + alpha * unit(h.weight); alpha may be a scalar or one value per row."""
        matrix = self._check(codes, hyperplane, LatentSpace.ORIGINAL)
        return self._translate(matrix, hyperplane, alpha)

    def edit_proxy(self, model: FlowModel, codes, hyperplane: SvmHyperplane, alpha: Step) -> torch.Tensor:
        """T^-1(T(w) + alpha * unit(h.weight)) for a hyperplane fitted on proxy codes."""
        matrix = self._check(codes, hyperplane, LatentSpace.PROXY)
        proxy, _ = self.flow_service.flow_forward(model, matrix)
        return self.flow_service.flow_inverse(model, self._translate(proxy, hyperplane, alpha))

    def signed_distance(self, hyperplane: SvmHyperplane, codes,
                        model: Optional[FlowModel] = None) -> torch.Tensor:
        """
        (N,) signed distances of original-space codes in the hyperplane's space.

        Proxy hyperplanes need the flow to map the codes first.
        """
        matrix = as_matrix(codes)
        if hyperplane.space == LatentSpace.PROXY:
            if model is None:
                raise ContractError("A proxy-space distance needs the flow model")
            matrix, _ = self.flow_service.flow_forward(model, matrix)
        if matrix.shape[1] != hyperplane.weight.numel():
            raise DimensionError(f"Hyperplane expects width {hyperplane.weight.numel()}, got {matrix.shape[1]}")
        return hyperplane.signed_distance(matrix)

    def edit_to_target(self, codes, hyperplane: SvmHyperplane, target_distance: float,
                       space: LatentSpace, model: Optional[FlowModel] = None) -> EditResult:
        """
        Moves every row so its signed distance in the editing space equals target_distance.

        The per-row step is target_distance minus the current distance.
        """
        before = self.signed_distance(hyperplane, codes, model)
        steps = target_distance - before
        edited = self.edit(codes, hyperplane, steps, space, model)
        return EditResult(codes=edited, distances_before=before,
                          distances_after=self.signed_distance(hyperplane, edited, model), steps=steps)

    def edit(self, codes, hyperplane: SvmHyperplane, alpha: Step, space: LatentSpace,
             model: Optional[FlowModel] = None) -> torch.Tensor:
        if space == LatentSpace.PROXY:
            if model is None:
                raise ContractError("A proxy-space edit needs the flow model")
            return self.edit_proxy(model, codes, hyperplane, alpha)
        return self.edit_original(codes, hyperplane, alpha)

    def apply(self, request: EditRequest, codes, hyperplanes: Dict[int, SvmHyperplane],
              model: Optional[FlowModel] = None) -> EditResult:
        """
        Runs an EditRequest.

        Args:
            request: Attribute, mode, space and magnitude of the edit
            codes: (N, D) original-space codes
            hyperplanes: Hyperplanes of the request's space keyed by attribute index
            model: Flow, required for proxy-space edits

        Returns:
            EditResult: Edited original-space codes and distances in the editing space
        """
        if request.attribute_index not in hyperplanes:
            raise ContractError(f"No {request.space.value} hyperplane for attribute {request.attribute_index}")
        hyperplane = hyperplanes[request.attribute_index]
        logger.info("Editing %d codes along attribute %d in %s space (%s)", as_matrix(codes).shape[0],
                    request.attribute_index, request.space.value, request.mode.value)

        if request.mode == EditMode.TO_TARGET:
            return self.edit_to_target(codes, hyperplane, request.target_distance, request.space, model)

        before = self.signed_distance(hyperplane, codes, model)
        edited = self.edit(codes, hyperplane, request.alpha, request.space, model)
        return EditResult(codes=edited, distances_before=before,
                          distances_after=self.signed_distance(hyperplane, edited, model),
                          steps=torch.full_like(before, request.alpha))

    def _translate(self, matrix: torch.Tensor, hyperplane: SvmHyperplane, alpha: Step) -> torch.Tensor:
        step = torch.as_tensor(alpha, dtype=DTYPE)
        if step.dim() == 1:
            step = step.reshape(-1, 1)
        return matrix + step * hyperplane.unit_normal().reshape(1, -1)

    def _check(self, codes, hyperplane: SvmHyperplane, space: LatentSpace) -> torch.Tensor:
        if hyperplane.space != space:
            raise ContractError(f"Hyperplane of attribute {hyperplane.attribute_index} lives in "
                                f"{hyperplane.space.value} space, not {space.value}")
        matrix = as_matrix(codes)
        if matrix.shape[1] != hyperplane.weight.numel():
            raise DimensionError(f"Hyperplane expects width {hyperplane.weight.numel()}, got {matrix.shape[1]}")
        return matrix
