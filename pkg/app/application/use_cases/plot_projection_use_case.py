# application/use_cases/plot_projection_use_case.py

import logging

from domain.model.entities.errors import ContractError, RequestValidationError
from domain.model.entities.projection import PlotRequest, PlotResponse
from domain.services.flow_service import FlowService
from domain.services.projection_service import ProjectionService
from infrastructure.latent_file_repository import LatentFileRepository
from infrastructure.svg_plot_writer import SvgPlotWriter

logger = logging.getLogger(__name__)


class PlotProjectionUseCase:
    """Scatter plot of a dataset on the plane of two stored hyperplane normals."""

    def __init__(self, projection_service: ProjectionService = None, flow_service: FlowService = None,
                 repository: LatentFileRepository = None, writer: SvgPlotWriter = None):
        self.projection_service = projection_service or ProjectionService()
        self.flow_service = flow_service or FlowService()
        self.repository = repository or LatentFileRepository(self.flow_service)
        self.writer = writer or SvgPlotWriter()

    def execute(self, request: PlotRequest) -> PlotResponse:
        logger.info("Executing PlotProjectionUseCase")
        dataset = self.repository.load_dataset(request.dataset_path)
        bundle = self.repository.load_model(request.model_path)
        try:
            self._validate_request(request, bundle.bank.size)
        except ValueError as e:
            logger.error(f"Request validation failed: {str(e)}")
            raise RequestValidationError(f"Invalid plot2d request: {e}") from e

        if request.max_points is not None:
            dataset = dataset.subset(slice(0, request.max_points))
        axes = []
        for index in (request.attr_x, request.attr_y):
            hyperplane = bundle.hyperplane_for(request.space, index)
            if hyperplane is None:
                raise ContractError(f"The model has no {request.space.value} hyperplane for attribute {index}")
            axes.append(hyperplane)

        codes = self.flow_service.to_space(bundle.flow, dataset.codes, request.space)
        projection = self.projection_service.project(codes, dataset.labels, axes[0], axes[1],
                                                     dataset.attribute_names, request.color_attr,
                                                     request.space, request.style_rows)
        self.writer.save(projection, request.out_path)
        return PlotResponse(out_path=request.out_path, num_points=projection.size, space=request.space.value)

    def _validate_request(self, request: PlotRequest, num_attributes: int) -> None:
        for label, index in (("attr-x", request.attr_x), ("attr-y", request.attr_y),
                             ("color-attr", request.color_attr)):
            if not 0 <= index < num_attributes:
                raise ValueError(f"{label} {index} outside [0, {num_attributes})")
        if request.style_rows < 1:
            raise ValueError(f"style_rows must be >= 1, got {request.style_rows}")
        if request.max_points is not None and request.max_points < 1:
            raise ValueError(f"max_points must be >= 1, got {request.max_points}")
