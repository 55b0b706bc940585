# application/use_cases/evaluation_use_case.py

import logging
from typing import Optional

from domain.model.entities.bundle import ModelBundle
from domain.model.entities.classifier import LatentSpace
from domain.model.entities.dataset import LabeledLatentDataset
from domain.model.entities.errors import RequestValidationError
from domain.model.entities.metrics import EvaluationRequest, EvaluationResponse, SpaceSelector
from domain.services.flow_service import FlowService
from domain.services.metrics_service import MetricsService
from infrastructure.file_repository import FileRepository
from infrastructure.latent_file_repository import LatentFileRepository

logger = logging.getLogger(__name__)


class EvaluationUseCase:
    """
    Common workflow of the eval-* subcommands.

    Subclasses implement `_evaluate(dataset, bundle, space, request)` returning a
    report dictionary for one space; this class handles validation, loading,
    the `both` comparison and writing the sorted-key JSON report.
    """

    name = "evaluation"
    requires_model = False

    def __init__(self, metrics_service: MetricsService = None, flow_service: FlowService = None,
                 repository: LatentFileRepository = None):
        self.flow_service = flow_service or FlowService()
        self.metrics_service = metrics_service or MetricsService()
        self.repository = repository or LatentFileRepository(self.flow_service)

    def execute(self, request: EvaluationRequest) -> EvaluationResponse:
        logger.info("Executing %s", type(self).__name__)
        try:
            self._validate_request(request)
        except ValueError as e:
            logger.error(f"Request validation failed: {str(e)}")
            raise RequestValidationError(f"Invalid {self.name} request: {e}") from e

        dataset = self.repository.load_dataset(request.dataset_path)
        bundle = self.repository.load_model(request.model_path) if request.model_path else None

        if request.space == SpaceSelector.BOTH:
            original = self._evaluate(dataset, bundle, LatentSpace.ORIGINAL, request)
            proxy = self._evaluate(dataset, bundle, LatentSpace.PROXY, request)
            results = self._compare(original, proxy)
        else:
            results = self._evaluate(dataset, bundle, LatentSpace(request.space.value), request)

        report = {"metric": self.name, "config": request.config_echo(), "results": results}
        FileRepository.save(report, request.out_path)
        logger.info("Wrote %s report to %s", self.name, request.out_path)
        return EvaluationResponse(out_path=request.out_path, report=report)

    def _evaluate(self, dataset: LabeledLatentDataset, bundle: Optional[ModelBundle], space: LatentSpace,
                  request: EvaluationRequest) -> dict:
        raise NotImplementedError

    def _compare(self, original: dict, proxy: dict) -> dict:
        return self.metrics_service.compare(original, proxy).to_dict()

    def _codes(self, dataset: LabeledLatentDataset, bundle: Optional[ModelBundle], space: LatentSpace):
        return self.flow_service.to_space(bundle.flow if bundle else None, dataset.codes, space)

    def _validate_request(self, request: EvaluationRequest) -> None:
        settings = request.settings
        if request.space != SpaceSelector.ORIGINAL and not request.model_path:
            raise ValueError(f"--space {request.space.value} needs a model file")
        if self.requires_model and not request.model_path:
            raise ValueError(f"{self.name} needs a model file")
        if not 0.0 < settings.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {settings.train_fraction}")
        if settings.svm_reg <= 0:
            raise ValueError(f"svm_reg must be positive, got {settings.svm_reg}")
        if settings.dci_samples < 2:
            raise ValueError(f"dci_samples must be >= 2, got {settings.dci_samples}")
        if settings.lasso_alpha < 0:
            raise ValueError(f"lasso_alpha must be non-negative, got {settings.lasso_alpha}")
