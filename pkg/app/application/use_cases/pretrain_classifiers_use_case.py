# application/use_cases/pretrain_classifiers_use_case.py

import logging

from domain.model.entities.bundle import ModelBundle
from domain.model.entities.errors import RequestValidationError
from domain.model.entities.training import PretrainRequest, PretrainResponse
from domain.services.autodiff_service import DTYPE
from domain.services.classifier_service import ClassifierService
from domain.services.flow_service import FlowService
from infrastructure.latent_file_repository import LatentFileRepository

logger = logging.getLogger(__name__)


class PretrainClassifiersUseCase:
    """
    Fits and freezes the per-attribute classifier bank in the original space.

    The written model file pairs the bank with an identity flow, which is
    the starting point of proxy training.
    """

    def __init__(self, classifier_service: ClassifierService = None, flow_service: FlowService = None,
                 repository: LatentFileRepository = None):
        self.classifier_service = classifier_service or ClassifierService()
        self.flow_service = flow_service or FlowService()
        self.repository = repository or LatentFileRepository(self.flow_service)

    def execute(self, request: PretrainRequest) -> PretrainResponse:
        logger.info("Executing PretrainClassifiersUseCase")
        try:
            self._validate_request(request)
        except ValueError as e:
            logger.error(f"Request validation failed: {str(e)}")
            raise RequestValidationError(f"Invalid pretrain-classifiers request: {e}") from e

        dataset = self.repository.load_dataset(request.dataset_path)
        bank = self.classifier_service.pretrain_bank(dataset, epochs=request.epochs, lr=request.lr,
                                                     seed=request.seed, batch_size=request.batch_size)
        flow = self.flow_service.init_flow(dataset.dim, request.layers, request.hidden, seed=request.seed)
        bundle = ModelBundle(flow=flow, bank=bank, training_config=request.config_echo(), seed=request.seed)
        self.repository.save_model(bundle, request.out_path)

        decisions = self.classifier_service.bank_decisions(bank, dataset.codes)
        accuracy = (decisions == dataset.labels).to(DTYPE).mean(dim=0).tolist()
        return PretrainResponse(out_path=request.out_path,
                                training_accuracy=dict(zip(bank.attribute_names, accuracy)))

    def _validate_request(self, request: PretrainRequest) -> None:
        if request.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {request.epochs}")
        if request.lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {request.lr}")
        if request.batch_size < 1:
            raise ValueError(f"Batch size must be >= 1, got {request.batch_size}")
        if request.layers < 1:
            raise ValueError(f"Number of coupling layers must be >= 1, got {request.layers}")
        if request.hidden is not None and request.hidden < 1:
            raise ValueError(f"Hidden width must be >= 1, got {request.hidden}")
