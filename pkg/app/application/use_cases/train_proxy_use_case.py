# application/use_cases/train_proxy_use_case.py

import logging

from domain.model.entities.bundle import ModelBundle
from domain.model.entities.classifier import LatentSpace
from domain.model.entities.errors import ConfigurationError, RequestValidationError
from domain.model.entities.training import TrainProxyRequest, TrainProxyResponse
from domain.services.classifier_service import ClassifierService
from domain.services.flow_service import FlowService
from domain.services.trainer_service import TrainerService
from infrastructure.file_repository import FileRepository
from infrastructure.latent_file_repository import LatentFileRepository

logger = logging.getLogger(__name__)


class TrainProxyUseCase:
    """
    Trains the flow against the frozen bank and fits the editing hyperplanes.

    Process Flow:
    1. Load the dataset and the pretrained model file
    2. Optionally re-initialize the flow architecture
    3. Run TrainerService.train_proxy and write the loss log in one piece
    4. Fit one SVM per attribute in both spaces on the training split
    5. Save the trained model file
    """

    def __init__(self, trainer_service: TrainerService = None, classifier_service: ClassifierService = None,
                 flow_service: FlowService = None, repository: LatentFileRepository = None):
        self.flow_service = flow_service or FlowService()
        self.trainer_service = trainer_service or TrainerService(self.flow_service)
        self.classifier_service = classifier_service or ClassifierService()
        self.repository = repository or LatentFileRepository(self.flow_service)

    def execute(self, request: TrainProxyRequest) -> TrainProxyResponse:
        logger.info("Executing TrainProxyUseCase")
        try:
            self._validate_request(request)
        except (ValueError, ConfigurationError) as e:
            logger.error(f"Request validation failed: {str(e)}")
            raise RequestValidationError(f"Invalid train-proxy request: {e}") from e

        dataset = self.repository.load_dataset(request.dataset_path)
        pretrained = self.repository.load_model(request.model_path)
        flow = pretrained.flow
        if request.layers is not None or request.hidden is not None:
            flow = self.flow_service.init_flow(dataset.dim, request.layers or len(flow.layers),
                                               request.hidden, seed=request.config.seed)

        loss_log_path = request.loss_log_path or f"{request.out_path}.losses.jsonl"
        records = []
        try:
            result = self.trainer_service.train_proxy(dataset, pretrained.bank, flow, request.config,
                                                      on_record=lambda record: records.append(record.to_dict()))
        finally:
            # a diverged run still leaves the batches it completed
            FileRepository.save_lines(records, loss_log_path)
        logger.info("Wrote %d loss records to %s", len(records), loss_log_path)

        train, validation = self.classifier_service.train_validation_split(
            dataset.size, request.train_fraction, request.config.seed
        )
        hyperplanes, accuracy = {}, {}
        for space in (LatentSpace.ORIGINAL, LatentSpace.PROXY):
            codes = self.flow_service.to_space(result.model, dataset.codes, space)
            fitted = self.classifier_service.fit_hyperplanes(
                codes[train], dataset.labels[train], space, reg=request.svm_reg,
                epochs=request.svm_epochs, seed=request.config.seed
            )
            hyperplanes[space] = fitted
            accuracy[space.value] = {
                dataset.attribute_names[h.attribute_index]: self.classifier_service.svm_accuracy(
                    h, codes[validation], dataset.labels[validation, h.attribute_index]
                )
                for h in fitted
            }
            logger.info("Editing hyperplanes in %s space: %s", space.value, accuracy[space.value])

        echo = dict(pretrained.training_config)
        echo.update(request.config_echo())
        bundle = ModelBundle(flow=result.model, bank=pretrained.bank, hyperplanes=hyperplanes,
                             training_config=echo, seed=request.config.seed)
        self.repository.save_model(bundle, request.out_path)
        return TrainProxyResponse(out_path=request.out_path, loss_log_path=loss_log_path,
                                  epoch_means=result.epoch_means, hyperplane_accuracy=accuracy)

    def _validate_request(self, request: TrainProxyRequest) -> None:
        request.config.validate()
        if request.layers is not None and request.layers < 1:
            raise ValueError(f"Number of coupling layers must be >= 1, got {request.layers}")
        if request.hidden is not None and request.hidden < 1:
            raise ValueError(f"Hidden width must be >= 1, got {request.hidden}")
        if not 0.0 < request.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {request.train_fraction}")
        if request.svm_reg <= 0:
            raise ValueError(f"SVM regularization must be positive, got {request.svm_reg}")
