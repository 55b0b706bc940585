# application/use_cases/generate_synthetic_use_case.py

import logging

from domain.model.entities.dataset import GenerateSyntheticRequest, GenerateSyntheticResponse
from domain.model.entities.errors import RequestValidationError
from domain.services.synthetic_world_service import SyntheticWorldService
from infrastructure.latent_file_repository import LatentFileRepository

logger = logging.getLogger(__name__)


class GenerateSyntheticUseCase:
    """
    Samples a synthetic entangled world and stores it as an LDS1 dataset.

    Responsibilities:
    1. Validate the world structure and sample count
    2. Generate codes and labels through SyntheticWorldService
    3. Persist the dataset through LatentFileRepository
    """

    def __init__(self, world_service: SyntheticWorldService = None, repository: LatentFileRepository = None):
        self.world_service = world_service or SyntheticWorldService()
        self.repository = repository or LatentFileRepository()

    def execute(self, request: GenerateSyntheticRequest) -> GenerateSyntheticResponse:
        logger.info("Executing GenerateSyntheticUseCase")
        try:
            self._validate_request(request)
        except ValueError as e:
            logger.error(f"Request validation failed: {str(e)}")
            raise RequestValidationError(f"Invalid gen-synthetic request: {e}") from e

        dataset = self.world_service.generate(request.world, request.num_samples, request.seed)
        self.repository.save_dataset(dataset, request.out_path)

        rates = dataset.labels_as_float().mean(dim=0).tolist()
        positive_rates = dict(zip(dataset.attribute_names, rates))
        logger.info("Generated %d codes; positive rates %s", dataset.size,
                    ", ".join(f"{k}={v:.3f}" for k, v in positive_rates.items()))
        return GenerateSyntheticResponse(out_path=request.out_path, num_samples=dataset.size,
                                         positive_rates=positive_rates)

    def _validate_request(self, request: GenerateSyntheticRequest) -> None:
        if request.num_samples < 1:
            raise ValueError(f"Number of samples must be >= 1, got {request.num_samples}")
        if not request.out_path:
            raise ValueError("An output path is required")
