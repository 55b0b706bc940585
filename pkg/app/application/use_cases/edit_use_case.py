# application/use_cases/edit_use_case.py

import logging

from domain.model.entities.classifier import LatentSpace
from domain.model.entities.editing import EditCommandRequest, EditCommandResponse, MAX_ABLATION_STEP
from domain.model.entities.errors import RequestValidationError
from domain.services.editor_service import EditorService
from domain.services.flow_service import FlowService
from infrastructure.file_repository import FileRepository
from infrastructure.latent_file_repository import LatentFileRepository

logger = logging.getLogger(__name__)


class EditUseCase:
    """
    Applies a hyperplane edit to every code of a dataset.

    The edited codes are written as a new LDS1 dataset with the original
    labels, so they can be evaluated or plotted like any other dataset.
    """

    def __init__(self, editor_service: EditorService = None, flow_service: FlowService = None,
                 repository: LatentFileRepository = None):
        self.flow_service = flow_service or FlowService()
        self.editor_service = editor_service or EditorService(self.flow_service)
        self.repository = repository or LatentFileRepository(self.flow_service)

    def execute(self, request: EditCommandRequest) -> EditCommandResponse:
        logger.info("Executing EditUseCase")
        dataset = self.repository.load_dataset(request.dataset_path)
        bundle = self.repository.load_model(request.model_path)
        try:
            self._validate_request(request, bundle.bank.size)
        except ValueError as e:
            logger.error(f"Request validation failed: {str(e)}")
            raise RequestValidationError(f"Invalid edit request: {e}") from e

        edit = request.edit
        result = self.editor_service.apply(edit, dataset.codes, bundle.hyperplane_map(edit.space),
                                           bundle.flow if edit.space == LatentSpace.PROXY else None)
        self.repository.save_dataset(dataset.map_codes(lambda _: result.codes), request.out_path)

        written = [request.out_path]
        response = EditCommandResponse(
            out_path=request.out_path, num_codes=dataset.size,
            attribute_name=bundle.bank.attribute_names[edit.attribute_index],
            mean_distance_before=float(result.distances_before.mean()),
            mean_distance_after=float(result.distances_after.mean()), written=written
        )
        if request.report_path:
            results = {
                "attribute_name": response.attribute_name,
                "num_codes": response.num_codes,
                "mean_distance_before": response.mean_distance_before,
                "mean_distance_after": response.mean_distance_after
            }
            FileRepository.save({"config": edit.to_dict(), "results": results}, request.report_path)
            written.append(request.report_path)
        return response

    def _validate_request(self, request: EditCommandRequest, num_attributes: int) -> None:
        request.edit.validate(num_attributes)
        if abs(request.edit.alpha) > MAX_ABLATION_STEP:
            logger.warning("Edit step %.3f exceeds the usual upper bound of %.1f", request.edit.alpha,
                           MAX_ABLATION_STEP)
