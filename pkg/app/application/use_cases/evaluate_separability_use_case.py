# application/use_cases/evaluate_separability_use_case.py

import logging

from application.use_cases.evaluation_use_case import EvaluationUseCase

logger = logging.getLogger(__name__)


class EvaluateSeparabilityUseCase(EvaluationUseCase):
    """Linear separability of every attribute (fresh SVMs, validation accuracy)."""

    name = "separability"

    def _evaluate(self, dataset, bundle, space, request) -> dict:
        settings = request.settings
        report = self.metrics_service.separability(
            self._codes(dataset, bundle, space), dataset.labels, dataset.attribute_names, space=space,
            seed=request.seed, reg=settings.svm_reg, epochs=settings.svm_epochs,
            train_fraction=settings.train_fraction
        )
        return report.to_dict()
