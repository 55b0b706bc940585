# application/use_cases/evaluate_dci_use_case.py

import logging

from application.use_cases.evaluation_use_case import EvaluationUseCase

logger = logging.getLogger(__name__)


class EvaluateDciUseCase(EvaluationUseCase):
    """DCI scores from per-attribute Lasso importances."""

    name = "dci"

    def _evaluate(self, dataset, bundle, space, request) -> dict:
        settings = request.settings
        samples = settings.dci_samples
        if samples > dataset.size:
            logger.warning("Dataset has %d codes; using all of them instead of %d DCI samples",
                           dataset.size, samples)
            samples = dataset.size
        report, importance = self.metrics_service.dci(
            self._codes(dataset, bundle, space), dataset.labels, dataset.attribute_names,
            n_samples=samples, alpha=settings.lasso_alpha, seed=request.seed,
            train_fraction=settings.train_fraction, max_iterations=settings.lasso_max_iterations,
            tol=settings.lasso_tol
        )
        result = report.to_dict()
        result["space"] = space.value
        result["num_samples"] = samples
        result["importance"] = importance.to_dict()
        return result
