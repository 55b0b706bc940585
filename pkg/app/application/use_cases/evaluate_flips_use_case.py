# application/use_cases/evaluate_flips_use_case.py

import logging

from application.use_cases.evaluation_use_case import EvaluationUseCase
from domain.model.entities.errors import ContractError

logger = logging.getLogger(__name__)


class EvaluateFlipsUseCase(EvaluationUseCase):
    """
    Flip rates of hyperplane edits.

    Every requested attribute is edited by alpha along its stored hyperplane
    of the evaluated space, and the frozen bank counts changed decisions of
    the other attributes.
    """

    name = "flips"
    requires_model = True

    def _evaluate(self, dataset, bundle, space, request) -> dict:
        alpha = request.alpha if request.alpha is not None else request.settings.flip_alpha
        indices = [request.attribute_index] if request.attribute_index is not None else range(bundle.bank.size)
        attributes = {}
        for index in indices:
            hyperplane = bundle.hyperplane_for(space, index)
            if hyperplane is None:
                if request.attribute_index is not None:
                    raise ContractError(f"The model has no {space.value} hyperplane for attribute {index}")
                logger.warning("No %s hyperplane for attribute %d; skipping", space.value, index)
                continue
            report = self.metrics_service.flip_rate(bundle.bank, dataset.codes, index, alpha, space,
                                                    hyperplane, bundle.flow)
            attributes[report.attribute] = report.to_dict()

        rates = [entry["flip_rate"] for entry in attributes.values()]
        return {
            "space": space.value,
            "alpha": alpha,
            "attributes": attributes,
            "mean_flip_rate": sum(rates) / len(rates) if rates else 0.0
        }

    def _compare(self, original: dict, proxy: dict) -> dict:
        comparison = self.metrics_service.compare(original, proxy).to_dict()
        shared = sorted(set(original["attributes"]) & set(proxy["attributes"]))
        comparison["per_attribute_delta"] = {
            name: proxy["attributes"][name]["flip_rate"] - original["attributes"][name]["flip_rate"]
            for name in shared
        }
        comparison["proxy_fewer_flips"] = sum(1 for name in shared
                                              if comparison["per_attribute_delta"][name] < 0)
        return comparison
