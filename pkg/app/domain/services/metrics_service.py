# domain/services/metrics_service.py

import logging
import math
from typing import List, Optional, Tuple

import torch

from domain.model.entities.classifier import ClassifierBank, LatentSpace, SvmHyperplane
from domain.model.entities.errors import ConfigurationError, DataError, DegenerateDataError, DimensionError
from domain.model.entities.flow import FlowModel
from domain.model.entities.metrics import (
    DciReport, FlipRateReport, ImportanceMatrix, LassoResult, SeparabilityReport, SpaceComparison
)
from domain.services.autodiff_service import DTYPE, as_matrix
from domain.services.classifier_service import ClassifierService
from domain.services.editor_service import EditorService

logger = logging.getLogger(__name__)


def soft_threshold(x: float, threshold: float) -> float:
    if x > threshold:
        return x - threshold
    if x < -threshold:
        return x + threshold
    return 0.0


def _normalized_entropy(probabilities: torch.Tensor, base: int) -> torch.Tensor:
    """Row-wise entropy in the given base; 0 log 0 = 0 and base 1 gives 0."""
    if base <= 1:
        return torch.zeros(probabilities.shape[0], dtype=DTYPE)
    logs = torch.where(probabilities > 0, torch.log(probabilities), torch.zeros_like(probabilities))
    return -(probabilities * logs).sum(dim=1) / math.log(base)


class MetricsService:
    """
    Quantitative evaluation of a latent space.

    - separability: validation accuracy of fresh linear SVMs
    - lasso_fit / dci_scores / dci: disentanglement, completeness, informativeness
    - flip_rate: non-target decision changes caused by an edit
    """

    def __init__(self, classifier_service: Optional[ClassifierService] = None,
                 editor_service: Optional[EditorService] = None):
        self.classifier_service = classifier_service or ClassifierService()
        self.editor_service = editor_service or EditorService()

    def separability(self, codes: torch.Tensor, labels: torch.Tensor, attribute_names: List[str],
                     space: LatentSpace = LatentSpace.ORIGINAL, seed: int = 0, reg: float = 1e-3,
                     epochs: int = 20, train_fraction: float = 0.8) -> SeparabilityReport:
        """
        Trains one SVM per attribute on a seeded split and reports validation accuracy.

        Raises:
            DataError: When every attribute is single-class in the training split
        """
        matrix = as_matrix(codes)
        train, validation = self.classifier_service.train_validation_split(matrix.shape[0], train_fraction, seed)
        names, accuracies, skipped = [], [], []
        for index, name in enumerate(attribute_names):
            try:
                hyperplane = self.classifier_service.train_svm(
                    matrix[train], labels[train, index], index, reg=reg, epochs=epochs, seed=seed + index, space=space
                )
            except DegenerateDataError as e:
                logger.warning("Skipping attribute '%s' in separability: %s", name, e)
                skipped.append(name)
                continue
            names.append(name)
            accuracies.append(self.classifier_service.svm_accuracy(hyperplane, matrix[validation],
                                                                   labels[validation, index]))

        if not accuracies:
            logger.error("Every attribute is degenerate; separability is undefined")
            raise DataError("All attributes are single-class; no separability can be measured")

        report = SeparabilityReport(space=space.value, attribute_names=names, accuracies=accuracies, skipped=skipped)
        logger.info("Separability in %s space: min %.4f, max %.4f, mean %.4f", space.value,
                    report.min_accuracy, report.max_accuracy, report.mean_accuracy)
        return report

    def lasso_fit(self, codes, targets, alpha: float, max_iterations: int = 1000,
                  tol: float = 1e-6) -> LassoResult:
        """
        Minimizes (1/2N)||y - X beta - beta0||^2 + alpha ||beta||_1 by cyclic coordinate descent.

        Features are centered and scaled to unit (population) variance first, so
        every active coordinate update is a plain soft-threshold. Constant
        features keep a zero coefficient. The intercept is mean(y).

        Args:
            codes: (N, D) design matrix
            targets: (N,) responses
            alpha: L1 strength (>= 0)
            max_iterations: Maximum number of sweeps
            tol: Convergence threshold on the largest coefficient change of a sweep

        Returns:
            LassoResult: Standardized-unit coefficients and the objective of every sweep

        Raises:
            DataError: For N < 2, non-finite inputs or mismatched lengths
        """
        x = as_matrix(codes)
        y = torch.as_tensor(targets, dtype=DTYPE).reshape(-1)
        if x.shape[0] < 2:
            raise DataError(f"Lasso needs at least 2 samples, got {x.shape[0]}")
        if y.shape[0] != x.shape[0]:
            raise DimensionError(f"{x.shape[0]} rows but {y.shape[0]} targets")
        if not bool(torch.isfinite(x).all()) or not bool(torch.isfinite(y).all()):
            raise DataError("Lasso inputs must be finite")
        if alpha < 0:
            raise ConfigurationError(f"Lasso alpha must be non-negative, got {alpha}")

        n, d = x.shape
        means = x.mean(dim=0)
        scales = x.std(dim=0, unbiased=False)
        active = scales > 0
        scales = torch.where(active, scales, torch.ones_like(scales))
        standardized = (x - means) / scales
        intercept = float(y.mean())
        centered = y - intercept

        gram = standardized.T @ standardized / n
        correlation = standardized.T @ centered / n
        offset = float(centered.dot(centered)) / (2.0 * n)
        active_columns = torch.nonzero(active).reshape(-1).tolist()
        beta = torch.zeros(d, dtype=DTYPE)

        def objective() -> float:
            return float(offset - correlation.dot(beta) + 0.5 * beta.dot(gram @ beta) + alpha * beta.abs().sum())

        history = [objective()]
        converged = False
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            largest_change = 0.0
            for j in active_columns:
                current = float(beta[j])
                partial = float(correlation[j] - gram[j].dot(beta)) + float(gram[j, j]) * current
                updated = soft_threshold(partial, alpha) / float(gram[j, j])
                largest_change = max(largest_change, abs(updated - current))
                beta[j] = updated
            history.append(objective())
            if largest_change < tol:
                converged = True
                break

        if not converged:
            logger.warning("Lasso did not converge in %d sweeps (alpha=%g)", max_iterations, alpha)
        logger.debug("Lasso finished after %d sweeps with %d non-zero coefficients", iterations,
                     int((beta != 0.0).sum()))
        return LassoResult(coefficients=beta, intercept=intercept,
                           feature_means=means, feature_scales=scales, objective_history=history,
                           iterations=iterations, converged=converged)

    def dci_scores(self, importance, informativeness: float = 0.0) -> DciReport:
        """
        Aggregates an importance matrix into disentanglement and completeness.

        D = sum_d rho_d (1 - H_K(p_.d)) with p_kd = R_kd / sum_k R_kd and
        rho_d = sum_k R_kd / sum R; C = mean_k (1 - H_D(q_k.)) with
        q_kd = R_kd / sum_d R_kd. Zero rows and columns score 0.
        """
        values = importance.values if isinstance(importance, ImportanceMatrix) else as_matrix(importance)
        if bool((values < 0).any()) or not bool(torch.isfinite(values).all()):
            raise DataError("Importance matrix entries must be finite and non-negative")
        num_attributes, dim = values.shape
        total = float(values.sum())
        if total == 0.0:
            logger.warning("Importance matrix is identically zero; reporting a degenerate DCI")
            return DciReport(disentanglement=0.0, completeness=0.0, informativeness=informativeness,
                             dimension_scores=[0.0] * dim, attribute_scores=[0.0] * num_attributes,
                             degenerate=True)

        column_sums = values.sum(dim=0)
        used = column_sums > 0
        safe_columns = torch.where(used, column_sums, torch.ones_like(column_sums))
        dimension_scores = torch.where(
            used, 1.0 - _normalized_entropy((values / safe_columns).T, num_attributes), torch.zeros(dim, dtype=DTYPE)
        )
        disentanglement = float((dimension_scores * column_sums / total).sum())

        row_sums = values.sum(dim=1)
        informative = row_sums > 0
        safe_rows = torch.where(informative, row_sums, torch.ones_like(row_sums))
        attribute_scores = torch.where(
            informative, 1.0 - _normalized_entropy(values / safe_rows.unsqueeze(1), dim),
            torch.zeros(num_attributes, dtype=DTYPE)
        )
        completeness = float(attribute_scores.mean())

        return DciReport(disentanglement=disentanglement, completeness=completeness,
                         informativeness=informativeness, dimension_scores=dimension_scores.tolist(),
                         attribute_scores=attribute_scores.tolist())

    def dci(self, codes: torch.Tensor, labels: torch.Tensor, attribute_names: List[str],
            n_samples: int = 2000, alpha: float = 0.05, seed: int = 0, train_fraction: float = 0.8,
            max_iterations: int = 1000, tol: float = 1e-6) -> Tuple[DciReport, ImportanceMatrix]:
        """
        Fits one Lasso per attribute and scores the resulting importance matrix.

        A seeded sample of n_samples codes is split into the first train_fraction
        for fitting and the rest for the informativeness error (predictions
        thresholded at 0.5).

        Raises:
            DataError: If n_samples exceeds the dataset or leaves an empty split
        """
        matrix = as_matrix(codes)
        if n_samples > matrix.shape[0]:
            raise DataError(f"DCI needs {n_samples} samples but the dataset has {matrix.shape[0]}")
        order = torch.randperm(matrix.shape[0], generator=torch.Generator().manual_seed(seed))[:n_samples]
        cut = int(n_samples * train_fraction)
        if cut < 2 or cut >= n_samples:
            raise DataError(f"DCI split of {n_samples} samples at {train_fraction} leaves an empty side")
        train, test = order[:cut], order[cut:]
        targets = labels.to(DTYPE)

        logger.info("Fitting %d Lasso regressors (alpha=%g) on %d samples", len(attribute_names), alpha, cut)
        rows, errors, majority_errors = [], [], []
        for index in range(len(attribute_names)):
            fit = self.lasso_fit(matrix[train], targets[train, index], alpha, max_iterations, tol)
            rows.append(fit.coefficients.abs())
            predicted = (fit.predict(matrix[test]) >= 0.5).to(DTYPE)
            errors.append(float((predicted != targets[test, index]).to(DTYPE).mean()))
            majority = 1.0 if float(targets[train, index].mean()) >= 0.5 else 0.0
            majority_errors.append(float((targets[test, index] != majority).to(DTYPE).mean()))

        importance = ImportanceMatrix(values=torch.stack(rows), attribute_names=list(attribute_names))
        report = self.dci_scores(importance, informativeness=sum(errors) / len(errors))
        if report.degenerate:
            report.informativeness = sum(majority_errors) / len(majority_errors)
        logger.info("DCI: D=%.4f C=%.4f I=%.4f", report.disentanglement, report.completeness,
                    report.informativeness)
        return report, importance

    def flip_rate(self, bank: ClassifierBank, codes, attribute_index: int, alpha: float,
                  space: LatentSpace, hyperplane: SvmHyperplane,
                  model: Optional[FlowModel] = None) -> FlipRateReport:
        """
        Edits every code along one attribute and counts changed bank decisions.

        Decisions are always taken by the frozen bank in the original space.
        """
        matrix = as_matrix(codes)
        if not 0 <= attribute_index < bank.size:
            raise ConfigurationError(f"Attribute index {attribute_index} outside [0, {bank.size})")
        edited = self.editor_service.edit(matrix, hyperplane, alpha, space, model)
        before = self.classifier_service.bank_decisions(bank, matrix)
        after = self.classifier_service.bank_decisions(bank, edited)
        changed = (before != after).to(torch.int64)

        counts = changed.sum(dim=0).tolist()
        others = [i for i in range(bank.size) if i != attribute_index]
        non_target = sum(counts[i] for i in others)
        rate = non_target / (matrix.shape[0] * len(others)) if others else 0.0
        report = FlipRateReport(
            attribute=bank.attribute_names[attribute_index], alpha=alpha, space=space.value, flip_rate=rate,
            target_flip_rate=counts[attribute_index] / matrix.shape[0],
            flip_counts=dict(zip(bank.attribute_names, counts)), num_codes=matrix.shape[0]
        )
        logger.info("Flip rate of '%s' edits (alpha=%g, %s space): %.4f", report.attribute, alpha,
                    space.value, rate)
        return report

    def compare(self, original: dict, proxy: dict) -> SpaceComparison:
        """Pairs two reports of the same metric and computes proxy - original for shared numeric fields."""
        deltas = {
            key: proxy[key] - original[key]
            for key in sorted(set(original) & set(proxy))
            if isinstance(original[key], (int, float)) and isinstance(proxy[key], (int, float))
            and not isinstance(original[key], bool)
        }
        return SpaceComparison(original=original, proxy=proxy, deltas=deltas)
