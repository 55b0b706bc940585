# domain/services/classifier_service.py

import logging
from typing import List, Optional, Tuple, Union

import torch

from domain.model.entities.classifier import (
    ClassifierBank, LatentSpace, LinearAttributeClassifier, SvmHyperplane
)
from domain.model.entities.dataset import LabeledLatentDataset
from domain.model.entities.errors import DataError, DegenerateDataError, DimensionError
from domain.services.autodiff_service import DTYPE, Tape, as_matrix, stable_sigmoid

logger = logging.getLogger(__name__)


class ClassifierService:
    """
    Linear attribute classifiers.

    Two families live here: the logistic bank pretrained in the original space
    and frozen for proxy training, and linear SVMs trained from scratch in
    either space for evaluation and editing directions.
    """

    def classifier_prob(self, classifier: LinearAttributeClassifier,
                        codes) -> Union[float, torch.Tensor]:
        """
        Probability sigmoid(a . w + b) of the positive class.

        Args:
            classifier: Classifier to evaluate
            codes: A single (D,) code or an (N, D) batch

        Returns:
            float for a single code, (N,) tensor for a batch
        """
        single = torch.as_tensor(codes).dim() == 1
        matrix = as_matrix(codes)
        if matrix.shape[1] != classifier.weight.numel():
            raise DimensionError(f"Classifier expects width {classifier.weight.numel()}, got {matrix.shape[1]}")
        probs = stable_sigmoid(matrix @ classifier.weight + classifier.bias)
        return float(probs[0]) if single else probs

    def bank_probabilities(self, bank: ClassifierBank, codes: torch.Tensor) -> torch.Tensor:
        """(N, K) probabilities of every classifier of the bank."""
        return stable_sigmoid(as_matrix(codes) @ bank.weight_matrix() + bank.bias_row())

    def bank_decisions(self, bank: ClassifierBank, codes: torch.Tensor) -> torch.Tensor:
        """(N, K) hard decisions; a score of exactly 0 counts as positive."""
        scores = as_matrix(codes) @ bank.weight_matrix() + bank.bias_row()
        return (scores >= 0).to(torch.uint8)

    def pretrain_bank(self, dataset: LabeledLatentDataset, epochs: int = 50, lr: float = 1e-2,
                      seed: int = 0, batch_size: int = 32) -> ClassifierBank:
        """
        Fits one logistic classifier per attribute in the original space and freezes them.

        Mini-batch gradient descent on the summed per-attribute BCE, zero
        initialization, seeded shuffling. Gradients come from the tape.

        Raises:
            DataError: For an empty dataset or labels outside {0, 1}
        """
        if dataset.size == 0:
            raise DataError("Cannot pretrain classifiers on an empty dataset")
        if bool((dataset.labels > 1).any()):
            raise DataError("Labels must be 0 or 1")

        logger.info("Pretraining %d classifiers on %d codes (%d epochs, lr=%g)",
                    dataset.num_attributes, dataset.size, epochs, lr)
        codes = dataset.codes.to(DTYPE)
        labels = dataset.labels_as_float()
        weight = torch.zeros(dataset.dim, dataset.num_attributes, dtype=DTYPE)
        bias = torch.zeros(1, dataset.num_attributes, dtype=DTYPE)
        generator = torch.Generator().manual_seed(seed)

        for epoch in range(epochs):
            order = torch.randperm(dataset.size, generator=generator)
            epoch_loss = 0.0
            for start in range(0, dataset.size, batch_size):
                index = order[start:start + batch_size]
                tape = Tape()
                w_node = tape.leaf(weight)
                b_node = tape.leaf(bias)
                logits = tape.add(tape.matmul(tape.constant(codes[index]), w_node), b_node)
                loss = self.bce_nodes(tape, logits, tape.constant(labels[index]), len(index))
                grads = tape.backward(loss)
                weight = weight - lr * grads[w_node.node_id]
                bias = bias - lr * grads[b_node.node_id]
                epoch_loss += loss.item() * len(index)
            logger.debug("Pretraining epoch %d: mean BCE %.6f", epoch, epoch_loss / dataset.size)

        classifiers = [
            LinearAttributeClassifier(weight=weight[:, i].clone(), bias=float(bias[0, i]), frozen=True)
            for i in range(dataset.num_attributes)
        ]
        bank = ClassifierBank(classifiers=classifiers, attribute_names=list(dataset.attribute_names))
        accuracy = (self.bank_decisions(bank, codes) == dataset.labels).to(DTYPE).mean(dim=0)
        logger.info("Pretrained bank training accuracy per attribute: %s",
                    ", ".join(f"{name}={acc:.3f}" for name, acc in zip(bank.attribute_names, accuracy.tolist())))
        return bank

    def bce_nodes(self, tape: Tape, logits, targets, batch_size: int):
        """Mean over rows of the per-row BCE summed over columns, from logits."""
        positive = tape.hadamard(targets, tape.log_sigmoid(logits))
        ones = tape.constant(torch.ones_like(targets.value))
        negative = tape.hadamard(tape.sub(ones, targets), tape.log_sigmoid(tape.scale(logits, -1.0)))
        return tape.scale(tape.sum_all(tape.add(positive, negative)), -1.0 / batch_size)

    def train_svm(self, codes: torch.Tensor, labels: torch.Tensor, attribute_index: int,
                  reg: float = 1e-3, epochs: int = 20, seed: int = 0, batch_size: int = 8,
                  space: LatentSpace = LatentSpace.ORIGINAL) -> SvmHyperplane:
        """
        Linear SVM by Pegasos stochastic subgradient descent.

        Minimizes reg/2 ||v||^2 + mean hinge(1 - y (v . w + b)) with y in {-1, +1}.
        The bias is learned as the weight of a constant feature, with step size
        1 / (reg * t) and the suffix average over the second half of the
        iterates returned.

        Args:
            codes: (N, D) training codes
            labels: (N,) labels in {0, 1}
            attribute_index: Attribute the labels belong to
            reg: Regularization strength
            epochs: Passes over the data
            seed: Seed of the per-epoch permutations
            batch_size: Samples per subgradient step

        Returns:
            SvmHyperplane: Averaged hyperplane

        Raises:
            DegenerateDataError: If only one class is present
        """
        x = as_matrix(codes)
        y = labels.reshape(-1).to(DTYPE) * 2.0 - 1.0
        if x.shape[0] == 0:
            raise DataError("Cannot train an SVM on an empty split")
        if bool((y > 0).all()) or bool((y < 0).all()):
            raise DegenerateDataError(f"Attribute {attribute_index} has a single class in the training split")

        augmented = torch.cat([x, torch.ones(x.shape[0], 1, dtype=DTYPE)], dim=1)
        n = augmented.shape[0]
        steps_per_epoch = (n + batch_size - 1) // batch_size
        total_steps = max(1, epochs * steps_per_epoch)
        average_from = total_steps // 2

        generator = torch.Generator().manual_seed(seed)
        v = torch.zeros(augmented.shape[1], dtype=DTYPE)
        average = torch.zeros_like(v)
        averaged = 0
        step = 0
        for _ in range(epochs):
            order = torch.randperm(n, generator=generator)
            for start in range(0, n, batch_size):
                step += 1
                index = order[start:start + batch_size]
                xb, yb = augmented[index], y[index]
                eta = 1.0 / (reg * step)
                violating = (yb * (xb @ v)) < 1.0
                subgradient = (yb[violating].unsqueeze(1) * xb[violating]).sum(dim=0) / len(index)
                v = (1.0 - eta * reg) * v + eta * subgradient
                if step > average_from:
                    averaged += 1
                    average += (v - average) / averaged

        final = average if averaged else v
        logger.debug("SVM for attribute %d trained in %d steps", attribute_index, step)
        return SvmHyperplane(weight=final[:-1].clone(), bias=float(final[-1]),
                             attribute_index=attribute_index, space=space)

    def svm_accuracy(self, hyperplane: SvmHyperplane, codes: torch.Tensor, labels: torch.Tensor) -> float:
        """Fraction of sign-correct predictions on a split."""
        x = as_matrix(codes)
        if x.shape[0] == 0:
            raise DataError("Accuracy needs a non-empty split")
        return float((hyperplane.predict(x) == labels.reshape(-1).to(torch.uint8)).to(DTYPE).mean())

    def svm_objective(self, hyperplane: SvmHyperplane, codes: torch.Tensor, labels: torch.Tensor,
                      reg: float) -> float:
        """reg/2 (||v||^2 + b^2) + mean hinge loss; the bias is regularized as an augmented feature."""
        y = labels.reshape(-1).to(DTYPE) * 2.0 - 1.0
        hinge = torch.clamp(1.0 - y * hyperplane.scores(as_matrix(codes)), min=0.0)
        squared_norm = hyperplane.weight.dot(hyperplane.weight) + hyperplane.bias ** 2
        return float(0.5 * reg * squared_norm + hinge.mean())

    def train_validation_split(self, size: int, fraction: float = 0.8,
                               seed: int = 0) -> Tuple[torch.Tensor, torch.Tensor]:
        """Deterministic permutation split of range(size) into train and validation indices."""
        if size < 2:
            raise DataError(f"Need at least 2 samples to split, got {size}")
        order = torch.randperm(size, generator=torch.Generator().manual_seed(seed))
        cut = min(max(int(size * fraction), 1), size - 1)
        return order[:cut], order[cut:]

    def fit_hyperplanes(self, codes: torch.Tensor, labels: torch.Tensor, space: LatentSpace,
                        reg: float = 1e-3, epochs: int = 20, seed: int = 0,
                        attributes: Optional[List[int]] = None) -> List[SvmHyperplane]:
        """One SVM per attribute on the given codes; degenerate attributes are skipped with a warning."""
        hyperplanes = []
        for index in attributes if attributes is not None else range(labels.shape[1]):
            try:
                hyperplanes.append(self.train_svm(codes, labels[:, index], index, reg=reg,
                                                  epochs=epochs, seed=seed + index, space=space))
            except DegenerateDataError as e:
                logger.warning("Skipping hyperplane: %s", e)
        return hyperplanes
