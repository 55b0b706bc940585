# tests/domain/services/test_classifier_service.py

import math

import pytest
import torch

from conftest import make_bank
from domain.model.entities.classifier import LatentSpace, LinearAttributeClassifier, SvmHyperplane
from domain.model.entities.dataset import LabeledLatentDataset
from domain.model.entities.errors import DataError, DegenerateDataError, DimensionError
from domain.services.autodiff_service import Tape
from domain.services.classifier_service import ClassifierService


@pytest.fixture
def service():
    return ClassifierService()


def _separable(n=400, dim=6, seed=0):
    generator = torch.Generator().manual_seed(seed)
    direction = torch.randn(dim, generator=generator, dtype=torch.float64)
    direction = direction / direction.norm()
    codes = torch.randn(n, dim, generator=generator, dtype=torch.float64)
    margin = codes @ direction
    codes = codes + torch.sign(margin).unsqueeze(1) * 0.5 * direction
    labels = (codes @ direction > 0).to(torch.uint8)
    return codes, labels, direction


def test_classifier_prob_values(service):
    classifier = LinearAttributeClassifier(weight=torch.tensor([1.0, 0.0], dtype=torch.float64), bias=0.0)
    assert service.classifier_prob(classifier, [0.0, 5.0]) == 0.5
    assert service.classifier_prob(classifier, [math.log(3.0), 0.0]) == pytest.approx(0.75)
    batch = service.classifier_prob(classifier, [[0.0, 0.0], [math.log(3.0), 1.0]])
    torch.testing.assert_close(batch, torch.tensor([0.5, 0.75], dtype=torch.float64))
    with pytest.raises(DimensionError):
        service.classifier_prob(classifier, [1.0, 2.0, 3.0])


def test_bce_sums_attributes_and_averages_rows(service):
    tape = Tape()
    logits = tape.constant([[math.log(9.0), math.log(0.25)]])
    targets = tape.constant([[1.0, 0.0]])
    loss = service.bce_nodes(tape, logits, targets, 1)
    assert loss.item() == pytest.approx(-(math.log(0.9) + math.log(0.8)), abs=1e-12)
    assert loss.item() == pytest.approx(0.3285, abs=1e-4)


def test_bank_decisions_count_ties_as_positive(service):
    bank = make_bank([[1.0, 0.0], [0.0, 1.0]], [0.0, -1.0])
    decisions = service.bank_decisions(bank, torch.tensor([[0.0, 1.0], [-1.0, 0.5]], dtype=torch.float64))
    assert decisions.tolist() == [[1, 1], [0, 0]]
    probabilities = service.bank_probabilities(bank, torch.zeros(1, 2, dtype=torch.float64))
    torch.testing.assert_close(probabilities, torch.tensor([[0.5, 1.0 / (1.0 + math.e)]], dtype=torch.float64))


def test_pretrain_bank_learns_and_freezes(service):
    codes, labels, _ = _separable()
    dataset = LabeledLatentDataset(codes=codes, labels=labels.unsqueeze(1), attribute_names=["smile"])
    bank = service.pretrain_bank(dataset, epochs=20, lr=0.1, seed=0)
    assert bank.frozen
    assert bank.attribute_names == ["smile"]
    accuracy = (service.bank_decisions(bank, codes) == dataset.labels).to(torch.float64).mean()
    assert float(accuracy) >= 0.95


def test_pretrain_bank_is_deterministic(service, small_dataset):
    first = service.pretrain_bank(small_dataset, epochs=3, seed=4)
    second = service.pretrain_bank(small_dataset, epochs=3, seed=4)
    assert first.state_snapshot() == second.state_snapshot()


def test_pretrain_bank_rejects_empty_dataset(service):
    empty = LabeledLatentDataset(codes=torch.zeros(0, 4, dtype=torch.float64),
                                 labels=torch.zeros(0, 1, dtype=torch.uint8), attribute_names=["a"])
    with pytest.raises(DataError):
        service.pretrain_bank(empty)


def test_svm_recovers_separating_direction(service):
    codes, labels, direction = _separable(seed=2)
    hyperplane = service.train_svm(codes, labels, 0, reg=1e-3, epochs=20, seed=0)
    assert hyperplane.space == LatentSpace.ORIGINAL
    assert float(hyperplane.unit_normal() @ direction) > 0.9
    assert service.svm_accuracy(hyperplane, codes, labels) >= 0.9


def test_svm_single_class_is_degenerate(service):
    codes = torch.randn(10, 3, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    with pytest.raises(DegenerateDataError):
        service.train_svm(codes, torch.ones(10, dtype=torch.uint8), 0)


def test_fit_hyperplanes_skips_degenerate_attributes(service, caplog):
    codes, labels, _ = _separable(n=100)
    stacked = torch.stack([labels, torch.zeros_like(labels)], dim=1)
    hyperplanes = service.fit_hyperplanes(codes, stacked, LatentSpace.PROXY, epochs=2)
    assert [h.attribute_index for h in hyperplanes] == [0]
    assert hyperplanes[0].space == LatentSpace.PROXY
    assert "Skipping hyperplane" in caplog.text


def test_hyperplane_geometry():
    hyperplane = SvmHyperplane(weight=torch.tensor([3.0, 4.0], dtype=torch.float64), bias=-5.0, attribute_index=0)
    codes = torch.tensor([[3.0, 4.0], [0.0, 0.0], [1.0, 0.5]], dtype=torch.float64)
    torch.testing.assert_close(hyperplane.signed_distance(codes),
                               torch.tensor([4.0, -1.0, 0.0], dtype=torch.float64))
    assert hyperplane.predict(codes).tolist() == [1, 0, 1]
    torch.testing.assert_close(hyperplane.unit_normal(), torch.tensor([0.6, 0.8], dtype=torch.float64))


def test_train_validation_split(service):
    train, validation = service.train_validation_split(10, 0.8, seed=1)
    assert len(train) == 8 and len(validation) == 2
    assert sorted(torch.cat([train, validation]).tolist()) == list(range(10))
    again, _ = service.train_validation_split(10, 0.8, seed=1)
    assert torch.equal(train, again)
    with pytest.raises(DataError):
        service.train_validation_split(1)


def test_svm_is_seed_deterministic(service):
    codes, labels, _ = _separable(seed=5)
    first = service.train_svm(codes, labels, 0, seed=3)
    second = service.train_svm(codes, labels, 0, seed=3)
    assert torch.equal(first.weight, second.weight) and first.bias == second.bias


def test_svm_objective_is_close_to_grid_search(service):
    generator = torch.Generator().manual_seed(6)
    labels = torch.randint(0, 2, (200,), generator=generator).to(torch.uint8)
    signs = labels.to(torch.float64) * 2.0 - 1.0
    codes = torch.randn(200, 2, generator=generator, dtype=torch.float64) * 0.5
    codes[:, 0] += signs * 1.5
    reg = 0.1
    hyperplane = service.train_svm(codes, labels, 0, reg=reg, epochs=200, seed=0)
    learned = service.svm_objective(hyperplane, codes, labels, reg)

    axis = torch.linspace(-3.0, 3.0, 61, dtype=torch.float64)
    grid = torch.cartesian_prod(axis, axis, torch.linspace(-1.0, 1.0, 21, dtype=torch.float64))
    augmented = torch.cat([codes, torch.ones(200, 1, dtype=torch.float64)], dim=1)
    hinge = torch.clamp(1.0 - signs.unsqueeze(0) * (grid @ augmented.T), min=0.0).mean(dim=1)
    best = float((0.5 * reg * (grid ** 2).sum(dim=1) + hinge).min())
    assert learned <= best * 1.05


def test_random_labels_give_chance_accuracy(service):
    generator = torch.Generator().manual_seed(7)
    codes = torch.randn(4000, 4, generator=generator, dtype=torch.float64)
    labels = torch.randint(0, 2, (4000,), generator=generator).to(torch.uint8)
    train, validation = service.train_validation_split(4000, 0.8, seed=0)
    hyperplane = service.train_svm(codes[train], labels[train], 0, seed=0)
    assert service.svm_accuracy(hyperplane, codes[validation], labels[validation]) == pytest.approx(0.5, abs=0.05)


def test_svm_objective_regularizes_bias(service):
    hyperplane = SvmHyperplane(weight=torch.tensor([1.0, 0.0], dtype=torch.float64), bias=2.0, attribute_index=0)
    codes = torch.tensor([[-2.5, 0.0], [1.0, 0.0]], dtype=torch.float64)
    labels = torch.tensor([1, 1], dtype=torch.uint8)
    # scores -0.5 and 3.0 give hinge terms 1.5 and 0
    assert service.svm_objective(hyperplane, codes, labels, reg=0.2) == pytest.approx(0.1 * 5.0 + 0.75)
