# tests/test_acceptance.py

import json

import pytest
import torch

from domain.model.entities.classifier import LatentSpace
from domain.model.entities.dataset import WorldSpec
from domain.model.entities.training import TrainConfig
from domain.services.classifier_service import ClassifierService
from domain.services.flow_service import FlowService
from domain.services.metrics_service import MetricsService
from domain.services.synthetic_world_service import SyntheticWorldService
from domain.services.trainer_service import TrainerService
from main import main

pytestmark = pytest.mark.slow

EDIT_STEP = 3.0


@pytest.fixture(scope="module")
def entangled_world():
    world = WorldSpec(num_attributes=4, dim=32, nonlinearity=2.0, rho=0.3, random_rotation=True, seed=0)
    return SyntheticWorldService().generate(world, 4000, seed=0)


@pytest.fixture(scope="module")
def pretrained_bank(entangled_world):
    return ClassifierService().pretrain_bank(entangled_world, epochs=50, lr=1e-2, batch_size=32, seed=0)


def _train(dataset, bank, config):
    model = FlowService().init_flow(dataset.dim, num_layers=3, seed=0)
    return TrainerService().train_proxy(dataset, bank, model, config)


@pytest.fixture(scope="module")
def trained(entangled_world, pretrained_bank):
    """Five epochs with the default weights (lambda_lm = lambda_ap = 0.1)."""
    return _train(entangled_world, pretrained_bank, TrainConfig(epochs=5))


@pytest.fixture(scope="module")
def proxy_codes(entangled_world, trained):
    return FlowService().to_space(trained.model, entangled_world.codes, LatentSpace.PROXY)


def _flip_rates(dataset, bank, model, space):
    codes = dataset.codes if space == LatentSpace.ORIGINAL else FlowService().to_space(model, dataset.codes, space)
    hyperplanes = ClassifierService().fit_hyperplanes(codes, dataset.labels, space, seed=0)
    metrics = MetricsService()
    return {
        hyperplane.attribute_index: metrics.flip_rate(bank, dataset.codes, hyperplane.attribute_index, EDIT_STEP,
                                                      space, hyperplane, model).flip_rate
        for hyperplane in hyperplanes
    }


def test_entanglement_lowers_raw_separability(entangled_world):
    plain = SyntheticWorldService().generate(
        WorldSpec(num_attributes=4, dim=32, nonlinearity=0.0, rho=0.3, random_rotation=False, seed=0), 4000, seed=0)
    metrics = MetricsService()
    entangled = metrics.separability(entangled_world.codes, entangled_world.labels,
                                     entangled_world.attribute_names, seed=0)
    baseline = metrics.separability(plain.codes, plain.labels, plain.attribute_names, seed=0)
    assert entangled.mean_accuracy < baseline.mean_accuracy
    assert entangled.mean_accuracy < 0.97


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.5])
def test_labels_are_balanced(rho):
    world = WorldSpec(num_attributes=4, dim=16, nonlinearity=1.0, rho=rho, seed=3)
    dataset = SyntheticWorldService().generate(world, 2000, seed=1)
    rates = dataset.labels.to(torch.float64).mean(dim=0)
    assert bool(((rates >= 0.4) & (rates <= 0.6)).all())


def test_random_labels_are_not_separable(entangled_world):
    generator = torch.Generator().manual_seed(9)
    labels = torch.randint(0, 2, entangled_world.labels.shape, generator=generator).to(torch.uint8)
    report = MetricsService().separability(entangled_world.codes, labels, entangled_world.attribute_names, seed=0)
    for accuracy in report.accuracies:
        assert accuracy == pytest.approx(0.5, abs=0.05)


def test_training_reduces_total_loss(trained):
    assert len(trained.epoch_means) == 5
    assert trained.epoch_means[-1] < trained.epoch_means[0]


def test_training_leaves_bank_bitwise_unchanged(entangled_world):
    bank = ClassifierService().pretrain_bank(entangled_world, epochs=5, lr=1e-2, seed=1)
    before = [(c.weight.clone(), c.bias) for c in bank.classifiers]
    _train(entangled_world, bank, TrainConfig(epochs=1))
    for (weight, bias), classifier in zip(before, bank.classifiers):
        assert torch.equal(weight, classifier.weight)
        assert bias == classifier.bias


def test_proxy_space_is_more_separable(entangled_world, proxy_codes):
    metrics = MetricsService()
    names = entangled_world.attribute_names
    original = metrics.separability(entangled_world.codes, entangled_world.labels, names, seed=0)
    proxy = metrics.separability(proxy_codes, entangled_world.labels, names, LatentSpace.PROXY, seed=0)
    assert proxy.mean_accuracy - original.mean_accuracy >= 0.03


def test_proxy_space_is_more_disentangled(entangled_world, proxy_codes):
    metrics = MetricsService()
    names = entangled_world.attribute_names
    original, _ = metrics.dci(entangled_world.codes, entangled_world.labels, names, seed=0)
    proxy, _ = metrics.dci(proxy_codes, entangled_world.labels, names, seed=0)
    assert proxy.disentanglement - original.disentanglement >= 0.02
    assert proxy.completeness - original.completeness >= 0.02
    assert proxy.informativeness < original.informativeness


def test_proxy_edits_flip_fewer_attributes(entangled_world, pretrained_bank, trained):
    original = _flip_rates(entangled_world, pretrained_bank, None, LatentSpace.ORIGINAL)
    proxy = _flip_rates(entangled_world, pretrained_bank, trained.model, LatentSpace.PROXY)
    assert set(original) == set(proxy) == {0, 1, 2, 3}
    assert sum(1 for index in original if proxy[index] < original[index]) >= 3


def test_preservation_term_lowers_flip_rate(entangled_world, pretrained_bank, trained):
    without = _train(entangled_world, pretrained_bank, TrainConfig(epochs=5, lambda_ap=0.0))
    with_term = _flip_rates(entangled_world, pretrained_bank, trained.model, LatentSpace.PROXY)
    without_term = _flip_rates(entangled_world, pretrained_bank, without.model, LatentSpace.PROXY)
    assert sum(with_term.values()) < sum(without_term.values())


def test_full_pipeline_writes_every_report(tmp_path):
    def path(name):
        return str(tmp_path / name)

    steps = [
        ["gen-synthetic", "--out", path("world.lds"), "--n", "4000", "--k", "4", "--dim", "32",
         "--nonlinearity", "2.0", "--rho", "0.3", "--seed", "0"],
        ["pretrain-classifiers", "--dataset", path("world.lds"), "--out", path("pre.nfm")],
        ["train-proxy", "--dataset", path("world.lds"), "--model", path("pre.nfm"), "--out", path("proxy.nfm"),
         "--epochs", "1"],
        ["eval-separability", "--dataset", path("world.lds"), "--model", path("proxy.nfm"),
         "--out", path("sep.json"), "--space", "both"],
        ["eval-dci", "--dataset", path("world.lds"), "--model", path("proxy.nfm"), "--out", path("dci.json"),
         "--space", "both"],
        ["eval-flips", "--dataset", path("world.lds"), "--model", path("proxy.nfm"), "--out", path("flips.json"),
         "--alpha", "3.0"],
        ["plot2d", "--dataset", path("world.lds"), "--model", path("proxy.nfm"), "--out", path("plot.svg")],
    ]
    for argv in steps:
        main(["--log-level", "WARNING", *argv])

    for name in ("sep.json", "dci.json", "flips.json"):
        with open(path(name), encoding="utf-8") as f:
            report = json.load(f)
        assert {"config", "results"} <= set(report)
    with open(path("flips.json"), encoding="utf-8") as f:
        results = json.load(f)["results"]
    assert set(results["orig"]["attributes"]) == set(results["proxy"]["attributes"]) == {f"attr_{i}" for i in range(4)}
    assert results["delta"]["mean_flip_rate"] == pytest.approx(
        results["proxy"]["mean_flip_rate"] - results["orig"]["mean_flip_rate"])
    with open(path("proxy.nfm.losses.jsonl"), encoding="utf-8") as f:
        assert len(f.readlines()) == 500
    with open(path("plot.svg"), encoding="utf-8") as f:
        assert "<svg" in f.read()
