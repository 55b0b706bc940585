# tests/conftest.py

import pytest
import torch

from application.use_cases.generate_synthetic_use_case import GenerateSyntheticUseCase
from application.use_cases.pretrain_classifiers_use_case import PretrainClassifiersUseCase
from application.use_cases.train_proxy_use_case import TrainProxyUseCase
from domain.model.entities.classifier import ClassifierBank, LinearAttributeClassifier
from domain.model.entities.dataset import GenerateSyntheticRequest, LabeledLatentDataset, WorldSpec
from domain.model.entities.flow import FlowModel
from domain.model.entities.training import PretrainRequest, TrainConfig, TrainProxyRequest
from domain.services.flow_service import FlowService
from domain.services.synthetic_world_service import SyntheticWorldService


def perturb_flow(model: FlowModel, seed: int = 0, scale: float = 0.3) -> FlowModel:
    """Adds seeded noise to every parameter so the flow is far from the identity."""
    generator = torch.Generator().manual_seed(seed)
    for tensor in model.parameters().values():
        tensor.add_(torch.randn(tensor.shape, generator=generator, dtype=torch.float64) * scale)
    return model


def make_bank(weights, biases, names=None, frozen=True) -> ClassifierBank:
    classifiers = [
        LinearAttributeClassifier(weight=torch.tensor(w, dtype=torch.float64), bias=float(b), frozen=frozen)
        for w, b in zip(weights, biases)
    ]
    return ClassifierBank(classifiers=classifiers,
                          attribute_names=names or [f"attr_{i}" for i in range(len(classifiers))])


@pytest.fixture
def flow_service():
    return FlowService()


@pytest.fixture
def random_flow(flow_service):
    """Non-trivial 2-layer flow on D=8."""
    return perturb_flow(flow_service.init_flow(8, num_layers=2, hidden=8, seed=3), seed=11)


@pytest.fixture
def small_world():
    return WorldSpec(num_attributes=2, dim=8, nonlinearity=1.0, gamma=1.0, rho=0.0, random_rotation=True, seed=5,
                     nuisance_scale=1.0)


@pytest.fixture
def small_dataset(small_world) -> LabeledLatentDataset:
    return SyntheticWorldService().generate(small_world, 200, seed=1)


@pytest.fixture
def axis_bank() -> ClassifierBank:
    """Bank on D=8 whose classifiers read coordinates 0 and 1."""
    first = [2.0] + [0.0] * 7
    second = [0.0, 0.5] + [0.0] * 6
    return make_bank([first, second], [0.2, -0.1])


@pytest.fixture(scope="session")
def pipeline_files(tmp_path_factory):
    """Dataset, pretrained model and trained model produced by the use cases on a small world."""
    root = tmp_path_factory.mktemp("pipeline")
    files = {name: str(root / name) for name in ("world.lds", "pretrained.nfm", "trained.nfm")}
    world = WorldSpec(num_attributes=2, dim=8, nonlinearity=1.0, rho=0.0, seed=5, nuisance_scale=1.0)
    GenerateSyntheticUseCase().execute(GenerateSyntheticRequest(world=world, num_samples=300, seed=1,
                                                                out_path=files["world.lds"]))
    PretrainClassifiersUseCase().execute(PretrainRequest(dataset_path=files["world.lds"],
                                                         out_path=files["pretrained.nfm"], epochs=10, lr=0.1,
                                                         layers=2))
    files["train_response"] = TrainProxyUseCase().execute(TrainProxyRequest(
        dataset_path=files["world.lds"], model_path=files["pretrained.nfm"], out_path=files["trained.nfm"],
        config=TrainConfig(epochs=1, batch_size=32, lr=1e-3), svm_epochs=5
    ))
    return files
