# tests/domain/services/test_metrics_service.py

import pytest
import torch

from domain.model.entities.classifier import LatentSpace, SvmHyperplane
from domain.model.entities.dataset import WorldSpec
from domain.model.entities.errors import ConfigurationError, DataError
from domain.services.metrics_service import MetricsService, soft_threshold
from domain.services.synthetic_world_service import SyntheticWorldService


@pytest.fixture
def metrics():
    return MetricsService()


def _hadamard_design():
    """Zero-mean, unit-variance, mutually orthogonal +/-1 columns on 8 rows."""
    rows = torch.arange(8)
    bits = [((rows >> b) & 1).to(torch.float64) * -2.0 + 1.0 for b in range(3)]
    return torch.stack(bits + [bits[0] * bits[1]], dim=1)


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(-1.0, 1.0) == 0.0


def test_lasso_on_orthonormal_design_is_soft_thresholded_correlation(metrics):
    x = _hadamard_design()
    y = torch.tensor([3.0, 1.0, 2.0, -1.0, 0.5, 4.0, -2.0, 1.5], dtype=torch.float64)
    alpha = 0.3
    result = metrics.lasso_fit(x, y, alpha, tol=1e-12)

    expected = [soft_threshold(float(x[:, j] @ y) / 8.0, alpha) for j in range(4)]
    torch.testing.assert_close(result.coefficients, torch.tensor(expected, dtype=torch.float64))
    assert result.intercept == pytest.approx(float(y.mean()))
    assert result.converged
    assert result.iterations <= 3


def test_lasso_large_alpha_zeroes_everything(metrics):
    generator = torch.Generator().manual_seed(0)
    x = torch.randn(40, 5, generator=generator, dtype=torch.float64)
    y = x[:, 0] * 2.0 + 1.0
    result = metrics.lasso_fit(x, y, 1e6)
    assert bool((result.coefficients == 0).all())
    assert result.intercept == pytest.approx(float(y.mean()))
    torch.testing.assert_close(result.predict(x), torch.full((40,), float(y.mean()), dtype=torch.float64))


def test_lasso_without_penalty_matches_least_squares(metrics):
    generator = torch.Generator().manual_seed(1)
    x = torch.randn(60, 4, generator=generator, dtype=torch.float64)
    y = x @ torch.tensor([1.0, -2.0, 0.5, 0.0], dtype=torch.float64) + 0.1 * torch.randn(
        60, generator=generator, dtype=torch.float64) + 3.0
    result = metrics.lasso_fit(x, y, 0.0, max_iterations=10000, tol=1e-12)

    design = torch.cat([x, torch.ones(60, 1, dtype=torch.float64)], dim=1)
    solution = torch.linalg.lstsq(design, y.unsqueeze(1)).solution
    torch.testing.assert_close(result.predict(x), (design @ solution).reshape(-1), rtol=1e-7, atol=1e-7)


def test_lasso_objective_never_increases(metrics):
    generator = torch.Generator().manual_seed(2)
    x = torch.randn(50, 6, generator=generator, dtype=torch.float64)
    x[:, 1] = x[:, 0] + 0.1 * x[:, 1]
    y = x[:, 0] - x[:, 2] + 0.2 * torch.randn(50, generator=generator, dtype=torch.float64)
    history = metrics.lasso_fit(x, y, 0.05, tol=1e-10).objective_history
    assert all(later <= earlier + 1e-12 for earlier, later in zip(history, history[1:]))


def test_lasso_constant_feature_gets_zero_coefficient(metrics):
    x = torch.cat([_hadamard_design(), torch.full((8, 1), 4.0, dtype=torch.float64)], dim=1)
    y = x[:, 0] * 2.0
    result = metrics.lasso_fit(x, y, 0.1)
    assert float(result.coefficients[4]) == 0.0
    assert float(result.coefficients[0]) == pytest.approx(1.9)


def test_lasso_input_errors(metrics):
    with pytest.raises(DataError):
        metrics.lasso_fit(torch.ones(1, 2, dtype=torch.float64), [1.0], 0.1)
    with pytest.raises(DataError):
        metrics.lasso_fit([[1.0, float("nan")], [0.0, 1.0]], [1.0, 0.0], 0.1)
    with pytest.raises(ConfigurationError):
        metrics.lasso_fit(_hadamard_design(), torch.zeros(8, dtype=torch.float64), -1.0)


def test_dci_of_identity_importance(metrics):
    report = metrics.dci_scores(torch.eye(3, dtype=torch.float64))
    assert report.disentanglement == pytest.approx(1.0)
    assert report.completeness == pytest.approx(1.0)
    assert not report.degenerate


def test_dci_of_uniform_importance(metrics):
    report = metrics.dci_scores(torch.ones(3, 4, dtype=torch.float64))
    assert report.disentanglement == pytest.approx(0.0, abs=1e-12)
    assert report.completeness == pytest.approx(0.0, abs=1e-12)


def test_dci_hand_example(metrics):
    report = metrics.dci_scores(torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=torch.float64))
    assert report.disentanglement == pytest.approx(0.0, abs=1e-12)
    assert report.completeness == pytest.approx(1.0)
    assert report.dimension_scores[1] == 0.0


def test_dci_is_scale_invariant(metrics):
    importance = torch.tensor([[0.9, 0.1, 0.0], [0.2, 0.3, 0.5]], dtype=torch.float64)
    base = metrics.dci_scores(importance)
    scaled = metrics.dci_scores(importance * 7.5)
    assert scaled.disentanglement == pytest.approx(base.disentanglement)
    assert scaled.completeness == pytest.approx(base.completeness)
    assert 0.0 < base.disentanglement < 1.0


def test_dci_zero_matrix_is_degenerate(metrics, caplog):
    report = metrics.dci_scores(torch.zeros(2, 3, dtype=torch.float64))
    assert report.degenerate
    assert report.disentanglement == 0.0 and report.completeness == 0.0
    assert "identically zero" in caplog.text


def test_dci_rejects_negative_importance(metrics):
    with pytest.raises(DataError):
        metrics.dci_scores(torch.tensor([[1.0, -0.1]], dtype=torch.float64))


def test_dci_on_axis_aligned_world_is_disentangled(metrics):
    world = WorldSpec(num_attributes=2, dim=8, nonlinearity=0.0, rho=0.0, random_rotation=False, nuisance_scale=1.0)
    dataset = SyntheticWorldService().generate(world, 500, seed=0)
    report, importance = metrics.dci(dataset.codes, dataset.labels, dataset.attribute_names,
                                     n_samples=400, alpha=0.05, seed=0)
    assert importance.values.shape == (2, 8)
    assert report.disentanglement > 0.9
    assert report.completeness > 0.9
    assert report.informativeness == 0.0


def test_dci_needs_enough_samples(metrics, small_dataset):
    with pytest.raises(DataError):
        metrics.dci(small_dataset.codes, small_dataset.labels, small_dataset.attribute_names, n_samples=1000)


def test_separability_of_linear_world(metrics):
    world = WorldSpec(num_attributes=3, dim=6, nonlinearity=0.0, rho=0.0, random_rotation=True, seed=2,
                      nuisance_scale=1.0)
    dataset = SyntheticWorldService().generate(world, 300, seed=1)
    report = metrics.separability(dataset.codes, dataset.labels, dataset.attribute_names, seed=0)
    assert report.attribute_names == dataset.attribute_names
    assert report.min_accuracy >= 0.9
    assert report.to_dict()["space"] == "orig"


def test_separability_skips_and_fails_on_degenerate_attributes(metrics, small_dataset):
    labels = small_dataset.labels.clone()
    labels[:, 1] = 0
    report = metrics.separability(small_dataset.codes, labels, small_dataset.attribute_names, epochs=2)
    assert report.skipped == [small_dataset.attribute_names[1]]
    with pytest.raises(DataError):
        metrics.separability(small_dataset.codes, torch.zeros_like(labels), small_dataset.attribute_names)


def test_flip_rate_with_orthogonal_normals_is_zero(metrics, flow_service, axis_bank):
    model = flow_service.init_flow(8, num_layers=2)
    codes = torch.randn(50, 8, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    hyperplane = SvmHyperplane(weight=torch.eye(8, dtype=torch.float64)[0], bias=0.0, attribute_index=0,
                               space=LatentSpace.PROXY)
    report = metrics.flip_rate(axis_bank, codes, 0, 100.0, LatentSpace.PROXY, hyperplane, model)

    negatives = int((codes @ axis_bank.classifiers[0].weight + 0.2 < 0).sum())
    assert report.flip_rate == 0.0
    assert report.flip_counts["attr_1"] == 0
    assert report.target_flip_rate == pytest.approx(negatives / 50)
    assert report.num_codes == 50


def test_flip_rate_counts_non_target_changes(metrics, axis_bank):
    codes = torch.tensor([[0.0, 0.5] + [0.0] * 6, [0.0, 5.0] + [0.0] * 6], dtype=torch.float64)
    diagonal = torch.zeros(8, dtype=torch.float64)
    diagonal[0], diagonal[1] = 1.0, -1.0
    hyperplane = SvmHyperplane(weight=diagonal, bias=0.0, attribute_index=0)
    report = metrics.flip_rate(axis_bank, codes, 0, 2.0 ** 0.5, LatentSpace.ORIGINAL, hyperplane)
    assert report.flip_counts == {"attr_0": 0, "attr_1": 1}
    assert report.flip_rate == pytest.approx(0.5)


def test_compare_reports_numeric_deltas(metrics):
    comparison = metrics.compare({"mean_accuracy": 0.8, "space": "orig", "degenerate": False},
                                 {"mean_accuracy": 0.95, "space": "proxy", "degenerate": False})
    assert comparison.deltas == {"mean_accuracy": pytest.approx(0.15)}
    assert set(comparison.to_dict()) == {"orig", "proxy", "delta"}
