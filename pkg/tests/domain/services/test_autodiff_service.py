# tests/domain/services/test_autodiff_service.py

import math

import pytest
import torch

from domain.model.entities.autodiff import OpKind
from domain.model.entities.errors import ContractError, DimensionError, DomainError, NumericError
from domain.services.autodiff_service import Tape, as_matrix, forward_op, stable_log_sigmoid, stable_sigmoid


def _randn(*shape, seed=0):
    return torch.randn(*shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)


def test_as_matrix_shapes():
    assert as_matrix(3.0).shape == (1, 1)
    assert as_matrix([1.0, 2.0, 3.0]).shape == (1, 3)
    assert as_matrix([[1.0], [2.0]]).shape == (2, 1)
    with pytest.raises(DimensionError):
        as_matrix(torch.zeros(2, 2, 2))


def test_stable_sigmoid_does_not_overflow():
    x = torch.tensor([-1000.0, -30.0, 0.0, 30.0, 1000.0], dtype=torch.float64)
    result = stable_sigmoid(x)
    assert bool(torch.isfinite(result).all())
    assert float(result[2]) == 0.5
    assert float(result[0]) == pytest.approx(0.0)
    assert float(result[4]) == pytest.approx(1.0)
    log_result = stable_log_sigmoid(x)
    assert float(log_result[0]) == pytest.approx(-1000.0)
    assert float(log_result[4]) == pytest.approx(0.0)


def test_forward_op_rejects_shape_mismatches():
    a = torch.zeros(2, 3, dtype=torch.float64)
    with pytest.raises(DimensionError):
        forward_op(OpKind.MATMUL, [a, a])
    with pytest.raises(DimensionError):
        forward_op(OpKind.HADAMARD, [a, torch.zeros(3, 2, dtype=torch.float64)])
    with pytest.raises(DimensionError):
        forward_op(OpKind.CONCAT_COLS, [a, torch.zeros(1, 3, dtype=torch.float64)])
    with pytest.raises(DimensionError):
        forward_op(OpKind.SPLIT_COLS, [a], at=3, part=0)


def test_row_broadcast_add():
    a = torch.ones(3, 2, dtype=torch.float64)
    row = torch.tensor([[1.0, 2.0]], dtype=torch.float64)
    result = forward_op(OpKind.ADD, [a, row])
    torch.testing.assert_close(result, torch.tensor([[2.0, 3.0]] * 3, dtype=torch.float64))


def test_log_of_non_positive_is_domain_error():
    tape = Tape()
    with pytest.raises(DomainError):
        tape.log(tape.leaf([[1.0, 0.0]]))


def test_leaf_rejects_non_finite_values():
    with pytest.raises(NumericError):
        Tape().leaf([[math.inf]])


def test_backward_requires_scalar_root():
    tape = Tape()
    x = tape.leaf([[1.0, 2.0]])
    with pytest.raises(ContractError):
        tape.backward(x)
    disabled = Tape(enabled=False)
    with pytest.raises(ContractError):
        disabled.backward(disabled.sum_all(disabled.leaf([[1.0]])))


def test_gradient_of_product_sum():
    tape = Tape()
    x = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
    y = tape.leaf([[0.5, -1.0], [2.0, 0.0]])
    grads = tape.backward(tape.sum_all(tape.hadamard(x, y)))
    torch.testing.assert_close(grads[x.node_id], y.value)
    torch.testing.assert_close(grads[y.node_id], x.value)


def test_shared_node_accumulates_gradient():
    tape = Tape()
    x = tape.leaf([[3.0]])
    grads = tape.backward(tape.add(tape.hadamard(x, x), x))
    assert float(grads[x.node_id]) == pytest.approx(7.0)


def test_constants_receive_no_gradient():
    tape = Tape()
    x = tape.leaf([[1.0, 2.0]])
    c = tape.constant([[3.0, 4.0]])
    grads = tape.backward(tape.sum_all(tape.hadamard(x, c)))
    assert c.node_id not in grads
    torch.testing.assert_close(grads[x.node_id], c.value)


def test_leaky_relu_gradient_at_zero_takes_negative_slope():
    tape = Tape()
    x = tape.leaf([[-1.0, 0.0, 2.0]])
    grads = tape.backward(tape.sum_all(tape.leaky_relu(x, 0.01)))
    torch.testing.assert_close(grads[x.node_id], torch.tensor([[0.01, 0.01, 1.0]], dtype=torch.float64))


def _composite_tape(tape, x, w, b):
    h = tape.leaky_relu(tape.add(tape.matmul(x, w), b), 0.1)
    first, second = tape.split_cols(h, 2)
    s = tape.tanh(first)
    mixed = tape.concat_cols(tape.hadamard(second, tape.exp(s)), tape.sigmoid(first))
    logged = tape.log(tape.add(tape.abs(mixed), tape.constant(torch.ones_like(mixed.value))))
    rows = tape.sum_rows(tape.add(logged, tape.log_sigmoid(tape.scale(mixed, -0.5))))
    return tape.mean_all(tape.sub(rows, tape.constant(torch.zeros_like(rows.value))), x.shape[0])


def _composite_torch(x, w, b):
    h = torch.nn.functional.leaky_relu(x @ w + b, 0.1)
    first, second = h[:, :2], h[:, 2:]
    s = torch.tanh(first)
    mixed = torch.cat([second * torch.exp(s), torch.sigmoid(first)], dim=1)
    logged = torch.log(torch.abs(mixed) + 1.0)
    rows = (logged + torch.nn.functional.logsigmoid(-0.5 * mixed)).sum(dim=1, keepdim=True)
    return rows.sum() / x.shape[0]


def test_composite_gradients_match_torch_autograd():
    x_value, w_value, b_value = _randn(5, 3, seed=1), _randn(3, 4, seed=2), _randn(1, 4, seed=3)

    tape = Tape()
    x, w, b = tape.leaf(x_value), tape.leaf(w_value), tape.leaf(b_value)
    loss = _composite_tape(tape, x, w, b)
    grads = tape.backward(loss)

    xt, wt, bt = (t.clone().requires_grad_(True) for t in (x_value, w_value, b_value))
    reference = _composite_torch(xt, wt, bt)
    reference.backward()

    assert loss.item() == pytest.approx(float(reference), rel=1e-12)
    torch.testing.assert_close(grads[x.node_id], xt.grad)
    torch.testing.assert_close(grads[w.node_id], wt.grad)
    torch.testing.assert_close(grads[b.node_id], bt.grad)


def test_composite_gradients_match_central_differences():
    w_value = _randn(3, 4, seed=4)
    x_value, b_value = _randn(4, 3, seed=5), _randn(1, 4, seed=6)

    def evaluate(weight):
        tape = Tape(enabled=False)
        return _composite_tape(tape, tape.constant(x_value), tape.constant(weight), tape.constant(b_value)).item()

    tape = Tape()
    w = tape.leaf(w_value)
    grads = tape.backward(_composite_tape(tape, tape.constant(x_value), w, tape.constant(b_value)))

    h = 1e-6
    numeric = torch.zeros_like(w_value)
    for i in range(w_value.shape[0]):
        for j in range(w_value.shape[1]):
            plus, minus = w_value.clone(), w_value.clone()
            plus[i, j] += h
            minus[i, j] -= h
            numeric[i, j] = (evaluate(plus) - evaluate(minus)) / (2 * h)
    torch.testing.assert_close(grads[w.node_id], numeric, rtol=1e-5, atol=1e-7)


def test_disabled_tape_records_nothing():
    tape = Tape(enabled=False)
    x = tape.leaf([[1.0, 2.0]])
    y = tape.exp(x)
    assert tape.nodes == []
    assert y.node_id == -1
    torch.testing.assert_close(y.value, torch.exp(x.value))


UNARY_KINDS = [OpKind.SCALE, OpKind.LEAKY_RELU, OpKind.TANH, OpKind.SIGMOID, OpKind.LOG_SIGMOID, OpKind.EXP,
               OpKind.LOG, OpKind.ABS, OpKind.SUM_ALL, OpKind.SUM_ROWS, OpKind.SPLIT_COLS]
BINARY_KINDS = [OpKind.MATMUL, OpKind.ADD, OpKind.SUB, OpKind.HADAMARD, OpKind.CONCAT_COLS]
ATTRS = {OpKind.SCALE: {"factor": -1.7}, OpKind.LEAKY_RELU: {"slope": 0.2}, OpKind.SPLIT_COLS: {"at": 1, "part": 1}}


def _operands(kind, seed):
    x = _randn(3, 4, seed=seed)
    if kind == OpKind.LOG:
        x = x.abs() + 0.5
    if kind in (OpKind.ABS, OpKind.LEAKY_RELU):
        x = torch.where(x.abs() < 1e-3, torch.full_like(x, 0.5), x)
    if kind == OpKind.MATMUL:
        return [x, _randn(4, 2, seed=seed + 1000)]
    if kind in BINARY_KINDS:
        return [x, _randn(3, 4, seed=seed + 1000)]
    return [x]


def _projected_loss(kind, operands, weights):
    tape = Tape(enabled=False)
    out = tape.apply(kind, *[tape.constant(v) for v in operands], **ATTRS.get(kind, {}))
    return float((out.value * weights).sum())


@pytest.mark.parametrize("kind", UNARY_KINDS + BINARY_KINDS, ids=lambda k: k.value)
def test_every_operation_matches_central_differences(kind):
    h = 1e-5
    for seed in range(50):
        operands = _operands(kind, seed)
        tape = Tape()
        leaves = [tape.leaf(v) for v in operands]
        out = tape.apply(kind, *leaves, **ATTRS.get(kind, {}))
        weights = _randn(*out.shape, seed=seed + 2000)
        grads = tape.backward(tape.sum_all(tape.hadamard(out, tape.constant(weights))))

        for position, leaf in enumerate(leaves):
            numeric = torch.zeros_like(leaf.value)
            for index in range(leaf.value.numel()):
                plus = [v.clone() for v in operands]
                minus = [v.clone() for v in operands]
                plus[position].view(-1)[index] += h
                minus[position].view(-1)[index] -= h
                numeric.view(-1)[index] = (_projected_loss(kind, plus, weights)
                                           - _projected_loss(kind, minus, weights)) / (2 * h)
            analytic = grads[leaf.node_id]
            error = (analytic - numeric).abs() / torch.clamp(numeric.abs(), min=1e-8)
            assert float(error.max()) < 1e-4 or float((analytic - numeric).abs().max()) < 1e-8, (kind, seed)
