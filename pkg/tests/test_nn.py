import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attralign import nn
from attralign.errors import (ConfigError, DegenerateInputError, ShapeError,
                              UsageError)
from attralign.nn import ParamSet, Tensor2, backward, grad_check


def fd_gradient(f, params, step=1e-6):
    """Independent central-difference oracle; deliberately not grad_check."""
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        for idx in np.ndindex(p.data.shape):
            orig = p.data[idx]
            p.data[idx] = orig + step
            fp = f(params).item()
            p.data[idx] = orig - step
            fm = f(params).item()
            p.data[idx] = orig
            g[idx] = (fp - fm) / (2 * step)
        grads[name] = g
    return grads


def max_rel_err(analytic, numeric):
    worst = 0.0
    for name in analytic:
        err = np.abs(analytic[name] - numeric[name]) / np.maximum(1.0, np.abs(numeric[name]))
        worst = max(worst, float(err.max()))
    return worst


def run_backward(f, params):
    params.zero_grad()
    loss = f(params)
    backward(loss)
    return {name: p.grad.copy() for name, p in params.items()}


# ---------------------------------------------------------------------------
# forward semantics

def test_softmax_symmetry():
    out = nn.softmax(Tensor2([[0.0, 0.0]]))
    assert np.allclose(out.data, [[0.5, 0.5]])


def test_softmax_singleton():
    out = nn.softmax(Tensor2([[123.456]]))
    assert np.allclose(out.data, [[1.0]])


# float64 exp underflows once a logit trails the max by more than ~745, so
# strict positivity is only testable below that gap
@given(st.lists(st.floats(-350, 350), min_size=1, max_size=8))
def test_softmax_positive_and_normalized(logits):
    out = nn.softmax(Tensor2([logits])).data
    assert np.all(out > 0)
    assert abs(out.sum() - 1.0) < 1e-9


def test_softmax_rowwise_on_matrices():
    out = nn.softmax(Tensor2([[0.0, 0.0], [10.0, 10.0]])).data
    assert np.allclose(out, 0.5)


def test_cosine_of_self_is_one():
    v = Tensor2([3.0, -1.0, 2.0])
    assert abs(nn.cosine(v, v).item() - 1.0) < 1e-12


def test_cosine_zero_vector_rejected():
    z = Tensor2([0.0, 0.0])
    v = Tensor2([1.0, 0.0])
    with pytest.raises(DegenerateInputError):
        nn.cosine(z, z)
    with pytest.raises(DegenerateInputError):
        nn.cosine(z, v)


def test_shape_errors_name_the_op():
    a = Tensor2(np.ones((2, 3)))
    b = Tensor2(np.ones((2, 3)))
    with pytest.raises(ShapeError) as exc:
        nn.matmul(a, b)
    assert "matmul" in str(exc.value)
    with pytest.raises(ShapeError) as exc:
        nn.concat(Tensor2(np.ones((2, 2))), Tensor2(np.ones((2, 3))), axis=0)
    assert "concat" in str(exc.value)
    with pytest.raises(ShapeError) as exc:
        nn.residual_add(a, Tensor2(np.ones((3, 2))))
    assert "residual_add" in str(exc.value)


def test_tensor_rejects_non_finite():
    with pytest.raises(DegenerateInputError):
        Tensor2([np.inf, 1.0])


def test_mean_rows_and_row_sums():
    m = Tensor2([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(nn.mean_rows(m).data, [[2.0, 3.0]])
    assert np.allclose(nn.row_sums(m).data, [[3.0], [7.0]])


def test_activations_values():
    x = Tensor2([[-1.0, 0.0, 2.0]])
    assert np.allclose(nn.relu(x).data, [[0.0, 0.0, 2.0]])
    assert np.allclose(nn.leaky_relu(x, 0.2).data, [[-0.2, 0.0, 2.0]])
    assert np.allclose(nn.elu(x).data, [[np.expm1(-1.0), 0.0, 2.0]])


# ---------------------------------------------------------------------------
# gradients

def test_quadratic_gradient_analytic():
    params = ParamSet()
    w = params.add("w", [3.0, -1.0])

    def f(ps):
        return nn.scale(nn.matmul(nn.transpose(ps["w"]), ps["w"]), 0.5)

    grads = run_backward(f, params)
    assert np.allclose(grads["w"], [[3.0], [-1.0]])


def test_relu_blocks_gradient_on_negative_path():
    params = ParamSet()
    params.add("w", [[-2.0]])

    def f(ps):
        return nn.sum_all(nn.relu(ps["w"]))

    grads = run_backward(f, params)
    assert grads["w"][0, 0] == 0.0


def test_gradient_accumulates_across_backward_calls():
    params = ParamSet()
    w = params.add("w", [1.0, 2.0])
    for _ in range(2):
        loss = nn.sum_all(nn.mul(w, w))
        backward(loss)
    assert np.allclose(w.grad, 2 * 2 * w.data)


def test_backward_does_not_alias_shared_gradients():
    params = ParamSet()
    x = params.add("x", [1.0, 2.0])
    y = params.add("y", [3.0, 4.0])
    loss = nn.sum_all(nn.add(nn.add(x, y), x))
    backward(loss)
    assert np.allclose(x.grad, 2.0)
    assert np.allclose(y.grad, 1.0)


def test_three_layer_composition_matches_finite_differences():
    rng = np.random.default_rng(7)
    params = ParamSet()
    params.add("w1", rng.normal(size=(4, 3)) * 0.7)
    params.add("w2", rng.normal(size=(4, 4)) * 0.7)
    params.add("w3", rng.normal(size=(1, 4)) * 0.7)
    x = Tensor2(rng.normal(size=(3, 2)))

    def f(ps):
        h1 = nn.elu(nn.matmul(ps["w1"], x))
        h2 = nn.leaky_relu(nn.matmul(ps["w2"], h1), 0.2)
        h2 = nn.residual_add(h2, h1)
        out = nn.matmul(ps["w3"], h2)
        return nn.sum_all(nn.mul(out, out))

    analytic = run_backward(f, params)
    numeric = fd_gradient(f, params, step=1e-5)
    assert max_rel_err(analytic, numeric) < 1e-6


def test_every_op_differentiates_correctly():
    rng = np.random.default_rng(11)
    params = ParamSet()
    params.add("m", rng.normal(size=(5, 3)) + 0.4)
    params.add("u", rng.normal(size=(6, 1)))

    def f(ps):
        m, u = ps["m"], ps["u"]
        g = nn.gather_rows(m, [0, 2, 2, 4])             # repeats exercise scatter-add
        sm = nn.softmax(nn.transpose(nn.row_sums(g)))   # (1, 4)
        top = nn.slice_rows(u, 0, 3)
        bot = nn.slice_rows(u, 3, 6)
        cosped = nn.cosine(top, bot)                    # (1, 1)
        norm = nn.normalize_rows(m)                     # (5, 3)
        cat = nn.concat(nn.transpose(top), nn.transpose(bot), axis=0)  # (2, 3)
        st = nn.stack_rows([nn.mean_rows(norm), nn.mean_rows(g),
                            nn.matmul(cosped, nn.mean_rows(m)), nn.mean_rows(cat)])
        mixed = nn.mul(st, nn.sub(nn.relu(st), nn.scale(st, 0.25)))
        return nn.add(nn.sum_all(mixed), nn.sum_all(sm))

    analytic = run_backward(f, params)
    numeric = fd_gradient(f, params, step=1e-5)
    assert max_rel_err(analytic, numeric) < 1e-6


def test_backward_usage_errors():
    with pytest.raises(UsageError):
        backward(3.0)
    with pytest.raises(UsageError):
        backward(Tensor2(np.ones((2, 2))))


# ---------------------------------------------------------------------------
# grad_check

def test_grad_check_on_norm_squared():
    params = ParamSet()
    params.add("w", [1.5, -2.0, 0.5])

    def f(ps):
        return nn.sum_all(nn.mul(ps["w"], ps["w"]))

    assert grad_check(f, params, step=1e-5) < 1e-8


def test_grad_check_constant_function():
    params = ParamSet()
    params.add("w", [1.0])

    def f(ps):
        return Tensor2([[4.2]])

    assert grad_check(f, params, step=1e-5) == 0.0


def test_grad_check_leaky_relu_off_kink():
    params = ParamSet()
    params.add("w", [0.9, -0.7])

    def f(ps):
        return nn.sum_all(nn.leaky_relu(ps["w"], 0.2))

    assert grad_check(f, params, step=1e-5) < 1e-6


def test_grad_check_rejects_bad_step():
    params = ParamSet()
    params.add("w", [1.0])
    with pytest.raises(ConfigError):
        grad_check(lambda ps: nn.sum_all(ps["w"]), params, step=0.0)


# ---------------------------------------------------------------------------
# parameters and checkpoints

def test_param_set_rejects_duplicates_and_bad_names():
    params = ParamSet()
    params.add("w", [1.0])
    with pytest.raises(ConfigError):
        params.add("w", [2.0])
    with pytest.raises(ConfigError):
        params.add("bad name", [1.0])


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    params = ParamSet()
    params.add("w1", rng.normal(size=(3, 4)))
    params.add("u", rng.uniform(-1, 1, size=(5, 1)) / 3.0)
    path = tmp_path / "model.params"
    params.save(path)
    again = ParamSet.load(path)
    assert again.names() == ["w1", "u"]
    for name, p in params.items():
        assert np.array_equal(again[name].data, p.data)
        assert again[name].data.dtype == np.float64


def test_zero_grad_resets_accumulators():
    params = ParamSet()
    w = params.add("w", [2.0])
    backward(nn.sum_all(nn.mul(w, w)))
    assert w.grad[0, 0] != 0.0
    params.zero_grad()
    assert np.all(w.grad == 0.0)
