import numpy as np
import pytest

from vinp.errors import ContractError
from vinp.grad.adam import adam_step
from vinp.grad.params import ModelParams


def reference_adam(theta, grads, lr, beta1=0.5, beta2=0.999, eps=1e-8):
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        theta = theta - lr * (m / (1 - beta1 ** t)) / (np.sqrt(v / (1 - beta2 ** t)) + eps)
    return theta


def test_three_steps_match_reference():
    params = ModelParams("test")
    params.add("w", np.array([1.0, -2.0, 0.5]))
    grads = [np.array([0.1, -0.3, 0.0]), np.array([0.2, 0.1, -1.0]), np.array([-0.5, 0.4, 2.0])]
    for g in grads:
        adam_step(params, {"w": g}, lr=1e-3)
    np.testing.assert_allclose(params["w"].data, reference_adam(np.array([1.0, -2.0, 0.5]), grads, 1e-3),
                               rtol=1e-12, atol=1e-15)
    assert params.t == 3


def test_first_step_moves_by_lr():
    params = ModelParams()
    params.add("w", np.array([0.0, 0.0]))
    adam_step(params, {"w": np.array([5.0, -0.01])}, lr=0.1)
    np.testing.assert_allclose(params["w"].data, [-0.1, 0.1], rtol=1e-5)


def test_missing_gradient_counts_as_zero():
    params = ModelParams()
    params.add("a", np.ones(2))
    params.add("b", np.ones(2))
    adam_step(params, {"a": np.ones(2)}, lr=0.01)
    np.testing.assert_array_equal(params["b"].data, np.ones(2))
    assert params.m1["b"].tolist() == [0.0, 0.0]


def test_defaults_to_tensor_grads_and_keeps_dtype():
    params = ModelParams()
    w = params.add("w", np.ones(3, dtype=np.float32))
    w.grad = np.ones(3, dtype=np.float32)
    adam_step(params, lr=0.01)
    assert w.dtype == np.float32
    assert params.m1["w"].dtype == np.float32
    assert np.all(w.data < 1.0)


def test_invalid_lr_and_step():
    params = ModelParams()
    params.add("w", np.ones(1))
    with pytest.raises(ContractError):
        adam_step(params, lr=0.0)
    with pytest.raises(ContractError):
        adam_step(params, lr=0.1, t=0)


def test_params_copy_digest_and_delta():
    params = ModelParams("g")
    params.add("w", np.arange(4.0))
    params.add_bn_state("bn1")
    twin = params.copy()
    assert twin.digest() == params.digest()
    before = params.arrays()
    adam_step(params, {"w": np.ones(4)}, lr=0.25)
    assert params.max_delta(before) == pytest.approx(0.25)
    assert twin.digest() != params.digest()
    assert params.count() == 4
    with pytest.raises(ContractError):
        params["missing"]
    with pytest.raises(ContractError):
        params.add("w", np.zeros(1))
