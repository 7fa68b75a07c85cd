import numpy as np
import pytest

from smg.errors import ContractError, TrainingError
from smg.optim import AdamState, adam_step
from smg.tensor import Tensor, backward


def reference_adam(w, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam written out longhand."""
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return w


def test_zero_gradient_leaves_parameter():
    p = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    p.grad = np.zeros(2)
    adam_step({"p": p}, AdamState(lr=0.1))
    assert np.array_equal(p.data, [1.5, -2.0])


def test_missing_gradient_counts_as_zero():
    p = Tensor(np.ones(3), requires_grad=True)
    adam_step({"p": p}, AdamState(lr=0.1))
    assert np.array_equal(p.data, np.ones(3))


def test_first_step_is_lr_times_sign():
    p = Tensor(np.array([0.0, 0.0]), requires_grad=True)
    p.grad = np.array([3.0, -0.01])
    adam_step({"p": p}, AdamState(lr=0.01))
    assert np.allclose(p.data, [-0.01, 0.01], rtol=1e-5)


def test_quadratic_converges_and_matches_reference():
    w = Tensor(np.array(0.0), requires_grad=True)
    state = AdamState(lr=0.1)
    for _ in range(200):
        w.grad = None
        backward((w - 3.0) * (w - 3.0))
        adam_step({"w": w}, state)
    assert abs(float(w.data) - 3.0) < 0.05
    expected = reference_adam(0.0, lambda x: 2 * (x - 3.0), 0.1, 200)
    assert abs(float(w.data) - expected) <= 1e-12


def test_nan_gradient_raises_without_update():
    p = Tensor(np.ones(2), requires_grad=True)
    q = Tensor(np.ones(2), requires_grad=True)
    p.grad = np.ones(2)
    q.grad = np.array([np.nan, 0.0])
    state = AdamState()
    with pytest.raises(TrainingError):
        adam_step({"p": p, "q": q}, state)
    assert np.array_equal(p.data, np.ones(2)) and state.step_count == 0


@pytest.mark.parametrize("kwargs", [{"lr": 0.0}, {"beta1": 1.0}, {"eps": 0.0}])
def test_invalid_hyperparameters(kwargs):
    with pytest.raises(ContractError):
        AdamState(**kwargs)
