import numpy as np
import pytest

from cdnet import tensor as T
from cdnet.optim import Adam, adam_step


def _quadratic_step(w, opt, target=0.0):
    with T.Tape() as tape:
        diff = T.subtract(w, target)
        loss = T.sum_all(T.multiply(diff, diff))
    T.backward(loss, tape)
    adam_step(opt)


def test_single_step_descends():
    w = T.DiffTensor([1.0], requires_gradient=True)
    opt = Adam([w], learning_rate=0.1)
    _quadratic_step(w, opt)
    assert w.values[0] < 1.0


def test_first_step_matches_hand_update():
    # t=1 bias corrections cancel: update = lr * g / (|g| + eps)
    w = T.DiffTensor([1.0], requires_gradient=True)
    opt = Adam([w], learning_rate=0.1, epsilon=1e-8)
    _quadratic_step(w, opt)   # g = 2w = 2
    expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8)
    np.testing.assert_allclose(w.values, [expected], atol=1e-15)


def test_zero_gradient_leaves_parameters_unchanged():
    w = T.DiffTensor([1.5, -2.0], requires_gradient=True)
    opt = Adam([w], learning_rate=0.1)
    before = w.values.copy()
    opt.step()
    np.testing.assert_allclose(w.values, before)


def test_converges_on_convex_quadratic():
    w = T.DiffTensor([0.0], requires_gradient=True)
    opt = Adam([w], learning_rate=0.05)
    for _ in range(500):
        _quadratic_step(w, opt, target=3.0)
    assert abs(w.values[0] - 3.0) < 0.01


def test_gradients_zeroed_after_step():
    w = T.DiffTensor([1.0], requires_gradient=True)
    opt = Adam([w], learning_rate=0.1)
    with T.Tape() as tape:
        loss = T.sum_all(T.multiply(w, w))
    T.backward(loss, tape)
    assert w.grad[0] != 0.0
    opt.step()
    np.testing.assert_allclose(w.grad, [0.0])


def test_deterministic_trajectories():
    def run():
        rng = np.random.default_rng(42)
        w = T.DiffTensor(rng.normal(size=6), requires_gradient=True)
        opt = Adam([w], learning_rate=1e-3)
        traj = []
        for _ in range(100):
            with T.Tape() as tape:
                loss = T.sum_all(T.multiply(w, w))
            T.backward(loss, tape)
            opt.step()
            traj.append(w.values.copy())
        return np.array(traj)

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_validation_errors():
    w = T.DiffTensor([1.0], requires_gradient=True)
    with pytest.raises(ValueError):
        Adam([w], learning_rate=0.0)
    with pytest.raises(ValueError):
        Adam([w], learning_rate=-1.0)
    with pytest.raises(ValueError):
        Adam([w], betas=(1.0, 0.999))
    with pytest.raises(ValueError):
        Adam([w], epsilon=0.0)
    with pytest.raises(ValueError):
        Adam([])
    with pytest.raises(ValueError):
        Adam([T.DiffTensor([1.0])])


def test_duplicate_params_deduplicated():
    w = T.DiffTensor([1.0], requires_gradient=True)
    opt = Adam([w, w], learning_rate=0.1)
    assert len(opt.params) == 1


def test_uniform_init_bounds_and_determinism():
    rng = np.random.default_rng(9)
    p = T.uniform_init(rng, (64, 32), fan_in=32)
    bound = 32 ** -0.5
    assert p.requires_gradient
    assert np.all(np.abs(p.values) <= bound)
    rng2 = np.random.default_rng(9)
    p2 = T.uniform_init(rng2, (64, 32), fan_in=32)
    assert np.array_equal(p.values, p2.values)
