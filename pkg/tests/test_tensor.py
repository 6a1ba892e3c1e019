import numpy as np
import pytest

from cdnet import tensor as T
from cdnet.errors import ShapeMismatchError, TapeReuseError

from helpers import gradient_check


def test_conv1d_identity_kernel_same():
    x = T.DiffTensor([[1.0, 2.0, 3.0]])
    k = T.DiffTensor(np.array([[[1.0]]]))
    b = T.DiffTensor([0.0])
    out = T.conv1d(x, k, b, padding="same")
    np.testing.assert_allclose(out.values, [[1.0, 2.0, 3.0]])


def test_conv1d_centered_delta_same():
    x = T.DiffTensor([[1.0, 2.0, 3.0]])
    k = T.DiffTensor(np.array([[[0.0, 1.0, 0.0]]]))
    b = T.DiffTensor([0.0])
    out = T.conv1d(x, k, b, padding="same")
    np.testing.assert_allclose(out.values, [[1.0, 2.0, 3.0]])


def test_conv1d_box_kernel_valid():
    x = T.DiffTensor([[1.0, 2.0, 3.0]])
    k = T.DiffTensor(np.ones((1, 1, 3)))
    b = T.DiffTensor([1.0])
    out = T.conv1d(x, k, b, padding="valid")
    np.testing.assert_allclose(out.values, [[7.0]])


def test_conv1d_batched_matches_loop():
    rng = np.random.default_rng(0)
    xb = rng.normal(size=(4, 2, 12))
    k = T.DiffTensor(rng.normal(size=(3, 2, 5)))
    b = T.DiffTensor(rng.normal(size=3))
    batched = T.conv1d(T.DiffTensor(xb), k, b, padding="same")
    for i in range(4):
        single = T.conv1d(T.DiffTensor(xb[i]), k, b, padding="same")
        np.testing.assert_allclose(batched.values[i], single.values, atol=1e-12)


def test_conv1d_rejects_bad_shapes():
    x = T.DiffTensor([[1.0, 2.0, 3.0]])
    with pytest.raises(ShapeMismatchError):
        T.conv1d(x, T.DiffTensor(np.ones((1, 2, 3))), T.DiffTensor([0.0]), padding="same")
    with pytest.raises(ShapeMismatchError):
        T.conv1d(x, T.DiffTensor(np.ones((1, 1, 5))), T.DiffTensor([0.0]), padding="valid")
    with pytest.raises(ShapeMismatchError):
        T.conv1d(x, T.DiffTensor(np.ones((1, 1, 3))), T.DiffTensor([0.0, 0.0]), padding="same")


def test_dense_hand_values():
    out = T.dense(T.DiffTensor([1.0, 0.0]), T.DiffTensor(np.eye(2)), T.DiffTensor([0.0, 0.0]))
    np.testing.assert_allclose(out.values, [1.0, 0.0])
    out = T.dense(T.DiffTensor([2.0]), T.DiffTensor([[3.0]]), T.DiffTensor([1.0]))
    np.testing.assert_allclose(out.values, [7.0])
    out = T.dense(T.DiffTensor([1.0, 1.0]), T.DiffTensor([[1.0, -1.0]]), T.DiffTensor([0.0]))
    np.testing.assert_allclose(out.values, [0.0])


def test_dense_rejects_mismatch():
    with pytest.raises(ShapeMismatchError):
        T.dense(T.DiffTensor([1.0, 2.0, 3.0]), T.DiffTensor([[1.0, 2.0]]), T.DiffTensor([0.0]))


def test_relu_values_and_subgradient():
    out = T.relu(T.DiffTensor([-1.0, 0.0, 2.0]))
    np.testing.assert_allclose(out.values, [0.0, 0.0, 2.0])

    x = T.DiffTensor([2.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(T.relu(x))
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, [1.0])

    x = T.DiffTensor([-1.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(T.relu(x))
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, [0.0])

    x = T.DiffTensor([0.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(T.relu(x))
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, [0.0])


def test_backward_sum_of_squares():
    x = T.DiffTensor([3.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(T.multiply(x, x))
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, [6.0])


def test_backward_plain_sum():
    x = T.DiffTensor([1.0, 1.0, 1.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(x)
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, [1.0, 1.0, 1.0])


def test_backward_rejects_nonscalar_root():
    x = T.DiffTensor([1.0, 2.0], requires_gradient=True)
    with T.Tape() as tape:
        y = T.multiply(x, 2.0)
    with pytest.raises(ValueError):
        T.backward(y, tape)


def test_backward_rejects_foreign_root():
    x = T.DiffTensor([1.0], requires_gradient=True)
    with T.Tape() as tape:
        _ = T.sum_all(x)
    with T.Tape() as other:
        s2 = T.sum_all(x)
    with pytest.raises(ValueError):
        T.backward(s2, tape)


def test_tape_reuse_rejected():
    x = T.DiffTensor([1.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(T.multiply(x, x))
    T.backward(s, tape)
    with pytest.raises(TapeReuseError):
        T.backward(s, tape)


def test_tape_records_in_forward_order_and_replays_reversed():
    x = T.DiffTensor([1.0, -2.0], requires_gradient=True)
    with T.Tape() as tape:
        s = T.sum_all(T.relu(T.multiply(x, x)))
    assert tape.operation_names() == ["multiply", "relu", "sum_all"]
    visited = []
    tape._entries = [
        (name, (lambda f=fn, n=name: (visited.append(n), f())))
        for name, fn in tape._entries
    ]
    T.backward(s, tape)
    assert visited == ["sum_all", "relu", "multiply"]


def test_backward_linearity():
    rng = np.random.default_rng(3)
    x = T.DiffTensor(rng.normal(size=5), requires_gradient=True)
    a, b = 2.5, -1.25

    def loss1():
        return T.sum_all(T.multiply(x, x))

    def loss2():
        return T.mean_all(T.exp(T.multiply(x, 0.3)))

    def combined():
        return T.add(T.multiply(loss1(), a), T.multiply(loss2(), b))

    def grad_of(fn):
        x.zero_grad()
        with T.Tape() as tape:
            s = fn()
        T.backward(s, tape)
        return x.grad.copy()

    g1, g2, gc = grad_of(loss1), grad_of(loss2), grad_of(combined)
    np.testing.assert_allclose(gc, a * g1 + b * g2, atol=1e-10)


def test_gradient_accumulates_across_shared_subexpressions():
    x = T.DiffTensor([2.0], requires_gradient=True)
    with T.Tape() as tape:
        y = T.multiply(x, 3.0)
        s = T.sum_all(T.add(y, y))
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, [6.0])


def test_broadcasting_matches_numpy_and_unbroadcasts_grads():
    rng = np.random.default_rng(7)
    a = T.DiffTensor(rng.normal(size=(4, 1, 3)), requires_gradient=True)
    b = T.DiffTensor(rng.normal(size=(5, 3)), requires_gradient=True)
    with T.Tape() as tape:
        out = T.multiply(a, b)
        s = T.sum_all(out)
    np.testing.assert_allclose(out.values, a.values * b.values)
    T.backward(s, tape)
    assert a.grad.shape == a.values.shape
    assert b.grad.shape == b.values.shape
    np.testing.assert_allclose(a.grad, np.broadcast_to(b.values, (4, 5, 3)).sum(1, keepdims=True))
    np.testing.assert_allclose(b.grad, np.broadcast_to(a.values, (4, 5, 3)).sum(0))


def test_broadcast_mismatch_rejected():
    with pytest.raises(ShapeMismatchError):
        T.add(T.DiffTensor(np.zeros(3)), T.DiffTensor(np.zeros(4)))


def test_softmax_probabilities_and_stability():
    out = T.softmax(T.DiffTensor([[2.0, 2.0], [0.0, 10.0]]))
    np.testing.assert_allclose(out.values[0], [0.5, 0.5])
    assert out.values[1, 1] > 0.9999
    np.testing.assert_allclose(out.values.sum(axis=-1), [1.0, 1.0], atol=1e-12)
    big = T.softmax(T.DiffTensor([[1000.0, 1000.0]]))
    assert np.all(np.isfinite(big.values))


def test_take_rows_and_take_per_row():
    a = T.DiffTensor(np.arange(12.0).reshape(4, 3), requires_gradient=True)
    with T.Tape() as tape:
        picked = T.take_rows(a, [2, 0, 2])
        s = T.sum_all(picked)
    np.testing.assert_allclose(picked.values, [[6, 7, 8], [0, 1, 2], [6, 7, 8]])
    T.backward(s, tape)
    np.testing.assert_allclose(a.grad[2], [2.0, 2.0, 2.0])
    np.testing.assert_allclose(a.grad[0], [1.0, 1.0, 1.0])
    np.testing.assert_allclose(a.grad[1], [0.0, 0.0, 0.0])

    b = T.DiffTensor([[0.2, 0.8], [0.6, 0.4]], requires_gradient=True)
    with T.Tape() as tape:
        vals = T.take_per_row(b, [1, 0])
        s = T.sum_all(vals)
    np.testing.assert_allclose(vals.values, [0.8, 0.6])
    T.backward(s, tape)
    np.testing.assert_allclose(b.grad, [[0.0, 1.0], [1.0, 0.0]])


def test_no_tape_means_no_recording():
    x = T.DiffTensor([1.0], requires_gradient=True)
    y = T.multiply(x, x)
    assert y._tape is None


@pytest.mark.parametrize("seed", range(6))
def test_gradient_check_random_composites(seed):
    rng = np.random.default_rng(seed)
    x = T.DiffTensor(rng.normal(size=(2, 1, 9)), requires_gradient=True)
    k1 = T.DiffTensor(rng.normal(size=(3, 1, 3)) * 0.5, requires_gradient=True)
    b1 = T.DiffTensor(rng.normal(size=3) * 0.1, requires_gradient=True)
    w = T.DiffTensor(rng.normal(size=(2, 3)) * 0.5, requires_gradient=True)
    b2 = T.DiffTensor(rng.normal(size=2) * 0.1, requires_gradient=True)
    params = [x, k1, b1, w, b2]

    def build():
        h = T.relu(T.conv1d(x, k1, b1, padding="same"))
        pooled = T.mean_last(h)
        logits = T.dense(pooled, w, b2)
        p = T.softmax(logits)
        picked = T.take_per_row(p, [0, 1])
        return T.mean_all(T.subtract(T.exp(picked), T.log(T.clamp_min(picked, 1e-9))))

    assert gradient_check(build, params, step=1e-6) < 1e-3


def test_values_and_gradients_stay_finite():
    rng = np.random.default_rng(11)
    for trial in range(10):
        x = T.DiffTensor(rng.normal(size=(3, 8)) * 10.0 ** rng.integers(-2, 3),
                         requires_gradient=True)
        w = T.DiffTensor(rng.normal(size=(4, 8)), requires_gradient=True)
        b = T.DiffTensor(rng.normal(size=4), requires_gradient=True)
        with T.Tape() as tape:
            h = T.relu(T.dense(x, w, b))
            p = T.softmax(h)
            s = T.mean_all(T.log(T.clamp_min(p, 1e-12)))
        T.backward(s, tape)
        for t in (x, w, b, h, p, s):
            assert np.all(np.isfinite(t.values))
            assert np.all(np.isfinite(t.grad))


def test_reshape_roundtrip_gradient():
    x = T.DiffTensor(np.arange(6.0), requires_gradient=True)
    with T.Tape() as tape:
        y = T.reshape(x, (2, 3))
        s = T.sum_all(T.multiply(y, y))
    T.backward(s, tape)
    np.testing.assert_allclose(x.grad, 2 * x.values)


def test_matmul_and_transpose_gradients():
    rng = np.random.default_rng(5)
    a = T.DiffTensor(rng.normal(size=(3, 4)), requires_gradient=True)
    b = T.DiffTensor(rng.normal(size=(4, 2)), requires_gradient=True)

    def build():
        return T.sum_all(T.multiply(T.matmul(a, b), T.transpose2d(T.matmul(T.transpose2d(b), T.transpose2d(a)))))

    assert gradient_check(build, [a, b], step=1e-6) < 1e-3
    with pytest.raises(ShapeMismatchError):
        T.matmul(a, a)
