import numpy as np
import pytest

from fobj.tensorkit import (Adam, Tensor, concat, layer_norm, log_clamped,
                            minimum, param, softmax, stack)

from oracles import check_gradients


def test_matmul_add_values():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose((a @ b + 1.0).data, a.data + 1.0)


def test_softmax_rows_sum_to_one():
    x = Tensor(np.random.default_rng(0).standard_normal((5, 7)))
    s = softmax(x, axis=-1).data
    assert np.allclose(s.sum(axis=-1), 1.0, atol=1e-12)
    assert (s > 0).all() and (s < 1).all()


def test_dtype_preserved_float32():
    x = Tensor(np.ones((3, 3), dtype=np.float32))
    y = softmax(x * 2.0 + 1.0, axis=-1)
    assert y.dtype == np.float32


def test_minimum_tie_routes_to_first():
    a = param(np.array([1.0, 3.0]))
    b = param(np.array([1.0, 2.0]))
    m = minimum(a, b).sum()
    m.backward()
    assert np.array_equal(a.grad, [1.0, 0.0])
    assert np.array_equal(b.grad, [0.0, 1.0])


def test_clip_gradient_mask():
    x = param(np.array([-1.0, 0.5, 2.0]))
    y = x.clip(0.0, 1.0).sum()
    y.backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 0.0])


def test_max_routes_to_first_argmax():
    x = param(np.array([[1.0, 5.0, 5.0], [2.0, 1.0, 0.0]]))
    x.max(axis=1).sum().backward()
    assert np.array_equal(x.grad, [[0, 1, 0], [1, 0, 0]])


def test_getitem_gather_accumulates():
    x = param(np.arange(4.0))
    y = x[np.array([1, 1, 3])].sum()
    y.backward()
    assert np.array_equal(x.grad, [0.0, 2.0, 0.0, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_composite_gradients_match_fd(seed):
    rng = np.random.default_rng(seed)
    w = param(rng.standard_normal((4, 4)))
    g = param(np.ones(4))
    b = param(rng.standard_normal(4) * 0.1)
    x = Tensor(rng.standard_normal((6, 4)))

    def loss():
        h = layer_norm(x @ w, g, b)
        s = softmax(h, axis=-1)
        t = (h.tanh() * s).sigmoid()
        m = minimum(t.sum(axis=1), t.mean(axis=1) + 0.3)
        return (m * m).mean() + log_clamped(s).mean() * 0.1

    check_gradients(loss, [w, g, b], rng=rng)


def test_stack_and_concat_gradients():
    a, b = param(np.array(2.0)), param(np.array(3.0))
    s = stack([a * a, b * a])
    s.sum().backward()
    assert a.grad == pytest.approx(2 * 2.0 + 3.0)
    assert b.grad == pytest.approx(2.0)
    x, y = param(np.ones((2, 2))), param(np.ones((1, 2)))
    concat([x, y], axis=0).sum().backward()
    assert np.array_equal(x.grad, np.ones((2, 2)))


def test_adam_reduces_quadratic():
    w = param(np.array([5.0, -3.0]))
    opt = Adam([w], lr=0.1)
    for _ in range(300):
        opt.zero_grad()
        loss = (w * w).sum()
        loss.backward()
        opt.step()
    assert np.abs(w.data).max() < 0.1


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        param(np.ones(3)).backward()
