import numpy as np
import pytest

from terranp.autodiff.gradcheck import grad_check
from terranp.autodiff.tensor import (
    PRIMITIVES,
    Tape,
    Tensor,
    active_tape,
    apply_primitive,
    concat,
    conv2d,
)
from terranp.core.exceptions import (
    DetachedGraphError,
    NonFiniteError,
    ShapeError,
    UnknownOpError,
)

TOLERANCE = 1e-4


def _weights(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


class TestElementwise(object):
    def test_add_broadcast(self):
        b = Tensor(_weights((1, 3), 1), requires_grad=True)
        x = _weights((4, 3), 2)
        assert grad_check(lambda a: ((a + b) * (a + b)).sum(), x) < TOLERANCE
        assert grad_check(lambda: ((Tensor(x) + b) * 2.0).sum(), [b]) < TOLERANCE

    def test_sub_and_neg(self):
        x = _weights((3, 2), 3)
        assert grad_check(lambda a: ((1.0 - a) * -a).sum(), x) < TOLERANCE

    def test_mul_scalar_broadcast(self):
        s = Tensor(np.array(1.7), requires_grad=True)
        x = Tensor(_weights((2, 5), 4))
        assert grad_check(lambda: (x * s * s).sum(), [s]) < TOLERANCE

    def test_tanh(self):
        assert grad_check(lambda a: (a.tanh() * a).sum(), _weights((6,), 5)) < TOLERANCE

    def test_relu_away_from_kink(self):
        x = np.array([-2.0, -0.5, 0.3, 1.5, 2.5])
        assert grad_check(lambda a: (a.relu() * a).sum(), x) < TOLERANCE

    def test_softplus(self):
        x = np.array([-30.0, -1.0, 0.0, 2.0, 40.0])
        assert grad_check(lambda a: a.softplus().sum(), x) < TOLERANCE

    def test_exp_log(self):
        x = np.array([0.2, 1.0, 3.5])
        assert grad_check(lambda a: (a.log() * a.exp()).sum(), x) < TOLERANCE

    def test_log_of_negative_is_non_finite(self):
        with pytest.raises(NonFiniteError):
            Tensor(np.array([-1.0])).log()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones((4, 3)))

    def test_non_finite_input(self):
        with pytest.raises(NonFiniteError):
            Tensor(np.array([1.0, np.nan]))


class TestReductions(object):
    @pytest.mark.parametrize("axis", [None, 0, 1])
    def test_sum(self, axis):
        w = _weights((3, 4) if axis is None else (4,) if axis == 0 else (3,), 6)
        x = _weights((3, 4), 7)
        assert grad_check(lambda a: (a.sum(axis=axis) * w).sum(), x) < TOLERANCE

    def test_mean_keepdims(self):
        x = _weights((3, 4), 8)
        assert grad_check(lambda a: (a.mean(axis=0, keepdims=True) * a).sum(), x) < TOLERANCE

    def test_mean_of_empty_axis(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((0, 3))).mean(axis=0)

    def test_softmax(self):
        w = _weights((2, 5), 9)
        x = _weights((2, 5), 10)
        assert grad_check(lambda a: (a.softmax(axis=-1) * w).sum(), x) < TOLERANCE

    def test_softmax_masked_logit_gets_zero_weight(self):
        y = Tensor(np.array([[0.5, -1e30, 1.0]])).softmax(axis=-1)
        assert y.data[0, 1] == 0.0
        assert y.data.sum() == pytest.approx(1.0)


class TestLinearAlgebra(object):
    def test_matmul(self):
        b = Tensor(_weights((3, 2), 11), requires_grad=True)
        x = _weights((4, 3), 12)
        assert grad_check(lambda a: (a @ b).tanh().sum(), x) < TOLERANCE
        assert grad_check(lambda: (Tensor(x) @ b).tanh().sum(), [b]) < TOLERANCE

    def test_batched_matmul(self):
        b = Tensor(_weights((2, 3, 1), 13), requires_grad=True)
        a = Tensor(_weights((2, 4, 3), 14), requires_grad=True)
        assert grad_check(lambda: (a @ b).tanh().sum(), [a, b]) < TOLERANCE

    def test_matmul_shapes(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


class TestStructural(object):
    def test_reshape_transpose(self):
        w = _weights((4, 3, 2), 15)
        x = _weights((2, 3, 4), 16)
        assert (
            grad_check(lambda a: (a.reshape(3, 2, 4).transpose(2, 0, 1) * w).sum(), x)
            < TOLERANCE
        )

    def test_bad_reshape(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones(6)).reshape(4, 2)

    def test_gather_with_repeats(self):
        index = np.array([[2, 0], [2, 2], [1, 0]])
        w = _weights((3, 2, 3), 17)
        x = _weights((4, 3), 18)
        assert grad_check(lambda a: (a.gather(index) * w).sum(), x) < TOLERANCE

    def test_gather_accumulates_repeated_rows(self):
        x = Tensor(np.ones((3, 2)), requires_grad=True)
        with Tape() as tape:
            loss = x.gather(np.array([1, 1, 1, 0])).sum()
        g = tape.grad(tape.backward(loss), x)
        assert np.array_equal(g, np.array([[1.0, 1.0], [3.0, 3.0], [0.0, 0.0]]))

    def test_gather_out_of_range(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((3, 2))).gather(np.array([3]))

    def test_concat(self):
        b = Tensor(_weights((3, 1), 19), requires_grad=True)
        w = _weights((3, 3), 20)
        x = _weights((3, 2), 21)
        assert grad_check(lambda a: (concat([a, b], axis=1) * w).sum(), x) < TOLERANCE

    @pytest.mark.parametrize("dilation", [1, 2, 4])
    def test_conv2d(self, dilation):
        x = Tensor(_weights((2, 9, 9), 22), requires_grad=True)
        k = Tensor(_weights((3, 2, 3, 3), 23), requires_grad=True)
        w = _weights((3, 9, 9), 24)
        assert grad_check(lambda: (conv2d(x, k, dilation=dilation) * w).sum(), [x, k]) < TOLERANCE

    def test_conv2d_keeps_size(self):
        out = conv2d(np.ones((1, 5, 7)), np.ones((2, 1, 3, 3)), dilation=2)
        assert out.shape == (2, 5, 7)
        # centre pixel sees all nine taps
        assert out.data[0, 2, 3] == 9.0

    @pytest.mark.parametrize("dilation,stride", [(3, 1), (1, 2)])
    def test_conv2d_unsupported(self, dilation, stride):
        with pytest.raises(ShapeError):
            conv2d(np.ones((1, 5, 5)), np.ones((1, 1, 3, 3)), dilation=dilation, stride=stride)


class TestTape(object):
    def test_no_tape_records_nothing(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = (x * 2.0).sum()
        assert active_tape() is None
        assert y.node_id is None

    def test_tape_is_restored(self):
        with Tape() as outer:
            with Tape() as inner:
                assert active_tape() is inner
            assert active_tape() is outer
        assert active_tape() is None

    def test_loss_must_be_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            y = x * 2.0
        with pytest.raises(ShapeError):
            tape.backward(y)

    def test_loss_from_another_tape(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape():
            y = (x * 2.0).sum()
        with pytest.raises(DetachedGraphError):
            Tape().backward(y)

    def test_unreached_parameter_gets_zeros(self):
        x = Tensor(np.ones(3), requires_grad=True)
        unused = Tensor(np.ones((2, 2)), requires_grad=True)
        with Tape() as tape:
            loss = (x * x).sum()
        grads = tape.backward(loss)
        assert np.array_equal(tape.grad(grads, unused), np.zeros((2, 2)))
        assert np.array_equal(tape.grad(grads, x), 2 * np.ones(3))

    def test_shared_input_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        with Tape() as tape:
            loss = (x * x + x).sum()
        assert tape.grad(tape.backward(loss), x)[0] == pytest.approx(7.0)

    def test_unknown_primitive(self):
        with pytest.raises(UnknownOpError):
            apply_primitive("nope", np.ones(2))

    def test_registry(self):
        for kind in ("add", "matmul", "softmax", "gather", "conv2d"):
            assert kind in PRIMITIVES
