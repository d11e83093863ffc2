from typing import Callable, List, Sequence, Union

import numpy as np

from terranp.autodiff.tensor import Tape, Tensor
from terranp.core.exceptions import ShapeError

Point = Union[np.ndarray, Sequence[Tensor]]


def grad_check(
    function: Callable[..., Tensor], point: Point, h: float = 1e-5
) -> float:
    """
    Largest ``|autodiff - central difference| / max(1, |central difference|)``
    over every coordinate.

    ``point`` is either an array, in which case ``function`` gets one tensor
    built from it, or a list of parameter tensors that ``function`` closes
    over; those are perturbed in place and restored.
    """
    if isinstance(point, np.ndarray) or np.isscalar(point):
        x = Tensor(np.array(point, dtype=np.float64), requires_grad=True)
        return _check([x], lambda: function(x), h)
    return _check(list(point), function, h)


def _scalar(t: Tensor) -> float:
    if t.size != 1:
        raise ShapeError(f"grad_check needs a scalar function, got shape {t.shape}")
    return float(t.data.reshape(-1)[0])


def _check(params: List[Tensor], function: Callable[[], Tensor], h: float) -> float:
    with Tape() as tape:
        loss = function()
    grads = tape.backward(loss)
    analytic = [tape.grad(grads, p) for p in params]

    worst = 0.0
    for p, g in zip(params, analytic):
        original = p.data
        flat = original.reshape(-1)
        for i in range(flat.size):
            probe = flat.copy()
            probe[i] = flat[i] + h
            p.data = probe.reshape(original.shape)
            up = _scalar(function())
            probe[i] = flat[i] - h
            p.data = probe.reshape(original.shape)
            down = _scalar(function())
            p.data = original
            numeric = (up - down) / (2.0 * h)
            err = abs(g.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
