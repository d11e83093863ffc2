from typing import Dict, Iterator, List, Mapping, Optional, Tuple, TypeVar

import numpy as np

from terranp.autodiff.tensor import Tensor
from terranp.core.exceptions import DataError

M = TypeVar("M", bound="Module")


class Module(object):
    """
    Base class of everything holding learned tensors. Parameters and child
    modules are registered explicitly and named with dotted paths, i.e.
    ``fusion.deep.0.weight``.
    """

    def __init__(self) -> None:
        self._params: Dict[str, Tensor] = {}
        self._children: Dict[str, "Module"] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor(value, requires_grad=True)
        self._params[name] = tensor
        return tensor

    def child(self, name: str, module: M) -> M:
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield prefix + name, tensor
        for name, module in self._children.items():
            yield from module.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def state(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """
        Copies ``state`` into the parameters.

        Raises:
            :obj:`terranp.core.exceptions.DataError`: names or shapes disagree
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if strict and (missing or unexpected):
            raise DataError(
                "model/config mismatch: "
                f"missing {missing[:5]}{'...' if len(missing) > 5 else ''}, "
                f"unexpected {unexpected[:5]}{'...' if len(unexpected) > 5 else ''}"
            )
        for name, tensor in own.items():
            if name not in state:
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise DataError(
                    f"model/config mismatch: {name} has shape {value.shape}, "
                    f"model expects {tensor.shape}"
                )
            tensor.data = value.copy()

    def parameter_count(self, names: Optional[List[str]] = None) -> int:
        return sum(t.size for n, t in self.named_parameters() if names is None or n in names)
