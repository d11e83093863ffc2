import numpy as np
import pytest

from terranp.autodiff.checkpoint import (
    dumps_checkpoint,
    load_checkpoint,
    loads_checkpoint,
    save_checkpoint,
)
from terranp.autodiff.module import Module
from terranp.core.exceptions import DataError
from terranp.model.layers import MLP, Linear


class Tiny(Module):
    def __init__(self, width: int = 3) -> None:
        super().__init__()
        rng = np.random.default_rng(width)
        self.scale = self.param("scale", np.ones(width))
        self.body = self.child("body", MLP([width, 4, 2], rng))
        self.head = self.child("head", Linear(2, 1, rng))


class TestModule(object):
    def test_dotted_names(self):
        names = [name for name, _ in Tiny().named_parameters()]
        assert names == [
            "scale",
            "body.0.weight",
            "body.0.bias",
            "body.1.weight",
            "body.1.bias",
            "head.weight",
            "head.bias",
        ]

    def test_parameter_count(self):
        model = Tiny()
        assert model.parameter_count() == 3 + (3 * 4 + 4) + (4 * 2 + 2) + (2 + 1)
        assert model.parameter_count(["scale"]) == 3

    def test_state_is_a_copy(self):
        model = Tiny()
        state = model.state()
        state["scale"][:] = 7.0
        assert np.array_equal(model.scale.data, np.ones(3))

    def test_load_state_missing(self):
        model = Tiny()
        state = model.state()
        del state["head.bias"]
        with pytest.raises(DataError, match="model/config mismatch"):
            model.load_state(state)

    def test_load_state_shape(self):
        with pytest.raises(DataError, match="model/config mismatch"):
            Tiny(3).load_state(Tiny(5).state())


class TestCheckpoint(object):
    def test_file_roundtrip_restores_parameters(self, tmp_path):
        model = Tiny()
        path = save_checkpoint(tmp_path / "model.snpm", model.state())
        other = Tiny()
        for p in other.parameters():
            p.data = np.zeros_like(p.data)
        other.load_state(load_checkpoint(path))
        for (name, a), (_, b) in zip(model.named_parameters(), other.named_parameters()):
            assert np.array_equal(a.data, b.data), name

    def test_layout(self):
        data = dumps_checkpoint({"w": np.arange(6.0).reshape(2, 3)})
        assert data[:4] == b"SNPM"
        # header, name length, name, rank, two dims, six doubles
        assert len(data) == 12 + 2 + 1 + 1 + 8 + 48
        assert np.frombuffer(data[-48:], dtype="<f8").tolist() == [0, 1, 2, 3, 4, 5]

    def test_scalar_tensor(self):
        tensors = loads_checkpoint(dumps_checkpoint({"s": np.array(2.5)}))
        assert tensors["s"].shape == ()
        assert float(tensors["s"]) == 2.5

    @pytest.mark.parametrize(
        "mangle",
        [
            lambda d: b"XXXX" + d[4:],
            lambda d: d[:-1],
            lambda d: d + b"\0",
            lambda d: d[:4] + (2).to_bytes(4, "little") + d[8:],
        ],
    )
    def test_corrupt(self, mangle):
        data = dumps_checkpoint({"w": np.ones((2, 2))})
        with pytest.raises(DataError):
            loads_checkpoint(mangle(data))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "nothing.snpm")
