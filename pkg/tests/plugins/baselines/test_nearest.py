import numpy as np
import pytest

from terranp.core.exceptions import EmptySetError
from terranp.plugins.baselines import NearestContextBaseline


class Test(object):
    def test_copies_the_nearest_height(self):
        xc = np.array([[0.0, 0.0], [10.0, 0.0]])
        xt = np.array([[0.0, 0.0], [3.0, 4.0], [9.0, 0.0]])
        field = NearestContextBaseline().predict(xc, np.array([2.0, -1.0]), xt)
        assert field.mean.tolist() == [2.0, 2.0, -1.0]
        assert np.allclose(field.std, [1e-3, 1e-3 + 0.5, 1e-3 + 0.1])

    def test_empty_context(self):
        with pytest.raises(EmptySetError):
            NearestContextBaseline().predict(np.empty((0, 2)), np.empty(0), np.zeros((1, 2)))
