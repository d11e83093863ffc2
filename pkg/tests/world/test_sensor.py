import numpy as np
import pytest

from terranp.bev.grid import EgoPose
from terranp.core.exceptions import ConfigurationError
from terranp.world.sensor import SensorModel, march_rays, simulate_scan
from terranp.world.terrain import TerrainFeature, TerrainField

POSE = EgoPose(3.0, -1.0, 1.8, 0.25, tag="s000f0000")


def sensor(**kwargs) -> SensorModel:
    params = {
        "mount_height": 1.8,
        "azimuth_count": 36,
        "elevations": np.deg2rad([-30.0, -10.0, 5.0]),
        "max_range": 16.0,
        "z_noise": 0.0,
        "march_step": 0.1,
    }
    params.update(kwargs)
    return SensorModel(**params)


class TestSimulateScan(object):
    def test_flat_ground_ranges(self):
        scan = simulate_scan(POSE, TerrainField.flat(), sensor())
        assert len(scan) == 2 * 36
        assert np.all(scan.points[:, 2] == 0.0)
        horizontal = np.hypot(scan.points[:, 0] - POSE.x, scan.points[:, 1] - POSE.y)
        near = 1.8 / np.tan(np.deg2rad(30.0))
        far = 1.8 / np.tan(np.deg2rad(10.0))
        assert np.allclose(horizontal[0::2], near, rtol=1e-9)
        assert np.allclose(horizontal[1::2], far, rtol=1e-9)

    def test_out_of_range_rays_are_dropped(self):
        scan = simulate_scan(
            POSE, TerrainField.flat(), sensor(elevations=np.deg2rad([-1.0]), max_range=16.0)
        )
        assert len(scan) == 0

    def test_seeded_noise(self):
        noisy = sensor(z_noise=0.05)
        a = simulate_scan(POSE, TerrainField.flat(), noisy, seed=9)
        b = simulate_scan(POSE, TerrainField.flat(), noisy, seed=9)
        c = simulate_scan(POSE, TerrainField.flat(), noisy, seed=10)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)
        assert np.array_equal(a.points[:, :2], c.points[:, :2])

    def test_hits_lie_on_the_surface(self):
        hill = TerrainFeature("hill", 8.0, 0.0, width=3.0, height=2.0)
        field = TerrainField([0.4], [25.0], [0.5], [1.0], [hill])
        scan = simulate_scan(EgoPose(0.0, 0.0, 2.5, 0.0), field, sensor())
        assert len(scan) > 0
        assert np.array_equal(
            scan.points[:, 2], field.height(scan.points[:, 0], scan.points[:, 1])
        )

    def test_hill_occludes_what_is_behind_it(self):
        wall = TerrainFeature("hill", 6.0, 0.0, width=1.0, height=5.0)
        field = TerrainField.flat([wall])
        origin = np.array([0.0, 0.0, 1.8])
        t = march_rays(origin, np.array([[1.0, 0.0, -0.05]]), field, 0.05, 30.0)
        assert np.isfinite(t[0])
        assert t[0] < 6.0


class TestSensorModel(object):
    def test_directions_are_unit(self):
        d = sensor().directions(0.4)
        assert d.shape == (36 * 3, 3)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)

    def test_from_config(self, small_config):
        model = SensorModel.from_config(small_config.sensor)
        assert len(model.elevations) == small_config.sensor.beams
        assert model.azimuth_count == 120

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"elevations": np.deg2rad([5.0, -10.0])},
            {"max_range": 0.0},
            {"march_step": -1.0},
            {"z_noise": -0.1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            sensor(**kwargs)
