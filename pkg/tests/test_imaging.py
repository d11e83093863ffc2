import numpy as np
import pytest

from terranp.bev.grid import ElevationGrid
from terranp.core.exceptions import DataError, UsageError
from terranp.imaging import normalize, read_pgm, render, write_heatmap, write_image


def grid(values) -> ElevationGrid:
    values = np.asarray(values, dtype=np.float64)
    return ElevationGrid(values, np.isfinite(values))


class TestNormalize(object):
    def test_constant_grid_is_mid_gray(self):
        assert (normalize(grid(np.full((3, 4), 7.5))) == 128).all()

    def test_single_valid_cell(self):
        values = np.full((3, 3), np.nan)
        values[1, 2] = -4.0
        levels = normalize(grid(values))
        assert levels[1, 2] == 128
        assert levels.sum() == 128

    def test_range(self):
        levels = normalize(grid([[0.0, 1.0, np.nan], [2.0, 4.0, 3.0]]))
        assert levels.tolist() == [[1, 65, 0], [128, 255, 191]]

    def test_nothing_valid(self):
        assert not normalize(grid(np.full((2, 2), np.nan))).any()


class TestImages(object):
    def test_pgm(self, tmp_path):
        values = np.zeros((2, 3))
        values[0, 0] = 1.0
        path = write_image(tmp_path / "a.pgm", grid(values))
        assert path.read_bytes().startswith(b"P5\n3 2\n255\n")
        pixels = read_pgm(path)
        assert pixels.shape == (2, 3)
        # row 0 of the grid is the southern edge, drawn last
        assert pixels[1, 0] == 255
        assert pixels[0].tolist() == [1, 1, 1]

    def test_ppm(self):
        data = render(grid([[0.0, np.nan, 1.0]]), "viridis")
        header = b"P6\n3 1\n255\n"
        assert data.startswith(header)
        rgb = np.frombuffer(data[len(header) :], dtype=np.uint8).reshape(3, 3)
        assert rgb.tolist() == [[68, 1, 84], [0, 0, 0], [253, 231, 37]]

    def test_heatmap_of_a_raster(self, tmp_path):
        values = np.array([[np.nan, 2.0], [2.0, 2.0]])
        pixels = read_pgm(write_heatmap(tmp_path / "sub" / "h.pgm", values))
        assert pixels.tolist() == [[128, 128], [0, 128]]

    def test_unknown_palette(self):
        with pytest.raises(UsageError):
            render(grid([[1.0]]), "jet")

    def test_not_a_pgm(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(DataError):
            read_pgm(path)

    def test_truncated_pgm(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00")
        with pytest.raises(DataError):
            read_pgm(path)
