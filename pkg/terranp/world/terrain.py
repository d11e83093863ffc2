import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from terranp.core.configuration import WorldConfig
from terranp.core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

FEATURE_KINDS = ("ditch", "cliff", "hill", "bump")

# tanh wall softness of ditches, meters
DITCH_SOFTNESS = 0.1


def _sech2(x: np.ndarray) -> np.ndarray:
    t = np.tanh(x)
    return 1.0 - t * t


class TerrainFeature(object):
    """
    One sharp terrain feature in world coordinates.

    Arguments:
        kind: ``ditch``, ``cliff``, ``hill`` or ``bump``
        cx: centre x in meters
        cy: centre y in meters
        orientation: direction of the feature's long axis in radians
        width: ditch width, cliff transition width or hill/bump radius (m)
        depth: ditch depth (m)
        height: cliff drop or hill/bump height (m)
        length: ditch length along its axis (m)
    """

    __slots__ = ("kind", "cx", "cy", "orientation", "width", "depth", "height", "length")

    def __init__(
        self,
        kind: str,
        cx: float,
        cy: float,
        orientation: float = 0.0,
        width: float = 2.0,
        depth: float = 0.0,
        height: float = 0.0,
        length: float = 20.0,
    ) -> None:
        if kind not in FEATURE_KINDS:
            raise ConfigurationError(f"unknown terrain feature {kind!r}")
        if width <= 0 or length <= 0:
            raise ConfigurationError(f"{kind}: width and length must be positive")
        if kind == "ditch" and depth <= 0:
            raise ConfigurationError("ditch depth must be positive")
        if kind == "cliff" and height <= 0:
            raise ConfigurationError("cliff drop must be positive")
        self.kind = kind
        self.cx = float(cx)
        self.cy = float(cy)
        self.orientation = float(orientation)
        self.width = float(width)
        self.depth = float(depth)
        self.height = float(height)
        self.length = float(length)

    def __repr__(self) -> str:
        return f"TerrainFeature({self.kind!r}, centre=({self.cx:.1f}, {self.cy:.1f}))"

    def dict(self) -> Dict[str, Any]:
        return {item: getattr(self, item) for item in self.__slots__}

    def _local(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        dx, dy = x - self.cx, y - self.cy
        return c * dx + s * dy, -s * dx + c * dy

    def profile(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Height contribution and its world-frame gradient."""
        u, v = self._local(x, y)
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        if self.kind == "ditch":
            k = DITCH_SOFTNESS
            hw, hl = self.width / 2.0, self.length / 2.0
            across = 0.5 * (np.tanh((v + hw) / k) - np.tanh((v - hw) / k))
            along = 0.5 * (np.tanh((u + hl) / k) - np.tanh((u - hl) / k))
            d_across = 0.5 / k * (_sech2((v + hw) / k) - _sech2((v - hw) / k))
            d_along = 0.5 / k * (_sech2((u + hl) / k) - _sech2((u - hl) / k))
            h = -self.depth * across * along
            dh_du = -self.depth * across * d_along
            dh_dv = -self.depth * d_across * along
        elif self.kind == "cliff":
            k = self.width
            h = -0.5 * self.height * (1.0 + np.tanh(v / k))
            dh_du = np.zeros_like(u)
            dh_dv = -0.5 * self.height / k * _sech2(v / k)
        elif self.kind == "hill":
            r2 = u * u + v * v
            h = self.height * np.exp(-r2 / (2.0 * self.width**2))
            dh_du = -h * u / self.width**2
            dh_dv = -h * v / self.width**2
        else:
            r = np.hypot(u, v)
            inside = r < self.width
            phase = np.pi * np.minimum(r, self.width) / self.width
            h = np.where(inside, 0.5 * self.height * (1.0 + np.cos(phase)), 0.0)
            dh_dr = np.where(inside, -0.5 * self.height * np.pi / self.width * np.sin(phase), 0.0)
            safe_r = np.where(r > 0, r, 1.0)
            dh_du = np.where(r > 0, dh_dr * u / safe_r, 0.0)
            dh_dv = np.where(r > 0, dh_dr * v / safe_r, 0.0)
        # du/dx = c, du/dy = s, dv/dx = -s, dv/dy = c
        return h, c * dh_du - s * dh_dv, s * dh_du + c * dh_dv

    def peak(self) -> float:
        """Largest height the feature can add."""
        return self.height if self.kind in ("hill", "bump") else 0.0


class TerrainField(object):
    """
    Smooth base made of seeded sinusoids plus sharp features.

    Arguments:
        amplitudes: per component amplitude in meters
        wavelengths: per component wavelength in meters
        directions: per component propagation direction in radians
        phases: per component phase in radians
        features: sharp features on top of the base
    """

    __slots__ = ("amplitudes", "wavelengths", "directions", "phases", "features")

    def __init__(
        self,
        amplitudes: Sequence[float] = (),
        wavelengths: Sequence[float] = (),
        directions: Sequence[float] = (),
        phases: Sequence[float] = (),
        features: Optional[List[TerrainFeature]] = None,
    ) -> None:
        self.amplitudes = np.asarray(amplitudes, dtype=np.float64)
        self.wavelengths = np.asarray(wavelengths, dtype=np.float64)
        self.directions = np.asarray(directions, dtype=np.float64)
        self.phases = np.asarray(phases, dtype=np.float64)
        n = len(self.amplitudes)
        if not (len(self.wavelengths) == len(self.directions) == len(self.phases) == n):
            raise ConfigurationError("sinusoid parameters must have the same length")
        if np.any(self.wavelengths <= 0):
            raise ConfigurationError("wavelengths must be positive")
        self.features = list(features or [])

    @classmethod
    def flat(cls, features: Optional[List[TerrainFeature]] = None) -> "TerrainField":
        return cls(features=features)

    @classmethod
    def random_base(cls, rng: np.random.Generator, config: WorldConfig) -> "TerrainField":
        k = config.base_components
        amplitudes = config.base_amplitude * rng.uniform(0.1, 1.0, k) / max(k, 1)
        wavelengths = rng.uniform(config.wavelength_min, config.wavelength_max, k)
        directions = rng.uniform(0.0, 2 * np.pi, k)
        phases = rng.uniform(0.0, 2 * np.pi, k)
        return cls(amplitudes, wavelengths, directions, phases)

    def __repr__(self) -> str:
        kinds = ",".join(f.kind for f in self.features)
        return f"TerrainField({len(self.amplitudes)} sinusoids, features=[{kinds}])"

    def _base(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        h = np.zeros(np.broadcast(x, y).shape)
        gx = np.zeros_like(h)
        gy = np.zeros_like(h)
        for a, lam, d, p in zip(self.amplitudes, self.wavelengths, self.directions, self.phases):
            w = 2 * np.pi / lam
            kx, ky = w * np.cos(d), w * np.sin(d)
            arg = kx * x + ky * y + p
            h += a * np.sin(arg)
            cos = a * np.cos(arg)
            gx += cos * kx
            gy += cos * ky
        return h, gx, gy

    def base_height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self._base(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))[0]

    def feature_height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        h = np.zeros(np.broadcast(x, y).shape)
        for feature in self.features:
            h += feature.profile(x, y)[0]
        return h

    def height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        h = self._base(x, y)[0]
        for feature in self.features:
            h = h + feature.profile(x, y)[0]
        return h

    def gradient(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        _, gx, gy = self._base(x, y)
        for feature in self.features:
            _, fx, fy = feature.profile(x, y)
            gx = gx + fx
            gy = gy + fy
        return gx, gy

    def max_height(self) -> float:
        """Upper bound of :meth:`height` over the whole plane."""
        return float(np.abs(self.amplitudes).sum() + sum(f.peak() for f in self.features))


def terrain_height(field: TerrainField, x: Any, y: Any) -> np.ndarray:
    return field.height(x, y)


def terrain_gradient(field: TerrainField, x: Any, y: Any) -> Tuple[np.ndarray, np.ndarray]:
    return field.gradient(x, y)
