import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from terranp.core.exceptions import DataError, NumericError, ShapeError

logger = logging.getLogger(__name__)

ORTHONORMAL_TOLERANCE = 1e-9


class CameraModel(object):
    """
    Pinhole camera mounted on the vehicle.

    Arguments:
        intrinsics: K, 3x3
        rotation: camera-to-ego rotation R, 3x3
        translation: camera-to-ego translation t, 3
        image_size: (width, height) in pixels

    Raises:
        :obj:`terranp.core.exceptions.NumericError`: K is singular
        :obj:`terranp.core.exceptions.ShapeError`: R isn't orthonormal or a
          matrix has the wrong shape
    """

    __slots__ = ("intrinsics", "rotation", "translation", "image_size", "_k_inv")

    def __init__(
        self,
        intrinsics: np.ndarray,
        rotation: Optional[np.ndarray] = None,
        translation: Optional[np.ndarray] = None,
        image_size: Tuple[int, int] = (640, 480),
    ) -> None:
        k = np.asarray(intrinsics, dtype=np.float64)
        r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
        if k.shape != (3, 3) or r.shape != (3, 3) or t.shape != (3,):
            raise ShapeError("camera needs 3x3 K, 3x3 R and a 3-vector t")
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=ORTHONORMAL_TOLERANCE):
            raise ShapeError("camera rotation is not orthonormal")
        try:
            k_inv = np.linalg.inv(k)
        except np.linalg.LinAlgError as e:
            raise NumericError("camera intrinsics are singular") from e
        if not np.all(np.isfinite(k_inv)):
            raise NumericError("camera intrinsics are singular")
        self.intrinsics = k
        self.rotation = r
        self.translation = t
        self.image_size = image_size
        self._k_inv = k_inv

    def dict(self) -> Dict[str, Any]:
        return {
            "intrinsics": self.intrinsics.tolist(),
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "image_size": self.image_size,
        }


def lift_pixels(pixels: np.ndarray, cam: CameraModel) -> np.ndarray:
    """
    Back-projects ``(u, v, d)`` rows to the ego frame:
    ``d·(u, v, 1)·(K⁻¹)ᵀ·Rᵀ + t``.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    d = pixels[:, 2]
    if np.any(d <= 0):
        raise DataError("pixel depths must be positive")
    homogeneous = np.column_stack([pixels[:, 0], pixels[:, 1], np.ones(len(pixels))])
    rays = d[:, None] * homogeneous
    return rays @ cam._k_inv.T @ cam.rotation.T + cam.translation


def project_points(points: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Inverse of :func:`lift_pixels`: ego points to ``(u, v, d)`` rows."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    camera = (points - cam.translation) @ cam.rotation
    image = camera @ cam.intrinsics.T
    d = image[:, 2]
    if np.any(d <= 0):
        raise DataError("points behind the camera can't be projected")
    return np.column_stack([image[:, 0] / d, image[:, 1] / d, d])
