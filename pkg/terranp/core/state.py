from typing import Any, Dict, Optional, Set


class GlobalState(object):
    """
    This class is just a placeholder to share data amongst different
    versions of TerraNP after running ``filter`` multiple times.

    Attributes:
        failed_frames: Frames that have failed to run a task properly
    """

    __slots__ = ("failed_frames",)

    def __init__(self, failed_frames: Optional[Set[str]] = None) -> None:
        self.failed_frames = failed_frames or set()

    def recover_frame(self, frame: str) -> None:
        """Remove ``frame`` from list of failed frames."""
        self.failed_frames.discard(frame)

    def reset_failed_frames(self) -> None:
        """Reset failed frames and make all frames available for future tasks."""
        self.failed_frames = set()

    def dict(self) -> Dict[str, Any]:
        """Return a dictionary representing the object."""
        return {item: getattr(self, item) for item in GlobalState.__slots__}
