import importlib
import sys
import threading
from typing import Dict, Generic, List, Optional, TypeVar

from terranp.core.exceptions import PluginAlreadyRegistered, PluginNotRegistered

if sys.version_info >= (3, 10):
    from importlib import metadata
else:
    import importlib_metadata as metadata


T = TypeVar("T")


def _load_reference(reference: str) -> object:
    """Imports ``"package.module:attribute"``."""
    module, _, attr = reference.partition(":")
    return getattr(importlib.import_module(module), attr)


class PluginRegister(Generic[T]):
    """
    Named plugins of one kind, runners or baselines.

    ``auto_register`` loads the plugins shipped with terranp (``builtins``,
    given as ``"module:attribute"`` references so nothing is imported until
    a plugin is needed) and then every plugin other packages declare under
    the ``entry_point`` group.

    Arguments:
        entry_point: entry point group, i.e. ``terranp.plugins.baselines``
        builtins: plugin name to ``"module:attribute"`` reference

    Attributes:
        available (dict): registered plugins by name
    """

    def __init__(self, entry_point: str, builtins: Optional[Dict[str, str]] = None) -> None:
        self.entry_point = entry_point
        self.builtins = dict(builtins or {})
        self.available: Dict[str, T] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"PluginRegister({self.entry_point}: {', '.join(self.names()) or '-'})"

    def names(self) -> List[str]:
        return sorted(self.available)

    def auto_register(self) -> None:
        for name, reference in self.builtins.items():
            self.register(name, _load_reference(reference))  # type: ignore[arg-type]
        for entry_point in metadata.entry_points(group=self.entry_point):
            self.register(entry_point.name, entry_point.load())

    def register(self, name: str, plugin: T) -> None:
        """
        Registers ``plugin`` as ``name``. Registering the same plugin twice
        under one name is a no-op.

        Raises:
            :obj:`terranp.core.exceptions.PluginAlreadyRegistered`: ``name``
              is taken by a different plugin
        """
        with self._lock:
            existing = self.available.setdefault(name, plugin)
        if existing is not plugin and existing != plugin:
            raise PluginAlreadyRegistered(
                f"{self.entry_point}: can't register {plugin} as {name!r}, "
                f"{existing} is registered under that name"
            )

    def _missing(self, name: str) -> PluginNotRegistered:
        known = ", ".join(self.names()) or "none"
        return PluginNotRegistered(
            f"{self.entry_point}: {name!r} is not registered (known: {known})"
        )

    def deregister(self, name: str) -> None:
        """
        Raises:
            :obj:`terranp.core.exceptions.PluginNotRegistered`
        """
        with self._lock:
            if self.available.pop(name, None) is None:
                raise self._missing(name)

    def deregister_all(self) -> None:
        with self._lock:
            self.available = {}

    def get_plugin(self, name: str) -> T:
        """
        Raises:
            :obj:`terranp.core.exceptions.PluginNotRegistered`
        """
        try:
            return self.available[name]
        except KeyError:
            raise self._missing(name) from None
