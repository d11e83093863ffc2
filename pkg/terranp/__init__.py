import sys

from terranp.init_terranp import InitTerraNP

if sys.version_info >= (3, 10):
    from importlib import metadata
else:
    import importlib_metadata as metadata

try:
    __version__ = metadata.version("terranp")
except metadata.PackageNotFoundError:
    __version__ = "0.0.0"

__all__ = ("InitTerraNP", "__version__")
