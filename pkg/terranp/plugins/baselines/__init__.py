from terranp.plugins.baselines.gp import GPBaseline
from terranp.plugins.baselines.nearest import NearestContextBaseline

__all__ = ("GPBaseline", "NearestContextBaseline")
