"""
scoremaps.catalog
-----------------
Ready-to-use score-map ensembles, resolved by name ("weighted", "pixmax", ...).
"""

from .weighted import Weighted
from .imglvlmax import Imglvlmax
from .pixmax import Pixmax
from .pixavg import Pixavg
from .pixweightedavg import Pixweightedavg
from .selfonly import Selfonly

__all__ = ["Weighted", "Imglvlmax", "Pixmax", "Pixavg", "Pixweightedavg", "Selfonly"]
