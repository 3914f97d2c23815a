"""Context-based local super-resolution.

Restores a region of interest of a low-resolution image at high quality by
fusing a base SR branch with a global cross-attention context module and a
slim proximity branch, with training, evaluation, complexity accounting, and
a caching inference service.
"""

__version__ = "0.1.0"

from .config import ClsrConfig, load_config
from .core.image import RoiBox, SamplePair
from .flops import FlopsBreakdown, flops_estimate
from .model import ClsrModel

__all__ = [
    "__version__",
    "ClsrConfig",
    "load_config",
    "RoiBox",
    "SamplePair",
    "FlopsBreakdown",
    "flops_estimate",
    "ClsrModel",
]
