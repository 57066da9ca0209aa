"""Deep feature extraction to FVOL for the salgraph pipeline."""

__version__ = "0.1.0"

from .extractor import LAYERS, ExtractionSpec, extract_features, load_frames
from .fvol import write_fvol

__all__ = ["LAYERS", "ExtractionSpec", "extract_features", "load_frames", "write_fvol"]
