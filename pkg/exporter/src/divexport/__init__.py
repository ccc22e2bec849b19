"""divexport: batch feature exporter for the DIVT tensor boundary.

Turns a manifest of image files or texts into DIVT tensors — deep-model
features, class probabilities, and text embeddings — that downstream
diversity tooling consumes.  A deterministic random-projection stub
backend stands in when no pretrained weights are available.
"""

__version__ = "0.1.0"

from divexport.errors import ExportError
from divexport.export import ExportJob, export_image_features, export_text_embeddings

__all__ = [
    "ExportError",
    "ExportJob",
    "export_image_features",
    "export_text_embeddings",
]
