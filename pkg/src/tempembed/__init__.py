"""Temporal node embeddings for link prediction.

Pipeline: timestamped edges -> cumulative snapshots -> decayed influence
matrices -> untrained linear graph convolution per snapshot -> Givens/QR
alignment across snapshots -> recurrent link predictor -> ROC/PR evaluation.
"""

__version__ = "0.1.0"

from tempembed.errors import (  # noqa: E402
    ConfigError,
    DataError,
    NumericalError,
    ParseError,
    TempEmbedError,
)

__all__ = [
    "__version__",
    "TempEmbedError",
    "ParseError",
    "DataError",
    "ConfigError",
    "NumericalError",
]
