"""Paragraph-level discourse relation sequence labeling.

Hierarchical Bi-LSTM encoder over a paragraph of discourse units, untied
implicit/explicit prediction heads and an optional linear-chain CRF, trained
from scratch in float64 numpy with hand-derived gradients.
"""

__version__ = "0.1.0"
