"""Evaluation toolkit for text-to-sound-scene synthesis systems.

Objective scoring via Frechet Audio Distance over audio embeddings,
subjective scoring via a blinded listening test with a weighted perceptual
score, and the statistical analysis linking the two.
"""

__version__ = "0.1.0"

from .errors import ScenevalError

__all__ = ["ScenevalError", "__version__"]
