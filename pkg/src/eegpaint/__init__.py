"""EEG emotion encoding and emotion-conditioned image generation.

Modules: ``ingest`` (Cyton frames, epochs, synthetic EEG), ``features``
(band DE, montage graph), ``autodiff`` (tensors, tape, Adam), ``encoder``
(graph network), ``imaging`` (paintings, colour stats, bicubic, PPM/PNG),
``cgan`` (conditional GAN with adaptive augmentation) and ``pipeline``
(CLI, config, checkpoints).
"""
from .kernels import BACKEND
from .labels import EmotionLabel

__version__ = "0.1.0"
__all__ = ["BACKEND", "EmotionLabel", "__version__"]
