import numpy as np

from ..rng import Pcg32


def he_normal(rng: Pcg32, shape, fan_in: float, dtype=np.float32) -> np.ndarray:
    """Weights drawn from N(0, sqrt(2 / fan_in))."""
    return (rng.normal(0.0, np.sqrt(2.0 / fan_in), tuple(shape))).astype(dtype)
