from __future__ import annotations

from pathlib import Path

from ..imaging import bicubic_upscale, write_png, write_ppm


def save_image(image, stem: Path, upscale: int = 1) -> Path:
    """Write ``stem.png`` and ``stem.ppm`` (optionally bicubic-upscaled); return the PNG path."""
    if upscale and upscale > 1:
        image = bicubic_upscale(image, upscale)
    png = stem.with_suffix(".png")
    write_png(image, png)
    write_ppm(image, stem.with_suffix(".ppm"))
    return png
