from __future__ import annotations

import enum


class EmotionLabel(enum.IntEnum):
    """The four discrete emotions shared by the EEG and painting datasets."""

    ANGER = 0
    SADNESS = 1
    FEAR = 2
    HAPPINESS = 3

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "EmotionLabel":
        """Accept a label, an integer code, or a (case-insensitive) name."""
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip()
        if text.lstrip("-").isdigit():
            return cls(int(text))
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown emotion label {value!r}") from None


NUM_CLASSES = len(EmotionLabel)
