"""Instance observation produced by the simulator's oracle detector."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Detection:
    """One detected instance: pixel box, class index (>= 1), confidence in [0,1]."""
    x1: float
    y1: float
    x2: float
    y2: float
    class_index: int
    confidence: float

    def validate(self, img_w, img_h):
        if not (0 <= self.x1 <= self.x2 <= img_w):
            raise ValueError(f"bad x extent ({self.x1}, {self.x2}) for width {img_w}")
        if not (0 <= self.y1 <= self.y2 <= img_h):
            raise ValueError(f"bad y extent ({self.y1}, {self.y2}) for height {img_h}")
        if self.class_index < 1:
            raise ValueError(f"class_index must be >= 1, got {self.class_index}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")
        return self
