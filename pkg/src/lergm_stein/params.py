"""Parameter vectors ``(beta_W, beta_B)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParameterVector:
    """Within-block parameters ``beta_w`` (length d1) and between-block ``beta_b`` (d2)."""

    beta_w: np.ndarray
    beta_b: np.ndarray

    def __post_init__(self):
        for name in ("beta_w", "beta_b"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64)).copy()
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite, got {arr}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, d1: int, d2: int) -> "ParameterVector":
        return cls(np.zeros(d1), np.zeros(d2))

    @classmethod
    def from_flat(cls, flat, d1: int) -> "ParameterVector":
        flat = np.asarray(flat, dtype=np.float64)
        return cls(flat[:d1], flat[d1:])

    def of(self, family: str) -> np.ndarray:
        return self.beta_w if family == "W" else self.beta_b

    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta_w, self.beta_b])

    def check_dims(self, d1: int, d2: int) -> None:
        if len(self.beta_w) != d1 or len(self.beta_b) != d2:
            raise ValueError(
                f"parameter dimensions ({len(self.beta_w)}, {len(self.beta_b)}) "
                f"do not match the model ({d1}, {d2})"
            )

    def __eq__(self, other):
        if not isinstance(other, ParameterVector):
            return NotImplemented
        return np.array_equal(self.beta_w, other.beta_w) and np.array_equal(self.beta_b, other.beta_b)

    def __hash__(self):
        return hash((self.beta_w.tobytes(), self.beta_b.tobytes()))
