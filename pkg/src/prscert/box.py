"""Axis-aligned boxes of named operating quantities."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class SubspaceBox:
    """Bounds per named quantity, an optional stable anchor and a normalisation frame.

    GP inputs are box coordinates mapped to ``[0, 1]`` with respect to the
    *frame*, which defaults to the box itself.  Sub-boxes produced by
    :meth:`shrink` keep the parent's frame so their samples stay comparable.
    A dimension with ``lower == upper`` is held fixed.
    """

    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    base: np.ndarray | None = None
    frame: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(set(self.names)) != len(self.names):
            raise ValueError("dimension names must be unique")
        if not (lo.shape == hi.shape == (len(self.names),)):
            raise ValueError("bounds must match the number of dimensions")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            bad = [n for n, a, b in zip(self.names, lo, hi) if a > b]
            raise ValueError(f"lower bound above upper bound for {bad}")
        if self.base is not None:
            b = np.asarray(self.base, dtype=float).ravel()
            object.__setattr__(self, "base", b)
            if b.shape != lo.shape:
                raise ValueError("base point dimension mismatch")
            if np.any(b < lo - 1e-12) or np.any(b > hi + 1e-12):
                raise ValueError("base point outside the box")
        if self.frame is not None:
            flo, fhi = (np.asarray(a, dtype=float).ravel() for a in self.frame)
            object.__setattr__(self, "frame", (flo, fhi))

    @classmethod
    def from_bounds(cls, bounds: Mapping[str, tuple], base: Mapping[str, float] | None = None):
        names = tuple(bounds)
        lo = [bounds[n][0] for n in names]
        hi = [bounds[n][1] for n in names]
        b = None if base is None else [base[n] for n in names]
        return cls(names, lo, hi, b)

    @classmethod
    def point(cls, z: Mapping[str, float]) -> "SubspaceBox":
        names = tuple(z)
        v = [z[n] for n in names]
        return cls(names, v, v, v)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def frame_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.frame if self.frame is not None else (self.lower, self.upper)

    def _scale(self):
        flo, fhi = self.frame_bounds
        w = fhi - flo
        return flo, np.where(w > 0, w, 1.0), w > 0

    def to_unit(self, z) -> np.ndarray:
        flo, w, free = self._scale()
        u = (np.asarray(z, dtype=float) - flo) / w
        return np.where(free, u, 0.0)

    def from_unit(self, u) -> np.ndarray:
        flo, w, free = self._scale()
        return np.where(free, flo + np.asarray(u, dtype=float) * w, flo)

    @property
    def unit_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.to_unit(self.lower), self.to_unit(self.upper)

    def as_target(self, u) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.from_unit(u))}

    def contains(self, z, tol: float = 1e-12) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def contains_box(self, other: "SubspaceBox", tol: float = 1e-12) -> bool:
        return (self.names == other.names and bool(np.all(other.lower >= self.lower - tol))
                and bool(np.all(other.upper <= self.upper + tol)))

    def shrink(self, alpha: float) -> "SubspaceBox":
        """Scale the distances from the anchor to each face by ``alpha``."""
        if self.base is None:
            raise ValueError("shrinking needs a base point")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        lo = self.base - alpha * (self.base - self.lower)
        hi = self.base + alpha * (self.upper - self.base)
        lo = np.minimum(lo, self.base)
        hi = np.maximum(hi, self.base)
        return SubspaceBox(self.names, lo, hi, self.base, self.frame_bounds)

    def to_dict(self) -> dict:
        doc = {"dimensions": [{"name": n, "lower": float(a), "upper": float(b)}
                              for n, a, b in zip(self.names, self.lower, self.upper)]}
        if self.base is not None:
            doc["base"] = {n: float(v) for n, v in zip(self.names, self.base)}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SubspaceBox":
        dims = doc.get("dimensions")
        if not isinstance(dims, list) or not dims:
            raise ValueError("subspace spec needs a non-empty 'dimensions' list")
        names, lo, hi = [], [], []
        for i, d in enumerate(dims):
            try:
                names.append(str(d["name"]))
                lo.append(float(d["lower"]))
                hi.append(float(d["upper"]))
            except (KeyError, TypeError, ValueError):
                raise ValueError(f"dimensions[{i}]: need name, lower and upper") from None
        base = doc.get("base")
        b = None
        if base is not None:
            missing = [n for n in names if n not in base]
            if missing:
                raise ValueError(f"base point missing {missing}")
            b = [float(base[n]) for n in names]
        return cls(tuple(names), lo, hi, b)


def load_box(path) -> tuple[SubspaceBox, dict]:
    """Read a subspace spec; returns the box and its ``fixed`` quantities."""
    doc = json.loads(Path(path).read_text())
    return SubspaceBox.from_dict(doc), {str(k): float(v) for k, v in doc.get("fixed", {}).items()}


def save_box(box: SubspaceBox, path, fixed: Mapping[str, float] | None = None) -> None:
    doc = box.to_dict()
    if fixed:
        doc["fixed"] = dict(fixed)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
