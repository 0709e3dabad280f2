"""Prediction sets: unions of closed intervals on the real line, or label subsets."""
from __future__ import annotations

import json
import math
from typing import Iterable

import numpy as np


def _enc(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return float(v)


def _dec(v) -> float:
    if isinstance(v, str):
        if v in ("inf", "-inf"):
            return float(v)
        raise ValueError(f"bad numeric token {v!r}")
    return float(v)


class PredictionSet:
    """A prediction set.

    One of four kinds:

    * ``"intervals"``: sorted, disjoint closed intervals ``[lo, hi]``
    * ``"labels"``: a finite set of integer labels
    * ``"all"``: the whole response space
    * ``"empty"``: the empty set

    Use the constructors :meth:`from_intervals`, :meth:`from_labels`,
    :meth:`full` and :meth:`empty` rather than ``__init__``.
    """

    __slots__ = ("kind", "parts", "items")

    def __init__(self, kind: str, parts=(), items=()):
        self.kind = kind
        self.parts = tuple(parts)
        self.items = frozenset(items)

    # construction -------------------------------------------------------
    @classmethod
    def full(cls) -> "PredictionSet":
        return cls("all")

    @classmethod
    def empty(cls) -> "PredictionSet":
        return cls("empty")

    @classmethod
    def from_intervals(cls, parts: Iterable) -> "PredictionSet":
        """Normalise a collection of ``(lo, hi)`` pairs.

        Pairs with ``lo > hi`` are dropped; overlapping or touching
        intervals are merged. The real line maps to :meth:`full`.
        """
        clean = []
        for lo, hi in parts:
            lo, hi = float(lo), float(hi)
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError("NaN interval endpoint")
            if lo <= hi:
                clean.append((lo, hi))
        if not clean:
            return cls.empty()
        clean.sort()
        merged = [list(clean[0])]
        for lo, hi in clean[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        if len(merged) == 1 and merged[0][0] == -math.inf and merged[0][1] == math.inf:
            return cls.full()
        return cls("intervals", parts=tuple((lo, hi) for lo, hi in merged))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "PredictionSet":
        return cls.from_intervals([(lo, hi)])

    @classmethod
    def from_labels(cls, items: Iterable[int]) -> "PredictionSet":
        items = [int(i) for i in items]
        if not items:
            return cls.empty()
        return cls("labels", items=items)

    @classmethod
    def from_grid(cls, grid, mask) -> "PredictionSet":
        """Turn a boolean mask over a sorted grid into closed intervals.

        Each maximal run of included grid points ``g_i..g_j`` becomes
        ``[g_i, g_j]``.
        """
        g = np.asarray(grid, dtype=float)
        m = np.asarray(mask, dtype=bool)
        if g.shape != m.shape:
            raise ValueError("grid and mask must have the same shape")
        parts = []
        start = None
        for i, inc in enumerate(m):
            if inc and start is None:
                start = i
            if not inc and start is not None:
                parts.append((g[start], g[i - 1]))
                start = None
        if start is not None:
            parts.append((g[start], g[-1]))
        return cls.from_intervals(parts)

    # queries ------------------------------------------------------------
    def contains(self, y) -> bool:
        if self.kind == "all":
            return True
        if self.kind == "empty":
            return False
        if self.kind == "labels":
            return int(y) in self.items
        y = float(y)
        return any(lo <= y <= hi for lo, hi in self.parts)

    __contains__ = contains

    def measure(self, n_labels: int | None = None) -> float:
        """Lebesgue length of an interval set or cardinality of a label set."""
        if self.kind == "empty":
            return 0.0
        if self.kind == "labels":
            return float(len(self.items))
        if self.kind == "all":
            return float(n_labels) if n_labels is not None else math.inf
        return float(sum(hi - lo for lo, hi in self.parts))

    def bounds(self) -> tuple[float, float]:
        """Convex hull of an interval set."""
        if self.kind == "all":
            return -math.inf, math.inf
        if self.kind == "intervals":
            return self.parts[0][0], self.parts[-1][1]
        if self.kind == "empty":
            return math.nan, math.nan
        raise TypeError("bounds() is defined for interval sets only")

    def labels(self, n_labels: int) -> frozenset:
        """Explicit label set; ``"all"`` expands to ``range(n_labels)``."""
        if self.kind == "all":
            return frozenset(range(n_labels))
        if self.kind == "empty":
            return frozenset()
        if self.kind == "labels":
            return self.items
        raise TypeError("labels() is defined for label sets only")

    def issubset(self, other: "PredictionSet", tol: float = 0.0) -> bool:
        if self.kind == "empty" or other.kind == "all":
            return True
        if other.kind == "empty" or self.kind == "all":
            return self.kind == "empty" or other.kind == "all"
        if self.kind == "labels":
            return other.kind == "labels" and self.items <= other.items
        return all(
            any(olo - tol <= lo and hi <= ohi + tol for olo, ohi in other.parts)
            for lo, hi in self.parts
        )

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "intervals":
            return {"type": "intervals", "parts": [[_enc(lo), _enc(hi)] for lo, hi in self.parts]}
        if self.kind == "labels":
            return {"type": "labels", "items": sorted(self.items)}
        return {"type": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionSet":
        kind = d.get("type")
        if kind == "intervals":
            return cls.from_intervals((_dec(lo), _dec(hi)) for lo, hi in d["parts"])
        if kind == "labels":
            return cls.from_labels(d["items"])
        if kind == "all":
            return cls.full()
        if kind == "empty":
            return cls.empty()
        raise ValueError(f"unknown set type {kind!r}")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (self.kind, self.parts, self.items) == (other.kind, other.parts, other.items)

    def __hash__(self):
        return hash((self.kind, self.parts, self.items))

    def __repr__(self) -> str:
        if self.kind == "intervals":
            body = " U ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.parts)
            return f"PredictionSet({body})"
        if self.kind == "labels":
            return f"PredictionSet(labels={sorted(self.items)})"
        return f"PredictionSet({self.kind})"
