"""Weighted planar atom measures and labeled sample sets.

A :class:`DiscreteMeasure` is a finite family of positively weighted atoms in
the plane; a :class:`FiberedScenario` is a sampled ground space where every
sample carries a real projection label. Both are immutable; numeric state is
kept in float64 numpy arrays so the transport and energy modules can operate
vectorized.

File formats (CSV is UTF-8 with a mandatory header, leading ``#`` comment
lines are skipped):

* measure:  ``x1,x2,w`` with ``w > 0``
* scenario: ``x1,x2,label`` plus an optional ``w`` column (``w >= 0``);
  scenarios may also be stored as JSON, see :func:`read_scenario`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

PROBABILITY_ATOL = 1e-12


@dataclass(frozen=True, slots=True)
class Point2:
    """A point in the plane. Coordinates must be finite."""

    x1: float
    x2: float

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValueError(f"non-finite coordinates ({self.x1}, {self.x2})")


def euclidean_distance(a: Point2, b: Point2) -> float:
    """Planar Euclidean distance, the default ambient metric everywhere."""
    return math.hypot(a.x1 - b.x1, a.x2 - b.x2)


RegionPredicate = Callable[[Point2], bool]
Metric = Callable[[Point2, Point2], float]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely many weighted atoms in the plane.

    Zero-weight atoms are dropped at construction; negative weights are
    rejected. Atoms with coincident locations are kept as-is (merging them
    would change transport-plan dimensions and is never required).
    """

    locations: np.ndarray  # (n, 2) float64
    weights: np.ndarray  # (n,) float64, strictly positive
    mass: float = field(init=False)

    def __post_init__(self):
        loc = np.ascontiguousarray(np.asarray(self.locations, dtype=float))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if loc.ndim != 2 or loc.shape[1] != 2:
            raise ValueError(f"locations must have shape (n, 2), got {loc.shape}")
        if w.shape != (loc.shape[0],):
            raise ValueError("weights must be one per location")
        if not np.all(np.isfinite(loc)):
            raise ValueError("atom locations must be finite")
        if not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be finite")
        if np.any(w < 0):
            raise ValueError("atom weights must be nonnegative")
        keep = w > 0
        if not np.all(keep):
            loc, w = loc[keep], w[keep]
        if loc.shape[0] == 0:
            raise ValueError("measure has no atoms with positive weight")
        loc.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mass", float(w.sum()))
        if not math.isfinite(self.mass) or self.mass <= 0:
            raise ValueError("total mass must be finite and positive")

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[Point2 | tuple, float]]) -> "DiscreteMeasure":
        locs = [(p.x1, p.x2) if isinstance(p, Point2) else (p[0], p[1]) for p, _ in atoms]
        return cls(np.asarray(locs, dtype=float).reshape(-1, 2), np.asarray([w for _, w in atoms], dtype=float))

    def __len__(self) -> int:
        return self.locations.shape[0]

    @property
    def atoms(self) -> list[tuple[Point2, float]]:
        return [(Point2(float(x1), float(x2)), float(w)) for (x1, x2), w in zip(self.locations, self.weights)]

    @property
    def probability(self) -> bool:
        """True when the mass is 1 up to ``PROBABILITY_ATOL``."""
        return abs(self.mass - 1.0) <= PROBABILITY_ATOL


def dirac(p: Point2 | tuple) -> DiscreteMeasure:
    """Unit point mass at ``p``."""
    if not isinstance(p, Point2):
        p = Point2(float(p[0]), float(p[1]))
    return DiscreteMeasure(np.array([[p.x1, p.x2]]), np.array([1.0]))


def normalize(m: DiscreteMeasure) -> DiscreteMeasure:
    """Rescale to total mass 1. Idempotent up to float rounding."""
    return DiscreteMeasure(m.locations, m.weights / m.mass)


def restrict(m: DiscreteMeasure, region: RegionPredicate) -> float:
    """Mass of the set of atoms whose location satisfies ``region``."""
    total = 0.0
    for (x1, x2), w in zip(m.locations, m.weights):
        if region(Point2(float(x1), float(x2))):
            total += float(w)
    return total


def box_region(x1_min: float, x1_max: float, x2_min: float, x2_max: float) -> RegionPredicate:
    """Axis-aligned half-open box predicate [x1_min, x1_max) x [x2_min, x2_max)."""

    def inside(p: Point2) -> bool:
        return x1_min <= p.x1 < x1_max and x2_min <= p.x2 < x2_max

    return inside


@dataclass(frozen=True, eq=False)
class FiberedScenario:
    """Sampled ground space with a projection label per sample.

    ``weights`` are optional per-sample masses supplied by generators (for
    example the radial density of the disk scenarios). A zero weight marks a
    sample that contributes fiber geometry but no mass; negative weights are
    invalid. When ``weights`` is None every sample has weight 1.
    """

    points: np.ndarray  # (N, 2) float64
    labels: np.ndarray  # (N,) float64
    weights: np.ndarray | None = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (N, 2), got {pts.shape}")
        if lab.shape != (pts.shape[0],):
            raise ValueError("labels must be one per sample")
        if pts.shape[0] == 0:
            raise ValueError("scenario has no samples")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample points must be finite")
        if not np.all(np.isfinite(lab)):
            raise ValueError("labels must be finite")
        pts.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)
        if self.weights is not None:
            w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
            if w.shape != (pts.shape[0],):
                raise ValueError("weights must be one per sample")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("sample weights must be finite and nonnegative")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def samples(self) -> Iterator[tuple[Point2, float]]:
        for (x1, x2), lab in zip(self.points, self.labels):
            yield Point2(float(x1), float(x2)), float(lab)

    def distinct_labels(self) -> np.ndarray:
        return np.unique(self.labels)

    def resolved_weights(self, weights=None) -> np.ndarray:
        """Explicit weights, falling back to the stored then uniform ones."""
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if w.shape != (len(self),):
                raise ValueError("weights must be one per sample")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("sample weights must be finite and nonnegative")
            return w
        if self.weights is not None:
            return self.weights
        return np.ones(len(self))

    def measure(self, weights=None) -> DiscreteMeasure:
        """The scenario as a measure (samples with positive weight)."""
        return DiscreteMeasure(self.points, self.resolved_weights(weights))


# ---------------------------------------------------------------------------
# file I/O


def _open_rows(path):
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    return list(csv.reader(lines))


def read_measure_csv(path) -> DiscreteMeasure:
    """Read an ``x1,x2,w`` measure file; rows with w <= 0 are rejected."""
    rows = _open_rows(path)
    if not rows or [c.strip().lower() for c in rows[0]] != ["x1", "x2", "w"]:
        raise ValueError(f"{path}: expected header 'x1,x2,w'")
    locs, weights = [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ValueError(f"{path}:{k}: expected 3 columns")
        x1, x2, w = (float(c) for c in row)
        if w <= 0:
            raise ValueError(f"{path}:{k}: weight must be positive, got {w}")
        locs.append((x1, x2))
        weights.append(w)
    if not locs:
        raise ValueError(f"{path}: no data rows")
    return DiscreteMeasure(np.asarray(locs), np.asarray(weights))


def format_measure_csv(m: DiscreteMeasure, header_lines: Sequence[str] = ()) -> str:
    out = [f"# {line}" for line in header_lines]
    out.append("x1,x2,w")
    for (x1, x2), w in zip(m.locations, m.weights):
        out.append(f"{x1:.17g},{x2:.17g},{w:.17g}")
    return "\n".join(out) + "\n"


def format_scenario_csv(s: FiberedScenario, header_lines: Sequence[str] = ()) -> str:
    out = [f"# {line}" for line in header_lines]
    with_w = s.weights is not None
    out.append("x1,x2,label,w" if with_w else "x1,x2,label")
    for i in range(len(s)):
        row = f"{s.points[i, 0]:.17g},{s.points[i, 1]:.17g},{s.labels[i]:.17g}"
        if with_w:
            row += f",{s.weights[i]:.17g}"
        out.append(row)
    return "\n".join(out) + "\n"


def format_scenario_json(s: FiberedScenario, meta: dict | None = None) -> str:
    doc = {
        "_meta": meta or {},
        "name": s.name,
        "params": s.params,
        "columns": ["x1", "x2", "label", "w"] if s.weights is not None else ["x1", "x2", "label"],
        "samples": [
            [float(s.points[i, 0]), float(s.points[i, 1]), float(s.labels[i])]
            + ([float(s.weights[i])] if s.weights is not None else [])
            for i in range(len(s))
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def _scenario_from_columns(rows, path, name="", params=None) -> FiberedScenario:
    pts, labs, ws = [], [], []
    for k, row in enumerate(rows, start=1):
        if len(row) not in (3, 4):
            raise ValueError(f"{path}: sample {k}: expected 3 or 4 values")
        pts.append((float(row[0]), float(row[1])))
        labs.append(float(row[2]))
        ws.append(float(row[3]) if len(row) == 4 else None)
    has_w = any(w is not None for w in ws)
    if has_w and any(w is None for w in ws):
        raise ValueError(f"{path}: mixed rows with and without weights")
    return FiberedScenario(
        np.asarray(pts),
        np.asarray(labs),
        np.asarray(ws, dtype=float) if has_w else None,
        name=name,
        params=params or {},
    )


def read_scenario(path) -> FiberedScenario:
    """Read a scenario from ``.csv`` (``x1,x2,label[,w]``) or ``.json``."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        doc = json.loads(p.read_text(encoding="utf-8"))
        return _scenario_from_columns(
            doc["samples"], path, name=doc.get("name", ""), params=doc.get("params", {})
        )
    rows = _open_rows(path)
    if not rows:
        raise ValueError(f"{path}: empty scenario file")
    header = [c.strip().lower() for c in rows[0]]
    if header not in (["x1", "x2", "label"], ["x1", "x2", "label", "w"]):
        raise ValueError(f"{path}: expected header 'x1,x2,label[,w]'")
    if len(rows) == 1:
        raise ValueError(f"{path}: no data rows")
    return _scenario_from_columns(rows[1:], path, name=p.stem)
