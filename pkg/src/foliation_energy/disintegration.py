"""Empirical disintegration of a fibered scenario.

Grouping the samples of a :class:`~foliation_energy.measures.FiberedScenario`
by their exact label yields the base measure (total weight per label, embedded
on the line ``label -> (label, 0)`` for bookkeeping) and one conditional
probability measure per label. In this discrete setting the almost-everywhere
statements of the continuous theory become exact identities and are tested as
such: conditionals are probabilities, supports sit inside fibers, and the
measure is reconstructed from conditionals and base on arbitrary regions.

A sample with weight zero contributes fiber geometry but no mass: it appears
in the fiber point set and not in the conditional. Generators use this to
realize conditionals whose support is strictly smaller than the fiber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measures import DiscreteMeasure, FiberedScenario, RegionPredicate, restrict

RECONSTRUCTION_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Disintegration:
    """Base measure over labels plus one conditional measure per label.

    ``base`` places the total weight of each label at the point
    ``(label, 0)``; that embedding is bookkeeping only, distances between
    labels are measured through their fibers (see the energy module).
    ``source`` is the scenario measure the disintegration reconstructs.
    """

    base: DiscreteMeasure
    conditionals: dict[float, DiscreteMeasure]
    fibers: dict[float, np.ndarray]
    source: DiscreteMeasure
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def labels(self) -> tuple[float, ...]:
        return tuple(sorted(self.conditionals))

    def conditional(self, label: float) -> DiscreteMeasure:
        try:
            return self.conditionals[label]
        except KeyError:
            raise ValueError(f"unknown label {label!r}") from None

    def fiber(self, label: float) -> np.ndarray:
        try:
            return self.fibers[label]
        except KeyError:
            raise ValueError(f"unknown label {label!r}") from None


def _grouped(s: FiberedScenario, weights) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    w = s.resolved_weights(weights)
    labels = np.unique(s.labels)
    groups = [np.flatnonzero(s.labels == lab) for lab in labels]
    return labels, groups, w


def disintegrate(s: FiberedScenario, weights: Sequence[float] | None = None) -> Disintegration:
    """Build the empirical disintegration of a scenario.

    ``weights`` overrides the scenario's stored per-sample weights (default
    uniform). Every label must carry positive total weight; individual samples
    may have weight zero and then only extend the fiber set.
    """
    labels, groups, w = _grouped(s, weights)
    conditionals: dict[float, DiscreteMeasure] = {}
    fibers: dict[float, np.ndarray] = {}
    base_weights = np.empty(len(labels))
    for k, (lab, idx) in enumerate(zip(labels, groups)):
        fiber_w = w[idx]
        total = float(fiber_w.sum())
        if total <= 0:
            raise ValueError(f"label {lab} carries no mass")
        base_weights[k] = total
        conditionals[float(lab)] = DiscreteMeasure(s.points[idx], fiber_w / total)
        pts = s.points[idx].copy()
        pts.setflags(write=False)
        fibers[float(lab)] = pts
    base = DiscreteMeasure(np.column_stack([labels, np.zeros(len(labels))]), base_weights)
    return Disintegration(
        base=base, conditionals=conditionals, fibers=fibers, source=s.measure(weights)
    )


def pushforward(s: FiberedScenario, weights: Sequence[float] | None = None) -> DiscreteMeasure:
    """The base measure alone: total sample weight per label at ``(label, 0)``."""
    labels, groups, w = _grouped(s, weights)
    totals = np.array([float(w[idx].sum()) for idx in groups])
    if np.any(totals <= 0):
        bad = labels[np.flatnonzero(totals <= 0)[0]]
        raise ValueError(f"label {bad} carries no mass")
    return DiscreteMeasure(np.column_stack([labels, np.zeros(len(labels))]), totals)


def verify_reconstruction(
    d: Disintegration, s: FiberedScenario, regions: Sequence[RegionPredicate]
) -> float:
    """Largest discrepancy of the reconstruction identity over ``regions``.

    For each region A this compares ``sum_y mu_y(A) * base({y})`` against the
    scenario measure of A; both sides enumerate the same atoms, so the result
    is float rounding only and must stay below ``1e-12 * mass``.
    """
    labels = d.labels
    scen_labels = np.unique(s.labels)
    if len(scen_labels) != len(labels) or not np.array_equal(
        scen_labels.astype(float), np.asarray(labels)
    ):
        raise ValueError("disintegration was not built from this scenario")
    if sum(len(f) for f in d.fibers.values()) != len(s):
        raise ValueError("disintegration was not built from this scenario")
    base_w = {float(l): float(w) for (l, _), w in zip(d.base.locations, d.base.weights)}
    worst = 0.0
    for region in regions:
        lhs = sum(restrict(d.conditionals[lab], region) * base_w[lab] for lab in labels)
        rhs = restrict(d.source, region)
        worst = max(worst, abs(lhs - rhs))
    return worst


def bin_labels(s: FiberedScenario, width: float) -> FiberedScenario:
    """Replace labels by the midpoints of width-sized bins.

    The bin of ``label`` is ``floor(label / width)``; the new label is the bin
    midpoint. Useful for noisy projections before disintegrating.
    """
    if not (math.isfinite(width) and width > 0):
        raise ValueError(f"bin width must be positive, got {width}")
    binned = np.floor(s.labels / width) * width + width / 2.0
    return FiberedScenario(
        s.points,
        binned,
        s.weights,
        name=s.name,
        params={**s.params, "bin_width": width},
    )
