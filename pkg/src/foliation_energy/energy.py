"""Fiber geometry, the derivative of the disintegration map, and the p-energy.

The quotient distance between two labels is the minimal Euclidean distance
between their fiber point sets. The derivative estimate at a label y is the
supremum, over distinct label pairs inside a small quotient-metric ball around
y, of the ratio between the p-Wasserstein distance of the conditionals and the
fiber distance; the p-energy is the supremum of those estimates over all
labels. The ratio is bounded below by 1 because each conditional is supported
inside its fiber, so any coupling moves every unit of mass at least the fiber
distance.

The verdict combines two independent facts, mirroring the full-support
hypothesis of the classification theorem: the energy must sit at 1 within
tolerance AND the fiber partition must be a metric foliation (point-to-fiber
distances constant along each fiber). Conditionals concentrated on a strict
subset of their fibers can satisfy the first while failing the second, which
is exactly the Dirac-on-ellipses counterexample scenario.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .disintegration import Disintegration
from .measures import Metric, euclidean_distance
from .transport import wasserstein

VERDICT_FOLIATION = "metric_measure_foliation"
VERDICT_NOT_FOLIATION = "not_foliation"
VERDICT_INCONCLUSIVE = "inconclusive"

DEFAULT_TOLERANCE = 1e-2  # classifier tolerance on energy - 1

THREADS_ENV_VAR = "FOLIATION_ENERGY_THREADS"


class DegenerateFibersError(ValueError):
    """Two distinct labels have touching fibers (zero quotient distance)."""


class IsolatedLabelError(ValueError):
    """No companion label inside any scheduled ball around this label."""


@dataclass(frozen=True)
class LabelDerivative:
    label: float
    derivative: float
    eps: float
    witness: tuple[float, float]


@dataclass(frozen=True)
class EnergyReport:
    """Per-label derivative estimates, their supremum and the verdict."""

    p: float
    per_label: tuple[LabelDerivative, ...]
    energy: float
    verdict: str
    tolerance: float
    foliation_passed: bool
    foliation_worst: float


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "0").strip()
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 0, got {n}")
    if n == 0:
        return min(8, os.cpu_count() or 1)
    return n


def _fiber_stats(d: Disintegration):
    """All-pairs fiber statistics, cached on the disintegration.

    Returns sorted labels, the symmetric matrix of fiber distances and the
    (asymmetric) matrix ``far[a, b] = max over x in fiber a of d(x, fiber b)``.
    """
    cached = d._cache.get("fiber_stats")
    if cached is not None:
        return cached
    labels = d.labels
    pts = [d.fibers[y] for y in labels]
    m = len(labels)
    fdist2 = np.zeros((m, m))
    far2 = np.zeros((m, m))
    for a in range(m):
        xa, ya = pts[a][:, 0], pts[a][:, 1]
        for b in range(a + 1, m):
            dx = xa[:, None] - pts[b][:, 0][None, :]
            dy = ya[:, None] - pts[b][:, 1][None, :]
            sq = dx * dx + dy * dy
            row_min = sq.min(axis=1)
            col_min = sq.min(axis=0)
            fdist2[a, b] = fdist2[b, a] = row_min.min()
            far2[a, b] = row_min.max()
            far2[b, a] = col_min.max()
    stats = (labels, np.sqrt(fdist2), np.sqrt(far2))
    d._cache["fiber_stats"] = stats
    return stats


def _label_index(labels, y: float) -> int:
    try:
        return labels.index(float(y))
    except ValueError:
        raise ValueError(f"unknown label {y!r}") from None


def fiber_distance(d: Disintegration, y1: float, y2: float) -> float:
    """Quotient distance: minimal pairwise distance between the two fibers."""
    labels, fdist, _ = _fiber_stats(d)
    return float(fdist[_label_index(labels, y1), _label_index(labels, y2)])


def metric_foliation_check(d: Disintegration, tol: float) -> tuple[bool, float]:
    """Check that point-to-fiber distances are constant along each fiber.

    For every ordered fiber pair (F, F') the violation is
    ``max over x in F of d(x, F') - d(F, F')``; the check passes when the
    worst violation over all pairs stays within ``tol``. A single fiber
    passes vacuously.
    """
    labels, fdist, far = _fiber_stats(d)
    m = len(labels)
    if m < 2:
        return True, 0.0
    off = ~np.eye(m, dtype=bool)
    worst = float((far - fdist)[off].max())
    return worst <= tol, worst


def lipschitz_check(s, d: Disintegration) -> float:
    """Worst excess of the quotient distance over the ambient distance.

    The quotient distance is an infimum over fiber point pairs, so for every
    sampled pair ``d*(pi x, pi x') <= d(x, x')`` and the excess is at most
    float rounding. Recomputed blockwise from the raw fibers as a consistency
    guard on the cached statistics.
    """
    labels, fdist, _ = _fiber_stats(d)
    worst = -math.inf
    for a, la in enumerate(labels):
        pa = d.fibers[la]
        for b, lb in enumerate(labels):
            if a == b:
                # pairs within one fiber realize excess 0 at x = x'
                worst = max(worst, 0.0)
                continue
            pb = d.fibers[lb]
            dx = pa[:, 0][:, None] - pb[:, 0][None, :]
            dy = pa[:, 1][:, None] - pb[:, 1][None, :]
            block_min = math.sqrt(float((dx * dx + dy * dy).min()))
            worst = max(worst, float(fdist[a, b]) - block_min)
    return worst


def default_eps_schedule(d: Disintegration) -> tuple[float, ...]:
    """Halving schedule from the label-set diameter down past the least gap."""
    labels, fdist, _ = _fiber_stats(d)
    diam = float(fdist.max())
    if diam <= 0:
        return (1.0,)
    gaps = fdist[np.triu_indices(len(labels), k=1)]
    floor = float(gaps[gaps > 0].min()) / 4.0 if np.any(gaps > 0) else diam / 2.0
    schedule = [diam]
    while schedule[-1] > floor and len(schedule) < 200:
        schedule.append(schedule[-1] / 2.0)
    return tuple(schedule)


def _validate_schedule(eps_schedule) -> tuple[float, ...]:
    schedule = tuple(float(e) for e in eps_schedule)
    if not schedule or any(e <= 0 or not math.isfinite(e) for e in schedule):
        raise ValueError("eps schedule must be a nonempty sequence of positive reals")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    return schedule


def _ball_pairs(d: Disintegration, y: float, eps_schedule):
    """Label pairs inside the smallest usable ball around ``y``.

    Walks the schedule while the closed fiber-metric ball around ``y`` holds
    at least two labels (``y`` itself counts) and returns the pairs of the
    last usable radius, lexicographically sorted.
    """
    labels, fdist, _ = _fiber_stats(d)
    iy = _label_index(labels, y)
    schedule = _validate_schedule(eps_schedule) if eps_schedule else default_eps_schedule(d)
    drow = fdist[iy]
    usable = None
    for eps in schedule:
        members = np.flatnonzero(drow <= eps)
        if len(members) >= 2:
            usable = (eps, members)
        else:
            break  # balls shrink with eps, later entries stay empty
    if usable is None:
        raise IsolatedLabelError(f"label {y} has no companion in any scheduled ball")
    eps, members = usable
    pairs = []
    for ii, a in enumerate(members):
        for b in members[ii + 1 :]:
            la, lb = labels[a], labels[b]
            fd = float(fdist[a, b])
            if fd <= 0.0:
                raise DegenerateFibersError(
                    f"fibers of labels {la} and {lb} touch; the ratio is undefined"
                )
            pairs.append(((la, lb), fd))
    pairs.sort(key=lambda item: item[0])
    return eps, pairs


def _solve_pairs(d: Disintegration, pairs, p: float, metric: Metric) -> dict:
    """Wasserstein values for label pairs, cached on the disintegration."""
    key_of = lambda la, lb: ("w", min(la, lb), max(la, lb), p, metric)
    missing = sorted({(la, lb) for la, lb in pairs if key_of(la, lb) not in d._cache})

    def solve(pair):
        la, lb = pair
        value, _ = wasserstein(d.conditionals[la], d.conditionals[lb], p, metric)
        return value

    if missing:
        workers = _worker_count()
        if workers > 1 and len(missing) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                values = list(pool.map(solve, missing))
        else:
            values = [solve(pair) for pair in missing]
        for pair, value in zip(missing, values):
            d._cache[key_of(*pair)] = value
    return {pair: d._cache[key_of(*pair)] for pair in pairs}


def derivative_at(
    d: Disintegration,
    y: float,
    p: float = 1.0,
    eps_schedule=None,
    metric: Metric = euclidean_distance,
) -> tuple[float, float, tuple[float, float]]:
    """Derivative estimate of the disintegration map at label ``y``.

    The supremum of ``W_p(mu_a, mu_b) / d(fiber a, fiber b)`` over distinct
    label pairs in the smallest scheduled fiber-metric ball around ``y`` that
    still contains at least two labels. Returns the estimate, the radius used
    and the maximizing pair (ties broken lexicographically).
    """
    eps, pairs = _ball_pairs(d, y, eps_schedule)
    values = _solve_pairs(d, [pair for pair, _ in pairs], p, metric)
    best = -math.inf
    witness = None
    for pair, fd in pairs:
        ratio = values[pair] / fd
        if ratio > best:
            best, witness = ratio, pair
    return best, eps, witness


def energy(
    d: Disintegration,
    p: float = 1.0,
    eps_schedule=None,
    metric: Metric = euclidean_distance,
    tolerance: float = DEFAULT_TOLERANCE,
) -> EnergyReport:
    """p-energy of the disintegration map with the foliation verdict.

    Labels whose derivative cannot be estimated (isolated, or with touching
    fibers in their ball) are skipped with a warning; the energy is the
    maximum of the remaining estimates. The verdict is
    ``metric_measure_foliation`` only when the energy is 1 within tolerance
    and the fiber partition passes :func:`metric_foliation_check`.
    """
    if eps_schedule is None:
        eps_schedule = default_eps_schedule(d)
    per_label = []
    for y in d.labels:
        try:
            est, eps, witness = derivative_at(d, y, p, eps_schedule, metric)
        except (IsolatedLabelError, DegenerateFibersError) as exc:
            warnings.warn(f"skipping label {y}: {exc}", stacklevel=2)
            continue
        per_label.append(LabelDerivative(float(y), est, eps, witness))
    if not per_label:
        raise IsolatedLabelError("no label admits a derivative estimate")
    total = max(item.derivative for item in per_label)
    passed, worst = metric_foliation_check(d, tolerance)
    if total > 1.0 + tolerance:
        verdict = VERDICT_NOT_FOLIATION
    elif passed:
        verdict = VERDICT_FOLIATION
    else:
        verdict = VERDICT_INCONCLUSIVE
    return EnergyReport(
        p=float(p),
        per_label=tuple(per_label),
        energy=total,
        verdict=verdict,
        tolerance=float(tolerance),
        foliation_passed=passed,
        foliation_worst=worst,
    )


def isometry_gap(d: Disintegration, p: float = 1.0, metric: Metric = euclidean_distance) -> float:
    """Global supremum of ``W_p / d*`` minus one over all label pairs.

    Zero (up to rounding) exactly when the disintegration map is an isometry
    onto its image; always at least ``-1e-9`` by the support bound.
    """
    labels, fdist, _ = _fiber_stats(d)
    m = len(labels)
    if m < 2:
        raise ValueError("isometry gap needs at least two labels")
    pairs = []
    for a in range(m):
        for b in range(a + 1, m):
            fd = float(fdist[a, b])
            if fd <= 0.0:
                raise DegenerateFibersError(
                    f"fibers of labels {labels[a]} and {labels[b]} touch"
                )
            pairs.append(((labels[a], labels[b]), fd))
    values = _solve_pairs(d, [pair for pair, _ in pairs], p, metric)
    return max(values[pair] / fd for pair, fd in pairs) - 1.0
