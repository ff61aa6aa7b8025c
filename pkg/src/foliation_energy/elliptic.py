"""Closed forms and generators for the circle/ellipse deformation study.

The fiber with label y of the aspect-``lam`` family is the ellipse
``x1**2 + lam**2 * x2**2 = y**2`` (semi-axes ``y`` and ``y / lam``; ``lam = 1``
is the circle). Arc length is obtained by adaptive Simpson quadrature of

    y * sqrt(1 - (1 - lam**-2) * cos(t)**2)

and the conditional measure on the fiber has exactly that integrand, divided
by the full perimeter, as its angular density. Along the ray at angle theta
the fiber sits at radius ``y / sqrt(lam**2 - (lam**2 - 1) * cos(theta)**2)``,
and moving mass radially between two fibers costs the same everywhere because
the radius gap times the density is constant in theta. That flatness gives the
closed-form transport value ``2 pi (y' - y) y / (lam * L_y)`` and the energy
``2 pi / L_1``, reproduced here to eight decimals and cross-checked by the
exact discrete solver on sampled fibers.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .measures import DiscreteMeasure, FiberedScenario

TWO_PI = 2.0 * math.pi

TABLE_LAMBDAS = (1.0, 1.001, 1.01, 1.1, 1.5, 2.0)

QUAD_TOL = 1e-11
QUAD_MAX_DEPTH = 40


class QuadratureFailure(RuntimeError):
    """Adaptive quadrature exhausted its splitting depth."""


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = QUAD_MAX_DEPTH) -> float:
    """Adaptive Simpson with Richardson correction; |error| <~ tol."""
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a0, b0, fa0, fm0, fb0, whole0, tol0, depth = stack.pop()
        mid = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + mid), 0.5 * (mid + b0)
        flm, frm = f(lm), f(rm)
        left = (mid - a0) / 6.0 * (fa0 + 4.0 * flm + fm0)
        right = (b0 - mid) / 6.0 * (fm0 + 4.0 * frm + fb0)
        delta = left + right - whole0
        if abs(delta) <= 15.0 * tol0:
            total += left + right + delta / 15.0
        elif depth >= max_depth:
            raise QuadratureFailure(f"no convergence on [{a0}, {b0}] at depth {depth}")
        else:
            stack.append((a0, mid, fa0, flm, fm0, left, tol0 / 2.0, depth + 1))
            stack.append((mid, b0, fm0, frm, fb0, right, tol0 / 2.0, depth + 1))
    return total


def _check_args(y: float, lam: float, theta: float | None = None) -> None:
    if not (math.isfinite(y) and y > 0):
        raise ValueError(f"label y must be positive, got {y}")
    if not (math.isfinite(lam) and lam >= 1.0):
        raise ValueError(f"aspect lam must be >= 1, got {lam}")
    if theta is not None and not (0.0 <= theta <= TWO_PI):
        raise ValueError(f"theta must lie in [0, 2*pi], got {theta}")


def _speed(lam: float):
    k = 1.0 - 1.0 / (lam * lam)

    def g(t: float) -> float:
        c = math.cos(t)
        return math.sqrt(1.0 - k * c * c)

    return g


def arc_length(y: float, lam: float, theta: float) -> float:
    """Arc length of the fiber ellipse from angle 0 to ``theta``."""
    _check_args(y, lam, theta)
    return y * _adaptive_simpson(_speed(lam), 0.0, theta, QUAD_TOL)


@functools.lru_cache(maxsize=256)
def _unit_perimeter(lam: float) -> float:
    return _adaptive_simpson(_speed(lam), 0.0, TWO_PI, QUAD_TOL)


def perimeter(y: float, lam: float) -> float:
    """Full arc length of the fiber with label ``y``."""
    _check_args(y, lam)
    return y * _unit_perimeter(float(lam))


def radial_coordinate(y: float, lam: float, theta: float) -> float:
    """Euclidean norm of the fiber point at parameter ``theta``."""
    _check_args(y, lam, theta)
    c = math.cos(theta)
    return y / math.sqrt(lam * lam - (lam * lam - 1.0) * c * c)


def conditional_density(y: float, lam: float, theta: float) -> float:
    """Angular density of the conditional measure; integrates to 1."""
    _check_args(y, lam, theta)
    return _speed(lam)(theta) / _unit_perimeter(float(lam))


def closed_form_w1(y: float, yp: float, lam: float) -> float:
    """Radial-transport value ``2 pi (yp - y) y / (lam * L_y)``, ``y <= yp``."""
    _check_args(y, lam)
    if not (math.isfinite(yp) and yp >= y):
        raise ValueError(f"need 0 < y <= yp, got y={y}, yp={yp}")
    return TWO_PI * (yp - y) * y / (lam * perimeter(y, lam))


def closed_form_energy(lam: float) -> float:
    """Circle-to-ellipse length ratio ``2 pi / L_1``; equals the 1-energy."""
    _check_args(1.0, lam)
    return TWO_PI / _unit_perimeter(float(lam))


def table_rows(lambdas=TABLE_LAMBDAS) -> list[tuple[float, float, float]]:
    """Rows ``(lam, L_1, E_1)`` for the reference table of the study."""
    return [(lam, perimeter(1.0, lam), closed_form_energy(lam)) for lam in lambdas]


# ---------------------------------------------------------------------------
# fiber sampling and scenarios


def _fiber_grid(y: float, lam: float, n: int):
    theta = TWO_PI * np.arange(n) / n
    c = np.cos(theta)
    denom = np.sqrt(lam * lam - (lam * lam - 1.0) * c * c)
    radius = y / denom
    pts = np.column_stack([radius * c, radius * np.sin(theta)])
    return pts, _cell_masses(lam, n)


@functools.lru_cache(maxsize=64)
def _cell_masses(lam: float, n: int) -> np.ndarray:
    """Angular-density mass of each grid cell ``[theta_k - h/2, theta_k + h/2]``.

    Integrating the density over the cells (rather than sampling it at the
    nodes) keeps the discrete fibers converging to the closed forms at the
    quadrature rate of the cells, second order in the grid spacing.
    """
    g = _speed(lam)
    h = TWO_PI / n
    masses = np.array(
        [_adaptive_simpson(g, (k - 0.5) * h, (k + 0.5) * h, QUAD_TOL / n) for k in range(n)]
    )
    masses.setflags(write=False)
    return masses


def sample_fiber(y: float, lam: float, n: int) -> DiscreteMeasure:
    """Probability measure on ``n`` angularly aligned fiber points.

    Atoms sit at parameters ``theta_k = 2 pi k / n``, each weighted by the
    angular-density mass of its cell, so fibers sampled at the same ``n``
    share angles and weights and the radial matching between them is a
    feasible plan.
    """
    _check_args(y, lam)
    if n < 3:
        raise ValueError(f"need at least 3 points per fiber, got {n}")
    pts, masses = _fiber_grid(y, lam, n)
    return DiscreteMeasure(pts, masses / masses.sum())


class EllipseFoliation:
    """Parameter set of the nested-ellipse family.

    ``lam >= 1`` is the aspect (1 gives concentric circles), ``radius`` the
    outer major radius, ``y_min`` the smallest label kept (the point fiber at
    y = 0 is excluded; the angular density degenerates there).
    """

    def __init__(self, lam: float, radius: float = 1.0, y_min: float | None = None):
        if not (math.isfinite(lam) and lam >= 1.0):
            raise ValueError(f"aspect lam must be >= 1, got {lam}")
        if not (math.isfinite(radius) and radius > 0):
            raise ValueError(f"radius must be positive, got {radius}")
        if y_min is None:
            y_min = 0.1 * radius
        if not (0.0 < y_min < radius):
            raise ValueError(f"y_min must lie in (0, radius), got {y_min}")
        self.lam = float(lam)
        self.radius = float(radius)
        self.y_min = float(y_min)

    def label_grid(self, fibers: int) -> np.ndarray:
        if fibers < 2:
            raise ValueError(f"need at least 2 fibers, got {fibers}")
        return np.linspace(self.y_min, self.radius, fibers)


def _disk_scenario(kind: str, fol: EllipseFoliation, fibers: int, points: int) -> FiberedScenario:
    if points < 3:
        raise ValueError(f"need at least 3 points per fiber, got {points}")
    dirac = kind == "ellipse_dirac"
    if dirac and points % 4 != 0:
        # the unit-mass sample must land exactly on the minor vertex (0, y/lam)
        raise ValueError("ellipse_dirac needs a point count divisible by 4")
    labels_grid = fol.label_grid(fibers)
    base = labels_grid / labels_grid.sum()  # midpoint rule on d(nu) = 2r/R^2 dr
    all_pts, all_labels, all_w = [], [], []
    for y, base_w in zip(labels_grid, base):
        pts, masses = _fiber_grid(y, fol.lam, points)
        if dirac:
            w = np.zeros(points)
            w[points // 4] = base_w
        else:
            w = base_w * masses / masses.sum()
        all_pts.append(pts)
        all_labels.append(np.full(points, y))
        all_w.append(w)
    return FiberedScenario(
        np.vstack(all_pts),
        np.concatenate(all_labels),
        np.concatenate(all_w),
        name=kind,
        params={
            "kind": kind,
            "lam": fol.lam,
            "radius": fol.radius,
            "y_min": fol.y_min,
            "fibers": fibers,
            "points": points,
        },
    )


_GRAPH_MAPS = {
    "identity": lambda x: x,
    "sin": lambda x: np.sin(TWO_PI * x),
    "quadratic": lambda x: x * x,
}


def build_scenario(
    kind: str,
    *,
    lam: float | None = None,
    radius: float = 1.0,
    fibers: int = 64,
    points: int = 256,
    y_min: float | None = None,
    grid: int = 16,
    count: int = 64,
    graph_map: str = "identity",
) -> FiberedScenario:
    """Built-in scenarios: circle, ellipse, ellipse_dirac, square, graph.

    circle / ellipse / ellipse_dirac
        ``fibers`` labels uniform on ``[y_min, radius]`` with base weight
        proportional to the label; each fiber carries ``points`` angularly
        aligned samples. The circle pins ``lam = 1``; the dirac variant puts
        the whole fiber mass on the minor-vertex sample and keeps the rest of
        the ellipse as weightless fiber geometry.
    square
        ``grid x grid`` uniform midpoint grid on the unit square, labeled by
        the first coordinate (vertical-column fibers).
    graph
        ``count`` samples ``(x, f(x))`` labeled by x, f one of
        ``identity | sin | quadratic``; every conditional is a Dirac.
    """
    if kind == "circle":
        if lam not in (None, 1.0):
            raise ValueError("the circle scenario has lam fixed to 1")
        fol = EllipseFoliation(1.0, radius, y_min)
        return _disk_scenario(kind, fol, fibers, points)
    if kind in ("ellipse", "ellipse_dirac"):
        if lam is None:
            raise ValueError(f"{kind} scenario needs lam")
        fol = EllipseFoliation(lam, radius, y_min)
        return _disk_scenario(kind, fol, fibers, points)
    if kind == "square":
        if grid < 2:
            raise ValueError(f"need at least a 2x2 grid, got {grid}")
        xs = (np.arange(grid) + 0.5) / grid
        xx, yy = np.meshgrid(xs, xs, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        return FiberedScenario(
            pts,
            pts[:, 0].copy(),
            np.full(len(pts), 1.0 / len(pts)),
            name=kind,
            params={"kind": kind, "grid": grid},
        )
    if kind == "graph":
        if count < 2:
            raise ValueError(f"need at least 2 samples, got {count}")
        if graph_map not in _GRAPH_MAPS:
            raise ValueError(f"unknown graph map {graph_map!r}")
        x = (np.arange(count) + 0.5) / count
        pts = np.column_stack([x, _GRAPH_MAPS[graph_map](x)])
        return FiberedScenario(
            pts,
            x.copy(),
            np.full(count, 1.0 / count),
            name=kind,
            params={"kind": kind, "count": count, "graph_map": graph_map},
        )
    raise ValueError(f"unknown scenario kind {kind!r}")


# ---------------------------------------------------------------------------
# figure data


def arc_profile(lambdas, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized arc length over ``[0, 2 pi]`` for each aspect value.

    Returns ``(thetas, values)`` with one column per lambda; every column
    increases from 0 to 1 (cumulative quadrature of a positive integrand,
    normalized by its own total).
    """
    if steps < 2:
        raise ValueError(f"need at least 2 steps, got {steps}")
    lambdas = [float(l) for l in lambdas]
    for lam in lambdas:
        _check_args(1.0, lam)
    thetas = np.linspace(0.0, TWO_PI, steps)
    columns = []
    for lam in lambdas:
        g = _speed(lam)
        increments = [
            _adaptive_simpson(g, thetas[j - 1], thetas[j], QUAD_TOL / steps)
            for j in range(1, steps)
        ]
        cum = np.concatenate([[0.0], np.cumsum(increments)])
        columns.append(cum / cum[-1])
    return thetas, np.column_stack(columns)


def energy_curve(lam_min: float, lam_max: float, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(lam, closed_form_energy(lam))`` on a uniform aspect grid."""
    if not (1.0 <= lam_min < lam_max):
        raise ValueError(f"need 1 <= lam_min < lam_max, got [{lam_min}, {lam_max}]")
    if steps < 2:
        raise ValueError(f"need at least 2 steps, got {steps}")
    lams = np.linspace(lam_min, lam_max, steps)
    return lams, np.array([closed_form_energy(lam) for lam in lams])
