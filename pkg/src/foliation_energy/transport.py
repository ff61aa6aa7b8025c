"""Exact solvers for the discrete balanced transportation problem.

:func:`wasserstein` minimizes ``sum flow(i,j) * d(x_i, x'_j)**p`` over all
couplings with the two measures as marginals and returns the p-th root of the
optimal cost together with an optimal vertex plan. The solver is a primal
transportation simplex: north-west-corner start, dual (u, v) pricing on the
basis tree, Bland's smallest-index anti-cycling rule, degenerate zero-flow
basic cells kept explicitly. No approximation anywhere; acceptance rests on
agreement with closed forms and with the spanning-tree oracle below.

:func:`brute_force_wasserstein` is the independent oracle for tiny instances:
every vertex of the transportation polytope is the unique flow on some
spanning tree of the complete bipartite support graph, so enumerating all
spanning trees and keeping the feasible ones finds the exact optimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .measures import DiscreteMeasure, Metric, Point2, euclidean_distance

MASS_BALANCE_ATOL = 1e-9
MARGINAL_RTOL = 1e-10
COST_RTOL = 1e-9


class SolverFailure(RuntimeError):
    """The pivoting loop exceeded its anti-cycling bound or produced an
    inconsistent plan. Signals a bug, not an input condition."""


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """A coupling between two discrete measures, stored sparsely.

    ``entries`` maps ``(i, j)`` to the (positive) flow from source atom i to
    target atom j; ``cost`` is ``sum flow * d^p`` for the ``p`` the plan was
    solved with.
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    entries: dict[tuple[int, int], float]
    cost: float
    p: float

    @property
    def rows(self) -> int:
        return len(self.source)

    @property
    def cols(self) -> int:
        return len(self.target)

    def row_sums(self) -> np.ndarray:
        sums = np.zeros(self.rows)
        for (i, _), f in self.entries.items():
            sums[i] += f
        return sums

    def col_sums(self) -> np.ndarray:
        sums = np.zeros(self.cols)
        for (_, j), f in self.entries.items():
            sums[j] += f
        return sums


def plan_cost(plan: TransportPlan, p: float, metric: Metric = euclidean_distance) -> float:
    """Recompute ``sum flow * d^p`` from the plan entries."""
    total = 0.0
    src, dst = plan.source.locations, plan.target.locations
    for (i, j), f in plan.entries.items():
        d = metric(Point2(src[i, 0], src[i, 1]), Point2(dst[j, 0], dst[j, 1]))
        total += f * _pow(d, p)
    return total


def _pow(d: float, p: float) -> float:
    if p == 1.0:
        return d
    if p == 2.0:
        return d * d
    return d**p


def _cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, metric: Metric) -> np.ndarray:
    if metric is euclidean_distance:
        dx = mu.locations[:, 0][:, None] - nu.locations[:, 0][None, :]
        dy = mu.locations[:, 1][:, None] - nu.locations[:, 1][None, :]
        dist = np.sqrt(dx * dx + dy * dy)
    else:
        src = [Point2(float(x), float(y)) for x, y in mu.locations]
        dst = [Point2(float(x), float(y)) for x, y in nu.locations]
        dist = np.array([[metric(a, b) for b in dst] for a in src], dtype=float)
    if p == 1.0:
        return dist
    if p == 2.0:
        return dist * dist
    return dist**p


def _check_inputs(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> tuple[np.ndarray, np.ndarray]:
    if not (math.isfinite(p) and p >= 1.0):
        raise ValueError(f"order p must be a finite real >= 1, got {p}")
    if abs(mu.mass - nu.mass) > MASS_BALANCE_ATOL:
        raise ValueError(f"unbalanced masses: {mu.mass} vs {nu.mass}")
    a = mu.weights.astype(float).copy()
    b = nu.weights.astype(float).copy()
    # proportional rescaling of the smaller side removes float-level imbalance
    if a.sum() < b.sum():
        a *= b.sum() / a.sum()
    elif b.sum() < a.sum():
        b *= a.sum() / b.sum()
    return a, b


def wasserstein(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: float = 1.0,
    metric: Metric = euclidean_distance,
) -> tuple[float, TransportPlan]:
    """Exact p-Wasserstein distance between two balanced discrete measures.

    Returns ``(value, plan)`` with ``value = (minimal cost)**(1/p)``. The plan
    is an optimal vertex of the transportation polytope.

    Raises
    ------
    ValueError
        Unbalanced masses, empty measures or invalid ``p``.
    SolverFailure
        Pivot bound exhausted (this indicates a bug, not bad input).
    """
    a, b = _check_inputs(mu, nu, p)
    cost = _cost_matrix(mu, nu, p, metric)
    flows = _transportation_simplex(a, b, cost)
    total = float(np.sum(flows * cost))
    entries = {
        (int(i), int(j)): float(flows[i, j]) for i, j in zip(*np.nonzero(flows > 0.0))
    }
    plan = TransportPlan(source=mu, target=nu, entries=entries, cost=total, p=float(p))
    _validate_plan(plan, a, b)
    value = total if p == 1.0 else total ** (1.0 / p)
    return value, plan


def _validate_plan(plan: TransportPlan, a: np.ndarray, b: np.ndarray) -> None:
    mass = float(a.sum())
    tol = MARGINAL_RTOL * mass
    if np.max(np.abs(plan.row_sums() - a)) > tol or np.max(np.abs(plan.col_sums() - b)) > tol:
        raise SolverFailure("optimal plan violates its marginals")


# ---------------------------------------------------------------------------
# transportation simplex


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    n, m = len(a), len(b)
    flows = np.zeros((n, m))
    basis: list[tuple[int, int]] = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        f = min(ra[i], rb[j])
        flows[i, j] = f
        basis.append((i, j))
        ra[i] -= f
        rb[j] -= f
        if i == n - 1 and j == m - 1:
            break
        # ties advance the row so the basis stays a staircase tree
        if i < n - 1 and (ra[i] <= rb[j] or j == m - 1):
            i += 1
        else:
            j += 1
    return flows, basis


def _transportation_simplex(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Primal simplex on the transportation polytope.

    Pricing is Dantzig's most-negative rule for speed; a run of consecutive
    degenerate pivots longer than the node count switches to Bland's
    smallest-index rule, which provably escapes the stall, so the iteration
    cannot cycle. Duals are maintained incrementally: a pivot re-tightens the
    entering cell by shifting one tree component complementarily.
    """
    n, m = cost.shape
    if n == 0 or m == 0:
        raise ValueError("empty measure")
    flows, basis = _northwest_corner(a, b)
    rows_adj: list[set[int]] = [set() for _ in range(n)]
    cols_adj: list[set[int]] = [set() for _ in range(m)]
    for i, j in basis:
        rows_adj[i].add(j)
        cols_adj[j].add(i)

    opt_tol = 1e-11 * max(1.0, float(np.max(cost)) if cost.size else 1.0)
    max_pivots = 2000 + 60 * (n + m)
    stall_limit = n + m + 16
    stall = 0
    u = np.empty(n)
    v = np.empty(m)
    _solve_duals(cost, rows_adj, cols_adj, u, v)
    reduced = np.empty_like(cost)

    for pivot in range(max_pivots):
        if pivot and pivot % 1024 == 0:
            _solve_duals(cost, rows_adj, cols_adj, u, v)  # cap float drift
        np.subtract(cost, u[:, None], out=reduced)
        reduced -= v[None, :]
        if stall <= stall_limit:
            enter = int(np.argmin(reduced))
            ei, ej = divmod(enter, m)
            r = float(reduced[ei, ej])
            if r >= -opt_tol:
                flows[flows < 0.0] = 0.0
                return flows
        else:
            candidates = (reduced < -opt_tol).ravel()
            if not candidates.any():
                flows[flows < 0.0] = 0.0
                return flows
            enter = int(np.argmax(candidates))  # smallest (i, j) row-major
            ei, ej = divmod(enter, m)
            r = float(reduced[ei, ej])
        cycle = _basis_path(rows_adj, cols_adj, ei, ej)
        minus = cycle[0::2]  # cells losing flow, starting with (ei, first col)
        plus = cycle[1::2]
        theta = min(flows[i, j] for i, j in minus)
        leave = min((c for c in minus if flows[c] <= theta), key=lambda c: c)
        for i, j in plus:
            flows[i, j] += theta
        flows[ei, ej] += theta
        for i, j in minus:
            flows[i, j] = max(flows[i, j] - theta, 0.0)
        flows[leave] = 0.0
        rows_adj[leave[0]].discard(leave[1])
        cols_adj[leave[1]].discard(leave[0])
        # with the leaving edge gone, the entering one reconnects the
        # component holding column ej; shifting it complementarily by r
        # keeps every surviving basis cell tight and tightens the new one
        comp_rows, comp_cols = _component_of_col(rows_adj, cols_adj, ej)
        if ei in comp_rows:
            raise SolverFailure("pivot did not split the basis tree")
        for i in comp_rows:
            u[i] -= r
        for j in comp_cols:
            v[j] += r
        rows_adj[ei].add(ej)
        cols_adj[ej].add(ei)
        stall = stall + 1 if theta <= 0.0 else 0
    raise SolverFailure(f"no optimum after {max_pivots} pivots on a {n}x{m} instance")


def _component_of_col(rows_adj, cols_adj, j0: int) -> tuple[set[int], set[int]]:
    comp_rows: set[int] = set()
    comp_cols: set[int] = {j0}
    stack = [(False, j0)]
    while stack:
        is_row, k = stack.pop()
        if is_row:
            for j in rows_adj[k]:
                if j not in comp_cols:
                    comp_cols.add(j)
                    stack.append((False, j))
        else:
            for i in cols_adj[k]:
                if i not in comp_rows:
                    comp_rows.add(i)
                    stack.append((True, i))
    return comp_rows, comp_cols


def _solve_duals(cost, rows_adj, cols_adj, u, v) -> None:
    u.fill(np.nan)
    v.fill(np.nan)
    u[0] = 0.0
    stack = [(True, 0)]
    while stack:
        is_row, k = stack.pop()
        if is_row:
            for j in rows_adj[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append((False, j))
        else:
            for i in cols_adj[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append((True, i))
    if np.isnan(u).any() or np.isnan(v).any():
        raise SolverFailure("basis is not a spanning tree")


def _basis_path(rows_adj, cols_adj, ei: int, ej: int) -> list[tuple[int, int]]:
    """Cells of the unique basis path from row ``ei`` to column ``ej``.

    Together with the entering cell ``(ei, ej)`` the path closes the pivot
    cycle; cells alternate minus/plus starting from the row end.
    """
    # BFS over the bipartite basis tree; nodes are ('r', i) and ('c', j)
    parent: dict[tuple[str, int], tuple[str, int]] = {("r", ei): ("r", ei)}
    frontier = [("r", ei)]
    while frontier:
        nxt = []
        for node in frontier:
            kind, k = node
            if kind == "r":
                for j in rows_adj[k]:
                    child = ("c", j)
                    if child not in parent:
                        parent[child] = node
                        if j == ej:
                            return _unwind(parent, child)
                        nxt.append(child)
            else:
                for i in cols_adj[k]:
                    child = ("r", i)
                    if child not in parent:
                        parent[child] = node
                        nxt.append(child)
        frontier = nxt
    raise SolverFailure("entering cell closes no cycle; basis is disconnected")


def _unwind(parent, node) -> list[tuple[int, int]]:
    cells: list[tuple[int, int]] = []
    while parent[node] != node:
        prev = parent[node]
        (ka, a), (kb, b) = prev, node
        cells.append((a, b) if ka == "r" else (b, a))
        node = prev
    cells.reverse()
    return cells


# ---------------------------------------------------------------------------
# spanning-tree oracle


def brute_force_wasserstein(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: float = 1.0,
    metric: Metric = euclidean_distance,
) -> float:
    """Exact optimum for instances with at most 3 atoms per side.

    Enumerates every spanning tree of the complete bipartite support graph,
    solves the flow uniquely on each tree by leaf elimination, discards trees
    with negative flow and returns the minimal cost, rooted at 1/p. Optimal
    solutions sit at polytope vertices, and vertices correspond to spanning
    forests, so the minimum over feasible trees is the true optimum.
    """
    n, m = len(mu), len(nu)
    if n > 3 or m > 3:
        raise ValueError(f"oracle limited to 3 atoms per side, got {n}x{m}")
    a, b = _check_inputs(mu, nu, p)
    cost = _cost_matrix(mu, nu, p, metric)
    edges = [(i, j) for i in range(n) for j in range(m)]
    best = math.inf
    for tree in itertools.combinations(edges, n + m - 1):
        flows = _tree_flows(tree, a, b)
        if flows is None:
            continue
        best = min(best, sum(f * cost[i, j] for (i, j), f in zip(tree, flows)))
    if not math.isfinite(best):
        raise SolverFailure("no feasible spanning tree on a balanced instance")
    best = max(best, 0.0)
    return best if p == 1.0 else best ** (1.0 / p)


def _tree_flows(tree, a: np.ndarray, b: np.ndarray):
    """Unique flow on a candidate spanning tree, or None if it is not a
    connected tree or forces negative flow."""
    n, m = len(a), len(b)
    feas_tol = -1e-12 * (a.sum() + b.sum())
    residual = np.concatenate([a, b])  # rows 0..n-1, cols n..n+m-1
    adj: dict[int, list[tuple[int, int]]] = {k: [] for k in range(n + m)}
    for e, (i, j) in enumerate(tree):
        adj[i].append((e, n + j))
        adj[n + j].append((e, i))
    degree = {k: len(adj[k]) for k in adj}
    if any(d == 0 for d in degree.values()):
        return None
    flows = [0.0] * len(tree)
    used = [False] * len(tree)
    leaves = [k for k, d in degree.items() if d == 1]
    processed = 0
    while leaves:
        k = leaves.pop()
        edge = next(((e, o) for e, o in adj[k] if not used[e]), None)
        if edge is None:
            continue
        e, other = edge
        f = residual[k]
        if f < feas_tol:
            return None
        flows[e] = max(f, 0.0)
        residual[k] = 0.0
        residual[other] -= f
        used[e] = True
        processed += 1
        degree[other] -= 1
        if degree[other] == 1:
            leaves.append(other)
    if processed != len(tree):
        return None  # a cycle survived: not a tree
    return flows
