"""Earth Mover's Distance through an exact transportation simplex.

The solver starts from a Vogel approximation basis (m + n - 1 cells forming
a spanning tree of the bipartite row/column graph), prices it with u/v
potentials and pivots the most negative reduced cost into the basis until
every reduced cost is non-negative. After a long run of degenerate pivots
it switches to Bland's rule.
"""

import logging
from collections import defaultdict, deque
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from archive_lens.errors import InvalidInputError, SolverError

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


class Signature(BaseModel):
    """Weighted point set standing in for a distribution."""

    points: List[List[float]] = Field(min_length=1)
    weights: List[float]

    @model_validator(mode="after")
    def _check(self) -> "Signature":
        if len(self.weights) != len(self.points):
            raise ValueError(f"{len(self.points)} points but {len(self.weights)} weights")
        dims = {len(p) for p in self.points}
        if len(dims) != 1 or 0 in dims:
            raise ValueError(f"points must share one positive dimension, got {sorted(dims)}")
        if not np.all(np.isfinite(np.asarray(self.points, dtype=np.float64))):
            raise ValueError("signature points must be finite")
        if any(w <= 0 for w in self.weights):
            raise ValueError("signature weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"signature weights must sum to 1, got {sum(self.weights)!r}")
        return self

    @classmethod
    def uniform(cls, points) -> "Signature":
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or len(points) == 0:
            raise InvalidInputError(f"expected a non-empty m x D point array, got shape {points.shape}")
        m = len(points)
        return cls(points=points.tolist(), weights=[1.0 / m] * m)

    @property
    def dimension(self) -> int:
        return len(self.points[0])

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.points, dtype=np.float64), np.asarray(self.weights, dtype=np.float64)


class FlowSolution(BaseModel):
    """Optimal flows with the dual potentials that certify them."""

    flows: List[List[float]]
    total_cost: float
    row_potentials: List[float]
    col_potentials: List[float]
    basis: List[Cell]
    iterations: int = 0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.flows, dtype=np.float64)


def ground_distances(source: np.ndarray, sink: np.ndarray) -> np.ndarray:
    """Euclidean distance between every source and sink point."""
    distances = np.empty((len(source), len(sink)))
    for i, point in enumerate(source):
        distances[i] = np.linalg.norm(sink - point, axis=1)
    return distances


class TransportationSimplex:
    """Exact solver for a balanced transportation problem."""

    def __init__(
        self,
        supply: np.ndarray,
        demand: np.ndarray,
        cost: np.ndarray,
        max_iterations: Optional[int] = None,
    ):
        self.cost = np.asarray(cost, dtype=np.float64)
        self.supply = np.asarray(supply, dtype=np.float64)
        self.demand = np.asarray(demand, dtype=np.float64)
        self.m, self.n = self.cost.shape
        if self.supply.shape != (self.m,) or self.demand.shape != (self.n,):
            raise InvalidInputError(
                f"cost is {self.m}x{self.n} but supply/demand have shapes "
                f"{self.supply.shape}/{self.demand.shape}"
            )
        if np.any(self.supply < 0) or np.any(self.demand < 0):
            raise InvalidInputError("supply and demand must be non-negative")

        total = self.supply.sum()
        if abs(total - self.demand.sum()) > 1e-9 * max(1.0, total):
            raise InvalidInputError(
                f"unbalanced problem: supply {total!r} vs demand {self.demand.sum()!r}"
            )
        if total > 0:
            self.demand = self.demand * (total / self.demand.sum())

        self.cost_tol = 1e-9 * max(1.0, float(np.abs(self.cost).max(initial=0.0)))
        self.flow_tol = 1e-15 * max(1.0, float(total))
        self.max_iterations = max_iterations or 50 * self.m * self.n + 1000
        self.degenerate_limit = 10 * (self.m + self.n)

        self.flows = np.zeros((self.m, self.n))
        self.basis: Set[Cell] = set()
        self.row_adj: Dict[int, Set[int]] = defaultdict(set)
        self.col_adj: Dict[int, Set[int]] = defaultdict(set)

    def _add_basic(self, cell: Cell) -> None:
        i, j = cell
        self.basis.add(cell)
        self.row_adj[i].add(j)
        self.col_adj[j].add(i)

    def _remove_basic(self, cell: Cell) -> None:
        i, j = cell
        self.basis.discard(cell)
        self.row_adj[i].discard(j)
        self.col_adj[j].discard(i)

    def _vogel_initial_basis(self) -> None:
        supply = self.supply.copy()
        demand = self.demand.copy()
        row_active = np.ones(self.m, dtype=bool)
        col_active = np.ones(self.n, dtype=bool)

        while True:
            rows = np.flatnonzero(row_active)
            cols = np.flatnonzero(col_active)
            sub = self.cost[np.ix_(rows, cols)]

            if len(cols) >= 2:
                two = np.partition(sub, 1, axis=1)
                row_penalty = two[:, 1] - two[:, 0]
            else:
                row_penalty = sub[:, 0].copy()
            if len(rows) >= 2:
                two = np.partition(sub, 1, axis=0)
                col_penalty = two[1, :] - two[0, :]
            else:
                col_penalty = sub[0, :].copy()

            r = int(np.argmax(row_penalty))
            c = int(np.argmax(col_penalty))
            if row_penalty[r] >= col_penalty[c]:
                i, j = rows[r], cols[int(np.argmin(sub[r]))]
            else:
                i, j = rows[int(np.argmin(sub[:, c]))], cols[c]

            amount = min(supply[i], demand[j])
            row_exhausted = supply[i] <= demand[j]
            self.flows[i, j] = amount
            supply[i] -= amount
            demand[j] -= amount
            self._add_basic((int(i), int(j)))

            # Cross out exactly one line per step so the basis keeps m + n - 1 cells.
            if len(rows) == 1 and len(cols) == 1:
                break
            if len(cols) == 1 or (len(rows) > 1 and row_exhausted):
                row_active[i] = False
            else:
                col_active[j] = False

    def _potentials(self) -> Tuple[np.ndarray, np.ndarray]:
        u = np.full(self.m, np.nan)
        v = np.full(self.n, np.nan)
        u[0] = 0.0
        queue = deque([("row", 0)])
        while queue:
            kind, index = queue.popleft()
            if kind == "row":
                for j in self.row_adj[index]:
                    if np.isnan(v[j]):
                        v[j] = self.cost[index, j] - u[index]
                        queue.append(("col", j))
            else:
                for i in self.col_adj[index]:
                    if np.isnan(u[i]):
                        u[i] = self.cost[i, index] - v[index]
                        queue.append(("row", i))
        if np.isnan(u).any() or np.isnan(v).any():
            raise SolverError("basis is not a spanning tree", 0)
        return u, v

    def _tree_path(self, row: int, col: int) -> List[Cell]:
        """Basic cells on the tree path from a row node to a column node."""
        start, goal = ("row", row), ("col", col)
        parent = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                break
            kind, index = node
            neighbours = (
                [("col", j) for j in self.row_adj[index]] if kind == "row"
                else [("row", i) for i in self.col_adj[index]]
            )
            for neighbour in neighbours:
                if neighbour not in parent:
                    parent[neighbour] = node
                    queue.append(neighbour)

        cells = []
        node = goal
        while parent[node] is not None:
            previous = parent[node]
            if previous[0] == "row":
                cells.append((previous[1], node[1]))
            else:
                cells.append((node[1], previous[1]))
            node = previous
        cells.reverse()
        return cells

    def solve(self) -> FlowSolution:
        self._vogel_initial_basis()

        degenerate_run = 0
        use_bland = False
        iterations = 0
        while True:
            u, v = self._potentials()
            reduced = self.cost - u[:, None] - v[None, :]
            basic_rows, basic_cols = zip(*self.basis)
            reduced[list(basic_rows), list(basic_cols)] = 0.0

            if reduced.min() >= -self.cost_tol:
                break
            if iterations >= self.max_iterations:
                raise SolverError("transportation simplex did not converge", iterations)

            if use_bland:
                flat = int(np.flatnonzero(reduced.ravel() < -self.cost_tol)[0])
            else:
                flat = int(np.argmin(reduced))
            entering = divmod(flat, self.n)

            path = self._tree_path(*entering)
            # Around the cycle signs alternate, starting with "-" next to the entering cell.
            minus = path[0::2]
            plus = path[1::2]
            if use_bland:
                leaving = min(minus, key=lambda cell: (self.flows[cell], cell))
            else:
                leaving = min(minus, key=lambda cell: self.flows[cell])
            theta = self.flows[leaving]

            self.flows[entering] += theta
            for cell in plus:
                self.flows[cell] += theta
            for cell in minus:
                self.flows[cell] -= theta
            self.flows[leaving] = 0.0

            self._remove_basic(leaving)
            self._add_basic(entering)
            iterations += 1

            if theta <= self.flow_tol:
                degenerate_run += 1
                if not use_bland and degenerate_run > self.degenerate_limit:
                    logger.debug(f"Switching to Bland's rule after {degenerate_run} degenerate pivots")
                    use_bland = True
            else:
                degenerate_run = 0
                use_bland = False

        total_cost = float(np.sum(self.flows * self.cost))
        logger.debug(f"Transportation simplex {self.m}x{self.n} optimal after {iterations} pivots")
        return FlowSolution(
            flows=self.flows.tolist(),
            total_cost=total_cost,
            row_potentials=u.tolist(),
            col_potentials=v.tolist(),
            basis=sorted(self.basis),
            iterations=iterations,
        )


def solve_transportation(supply, demand, cost, max_iterations: Optional[int] = None) -> FlowSolution:
    """Minimum-cost flow shipping ``supply`` to ``demand`` under ``cost``."""
    return TransportationSimplex(supply, demand, cost, max_iterations).solve()


def verify_optimality(
    solution: FlowSolution,
    supply,
    demand,
    cost,
    tol: float = 1e-9,
) -> bool:
    """Check feasibility and the reduced-cost certificate of a solution."""
    flows = solution.as_array()
    cost = np.asarray(cost, dtype=np.float64)
    if np.any(flows < 0):
        return False
    if np.abs(flows.sum(axis=1) - np.asarray(supply)).max() > tol:
        return False
    if np.abs(flows.sum(axis=0) - np.asarray(demand)).max() > tol:
        return False

    scale = max(1.0, float(np.abs(cost).max(initial=0.0)))
    u = np.asarray(solution.row_potentials)
    v = np.asarray(solution.col_potentials)
    reduced = cost - u[:, None] - v[None, :]
    if reduced.min() < -tol * scale:
        return False
    # Complementary slackness: flow only on cells priced at zero.
    return bool(np.all(np.abs(reduced[flows > tol]) <= tol * scale))


def emd(p: Signature, q: Signature) -> Tuple[float, FlowSolution]:
    """Earth Mover's Distance with Euclidean ground distance, plus the optimal flow."""
    if p.dimension != q.dimension:
        raise InvalidInputError(
            f"signature dimensions differ: {p.dimension} vs {q.dimension}"
        )
    p_points, p_weights = p.as_arrays()
    q_points, q_weights = q.as_arrays()

    cost = ground_distances(p_points, q_points)
    solution = solve_transportation(p_weights, q_weights, cost)
    if p_points.shape == q_points.shape and np.array_equal(p_points, q_points) \
            and np.array_equal(p_weights, q_weights):
        # Identical signatures are exactly 0.
        return 0.0, solution

    flows = solution.as_array()
    shipped = flows.sum()
    value = float(np.sum(flows * cost) / shipped)
    return max(value, 0.0), solution
