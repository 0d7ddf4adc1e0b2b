"""Grid discretization of the intrinsic semidistance.

The minimal support-function length of Lipschitz curves is approximated by
shortest paths on a box grid whose directed edges reach every coprime
lattice offset within a Chebyshev radius; each edge carries the midpoint
quadrature of the sublevel support function along the segment.  Distances,
negative-cycle certificates, the free critical value, equilibria and the
Aubry set all come out of this one structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .convex import SublevelGeometry
from .environment import OmegaPoint
from .errors import EmptySublevel, NegativeCycle
from .hamiltonian import HamiltonianSpec

QUADRATURES = ("midpoint", "trapezoid")


def coprime_offsets(n_dim: int, radius: int) -> np.ndarray:
    """All nonzero lattice vectors within Chebyshev radius, reduced to coprime."""
    grids = np.meshgrid(*[np.arange(-radius, radius + 1) for _ in range(n_dim)], indexing="ij")
    vecs = np.stack([g.ravel() for g in grids], axis=1)
    out = [z for z in vecs if np.any(z) and math.gcd(*[abs(int(v)) for v in z]) == 1]
    return np.array(out, dtype=np.int64)


def _box_axes(box: np.ndarray, h: float):
    shape = []
    los = []
    for lo, hi in box:
        count = int(round((hi - lo) / h)) + 1
        if count < 2:
            raise ValueError("box is thinner than one grid step along some axis")
        shape.append(count)
        los.append(lo)
    return tuple(shape), np.asarray(los, dtype=np.float64)


@dataclass
class MetricGraph:
    """Directed grid graph carrying the level-a edge weights for one omega."""

    spec: HamiltonianSpec
    a: float
    omega: OmegaPoint
    box: np.ndarray
    h: float
    stencil_radius: int
    offsets: np.ndarray
    shape: tuple
    lo: np.ndarray
    weights: np.ndarray  # (n_nodes, K), +inf marks edges leaving the box
    steps: np.ndarray
    quadrature: str
    reversed_: bool = False

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def grid_points(self) -> np.ndarray:
        grids = np.meshgrid(
            *[self.lo[j] + self.h * np.arange(dim) for j, dim in enumerate(self.shape)],
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)

    def node_point(self, node: int) -> np.ndarray:
        idx = np.unravel_index(node, self.shape)
        return self.lo + self.h * np.asarray(idx, dtype=np.float64)

    def point_node(self, x) -> int:
        x = np.asarray(x, dtype=np.float64)
        idx = (x - self.lo) / self.h
        rounded = np.rint(idx)
        if np.any(np.abs(idx - rounded) > 1e-6):
            raise ValueError(f"point {x} is not a grid node")
        if np.any(rounded < 0) or np.any(rounded >= np.asarray(self.shape)):
            raise ValueError(f"point {x} lies outside the box")
        return int(np.ravel_multi_index(tuple(int(v) for v in rounded), self.shape))

    def interior_mask(self) -> np.ndarray:
        """Nodes whose full stencil stays inside the box."""
        r = self.stencil_radius
        grids = np.meshgrid(*[np.arange(dim) for dim in self.shape], indexing="ij")
        ok = np.ones(self.shape, dtype=bool)
        for ax, dim in enumerate(self.shape):
            ok &= (grids[ax] >= r) & (grids[ax] <= dim - 1 - r)
        return ok.ravel()

    def boundary_touch(self, values: np.ndarray) -> bool:
        """Whether any finite shortest path label sits on the outermost layer."""
        grids = np.meshgrid(*[np.arange(dim) for dim in self.shape], indexing="ij")
        edge = np.zeros(self.shape, dtype=bool)
        for ax, dim in enumerate(self.shape):
            edge |= (grids[ax] == 0) | (grids[ax] == dim - 1)
        return bool(np.isfinite(values[edge.ravel()]).any())


@dataclass
class DistanceField:
    """Shortest distances from a source node at one level and omega."""

    graph: MetricGraph
    source: int
    values: np.ndarray
    reached: bool

    def value_at(self, x) -> float:
        return float(self.values[self.graph.point_node(x)])

    def to_csv(self, path) -> None:
        pts = self.graph.grid_points()
        names = ["x", "y", "z"][: pts.shape[1]]
        header = ",".join(names + ["value"])
        data = np.column_stack([pts, self.values])
        np.savetxt(path, data, delimiter=",", header=header, comments="")

    def to_binary(self, prefix) -> None:
        """Row-major float64 dump plus a JSON header."""
        prefix = str(prefix)
        self.values.astype(np.float64).tofile(prefix + ".bin")
        head = {
            "dims": list(self.graph.shape),
            "h": self.graph.h,
            "box": self.graph.box.tolist(),
            "a": self.graph.a,
            "omega": self.graph.omega.coords.tolist(),
            "seed": int(self.graph.spec.env.seed),
        }
        with open(prefix + ".json", "w") as fh:
            json.dump(head, fh, sort_keys=True)


@dataclass
class SourceSets:
    """Equilibria, approximate equilibria, and Aubry nodes on the box."""

    equilibria: np.ndarray
    approx_equilibria: np.ndarray
    aubry: np.ndarray
    epsilon: float
    delta: float
    cycle_scores: np.ndarray = None


def build_graph(
    spec: HamiltonianSpec,
    box,
    h: float,
    stencil_radius: int,
    a: float,
    omega: OmegaPoint,
    quadrature: str = "midpoint",
    offsets: np.ndarray = None,
    reversed_: bool = False,
) -> MetricGraph:
    """Assemble the weighted grid graph at level `a`.

    Edge weight for x -> x + h z is the quadrature of the support function
    along the segment; the midpoint rule keeps the local error at O(h^2)
    for the continuous supported forms.  Raises EmptySublevel through the
    support evaluation when `a` undercuts the pointwise minimum of H.
    """
    if quadrature not in QUADRATURES:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    box = np.asarray(box, dtype=np.float64)
    n_dim = spec.env.n_phys
    if box.shape != (n_dim, 2):
        raise ValueError(f"box must be ({n_dim}, 2)")
    if offsets is None:
        offsets = coprime_offsets(n_dim, stencil_radius)
    else:
        offsets = np.asarray(offsets, dtype=np.int64)
    shape, lo = _box_axes(box, h)
    steps = _kernels._flat_steps(offsets, shape)
    valid = _kernels.edge_valid_mask(offsets, shape)
    geom = SublevelGeometry(spec, a)
    grids = np.meshgrid(
        *[lo[j] + h * np.arange(dim) for j, dim in enumerate(shape)], indexing="ij"
    )
    points = np.stack([g.ravel() for g in grids], axis=1)
    n = points.shape[0]
    weights = np.full((n, offsets.shape[0]), np.inf)
    for k, z in enumerate(offsets):
        q = h * z.astype(np.float64)
        direction = -q if reversed_ else q
        mask = valid[:, k]
        if not mask.any():
            continue
        src = points[mask]
        if quadrature == "midpoint":
            w = geom.support_many(src + 0.5 * q, direction, omega)
        else:
            w = 0.5 * (
                geom.support_many(src, direction, omega)
                + geom.support_many(src + q, direction, omega)
            )
        weights[mask, k] = w
    return MetricGraph(
        spec=spec,
        a=a,
        omega=omega,
        box=box,
        h=h,
        stencil_radius=stencil_radius,
        offsets=offsets,
        shape=shape,
        lo=lo,
        weights=weights,
        steps=steps,
        quadrature=quadrature,
        reversed_=reversed_,
    )


def reverse_graph(graph: MetricGraph) -> MetricGraph:
    """Graph whose distances from y equal original distances into y."""
    return build_graph(
        graph.spec,
        graph.box,
        graph.h,
        graph.stencil_radius,
        graph.a,
        graph.omega,
        quadrature=graph.quadrature,
        offsets=graph.offsets,
        reversed_=not graph.reversed_,
    )


def multi_source_values(graph: MetricGraph, sources: np.ndarray, trace: np.ndarray) -> np.ndarray:
    """One sweep of min over sources of trace + distance; raises NegativeCycle."""
    init = np.full(graph.n_nodes, np.inf)
    init[np.asarray(sources, dtype=np.int64)] = np.asarray(trace, dtype=np.float64)
    dist, cycle = _kernels.shortest_paths(graph.weights, graph.steps, init)
    if cycle:
        raise NegativeCycle(graph.a)
    return dist


def shortest_distances(graph: MetricGraph, source) -> DistanceField:
    """Exact grid shortest-path distances from one source node or point."""
    node = source if np.isscalar(source) else graph.point_node(source)
    values = multi_source_values(graph, np.array([node]), np.array([0.0]))
    return DistanceField(
        graph=graph, source=int(node), values=values, reached=bool(np.isfinite(values).all())
    )


def has_negative_cycle(graph: MetricGraph) -> bool:
    """Run the label-correcting sweep seeded everywhere; cycles are reachable."""
    finite = np.isfinite(graph.weights)
    if finite.any() and float(graph.weights[finite].min()) >= 0.0:
        return False
    init = np.zeros(graph.n_nodes)
    _, cycle = _kernels.shortest_paths(graph.weights, graph.steps, init)
    return bool(cycle)


@dataclass
class CriticalBracket:
    lo: float
    hi: float

    @property
    def estimate(self) -> float:
        return self.hi

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "estimate": self.estimate}


def free_critical_value(
    spec: HamiltonianSpec,
    omega: OmegaPoint,
    box,
    h: float,
    stencil_radius: int,
    tol: float,
    quadrature: str = "midpoint",
) -> CriticalBracket:
    """Smallest level whose graph is weight-feasible and free of negative cycles.

    Bisection between the sup of the pointwise minimum of H over the box
    (a certified lower bound) and a coercivity upper bound.
    """

    def feasible(a: float) -> bool:
        try:
            g = build_graph(spec, box, h, stencil_radius, a, omega, quadrature=quadrature)
        except EmptySublevel:
            return False
        return not has_negative_cycle(g)

    box = np.asarray(box, dtype=np.float64)
    lo = spec.sup_pointwise_min(omega, box, resolution=h)
    if feasible(lo):
        return CriticalBracket(lo=lo, hi=lo)
    hi = max(spec.beta_bound(0.0) + 1.0, lo + 1.0)
    while not feasible(hi):
        hi = lo + 2.0 * (hi - lo)
        if hi - lo > 1e6:
            raise RuntimeError("no feasible level found below the coercivity bound")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return CriticalBracket(lo=lo, hi=hi)


def detect_sources(
    spec: HamiltonianSpec,
    omega: OmegaPoint,
    graph: MetricGraph,
    c_f_est: float,
    c_est: float,
    delta: float,
    epsilon: float = None,
    value_tol: float = 1e-6,
    aubry_candidates=None,
    cycle_constant: float = 10.0,
) -> SourceSets:
    """Threshold equilibria and run the two-point Aubry cycle test.

    A node joins the Aubry set when some partner at Euclidean distance at
    least delta/2 closes a round trip of cost at most epsilon; epsilon
    defaults to cycle_constant * delta * h, the cost scale of a grid cycle
    through a vanishing-support region.  Thresholds are inclusive so that
    borderline nodes feed the Lax sources (over-inclusion is conservative
    for subsolutions).
    """
    pts = graph.grid_points()
    pmin = spec.pointwise_min(pts, omega)
    equilibria = np.nonzero(pmin >= c_f_est - value_tol)[0]
    approx = np.nonzero(pmin >= c_est - delta)[0]
    if epsilon is None:
        epsilon = cycle_constant * delta * graph.h
    rev = reverse_graph(graph)
    if aubry_candidates is None:
        candidates = np.arange(graph.n_nodes)
    else:
        candidates = np.asarray(aubry_candidates, dtype=np.int64)
    aubry = []
    scores = np.full(graph.n_nodes, np.nan)
    for node in candidates:
        fwd = multi_source_values(graph, np.array([node]), np.array([0.0]))
        bwd = multi_source_values(rev, np.array([node]), np.array([0.0]))
        gap = np.linalg.norm(pts - pts[node][None, :], axis=1)
        far = gap >= 0.5 * delta
        if not far.any():
            continue
        score = float(np.min(fwd[far] + bwd[far]))
        scores[node] = score
        if score <= epsilon:
            aubry.append(int(node))
    return SourceSets(
        equilibria=equilibria,
        approx_equilibria=approx,
        aubry=np.asarray(aubry, dtype=np.int64),
        epsilon=float(epsilon),
        delta=float(delta),
        cycle_scores=scores,
    )
