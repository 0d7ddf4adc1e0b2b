"""Lax-formula subsolutions, Dirichlet solves, and corrector checks.

The inf over sources of trace plus intrinsic distance is one multi-source
shortest-path sweep on the metric graph.  Residual checks give the discrete
surrogates of the a.e./viscosity notions: an upwind least-squares gradient
for the subsolution side and the Bellman fixed-point defect for the
solution side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import OmegaPoint
from .errors import EmptyAubry, EmptySource, TraceViolation
from .hamiltonian import HamiltonianSpec
from .metric import MetricGraph, multi_source_values, reverse_graph


@dataclass
class LaxSolution:
    """Result of one Lax sweep: u(x) = min over C of g(y) + d(y, x)."""

    graph: MetricGraph
    sources: np.ndarray
    trace: np.ndarray
    values: np.ndarray

    def value_at(self, x) -> float:
        return float(self.values[self.graph.point_node(x)])


def lax_solve(graph: MetricGraph, sources, trace) -> LaxSolution:
    """Maximal subsolution with the given trace on the source set.

    The trace must be 1-Lipschitz for the intrinsic distance.  Rather than
    pre-checking all source pairs (a sweep per source), the sweep itself is
    the certificate: the result can only fall strictly below the trace at a
    source when the Lipschitz bound fails, and then the offending pair is
    recovered with one reverse sweep.
    """
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    trace = np.broadcast_to(np.asarray(trace, dtype=np.float64), sources.shape).copy()
    if sources.size == 0:
        raise EmptySource("lax formula needs a nonempty source set")
    values = multi_source_values(graph, sources, trace)
    got = values[sources]
    # one-ulp-scale slack: summed float paths may dip marginally below an
    # exactly-Lipschitz trace without the continuum bound failing
    finite_w = graph.weights[np.isfinite(graph.weights)]
    scale = max(1.0, float(np.abs(trace).max(initial=0.0)))
    if finite_w.size:
        scale = max(scale, float(np.abs(finite_w).max()) * graph.n_nodes ** 0.5)
    bad = got < trace - 1e-12 * scale
    if np.any(bad):
        worst = int(sources[np.argmax(trace - got)])
        back = multi_source_values(reverse_graph(graph), np.array([worst]), np.array([0.0]))
        culprit = int(sources[np.argmin(trace + back[sources])])
        gap = float((trace - got).max())
        raise TraceViolation((culprit, worst), gap)
    return LaxSolution(graph=graph, sources=sources, trace=trace, values=values)


def dirichlet_solve(graph: MetricGraph, boundary_nodes, boundary_values) -> LaxSolution:
    """Dirichlet problem on the box: same Bellman system, boundary as source."""
    return lax_solve(graph, boundary_nodes, boundary_values)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------


def _incoming_quotients(graph: MetricGraph, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Difference quotients (u(x) - u(x - h z)) / (h |z|) for every offset.

    Returns (quotients (n, K) with NaN where the predecessor leaves the box,
    unit directions (K, N)).
    """
    shape = graph.shape
    u_nd = u.reshape(shape)
    k_count = graph.offsets.shape[0]
    quot = np.full((graph.n_nodes,) + (k_count,), np.nan)
    quot_nd = quot.reshape(shape + (k_count,))
    norms = np.linalg.norm(graph.offsets.astype(np.float64), axis=1)
    for k, z in enumerate(graph.offsets):
        dst = tuple(slice(max(int(v), 0), dim + min(int(v), 0)) for v, dim in zip(z, shape))
        src = tuple(slice(max(-int(v), 0), dim + min(-int(v), 0)) for v, dim in zip(z, shape))
        quot_nd[dst + (k,)] = (u_nd[dst] - u_nd[src]) / (graph.h * norms[k])
    units = graph.offsets / norms[:, None]
    return quot, units


def gradient_field(graph: MetricGraph, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares gradient over the full incoming stencil.

    Fitting all difference quotients at once makes the map u -> D_h u
    linear, so convex combinations of fields get the convex combination of
    gradients; with H convex in p that turns the subsolution stability of
    convex combinations into an exact consequence.  At kinks the fit lands
    in the convex hull of the one-sided slopes, which only helps the
    subsolution verdict.

    Returns (gradients (n, N), mask of nodes with a full stencil).
    """
    quot, units = _incoming_quotients(graph, u)
    full = ~np.isnan(quot).any(axis=1)
    full &= np.isfinite(u)
    normal = units.T @ units
    rhs = np.where(np.isnan(quot), 0.0, quot) @ units
    grads = np.linalg.solve(normal, rhs.T).T
    grads[~full] = np.nan
    return grads, full


@dataclass
class SubsolutionReport:
    level: float
    max_residual: float
    residuals: np.ndarray
    constant: float
    h: float
    is_subsolution: bool
    budget_excess: float


def subsolution_residual(
    spec: HamiltonianSpec,
    graph: MetricGraph,
    u: np.ndarray,
    a: float = None,
    slack_constant: float = 10.0,
) -> SubsolutionReport:
    """Max over interior nodes of H(x, D_h u, omega) - a.

    The verdict compares each residual against the consistency budget
    slack_constant * h * (1 + |grad V^2|) of its node: grid gradients carry
    a first-order error proportional to how fast the data varies along the
    stencil, so a flat budget would reject honest subsolutions wherever the
    potential is steep.  max_residual / h is reported raw, with no budget
    applied.  Box-boundary nodes (incomplete stencils) are excluded.
    """
    level = graph.a if a is None else float(a)
    grads, full = gradient_field(graph, u)
    pts = graph.grid_points()
    resid = np.full(graph.n_nodes, np.nan)
    if full.any():
        resid[full] = spec.eval_field(pts[full], grads[full], graph.omega) - level
    worst = float(np.nanmax(resid)) if full.any() else float("-inf")
    budget = slack_constant * graph.h * (1.0 + spec.stiffness_scale(pts, graph.omega))
    excess = float(np.nanmax(resid - budget)) if full.any() else float("-inf")
    return SubsolutionReport(
        level=level,
        max_residual=worst,
        residuals=resid,
        constant=worst / graph.h,
        h=graph.h,
        is_subsolution=bool(excess <= 0.0),
        budget_excess=excess,
    )


def solution_residual(
    graph: MetricGraph,
    u: np.ndarray,
    exclude=None,
) -> tuple[float, np.ndarray]:
    """Bellman fixed-point defect |u(x) - min over incoming (u(y) + w(y->x))|.

    Shortest-path output has defect exactly zero away from its sources, the
    relaxations having run to completion in the same arithmetic.  Nodes in
    `exclude` and the outermost box layer are left out of the max.
    """
    shape = graph.shape
    u_nd = u.reshape(shape)
    w_nd = graph.weights.reshape(shape + (graph.offsets.shape[0],))
    best = np.full(shape, np.inf)
    for k, z in enumerate(graph.offsets):
        dst = tuple(slice(max(int(v), 0), dim + min(int(v), 0)) for v, dim in zip(z, shape))
        src = tuple(slice(max(-int(v), 0), dim + min(-int(v), 0)) for v, dim in zip(z, shape))
        cand = u_nd[src] + w_nd[src + (k,)]
        np.minimum(best[dst], cand, out=best[dst])
    defect = np.abs(u_nd - best).ravel()
    keep = np.ones(graph.n_nodes, dtype=bool)
    grids = np.meshgrid(*[np.arange(dim) for dim in shape], indexing="ij")
    edge = np.zeros(shape, dtype=bool)
    for ax, dim in enumerate(shape):
        edge |= (grids[ax] == 0) | (grids[ax] == dim - 1)
    keep &= ~edge.ravel()
    if exclude is not None and len(np.atleast_1d(exclude)):
        keep[np.asarray(exclude, dtype=np.int64)] = False
    keep &= np.isfinite(defect)
    worst = float(defect[keep].max()) if keep.any() else 0.0
    out = np.where(keep, defect, np.nan)
    return worst, out


# ---------------------------------------------------------------------------
# correctors
# ---------------------------------------------------------------------------


@dataclass
class CorrectorResult:
    solution: LaxSolution
    sources: np.ndarray
    band: tuple
    band_target: tuple
    subsolution_ok: bool
    lower_ok: bool
    solution_defect: float
    residuals: np.ndarray

    @property
    def passed(self) -> bool:
        return self.subsolution_ok and self.lower_ok


def approximate_corrector(
    spec: HamiltonianSpec,
    omega: OmegaPoint,
    delta: float,
    graph: MetricGraph,
    c_est: float,
    slack_constant: float = 10.0,
) -> CorrectorResult:
    """Lax solution over the delta-approximate equilibria with zero trace.

    The Hamiltonian value along the result must sit in the band
    [c - delta - C h, c + delta + C h].  The upper side is checked through
    the least-squares gradient; the lower side holds by construction on the
    source set (its points have min_p H >= c - delta) and through the exact
    Bellman defect elsewhere, mirroring how the viscosity inequalities
    split.  A raw gradient check of the lower bound would false-fail on the
    concave ridges of the distance function where no test function touches
    from below.
    """
    pts = graph.grid_points()
    pmin = spec.pointwise_min(pts, omega)
    sources = np.nonzero(pmin >= c_est - delta)[0]
    if sources.size == 0:
        raise EmptySource(
            f"no delta-approximate equilibria on the box for delta={delta}"
        )
    sol = lax_solve(graph, sources, np.zeros(sources.size))
    sub = subsolution_residual(spec, graph, sol.values, a=c_est, slack_constant=slack_constant)
    upper_ok = sub.budget_excess <= delta
    lower_source_ok = bool(np.all(pmin[sources] >= c_est - delta))
    defect, _ = solution_residual(graph, sol.values, exclude=sources)
    lower_ok = lower_source_ok and defect <= slack_constant * graph.h
    finite = ~np.isnan(sub.residuals)
    band = (
        float(np.nanmin(sub.residuals) + c_est) if finite.any() else np.nan,
        float(np.nanmax(sub.residuals) + c_est) if finite.any() else np.nan,
    )
    return CorrectorResult(
        solution=sol,
        sources=sources,
        band=band,
        band_target=(c_est - delta - slack_constant * graph.h, c_est + delta + slack_constant * graph.h),
        subsolution_ok=bool(upper_ok),
        lower_ok=bool(lower_ok),
        solution_defect=float(defect),
        residuals=sub.residuals,
    )


def corrector_from_aubry(
    spec: HamiltonianSpec,
    omega: OmegaPoint,
    graph: MetricGraph,
    aubry_nodes,
    trace=0.0,
    slack_constant: float = 10.0,
) -> CorrectorResult:
    """Critical solution built over the Aubry set.

    An empty Aubry set is reported as EmptyAubry: together with a
    nondegenerate critical stable norm that is the evidence for the
    nonexistence branch, so it must surface rather than be papered over.
    The discrete solution property is required on the whole interior, the
    Aubry nodes included; their cycle costs vanish at the h-scale, which is
    what keeps the defect within the C h budget there.
    """
    aubry_nodes = np.atleast_1d(np.asarray(aubry_nodes, dtype=np.int64))
    if aubry_nodes.size == 0:
        raise EmptyAubry("no Aubry nodes on the box at this resolution")
    trace_arr = np.broadcast_to(np.asarray(trace, dtype=np.float64), aubry_nodes.shape)
    sol = lax_solve(graph, aubry_nodes, trace_arr)
    sub = subsolution_residual(spec, graph, sol.values, slack_constant=slack_constant)
    defect, _ = solution_residual(graph, sol.values, exclude=None)
    finite = ~np.isnan(sub.residuals)
    band = (
        float(np.nanmin(sub.residuals) + graph.a) if finite.any() else np.nan,
        float(np.nanmax(sub.residuals) + graph.a) if finite.any() else np.nan,
    )
    return CorrectorResult(
        solution=sol,
        sources=aubry_nodes,
        band=band,
        band_target=(graph.a - slack_constant * graph.h, graph.a + slack_constant * graph.h),
        subsolution_ok=sub.is_subsolution,
        lower_ok=bool(defect <= slack_constant * graph.h),
        solution_defect=float(defect),
        residuals=sub.residuals,
    )
