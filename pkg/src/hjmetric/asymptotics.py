"""Large-scale asymptotics: stable norms and the stationary critical value.

Stable norms are measured as d(0, T q, omega) / T over an omega ensemble
and a ladder of scales, then extrapolated with the 1/T tail model that
matches the subadditive convergence rate on the analytic oracles.  The
stationary critical value is located by bisection on the level, a level
counting as nondegenerate when the smallest directional norm estimate
clears a reported threshold.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import OmegaPoint
from .errors import EmptySublevel, NegativeCycle
from .hamiltonian import HamiltonianSpec
from .metric import CriticalBracket, build_graph, free_critical_value, shortest_distances


def unit_directions(n_dim: int, count: int) -> np.ndarray:
    """Equispaced unit vectors (2D), the two signs (1D)."""
    if n_dim == 1:
        return np.array([[1.0], [-1.0]])[: max(1, count)]
    ang = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def stencil_angle_error(radius: int) -> float:
    """Relative overestimate of the grid metric against straight lines."""
    gap = np.arctan(1.0 / max(radius, 1))
    return float(gap * gap / 8.0)


def _snap(vec: np.ndarray, h: float) -> np.ndarray:
    return h * np.rint(np.asarray(vec, dtype=np.float64) / h)


def _run_box(target: np.ndarray, pad: float, h: float) -> np.ndarray:
    lo = np.floor((np.minimum(0.0, target) - pad) / h) * h
    hi = np.ceil((np.maximum(0.0, target) + pad) / h) * h
    return np.stack([lo, hi], axis=1)


@dataclass
class DirectionEstimate:
    direction: np.ndarray
    scales: np.ndarray
    samples: np.ndarray  # (n_scales, n_omega) distance / scale
    extrapolated: float
    spread: float

    @property
    def per_scale_mean(self) -> np.ndarray:
        return self.samples.mean(axis=1)

    def tail_gap(self) -> float:
        """Distance between the largest-scale mean and the extrapolated value."""
        return float(abs(self.per_scale_mean[-1] - self.extrapolated))


@dataclass
class StableNormEstimate:
    a: float
    kappa: float
    stencil_radius: int
    h: float
    estimates: list

    @property
    def directions(self) -> np.ndarray:
        return np.stack([e.direction for e in self.estimates])

    @property
    def values(self) -> np.ndarray:
        return np.array([e.extrapolated for e in self.estimates])

    @property
    def delta_hat(self) -> float:
        """Smallest directional estimate: the nondegeneracy gauge."""
        return float(self.values.min())

    def direction_errors(self) -> np.ndarray:
        """Per-direction grid-error scales: angular bias plus the unresolved
        tail of the 1/T fit plus ensemble spread."""
        ang = stencil_angle_error(self.stencil_radius)
        return np.array(
            [ang * abs(e.extrapolated) + e.tail_gap() + e.spread for e in self.estimates]
        )

    def delta_error(self) -> float:
        """Error scale of the minimal direction, the one delta_hat reads."""
        return float(self.direction_errors()[int(np.argmin(self.values))])

    def error_estimate(self) -> float:
        return float(self.direction_errors().max())

    def to_json_dict(self) -> dict:
        return {
            "a": self.a,
            "kappa": self.kappa,
            "h": self.h,
            "stencil_radius": self.stencil_radius,
            "delta_hat": self.delta_hat,
            "directions": [
                {
                    "direction": e.direction.tolist(),
                    "scales": e.scales.tolist(),
                    "mean_per_scale": e.per_scale_mean.tolist(),
                    "extrapolated": e.extrapolated,
                    "spread": e.spread,
                }
                for e in self.estimates
            ],
        }

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("direction_index,T,omega_index,value\n")
            for j, e in enumerate(self.estimates):
                for si, t in enumerate(e.scales):
                    for oi, v in enumerate(e.samples[si]):
                        fh.write(f"{j},{t},{oi},{v!r}\n")


def _distance_job(spec, a, h, stencil_radius, pad, quadrature, direction, scale, omega):
    target = _snap(scale * direction, h)
    reach = float(np.linalg.norm(target))
    box = _run_box(target, pad, h)
    graph = build_graph(spec, box, h, stencil_radius, a, omega, quadrature=quadrature)
    field = shortest_distances(graph, np.zeros(spec.env.n_phys))
    return field.value_at(target) / reach


def stable_norm(
    spec: HamiltonianSpec,
    a: float,
    directions: np.ndarray = None,
    scales=(20.0, 50.0, 100.0, 200.0),
    omega_count: int = 8,
    h: float = 0.25,
    stencil_radius: int = 3,
    pad_frac: float = 0.2,
    pad_min: float = 4.0,
    quadrature: str = "midpoint",
    jobs: int = 1,
    extrapolation: str = "tail_fit",
    omegas: list = None,
) -> StableNormEstimate:
    """Directional stable-norm estimates phi_hat_a.

    One shortest-path run per (direction, scale, omega); the box hugs the
    segment from the origin to the scaled target with padding pad_min +
    pad_frac * T so long excursions through cheap corridors stay available.
    The (direction, scale, omega) grid is embarrassingly parallel; results
    are reduced in fixed index order regardless of job count.
    """
    if directions is None:
        directions = unit_directions(spec.env.n_phys, 16)
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    scales = np.asarray(sorted(float(s) for s in scales))
    if omegas is None:
        omegas = spec.env.sample_ensemble(omega_count)

    tasks = []
    for direction in directions:
        for t in scales:
            pad = pad_min + pad_frac * t
            for om in omegas:
                tasks.append((direction, t, pad, om))

    def run(task):
        direction, t, pad, om = task
        return _distance_job(spec, a, h, stencil_radius, pad, quadrature, direction, t, om)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(run, tasks))
    else:
        flat = [run(t) for t in tasks]

    values = np.asarray(flat).reshape(len(directions), len(scales), len(omegas))
    estimates = []
    for j, direction in enumerate(directions):
        samples = values[j]
        means = samples.mean(axis=1)
        if extrapolation == "tail_fit" and len(scales) >= 2:
            t1, t2 = scales[-2], scales[-1]
            phi = (t2 * means[-1] - t1 * means[-2]) / (t2 - t1)
        else:
            phi = float(means[-1])
        spread = float(samples[-1].std())
        estimates.append(
            DirectionEstimate(
                direction=direction,
                scales=scales,
                samples=samples,
                extrapolated=float(phi),
                spread=spread,
            )
        )
    return StableNormEstimate(
        a=a,
        kappa=spec.kappa(a),
        stencil_radius=stencil_radius,
        h=h,
        estimates=estimates,
    )


@dataclass
class CriticalValues:
    """Free and stationary critical value estimates with their brackets."""

    free: CriticalBracket
    stationary: CriticalBracket
    theta_used: float
    degenerate_directions: list
    critical_norms: StableNormEstimate = None

    def to_json_dict(self) -> dict:
        return {
            "free": self.free.to_dict(),
            "stationary": self.stationary.to_dict(),
            "theta": self.theta_used,
            "degenerate_directions": [d.tolist() for d in self.degenerate_directions],
            "critical_norms": None
            if self.critical_norms is None
            else self.critical_norms.to_json_dict(),
        }


def stationary_critical_value(
    spec: HamiltonianSpec,
    box,
    h: float,
    scales=(25.0, 50.0),
    tol: float = 0.04,
    theta: float = None,
    stencil_radius: int = 3,
    direction_count: int = 8,
    omega_count: int = 4,
    pad_frac: float = 0.2,
    pad_min: float = 4.0,
    jobs: int = 1,
    theta_floor: float = 0.02,
    directions: np.ndarray = None,
) -> CriticalValues:
    """Bisection for the smallest level with a nondegenerate stable norm.

    theta defaults to five times the measured grid-error scale at each
    probed level (never below theta_floor) and is reported, not silently
    applied.  Levels where the sublevels empty out or a negative cycle
    appears count as below the feasible range.  A momentum shift skews the
    norm along its own axis, so that direction is probed on top of the
    uniform fan (degeneracy shows up there first).
    """
    omegas = spec.env.sample_ensemble(omega_count)
    free = free_critical_value(spec, omegas[0], box, h, stencil_radius, tol)
    if directions is None:
        directions = unit_directions(spec.env.n_phys, direction_count)
        shift_norm = float(np.linalg.norm(spec.shift))
        if shift_norm > 0:
            axis = spec.shift / shift_norm
            directions = np.vstack([directions, axis, -axis])

    probes = {"low": None, "high": None}  # (a, estimate, cut) at each bracket end

    def probe(a: float):
        try:
            est = stable_norm(
                spec,
                a,
                directions=directions,
                scales=scales,
                omega_count=omega_count,
                h=h,
                stencil_radius=stencil_radius,
                pad_frac=pad_frac,
                pad_min=pad_min,
                jobs=jobs,
                omegas=omegas,
            )
        except (EmptySublevel, NegativeCycle):
            return False
        cut = theta if theta is not None else max(theta_floor, 5.0 * est.delta_error())
        ok = est.delta_hat >= cut
        # low probes rise monotonically, so the slot ends at bracket.lo;
        # high probes fall to bracket.hi
        probes["high" if ok else "low"] = (a, est, cut)
        return ok

    lo = free.estimate
    if probe(lo):
        bracket = CriticalBracket(lo=lo, hi=lo)
    else:
        hi = max(spec.beta_bound(0.0) + 1.0, lo + 1.0)
        while not probe(hi):
            hi = lo + 2.0 * (hi - lo)
            if hi - lo > 1e6:
                raise RuntimeError("no nondegenerate level found below the coercivity bound")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if probe(mid):
                hi = mid
            else:
                lo = mid
        bracket = CriticalBracket(lo=lo, hi=hi)

    # the degeneracy report reads the degenerate end of the bracket: just
    # above it every direction clears the threshold by definition, so flags
    # would be vacuous there
    chosen = probes["low"] if probes["low"] is not None else probes["high"]
    degenerate = []
    cut = theta if theta is not None else theta_floor
    crit_est = None
    if chosen is not None:
        _, crit_est, cut = chosen
        for e in crit_est.estimates:
            if e.extrapolated < cut:
                degenerate.append(e.direction)
    return CriticalValues(
        free=free,
        stationary=bracket,
        theta_used=float(cut),
        degenerate_directions=degenerate,
        critical_norms=crit_est,
    )


@dataclass
class KingmanReport:
    steps: np.ndarray
    means: np.ndarray
    dispersions: np.ndarray
    subadditive_exact: bool
    mean_nonincreasing_within: float

    def to_json_dict(self) -> dict:
        return {
            "steps": self.steps.tolist(),
            "means": self.means.tolist(),
            "dispersions": self.dispersions.tolist(),
            "subadditive_exact": self.subadditive_exact,
            "mean_nonincreasing_within": self.mean_nonincreasing_within,
        }


def kingman_diagnostics(
    spec: HamiltonianSpec,
    a: float,
    q,
    steps=(1, 2, 4, 8, 16, 32),
    omega_count: int = 4,
    h: float = 0.25,
    stencil_radius: int = 3,
    pad: float = 4.0,
    quadrature: str = "midpoint",
) -> KingmanReport:
    """Subadditive-sequence diagnostics for d(0, n q, omega) / n.

    Checks the doubling inequality d(0, 2n q) <= d(0, n q) + d(n q, 2n q)
    per omega (a float-exact consequence would need exactly representable
    weights; a one-ulp-scale allowance covers summation order) and reports
    how far the ensemble means are from nonincreasing along the ladder.
    """
    q = np.asarray(q, dtype=np.float64)
    steps = np.asarray(sorted(int(s) for s in steps))
    n_max = int(steps.max())
    omegas = spec.env.sample_ensemble(omega_count)
    target_last = _snap(2.0 * n_max * q, h)
    box = _run_box(target_last, pad, h)
    samples = np.zeros((len(steps), len(omegas)))
    subadd_ok = True
    for oi, om in enumerate(omegas):
        graph = build_graph(spec, box, h, stencil_radius, a, om, quadrature=quadrature)
        from_zero = shortest_distances(graph, np.zeros(spec.env.n_phys))
        scale_w = max(1.0, float(np.abs(graph.weights[np.isfinite(graph.weights)]).max()))
        for si, n in enumerate(steps):
            tgt = _snap(n * q, h)
            samples[si, oi] = from_zero.value_at(tgt) / n
        for n in steps:
            mid = _snap(n * q, h)
            far = _snap(2 * n * q, h)
            leg = shortest_distances(graph, mid)
            lhs = from_zero.value_at(far)
            rhs = from_zero.value_at(mid) + leg.value_at(far)
            if lhs > rhs + 1e-12 * scale_w * graph.n_nodes ** 0.5:
                subadd_ok = False
    means = samples.mean(axis=1)
    worst_rise = float(np.max(np.maximum(0.0, np.diff(means))))
    return KingmanReport(
        steps=steps,
        means=means,
        dispersions=samples.std(axis=1),
        subadditive_exact=subadd_ok,
        mean_nonincreasing_within=worst_rise,
    )
