"""Effective Lagrangian and Hamiltonian through large-time averaged action.

Minimal action values come from Lax-Oleinik value iteration on a box grid:
one sweep advances time by dt, a step moves by a lattice offset whose
velocity is offset * h / dt, and the running cost samples the Lagrangian
at the segment midpoint.  Time-averaged endpoint costs converge to the
effective Lagrangian; its discrete Legendre transform is the effective
Hamiltonian, whose sublevels are probed radially for support values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .convex import LagrangianTable
from .environment import OmegaPoint
from .errors import BoundaryMax, CflViolation, EmptyEffectiveSublevel
from .hamiltonian import HamiltonianSpec


def velocity_offsets(n_dim: int, reach_steps: int) -> np.ndarray:
    """All lattice steps within the Chebyshev reach, the rest step included."""
    grids = np.meshgrid(*[np.arange(-reach_steps, reach_steps + 1)] * n_dim, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def square_grid(n_dim: int, reach: float, step: float) -> np.ndarray:
    ax = np.arange(-reach, reach + step / 2, step)
    grids = np.meshgrid(*[ax] * n_dim, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass
class ActionField:
    """h_t(0, ., omega) sampled on the box grid at one time."""

    spec: HamiltonianSpec
    omega: OmegaPoint
    time: float
    dt: float
    h: float
    box: np.ndarray
    shape: tuple
    lo: np.ndarray
    values: np.ndarray
    reach_fraction: float

    def point_node(self, x) -> int:
        x = np.asarray(x, dtype=np.float64)
        idx = np.rint((x - self.lo) / self.h)
        if np.any(np.abs((x - self.lo) / self.h - idx) > 1e-6):
            raise ValueError(f"{x} is not a grid node")
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            raise ValueError(f"{x} outside the action box")
        return int(np.ravel_multi_index(tuple(int(v) for v in idx), self.shape))

    def value_at(self, x) -> float:
        return float(self.values[self.point_node(x)])


def _action_setup(spec, box, h, dt, reach_steps, omega):
    box = np.asarray(box, dtype=np.float64)
    shape = tuple(int(round((hi - lo) / h)) + 1 for lo, hi in box)
    lo = box[:, 0].copy()
    grids = np.meshgrid(
        *[lo[j] + h * np.arange(dim) for j, dim in enumerate(shape)], indexing="ij"
    )
    pts = np.stack([g.ravel() for g in grids], axis=1)
    offsets = velocity_offsets(spec.env.n_phys, reach_steps)
    table = LagrangianTable(spec)
    n = pts.shape[0]
    cost = np.full((n, offsets.shape[0]), np.inf)
    cost_nd = cost.reshape(shape + (offsets.shape[0],))
    for k, z in enumerate(offsets):
        step_vec = h * z.astype(np.float64)
        vel = step_vec / dt
        dst = tuple(slice(max(int(v), 0), dim + min(int(v), 0)) for v, dim in zip(z, shape))
        region = cost_nd[dst + (k,)]
        if region.size == 0:
            continue
        pts_nd = pts.reshape(shape + (spec.env.n_phys,))
        mids = pts_nd[dst].reshape(-1, spec.env.n_phys) - 0.5 * step_vec
        vals = dt * table.values(mids, vel, omega)
        cost_nd[dst + (k,)] = vals.reshape(region.shape)
    on_limit = (np.abs(offsets).max(axis=1) == reach_steps)
    return box, shape, lo, pts, offsets, cost, on_limit


def action_value(
    spec: HamiltonianSpec,
    omega: OmegaPoint,
    times,
    dt: float,
    h: float,
    box,
    reach_steps: int,
    cfl_tolerance: float = 0.01,
    watch_speed: float = None,
) -> list:
    """Value-iterate the minimal action from a point mass at the origin.

    Returns one ActionField per requested time (ascending).  The semigroup
    inequality h_{t+s} <= h_t (+) h_s holds exactly by construction: the
    t+s table is the composition of the sweeps.  A CflViolation signals
    that more than cfl_tolerance of the watched nodes picked a velocity on
    the stencil reach limit in the final sweep of a segment, so the
    minimizing velocity range is not represented there.  watch_speed
    restricts that census to |y|_inf <= watch_speed * t, the region whose
    endpoint costs are read; outside it, nodes near the kinematic frontier
    legitimately travel at the stencil limit.
    """
    times = sorted(float(t) for t in np.atleast_1d(times))
    for t in times:
        if abs(t / dt - round(t / dt)) > 1e-9:
            raise ValueError(f"time {t} is not a multiple of dt={dt}")
    box, shape, lo, pts, offsets, cost, on_limit = _action_setup(
        spec, box, h, dt, reach_steps, omega
    )
    u = np.full(pts.shape[0], np.inf)
    origin = int(np.ravel_multi_index(
        tuple(int(round(-l / h)) for l in lo), shape
    ))
    if np.any(np.abs(pts[origin]) > 1e-9):
        raise ValueError("the action box must contain the origin as a node")
    u[origin] = 0.0
    out = []
    done = 0.0
    for t in times:
        sweeps = int(round((t - done) / dt))
        watch = None
        if watch_speed is not None:
            watch = np.abs(pts).max(axis=1) <= watch_speed * t + 2.0 * h
        if sweeps > 0:
            u, frac = _kernels.value_iteration(
                cost, offsets, shape, on_limit, sweeps, u, watch
            )
        else:
            frac = 0.0
        done = t
        if frac > cfl_tolerance:
            raise CflViolation(frac)
        out.append(
            ActionField(
                spec=spec,
                omega=omega,
                time=t,
                dt=dt,
                h=h,
                box=box,
                shape=shape,
                lo=lo,
                values=u.copy(),
                reach_fraction=float(frac),
            )
        )
    return out


@dataclass
class EffectiveLagrangian:
    q_grid: np.ndarray
    values: np.ndarray
    per_time: np.ndarray  # (n_times, n_q) ensemble means of h_T(0, Tq)/T
    times: np.ndarray
    omega_count: int
    q_step: float
    q_reach: float

    def value_at(self, q) -> float:
        q = np.asarray(q, dtype=np.float64)
        idx = np.nonzero(np.all(np.abs(self.q_grid - q[None, :]) < 1e-9, axis=1))[0]
        if idx.size == 0:
            raise ValueError(f"{q} is not on the velocity grid")
        return float(self.values[idx[0]])

    def midpoint_convexity_defect(self) -> float:
        """Worst violation of discrete midpoint convexity along the axes."""
        side = int(round(self.q_grid.shape[0] ** (1.0 / self.q_grid.shape[1])))
        vals = self.values.reshape((side,) * self.q_grid.shape[1])
        worst = 0.0
        for ax in range(vals.ndim):
            v = np.moveaxis(vals, ax, 0)
            gap = 2.0 * v[1:-1] - v[:-2] - v[2:]
            worst = max(worst, float(gap.max(initial=-np.inf)))
        return worst


def effective_lagrangian(
    spec: HamiltonianSpec,
    q_reach: float = 1.0,
    q_step: float = 0.25,
    times=(30.0, 60.0),
    dt: float = 1.0,
    h: float = 0.25,
    omega_count: int = 4,
    box_pad: float = 6.0,
    velocity_margin: float = 0.5,
    cfl_tolerance: float = 0.01,
    omegas: list = None,
) -> EffectiveLagrangian:
    """Ensemble-averaged h_T(0, Tq)/T over the velocity grid with 1/T tail fit.

    The grid must be h/dt-aligned so endpoints T q land on nodes and the
    constant-velocity path is exactly representable; the stencil reach adds
    velocity_margin beyond the grid corner so maximizers stay interior.
    """
    n_dim = spec.env.n_phys
    vres = h / dt
    if abs(q_step / vres - round(q_step / vres)) > 1e-9:
        raise ValueError("q_step must be a multiple of the velocity resolution h/dt")
    q_grid = square_grid(n_dim, q_reach, q_step)
    times = np.asarray(sorted(float(t) for t in times))
    t_max = float(times[-1])
    reach_steps = int(np.ceil((q_reach * np.sqrt(n_dim) + velocity_margin) / vres))
    half = t_max * q_reach + box_pad
    box = [[-half, half]] * n_dim
    if omegas is None:
        omegas = spec.env.sample_ensemble(omega_count)
    per_time = np.zeros((len(times), q_grid.shape[0]))
    for om in omegas:
        fields = action_value(
            spec,
            om,
            times,
            dt,
            h,
            box,
            reach_steps,
            cfl_tolerance=cfl_tolerance,
            watch_speed=q_reach,
        )
        for ti, fld in enumerate(fields):
            t = times[ti]
            for qi, q in enumerate(q_grid):
                per_time[ti, qi] += fld.value_at(t * q) / t
    per_time /= len(omegas)
    if len(times) >= 2:
        t1, t2 = times[-2], times[-1]
        values = (t2 * per_time[-1] - t1 * per_time[-2]) / (t2 - t1)
    else:
        values = per_time[-1].copy()
    return EffectiveLagrangian(
        q_grid=q_grid,
        values=values,
        per_time=per_time,
        times=times,
        omega_count=len(omegas),
        q_step=q_step,
        q_reach=q_reach,
    )


@dataclass
class EffectiveHamiltonian:
    p_grid: np.ndarray
    values: np.ndarray
    p_step: float
    p_reach: float
    argmax_q: np.ndarray

    def value_at(self, p) -> float:
        p = np.asarray(p, dtype=np.float64)
        idx = np.nonzero(np.all(np.abs(self.p_grid - p[None, :]) < 1e-9, axis=1))[0]
        if idx.size == 0:
            raise ValueError(f"{p} is not on the momentum grid")
        return float(self.values[idx[0]])

    @property
    def minimum(self) -> float:
        return float(self.values.min())

    @property
    def argmin(self) -> np.ndarray:
        return self.p_grid[int(np.argmin(self.values))]

    def _lattice_shape(self):
        n_dim = self.p_grid.shape[1]
        side = int(round(self.p_grid.shape[0] ** (1.0 / n_dim)))
        return (side,) * n_dim

    def interpolate(self, p) -> float:
        """Multilinear interpolation of the table inside its hull."""
        p = np.asarray(p, dtype=np.float64)
        shape = self._lattice_shape()
        n_dim = len(shape)
        vals = self.values.reshape(shape)
        coord = (p + self.p_reach) / self.p_step
        base = np.floor(coord).astype(int)
        base = np.clip(base, 0, np.asarray(shape) - 2)
        frac = coord - base
        out = 0.0
        for corner in range(1 << n_dim):
            weight = 1.0
            idx = []
            for j in range(n_dim):
                bit = (corner >> j) & 1
                weight *= frac[j] if bit else (1.0 - frac[j])
                idx.append(base[j] + bit)
            out += weight * vals[tuple(idx)]
        return float(out)


def effective_hamiltonian(
    lagrangian: EffectiveLagrangian,
    p_reach: float = 1.0,
    p_step: float = 0.25,
) -> EffectiveHamiltonian:
    """Discrete Legendre transform max_q (<p, q> - Lbar(q)) on a momentum grid.

    Direct max over the velocity table: exact on grids, no conjugate-hull
    machinery needed at these sizes.  A maximizer on the velocity-grid edge
    means the transform is truncated; that raises BoundaryMax.
    """
    n_dim = lagrangian.q_grid.shape[1]
    p_grid = square_grid(n_dim, p_reach, p_step)
    scores = p_grid @ lagrangian.q_grid.T - lagrangian.values[None, :]
    best = np.argmax(scores, axis=1)
    values = scores[np.arange(p_grid.shape[0]), best]
    argmax_q = lagrangian.q_grid[best]
    edge = np.abs(argmax_q).max(axis=1) >= lagrangian.q_reach - 1e-9
    if np.any(edge):
        worst = p_grid[int(np.argmax(edge))]
        raise BoundaryMax(tuple(float(v) for v in worst))
    return EffectiveHamiltonian(
        p_grid=p_grid,
        values=values,
        p_step=p_step,
        p_reach=p_reach,
        argmax_q=argmax_q,
    )


def effective_support(
    hbar: EffectiveHamiltonian,
    a: float,
    q,
    direction_count: int = 256,
    tol: float = 1e-10,
) -> float:
    """Support value of the level-a sublevel of the effective Hamiltonian.

    Walks rays from the table argmin and bisects the interpolated boundary
    crossing: the raw lattice max over sublevel points undershoots by up to
    a grid step, which a radial root solve removes.  BoundaryMax flags a
    sublevel leaking through the momentum grid hull.
    """
    q = np.asarray(q, dtype=np.float64)
    if hbar.minimum > a + 1e-12:
        raise EmptyEffectiveSublevel(f"min effective Hamiltonian {hbar.minimum} above level {a}")
    center = hbar.argmin
    n_dim = hbar.p_grid.shape[1]
    if n_dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0.0, 2.0 * np.pi, direction_count, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    best = -np.inf
    for u in dirs:
        hull = np.inf
        for j in range(n_dim):
            if abs(u[j]) > 1e-12:
                lim = (hbar.p_reach - center[j]) / u[j] if u[j] > 0 else (-hbar.p_reach - center[j]) / u[j]
                hull = min(hull, lim)
        lo, hi = 0.0, hull
        if hbar.interpolate(center + hull * u) <= a:
            raise BoundaryMax(tuple(float(v) for v in center + hull * u))
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if hbar.interpolate(center + mid * u) <= a:
                lo = mid
            else:
                hi = mid
        best = max(best, float(q @ (center + lo * u)))
    return best


def shifted_critical_value(spec: HamiltonianSpec, momentum, **critical_kwargs):
    """Stationary critical value of the momentum-shifted Hamiltonian.

    Equals the effective Hamiltonian at that momentum, which the acceptance
    suite verifies on the Fenchel route.
    """
    from .asymptotics import stationary_critical_value

    shifted = spec.with_shift(momentum)
    return stationary_critical_value(shifted, **critical_kwargs)
