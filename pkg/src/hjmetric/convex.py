"""Convex geometry in the momentum variable.

Support functions of Hamiltonian sublevels, the Lagrangian obtained through
the convex conjugate, and the gauge identity tying the two together.  The
supported Hamiltonian forms admit closed forms; a polar-bisection solver is
kept alongside for validation and for future non-ball sublevels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySublevel
from .hamiltonian import HamiltonianSpec
from .environment import OmegaPoint

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _sqrt_level(a: float, v: np.ndarray, level_floor: float = 0.0):
    """sqrt(a + V^2) with an EmptySublevel signal where the radicand is negative."""
    rad = a + v * v
    bad = rad < -level_floor
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise EmptySublevel(a, where=idx)
    return np.sqrt(np.maximum(rad, 0.0))


@dataclass(frozen=True)
class SublevelGeometry:
    """Momentum sublevel geometry of a Hamiltonian at a fixed level.

    direction_count controls the polar resolution of the general solver;
    the closed-form path ignores it.
    """

    spec: HamiltonianSpec
    a: float
    direction_count: int = 256

    @property
    def kappa(self) -> float:
        return self.spec.kappa(self.a)

    # -- closed forms -----------------------------------------------------------

    def support_many(self, points: np.ndarray, q, omega: OmegaPoint) -> np.ndarray:
        """Support value of the a-sublevel in direction q at a batch of points.

        For the eikonal family the sublevel is a ball centered at the drift
        (translated by the momentum shift), so the support is
        <b - P, q> + |q| sqrt(a + V^2).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        q = np.asarray(q, dtype=np.float64)
        qn = float(np.linalg.norm(q))
        v = self.spec.potential_values(pts, omega)
        radius = _sqrt_level(self.a, v)
        out = qn * radius
        if self.spec.form == "eikonal_drift":
            b = self.spec.drift_values(pts, omega)
            out = out + b @ q
        shift = self.spec.shift
        if shift.any():
            out = out - float(shift @ q)
        return out

    def support(self, x, q, omega: OmegaPoint) -> float:
        return float(self.support_many(np.asarray(x)[None, :], q, omega)[0])

    def support_batch_q(self, x, qs: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        """Support values at one point for many directions (rows of qs)."""
        x = np.asarray(x, dtype=np.float64)[None, :]
        qs = np.atleast_2d(np.asarray(qs, dtype=np.float64))
        v = self.spec.potential_values(x, omega)[0]
        radius = float(_sqrt_level(self.a, np.array([v]))[0])
        out = np.linalg.norm(qs, axis=1) * radius
        if self.spec.form == "eikonal_drift":
            b = self.spec.drift_values(x, omega)[0]
            out = out + qs @ b
        if self.spec.shift.any():
            out = out - qs @ self.spec.shift
        return out

    # -- general validation path --------------------------------------------------

    def _directions(self) -> np.ndarray:
        n = self.spec.env.n_phys
        m = self.direction_count
        if n == 1:
            return np.array([[1.0], [-1.0]])
        if n == 2:
            ang = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
            return np.stack([np.cos(ang), np.sin(ang)], axis=1)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(7)))
        u = rng.normal(size=(m, n))
        return u / np.linalg.norm(u, axis=1, keepdims=True)

    def support_general(self, x, q, omega: OmegaPoint, tol: float = 1e-10) -> float:
        """Polar solver: bisect H(p0 + r u) = a along boundary directions.

        p0 is the pointwise minimizer of H; convexity makes H nondecreasing
        in r along every ray from it.  Angular error is about (pi/M)^2 / 2
        relative.
        """
        x = np.asarray(x, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        pmin = float(self.spec.pointwise_min(x[None, :], omega)[0])
        if self.a < pmin:
            raise EmptySublevel(self.a, where=tuple(x))
        if self.spec.form == "eikonal_drift":
            p0 = self.spec.drift_values(x[None, :], omega)[0] - self.spec.shift
        else:
            p0 = -self.spec.shift
        hi0 = self.kappa + 1.0
        best = -np.inf
        for u in self._directions():
            lo, hi = 0.0, hi0
            if self.spec.eval(x, p0 + hi * u, omega) <= self.a:
                r = hi
            else:
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    if self.spec.eval(x, p0 + mid * u, omega) <= self.a:
                        lo = mid
                    else:
                        hi = mid
                r = lo
            best = max(best, float(q @ (p0 + r * u)))
        return best

    # -- nesting ----------------------------------------------------------------

    def gap_below(self, b: float) -> float:
        """Certified delta with sublevel(a) + B_delta inside sublevel(b), b > a."""
        if b <= self.a:
            raise ValueError("need b > a")
        vmax = self.spec.potential.v_max()
        return (b - self.a) / (2.0 * np.sqrt(b + vmax * vmax))


# -- Lagrangian ------------------------------------------------------------------


@dataclass(frozen=True)
class LagrangianTable:
    """Closed-form convex conjugate of the Hamiltonian in the momentum slot.

    For the eikonal family L(x, q, omega) = |q|^2/4 + V^2 + <b - P, q>.
    """

    spec: HamiltonianSpec

    def values(self, points: np.ndarray, q, omega: OmegaPoint) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        q = np.asarray(q, dtype=np.float64)
        v = self.spec.potential_values(pts, omega)
        out = 0.25 * float(q @ q) + v * v
        if self.spec.form == "eikonal_drift":
            out = out + self.spec.drift_values(pts, omega) @ q
        if self.spec.shift.any():
            out = out - float(self.spec.shift @ q)
        return out

    def value(self, x, q, omega: OmegaPoint) -> float:
        return float(self.values(np.asarray(x)[None, :], q, omega)[0])

    def values_batch_q(self, x, qs: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)[None, :]
        qs = np.atleast_2d(np.asarray(qs, dtype=np.float64))
        v = float(self.spec.potential_values(x, omega)[0])
        out = 0.25 * np.sum(qs * qs, axis=1) + v * v
        if self.spec.form == "eikonal_drift":
            b = self.spec.drift_values(x, omega)[0]
            out = out + qs @ b
        if self.spec.shift.any():
            out = out - qs @ self.spec.shift
        return out

    def conjugate_on_grid(self, x, p, omega: OmegaPoint, q_grid: np.ndarray) -> float:
        """Discrete double transform max_q(<p,q> - L); recovers H up to grid error."""
        p = np.asarray(p, dtype=np.float64)
        vals = q_grid @ p - self.values_batch_q(x, q_grid, omega)
        return float(np.max(vals))

    def write_csv(self, path, points: np.ndarray, q, omega: OmegaPoint) -> None:
        """Debug dump of sampled values along one velocity direction."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        vals = self.values(pts, q, omega)
        names = ["x", "y", "z"][: pts.shape[1]]
        header = ",".join(names + ["lagrangian"])
        np.savetxt(path, np.column_stack([pts, vals]), delimiter=",", header=header, comments="")


def support_from_lagrangian(
    geom: SublevelGeometry,
    table: LagrangianTable,
    x,
    q,
    omega: OmegaPoint,
    tol: float = 1e-12,
) -> float:
    """Gauge identity route: inf over lam > 0 of (L(x, lam q) + a) / lam.

    Golden-section search on log lam; agrees with the support function for
    convex superlinear data.  Levels below the pointwise minimum make the
    infimum diverge to -inf, which is the empty-sublevel signal.
    """
    x = np.asarray(x, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    pmin = float(geom.spec.pointwise_min(x[None, :], omega)[0])
    if geom.a < pmin - 1e-15 * max(1.0, abs(geom.a)):
        raise EmptySublevel(geom.a, where=tuple(x))
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        return 0.0

    def objective(loglam: float) -> float:
        lam = np.exp(loglam)
        return (table.value(x, lam * q, omega) + geom.a) / lam

    lo, hi = np.log(1e-8), np.log(max(1.0, 8.0 * (geom.kappa + 1.0) / qn) * 64.0)
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = objective(c), objective(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = objective(d)
    return float(min(fc, fd))
