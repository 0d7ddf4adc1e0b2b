"""Property harness for the ergodic substrate.

Birkhoff spatial averages against torus integrals, stationary threshold
sets with volume fractions and dilation density tables, and the two
observable characterizations of admissible fields: sublinear growth and
zero-mean increments.  Verdicts are three-valued: asymptotic statements
checked at finite scale can come out inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .environment import OmegaPoint, TorusEnvironment
from .errors import EmptySample
from .hamiltonian import PotentialSpec

ACCEPTED = "accepted"
REJECTED = "rejected"
INCONCLUSIVE = "inconclusive"


def _disc_points(n_dim: int, radius: float, h: float) -> np.ndarray:
    ax = np.arange(-radius, radius + h / 2, h)
    grids = np.meshgrid(*[ax] * n_dim, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= radius + 1e-12]


@dataclass
class BirkhoffReport:
    radii: np.ndarray
    means: np.ndarray
    expected: float

    @property
    def tail_gap(self) -> float:
        return float(abs(self.means[-1] - self.expected))

    def to_json_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "means": self.means.tolist(),
            "expected": self.expected,
            "tail_gap": self.tail_gap,
        }


def birkhoff_average(
    env: TorusEnvironment,
    torus_fn: PotentialSpec,
    omega: OmegaPoint,
    radii,
    h: float = 0.1,
    chunk: int = 2_000_000,
) -> BirkhoffReport:
    """Spatial means of the realization over growing balls vs the torus mean."""
    radii = np.asarray(sorted(float(r) for r in np.atleast_1d(radii)))
    means = []
    for r in radii:
        pts = _disc_points(env.n_phys, r, h)
        total = 0.0
        count = 0
        for start in range(0, pts.shape[0], chunk):
            block = pts[start : start + chunk]
            z = env.orbit_coords(omega, block)
            total += float(torus_fn.values_at(z).sum())
            count += block.shape[0]
        means.append(total / count)
    return BirkhoffReport(radii=radii, means=np.asarray(means), expected=torus_fn.torus_mean())


# ---------------------------------------------------------------------------
# stationary threshold sets
# ---------------------------------------------------------------------------


@dataclass
class StationarySetSample:
    """Grid sample of X(omega) = {x : f(x, omega) in [lo, hi]} on a box."""

    env: TorusEnvironment
    field: PotentialSpec
    omega: OmegaPoint
    interval: tuple
    box: np.ndarray
    h: float
    shape: tuple
    corner: np.ndarray
    indicator: np.ndarray

    @property
    def volume_fraction(self) -> float:
        return float(self.indicator.mean())

    def grid_points(self) -> np.ndarray:
        grids = np.meshgrid(
            *[self.corner[j] + self.h * np.arange(dim) for j, dim in enumerate(self.shape)],
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)


def sample_threshold_set(
    env: TorusEnvironment,
    field: PotentialSpec,
    omega: OmegaPoint,
    interval,
    box,
    h: float,
) -> StationarySetSample:
    box = np.asarray(box, dtype=np.float64)
    lo, hi = float(interval[0]), float(interval[1])
    shape = tuple(int(round((b - a) / h)) + 1 for a, b in box)
    corner = box[:, 0].copy()
    grids = np.meshgrid(
        *[corner[j] + h * np.arange(dim) for j, dim in enumerate(shape)], indexing="ij"
    )
    pts = np.stack([g.ravel() for g in grids], axis=1)
    z = env.orbit_coords(omega, pts)
    vals = field.values_at(z)
    indicator = ((vals >= lo) & (vals <= hi)).reshape(shape)
    return StationarySetSample(
        env=env,
        field=field,
        omega=omega,
        interval=(lo, hi),
        box=box,
        h=h,
        shape=shape,
        corner=corner,
        indicator=indicator,
    )


@dataclass
class DensityTable:
    dilation_radii: np.ndarray
    ball_radii: np.ndarray
    ratios: np.ndarray  # (n_R, n_r)
    coverage_radii: dict  # epsilon -> least sampled R with tail ratio >= 1 - eps

    def to_json_dict(self) -> dict:
        return {
            "dilation_radii": self.dilation_radii.tolist(),
            "ball_radii": self.ball_radii.tolist(),
            "ratios": self.ratios.tolist(),
            "coverage_radii": {str(k): v for k, v in self.coverage_radii.items()},
        }


def density_asymptotics(
    sample: StationarySetSample,
    dilation_radii,
    ball_radii,
    epsilons=(0.2, 0.1, 0.05),
) -> DensityTable:
    """Table of |(X + B_R) cap B_r| / |B_r| on the sampled grid.

    Monotone nondecreasing in R by construction (dilations nest).  The
    coverage report lists, per epsilon, the least sampled R whose largest-r
    ratio reaches 1 - epsilon, mirroring the almost-sure spread of
    stationary sets.
    """
    if not sample.indicator.any():
        raise EmptySample("threshold set is empty on the sampled box")
    dilation_radii = np.asarray(sorted(float(r) for r in np.atleast_1d(dilation_radii)))
    ball_radii = np.asarray(sorted(float(r) for r in np.atleast_1d(ball_radii)))
    dist = ndimage.distance_transform_edt(~sample.indicator) * sample.h
    pts = sample.grid_points()
    rad = np.linalg.norm(pts, axis=1).reshape(sample.shape)
    if float(rad.min()) > sample.h:
        raise ValueError("the sample box must contain the origin region")
    ratios = np.zeros((len(dilation_radii), len(ball_radii)))
    for i, big_r in enumerate(dilation_radii):
        dilated = dist <= big_r + 1e-12
        for j, r in enumerate(ball_radii):
            ball = rad <= r + 1e-12
            ratios[i, j] = float(dilated[ball].mean())
    coverage = {}
    for eps in epsilons:
        hit = np.nonzero(ratios[:, -1] >= 1.0 - eps)[0]
        coverage[eps] = float(dilation_radii[hit[0]]) if hit.size else None
    return DensityTable(
        dilation_radii=dilation_radii,
        ball_radii=ball_radii,
        ratios=ratios,
        coverage_radii=coverage,
    )


# ---------------------------------------------------------------------------
# admissibility surrogates
# ---------------------------------------------------------------------------


@dataclass
class FieldSample:
    """A scalar field on a box grid, the observable proxy for a candidate."""

    values: np.ndarray
    shape: tuple
    corner: np.ndarray
    h: float

    def grid_points(self) -> np.ndarray:
        grids = np.meshgrid(
            *[self.corner[j] + self.h * np.arange(dim) for j, dim in enumerate(self.shape)],
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)

    def value_at(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        idx = np.rint((x - self.corner) / self.h).astype(int)
        return float(self.values.reshape(self.shape)[tuple(idx)])

    @classmethod
    def from_graph(cls, graph, values) -> "FieldSample":
        return cls(values=np.asarray(values), shape=graph.shape, corner=graph.lo, h=graph.h)

    @classmethod
    def from_callable(cls, fn, box, h) -> "FieldSample":
        box = np.asarray(box, dtype=np.float64)
        shape = tuple(int(round((b - a) / h)) + 1 for a, b in box)
        corner = box[:, 0].copy()
        grids = np.meshgrid(
            *[corner[j] + h * np.arange(dim) for j, dim in enumerate(shape)], indexing="ij"
        )
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return cls(values=np.apply_along_axis(fn, 1, pts), shape=shape, corner=corner, h=h)


@dataclass
class SublinearityReport:
    radii: np.ndarray
    profile: np.ndarray
    slope_vs_inverse_radius: float
    verdict: str

    def to_json_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "profile": self.profile.tolist(),
            "slope_vs_inverse_radius": self.slope_vs_inverse_radius,
            "verdict": self.verdict,
        }


def sublinearity_test(
    field: FieldSample,
    radii,
    halve_factor: float = 0.5,
    reject_factor: float = 0.8,
) -> SublinearityReport:
    """Radial growth profile max_{|x| ~ r} |u(x) - u(0)| / r.

    Accepted when the profile regressed against 1/r has nonnegative slope
    and its last value undercuts half its first; rejected when the profile
    barely decays; inconclusive in between.
    """
    radii = np.asarray(sorted(float(r) for r in np.atleast_1d(radii)))
    pts = field.grid_points()
    vals = field.values - field.value_at(np.zeros(len(field.shape)))
    rad = np.linalg.norm(pts, axis=1)
    profile = []
    for r in radii:
        shell = np.abs(rad - r) <= field.h
        if not shell.any():
            raise ValueError(f"no grid nodes on the shell of radius {r}")
        profile.append(float(np.abs(vals[shell]).max()) / r)
    profile = np.asarray(profile)
    inv = 1.0 / radii
    slope = float(np.polyfit(inv, profile, 1)[0])
    if slope >= 0.0 and profile[-1] < halve_factor * profile[0]:
        verdict = ACCEPTED
    elif profile[-1] >= reject_factor * profile[0]:
        verdict = REJECTED
    else:
        verdict = INCONCLUSIVE
    return SublinearityReport(
        radii=radii, profile=profile, slope_vs_inverse_radius=slope, verdict=verdict
    )


@dataclass
class MeanIncrementReport:
    x: np.ndarray
    y: np.ndarray
    mean: float
    standard_error: float
    count: int
    verdict: str

    def to_json_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "mean": self.mean,
            "standard_error": self.standard_error,
            "count": self.count,
            "verdict": self.verdict,
        }


def mean_increment_test(fields, x, y, min_count: int = 8) -> MeanIncrementReport:
    """Ensemble mean of u(y, omega) - u(x, omega) with its standard error.

    Zero-mean (accepted) when |mean| <= 3 SE.  All fields must share the
    normalization u(0, omega) = 0; the increment is translation-free so
    that only matters for reporting.
    """
    fields = list(fields)
    if len(fields) < min_count:
        raise ValueError(f"need at least {min_count} ensemble members, got {len(fields)}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diffs = np.array([f.value_at(y) - f.value_at(x) for f in fields])
    mean = float(diffs.mean())
    se = float(diffs.std(ddof=1) / np.sqrt(len(diffs))) if len(diffs) > 1 else 0.0
    verdict = ACCEPTED if abs(mean) <= 3.0 * se or mean == 0.0 else REJECTED
    return MeanIncrementReport(
        x=x, y=y, mean=mean, standard_error=se, count=len(diffs), verdict=verdict
    )
