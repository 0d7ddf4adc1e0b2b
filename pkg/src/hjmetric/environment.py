"""Torus realization of the ergodic environment.

The probability space is a d-torus with uniform measure; the translation
group acts linearly, coordinate i moving as omega_i + <v_i, x> mod 1 for a
fixed d x N matrix of flow rows v_i.  Irrational, rationally independent
rows give an ergodic flow; the library assumes but does not verify this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class OmegaPoint:
    """A sampled point of the torus environment; coordinates live in [0, 1)."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        object.__setattr__(self, "coords", c)
        if c.ndim != 1:
            raise ValueError("omega coordinates must be a flat vector")
        if np.any(c < 0.0) or np.any(c >= 1.0):
            raise ValueError("omega coordinates must lie in [0, 1)")

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


def _frac(x: np.ndarray) -> np.ndarray:
    """Fractional part mapped into [0, 1); exact on integer inputs."""
    out = x - np.floor(x)
    # floor(x) == x gives 0 exactly; guard the x = -eps case where the
    # subtraction rounds to 1.0.
    return np.where(out >= 1.0, 0.0, out)


@dataclass(frozen=True)
class TorusEnvironment:
    """Linear torus flow (tau_x omega)_i = omega_i + <v_i, x> mod 1.

    flow_matrix has one row per torus coordinate (shape d x N where N is the
    physical dimension).  Sampling uses a counter-based generator keyed by
    (seed, k), so ensembles are reproducible and order independent.
    """

    flow_matrix: np.ndarray
    seed: int = 0

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.flow_matrix, dtype=np.float64))
        object.__setattr__(self, "flow_matrix", m)
        if m.ndim != 2 or m.size == 0:
            raise ValueError("flow_matrix must be a nonempty d x N matrix")

    @property
    def dim(self) -> int:
        """Torus dimension d."""
        return self.flow_matrix.shape[0]

    @property
    def n_phys(self) -> int:
        """Physical dimension N."""
        return self.flow_matrix.shape[1]

    # -- sampling -----------------------------------------------------------

    def sample_omega(self, k: int) -> OmegaPoint:
        """Draw the k-th ensemble point, uniform on the torus.

        Deterministic given (seed, k) and independent of draw order: the
        underlying Philox stream is keyed by the seed with the counter set
        from k.
        """
        bitgen = np.random.Philox(key=np.uint64(self.seed), counter=[0, 0, 0, np.uint64(k)])
        gen = np.random.Generator(bitgen)
        return OmegaPoint(gen.random(self.dim))

    def sample_ensemble(self, count: int) -> list[OmegaPoint]:
        return [self.sample_omega(k) for k in range(count)]

    # -- translation --------------------------------------------------------

    def translate(self, omega: OmegaPoint, x) -> OmegaPoint:
        """Apply tau_x to omega."""
        x = np.asarray(x, dtype=np.float64)
        return OmegaPoint(_frac(omega.coords + self.flow_matrix @ x))

    def orbit_coords(self, omega: OmegaPoint, points: np.ndarray) -> np.ndarray:
        """Torus coordinates of tau_x omega for a batch of physical points.

        points has shape (n, N); the result has shape (n, d).
        """
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        return _frac(omega.coords[None, :] + pts @ self.flow_matrix.T)

    # -- stock environments --------------------------------------------------

    @classmethod
    def quasiperiodic_2d(cls, lam: float = GOLDEN_RATIO, seed: int = 0) -> "TorusEnvironment":
        """T^4 environment over R^2 with rows (1,0), (lam,0), (0,1), (0,lam).

        lam defaults to the golden ratio; any irrational slope gives an
        ergodic flow, the golden one equidistributes fastest.
        """
        rows = [[1.0, 0.0], [lam, 0.0], [0.0, 1.0], [0.0, lam]]
        return cls(flow_matrix=np.array(rows), seed=seed)

    @classmethod
    def line(cls, seed: int = 0) -> "TorusEnvironment":
        """1-torus over R^1 moved at unit speed (periodic realization)."""
        return cls(flow_matrix=np.array([[1.0]]), seed=seed)

    @classmethod
    def still(cls, n_phys: int = 2, seed: int = 0) -> "TorusEnvironment":
        """Trivial flow; realizations do not depend on x (constant data)."""
        return cls(flow_matrix=np.zeros((1, n_phys)), seed=seed)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "n_phys": self.n_phys,
            "flow_matrix": self.flow_matrix.tolist(),
            "seed": int(self.seed),
        }
