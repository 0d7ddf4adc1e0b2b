"""Stationary Hamiltonian families on the torus environment.

Supported forms are eikonal, H = |p|^2 - V(x,omega)^2, and eikonal with a
drift, H = |p - b(x,omega)|^2 - V^2, with V and b built from closed-form
trigonometric data so stationarity holds by construction rather than by
user promise.  A momentum shift P turns H into H(x, P + p, omega).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environment import OmegaPoint, TorusEnvironment

TWO_PI = 2.0 * np.pi

POTENTIAL_KINDS = ("constant", "single_cosine_1d", "product_quasiperiodic", "user_trigonometric")
FORMS = ("eikonal", "eikonal_drift")


@dataclass(frozen=True)
class TrigSum:
    """Finite Fourier sum c0 + sum_t [a_t cos(2 pi <k_t, z>) + b_t sin(2 pi <k_t, z>)].

    k_t are integer multi-indices over the torus coordinates.  The l1 bound
    c0 + sum sqrt(a^2 + b^2) dominates the sup norm.
    """

    c0: float
    harmonics: tuple = ()  # entries (k tuple, a, b)

    def value(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        out = np.full(z.shape[0], float(self.c0))
        for k, a, b in self.harmonics:
            phase = TWO_PI * (z @ np.asarray(k, dtype=np.float64))
            if a:
                out = out + a * np.cos(phase)
            if b:
                out = out + b * np.sin(phase)
        return out

    def amplitude_sum(self) -> float:
        return float(sum(np.hypot(a, b) for _, a, b in self.harmonics))

    def upper_bound(self) -> float:
        return float(self.c0) + self.amplitude_sum()

    def lower_bound(self) -> float:
        return float(self.c0) - self.amplitude_sum()

    def mean(self) -> float:
        """Torus integral; every nonconstant harmonic averages out."""
        return float(self.c0)

    def to_coeffs(self) -> dict:
        return {
            "c0": float(self.c0),
            "terms": [
                {"k": [int(v) for v in k], "a": float(a), "b": float(b)}
                for k, a, b in self.harmonics
            ],
        }

    @classmethod
    def from_coeffs(cls, data: dict) -> "TrigSum":
        terms = tuple(
            (tuple(int(v) for v in t["k"]), float(t.get("a", 0.0)), float(t.get("b", 0.0)))
            for t in data.get("terms", [])
        )
        return cls(c0=float(data.get("c0", 0.0)), harmonics=terms)


def _product_base(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 2.0 - np.cos(TWO_PI * u) - np.cos(TWO_PI * v)


@dataclass(frozen=True)
class PotentialSpec:
    """Closed-form nonnegative stationary potential V(x, omega).

    kind:
        constant              V = coeffs[0]
        single_cosine_1d      V = amp * |sin(pi z_1)|, one torus coordinate
        product_quasiperiodic V = base(z1,z2) * base(z3,z4) on the 4-torus,
                              base(u,v) = 2 - cos(2 pi u) - cos(2 pi v)
        user_trigonometric    V = finite Fourier sum, validated nonnegative
                              through its l1 coefficient bound
    """

    kind: str
    coeffs: object = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "constant":
            c = float(self.coeffs if np.isscalar(self.coeffs) else self.coeffs[0])
            if c < 0:
                raise ValueError("constant potential must be nonnegative")
            object.__setattr__(self, "coeffs", c)
        elif self.kind == "single_cosine_1d":
            amp = 1.0 if self.coeffs is None else float(
                self.coeffs if np.isscalar(self.coeffs) else self.coeffs[0]
            )
            if amp < 0:
                raise ValueError("amplitude must be nonnegative")
            object.__setattr__(self, "coeffs", amp)
        elif self.kind == "user_trigonometric":
            trig = self.coeffs if isinstance(self.coeffs, TrigSum) else TrigSum.from_coeffs(self.coeffs)
            if trig.lower_bound() < 0:
                raise ValueError(
                    "trigonometric potential not certified nonnegative: "
                    f"c0={trig.c0} < amplitude sum {trig.amplitude_sum()}"
                )
            object.__setattr__(self, "coeffs", trig)

    def required_dim(self) -> int | None:
        if self.kind == "product_quasiperiodic":
            return 4
        if self.kind == "single_cosine_1d":
            return None  # uses the first coordinate only
        if self.kind == "user_trigonometric":
            ks = [len(k) for k, _, _ in self.coeffs.harmonics]
            return max(ks) if ks else None
        return None

    def values_at(self, z: np.ndarray) -> np.ndarray:
        """Evaluate V on torus coordinates z of shape (n, d)."""
        z = np.atleast_2d(z)
        if self.kind == "constant":
            return np.full(z.shape[0], self.coeffs)
        if self.kind == "single_cosine_1d":
            return self.coeffs * np.abs(np.sin(np.pi * z[:, 0]))
        if self.kind == "product_quasiperiodic":
            return _product_base(z[:, 0], z[:, 1]) * _product_base(z[:, 2], z[:, 3])
        return self.coeffs.value(z)

    def zgrad_at(self, z: np.ndarray) -> np.ndarray:
        """Partial derivatives of V in the torus coordinates, shape (n, d)."""
        z = np.atleast_2d(z)
        n, d = z.shape
        out = np.zeros((n, d))
        if self.kind == "constant":
            return out
        if self.kind == "single_cosine_1d":
            # d|sin(pi z)|/dz = pi cos(pi z) sign(sin(pi z))
            s = np.sin(np.pi * z[:, 0])
            out[:, 0] = self.coeffs * np.pi * np.cos(np.pi * z[:, 0]) * np.sign(s)
            return out
        if self.kind == "product_quasiperiodic":
            f = _product_base(z[:, 0], z[:, 1])
            g = _product_base(z[:, 2], z[:, 3])
            out[:, 0] = TWO_PI * np.sin(TWO_PI * z[:, 0]) * g
            out[:, 1] = TWO_PI * np.sin(TWO_PI * z[:, 1]) * g
            out[:, 2] = TWO_PI * np.sin(TWO_PI * z[:, 2]) * f
            out[:, 3] = TWO_PI * np.sin(TWO_PI * z[:, 3]) * f
            return out
        for k, a, b in self.coeffs.harmonics:
            kv = np.asarray(k, dtype=np.float64)
            phase = TWO_PI * (z @ kv)
            term = -a * np.sin(phase) + b * np.cos(phase)
            out += TWO_PI * term[:, None] * kv[None, :]
        return out

    def v_max(self) -> float:
        """Sound sup bound from coefficient sums, not sampling."""
        if self.kind == "constant":
            return self.coeffs
        if self.kind == "single_cosine_1d":
            return self.coeffs
        if self.kind == "product_quasiperiodic":
            return 16.0
        return self.coeffs.upper_bound()

    def torus_mean(self) -> float:
        """Exact integral of the realization over the torus."""
        if self.kind == "constant":
            return self.coeffs
        if self.kind == "single_cosine_1d":
            return self.coeffs * 2.0 / np.pi
        if self.kind == "product_quasiperiodic":
            return 4.0  # each factor averages to 2, on independent coordinates
        return self.coeffs.mean()

    def describe(self) -> dict:
        if self.kind == "user_trigonometric":
            return {"kind": self.kind, "coeffs": self.coeffs.to_coeffs()}
        if self.kind == "product_quasiperiodic":
            return {"kind": self.kind, "coeffs": []}
        return {"kind": self.kind, "coeffs": [self.coeffs]}


@dataclass(frozen=True)
class HamiltonianSpec:
    """Convex coercive stationary Hamiltonian with optional drift and shift."""

    env: TorusEnvironment
    form: str
    potential: PotentialSpec
    shift: np.ndarray = None
    drift: tuple = None  # one TrigSum per physical component, eikonal_drift only

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown Hamiltonian form {self.form!r}")
        n = self.env.n_phys
        shift = np.zeros(n) if self.shift is None else np.asarray(self.shift, dtype=np.float64)
        if shift.shape != (n,):
            raise ValueError(f"shift must have length {n}")
        object.__setattr__(self, "shift", shift)
        need = self.potential.required_dim()
        if need is not None and self.env.dim < need:
            raise ValueError(
                f"potential kind {self.potential.kind!r} needs a torus of dimension >= {need}"
            )
        if self.form == "eikonal_drift":
            if self.drift is None:
                raise ValueError("eikonal_drift needs a drift field")
            drift = tuple(
                t if isinstance(t, TrigSum) else TrigSum.from_coeffs(t) for t in self.drift
            )
            if len(drift) != n:
                raise ValueError(f"drift needs {n} components")
            object.__setattr__(self, "drift", drift)
        elif self.drift is not None:
            raise ValueError("drift is only meaningful for the eikonal_drift form")

    # -- stationary data ------------------------------------------------------

    def potential_values(self, points: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        z = self.env.orbit_coords(omega, points)
        return self.potential.values_at(z)

    def drift_values(self, points: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        """Drift vectors at a batch of points, shape (n, N); zeros when driftless."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.form != "eikonal_drift":
            return np.zeros((pts.shape[0], self.env.n_phys))
        z = self.env.orbit_coords(omega, pts)
        return np.stack([t.value(z) for t in self.drift], axis=1)

    def drift_bound(self) -> float:
        if self.form != "eikonal_drift":
            return 0.0
        return float(np.sqrt(sum(t.upper_bound() ** 2 for t in self.drift)))

    # -- evaluation -----------------------------------------------------------

    def eval(self, x, p, omega: OmegaPoint) -> float:
        """H(x, p, omega), including the momentum shift."""
        x = np.asarray(x, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64) + self.shift
        v = self.potential_values(x[None, :], omega)[0]
        if self.form == "eikonal_drift":
            b = self.drift_values(x[None, :], omega)[0]
            return float(np.sum((p - b) ** 2) - v * v)
        return float(np.sum(p * p) - v * v)

    def eval_many(self, points: np.ndarray, p, omega: OmegaPoint) -> np.ndarray:
        """H at a batch of points for a fixed momentum."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        p = np.asarray(p, dtype=np.float64) + self.shift
        v = self.potential_values(pts, omega)
        if self.form == "eikonal_drift":
            b = self.drift_values(pts, omega)
            return np.sum((p[None, :] - b) ** 2, axis=1) - v * v
        return float(np.sum(p * p)) - v * v

    def eval_field(self, points: np.ndarray, momenta: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        """H at a batch of (point, momentum) pairs, rows aligned."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        p = np.atleast_2d(np.asarray(momenta, dtype=np.float64)) + self.shift[None, :]
        v = self.potential_values(pts, omega)
        if self.form == "eikonal_drift":
            p = p - self.drift_values(pts, omega)
        return np.sum(p * p, axis=1) - v * v

    def pointwise_min(self, points: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        """min_p H(x, p, omega) = -V(x, omega)^2, attained at p = -shift (+ drift)."""
        v = self.potential_values(points, omega)
        return -(v * v)

    def stiffness_scale(self, points: np.ndarray, omega: OmegaPoint) -> np.ndarray:
        """Nodewise |grad_x (V^2)|, the first-order error scale of gradient
        residual checks on grids (plus a drift-variation term when present)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        z = self.env.orbit_coords(omega, pts)
        v = self.potential.values_at(z)
        grad_x = self.potential.zgrad_at(z) @ self.env.flow_matrix
        scale = 2.0 * v * np.linalg.norm(grad_x, axis=1)
        if self.form == "eikonal_drift":
            wobble = sum(
                TWO_PI * np.hypot(a, b) * float(np.linalg.norm(np.asarray(k, dtype=np.float64)))
                for t in self.drift
                for k, a, b in t.harmonics
            )
            flow_gain = float(np.linalg.norm(self.env.flow_matrix, 2))
            scale = scale + 2.0 * self.kappa(self.beta_bound(0.0)) * wobble * flow_gain
        return scale

    def sup_pointwise_min(self, omega: OmegaPoint, box, resolution: float) -> float:
        """Max of the pointwise minimum over a sampled box.

        Monotone nondecreasing as the box grows; a lower bound for the free
        critical value.
        """
        box = np.asarray(box, dtype=np.float64)
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        axes = [np.arange(lo, hi + resolution / 2, resolution) for lo, hi in box]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return float(np.max(self.pointwise_min(pts, omega)))

    # -- structural bounds -----------------------------------------------------

    def kappa(self, a: float) -> float:
        """Global momentum-radius bound for the a-sublevel, from l1 data bounds."""
        root = a + self.potential.v_max() ** 2
        core = np.sqrt(root) if root > 0 else 0.0
        return float(core + self.drift_bound() + np.linalg.norm(self.shift))

    def lipschitz_p(self, radius: float) -> float:
        """Lipschitz constant of p -> H on the ball of the given radius."""
        reach = radius + 2.0 + self.drift_bound() + np.linalg.norm(self.shift)
        return float(max(reach * reach, self.potential.v_max() ** 2))

    def coercivity_witnesses(self) -> dict:
        """Superlinear envelope records alpha(|p|) <= H <= beta(|p|)."""
        vmax = self.potential.v_max()
        off = self.drift_bound() + float(np.linalg.norm(self.shift))
        return {
            "alpha": {"kind": "shifted_square", "inner_shift": off, "offset": -vmax * vmax},
            "beta": {"kind": "shifted_square", "inner_shift": -off, "offset": 0.0},
        }

    def alpha_bound(self, s: float) -> float:
        off = self.drift_bound() + float(np.linalg.norm(self.shift))
        return max(s - off, 0.0) ** 2 - self.potential.v_max() ** 2

    def beta_bound(self, s: float) -> float:
        off = self.drift_bound() + float(np.linalg.norm(self.shift))
        return (s + off) ** 2

    # -- derived specs -----------------------------------------------------------

    def with_shift(self, P) -> "HamiltonianSpec":
        return HamiltonianSpec(
            env=self.env,
            form=self.form,
            potential=self.potential,
            shift=np.asarray(P, dtype=np.float64),
            drift=self.drift,
        )

    def describe(self) -> dict:
        out = {
            "form": self.form,
            "potential": self.potential.describe(),
            "shift": self.shift.tolist(),
        }
        if self.drift is not None:
            out["drift"] = [t.to_coeffs() for t in self.drift]
        return out
