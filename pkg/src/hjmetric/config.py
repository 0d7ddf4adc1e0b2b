"""Run configuration: one structured JSON file with dotted-path overrides.

Every command records the fully resolved configuration into its output, so
a summary file pins the run.  The schema round-trips unchanged through
from_dict / to_dict.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .environment import GOLDEN_RATIO, TorusEnvironment
from .errors import ConfigError
from .hamiltonian import HamiltonianSpec, PotentialSpec

DEFAULTS = {
    "torus": {
        "dim": 4,
        "flow_matrix": [
            [1.0, 0.0],
            [GOLDEN_RATIO, 0.0],
            [0.0, 1.0],
            [0.0, GOLDEN_RATIO],
        ],
        "seed": 12345,
    },
    "hamiltonian": {
        "form": "eikonal",
        "potential": {"kind": "product_quasiperiodic", "coeffs": []},
        "shift": [0.0, 0.0],
        "drift": None,
    },
    "grid": {"box": [[-10.0, 10.0], [-10.0, 10.0]], "h": 0.25, "stencil_radius": 3},
    "scales": [20.0, 50.0, 100.0, 200.0],
    "ensemble": {"omega_count": 8, "seed": None},
    "tolerances": {
        "tol": 0.04,
        "theta": None,
        "theta_floor": 0.02,
        "delta": 0.25,
        "epsilon": None,
        "slack_constant": 10.0,
        "degeneracy_threshold": 0.1,
    },
    "stable_norm": {"direction_count": 16, "pad_frac": 0.2, "pad_min": 4.0},
    "effective": {
        "q_reach": 1.0,
        "q_step": 0.25,
        "p_reach": 0.25,
        "p_step": 0.25,
        "times": [40.0, 80.0],
        "dt": 2.0,
        "h": 0.5,
        "box_pad": 4.0,
        "velocity_margin": 1.0,
    },
    "ergodic": {
        "radii": [50.0, 100.0, 200.0],
        "birkhoff_h": 0.1,
        "threshold": [0.0, 1.0],
        "dilation_radii": [0.0, 0.5, 1.0, 2.0, 4.0, 8.0],
        "ball_radii": [10.0, 25.0],
    },
    "output": "out",
}


def _deep_update(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in patch.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _positive(name: str, value) -> None:
    if not (isinstance(value, (int, float)) and value > 0):
        raise ConfigError(f"{name} must be positive, got {value!r}")


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        data = _deep_update(DEFAULTS, raw or {})
        cfg = cls(data=data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def validate(self) -> None:
        _positive("grid.h", self.data["grid"]["h"])
        _positive("grid.stencil_radius", self.data["grid"]["stencil_radius"])
        _positive("ensemble.omega_count", self.data["ensemble"]["omega_count"])
        _positive("tolerances.tol", self.data["tolerances"]["tol"])
        _positive("tolerances.delta", self.data["tolerances"]["delta"])
        _positive("effective.dt", self.data["effective"]["dt"])
        _positive("effective.h", self.data["effective"]["h"])
        box = np.asarray(self.data["grid"]["box"], dtype=np.float64)
        if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
            raise ConfigError(f"grid.box must be a list of [lo, hi] pairs, got {box.tolist()}")
        if not self.data["scales"]:
            raise ConfigError("scales must be nonempty")
        for s in self.data["scales"]:
            _positive("scales entry", s)

    def apply_override(self, dotted: str, value_text: str) -> None:
        """Apply a --set key.path=value override; values parse as JSON."""
        try:
            value = json.loads(value_text)
        except json.JSONDecodeError:
            value = value_text
        node = self.data
        parts = dotted.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config group {dotted!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        node[parts[-1]] = value
        self.validate()

    # -- builders -------------------------------------------------------------

    @property
    def sampling_seed(self) -> int:
        ens = self.data["ensemble"].get("seed")
        return int(ens if ens is not None else self.data["torus"]["seed"])

    def environment(self) -> TorusEnvironment:
        torus = self.data["torus"]
        flow = np.asarray(torus["flow_matrix"], dtype=np.float64)
        if flow.shape[0] != torus["dim"]:
            raise ConfigError(
                f"torus.dim={torus['dim']} does not match flow_matrix rows {flow.shape[0]}"
            )
        return TorusEnvironment(flow_matrix=flow, seed=self.sampling_seed)

    def hamiltonian(self) -> HamiltonianSpec:
        ham = self.data["hamiltonian"]
        pot = ham["potential"]
        coeffs = pot.get("coeffs")
        if pot["kind"] in ("constant", "single_cosine_1d") and isinstance(coeffs, list):
            coeffs = coeffs[0] if coeffs else None
        if pot["kind"] == "product_quasiperiodic":
            coeffs = None
        try:
            potential = PotentialSpec(pot["kind"], coeffs)
            return HamiltonianSpec(
                env=self.environment(),
                form=ham["form"],
                potential=potential,
                shift=np.asarray(ham.get("shift") or [], dtype=np.float64)
                if ham.get("shift")
                else None,
                drift=tuple(ham["drift"]) if ham.get("drift") else None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> tuple:
        g = self.data["grid"]
        return (
            np.asarray(g["box"], dtype=np.float64),
            float(g["h"]),
            int(g["stencil_radius"]),
        )
