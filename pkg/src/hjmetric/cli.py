"""Batch command line: distance, stable-norm, critical, effective,
corrector, ergodic-check, example61.

Every command reads one JSON config (overridable with --set key=value),
writes summary.json plus CSV detail files into --out, and is deterministic
given the config: reruns with a fixed seed produce byte-identical JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, effective, ergodic, lax, metric
from .config import RunConfig
from .environment import OmegaPoint
from .errors import ConfigError, EmptySublevel, HjMetricError, NegativeCycle

EXIT_OK = 0
EXIT_LEVEL_INFEASIBLE = 2
EXIT_CONFIG = 3


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _summary(cfg: RunConfig, command: str, body: dict) -> dict:
    return {"command": command, "config": cfg.to_dict(), "result": body}


def _parse_point(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.split(",")], dtype=np.float64)


def _grid_csv(path: Path, grid: np.ndarray, values: np.ndarray, value_name: str) -> None:
    names = ["x", "y", "z"][: grid.shape[1]]
    header = ",".join(names + [value_name])
    np.savetxt(path, np.column_stack([grid, values]), delimiter=",", header=header, comments="")


def _write_profiles_dat(path: Path, est) -> None:
    """Gnuplot-friendly blocks: one (scale, ensemble mean) table per direction."""
    with open(path, "w") as fh:
        for e in est.estimates:
            fh.write(f"# direction {e.direction.tolist()}\n")
            for t, mean in zip(e.scales, e.per_scale_mean):
                fh.write(f"{t} {mean!r}\n")
            fh.write("\n\n")


def cmd_distance(cfg: RunConfig, args, out: Path) -> int:
    spec = cfg.hamiltonian()
    box, h, radius = cfg.grid()
    omega = spec.env.sample_omega(args.omega_index)
    graph = metric.build_graph(spec, box, h, radius, args.a, omega)
    field = metric.shortest_distances(graph, _parse_point(getattr(args, "from")))
    target = _parse_point(args.to)
    value = field.value_at(target)
    boundary_reached = graph.boundary_touch(
        np.where(field.values <= value + 1e-12, field.values, np.inf)
    )
    if boundary_reached:
        print(
            "warning: shortest paths at this level touch the box boundary; "
            "the reported distance may overestimate the free-space value",
            file=sys.stderr,
        )
    field.to_csv(out / "distance_field.csv")
    field.to_binary(out / "distance_field")
    body = {
        "a": args.a,
        "from": _parse_point(getattr(args, "from")).tolist(),
        "to": target.tolist(),
        "value": value,
        "boundary_touched": bool(boundary_reached),
        "omega_index": args.omega_index,
    }
    _write_json(out / "summary.json", _summary(cfg, "distance", body))
    print(f"distance = {value!r}")
    return EXIT_OK


def cmd_stable_norm(cfg: RunConfig, args, out: Path) -> int:
    spec = cfg.hamiltonian()
    _, h, radius = cfg.grid()
    sn = cfg.data["stable_norm"]
    tol = cfg.data["tolerances"]
    directions = asymptotics.unit_directions(spec.env.n_phys, int(sn["direction_count"]))
    est = asymptotics.stable_norm(
        spec,
        a=args.a,
        directions=directions,
        scales=cfg.data["scales"],
        omega_count=int(cfg.data["ensemble"]["omega_count"]),
        h=h,
        stencil_radius=radius,
        pad_frac=float(sn["pad_frac"]),
        pad_min=float(sn["pad_min"]),
        jobs=args.jobs,
    )
    est.write_csv(out / "stable_norm.csv")
    if args.dat:
        _write_profiles_dat(out / "stable_norm.dat", est)
    threshold = float(tol["degeneracy_threshold"])
    report = []
    for e in est.estimates:
        means = e.per_scale_mean
        decreasing = bool(np.all(np.diff(means) < 0))
        report.append(
            {
                "direction": e.direction.tolist(),
                "extrapolated": e.extrapolated,
                "largest_scale_mean": float(means[-1]),
                "decreasing": decreasing,
                "degenerate_consistent": bool(e.extrapolated < threshold and decreasing),
            }
        )
    body = {
        "a": args.a,
        "estimate": est.to_json_dict(),
        "degeneracy_threshold": threshold,
        "degeneracy_report": report,
    }
    _write_json(out / "summary.json", _summary(cfg, "stable-norm", body))
    print(f"delta_hat = {est.delta_hat!r}")
    return EXIT_OK


def _critical(cfg: RunConfig, jobs: int):
    spec = cfg.hamiltonian()
    box, h, radius = cfg.grid()
    tol = cfg.data["tolerances"]
    sn = cfg.data["stable_norm"]
    scales = cfg.data["scales"][-2:]
    return asymptotics.stationary_critical_value(
        spec,
        box=box,
        h=h,
        scales=scales,
        tol=float(tol["tol"]),
        theta=tol["theta"],
        stencil_radius=radius,
        direction_count=min(8, int(sn["direction_count"])),
        omega_count=min(4, int(cfg.data["ensemble"]["omega_count"])),
        pad_frac=float(sn["pad_frac"]),
        pad_min=float(sn["pad_min"]),
        jobs=jobs,
        theta_floor=float(tol["theta_floor"]),
    )


def cmd_critical(cfg: RunConfig, args, out: Path) -> int:
    crit = _critical(cfg, args.jobs)
    body = crit.to_json_dict()
    _write_json(out / "summary.json", _summary(cfg, "critical", body))
    if crit.critical_norms is not None:
        crit.critical_norms.write_csv(out / "critical_norms.csv")
    print(
        f"free critical value in [{crit.free.lo!r}, {crit.free.hi!r}]; "
        f"stationary critical value in [{crit.stationary.lo!r}, {crit.stationary.hi!r}]"
    )
    return EXIT_OK


def cmd_effective(cfg: RunConfig, args, out: Path) -> int:
    spec = cfg.hamiltonian()
    box, h, radius = cfg.grid()
    eff = cfg.data["effective"]
    omega = spec.env.sample_omega(0)
    free = metric.free_critical_value(
        spec, omega, box, h, radius, float(cfg.data["tolerances"]["tol"])
    )
    lag = effective.effective_lagrangian(
        spec,
        q_reach=float(eff["q_reach"]),
        q_step=float(eff["q_step"]),
        times=eff["times"],
        dt=float(eff["dt"]),
        h=float(eff["h"]),
        omega_count=int(cfg.data["ensemble"]["omega_count"]),
        box_pad=float(eff["box_pad"]),
        velocity_margin=float(eff["velocity_margin"]),
    )
    hbar = effective.effective_hamiltonian(
        lag, p_reach=float(eff["p_reach"]), p_step=float(eff["p_step"])
    )
    _grid_csv(out / "effective_lagrangian.csv", lag.q_grid, lag.values, "lagrangian")
    _grid_csv(out / "effective_hamiltonian.csv", hbar.p_grid, hbar.values, "hamiltonian")
    q0 = int(np.nonzero(np.all(lag.q_grid == 0.0, axis=1))[0][0])
    body = {
        "min_hamiltonian": hbar.minimum,
        "argmin": hbar.argmin.tolist(),
        "lagrangian_at_zero": float(lag.values[q0]),
        "free_critical_bracket": free.to_dict(),
        "min_vs_free_gap": hbar.minimum - free.mid,
        "fenchel_identity_gap": hbar.minimum + float(lag.values[q0]),
        "lagrangian_convexity_defect": lag.midpoint_convexity_defect(),
    }
    _write_json(out / "summary.json", _summary(cfg, "effective", body))
    print(f"min effective Hamiltonian = {hbar.minimum!r} at P = {hbar.argmin.tolist()}")
    return EXIT_OK


def cmd_corrector(cfg: RunConfig, args, out: Path) -> int:
    spec = cfg.hamiltonian()
    box, h, radius = cfg.grid()
    tol = cfg.data["tolerances"]
    omega = spec.env.sample_omega(args.omega_index)
    free = metric.free_critical_value(spec, omega, box, h, radius, float(tol["tol"]))
    c_est = free.estimate if args.c_est is None else args.c_est
    graph = metric.build_graph(spec, box, h, radius, c_est, omega)
    res = lax.approximate_corrector(
        spec,
        omega,
        delta=float(args.delta if args.delta is not None else tol["delta"]),
        graph=graph,
        c_est=c_est,
        slack_constant=float(tol["slack_constant"]),
    )
    pts = graph.grid_points()
    _grid_csv(out / "corrector.csv", pts, res.solution.values, "value")
    _grid_csv(out / "residuals.csv", pts, res.residuals, "residual")
    body = {
        "subsolution": res.subsolution_ok,
        "solution_off_C": res.lower_ok,
        "band": list(res.band),
        "band_target": list(res.band_target),
        "c_est": c_est,
        "free_critical_bracket": free.to_dict(),
        "source_count": int(res.sources.size),
        "solution_defect": res.solution_defect,
    }
    _write_json(out / "summary.json", _summary(cfg, "corrector", body))
    print(
        f"band = {res.band}, subsolution: {res.subsolution_ok}, "
        f"solution off sources: {res.lower_ok}"
    )
    return EXIT_OK


def cmd_ergodic_check(cfg: RunConfig, args, out: Path) -> int:
    spec = cfg.hamiltonian()
    erg = cfg.data["ergodic"]
    env = spec.env
    omega = env.sample_omega(0)
    birk = ergodic.birkhoff_average(
        env, spec.potential, omega, radii=erg["radii"], h=float(erg["birkhoff_h"])
    )
    box, h, radius = cfg.grid()
    sample = ergodic.sample_threshold_set(
        env, spec.potential, omega, tuple(erg["threshold"]), box, h
    )
    table = ergodic.density_asymptotics(
        sample, erg["dilation_radii"], erg["ball_radii"]
    )
    np.savetxt(
        out / "birkhoff.csv",
        np.column_stack([birk.radii, birk.means]),
        delimiter=",",
        header="radius,mean",
        comments="",
    )
    np.savetxt(
        out / "density_ratios.csv",
        np.column_stack([table.dilation_radii, table.ratios]),
        delimiter=",",
        header="dilation_radius," + ",".join(f"ball_{r}" for r in table.ball_radii),
        comments="",
    )
    body = {
        "birkhoff": birk.to_json_dict(),
        "volume_fraction": sample.volume_fraction,
        "density": table.to_json_dict(),
    }
    _write_json(out / "summary.json", _summary(cfg, "ergodic-check", body))
    print(f"birkhoff tail mean = {birk.means[-1]!r} (expected {birk.expected!r})")
    return EXIT_OK


def cmd_example61(cfg: RunConfig, args, out: Path) -> int:
    """One-shot study of the quasi-periodic product potential on the 4-torus."""
    spec = cfg.hamiltonian()
    if spec.potential.kind != "product_quasiperiodic":
        raise ConfigError("example61 runs on the product_quasiperiodic potential")
    box, h, radius = cfg.grid()
    tol = cfg.data["tolerances"]
    sn = cfg.data["stable_norm"]
    omega = spec.env.sample_omega(0)

    free = metric.free_critical_value(spec, omega, box, h, radius, float(tol["tol"]))
    axes = np.array([[1.0, 0.0], [0.0, 1.0]])
    diag = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    est = asymptotics.stable_norm(
        spec,
        a=0.0,
        directions=np.vstack([axes, diag]),
        scales=cfg.data["scales"],
        omega_count=int(cfg.data["ensemble"]["omega_count"]),
        h=h,
        stencil_radius=radius,
        pad_frac=float(sn["pad_frac"]),
        pad_min=float(sn["pad_min"]),
        jobs=args.jobs,
    )
    est.write_csv(out / "stable_norm.csv")
    if args.dat:
        _write_profiles_dat(out / "stable_norm.dat", est)

    crit = _critical(cfg, args.jobs)

    delta = float(tol["delta"])
    c_for_band = 0.0  # the null function is a strict admissible subsolution at level 0
    graph = metric.build_graph(spec, box, h, radius, c_for_band, omega)
    corr = lax.approximate_corrector(
        spec, omega, delta=delta, graph=graph, c_est=c_for_band,
        slack_constant=float(tol["slack_constant"]),
    )
    pts = graph.grid_points()
    sets = metric.detect_sources(
        spec,
        omega,
        graph,
        c_f_est=free.mid,
        c_est=c_for_band,
        delta=delta,
        epsilon=tol["epsilon"],
        aubry_candidates=np.array([], dtype=np.int64),
    )
    threshold = float(tol["degeneracy_threshold"])
    body = {
        "free_critical_bracket": free.to_dict(),
        "stationary_critical": crit.to_json_dict(),
        "stable_norm_level0": est.to_json_dict(),
        "degeneracy_report": [
            {
                "direction": e.direction.tolist(),
                "largest_scale_mean": float(e.per_scale_mean[-1]),
                "first_scale_mean": float(e.per_scale_mean[0]),
                "extrapolated": e.extrapolated,
                "degenerate_consistent": bool(
                    e.extrapolated < threshold
                    and e.per_scale_mean[-1] < e.per_scale_mean[0]
                ),
            }
            for e in est.estimates
        ],
        "approximate_corrector": {
            "delta": delta,
            "band": list(corr.band),
            "band_target": list(corr.band_target),
            "passed": corr.passed,
            "source_count": int(corr.sources.size),
            "approx_equilibria_count": int(sets.approx_equilibria.size),
        },
        "note": (
            "the zero function is a strict subsolution at level 0 for this "
            "potential (H(x, 0, omega) = -V^2 < 0 off a null set), while the "
            "level-0 stable norm still collapses along both axes: strictness "
            "does not force nondegeneracy in dimension two"
        ),
    }
    _grid_csv(out / "corrector.csv", pts, corr.solution.values, "value")
    _write_json(out / "summary.json", _summary(cfg, "example61", body))
    print(
        "stable norm at level 0:",
        {tuple(e.direction.round(3)): round(e.extrapolated, 4) for e in est.estimates},
    )
    return EXIT_OK


COMMANDS = {
    "distance": cmd_distance,
    "stable-norm": cmd_stable_norm,
    "critical": cmd_critical,
    "effective": cmd_effective,
    "corrector": cmd_corrector,
    "ergodic-check": cmd_ergodic_check,
    "example61": cmd_example61,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjmetric",
        description="metric analysis of stationary ergodic Hamilton-Jacobi equations",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override sampling seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for ensembles")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, value parsed as JSON",
    )
    parser.add_argument(
        "--dat",
        action="store_true",
        help="also write gnuplot-compatible .dat profiles where applicable",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="intrinsic distance between two points")
    p.add_argument("--a", type=float, required=True, help="Hamiltonian level")
    p.add_argument("--from", default="0,0", help="source point, comma separated")
    p.add_argument("--to", required=True, help="target point, comma separated")
    p.add_argument("--omega-index", type=int, default=0)

    p = sub.add_parser("stable-norm", help="directional stable norm estimates")
    p.add_argument("--a", type=float, required=True)

    sub.add_parser("critical", help="free and stationary critical values")

    sub.add_parser("effective", help="effective Lagrangian and Hamiltonian tables")

    p = sub.add_parser("corrector", help="approximate corrector over near-equilibria")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--c-est", type=float, default=None)
    p.add_argument("--omega-index", type=int, default=0)

    sub.add_parser("ergodic-check", help="Birkhoff, stationary-set and density checks")

    sub.add_parser("example61", help="one-shot quasi-periodic degenerate-norm study")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig.from_dict({})
        if args.seed is not None:
            cfg.data["torus"]["seed"] = int(args.seed)
            cfg.data["ensemble"]["seed"] = int(args.seed)
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            cfg.apply_override(key.strip(), value.strip())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out if args.out else cfg.data["output"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args, out)
    except (NegativeCycle, EmptySublevel) as exc:
        print(f"level infeasible: {exc}", file=sys.stderr)
        _write_json(
            out / "summary.json",
            _summary(cfg, args.command, {"error": type(exc).__name__, "message": str(exc)}),
        )
        return EXIT_LEVEL_INFEASIBLE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HjMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_json(
            out / "summary.json",
            _summary(cfg, args.command, {"error": type(exc).__name__, "message": str(exc)}),
        )
        return EXIT_LEVEL_INFEASIBLE


if __name__ == "__main__":
    raise SystemExit(main())
