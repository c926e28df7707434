"""Command-line entry point: sample / gas / diagnose / optimize.

Every subcommand is a pure function of (inputs, config, seed): wall-clock
timestamps go only into the meta.json sidecar, so output files are
byte-identical across runs with the same seed. A JSON config file may supply
any flag; an explicit flag wins over the file.
"""

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import ingestion, optimizer, quantum_emulation as qe
from .dyson_gas import (
    HamiltonianSpec,
    InversePower,
    LogGas,
    build_hamiltonian,
    circular_spacings,
    eigenvalues,
    run_circular_gas,
    unfold,
)
from .errors import (
    ConfigError,
    EmptySnapshot,
    IoError,
    ParseError,
    RingGasError,
    Unsupported,
    UsageError,
)
from .ring_model import FleetSnapshot, RingRoute, spacings
from .seeding import derive_seed
from .spectral_statistics import (
    EnsembleKind,
    Histogram,
    diagnose_spacings,
    mean_r,
    pdf,
    sample_spacings,
)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_meta(out: Path, argv, resolved: dict):
    _write_json(
        out / "meta.json",
        {
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "tool_version": __version__,
            "argv": list(argv),
            "resolved_config": resolved,
        },
    )


def _report_config(resolved: dict) -> dict:
    """Resolved config minus volatile keys, for embedding in report files.

    The output directory and the config-file path vary run to run without
    changing the result; keeping them out preserves byte-identical outputs.
    meta.json keeps the full picture.
    """
    return {k: v for k, v in resolved.items() if k not in ("out", "config")}


def _load_json_file(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from exc


def _target_kind(resolved: dict) -> EnsembleKind:
    kind = resolved.get("target") or resolved.get("kind")
    if kind is None:
        raise UsageError("--kind/--target is required")
    try:
        if kind.strip().lower() == "brody":
            q = resolved.get("q")
            if q is None:
                raise UsageError("brody needs --q")
            return EnsembleKind.brody(float(q))
        return EnsembleKind.parse(kind)
    except Unsupported as exc:
        raise UsageError(str(exc)) from exc


def _require(resolved: dict, *names):
    for name in names:
        if resolved.get(name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _load_snapshot(resolved: dict) -> tuple:
    """Fleet snapshot from --snapshot-file or --gps-file, plus exclusions."""
    route = RingRoute.from_dict(_load_json_file(resolved["route_file"], "route file"))
    if resolved.get("snapshot_file"):
        snap = FleetSnapshot.from_dict(_load_json_file(resolved["snapshot_file"], "snapshot file"))
        return route, snap, []
    _require(resolved, "gps_file", "time", "polyline_file")
    try:
        raw = Path(resolved["gps_file"]).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read GPS file {resolved['gps_file']}: {exc}") from exc
    parsed = ingestion.parse_gps(raw, resolved["gps_format"], strict=resolved["strict"])
    polyline = ingestion.RoutePolyline.from_dict(
        _load_json_file(resolved["polyline_file"], "polyline file")
    )
    report = ingestion.snapshot_at(
        parsed.records, float(resolved["time"]), polyline, staleness=float(resolved["staleness"])
    )
    snap = ingestion.rescale_positions(report.snapshot, polyline, route.circumference)
    excluded = [{"bus_id": e.bus_id, "reason": e.reason} for e in report.excluded]
    excluded += [{"row": r.row, "reason": r.reason} for r in parsed.rejected]
    return route, snap, excluded


def _hamiltonian_spec(resolved: dict) -> HamiltonianSpec:
    if resolved["potential"] == "inverse_power":
        potential = InversePower(float(resolved["exponent"]))
    elif resolved["potential"] == "log_gas":
        potential = LogGas()
    else:
        raise UsageError(f"unknown potential {resolved['potential']!r}")
    return HamiltonianSpec(
        potential=potential,
        coupling=float(resolved["coupling"]),
        distance_mode=resolved["distance_mode"],
        neighbor_only=bool(resolved["neighbor_only"]),
    )


def _spacing_section(sample_norm, kind: EnsembleKind, bin_edges=None) -> tuple:
    report = diagnose_spacings(sample_norm, kind, bin_edges)
    return report.to_dict(), report.histogram


_REFERENCE_GRID = np.linspace(0.0, 4.0, 401)


def _reference_curve_csv(q: float) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "poisson", "wd_beta1", "wd_beta2", "wd_beta4", f"brody_q{q:g}"])
    curves = [
        pdf(EnsembleKind.poisson(), _REFERENCE_GRID),
        pdf(EnsembleKind.wigner_dyson(1), _REFERENCE_GRID),
        pdf(EnsembleKind.wigner_dyson(2), _REFERENCE_GRID),
        pdf(EnsembleKind.wigner_dyson(4), _REFERENCE_GRID),
        pdf(EnsembleKind.brody(q), _REFERENCE_GRID),
    ]
    for i, s in enumerate(_REFERENCE_GRID):
        writer.writerow([repr(float(s))] + [repr(float(c[i])) for c in curves])
    return buf.getvalue()


def cmd_sample(resolved: dict, argv) -> int:
    _require(resolved, "kind", "n", "seed", "out")
    kind = _target_kind(resolved)
    n = int(resolved["n"])
    out = Path(resolved["out"])
    samples = sample_spacings(kind, n, derive_seed(int(resolved["seed"]), "sample.spacings"))
    bins = int(resolved["bins"])
    if bins < 1:
        raise UsageError(f"--bins must be >= 1, got {bins}")
    edges = np.linspace(0.0, max(4.0, float(np.ceil(samples.max() + 1e-12))), bins + 1)
    section, hist = _spacing_section(samples, kind, edges)
    _write_json(out / "report.json", {"config": _report_config(resolved), "spacing": section})
    _write_json(out / "histogram.json", hist.to_dict())
    q = float(resolved["q"]) if resolved.get("q") is not None else 0.5
    _write_text(out / "reference.csv", _reference_curve_csv(q))
    _write_meta(out, argv, resolved)
    return 0


def cmd_gas(resolved: dict, argv) -> int:
    _require(resolved, "n", "circumference", "beta", "sweeps", "seed", "out")
    if int(resolved["sweeps"]) < 1:
        raise UsageError(f"--sweeps must be >= 1, got {resolved['sweeps']}")
    if int(resolved["n"]) < 2:
        raise UsageError(f"--n must be >= 2, got {resolved['n']}")
    out = Path(resolved["out"])
    beta = float(resolved["beta"])
    run = run_circular_gas(
        int(resolved["n"]),
        float(resolved["circumference"]),
        beta,
        int(resolved["sweeps"]),
        derive_seed(int(resolved["seed"]), "gas.chains"),
        chains=int(resolved["chains"]),
        distance_mode=resolved["distance_mode"],
    )
    mean_gap = float(resolved["circumference"]) / int(resolved["n"])
    per_chain = [circular_spacings(c) / mean_gap for c in run.configurations]
    pooled = np.concatenate(per_chain)
    if resolved.get("target"):
        kind = _target_kind(resolved)
    elif beta in (1.0, 2.0, 4.0):
        kind = EnsembleKind.wigner_dyson(int(beta))
    else:
        kind = EnsembleKind.poisson()
    section, hist = _spacing_section(pooled, kind)
    section["mean_r"] = float(np.mean([mean_r(s) for s in per_chain]))
    report = {
        "config": _report_config(resolved),
        "spacing": section,
        "mean_r": section["mean_r"],
        "chains": len(run.configurations),
        "acceptance_rate_mean": float(np.mean([s.acceptance_rate for s in run.stats])),
    }
    _write_json(out / "report.json", report)
    _write_json(out / "histogram.json", hist.to_dict())
    _write_json(
        out / "positions.json",
        [[float(x) for x in c.positions] for c in run.configurations],
    )
    _write_meta(out, argv, resolved)
    return 0


def _quantum_section(h, seed: int, n_ancilla: int, shots: int) -> dict:
    w, _ = h.eigensystem
    spread = float(w[-1] - w[0])
    t_scale = 2.0 * math.pi / spread if spread > 0 else 1.0
    psi = qe.StateVector.uniform(h.dimension)
    ts = [k * t_scale / 16.0 for k in range(33)]
    sp_curve = [[t, qe.survival_probability(h, t, psi)] for t in ts]
    estimates = qe.qpe(h, t_scale, psi, n_ancilla, shots, derive_seed(seed, "diagnose.qpe"))
    return {
        "sp_curve": sp_curve,
        "qpe": [{"phase": e.phase, "probability": e.probability} for e in estimates[:16]],
        "n_ancilla": n_ancilla,
        "ipr": qe.ipr(qe.evolve(h, ts[-1], psi)),
    }


def cmd_diagnose(resolved: dict, argv) -> int:
    _require(resolved, "route_file", "out")
    if not resolved.get("snapshot_file") and not resolved.get("gps_file"):
        raise UsageError("need --snapshot-file or --gps-file")
    out = Path(resolved["out"])
    route, snap, excluded = _load_snapshot(resolved)
    kind = _target_kind(resolved)
    sample = spacings(snap, route)
    section, hist = _spacing_section(sample.normalized, kind)

    spec = _hamiltonian_spec(resolved)
    h = build_hamiltonian(snap, route, spec)
    spectrum = eigenvalues(h)
    method = "polynomial" if spectrum.size >= 7 else "global_mean"
    unfolded = unfold(spectrum, method)
    spectral_report = diagnose_spacings(unfolded.unfolded_spacings, kind)
    report = {
        "config": _report_config(resolved),
        "fleet_size": snap.size,
        "spacing": section,
        "spectral": {
            "unfold_method": method,
            "eigenvalue_range": [float(spectrum.eigenvalues[0]), float(spectrum.eigenvalues[-1])],
            **spectral_report.to_dict(),
        },
        "excluded": excluded,
    }
    if resolved["quantum"]:
        if resolved.get("seed") is None:
            raise UsageError("--quantum is stochastic: --seed is required")
        report["quantum"] = _quantum_section(
            h, int(resolved["seed"]), int(resolved["n_ancilla"]), int(resolved["shots"])
        )
    _write_json(out / "report.json", report)
    _write_json(out / "histogram.json", hist.to_dict())
    _write_meta(out, argv, resolved)
    return 0


def cmd_optimize(resolved: dict, argv) -> int:
    _require(resolved, "route_file", "seed", "out")
    if not resolved.get("snapshot_file") and not resolved.get("gps_file"):
        raise UsageError("need --snapshot-file or --gps-file")
    if resolved["method"] not in ("match", "anneal"):
        raise UsageError(f"--method must be match or anneal, got {resolved['method']!r}")
    out = Path(resolved["out"])
    route, snap, excluded = _load_snapshot(resolved)
    kind = _target_kind(resolved)
    seed = int(resolved["seed"])
    max_shift = float(resolved["max_shift"]) if resolved.get("max_shift") else route.circumference / 2.0
    variant = optimizer.SpacingKS(kind)

    if resolved["method"] == "match":
        target = optimizer.target_configuration(
            snap, route, kind, derive_seed(seed, "optimize.target"), sweeps=int(resolved["sweeps"])
        )
        plan = optimizer.match_snapshot_to_target(snap, route, target, max_shift)
    else:
        objective = optimizer.Objective(variant=variant, epsilon=float(resolved["epsilon"]))
        plan = optimizer.local_search_optimize(
            snap,
            route,
            objective,
            max_shift,
            int(resolved["budget"]),
            seed=derive_seed(seed, "optimize.anneal"),
        )
    schedule = optimizer.schedule_from_displacements(plan, snap, route)
    after = optimizer.simulate_round(snap, route, schedule, float(resolved["horizon"]))
    ks_before = optimizer.evaluate_objective(variant, snap, route)
    ks_after = optimizer.evaluate_objective(variant, after, route)
    report = {
        "config": _report_config(resolved),
        "fleet_size": snap.size,
        "plan": plan.to_dict(),
        "before": {"spacing_ks": ks_before, "mean_r": mean_r(spacings(snap, route).raw)},
        "after": {"spacing_ks": ks_after, "mean_r": mean_r(spacings(after, route).raw)},
        "excluded": excluded,
    }
    _write_json(out / "report.json", report)
    _write_json(out / "plan.json", plan.to_dict())
    _write_json(out / "schedule.json", schedule.to_dict(generated_at=snap.time))
    _write_text(out / "schedule.csv", schedule.to_csv())
    _write_meta(out, argv, resolved)
    return 0


_COMMON = {"seed": None, "out": None, "config": None}
_SNAPSHOT_SOURCE = {
    "snapshot_file": None,
    "gps_file": None,
    "gps_format": "csv",
    "time": None,
    "polyline_file": None,
    "staleness": ingestion.DEFAULT_STALENESS,
    "strict": False,
    "route_file": None,
}

_DEFAULTS = {
    "sample": {**_COMMON, "kind": None, "q": None, "n": 100000, "bins": 40},
    "gas": {
        **_COMMON,
        "n": None,
        "circumference": None,
        "beta": None,
        "sweeps": None,
        "chains": 1,
        "distance_mode": "chord",
        "target": None,
        "q": None,
    },
    "diagnose": {
        **_COMMON,
        **_SNAPSHOT_SOURCE,
        "target": "wd2",
        "q": None,
        "potential": "inverse_power",
        "exponent": 2.0,
        "coupling": 1.0,
        "distance_mode": "chord",
        "neighbor_only": False,
        "quantum": False,
        "n_ancilla": 6,
        "shots": 4096,
    },
    "optimize": {
        **_COMMON,
        **_SNAPSHOT_SOURCE,
        "target": "wd2",
        "q": None,
        "method": "match",
        "budget": 20000,
        "max_shift": None,
        "epsilon": 0.05,
        "sweeps": 2000,
        "horizon": 3600.0,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringgas",
        description="Ring-route fleet spacing statistics and stop-time optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--config", help="JSON file supplying any flag; explicit flags win")

    def add_snapshot_source(p):
        p.add_argument("--snapshot-file")
        p.add_argument("--gps-file")
        p.add_argument("--gps-format", choices=["csv", "json"])
        p.add_argument("--time", type=float)
        p.add_argument("--polyline-file")
        p.add_argument("--staleness", type=float)
        p.add_argument("--strict", action="store_const", const=True)
        p.add_argument("--route-file")

    p = sub.add_parser("sample", help="draw reference-ensemble spacings")
    add_common(p)
    p.add_argument("--kind")
    p.add_argument("--q", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--bins", type=int)

    p = sub.add_parser("gas", help="run the circular log-gas sampler")
    add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--circumference", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--distance-mode", choices=["chord", "arc"])
    p.add_argument("--target")
    p.add_argument("--q", type=float)

    p = sub.add_parser("diagnose", help="spacing and spectral diagnostics of a fleet")
    add_common(p)
    add_snapshot_source(p)
    p.add_argument("--target")
    p.add_argument("--q", type=float)
    p.add_argument("--potential", choices=["inverse_power", "log_gas"])
    p.add_argument("--exponent", type=float)
    p.add_argument("--coupling", type=float)
    p.add_argument("--distance-mode", choices=["chord", "arc"])
    p.add_argument("--neighbor-only", action="store_const", const=True)
    p.add_argument("--quantum", action="store_const", const=True)
    p.add_argument("--n-ancilla", type=int)
    p.add_argument("--shots", type=int)

    p = sub.add_parser("optimize", help="plan displacements and emit a stop-time schedule")
    add_common(p)
    add_snapshot_source(p)
    p.add_argument("--target")
    p.add_argument("--q", type=float)
    p.add_argument("--method", choices=["match", "anneal"])
    p.add_argument("--budget", type=int)
    p.add_argument("--max-shift", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--horizon", type=float)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    defaults = _DEFAULTS[args.command]
    config = {}
    if getattr(args, "config", None):
        config = _load_json_file(args.config, "config file")
        if not isinstance(config, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(config) - set(defaults)
        if unknown:
            raise UsageError(f"config file has unknown keys: {sorted(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, default)
        resolved[key] = value
    return resolved


_HANDLERS = {
    "sample": cmd_sample,
    "gas": cmd_gas,
    "diagnose": cmd_diagnose,
    "optimize": cmd_optimize,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors (2) and --help (0)
        return int(exc.code or 0)
    try:
        resolved = _resolve(args)
        return _HANDLERS[args.command](resolved, argv)
    except (UsageError, ParseError, ConfigError, IoError, EmptySnapshot) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RingGasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
