"""Command-line front end: config ingestion, dispatch, CSV/SVG emission.

Subcommands:

- ``run <config>``: execute an experiment plan, write CSV (and optional SVG).
- ``list-experiments``: print the built-in paper-replication presets.
- ``validate <config>``: schema-check a config without running it.
- ``oracle <hamiltonian-file>``: print the dense spectrum and ground energy
  of an operator fixture (plus single-particle eigenvalues for quadratic
  fermionic files).

Configs are single JSON documents.  A config may name a ``preset`` and then
override any experiment-plan field; unknown keys are rejected with the
offending field path.  CSV output is deterministic: sorted rows, fixed
12-significant-digit formatting, byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from vpelab import experiments as ex
from vpelab import hamiltonians as hm
from vpelab.sim import SimulationError


class ConfigError(Exception):
    """A config file failed schema or semantic validation."""


PLAN_FIELDS = {f.name: f for f in dataclasses.fields(ex.ExperimentPlan)}
EXTRA_KEYS = ("preset", "out", "svg")
_TUPLE_FIELDS = ("rates", "shot_list")


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return doc


def _coerce(key: str, value):
    if key in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        try:
            return tuple(type(PLAN_FIELDS[key].default[0])(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    default = PLAN_FIELDS[key].default
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(value, bool):
        if isinstance(value, int):
            return value
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    return value


def plan_from_config(config: dict, overrides: dict | None = None
                     ) -> ex.ExperimentPlan:
    """Build an ExperimentPlan from a JSON config plus CLI overrides.

    Unknown keys are rejected; validation failures name the offending field.
    """
    for key in config:
        if key not in PLAN_FIELDS and key not in EXTRA_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    preset = config.get("preset")
    if preset is None:
        base = ex.ExperimentPlan()
    elif preset in ex.PRESETS:
        base = ex.PRESETS[preset]
    else:
        raise ConfigError(
            f"preset: unknown preset {preset!r} "
            f"(choices: {', '.join(sorted(ex.PRESETS))})")
    fields = {k: _coerce(k, v) for k, v in config.items()
              if k in PLAN_FIELDS}
    fields.update(overrides or {})
    try:
        return dataclasses.replace(base, **fields)
    except SimulationError as exc:
        # Locate the offending field for the error message by replaying the
        # overrides one at a time on the base plan.
        for key, value in fields.items():
            try:
                dataclasses.replace(base, **{key: value})
            except SimulationError as single:
                raise ConfigError(f"{key}: {single}") from exc
        raise ConfigError(f"{'/'.join(fields)}: {exc}") from exc


# ---------------------------------------------------------------------------
# Output emission
# ---------------------------------------------------------------------------

def _sig(value: float) -> str:
    """Fixed 12-significant-digit decimal formatting."""
    if not math.isfinite(value):
        return "nan" if math.isnan(value) else \
            ("inf" if value > 0 else "-inf")
    return f"{value:.12g}"


def write_sweep_csv(result: ex.SweepResult, path: str) -> None:
    """Deterministic CSV: header plus one sorted row per recorded error."""
    rows = sorted(
        (row for row in result.rows if row.rate in result.rates),
        key=lambda r: (r.rate, r.replicate, r.estimator))
    lines = ["rate,replicate,estimator,abs_error"]
    lines += [f"{_sig(r.rate)},{r.replicate},{r.estimator},{_sig(r.abs_error)}"
              for r in rows]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_convergence_csv(result: ex.ConvergenceResult, path: str) -> None:
    lines = ["shots,method,median_abs_error"]
    for method in result.METHODS:
        for shots, err in zip(result.shot_list, result.median_errors[method]):
            lines.append(f"{shots},{method},{_sig(err)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_vqe_json(result: ex.VqeResult, path: str) -> None:
    doc = {
        "best_energy": result.best_energy,
        "best_parameters": list(result.best_parameters),
        "converged": result.converged,
        "exact_ground_energy": result.exact_ground_energy,
        "final_errors": result.final_errors,
        "evaluations": len(result.trajectory),
        "trajectory_energies": [e for _, e in result.trajectory],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


_SVG_COLORS = ("#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")
_GUIDES = ((1, "#d62728"), (2, "#000000"), (3, "#1f3fbf"))


def _svg_map(x, y, xlim, ylim, box):
    left, top, width, height = box
    px = left + (x - xlim[0]) / (xlim[1] - xlim[0]) * width
    py = top + (ylim[1] - y) / (ylim[1] - ylim[0]) * height
    return px, py


def write_sweep_svg(result: ex.SweepResult, path: str) -> None:
    """Hand-rolled log-log scatter+median plot with slope guide lines.

    One path per estimator series; dashed linear (red), quadratic (black)
    and cubic (blue) guides as separate path elements, anchored at the
    top-right data point.
    """
    estimators = sorted({r.estimator for r in result.rows})
    points: dict[str, list[tuple[float, float]]] = {e: [] for e in estimators}
    medians: dict[str, list[tuple[float, float]]] = {e: [] for e in estimators}
    floor = 1e-18
    for est in estimators:
        for rate in result.rates:
            errs = result.errors(rate, est)
            if errs.size == 0 or rate <= 0:
                continue
            lx = math.log10(rate)
            points[est] += [(lx, math.log10(max(float(e), floor)))
                            for e in errs]
            medians[est].append(
                (lx, math.log10(max(float(np.median(errs)), floor))))
    all_pts = [p for pts in points.values() for p in pts]
    if not all_pts:
        xlim, ylim = (-4.0, -2.0), (-16.0, 0.0)
    else:
        xs = [p[0] for p in all_pts]
        ys = [p[1] for p in all_pts]
        xlim = (min(xs) - 0.25, max(xs) + 0.25)
        ylim = (min(ys) - 0.5, max(ys) + 0.5)
    box = (70.0, 20.0, 540.0, 400.0)
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="660" height="480" '
        'viewBox="0 0 660 480">',
        '<rect x="70" y="20" width="540" height="400" fill="none" '
        'stroke="#333"/>',
    ]
    # Axis tick labels at integer decades.
    for decade in range(math.ceil(xlim[0]), math.floor(xlim[1]) + 1):
        px, _ = _svg_map(decade, ylim[0], xlim, ylim, box)
        parts.append(f'<text x="{px:.1f}" y="438" font-size="12" '
                     f'text-anchor="middle">1e{decade}</text>')
    for decade in range(math.ceil(ylim[0]), math.floor(ylim[1]) + 1, 2):
        _, py = _svg_map(xlim[0], decade, xlim, ylim, box)
        parts.append(f'<text x="64" y="{py + 4:.1f}" font-size="12" '
                     f'text-anchor="end">1e{decade}</text>')
    parts.append('<text x="340" y="466" font-size="13" '
                 'text-anchor="middle">noise rate per qubit-moment</text>')
    parts.append('<text x="16" y="220" font-size="13" text-anchor="middle" '
                 'transform="rotate(-90 16 220)">absolute error</text>')
    # Guide lines through the top-right median point.
    anchors = [pts[-1] for pts in medians.values() if pts]
    if anchors:
        ax, ay = max(anchors)
        for slope, color in _GUIDES:
            x0, x1 = xlim[0] + 0.1, ax
            y0, y1 = ay - slope * (ax - x0), ay
            p0 = _svg_map(x0, y0, xlim, ylim, box)
            p1 = _svg_map(x1, y1, xlim, ylim, box)
            parts.append(
                f'<path d="M {p0[0]:.2f} {p0[1]:.2f} L {p1[0]:.2f} '
                f'{p1[1]:.2f}" stroke="{color}" stroke-dasharray="6 4" '
                'fill="none" stroke-width="1"/>')
    for idx, est in enumerate(estimators):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        for lx, ly in points[est]:
            px, py = _svg_map(lx, ly, xlim, ylim, box)
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.5" '
                         f'fill="{color}" fill-opacity="0.35"/>')
        if medians[est]:
            coords = " L ".join(
                "{:.2f} {:.2f}".format(*_svg_map(lx, ly, xlim, ylim, box))
                for lx, ly in medians[est])
            parts.append(f'<path d="M {coords}" stroke="{color}" '
                         'fill="none" stroke-width="2"/>')
        parts.append(f'<text x="600" y="{40 + 18 * idx}" font-size="13" '
                     f'text-anchor="end" fill="{color}">{est}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_outputs(name: str, result, out_dir: str, svg: bool) -> list[str]:
    """Write result artifacts for any experiment type; returns file paths."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def emit_sweep(stem: str, sweep: ex.SweepResult):
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        write_sweep_csv(sweep, csv_path)
        written.append(csv_path)
        if svg:
            svg_path = os.path.join(out_dir, f"{stem}.svg")
            write_sweep_svg(sweep, svg_path)
            written.append(svg_path)

    if isinstance(result, ex.SweepResult):
        emit_sweep(name, result)
    elif isinstance(result, ex.VqeResult):
        path = os.path.join(out_dir, f"{name}.json")
        write_vqe_json(result, path)
        written.append(path)
    elif isinstance(result, ex.ConvergenceResult):
        path = os.path.join(out_dir, f"{name}.csv")
        write_convergence_csv(result, path)
        written.append(path)
    elif isinstance(result, dict):
        summary = {}
        for key in sorted(result):
            value = result[key]
            if isinstance(value, ex.SweepResult):
                emit_sweep(f"{name}-{key}", value)
            else:
                summary[key.lstrip("_")] = value
        if summary:
            path = os.path.join(out_dir, f"{name}-summary.json")
            with open(path, "w") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True, default=str)
                fh.write("\n")
            written.append(path)
    else:  # pragma: no cover - new experiment types must be added here
        raise SimulationError(f"no emitter for result type {type(result)}")
    return written


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cli_overrides(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.shots is not None:
        overrides["shots"] = args.shots
    threads = args.threads
    if threads is None:
        env = os.environ.get("VPE_LAB_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(
                    f"VPE_LAB_THREADS: expected an integer, got {env!r}"
                ) from exc
    if threads is not None:
        overrides["threads"] = threads
    return overrides


def cmd_run(args) -> int:
    config = load_config(args.config)
    plan = plan_from_config(config, _cli_overrides(args))
    out_dir = args.out or config.get("out") or "."
    svg = args.svg or bool(config.get("svg", False))
    result = ex.run_experiment(plan)
    for path in emit_outputs(plan.name, result, out_dir, svg):
        print(path)
    return 0


def cmd_validate(args) -> int:
    config = load_config(args.config)
    plan = plan_from_config(config, _cli_overrides(args))
    print(f"OK: {plan.name} ({plan.experiment})")
    return 0


def cmd_list(args) -> int:
    for name in sorted(ex.PRESETS):
        plan = ex.PRESETS[name]
        print(f"{name:24s} {plan.experiment:22s} {plan.hamiltonian:10s} "
              f"{plan.noise_kind}")
    return 0


def cmd_oracle(args) -> int:
    try:
        op = hm.load_hamiltonian_file(args.hamiltonian)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.hamiltonian}: {exc}") from exc
    if isinstance(op, hm.FermionOperator):
        two_op = all(len(ops) in (0, 2) for ops in op.terms)
        if two_op and op.is_number_conserving():
            t_matrix = np.zeros((op.num_modes, op.num_modes), dtype=complex)
            for ops, coeff in op.terms.items():
                if len(ops) == 2:
                    (i, _), (j, _) = ops
                    t_matrix[i, j] = coeff
            singles = np.linalg.eigvalsh(t_matrix)
            formatted = ", ".join(f"{v + 0.0:g}" for v in np.round(singles, 10) + 0.0)
            print(f"single-particle eigenvalues: {formatted}")
        dense = hm.jordan_wigner(op).matrix()
    else:
        dense = op.matrix()
    spectrum = np.linalg.eigvalsh(dense)
    print("spectrum: " +
          ", ".join(f"{v + 0.0:g}" for v in np.round(spectrum, 10) + 0.0))
    print(f"ground energy: {_sig(float(spectrum[0]))}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpelab",
        description="Verified-phase-estimation experiment runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="override the plan's RNG seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: VPE_LAB_THREADS or 1)")
        p.add_argument("--mode", choices=("exact", "exact_tally", "sampled"),
                       default=None, help="phase-function evaluation mode")
        p.add_argument("--shots", type=int, default=None,
                       help="shots per measurement setting in sampled mode")

    run_p = sub.add_parser("run", help="execute a JSON experiment config")
    run_p.add_argument("config", help="path to a JSON config document")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--svg", action="store_true",
                       help="also write a log-log SVG plot per sweep")
    add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    val_p = sub.add_parser("validate",
                           help="schema-check a config without running it")
    val_p.add_argument("config")
    add_common(val_p)
    val_p.set_defaults(func=cmd_validate)

    list_p = sub.add_parser("list-experiments",
                            help="print the built-in experiment presets")
    list_p.set_defaults(func=cmd_list)

    oracle_p = sub.add_parser(
        "oracle", help="print dense spectrum/ground energy of a fixture")
    oracle_p.add_argument("hamiltonian", help="operator fixture file")
    oracle_p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map those to config errors.
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report, don't traceback
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
