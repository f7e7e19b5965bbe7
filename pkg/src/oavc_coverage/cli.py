"""Command line front end: scenario files, runs and the distance report.

Scenario files are flat ``key = value`` text with dotted keys, for example::

    final_mixture.component.1.mean = 1 1
    final_mixture.component.1.cov = 0.7 0.2 0.5   # a11 a12 a22
    obstacle.2.radius = 1.5

Anything after ``#`` is a comment. Indexed groups (components, obstacles,
explicit positions) are numbered from 1 without gaps. Every key not given
takes the default of the corresponding dataclass field.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import re
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from ._backend import BACKEND
from .control import Gains
from .density import GaussianMixture
from .engine import Scenario, SimOutput, run
from .errors import CoverageError, ScenarioError
from .geometry import Disk, Rect
from .gmm import EmConfig
from .quadrature import QuadratureConfig

EXIT_OK, EXIT_ERROR, EXIT_STEP_LIMIT = 0, 1, 2
BUNDLED = ("paper_s5",)
REPORT_RATIO = 0.25

# plain scalar keys -> (Scenario field, parser)
_SCALARS = {
    "n": ("n", int),
    "seed": ("seed", int),
    "rates.a": ("a", float),
    "rates.b": ("b", float),
    "rates.alpha": ("alpha", float),
    "dt": ("dt", float),
    "c": ("c", int),
    "delta_tau": ("delta_tau", float),
    "K": ("K", int),
    "epsilon": ("epsilon", float),
    "max_wall_steps": ("max_wall_steps", int),
    "t0": ("t0", float),
    "snapshot_every": ("snapshot_every", int),
}
_GROUPS = {
    "gains": (Gains, {"k0": float, "k1": float, "u_max": float}),
    "quadrature": (
        QuadratureConfig,
        {"triangle_order": int, "grid_nx": int, "grid_ny": int, "mixture_method": str},
    ),
    "em": (EmConfig, {"max_iters": int, "rel_tol": float, "cov_floor": float, "n_restarts": int}),
}
_INDEXED = re.compile(
    r"^(?:(initial_mixture|final_mixture)\.component\.(\d+)\.(mean|cov|weight)"
    r"|(obstacle)\.(\d+)\.(center|radius)"
    r"|(initial)\.position\.(\d+))$"
)


def fmt(x) -> str:
    """Shortest decimal string that reads back as the same double."""
    return repr(float(x))


def _floats(key, text, count):
    try:
        vals = [float(v) for v in text.split()]
    except ValueError:
        raise ScenarioError(key, f"expected numbers, got {text!r}") from None
    if len(vals) != count:
        raise ScenarioError(key, f"expected {count} numbers, got {len(vals)}")
    return vals


def _scalar(key, text, kind):
    if kind is bool:
        low = text.lower()
        if low not in ("true", "false", "1", "0"):
            raise ScenarioError(key, f"expected true/false, got {text!r}")
        return low in ("true", "1")
    try:
        return kind(text)
    except ValueError:
        raise ScenarioError(key, f"expected {kind.__name__}, got {text!r}") from None


def read_pairs(text):
    """Ordered ``{key: value}`` from scenario text; duplicate keys are rejected."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ScenarioError(key, f"given twice (line {lineno})")
        pairs[key] = value
    return pairs


def _ordered(items, what):
    """Values of a ``{index: value}`` dict, checking indices run 1..N."""
    idx = sorted(items)
    if idx != list(range(1, len(idx) + 1)):
        raise ScenarioError(what, f"indices must run 1..N without gaps, got {idx}")
    return [items[i] for i in idx]


def _mixture(name, comps):
    if not comps:
        return None
    means, covs, weights = [], [], []
    for j, comp in enumerate(_ordered(comps, name), 1):
        missing = {"mean", "cov", "weight"} - comp.keys()
        if missing:
            raise ScenarioError(f"{name}.component.{j}", f"missing {', '.join(sorted(missing))}")
        means.append(comp["mean"])
        covs.append(comp["cov"])
        weights.append(comp["weight"])
    try:
        return GaussianMixture(means, covs, weights)
    except CoverageError as exc:
        raise ScenarioError(name, str(exc)) from None


def scenario_from_pairs(pairs) -> Scenario:
    kwargs = {}
    groups = {g: {} for g in _GROUPS}
    mixtures = {"initial_mixture": {}, "final_mixture": {}}
    obstacles, positions = {}, {}
    for key, value in pairs.items():
        if key == "domain":
            kwargs["domain"] = _floats(key, value, 4)
        elif key == "limit_step":
            kwargs["limit_step"] = _scalar(key, value, bool)
        elif key in _SCALARS:
            name, kind = _SCALARS[key]
            kwargs[name] = _scalar(key, value, kind)
        elif key.split(".", 1)[0] in _GROUPS and key.count(".") == 1:
            group, name = key.split(".")
            kinds = _GROUPS[group][1]
            if name not in kinds:
                raise ScenarioError(key, "unknown key")
            groups[group][name] = _scalar(key, value, kinds[name])
        else:
            m = _INDEXED.match(key)
            if m is None:
                raise ScenarioError(key, "unknown key")
            if m.group(1):
                comp = mixtures[m.group(1)].setdefault(int(m.group(2)), {})
                part = m.group(3)
                count = {"mean": 2, "cov": 3, "weight": 1}[part]
                vals = _floats(key, value, count)
                comp[part] = vals[0] if part == "weight" else vals
            elif m.group(4):
                obs = obstacles.setdefault(int(m.group(5)), {})
                part = m.group(6)
                vals = _floats(key, value, 2 if part == "center" else 1)
                obs[part] = vals if part == "center" else vals[0]
            else:
                positions[int(m.group(8))] = tuple(_floats(key, value, 2))

    for required in ("domain", "n"):
        if required not in kwargs:
            raise ScenarioError(required, "missing")
    try:
        kwargs["domain"] = Rect(*kwargs["domain"])
    except CoverageError as exc:
        raise ScenarioError("domain", str(exc)) from None
    final = _mixture("final_mixture", mixtures["final_mixture"])
    if final is None:
        raise ScenarioError("final_mixture", "missing")
    kwargs["final_mixture"] = final
    initial = _mixture("initial_mixture", mixtures["initial_mixture"])
    if initial is not None:
        kwargs["initial_mixture"] = initial
    if positions:
        kwargs["initial_positions"] = tuple(_ordered(positions, "initial.position"))
    disks = []
    for j, obs in enumerate(_ordered(obstacles, "obstacle") if obstacles else [], 1):
        if set(obs) != {"center", "radius"}:
            raise ScenarioError(f"obstacle.{j}", "needs both center and radius")
        try:
            disks.append(Disk(tuple(obs["center"]), obs["radius"]))
        except CoverageError as exc:
            raise ScenarioError(f"obstacle.{j}", str(exc)) from None
    kwargs["obstacles"] = tuple(disks)
    for group, values in groups.items():
        try:
            kwargs[group] = _GROUPS[group][0](**values)
        except CoverageError as exc:
            raise ScenarioError(group, str(exc)) from None
    return Scenario(**kwargs)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file. Errors name the offending key."""
    return scenario_from_pairs(read_pairs(Path(path).read_text()))


def _mixture_lines(name, mix):
    for j in range(len(mix)):
        c = mix.covs[j]
        base = f"{name}.component.{j + 1}"
        yield f"{base}.mean", f"{fmt(mix.means[j, 0])} {fmt(mix.means[j, 1])}"
        yield f"{base}.cov", f"{fmt(c.a11)} {fmt(c.a12)} {fmt(c.a22)}"
        yield f"{base}.weight", fmt(mix.weights[j])


def scenario_pairs(s: Scenario):
    """Every parameter of ``s`` as ``(key, value)`` text pairs, defaults included."""
    d = s.domain
    yield "domain", " ".join(fmt(v) for v in (d.xmin, d.xmax, d.ymin, d.ymax))
    for key, (name, kind) in _SCALARS.items():
        value = getattr(s, name)
        yield key, fmt(value) if kind is float else str(value)
    yield "limit_step", "true" if s.limit_step else "false"
    for group, (_, kinds) in _GROUPS.items():
        obj = getattr(s, group)
        for name, kind in kinds.items():
            value = getattr(obj, name)
            if value is None:
                continue
            yield f"{group}.{name}", fmt(value) if kind is float else str(value)
    if s.initial_mixture is not None:
        yield from _mixture_lines("initial_mixture", s.initial_mixture)
    for i, p in enumerate(s.initial_positions or (), 1):
        yield f"initial.position.{i}", f"{fmt(p[0])} {fmt(p[1])}"
    yield from _mixture_lines("final_mixture", s.final_mixture)
    for j, o in enumerate(s.obstacles, 1):
        yield f"obstacle.{j}.center", f"{fmt(o.center[0])} {fmt(o.center[1])}"
        yield f"obstacle.{j}.radius", fmt(o.radius)


def serialize_scenario(s: Scenario) -> str:
    return "".join(f"{k} = {v}\n" for k, v in scenario_pairs(s))


def resolve_scenario_path(name) -> Path:
    """A file path, or the name of a bundled scenario such as ``paper_s5``."""
    path = Path(name)
    if path.exists():
        return path
    stem = path.name[:-4] if path.name.endswith(".cfg") else path.name
    if stem in BUNDLED:
        return Path(str(resources.files("oavc_coverage") / "data" / f"{stem}.cfg"))
    raise FileNotFoundError(f"scenario file not found: {name}")


# --------------------------------------------------------------------------
# output files
# --------------------------------------------------------------------------


def _g(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(out: SimOutput, out_dir: Path):
    _write_csv(
        out_dir / "trajectories.csv",
        ["t", "agent", "x", "y", "ux", "uy"],
        ((_g(t), i, _g(x), _g(y), _g(ux), _g(uy)) for t, i, x, y, ux, uy in out.trajectory_rows()),
    )
    _write_csv(
        out_dir / "metrics.csv",
        ["t", "H", "l2_ref", "l2_final", "e_max", "window_k"],
        ((_g(t), _g(h), _g(lr), _g(lf), _g(e), int(k)) for t, h, lr, lf, e, k in out.metrics),
    )
    with open(out_dir / "cells.jsonl", "w") as fh:
        for t, i, verts in out.cells:
            fh.write(json.dumps({"t": float(t), "agent": int(i), "vertices": np.asarray(verts).tolist()}) + "\n")
    _write_csv(
        out_dir / "team_fits.csv",
        ["tau_k", "component", "weight", "mux", "muy", "s11", "s12", "s22"],
        ((_g(row[0]), int(row[1]), *(_g(v) for v in row[2:])) for row in out.team_fits),
    )


def _version():
    from . import __version__

    return f"oavc_coverage {__version__} ({BACKEND})"


def run_command(scenario_path, out_dir, seed=None, max_steps=None, snapshot_every=None) -> int:
    started = datetime.now(timezone.utc).isoformat()
    try:
        path = resolve_scenario_path(scenario_path)
        scenario = parse_scenario(path)
        if seed is not None:
            scenario = dataclasses.replace(scenario, seed=seed)
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"output directory is not writable: {out_dir}")
    except (OSError, CoverageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    manifest = {"scenario": str(path), "seed": scenario.seed, "version": _version(), "started": started}
    error = None
    try:
        out = run(scenario, max_steps=max_steps, snapshot_every=snapshot_every)
    except CoverageError as exc:
        out = getattr(exc, "partial_output", None) or SimOutput(status="error")
        error = f"{type(exc).__name__}: {exc}"
        manifest["diagnostics"] = getattr(exc, "diagnostics", {})
    try:
        write_outputs(out, out_dir)
        manifest.update(
            finished=datetime.now(timezone.utc).isoformat(),
            status="error" if error else out.status,
            blocks=out.blocks,
            substeps=len(out.traj_t),
            windows=out.windows,
        )
        if error:
            manifest["error"] = error
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{out.status} after {out.blocks} blocks, t = {out.metrics[-1][0]:.4g} s; outputs in {out_dir}")
    return EXIT_OK if out.converged else EXIT_STEP_LIMIT


def validate_command(scenario_path) -> int:
    try:
        scenario = parse_scenario(resolve_scenario_path(scenario_path))
    except (OSError, CoverageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    pairs = list(scenario_pairs(scenario))
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        print(f"{k:<{width}}  {v}")
    return EXIT_OK


def read_metrics(out_dir):
    path = Path(out_dir) / "metrics.csv"
    if not path.exists():
        raise FileNotFoundError(f"no metrics file at {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no rows")
    return rows


def distance_report(rows):
    """Summary lines and the pass flag for the terminal/initial ``l2_final`` ratio."""
    lines = []
    passed = False
    for col in ("l2_ref", "l2_final"):
        vals = [float(r[col]) for r in rows if not math.isnan(float(r[col]))]
        if not vals:
            raise ValueError(f"column {col} has no values")
        first, last = vals[0], vals[-1]
        ratio = last / first if first > 0 else math.nan
        drops = sum(b < a for a, b in zip(vals, vals[1:]))
        line = f"{col:<9} initial {first:.6g}  final {last:.6g}  ratio {ratio:.4g}  decreasing {drops}/{len(vals) - 1}"
        if col == "l2_final":
            passed = ratio < REPORT_RATIO
            line += f"  {'PASS' if passed else 'FAIL'} (< {REPORT_RATIO})"
        lines.append(line)
    return lines, passed


def report_command(out_dir) -> int:
    try:
        lines, _ = distance_report(read_metrics(out_dir))
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print("\n".join(lines))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="oavc-coverage", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="simulate a scenario and write output files")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--max-steps", type=int, help="cap on cell/centroid update blocks")
    p_run.add_argument("--snapshot-every", type=int, help="record cells every k-th window")
    p_val = sub.add_parser("validate", help="check a scenario and print its resolved parameters")
    p_val.add_argument("--scenario", required=True)
    p_rep = sub.add_parser("report", help="summarise density distances of a finished run")
    p_rep.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args.scenario, args.out, args.seed, args.max_steps, args.snapshot_every)
    if args.command == "validate":
        return validate_command(args.scenario)
    return report_command(args.out)


if __name__ == "__main__":
    sys.exit(main())
