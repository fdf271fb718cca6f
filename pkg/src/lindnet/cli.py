"""Command-line front end.

Subcommands:

  run       integrate one configuration, write a TSV trajectory + JSON metadata
  sweep     rerun a configuration while stepping one parameter, tabulate a readout
  steady    stationary state of a configuration
  validate  cross-check the integrator against the closed-form solutions
  presets   list available presets with their defaults

Configurations are single-document YAML files; see README for the schema.
Exit codes: 0 success, 1 bad input or configuration, 2 a propagated state
broke a physical invariant, 3 the validate battery found a mismatch.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from lindnet import __version__, oracle
from lindnet.dynamics import (
    InvariantViolation,
    LindbladGenerator,
    PropagationConfig,
    build_superoperator,
    propagate,
    steady_states,
)
from lindnet.hilbert import SiteDescriptor, basis_state, dicke_state
from lindnet.model import (
    Extraction,
    Injection,
    NetworkSpec,
    PresetParams,
    preset,
    preset_defaults,
    preset_description,
    preset_names,
)
from lindnet.observables import unitarity_distance

FLOAT_FMT = "%.17g"


class UsageError(Exception):
    """Bad command line or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise UsageError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a single mapping")
    return data


def _resolve_times(cfg: dict, default: np.ndarray | None) -> np.ndarray:
    spec = cfg.get("times")
    if spec is None:
        if default is None:
            raise UsageError("config needs a times entry (no preset default here)")
        return default
    if isinstance(spec, dict):
        missing = {"start", "stop", "num"} - set(spec)
        if missing:
            raise UsageError(f"times mapping missing keys: {sorted(missing)}")
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    raise UsageError("times must be a list or a {start, stop, num} mapping")


def _network_gen(cfg: dict) -> tuple[LindbladGenerator, dict]:
    try:
        spec = NetworkSpec.from_dict(cfg["network"])
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad network block: {exc}") from exc
    return LindbladGenerator.from_network(spec), {"network": spec.to_dict()}


def _build_run(cfg: dict, seed_override: int | None):
    """Returns (generator, initial state, times, metadata)."""
    has_preset = "preset" in cfg
    has_network = "network" in cfg
    if has_preset == has_network:
        raise UsageError("config must contain exactly one of 'preset' or 'network'")
    if has_preset:
        name = cfg["preset"]
        params = dict(cfg.get("params", {}))
        if seed_override is not None:
            if "seed" not in preset_defaults(name):
                raise UsageError(f"preset {name!r} accepts no seed")
            params["seed"] = seed_override
        try:
            run = preset(PresetParams(name, params))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        gen = LindbladGenerator.from_network(run.spec)
        return gen, run.initial, _resolve_times(cfg, run.times), dict(run.metadata)

    gen, meta = _network_gen(cfg)
    basis = gen.basis
    init = cfg.get("initial")
    if not isinstance(init, dict):
        raise UsageError("network configs need an initial block")
    if "occupations" in init:
        state = basis_state(basis, tuple(int(o) for o in init["occupations"]))
    elif "dicke" in init:
        block = init["dicke"]
        state = dicke_state(basis, list(block["sites"]), int(block["n"]))
    else:
        raise UsageError("initial block needs 'occupations' or 'dicke'")
    meta["initial"] = _jsonable(init)
    return gen, state, _resolve_times(cfg, None), meta


def _parse_observables(tokens, gen: LindbladGenerator | None):
    """Returns (column specs, coherence index pairs). gen=None skips label checks."""
    cols = []
    pairs = []
    simple = {"purity", "purity_rate", "trace", "min_eigenvalue", "hermiticity_defect"}
    labels = tuple(s.label for s in gen.basis.sites) if gen is not None and gen.basis else None
    for tok in tokens:
        tok = str(tok)
        if tok in simple:
            cols.append(("simple", tok))
        elif tok.startswith("population:"):
            label = tok.split(":", 1)[1]
            if labels is not None and label not in labels:
                raise UsageError(f"observable {tok!r}: no site labelled {label!r}")
            cols.append(("population", label))
        elif tok.startswith("coherence:"):
            body = tok.split(":", 1)[1]
            try:
                i, j = (int(part) for part in body.split(","))
            except ValueError:
                raise UsageError(f"observable {tok!r}: expected coherence:<i>,<j>") from None
            cols.append(("coherence", (i, j)))
            pairs.append((i, j))
        else:
            raise UsageError(f"unknown observable {tok!r}")
    return cols, tuple(pairs)


_DEFAULT_OBSERVABLES = ["purity", "purity_rate", "trace", "min_eigenvalue"]


def _default_observables(gen: LindbladGenerator) -> list[str]:
    front = [f"population:{s.label}" for s in gen.basis.sites] if gen.basis else []
    return front + _DEFAULT_OBSERVABLES


def _column_names(cols) -> list[str]:
    names = []
    for kind, arg in cols:
        if kind == "simple":
            names.append(arg)
        elif kind == "population":
            names.append(f"population_{arg}")
        else:
            i, j = arg
            names.append(f"coherence_{i}_{j}_re")
            names.append(f"coherence_{i}_{j}_im")
    return names


def _column_values(cols, traj, k: int) -> list[str]:
    row = []
    for kind, arg in cols:
        if kind == "simple":
            row.append(_fmt(getattr(traj, arg)[k]))
        elif kind == "population":
            row.append(_fmt(traj.population(arg)[k]))
        else:
            z = traj.coherences[arg][k]
            row.append(_fmt(z.real))
            row.append(_fmt(z.imag))
    return row


def _write_tsv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def _write_meta(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _propagation_config(cfg: dict, times: np.ndarray, pairs, dt_override) -> PropagationConfig:
    try:
        return PropagationConfig(
            times=times,
            dt=float(dt_override if dt_override is not None else cfg.get("dt", 1e-3)),
            method=cfg.get("method", "fixed_step_rk4"),
            coherences=pairs,
            snapshots=cfg.get("snapshots", "none"),
            sector_filter=cfg.get("sector_filter", "auto"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _out_base(args, default_stem: str) -> Path:
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir / default_stem


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    gen, state, times, meta = _build_run(cfg, args.seed)
    tokens = cfg.get("observables") or _default_observables(gen)
    cols, pairs = _parse_observables(tokens, gen)
    pconfig = _propagation_config(cfg, times, pairs, args.dt)
    traj = propagate(gen, state, pconfig)

    base = _out_base(args, Path(args.config).stem)
    header = ["t"] + _column_names(cols)
    rows = ([_fmt(traj.times[k])] + _column_values(cols, traj, k)
            for k in range(traj.times.size))
    tsv = base.with_suffix(".tsv")
    _write_tsv(tsv, header, rows)
    _write_meta(base.with_suffix(".meta.json"), {
        "command": "run",
        "version": __version__,
        "config": cfg,
        "columns": header,
        "run_metadata": meta,
        "propagation": traj.metadata,
    })
    print(f"wrote {tsv}")
    return 0


def _set_dotted(cfg: dict, path: str, value) -> None:
    parts = path.split(".")
    node = cfg
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def _sweep_values(block: dict) -> list[float]:
    if "values" in block:
        return [float(v) for v in block["values"]]
    if "logspace" in block:
        ls = block["logspace"]
        return [float(v) for v in np.logspace(math.log10(float(ls["start"])),
                                              math.log10(float(ls["stop"])),
                                              int(ls["num"]))]
    raise UsageError("sweep block needs 'values' or 'logspace'")


def _sweep_one(task):
    """One sweep point; module-level so it can cross a process boundary."""
    cfg, seed, value, at_times, token = task
    run_cfg = copy.deepcopy(cfg)
    _set_dotted(run_cfg, run_cfg["sweep"]["path"], value)
    gen, state, _, _ = _build_run(run_cfg, seed)
    cols, pairs = _parse_observables([token], gen)
    times = np.asarray(sorted({0.0, *at_times}), dtype=float)
    pconfig = _propagation_config(run_cfg, times, pairs, None)
    traj = propagate(gen, state, pconfig)
    out = []
    for t in at_times:
        k = int(np.argmin(np.abs(times - t)))
        out.append((value, float(times[k]), _column_values(cols, traj, k)))
    return out


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    block = cfg.get("sweep")
    if not isinstance(block, dict):
        raise UsageError("config needs a sweep block for the sweep command")
    for key in ("path", "observable", "at_times"):
        if key not in block:
            raise UsageError(f"sweep block missing {key!r}")
    values = _sweep_values(block)
    at_times = [float(t) for t in block["at_times"]]
    token = str(block["observable"])
    cols, _ = _parse_observables([token], None)
    tasks = [(cfg, args.seed, v, at_times, token) for v in values]

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]

    name = block["path"].split(".")[-1]
    header = [name, "t"] + _column_names(cols)
    rows = []
    for chunk in results:
        for value, t, payload in chunk:
            rows.append([_fmt(value), _fmt(t)] + payload)
    base = _out_base(args, Path(args.config).stem + "_sweep")
    tsv = base.with_suffix(".tsv")
    _write_tsv(tsv, header, rows)
    _write_meta(base.with_suffix(".meta.json"), {
        "command": "sweep",
        "version": __version__,
        "config": cfg,
        "columns": header,
        "n_points": len(values),
    })
    print(f"wrote {tsv}")
    return 0


def _cmd_steady(args) -> int:
    cfg = _load_config(args.config)
    if "preset" in cfg:
        gen, _, _, meta = _build_run(cfg, args.seed)
    else:
        gen, meta = _network_gen(cfg)
    result = steady_states(gen)
    labels = tuple(s.label for s in gen.basis.sites) if gen.basis else ()
    pops = []
    if labels:
        occ = gen.basis.occupation_table
        diag = np.real(np.diag(result.state))
        pops = [float(diag @ occ[:, k]) for k in range(len(labels))]
    base = _out_base(args, Path(args.config).stem + "_steady")
    header = [f"population_{lbl}" for lbl in labels] + ["multiplicity", "residual"]
    row = [_fmt(p) for p in pops] + [str(result.multiplicity), _fmt(result.residual)]
    tsv = base.with_suffix(".tsv")
    _write_tsv(tsv, header, [row])
    _write_meta(base.with_suffix(".meta.json"), {
        "command": "steady",
        "version": __version__,
        "config": cfg,
        "state_re": result.state.real,
        "state_im": result.state.imag,
        "multiplicity": result.multiplicity,
        "residual": result.residual,
        "zero_eigenvalues": [complex(z) for z in result.zero_eigenvalues],
        "run_metadata": meta,
    })
    print(f"wrote {tsv}")
    return 0


def _cmd_presets(args) -> int:
    for name in preset_names():
        print(f"{name}: {preset_description(name)}")
        defaults = preset_defaults(name)
        for key in sorted(defaults):
            print(f"    {key} = {defaults[key]!r}")
    return 0


# ---------------------------------------------------------------------------
# validate: integrator vs closed forms


def _check(name: str, measured: float, bound: float, lines: list) -> bool:
    ok = measured <= bound
    lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: measured {measured:.3e}, "
                 f"bound {bound:.3e}")
    return ok


def _validate_battery() -> tuple[list[str], bool]:
    lines: list[str] = []
    ok = True

    # entrywise transfer channel against a fixed-seed mixed state
    rng = np.random.default_rng(7)
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho0 = A @ A.conj().T
    rho0 /= rho0.trace()
    run = preset("two_site_transfer", gamma=1.0)
    gen = LindbladGenerator.from_network(run.spec)
    times = np.linspace(0.0, 6.0, 61)
    traj = propagate(gen, rho0, PropagationConfig(times=times, snapshots="all",
                                                  sector_filter="off"))
    err = max(float(np.abs(traj.snapshots[k]
                           - oracle.two_site_transfer_map(rho0, 1.0, t)).max())
              for k, t in enumerate(times))
    ok &= _check("incoherent transfer channel", err, 1e-6, lines)

    # dimer populations with a lossy second site
    run = preset("four_site_congestion", J=1.0, gamma=0.1, excitations=1)
    gen = LindbladGenerator.from_network(run.spec)
    times = np.linspace(0.0, 40.0, 201)
    traj = propagate(gen, run.initial,
                     PropagationConfig(times=times, method="superoperator_expm"))
    n1_ref, n2_ref = oracle.four_site_single_excitation(1.0, 0.1, times)
    err = max(float(np.abs(traj.population("1") - n1_ref).max()),
              float(np.abs(traj.population("2") - n2_ref).max()))
    ok &= _check("dimer leak populations", err, 1e-6, lines)

    # pumped dimer stationary state
    sol = oracle.pump_two_site(2.0, 0.2, 0.3)
    run = preset("two_site_pump")
    gen = LindbladGenerator.from_network(run.spec)
    st = steady_states(gen)
    err = float(np.abs(st.state - sol.state).max())
    ok &= _check("pumped dimer stationary state", err, 1e-9, lines)

    # hop-off sink: distance and purity closed forms
    run = preset("hop_transfer", J=2.0, gamma=1.0)
    gen = LindbladGenerator.from_network(run.spec)
    times = np.linspace(0.0, 8.0, 81)
    traj = propagate(gen, run.initial,
                     PropagationConfig(times=times, method="superoperator_expm",
                                       snapshots="all"))
    sol = oracle.hop_transfer_closed_forms(2.0, 1.0, times)
    proj = np.zeros((2, 2), dtype=complex)
    proj[1, 1] = 1.0
    ref_full = np.kron(sol.dark_state, proj)
    H = gen.hamiltonian
    dist = np.array([unitarity_distance(traj.snapshots[k], ref_full, H, t)
                     for k, t in enumerate(times)])
    err_d = float(np.abs(dist - sol.distance).max())
    err_p = float(np.abs(traj.purity - sol.purity).max())
    ok &= _check("sink distance law", err_d, 1e-6, lines)
    ok &= _check("sink purity law", err_p, 1e-6, lines)
    return lines, ok


def _calibration_lines() -> list[str]:
    """Show which hopping convention reproduces the closed-form frequency."""
    J, gin, gout = 2.0, 0.2, 0.3
    sol = oracle.pump_two_site(J, gin, gout)
    target = sol.omega / 2.0
    lines = ["hopping calibration (pumped dimer, J = 2, rates 0.2 / 0.3):"]
    for label, element in (("J/2", J / 2.0), ("J", J)):
        spec = NetworkSpec(
            sites=(SiteDescriptor("1", "qubit", 2), SiteDescriptor("2", "qubit", 2)),
            hoppings=(("1", "2", element),),
            jumps=(Injection("1", gin), Extraction("2", gout)),
        )
        gen = LindbladGenerator.from_network(spec)
        ev = np.linalg.eigvals(build_superoperator(gen))
        sel = [e.imag for e in ev if abs(e.real + (gin + gout) / 2.0) < 1e-9]
        got = max(sel) if sel else float("nan")
        mark = "  <- matches closed form, used by presets" \
            if abs(got - target) < 1e-6 else ""
        lines.append(f"    element {label}: slow pair imag {got:.6f} "
                     f"(closed form {target:.6f}){mark}")
    return lines


def _cmd_validate(args) -> int:
    lines, ok = _validate_battery()
    for line in lines:
        print(line)
    for line in _calibration_lines():
        print(line)
    if not ok:
        print("validate: MISMATCH against closed forms")
        return 3
    print("validate: all checks passed")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="lindnet",
                     description="Lindblad dynamics of small open quantum networks")
    parser.add_argument("--version", action="version", version=f"lindnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="YAML configuration file")
        p.add_argument("--output", default=".", help="output directory")
        p.add_argument("--dt", type=float, default=None, help="integrator substep override")
        p.add_argument("--seed", type=int, default=None, help="noise seed override")

    p_run = sub.add_parser("run", help="integrate one configuration")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="step one parameter and tabulate a readout")
    common(p_sweep)
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="parallel sweep processes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_steady = sub.add_parser("steady", help="stationary state of a configuration")
    common(p_steady)
    p_steady.set_defaults(func=_cmd_steady)

    p_val = sub.add_parser("validate", help="cross-check against closed forms")
    p_val.set_defaults(func=_cmd_validate)

    p_pre = sub.add_parser("presets", help="list presets and their defaults")
    p_pre.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
