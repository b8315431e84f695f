"""Command-line driver: master-equation, trajectory, ensemble, and protocol
runs, with figure presets whose CSV/JSON outputs feed the plotting scripts.

Output contract (all times in 1/kappa units, 17-significant-digit CSV):
  series.csv   trajectory (or mean) observable columns
  master.csv   unconditioned master-equation overlay (figure subcommand)
  events.csv   detection times and channels
  summary.json run parameters, record statistics, feedback phases, endpoints
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import hilbert as hb
from . import mastereq, metrics, protocol
from .errors import ConfigError, RnpmError
from .kernels import BACKEND_NAME
from .models import single_qubit_model, single_qubit_initial, two_qubit_model, two_qubit_initial
from .params import CHANNEL_SINGLE, QubitAmplitudes, SystemParams
from .protocol import ProtocolParams, run_protocol, run_protocol_ensemble
from .trajectory import RngStream, run_ensemble, run_pure_trajectory, run_mixed_trajectory

FLOAT_FMT = "%.16e"

FIGURE_PRESETS = {
    "fig2": dict(
        system="1q", chi=1.0, kappa=1.0, alpha="1", eta=1.0, gamma=0.0,
        t_end=10.0, dt=1e-3, sample_every=10, engine="pure", qubits="plus",
    ),
    "fig4-odd": dict(
        system="2q", chi=1.0, kappa=1.0, alpha="1", eta=1.0, gamma=0.0,
        cutoff=12, trunc_tol=1e-5, k=1, t_end=4.0, dt=2e-3, sample_every=5,
        engine="pure", qubits="uniform", record_class="odd",
    ),
    "fig4-even": dict(
        system="2q", chi=1.0, kappa=1.0, alpha="1", eta=1.0, gamma=0.0,
        cutoff=12, trunc_tol=1e-5, k=1, t_end=4.0, dt=2e-3, sample_every=5,
        engine="pure", qubits="uniform", record_class="even",
    ),
    "fig5": dict(
        system="2q", chi=1.0, kappa=1.0, alpha="1", eta=0.9, gamma=0.0,
        cutoff=10, trunc_tol=1e-4, k=1, t_end=4.0, dt=2e-3, sample_every=5,
        engine="mixed", qubits="uniform",
    ),
    "fig6": dict(
        system="2q", chi=1.0, kappa=1.0, alpha="1", eta=1.0, gamma=0.1 / math.pi,
        cutoff=10, trunc_tol=1e-4, k=1, t_end=4.0, dt=2e-3, sample_every=5,
        engine="mixed", qubits="uniform",
    ),
}

QUBIT_PRESETS_1Q = {
    "plus": (1.0, 1.0),
    "g": (1.0, 0.0),
    "e": (0.0, 1.0),
}
QUBIT_PRESETS_2Q = {
    "uniform": (1.0, 1.0, 1.0, 1.0),
    "gg": (1.0, 0.0, 0.0, 0.0),
    "ge": (0.0, 1.0, 0.0, 0.0),
    "eg": (0.0, 0.0, 1.0, 0.0),
    "ee": (0.0, 0.0, 0.0, 1.0),
    "bell": (1.0, 0.0, 0.0, 1.0),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("system")
    g.add_argument("--figure", choices=sorted(FIGURE_PRESETS), help="parameter preset")
    g.add_argument("--system", choices=["1q", "2q"], help="one or two qubit-resonator pairs")
    g.add_argument("--chi", type=float, default=1.0, help="dispersive shift (rad/time)")
    g.add_argument("--kappa", type=float, default=1.0, help="resonator decay rate")
    g.add_argument("--alpha", type=str, default="1", help="drive amplitude (complex ok)")
    g.add_argument("--eta", type=float, default=None, help="both detector efficiencies")
    g.add_argument("--eta-plus", type=float, default=1.0)
    g.add_argument("--eta-minus", type=float, default=1.0)
    g.add_argument("--gamma", type=float, default=0.0, help="qubit relaxation rate")
    g.add_argument("--cutoff", type=int, default=None, help="Fock levels per mode (default auto)")
    g.add_argument("--trunc-tol", type=float, default=1e-9, help="allowed coherent-state tail")
    g.add_argument("--qubits", type=str, default=None, help="preset name or comma amplitudes")
    r = common.add_argument_group("run")
    r.add_argument("--config", type=str, default=None, help="key=value file; flags win")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--stream", type=int, default=0)
    r.add_argument("--dt", type=float, default=None)
    r.add_argument("--t-end", type=float, default=None)
    r.add_argument("--sample-every", type=int, default=None)
    r.add_argument("--out", type=str, default=".", help="output directory")
    r.add_argument("--engine", choices=["pure", "mixed"], default=None)
    r.add_argument("--threads", type=int, default=None, help="ensemble worker processes")

    p = argparse.ArgumentParser(prog="rnpm", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("me", parents=[common], help="unconditioned master-equation run")
    sub.add_parser("traj", parents=[common], help="single conditioned trajectory")
    pe = sub.add_parser("ensemble", parents=[common], help="trajectory/protocol ensemble")
    pe.add_argument("--n", type=int, default=100, help="number of trajectories")
    pp = sub.add_parser("protocol", parents=[common], help="parity-measurement protocol run")
    pf = sub.add_parser("figure", parents=[common], help="trajectory + master-equation preset bundle")
    for sp in (pp, pe, pf):
        sp.add_argument("--k", type=int, default=1, help="t_f = k pi / chi")
        sp.add_argument("--variant", choices=["standard", "tunable"], default="standard")
        sp.add_argument("--t-prime", type=float, default=None, help="tunable: coupling restore time")
        sp.add_argument("--repetitions", type=int, default=1)
        sp.add_argument("--threshold", type=float, default=0.01, help="projection threshold on P_-1")
    return p


def _apply_config_file(args: argparse.Namespace, argv) -> argparse.Namespace:
    """Fill namespace values from a key=value file; explicit flags win."""
    if not args.config:
        return args
    text = Path(args.config).read_text()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line without '=': {line!r}")
        raw_key, val = (s.strip() for s in line.split("=", 1))
        key = raw_key.replace("-", "_")
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {raw_key!r}")
        if "--" + key.replace("_", "-") in argv:
            continue  # the command line overrides the file
        if key in ("alpha", "qubits", "system", "engine", "variant", "figure", "out", "config"):
            parsed = val
        else:
            try:
                parsed = int(val)
            except ValueError:
                try:
                    parsed = float(val)
                except ValueError:
                    parsed = val
        setattr(args, key, parsed)
    return args


def _merge_preset(args) -> dict:
    cfg = {}
    if args.figure:
        preset = dict(FIGURE_PRESETS[args.figure])
        if "eta" in preset:
            eta = preset.pop("eta")
            preset["eta_plus"] = preset["eta_minus"] = eta
        cfg.update(preset)
    explicit = {
        "system": args.system, "chi": args.chi, "kappa": args.kappa, "alpha": args.alpha,
        "eta_plus": args.eta_plus, "eta_minus": args.eta_minus, "gamma": args.gamma,
        "cutoff": args.cutoff, "trunc_tol": args.trunc_tol, "qubits": args.qubits,
        "dt": args.dt, "t_end": args.t_end, "sample_every": args.sample_every,
        "engine": args.engine,
    }
    if args.eta is not None:
        explicit["eta_plus"] = explicit["eta_minus"] = args.eta
    defaults = {"chi": 1.0, "kappa": 1.0, "alpha": "1", "eta_plus": 1.0, "eta_minus": 1.0,
                "gamma": 0.0, "trunc_tol": 1e-9}
    for key, val in explicit.items():
        if val is None:
            continue
        if args.figure and key in defaults and val == defaults.get(key) and key in cfg:
            continue  # untouched default does not override the preset
        cfg[key] = val
    cfg.setdefault("system", "1q")
    cfg.setdefault("engine", "pure")
    cfg.setdefault("dt", 1e-3 / cfg.get("kappa", 1.0))
    cfg.setdefault("sample_every", 10)
    cfg.setdefault("t_end", 10.0 if cfg["system"] == "1q" else 4.0)
    cfg.setdefault("qubits", "plus" if cfg["system"] == "1q" else "uniform")
    for key in ("k", "variant", "t_prime", "repetitions", "threshold"):
        if hasattr(args, key) and getattr(args, key) is not None:
            cfg.setdefault(key, getattr(args, key))
    return cfg


def _system_params(cfg) -> SystemParams:
    return SystemParams(
        chi=cfg["chi"],
        kappa=cfg["kappa"],
        alpha=complex(str(cfg["alpha"]).replace(" ", "")),
        eta_plus=cfg.get("eta_plus", 1.0),
        eta_minus=cfg.get("eta_minus", 1.0),
        gamma=cfg.get("gamma", 0.0),
        fock_cutoff=cfg.get("cutoff"),
        truncation_tol=cfg.get("trunc_tol", 1e-9),
    )


def _qubit_amplitudes(cfg) -> QubitAmplitudes:
    spec, system = str(cfg["qubits"]), cfg["system"]
    table = QUBIT_PRESETS_1Q if system == "1q" else QUBIT_PRESETS_2Q
    if spec in table:
        vals = table[spec]
    else:
        vals = [complex(s) for s in spec.split(",")]
    v = np.asarray(vals, dtype=complex)
    expected = 2 if system == "1q" else 4
    if v.size != expected:
        raise ConfigError(f"{system} run needs {expected} qubit amplitudes, got {v.size}")
    return QubitAmplitudes(v / np.linalg.norm(v))


def validate_config(cfg) -> list[str]:
    """All violations, not just the first."""
    errs = []
    try:
        _system_params(cfg)
    except ConfigError as e:
        errs.extend(str(e).split("; "))
    except ValueError as e:
        errs.append(f"alpha: {e}")
    try:
        _qubit_amplitudes(cfg)
    except (ConfigError, ValueError) as e:
        errs.append(str(e))
    if cfg.get("k") is not None and cfg["k"] < 1:
        errs.append(f"k must be >= 1, got {cfg['k']}")
    if cfg.get("threshold") is not None and not 0 < cfg["threshold"] < 0.5:
        errs.append(f"projection threshold must lie in (0, 0.5), got {cfg['threshold']}")
    if cfg.get("repetitions") is not None and cfg["repetitions"] < 1:
        errs.append(f"repetitions must be >= 1, got {cfg['repetitions']}")
    if cfg["dt"] <= 0:
        errs.append(f"dt must be > 0, got {cfg['dt']}")
    else:
        top = max(cfg["chi"], cfg["kappa"], cfg.get("gamma", 0.0))
        if top > 0 and cfg["dt"] > 1e-2 / top:
            errs.append(f"dt = {cfg['dt']:.3g} violates dt <= 1e-2/max rate = {1e-2 / top:.3g}")
    if cfg["t_end"] <= 0:
        errs.append("t_end must be > 0")
    if cfg["sample_every"] < 1:
        errs.append("sample_every must be >= 1")
    if cfg.get("n") is not None and cfg["n"] < 1:
        errs.append("n must be >= 1")
    return errs


# ---------------------------------------------------------------------------
# writers


def write_csv(path: Path, times: np.ndarray, columns: dict, order=None, kappa: float = 1.0) -> None:
    """Time column in 1/kappa units; fixed 17-significant-digit notation."""
    names = list(order) if order else sorted(columns)
    with open(path, "w", newline="") as f:
        f.write(",".join(["t"] + names) + "\n")
        for i, t in enumerate(times):
            row = [FLOAT_FMT % (t * kappa)] + [FLOAT_FMT % columns[name][i] for name in names]
            f.write(",".join(row) + "\n")


def write_events(path: Path, record, kappa: float = 1.0) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,channel\n")
        for t, ch in record.events:
            f.write(f"{FLOAT_FMT % (t * kappa)},{ch}\n")


def write_summary(path: Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _summary_base(cfg, params: SystemParams, q: QubitAmplitudes, seed, stream, subcommand) -> dict:
    return {
        "subcommand": subcommand,
        "figure": cfg.get("figure"),
        "system": cfg["system"],
        "engine": cfg.get("engine"),
        "backend": BACKEND_NAME,
        "seed": seed,
        "stream": stream,
        "dt": cfg["dt"],
        "t_end": cfg["t_end"],
        "sample_every": cfg["sample_every"],
        "params": {
            "chi": params.chi,
            "kappa": params.kappa,
            "alpha": params.alpha,
            "eta_plus": params.eta_plus,
            "eta_minus": params.eta_minus,
            "gamma": params.gamma,
            "fock_cutoff": params.cutoff_for(1 if cfg["system"] == "1q" else 2),
            "truncation_tol": params.truncation_tol,
        },
        "qubits": [complex(c) for c in q.vec],
        "k": cfg.get("k"),
        "variant": cfg.get("variant"),
        "repetitions": cfg.get("repetitions"),
        "projection_threshold": cfg.get("threshold"),
    }


# ---------------------------------------------------------------------------
# per-system runners


FIG2_ORDER = ["sqrt_n", "quad_x", "quad_p_msz", "sigma_x", "sigma_y"]
FIG4_ORDER = ["rate_plus", "rate_minus", "sxx", "syy", "szz"]


def _fig2_columns(columns: dict) -> dict:
    cols = dict(columns)
    cols["sqrt_n"] = np.sqrt(np.clip(cols.pop("n"), 0.0, None))
    return cols


def _run_traj_1q(cfg, params, q, seed, stream):
    model = single_qubit_model(params)
    initial = single_qubit_initial(q, params)
    obs = metrics.single_qubit_observables(model.space)
    traj = run_pure_trajectory(
        model, initial, params, RngStream(seed, stream), cfg["t_end"],
        dt=cfg["dt"], sample_every=cfg["sample_every"], observables=obs,
    ) if cfg["engine"] == "pure" else run_mixed_trajectory(
        model, initial, params, RngStream(seed, stream), cfg["t_end"],
        dt=cfg["dt"], sample_every=cfg["sample_every"], observables=obs,
    )
    phi = 2.0 * params.chi * sum(traj.record.times(CHANNEL_SINGLE))
    corrected = _apply_1q_feedback(traj.final_state, phi)
    fb = [
        {"time": cfg["t_end"], "column": "sigma_x", "value": metrics.expectation(corrected, obs["sigma_x"])},
        {"time": cfg["t_end"], "column": "sigma_y", "value": metrics.expectation(corrected, obs["sigma_y"])},
    ]
    return traj, _fig2_columns(traj.columns), {"phi": phi, "feedback_points": fb}


def _apply_1q_feedback(state, phi):
    gate = hb.embed(hb.phase_gate(phi), 0, state.space)
    if hasattr(state, "amplitudes"):
        v = gate.matrix @ state.amplitudes
        return hb.PureState(state.space, v / np.linalg.norm(v))
    m = gate.matrix @ state.matrix @ gate.matrix.conj().T
    return hb.MixedState(state.space, 0.5 * (m + m.conj().T), normalized=False)


def _run_me_1q(cfg, params, q):
    model = single_qubit_model(params).lindblad()
    initial = single_qubit_initial(q, params).to_mixed()
    obs = metrics.single_qubit_observables(model.space)
    res = mastereq.evolve(
        model, initial,
        mastereq.IntegratorConfig(dt=cfg["dt"], t_end=cfg["t_end"], sample_every=cfg["sample_every"]),
        observables=obs, keep_states=False,
    )
    return res.times, _fig2_columns(res.columns)


def _protocol_params(cfg, params) -> ProtocolParams:
    return ProtocolParams(
        system=params,
        k=cfg.get("k", 1),
        variant=cfg.get("variant", "standard"),
        t_prime=cfg.get("t_prime"),
        repetitions=cfg.get("repetitions", 1),
        projection_threshold=cfg.get("threshold", 0.01),
        t_end=cfg["t_end"],
        dt=cfg["dt"],
        sample_every=cfg["sample_every"],
    )


def _run_protocol_2q(cfg, params, q, seed, stream):
    pp = _protocol_params(cfg, params)
    want = cfg.get("record_class")
    tries = 0
    while True:
        out = run_protocol(q, pp, cfg["engine"], RngStream(seed, stream + tries))
        if want is None:
            break
        is_odd = out.record.n_minus > 0
        if (want == "odd" and is_odd) or (
            want == "even" and not is_odd and out.record.n_plus > 0
        ):
            break
        tries += 1
        if tries > 500:
            raise RnpmError(f"no {want} record found near seed {seed}")
    fb = [
        {"time": cfg["t_end"], "column": name, "value": metrics.expectation(out.final_qubits, op)}
        for name, op in protocol._STABILIZERS.items()
    ]
    extra = {
        "stream_used": stream + tries,
        "n_plus": out.record.n_plus,
        "n_minus": out.record.n_minus,
        "phi_plus": out.phases.phi_plus,
        "phi_minus": out.phases.phi_minus,
        "p_minus1": out.p_minus1,
        "fidelity_to_prediction": out.fidelity_to_prediction,
        "iterations_used": out.iterations_used,
        "label": out.label,
        "feedback_points": fb,
    }
    return out, extra


def _run_me_2q(cfg, params, q):
    model = two_qubit_model(params).lindblad()
    initial = two_qubit_initial(q, params).to_mixed()
    obs = metrics.two_qubit_observables(model.space, params.eta_plus, params.eta_minus)
    res = mastereq.evolve(
        model, initial,
        mastereq.IntegratorConfig(dt=cfg["dt"], t_end=cfg["t_end"], sample_every=cfg["sample_every"]),
        observables=obs, keep_states=False,
    )
    return res.times, res.columns


# ---------------------------------------------------------------------------
# subcommand entry points


def cmd_me(cfg, out_dir: Path) -> dict:
    params = _system_params(cfg)
    q = _qubit_amplitudes(cfg)
    if cfg["system"] == "1q":
        times, cols = _run_me_1q(cfg, params, q)
        order = FIG2_ORDER
    else:
        times, cols = _run_me_2q(cfg, params, q)
        order = FIG4_ORDER
    write_csv(out_dir / "series.csv", times, cols, order, kappa=params.kappa)
    summary = _summary_base(cfg, params, q, cfg["seed"], cfg["stream"], "me")
    summary["columns"] = ["t"] + order
    summary["final"] = {name: cols[name][-1] for name in order}
    return summary


def cmd_traj(cfg, out_dir: Path) -> dict:
    params = _system_params(cfg)
    q = _qubit_amplitudes(cfg)
    seed, stream = cfg["seed"], cfg["stream"]
    if cfg["system"] == "1q":
        traj, cols, extra = _run_traj_1q(cfg, params, q, seed, stream)
        order = FIG2_ORDER
        record = traj.record
    else:
        out, extra = _run_protocol_2q(cfg, params, q, seed, stream)
        cols = out.trajectory.columns
        traj = out.trajectory
        order = FIG4_ORDER
        record = out.record
    write_csv(out_dir / "series.csv", traj.times, cols, order, kappa=params.kappa)
    write_events(out_dir / "events.csv", record, kappa=params.kappa)
    summary = _summary_base(cfg, params, q, seed, stream, "traj")
    summary["columns"] = ["t"] + order
    summary.update(extra)
    summary.setdefault("n_plus", record.n_plus)
    summary.setdefault("n_minus", record.n_minus)
    summary["n_events"] = len(record.events)
    return summary


def cmd_ensemble(cfg, out_dir: Path, n: int, threads) -> dict:
    params = _system_params(cfg)
    q = _qubit_amplitudes(cfg)
    summary = _summary_base(cfg, params, q, cfg["seed"], cfg["stream"], "ensemble")
    summary["n_trajectories"] = n
    if cfg["system"] == "1q":
        model = single_qubit_model(params)
        initial = single_qubit_initial(q, params)
        obs = metrics.single_qubit_observables(model.space)
        stats = run_ensemble(
            model, initial, params, n, cfg["seed"], cfg["t_end"],
            dt=cfg["dt"], sample_every=cfg["sample_every"], observables=obs,
            engine=cfg["engine"], n_workers=threads,
        )
        cols = _fig2_columns(stats.means)
        order = FIG2_ORDER
        write_csv(out_dir / "series.csv", stats.times, cols, order, kappa=params.kappa)
        hist = stats.count_histogram
    else:
        pp = _protocol_params(cfg, params)
        stats = run_protocol_ensemble(
            q, pp, cfg["engine"], n, cfg["seed"],
            repeated=cfg.get("repetitions", 1) > 1, n_workers=threads,
        )
        order = FIG4_ORDER
        write_csv(out_dir / "series.csv", stats.times, stats.means, order, kappa=params.kappa)
        hist = stats.count_histogram
        summary["mean_p_minus1"] = float(stats.p_minus1.mean())
        summary["stderr_p_minus1"] = float(stats.p_minus1.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        summary["mean_iterations"] = float(stats.iterations.mean())
        summary["mean_feedback"] = {k: float(v.mean()) for k, v in stats.feedback_values.items()}
    summary["columns"] = ["t"] + order
    summary["count_histogram"] = {f"{k[0]},{k[1]}": v for k, v in sorted(hist.items())}
    summary["mean_detected_photons"] = float(
        sum((kp + km) * c for (kp, km), c in hist.items()) / n
    )
    return summary


def cmd_protocol(cfg, out_dir: Path) -> dict:
    params = _system_params(cfg)
    q = _qubit_amplitudes(cfg)
    out, extra = _run_protocol_2q(cfg, params, q, cfg["seed"], cfg["stream"])
    write_csv(out_dir / "series.csv", out.trajectory.times, out.trajectory.columns, FIG4_ORDER,
              kappa=params.kappa)
    write_events(out_dir / "events.csv", out.record, kappa=params.kappa)
    summary = _summary_base(cfg, params, q, cfg["seed"], cfg["stream"], "protocol")
    summary["columns"] = ["t"] + FIG4_ORDER
    summary.update(extra)
    return summary


def cmd_figure(cfg, out_dir: Path) -> dict:
    params = _system_params(cfg)
    q = _qubit_amplitudes(cfg)
    seed, stream = cfg["seed"], cfg["stream"]
    if cfg["system"] == "1q":
        traj, cols, extra = _run_traj_1q(cfg, params, q, seed, stream)
        order = FIG2_ORDER
        record = traj.record
        me_times, me_cols = _run_me_1q(cfg, params, q)
        times = traj.times
    else:
        out, extra = _run_protocol_2q(cfg, params, q, seed, stream)
        cols, times, record = out.trajectory.columns, out.trajectory.times, out.record
        order = FIG4_ORDER
        me_times, me_cols = _run_me_2q(cfg, params, q)
    write_csv(out_dir / "series.csv", times, cols, order, kappa=params.kappa)
    write_csv(out_dir / "master.csv", me_times, me_cols, order, kappa=params.kappa)
    write_events(out_dir / "events.csv", record, kappa=params.kappa)
    summary = _summary_base(cfg, params, q, seed, stream, "figure")
    summary["columns"] = ["t"] + order
    summary.update(extra)
    summary.setdefault("n_plus", record.n_plus)
    summary.setdefault("n_minus", record.n_minus)
    summary["n_events"] = len(record.events)
    return summary


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, argv)
        cfg = _merge_preset(args)
        cfg["seed"] = args.seed
        cfg["stream"] = args.stream
        cfg["figure"] = args.figure
        if args.subcommand == "ensemble":
            cfg["n"] = args.n
        errors = validate_config(cfg)
        if errors:
            for e in errors:
                print(f"error: {e}", file=sys.stderr)
            return 1
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        if args.subcommand == "me":
            summary = cmd_me(cfg, out_dir)
        elif args.subcommand == "traj":
            summary = cmd_traj(cfg, out_dir)
        elif args.subcommand == "ensemble":
            summary = cmd_ensemble(cfg, out_dir, args.n, args.threads)
        elif args.subcommand == "protocol":
            summary = cmd_protocol(cfg, out_dir)
        elif args.subcommand == "figure":
            summary = cmd_figure(cfg, out_dir)
        else:  # pragma: no cover
            raise RnpmError(f"unhandled subcommand {args.subcommand}")
        summary["wall_clock_s"] = round(time.perf_counter() - t0, 3)
        write_summary(out_dir / "summary.json", summary)
    except RnpmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
