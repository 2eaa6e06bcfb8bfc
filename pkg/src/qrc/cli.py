"""Command-line front end.

Six commands cover the workflow: ``generate`` integrates a model and writes
a trajectory CSV, ``train`` fits a reservoir readout, ``predict`` runs the
trained model autonomously, ``reconstruct`` drives it open loop, ``sweep``
launches a parameter study, and ``lyapunov`` estimates the largest Lyapunov
exponent.  Persistent settings live in an INI config file (see
``qrc --dump-default-config``); any single value can be overridden with
``--set section.key=value``.  Exit codes: 0 success, 2 usage or validation
error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import sys
from collections import namedtuple
from typing import Optional

import numpy as np

from .dynamics import (
    ConvectionParams,
    DivergedTrajectoryError,
    TimeSeries,
    largest_lyapunov,
    lorenz63_rhs,
    lorenz8_rhs,
    mackey_glass_series,
    narma2_series,
    rk4_integrate,
)
from .experiments import (
    SCENARIOS,
    SweepSpec,
    _STREAM_DATA,
    aggregates_path,
    opcount_scan,
    records_path,
    run_sweep,
)
from .qsim import NoiseConfig
from .reservoir import (
    CrcConfig,
    DivergedPredictionError,
    QrcConfig,
    closed_loop_predict,
    horizon,
    load_model,
    mse,
    open_loop_reconstruct,
    save_model,
    train,
)

FOUR_PI = 4.0 * math.pi

_ODE_MODELS = {"l63": (lorenz63_rhs, 3), "l8": (lorenz8_rhs, 8)}
_GENERATE_MODELS = ("l63", "l8", "narma2", "mackey_glass")
# opcount is a planning scenario: it costs circuits instead of running them
_SWEEP_SCENARIOS = SCENARIOS + ("opcount",)


class UsageError(Exception):
    """Bad flags, bad config values, or unusable input files (exit 2)."""


# ---------------------------------------------------------------------------
# configuration schema

_Key = namedtuple("_Key", "kind default help")

_SCHEMA = {
    "dynamics": {
        "sigma": _Key("float", 10.0, "Prandtl number"),
        "r": _Key("float", 28.0, "reduced Rayleigh number (Rayleigh over critical)"),
        "b": _Key("float", 8.0 / 3.0, "geometric factor fixing the cell aspect ratio"),
    },
    "model": {
        "kind": _Key("choice:qrcm,crcm", "qrcm", "reservoir family"),
        "n": _Key("int", 7, "qubit count (qrcm)"),
        "eps": _Key("float", 0.2, "leaking rate in [0, 1]"),
        "shots": _Key("int", 0, "measurement shots per step; 0 means exact probabilities"),
        "seed": _Key("int", 0, "seed for bias angles, random matrices and shot noise"),
        "reduced": _Key("bool", False, "single-block circuit with a feedback subset (qrcm)"),
        "n_feedback": _Key("int", 14, "feedback probabilities kept in reduced mode"),
        "input_scale": _Key("float", FOUR_PI, "rotation-angle prefactor applied to [0, 1] inputs"),
        "block_size": _Key("optint", None, "split the reduced register into blocks of this size; empty keeps it entangled"),
        "n_res": _Key("int", 512, "reservoir units (crcm)"),
        "density": _Key("float", 0.2, "recurrent matrix density (crcm)"),
        "spectral_radius": _Key("float", 1.01, "recurrent matrix spectral radius (crcm)"),
    },
    "model.noise": {
        "p_gate": _Key("float", 0.0, "depolarizing probability after every gate"),
        "p_meas": _Key("float", 0.0, "measurement bit-flip probability per qubit"),
        "p_reset": _Key("float", 0.0, "reset error probability per qubit"),
    },
    "training": {
        "washout": _Key("int", 50, "leading reservoir steps discarded before the fit"),
        "gamma": _Key("float", 1e-6, "ridge regularization strength; 0 is plain least squares"),
        "inputs": _Key("strs", (), "input column labels, comma separated; empty means all columns"),
        "targets": _Key("strs", (), "target column labels; empty means all columns"),
    },
    "sweep": {
        "scenario": _Key("choice:" + ",".join(_SWEEP_SCENARIOS), "closed_loop_l63", "scenario to run"),
        "seeds": _Key("int", 10, "realizations per grid cell"),
        "base_seed": _Key("int", 0, "seed offset; run r uses base_seed + r"),
        "train_steps": _Key("optint", None, "training window length incl. washout; empty uses the scenario convention"),
        "washout": _Key("optint", None, "discarded leading steps; empty uses the scenario convention"),
        "test_steps": _Key("optint", None, "test window length; empty uses the scenario convention"),
        "dt": _Key("optfloat", None, "integration step; empty uses the scenario convention"),
    },
    "sweep.grid": {
        "n": _Key("ints", (), "qubit counts; empty keeps the scenario default axis"),
        "eps": _Key("floats", (), "leaking rates"),
        "gamma": _Key("floats", (), "ridge strengths"),
        "p": _Key("ints", (), "block sizes (pblock_l8)"),
        "n_res": _Key("ints", (), "classical reservoir sizes (crcm_regularization)"),
        "crcm_eps": _Key("floats", (), "classical leaking rates (crcm_regularization)"),
        "qrcm_eps": _Key("floats", (), "quantum leaking rates (crcm_regularization)"),
        "model": _Key("strs", (), "reservoir families (crcm_regularization)"),
        "env": _Key("strs", (), "execution environments (reduced_noisy_l8)"),
        "task": _Key("strs", (), "benchmark tasks (benchmark_leakrate)"),
        "shots": _Key("strs", (), "shot counts, or auto for 2^(10+n) (reduced_noisy_l8)"),
    },
}


def _parse_value(path: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind == "optint":
            return None if raw == "" or raw.lower() == "none" else int(raw)
        if kind == "optfloat":
            return None if raw == "" or raw.lower() == "none" else float(raw)
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip()) if raw else ()
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip()) if raw else ()
        if kind == "strs":
            return tuple(v.strip() for v in raw.split(",") if v.strip()) if raw else ()
        if kind.startswith("choice:"):
            choices = kind[len("choice:"):].split(",")
            if raw not in choices:
                raise UsageError(f"{path}: must be one of {', '.join(choices)}, got {raw!r}")
            return raw
    except ValueError:
        raise UsageError(f"{path}: cannot parse {raw!r} as {kind}") from None
    raise AssertionError(f"unhandled kind {kind}")


def _format_default(opt: _Key) -> str:
    v = opt.default
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


class RunConfig:
    """Parsed configuration: schema defaults, overlaid by an INI file,
    overlaid by --set assignments.  Tracks which keys were given explicitly
    so env-var fallbacks apply only to untouched seeds."""

    def __init__(self) -> None:
        self.values = {sec: {k: opt.default for k, opt in keys.items()}
                       for sec, keys in _SCHEMA.items()}
        self.explicit: set = set()

    def get(self, path: str):
        section, key = path.rsplit(".", 1)
        return self.values[section][key]

    def is_explicit(self, path: str) -> bool:
        return path in self.explicit

    def set_path(self, path: str, raw: str) -> None:
        section, _, key = path.rpartition(".")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise UsageError(f"unknown config key {path!r}; see --dump-default-config")
        self.values[section][key] = _parse_value(path, _SCHEMA[section][key].kind, raw)
        self.explicit.add(path)

    def load_file(self, path: str) -> None:
        if not os.path.exists(path):
            raise UsageError(f"config file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                cp.read_file(fh, source=path)
        except configparser.Error as exc:
            raise UsageError(f"cannot parse config: {exc}") from None
        if cp.defaults():
            raise UsageError(f"{path}: a DEFAULT section is not supported")
        for section in cp.sections():
            if section not in _SCHEMA:
                raise UsageError(f"{path}: unknown config section [{section}]; "
                                 f"valid sections: {', '.join(_SCHEMA)}")
            for key, raw in cp[section].items():
                self.set_path(f"{section}.{key}", raw)


def default_config_text() -> str:
    """The annotated reference file: every key, its default, one comment."""
    out = io.StringIO()
    out.write("# qrc run configuration (INI).  Every key is shown with its default;\n"
              "# omitted keys keep their defaults and unknown keys are an error.\n"
              "# Any value can also be set per run with --set section.key=value.\n")
    for section, keys in _SCHEMA.items():
        out.write(f"\n[{section}]\n")
        for key, opt in keys.items():
            out.write(f"# {opt.help}\n")
            out.write(f"{key} = {_format_default(opt)}\n")
    return out.getvalue()


def _config_epilog() -> str:
    lines = ["configuration keys (set in an INI file via --config, or with "
             "--set section.key=value):"]
    for section, keys in _SCHEMA.items():
        lines.append(f"  [{section}]")
        for key, opt in keys.items():
            default = _format_default(opt) or "(empty)"
            lines.append(f"    {key} = {default}")
            lines.append(f"        {opt.help}")
    lines.append("")
    lines.append("environment: QRC_SEED overrides every seed default; explicit "
                 "--seed flags and config keys still win.")
    return "\n".join(lines)


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg.load_file(args.config)
    for assignment in getattr(args, "overrides", None) or []:
        path, sep, raw = assignment.partition("=")
        if not sep:
            raise UsageError(f"--set expects section.key=value, got {assignment!r}")
        cfg.set_path(path.strip(), raw)
    return cfg


def _env_seed() -> Optional[int]:
    raw = os.environ.get("QRC_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"QRC_SEED must be an integer, got {raw!r}") from None


def _resolve_seed(flag_value: Optional[int], cfg: Optional[RunConfig], path: str) -> int:
    """Precedence: explicit flag, explicit config key, QRC_SEED, default."""
    if flag_value is not None:
        return flag_value
    if cfg is not None and cfg.is_explicit(path):
        return cfg.get(path)
    env = _env_seed()
    if env is not None:
        return env
    return cfg.get(path) if cfg is not None else 0


# ---------------------------------------------------------------------------
# output helpers (temp + rename so partial files never land on disk)

def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_series(path: str, series: TimeSeries) -> None:
    _ensure_parent(path)
    tmp = f"{path}.partial"
    series.to_csv(tmp)
    os.replace(tmp, path)


def _write_text(path: str, text: str) -> None:
    _ensure_parent(path)
    tmp = f"{path}.partial"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_model(path: str, model) -> None:
    _ensure_parent(path)
    tmp = f"{path}.partial"
    save_model(model, tmp)
    os.replace(tmp, path)


def _read_series(path: str) -> TimeSeries:
    if not os.path.exists(path):
        raise UsageError(f"data file not found: {path}")
    try:
        return TimeSeries.from_csv(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_model(path: str):
    if not os.path.exists(path):
        raise UsageError(f"model file not found: {path}")
    try:
        return load_model(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: not a valid model file ({exc})") from None


# ---------------------------------------------------------------------------
# generate

def _model_dt(model: str, flag_dt: Optional[float]) -> float:
    if model == "narma2":
        if flag_dt is not None and flag_dt != 1.0:
            raise UsageError("narma2 is a unit-step map; --dt must be 1")
        return 1.0
    if flag_dt is not None:
        if flag_dt <= 0.0:
            raise UsageError(f"--dt must be positive, got {flag_dt}")
        return flag_dt
    return 0.1 if model == "mackey_glass" else 0.02


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    if args.transient is not None and args.transient < 0:
        raise UsageError(f"--transient must be >= 0, got {args.transient}")
    dt = _model_dt(args.model, args.dt)
    seed = _resolve_seed(args.seed, None, "")
    params_doc: dict = {}

    if args.model in _ODE_MODELS:
        transient = 1000 if args.transient is None else args.transient
        params = ConvectionParams(sigma=cfg.get("dynamics.sigma"),
                                  r=cfg.get("dynamics.r"),
                                  b=cfg.get("dynamics.b"))
        rhs, ndof = _ODE_MODELS[args.model]
        rng = np.random.default_rng([seed, _STREAM_DATA])
        x0 = rng.uniform(-1.0, 1.0, size=ndof)
        ts = rk4_integrate(rhs, x0, dt, transient + args.steps, args=(params,))
        series = TimeSeries(tau=ts.tau[transient:] - ts.tau[transient],
                            data=ts.data[transient:], labels=ts.labels, dt=dt)
        params_doc = {"sigma": params.sigma, "r": params.r, "b": params.b}
    elif args.model == "narma2":
        transient = 0 if args.transient is None else args.transient
        u, y = narma2_series(transient + args.steps + 1)
        series = TimeSeries(tau=np.arange(args.steps + 1, dtype=float),
                            data=np.column_stack([u, y])[transient:],
                            labels=("u", "y"), dt=1.0)
    else:
        transient = 0 if args.transient is None else args.transient
        try:
            ts = mackey_glass_series(transient + args.steps, dt=dt)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        series = TimeSeries(tau=ts.tau[transient:] - ts.tau[transient],
                            data=ts.data[transient:], labels=ts.labels, dt=dt)

    _write_series(args.out, series)
    meta = {
        "model": args.model,
        "steps": args.steps,
        "dt": dt,
        "seed": seed,
        "transient": transient,
        "rows": series.rows,
        "columns": ["tau", *series.labels],
        "params": params_doc,
    }
    _write_text(args.out + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out} ({series.rows} rows, {1 + len(series.labels)} columns) "
          f"and {args.out}.meta.json")
    return 0


# ---------------------------------------------------------------------------
# train

def _select_labels(cfg: RunConfig, path: str, series: TimeSeries):
    labels = cfg.get(path)
    if not labels:
        return None
    missing = [lab for lab in labels if lab not in series.labels]
    if missing:
        raise UsageError(f"{path}: column(s) {', '.join(missing)} not in data "
                         f"(has {', '.join(series.labels)})")
    return list(labels)


def _build_reservoir_config(cfg: RunConfig, n_in: int):
    kind = cfg.get("model.kind")
    seed = _resolve_seed(None, cfg, "model.seed")
    try:
        if kind == "qrcm":
            noise = NoiseConfig(p_gate=cfg.get("model.noise.p_gate"),
                                p_meas=cfg.get("model.noise.p_meas"),
                                p_reset=cfg.get("model.noise.p_reset"))
            return QrcConfig.make(
                n=cfg.get("model.n"),
                eps=cfg.get("model.eps"),
                shots=cfg.get("model.shots"),
                seed=seed,
                reduced=cfg.get("model.reduced"),
                n_feedback=cfg.get("model.n_feedback"),
                input_scale=cfg.get("model.input_scale"),
                noise=None if noise.is_noiseless else noise,
                block_size=cfg.get("model.block_size"),
            )
        return CrcConfig.build(
            n_res=cfg.get("model.n_res"),
            n_in=n_in,
            eps=cfg.get("model.eps"),
            density=cfg.get("model.density"),
            spectral_radius=cfg.get("model.spectral_radius"),
            seed=seed,
        )
    except ValueError as exc:
        # constructor rejections are config mistakes, not runtime failures
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    cfg = _load_config(args)
    gamma = cfg.get("training.gamma")
    if gamma < 0.0:
        raise UsageError(f"training.gamma must be >= 0, got {gamma}")
    washout = cfg.get("training.washout")
    if washout < 0:
        raise UsageError(f"training.washout must be >= 0, got {washout}")

    series = _read_series(args.data)
    if args.rows is not None:
        if args.rows < 2:
            raise UsageError(f"--rows must be >= 2, got {args.rows}")
        if args.rows > series.rows:
            raise UsageError(f"--rows {args.rows} exceeds the {series.rows} rows in {args.data}")
        series = TimeSeries(tau=series.tau[:args.rows], data=series.data[:args.rows],
                            labels=series.labels, dt=series.dt)
    if series.rows < washout + 2:
        raise UsageError(f"{args.data} has {series.rows} rows; training needs "
                         f"at least washout + 2 = {washout + 2}")
    inputs = _select_labels(cfg, "training.inputs", series)
    targets = _select_labels(cfg, "training.targets", series)
    n_in = len(inputs) if inputs else len(series.labels)
    rcfg = _build_reservoir_config(cfg, n_in)

    try:
        model = train(rcfg, series, washout, gamma, inputs, targets)
    except ValueError as exc:
        # typically the singular ridge solve; the message names ridge_gamma
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_model(args.out, model)
    print(f"training residual MSE: {model.train_mse:.17g}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# predict / reconstruct

def _truth_window(truth: TimeSeries, labels: tuple, steps: int,
                  pred: TimeSeries, source: str) -> np.ndarray:
    missing = [lab for lab in labels if lab not in truth.labels]
    if missing:
        raise UsageError(f"{source}: column(s) {', '.join(missing)} not in data")
    cols = [truth.labels.index(lab) for lab in labels]
    data = truth.data[:, cols]
    # prefer alignment by time: the truth file may be the full trajectory the
    # model was trained on a prefix of
    if pred.dt > 0.0 and truth.rows >= 2:
        idx = int(round((pred.tau[0] - truth.tau[0]) / pred.dt))
        if 0 <= idx < truth.rows and abs(truth.tau[idx] - pred.tau[0]) <= 0.25 * pred.dt:
            if truth.rows - idx >= steps:
                return data[idx:idx + steps]
            raise UsageError(f"{source} covers only {truth.rows - idx} of the "
                             f"{steps} predicted steps")
    # otherwise treat it as a detached window; steps + 1 rows start at the
    # last training sample
    if truth.rows == steps + 1:
        return data[1:]
    if truth.rows >= steps:
        return data[:steps]
    raise UsageError(f"{source} has {truth.rows} rows; need at least {steps}")


def cmd_predict(args) -> int:
    model = _read_model(args.model)
    if not model.closed_loop_capable:
        raise UsageError(
            "model was trained open loop (inputs "
            f"{', '.join(model.input_labels)} != outputs {', '.join(model.labels)}); "
            "closed-loop prediction feeds outputs back as inputs")
    if args.threshold <= 0.0:
        raise UsageError(f"--threshold must be positive, got {args.threshold}")
    if args.lyapunov is not None and args.lyapunov <= 0.0:
        raise UsageError(f"--lyapunov must be positive, got {args.lyapunov}")

    truth = _read_series(args.data) if args.data else None
    if args.steps is not None:
        steps = args.steps
    elif truth is not None:
        steps = truth.rows - 1
    else:
        raise UsageError("give --steps, or --data to predict over a truth window")
    if steps < 1:
        raise UsageError(f"prediction needs at least 1 step, got {steps}")

    pred = closed_loop_predict(model, steps)
    _write_series(args.out, pred)
    print(f"wrote {args.out} ({pred.rows} rows)")

    if truth is not None:
        ref = TimeSeries(tau=pred.tau,
                         data=_truth_window(truth, model.labels, steps, pred, args.data),
                         labels=model.labels, dt=pred.dt)
        print(f"MSE: {mse(pred, ref):.17g}")
        h = horizon(pred, ref, threshold=args.threshold, lyapunov=args.lyapunov)
        unit = "Lyapunov times" if args.lyapunov is not None else "time units"
        print(f"prediction horizon: {h:.17g} {unit} (threshold {args.threshold})")
    return 0


def cmd_reconstruct(args) -> int:
    model = _read_model(args.model)
    series = _read_series(args.data)
    missing = [lab for lab in model.input_labels if lab not in series.labels]
    if missing:
        raise UsageError(f"{args.data}: column(s) {', '.join(missing)} required "
                         f"by the model are not in the data")
    if args.washout < 0:
        raise UsageError(f"--washout must be >= 0, got {args.washout}")
    if series.rows < args.washout + 2:
        raise UsageError(f"{args.data} has {series.rows} rows; need at least "
                         f"washout + 2 = {args.washout + 2}")

    recon = open_loop_reconstruct(model, series,
                                  init_state=None if args.from_rest else "final",
                                  washout=args.washout)
    _write_series(args.out, recon)
    print(f"wrote {args.out} ({recon.rows} rows)")

    missing = [lab for lab in model.labels if lab not in series.labels]
    if not missing:
        cols = [series.labels.index(lab) for lab in model.labels]
        ref = TimeSeries(tau=recon.tau, data=series.data[args.washout + 1:, cols],
                         labels=model.labels, dt=series.dt)
        print(f"MSE: {mse(recon, ref):.17g}")
    else:
        print(f"MSE: not available (data lacks {', '.join(missing)})")
    return 0


# ---------------------------------------------------------------------------
# sweep

def _parse_n_range(raw: str) -> tuple:
    """Accept 1..32 (inclusive), a comma list, or a single integer."""
    raw = raw.strip()
    try:
        if ".." in raw:
            lo_s, hi_s = raw.split("..", 1)
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise UsageError(f"empty range {raw!r}")
            return tuple(range(lo, hi + 1))
        if "," in raw:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return (int(raw),)
    except ValueError:
        raise UsageError(f"--n expects N, N..M or a comma list, got {raw!r}") from None


def _sweep_opcount(args) -> int:
    n_values = _parse_n_range(args.n) if args.n else tuple(range(1, 33))
    try:
        rows = opcount_scan(n_values, args.xi)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"{'n':>4} {'quantum_ops':>16} {'classical_ops':>16}  cheaper")
    for row in rows:
        marker = "quantum" if row.quantum_cheaper else "classical"
        print(f"{row.n:>4} {row.quantum_ops:>16.6g} {row.classical_ops:>16.6g}  {marker}")
    crossover = next((row.n for row in rows if row.quantum_cheaper), None)
    if crossover is None:
        print(f"no crossover within the scanned range (xi = {args.xi:g})")
    else:
        print(f"quantum update cheaper from n = {crossover} on (xi = {args.xi:g})")
    if args.out:
        lines = ["n,xi,quantum_ops,classical_ops,quantum_cheaper"]
        lines += [f"{r.n},{r.xi:.17g},{r.quantum_ops:.17g},{r.classical_ops:.17g},{r.quantum_cheaper}"
                  for r in rows]
        path = os.path.join(args.out, "opcount.csv")
        _write_text(path, "\n".join(lines) + "\n")
        print(f"wrote {path}")
    return 0


def _grid_from_config(cfg: RunConfig) -> dict:
    grid = {}
    for axis, values in cfg.values["sweep.grid"].items():
        if values == ():
            continue
        if axis == "shots":
            # mixed axis: integers with the literal auto passing through
            parsed = []
            for v in values:
                if v == "auto":
                    parsed.append(v)
                else:
                    try:
                        parsed.append(int(v))
                    except ValueError:
                        raise UsageError(f"sweep.grid.shots: expected integers or "
                                         f"auto, got {v!r}") from None
            grid[axis] = tuple(parsed)
        else:
            grid[axis] = values
    return grid


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    scenario = args.scenario if args.scenario is not None else cfg.get("sweep.scenario")
    if scenario == "opcount":
        return _sweep_opcount(args)
    if args.n is not None or args.xi != 3.0:
        raise UsageError("--n and --xi apply to the opcount scenario; "
                         "use --set sweep.grid.n=... for others")
    if scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {scenario!r}; valid scenarios: "
                         f"{', '.join(_SWEEP_SCENARIOS)}")
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")

    overrides = {"grid": _grid_from_config(cfg),
                 "seeds": args.seeds if args.seeds is not None else cfg.get("sweep.seeds"),
                 "base_seed": _resolve_seed(None, cfg, "sweep.base_seed")}
    for field in ("train_steps", "washout", "test_steps", "dt"):
        value = cfg.get(f"sweep.{field}")
        if value is not None:
            overrides[field] = value
    try:
        spec = SweepSpec.for_scenario(scenario, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out_dir = args.out if args.out else os.path.join("runs", scenario)
    os.makedirs(out_dir, exist_ok=True)
    result = run_sweep(spec, out_dir=out_dir, jobs=args.jobs, resume=args.resume)

    names = sorted({name for agg in result.aggregates for name, _ in agg.key})
    header = [*names, "median", "mean", "std", "count", "diverged"]
    print("  ".join(f"{h:>12}" for h in header))
    for agg in result.aggregates:
        cell = dict(agg.key)
        row = [f"{cell.get(name, ''):>12}" if not isinstance(cell.get(name), float)
               else f"{cell[name]:>12.6g}" for name in names]
        if agg.note:
            row += [f"{agg.note:>12}", f"{'':>12}", f"{'':>12}",
                    f"{agg.count:>12}", f"{agg.diverged:>12}"]
        else:
            row += [f"{agg.median:>12.6g}", f"{agg.mean:>12.6g}", f"{agg.std:>12.6g}",
                    f"{agg.count:>12}", f"{agg.diverged:>12}"]
        print("  ".join(row))
    print(f"wrote {records_path(out_dir)} and {aggregates_path(out_dir)}")
    return 0


# ---------------------------------------------------------------------------
# lyapunov

def cmd_lyapunov(args) -> int:
    cfg = _load_config(args)
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    if args.dt <= 0.0:
        raise UsageError(f"--dt must be positive, got {args.dt}")
    params = ConvectionParams(sigma=cfg.get("dynamics.sigma"),
                              r=cfg.get("dynamics.r"), b=cfg.get("dynamics.b"))
    rhs, ndof = _ODE_MODELS[args.system]
    seed = _resolve_seed(args.seed, None, "")
    rng = np.random.default_rng([seed, _STREAM_DATA])
    x0 = rng.uniform(-1.0, 1.0, size=ndof)
    try:
        lam = largest_lyapunov(rhs, x0, args.dt, args.steps,
                               renorm_interval=args.renorm, args=(params,))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"largest Lyapunov exponent: {lam:.17g}")
    if lam > 0.0:
        print(f"Lyapunov time: {1.0 / lam:.17g}")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="INI", help="configuration file")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE", help="override one config value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrc",
        description="Quantum and classical reservoir computing for "
                    "low-order convection models.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--dump-default-config", nargs="?", const="-", metavar="PATH",
                        help="write the annotated default config (stdout if no path) and exit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", help="integrate a model and write a trajectory CSV")
    p.add_argument("--model", required=True, choices=_GENERATE_MODELS)
    p.add_argument("--steps", required=True, type=int,
                   help="post-transient steps; the CSV gets steps + 1 rows")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--dt", type=float, help="time step (default 0.02 for ODE models, 0.1 for mackey_glass)")
    p.add_argument("--seed", type=int, help="initial-condition seed (default QRC_SEED or 0)")
    p.add_argument("--transient", type=int,
                   help="leading steps dropped (default 1000 for ODE models, 0 for maps)")
    _add_common(p)

    p = sub.add_parser("train", help="fit a reservoir readout on a trajectory")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--rows", type=int,
                   help="train on the first ROWS rows only (default: the whole file)")
    _add_common(p)

    p = sub.add_parser("predict", help="run a trained model in closed loop")
    p.add_argument("--model", required=True, help="model JSON from qrc train")
    p.add_argument("--out", required=True, help="predicted CSV path")
    p.add_argument("--steps", type=int, help="steps to predict (default: truth rows - 1)")
    p.add_argument("--data", help="truth CSV for MSE and horizon")
    p.add_argument("--lyapunov", type=float, metavar="LAMBDA1",
                   help="rescale the printed horizon to Lyapunov time units")
    p.add_argument("--threshold", type=float, default=0.3,
                   help="normalized error defining the horizon (default 0.3)")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="drive a trained model open loop")
    p.add_argument("--model", required=True, help="model JSON from qrc train")
    p.add_argument("--data", required=True, help="CSV providing the input columns")
    p.add_argument("--out", required=True, help="reconstructed CSV path")
    p.add_argument("--washout", type=int, default=0,
                   help="reservoir steps discarded before the readout (default 0)")
    p.add_argument("--from-rest", action="store_true",
                   help="start from the rest state instead of the end-of-training state")
    _add_common(p)

    p = sub.add_parser("sweep", help="run a parameter study")
    p.add_argument("--scenario", help="one of " + ", ".join(_SWEEP_SCENARIOS))
    p.add_argument("--out", help="output directory (default runs/<scenario>)")
    p.add_argument("--seeds", type=int, help="realizations per cell")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--resume", action="store_true",
                   help="skip (cell, seed) pairs already in the record file")
    p.add_argument("--n", metavar="N|N..M|LIST", help="qubit range for the opcount scenario")
    p.add_argument("--xi", type=float, default=3.0,
                   help="gates per qubit for the opcount scenario (default 3)")
    _add_common(p)

    p = sub.add_parser("lyapunov", help="estimate the largest Lyapunov exponent")
    p.add_argument("--system", required=True, choices=tuple(_ODE_MODELS))
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--seed", type=int, help="initial-condition seed (default QRC_SEED or 0)")
    p.add_argument("--renorm", type=int, default=10,
                   help="steps between separation rescalings (default 10)")
    _add_common(p)

    return parser


_DISPATCH = {
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
    "lyapunov": cmd_lyapunov,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_default_config is not None:
        if args.dump_default_config == "-":
            sys.stdout.write(default_config_text())
        else:
            _write_text(args.dump_default_config, default_config_text())
            print(f"wrote {args.dump_default_config}")
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a command is required", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergedTrajectoryError, DivergedPredictionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
