"""Quantum and classical reservoir computers with a shared training stack.

The quantum reservoir carries a probability vector between steps: each
update re-prepares an n-qubit register from |0...0>, loads the previous
probabilities, the normalized inputs and a fixed set of bias angles
through rotation/CNOT ladders, measures, and blends the result with the
previous vector through the leaking rate.  The classical reservoir is a
standard leaky-tanh echo-state network.  Both feed the same ridge-trained
linear readout, closed-loop predictor and open-loop reconstructor.

Input amplitudes are min-max normalized to [0, 1] from training extremes
before angle encoding (one 4-pi rotation period); training targets stay
raw, so the readout absorbs the scale and no de-normalization happens on
output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import TimeSeries
from .qsim import (
    FOUR_PI,
    BlockPartition,
    NoiseConfig,
    build_reduced_circuit,
    build_reservoir_circuit,
    exact_probabilities,
    noisy_run,
    run_blocked_circuit,
    run_circuit,
    sample_shots,
)

__all__ = [
    "DivergedPredictionError",
    "QrcConfig",
    "CrcConfig",
    "QrcState",
    "ReservoirTrace",
    "OutputWeights",
    "TrainedModel",
    "fit_normalization",
    "normalize_inputs",
    "initial_state",
    "qrcm_step",
    "crcm_step",
    "collect_trace",
    "ridge_fit",
    "readout",
    "train",
    "closed_loop_predict",
    "open_loop_reconstruct",
    "mse",
    "horizon",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1

# RNG stream tags, combined with the config seed as default_rng([seed, tag])
# so beta draws, index selection, training shots, prediction shots and test
# shots never share a stream.
_STREAM_BETA = 0
_STREAM_TRAIN = 1
_STREAM_SELECT = 2
_STREAM_PREDICT = 3
_STREAM_TEST = 4


class DivergedPredictionError(RuntimeError):
    """Raised when a closed-loop readout stops being finite."""


# ---------------------------------------------------------------------------
# configurations

@dataclass
class QrcConfig:
    """Quantum reservoir: n qubits, leaking rate eps, shot count (0 means
    exact probabilities), bias angles beta, and optionally the reduced
    single-block circuit with a fixed feedback subset, a block partition
    for separable simulation, and a noise model."""

    n: int
    eps: float
    shots: int = 0
    seed: int = 0
    beta: Optional[np.ndarray] = None
    reduced: bool = False
    selected_indices: Optional[np.ndarray] = None
    input_scale: float = FOUR_PI
    normalization: Optional[tuple] = None
    noise: Optional[NoiseConfig] = None
    block_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"qubit count must be >= 1, got {self.n}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"leaking rate must lie in [0, 1], got {self.eps}")
        if self.shots < 0:
            raise ValueError(f"shots must be >= 0, got {self.shots}")
        if self.beta is not None:
            self.beta = np.asarray(self.beta, dtype=float)
            if self.beta.shape != (self.n,):
                raise ValueError(f"beta must have shape ({self.n},), got {self.beta.shape}")
        if self.selected_indices is not None:
            idx = np.asarray(self.selected_indices, dtype=int)
            if idx.ndim != 1 or len(np.unique(idx)) != idx.size:
                raise ValueError("selected_indices must be distinct")
            if idx.size and (idx.min() < 0 or idx.max() >= 1 << self.n):
                raise ValueError(f"selected_indices must lie below 2^{self.n}")
            self.selected_indices = idx
        if self.reduced and self.selected_indices is None:
            raise ValueError("reduced mode needs selected_indices")
        if self.block_size is not None:
            if not self.reduced:
                raise ValueError("block partitioning applies to the reduced circuit only")
            if not 1 <= self.block_size <= self.n:
                raise ValueError(f"block_size must lie in [1, n], got {self.block_size}")
            if self.noise is not None and not self.noise.is_noiseless:
                raise ValueError("block-partitioned circuits do not support the noise model")
        if self.normalization is not None:
            lo, hi = self.normalization
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            if lo.shape != hi.shape:
                raise ValueError("normalization bounds must have equal shapes")
            if np.any(hi <= lo):
                raise ValueError("normalization requires max > min for every component")
            self.normalization = (lo, hi)

    @classmethod
    def make(cls, n: int, eps: float, shots: int = 0, seed: int = 0,
             reduced: bool = False, n_feedback: int = 14,
             input_scale: float = FOUR_PI, noise: Optional[NoiseConfig] = None,
             block_size: Optional[int] = None) -> "QrcConfig":
        """Draw the random pieces (bias angles, feedback subset) from the
        seed's dedicated streams."""
        beta = np.random.default_rng([seed, _STREAM_BETA]).uniform(0.0, 2.0 * math.pi, size=n)
        selected = None
        if reduced:
            k = min(n_feedback, 1 << n)
            selected = np.sort(np.random.default_rng([seed, _STREAM_SELECT])
                               .choice(1 << n, size=k, replace=False))
        return cls(n=n, eps=eps, shots=shots, seed=seed, beta=beta, reduced=reduced,
                   selected_indices=selected, input_scale=input_scale, noise=noise,
                   block_size=block_size)

    @property
    def feature_dim(self) -> int:
        return 1 << self.n


@dataclass
class CrcConfig:
    """Classical echo-state reservoir: leaky-tanh units, dense input matrix
    with entries uniform in [-1, 1], sparse recurrent matrix rescaled to a
    prescribed spectral radius."""

    n_res: int
    eps: float
    density: float
    spectral_radius: float
    seed: int
    w_in: np.ndarray
    w_r: np.ndarray

    def __post_init__(self) -> None:
        if self.n_res < 1:
            raise ValueError(f"reservoir size must be >= 1, got {self.n_res}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"leaking rate must lie in [0, 1], got {self.eps}")
        self.w_in = np.atleast_2d(np.asarray(self.w_in, dtype=float))
        self.w_r = np.asarray(self.w_r, dtype=float)
        if self.w_in.shape[0] != self.n_res:
            raise ValueError("w_in must have n_res rows")
        if self.w_r.shape != (self.n_res, self.n_res):
            raise ValueError("w_r must be n_res x n_res")

    @classmethod
    def build(cls, n_res: int, n_in: int, eps: float = 0.12, density: float = 0.2,
              spectral_radius: float = 1.01, seed: int = 0) -> "CrcConfig":
        if not 0.0 < density <= 1.0:
            raise ValueError(f"density must lie in (0, 1], got {density}")
        if spectral_radius <= 0.0:
            raise ValueError(f"spectral radius must be positive, got {spectral_radius}")
        rng = np.random.default_rng([seed, _STREAM_BETA])
        w_in = rng.uniform(-1.0, 1.0, size=(n_res, n_in))
        w_r = rng.uniform(-1.0, 1.0, size=(n_res, n_res))
        w_r *= rng.random(size=(n_res, n_res)) < density
        rho = float(np.max(np.abs(np.linalg.eigvals(w_r))))
        if rho == 0.0:
            raise ValueError("recurrent matrix has zero spectral radius; "
                             "increase density or reservoir size")
        w_r *= spectral_radius / rho
        return cls(n_res=n_res, eps=eps, density=density,
                   spectral_radius=spectral_radius, seed=seed, w_in=w_in, w_r=w_r)

    @property
    def feature_dim(self) -> int:
        return self.n_res


@dataclass
class QrcState:
    """The only memory between quantum reservoir steps: a probability
    vector (the register itself is rebuilt from |0...0> every step)."""

    p: np.ndarray


def initial_state(cfg) -> np.ndarray:
    """Reservoir state at rest: the |0...0> distribution for the quantum
    reservoir, the zero activation vector for the classical one."""
    if isinstance(cfg, QrcConfig):
        p = np.zeros(cfg.feature_dim)
        p[0] = 1.0
        return p
    if isinstance(cfg, CrcConfig):
        return np.zeros(cfg.n_res)
    raise TypeError(f"unknown reservoir config type {type(cfg).__name__}")


# ---------------------------------------------------------------------------
# normalization

def fit_normalization(data: np.ndarray, labels: Sequence[str] = ()) -> tuple:
    """Per-column (min, max) from a training window.

    Raises on a degenerate (constant) column, naming it if labels are given.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    for j in np.nonzero(hi <= lo)[0]:
        name = labels[j] if j < len(labels) else f"column {j}"
        raise ValueError(f"degenerate range for input {name}: min == max == {lo[j]!r}")
    return lo, hi


def normalize_inputs(x: np.ndarray, normalization: tuple) -> np.ndarray:
    """Map componentwise to [0, 1] by the stored training extremes,
    clamping values that fall outside them."""
    if normalization is None:
        raise ValueError("normalization has not been fitted")
    lo, hi = normalization
    x = np.asarray(x, dtype=float)
    if x.shape != lo.shape:
        raise ValueError(f"input shape {x.shape} does not match normalization {lo.shape}")
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


# ---------------------------------------------------------------------------
# reservoir updates

def _qrc_probabilities(cfg: QrcConfig, p: np.ndarray, x_norm: np.ndarray, rng) -> np.ndarray:
    """One circuit execution: fresh distribution for the blend."""
    if cfg.reduced:
        fed_back = p[cfg.selected_indices]
        if cfg.block_size is not None:
            angles = cfg.input_scale * np.concatenate([fed_back, x_norm])
            fresh = run_blocked_circuit(BlockPartition(cfg.n, cfg.block_size), angles)
            if cfg.shots > 0:
                fresh = rng.multinomial(cfg.shots, fresh / fresh.sum()) / cfg.shots
            return fresh
        circuit = build_reduced_circuit(cfg.n, fed_back, x_norm, cfg.input_scale)
    else:
        circuit = build_reservoir_circuit(cfg.n, p, x_norm, cfg.beta, cfg.input_scale)
    if cfg.noise is not None and not cfg.noise.is_noiseless:
        if cfg.shots == 0:
            raise ValueError("the noise model is per-shot Monte Carlo; set shots > 0")
        return noisy_run(circuit, cfg.noise, cfg.shots, rng)
    state = run_circuit(circuit)
    if cfg.shots == 0:
        return exact_probabilities(state)
    return sample_shots(state, cfg.shots, rng)


def qrcm_step(state: QrcState, x_in: np.ndarray, cfg: QrcConfig, rng=None) -> QrcState:
    """Leaky update of the probability vector from one raw input vector."""
    if cfg.beta is None and not cfg.reduced:
        raise ValueError("config has no beta angles; use QrcConfig.make")
    if rng is None:
        rng = np.random.default_rng([cfg.seed, _STREAM_TRAIN])
    x_norm = normalize_inputs(x_in, cfg.normalization)
    fresh = _qrc_probabilities(cfg, state.p, x_norm, rng)
    return QrcState(p=(1.0 - cfg.eps) * state.p + cfg.eps * fresh)


def crcm_step(psi: np.ndarray, x_in: np.ndarray, cfg: CrcConfig) -> np.ndarray:
    """Leaky tanh update; inputs enter raw (no normalization)."""
    psi = np.asarray(psi, dtype=float)
    x_in = np.atleast_1d(np.asarray(x_in, dtype=float))
    if psi.shape != (cfg.n_res,):
        raise ValueError(f"state must have shape ({cfg.n_res},), got {psi.shape}")
    if x_in.shape[0] != cfg.w_in.shape[1]:
        raise ValueError(f"input must have {cfg.w_in.shape[1]} components, got {x_in.shape[0]}")
    return (1.0 - cfg.eps) * psi + cfg.eps * np.tanh(cfg.w_in @ x_in + cfg.w_r @ psi)


# ---------------------------------------------------------------------------
# teacher-forced trace collection

@dataclass
class ReservoirTrace:
    """Aligned training material: states[:, t] is the reservoir state that
    should reproduce targets[:, t]; washout columns are already dropped."""

    states: np.ndarray
    targets: np.ndarray
    tau: np.ndarray
    dt: float
    final_state: np.ndarray
    input_labels: tuple
    target_labels: tuple

    def __post_init__(self) -> None:
        if self.states.shape[1] != self.targets.shape[1]:
            raise ValueError("states and targets must have equal column counts")


def _column_indices(series: TimeSeries, labels) -> tuple:
    if labels is None:
        return tuple(range(len(series.labels))), tuple(series.labels)
    idx = []
    for lab in labels:
        if lab not in series.labels:
            raise ValueError(f"series has no column {lab!r} (has {', '.join(series.labels)})")
        idx.append(series.labels.index(lab))
    return tuple(idx), tuple(labels)


def collect_trace(cfg, series: TimeSeries, washout: int,
                  input_labels=None, target_labels=None,
                  init_state: Optional[np.ndarray] = None, rng=None) -> ReservoirTrace:
    """Drive the reservoir with ground-truth inputs and align states with
    next-step targets.

    Consuming rows 0..T-2 yields T-1 state/target pairs; the first
    ``washout`` of them are discarded.  ``init_state`` continues from an
    earlier trace (used for test windows); by default the reservoir starts
    at rest.
    """
    if washout < 0:
        raise ValueError(f"washout must be >= 0, got {washout}")
    if series.rows < washout + 2:
        raise ValueError(f"series has {series.rows} rows; need at least washout + 2 = {washout + 2}")
    in_idx, in_labels = _column_indices(series, input_labels)
    tg_idx, tg_labels = _column_indices(series, target_labels)
    inputs = series.data[:, list(in_idx)]
    targets = series.data[:, list(tg_idx)]

    n_steps = series.rows - 1
    kept = n_steps - washout
    is_quantum = isinstance(cfg, QrcConfig)
    if is_quantum and cfg.normalization is None:
        # training-window extremes of the input columns become part of the model
        cfg.normalization = fit_normalization(inputs, in_labels)
    if is_quantum and rng is None:
        rng = np.random.default_rng([cfg.seed, _STREAM_TRAIN])
    state = initial_state(cfg) if init_state is None else np.asarray(init_state, dtype=float).copy()
    states = np.empty((cfg.feature_dim, kept))
    if is_quantum:
        qs = QrcState(p=state)
        for t in range(n_steps):
            qs = qrcm_step(qs, inputs[t], cfg, rng)
            if t >= washout:
                states[:, t - washout] = qs.p
        final = qs.p
    else:
        psi = state
        for t in range(n_steps):
            psi = crcm_step(psi, inputs[t], cfg)
            if t >= washout:
                states[:, t - washout] = psi
        final = psi
    return ReservoirTrace(
        states=states,
        targets=targets[washout + 1:].T.copy(),
        tau=series.tau[washout + 1:].copy(),
        dt=series.dt,
        final_state=final,
        input_labels=in_labels,
        target_labels=tg_labels,
    )


# ---------------------------------------------------------------------------
# readout training

@dataclass
class OutputWeights:
    w_out: np.ndarray
    ridge_gamma: float

    def __post_init__(self) -> None:
        # canonical layout so matvec results are bit-reproducible after
        # serialization (BLAS picks paths by memory order)
        self.w_out = np.ascontiguousarray(np.atleast_2d(np.asarray(self.w_out, dtype=float)))
        if not np.all(np.isfinite(self.w_out)):
            raise ValueError("output weights must be finite")


def ridge_fit(trace: ReservoirTrace, gamma: float) -> OutputWeights:
    """Closed-form Tikhonov-regularized least squares.

    Minimizes sum_t ||W r_t - u_t||^2 + gamma * Tr(W W^T), solved directly
    as W = U R^T (R R^T + gamma I)^(-1).
    """
    if gamma < 0.0:
        raise ValueError(f"ridge regularization must be >= 0, got {gamma}")
    r = trace.states
    u = trace.targets
    gram = r @ r.T
    gram[np.diag_indices_from(gram)] += gamma
    if gamma == 0.0 and np.linalg.cond(gram) > 1e12:
        raise ValueError("state covariance is numerically singular; "
                         "set ridge_gamma > 0 to regularize")
    try:
        w = np.linalg.solve(gram, r @ u.T).T
    except np.linalg.LinAlgError:
        raise ValueError("state covariance is singular; set ridge_gamma > 0") from None
    return OutputWeights(w_out=w, ridge_gamma=float(gamma))


def readout(w: OutputWeights, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[0] != w.w_out.shape[1]:
        raise ValueError(f"state has {state.shape[0]} components, weights expect {w.w_out.shape[1]}")
    return w.w_out @ state


def ridge_cost(trace: ReservoirTrace, w: np.ndarray, gamma: float) -> float:
    """The objective ridge_fit minimizes; exposed for optimality tests."""
    resid = w @ trace.states - trace.targets
    return float(np.sum(resid**2) + gamma * np.sum(w**2))


# ---------------------------------------------------------------------------
# trained model and drivers

@dataclass
class TrainedModel:
    kind: str                    # "qrcm" | "crcm"
    cfg: object
    weights: OutputWeights
    final_state: np.ndarray
    dt: float
    t_end: float
    labels: tuple
    input_labels: tuple
    train_mse: float

    @property
    def closed_loop_capable(self) -> bool:
        return self.labels == self.input_labels


def train(cfg, series: TimeSeries, washout: int, gamma: float,
          input_labels=None, target_labels=None, rng=None) -> TrainedModel:
    """Teacher-forced trace plus ridge readout, packaged for prediction."""
    trace = collect_trace(cfg, series, washout, input_labels, target_labels, rng=rng)
    weights = ridge_fit(trace, gamma)
    resid = weights.w_out @ trace.states - trace.targets
    return TrainedModel(
        kind="qrcm" if isinstance(cfg, QrcConfig) else "crcm",
        cfg=cfg,
        weights=weights,
        final_state=trace.final_state,
        dt=trace.dt,
        t_end=float(trace.tau[-1]),
        labels=trace.target_labels,
        input_labels=trace.input_labels,
        train_mse=float(np.mean(np.sum(resid**2, axis=0))),
    )


def closed_loop_predict(model: TrainedModel, steps: int, rng=None) -> TimeSeries:
    """Autonomous continuation: the readout of the current state replaces
    the external input at every step."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not model.closed_loop_capable:
        raise ValueError("closed-loop prediction needs a model whose inputs are its outputs; "
                         f"inputs {model.input_labels} != outputs {model.labels}")
    cfg, w = model.cfg, model.weights
    is_quantum = model.kind == "qrcm"
    if is_quantum and rng is None:
        rng = np.random.default_rng([cfg.seed, _STREAM_PREDICT])
    state = model.final_state.copy()
    out = np.empty((steps, len(model.labels)))
    for i in range(steps):
        x = readout(w, state)
        if not np.all(np.isfinite(x)):
            raise DivergedPredictionError(f"prediction diverged at step {i + 1}")
        if is_quantum:
            state = qrcm_step(QrcState(p=state), x, cfg, rng).p
        else:
            state = crcm_step(state, x, cfg)
        out[i] = readout(w, state)
    tau = model.t_end + model.dt * np.arange(1, steps + 1)
    return TimeSeries(tau=tau, data=out, labels=model.labels, dt=model.dt)


def open_loop_reconstruct(model: TrainedModel, inputs: TimeSeries, rng=None,
                          init_state="final", washout: int = 0) -> TimeSeries:
    """One-step reconstruction: true input columns drive the reservoir and
    the readout rebuilds all target components; nothing is fed back.

    By default the reservoir continues from the end-of-training state, the
    natural setup for a test window that follows the training window.  Pass
    ``init_state=None`` to restart from rest (with a fresh washout), which
    on the training series reproduces the training residual exactly.
    """
    if model.kind == "qrcm" and rng is None:
        rng = np.random.default_rng([model.cfg.seed, _STREAM_TEST])
    start = model.final_state if isinstance(init_state, str) and init_state == "final" else init_state
    trace = collect_trace(model.cfg, inputs, washout=washout,
                          input_labels=model.input_labels,
                          init_state=start, rng=rng)
    pred = model.weights.w_out @ trace.states
    return TimeSeries(tau=trace.tau, data=pred.T, labels=model.labels, dt=inputs.dt)


def mse(pred, target) -> float:
    """Mean over time of the squared Euclidean distance across components."""
    a = pred.data if isinstance(pred, TimeSeries) else np.atleast_2d(np.asarray(pred, float))
    b = target.data if isinstance(target, TimeSeries) else np.atleast_2d(np.asarray(target, float))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.sum((a - b) ** 2, axis=1)))


def horizon(pred: TimeSeries, truth: TimeSeries, threshold: float = 0.3,
            lyapunov: Optional[float] = None) -> float:
    """Time from prediction start until the normalized error first exceeds
    the threshold; the full window length if it never does.

    The error is the instantaneous Euclidean distance divided by the
    time-mean Euclidean norm of the truth over the window.  Multiplying by
    a Lyapunov exponent converts the result to Lyapunov time units.
    """
    if pred.data.shape != truth.data.shape:
        raise ValueError(f"shape mismatch: {pred.data.shape} vs {truth.data.shape}")
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    scale = float(np.mean(np.linalg.norm(truth.data, axis=1)))
    if scale == 0.0:
        raise ValueError("truth window has zero mean norm")
    err = np.linalg.norm(pred.data - truth.data, axis=1) / scale
    start = pred.tau[0] - pred.dt
    exceeded = np.nonzero(err > threshold)[0]
    t_hit = pred.tau[exceeded[0]] if exceeded.size else pred.tau[-1]
    span = float(t_hit - start)
    return span * lyapunov if lyapunov is not None else span


# ---------------------------------------------------------------------------
# model serialization

def _cfg_to_json(cfg) -> dict:
    if isinstance(cfg, QrcConfig):
        return {
            "type": "qrc",
            "n": cfg.n,
            "eps": cfg.eps,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "beta": None if cfg.beta is None else cfg.beta.tolist(),
            "reduced": cfg.reduced,
            "selected_indices": None if cfg.selected_indices is None
                                else [int(i) for i in cfg.selected_indices],
            "input_scale": cfg.input_scale,
            "normalization": None if cfg.normalization is None else {
                "lo": cfg.normalization[0].tolist(),
                "hi": cfg.normalization[1].tolist(),
            },
            "noise": None if cfg.noise is None else {
                "p_gate": cfg.noise.p_gate,
                "p_meas": cfg.noise.p_meas,
                "p_reset": cfg.noise.p_reset,
            },
            "block_size": cfg.block_size,
        }
    return {
        "type": "crc",
        "n_res": cfg.n_res,
        "eps": cfg.eps,
        "density": cfg.density,
        "spectral_radius": cfg.spectral_radius,
        "seed": cfg.seed,
        "w_in": cfg.w_in.tolist(),
        "w_r": cfg.w_r.tolist(),
    }


def _cfg_from_json(doc: dict):
    if doc["type"] == "qrc":
        norm = doc["normalization"]
        noise = doc["noise"]
        return QrcConfig(
            n=doc["n"], eps=doc["eps"], shots=doc["shots"], seed=doc["seed"],
            beta=None if doc["beta"] is None else np.array(doc["beta"]),
            reduced=doc["reduced"],
            selected_indices=None if doc["selected_indices"] is None
                             else np.array(doc["selected_indices"], dtype=int),
            input_scale=doc["input_scale"],
            normalization=None if norm is None else (np.array(norm["lo"]), np.array(norm["hi"])),
            noise=None if noise is None else NoiseConfig(**noise),
            block_size=doc["block_size"],
        )
    if doc["type"] == "crc":
        return CrcConfig(
            n_res=doc["n_res"], eps=doc["eps"], density=doc["density"],
            spectral_radius=doc["spectral_radius"], seed=doc["seed"],
            w_in=np.array(doc["w_in"]), w_r=np.array(doc["w_r"]),
        )
    raise ValueError(f"unknown config type {doc.get('type')!r}")


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "config": _cfg_to_json(model.cfg),
        "weights": {
            "ridge_gamma": model.weights.ridge_gamma,
            "w_out": model.weights.w_out.tolist(),
        },
        "final_state": model.final_state.tolist(),
        "dt": model.dt,
        "t_end": model.t_end,
        "labels": list(model.labels),
        "input_labels": list(model.input_labels),
        "train_mse": model.train_mse,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {version!r}")
    return TrainedModel(
        kind=doc["kind"],
        cfg=_cfg_from_json(doc["config"]),
        weights=OutputWeights(w_out=np.array(doc["weights"]["w_out"]),
                              ridge_gamma=doc["weights"]["ridge_gamma"]),
        final_state=np.array(doc["final_state"]),
        dt=doc["dt"],
        t_end=doc["t_end"],
        labels=tuple(doc["labels"]),
        input_labels=tuple(doc["input_labels"]),
        train_mse=doc["train_mse"],
    )
