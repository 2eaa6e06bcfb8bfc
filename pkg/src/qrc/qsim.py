"""Exact statevector simulation of the reservoir circuits.

Gates are restricted to real Y-rotations and CNOTs, which is all the
reservoir constructor emits.  Basis index k carries qubit 0 as its most
significant bit (big-endian), so CNOT truth-table examples and the CSV
probability files depend on that convention.

Three execution modes are provided: exact probabilities, finite-shot
multinomial sampling, and a per-shot Monte-Carlo noise simulation with
random-Pauli gate errors, pre-measurement qubit resets and classical
readout bit flips.  Block-partitioned circuits are simulated block by
block and combined as a tensor product, which keeps their cost linear in
the number of blocks instead of exponential in the total qubit count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Ry",
    "Cnot",
    "Circuit",
    "PureState",
    "NoiseConfig",
    "BlockPartition",
    "apply_ry",
    "apply_cnot",
    "run_circuit",
    "exact_probabilities",
    "sample_shots",
    "noisy_run",
    "build_block",
    "build_reservoir_circuit",
    "build_reduced_circuit",
    "run_blocked_circuit",
    "check_probabilities",
    "save_probabilities",
    "load_probabilities",
]

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class Ry:
    """Real rotation about Y: [[cos(a/2), -sin(a/2)], [sin(a/2), cos(a/2)]]."""

    qubit: int
    angle: float


@dataclass(frozen=True)
class Cnot:
    control: int
    target: int


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"circuit needs at least one qubit, got n={self.n}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if isinstance(g, Ry):
                if not 0 <= g.qubit < self.n:
                    raise ValueError(f"RY qubit {g.qubit} out of range for n={self.n}")
            elif isinstance(g, Cnot):
                if not (0 <= g.control < self.n and 0 <= g.target < self.n):
                    raise ValueError(f"CNOT ({g.control},{g.target}) out of range for n={self.n}")
                if g.control == g.target:
                    raise ValueError("CNOT control and target must differ")
            else:
                raise ValueError(f"unknown gate type {type(g).__name__}")

    def to_text(self) -> str:
        """One gate per line after a ``QUBITS n`` header."""
        lines = [f"QUBITS {self.n}"]
        for g in self.gates:
            if isinstance(g, Ry):
                lines.append(f"RY {g.qubit} {g.angle!r}")
            else:
                lines.append(f"CNOT {g.control} {g.target}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        n = None
        gates = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if n is None:
                if parts[0] != "QUBITS" or len(parts) != 2:
                    raise ValueError(f"line {lineno}: expected 'QUBITS n' header, got {line!r}")
                try:
                    n = int(parts[1])
                except ValueError:
                    raise ValueError(f"line {lineno}: qubit count is not an integer") from None
                continue
            if parts[0] == "RY" and len(parts) == 3:
                try:
                    gates.append(Ry(int(parts[1]), float(parts[2])))
                except ValueError:
                    raise ValueError(f"line {lineno}: malformed RY gate {line!r}") from None
            elif parts[0] == "CNOT" and len(parts) == 3:
                try:
                    gates.append(Cnot(int(parts[1]), int(parts[2])))
                except ValueError:
                    raise ValueError(f"line {lineno}: malformed CNOT gate {line!r}") from None
            else:
                raise ValueError(f"line {lineno}: unknown gate line {line!r}")
        if n is None:
            raise ValueError("missing QUBITS header")
        return cls(n=n, gates=tuple(gates))


@dataclass
class PureState:
    """n-qubit register: 2^n complex amplitudes, unit norm."""

    n: int
    amps: np.ndarray

    def __post_init__(self) -> None:
        self.amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (1 << self.n,):
            raise ValueError(f"amplitude vector must have length 2^{self.n}, got {self.amps.shape}")

    @classmethod
    def zero(cls, n: int) -> "PureState":
        if n < 1:
            raise ValueError(f"need at least one qubit, got {n}")
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n=n, amps=amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def copy(self) -> "PureState":
        return PureState(n=self.n, amps=self.amps.copy())


@dataclass(frozen=True)
class NoiseConfig:
    """Error probabilities: per-gate random Pauli on the gate's target,
    per-qubit reset to |0> once per shot before measurement, and an
    independent classical flip of each measured bit."""

    p_gate: float = 0.0
    p_meas: float = 0.0
    p_reset: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p_gate", "p_meas", "p_reset"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def is_noiseless(self) -> bool:
        return self.p_gate == 0.0 and self.p_meas == 0.0 and self.p_reset == 0.0


# ---------------------------------------------------------------------------
# gate kernels
#
# Every kernel reshapes the flat amplitude buffer into a view that exposes the
# target qubit as its own axis and operates in place, so the cost per gate is
# O(2^n) regardless of which qubit is addressed.  A leading batch axis lets
# the same kernels drive the Monte-Carlo noise engine.

def _ry_inplace(mat: np.ndarray, n: int, qubit: int, angle: float) -> None:
    c = math.cos(0.5 * angle)
    s = math.sin(0.5 * angle)
    view = mat.reshape(-1, 1 << qubit, 2, 1 << (n - qubit - 1))
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :]
    view[:, :, 0, :] = c * a0 - s * a1
    view[:, :, 1, :] = s * a0 + c * a1


def _cnot_inplace(mat: np.ndarray, n: int, control: int, target: int) -> None:
    t = mat.reshape((-1,) + (2,) * n)
    src = [slice(None)] * (n + 1)
    src[control + 1] = 1
    dst = list(src)
    src[target + 1] = 0
    dst[target + 1] = 1
    src, dst = tuple(src), tuple(dst)
    tmp = t[src].copy()
    t[src] = t[dst]
    t[dst] = tmp


def _pauli_inplace(mat: np.ndarray, n: int, qubit: int, kind: int) -> None:
    # kind: 0 = X, 1 = Y, 2 = Z
    view = mat.reshape(-1, 1 << qubit, 2, 1 << (n - qubit - 1))
    if kind == 0:
        tmp = view[:, :, 0, :].copy()
        view[:, :, 0, :] = view[:, :, 1, :]
        view[:, :, 1, :] = tmp
    elif kind == 1:
        tmp = view[:, :, 0, :].copy()
        view[:, :, 0, :] = -1j * view[:, :, 1, :]
        view[:, :, 1, :] = 1j * tmp
    else:
        view[:, :, 1, :] *= -1.0


def _check_qubit(n: int, qubit: int) -> None:
    if not 0 <= qubit < n:
        raise ValueError(f"qubit index {qubit} out of range for n={n}")


def apply_ry(state: PureState, qubit: int, angle: float) -> PureState:
    """Rotate one qubit about Y, in place; returns the same state."""
    _check_qubit(state.n, qubit)
    _ry_inplace(state.amps, state.n, qubit, angle)
    return state


def apply_cnot(state: PureState, control: int, target: int) -> PureState:
    """Flip ``target`` where ``control`` is 1, in place; returns the state."""
    _check_qubit(state.n, control)
    _check_qubit(state.n, target)
    if control == target:
        raise ValueError("CNOT control and target must differ")
    _cnot_inplace(state.amps, state.n, control, target)
    return state


def run_circuit(circuit: Circuit) -> PureState:
    """Apply the circuit's gates in order to |0...0>."""
    state = PureState.zero(circuit.n)
    amps, n = state.amps, circuit.n
    for g in circuit.gates:
        if isinstance(g, Ry):
            _ry_inplace(amps, n, g.qubit, g.angle)
        else:
            _cnot_inplace(amps, n, g.control, g.target)
    return state


def exact_probabilities(state: PureState) -> np.ndarray:
    return np.abs(state.amps) ** 2


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_shots(state: PureState, shots: int, rng) -> np.ndarray:
    """Empirical outcome frequencies from ``shots`` projective measurements.

    ``rng`` may be a seed or a Generator; identical (state, shots, seed)
    give identical frequencies.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    gen = _as_generator(rng)
    p = exact_probabilities(state)
    p = p / p.sum()
    counts = gen.multinomial(shots, p)
    return counts / shots


# ---------------------------------------------------------------------------
# circuit constructors

def build_block(n: int, angles: Sequence[float], start_cursor: int = 0) -> tuple:
    """Emit the RY/CNOT ladder for one value block.

    For each angle: RY on the cursor qubit, then a CNOT from the cursor to
    the next qubit — except on the last qubit, where the CNOT targets the
    previous one.  The cursor then advances, wrapping to qubit 0, and the
    final cursor is returned so consecutive blocks continue the cycle.
    Single-qubit registers get rotations only.
    """
    if n < 1:
        raise ValueError(f"need at least one qubit, got n={n}")
    if not 0 <= start_cursor < n:
        raise ValueError(f"start_cursor {start_cursor} out of range for n={n}")
    gates = []
    cursor = start_cursor
    for ang in angles:
        gates.append(Ry(cursor, float(ang)))
        if n >= 2:
            nxt = cursor - 1 if cursor == n - 1 else cursor + 1
            gates.append(Cnot(cursor, nxt))
        cursor = (cursor + 1) % n
    return gates, cursor


def build_reservoir_circuit(n: int, p_prev: Sequence[float], x_in: Sequence[float],
                            beta: Sequence[float], input_scale: float = FOUR_PI) -> Circuit:
    """Full reservoir update circuit: three blocks loading the previous
    probability vector, the current input and the fixed bias angles, with
    one continuous qubit cursor threaded across all of them."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (n,):
        raise ValueError(f"beta must have length n={n}, got {beta.shape}")
    gates, cursor = build_block(n, input_scale * np.asarray(p_prev, dtype=float))
    more, cursor = build_block(n, input_scale * np.asarray(x_in, dtype=float), cursor)
    gates += more
    more, _ = build_block(n, beta, cursor)
    gates += more
    return Circuit(n=n, gates=tuple(gates))


def build_reduced_circuit(n: int, p_selected: Sequence[float], x_in: Sequence[float],
                          input_scale: float = FOUR_PI) -> Circuit:
    """Shallow single-block circuit loading [p_selected, x_in]; no bias block."""
    values = np.concatenate([np.asarray(p_selected, dtype=float),
                             np.asarray(x_in, dtype=float)])
    gates, _ = build_block(n, input_scale * values)
    return Circuit(n=n, gates=tuple(gates))


# ---------------------------------------------------------------------------
# block-partitioned (separable) simulation

@dataclass(frozen=True)
class BlockPartition:
    """Contiguous ascending qubit blocks: floor(n/p) blocks of size p plus
    one trailing remainder block when p does not divide n."""

    n: int
    p: int
    blocks: tuple = field(default=())

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one qubit, got n={self.n}")
        if not 1 <= self.p <= self.n:
            raise ValueError(f"block size must lie in [1, n], got p={self.p} for n={self.n}")
        if not self.blocks:
            blocks = [tuple(range(i * self.p, (i + 1) * self.p)) for i in range(self.n // self.p)]
            if self.n % self.p:
                blocks.append(tuple(range((self.n // self.p) * self.p, self.n)))
            object.__setattr__(self, "blocks", tuple(blocks))
        flat = [q for blk in self.blocks for q in blk]
        if flat != list(range(self.n)):
            raise ValueError("blocks must be contiguous ascending index ranges covering 0..n-1")
        sizes = [len(b) for b in self.blocks]
        full, rem = divmod(self.n, self.p)
        expected = [self.p] * full + ([rem] if rem else [])
        if sizes != expected:
            raise ValueError(f"block sizes {sizes} do not match floor(n/p) rule {expected}")


def run_blocked_circuit(partition: BlockPartition, angle_stream: Sequence[float]) -> np.ndarray:
    """Run the block constructor with every CNOT confined to its block.

    The qubit cursor cycles globally exactly as in build_block, but a CNOT
    at a block's last qubit targets the previous qubit of that block, and
    single-qubit blocks emit no CNOT.  Each block evolves as an independent
    statevector; the returned distribution is their tensor product, so the
    cost is sum over blocks of O(2^|block|) per gate.
    """
    n = partition.n
    states = [PureState.zero(len(blk)) for blk in partition.blocks]
    block_of = {}
    for bi, blk in enumerate(partition.blocks):
        for local, q in enumerate(blk):
            block_of[q] = (bi, local)
    cursor = 0
    for ang in np.asarray(angle_stream, dtype=float):
        bi, local = block_of[cursor]
        st = states[bi]
        apply_ry(st, local, float(ang))
        size = len(partition.blocks[bi])
        if size >= 2:
            nxt = local - 1 if local == size - 1 else local + 1
            apply_cnot(st, local, nxt)
        cursor = (cursor + 1) % n
    probs = exact_probabilities(states[0])
    for st in states[1:]:
        probs = np.kron(probs, exact_probabilities(st))
    return probs


# ---------------------------------------------------------------------------
# Monte-Carlo noise engine

def _bit_weights(n: int) -> np.ndarray:
    # qubit 0 is the most significant bit
    return 1 << np.arange(n - 1, -1, -1)


def noisy_run(circuit: Circuit, noise: NoiseConfig, shots: int, rng) -> np.ndarray:
    """Per-shot Monte-Carlo execution under the three-knob noise model.

    After every gate, with probability p_gate a uniformly random Pauli hits
    the gate's target qubit (a CNOT's target).  Before measurement each
    qubit is, with probability p_reset, projected onto |0> and the state
    renormalized; if the projection annihilates a trajectory the register
    collapses to |0...0>.  Finally each measured bit flips independently
    with probability p_meas.  Frequencies are aggregated over all shots.

    Shots are processed in fixed-size chunks of vectorized trajectories;
    results are deterministic for a given seed.  With p_gate = p_reset = 0
    the state is pure and shared by every shot, so the simulation reduces
    to multinomial sampling plus classical bit flips (and with all three
    probabilities zero it matches sample_shots draw for draw).
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    gen = _as_generator(rng)
    n, dim = circuit.n, 1 << circuit.n

    if noise.p_gate == 0.0 and noise.p_reset == 0.0:
        state = run_circuit(circuit)
        if noise.p_meas == 0.0:
            return sample_shots(state, shots, gen)
        p = exact_probabilities(state)
        counts = gen.multinomial(shots, p / p.sum())
        outcomes = np.repeat(np.arange(dim), counts)
        flips = (gen.random((shots, n)) < noise.p_meas) @ _bit_weights(n)
        outcomes ^= flips
        return np.bincount(outcomes, minlength=dim) / shots

    weights = _bit_weights(n)
    chunk = max(1, (1 << 20) // dim)
    total = np.zeros(dim, dtype=np.int64)
    done = 0
    while done < shots:
        c = min(chunk, shots - done)
        states = np.zeros((c, dim), dtype=np.complex128)
        states[:, 0] = 1.0
        for g in circuit.gates:
            if isinstance(g, Ry):
                _ry_inplace(states, n, g.qubit, g.angle)
                target = g.qubit
            else:
                _cnot_inplace(states, n, g.control, g.target)
                target = g.target
            hit = gen.random(c) < noise.p_gate
            kinds = gen.integers(0, 3, size=c)
            if np.any(hit):
                for kind in (0, 1, 2):
                    rows = hit & (kinds == kind)
                    if np.any(rows):
                        sub = states[rows]
                        _pauli_inplace(sub, n, target, kind)
                        states[rows] = sub
        for q in range(n):
            rows = gen.random(c) < noise.p_reset
            if np.any(rows):
                sub = states[rows].reshape(-1, 1 << q, 2, 1 << (n - q - 1))
                sub[:, :, 1, :] = 0.0
                flat = sub.reshape(-1, dim)
                norms = np.sqrt(np.sum(np.abs(flat) ** 2, axis=1))
                dead = norms == 0.0
                if np.any(dead):
                    flat[dead] = 0.0
                    flat[dead, 0] = 1.0
                    norms[dead] = 1.0
                states[rows] = flat / norms[:, np.newaxis]
        probs = np.abs(states) ** 2
        probs /= probs.sum(axis=1, keepdims=True)
        cum = np.cumsum(probs, axis=1)
        u = gen.random(c)
        outcomes = np.minimum((cum < u[:, np.newaxis]).sum(axis=1), dim - 1)
        if noise.p_meas > 0.0:
            outcomes ^= (gen.random((c, n)) < noise.p_meas) @ weights
        total += np.bincount(outcomes, minlength=dim)
        done += c
    return total / shots


# ---------------------------------------------------------------------------
# probability-vector plumbing

def check_probabilities(p: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Validate entries in [0, 1] and unit sum; returns the array."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {p.shape}")
    if np.min(p) < -atol or np.max(p) > 1.0 + atol:
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > atol:
        raise ValueError(f"probabilities must sum to 1, got {p.sum()!r}")
    return p


def save_probabilities(path, p: np.ndarray) -> None:
    p = np.asarray(p, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "probability"])
        for i, v in enumerate(p):
            writer.writerow([i, f"{v:.17g}"])


def load_probabilities(path) -> np.ndarray:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "probability"]:
            raise ValueError(f"{path}:1: expected 'index,probability' header")
        values = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(rec)}")
            try:
                idx, v = int(rec[0]), float(rec[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed row") from None
            if idx != len(values):
                raise ValueError(f"{path}:{lineno}: indices must run 0,1,2,... (got {idx})")
            values.append(v)
    if not values:
        raise ValueError(f"{path}: no probability rows")
    return np.array(values)
