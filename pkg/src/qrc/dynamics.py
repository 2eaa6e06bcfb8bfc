"""Low-order spectral models of two-dimensional thermal convection.

Right-hand sides of two Galerkin truncations of the Boussinesq equations for
a layer heated from below, a fixed-step RK4 integrator, a two-trajectory
estimator of the largest Lyapunov exponent, reconstruction of the continuous
flow fields from mode amplitudes, and two benchmark signal generators.

The three-mode truncation evolves the amplitudes (A1, B1, B2) and is the
classical Lorenz system in rescaled time.  The eight-mode truncation evolves
(A1..A4, B1..B4).  A-modes carry the stream function, B-modes the temperature
deviation from the conductive profile.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ConvectionParams",
    "ModeState",
    "TimeSeries",
    "FieldSnapshot",
    "DivergedTrajectoryError",
    "lorenz63_rhs",
    "lorenz8_rhs",
    "rk4_integrate",
    "largest_lyapunov",
    "reconstruct_fields",
    "energy_vorticity",
    "narma2_series",
    "mackey_glass_series",
]


class DivergedTrajectoryError(RuntimeError):
    """Raised when an integration produces a non-finite state."""


@dataclass(frozen=True)
class ConvectionParams:
    """Physical parameters of the convection cell.

    Constructed from the Prandtl number ``sigma``, the reduced Rayleigh
    number ``r`` (Rayleigh number over its critical value) and the geometric
    factor ``b``.  The cell aspect ratio, the horizontal and vertical
    wavenumbers and the Rayleigh numbers are derived.  b = 8/3 gives the
    canonical square-root-of-8 aspect ratio.
    """

    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0
    gamma_aspect: float = field(init=False)
    alpha: float = field(init=False)
    beta: float = field(init=False)
    rayleigh: float = field(init=False)
    rayleigh_crit: float = field(init=False)

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.r <= 0.0:
            raise ValueError(f"r must be positive, got {self.r}")
        # b = 4 Gamma^2 / (4 + Gamma^2) is confined to (0, 4) for any aspect ratio
        if not 0.0 < self.b < 4.0:
            raise ValueError(f"b must lie in (0, 4), got {self.b}")
        gamma = 2.0 * math.sqrt(self.b / (4.0 - self.b))
        alpha = 2.0 * math.pi / gamma
        beta = math.pi
        ra_crit = (alpha**2 + beta**2) ** 3 / alpha**2
        object.__setattr__(self, "gamma_aspect", gamma)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "rayleigh_crit", ra_crit)
        object.__setattr__(self, "rayleigh", self.r * ra_crit)


@dataclass
class ModeState:
    """Mode amplitudes at one instant: stream-function modes ``a`` and
    temperature modes ``bm``, plus the model time ``tau``."""

    a: np.ndarray
    bm: np.ndarray
    tau: float = 0.0

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.a, float), np.asarray(self.bm, float)])

    @classmethod
    def from_vector(cls, vec: Sequence[float], n_a: int, tau: float = 0.0) -> "ModeState":
        vec = np.asarray(vec, dtype=float)
        return cls(a=vec[:n_a].copy(), bm=vec[n_a:].copy(), tau=tau)


def _state_vector(x) -> np.ndarray:
    if isinstance(x, ModeState):
        return x.vector
    return np.asarray(x, dtype=float)


def lorenz63_rhs(state, params: ConvectionParams) -> np.ndarray:
    """Time derivative of the three-mode truncation (A1, B1, B2)."""
    if isinstance(state, np.ndarray):
        a1, b1, b2 = state.tolist()
    else:
        a1, b1, b2 = (float(v) for v in state)
    return np.array(
        [
            params.sigma * (b1 - a1),
            -b1 + params.r * a1 + a1 * b2,
            -params.b * b2 - a1 * b1,
        ]
    )


@lru_cache(maxsize=16)
def _mode8_coeffs(params: ConvectionParams) -> tuple:
    a2 = params.alpha**2
    b2 = params.beta**2
    s2 = math.sqrt(2.0)
    ab = a2 + b2
    fb = 4.0 * b2 + a2
    return (
        (3.0 * b2 + a2) / (s2 * ab),        # A2*A3 drain in dA1
        (3.0 * a2 - 15.0 * b2) / (s2 * ab), # A3*A4 source in dA1
        params.sigma * params.b / 4.0,
        3.0 / (2.0 * s2),
        params.sigma * (a2 + 4.0 * b2) / ab,
        params.sigma * ab / (s2 * fb),
        a2 / (s2 * ab),
        (24.0 * b2 - 3.0 * a2) / (s2 * fb),
        9.0 * params.sigma * params.b / 4.0,
        1.0 / (2.0 * s2),
        (a2 + 4.0 * b2) / ab,
        4.0 * params.b,
        3.0 * s2 / 4.0,
    )


def lorenz8_rhs(state, params: ConvectionParams) -> np.ndarray:
    """Time derivative of the eight-mode truncation (A1..A4, B1..B4).

    Restricting to the subspace A2 = A3 = A4 = B3 = B4 = 0 recovers the
    three-mode system exactly.  The quadratic couplings conserve a
    three-parameter family of quadratic forms (checked numerically by the
    test suite), every nonlinear term is off-diagonal so the phase-volume
    contraction rate is state-independent, and the shear modes stay active
    on the attractor instead of decaying back onto the three-mode subspace.
    """
    if isinstance(state, np.ndarray):
        a1, a2, a3, a4, b1, b2, b3, b4 = state.tolist()
    else:
        a1, a2, a3, a4, b1, b2, b3, b4 = (float(v) for v in state)
    (c_a1_23, c_a1_34, c_a2, c_a2_nl, c_a3_lin, c_a3_b3,
     c_a3_12, c_a3_14, c_a4, c_a4_nl, c_b3_lin, c_b4_lin, c_b4_nl) = _mode8_coeffs(params)
    sg, r = params.sigma, params.r
    s2 = 1.4142135623730951
    return np.array(
        [
            sg * (b1 - a1) - c_a1_23 * a2 * a3 + c_a1_34 * a3 * a4,
            -c_a2 * a2 + c_a2_nl * a1 * a3,
            -c_a3_lin * a3 - c_a3_b3 * b3 + c_a3_12 * a1 * a2 + c_a3_14 * a1 * a4,
            -c_a4 * a4 - c_a4_nl * a1 * a3,
            -b1 + r * a1 + a1 * b2 + 0.5 * a2 * b3 - 1.5 * a4 * b3,
            -params.b * b2 - a1 * b1,
            -c_b3_lin * b3 - a2 * b1 - s2 * r * a3 + 3.0 * a4 * b1 - 2.0 * s2 * a3 * b4,
            -c_b4_lin * b4 + c_b4_nl * a3 * b3,
        ]
    )


def _rk4_step(rhs: Callable, x: np.ndarray, dt: float, args: tuple) -> np.ndarray:
    k1 = rhs(x, *args)
    k2 = rhs(x + (0.5 * dt) * k1, *args)
    k3 = rhs(x + (0.5 * dt) * k2, *args)
    k4 = rhs(x + dt * k3, *args)
    return x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def _scalar_stepper(rhs: Callable, args: tuple):
    """Unrolled scalar RK4 for the two built-in systems.

    Long integrations dominate the runtime of Lyapunov estimates, and for
    these small systems plain float arithmetic beats array arithmetic by a
    wide margin.  Returns a ``step(values, dt) -> values`` closure operating
    on lists of floats, or None when ``rhs`` is not one of the built-ins
    (callers then fall back to the generic array path).  Coefficients are
    shared with the public right-hand sides, and equality of the two paths
    is pinned by the test suite.
    """
    if len(args) != 1 or not isinstance(args[0], ConvectionParams):
        return None
    p = args[0]
    if rhs is lorenz63_rhs:
        sg, r, b = p.sigma, p.r, p.b

        def deriv3(a1, b1, b2):
            return (sg * (b1 - a1), -b1 + r * a1 + a1 * b2, -b * b2 - a1 * b1)

        deriv = deriv3
    elif rhs is lorenz8_rhs:
        (c_a1_23, c_a1_34, c_a2, c_a2_nl, c_a3_lin, c_a3_b3,
         c_a3_12, c_a3_14, c_a4, c_a4_nl, c_b3_lin, c_b4_lin, c_b4_nl) = _mode8_coeffs(p)
        sg, r, b = p.sigma, p.r, p.b
        s2 = 1.4142135623730951

        def deriv8(a1, a2, a3, a4, b1, b2, b3, b4):
            return (
                sg * (b1 - a1) - c_a1_23 * a2 * a3 + c_a1_34 * a3 * a4,
                -c_a2 * a2 + c_a2_nl * a1 * a3,
                -c_a3_lin * a3 - c_a3_b3 * b3 + c_a3_12 * a1 * a2 + c_a3_14 * a1 * a4,
                -c_a4 * a4 - c_a4_nl * a1 * a3,
                -b1 + r * a1 + a1 * b2 + 0.5 * a2 * b3 - 1.5 * a4 * b3,
                -b * b2 - a1 * b1,
                -c_b3_lin * b3 - a2 * b1 - s2 * r * a3 + 3.0 * a4 * b1 - 2.0 * s2 * a3 * b4,
                -c_b4_lin * b4 + c_b4_nl * a3 * b3,
            )

        deriv = deriv8
    else:
        return None

    def step(values, dt):
        h = 0.5 * dt
        k1 = deriv(*values)
        k2 = deriv(*[v + h * k for v, k in zip(values, k1)])
        k3 = deriv(*[v + h * k for v, k in zip(values, k2)])
        k4 = deriv(*[v + dt * k for v, k in zip(values, k3)])
        w = dt / 6.0
        return [v + w * (ka + 2.0 * (kb + kc) + kd)
                for v, ka, kb, kc, kd in zip(values, k1, k2, k3, k4)]

    return step


@dataclass
class TimeSeries:
    """Uniformly sampled multivariate series: times ``tau``, a (rows, ndof)
    ``data`` array and per-column ``labels``."""

    tau: np.ndarray
    data: np.ndarray
    labels: tuple
    dt: float

    def __post_init__(self) -> None:
        self.tau = np.asarray(self.tau, dtype=float)
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        self.labels = tuple(self.labels)
        if self.data.shape[0] != self.tau.shape[0]:
            raise ValueError("tau and data row counts differ")
        if self.data.shape[1] != len(self.labels):
            raise ValueError("label count does not match data columns")
        if self.tau.shape[0] >= 2:
            gaps = np.diff(self.tau)
            scale = max(abs(self.dt), 1e-300)
            if np.max(np.abs(gaps - self.dt)) > 1e-9 * scale:
                raise ValueError("tau is not uniformly spaced by dt")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def column(self, label: str) -> np.ndarray:
        return self.data[:, self.labels.index(label)]

    def to_csv(self, path) -> None:
        """Write ``tau,<labels...>`` rows at full double precision."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", *self.labels])
            for t, row in zip(self.tau, self.data):
                writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, "r", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty file") from None
            if not header or header[0] != "tau":
                raise ValueError(f"{path}:1: header must start with 'tau'")
            labels = tuple(header[1:])
            taus, rows = [], []
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != len(labels) + 1:
                    raise ValueError(f"{path}:{lineno}: expected {len(labels) + 1} fields, got {len(rec)}")
                try:
                    values = [float(v) for v in rec]
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric field") from None
                taus.append(values[0])
                rows.append(values[1:])
        if len(rows) < 1:
            raise ValueError(f"{path}: no data rows")
        tau = np.array(taus)
        dt = float(tau[1] - tau[0]) if len(taus) >= 2 else 0.0
        return cls(tau=tau, data=np.array(rows), labels=labels, dt=dt)


def _mode_labels(ndof: int) -> tuple:
    if ndof == 3:
        return ("A1", "B1", "B2")
    if ndof == 8:
        return ("A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4")
    return tuple(f"x{i}" for i in range(ndof))


def rk4_integrate(rhs: Callable, x0, dt: float, steps: int, args: tuple = (),
                  labels=None, t0: float = 0.0) -> TimeSeries:
    """Integrate ``rhs`` with classical fixed-step RK4.

    Returns steps + 1 rows including the initial state.  Raises
    DivergedTrajectoryError naming the step at which the state left the
    finite range.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    if isinstance(x0, ModeState):
        t0 = x0.tau
        if labels is None:
            labels = _mode_labels(x0.vector.shape[0])
    x = _state_vector(x0)
    if labels is None:
        labels = _mode_labels(x.shape[0])
    out = np.empty((steps + 1, x.shape[0]))
    out[0] = x
    fast = _scalar_stepper(rhs, args)
    if fast is not None:
        xs = x.tolist()
        for i in range(1, steps + 1):
            try:
                xs = fast(xs, dt)
            except OverflowError:
                raise DivergedTrajectoryError(f"trajectory diverged at step {i}") from None
            if not math.isfinite(sum(xs)):
                raise DivergedTrajectoryError(f"trajectory diverged at step {i}")
            out[i] = xs
    else:
        for i in range(1, steps + 1):
            x = _rk4_step(rhs, x, dt, args)
            if not np.all(np.isfinite(x)):
                raise DivergedTrajectoryError(f"trajectory diverged at step {i}")
            out[i] = x
    tau = t0 + dt * np.arange(steps + 1)
    return TimeSeries(tau=tau, data=out, labels=labels, dt=dt)


def largest_lyapunov(rhs: Callable, x0, dt: float, steps: int,
                     renorm_interval: int = 10, args: tuple = (),
                     perturbation: float = 1e-8,
                     transient_steps: int = 10_000) -> float:
    """Estimate the largest Lyapunov exponent by the two-trajectory method.

    A transient is integrated first, then a companion trajectory displaced by
    ``perturbation`` is advanced alongside the reference; the separation is
    rescaled back every ``renorm_interval`` steps and the mean log stretching
    rate is returned (units of inverse model time).
    """
    if renorm_interval < 1:
        raise ValueError("renorm_interval must be >= 1")
    if steps < renorm_interval:
        raise ValueError("steps must cover at least one renormalization interval")
    if perturbation <= 0.0:
        raise ValueError("perturbation must be positive")
    x = _state_vector(x0)
    d0 = perturbation
    n_intervals = steps // renorm_interval
    fast = _scalar_stepper(rhs, args)
    if fast is not None:
        xs = x.tolist()
        try:
            for i in range(transient_steps):
                xs = fast(xs, dt)
                if not math.isfinite(sum(xs)):
                    raise DivergedTrajectoryError(f"trajectory diverged at step {i + 1}")
        except OverflowError:
            raise DivergedTrajectoryError(f"trajectory diverged at step {i + 1}") from None
        ys = list(xs)
        ys[0] += d0
        log_sum = 0.0
        for _ in range(n_intervals):
            for _ in range(renorm_interval):
                xs = fast(xs, dt)
                ys = fast(ys, dt)
            delta = [yv - xv for xv, yv in zip(xs, ys)]
            dist = math.sqrt(sum(dv * dv for dv in delta))
            if dist == 0.0 or not math.isfinite(dist):
                raise DivergedTrajectoryError("separation vanished or diverged during renormalization")
            log_sum += math.log(dist / d0)
            scale = d0 / dist
            ys = [xv + dv * scale for xv, dv in zip(xs, delta)]
        return log_sum / (n_intervals * renorm_interval * dt)
    for i in range(transient_steps):
        x = _rk4_step(rhs, x, dt, args)
        if not np.all(np.isfinite(x)):
            raise DivergedTrajectoryError(f"trajectory diverged at step {i + 1}")
    y = x.copy()
    y[0] += d0
    log_sum = 0.0
    for _ in range(n_intervals):
        for _ in range(renorm_interval):
            x = _rk4_step(rhs, x, dt, args)
            y = _rk4_step(rhs, y, dt, args)
        delta = y - x
        dist = math.sqrt(float(delta @ delta))
        if dist == 0.0 or not math.isfinite(dist):
            raise DivergedTrajectoryError("separation vanished or diverged during renormalization")
        log_sum += math.log(dist / d0)
        y = x + delta * (d0 / dist)
    return log_sum / (n_intervals * renorm_interval * dt)


# ---------------------------------------------------------------------------
# field reconstruction

@dataclass
class FieldSnapshot:
    """Continuous fields on a rectangular grid, index order [z, x]."""

    x: np.ndarray
    z: np.ndarray
    zeta: np.ndarray        # stream function
    theta: np.ndarray       # temperature deviation
    temp_total: np.ndarray  # conductive profile plus deviation
    ux: np.ndarray          # horizontal velocity, -d zeta / dz
    uz: np.ndarray          # vertical velocity, d zeta / dx
    lap_zeta: np.ndarray    # Laplacian of the stream function
    c_zeta: float
    c_theta: float
    gamma_aspect: float


def reconstruct_fields(state, params: ConvectionParams, nx: int = 128, nz: int = 64) -> FieldSnapshot:
    """Evaluate stream function, temperature and velocities on a grid.

    The state may be a 3-vector (A1, B1, B2) or an 8-vector (A1..A4,
    B1..B4); missing higher modes are treated as zero.  Velocities and the
    Laplacian are evaluated from the analytic mode derivatives, so the
    velocity field is divergence-free to rounding error.
    """
    if nx < 2 or nz < 2:
        raise ValueError(f"grid must be at least 2x2, got {nx}x{nz}")
    vec = _state_vector(state)
    if vec.shape[0] == 3:
        a = np.array([vec[0], 0.0, 0.0, 0.0])
        bm = np.array([vec[1], vec[2], 0.0, 0.0])
    elif vec.shape[0] == 8:
        a, bm = vec[:4], vec[4:]
    else:
        raise ValueError(f"state must have 3 or 8 components, got {vec.shape[0]}")

    al, be = params.alpha, params.beta
    c_zeta = math.sqrt(2.0) * (al**2 + be**2) / (al * be)
    c_theta = (al**2 + be**2) ** 3 / (al**2 * be * params.rayleigh)

    x = np.linspace(0.0, params.gamma_aspect, nx)
    z = np.linspace(0.0, 1.0, nz)
    xg = x[np.newaxis, :]
    zg = z[:, np.newaxis]

    sin_ax, cos_ax = np.sin(al * xg), np.cos(al * xg)
    sin_bz, cos_bz = np.sin(be * zg), np.cos(be * zg)
    sin_2bz, cos_2bz = np.sin(2 * be * zg), np.cos(2 * be * zg)
    sin_3bz, cos_3bz = np.sin(3 * be * zg), np.cos(3 * be * zg)
    sin_4bz = np.sin(4 * be * zg)

    zeta = c_zeta * (a[0] * sin_ax * sin_bz + a[1] * sin_bz
                     + a[2] * cos_ax * sin_2bz + a[3] * sin_3bz)
    theta = c_theta * (math.sqrt(2.0) * bm[0] * cos_ax * sin_bz + bm[1] * sin_2bz
                       + bm[2] * sin_ax * sin_2bz + bm[3] * sin_4bz)
    dzeta_dz = c_zeta * (a[0] * be * sin_ax * cos_bz + a[1] * be * cos_bz
                         + a[2] * 2 * be * cos_ax * cos_2bz + a[3] * 3 * be * cos_3bz)
    dzeta_dx = c_zeta * (a[0] * al * cos_ax * sin_bz - a[2] * al * sin_ax * sin_2bz)
    lap = -c_zeta * ((al**2 + be**2) * a[0] * sin_ax * sin_bz
                     + be**2 * a[1] * sin_bz
                     + (al**2 + 4 * be**2) * a[2] * cos_ax * sin_2bz
                     + 9 * be**2 * a[3] * sin_3bz)

    return FieldSnapshot(
        x=x, z=z, zeta=zeta, theta=theta,
        temp_total=1.0 - zg + theta,
        ux=-dzeta_dz, uz=dzeta_dx, lap_zeta=lap,
        c_zeta=c_zeta, c_theta=c_theta, gamma_aspect=params.gamma_aspect,
    )


def energy_vorticity(snap: FieldSnapshot) -> tuple:
    """Domain-averaged energy and vorticity by trapezoidal quadrature.

    Energy integrand is ((grad zeta)^2 - z*theta) / 2; vorticity is the
    average of -laplacian(zeta).  Both are normalized by the cell area.
    """
    area = snap.gamma_aspect * 1.0
    grad_sq = snap.ux**2 + snap.uz**2
    zg = snap.z[:, np.newaxis]
    e_den = 0.5 * (grad_sq - zg * snap.theta)
    energy = np.trapezoid(np.trapezoid(e_den, snap.x, axis=1), snap.z) / area
    omega = np.trapezoid(np.trapezoid(-snap.lap_zeta, snap.x, axis=1), snap.z) / area
    return float(energy), float(omega)


# ---------------------------------------------------------------------------
# benchmark signal generators

def narma2_series(steps: int) -> tuple:
    """Second-order nonlinear autoregressive benchmark.

    The scalar drive u is a product of three incommensurate sinusoids mapped
    to [0, 0.2]; the response y obeys
    y[k+1] = 0.4 y[k] + 0.4 y[k] y[k-1] + 0.6 u[k]^3 + 0.1 with
    y[0] = y[1] = 0.19.  Returns (u, y), both of length ``steps``.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    period = 100.0
    k = np.arange(steps)
    u = 0.1 * (np.sin(2 * np.pi * 2.11 * k / period)
               * np.sin(2 * np.pi * 3.73 * k / period)
               * np.sin(2 * np.pi * 4.11 * k / period) + 1.0)
    y = np.empty(steps)
    y[0] = y[1] = 0.19
    for i in range(1, steps - 1):
        y[i + 1] = 0.4 * y[i] + 0.4 * y[i] * y[i - 1] + 0.6 * u[i] ** 3 + 0.1
    return u, y


def mackey_glass_series(steps: int, dt: float = 0.1, delay: float = 2.0,
                        beta: float = 2.0, gamma: float = 1.0, alpha: float = 1.0,
                        exponent: float = 10.0, history: float = 0.5) -> TimeSeries:
    """Integrate the delay differential equation
    dx/dt = beta * alpha^n * x(t - delay) / (alpha^n + x(t - delay)^n) - gamma * x
    with fixed-step RK4, holding the delayed value constant within a step.

    The pre-history is the constant ``history`` and x(0) = history.  Returns
    steps + 1 rows.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    ratio = delay / dt
    lag = int(round(ratio))
    if lag < 1 or abs(ratio - lag) > 1e-9:
        raise ValueError(f"delay must be a positive integer multiple of dt, got delay/dt = {ratio}")
    a_n = alpha**exponent
    x = np.empty(steps + 1)
    x[0] = history
    for k in range(steps):
        xd = x[k - lag] if k >= lag else history
        drive = beta * a_n * xd / (a_n + xd**exponent)

        def f(v):
            return drive - gamma * v

        v = x[k]
        k1 = f(v)
        k2 = f(v + 0.5 * dt * k1)
        k3 = f(v + 0.5 * dt * k2)
        k4 = f(v + dt * k3)
        x[k + 1] = v + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not math.isfinite(x[k + 1]):
            raise DivergedTrajectoryError(f"trajectory diverged at step {k + 1}")
    tau = dt * np.arange(steps + 1)
    return TimeSeries(tau=tau, data=x[:, np.newaxis], labels=("x",), dt=dt)
