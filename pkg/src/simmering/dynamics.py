"""Thermostat-chain dynamics over flat parameter vectors.

The network parameters are treated as unit-mass particles with positions
``x`` and velocities ``v`` moving in the loss landscape; a chain of
thermostat variables (positions ``s_k``, velocities ``v_s_k``, masses
``Q_k``) couples the particle kinetic energy to a heat bath at the target
temperature.  Chain link 1 reads the particle kinetic energy, every later
link reads the kinetic energy of the link below it, and the last link sees a
zero-velocity boundary.

One step advances the coupled system with a symmetric three-stage splitting
of the phase space into a position-like half (particle positions,
even-numbered chain positions, odd-numbered chain velocities) and a
velocity-like half (particle velocities, odd-numbered chain positions,
even-numbered chain velocities):

- stage 1 advances the position-like half over dt/2,
- stage 2 advances the velocity-like half over dt, evaluating the loss
  gradient exactly once, at the half-step particle positions,
- stage 3 advances the position-like half over the remaining dt/2.

Chain velocity updates use exponential friction factors
``v' = v * exp(-c*dt*w) + c*dt*a * exp(-c*dt*w/2)`` where ``w`` is the
velocity of the next link up (zero past the end of the chain).

All state is float64.  Steps are deterministic; the only randomness in the
module is the Maxwell-Boltzmann draw in :func:`initial_velocities`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .net import NonFiniteError


@dataclass
class ThermostatChain:
    """Positions, velocities and masses of the thermostat links."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        self.masses = np.asarray(self.masses, dtype=np.float64)
        n = self.positions.shape[0]
        if self.positions.ndim != 1 or n < 1:
            raise ValueError("chain needs at least one link")
        if self.velocities.shape != (n,) or self.masses.shape != (n,):
            raise ValueError("chain arrays must share one length")
        if np.any(self.masses <= 0.0):
            raise ValueError("chain masses must be positive")

    @classmethod
    def rest(cls, length: int, mass: float = 1.0) -> "ThermostatChain":
        """A chain of `length` links at rest with uniform mass."""
        if length < 1:
            raise ValueError("chain length must be >= 1")
        return cls(
            positions=np.zeros(length),
            velocities=np.zeros(length),
            masses=np.full(length, float(mass)),
        )

    def copy(self) -> "ThermostatChain":
        return ThermostatChain(
            self.positions.copy(), self.velocities.copy(), self.masses.copy()
        )


@dataclass
class PhaseState:
    """Particle positions/velocities plus the attached thermostat chain."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray | float
    chain: ThermostatChain
    step_index: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.ndim != 1 or self.velocities.shape != self.positions.shape:
            raise ValueError("positions and velocities must be matching 1-D arrays")
        if isinstance(self.masses, np.ndarray):
            self.masses = np.asarray(self.masses, dtype=np.float64)
            if self.masses.shape != self.positions.shape:
                raise ValueError("per-particle masses must match positions")
            if np.any(self.masses <= 0.0):
                raise ValueError("masses must be positive")
        else:
            self.masses = float(self.masses)
            if self.masses <= 0.0:
                raise ValueError("masses must be positive")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "PhaseState":
        masses = self.masses.copy() if isinstance(self.masses, np.ndarray) else self.masses
        return PhaseState(
            self.positions.copy(),
            self.velocities.copy(),
            masses,
            self.chain.copy(),
            self.step_index,
        )


@dataclass(frozen=True)
class TemperatureSchedule:
    """Stepped ramp: hold `hold_iterations` steps, raise by `t_step`, clamp.

    ``at(i) = min(t_target, t_initial + t_step * (i // hold_iterations))``.
    A constant schedule is the degenerate ramp with ``t_initial == t_target``.
    """

    t_initial: float
    t_target: float
    t_step: float = 1.0
    hold_iterations: int = 1

    def __post_init__(self):
        if self.t_initial < 0.0 or self.t_target < 0.0:
            raise ValueError("temperatures must be >= 0")
        if self.t_target < self.t_initial:
            raise ValueError("schedule must be non-decreasing (t_target >= t_initial)")
        if self.t_step <= 0.0:
            raise ValueError("temperature increment must be > 0")
        if self.hold_iterations < 1:
            raise ValueError("hold_iterations must be >= 1")

    @classmethod
    def constant(cls, temperature: float) -> "TemperatureSchedule":
        return cls(t_initial=float(temperature), t_target=float(temperature))

    @property
    def is_constant(self) -> bool:
        return self.t_initial == self.t_target

    def at(self, iteration: int) -> float:
        if iteration < 0:
            raise ValueError("iteration must be >= 0")
        return min(
            self.t_target,
            self.t_initial + self.t_step * (iteration // self.hold_iterations),
        )


@dataclass(frozen=True)
class IntegratorConfig:
    """Time step, chain geometry and the temperature protocol."""

    dt: float
    schedule: TemperatureSchedule
    chain_length: int = 2
    chain_mass: float = 1.0
    particle_mass: float = 1.0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.chain_length < 1:
            raise ValueError("chain_length must be >= 1")
        if self.chain_mass <= 0.0 or self.particle_mass <= 0.0:
            raise ValueError("masses must be positive")


def initial_velocities(n: int, temperature: float, seed) -> np.ndarray:
    """Maxwell-Boltzmann draw: each component ~ N(0, sqrt(T)) for unit mass."""
    if temperature < 0.0:
        raise ValueError("temperature must be >= 0")
    rng = seeding.generator(seed)
    return rng.normal(0.0, math.sqrt(temperature), size=n)


def kinetic_temperature(state: PhaseState) -> float:
    """Instantaneous (1/N) * sum(m_i v_i^2)."""
    v = state.velocities
    if isinstance(state.masses, float):
        return state.masses * float(v @ v) / v.shape[0]
    return float((state.masses * v) @ v) / v.shape[0]


def extended_energy(state: PhaseState, loss_value: float, temperature: float) -> float:
    """Conserved quantity of system plus chain at fixed target temperature.

    Kinetic + loss + chain kinetic + N*T*s_1 + T*(s_2 + s_3 + ...).
    Constant along exact trajectories only while the target temperature is
    constant.
    """
    v = state.velocities
    if isinstance(state.masses, float):
        kin = 0.5 * state.masses * float(v @ v)
    else:
        kin = 0.5 * float((state.masses * v) @ v)
    chain = state.chain
    chain_kin = 0.5 * float((chain.masses * chain.velocities) @ chain.velocities)
    n = state.n_particles
    s = chain.positions
    bath = n * temperature * float(s[0]) + temperature * float(s[1:].sum())
    return kin + loss_value + chain_kin + bath


# ---------------------------------------------------------------------------
# the step


def _advance(x, v, m, s, vs, q, dt, t_target, grad_fn, step_index):
    """One integration step, in place.

    ``x``/``v`` are float64 arrays, ``m`` a float or array, ``s``/``vs``/``q``
    plain Python lists (the chain is short; scalar math keeps the hot loop
    cheap).  Returns nothing.
    """
    n = x.shape[0]
    n_c = len(s)
    half = 0.5 * dt
    quarter = 0.25 * dt
    exp = math.exp

    if isinstance(m, float):
        sum_mv2 = m * float(v @ v)
    else:
        sum_mv2 = float((m * v) @ v)
    if not math.isfinite(sum_mv2):
        raise NonFiniteError(f"non-finite velocities entering step {step_index}")

    # stage 1: position-like half over dt/2
    x += half * v
    for p in range(1, n_c, 2):
        s[p] += half * vs[p]
    for p in range(0, n_c, 2):
        if p == 0:
            a = (sum_mv2 - n * t_target) / q[0]
        else:
            a = (q[p - 1] * vs[p - 1] * vs[p - 1] - t_target) / q[p]
        w = vs[p + 1] if p + 1 < n_c else 0.0
        vs[p] = vs[p] * exp(-half * w) + half * a * exp(-quarter * w)

    # stage 2: velocity-like half over dt; the only gradient evaluation,
    # taken at the half-step positions
    g = grad_fn(x)
    w0 = vs[0]
    decay = exp(-dt * w0)
    kick = dt * exp(-half * w0)
    v *= decay
    if isinstance(m, float):
        v -= (kick / m) * g
    else:
        v -= kick * (g / m)
    for p in range(0, n_c, 2):
        s[p] += dt * vs[p]
    for p in range(1, n_c, 2):
        a = (q[p - 1] * vs[p - 1] * vs[p - 1] - t_target) / q[p]
        w = vs[p + 1] if p + 1 < n_c else 0.0
        vs[p] = vs[p] * exp(-dt * w) + dt * a * exp(-half * w)

    # stage 3: position-like half over the remaining dt/2
    x += half * v
    for p in range(1, n_c, 2):
        s[p] += half * vs[p]
    if isinstance(m, float):
        sum_mv2 = m * float(v @ v)
    else:
        sum_mv2 = float((m * v) @ v)
    for p in range(0, n_c, 2):
        if p == 0:
            a = (sum_mv2 - n * t_target) / q[0]
        else:
            a = (q[p - 1] * vs[p - 1] * vs[p - 1] - t_target) / q[p]
        w = vs[p + 1] if p + 1 < n_c else 0.0
        vs[p] = vs[p] * exp(-half * w) + half * a * exp(-quarter * w)


def nhc_step(
    state: PhaseState, grad_fn, config: IntegratorConfig, t_current: float
) -> PhaseState:
    """Advance one step at the given target temperature; pure.

    ``grad_fn(x)`` must return the loss gradient at positions ``x``; it is
    called exactly once per step.
    """
    if t_current < 0.0:
        raise ValueError("temperature must be >= 0")
    out = state.copy()
    s = out.chain.positions.tolist()
    vs = out.chain.velocities.tolist()
    q = out.chain.masses.tolist()
    _advance(
        out.positions,
        out.velocities,
        out.masses,
        s,
        vs,
        q,
        config.dt,
        t_current,
        grad_fn,
        state.step_index,
    )
    out.chain.positions[...] = s
    out.chain.velocities[...] = vs
    out.step_index = state.step_index + 1
    return out


def run_nhc(
    state: PhaseState,
    grad_fn,
    config: IntegratorConfig,
    n_steps: int,
) -> PhaseState:
    """Advance ``n_steps`` without recording; pure.

    The target temperature follows ``config.schedule`` evaluated at the
    state's running step index, so a ramp continues correctly across calls.
    Equivalent to ``n_steps`` chained calls of :func:`nhc_step`.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    out = state.copy()
    s = out.chain.positions.tolist()
    vs = out.chain.velocities.tolist()
    q = out.chain.masses.tolist()
    schedule = config.schedule
    x, v, m = out.positions, out.velocities, out.masses
    for i in range(n_steps):
        idx = out.step_index + i
        _advance(x, v, m, s, vs, q, config.dt, schedule.at(idx), grad_fn, idx)
    out.chain.positions[...] = s
    out.chain.velocities[...] = vs
    out.step_index = state.step_index + n_steps
    return out


# ---------------------------------------------------------------------------
# recorded trajectories


@dataclass
class Trajectory:
    """Per-step records of a finite-temperature run.

    Record ``i`` (0-based) describes the state after completing step ``i+1``;
    the ``iterations`` column is that 1-based step count.  Snapshots hold
    full parameter vectors for the recorded subset of steps:
    ``snapshots[j]`` is the state after step ``snapshot_positions[j] + 1``,
    i.e. record index ``snapshot_positions[j]``.
    """

    iterations: np.ndarray
    temperature: np.ndarray
    kinetic_temperature: np.ndarray
    loss_train: np.ndarray
    loss_test: np.ndarray
    extended_energy: np.ndarray
    snapshot_positions: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    snapshots: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def __len__(self) -> int:
        return int(self.iterations.shape[0])


def run_trajectory(
    state: PhaseState,
    grad_fn,
    config: IntegratorConfig,
    n_steps: int,
    loss_train_fn,
    loss_test_fn=None,
    snapshot_start: int = 0,
    snapshot_stride: int = 1,
) -> tuple[PhaseState, Trajectory]:
    """Advance ``n_steps`` recording one row per step.

    ``loss_train_fn(x)`` supplies the potential entering the extended energy;
    ``loss_test_fn`` is optional (NaN recorded when absent).  Parameter
    snapshots are kept for record positions ``snapshot_start``,
    ``snapshot_start + snapshot_stride``, ...; pass ``snapshot_start=n_steps``
    to keep none.  Positions are relative to this call.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if snapshot_start < 0 or snapshot_stride < 1:
        raise ValueError("snapshot_start must be >= 0 and snapshot_stride >= 1")

    out = state.copy()
    s = out.chain.positions.tolist()
    vs = out.chain.velocities.tolist()
    q = out.chain.masses.tolist()
    x, v, m = out.positions, out.velocities, out.masses
    schedule = config.schedule
    n = x.shape[0]
    scalar_mass = isinstance(m, float)

    iterations = np.arange(1, n_steps + 1, dtype=np.int64)
    temperature = np.empty(n_steps)
    t_kin = np.empty(n_steps)
    loss_train = np.empty(n_steps)
    loss_test = np.full(n_steps, np.nan)
    energy = np.empty(n_steps)
    n_snaps = 0
    if snapshot_start < n_steps:
        n_snaps = 1 + (n_steps - 1 - snapshot_start) // snapshot_stride
    snap_positions = np.empty(n_snaps, dtype=np.int64)
    snaps = np.empty((n_snaps, n))
    snap_at = snapshot_start
    snap_row = 0

    n_c = len(s)
    for i in range(n_steps):
        idx = out.step_index + i
        t_now = schedule.at(idx)
        _advance(x, v, m, s, vs, q, config.dt, t_now, grad_fn, idx)

        if scalar_mass:
            sum_mv2 = m * float(v @ v)
        else:
            sum_mv2 = float((m * v) @ v)
        ltrain = float(loss_train_fn(x))
        chain_kin = 0.5 * sum(q[k] * vs[k] * vs[k] for k in range(n_c))
        bath = n * t_now * s[0] + t_now * sum(s[1:])
        e_now = 0.5 * sum_mv2 + ltrain + chain_kin + bath
        temperature[i] = t_now
        t_kin[i] = sum_mv2 / n
        loss_train[i] = ltrain
        energy[i] = e_now
        if loss_test_fn is not None:
            loss_test[i] = float(loss_test_fn(x))
        if not math.isfinite(ltrain) or not math.isfinite(e_now):
            raise NonFiniteError(f"non-finite loss or energy after step {idx}")
        if i == snap_at:
            snap_positions[snap_row] = i
            snaps[snap_row] = x
            snap_row += 1
            snap_at += snapshot_stride

    out.chain.positions[...] = s
    out.chain.velocities[...] = vs
    out.step_index = state.step_index + n_steps
    traj = Trajectory(
        iterations=iterations,
        temperature=temperature,
        kinetic_temperature=t_kin,
        loss_train=loss_train,
        loss_test=loss_test,
        extended_energy=energy,
        snapshot_positions=snap_positions,
        snapshots=snaps,
    )
    return out, traj
