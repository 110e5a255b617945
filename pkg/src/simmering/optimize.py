"""Adam baseline training and the optimizer-to-dynamics handoff.

Training is full batch: one epoch is exactly one Adam update on the whole
training split.  The report keeps the last two parameter iterates so a
finite-temperature run can be warm-started from the optimizer endpoint with
the velocity read off the last optimizer displacement:

    v = (x_final - x_penultimate) / gamma

where gamma is the Adam learning rate that produced the displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import net
from .dynamics import PhaseState, ThermostatChain
from .net import NonFiniteError, Topology


@dataclass
class AdamState:
    """First/second gradient moments plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    alpha: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, alpha: float, **kw) -> "AdamState":
        if alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), t=0, alpha=alpha, **kw)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; pure."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("params, gradient and moment shapes must match")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(
        m=m, v=v, t=t, alpha=state.alpha, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
    return new_params, new_state


@dataclass
class AdamReport:
    """Loss curves and the last two iterates of a full-batch Adam run."""

    train_losses: np.ndarray
    test_losses: np.ndarray
    final_params: np.ndarray
    penultimate_params: np.ndarray
    alpha: float
    epochs: int


def train_adam(
    topology: Topology,
    params0: np.ndarray,
    train_inputs: np.ndarray,
    train_targets: np.ndarray,
    test_inputs: np.ndarray,
    test_targets: np.ndarray,
    loss_kind: str,
    epochs: int,
    alpha: float,
) -> AdamReport:
    """Full-batch Adam for `epochs` updates.

    Losses are recorded after each update, so row ``i`` describes the
    iterate produced by epoch ``i+1`` and the last row matches
    ``final_params``.  At least two epochs are required so the penultimate
    iterate exists.
    """
    if epochs < 2:
        raise ValueError("epochs must be >= 2 (the handoff needs the last two iterates)")
    params = np.asarray(params0, dtype=np.float64).copy()
    if params.shape != (topology.param_count,):
        raise ValueError(
            f"params0 must have shape ({topology.param_count},), got {params.shape}"
        )
    state = AdamState.fresh(topology.param_count, alpha)
    train_losses = np.empty(epochs)
    test_losses = np.empty(epochs)
    prev = params
    for epoch in range(epochs):
        _, grad = net.loss_and_gradient(topology, params, train_inputs, train_targets, loss_kind)
        prev = params
        params, state = adam_step(params, grad, state)
        train_losses[epoch] = net.loss(loss_kind, net.forward(topology, params, train_inputs), train_targets)
        test_losses[epoch] = net.loss(loss_kind, net.forward(topology, params, test_inputs), test_targets)
        if not math.isfinite(train_losses[epoch]):
            raise NonFiniteError(f"non-finite training loss after epoch {epoch + 1}")
    return AdamReport(
        train_losses=train_losses,
        test_losses=test_losses,
        final_params=params,
        penultimate_params=prev,
        alpha=alpha,
        epochs=epochs,
    )


def velocity_estimate(x_last: np.ndarray, x_prev: np.ndarray, gamma: float) -> np.ndarray:
    """Finite-difference velocity of the last optimizer displacement."""
    if gamma <= 0.0:
        raise ValueError("gamma must be > 0")
    x_last = np.asarray(x_last, dtype=np.float64)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    if x_last.shape != x_prev.shape:
        raise ValueError("snapshot shapes must match")
    return (x_last - x_prev) / gamma


def retrofit_init(
    report: AdamReport,
    gamma: float,
    chain_length: int = 2,
    chain_mass: float = 1.0,
    particle_mass: float = 1.0,
) -> PhaseState:
    """Phase-space start for simmering from an Adam endpoint.

    Positions are the final Adam iterate (the same bits, copied), velocities
    the last-displacement estimate, and the thermostat chain starts at rest.
    """
    velocities = velocity_estimate(report.final_params, report.penultimate_params, gamma)
    return PhaseState(
        positions=report.final_params.copy(),
        velocities=velocities,
        masses=float(particle_mass),
        chain=ThermostatChain.rest(chain_length, mass=chain_mass),
        step_index=0,
    )
