"""Ensembles of sampled parameter vectors and their aggregate predictions.

A bundle stores raw parameter snapshots, never predictions; members are
re-evaluated on demand.  Every reduction (mean, vote tally) walks members
in storage order with a single running accumulator, so results are
bit-stable and independent of how the bundle was assembled.

Vote proportions are quantized onto a 2**52 grid with largest-remainder
rounding.  Each fraction is then an exact multiple of 2**-52 and every
partial sum is exactly representable, so the per-input class proportions
sum to exactly 1.0 in any summation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data, net, seeding
from .data import ScalerParams
from .dynamics import Trajectory
from .net import Topology

_GRID = 1 << 52


@dataclass(frozen=True)
class SamplingPlan:
    """Which trajectory snapshots become ensemble members.

    Snapshots from the first ``burn_in`` iterations are discarded, the
    remainder is stride-thinned, and ``fraction`` of those (if < 1) is
    drawn uniformly without replacement under the plan seed and replicate
    index (so replicated runs subsample independently).
    """

    total_iterations: int
    burn_in: int
    stride: int = 1
    fraction: float = 1.0
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")
        if not 0 <= self.burn_in < self.total_iterations:
            raise ValueError("burn_in must lie in [0, total_iterations)")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.replicate < 0:
            raise ValueError("replicate must be >= 0")


@dataclass
class EnsembleBundle:
    """Sampled parameter vectors plus everything needed to predict."""

    members: np.ndarray        # (M, N) parameter vectors
    iterations: np.ndarray     # (M,) 1-based capture iteration
    temperatures: np.ndarray   # (M,) target temperature at capture
    topology: Topology
    scaler: ScalerParams

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=np.float64)
        self.iterations = np.asarray(self.iterations, dtype=np.int64)
        self.temperatures = np.asarray(self.temperatures, dtype=np.float64)
        if self.members.ndim != 2 or self.members.shape[0] < 1:
            raise ValueError("a bundle needs at least one member")
        if self.members.shape[1] != self.topology.param_count:
            raise ValueError(
                f"member length {self.members.shape[1]} does not match "
                f"topology parameter count {self.topology.param_count}"
            )
        m = self.members.shape[0]
        if self.iterations.shape != (m,) or self.temperatures.shape != (m,):
            raise ValueError("iterations and temperatures must align with members")
        if (self.temperatures < 0).any():
            raise ValueError("capture temperatures must be >= 0")

    @property
    def n_members(self) -> int:
        return int(self.members.shape[0])


def collect(
    trajectory: Trajectory,
    plan: SamplingPlan,
    topology: Topology,
    scaler: ScalerParams,
) -> EnsembleBundle:
    """Select snapshots into a bundle per the sampling plan."""
    if len(trajectory) != plan.total_iterations:
        raise ValueError(
            f"plan describes {plan.total_iterations} iterations but the "
            f"trajectory has {len(trajectory)}"
        )
    keep = trajectory.snapshot_positions >= plan.burn_in
    record_idx = trajectory.snapshot_positions[keep][:: plan.stride]
    members = trajectory.snapshots[keep][:: plan.stride]
    if record_idx.size == 0:
        raise ValueError("no snapshots survive the burn-in window")
    if plan.fraction < 1.0:
        n_keep = int(round(record_idx.size * plan.fraction))
        if n_keep < 1:
            raise ValueError(
                f"fraction {plan.fraction} of {record_idx.size} snapshots keeps none"
            )
        rng = seeding.stream(plan.seed, "subsample", plan.replicate)
        chosen = np.sort(rng.choice(record_idx.size, size=n_keep, replace=False))
        record_idx = record_idx[chosen]
        members = members[chosen]
    return EnsembleBundle(
        members=members.copy(),
        iterations=record_idx + 1,
        temperatures=trajectory.temperature[record_idx].copy(),
        topology=topology,
        scaler=scaler,
    )


def _scalers_match(a: ScalerParams, b: ScalerParams) -> bool:
    if a.scales_targets != b.scales_targets:
        return False
    same = np.array_equal(a.feature_min, b.feature_min) and np.array_equal(
        a.feature_max, b.feature_max
    )
    if a.scales_targets:
        same = same and np.array_equal(a.target_min, b.target_min) and np.array_equal(
            a.target_max, b.target_max
        )
    return same


def pool(bundles) -> EnsembleBundle:
    """Concatenate bundles from replicate runs into one voting population."""
    bundles = list(bundles)
    if not bundles:
        raise ValueError("nothing to pool")
    first = bundles[0]
    for b in bundles[1:]:
        if b.topology != first.topology:
            raise ValueError("cannot pool bundles with different topologies")
        if not _scalers_match(b.scaler, first.scaler):
            raise ValueError("cannot pool bundles with different scalers")
    return EnsembleBundle(
        members=np.concatenate([b.members for b in bundles]),
        iterations=np.concatenate([b.iterations for b in bundles]),
        temperatures=np.concatenate([b.temperatures for b in bundles]),
        topology=first.topology,
        scaler=first.scaler,
    )


def _scaled_inputs(bundle: EnsembleBundle, inputs) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError("inputs must be a 2-D (samples, features) array")
    return data.scale_features(bundle.scaler, inputs)


def regression_mean(bundle: EnsembleBundle, inputs) -> np.ndarray:
    """Pointwise mean of member predictions, in original target units."""
    scaled = _scaled_inputs(bundle, inputs)
    total = np.zeros((scaled.shape[0], bundle.topology.layer_sizes[-1]))
    for m in range(bundle.n_members):
        outputs = net.forward(bundle.topology, bundle.members[m], scaled)
        total += data.unscale_targets(bundle.scaler, outputs)
    return total / bundle.n_members


@dataclass(frozen=True)
class PredictionSpread:
    """Every member's prediction at one input, for histogramming."""

    members: np.ndarray  # (M, K) in original target units
    mean: np.ndarray     # (K,), identical to regression_mean at the point


def regression_distribution(bundle: EnsembleBundle, input_point) -> PredictionSpread:
    point = np.asarray(input_point, dtype=np.float64).reshape(1, -1)
    scaled = _scaled_inputs(bundle, point)
    rows = np.empty((bundle.n_members, bundle.topology.layer_sizes[-1]))
    for m in range(bundle.n_members):
        outputs = net.forward(bundle.topology, bundle.members[m], scaled)
        rows[m] = data.unscale_targets(bundle.scaler, outputs)[0]
    return PredictionSpread(members=rows, mean=regression_mean(bundle, point)[0])


def n_vote_classes(topology: Topology) -> int:
    # a single logit output is a two-class decision thresholded at 0
    k = topology.layer_sizes[-1]
    return 2 if k == 1 else k


def vote_counts(bundle: EnsembleBundle, inputs) -> np.ndarray:
    """Integer (samples, classes) tally of member argmax votes."""
    scaled = _scaled_inputs(bundle, inputs)
    counts = np.zeros((scaled.shape[0], n_vote_classes(bundle.topology)), dtype=np.int64)
    rows = np.arange(scaled.shape[0])
    for m in range(bundle.n_members):
        outputs = net.forward(bundle.topology, bundle.members[m], scaled)
        counts[rows, net.class_labels_from_outputs(outputs)] += 1
    return counts


def majority_vote(bundle: EnsembleBundle, inputs) -> np.ndarray:
    """Most-voted class per input; ties go to the lowest class index."""
    return np.argmax(vote_counts(bundle, inputs), axis=1)


def _exact_fraction_row(counts_row, total: int) -> list[float]:
    # largest-remainder apportionment of 2**52 grid cells; every result is
    # an exact multiple of 2**-52 so the row sums to exactly 1.0
    scaled = [int(c) * _GRID for c in counts_row]
    base = [s // total for s in scaled]
    leftover = _GRID - sum(base)
    order = sorted(range(len(base)), key=lambda i: (-(scaled[i] % total), i))
    for i in order[:leftover]:
        base[i] += 1
    return [b / _GRID for b in base]


def vote_proportions(bundle: EnsembleBundle, inputs) -> np.ndarray:
    """Per-input class vote fractions; each row sums to exactly 1.0."""
    counts = vote_counts(bundle, inputs)
    m = bundle.n_members
    return np.array([_exact_fraction_row(row, m) for row in counts])


def decision_grid(bundle: EnsembleBundle, bounds, resolution: int):
    """Vote proportions on a rectangular grid over a 2-D feature space.

    Returns (x_values, y_values, proportions) with proportions indexed as
    [ix, iy, class] at the node (x_values[ix], y_values[iy]).
    """
    if bundle.topology.layer_sizes[0] != 2:
        raise ValueError("decision grids need a 2-feature input space")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    x_values = np.linspace(x_lo, x_hi, resolution)
    y_values = np.linspace(y_lo, y_hi, resolution)
    gx, gy = np.meshgrid(x_values, y_values, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    props = vote_proportions(bundle, points)
    return x_values, y_values, props.reshape(resolution, resolution, -1)
