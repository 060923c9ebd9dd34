"""Monte-Carlo channel closure: trial sweeps, bin statistics, thresholds.

Each trial draws one random permutation of the channels; stage ``s`` closes
the first ``round(s * M)`` entries, so the closure process is nested within
a trial and the first blocking fraction is well defined per trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .networks import (
    PoreNetwork,
    is_percolating,
    network_permeability,
    solve_pressure,
)

DEFAULT_STAGES = tuple(np.round(np.arange(1, 101) / 100.0, 2))
DEFAULT_BIN_CENTERS = tuple(np.round(np.arange(1, 10) / 10.0, 1))
BIN_HALF_WIDTH = 0.05

# Only the normalized permeability matters; these cancel out.
_ETA = 1.307e-3
_DELTA_P = 1.0e3


class ThresholdEstimationError(RuntimeError):
    """No blocking configurations found in the supplied records."""


class PowerLawFitError(RuntimeError):
    """Not enough above-threshold records to fit."""


@dataclass(frozen=True)
class TrialRecord:
    stage_fraction: float   # nominal closed fraction by count
    f_c: float              # closed volume fraction V_c / V_t
    kappa_n: float          # kappa / kappa0
    seed: int               # trial RNG seed (shared by all stages of a trial)


@dataclass(frozen=True)
class BinStats:
    center: float
    count: int
    mean: float             # NaN when the bin is empty
    std: float              # NaN when fewer than two records


@dataclass(frozen=True)
class ThresholdEstimate:
    f_c_star: float         # mean smallest f_c with kappa_n = 0
    p_c: float              # 1 - f_c_star
    trials: int


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    n_points: int
    residual: float         # RMS of log-space residuals


def trial_seed(master_seed: int, trial: int) -> int:
    """Deterministic per-trial stream, stable across platforms."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def reference_permeability(net: PoreNetwork) -> float:
    """All-open permeability used to normalize every trial of a network."""
    sol = solve_pressure(net, _DELTA_P, _ETA)
    return network_permeability(net, sol, _DELTA_P, _ETA)


def run_trial(net: PoreNetwork, stage_fraction: float, seed: int,
              kappa0: float | None = None) -> TrialRecord:
    """Close round(stage_fraction * M) channels picked by the seeded permutation."""
    if not 0.0 <= stage_fraction <= 1.0:
        raise ValueError("stage_fraction must lie in [0, 1]")
    m = net.n_channels
    k = round(stage_fraction * m)
    perm = np.random.default_rng(seed).permutation(m)
    mask = np.ones(m, dtype=bool)
    mask[perm[:k]] = False

    if kappa0 is None:
        kappa0 = reference_permeability(net)
    volumes = net.channel_volumes
    f_c = float(volumes[~mask].sum() / net.total_volume)
    if not is_percolating(net, mask):
        kappa_n = 0.0
    else:
        sol = solve_pressure(net, _DELTA_P, _ETA, open_mask=mask)
        kappa_n = network_permeability(net, sol, _DELTA_P, _ETA) / kappa0
    return TrialRecord(float(stage_fraction), f_c, float(kappa_n), int(seed))


def sweep(net: PoreNetwork, stages=DEFAULT_STAGES, trials_per_stage: int = 500,
          master_seed: int = 0) -> list[TrialRecord]:
    """All (stage, trial) records for a network.

    Stages within a trial share one permutation, so once a trial disconnects
    at some stage all later stages are also disconnected and skip the solve.
    """
    stages = [float(s) for s in stages]
    if sorted(stages) != stages or not all(0.0 <= s <= 1.0 for s in stages):
        raise ValueError("stages must be sorted and within [0, 1]")

    m = net.n_channels
    kappa0 = reference_permeability(net)
    volumes = net.channel_volumes
    v_t = net.total_volume

    records: list[TrialRecord] = []
    for trial in range(trials_per_stage):
        seed = trial_seed(master_seed, trial)
        perm = np.random.default_rng(seed).permutation(m)
        block_k = first_blocking_count(net, perm)
        closed_volume = np.concatenate([[0.0], np.cumsum(volumes[perm])])
        mask = np.ones(m, dtype=bool)
        prev_k = 0
        for s in stages:
            k = round(s * m)
            f_c = float(closed_volume[k] / v_t)
            if k >= block_k:
                kappa_n = 0.0
            else:
                mask[perm[prev_k:k]] = False
                prev_k = k
                sol = solve_pressure(net, _DELTA_P, _ETA, open_mask=mask)
                kappa_n = network_permeability(net, sol, _DELTA_P, _ETA) / kappa0
            records.append(TrialRecord(s, f_c, float(kappa_n), seed))
    return records


def first_blocking_count(net: PoreNetwork, perm: np.ndarray) -> int:
    """Smallest closure count k such that closing perm[:k] disconnects inlet from outlet.

    Channels are re-opened in reverse permutation order with a union-find;
    the moment the inlet first connects to the outlet gives the answer.
    Returns 0 when the fully open network does not percolate.
    """
    n = net.n_nodes
    parent = list(range(n + 2))
    source, sink = n, n + 1

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    for i in net.inlet_nodes:
        union(int(i), source)
    for i in net.outlet_nodes:
        union(int(i), sink)

    a, b = net.channel_a, net.channel_b
    for j in range(len(perm) - 1, -1, -1):
        c = perm[j]
        union(int(a[c]), int(b[c]))
        if find(source) == find(sink):
            return j + 1
    return 0


def bin_stats(records, centers=DEFAULT_BIN_CENTERS) -> list[BinStats]:
    """Mean and sample standard deviation of f_c per normalized-permeability bin."""
    records = list(records)
    if not records:
        raise ValueError("empty record set")
    kappa = np.array([r.kappa_n for r in records])
    f_c = np.array([r.f_c for r in records])
    out = []
    for center in centers:
        sel = (kappa > center - BIN_HALF_WIDTH) & (kappa < center + BIN_HALF_WIDTH)
        n = int(sel.sum())
        mean = float(f_c[sel].mean()) if n else math.nan
        std = float(f_c[sel].std(ddof=1)) if n >= 2 else (0.0 if n == 1 else math.nan)
        out.append(BinStats(float(center), n, mean, std))
    return out


def estimate_threshold(records) -> ThresholdEstimate:
    """Average, over trials, of the smallest f_c with kappa_n = 0."""
    by_trial: dict[int, float] = {}
    seeds = set()
    for r in records:
        seeds.add(r.seed)
        if r.kappa_n == 0.0:
            cur = by_trial.get(r.seed)
            if cur is None or r.f_c < cur:
                by_trial[r.seed] = r.f_c
    if not by_trial:
        raise ThresholdEstimationError(
            "no blocking configurations found; widen the stage range")
    f_c_star = float(np.mean(list(by_trial.values())))
    return ThresholdEstimate(f_c_star, 1.0 - f_c_star, len(by_trial))


def estimate_threshold_fast(net: PoreNetwork, trials: int = 500, master_seed: int = 0,
                            stages=DEFAULT_STAGES) -> ThresholdEstimate:
    """Connectivity-only threshold estimate, record-equivalent but without solves."""
    m = net.n_channels
    volumes = net.channel_volumes
    v_t = net.total_volume
    stage_counts = [round(float(s) * m) for s in stages]
    values = []
    for trial in range(trials):
        seed = trial_seed(master_seed, trial)
        perm = np.random.default_rng(seed).permutation(m)
        block_k = first_blocking_count(net, perm)
        blocked = [k for k in stage_counts if k >= block_k]
        if not blocked:
            continue
        k = min(blocked)
        values.append(volumes[perm[:k]].sum() / v_t)
    if not values:
        raise ThresholdEstimationError(
            "no blocking configurations found; widen the stage range")
    f_c_star = float(np.mean(values))
    return ThresholdEstimate(f_c_star, 1.0 - f_c_star, len(values))


def fit_power_law(records, threshold: ThresholdEstimate, n_channels: int) -> PowerLawFit:
    """Least-squares fit of log kappa_n against log(N_o - N_hat) above threshold."""
    n_hat = (1.0 - threshold.f_c_star) * n_channels
    xs, ys = [], []
    for r in records:
        n_open = n_channels - round(r.stage_fraction * n_channels)
        if n_open > n_hat and r.kappa_n > 0.0:
            xs.append(math.log(n_open - n_hat))
            ys.append(math.log(r.kappa_n))
    if len(xs) < 2:
        raise PowerLawFitError("insufficient above-threshold records for the fit")
    coeffs, res = np.polyfit(xs, ys, 1, full=True)[:2]
    b, intercept = float(coeffs[0]), float(coeffs[1])
    rms = math.sqrt(res[0] / len(xs)) if len(res) else 0.0
    return PowerLawFit(b, math.exp(intercept), len(xs), rms)


class PercolationThresholdEstimator(BaseEstimator):
    """Estimator-style wrapper around the connectivity threshold sweep.

    Fitting a :class:`~poroperm.networks.PoreNetwork` populates ``p_c_``,
    ``f_c_star_`` and ``n_trials_``.
    """

    def __init__(self, trials: int = 500, master_seed: int = 0, stages=DEFAULT_STAGES):
        self.trials = trials
        self.master_seed = master_seed
        self.stages = stages

    def fit(self, X: PoreNetwork, y=None):
        est = estimate_threshold_fast(X, trials=self.trials,
                                      master_seed=self.master_seed, stages=self.stages)
        self.f_c_star_ = est.f_c_star
        self.p_c_ = est.p_c
        self.n_trials_ = est.trials
        return self

    def predict(self, X: PoreNetwork) -> float:
        """Threshold porosity p_c * theta0 for the fitted threshold."""
        return self.p_c_ * X.theta0
