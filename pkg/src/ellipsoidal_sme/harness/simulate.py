"""Ground-truth trajectories and measurements consistent with them."""

from __future__ import annotations

import math

import numpy as np

from ..correction import Measurement
from ..errors import ValidationError
from ..geometry import sample
from .scenario import MEASUREMENT_KINDS, Scenario

__all__ = ["simulate_truth", "noise_sample", "check_hyperplane_rank", "stream"]


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for the ``index``-th consumer of a run seed."""
    return np.random.default_rng([int(seed), int(index)])


def noise_sample(policy: str, m: int, rng: np.random.Generator):
    """One noise vector in the unit box under the given policy."""
    if policy == "uniform":
        return rng.uniform(-1.0, 1.0, size=m)
    if policy == "vertex":
        return rng.choice((-1.0, 1.0), size=m)
    if policy == "zero":
        return np.zeros(m)
    raise ValueError(f"unknown noise policy {policy!r}")


def check_hyperplane_rank(measurements, where: str = "measurements") -> None:
    """Equality measurements of one step must have independent directions.

    Raises
    ------
    ValidationError
    """
    F = [m.direction for m in measurements if m.lower == m.upper]
    if len(F) > 1:
        F = np.column_stack(F)
        if np.linalg.matrix_rank(F) < F.shape[1]:
            raise ValidationError(f"{where}: equality directions are linearly dependent")


def _direction(sched, n, rng):
    if sched.directions is None:
        return rng.standard_normal(n)
    rows = np.asarray(sched.directions)
    return rows[rng.integers(rows.shape[0])].copy()


def _draw(s: Scenario, x, rng, budget):
    sched = s.schedule
    if sched.max_count == 0 or rng.random() >= sched.presence:
        return []
    weights = np.array([sched.kinds[k] for k in MEASUREMENT_KINDS], dtype=float)
    weights /= weights.sum()
    out, planes = [], []
    for _ in range(rng.integers(1, sched.max_count + 1)):
        f = _direction(sched, s.n, rng)
        y = float(f @ x)
        kind = MEASUREMENT_KINDS[rng.choice(len(MEASUREMENT_KINDS), p=weights)]
        width = rng.uniform(*sched.width)
        a = rng.random()
        if kind == "hyperplane":
            cand = np.column_stack(planes + [f])
            if len(planes) < budget and np.linalg.matrix_rank(cand) == cand.shape[1]:
                planes.append(f)
                lo = hi = y
            else:
                # over the rank budget: keep the direction as a strip instead
                kind = "strip"
        if kind == "strip":
            lo, hi = y - a * width, y + (1.0 - a) * width
        elif kind == "upper":
            lo, hi = -math.inf, y + a * width
        elif kind == "lower":
            lo, hi = y - a * width, math.inf
        if sched.adversarial and rng.random() < sched.adversarial:
            shift = 1e3 * (1.0 + abs(y)) + width
            lo, hi = lo + shift, hi + shift
        out.append(Measurement(f, lo, hi))
    return out


def simulate_truth(s: Scenario, seed: int):
    """Sample a trajectory of the scenario's system and its measurements.

    The initial state is uniform in the initial ellipsoid. Noise follows the
    scenario's policy inside the unit box. Measurement bounds are built
    around ``f' x_k`` so the truth satisfies them exactly (unless the
    adversarial option shifts them). Equality measurements per step are
    capped so the generated directions stay independent and the number of
    them stays below a running lower bound on the estimate's rank.

    Returns
    -------
    states : list of ndarray
        ``x_0, ..., x_N``.
    measurements : list of list of Measurement
        ``measurements[k]`` is observed at time ``k``; index 0 is empty.
    """
    rng = stream(seed, 0)
    x = sample(s.initial, 1, rng)[0]
    states, measurements = [x], [[]]
    rank_lb = s.n
    for k in range(s.horizon):
        mdl = s.model(k)
        x = mdl.A @ x + mdl.drift() + mdl.R @ noise_sample(s.noise, mdl.m, rng)
        rank_lb = min(s.n, rank_lb + mdl.m)
        ms = _draw(s, x, rng, max(0, rank_lb - 1))
        rank_lb -= sum(1 for m in ms if m.lower == m.upper)
        states.append(x)
        measurements.append(ms)
    return states, measurements
