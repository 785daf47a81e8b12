"""Drive the estimator over a simulated scenario and audit every step."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..correction import CaseKind, CorrectionCriterion
from ..estimator import EstimatorConfig, init_state, step
from ..geometry import contains, pseudo_volume, ssal
from .oracle import containment_fraction, intersection_sampler, reachable_sampler
from .scenario import Scenario
from .simulate import check_hyperplane_rank, simulate_truth, stream

__all__ = ["StepRecord", "Audit", "RunResult", "run", "run_detailed"]

ACCEPT_TOL = 1e-9


@dataclass(frozen=True)
class StepRecord:
    """Summary of the estimate at time ``k``.

    ``sigma`` is the running scale factor, ``err`` the Euclidean distance
    between estimate and truth, ``contained`` whether the truth lies in the
    estimated set, ``cases`` the case label of each measurement joined by
    ``;`` and ``ms`` the wall time of the step in milliseconds (``None``
    unless timing was requested).
    """

    k: int
    xhat: tuple
    sigma: float
    rank: int
    pvol: float
    ssal: float
    err: float
    contained: bool
    cases: str
    ms: float = None


@dataclass
class Audit:
    """Violations found while running; empty lists mean a clean run."""

    containment: list = field(default_factory=list)
    acceptability: list = field(default_factory=list)
    monotonicity: list = field(default_factory=list)
    sampled: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.containment or self.acceptability or self.monotonicity or self.sampled)

    def summary(self) -> str:
        parts = [f"{name}={len(getattr(self, name))}"
                 for name in ("containment", "acceptability", "monotonicity", "sampled")]
        return ("ok " if self.ok else "VIOLATION ") + " ".join(parts)


@dataclass
class RunResult:
    records: list
    audit: Audit
    states: list
    diagnostics: list


def _record(k, state, x, ms):
    E = state.ellipsoid
    cases = ";".join(lab.kind.value for lab in state.labels)
    return StepRecord(k, tuple(float(v) for v in E.center), float(state.sigma), int(E.rank),
                      pseudo_volume(E), ssal(E), float(np.linalg.norm(x - E.center)),
                      bool(contains(E, x, ACCEPT_TOL)), cases, ms)


def run_detailed(s: Scenario, config: EstimatorConfig, seed: int, samples: int = 0,
                 timing: bool = False) -> RunResult:
    """Simulate the scenario and run the estimator on it with inline audits.

    Parameters
    ----------
    samples : int
        When positive, every step also checks that this many points of the
        reachable set lie in the predicted ellipsoid and that this many
        points of its intersection with the measurement sets lie in the
        corrected one.
    timing : bool
        Record per-step wall time. Off by default so output is reproducible
        byte for byte.
    """
    states, meas = simulate_truth(s, seed)
    audit_rng = stream(seed, 1)
    state = init_state(s.initial, config)
    records = [_record(0, state, states[0], None)]
    diagnostics = [state.diagnostics]
    audit = Audit()
    sigma_min = config.corr is CorrectionCriterion.SIGMA
    for k in range(1, s.horizon + 1):
        model = s.model(k - 1)
        ms = meas[k]
        check_hyperplane_rank(ms, f"step {k}")
        prev = state
        t0 = time.perf_counter()
        state = step(state, model, ms, config)
        elapsed = 1e3 * (time.perf_counter() - t0) if timing else None
        rec = _record(k, state, states[k], elapsed)
        records.append(rec)
        diagnostics.append(state.diagnostics)

        if not rec.contained:
            audit.containment.append(k)
        for m, lab in zip(ms, state.labels):
            if lab.kind is not CaseKind.EMPTY and not m.satisfied_by(state.ellipsoid.center,
                                                                     ACCEPT_TOL):
                audit.acceptability.append(k)
                break
        if sigma_min and state.sigma > prev.sigma * (1.0 + 1e-12):
            audit.monotonicity.append(k)
        if samples > 0:
            fr = containment_fraction(state.predicted,
                                      reachable_sampler(prev.ellipsoid, model),
                                      samples, audit_rng)
            kept = [m for m, lab in zip(ms, state.labels) if lab.kind is not CaseKind.EMPTY]
            fc = containment_fraction(state.ellipsoid,
                                      intersection_sampler(state.predicted, kept),
                                      samples, audit_rng)
            if fr < 1.0 or fc < 1.0:
                audit.sampled.append(k)
    return RunResult(records, audit, states, diagnostics)


def run(s: Scenario, config: EstimatorConfig, seed: int) -> list:
    """Per-step records of one estimator run; see :func:`run_detailed`."""
    return run_detailed(s, config, seed).records
