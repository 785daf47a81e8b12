"""Recursive estimator: predict, correct, renormalise, and track diagnostics.

The represented set after every step is ``E(c, scale * P)``. With
normalisation enabled the ellipsoid keeps ``scale == sigma0`` and the
running scale factor (the one a filter without renormalisation would
carry) is recorded separately in :attr:`EstimatorState.sigma`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import inf

import numpy as np

from .correction import (CorrectionCriterion, Measurement, MeasurementKind, correct_detailed)
from .errors import SingularTransition
from .geometry import Ellipsoid
from .numerics import (DEFAULT_TOL, Tolerances, log_pseudo_det, numeric_rank, pseudo_inverse,
                       symmetrize)
from .prediction import PredictionCriterion, PredictionScratch, ProcessModel, predict

__all__ = [
    "EstimatorConfig",
    "EstimatorState",
    "Diagnostics",
    "classify",
    "init_state",
    "step",
    "normalize",
    "gramians",
    "bound_factors",
]


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for :func:`step`.

    Attributes
    ----------
    pred : PredictionCriterion
    corr : CorrectionCriterion
    sigma0 : float, optional
        Reference scale used by every prediction and correction when
        ``normalize`` is on. Defaults to the initial ellipsoid's scale.
    tol : Tolerances
    theta_refresh_period : int
        The cached pseudo-inverse is rebuilt from scratch every this many
        steps.
    inconsistency : {"skip", "abort"}
    normalize : bool
        Rescale the shape after each correction so the scale returns to
        ``sigma0``. Turning it off threads the scale through instead; the
        represented sets are the same either way.
    diagnostics : bool
        Track bound factors and gramians (extra cubic work per step).
    gramian_horizon : int, optional
        Number of measurement instants / steps used by the gramians;
        defaults to the state dimension.
    sweeps : int
        Cap on extra correction passes that re-fuse measurements the center
        still violates (0 gives a single pass).
    """

    pred: PredictionCriterion = field(default_factory=PredictionCriterion)
    corr: CorrectionCriterion = CorrectionCriterion.SIGMA
    sigma0: float = None
    tol: Tolerances = DEFAULT_TOL
    theta_refresh_period: int = 50
    inconsistency: str = "skip"
    normalize: bool = True
    diagnostics: bool = False
    gramian_horizon: int = None
    sweeps: int = 100

    def __post_init__(self):
        if isinstance(self.pred, str):
            object.__setattr__(self, "pred", PredictionCriterion(self.pred))
        object.__setattr__(self, "corr", CorrectionCriterion(self.corr))
        if self.sigma0 is not None and not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.theta_refresh_period < 1:
            raise ValueError("theta_refresh_period must be >= 1")
        if self.inconsistency not in ("skip", "abort"):
            raise ValueError(f"unknown inconsistency policy {self.inconsistency!r}")


@dataclass(frozen=True)
class Diagnostics:
    """Running size bounds and the most recent gramians.

    ``v`` and ``s`` bound the growth of pseudo-volume and of the sum of
    squared semi-axes relative to the initial ellipsoid. They are products
    over all steps and can leave the float range on long runs, so their
    logarithms ``log_v`` and ``log_s`` are carried as well and are the
    values to compare against. Gramians are ``None`` until enough history
    is available.
    """

    v: float = 1.0
    s: float = 1.0
    log_v: float = 0.0
    log_s: float = 0.0
    obs_gramian: np.ndarray = None
    ctrl_gramian: np.ndarray = None
    window: int = None
    obs_eig: tuple = None
    ctrl_eig: tuple = None


@dataclass(frozen=True)
class EstimatorState:
    """Estimator state after ``step`` updates.

    Attributes
    ----------
    ellipsoid : Ellipsoid
        Represented set ``E(center, scale * shape)``.
    step : int
    scratch : PredictionScratch or None
        Cached pseudo-inverse of ``ellipsoid.shape`` (volume criterion).
    sigma : float
        Running scale factor as a filter without renormalisation would
        carry it.
    history : tuple of float
        ``sigma`` at every step, starting with the initial value.
    diagnostics : Diagnostics or None
    trail : tuple
        Recent ``(A, R, strip directions)`` triples for the gramians.
    labels : tuple of CaseLabel
        Case of each measurement fused in the last step.
    predicted : Ellipsoid or None
        Output of the last prediction, before any measurement was fused.
    """

    ellipsoid: Ellipsoid
    step: int = 0
    scratch: PredictionScratch = None
    sigma: float = 1.0
    history: tuple = ()
    diagnostics: Diagnostics = None
    trail: tuple = ()
    labels: tuple = ()
    predicted: Ellipsoid = None


def classify(lower: float, upper: float, f) -> MeasurementKind:
    """Kind of the measurement ``lower <= f' x <= upper``.

    Raises
    ------
    InvalidBounds
    """
    return Measurement(f, lower, upper).kind


def init_state(E0: Ellipsoid, config: EstimatorConfig) -> EstimatorState:
    """Initial state; the ellipsoid is re-expressed at scale ``sigma0``."""
    sigma0 = config.sigma0 or E0.scale
    E = E0
    if config.normalize and E0.scale != sigma0:
        E = Ellipsoid(E0.center, E0.shape * (E0.scale / sigma0), sigma0, E0.rank)
    diag = Diagnostics() if config.diagnostics else None
    return EstimatorState(E, 0, None, E0.scale, (E0.scale,), diag)


def _update_scratch(sc: PredictionScratch, outcomes):
    """Carry the cached pseudo-inverse through the correction downdates."""
    theta, pdet, q = sc.theta, sc.pdet, sc.rank
    for out in outcomes:
        if out.shape_factor is not None:
            theta = theta / out.shape_factor
            pdet = pdet * out.shape_factor ** q
        elif out.beta == 0.0:
            continue
        elif out.beta < 1.0:
            g = theta @ out.phi
            theta = symmetrize(theta + (out.alpha * out.beta / (1.0 - out.beta)) * np.outer(g, g))
            pdet = pdet * (1.0 - out.beta)
        else:
            # equality fusion: rank drops and the next prediction rebuilds
            return None
    return PredictionScratch(theta, pdet, q, sc.mus)


def normalize(state: EstimatorState, sigma0: float) -> EstimatorState:
    """Bring the ellipsoid back to scale ``sigma0`` without changing the set.

    The shape absorbs the factor ``scale / sigma0``; the running scale is
    advanced by the same ratio so that ``sigma * P_full`` stays the product
    an unnormalised filter would have.
    """
    E = state.ellipsoid
    ratio = E.scale / sigma0
    if ratio == 1.0:
        return state
    En = Ellipsoid(E.center, E.shape * ratio, sigma0, E.rank)
    sc = state.scratch
    if sc is not None:
        sc = PredictionScratch(sc.theta / ratio, sc.pdet * ratio ** sc.rank, sc.rank, sc.mus)
    return replace(state, ellipsoid=En, scratch=sc, sigma=state.sigma * ratio)


def _prediction_split(E: Ellipsoid, model: ProcessModel, mus):
    """``A_check`` and ``W`` with ``P_pred = A_check P A_check' + W``."""
    mus = np.asarray(mus, dtype=float)
    if mus.size == 0:
        return model.A.copy(), np.zeros((model.n, model.n))
    chi = np.cumprod((1.0 + mus)[::-1])[::-1]
    A_check = np.sqrt(chi[0]) * model.A
    W = (model.R * (chi / (mus * E.scale))) @ model.R.T
    return A_check, symmetrize(W)


def bound_factors(diag: Diagnostics, E: Ellipsoid, model: ProcessModel, mus,
                  tol: Tolerances = DEFAULT_TOL) -> Diagnostics:
    """Advance the pseudo-volume and trace growth bounds by one step.

    Parameters
    ----------
    diag : Diagnostics
    E : Ellipsoid
        Ellipsoid the prediction started from.
    model : ProcessModel
    mus : sequence of float
        Segment parameters used by the prediction.
    """
    if any(not np.isfinite(m) for m in mus):
        return replace(diag, v=inf, s=inf, log_v=inf, log_s=inf)
    A_check, W = _prediction_split(E, model, mus)
    P = E.shape
    n = model.n
    Pp = pseudo_inverse(P, tol.rank)
    Th = symmetrize(A_check @ P @ A_check.T)
    Thp = pseudo_inverse(Th, tol.rank)
    ThTh = Thp @ Th
    log_fv = 2.0 * log_pseudo_det(A_check @ P @ Pp, tol.rank)
    log_fv += log_pseudo_det(ThTh + (Thp + np.eye(n) - ThTh) @ W, tol.rank)
    trP = float(np.trace(P))
    fs = float(np.trace(A_check @ A_check.T)) + (float(np.trace(W)) / trP if trP > 0 else inf)
    log_v = diag.log_v + log_fv
    log_s = diag.log_s + float(np.log(fs))
    return replace(diag, v=float(np.exp(log_v)), s=float(np.exp(log_s)), log_v=log_v,
                   log_s=log_s)


def _transition(models, i, j):
    """``A_{i-1} ... A_j`` (identity when ``i == j``)."""
    n = models[0].A.shape[0]
    Phi = np.eye(n)
    for t in range(j, i):
        Phi = models[t].A @ Phi
    return Phi


def gramians(models, strips_dirs, h: int, tol: Tolerances = DEFAULT_TOL) -> Diagnostics:
    """Observability and controllability gramians ending at the last index.

    Parameters
    ----------
    models : sequence of ProcessModel
        ``models[i]`` maps time ``i`` to ``i + 1``.
    strips_dirs : sequence of ndarray
        ``strips_dirs[i]`` has the inequality measurement directions at time
        ``i`` as columns (possibly none).
    h : int
        Number of measurement instants for the observability window and
        number of steps for the controllability sum.

    Returns
    -------
    Diagnostics
        Only the gramian fields are filled; a field is ``None`` when the
        history is too short.

    Raises
    ------
    SingularTransition
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    k = len(strips_dirs) - 1
    for idx, mdl in enumerate(models[:k]):
        if numeric_rank(mdl.A, tol.rank) < mdl.A.shape[0]:
            raise SingularTransition(f"A at step {idx} is singular")

    obs, window, obs_eig = None, None, None
    seen, start = 0, None
    for i in range(k, -1, -1):
        F = np.asarray(strips_dirs[i])
        if F.size and F.reshape(F.shape[0], -1).shape[1] > 0:
            seen += 1
            if seen == h:
                start = i
                break
    if start is not None:
        window = k - start
        n = models[0].A.shape[0] if models else np.asarray(strips_dirs[k]).shape[0]
        obs = np.zeros((n, n))
        for i in range(start, k + 1):
            F = np.asarray(strips_dirs[i]).reshape(n, -1)
            if F.shape[1] == 0:
                continue
            Phi = _transition(models, i, start)
            G = F.T @ Phi
            obs += G.T @ G
        obs = symmetrize(obs)
        w = np.linalg.eigvalsh(obs)
        obs_eig = (float(w[0]), float(w[-1]))

    ctrl, ctrl_eig = None, None
    if k >= h:
        base = k - h
        n = models[0].A.shape[0]
        ctrl = np.zeros((n, n))
        for i in range(base, k):
            Phi = np.linalg.inv(_transition(models, i + 1, base))
            G = Phi @ models[i].R
            ctrl += G @ G.T
        ctrl = symmetrize(ctrl)
        w = np.linalg.eigvalsh(ctrl)
        ctrl_eig = (float(w[0]), float(w[-1]))
    return Diagnostics(obs_gramian=obs, ctrl_gramian=ctrl, window=window,
                       obs_eig=obs_eig, ctrl_eig=ctrl_eig)


def _strip_dirs(measurements, n):
    cols = [m.direction for m in measurements if m.kind is not MeasurementKind.HYPERPLANE]
    return np.column_stack(cols) if cols else np.zeros((n, 0))


def step(state: EstimatorState, model: ProcessModel, measurements, config: EstimatorConfig
         ) -> EstimatorState:
    """One predict / correct / renormalise cycle.

    Parameters
    ----------
    state : EstimatorState
    model : ProcessModel
        Dynamics from the previous time to the current one.
    measurements : sequence of Measurement
        Measurements at the current time, fused in order.
    config : EstimatorConfig

    Returns
    -------
    EstimatorState
        ``labels`` holds the case label of each measurement.
    """
    tol = config.tol
    E = state.ellipsoid
    n = E.dim
    sigma0 = config.sigma0 or state.history[0]

    scratch = state.scratch
    if config.pred.kind != "volume" or state.step % config.theta_refresh_period == 0:
        scratch = None
    E_pred, scratch, mus = predict(E, model, config.pred, scratch, tol)

    measurements = list(measurements)
    E_corr, labels, outcomes = correct_detailed(E_pred, measurements, config.corr,
                                                config.inconsistency, tol, config.sweeps)
    if scratch is not None:
        scratch = _update_scratch(scratch, outcomes)

    if config.normalize:
        new = replace(state, ellipsoid=E_corr, scratch=scratch)
        new = normalize(new, sigma0)
    else:
        new = replace(state, ellipsoid=E_corr, scratch=scratch, sigma=E_corr.scale)

    diag = state.diagnostics
    trail = state.trail
    if config.diagnostics:
        h = config.gramian_horizon or n
        diag = bound_factors(diag or Diagnostics(), E, model, mus, tol)
        keep = 8 * h + 16
        if not trail:
            trail = ((None, None, np.zeros((n, 0))),)
        trail = (trail + ((model.A, model.R, _strip_dirs(measurements, n)),))[-keep:]
        models = [ProcessModel(a, R=r) for a, r, _ in trail[1:]]
        dirs = [d for _, _, d in trail]
        try:
            g = gramians(models, dirs, h, tol)
            diag = replace(diag, obs_gramian=g.obs_gramian, ctrl_gramian=g.ctrl_gramian,
                           window=g.window, obs_eig=g.obs_eig, ctrl_eig=g.ctrl_eig)
        except SingularTransition:
            diag = replace(diag, obs_gramian=None, ctrl_gramian=None, window=None,
                           obs_eig=None, ctrl_eig=None)

    return replace(new, step=state.step + 1, history=state.history + (new.sigma,),
                   diagnostics=diag, trail=trail,
                   labels=tuple(labels), predicted=E_pred)
