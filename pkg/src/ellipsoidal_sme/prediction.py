"""Time update: map the ellipsoid through the dynamics and absorb the noise.

The successor set ``A E + B tau + R B_inf`` is outer-bounded by adding the
noise zonotope one generator (segment) at a time. Each segment sum has a
free parameter ``mu > 0``; it is chosen to minimise either the
pseudo-volume or the (optionally weighted) sum of squared semi-axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirection, ValidationError, ZeroTrace
from .geometry import Ellipsoid
from .numerics import (DEFAULT_TOL, Tolerances, null_complement, numeric_rank, pdet_rank_one,
                       pinv_rank_one, pseudo_det, symmetrize, truncate_rank)

__all__ = [
    "ProcessModel",
    "PredictionCriterion",
    "PredictionScratch",
    "minkowski_segment",
    "mu_volume",
    "mu_trace",
    "predict_volume_min",
    "predict_trace_min",
    "trace_mus",
    "predict",
]


@dataclass(frozen=True)
class ProcessModel:
    """One step of ``x+ = A x + B tau + R w`` with ``|w|_inf <= 1``.

    ``R`` may have zero columns (no process noise).
    """

    A: np.ndarray
    B: np.ndarray = None
    tau: np.ndarray = None
    R: np.ndarray = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        n = A.shape[0]
        B = np.zeros((n, 0)) if self.B is None else np.array(self.B, dtype=float).reshape(n, -1)
        tau = np.zeros(B.shape[1]) if self.tau is None else np.array(self.tau, dtype=float).reshape(-1)
        R = np.zeros((n, 0)) if self.R is None else np.array(self.R, dtype=float).reshape(n, -1)
        for name, val in (("A", A), ("B", B), ("tau", tau), ("R", R)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[1]

    def drift(self):
        """Known input contribution ``B tau``."""
        if self.B.shape[1] == 0:
            return np.zeros(self.n)
        return self.B @ self.tau

    def validate(self, rank_tol: float = DEFAULT_TOL.rank):
        """Check shapes, finiteness and that no generator is negligible.

        Raises
        ------
        ValidationError
        """
        A, B, R = self.A, self.B, self.R
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"A must be square, got shape {A.shape}")
        if B.shape[1] != self.tau.size:
            raise ValidationError(f"B has {B.shape[1]} columns but tau has {self.tau.size} entries")
        for name, val in (("A", A), ("B", B), ("tau", self.tau), ("R", R)):
            if not np.all(np.isfinite(val)):
                raise ValidationError(f"{name} has non-finite entries")
        if R.shape[1]:
            norms = np.linalg.norm(R, axis=0)
            floor = rank_tol * np.linalg.norm(R, 2)
            bad = np.flatnonzero(norms <= floor)
            if bad.size:
                raise ValidationError(f"R column(s) {bad.tolist()} are zero; every noise generator must be nonzero")
        return self


@dataclass(frozen=True)
class PredictionCriterion:
    """``kind`` is ``"volume"`` or ``"trace"``; ``weight`` applies to trace only."""

    kind: str = "volume"
    weight: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("volume", "trace"):
            raise ValueError(f"unknown prediction criterion {self.kind!r}")


@dataclass(frozen=True)
class PredictionScratch:
    """Cached pseudo-inverse, pseudo-determinant and rank of a shape matrix.

    ``mus`` records the segment parameters used in the step that produced
    this scratch (``inf`` marks a segment added to a single point).
    """

    theta: np.ndarray
    pdet: float
    rank: int
    mus: tuple = field(default=())


def minkowski_segment(E: Ellipsoid, r, mu: float) -> Ellipsoid:
    """Outer ellipsoid of ``E`` plus the segment ``[-r, r]`` for parameter ``mu``."""
    r = np.asarray(r, dtype=float)
    P = symmetrize((1.0 + mu) * (E.shape + np.outer(r, r) / (mu * E.scale)))
    return Ellipsoid(E.center, P, E.scale)


def mu_volume(q: int, h: float, v_is_zero: bool) -> float:
    """Segment parameter minimising the pseudo-determinant.

    Parameters
    ----------
    q : int
        Rank of the shape before the update (at least 1).
    h : float
        ``r' Q^+ r / scale``; only used when ``r`` lies in the range of ``Q``.
    v_is_zero : bool
        Whether ``r`` lies in the range of ``Q``.
    """
    if q < 1:
        raise ValueError("mu_volume needs a shape of rank >= 1")
    if not v_is_zero:
        return 1.0 / q
    if not h > 0.0:
        raise DegenerateDirection(f"h = {h!r} must be positive")
    # rationalised root of q mu^2 + (q - 1) h mu - h = 0; no cancellation for large h
    return 2.0 * h / (np.sqrt((q - 1) ** 2 * h * h + 4.0 * q * h) + (q - 1) * h)


def mu_trace(trQ: float, rCr: float, sigma: float) -> float:
    """Segment parameter minimising the (weighted) trace."""
    if not trQ > 0.0:
        raise ZeroTrace("trace of the shape matrix is zero")
    return float(np.sqrt(rCr / (sigma * trQ)))


def _map_scratch(scratch, A, q_in, n):
    """Carry a cached pseudo-inverse through ``Q = A P A'`` when that is exact."""
    if scratch is None or q_in != n:
        return None
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return None
    theta = symmetrize(Ainv.T @ scratch.theta @ Ainv)
    pdet = scratch.pdet * np.linalg.det(A) ** 2
    return theta, pdet


def _mapped_shape(E, A, tol):
    """``A P A'`` with its tracked rank and an orthonormal kernel basis.

    When the rank is below ``n`` the smallest eigenvalues are zeroed so the
    kernel is exact; rounding left there by earlier updates would otherwise
    be mistaken for thin but genuine directions.
    """
    n = E.dim
    Q = symmetrize(A @ E.shape @ A.T)
    full_A = numeric_rank(A, tol.rank) == n
    q = E.rank if full_A else numeric_rank(Q, tol.rank)
    if q == n:
        return Q, None, np.zeros((n, 0)), q, full_A
    Q, theta, N = truncate_rank(Q, q)
    return Q, theta, N, q, full_A


def _project_out(M, N):
    if N.shape[1] == 0:
        return M
    Pi = np.eye(M.shape[0]) - N @ N.T
    return symmetrize(Pi @ M @ Pi)


def predict_volume_min(E: Ellipsoid, model: ProcessModel, scratch: PredictionScratch = None,
                       tol: Tolerances = DEFAULT_TOL):
    """Pseudo-volume minimising prediction.

    Parameters
    ----------
    E : Ellipsoid
        Current estimate.
    model : ProcessModel
    scratch : PredictionScratch, optional
        Pseudo-inverse data for ``E.shape``. It is reused only when ``A``
        is invertible and ``E`` is full rank; otherwise it is rebuilt.

    Returns
    -------
    Ellipsoid
        Predicted ellipsoid, same scale as ``E``.
    PredictionScratch
        Pseudo-inverse, pseudo-determinant and rank of the predicted shape.

    Notes
    -----
    Whether a generator enlarges the range of the shape is decided from an
    explicit orthonormal kernel basis rather than from ``r - Q Q^+ r``,
    which loses accuracy when the shape is ill conditioned.
    """
    n = model.n
    s = E.scale
    Q, theta, N, q, full_A = _mapped_shape(E, model.A, tol)
    mapped = _map_scratch(scratch, model.A, E.rank, n) if (full_A and q == n) else None
    if mapped is not None:
        theta, pdet = mapped
    else:
        if theta is None:
            _, theta, _ = truncate_rank(Q, q)
        pdet = pseudo_det(Q, tol.rank)

    mus = []
    for r in model.R.T:
        if q == 0:
            # a point plus a segment is exactly the segment (mu -> infinity)
            rr = float(r @ r)
            Q = np.outer(r, r) / s
            theta = s * np.outer(r, r) / rr ** 2
            pdet, q = rr / s, 1
            N = null_complement(N, r, tol.rank)
            mus.append(np.inf)
            continue
        in_range = np.linalg.norm(N.T @ r) <= tol.rank * np.linalg.norm(r)
        h = float(r @ theta @ r) / s
        if in_range and not (np.isfinite(h) and h > 0.0):
            # a carried pseudo-inverse lost accuracy; rebuild it from Q
            _, theta, _ = truncate_rank(Q, q)
            pdet = pseudo_det(Q, tol.rank)
            h = float(r @ theta @ r) / s
        mu = mu_volume(q, h, in_range)
        a, b = 1.0 / (mu * s), 1.0 + mu
        pdet, q, _ = pdet_rank_one(Q, pdet, q, r, a, b, theta, tol.rank, in_range=in_range)
        theta = pinv_rank_one(Q, theta, r, a, b, tol.rank, in_range=in_range)
        Q = symmetrize(b * (Q + a * np.outer(r, r)))
        if not in_range:
            N = null_complement(N, r, tol.rank)
        mus.append(mu)

    Q, theta = _project_out(Q, N), _project_out(theta, N)
    center = model.A @ E.center + model.drift()
    return Ellipsoid(center, Q, s, q), PredictionScratch(theta, pdet, q, tuple(mus))


def _weighted_norms(R, weight):
    CR = R if weight is None else np.asarray(weight, dtype=float) @ R
    return np.linalg.norm(CR, axis=0)


def _weighted_trace(Q, weight):
    if weight is None:
        return float(np.trace(Q))
    C = np.asarray(weight, dtype=float)
    return float(np.trace(C @ Q @ C.T))


def trace_mus(Q0, R, sigma: float, weight=None):
    """Sequential trace-optimal parameters for the generators of ``R``.

    The square root of ``sigma`` times the weighted trace grows by
    ``|C r_i|`` with each generator, which gives every parameter in closed
    form without forming the intermediate shapes.
    """
    norms = _weighted_norms(R, weight)
    root = np.sqrt(sigma * _weighted_trace(Q0, weight))
    mus = []
    for w in norms:
        if not root > 0.0:
            raise ZeroTrace("trace of the shape matrix is zero")
        mus.append(float(w / root))
        root += w
    return tuple(mus)


def predict_trace_min(E: Ellipsoid, model: ProcessModel, weight=None,
                      tol: Tolerances = DEFAULT_TOL) -> Ellipsoid:
    """Prediction minimising the (weighted) sum of squared semi-axes.

    All generators are absorbed at once through the closed form
    ``(1 + w/t) (Q0 + (t/s) M)`` where ``t = sqrt(s tr(C Q0 C'))``,
    ``w = sum |C r_i|`` and ``M = sum r_i r_i' / |C r_i|``.
    """
    s = E.scale
    Q0, _, N, q, _ = _mapped_shape(E, model.A, tol)
    center = model.A @ E.center + model.drift()
    if model.m == 0:
        return Ellipsoid(center, Q0, s, q)
    norms = _weighted_norms(model.R, weight)
    if np.any(norms <= 0.0):
        raise ValidationError("weighted noise generator vanishes")
    trQ = _weighted_trace(Q0, weight)
    if not trQ > 0.0:
        raise ZeroTrace("trace of the shape matrix is zero")
    theta = np.sqrt(s * trQ)
    varpi = float(norms.sum())
    M = (model.R / norms) @ model.R.T
    P = symmetrize((1.0 + varpi / theta) * (Q0 + (theta / s) * M))
    N = null_complement(N, model.R, tol.rank)
    return Ellipsoid(center, _project_out(P, N), s, model.n - N.shape[1])


def predict(E: Ellipsoid, model: ProcessModel, criterion: PredictionCriterion,
            scratch: PredictionScratch = None, tol: Tolerances = DEFAULT_TOL):
    """Dispatch to the selected criterion.

    Returns
    -------
    Ellipsoid
    PredictionScratch or None
        Scratch for the volume criterion, ``None`` for trace.
    tuple of float
        Segment parameters used, in generator order.
    """
    if criterion.kind == "volume":
        E1, sc = predict_volume_min(E, model, scratch, tol)
        return E1, sc, sc.mus
    E1 = predict_trace_min(E, model, criterion.weight, tol)
    mus = ()
    if model.m:
        Q0 = model.A @ E.shape @ model.A.T
        mus = trace_mus(Q0, model.R, E.scale, criterion.weight)
    return E1, None, mus
