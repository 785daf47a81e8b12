"""Measurement update: intersect the ellipsoid with strips and hyperplanes.

Each scalar measurement ``lower <= f' x <= upper`` is first clipped to the
slab the ellipsoid already occupies along ``f``. What is left is either
empty, uninformative, a single tangent point, or a genuine cut; genuine
cuts are fused with a weight ``beta`` in ``[0, 1]`` chosen to minimise
one of three size measures. Equalities use ``beta = 1`` and drop the rank
of the shape matrix by one.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from math import inf

import numpy as np

from .errors import InconsistentMeasurement, InvalidBounds, NonPositiveScale, NoRootInUnit
from .geometry import Ellipsoid
from .numerics import DEFAULT_TOL, Tolerances, solve_cubic, symmetrize, truncate_rank

__all__ = [
    "Measurement",
    "MeasurementKind",
    "FusionGeometry",
    "CorrectionCriterion",
    "CaseKind",
    "CaseLabel",
    "FusionOutcome",
    "fusion_geometry",
    "classify_case",
    "beta_sigma",
    "beta_volume",
    "beta_ssal",
    "apply_fusion",
    "correct",
    "correct_detailed",
]

log = logging.getLogger(__name__)


class MeasurementKind(enum.Enum):
    STRIP = "strip"
    UPPER = "upper"
    LOWER = "lower"
    HYPERPLANE = "hyperplane"


@dataclass(frozen=True)
class Measurement:
    """Scalar bound ``lower <= direction' x <= upper``.

    Either bound may be infinite, not both; equal bounds give an equality.
    """

    direction: np.ndarray
    lower: float = -inf
    upper: float = inf

    def __post_init__(self):
        f = np.array(self.direction, dtype=float).reshape(-1)
        lo, up = float(self.lower), float(self.upper)
        if not np.any(f) or not np.all(np.isfinite(f)):
            raise InvalidBounds("measurement direction must be finite and nonzero")
        if np.isnan(lo) or np.isnan(up) or lo > up:
            raise InvalidBounds(f"bounds [{lo}, {up}] are not ordered")
        if np.isinf(lo) and np.isinf(up):
            raise InvalidBounds("at least one bound must be finite")
        object.__setattr__(self, "direction", f)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def kind(self) -> MeasurementKind:
        if self.lower == self.upper:
            return MeasurementKind.HYPERPLANE
        if np.isinf(self.lower):
            return MeasurementKind.UPPER
        if np.isinf(self.upper):
            return MeasurementKind.LOWER
        return MeasurementKind.STRIP

    def satisfied_by(self, x, tol: float = 0.0) -> bool:
        y = float(self.direction @ np.asarray(x, dtype=float))
        return self.lower - tol <= y <= self.upper + tol


@dataclass(frozen=True)
class FusionGeometry:
    """Per-measurement quantities shared by case analysis and fusion.

    ``rho_bar`` is the support value of the ellipsoid along ``f`` and
    ``-rho_low`` the support value along ``-f`` negated, so the ellipsoid
    spans ``[-rho_low, rho_bar]`` in ``f' x``. ``y_low``/``y_bar`` are the
    measurement bounds clipped to that interval, ``delta`` the offset of
    their midpoint from ``f' c`` and ``gamma`` their half width.
    """

    alpha: float
    delta: float
    gamma: float
    theta: float
    phi: np.ndarray
    eta: float
    rho_bar: float
    rho_low: float
    y_bar: float
    y_low: float


class CorrectionCriterion(enum.Enum):
    SIGMA = "sigma"
    VOLUME = "volume"
    SSAL = "ssal"


class CaseKind(enum.Enum):
    EMPTY = "empty"
    NOOP = "noop"
    POINT = "point"
    FUSE = "fuse"


@dataclass(frozen=True)
class CaseLabel:
    kind: CaseKind
    point: np.ndarray = None

    def __str__(self):
        return self.kind.value


@dataclass(frozen=True)
class FusionOutcome:
    """What a single measurement did to the ellipsoid.

    ``beta`` and ``phi`` describe the rank-one downdate ``P - alpha beta
    phi phi'``; ``shape_factor`` is set instead when the shape was only
    rescaled (exact cut of a one-dimensional ellipsoid).
    """

    label: CaseLabel
    index: int = -1
    alpha: float = 0.0
    beta: float = 0.0
    phi: np.ndarray = None
    theta: float = 0.0
    shape_factor: float = None


def fusion_geometry(E: Ellipsoid, m: Measurement, tol: Tolerances = DEFAULT_TOL) -> FusionGeometry:
    f = m.direction
    phi = E.shape @ f
    theta = float(f @ phi)
    P_norm = np.linalg.norm(E.shape, 2)
    alpha = 1.0 / theta if theta > tol.theta * float(f @ f) * P_norm else 0.0
    eta = float(np.sqrt(max(E.scale * theta, 0.0)))
    fc = float(f @ E.center)
    rho_bar = eta + fc
    rho_low = 2.0 * eta - rho_bar
    y_bar = min(m.upper, rho_bar)
    y_low = max(m.lower, -rho_low)
    delta = 0.5 * (y_bar + y_low - rho_bar + rho_low)
    gamma = 0.5 * (y_bar - y_low)
    return FusionGeometry(alpha, delta, gamma, theta, phi, eta, rho_bar, rho_low, y_bar, y_low)


def _case_eps(g: FusionGeometry, tol: Tolerances) -> float:
    return tol.case * max(1.0, g.eta)


def classify_case(g: FusionGeometry, m: Measurement, E: Ellipsoid = None,
                  tol: Tolerances = DEFAULT_TOL) -> CaseLabel:
    """Sort a measurement into empty / no-op / tangent point / fuse.

    ``E`` is only needed to report the tangent point of the ``POINT`` case.
    """
    eps = _case_eps(g, tol)
    lo_face, hi_face = -g.rho_low, g.rho_bar
    if m.upper < lo_face - eps or m.lower > hi_face + eps:
        return CaseLabel(CaseKind.EMPTY)
    if g.alpha == 0.0:
        return CaseLabel(CaseKind.NOOP)
    if m.lower <= lo_face + eps and m.upper >= hi_face - eps:
        return CaseLabel(CaseKind.NOOP)
    reach = np.sqrt(E.scale / g.theta) * g.phi if E is not None else None
    if m.upper <= lo_face + eps:
        return CaseLabel(CaseKind.POINT, None if E is None else E.center - reach)
    if m.lower >= hi_face - eps:
        return CaseLabel(CaseKind.POINT, None if E is None else E.center + reach)
    return CaseLabel(CaseKind.FUSE)


def beta_sigma(gamma: float, delta: float) -> float:
    """Weight minimising the scale factor: ``1 - gamma/|delta|`` or 0."""
    if abs(delta) > gamma:
        return 1.0 - gamma / abs(delta)
    return 0.0


def _scale_after(sigma, alpha, beta, gamma, delta):
    return sigma + alpha * beta * (gamma * gamma / (1.0 - beta) - delta * delta)


def _pick(cands, objective, tol):
    hi = 1.0 - tol.beta
    kept = []
    for b in cands:
        if -1e-12 <= b <= 1.0 + 1e-9:
            kept.append(min(max(b, 0.0), hi))
    if not kept:
        return None
    kept.append(0.0)
    vals = [objective(b) for b in kept]
    return kept[int(np.nanargmin(vals))]


def beta_volume(q: int, alpha: float, gamma: float, delta: float, sigma: float,
                tol: Tolerances = DEFAULT_TOL) -> float:
    """Weight minimising the pseudo-volume of the fused ellipsoid.

    The stationarity condition of ``q log sigma_D(beta) + log(1 - beta)``
    is a quadratic in ``beta``; both of its roots are tried and the one
    with the smaller objective wins. For ``q = 1`` the objective decreases
    all the way to ``beta -> 1`` and the clamped endpoint is returned.
    """
    a0 = q * alpha * (gamma * gamma - delta * delta) - sigma
    if a0 >= 0.0:
        return 0.0
    if q == 1:
        log.debug("beta_volume: one-dimensional shape, optimum at the clamp")
        return 1.0 - tol.beta
    a1 = (2 * q + 1) * alpha * delta * delta + sigma - gamma * gamma * alpha
    a2 = -(q + 1) * alpha * delta * delta

    def objective(b):
        sd = _scale_after(sigma, alpha, b, gamma, delta)
        return q * np.log(sd) + np.log1p(-b) if sd > 0 else np.inf

    if a2 == 0.0:
        cands = [-a0 / a1]
    else:
        disc = a1 * a1 - 4.0 * a0 * a2
        if disc < 0.0:
            raise NoRootInUnit("volume condition has complex roots")
        sq = np.sqrt(disc)
        # numerically stable pair of roots
        qq = -0.5 * (a1 + np.copysign(sq, a1))
        cands = [qq / a2, a0 / qq] if qq != 0.0 else [-a1 / (2.0 * a2)]
    beta = _pick(cands, objective, tol)
    if beta is None:
        raise NoRootInUnit("no volume-optimal weight in [0, 1)")
    return beta


def beta_ssal(trP: float, nu: float, alpha: float, gamma: float, delta: float, sigma: float,
              tol: Tolerances = DEFAULT_TOL) -> float:
    """Weight minimising ``sigma_D(beta) * trace(P - alpha beta phi phi')``.

    Parameters
    ----------
    trP : float
        Trace of the shape matrix.
    nu : float
        ``phi' phi`` with ``phi = P f``.

    Notes
    -----
    The stationarity condition multiplied by ``(1 - beta)^2 / alpha`` is
    the cubic ``b3 beta^3 + b2 beta^2 + b1 beta + b0`` with ``b0 < 0``
    exactly when moving away from ``beta = 0`` helps.
    """
    d2, g2 = delta * delta, gamma * gamma
    b0 = -nu * sigma - trP * (d2 - g2)
    if b0 >= 0.0:
        return 0.0
    b1 = 2.0 * (trP * d2 + nu * sigma + alpha * nu * (d2 - g2))
    b2 = -nu * sigma - trP * d2 + alpha * nu * (g2 - 4.0 * d2)
    b3 = 2.0 * alpha * nu * d2

    def objective(b):
        sd = _scale_after(sigma, alpha, b, gamma, delta)
        return sd * (trP - alpha * b * nu) if sd > 0 else np.inf

    big = max(abs(b0), abs(b1), abs(b2), abs(b3))
    if abs(b3) > tol.poly * big:
        cands = list(solve_cubic(b3, b2, b1, b0, tol).roots)
    elif b2 != 0.0:
        disc = b1 * b1 - 4.0 * b2 * b0
        if disc < 0.0:
            raise NoRootInUnit("trace condition has complex roots")
        sq = np.sqrt(disc)
        qq = -0.5 * (b1 + np.copysign(sq, b1))
        cands = [qq / b2, b0 / qq] if qq != 0.0 else [-b1 / (2.0 * b2)]
    else:
        cands = [-b0 / b1]
    beta = _pick(cands, objective, tol)
    if beta is None:
        raise NoRootInUnit("no trace-optimal weight in [0, 1)")
    return beta


def apply_fusion(E: Ellipsoid, g: FusionGeometry, beta: float,
                 criterion: CorrectionCriterion = CorrectionCriterion.SIGMA,
                 tol: Tolerances = DEFAULT_TOL) -> Ellipsoid:
    """Fuse with weight ``beta``; ``beta = 1`` is the equality branch.

    Raises
    ------
    NonPositiveScale
        If the new scale is not positive, which only happens for data
        inconsistent with ``E``.
    """
    if beta == 0.0 or g.alpha == 0.0:
        return E
    ab = g.alpha * beta
    P = symmetrize(E.shape - ab * np.outer(g.phi, g.phi))
    c = E.center + ab * g.delta * g.phi
    if beta == 1.0 or criterion is CorrectionCriterion.SIGMA:
        s = E.scale - ab * beta * g.delta * g.delta
    else:
        s = _scale_after(E.scale, g.alpha, beta, g.gamma, g.delta)
    if not s > tol.scale * E.scale:
        raise NonPositiveScale(f"scale dropped to {s:.3e}")
    q = E.rank - 1 if beta == 1.0 else E.rank
    return Ellipsoid(c, P, s, q)


def _choose_beta(E, g, criterion, tol):
    if criterion is CorrectionCriterion.SIGMA:
        b = beta_sigma(g.gamma, g.delta)
    elif criterion is CorrectionCriterion.VOLUME:
        b = beta_volume(E.rank, g.alpha, g.gamma, g.delta, E.scale, tol)
    else:
        b = beta_ssal(float(np.trace(E.shape)), float(g.phi @ g.phi), g.alpha, g.gamma,
                      g.delta, E.scale, tol)
    return min(b, 1.0 - tol.beta)


def _sweep_beta(g, beta, sigma, tol, scale_cap=None):
    """Raise ``beta`` so a re-fused center lands well inside the strip.

    ``beta_sigma`` puts the center on the violated face, from where the next
    re-fusion of a neighbouring measurement tends to push it out again and
    the passes converge only linearly. The target is halfway between the
    face and the midpoint of the admissible interval. Beyond
    ``beta_sigma`` the scale grows with ``beta``; with ``scale_cap`` the
    weight is limited so the scale stays at or below the cap.
    """
    d = abs(g.delta)
    if d <= g.gamma:
        return beta
    b_face = 1.0 - g.gamma / d
    target = b_face + 0.5 * (1.0 - b_face)
    if scale_cap is not None:
        # scale(b) = cap  <=>  a d^2 b^2 + (a g^2 - a d^2 + room) b - room = 0
        room = (scale_cap - sigma) * (1.0 - 1e-6)
        if room <= 0.0:
            return beta
        a2 = g.alpha * d * d
        a1 = g.alpha * g.gamma ** 2 - a2 + room
        sq = np.sqrt(a1 * a1 + 4.0 * a2 * room)
        root = 2.0 * room / (a1 + sq) if a1 >= 0.0 else (sq - a1) / (2.0 * a2)
        target = min(target, max(root, b_face))
    return min(max(beta, target), 1.0 - tol.beta)


def _fuse_one(E, m, criterion, policy, tol, sweep=False, scale_cap=None):
    g = fusion_geometry(E, m, tol)
    label = classify_case(g, m, E, tol)
    if label.kind is CaseKind.EMPTY:
        if policy == "abort":
            raise InconsistentMeasurement(
                f"measurement [{m.lower}, {m.upper}] misses the ellipsoid span "
                f"[{-g.rho_low}, {g.rho_bar}]")
        return E, FusionOutcome(label)
    if label.kind is CaseKind.NOOP:
        return E, FusionOutcome(label)
    if label.kind is CaseKind.POINT:
        # the intersection is a single point; recentering keeps E sound
        return E.with_(center=label.point), FusionOutcome(label)

    if m.kind is MeasurementKind.HYPERPLANE:
        E1 = apply_fusion(E, g, 1.0, criterion, tol)
        return E1, FusionOutcome(label, -1, g.alpha, 1.0, g.phi, g.theta)
    if E.rank == 1 and criterion is not CorrectionCriterion.SIGMA:
        # both size measures are minimised by the exact cut of a segment
        k = g.alpha * g.gamma * g.gamma / E.scale
        E1 = Ellipsoid(E.center + g.alpha * g.delta * g.phi, k * E.shape, E.scale, 1)
        return E1, FusionOutcome(label, -1, g.alpha, 0.0, g.phi, g.theta, shape_factor=k)
    beta = _choose_beta(E, g, criterion, tol)
    if sweep:
        bumped = _sweep_beta(g, beta, E.scale, tol, scale_cap)
        if bumped != beta:
            # the short scale formula is exact only at beta_sigma
            E1 = apply_fusion(E, g, bumped, CorrectionCriterion.VOLUME, tol)
            if scale_cap is None or E1.scale <= scale_cap:
                return E1, FusionOutcome(label, -1, g.alpha, bumped, g.phi, g.theta)
    if beta == 0.0:
        return E, FusionOutcome(label)
    E1 = apply_fusion(E, g, beta, criterion, tol)
    return E1, FusionOutcome(label, -1, g.alpha, beta, g.phi, g.theta)


def _merge(first: CaseLabel, later: CaseLabel) -> CaseLabel:
    return later if later.kind is CaseKind.FUSE else first


def correct_detailed(E: Ellipsoid, measurements, criterion=CorrectionCriterion.SIGMA,
                     policy: str = "skip", tol: Tolerances = DEFAULT_TOL, sweeps: int = 0):
    """Sequential fusion returning everything that happened.

    Parameters
    ----------
    sweeps : int
        After the first pass, up to this many extra passes re-fuse every
        measurement the center still violates. A single pass only guarantees
        that the center satisfies the measurement fused last; each re-fusion
        is itself a valid outer bound, so repeating them keeps the set sound.
        Re-fusions aim past the violated face (see ``_sweep_beta``) so that
        two competing faces do not trap the center in a slow zig-zag.

    Returns
    -------
    Ellipsoid
    list of CaseLabel
        One per measurement.
    list of FusionOutcome
        Every fusion in the order it was applied; ``index`` refers to the
        measurement.
    """
    criterion = CorrectionCriterion(criterion)
    if policy not in ("skip", "abort"):
        raise ValueError(f"unknown inconsistency policy {policy!r}")
    measurements = list(measurements)
    labels, outcomes = [], []
    E_in = E
    for i, m in enumerate(measurements):
        E, out = _fuse_one(E, m, criterion, policy, tol)
        labels.append(out.label)
        outcomes.append(replace(out, index=i))
    accept = 0.1 * tol.case
    # the worst-case criterion promises a scale no larger than the input's
    cap = E_in.scale if criterion is CorrectionCriterion.SIGMA else None
    for _ in range(sweeps):
        todo = [i for i, m in enumerate(measurements)
                if labels[i].kind is not CaseKind.EMPTY and not m.satisfied_by(E.center, accept)]
        if not todo:
            break
        for i in todo:
            E, out = _fuse_one(E, measurements[i], criterion, "skip", tol, sweep=True,
                               scale_cap=cap)
            labels[i] = _merge(labels[i], out.label)
            outcomes.append(replace(out, index=i))
    if E.rank < E.dim and any(o.beta == 1.0 for o in outcomes):
        # zero the eigenvalues the equality fusions removed, rounding included
        P, _, _ = truncate_rank(E.shape, E.rank)
        E = E.with_(shape=P)
    return E, labels, outcomes


def correct(E: Ellipsoid, measurements, criterion=CorrectionCriterion.SIGMA,
            policy: str = "skip", tol: Tolerances = DEFAULT_TOL, sweeps: int = 0):
    """Fuse measurements one after another in input order.

    Parameters
    ----------
    E : Ellipsoid
        Predicted ellipsoid.
    measurements : sequence of Measurement
    criterion : CorrectionCriterion or str
        ``"sigma"``, ``"volume"`` or ``"ssal"``.
    policy : {"skip", "abort"}
        What to do with a measurement that misses the ellipsoid.
    sweeps : int
        Extra passes over violated measurements, see :func:`correct_detailed`.

    Returns
    -------
    Ellipsoid
    list of CaseLabel
    """
    E, labels, _ = correct_detailed(E, measurements, criterion, policy, tol, sweeps)
    return E, labels
