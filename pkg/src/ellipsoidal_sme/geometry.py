"""Ellipsoids (possibly degenerate) and the simple sets they are fused with.

An ellipsoid is stored as ``E(c, s P) = {c + (s P)^{1/2} z : |z| <= 1}`` with
the scale ``s`` kept apart from the unit-scale shape ``P``. ``P`` may be
singular, in which case the set is flat and lives in ``c + range(P)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import gamma, pi

import numpy as np

from .numerics import DEFAULT_TOL, numeric_rank, symmetrize

__all__ = [
    "Ellipsoid",
    "Strip",
    "Halfspace",
    "Hyperplane",
    "Zonotope",
    "unit_ball_volume",
    "support",
    "contains",
    "sample",
    "shape_root",
    "pseudo_volume",
    "ssal",
    "semi_axes",
    "signed_distance",
    "affine_image",
]


@dataclass(frozen=True)
class Ellipsoid:
    """The set ``{x : (x - c)' P^+ (x - c) <= scale, x - c in range(P)}``.

    Attributes
    ----------
    center : ndarray, shape (n,)
    shape : ndarray, shape (n, n)
        Unit-scale SPSD shape matrix ``P``.
    scale : float
        Positive scale ``s`` multiplying ``P``.
    rank : int
        Rank of ``P``. Computed numerically when omitted.
    """

    center: np.ndarray
    shape: np.ndarray
    scale: float = 1.0
    rank: int = field(default=-1)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        P = symmetrize(np.array(self.shape, dtype=float).reshape(c.size, c.size))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", P)
        object.__setattr__(self, "scale", float(self.scale))
        if self.rank < 0:
            object.__setattr__(self, "rank", numeric_rank(P))

    @property
    def dim(self) -> int:
        return self.center.size

    @classmethod
    def ball(cls, center, radius=1.0):
        c = np.asarray(center, dtype=float)
        return cls(c, np.eye(c.size), radius ** 2, c.size)

    def with_(self, **kw) -> "Ellipsoid":
        return replace(self, **kw)


@dataclass(frozen=True)
class Strip:
    """Normalised strip ``|f' x - y| <= 1``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        f = np.array(self.normal, dtype=float).reshape(-1)
        if not np.any(f):
            raise ValueError("strip normal must be nonzero")
        object.__setattr__(self, "normal", f)

    @classmethod
    def from_bounds(cls, f, lower, upper):
        """Strip ``lower <= f' x <= upper`` rewritten in normalised form."""
        half = 0.5 * (upper - lower)
        return cls(np.asarray(f, dtype=float) / half, 0.5 * (upper + lower) / half)

    def contains(self, x, tol=0.0):
        return np.abs(np.asarray(x) @ self.normal - self.offset) <= 1.0 + tol


@dataclass(frozen=True)
class Halfspace:
    """``f' x <= bound``; a lower-sense input is stored as ``-f' x <= -bound``."""

    normal: np.ndarray
    bound: float
    sense: str = "upper"

    def __post_init__(self):
        f = np.array(self.normal, dtype=float).reshape(-1)
        if not np.any(f):
            raise ValueError("halfspace normal must be nonzero")
        if self.sense == "lower":
            f, b = -f, -float(self.bound)
            object.__setattr__(self, "sense", "upper")
            object.__setattr__(self, "bound", b)
        elif self.sense != "upper":
            raise ValueError(f"unknown sense {self.sense!r}")
        object.__setattr__(self, "normal", f)

    def contains(self, x, tol=0.0):
        return np.asarray(x) @ self.normal <= self.bound + tol


@dataclass(frozen=True)
class Hyperplane:
    """``f' x = y``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        f = np.array(self.normal, dtype=float).reshape(-1)
        if not np.any(f):
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "normal", f)

    def contains(self, x, tol=0.0):
        return np.abs(np.asarray(x) @ self.normal - self.offset) <= tol


@dataclass(frozen=True)
class Zonotope:
    """``{c + L w : |w|_inf <= 1}`` with nonzero generator columns."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        L = np.array(self.generators, dtype=float).reshape(c.size, -1)
        if L.shape[1] and np.any(np.linalg.norm(L, axis=0) == 0.0):
            raise ValueError("zonotope generators must be nonzero")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", L)


def unit_ball_volume(q: int) -> float:
    """Volume of the Euclidean unit ball in dimension ``q``."""
    return pi ** (q / 2.0) / gamma(q / 2.0 + 1.0)


def support(E: Ellipsoid, x) -> float:
    """Support function ``max_{p in E} x' p``."""
    x = np.asarray(x, dtype=float)
    return float(E.center @ x + np.sqrt(max(E.scale * float(x @ E.shape @ x), 0.0)))


def contains(E: Ellipsoid, x, tol: float = 1e-9):
    """Membership test that also works for flat (degenerate) ellipsoids.

    The range of the shape matrix is spanned by the eigenvectors of its
    ``E.rank`` largest eigenvalues. A point passes when its offset from the
    center lies in that range up to ``tol * (1 + |x - c|)`` and its quadratic
    form is at most ``scale * (1 + tol)``.

    Parameters
    ----------
    x : array_like, shape (n,) or (k, n)
        One point or a batch of points.

    Returns
    -------
    bool or ndarray of bool
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    D = np.atleast_2d(X) - E.center
    w, V = np.linalg.eigh(E.shape)
    # the tracked rank decides which directions are genuine; eigenvalues
    # beyond it are rounding residue even when above the relative cutoff
    keep = np.zeros(w.shape, dtype=bool)
    keep[w.size - E.rank:] = True
    keep &= w > 0.0
    Y = D @ V
    resid = np.linalg.norm(Y[:, ~keep], axis=1)
    norms = np.linalg.norm(D, axis=1)
    quad = np.sum(Y[:, keep] ** 2 / w[keep], axis=1)
    ok = (resid <= tol * (1.0 + norms)) & (quad <= E.scale * (1.0 + tol))
    return bool(ok[0]) if single else ok


def sample(E: Ellipsoid, count: int, seed=None, surface: bool = False):
    """Draw ``count`` points uniformly from ``E`` (or its relative boundary).

    Points are ``c + sqrt(scale) V_q diag(sqrt(w_q)) u`` with ``V_q, w_q`` the
    top ``E.rank`` eigenpairs of the shape and ``u`` uniform in the unit
    ball of dimension ``E.rank``: Gaussian direction, radius ``t^(1/q)``.
    For a flat ellipsoid this is uniform on the set itself rather than the
    projection of the full ``n``-ball, and ``surface=True`` yields its
    relative boundary.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = E.rank
    if q == 0:
        return np.tile(E.center, (count, 1))
    g = rng.standard_normal((count, q))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), np.finfo(float).tiny)
    if not surface:
        g *= rng.random((count, 1)) ** (1.0 / q)
    Vk, rk = _top_axes(E)
    return E.center + (g * rk) @ Vk.T


def _top_axes(E: Ellipsoid):
    """Eigenvectors of the ``E.rank`` largest eigenvalues and the axis lengths."""
    w, V = np.linalg.eigh(E.shape)
    keep = slice(E.dim - E.rank, E.dim)
    return V[:, keep], np.sqrt(E.scale * np.clip(w[keep], 0.0, None))


def shape_root(E: Ellipsoid):
    """Symmetric ``S`` with ``S S = scale * P`` restricted to the tracked rank.

    Eigenvalues beyond the ``E.rank`` largest are rounding residue; taking
    their square root would magnify them (``1e-18`` becomes ``1e-9``), so
    they are dropped.
    """
    Vk, rk = _top_axes(E)
    return symmetrize((Vk * rk) @ Vk.T)


def pseudo_volume(E: Ellipsoid) -> float:
    """Generalised volume ``vol(B^q) * pdet(scale * P)`` with ``q = E.rank``.

    The pseudo-determinant is taken over the ``q`` largest eigenvalues so that
    genuinely thin directions tracked by the rank are not dropped. Being
    proportional to the determinant (not its square root), this is the
    squared volume of the set up to the ball constant.
    """
    q = E.rank
    w = np.linalg.eigvalsh(E.scale * E.shape)[E.dim - q:]
    return unit_ball_volume(q) * float(np.prod(np.clip(w, 0.0, None)))


def ssal(E: Ellipsoid) -> float:
    """Sum of squared semi-axis lengths, ``scale * trace(P)``."""
    return float(E.scale * np.trace(E.shape))


def semi_axes(E: Ellipsoid):
    """Semi-axis lengths in decreasing order; zero beyond the tracked rank."""
    w = np.linalg.eigvalsh(E.scale * E.shape)[::-1]
    w[E.rank:] = 0.0
    return np.sqrt(np.clip(w, 0.0, None))


def signed_distance(E: Ellipsoid, H: Hyperplane) -> float:
    """Euclidean gap between ``E`` and ``H``; negative when they intersect."""
    d = H.normal
    spread = np.sqrt(max(E.scale * float(d @ E.shape @ d), 0.0))
    return float((abs(H.offset - E.center @ d) - spread) / np.linalg.norm(d))


def affine_image(E: Ellipsoid, A, b=None, rel_tol: float = DEFAULT_TOL.rank) -> Ellipsoid:
    """Image of ``E`` under ``x -> A x + b``."""
    A = np.asarray(A, dtype=float)
    c = A @ E.center + (0.0 if b is None else np.asarray(b, dtype=float))
    P = symmetrize(A @ E.shape @ A.T)
    if A.shape[0] == A.shape[1] and numeric_rank(A, rel_tol) == A.shape[0]:
        q = E.rank
    else:
        q = numeric_rank(P, rel_tol)
    return Ellipsoid(c, P, E.scale, q)
