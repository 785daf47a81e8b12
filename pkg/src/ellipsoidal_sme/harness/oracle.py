"""Monte Carlo containment oracle.

The samplers here draw from the exact sets the estimator claims to cover
and are built without the estimator's own update formulas: the reachable
set by pushing points of the previous ellipsoid through the dynamics, and
the intersection of an ellipsoid with measurement sets by parametrising
the unit ball restricted to the equality constraints and rejecting points
that break an inequality.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Ellipsoid, contains, sample, shape_root

__all__ = [
    "containment_fraction",
    "ellipsoid_sampler",
    "reachable_sampler",
    "intersection_sampler",
]


def containment_fraction(E: Ellipsoid, sampler, count: int, seed=None, tol: float = 1e-9) -> float:
    """Share of ``count`` sampled points that ``contains(E, ., tol)`` accepts.

    Parameters
    ----------
    sampler : callable
        ``sampler(count, rng)`` returning an array of shape ``(k, n)`` with
        ``k <= count`` points of the set claimed to be covered.

    Returns
    -------
    float
        1.0 when the sampler produced no point.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = np.asarray(sampler(count, rng), dtype=float)
    if X.size == 0:
        return 1.0
    X = X.reshape(-1, E.dim)
    return float(np.mean(contains(E, X, tol)))


def ellipsoid_sampler(E: Ellipsoid, surface: bool = False, stretch: float = 1.0):
    """Uniform points of ``E`` (or of its boundary), optionally scaled about the center."""
    def draw(count, rng):
        X = sample(E, count, rng, surface=surface)
        return E.center + stretch * (X - E.center)
    return draw


def reachable_sampler(E: Ellipsoid, model, vertex_share: float = 0.5):
    """Points ``A x + B tau + R w`` with ``x`` in ``E`` and ``w`` in the unit box.

    A share of the noise vectors are box vertices, where the outer bound is
    tightest, and the prior points include boundary points for the same
    reason.
    """
    def draw(count, rng):
        k_surf = count // 2
        X = np.vstack([sample(E, k_surf, rng, surface=True), sample(E, count - k_surf, rng)])
        Wn = rng.uniform(-1.0, 1.0, size=(count, model.m))
        vert = rng.random(count) < vertex_share
        Wn[vert] = np.sign(Wn[vert])
        return X @ model.A.T + model.drift() + Wn @ model.R.T
    return draw


def intersection_sampler(E: Ellipsoid, measurements, oversample: int = 20,
                         surface_share: float = 0.5):
    """Uniform points of ``E`` intersected with every measurement set.

    ``E = {c + S u : |u| <= 1}`` with ``S = sqrt(scale * P)``. Equality rows
    ``F' x = y`` restrict ``u`` to ``u0 + K t`` where ``u0`` is the
    least-norm solution and ``K`` spans the kernel of ``F' S``; since ``u0``
    is orthogonal to that kernel the admissible ``t`` form a ball of radius
    ``sqrt(1 - |u0|^2)``. Inequalities are then enforced by rejection, in
    batches of ``oversample * count`` draws until enough points are kept
    or the attempt budget runs out. A ``surface_share`` of the draws sit
    on the boundary of the ellipsoid, where an outer bound is tightest.
    """
    n = E.dim
    S = shape_root(E)
    eqs = [m for m in measurements if m.lower == m.upper]
    ineqs = [m for m in measurements if m.lower != m.upper]
    if eqs:
        F = np.column_stack([m.direction for m in eqs])
        y = np.array([m.lower for m in eqs])
        G = F.T @ S
        u0, *_ = np.linalg.lstsq(G, y - F.T @ E.center, rcond=None)
        U, sv, Vt = np.linalg.svd(G, full_matrices=True)
        r = int(np.count_nonzero(sv > 1e-12 * max(sv[0], 1e-300)))
        K = Vt[r:].T
        gap = np.linalg.norm(G @ u0 - (y - F.T @ E.center))
        radius2 = 1.0 - float(u0 @ u0)
        feasible = radius2 >= 0.0 and gap <= 1e-9 * (1.0 + np.linalg.norm(y))
    else:
        u0, K, radius2, feasible = np.zeros(n), np.eye(n), 1.0, True

    def draw(count, rng):
        if not feasible or count == 0:
            return np.zeros((0, n))
        d = K.shape[1]
        kept, total = [], 0
        for _ in range(50):
            batch = max(count, oversample * count)
            if d:
                g = rng.standard_normal((batch, d))
                g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
                rad = rng.random((batch, 1)) ** (1.0 / d)
                rad[rng.random(batch) < surface_share] = 1.0
                g *= np.sqrt(radius2) * rad
                Uu = u0 + g @ K.T
            else:
                Uu = np.tile(u0, (batch, 1))
            X = E.center + Uu @ S.T
            ok = np.ones(batch, dtype=bool)
            for m in ineqs:
                v = X @ m.direction
                ok &= (v >= m.lower) & (v <= m.upper)
            kept.append(X[ok])
            total += int(ok.sum())
            if total >= count:
                break
        return np.vstack(kept)[:count]
    return draw
