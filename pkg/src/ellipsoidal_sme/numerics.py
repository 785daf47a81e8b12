"""Rank-aware symmetric matrix primitives and a closed-form cubic solver.

Shape matrices in this package are symmetric positive semi-definite and
frequently singular, so every routine here works with pseudo-inverses and
pseudo-determinants and takes an explicit relative tolerance that decides
which singular values count as zero.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLeadingCoefficient, NotSpsd

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "CubicRealRoots",
    "symmetrize",
    "numeric_rank",
    "pseudo_inverse",
    "pseudo_det",
    "log_pseudo_det",
    "sqrt_spsd",
    "pdet_rank_one",
    "pinv_rank_one",
    "solve_cubic",
    "truncate_rank",
    "null_complement",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used throughout the estimator.

    Attributes
    ----------
    rank : float
        Relative singular-value cutoff for rank, pseudo-inverse and
        pseudo-determinant, and for the zero test on the out-of-range
        component of a rank-one update.
    sym : float
        Relative size of a negative eigenvalue tolerated in an SPSD matrix.
    theta : float
        Relative cutoff on ``f' P f`` below which a measurement direction is
        treated as lying in the kernel of the shape matrix.
    case : float
        Absolute tolerance (scaled by ``max(1, eta)``) used to classify
        measurement cases.
    beta : float
        Fusion weights for strips are clamped to ``1 - beta``.
    imag : float
        Relative imaginary part below which a cubic root is real.
    poly : float
        Relative size of a cubic leading coefficient treated as zero.
    scale : float
        Relative tolerance on a vanishing scale factor.
    """

    rank: float = 1e-13
    sym: float = 1e-10
    theta: float = 1e-10
    case: float = 1e-9
    beta: float = 1e-12
    imag: float = 1e-9
    poly: float = 1e-14
    scale: float = 1e-12


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class CubicRealRoots:
    """Real roots of a cubic together with its discriminant."""

    roots: tuple
    discriminant: float


def symmetrize(M):
    """Return ``(M + M.T) / 2`` as a float array."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def _singular_values(M):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def numeric_rank(M, rel_tol: float = DEFAULT_TOL.rank) -> int:
    """Number of singular values above ``rel_tol`` times the largest one."""
    s = _singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def _eig_kept(M, rel_tol):
    w, V = np.linalg.eigh(symmetrize(M))
    top = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > rel_tol * top if top > 0 else np.zeros(w.shape, dtype=bool)
    return w, V, keep


def pseudo_inverse(M, rel_tol: float = DEFAULT_TOL.rank):
    """Moore-Penrose inverse of a symmetric matrix via its eigenbasis.

    Eigenvalues whose magnitude does not exceed ``rel_tol`` times the largest
    magnitude are treated as zero.
    """
    w, V, keep = _eig_kept(M, rel_tol)
    Vk = V[:, keep]
    return symmetrize((Vk / w[keep]) @ Vk.T)


def log_pseudo_det(M, rel_tol: float = DEFAULT_TOL.rank) -> float:
    """Natural log of :func:`pseudo_det`, 0 for the zero matrix."""
    s = _singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    return float(np.sum(np.log(s[s > rel_tol * s[0]])))


def pseudo_det(M, rel_tol: float = DEFAULT_TOL.rank) -> float:
    """Product of the singular values above the relative cutoff.

    The zero matrix has pseudo-determinant 1 (empty product).
    """
    s = _singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 1.0
    return float(np.prod(s[s > rel_tol * s[0]]))


def sqrt_spsd(M, sym_tol: float = DEFAULT_TOL.sym):
    """Symmetric square root of an SPSD matrix.

    Raises
    ------
    NotSpsd
        If an eigenvalue is below ``-sym_tol`` times the spectral radius.
    """
    w, V = np.linalg.eigh(symmetrize(M))
    top = np.max(np.abs(w)) if w.size else 0.0
    if w.size and w[0] < -sym_tol * max(top, np.finfo(float).tiny):
        raise NotSpsd(f"smallest eigenvalue {w[0]:.3e} is negative")
    w = np.clip(w, 0.0, None)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def truncate_rank(M, q: int):
    """Zero all but the ``q`` largest eigenvalues of a symmetric matrix.

    Returns
    -------
    M_q : ndarray
        Cleaned matrix of rank at most ``q``.
    pinv : ndarray
        Pseudo-inverse of ``M_q`` built from the same eigenpairs.
    null : ndarray, shape (n, n - q)
        Orthonormal basis of the discarded eigenvectors.
    """
    w, V = np.linalg.eigh(symmetrize(M))
    n = w.size
    q = max(0, min(q, n))
    Vk, wk = V[:, n - q:], np.clip(w[n - q:], 0.0, None)
    good = wk > 0.0
    M_q = symmetrize((Vk * wk) @ Vk.T)
    pinv = symmetrize((Vk[:, good] / wk[good]) @ Vk[:, good].T)
    return M_q, pinv, V[:, :n - q]


def null_complement(N, R, rel_tol: float = DEFAULT_TOL.rank):
    """Part of the subspace ``span(N)`` orthogonal to the columns of ``R``.

    ``N`` has orthonormal columns. Columns of ``R`` whose component in
    ``span(N)`` is below ``rel_tol`` times their norm do not shrink it.
    """
    N = np.asarray(N, dtype=float)
    R = np.asarray(R, dtype=float).reshape(N.shape[0], -1)
    if N.shape[1] == 0 or R.shape[1] == 0:
        return N
    C = N.T @ R
    scale = np.linalg.norm(R, axis=0)
    C = C[:, np.linalg.norm(C, axis=0) > rel_tol * scale]
    if C.shape[1] == 0:
        return N
    U, sv, _ = np.linalg.svd(C, full_matrices=True)
    k = int(np.count_nonzero(sv > rel_tol * sv[0]))
    return N @ U[:, k:]


def _range_split(Q, Qpinv, r):
    u = Qpinv @ r
    v = r - Q @ u
    return u, v


def pdet_rank_one(Q, pdetQ: float, q: int, r, a: float, b: float, Qpinv,
                  rank_tol: float = DEFAULT_TOL.rank, in_range=None):
    """Pseudo-determinant and rank of ``b (Q + a r r')`` from those of ``Q``.

    Parameters
    ----------
    Q : ndarray, shape (n, n)
        SPSD matrix of rank ``q`` and pseudo-determinant ``pdetQ``.
    r : ndarray, shape (n,)
        Nonzero update vector.
    a, b : float
        Positive update weight and overall scale.
    Qpinv : ndarray, shape (n, n)
        Pseudo-inverse of ``Q``.
    in_range : bool, optional
        Overrides the zero test on ``v``; callers that already know whether
        ``r`` lies in the range of ``Q`` pass it to keep decisions consistent.

    Returns
    -------
    pdet : float
    rank : int
    v_is_zero : bool
        True when ``r`` lies in the range of ``Q`` (rank unchanged).
    """
    r = np.asarray(r, dtype=float)
    u, v = _range_split(Q, Qpinv, r)
    if in_range is None:
        in_range = np.linalg.norm(v) <= rank_tol * np.linalg.norm(r)
    if in_range:
        return b ** q * pdetQ * (1.0 + a * float(r @ u)), q, True
    return b ** (q + 1) * pdetQ * a * float(v @ v), q + 1, False


def pinv_rank_one(Q, Qpinv, r, a: float, b: float,
                  rank_tol: float = DEFAULT_TOL.rank, in_range=None):
    """Pseudo-inverse of ``b (Q + a r r')`` from the pseudo-inverse of ``Q``.

    When ``r`` leaves the range of ``Q`` the correction is built from the
    out-of-range component ``v = (I - Q Q^+) r`` and normalised by
    ``|v|^2``; otherwise a Sherman-Morrison style downdate is applied.
    """
    r = np.asarray(r, dtype=float)
    u, v = _range_split(Q, Qpinv, r)
    c = (1.0 + a * float(r @ u)) / a
    vv = float(v @ v)
    if in_range is None:
        in_range = np.sqrt(vv) <= rank_tol * np.linalg.norm(r)
    if not in_range:
        delta = (c / vv) * np.outer(v, v) - np.outer(u, v) - np.outer(v, u)
        delta /= vv
    else:
        delta = -np.outer(u, u) / c
    return symmetrize((Qpinv + delta) / b)


_OMEGA = complex(-0.5, np.sqrt(3.0) / 2.0)


def _cbrt_complex(z: complex) -> complex:
    if z == 0:
        return 0j
    if z.imag == 0.0:
        return complex(np.cbrt(z.real))
    return cmath.exp(cmath.log(z) / 3.0)


def _cubic_value(coeffs, x):
    b3, b2, b1, b0 = coeffs
    return ((b3 * x + b2) * x + b1) * x + b0


def _polish(coeffs, x, steps=4):
    b3, b2, b1, _ = coeffs
    p = _cubic_value(coeffs, x)
    for _ in range(steps):
        dp = (3.0 * b3 * x + 2.0 * b2) * x + b1
        if dp == 0.0 or p == 0.0:
            break
        x_new = x - p / dp
        p_new = _cubic_value(coeffs, x_new)
        if abs(p_new) >= abs(p):
            break
        x, p = x_new, p_new
    return x


def _other_two(coeffs, x1, three_real):
    """Remaining roots once ``x1`` is known, without forward deflation.

    With ``S`` the sum and ``Q`` the product of the remaining roots,
    ``Q = -b0/(b3 x1)`` and ``S`` is either ``-b2/b3 - x1`` or
    ``(b1/b3 - Q)/x1``; the form that does not cancel is used.
    """
    b3, b2, b1, b0 = coeffs
    if x1 == 0.0:
        S, Q = -b2 / b3, b1 / b3
    else:
        Q = -b0 / (b3 * x1)
        S_sum = -b2 / b3 - x1
        S = S_sum if abs(x1) <= abs(S_sum) else (b1 / b3 - Q) / x1
    disc = S * S - 4.0 * Q
    if disc < 0.0:
        if not three_real:
            return []
        disc = 0.0
    r = -0.5 * (-S + np.copysign(np.sqrt(disc), -S))
    if r == 0.0:
        return [0.0, 0.0]
    return [r, Q / r]


def solve_cubic(b3: float, b2: float, b1: float, b0: float,
                tol: Tolerances = DEFAULT_TOL) -> CubicRealRoots:
    """Real roots of ``b3 x^3 + b2 x^2 + b1 x + b0`` by Cardano's formulas.

    The cubic is made monic and depressed, the two Cardano cube roots are
    taken in complex arithmetic with their product pinned to ``-s/3``, and
    the three candidates are formed with the cube roots of unity. The sign
    of the discriminant decides how many roots are real. The real candidate
    of largest modulus is kept and polished by Newton steps on the original
    polynomial; the remaining pair comes from its product and sum, which
    stays accurate when one root dwarfs the others (tiny ``b3``).

    Returns
    -------
    CubicRealRoots
        Sorted real roots (three when the discriminant is nonnegative, one
        otherwise) and the discriminant of the monic cubic.
    """
    coeffs = (float(b3), float(b2), float(b1), float(b0))
    biggest = max(abs(c) for c in coeffs)
    if biggest == 0.0 or abs(b3) <= tol.poly * biggest:
        raise DegenerateLeadingCoefficient("cubic coefficient is negligible")
    b, c, d = b2 / b3, b1 / b3, b0 / b3
    s = c - b * b / 3.0
    t = d - b * c / 3.0 + 2.0 * b ** 3 / 27.0
    u = (s / 3.0) ** 3 + (t / 2.0) ** 2
    disc = 18.0 * b * c * d - 4.0 * b ** 3 * d + b * b * c * c - 4.0 * c ** 3 - 27.0 * d * d

    sq = cmath.sqrt(u)
    # pick the branch with the larger modulus to avoid cancellation
    z = -t / 2.0 + sq if abs(-t / 2.0 + sq) >= abs(-t / 2.0 - sq) else -t / 2.0 - sq
    v = _cbrt_complex(z)
    w = -s / (3.0 * v) if v != 0 else 0j
    shift = -b / 3.0
    cands = [v + w + shift,
             _OMEGA * v + _OMEGA.conjugate() * w + shift,
             _OMEGA.conjugate() * v + _OMEGA * w + shift]

    three_real = disc >= 0.0
    if three_real:
        x1 = max((x.real for x in cands), key=abs)
    else:
        x1 = min(cands, key=lambda x: abs(x.imag)).real
    x1 = _polish(coeffs, x1)
    rest = _other_two(coeffs, x1, three_real) if three_real else []
    roots = tuple(sorted([x1] + [_polish(coeffs, x) for x in rest]))
    return CubicRealRoots(roots=roots, discriminant=float(disc))
