"""Eigenvalues of small dense real matrices.

Matrices up to 16x16 are handled.  Orders 1 and 2 use the trace/determinant
formula; larger matrices are reduced to upper Hessenberg form with
Householder reflections and then driven to real Schur form by Francis
double-shift QR sweeps.  Only real arithmetic is used until the final
extraction of 2x2 blocks.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EigensolverError, ShapeError

MAX_ORDER = 16
DEFLATION_TOL = 1e-12


def _as_small_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n < 1 or n > MAX_ORDER:
        raise ShapeError(f"matrix order must be in [1, {MAX_ORDER}], got {n}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix has non-finite entries")
    return a


def _eig2(a: float, b: float, c: float, d: float) -> tuple[complex, complex]:
    # eigenvalues of [[a, b], [c, d]]
    half_tr = 0.5 * (a + d)
    det = a * d - b * c
    # discriminant written to avoid cancellation in half_tr**2 - det
    half_diff = 0.5 * (a - d)
    disc = half_diff * half_diff + b * c
    if disc >= 0.0:
        root = math.sqrt(disc)
        big = half_tr + math.copysign(root, half_tr) if half_tr != 0.0 else root
        if big == 0.0:
            return complex(0.0), complex(0.0)
        return complex(big), complex(det / big)
    im = math.sqrt(-disc)
    return complex(half_tr, im), complex(half_tr, -im)


def _house(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Householder vector v and beta with (I - beta v v^T) x = -sign(x0)|x| e1."""
    norm = float(np.linalg.norm(x))
    v = x.astype(float).copy()
    if norm == 0.0:
        return v, 0.0
    v[0] += math.copysign(norm, x[0]) if x[0] != 0.0 else norm
    vv = float(v @ v)
    return v, 2.0 / vv


def hessenberg(m) -> np.ndarray:
    """Upper Hessenberg matrix similar to ``m``."""
    h = _as_small_matrix(m).copy()
    n = h.shape[0]
    for k in range(n - 2):
        v, beta = _house(h[k + 1:, k])
        if beta == 0.0:
            continue
        h[k + 1:, k:] -= beta * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= beta * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _francis_step(b: np.ndarray, s: float, t: float) -> None:
    """One implicit double-shift QR sweep, in place, on Hessenberg block b."""
    m = b.shape[0]
    x = b[0, 0] * b[0, 0] + b[0, 1] * b[1, 0] - s * b[0, 0] + t
    y = b[1, 0] * (b[0, 0] + b[1, 1] - s)
    z = b[1, 0] * b[2, 1]
    for k in range(m - 2):
        v, beta = _house(np.array([x, y, z]))
        if beta != 0.0:
            q = max(0, k - 1)
            b[k:k + 3, q:] -= beta * np.outer(v, v @ b[k:k + 3, q:])
            r = min(k + 4, m)
            b[:r, k:k + 3] -= beta * np.outer(b[:r, k:k + 3] @ v, v)
        x = b[k + 1, k]
        y = b[k + 2, k]
        if k < m - 3:
            z = b[k + 3, k]
    v, beta = _house(np.array([x, y]))
    if beta != 0.0:
        b[m - 2:, m - 3:] -= beta * np.outer(v, v @ b[m - 2:, m - 3:])
        b[:, m - 2:] -= beta * np.outer(b[:, m - 2:] @ v, v)


def _schur_eigenvalues(h: np.ndarray) -> list[complex]:
    n = h.shape[0]
    scale = float(np.linalg.norm(h))
    if scale == 0.0:
        return [complex(0.0)] * n
    tol = DEFLATION_TOL * scale
    budget = 100 * n
    sweeps = 0
    stuck = 0
    eig: list[complex] = []
    hi = n - 1
    while hi >= 0:
        if hi == 0:
            eig.append(complex(h[0, 0]))
            break
        lo = hi
        while lo > 0 and abs(h[lo, lo - 1]) > tol:
            lo -= 1
        if lo > 0:
            h[lo, lo - 1] = 0.0
        if lo == hi:
            eig.append(complex(h[hi, hi]))
            hi -= 1
            stuck = 0
            continue
        if lo == hi - 1:
            eig.extend(_eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi]))
            hi -= 2
            stuck = 0
            continue
        sweeps += 1
        stuck += 1
        if sweeps > budget:
            raise EigensolverError(
                f"QR iteration did not converge within {budget} sweeps (order {n})"
            )
        if stuck % 10 == 0:
            # exceptional shift breaks cycles such as permutation matrices
            w = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            s, t = 1.5 * w, w * w
        else:
            s = h[hi - 1, hi - 1] + h[hi, hi]
            t = h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]
        block = h[lo:hi + 1, lo:hi + 1]
        _francis_step(block, s, t)
        h[lo:hi + 1, lo:hi + 1] = block
    return eig


def eigenvalues(m) -> list[complex]:
    """All eigenvalues of a real square matrix of order <= 16, with multiplicity.

    Raises
    ------
    EigensolverError
        If the QR iteration exhausts its budget of ``100 * n`` sweeps.
    """
    a = _as_small_matrix(m)
    n = a.shape[0]
    if n == 1:
        return [complex(a[0, 0])]
    big = float(np.max(np.abs(a)))
    if big == 0.0:
        return [0j] * n
    # power-of-two scaling is exact and keeps the sweeps away from under/overflow
    e = math.frexp(big)[1]
    a = np.ldexp(a, -e)
    if n == 2:
        eig = _eig2(a[0, 0], a[0, 1], a[1, 0], a[1, 1])
    else:
        eig = _schur_eigenvalues(hessenberg(a))
    return [complex(math.ldexp(z.real, e), math.ldexp(z.imag, e)) for z in eig]


def spectral_radius(m) -> float:
    return max(abs(lam) for lam in eigenvalues(m))
