"""Explicit Runge-Kutta tableaux and their linear stability geometry.

Tableau coefficients are stored as :class:`fractions.Fraction` so the
stability polynomial of a shipped method is computed exactly.  Float arrays
for stepping are derived on demand.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CatalogError, InvariantError

CONSISTENCY_TOL = 1e-12
ZERO_DIRECTION = 1e-12


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(float(value))


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients (a, b, c) of an explicit Runge-Kutta method."""

    name: str
    a: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]

    def __post_init__(self):
        s = len(self.b)
        if s < 1 or len(self.c) != s or len(self.a) != s or any(len(r) != s for r in self.a):
            raise InvariantError(f"{self.name}: inconsistent tableau shapes")
        for i, row in enumerate(self.a):
            if any(row[j] != 0 for j in range(i, s)):
                raise InvariantError(f"{self.name}: a is not strictly lower triangular")
        if abs(float(sum(self.b)) - 1.0) > CONSISTENCY_TOL:
            raise InvariantError(f"{self.name}: weights sum to {float(sum(self.b))}, not 1")
        for i, row in enumerate(self.a):
            if abs(float(sum(row)) - float(self.c[i])) > CONSISTENCY_TOL:
                raise InvariantError(f"{self.name}: row sum condition fails at stage {i}")

    @classmethod
    def from_rows(cls, name: str, a: Sequence[Sequence], b: Sequence, c: Sequence | None = None):
        """Build a tableau from nested numbers or strings such as ``"1/6"``.

        When ``c`` is omitted it is taken as the row sums of ``a``.
        """
        fa = tuple(tuple(_frac(x) for x in row) for row in a)
        fb = tuple(_frac(x) for x in b)
        fc = tuple(sum(row, Fraction(0)) for row in fa) if c is None else tuple(_frac(x) for x in c)
        return cls(name, fa, fb, fc)

    @property
    def stages(self) -> int:
        return len(self.b)

    @cached_property
    def A(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.a])

    @cached_property
    def B(self) -> np.ndarray:
        return np.array([float(x) for x in self.b])

    @cached_property
    def C(self) -> np.ndarray:
        return np.array([float(x) for x in self.c])


EULER = ButcherTableau.from_rows("euler", [[0]], [1])
HEUN = ButcherTableau.from_rows("heun", [[0, 0], [1, 0]], ["1/2", "1/2"])
KUTTA3 = ButcherTableau.from_rows(
    "rk3", [[0, 0, 0], ["1/2", 0, 0], [-1, 2, 0]], ["1/6", "2/3", "1/6"]
)
RK4 = ButcherTableau.from_rows(
    "rk4",
    [[0, 0, 0, 0], ["1/2", 0, 0, 0], [0, "1/2", 0, 0], [0, 0, 1, 0]],
    ["1/6", "1/3", "1/3", "1/6"],
)

TABLEAUX = {t.name: t for t in (EULER, HEUN, KUTTA3, RK4)}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUX[name]
    except KeyError:
        raise CatalogError(f"unknown tableau {name!r}; known: {sorted(TABLEAUX)}") from None


def _poly_add(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * max(len(p), len(q))
    for i, x in enumerate(p):
        out[i] += x
    for i, x in enumerate(q):
        out[i] += x
    return out


def _poly_scale(p: list[Fraction], s: Fraction) -> list[Fraction]:
    return [s * x for x in p]


@dataclass(frozen=True)
class StabilityPolynomial:
    """R(z) = sum_k coeffs[k] z**k."""

    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.coeffs or self.coeffs[0] != 1:
            raise InvariantError("stability polynomial must satisfy R(0) = 1")

    @property
    def degree(self) -> int:
        nz = [k for k, x in enumerate(self.coeffs) if x != 0]
        return nz[-1]

    @cached_property
    def _float_coeffs(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.coeffs)

    def __call__(self, z: complex) -> complex:
        acc = 0j
        for ck in reversed(self._float_coeffs):
            acc = acc * z + ck
        return acc


def stability_polynomial(tableau: ButcherTableau) -> StabilityPolynomial:
    """Apply the method to y' = lambda*y, y(0) = 1, with z = h*lambda symbolic.

    Stage values obey k_i(z) = 1 + z * sum_j a_ij k_j(z) and the update is
    R(z) = 1 + z * sum_i b_i k_i(z); explicitness makes the recursion finite.
    """
    s = tableau.stages
    for i, row in enumerate(tableau.a):
        if any(row[j] != 0 for j in range(i, s)):
            raise InvariantError(f"{tableau.name}: not an explicit tableau")
    stages: list[list[Fraction]] = []
    for i in range(s):
        acc = [Fraction(0)]
        for j in range(i):
            if tableau.a[i][j] != 0:
                acc = _poly_add(acc, _poly_scale(stages[j], tableau.a[i][j]))
        stages.append(_poly_add([Fraction(1)], [Fraction(0)] + acc))
    acc = [Fraction(0)]
    for i in range(s):
        acc = _poly_add(acc, _poly_scale(stages[i], tableau.b[i]))
    coeffs = _poly_add([Fraction(1)], [Fraction(0)] + acc)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return StabilityPolynomial(tuple(coeffs))


def _excess_coeffs(R: StabilityPolynomial, lam: complex) -> list[float]:
    # |R(h*lam)|^2 - 1 = sum_{k>=1} d_k h^k; expanding in h avoids the
    # cancellation against 1 that hides instability at small h
    a = [c * lam ** k for k, c in enumerate(R._float_coeffs)]
    n = len(a)
    d = [0.0] * (2 * n - 1)
    for i in range(n):
        for j in range(n):
            d[i + j] += (a[i] * a[j].conjugate()).real
    d[0] = 0.0
    return d


def _excess(d: list[float], h: float) -> float:
    acc = 0.0
    for dk in reversed(d):
        acc = acc * h + dk
    return acc


def in_domain(R: StabilityPolynomial, z: complex) -> bool:
    # the domain is closed: |R| = 1 counts as stable
    return _excess(_excess_coeffs(R, z), 1.0) <= 0.0


def max_stable_scale(
    R: StabilityPolynomial,
    lam: complex,
    march_fraction: float = 0.01,
    rtol: float = 1e-10,
    max_march: int = 1_000_000,
) -> float:
    """Largest h >= 0 with the segment [0, h]*lam inside the stability domain.

    Only the connected piece of the ray that contains 0 counts.  The ray is
    marched in increments of ``march_fraction * 4/|lam|`` until it leaves the
    domain, then the exit point is bisected.  Returns ``math.inf`` for
    |lam| < 1e-12 or when R is constant (no bound along any ray).
    """
    mag = abs(lam)
    if mag < ZERO_DIRECTION or R.degree == 0:
        return math.inf
    h_guess = 4.0 / mag
    step = march_fraction * h_guess
    d = _excess_coeffs(R, lam)
    lo, hi = 0.0, step
    n = 0
    while _excess(d, hi) <= 0.0:
        lo = hi
        n += 1
        hi = (n + 1) * step
        if n > max_march:
            return math.inf
    floor = 1e-14 * h_guess
    while hi - lo > 0.25 * rtol * hi and hi > floor:
        mid = 0.5 * (lo + hi)
        if _excess(d, mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def domain_boundary(R: StabilityPolynomial, n_rays: int) -> list[tuple[float, complex]]:
    """Boundary points of the stability domain along ``n_rays`` uniform rays.

    Returns ``(theta, z)`` pairs.  Rays on which the domain is unbounded are
    omitted; rays that leave the domain immediately contribute z = 0.
    """
    if n_rays < 4:
        raise ValueError("n_rays must be at least 4")
    out = []
    for j in range(n_rays):
        theta = 2.0 * math.pi * j / n_rays
        direction = cmath.exp(1j * theta)
        scale = max_stable_scale(R, direction)
        if math.isinf(scale):
            continue
        out.append((theta, scale * direction))
    return out
