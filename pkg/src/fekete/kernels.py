"""Positive definite kernels with explicit Mercer expansions.

Three kernel families are provided, each as a :class:`MercerKernel` bundling the
closed-form kernel with its eigenvalue sequence and eigenfunctions:

* Brownian motion kernel ``K(x, y) = min(x, y)`` on [0, 1].
* Inverse multiquadric kernel on the unit sphere S^2 with shape ``gamma``.
* Gaussian kernel ``exp(-eps^2 |x - y|^2)`` on [-1, 1]^d for d in {1, 2}.

Eigenfunction indices are 1-based throughout, mirroring the usual series
notation.  Eigenvalues are non-increasing along the index (for the tensor
Gaussian this holds with ties inside each total-degree block).

The Gaussian eigenfunctions are orthonormal with respect to the full-line
density ``(alpha/sqrt(pi)) exp(-alpha^2 x^2)`` and are used unchanged on the
truncated box; the real spherical harmonics are orthonormal with respect to
the (unnormalized) surface measure on S^2, so ``Y_{0,1} = 1/sqrt(4 pi)``.
Within degree n, order 1 is the zonal harmonic, order 2j the cos(j phi)
harmonic and order 2j+1 the sin(j phi) harmonic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_UNIT_NORM_TOL = 1e-8


@dataclass(frozen=True)
class MercerKernel:
    """A kernel together with its Mercer eigensystem.

    Attributes
    ----------
    eval : callable
        ``eval(x, y)`` returning the kernel value.  Points are floats for
        one-dimensional kernels and length-d arrays otherwise.
    eigenvalue : callable
        ``eigenvalue(l)`` for 1-based ``l``.
    eigenfunction : callable
        ``eigenfunction(l, x)`` for 1-based ``l``.
    dimension : int
        Ambient dimension of the input points (1, 2, or 3 for the sphere).
    ordering_tag : str
        "standard" or "swapped"; distinguishes the two tensor-product
        eigenfunction enumerations of the 2-d Gaussian kernel.
    """

    eval: Callable[..., float]
    eigenvalue: Callable[[int], float]
    eigenfunction: Callable[..., float]
    dimension: int
    ordering_tag: str = "standard"


def _check_index(ell: int) -> None:
    if ell < 1:
        raise IndexError(f"eigenfunction index must be >= 1, got {ell}")


# ---------------------------------------------------------------------------
# Brownian motion kernel on [0, 1]


def brownian_kernel() -> MercerKernel:
    """Brownian motion kernel min(x, y) on [0, 1].

    Eigenvalues 4 / ((2l-1)^2 pi^2) with eigenfunctions
    sqrt(2) sin((2l-1) pi x / 2).
    """

    def k_eval(x: float, y: float) -> float:
        return min(float(x), float(y))

    def eigenvalue(ell: int) -> float:
        _check_index(ell)
        return 4.0 / ((2 * ell - 1) ** 2 * math.pi**2)

    def eigenfunction(ell: int, x: float) -> float:
        _check_index(ell)
        return math.sqrt(2.0) * math.sin((2 * ell - 1) * math.pi * float(x) / 2.0)

    return MercerKernel(k_eval, eigenvalue, eigenfunction, dimension=1)


# ---------------------------------------------------------------------------
# Inverse multiquadric kernel on the unit sphere


def _as_unit_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"sphere points must be 3-vectors, got shape {v.shape}")
    if abs(np.dot(v, v) - 1.0) > 2 * _UNIT_NORM_TOL:
        raise ValueError(f"point is not on the unit sphere: |x|^2 = {np.dot(v, v)!r}")
    return v


def _normalized_assoc_legendre(n_max: int, m: int, t: float) -> list[float]:
    """Values N_n^m(t) for n = m..n_max of the orthonormalized associated
    Legendre functions, so that sum over all orders of Y^2 equals
    (2n+1)/(4 pi).  Condon-Shortley phase omitted."""
    s = math.sqrt(max(0.0, 1.0 - t * t))
    # seed N_m^m by the diagonal recurrence
    nmm = math.sqrt(1.0 / (4.0 * math.pi))
    for k in range(1, m + 1):
        nmm *= math.sqrt((2 * k + 1) / (2.0 * k)) * s
    values = [nmm]
    if n_max == m:
        return values
    prev, cur = 0.0, nmm
    for n in range(m + 1, n_max + 1):
        a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
        b = math.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
        prev, cur = cur, a * (t * cur - b * prev)
        values.append(cur)
    return values


def real_spherical_harmonic(degree: int, order: int, x) -> float:
    """Real orthonormal spherical harmonic Y_{degree, order}.

    ``order`` runs through 1..2*degree+1: order 1 is zonal (m = 0), order 2j
    carries cos(j phi), order 2j+1 carries sin(j phi).
    """
    if degree < 0 or not 1 <= order <= 2 * degree + 1:
        raise IndexError(f"invalid spherical harmonic (degree={degree}, order={order})")
    v = _as_unit_vector(x)
    t = min(1.0, max(-1.0, v[2]))
    phi = math.atan2(v[1], v[0])
    if order == 1:
        return _normalized_assoc_legendre(degree, 0, t)[-1]
    m = order // 2
    base = _normalized_assoc_legendre(degree, m, t)[-1]
    if order % 2 == 0:
        return math.sqrt(2.0) * base * math.cos(m * phi)
    return math.sqrt(2.0) * base * math.sin(m * phi)


def _sphere_flat_index(ell: int) -> tuple[int, int]:
    """Map flat index l >= 1 to (degree n, order in 1..2n+1) with l = n^2 + order."""
    _check_index(ell)
    n = math.isqrt(ell - 1)
    return n, ell - n * n


def spherical_imq_kernel(gamma: float) -> MercerKernel:
    """Inverse multiquadric kernel 1/sqrt(1 + gamma^2 - 2 gamma <x, y>) on S^2.

    Eigenvalues 4 pi gamma^n / (2n+1), each repeated 2n+1 times, with the real
    orthonormal spherical harmonics of degree n as eigenfunctions.
    """
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")

    def k_eval(x, y) -> float:
        vx = _as_unit_vector(x)
        vy = _as_unit_vector(y)
        return 1.0 / math.sqrt(1.0 + gamma * gamma - 2.0 * gamma * float(np.dot(vx, vy)))

    def eigenvalue(ell: int) -> float:
        n, _ = _sphere_flat_index(ell)
        return 4.0 * math.pi * gamma**n / (2 * n + 1)

    def eigenfunction(ell: int, x) -> float:
        n, order = _sphere_flat_index(ell)
        return real_spherical_harmonic(n, order, x)

    return MercerKernel(k_eval, eigenvalue, eigenfunction, dimension=3)


# ---------------------------------------------------------------------------
# Gaussian kernel on [-1, 1]^d


def _normalized_hermite(n: int, t: float) -> float:
    """H_n(t) / sqrt(2^n n!) by a stable three-term recurrence."""
    if n == 0:
        return 1.0
    prev, cur = 1.0, math.sqrt(2.0) * t
    for k in range(1, n):
        prev, cur = cur, (math.sqrt(2.0) * t * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
    return cur


class _GaussianFactor:
    """1-d Gaussian eigenpairs for given shape eps and density scale alpha."""

    def __init__(self, eps: float, alpha: float):
        self.eps = eps
        self.alpha = alpha
        self.beta = (1.0 + (2.0 * eps / alpha) ** 2) ** 0.25
        self.delta_sq = alpha * alpha * (self.beta * self.beta - 1.0) / 2.0
        self._denom = alpha * alpha + self.delta_sq + eps * eps
        self._lam1 = math.sqrt(alpha * alpha / self._denom)
        self._ratio = eps * eps / self._denom

    def eigenvalue(self, n: int) -> float:
        return self._lam1 * self._ratio ** (n - 1)

    def eigenfunction(self, n: int, x: float) -> float:
        ab = self.alpha * self.beta
        return (
            math.sqrt(self.beta)
            * math.exp(-self.delta_sq * x * x)
            * _normalized_hermite(n - 1, ab * x)
        )


def _anti_diagonal_pair(ell: int, swapped: bool) -> tuple[int, int]:
    """Tensor indices (i, j) for flat index l in the anti-diagonal enumeration.

    Standard order walks each block of total degree s = i + j with i
    descending (phi_{s-1} phi_1, ..., phi_1 phi_{s-1}); the swapped order
    walks it with i ascending.
    """
    _check_index(ell)
    s = 2
    remaining = ell - 1
    while remaining >= s - 1:
        remaining -= s - 1
        s += 1
    # remaining in 0 .. s-2 indexes the position inside block s
    if swapped:
        i = remaining + 1
    else:
        i = s - 1 - remaining
    return i, s - i


def gaussian_kernel(
    d: int, eps: float = 1.0, alpha: float = 1.0, ordering: str = "standard"
) -> MercerKernel:
    """Gaussian kernel exp(-eps^2 |x - y|^2) on [-1, 1]^d, d in {1, 2}.

    For d = 2 the eigenpairs are tensor products enumerated along
    anti-diagonals; ``ordering`` selects the standard or the swapped walk
    within each anti-diagonal block.
    """
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    eps = float(eps)
    alpha = float(alpha)
    if eps <= 0.0 or alpha <= 0.0:
        raise ValueError(f"eps and alpha must be positive, got eps={eps}, alpha={alpha}")
    if ordering not in ("standard", "swapped"):
        raise ValueError(f"ordering must be 'standard' or 'swapped', got {ordering!r}")
    factor = _GaussianFactor(eps, alpha)

    if d == 1:

        def k_eval(x: float, y: float) -> float:
            r = float(x) - float(y)
            return math.exp(-eps * eps * r * r)

        def eigenvalue(ell: int) -> float:
            _check_index(ell)
            return factor.eigenvalue(ell)

        def eigenfunction(ell: int, x: float) -> float:
            _check_index(ell)
            return factor.eigenfunction(ell, float(x))

        return MercerKernel(k_eval, eigenvalue, eigenfunction, dimension=1)

    swapped = ordering == "swapped"

    def k_eval2(x, y) -> float:
        vx = np.asarray(x, dtype=float)
        vy = np.asarray(y, dtype=float)
        if vx.shape != (2,) or vy.shape != (2,):
            raise ValueError("points must be 2-vectors")
        r = vx - vy
        return math.exp(-eps * eps * float(np.dot(r, r)))

    def eigenvalue2(ell: int) -> float:
        i, j = _anti_diagonal_pair(ell, swapped)
        return factor.eigenvalue(i) * factor.eigenvalue(j)

    def eigenfunction2(ell: int, x) -> float:
        i, j = _anti_diagonal_pair(ell, swapped)
        v = np.asarray(x, dtype=float)
        if v.shape != (2,):
            raise ValueError("points must be 2-vectors")
        return factor.eigenfunction(i, v[0]) * factor.eigenfunction(j, v[1])

    return MercerKernel(k_eval2, eigenvalue2, eigenfunction2, dimension=2, ordering_tag=ordering)


# ---------------------------------------------------------------------------


def regressor(kernel: MercerKernel, ell: int, y) -> np.ndarray:
    """Vector (phi_1(y), ..., phi_ell(y)) of leading eigenfunction values."""
    if ell < 1:
        raise IndexError(f"regressor length must be >= 1, got {ell}")
    return np.array([kernel.eigenfunction(l, y) for l in range(1, ell + 1)])
