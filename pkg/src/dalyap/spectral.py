"""Linearization analysis: eigenvalues, growth constants, capture radius, Stein solve.

Matrices here are tiny (n <= 10), so the eigenvalue routine is a plain
Householder-Hessenberg reduction followed by complex single-shift QR with
Wilkinson shifts.  Triangular and nilpotent inputs are detected up front so
that the spectral radius of e.g. [[0, 1], [0, 0]] comes out as exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .mapmodel import PolyMap, jacobian_at_zero, nonlinear_part

STRUCTURE_TOL = 1e-14
RHO_FLOOR = 0.5
ROUNDING_SLACK = 1e-12


class HypothesisError(ValueError):
    """The stability hypotheses f(0) = 0 and r(A) < 1 do not hold."""


class GrowthUncertified(RuntimeError):
    def __init__(self, partial: float, k_max: int, rho: float):
        super().__init__(
            f"could not certify |A^k| <= c*{rho:g}^k within {k_max} powers "
            f"(running max {partial:.6g}); try a positive rho margin"
        )
        self.partial = partial
        self.k_max = k_max
        self.rho = rho


def _as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form by Householder similarity transforms."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _givens(a: complex, b: complex):
    r = math.hypot(abs(a), abs(b))
    if r == 0.0:
        return 1.0, 0.0
    return a / r, b / r


def _wilkinson(H: np.ndarray, hi: int) -> complex:
    a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
    c, d = H[hi, hi - 1], H[hi, hi]
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(tr * tr / 4.0 - det)
    l1, l2 = tr / 2.0 + disc, tr / 2.0 - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def eigvals_qr(A, tol: float = 1e-14, max_sweeps: int = 200) -> np.ndarray:
    """Eigenvalues of a small dense real matrix via shifted Hessenberg QR."""
    A = _as_matrix(A)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    H = hessenberg(A)
    eig = np.zeros(n, dtype=complex)
    hi = n - 1
    stall = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        # find the active unreduced block [lo, hi]
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if s == 0.0:
                s = np.abs(H).max()
            if abs(H[lo, lo - 1]) <= tol * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            stall = 0
            continue
        stall += 1
        if stall > max_sweeps * n:
            raise RuntimeError("QR iteration did not converge")
        if stall % 11 == 0:
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            mu = _wilkinson(H, hi)
        m = hi - lo + 1
        block = H[lo : hi + 1, lo : hi + 1]
        block -= mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            c, s = _givens(block[k, k], block[k + 1, k])
            G = np.array([[np.conj(c), np.conj(s)], [-s, c]])
            block[k : k + 2, :] = G @ block[k : k + 2, :]
            rots.append(G)
        for k, G in enumerate(rots):
            block[:, k : k + 2] = block[:, k : k + 2] @ G.conj().T
        block += mu * np.eye(m)
        H[lo : hi + 1, lo : hi + 1] = block
    return eig


def _triangular_diag(A: np.ndarray) -> np.ndarray | None:
    tol = STRUCTURE_TOL * float(np.abs(A).max())
    lower = np.tril(A, -1)
    upper = np.triu(A, 1)
    if np.all(np.abs(lower) <= tol) or np.all(np.abs(upper) <= tol):
        return np.diag(A).copy()
    return None


def _is_nilpotent(A: np.ndarray) -> bool:
    # relative test: eigenvalues of a defective block are only determined to
    # about (tol * scale^n)^(1/n) anyway
    n = A.shape[0]
    scale = float(np.abs(A).max())
    if scale == 0.0:
        return True
    P = np.linalg.matrix_power(A / scale, n)
    return bool(np.all(np.abs(P) <= STRUCTURE_TOL))


def spectral_radius(A, tol: float = 1e-14) -> float:
    """Largest eigenvalue modulus; exact for triangular and nilpotent input."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    A = _as_matrix(A)
    if A.shape[0] == 0:
        return 0.0
    d = _triangular_diag(A)
    if d is not None:
        return float(np.abs(d).max())
    if _is_nilpotent(A):
        return 0.0
    return float(np.abs(eigvals_qr(A, tol)).max())


def operator_norm(A) -> float:
    """Spectral (2-)norm as sqrt of the spectral radius of A^T A."""
    A = _as_matrix(A)
    if A.size == 0:
        return 0.0
    return math.sqrt(spectral_radius(A.T @ A))


def certification_rate(r: float, rho_floor: float = RHO_FLOOR, margin: float = 0.0) -> float:
    """Rate rho used in |A^k| <= c_bar * rho^k; never below ``rho_floor``."""
    return max(r + margin * (1.0 - r), rho_floor)


def growth_bound(
    A, r: float, k_max: int = 1000, rho_floor: float = RHO_FLOOR, margin: float = 0.0
) -> tuple[float, int, float]:
    """Certified (c_bar, K, rho) with |A^k| <= c_bar * rho^k for every k >= 0.

    Scans q_k = |A^k| / rho^k and stops at the first K >= 1 with q_K <= 1.
    Submultiplicativity then gives q_{qK+j} <= q_K^q q_j <= q_j, so nothing
    past K can exceed max_{k<K} q_k.  A q_K within ROUNDING_SLACK above 1 is
    absorbed by raising rho by the factor q_K^(1/K).
    """
    A = _as_matrix(A)
    n = A.shape[0]
    if not r < 1:
        raise HypothesisError(f"spectral radius {r:g} ≥ 1")
    if k_max < max(n, 1):
        raise ValueError("k_max must be at least the matrix dimension")
    rho = certification_rate(r, rho_floor, margin)
    c_bar = 1.0
    P = np.eye(n)
    for k in range(1, k_max + 1):
        P = P @ A
        q = operator_norm(P) / rho**k
        if q <= 1.0:
            return c_bar, k, rho
        if q <= 1.0 + ROUNDING_SLACK:
            rho_up = rho * q ** (1.0 / k)
            if rho_up < 1.0:
                return c_bar, k, rho_up
        c_bar = max(c_bar, q)
    raise GrowthUncertified(c_bar, k_max, rho)


def growth_constant(
    A, r: float, k_max: int = 1000, rho_floor: float = RHO_FLOOR, margin: float = 0.0
) -> tuple[float, int]:
    """(c_bar, k_cert) for |A^k| <= c_bar * max(r, rho_floor)^k; see :func:`growth_bound`."""
    c_bar, k, _ = growth_bound(A, r, k_max, rho_floor, margin)
    return c_bar, k


def capture_radius(h: PolyMap, epsilon: float) -> float:
    """delta = min(1, epsilon / M) with M the sum of |coefficients| of h.

    On the unit ball every monomial of degree >= 2 is bounded by |x|^2, so
    |h(x)| <= M |x|^2 < epsilon |x| whenever 0 < |x| < delta.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    M = 0.0
    for comp in h.components:
        for exp, c in comp.terms.items():
            if sum(exp) < 2:
                raise ValueError("remainder has constant or linear terms")
            M += abs(c)
    if M == 0.0:
        return 1.0
    return min(1.0, epsilon / M)


def solve_stein(A, max_terms: int = 1_000_000) -> np.ndarray:
    """Symmetric P with A^T P A - P = -I, summed as sum_k (A^T)^k A^k."""
    A = _as_matrix(A)
    n = A.shape[0]
    r = spectral_radius(A)
    if not r < 1:
        raise HypothesisError(f"spectral radius {r:g} ≥ 1: Stein equation has no guaranteed solution")
    P = np.eye(n)
    Ak = np.eye(n)
    for _ in range(max_terms):
        Ak = Ak @ A
        if not Ak.any():
            break
        term = Ak.T @ Ak
        P = P + term
        if np.abs(term).max() < 1e-14 * np.abs(P).max():
            break
    else:
        raise RuntimeError("Neumann series for the Stein equation did not converge")
    return (P + P.T) / 2.0


@dataclass(frozen=True)
class SpectralConfig:
    k_max: int = 1000
    rho_floor: float = RHO_FLOOR
    rho_margin: float = 0.0


@dataclass(frozen=True)
class SpectralInfo:
    """Constants of the local convergence argument at the origin.

    ``rho`` replaces the spectral radius wherever the bound |A^k| <= c_bar rho^k
    is used, so ``alpha = (rho + 1) / 2`` and ``epsilon = (1 - rho) / (2 c_bar)``;
    with |h(x)| < epsilon |x| on the ``delta`` ball, orbits starting inside
    ``capture = delta / c_bar`` stay in the ``delta`` ball and shrink like alpha^k.
    """

    A: tuple
    r: float
    rho: float
    c_bar: float
    k_cert: int
    alpha: float
    epsilon: float
    delta: float
    jacobian_norm: float

    @property
    def capture(self) -> float:
        return self.delta / self.c_bar

    def to_json(self) -> dict:
        d = asdict(self)
        d["A"] = [list(row) for row in self.A]
        d["capture"] = self.capture
        d["hypotheses_ok"] = True
        return d


def assemble_spectral_info(f: PolyMap, cfg: SpectralConfig = SpectralConfig()) -> SpectralInfo:
    if not f.is_origin_fixed():
        raise HypothesisError("f(0) = 0 fails: map has a nonzero constant term")
    A = jacobian_at_zero(f)
    r = spectral_radius(A)
    if not r < 1:
        raise HypothesisError(f"spectral radius {r:g} ≥ 1")
    c_bar, k_cert, rho = growth_bound(A, r, cfg.k_max, cfg.rho_floor, cfg.rho_margin)
    epsilon = (1.0 - rho) / (2.0 * c_bar)
    delta = capture_radius(nonlinear_part(f), epsilon)
    return SpectralInfo(
        A=tuple(tuple(float(v) for v in row) for row in A),
        r=r,
        rho=rho,
        c_bar=c_bar,
        k_cert=k_cert,
        alpha=(rho + 1.0) / 2.0,
        epsilon=epsilon,
        delta=delta,
        jacobian_norm=operator_norm(A),
    )
