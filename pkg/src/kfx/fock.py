"""Fock-basis operator construction.

The kick potential cos(q*x) has closed-form matrix elements in the oscillator
eigenbasis: writing z = hbar q^2 / 2 and using the displacement-operator
identity <n| e^{i q x} |n+m> = i^m sqrt(n!/(n+m)!) (2z)^{m/2} e^{-z/2} L_n^m(z)
/ 2^{m/2},

    <n| cos(q x) |n+m> = cos(m pi/2) * sqrt(n!/(n+m)!) * z^{m/2} e^{-z/2}
                          * L_n^m(z),

with L_n^m the associated Laguerre polynomial; the cos(m pi/2) factor kills
odd m and alternates the sign of the surviving diagonals (checked against
direct quadrature of the overlap integral).  Odd m vanishes by parity, so
the matrix splits into even/odd index blocks and the kick unitary
exp(i (K/hbar) cos q x) is built per block from a real-symmetric
eigendecomposition.  All factorial ratios are handled in log space or through
scaled recurrences; nothing overflows up to N = 4096.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import gammaln

_QUAD_MAX_NM = 400  # largest n+m the quadrature oracle will attempt

# below exp(_LOG_FLOOR) an entry cannot influence double-precision results
_LOG_FLOOR = -745.0


@dataclass(frozen=True)
class CosMatrix:
    """Real symmetric matrix of cos(q*x) in the size-N oscillator basis."""

    data: np.ndarray = field(repr=False)
    q: float
    hbar: float

    @property
    def size(self):
        return self.data.shape[0]


def _entry_diagonals(N, z):
    """All even superdiagonals of the cos matrix, via a scaled Laguerre recurrence.

    Returns (ms, E) where E[n, i] = <n| cos |n+ms[i]>.  The three-term Laguerre
    recurrence runs directly on scaled entries (true entry = scaled value times
    exp(scale_log)), renormalizing whenever the scaled values grow large, so
    nothing overflows even when the m-axis prefactor z^{m/2}/sqrt(m!) underflows.
    Diagonals whose rigorous bound |L_n^m(z)| <= C(n+m,n) e^{z/2} puts every
    entry below the double-precision floor are skipped outright.
    """
    ms = np.arange(0, N, 2, dtype=float)
    # bound at the largest admissible n on each diagonal
    log_bound = ms / 2.0 * math.log(z) + 0.5 * (gammaln(N) - gammaln(N - ms)) - gammaln(ms + 1.0)
    ms = ms[log_bound > _LOG_FLOOR]
    n_diag = ms.size
    E = np.zeros((N, n_diag))

    scale_log = ms / 2.0 * math.log(z) - z / 2.0 - 0.5 * gammaln(ms + 1.0)
    exp_scale = np.exp(scale_log)
    prev = np.ones(n_diag)  # scaled E_0
    cur = (1.0 + ms - z) / np.sqrt(1.0 + ms)  # scaled E_1
    E[0] = prev * exp_scale
    if N > 1:
        E[1] = cur * exp_scale
    for n in range(1, N - 1):
        a = (2.0 * n + 1.0 + ms - z) / np.sqrt((n + 1.0) * (n + ms + 1.0))
        b = np.sqrt(n * (n + ms) / ((n + 1.0) * (n + ms + 1.0)))
        prev, cur = cur, a * cur - b * prev
        # keep scaled values small so scaled * exp(scale_log) never loses a
        # representable entry to a zero exp_scale
        peak = np.maximum(np.abs(cur), np.abs(prev))
        big = peak > 1e8
        if big.any():
            shrink = np.where(big, peak, 1.0)
            prev = prev / shrink
            cur = cur / shrink
            scale_log = scale_log + np.log(shrink)
            exp_scale = np.exp(scale_log)
        E[n + 1] = cur * exp_scale
    # zero out n beyond each diagonal's length (n + m <= N - 1)
    n_idx = np.arange(N)[:, None]
    E[n_idx + ms[None, :].astype(int) > N - 1] = 0.0
    # the i^m of the displacement identity: cos(m pi/2) = -1 for m = 2 mod 4
    E *= np.where((ms.astype(int) // 2) % 2 == 1, -1.0, 1.0)[None, :]
    return ms.astype(int), E


def cos_matrix(N, q, hbar) -> CosMatrix:
    """Matrix of cos(q*x) on the first N oscillator states."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if q == 0.0:
        return CosMatrix(data=np.eye(N), q=0.0, hbar=hbar)
    z = hbar * q * q / 2.0
    ms, E = _entry_diagonals(N, z)
    mat = np.zeros((N, N))
    for i, m in enumerate(ms):
        d = E[: N - m, i]
        idx = np.arange(N - m)
        mat[idx, idx + m] = d
        if m > 0:
            mat[idx + m, idx] = d
    return CosMatrix(data=mat, q=q, hbar=hbar)


@functools.lru_cache(maxsize=64)
def _hermgauss(order):
    return hermgauss(order)


def cos_element_quadrature(n, m, q, hbar) -> float:
    """Overlap integral of cos(q*x) with oscillator states n and n+m by
    Gauss-Hermite quadrature; independent of the closed-form route."""
    n2 = n + m
    if n < 0 or n2 < 0:
        raise ValueError("state indices must be nonnegative")
    if n + n2 > 2 * _QUAD_MAX_NM:
        raise ValueError(f"requested quadrature order beyond limit (n+m <= {_QUAD_MAX_NM})")
    # round the order up to a coarse lattice so the node cache gets reused
    order = 2 * (n + n2) + 64
    order += (-order) % 32
    nodes, weights = _hermgauss(order)
    # orthonormal Hermite functions h_k with weight e^{-u^2}
    h_prev = np.full_like(nodes, math.pi**-0.25)
    h_cur = nodes * math.sqrt(2.0) * h_prev
    vals = {0: h_prev, 1: h_cur}
    for k in range(1, max(n, n2)):
        h_prev, h_cur = h_cur, nodes * math.sqrt(2.0 / (k + 1)) * h_cur - math.sqrt(k / (k + 1.0)) * h_prev
        vals[k + 1] = h_cur
    integrand = np.cos(q * math.sqrt(hbar) * nodes) * vals[n] * vals[n2]
    return float(np.sum(weights * integrand))


@dataclass(frozen=True)
class KickOperator:
    """Unitary exp(i*(K/hbar)*cos(q*x)) stored as its two parity blocks."""

    size: int
    even_idx: np.ndarray = field(repr=False)
    odd_idx: np.ndarray = field(repr=False)
    u_even: np.ndarray = field(repr=False)
    u_odd: np.ndarray = field(repr=False)

    def full_matrix(self) -> np.ndarray:
        u = np.zeros((self.size, self.size), dtype=complex)
        u[np.ix_(self.even_idx, self.even_idx)] = self.u_even
        u[np.ix_(self.odd_idx, self.odd_idx)] = self.u_odd
        return u

    def conjugate(self, op: np.ndarray) -> np.ndarray:
        """U @ op @ U^dagger, block by block (general complex op)."""
        ee, oo = self.even_idx, self.odd_idx
        out = np.empty_like(op, dtype=complex)
        ue_h = self.u_even.conj().T
        uo_h = self.u_odd.conj().T
        out[np.ix_(ee, ee)] = self.u_even @ op[np.ix_(ee, ee)] @ ue_h
        out[np.ix_(ee, oo)] = self.u_even @ op[np.ix_(ee, oo)] @ uo_h
        out[np.ix_(oo, ee)] = self.u_odd @ op[np.ix_(oo, ee)] @ ue_h
        out[np.ix_(oo, oo)] = self.u_odd @ op[np.ix_(oo, oo)] @ uo_h
        return out


def kick_unitary(c: CosMatrix, k_over_hbar) -> KickOperator:
    """Exponentiate the cos matrix per parity block via eigendecomposition."""
    n = c.size
    even = np.arange(0, n, 2)
    odd = np.arange(1, n, 2)
    blocks = []
    for idx in (even, odd):
        sub = c.data[np.ix_(idx, idx)]
        try:
            w, v = np.linalg.eigh(sub)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(
                f"eigensolver failed on parity block of size {idx.size} "
                f"(N={n}, q={c.q}, hbar={c.hbar})"
            ) from exc
        blocks.append((v * np.exp(1j * k_over_hbar * w)) @ v.T)
    return KickOperator(size=n, even_idx=even, odd_idx=odd, u_even=blocks[0], u_odd=blocks[1])


@dataclass(frozen=True)
class FockVector:
    """State vector in the truncated basis, with its lost tail weight."""

    amplitudes: np.ndarray = field(repr=False)
    truncated_weight: float = 0.0
    truncation_warning: bool = False

    @property
    def size(self):
        return self.amplitudes.shape[0]

    def norm_sq(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def coherent_amplitudes(x, p, hbar, N) -> np.ndarray:
    """Amplitudes c_n = e^{-|a|^2/2} a^n / sqrt(n!) with a = (x+ip)/sqrt(2 hbar).

    Log-space evaluation, so states far from the origin underflow gracefully
    to zero instead of contaminating the recurrence.
    """
    alpha = complex(x, p) / math.sqrt(2.0 * hbar)
    ns = np.arange(N)
    mod2 = abs(alpha) ** 2
    if mod2 == 0.0:
        amps = np.zeros(N, dtype=complex)
        amps[0] = 1.0
        return amps
    log_mag = ns * math.log(abs(alpha)) - 0.5 * gammaln(ns + 1.0) - mod2 / 2.0
    phase = ns * np.angle(alpha)
    with np.errstate(under="ignore"):
        return np.exp(log_mag + 1j * phase)


def coherent_state(x, p, params) -> FockVector:
    """Minimal coherent state centered at (x, p); <x> = x and <p> = p."""
    amps = coherent_amplitudes(x, p, params.hbar, params.basis_N)
    norm = float(np.vdot(amps, amps).real)
    lost = max(0.0, 1.0 - norm)
    return FockVector(amplitudes=amps, truncated_weight=lost, truncation_warning=lost > 1e-6)


def lowering_matrix(N) -> np.ndarray:
    """Ladder operator a with <n-1| a |n> = sqrt(n)."""
    a = np.zeros((N, N))
    ns = np.arange(1, N)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def parity_vector(N) -> np.ndarray:
    """Diagonal of the parity operator: (-1)^n."""
    v = np.ones(N)
    v[1::2] = -1.0
    return v
