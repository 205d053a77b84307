"""Exact one-period propagation of Fock-basis operators under damping and kicks.

Between kicks the master equation with a single lowering-operator dissipator
at rate gamma decouples, in the interaction picture, into independent
sub-blocks of fixed index offset k = m - n:

    d r_{nm}/dt = 2 gamma [ sqrt((n+1)(m+1)) r_{n+1,m+1} - (n+m)/2 r_{nm} ]

whose exact time-T solution is a feed-down series

    r_{nm}(T) = sum_j e^{-gT(n+m)} (1-e^{-2gT})^j
                sqrt(C(n+j,j) C(m+j,j)) r_{n+j,m+j}(0).

The series factorizes through amplitudes c_j(n) with c_j(n) c_j(m) equal to
the weight above, so one application costs a handful of vectorized
rank-one-scaled submatrix updates per retained j.  The retained-j set is
closed under the binomial identity, which makes the channel trace preserving
to machine precision on the truncated space.  Free rotation multiplies entry
(n, m) by e^{i(m-n)T} (exact fourth roots of unity at T = pi/2), and the kick
conjugates with the parity-blocked unitary.  A fixed-step RK4 integrator of
the same sub-block equation is kept purely as an independent oracle.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .fock import KickOperator, coherent_state, cos_matrix, kick_unitary
from .params import SystemParams

_SNAPSHOT_MAGIC = b"KFLX"
_SNAPSHOT_VERSION = 1
_WEIGHT_FLOOR = 1e-18  # feed-down weights below this are dropped


class TruncationError(RuntimeError):
    """Fock-edge population exceeded the abort threshold during evolution."""

    def __init__(self, kick, edge_population):
        super().__init__(
            f"basis truncation abort at kick {kick}: edge population {edge_population:.3e}"
        )
        self.kick = kick
        self.edge_population = edge_population


@dataclass(frozen=True)
class DensityMatrix:
    """N x N Hermitian unit-trace operator plus its parameter stamp."""

    data: np.ndarray = field(repr=False)
    params: SystemParams
    kick: int = 0

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        n = self.params.basis_N
        if d.shape != (n, n):
            raise ValueError(f"density matrix shape {d.shape} != ({n}, {n})")
        object.__setattr__(self, "data", d)

    @classmethod
    def from_state_vector(cls, vec, params, kick=0):
        v = np.asarray(vec, dtype=complex)
        return cls(data=np.outer(v, v.conj()), params=params, kick=kick)

    @classmethod
    def coherent(cls, x, p, params):
        return cls.from_state_vector(coherent_state(x, p, params).amplitudes, params)

    @classmethod
    def vacuum(cls, params):
        v = np.zeros(params.basis_N, dtype=complex)
        v[0] = 1.0
        return cls.from_state_vector(v, params)

    def trace(self):
        return float(self.data.trace().real)

    def hermiticity_defect(self):
        return float(np.abs(self.data - self.data.conj().T).max())


@dataclass(frozen=True)
class ChannelCache:
    """Feed-down amplitude tables for the exact damping channel at (gamma, T, N).

    ``amps[i, n] = sqrt( C(n+j_i, j_i) (1-eta)^{j_i} eta^n )`` with
    eta = e^{-2 gamma T}; the product amps[i, n] * amps[i, m] reproduces the
    decay factor e^{-gamma T (n+m)} times the feed-down weight of offset j_i.
    Only offsets whose largest weight exceeds a floor are kept.
    """

    gamma: float
    time: float
    size: int
    offsets: np.ndarray = field(repr=False)  # retained j values, ascending
    amps: np.ndarray = field(repr=False)  # shape (len(offsets), size)

    @classmethod
    def build(cls, gamma, time, size):
        if gamma < 0 or time < 0:
            raise ValueError("gamma and time must be nonnegative")
        n = np.arange(size, dtype=float)
        if gamma == 0.0 or time == 0.0:
            return cls(gamma, time, size, np.array([0]), np.ones((1, size)))
        eta = math.exp(-2.0 * gamma * time)
        log_eta = -2.0 * gamma * time
        log_1m = math.log1p(-eta)
        offsets = []
        rows = []
        for j in range(size):
            log_w = gammaln(n + j + 1.0) - gammaln(j + 1.0) - gammaln(n + 1.0)
            log_w += j * log_1m + n * log_eta
            log_w[int(size - j) :] = -np.inf  # sources beyond the basis
            peak = log_w.max()
            if peak < math.log(_WEIGHT_FLOOR):
                if j > 2.0 * (1.0 - eta) * size + 16:
                    break  # weights are unimodal in j past the bulk
                continue
            amp = np.exp(0.5 * log_w)
            amp[size - j :] = 0.0
            offsets.append(j)
            rows.append(amp)
        return cls(gamma, time, size, np.asarray(offsets), np.asarray(rows))

    def transfer_matrix(self, k=0):
        """Dense sub-block transfer (target row, source column) for offset k >= 0.

        Source (n+j, n+k+j) feeds target (n, n+k) with weight
        amps[j, n] * amps[j, n+k]; columns of the k = 0 matrix sum to one
        (trace preservation) away from the truncation edge.
        """
        m = self.size - k
        t = np.zeros((m, m))
        for i, j in enumerate(self.offsets):
            src = np.arange(m - j)
            t[src, src + j] = self.amps[i, src] * self.amps[i, src + k]
        return t


def damping_channel(op, cache: ChannelCache):
    """Exact damping over the cache's time span; linear, non-Hermitian capable."""
    if op.shape != (cache.size, cache.size):
        raise ValueError(f"operator shape {op.shape} does not match cache size {cache.size}")
    out = np.zeros_like(op, dtype=complex)
    for i, j in enumerate(cache.offsets):
        m = cache.size - j
        c = cache.amps[i, :m]
        out[:m, :m] += (c[:, None] * op[j:, j:]) * c[None, :]
    return out


def damping_channel_rk(op, gamma, time, dt=None):
    """Classic fixed-step RK4 integration of the damping sub-block equation.

    Kept as an independent oracle for the closed-form channel.  dt above the
    stiffness bound 1/(4*gamma*N) is refused.
    """
    op = np.asarray(op, dtype=complex)
    n = op.shape[0]
    if gamma == 0.0 or time == 0.0:
        return op.copy()
    stiff = 1.0 / (4.0 * gamma * n)
    if dt is None:
        dt = min(stiff / 8.0, time / 128.0)
    if dt > stiff:
        raise ValueError(f"dt={dt:.3e} exceeds the stability bound {stiff:.3e}")
    steps = max(1, math.ceil(time / dt))
    h = time / steps
    idx = np.arange(n, dtype=float)
    decay = idx[:, None] + idx[None, :]  # (n + m)
    feed = np.sqrt(np.outer(idx[1:], idx[1:]))  # sqrt((n+1)(m+1)) shifted

    def rhs(y):
        out = -gamma * decay * y
        out[:-1, :-1] += 2.0 * gamma * feed * y[1:, 1:]
        return out

    y = op.copy()
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


_QUARTER_TURN = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])


def free_phase_rotation(op, T):
    """Multiply entry (n, m) by e^{i (m-n) T}.

    At T = pi/2 the factors are exact fourth roots of unity, so repeated
    application accumulates no trigonometric phase drift.
    """
    n = op.shape[0]
    if T == math.pi / 2:
        u = _QUARTER_TURN[np.arange(n) % 4]
    else:
        u = np.exp(1j * T * np.arange(n))
    return (u.conj()[:, None] * op) * u[None, :]


def kick_conjugation(op, u: KickOperator):
    """U op U^dagger through the parity blocks."""
    if op.shape[0] != u.size:
        raise ValueError("operator and kick unitary sizes differ")
    return u.conjugate(op)


@dataclass
class EvolutionRecord:
    """Per-kick scalar diagnostics plus the final state."""

    kicks: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    energy: np.ndarray
    edge_population: np.ndarray
    warnings: list
    final: DensityMatrix


def default_snapshot_kicks(n_kicks, every=0):
    """Snapshot cadence: dense (every kick) up to 60, then every 10th.

    A positive ``every`` selects a fixed cadence instead.  Kick 0 and the
    final kick are always included.
    """
    if every > 0:
        ks = set(range(0, n_kicks + 1, every))
    else:
        ks = set(range(0, min(n_kicks, 60) + 1))
        ks.update(range(0, n_kicks + 1, 10))
    ks.add(0)
    ks.add(n_kicks)
    return sorted(ks)


class LindbladEngine:
    """One-period propagator bound to a fixed SystemParams.

    The damping amplitudes and the kick unitary are built once and reused for
    every period; all methods are pure with respect to their operator input.
    """

    def __init__(self, params: SystemParams):
        self.params = params
        self.channel = ChannelCache.build(params.gamma, params.period_T, params.basis_N)
        self.kick_op = None
        if params.kick_K != 0.0:
            self.kick_op = kick_unitary(
                cos_matrix(params.basis_N, params.q, params.hbar), params.k_over_hbar
            )
        ns = np.arange(params.basis_N)
        self._energy_weights = params.hbar * (ns + 0.5)
        self._edge_start = int(math.floor(0.9 * params.basis_N)) + 1

    def period_step(self, op, hermitian=False):
        """Damping over T, free rotation over T, then the kick conjugation."""
        out = damping_channel(op, self.channel)
        out = free_phase_rotation(out, self.params.period_T)
        if self.kick_op is not None:
            out = self.kick_op.conjugate(out)
        if hermitian:
            out = 0.5 * (out + out.conj().T)
        return out

    def diagnostics(self, data):
        """(trace, purity, mean energy, edge population) of a Hermitian operator."""
        diag = data.diagonal().real
        trace = float(diag.sum())
        purity = float(np.vdot(data, data).real)
        energy = float(diag @ self._energy_weights)
        edge = float(diag[self._edge_start :].sum())
        return trace, purity, energy, edge

    def evolve(
        self,
        rho: DensityMatrix,
        n_kicks,
        snapshot_every=0,
        sinks=(),
        edge_warn=1e-6,
        edge_abort=1e-3,
    ) -> EvolutionRecord:
        """Iterate the period map, recording diagnostics every kick.

        Snapshot sinks are called as ``sink(kick, DensityMatrix)`` at the
        cadence of :func:`default_snapshot_kicks`.  Edge population beyond
        ``edge_warn`` records a truncation warning; beyond ``edge_abort`` the
        run aborts with :class:`TruncationError`.
        """
        snaps = set(default_snapshot_kicks(n_kicks, snapshot_every))
        data = rho.data.copy()
        count = n_kicks + 1
        rec = EvolutionRecord(
            kicks=np.arange(count),
            trace=np.zeros(count),
            purity=np.zeros(count),
            energy=np.zeros(count),
            edge_population=np.zeros(count),
            warnings=[],
            final=rho,
        )
        warned = False
        for k in range(count):
            kick_index = rho.kick + k
            t, pur, en, edge = self.diagnostics(data)
            rec.trace[k], rec.purity[k], rec.energy[k], rec.edge_population[k] = t, pur, en, edge
            if edge > edge_abort:
                raise TruncationError(kick_index, edge)
            if edge > edge_warn and not warned:
                rec.warnings.append(
                    f"truncation warning: edge population {edge:.3e} at kick {kick_index}"
                )
                warned = True
            if k in snaps:
                dm = DensityMatrix(data=data.copy(), params=self.params, kick=kick_index)
                for sink in sinks:
                    sink(kick_index, dm)
            if k < n_kicks:
                data = self.period_step(data, hermitian=True)
        rec.final = DensityMatrix(data=data, params=self.params, kick=rho.kick + n_kicks)
        return rec


def steady_state_detect(history, window=20, tol=1e-3):
    """Earliest index whose length-``window`` trailing view is flat to ``tol``.

    Flat means every value in the window deviates from the window mean by at
    most ``tol`` relative to the mean's magnitude.  Returns None if no such
    window exists; the history must cover at least two windows.
    """
    h = np.asarray(history, dtype=float)
    if h.size < 2 * window:
        raise ValueError(f"history length {h.size} < 2*window = {2 * window}")
    for i in range(h.size - window + 1):
        seg = h[i : i + window]
        m = seg.mean()
        scale = max(abs(m), np.finfo(float).tiny)
        if np.abs(seg - m).max() <= tol * scale:
            return i
    return None


def basis_sufficiency(params: SystemParams):
    """Check N*hbar against 1.5x the predicted saturation energy.

    The dissipative balance bounds the momentum spread by roughly
    q*K/sqrt(2*gamma); the basis should hold half that squared with margin.
    Returns (ok, message).
    """
    if params.kick_K == 0.0:
        return True, "no kicks; any basis suffices"
    if params.gamma == 0.0:
        return False, "gamma = 0: diffusive growth is unbounded, basis_N cannot hold the state"
    dp = params.q * params.kick_K / math.sqrt(2.0 * params.gamma)
    needed = 1.5 * dp**2 / 2.0
    have = params.basis_N * params.hbar
    if have >= needed:
        return True, f"N*hbar = {have:.4g} >= {needed:.4g}"
    return False, (
        f"N*hbar = {have:.4g} below 1.5*(qK/sqrt(2 gamma))^2/2 = {needed:.4g}; "
        "expect truncation (--force to proceed)"
    )


# -- density-matrix snapshot format ---------------------------------------


def write_snapshot(path, dm: DensityMatrix):
    """Binary snapshot: magic, version, N, (hbar q K gamma T), kick, row-major
    (re, im) float64 pairs, all little-endian."""
    p = dm.params
    header = struct.pack(
        "<4sHI5dQ",
        _SNAPSHOT_MAGIC,
        _SNAPSHOT_VERSION,
        p.basis_N,
        p.hbar,
        p.q,
        p.kick_K,
        p.gamma,
        p.period_T,
        dm.kick,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dm.data, dtype="<c16").tobytes())


def read_snapshot(path) -> DensityMatrix:
    head_size = struct.calcsize("<4sHI5dQ")
    with open(path, "rb") as fh:
        head = fh.read(head_size)
        magic, version, n, hbar, q, kick_K, gamma, period_T, kick = struct.unpack(
            "<4sHI5dQ", head
        )
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a density-matrix snapshot (bad magic {magic!r})")
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        payload = fh.read(16 * n * n)
    data = np.frombuffer(payload, dtype="<c16").reshape(n, n).copy()
    params = SystemParams(
        hbar=hbar, q=q, kick_K=kick_K, gamma=gamma, period_T=period_T, basis_N=int(n)
    )
    return DensityMatrix(data=data, params=params, kick=int(kick))
