"""Everything measured on states and evolutions.

Phase-space distributions (coherent-state diagonal of rho, normalized so the
grid integrates to one), spectral decompositions with pair splittings,
entanglement entropy, the virtual-qubit negativity built from four evolved
coherence blocks, and scalar diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .grids import PhaseGrid
from .lindblad import DensityMatrix, LindbladEngine
from .fock import coherent_amplitudes
from .params import SystemParams


def _coherent_amp_matrix(alphas, N):
    """Columns of coherent amplitudes for an array of labels alpha (log-space)."""
    ns = np.arange(N, dtype=float)
    half_lf = 0.5 * gammaln(ns + 1.0)
    absa = np.abs(alphas)
    ang = np.angle(alphas)
    safe = np.where(absa > 0.0, absa, 1.0)
    log_mag = ns[:, None] * np.log(safe)[None, :] - half_lf[:, None] - (absa**2 / 2.0)[None, :]
    c = np.exp(log_mag + 1j * ns[:, None] * ang[None, :])
    zero = absa == 0.0
    if zero.any():
        c[:, zero] = 0.0
        c[0, zero] = 1.0
    return c


def husimi_grid(state, grid_spec, params: SystemParams, chunk=4096) -> PhaseGrid:
    """Phase-space distribution <alpha| rho |alpha> / (2 pi hbar) on cell centers.

    ``state`` may be a DensityMatrix, a raw Hermitian matrix, or a state
    vector (rank-one fast path, used to render eigenvectors).  The label
    convention alpha = (x + i p)/sqrt(2 hbar) makes the axes coincide with the
    classical (x, p) plane, and the normalization makes the full-plane
    integral equal the trace.
    """
    if isinstance(state, DensityMatrix):
        op = state.data
    else:
        op = np.asarray(state, dtype=complex)
    vector_input = op.ndim == 1
    N = op.shape[0]
    m_x, m_p = grid_spec["m_x"], grid_spec["m_p"]
    dx = (grid_spec["x_max"] - grid_spec["x_min"]) / m_x
    dp = (grid_spec["p_max"] - grid_spec["p_min"]) / m_p
    xs = grid_spec["x_min"] + dx * (np.arange(m_x) + 0.5)
    ps = grid_spec["p_min"] + dp * (np.arange(m_p) + 0.5)
    scale = 1.0 / math.sqrt(2.0 * params.hbar)
    alphas = (xs[None, :] + 1j * ps[:, None]).ravel() * scale  # row-major over (p, x)

    values = np.empty(alphas.size)
    for start in range(0, alphas.size, chunk):
        block = alphas[start : start + chunk]
        c = _coherent_amp_matrix(block, N)
        if vector_input:
            amp = c.conj().T @ op
            values[start : start + chunk] = np.abs(amp) ** 2
        else:
            w = op @ c
            values[start : start + chunk] = np.einsum("nc,nc->c", c.conj(), w).real
    values /= 2.0 * math.pi * params.hbar

    floor = values.min()
    if floor < -1e-6:
        raise ValueError(f"state is far from positive: Husimi value {floor:.3e}")
    np.maximum(values, 0.0, out=values)
    return PhaseGrid(
        x_min=grid_spec["x_min"],
        x_max=grid_spec["x_max"],
        p_min=grid_spec["p_min"],
        p_max=grid_spec["p_max"],
        m_x=m_x,
        m_p=m_p,
        values=values.reshape(m_p, m_x),
    )


@dataclass(frozen=True)
class SpectrumResult:
    """Descending eigenvalues of rho with the top eigenvectors, stamped by kick."""

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)  # shape (N, k_top)
    kick: int = 0

    @property
    def k_top(self):
        return self.eigenvectors.shape[1]


def spectrum(dm: DensityMatrix, k_top=8) -> SpectrumResult:
    data = 0.5 * (dm.data + dm.data.conj().T)
    try:
        w, v = np.linalg.eigh(data)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed on rho at kick {dm.kick} (N={data.shape[0]})") from exc
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    k = min(k_top, w.size)
    return SpectrumResult(eigenvalues=w, eigenvectors=v[:, :k].copy(), kick=dm.kick)


def pair_splittings(sr: SpectrumResult):
    """Differences within the three leading eigenvalue pairs."""
    w = sr.eigenvalues
    if w.size < 6:
        raise ValueError("need at least 6 eigenvalues for pair splittings")
    return (float(w[0] - w[1]), float(w[2] - w[3]), float(w[4] - w[5]))


def entanglement_entropy(sr) -> float:
    """-sum lambda ln lambda over positive eigenvalues (natural log)."""
    w = sr.eigenvalues if isinstance(sr, SpectrumResult) else np.asarray(sr, dtype=float)
    w = w[w > 0.0]
    return float(-np.sum(w * np.log(w)))


def mean_energy(dm, params: SystemParams) -> float:
    """hbar * sum_n rho_nn (n + 1/2)."""
    data = dm.data if isinstance(dm, DensityMatrix) else np.asarray(dm)
    diag = data.diagonal().real
    ns = np.arange(diag.size)
    return float(params.hbar * np.sum(diag * (ns + 0.5)))


def purity_trace_diagnostics(dm: DensityMatrix):
    """(trace, purity, min eigenvalue, edge population) for manifests and aborts."""
    data = dm.data
    n = data.shape[0]
    trace = float(data.trace().real)
    purity = float(np.vdot(data, data).real)
    min_eig = float(np.linalg.eigvalsh(0.5 * (data + data.conj().T))[0])
    edge = float(data.diagonal().real[int(math.floor(0.9 * n)) + 1 :].sum())
    return trace, purity, min_eig, edge


def grid_correlation(ga: PhaseGrid, gb: PhaseGrid) -> float:
    """Pearson correlation over cells of two geometrically identical grids."""
    if not ga.same_geometry(gb):
        raise ValueError("grids have different extents or resolutions")
    a = ga.values.ravel()
    b = gb.values.ravel()
    if a.std() == 0.0 or b.std() == 0.0:
        return 0.0  # a flat grid carries no structure to correlate with
    return float(np.corrcoef(a, b)[0, 1])


@dataclass(frozen=True)
class NegativityAssembly:
    """The four evolved coherence blocks and their partially transposed join."""

    block_aa: np.ndarray = field(repr=False)
    block_ab: np.ndarray = field(repr=False)
    block_ba: np.ndarray = field(repr=False)
    block_bb: np.ndarray = field(repr=False)
    assembled: np.ndarray = field(repr=False)
    negativity: float = 0.0


def assemble_negativity(aa, ab, ba, bb, herm_tol=1e-8) -> NegativityAssembly:
    """Join the four blocks under the oscillator-side partial transpose.

    Each block is transposed in the oscillator indices while the virtual-qubit
    labels stay in place; the result must come out Hermitian, otherwise the
    four block evolutions have drifted apart (ba != ab^dagger) and the run is
    aborted.
    """
    n = aa.shape[0]
    m = np.empty((2 * n, 2 * n), dtype=complex)
    m[:n, :n] = aa.T
    m[:n, n:] = ab.T
    m[n:, :n] = ba.T
    m[n:, n:] = bb.T
    m *= 0.5
    defect = float(np.abs(m - m.conj().T).max())
    if defect > herm_tol:
        raise RuntimeError(
            f"negativity assembly lost Hermiticity (defect {defect:.3e}); "
            "coherence blocks evolved inconsistently"
        )
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    neg = float(abs(w[w < 0.0].sum()))
    return NegativityAssembly(
        block_aa=aa, block_ab=ab, block_ba=ba, block_bb=bb, assembled=m, negativity=neg
    )


@dataclass
class NegativityResult:
    kicks: np.ndarray
    values: np.ndarray
    overlap: float
    warnings: list


def evolve_negativity(
    alpha_xp,
    beta_xp,
    params: SystemParams,
    n_kicks,
    sample_kicks=None,
    engine: LindbladEngine | None = None,
) -> NegativityResult:
    """Negativity of the virtual qubit entangled with two coherent labels.

    The pure start (|g0 alpha> + |g1 beta>)/sqrt(2) is represented by its four
    oscillator blocks, each pushed independently through the full period map
    (the off-diagonal blocks are not Hermitian); at every sample kick the
    partially transposed join is diagonalized and the magnitude of its total
    negative weight recorded.  The 1/sqrt(2) normalization assumes nearly
    orthogonal labels, so a non-negligible overlap is reported as a warning.
    """
    if engine is None:
        engine = LindbladEngine(params)
    if sample_kicks is None:
        sample_kicks = list(range(n_kicks + 1))
    sample_set = set(int(k) for k in sample_kicks)
    if sample_set and max(sample_set) > n_kicks:
        raise ValueError("sample kick beyond the evolution horizon")

    a = coherent_amplitudes(alpha_xp[0], alpha_xp[1], params.hbar, params.basis_N)
    b = coherent_amplitudes(beta_xp[0], beta_xp[1], params.hbar, params.basis_N)
    overlap = float(abs(np.vdot(a, b)))
    warnings = []
    if overlap > 1e-6:
        warnings.append(
            f"label overlap |<alpha|beta>| = {overlap:.3e} exceeds 1e-6; "
            "the 1/sqrt(2) normalization is only approximate"
        )

    blocks = [np.outer(a, a.conj()), np.outer(a, b.conj()), np.outer(b, a.conj()), np.outer(b, b.conj())]
    hermitian_flags = (True, False, False, True)
    kicks_out = []
    values = []
    edge_start = int(math.floor(0.9 * params.basis_N)) + 1
    edge_warned = False
    for k in range(n_kicks + 1):
        if k in sample_set:
            asm = assemble_negativity(*blocks)
            kicks_out.append(k)
            values.append(asm.negativity)
        if not edge_warned:
            edge = max(
                float(blocks[0].diagonal().real[edge_start:].sum()),
                float(blocks[3].diagonal().real[edge_start:].sum()),
            )
            if edge > 1e-3:
                warnings.append(f"truncation warning: block edge population {edge:.3e} at kick {k}")
                edge_warned = True
        if k < n_kicks:
            blocks = [
                engine.period_step(blk, hermitian=h) for blk, h in zip(blocks, hermitian_flags)
            ]
    return NegativityResult(
        kicks=np.asarray(kicks_out), values=np.asarray(values), overlap=overlap, warnings=warnings
    )
