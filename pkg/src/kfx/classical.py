"""Classical dissipative kicked-oscillator dynamics.

One period consists of the exact linear damped-oscillator flow over time T
(solution of dp/dt + 2*gamma*p + x = 0, dx/dt = p) followed by the momentum
kick p -> p - K*q*sin(q*x).  Single trajectories, tangent-map Lyapunov
spectra, ensemble evolution and attractor histograms all iterate this map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .grids import PhaseGrid
from .params import SystemParams


class TrajectoryOverflowError(RuntimeError):
    """A trajectory left the representable range; carries its ensemble index."""

    def __init__(self, index, step):
        super().__init__(f"trajectory {index} overflowed at step {step}")
        self.index = index
        self.step = step


class PhasePoint(NamedTuple):
    x: float
    p: float


@dataclass(frozen=True)
class Ensemble:
    """A bag of phase-space points with the seed that generated it."""

    points: np.ndarray  # shape (n, 2), columns (x, p)
    rng_seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


def initial_ensemble(x0, p0, size, seed) -> Ensemble:
    """Uniform disk of radius 1 around (x0, p0); the attractor forgets this."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, size)
    r = np.sqrt(rng.uniform(0.0, 1.0, size))
    pts = np.column_stack((x0 + r * np.cos(theta), p0 + r * np.sin(theta)))
    return Ensemble(points=pts, rng_seed=seed)


def flow_matrix(gamma, T) -> np.ndarray:
    """Exact linear propagator of the damped free oscillator over time T.

    Acting on (x, p):  x(T) = e^{-gT} [x cos wT + (p + g x) sin(wT)/w],
    p(T) = dx/dt(T), with w = sqrt(1 - g^2).  det = e^{-2 gamma T}.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must be in [0, 1)")
    w = math.sqrt(1.0 - gamma * gamma)
    decay = math.exp(-gamma * T)
    c = math.cos(w * T)
    s = math.sin(w * T)
    return decay * np.array(
        [
            [c + gamma * s / w, s / w],
            [-s / w, c - gamma * s / w],
        ]
    )


def free_dissipative_step(pt, gamma, T) -> PhasePoint:
    """Advance one point through the damped free flow for time T."""
    m = flow_matrix(gamma, T)
    x, p = pt
    return PhasePoint(m[0, 0] * x + m[0, 1] * p, m[1, 0] * x + m[1, 1] * p)


def kick_step(pt, kick_K, q) -> PhasePoint:
    x, p = pt
    return PhasePoint(x, p - kick_K * q * math.sin(q * x))


def period_map(pt, params: SystemParams) -> PhasePoint:
    """One full period: free damped propagation over T, then the kick."""
    mid = free_dissipative_step(pt, params.gamma, params.period_T)
    return kick_step(mid, params.kick_K, params.q)


def jacobian(pt, params: SystemParams) -> np.ndarray:
    """Exact tangent map of period_map at pt; det = e^{-2 gamma T} everywhere."""
    m = flow_matrix(params.gamma, params.period_T)
    x_mid = m[0, 0] * pt[0] + m[0, 1] * pt[1]
    shear = np.array(
        [
            [1.0, 0.0],
            [-params.kick_K * params.q**2 * math.cos(params.q * x_mid), 1.0],
        ]
    )
    return shear @ m


def _advance(points, m, kq, q, n_steps, after_step=None, start_step=0):
    """Vectorized in-place iteration of the period map over a (n, 2) array."""
    x = points[:, 0]
    p = points[:, 1]
    for step in range(start_step, start_step + n_steps):
        xn = m[0, 0] * x + m[0, 1] * p
        pn = m[1, 0] * x + m[1, 1] * p
        if kq != 0.0:
            pn -= kq * np.sin(q * xn)
        x, p = xn, pn
        if not (np.isfinite(x).all() and np.isfinite(p).all()):
            bad = np.flatnonzero(~(np.isfinite(x) & np.isfinite(p)))[0]
            raise TrajectoryOverflowError(int(bad), step)
        if after_step is not None:
            after_step(step, x, p)
    points[:, 0] = x
    points[:, 1] = p
    return points


def evolve_ensemble(
    ens: Ensemble,
    params: SystemParams,
    n_steps: int,
    discard: int = 0,
    collect: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> Ensemble:
    """Advance every point n_steps periods.

    ``collect(step, x, p)`` is invoked after each step with index >= discard,
    so accumulators never see the transient.  Overflow aborts with the index
    of the offending trajectory.
    """
    pts = ens.points.copy()
    hook = None
    if collect is not None:
        hook = lambda step, x, p: collect(step, x, p) if step >= discard else None
    _advance(pts, flow_matrix(params.gamma, params.period_T), params.kick_K * params.q, params.q, n_steps, hook)
    return Ensemble(points=pts, rng_seed=ens.rng_seed)


def default_discard(gamma) -> int:
    """Transient length before accumulating steady-state statistics."""
    if gamma <= 0:
        return 100
    return max(100, math.ceil(5.0 / gamma))


def accumulate_histogram(
    ens: Ensemble,
    params: SystemParams,
    n_steps: int,
    grid_spec: dict,
    discard: int | None = None,
) -> PhaseGrid:
    """Per-step occupancy histogram over post-transient iterates, unit mass.

    Out-of-extent samples are tallied into ``overflow_mass`` so that in-extent
    mass plus overflow is exactly 1.
    """
    if discard is None:
        discard = default_discard(params.gamma)
    if n_steps <= discard:
        raise ValueError(f"n_steps ({n_steps}) must exceed the transient ({discard})")
    m_x, m_p = grid_spec["m_x"], grid_spec["m_p"]
    x_edges = np.linspace(grid_spec["x_min"], grid_spec["x_max"], m_x + 1)
    p_edges = np.linspace(grid_spec["p_min"], grid_spec["p_max"], m_p + 1)
    counts = np.zeros((m_p, m_x))
    tally = {"in": 0, "total": 0}

    def collect(step, x, p):
        h, _, _ = np.histogram2d(x, p, bins=(x_edges, p_edges))
        counts[:, :] += h.T  # histogram2d puts x on axis 0; grid rows run over p
        tally["in"] += int(h.sum())
        tally["total"] += x.size

    evolve_ensemble(ens, params, n_steps, discard=discard, collect=collect)
    total = tally["total"]
    cell_area = ((x_edges[-1] - x_edges[0]) / m_x) * ((p_edges[-1] - p_edges[0]) / m_p)
    values = counts / (total * cell_area)
    overflow = (total - tally["in"]) / total
    return PhaseGrid(
        x_min=float(x_edges[0]),
        x_max=float(x_edges[-1]),
        p_min=float(p_edges[0]),
        p_max=float(p_edges[-1]),
        m_x=m_x,
        m_p=m_p,
        values=values,
        overflow_mass=float(overflow),
    )


@dataclass(frozen=True)
class LyapunovResult:
    """Both exponents per unit time; per-kick values are lambda * period_T."""

    lambda1: float
    lambda2: float
    n_steps: int
    discarded: int
    period_T: float
    reseeds: int = 0

    @property
    def lambda1_per_kick(self):
        return self.lambda1 * self.period_T

    @property
    def lambda2_per_kick(self):
        return self.lambda2 * self.period_T


def lyapunov_spectrum(
    params: SystemParams,
    seed_point=(3.1, 0.7),
    n_steps: int = 100_000,
    discard: int = 200,
    renorm_every: int = 10,
) -> LyapunovResult:
    """Both Lyapunov exponents from the iterated tangent map with QR renormalization."""
    m = flow_matrix(params.gamma, params.period_T)
    kq2 = params.kick_K * params.q**2
    kq = params.kick_K * params.q
    q = params.q
    x, p = float(seed_point[0]), float(seed_point[1])

    def step(x, p, tangent):
        x_mid = m[0, 0] * x + m[0, 1] * p
        p_mid = m[1, 0] * x + m[1, 1] * p
        if tangent is not None:
            tangent = m @ tangent
            tangent[1] -= kq2 * math.cos(q * x_mid) * tangent[0]
        return x_mid, p_mid - kq * math.sin(q * x_mid), tangent

    for _ in range(discard):
        x, p, _ = step(x, p, None)

    tangent = np.eye(2)
    logs = np.zeros(2)
    reseeds = 0
    done = 0
    while done < n_steps:
        chunk = min(renorm_every, n_steps - done)
        for _ in range(chunk):
            x, p, tangent = step(x, p, tangent)
        if not np.isfinite(tangent).all():
            raise TrajectoryOverflowError(0, done)
        tangent, r = np.linalg.qr(tangent)
        diag = np.abs(np.diag(r))
        if diag.min() <= 0.0:
            # collapsed tangent frame; restart it and note the event
            tangent = np.eye(2)
            reseeds += 1
        else:
            logs += np.log(diag)
        done += chunk

    per_time = logs / (n_steps * params.period_T)
    l1, l2 = float(max(per_time)), float(min(per_time))
    return LyapunovResult(
        lambda1=l1,
        lambda2=l2,
        n_steps=n_steps,
        discarded=discard,
        period_T=params.period_T,
        reseeds=reseeds,
    )


@dataclass(frozen=True)
class DimensionEstimate:
    """Two fractal-dimension estimates from the same measured spectrum.

    ``d_info`` is 2 - gamma/Lambda with Lambda the per-kick largest exponent
    (contraction-rate estimate of the information dimension); ``d_kaplan_yorke``
    is 1 + lambda1/|lambda2|, invariant under time rescaling.  The two need not
    agree and are both reported.  ``chaotic`` is False when lambda1 <= 0,
    i.e. there is no strange attractor.
    """

    d_info: float
    d_kaplan_yorke: float
    chaotic: bool


def information_dimension(lr: LyapunovResult, gamma) -> DimensionEstimate:
    if lr.lambda1 <= 0.0:
        return DimensionEstimate(float("nan"), float("nan"), chaotic=False)
    d_info = 2.0 - gamma / lr.lambda1_per_kick
    d_ky = 1.0 + lr.lambda1 / abs(lr.lambda2) if lr.lambda2 < 0 else 2.0
    return DimensionEstimate(d_info=d_info, d_kaplan_yorke=d_ky, chaotic=True)


def energy_moments(ens: Ensemble):
    """Mean energy <(p^2+x^2)/2> and the standard deviations of x and p."""
    x = ens.points[:, 0]
    p = ens.points[:, 1]
    e = float(np.mean((x * x + p * p) / 2.0))
    return e, float(np.std(x)), float(np.std(p))
