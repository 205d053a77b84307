"""Model and run parameters: validation, unit conversion, config parsing.

Every other module takes its numbers from here.  The dimensionless model is a
unit-mass, unit-frequency oscillator with friction coefficient ``2*gamma`` and
periodic cosine kicks of amplitude ``kick_K`` and wavenumber ``q``; ``hbar`` is
the dimensionless Planck constant of the quantized version and ``basis_N`` the
Fock-space truncation.  Two derived combinations recur everywhere: the chaos
parameter ``K_cl = kick_K * q**2`` of the equivalent q=1 classical map, and the
effective Planck constant ``hbar_eff = hbar * q**2`` of the equivalent q=1
quantum system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields


class ParamError(ValueError):
    """Raised when a parameter set violates its validity domain."""


class ConfigError(ValueError):
    """Raised on malformed run-config text; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless model parameters.

    Attributes
    ----------
    hbar : float
        Effective Planck constant, > 0.
    q : float
        Kick wavenumber, > 0.
    kick_K : float
        Kick amplitude K, >= 0.
    gamma : float
        Dissipation rate, 0 <= gamma < 1 (underdamped regime only).
    period_T : float
        Time between kicks; defaults to pi/2 (four kicks per oscillator turn).
    basis_N : int
        Fock truncation size, >= 2.
    """

    hbar: float = 1.0
    q: float = 1.0
    kick_K: float = 0.0
    gamma: float = 0.0
    period_T: float = math.pi / 2
    basis_N: int = 2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ParamError(f"{f.name} must be finite, got {v!r}")
        if self.hbar <= 0:
            raise ParamError(f"hbar must be positive, got {self.hbar}")
        if self.q <= 0:
            raise ParamError(f"q must be positive, got {self.q}")
        if self.kick_K < 0:
            raise ParamError(f"K must be nonnegative, got {self.kick_K}")
        if self.gamma < 0:
            raise ParamError(f"gamma must be nonnegative, got {self.gamma}")
        if self.gamma >= 1:
            raise ParamError("overdamped regime unsupported (gamma must be < 1)")
        if self.period_T <= 0:
            raise ParamError(f"T must be positive, got {self.period_T}")
        if not isinstance(self.basis_N, int) or self.basis_N < 2:
            raise ParamError(f"N must be an integer >= 2, got {self.basis_N!r}")

    @property
    def k_cl(self):
        """Classical chaos parameter of the equivalent q=1 map."""
        return self.kick_K * self.q**2

    @property
    def hbar_eff(self):
        """Effective Planck constant of the equivalent q=1 quantum system."""
        return self.hbar * self.q**2

    @property
    def omega(self):
        """Damped oscillation frequency sqrt(1 - gamma^2)."""
        return math.sqrt(1.0 - self.gamma**2)

    @property
    def k_over_hbar(self):
        """Kick phase amplitude K/hbar (number of kick quanta)."""
        return self.kick_K / self.hbar


def validate_params(hbar, q, kick_K, gamma, period_T=None, basis_N=2) -> SystemParams:
    """Build a SystemParams from raw numbers, filling period_T = pi/2 if absent."""
    if period_T is None:
        period_T = math.pi / 2
    return SystemParams(
        hbar=float(hbar),
        q=float(q),
        kick_K=float(kick_K),
        gamma=float(gamma),
        period_T=float(period_T),
        basis_N=int(basis_N),
    )


def rescale_to_unit_q(p: SystemParams) -> SystemParams:
    """Equivalent parameter set at q=1.

    Classically the map with (K, q) is identical to the q=1 map with
    K -> K*q^2 after rescaling coordinates (x, p) -> (q*x, q*p); quantum
    mechanically the same rescaling sends hbar -> hbar*q^2.  Both transforms
    are applied together, which leaves K/hbar invariant, so the returned set
    drives the same physics in rescaled coordinates.  Idempotent at q=1.
    """
    if p.q == 1.0:
        return p
    return SystemParams(
        hbar=p.hbar_eff,
        q=1.0,
        kick_K=p.k_cl,
        gamma=p.gamma,
        period_T=p.period_T,
        basis_N=p.basis_N,
    )


@dataclass(frozen=True)
class FluxoniumParams:
    """Circuit energies (one common frequency unit) and kick-pulse duration."""

    E_C: float
    E_L: float
    E_J: float
    pulse_dt: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise ParamError(f"{f.name} must be positive and finite, got {v!r}")


def fluxonium_to_dimensionless(fp: FluxoniumParams):
    """Convert circuit parameters to oscillator units.

    Returns
    -------
    omega : float
        Harmonic frequency 2*sqrt(2*E_C*E_L) of the inductor-capacitor mode.
    k_over_hbar : float
        Kick phase amplitude K/hbar = E_J*pulse_dt / omega.
    """
    omega = 2.0 * math.sqrt(2.0 * fp.E_C * fp.E_L)
    kick_J = fp.E_J * fp.pulse_dt
    return omega, kick_J / omega


# -- run configuration ---------------------------------------------------

_CONFIG_DEFAULTS = {
    "T": math.pi / 2,
    "n_kicks": 0,
    "x0": 0.0,
    "p0": 0.0,
    "grid_L": 40.0,
    "grid_M": 128,
    "ensemble": 100_000,
    "seed": 0,
    "out_dir": "runs",
    "snapshot_every": 0,
}

_REQUIRED_KEYS = ("hbar", "q", "K", "gamma", "N")

_INT_KEYS = {"N", "n_kicks", "grid_M", "ensemble", "seed", "snapshot_every"}
_FLOAT_KEYS = {"hbar", "q", "K", "gamma", "T", "x0", "p0", "grid_L"}
_STR_KEYS = {"out_dir"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: model parameters plus every execution knob.

    ``snapshot_every = 0`` selects the default cadence (every kick up to
    kick 60, then every 10th).  Identical configs with identical seeds must
    reproduce outputs bit-exactly; the manifest echoes all fields.
    """

    params: SystemParams
    n_kicks: int = 0
    x0: float = 0.0
    p0: float = 0.0
    grid_L: float = 40.0
    grid_M: int = 128
    ensemble: int = 100_000
    seed: int = 0
    out_dir: str = "runs"
    snapshot_every: int = 0

    def __post_init__(self):
        if self.n_kicks < 0:
            raise ParamError(f"n_kicks must be >= 0, got {self.n_kicks}")
        if self.ensemble < 1:
            raise ParamError(f"ensemble must be >= 1, got {self.ensemble}")
        if self.grid_L <= 0:
            raise ParamError(f"grid_L must be positive, got {self.grid_L}")
        if self.grid_M < 2:
            raise ParamError(f"grid_M must be >= 2, got {self.grid_M}")
        if not 0 <= self.seed < 2**64:
            raise ParamError("seed must fit in 64 bits")
        if self.snapshot_every < 0:
            raise ParamError("snapshot_every must be >= 0")


def parse_run_config(text: str) -> RunConfig:
    """Parse ``key = value`` config text ('#' starts a comment).

    Unknown and duplicated keys are rejected; errors name the offending line.
    """
    seen: dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}", line_no)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", line_no)
        if not value:
            raise ConfigError(f"empty value for {key!r}", line_no)
        if key in _STR_KEYS:
            seen[key] = value
        elif key in _INT_KEYS:
            try:
                seen[key] = int(value)
            except ValueError:
                raise ConfigError(f"malformed integer for {key!r}: {value!r}", line_no) from None
        else:
            try:
                seen[key] = float(value)
            except ValueError:
                raise ConfigError(f"malformed number for {key!r}: {value!r}", line_no) from None

    missing = [k for k in _REQUIRED_KEYS if k not in seen]
    if missing:
        raise ConfigError(f"missing mandatory key(s): {', '.join(missing)}")
    for key, default in _CONFIG_DEFAULTS.items():
        seen.setdefault(key, default)

    params = validate_params(
        hbar=seen["hbar"],
        q=seen["q"],
        kick_K=seen["K"],
        gamma=seen["gamma"],
        period_T=seen["T"],
        basis_N=seen["N"],
    )
    return RunConfig(
        params=params,
        n_kicks=seen["n_kicks"],
        x0=seen["x0"],
        p0=seen["p0"],
        grid_L=seen["grid_L"],
        grid_M=seen["grid_M"],
        ensemble=seen["ensemble"],
        seed=seen["seed"],
        out_dir=seen["out_dir"],
        snapshot_every=seen["snapshot_every"],
    )


def serialize_run_config(cfg: RunConfig) -> str:
    """Inverse of parse_run_config; floats use repr so round-trips are exact."""
    p = cfg.params
    items = [
        ("hbar", p.hbar),
        ("q", p.q),
        ("K", p.kick_K),
        ("gamma", p.gamma),
        ("T", p.period_T),
        ("N", p.basis_N),
        ("n_kicks", cfg.n_kicks),
        ("x0", cfg.x0),
        ("p0", cfg.p0),
        ("grid_L", cfg.grid_L),
        ("grid_M", cfg.grid_M),
        ("ensemble", cfg.ensemble),
        ("seed", cfg.seed),
        ("out_dir", cfg.out_dir),
        ("snapshot_every", cfg.snapshot_every),
    ]
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in items)
