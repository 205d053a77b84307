"""Command-line orchestration: one subcommand per experiment family.

Every run resolves a config file, executes, and writes its artifacts plus a
manifest that echoes the config and checksums every emitted file.  Identical
config + seed reproduces every checksummed output byte for byte; wall-clock
stamps live only in the manifest itself.

Exit codes: 0 success, 2 config error, 3 numerical abort, 4 oracle failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import classical, observables
from .fock import cos_matrix, cos_element_quadrature
from .grids import square_grid_spec, write_grid_csv, write_grid_pgm
from .lindblad import (
    ChannelCache,
    DensityMatrix,
    LindbladEngine,
    TruncationError,
    basis_sufficiency,
    damping_channel,
    damping_channel_rk,
    steady_state_detect,
    write_snapshot,
)
from .params import ConfigError, ParamError, RunConfig, parse_run_config, serialize_run_config


def _utc_now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Echo of the resolved run plus checksums of everything it wrote."""

    command: str
    cfg: RunConfig
    started_at: str = field(default_factory=_utc_now)
    warnings: list = field(default_factory=list)
    files: list = field(default_factory=list)  # (relname, sha256)
    results: list = field(default_factory=list)  # (key, value) scalar summary lines

    def add_file(self, out_dir, relname):
        self.files.append((relname, _sha256(os.path.join(out_dir, relname))))

    def write(self, out_dir, name="manifest.txt"):
        lines = [f"command = {self.command}", f"tool_version = {__version__}"]
        lines += [f"started_at = {self.started_at}", f"finished_at = {_utc_now()}"]
        lines += serialize_run_config(self.cfg).rstrip("\n").split("\n")
        lines += [f"result_{k} = {v}" for k, v in self.results]
        lines += [f"warning_{i} = {w}" for i, w in enumerate(self.warnings)]
        lines += [f"file_{i} = {digest}  {rel}" for i, (rel, digest) in enumerate(self.files)]
        path = os.path.join(out_dir, name)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
        return path


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join("%d" % v if isinstance(v, (int, np.integer)) else "%.17g" % v for v in row))
            fh.write("\n")


def _load(args) -> tuple[RunConfig, str]:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_run_config(fh.read())
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = args.out if args.out else cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    return cfg, out_dir


# -- subcommands -----------------------------------------------------------


def cmd_classical(args) -> int:
    cfg, out_dir = _load(args)
    p = cfg.params
    manifest = RunManifest("classical", cfg)
    discard = classical.default_discard(p.gamma)
    if cfg.n_kicks <= discard:
        raise ConfigError(
            f"n_kicks = {cfg.n_kicks} does not outlast the transient ({discard}); increase it"
        )
    ens = classical.initial_ensemble(cfg.x0, cfg.p0, cfg.ensemble, cfg.seed)

    series = []

    def collect(step, x, p_arr):
        e = float(np.mean((x * x + p_arr * p_arr) / 2.0))
        series.append((step + 1, e, float(np.std(x)), float(np.std(p_arr))))

    final = classical.evolve_ensemble(ens, p, cfg.n_kicks, discard=0, collect=collect)
    _write_csv(os.path.join(out_dir, "timeseries.csv"), "step,E,dx,dp", series)
    manifest.add_file(out_dir, "timeseries.csv")

    grid = classical.accumulate_histogram(
        ens, p, cfg.n_kicks, square_grid_spec(cfg.grid_L, cfg.grid_M), discard=discard
    )
    write_grid_csv(grid, os.path.join(out_dir, "attractor.csv"))
    write_grid_pgm(grid, os.path.join(out_dir, "attractor.pgm"))
    manifest.add_file(out_dir, "attractor.csv")
    manifest.add_file(out_dir, "attractor.pgm")

    seed_pt = (cfg.x0, cfg.p0) if (cfg.x0, cfg.p0) != (0.0, 0.0) else (3.1, 0.7)
    lr = classical.lyapunov_spectrum(p, seed_point=seed_pt, n_steps=50_000)
    dims = classical.information_dimension(lr, p.gamma)
    e_mean, dx, dp = classical.energy_moments(final)
    with open(os.path.join(out_dir, "lyapunov.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"lambda1_per_time = {lr.lambda1!r}\n")
        fh.write(f"lambda2_per_time = {lr.lambda2!r}\n")
        fh.write(f"lambda1_per_kick = {lr.lambda1_per_kick!r}\n")
        fh.write(f"lambda2_per_kick = {lr.lambda2_per_kick!r}\n")
        fh.write(f"d_info = {dims.d_info!r}\n")
        fh.write(f"d_kaplan_yorke = {dims.d_kaplan_yorke!r}\n")
        fh.write(f"chaotic = {dims.chaotic}\n")
        fh.write(f"n_steps = {lr.n_steps}\n")
        fh.write(f"discarded = {lr.discarded}\n")
    manifest.add_file(out_dir, "lyapunov.txt")
    manifest.results += [
        ("overflow_mass", repr(grid.overflow_mass)),
        ("final_energy", repr(e_mean)),
        ("final_dx", repr(dx)),
        ("final_dp", repr(dp)),
    ]
    manifest.write(out_dir)
    return 0


def _husimi_sink(out_dir, grid_spec, params, manifest, prefix="husimi"):
    def sink(kick, dm):
        name = f"{prefix}_t{kick:06d}.csv"
        write_grid_csv(observables.husimi_grid(dm, grid_spec, params), os.path.join(out_dir, name))
        manifest.add_file(out_dir, name)

    return sink


def _check_basis(cfg, manifest, force):
    ok, msg = basis_sufficiency(cfg.params)
    if not ok:
        if not force:
            raise ConfigError(f"basis sufficiency check failed: {msg}")
        manifest.warnings.append(f"basis sufficiency overridden: {msg}")


def cmd_quantum(args) -> int:
    cfg, out_dir = _load(args)
    p = cfg.params
    manifest = RunManifest("quantum", cfg)
    _check_basis(cfg, manifest, args.force)
    engine = LindbladEngine(p)
    rho0 = DensityMatrix.coherent(cfg.x0, cfg.p0, p)
    grid_spec = square_grid_spec(cfg.grid_L, cfg.grid_M)
    rec = engine.evolve(
        rho0,
        cfg.n_kicks,
        snapshot_every=cfg.snapshot_every,
        sinks=[_husimi_sink(out_dir, grid_spec, p, manifest)],
    )
    manifest.warnings.extend(rec.warnings)
    _write_csv(
        os.path.join(out_dir, "diagnostics.csv"),
        "step,trace,purity,energy,edge_pop",
        zip(rec.kicks, rec.trace, rec.purity, rec.energy, rec.edge_population),
    )
    manifest.add_file(out_dir, "diagnostics.csv")
    write_snapshot(os.path.join(out_dir, "rho_final.kflx"), rec.final)
    manifest.add_file(out_dir, "rho_final.kflx")
    detect = None
    if rec.energy.size >= 40:
        detect = steady_state_detect(rec.energy, window=20, tol=1e-3)
    manifest.results.append(("steady_kick", str(detect)))
    manifest.write(out_dir)
    return 0


def cmd_spectrum(args) -> int:
    cfg, out_dir = _load(args)
    p = cfg.params
    manifest = RunManifest("spectrum", cfg)
    _check_basis(cfg, manifest, args.force)
    engine = LindbladEngine(p)
    rho0 = DensityMatrix.coherent(cfg.x0, cfg.p0, p)
    grid_spec = square_grid_spec(cfg.grid_L, cfg.grid_M)
    k_top = 8
    spec_rows, split_rows, ent_rows = [], [], []

    def sink(kick, dm):
        sr = observables.spectrum(dm, k_top=k_top)
        spec_rows.append((kick, *sr.eigenvalues[:k_top]))
        split_rows.append((kick, *observables.pair_splittings(sr)))
        ent_rows.append((kick, observables.entanglement_entropy(sr)))
        name = f"husimi_top_t{kick:06d}.csv"
        write_grid_csv(
            observables.husimi_grid(sr.eigenvectors[:, 0], grid_spec, p),
            os.path.join(out_dir, name),
        )
        manifest.add_file(out_dir, name)

    rec = engine.evolve(rho0, cfg.n_kicks, snapshot_every=cfg.snapshot_every, sinks=[sink])
    manifest.warnings.extend(rec.warnings)
    _write_csv(
        os.path.join(out_dir, "spectrum.csv"),
        "t," + ",".join(f"lambda{i}" for i in range(k_top)),
        spec_rows,
    )
    _write_csv(os.path.join(out_dir, "splittings.csv"), "t,split01,split23,split45", split_rows)
    _write_csv(os.path.join(out_dir, "entropy.csv"), "t,value", ent_rows)
    for name in ("spectrum.csv", "splittings.csv", "entropy.csv"):
        manifest.add_file(out_dir, name)
    manifest.write(out_dir)
    return 0


def cmd_negativity(args) -> int:
    cfg, out_dir = _load(args)
    p = cfg.params
    manifest = RunManifest("negativity", cfg)
    _check_basis(cfg, manifest, args.force)
    alpha = (cfg.x0, cfg.p0)
    beta = (-cfg.x0, -cfg.p0)
    res = observables.evolve_negativity(alpha, beta, p, cfg.n_kicks)
    manifest.warnings.extend(res.warnings)
    _write_csv(os.path.join(out_dir, "negativity.csv"), "t,value", zip(res.kicks, res.values))
    manifest.add_file(out_dir, "negativity.csv")
    manifest.results.append(("label_overlap", repr(res.overlap)))
    manifest.write(out_dir)
    return 0


# -- crosscheck oracle suite ------------------------------------------------


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""


def check_cos_vs_quadrature(max_nm=16) -> CheckResult:
    worst = 0.0
    for q, hbar in ((0.4, 1.0), (1.0, 1.0)):
        c = cos_matrix(max_nm + 1, q, hbar)
        for n in range(0, max_nm, 3):
            for m in range(0, max_nm - n, 2):
                ref = cos_element_quadrature(n, m, q, hbar)
                worst = max(worst, abs(c.data[n, n + m] - ref))
    return CheckResult("cos_matrix_vs_quadrature", worst, 1e-10, worst <= 1e-10)


def check_channel_vs_rk(n=32, seed=7) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    t = math.pi / 2
    for gamma in (0.05, 0.2):
        cache = ChannelCache.build(gamma, t, n)
        for _ in range(3):
            op = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            op = 0.5 * (op + op.conj().T)
            diff = damping_channel(op, cache) - damping_channel_rk(op, gamma, t)
            worst = max(worst, float(np.linalg.norm(diff)))
    return CheckResult("damping_channel_vs_rk4", worst, 1e-6, worst <= 1e-6)


def check_map_vs_ode(n_points=100, seed=3) -> CheckResult:
    from scipy.integrate import solve_ivp

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        gamma = rng.uniform(0.0, 0.6)
        t_span = rng.uniform(0.3, 2.5)
        x0, p0 = rng.uniform(-5, 5, 2)
        got = classical.free_dissipative_step((x0, p0), gamma, t_span)
        sol = solve_ivp(
            lambda t, y: [y[1], -2.0 * gamma * y[1] - y[0]],
            (0.0, t_span),
            [x0, p0],
            method="DOP853",
            rtol=1e-12,
            atol=1e-13,
        )
        worst = max(worst, abs(got.x - sol.y[0, -1]), abs(got.p - sol.y[1, -1]))
    return CheckResult("free_map_vs_ode", worst, 1e-10, worst <= 1e-10)


def check_quantum_classical(threshold=0.9) -> CheckResult:
    from .params import SystemParams

    p = SystemParams(hbar=1.0, q=1.0, kick_K=6.0, gamma=0.2, basis_N=256)
    engine = LindbladEngine(p)
    data = DensityMatrix.coherent(5.0, 1.0, p).data
    for _ in range(120):
        data = engine.period_step(data, hermitian=True)
    dm = DensityMatrix(data=data, params=p, kick=120)
    spec = square_grid_spec(16.0, 64)
    hgrid = observables.husimi_grid(dm, spec, p)
    ens = classical.initial_ensemble(5.0, 1.0, 20_000, seed=11)
    cgrid = classical.accumulate_histogram(ens, p, 400, spec, discard=100)
    r = observables.grid_correlation(hgrid, cgrid)
    return CheckResult("quantum_classical_correlation", r, threshold, r >= threshold, "pearson r")


def run_crosschecks(qc_threshold=0.9):
    return [
        check_cos_vs_quadrature(),
        check_channel_vs_rk(),
        check_map_vs_ode(),
        check_quantum_classical(qc_threshold),
    ]


def cmd_crosscheck(args) -> int:
    cfg, out_dir = _load(args)
    manifest = RunManifest("crosscheck", cfg)
    results = run_crosschecks(args.qc_threshold)
    lines = []
    for r in results:
        verdict = "PASS" if r.passed else "FAIL"
        lines.append(f"{verdict}  {r.name}  value={r.value:.3e}  tol={r.tol:.3e}")
        print(lines[-1])
    with open(os.path.join(out_dir, "crosscheck.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    manifest.add_file(out_dir, "crosscheck.txt")
    manifest.write(out_dir)
    return 0 if all(r.passed for r in results) else 4


# -- entry point -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="kfx", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "classical": cmd_classical,
        "quantum": cmd_quantum,
        "spectrum": cmd_spectrum,
        "negativity": cmd_negativity,
        "crosscheck": cmd_crosscheck,
    }
    for name, handler in handlers.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run config file (key = value lines)")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--force", action="store_true", help="skip the basis sufficiency gate")
        if name == "crosscheck":
            sp.add_argument(
                "--qc-threshold",
                type=float,
                default=0.9,
                help="required quantum-classical Pearson correlation",
            )
        sp.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ParamError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, classical.TrajectoryOverflowError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
