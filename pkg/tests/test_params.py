import math

import pytest
from hypothesis import given, settings, strategies as st

from kfx.params import (
    ConfigError,
    FluxoniumParams,
    ParamError,
    RunConfig,
    SystemParams,
    fluxonium_to_dimensionless,
    parse_run_config,
    rescale_to_unit_q,
    serialize_run_config,
    validate_params,
)

MINIMAL = "hbar = 1\nq = 1\nK = 2\ngamma = 0.1\nN = 32\n"


def test_validate_paper_scale_parameters():
    p = validate_params(hbar=1, q=0.4, kick_K=40, gamma=0.05, basis_N=2000)
    assert p.k_cl == pytest.approx(6.4, abs=1e-12)
    assert p.hbar_eff == pytest.approx(0.16, abs=1e-12)
    assert p.period_T == math.pi / 2  # default fill


def test_validate_desk_scale_parameters():
    p = validate_params(hbar=1, q=1, kick_K=8, gamma=0.01, basis_N=512)
    assert p.k_cl == 8.0
    assert p.hbar_eff == 1.0
    assert p.k_over_hbar == 8.0


def test_overdamped_rejected():
    with pytest.raises(ParamError, match="overdamped regime unsupported"):
        validate_params(hbar=1, q=1, kick_K=1, gamma=1.0, basis_N=8)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(hbar=-1, q=1, kick_K=1, gamma=0.1, basis_N=8),
        dict(hbar=1, q=-0.2, kick_K=1, gamma=0.1, basis_N=8),
        dict(hbar=1, q=1, kick_K=-3, gamma=0.1, basis_N=8),
        dict(hbar=1, q=1, kick_K=1, gamma=-0.1, basis_N=8),
        dict(hbar=1, q=1, kick_K=1, gamma=0.1, basis_N=1),
        dict(hbar=1, q=1, kick_K=1, gamma=0.1, period_T=0.0, basis_N=8),
        dict(hbar=float("nan"), q=1, kick_K=1, gamma=0.1, basis_N=8),
    ],
)
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ParamError):
        validate_params(**kwargs)


def test_omega_definition():
    p = validate_params(hbar=1, q=1, kick_K=0, gamma=0.6, basis_N=4)
    assert p.omega == pytest.approx(0.8)


def test_fluxonium_conversion_typical_energies():
    fp = FluxoniumParams(E_C=2.5, E_L=0.5, E_J=9.0, pulse_dt=0.01)
    omega, k_over_hbar = fluxonium_to_dimensionless(fp)
    assert omega == pytest.approx(2.0 * math.sqrt(2.5), rel=1e-12)
    assert k_over_hbar == pytest.approx(9.0 * 0.01 / omega, rel=1e-12)


def test_fluxonium_unit_frequency():
    fp = FluxoniumParams(E_C=0.125, E_L=0.125, E_J=3.0, pulse_dt=1.0)
    omega, _ = fluxonium_to_dimensionless(fp)
    assert omega == pytest.approx(0.5)  # 2*sqrt(2/64)


def test_fluxonium_kick_ratio_identity():
    fp = FluxoniumParams(E_C=0.125, E_L=1.0, E_J=2.0, pulse_dt=0.5)
    omega, k_over_hbar = fluxonium_to_dimensionless(fp)
    assert k_over_hbar == pytest.approx(1.0 / omega)


def test_fluxonium_rejects_nonpositive():
    with pytest.raises(ParamError):
        FluxoniumParams(E_C=0.0, E_L=1.0, E_J=1.0, pulse_dt=1.0)


def test_rescale_to_unit_q():
    p = validate_params(hbar=1, q=0.4, kick_K=40, gamma=0.05, basis_N=64)
    r = rescale_to_unit_q(p)
    assert r.q == 1.0
    assert r.kick_K == pytest.approx(6.4)
    assert r.hbar == pytest.approx(0.16)
    assert r.k_over_hbar == pytest.approx(p.k_over_hbar)  # invariant of the rescaling


def test_rescale_identity_at_unit_q():
    p = validate_params(hbar=2, q=1, kick_K=8, gamma=0.0, basis_N=4)
    assert rescale_to_unit_q(p) is p
    assert rescale_to_unit_q(rescale_to_unit_q(p)) == p


def test_rescale_arithmetic():
    p = validate_params(hbar=2, q=0.5, kick_K=8, gamma=0.0, basis_N=4)
    r = rescale_to_unit_q(p)
    assert r.kick_K == pytest.approx(2.0)
    assert r.hbar == pytest.approx(0.5)


def test_parse_minimal_config_fills_defaults():
    cfg = parse_run_config(MINIMAL)
    assert cfg.n_kicks == 0
    assert cfg.seed == 0
    assert cfg.params.period_T == math.pi / 2
    assert cfg.x0 == 0.0 and cfg.p0 == 0.0
    assert cfg.out_dir == "runs"


def test_parse_explicit_horizon_and_comments():
    cfg = parse_run_config(MINIMAL + "# horizon\nn_kicks = 1000  # steady state\n")
    assert cfg.n_kicks == 1000


def test_parse_duplicate_key_names_line():
    text = MINIMAL + "gamma = 0.2\n"
    with pytest.raises(ConfigError, match="line 6: duplicate key 'gamma'"):
        parse_run_config(text)


def test_parse_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_run_config(MINIMAL + "kappa = 3\n")


def test_parse_malformed_number_names_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_run_config("hbar = 1\nq = one\nK = 2\ngamma = 0.1\nN = 32\n")


def test_parse_missing_mandatory_key():
    with pytest.raises(ConfigError, match="missing mandatory"):
        parse_run_config("hbar = 1\nq = 1\n")


def test_parse_rejects_bad_line_shape():
    with pytest.raises(ConfigError, match="line 1"):
        parse_run_config("just words\n")


params_st = st.builds(
    SystemParams,
    hbar=st.floats(1e-3, 1e3),
    q=st.floats(1e-3, 1e2),
    kick_K=st.floats(0, 1e3),
    gamma=st.floats(0, 0.999),
    period_T=st.floats(1e-3, 50.0),
    basis_N=st.integers(2, 5000),
)


@settings(max_examples=60, deadline=None)
@given(
    params=params_st,
    n_kicks=st.integers(0, 10**6),
    x0=st.floats(-100, 100),
    p0=st.floats(-100, 100),
    grid_L=st.floats(0.1, 500),
    grid_M=st.integers(2, 4096),
    ensemble=st.integers(1, 10**7),
    seed=st.integers(0, 2**64 - 1),
    snapshot_every=st.integers(0, 1000),
)
def test_config_round_trip(params, n_kicks, x0, p0, grid_L, grid_M, ensemble, seed, snapshot_every):
    cfg = RunConfig(
        params=params,
        n_kicks=n_kicks,
        x0=x0,
        p0=p0,
        grid_L=grid_L,
        grid_M=grid_M,
        ensemble=ensemble,
        seed=seed,
        out_dir="some/dir",
        snapshot_every=snapshot_every,
    )
    assert parse_run_config(serialize_run_config(cfg)) == cfg


@settings(max_examples=60, deadline=None)
@given(params=params_st)
def test_rescale_idempotent_and_consistent(params):
    r = rescale_to_unit_q(params)
    assert rescale_to_unit_q(r) == r
    assert r.kick_K == pytest.approx(params.k_cl, rel=1e-12)
    assert r.hbar == pytest.approx(params.hbar_eff, rel=1e-12)
