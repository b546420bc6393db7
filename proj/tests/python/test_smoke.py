import cmath
import json

import pytest

import reslab


def small_spec(modes=10, n_max=2):
    spec = reslab.default_spec()
    spec["grid"]["count"] = modes
    spec["nmax"] = n_max
    return spec


def test_default_dimension():
    assert reslab.dimension() == 650


def test_g0_resonance_is_exact():
    assert reslab.resonance(0.0, j=1, spec=small_spec()) == 1.0


def test_excited_level_decays():
    lam = reslab.resonance(0.02, j=1, spec=small_spec(12))
    assert lam.imag < 0.0
    assert abs(lam - 1.0) < 0.05


def test_golden_rule_sign():
    c = reslab.fgr(1)
    assert not c["stable"]
    assert c["z_od"].imag > 0.0
    assert reslab.fgr(0)["stable"]


def test_free_survival_is_a_phase():
    times = [0.0, 1.0, 5.0]
    amp = reslab.survival(0.0, times, j=1, spec=small_spec())
    for t, a in zip(times, amp):
        assert abs(a - cmath.exp(-1j * t)) < 1e-13


def test_pole_fit_on_synthetic_data():
    lam = 1.0 - 0.01j
    zs = reslab.continuation_domain(lam)
    assert len(zs) == 18
    fs = [0.9 / (lam - z) + 0.02 * (lam - z) ** -0.75 for z in zs]
    fit = reslab.pole_fit(zs, fs, lam)
    assert abs(fit["p"] - 0.9) < 1e-8
    assert abs(fit["beta"] - 0.75) < 1e-6


def test_decimation_at_g0():
    d = reslab.decimate(0.0, 0.2, spec=small_spec(12))
    assert abs(d["e_z"]) < 1e-13
    assert d["w_norm"] < 1e-13


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        reslab.resonance(0.02, j=7, spec=small_spec())
    assert issubclass(reslab.NumericalError, RuntimeError)
    bad = small_spec()
    bad["grid"]["bogus"] = 1
    with pytest.raises(reslab.ValidationError, match="bogus"):
        reslab.dimension(bad)


def test_run_is_deterministic(tmp_path):
    cfg = {"experiment": "resonance-track", "model": small_spec(), "parameters": {"g_list": [0.01, 0.02]}}
    a = reslab.run(cfg, tmp_path / "a")
    b = reslab.run(cfg, tmp_path / "b", jobs=2)
    assert a["config_hash"] == b["config_hash"] == reslab.config_hash(cfg)
    assert "resonance.csv" in a["outputs"]
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["results"] == a["results"]


def test_selfcheck_passes():
    results = reslab.selfcheck()
    assert all(passed for _, passed, _, _ in results), results
    assert "metastability" in reslab.experiment_names()
