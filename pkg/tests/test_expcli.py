import json
import subprocess
import sys

import numpy as np
import pytest

from roughmle.cli import main
from roughmle.config import ExperimentConfig, parse_config, resolve
from roughmle.errors import ConfigError
from roughmle.experiments import (
    ResultTable,
    emit_table,
    hurst_errors,
    read_table,
    run_consistency,
    run_counterexample,
    run_hurst_sweep,
    run_sigma_sweep,
    table_to_csv,
)


def cfg(**kw):
    return parse_config(json.dumps(kw))


# -- config ---------------------------------------------------------------


def test_minimal_config_defaults():
    c = cfg(experiment="consistency")
    assert c.replicas == 1 and c.alpha == 0.4 and c.seed == 0
    assert c.horizon_list == [12.5, 25.0, 50.0, 100.0] and c.horizon == 100.0
    assert c.drift == [[-1.0]] and c.x0 == [0.0]
    c2 = cfg(experiment="counterexample")
    assert c2.dim == 2 and c2.n_list == list(range(4, 13))


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as err:
        cfg(experiment="sigma_sweep", sigma_lst=[1.0])
    assert "sigma_lst" in str(err.value) and err.value.field == "sigma_lst"


@pytest.mark.parametrize(
    "bad,field",
    [
        ({"experiment": "hurst_sweep", "hurst_list": [0.4, 0.3]}, "hurst_list"),
        ({"experiment": "hurst_sweep", "hurst_list": [1.0]}, "hurst_list"),
        ({"experiment": "sigma_sweep", "sigma_list": [1.0, -0.5]}, "sigma_list"),
        ({"experiment": "sigma_sweep", "sigma": 0}, "sigma"),
        ({"experiment": "counterexample", "n_list": [0]}, "n_list"),
        ({"experiment": "counterexample", "n_list": []}, "n_list"),
        ({"experiment": "consistency", "replicas": 0}, "replicas"),
        ({"experiment": "consistency", "seed": -1}, "seed"),
        ({"experiment": "consistency", "seed": 2**64}, "seed"),
        ({"experiment": "consistency", "alpha": 0.3}, "alpha"),
        ({"experiment": "bootstrap"}, "experiment"),
        ({"experiment": "sigma_sweep", "h": "quadratic"}, "h"),
    ],
)
def test_invalid_values_name_their_field(bad, field):
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(bad))
    assert err.value.field.startswith(field)


def test_shape_and_grid_checks():
    with pytest.raises(ConfigError):
        cfg(experiment="sigma_sweep", dim=2, drift=[[1.0]])
    with pytest.raises(ConfigError):
        cfg(experiment="consistency", horizon_list=[12.345], horizon=100.0, steps=100)
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_seed_override():
    assert parse_config('{"experiment": "consistency", "seed": 3}', seed=11).seed == 11


def test_resolve_is_idempotent():
    c = cfg(experiment="hurst_sweep")
    assert resolve(c) == c


# -- tables ---------------------------------------------------------------


def test_table_rectangular():
    with pytest.raises(ValueError):
        ResultTable(("a", "b"), [[1.0, 2.0, 3.0]])


def test_table_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((5, 3)) * 10.0 ** rng.integers(-300, 300, (5, 3))
    rows[0, 0] = np.nan
    rows[1, 1] = 5e-324
    table = ResultTable(("a", "b", "c"), rows, {"config": {"x": 1}, "version": "v"})
    out = tmp_path / "t.csv"
    emit_table(table, out)
    back = read_table(out)
    assert back.columns == table.columns
    assert np.array_equal(back.rows.view(np.uint64), table.rows.view(np.uint64))
    assert back.metadata == table.metadata
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_emit_to_unwritable_path(tmp_path):
    table = ResultTable(("a",), [[1.0]])
    with pytest.raises(OSError):
        emit_table(table, tmp_path / "missing" / "t.csv")


# -- experiments ----------------------------------------------------------


def test_counterexample_single_level():
    t = run_counterexample(cfg(experiment="counterexample", n_list=[1]))
    assert t.rows.shape[0] == 1 and "growth" not in t.columns
    assert t.metadata["config"]["n_list"] == [1]


def test_counterexample_small_levels():
    t = run_counterexample(cfg(experiment="counterexample", n_list=[3, 4, 5, 6]))
    assert "growth" in t.columns and np.isnan(t.column("growth")[0])
    assert np.all(np.diff(t.column("sup_distance")) < 0)
    assert np.all(t.column("sup_distance") <= 2 * t.column("radius"))
    assert np.all(np.diff(t.column("gap")) > 0)
    assert np.allclose(t.column("a1_base"), t.column("a1_base")[-1], rtol=0.01)


def test_counterexample_fast_shrink():
    t = run_counterexample(cfg(experiment="counterexample", n_list=[4, 6, 8], radius_rate=1.0))
    assert np.all(np.diff(t.column("gap")) < 0)
    assert np.all(np.diff(t.column("rough_distance")) < 0)


def test_counterexample_multiscale_rho_close_to_all_pairs():
    from roughmle.gridpath import multiscale_lags
    from roughmle.roughcore import lift_piecewise_linear, rough_distance
    from roughmle.stochsim import counterexample_pair, dyadic_radius

    for rate in (0.25, 1.0):
        base, looped = counterexample_pair(4, dyadic_radius(rate))
        Rb, Rl = lift_piecewise_linear(base), lift_piecewise_linear(looped)
        full = rough_distance(Rb, Rl)
        part = rough_distance(Rb, Rl, lags=multiscale_lags(base.times.size))
        assert part <= full and part >= 0.9 * full


def test_sigma_sweep_reference_row_and_affine_law():
    t = run_sigma_sweep(cfg(experiment="sigma_sweep", sigma_list=[1.0], steps=512))
    assert t.column("diff_norm")[0] == 0.0

    t = run_sigma_sweep(cfg(experiment="sigma_sweep", steps=1024, seed=4))
    sig = t.column("sigma")
    assert np.all(t.column("affine_residual") <= 1e-10)
    order = np.argsort(np.abs(sig**2 - 1.0))
    assert np.all(np.diff(t.column("diff_norm")[order]) >= 0)


def test_sigma_sweep_scalar_closed_form():
    t = run_sigma_sweep(cfg(experiment="sigma_sweep", dim=1, steps=1024, seed=2))
    assert np.all(t.column("closed_form_residual") <= 1e-10)


def test_sigma_sweep_cubic():
    t = run_sigma_sweep(cfg(experiment="sigma_sweep", h="cubic", steps=1024, seed=1))
    assert np.all(t.column("affine_residual") <= 1e-10)


def test_hurst_sweep_reference_only():
    t = run_hurst_sweep(cfg(experiment="hurst_sweep", hurst_list=[0.5], steps=256, replicas=2))
    assert np.all(t.rows[:, 1:] == 0.0)


def test_hurst_sweep_gap_column():
    from roughmle.stochsim import fbm_gap_variance

    t = run_hurst_sweep(cfg(experiment="hurst_sweep", hurst_list=[0.4, 0.7], steps=256, replicas=3))
    assert np.allclose(t.column("gap_variance"), [fbm_gap_variance(0.4, 0.5), fbm_gap_variance(0.7, 0.5)], rtol=0, atol=0)
    assert np.all(t.column("mean_error") > 0) and np.all(t.column("se_error") > 0)


def test_replica_order_does_not_matter():
    c = cfg(experiment="hurst_sweep", hurst_list=[0.4, 0.45], steps=256, replicas=4)
    e1, r1 = hurst_errors(c)
    e2, r2 = hurst_errors(c, order=[3, 1, 0, 2])
    assert np.array_equal(e1, e2) and np.array_equal(r1, r2)


def test_consistency_small():
    c = cfg(experiment="consistency", horizon_list=[5.0, 10.0, 20.0], steps=2000, replicas=4)
    t = run_consistency(c)
    assert t.rows.shape == (3, 7)
    assert "slope_classical" in t.metadata["summary"]
    # dt = 0.01: the two estimators differ by the discretisation error only
    assert np.allclose(t.column("mean_error_classical"), t.column("mean_error_rough"), atol=0.1)


def test_consistency_at_the_null():
    # the MLE at a = 0 is skewed (mean O(1/T)); centred up to that bias
    c = cfg(experiment="consistency", drift=[[0.0]], replicas=20, seed=5)
    t = run_consistency(c)
    i = list(t.column("horizon")).index(100.0)
    mean, se = t.column("mean_signed_error")[i], t.column("se_signed_error")[i]
    assert abs(mean) <= 3 * se + 2 / 100.0
    assert t.column("mean_error_classical")[i] < 0.1


def test_experiment_mismatch():
    with pytest.raises(ConfigError):
        run_sigma_sweep(cfg(experiment="hurst_sweep"))


# -- CLI ------------------------------------------------------------------


def write_config(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_cli_byte_identical_reruns(tmp_path):
    conf = write_config(tmp_path, {"experiment": "hurst_sweep", "hurst_list": [0.4, 0.45], "steps": 256, "replicas": 3, "seed": 99})
    for name in ("a.csv", "b.csv"):
        assert main(["hurst_sweep", "--config", str(conf), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    meta = json.loads((tmp_path / "a.json").read_text())
    assert meta["config"]["seed"] == 99 and meta["config"]["steps"] == 256 and "version" in meta


def test_cli_seed_override_changes_output(tmp_path):
    conf = write_config(tmp_path, {"experiment": "sigma_sweep", "steps": 256})
    main(["sigma_sweep", "--config", str(conf), "--out", str(tmp_path / "a.csv")])
    main(["sigma_sweep", "--config", str(conf), "--out", str(tmp_path / "b.csv"), "--seed", "7"])
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()
    assert json.loads((tmp_path / "b.json").read_text())["config"]["seed"] == 7


def test_cli_stdout_and_experiment_from_argument(tmp_path, capsys):
    conf = write_config(tmp_path, {"n_list": [2]})
    assert main(["counterexample", "--config", str(conf)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("n,radius,sup_distance")
    assert out == table_to_csv(run_counterexample(cfg(experiment="counterexample", n_list=[2])))


def test_cli_config_errors(tmp_path, capsys):
    conf = write_config(tmp_path, {"experiment": "sigma_sweep", "sigma_lst": [1]})
    assert main(["sigma_sweep", "--config", str(conf)]) == 2
    assert "sigma_lst" in capsys.readouterr().err
    other = write_config(tmp_path, {"experiment": "consistency"}, "o.json")
    assert main(["sigma_sweep", "--config", str(other)]) == 2
    broken = tmp_path / "b.json"
    broken.write_text("{")
    assert main(["sigma_sweep", "--config", str(broken)]) == 2


def test_cli_singular_information_exit_code(tmp_path, capsys):
    # a path started at the origin with zero drift and a vanishing horizon slice
    conf = write_config(tmp_path, {"experiment": "sigma_sweep", "dim": 2, "steps": 1, "horizon": 1.0})
    assert main(["sigma_sweep", "--config", str(conf)]) == 3
    assert "singular" in capsys.readouterr().err


def test_cli_io_errors(tmp_path):
    assert main(["sigma_sweep", "--config", str(tmp_path / "nope.json")]) == 1
    conf = write_config(tmp_path, {"experiment": "sigma_sweep", "steps": 64})
    assert main(["sigma_sweep", "--config", str(conf), "--out", str(tmp_path / "no" / "x.csv")]) == 1


def test_console_script_entry_point(tmp_path):
    conf = write_config(tmp_path, {"experiment": "counterexample", "n_list": [1]})
    proc = subprocess.run(
        [sys.executable, "-m", "roughmle.cli", "counterexample", "--config", str(conf)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("n,")
