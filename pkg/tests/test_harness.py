import numpy as np
import pytest

from revealbandit.environment import FeedbackMode
from revealbandit.errors import ConfigurationError
from revealbandit.graph_model import GraphSpec, generate, save_matrix
from revealbandit.harness import (
    REGRET_HEADER,
    SUMMARY_HEADER,
    PolicySpec,
    ResultTable,
    build_config,
    config_path,
    derive_seed,
    emit_csv,
    parse_policy,
    preset,
    read_config_file,
    read_regret_csv,
    run_experiment,
    summary_path,
)


def small_config(**extra):
    values = {
        "graph": "barabasi_albert:d=60,m=3,p=0.7",
        "n": "150",
        "trials": "4",
        "policies": "bare(c=0.05), graphmoss, uniform_random, fixed_oracle",
        "seed": "3",
    }
    values.update(extra)
    return build_config(values)


def test_parse_policy_forms():
    assert parse_policy("graphmoss") == PolicySpec("graphmoss", {}, FeedbackMode.FULL_SET)
    assert parse_policy("bare(c=0.01)").params == {"c": 0.01}
    spec = parse_policy("graphmoss @ count_only")
    assert spec.feedback is FeedbackMode.COUNT_ONLY
    assert spec.label == "graphmoss@count_only"
    assert parse_policy("fixed_oracle(node=4)").params == {"node": 4}


@pytest.mark.parametrize("text", ["bogus", "bare(c)", "bare(c=x)", "bare@count_only", "graphmoss@loud"])
def test_parse_policy_errors(text):
    with pytest.raises(ConfigurationError):
        parse_policy(text)


def test_build_config_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        small_config(color="blue")
    with pytest.raises(ConfigurationError):
        small_config(n="0")
    with pytest.raises(ConfigurationError):
        small_config(n="many")
    with pytest.raises(ConfigurationError):
        small_config(policies="graphmoss, graphmoss")
    with pytest.raises(ConfigurationError):
        build_config({"graph": "star:d=3,p=1", "n": "5"})
    with pytest.raises(ConfigurationError):
        build_config({"graph": f"file:path={tmp_path / 'nope.txt'},p=0.8", "n": "5", "trials": "1", "policies": "graphmoss"})


def test_presets():
    cfg = preset("ba1000")
    assert (cfg.graph.d, cfg.graph.params["m"], cfg.graph.p, cfg.n, cfg.trials) == (1000, 10, 0.8, 2000, 100)
    assert [p.label for p in cfg.policies] == ["bare(c=0.01)", "graphmoss"]
    sweep = preset("psweep").expand()
    assert [name for name, _ in sweep] == ["p_0.2", "p_0.4", "p_0.6", "p_0.8", "p_1.0"]
    assert [c.graph.p for _, c in sweep] == [0.2, 0.4, 0.6, 0.8, 1.0]
    with pytest.raises(ConfigurationError):
        preset("facebook")  # dataset not bundled
    with pytest.raises(ConfigurationError):
        preset("nope")


def test_dataset_override(fixture_path):
    cfg = preset("facebook", dataset=fixture_path, trials=2)
    assert cfg.graph.params["path"] == fixture_path and cfg.graph.params["symmetrize"] is True


def test_read_config_file(tmp_path):
    path = tmp_path / "exp.conf"
    path.write_text("# experiment\ngraph = star:d=5,p=1  # inline\nn=10\n\ntrials = 2\npolicies = graphmoss\n")
    assert read_config_file(path) == {"graph": "star:d=5,p=1", "n": "10", "trials": "2", "policies": "graphmoss"}
    path.write_text("graph star\n")
    with pytest.raises(ConfigurationError):
        read_config_file(path)


def test_derive_seed():
    seed = derive_seed(0, "graphmoss", 0)
    assert seed == derive_seed(0, "graphmoss", 0)
    assert 0 <= seed < 2**64
    others = {derive_seed(0, "graphmoss", 1), derive_seed(1, "graphmoss", 0), derive_seed(0, "bare(c=0.01)", 0)}
    assert seed not in others and len(others) == 3


def test_oracle_rows_are_zero():
    table = run_experiment(small_config())
    agg = table.results["fixed_oracle"]
    assert np.all(agg.mean_regret == 0) and np.all(agg.stderr_regret == 0)
    assert table.results["bare(c=0.05)"].mean_D_star is not None
    assert table.results["graphmoss"].mean_D_star is None


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(small_config()), a)
    emit_csv(run_experiment(small_config()), b)
    for x, y in [(a, b), (summary_path(a), summary_path(b)), (config_path(a), config_path(b))]:
        assert open(x, "rb").read() == open(y, "rb").read()


def test_workers_do_not_change_results(tmp_path):
    cfg = small_config(trials="3")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(cfg, workers=1), a)
    emit_csv(run_experiment(cfg, workers=3), b)
    assert a.read_bytes() == b.read_bytes()


def test_csv_round_trip(tmp_path):
    table = run_experiment(small_config())
    path = tmp_path / "regret.csv"
    written = emit_csv(table, path)
    assert written == [str(path), summary_path(path), config_path(path)]
    back = read_regret_csv(path)
    assert list(back) == list(table.results)
    for label, agg in table.results.items():
        np.testing.assert_array_equal(back[label]["round"], np.arange(1, 151))
        np.testing.assert_array_equal(back[label]["mean_regret"], agg.mean_regret)
        np.testing.assert_array_equal(back[label]["stderr_regret"], agg.stderr_regret)
        np.testing.assert_array_equal(back[label]["mean_reward"], agg.mean_reward)
    lines = open(summary_path(path)).read().splitlines()
    assert lines[0] == SUMMARY_HEADER
    assert [line.split(",")[0] for line in lines[1:]] == ["bare(c=0.05)"]


def test_config_echo_reproduces_run(tmp_path):
    table = run_experiment(small_config())
    first = tmp_path / "first.csv"
    emit_csv(table, first)
    values = read_config_file(config_path(first))
    again = tmp_path / "again.csv"
    emit_csv(run_experiment(build_config(values)), again)
    assert first.read_bytes() == again.read_bytes()


def test_empty_table_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv(ResultTable(None, {}), path)
    assert path.read_text() == REGRET_HEADER + "\n"
    assert read_regret_csv(path) == {}


def test_unwritable_output(tmp_path):
    with pytest.raises(OSError):
        emit_csv(ResultTable(None, {}), tmp_path / "missing" / "x.csv")


def test_run_on_loaded_matrix(tmp_path):
    m = generate(GraphSpec("star", 20, 0.5))
    path = tmp_path / "m.txt"
    save_matrix(m, path)
    cfg = small_config(graph=f"matrix:path={path}", policies="graphmoss@count_only, round_robin", n="40")
    table = run_experiment(cfg)
    assert set(table.results) == {"graphmoss@count_only", "round_robin"}
    assert table.r_star == pytest.approx(9.5)
