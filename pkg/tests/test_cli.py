import csv
import io
import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from skipfree import cli

RUIN = {
    "model": "cpp",
    "params": {"alpha": 1, "mu": {"0": "1/2", "2": "1/2"}, "p": 0},
    "queries": [{"kind": "two_sided", "args": {"x": 1, "a": 0, "b": 4}},
                {"kind": "exit_interval", "args": {"x": 1, "a": 0, "b": 4}},
                {"kind": "hit", "args": {"x": 3, "y": 0}, "mc": False}],
    "sim": {"seed": 7, "n_paths": 20000},
}
FAMILY = {
    "model": "mbi", "mode": "rational",
    "params": {"alpha": 1, "mu": {"0": "1/2", "2": "1/2"}, "beta": 1, "nu": {"1": 1}},
    "queries": [{"kind": "two_sided", "args": {"x": 1, "a": 0, "b": 4}},
                {"kind": "passage_up", "args": {"x": 1, "b": 5}},
                {"kind": "resolvent", "args": {"x": 1, "y": 2}}],
}
CHAIN = {
    "model": "chain", "mode": "rational",
    "params": {"lo": 0, "hi": 1, "rows": [[-1, 0], [2, -3]], "kill": [1, 1]},
    "queries": [{"kind": "hit", "args": {"x": 1, "y": 0}},
                {"kind": "resolvent", "args": {"x": 1, "y": 0}}],
}


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestRun:
    def test_gamblers_ruin(self, tmp_path, capsys):
        assert cli.main(["run", write(tmp_path, RUIN)]) == cli.EXIT_OK
        rows = rows_of(capsys.readouterr().out)
        assert [r["query_kind"] for r in rows] == ["two_sided", "exit_interval", "hit"]
        assert rows[0]["closed_form"] == "0.75" and rows[0]["verdict"] == "PASS"
        assert abs(float(rows[0]["mc_p_hat"]) - 0.75) < 0.02
        assert rows[2]["mc_p_hat"] == ""

    def test_exact_family(self, tmp_path, capsys):
        assert cli.main(["run", write(tmp_path, FAMILY)]) == cli.EXIT_OK
        rows = rows_of(capsys.readouterr().out)
        assert rows[0]["closed_form"] == "3/8"
        assert rows[0]["abs_diff"] == "0" and rows[0]["verdict"] == "PASS"

    def test_chain(self, tmp_path, capsys):
        assert cli.main(["run", write(tmp_path, CHAIN)]) == cli.EXIT_OK
        rows = rows_of(capsys.readouterr().out)
        assert rows[0]["closed_form"] == "2/3"
        assert rows[1]["closed_form"] == "2/3" and rows[1]["verdict"] == "PASS"

    def test_json_report_to_file(self, tmp_path):
        out = tmp_path / "report.json"
        code = cli.main(["run", write(tmp_path, CHAIN), "--format", "json", "-o", str(out)])
        doc = json.loads(out.read_text())
        assert code == 0 and doc["summary"]["rows"] == 2
        assert {"timestamp", "version", "backend"} <= set(doc["metadata"])

    def test_float_override(self, tmp_path, capsys):
        assert cli.main(["run", write(tmp_path, CHAIN), "--mode", "float"]) == 0
        assert float(rows_of(capsys.readouterr().out)[0]["closed_form"]) == pytest.approx(2 / 3)

    def test_no_queries(self, tmp_path, capsys):
        cfg = dict(CHAIN, queries=[])
        assert cli.main(["run", write(tmp_path, cfg)]) == 0
        assert capsys.readouterr().out.strip() == ",".join(cli.report.COLUMNS)


class TestExitCodes:
    def test_bad_json(self, tmp_path, capsys):
        assert cli.main(["run", write(tmp_path, "{\n  \"model\": ")]) == cli.EXIT_CONFIG
        assert "cfg.json:2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "absent.json")]) == cli.EXIT_CONFIG

    def test_unknown_kind(self, tmp_path, capsys):
        cfg = dict(RUIN, queries=[{"kind": "teleport", "args": {}}])
        assert cli.main(["run", write(tmp_path, cfg)]) == cli.EXIT_CONFIG
        assert "queries[0].kind" in capsys.readouterr().err

    def test_recurrent_resolvent(self, tmp_path):
        cfg = dict(RUIN, queries=[{"kind": "resolvent", "args": {"x": 0, "y": 0}}])
        assert cli.main(["run", write(tmp_path, cfg)]) == cli.EXIT_CONFIG

    def test_invalid_window(self, tmp_path):
        cfg = dict(RUIN, queries=[{"kind": "two_sided", "args": {"x": 5, "a": 0, "b": 4}}], sim=None)
        assert cli.main(["run", write(tmp_path, cfg)]) == cli.EXIT_MODEL

    def test_failed_check(self, tmp_path, monkeypatch):
        real = cli._Evaluator.closed_form
        monkeypatch.setattr(cli._Evaluator, "closed_form", lambda self, q: real(self, q) + 1)
        assert cli.main(["run", write(tmp_path, CHAIN)]) == cli.EXIT_FAIL

    @settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.recursive(st.none() | st.booleans() | st.integers() | st.text(max_size=5),
                        lambda kids: st.lists(kids, max_size=3) | st.dictionaries(st.text(max_size=6), kids, max_size=3),
                        max_leaves=8))
    def test_malformed_configs_never_crash(self, tmp_path, obj):
        assert cli.main(["run", write(tmp_path, obj)]) in (cli.EXIT_OK, cli.EXIT_CONFIG)

    @settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.dictionaries(st.sampled_from(["x", "y", "a", "b", "t", "s", "z"]),
                           st.integers(-3, 6) | st.text(max_size=2) | st.none(), max_size=4),
           st.sampled_from(sorted(cli.QUERY_ARGS)))
    def test_malformed_queries(self, tmp_path, args, kind):
        cfg = dict(FAMILY, mode="float", queries=[{"kind": kind, "args": args, "mc": False}])
        assert cli.main(["run", write(tmp_path, cfg)]) in (cli.EXIT_OK, cli.EXIT_CONFIG, cli.EXIT_MODEL)


class TestValidate:
    def test_small_panel(self, tmp_path, capsys):
        spec = {"seed": 3, "chains": 4, "cpps": 4, "mbis": 4, "mc": {"checks": 6, "sim": {"n_paths": 4000}}}
        assert cli.main(["validate", write(tmp_path, spec)]) == cli.EXIT_OK
        captured = capsys.readouterr()
        assert "panel PASS" in captured.err
        rows = rows_of(captured.out)
        assert rows and all(r["verdict"] in ("PASS", "-") for r in rows)

    def test_bad_spec(self, tmp_path):
        assert cli.main(["validate", write(tmp_path, {"chains": -1})]) == cli.EXIT_CONFIG


class TestSimulate:
    def test_csv(self, tmp_path, capsys):
        cfg = dict(RUIN, queries=RUIN["queries"][:1], sim={"seed": 1, "n_paths": 5000})
        assert cli.main(["simulate", write(tmp_path, cfg)]) == 0
        (row,) = rows_of(capsys.readouterr().out)
        assert row["n_paths"] == "5000" and abs(float(row["p_hat"]) - 0.75) < 0.03

    def test_seed_override_is_reproducible(self, tmp_path, capsys):
        path = write(tmp_path, dict(RUIN, queries=RUIN["queries"][:1]))
        cli.main(["simulate", path, "--seed", "11", "--format", "json"])
        first = json.loads(capsys.readouterr().out)["estimates"]
        cli.main(["simulate", path, "--seed", "11", "--format", "json"])
        assert json.loads(capsys.readouterr().out)["estimates"] == first

    def test_needs_sim(self, tmp_path):
        assert cli.main(["simulate", write(tmp_path, dict(CHAIN))]) == cli.EXIT_CONFIG

    def test_rejects_non_events(self, tmp_path):
        cfg = dict(FAMILY, queries=FAMILY["queries"][2:], sim={"n_paths": 10})
        assert cli.main(["simulate", write(tmp_path, cfg)]) == cli.EXIT_CONFIG
