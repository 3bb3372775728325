import json

import pytest

from tarpo_lab.cli import cmd_compare, cmd_parse_region, cmd_score, cmd_train_sim, main
from tarpo_lab.config import RunConfig, load_config, parse_config
from tarpo_lab.errors import ConfigError, IncompatibleRuns, MissingRecord, SchemaError
from tarpo_lab.reward import RewardConfig
from tarpo_lab.sim import TrainConfig

MEDALS = {"columns": ["Nation", "Single", "Double", "Total"],
          "rows": [["A", "3", "1", "4"], ["B", "0", "2", "2"], ["C", "5", "0", "5"]]}


def _record(id_, answer, region=(["Single"], [0, 2]), kind="TCoT"):
    return {"schema_version": 1, "id": id_, "table": MEDALS, "question": "q",
            "gold_answer": answer, "gold_region": {"columns": region[0], "rows": region[1]},
            "reasoning_kind": kind}


def _write(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs))
    return path


@pytest.fixture
def dataset(tmp_path):
    return _write(tmp_path / "data.jsonl", [
        _record("q1", {"kind": "numeric", "value": 8}),
        _record("q2", {"kind": "text", "value": "C"}, (["Nation", "Total"], [2]), "SCoT"),
        _record("q3", {"kind": "numeric", "value": 2}, (["Double"], [1])),
    ])


# --- score ------------------------------------------------------------------

def test_score_gold_transcript(dataset, tmp_path):
    tr = _write(tmp_path / "t.jsonl", [{"id": "q1", "response": 'T_reg = {["Single"], [0, 2]}\nFinal Answer: 8'}])
    header, rec, agg = cmd_score(dataset, tr, RewardConfig())
    assert header["type"] == "header"
    assert (rec["r_t"], rec["r_a"], rec["mixed"], rec["region_status"]) == (1.0, 1.0, 1.0, "found")
    assert agg["n"] == 1


def test_score_without_region(dataset, tmp_path):
    tr = _write(tmp_path / "t.jsonl", [{"id": "q1", "response": "Final Answer: 8"}])
    _, rec, _ = cmd_score(dataset, tr, RewardConfig(), alpha=0.3)
    assert rec["region_status"] == "absent"
    assert rec["r_t"] == 0.0 and rec["r_a"] == 1.0
    assert rec["mixed"] == pytest.approx(0.7)


def test_score_aggregate(dataset, tmp_path):
    tr = _write(tmp_path / "t.jsonl", [
        {"id": "q1", "response": 'T_reg = {["Single"], [0, 2]} Final Answer: 8'},
        {"id": "q2", "response": 'T_reg = {["Nope"], [2]} Final Answer: C'},
        {"id": "q3", "response": "T_reg = {[\"Double\"], [1 Final Answer: 7"},
    ])
    records = cmd_score(dataset, tr, RewardConfig())
    rows, agg = records[1:-1], records[-1]
    assert [r["region_status"] for r in rows] == ["found", "invalid", "syntax-error"]
    assert [r["r_a"] for r in rows] == [1.0, 1.0, 0.0]
    assert agg["total_r_t"] == sum(r["r_t"] for r in rows)
    assert agg["total_mixed"] == pytest.approx(sum(r["mixed"] for r in rows))
    assert agg["mean_r_t"] == pytest.approx(1 / 3)
    assert agg["by_kind"]["SCoT"]["n"] == 1 and agg["by_kind"]["TCoT"]["n"] == 2


def test_score_partial_region(dataset, tmp_path):
    # cols {Single} vs {Single}: 1; rows {0} vs {0, 2}: 0.5
    tr = _write(tmp_path / "t.jsonl", [{"id": "q1", "response": 'T_reg = {["Single"], [0]} Final Answer: 3'}])
    _, rec, _ = cmd_score(dataset, tr, RewardConfig())
    assert rec["r_t"] == 0.75 and rec["r_a"] == 0.0


def test_score_missing_record(dataset, tmp_path):
    tr = _write(tmp_path / "t.jsonl", [{"id": "zz", "response": "x"}])
    with pytest.raises(MissingRecord):
        cmd_score(dataset, tr, RewardConfig())
    assert main(["score", str(dataset), str(tr)]) == 2


def test_score_schema_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a"}\n')
    tr = _write(tmp_path / "t.jsonl", [])
    with pytest.raises(SchemaError, match="missing field"):
        cmd_score(bad, tr, RewardConfig())
    dup = _write(tmp_path / "dup.jsonl", [_record("a", {"kind": "numeric", "value": 1})] * 2)
    with pytest.raises(SchemaError, match="duplicate"):
        cmd_score(dup, tr, RewardConfig())


def test_score_cli_writes_file(dataset, tmp_path, capsys):
    tr = _write(tmp_path / "t.jsonl", [{"id": "q1", "response": "Final Answer: 8"}])
    assert main(["score", str(dataset), str(tr), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "score.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["type"] == "aggregate"
    assert "mean_r_a=1.0000" in capsys.readouterr().out


# --- train-sim and compare --------------------------------------------------

def _tiny(**kw) -> RunConfig:
    base = dict(steps=6, n_tasks=30, eval_every=3, batch_size=4, group_size=8)
    base.update(kw)
    return RunConfig(TrainConfig(**base), seeds=(0, 1))


def _body(path):
    return path.read_text().splitlines()[1:]


def test_train_sim_deterministic(tmp_path):
    a = cmd_train_sim(_tiny(), tmp_path / "a")
    b = cmd_train_sim(_tiny(), tmp_path / "b")
    for seed in (0, 1):
        assert _body(a[seed]) == _body(b[seed])
    lines = [json.loads(x) for x in a[0].read_text().splitlines()]
    assert lines[0]["type"] == "header" and lines[-1]["type"] == "summary"
    assert sum(x["type"] == "step" for x in lines) == 6


def test_train_sim_collapse_to_grpo(tmp_path):
    grpo = cmd_train_sim(_tiny(algorithm="grpo"), tmp_path / "g")
    flat = cmd_train_sim(_tiny(algorithm="tarpo", reward=RewardConfig(gamma=0.0)), tmp_path / "t")
    assert _body(grpo[0]) == _body(flat[0])


def test_compare_self_has_zero_deltas(tmp_path):
    files = cmd_train_sim(_tiny(), tmp_path / "a")
    rows = cmd_compare([files[0], files[0]])
    assert all(rows[1][f"delta_{m}"] == 0.0 for m in ("val_acc", "val_region_reward", "mean_len"))


def test_compare_directories(tmp_path, capsys):
    cmd_train_sim(_tiny(algorithm="grpo"), tmp_path / "g")
    cmd_train_sim(_tiny(algorithm="tarpo"), tmp_path / "t")
    rows = cmd_compare([tmp_path / "g", tmp_path / "t"])
    assert rows[0]["seeds"] == [0, 1] and rows[1]["algorithm"] == "tarpo"
    assert main(["compare", str(tmp_path / "g"), str(tmp_path / "t")]) == 0
    assert "delta_val_acc" in capsys.readouterr().out


def test_compare_rejects_different_tasks(tmp_path):
    a = cmd_train_sim(_tiny(), tmp_path / "a")
    b = cmd_train_sim(_tiny(task_seed=9), tmp_path / "b")
    with pytest.raises(IncompatibleRuns):
        cmd_compare([a[0], b[0]])
    assert main(["compare", str(a[0]), str(b[0])]) == 2


def test_train_sim_cli(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nsteps = 3\nn_tasks = 20\nbatch_size = 2\nseeds = 4\n")
    assert main(["train-sim", "--config", str(cfg), "--algorithm", "grpo", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "grpo_seed4.jsonl").exists()


# --- parse-region -----------------------------------------------------------

def test_parse_region_report(dataset, tmp_path):
    tr = _write(tmp_path / "t.jsonl", [
        {"id": "q1", "response": 'T_reg = {["Total", "Single"], [2, 0]} ... T_reg = {[], []}\nFinal Answer: 8'},
        {"id": "q2", "response": "Final Answer: C then T_reg = {[\"Nation\"], [2]}"},
        {"id": "q3", "response": "no declaration"},
        {"id": "q4", "response": "T_reg = {[1, 2"},
    ])
    q1, q2, q3, q4 = cmd_parse_region(tr, dataset)
    assert q1["count"] == 2 and q1["position"] == "pre-answer"
    assert q1["canonical"] == 'T_reg = {["Single", "Total"], [0, 2]}'
    assert q2["position"] == "post-answer"
    assert q3["status"] == "absent" and q3["count"] == 0
    assert q4["status"] == "syntax-error" and q4["position"] == "no-answer-marker"


def test_parse_region_unbound(tmp_path):
    tr = _write(tmp_path / "t.jsonl", [{"id": "x", "response": 'T_reg = {["b", "a"], [3, 1]}'}])
    assert cmd_parse_region(tr)[0]["canonical"] == 'T_reg = {["a", "b"], [1, 3]}'


def test_parse_region_empty_file(tmp_path, capsys):
    tr = tmp_path / "t.jsonl"
    tr.write_text("")
    assert cmd_parse_region(tr) == []
    assert main(["parse-region", str(tr)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 and json.loads(out[0])["type"] == "header"


# --- config -----------------------------------------------------------------

def test_config_defaults_and_overrides():
    cfg = parse_config("[reward]\nlambda = 0.2\n[run]\nsteps = 5\nseeds = 1, 2\n[sim]\ncandidate_cap = 6\n")
    assert cfg.train.reward.lam == 0.2 and cfg.train.steps == 5
    assert cfg.seeds == (1, 2) and cfg.train.sim.candidate_cap == 6
    assert load_config(None) == RunConfig()


@pytest.mark.parametrize("text", [
    "[reward]\nlam = 0.1\n",
    "[reward]\ngamma = high\n",
    "[bogus]\nx = 1\n",
    "[reward]\ngamma = 3\n",
    "[run]\nseeds = a\n",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_error_exit_code(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nwarp = 9\n")
    assert main(["train-sim", "--config", str(cfg)]) == 2
