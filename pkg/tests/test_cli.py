import json

import pytest

from conftest import ex_ints
from inductor.cli import build_parser, main
from inductor.core import Task, TaskKind
from inductor.datasets import load_tasks, save_tasks


def test_gen_and_run(tmp_path, capsys):
    tasks = tmp_path / "ms.json"
    assert main(["gen", "miniscan", "--count", "5", "--seed", "2", "--output-mode", "pseudo", "--out", str(tasks)]) == 0
    assert len(load_tasks(tasks)) == 5
    out = tmp_path / "run"
    assert main(["run", "--tasks", str(tasks), "--method", "refine", "--iters", "3", "--samples", "5", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "c=1.0000 c_t=1.0000" in printed
    assert main(["report", "--traces", str(out / "traces.jsonl"), "--out", str(tmp_path / "r.json")]) == 0
    assert (tmp_path / "r.json").read_bytes() == (out / "report.json").read_bytes()


def test_gen_default_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["gen", "miniscan", "--count", "2", "--seed", "9"]) == 0
    assert (tmp_path / "miniscan_colors_seed9.json").exists()


def test_perturb_writes_sibling(tmp_path):
    seen = tuple(ex_ints([i, i + 1], [i + 1, i]) for i in range(8))
    src = tmp_path / "lf.json"
    save_tasks([Task("lf", TaskKind.LISTFN, seen, seen)], src)
    assert main(["perturb", "noise", "--tasks", str(src), "--fraction", "0.25", "--seed", "3"]) == 0
    out = tmp_path / "lf.noise0.25-seed3.json"
    (t,) = load_tasks(out)
    assert t.noisy_flag and sum(a != b for a, b in zip(t.seen, seen)) == 2


def test_ood_command(tmp_path):
    seen = tuple(ex_ints([i, i + 1], [i + 1, i]) for i in range(8))
    src = tmp_path / "lf.json"
    save_tasks([Task("lf", TaskKind.LISTFN, seen, seen, truth_program="reverse(xs)")], src)
    assert main(["ood", "--tasks", str(src), "--n", "4"]) == 0
    (t,) = load_tasks(tmp_path / "lf.ood-seed0.json")
    assert len(t.ood) == 4


def test_config_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"generate": {"miniscan": {"count": 3, "seed": 1}}, "method": "refine", "output_dir": str(tmp_path / "o")}))
    assert main(["run", "--config", str(cfg), "--method", "io", "--noisy-prompt"]) == 0
    rec = json.loads((tmp_path / "o" / "traces.jsonl").read_text().splitlines()[0])
    assert rec["method"] == "io" and rec["api_calls"] == 10


def test_strict_abort(tmp_path, capsys):
    tasks = tmp_path / "ms.json"
    main(["gen", "miniscan", "--count", "1", "--out", str(tasks)])
    script = tmp_path / "empty.json"
    script.write_text("{}")
    args = ["run", "--tasks", str(tasks), "--script", str(script), "--out", str(tmp_path / "o")]
    assert main(args + ["--strict"]) == 2
    assert "aborted" in capsys.readouterr().err
    assert main(args) == 0


def test_report_costs(tmp_path, capsys):
    tasks = tmp_path / "ms.json"
    main(["gen", "miniscan", "--count", "2", "--out", str(tasks)])
    main(["run", "--tasks", str(tasks), "--method", "io", "--out", str(tmp_path / "o")])
    capsys.readouterr()
    assert main(["report", "--traces", str(tmp_path / "o" / "traces.jsonl"), "--costs"]) == 0
    assert "mean_cost_cents" in capsys.readouterr().out


def test_missing_file_is_error(tmp_path, capsys):
    assert main(["report", "--traces", str(tmp_path / "nope.jsonl")]) == 1


def test_parser_choices():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--method", "magic"])
