import json

import pytest

from smg.cli import main
from smg.layers import ModelConfig, SmgModel, save_checkpoint

from conftest import MUTAG_DIR


def run(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(list(argv)))
    out, err = capsys.readouterr()
    return exc.value.code, out, err


def test_verify_single_suite(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--suite", "lemma1", "--trials", "10", "--out", str(tmp_path / "r.json"))
    report = json.loads(out)
    assert code == 0 and report["passed"] and report["instances"] == 10
    assert json.loads((tmp_path / "r.json").read_text()) == report


def test_verify_all(capsys):
    code, out, _ = run(capsys, "verify", "--trials", "5")
    payload = json.loads(out)
    assert code == 0 and payload["passed"] and len(payload["suites"]) == 7


def test_inspect_dataset(capsys):
    code, out, _ = run(capsys, "inspect-dataset", "--path", str(MUTAG_DIR))
    assert code == 0 and out.strip() == "188 graphs, 2 classes, avg nodes 17.9"
    code, out, _ = run(capsys, "inspect-dataset", "--path", str(MUTAG_DIR), "--json")
    assert json.loads(out)["graphs"] == 188


def test_missing_dataset_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "inspect-dataset", "--path", str(tmp_path / "nope"))
    assert code == 3 and json.loads(err.strip().splitlines()[-1])["error"] == "dataset"


def test_usage_error(capsys):
    code, _, err = run(capsys, "train")
    assert code == 2 and json.loads(err.strip().splitlines()[-1])["exit_code"] == 2


def test_off_grid_config_rejected(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--dataset", str(MUTAG_DIR), "--hidden", "48", "--run-dir", str(tmp_path))
    assert code == 4 and "off-grid" in err


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 5, "folds": 2, "mask_snapshots": 1}))
    toy = tmp_path / "MINI"
    toy.mkdir()
    # first 12 MUTAG graphs keep the run short
    names = ["A", "graph_indicator", "graph_labels", "node_labels"]
    lines = {n: (MUTAG_DIR / f"MUTAG_{n}.txt").read_text().splitlines() for n in names}
    nodes = sum(1 for x in lines["graph_indicator"] if int(x) <= 12)
    (toy / "MINI_graph_indicator.txt").write_text("\n".join(lines["graph_indicator"][:nodes]) + "\n")
    (toy / "MINI_node_labels.txt").write_text("\n".join(lines["node_labels"][:nodes]) + "\n")
    (toy / "MINI_graph_labels.txt").write_text("\n".join(lines["graph_labels"][:12]) + "\n")
    edges = [e for e in lines["A"] if int(e.split(",")[0]) <= nodes]
    (toy / "MINI_A.txt").write_text("\n".join(edges) + "\n")

    run_dir = tmp_path / "run"
    code, out, _ = run(capsys, "train", "--dataset", str(toy), "--config", str(cfg), "--epochs", "2",
                       "--run-dir", str(run_dir))
    assert code == 0 and len(json.loads(out)["fold_accuracies"]) == 2
    written = json.loads((run_dir / "config.json").read_text())
    assert written["epochs"] == 2 and written["folds"] == 2

    code, out, _ = run(capsys, "export-masks", "--checkpoint", str(run_dir / "checkpoints" / "fold_0.ckpt"),
                       "--dataset", str(toy), "--graphs", "0", "3", "--out", str(tmp_path / "masks"))
    assert code == 0 and len(json.loads(out)["files"]) == 6


def test_export_rejects_mismatched_checkpoint(capsys, tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(SmgModel(ModelConfig(in_dim=3, hidden=4, layers=1)), path)
    code, _, err = run(capsys, "export-masks", "--checkpoint", str(path), "--dataset", str(MUTAG_DIR))
    assert code == 5 and "width" in err


def test_bad_config_file(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    code, _, err = run(capsys, "train", "--dataset", str(MUTAG_DIR), "--config", str(cfg))
    assert code == 4
