import json
import re
from pathlib import Path

import numpy as np
import pytest

from attralign.cli import main


def write_config(root, **overrides):
    cfg = {
        "synth": {"n_entities": 60, "avg_degree": 3.0, "n_literal_attrs": 2,
                  "n_digital_attrs": 1, "p_hard_name": 0.6, "literal_noise": 0.1,
                  "digital_jitter": 0.05},
        "kg1": {"relations": "out/data/kg1_rel.tsv", "attributes": "out/data/kg1_attr.tsv"},
        "kg2": {"relations": "out/data/kg2_rel.tsv", "attributes": "out/data/kg2_attr.tsv"},
        "gold": "out/data/gold.tsv",
        "dim": 32,
        "train": {"epochs": 8, "negatives_per_entity": 20, "learning_rate": 0.01,
                  "l2": 0.001, "neg_refresh_epochs": 4, "gamma": 0.4},
        "ensemble": "avg",
        "eval_ns": [1, 10],
        "out_dir": "out",
        "seed": 11,
    }
    cfg.update(overrides)
    path = Path(root) / "run.json"
    path.write_text(json.dumps(cfg, indent=1), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full synth -> eval pipeline run, shared by the assertions below."""
    root = tmp_path_factory.mktemp("pipeline")
    config = write_config(root)
    for command in ("synth", "hardsplit", "partition", "train", "infer", "ensemble", "eval"):
        assert main([command, "--config", str(config)]) == 0, command
    return root, config


def test_pipeline_artifacts_exist(pipeline):
    root, _ = pipeline
    out = root / "out"
    for name in ("data/kg1_rel.tsv", "data/gold.tsv", "split/train.tsv", "split/test.tsv",
                 "split/scores.tsv", "partition_manifest.json", "channel_literal.params",
                 "channel_literal.json", "loss_literal.csv", "sim_literal.txt",
                 "sim_ensemble.txt", "report_ensemble.json"):
        assert (out / name).exists(), name


def test_partition_manifest_counts(pipeline):
    root, _ = pipeline
    manifest = json.loads((root / "out" / "partition_manifest.json").read_text())
    for tag in ("kg1", "kg2"):
        counts = manifest[tag]["attribute_triples"]
        assert counts["structure"] == 0
        assert counts["name"] == manifest[tag]["entities"]
        total = counts["literal"] + counts["digital"] + counts["name"]
        assert total > manifest[tag]["entities"]


def test_loss_csv_format(pipeline):
    root, _ = pipeline
    lines = (root / "out" / "loss_literal.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss"
    assert len(lines) == 9
    for i, line in enumerate(lines[1:], start=1):
        epoch, loss = line.split(",")
        assert int(epoch) == i
        assert np.isfinite(float(loss))


def test_report_shape(pipeline, capsys):
    root, config = pipeline
    report = json.loads((root / "out" / "report_ensemble.json").read_text())
    assert set(report) == {"hits", "mrr", "direction", "n_test"}
    assert report["n_test"] == 36
    assert 0.0 <= report["hits"]["1"] <= report["hits"]["10"] <= 1.0

    assert main(["eval", "--config", str(config), "--sim", str(root / "out" / "sim_literal.txt")]) == 0
    shown = capsys.readouterr().out
    assert "H@1" in shown and "H@10" in shown and "MRR" in shown
    assert (root / "out" / "report_literal.json").exists()


def test_eval_on_row_maximal_gold_prints_100(pipeline, capsys):
    root, config = pipeline
    from attralign.ensemble import SimilarityMatrix, save_similarity
    from attralign.kg import load_alignment, load_kg
    cfg = json.loads(Path(config).read_text())
    out = root / "out"
    kg1 = load_kg(out / "data/kg1_rel.tsv", out / "data/kg1_attr.tsv")
    kg2 = load_kg(out / "data/kg2_rel.tsv", out / "data/kg2_attr.tsv")
    test_pairs = load_alignment(out / "split/test.tsv", kg1, kg2)
    scores = np.full((len(test_pairs), len(test_pairs)), -0.5)
    np.fill_diagonal(scores, 1.0)
    perfect = SimilarityMatrix(rows=tuple(test_pairs.left), cols=tuple(test_pairs.right),
                               scores=scores)
    save_similarity(out / "sim_perfect.txt", perfect)
    assert main(["eval", "--config", str(config), "--sim", str(out / "sim_perfect.txt")]) == 0
    assert "100.00" in capsys.readouterr().out


def test_explain_prints_sorted_attention(pipeline, capsys):
    root, config = pipeline
    kg1_attr = (root / "out" / "data" / "kg1_attr.tsv").read_text().splitlines()
    label = kg1_attr[0].split("\t")[0]
    assert main(["explain", "--config", str(config), "--channel", "literal",
                 "--entity", label]) == 0
    shown = capsys.readouterr().out
    assert label in shown
    weights = [float(line.split()[0]) for line in shown.splitlines()[2:] if line.strip()]
    assert weights == sorted(weights, reverse=True)
    assert abs(sum(weights) - 1.0) < 1e-3


def test_svm_mode_produces_weights(pipeline):
    root, _ = pipeline
    config = write_config(root, ensemble="svm", svm_c=0.01, out_dir="out_svm",
                          synth=json.loads((root / "run.json").read_text())["synth"])
    for command in ("synth", "hardsplit", "train", "infer", "ensemble"):
        assert main([command, "--config", str(config)]) == 0, command
    weights = json.loads((root / "out_svm" / "ensemble_weights.json").read_text())
    assert len(weights["w"]) == 4
    assert weights["C"] == 0.01
    assert (root / "out_svm" / "sim_ensemble.txt").exists()


def test_grid_search_picks_by_valid_hits(pipeline):
    root, _ = pipeline
    base = json.loads((root / "run.json").read_text())
    config = write_config(
        root, synth=base["synth"], out_dir="out_grid",
        train={"epochs": 6, "negatives_per_entity": 15, "learning_rate": [0.001, 0.02],
               "l2": 0.001, "neg_refresh_epochs": 3, "gamma": 0.4})
    for command in ("synth", "hardsplit"):
        assert main([command, "--config", str(config)]) == 0
    assert main(["train", "--config", str(config), "--channel", "structure"]) == 0
    sidecar = json.loads((root / "out_grid" / "channel_structure.json").read_text())
    assert sidecar["train"]["learning_rate"] in (0.001, 0.02)


def test_featurizer_must_have_one_source(tmp_path, capsys):
    config = write_config(tmp_path, featurizer={"ngram_dim": 16, "embeddings": "x.emb"})
    assert main(["synth", "--config", str(config)]) == 0
    assert main(["hardsplit", "--config", str(config)]) == 1
    assert "ERROR" in capsys.readouterr().err


def test_error_lines_are_machine_parsable(tmp_path, capsys):
    config = write_config(tmp_path)
    # eval before anything exists
    assert main(["eval", "--config", str(config)]) == 1
    err = capsys.readouterr().err.strip()
    assert re.match(r"^ERROR [a-z_]+: .+", err), err

    missing = tmp_path / "nope.json"
    assert main(["synth", "--config", str(missing)]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("ERROR ")


def test_malformed_kg_reports_module_and_line(tmp_path, capsys):
    config = write_config(tmp_path)
    data = tmp_path / "out" / "data"
    data.mkdir(parents=True)
    (data / "kg1_rel.tsv").write_text("a\tb\n", encoding="utf-8")
    (data / "kg1_attr.tsv").write_text("", encoding="utf-8")
    (data / "kg2_rel.tsv").write_text("", encoding="utf-8")
    (data / "kg2_attr.tsv").write_text("", encoding="utf-8")
    (data / "gold.tsv").write_text("", encoding="utf-8")
    assert main(["hardsplit", "--config", str(config)]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("ERROR kg:")
    assert "line 1" in err


def test_pipeline_is_deterministic(tmp_path):
    """Same global seed twice: byte-identical reports and similarity files."""
    outputs = []
    for run in ("a", "b"):
        root = tmp_path / run
        root.mkdir()
        config = write_config(
            root,
            synth={"n_entities": 40, "avg_degree": 3.0, "n_literal_attrs": 2,
                   "n_digital_attrs": 1, "p_hard_name": 0.5, "literal_noise": 0.1,
                   "digital_jitter": 0.05},
            dim=16,
            train={"epochs": 5, "negatives_per_entity": 10, "learning_rate": 0.01,
                   "l2": 0.001, "neg_refresh_epochs": 3, "gamma": 0.4},
            seed=23)
        for command in ("synth", "hardsplit", "train", "infer", "ensemble", "eval"):
            assert main([command, "--config", str(config)]) == 0, command
        out = root / "out"
        outputs.append({
            "report": (out / "report_ensemble.json").read_bytes(),
            "sim": (out / "sim_ensemble.txt").read_bytes(),
            "sim_literal": (out / "sim_literal.txt").read_bytes(),
            "params": (out / "channel_structure.params").read_bytes(),
        })
    assert outputs[0] == outputs[1]
