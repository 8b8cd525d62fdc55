import json

import numpy as np
import pytest
import yaml

from cfeval import pipeline
from cfeval.errors import ConfigError, DataError
from cfeval.pipeline import RunConfig, cmd_evaluate, cmd_explain, cmd_full, cmd_train, load_config, split_indices


def _cfg(tmp_path, **over):
    d = {
        "seed": 3,
        "out": str(tmp_path / "runs"),
        "dataset": {"source": "synthetic", "n_features": 4, "n_instances": 300, "vocab_size": 3},
        "explainers": ["random", "omission", "whitebox"],
    }
    d.update(over)
    return RunConfig.from_dict(d)


def test_split_sizes_and_disjointness():
    tr, va, te = split_indices(1000, 0)
    assert (len(tr), len(va), len(te)) == (800, 100, 100)
    assert len(set(tr) | set(va) | set(te)) == 1000
    assert np.array_equal(split_indices(1000, 0)[0], tr)


def test_config_validation():
    with pytest.raises(ConfigError, match="unknown config key"):
        RunConfig.from_dict({"seed": 1, "dataset": {"source": "synthetic"}, "colour": 1})
    with pytest.raises(ConfigError, match="seed"):
        RunConfig.from_dict({"dataset": {"source": "synthetic"}})
    with pytest.raises(ConfigError, match="cf_mode"):
        RunConfig.from_dict({"seed": 1, "dataset": {"source": "synthetic"}, "cf_mode": "sideways"})
    with pytest.raises(ConfigError, match="unknown explainer"):
        RunConfig.from_dict({"seed": 1, "dataset": {"source": "synthetic"}, "explainers": ["anchor"]})
    with pytest.raises(ConfigError, match="optimizer"):
        RunConfig.from_dict({"seed": 1, "dataset": {"source": "synthetic"}, "optimizer": {"momentum": 0.9}})
    with pytest.raises(ConfigError, match="lime"):
        RunConfig.from_dict({"seed": 1, "dataset": {"source": "synthetic"}, "explainers": {"lime": {"bogus": 1}}})


def test_digest_ignores_out_and_workers(tmp_path):
    a = _cfg(tmp_path)
    b = _cfg(tmp_path / "elsewhere", workers=4)
    assert a.digest() == b.digest()
    assert a.digest() != _cfg(tmp_path, seed=4).digest()
    assert a.run_dir.name == f"run-{a.digest()[:12]}"


def test_train_on_separable_synthetic(tmp_path):
    cfg = _cfg(tmp_path)
    s1 = cmd_train(cfg)
    assert s1["test_accuracy"] >= 0.95
    assert cmd_train(cfg) == s1
    assert json.loads((cfg.run_dir / "train.json").read_text()) == s1


def test_train_needs_labels(tmp_path, occupation_files):
    _, schema = occupation_files
    csv = tmp_path / "nolabel.csv"
    csv.write_text("race,gender,agegroup\n" + "white,male,17-34\n" * 20)
    cfg = _cfg(tmp_path, dataset={"source": "tabular", "csv": str(csv), "schema": str(schema)})
    with pytest.raises(DataError, match="label"):
        cmd_train(cfg)


def test_explain_files(tmp_path):
    cfg = _cfg(tmp_path)
    cmd_train(cfg)
    first = {n: p.read_text() for n, p in cmd_explain(cfg).items()}
    assert set(first) == {"random", "omission", "whitebox"}
    assert all(len(line.split()) == 1 for text in first.values() for line in text.splitlines())
    assert {n: p.read_text() for n, p in cmd_explain(cfg).items()} == first


def test_explain_before_train(tmp_path):
    with pytest.raises(DataError, match="run 'train' first"):
        cmd_explain(_cfg(tmp_path))


def test_whitebox_is_first_on_ground_truth(tmp_path):
    cfg = _cfg(tmp_path)
    cmd_train(cfg)
    cmd_explain(cfg)
    rep = cmd_evaluate(cfg)
    assert rep.metrics["ground_truth"]["whitebox"] == 1.0
    assert rep.rankings["ground_truth"].rank_of("whitebox") <= 1.5  # omission may tie on a linear model
    assert "1.0000 (1" in (cfg.run_dir / "table1.md").read_text()


def test_single_explainer_correlations_undefined(tmp_path):
    cfg = _cfg(tmp_path, explainers=["omission"])
    cmd_full(cfg)
    rep = json.loads((cfg.run_dir / "report.json").read_text())
    assert all(v is None for v in rep["correlations"].values())


def test_discrete_on_embedded_fails_before_compute(tmp_path):
    cfg = _cfg(tmp_path, dataset={"source": "synthetic", "kind": "embedded", "n_features": 3, "n_instances": 50})
    with pytest.raises(DataError, match="embedded"):
        pipeline.run_in_memory(cfg)
    assert not cfg.run_dir.exists()


def test_full_run_directory(tmp_path):
    cfg = _cfg(tmp_path, removal_modes=["delete", "mask"], traces=True, L=2)
    run = cmd_full(cfg)
    names = {p.name for p in run.iterdir()}
    assert {"model.txt", "train.json", "explanations", "report.json", "table1.md", "table2.md", "table3.md",
            "scores.csv", "traces"} <= names
    assert sorted(p.name for p in (run / "explanations").iterdir()) == ["omission.txt", "random.txt", "whitebox.txt"]
    rep = json.loads((run / "report.json").read_text())
    assert rep["config"]["seed"] == 3 and "out" not in rep["config"]


def test_full_run_is_byte_identical(tmp_path):
    a = cmd_full(_cfg(tmp_path / "a"))
    b = cmd_full(_cfg(tmp_path / "b"))
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_adding_an_explainer_leaves_others_unchanged(tmp_path):
    r1, _ = pipeline.run_in_memory(_cfg(tmp_path, explainers=["random", "omission"]))
    r2, _ = pipeline.run_in_memory(_cfg(tmp_path, explainers=["random", "omission", "lime"]))
    for name in ("random", "omission"):
        assert r1.scores[name] == r2.scores[name]


def test_external_explanations(tmp_path):
    cfg = _cfg(tmp_path, explainers=["whitebox"])
    cmd_train(cfg)
    n_test = len(pipeline.splits(cfg)["test"])
    ext = tmp_path / "mine.txt"
    ext.write_text("0\n" * n_test)
    cfg2 = _cfg(tmp_path, explainers=["whitebox"], external_explanations={"mine": str(ext)})
    # the external file changes the config digest, so reuse the trained model
    cmd_train(cfg2)
    cmd_explain(cfg2)
    rep = cmd_evaluate(cfg2)
    assert rep.explainers == ["whitebox", "mine"]
    bad = tmp_path / "bad.txt"
    bad.write_text("0\n")
    cfg3 = _cfg(tmp_path, explainers=["whitebox"], external_explanations={"bad": str(bad)})
    cmd_train(cfg3)
    with pytest.raises(DataError, match="explanations for"):
        cmd_explain(cfg3)


def test_continuous_text_pipeline(tmp_path):
    rng = np.random.default_rng(0)
    words = [f"w{k}" for k in range(12)]
    vecs = rng.normal(size=(12, 3))
    (tmp_path / "emb.txt").write_text("".join(f"{w} " + " ".join(f"{v:.6f}" for v in row) + "\n" for w, row in zip(words, vecs)))
    direction = np.array([1.0, -0.5, 0.25])
    lines = []
    for _ in range(120):
        toks = list(rng.choice(12, size=4))
        label = int(sum(vecs[t] @ direction for t in toks) > 0)
        lines.append(f"{label}\t" + " ".join(words[t] for t in toks))
    (tmp_path / "corpus.tsv").write_text("\n".join(lines) + "\n")
    config = {
        "seed": 1,
        "dataset": {"source": "text", "corpus": "corpus.tsv", "embeddings": "emb.txt", "max_len": 4},
        "cf_mode": "continuous",
        "explainers": ["random", "omission", "whitebox"],
        "optimizer": {"alpha": 5.0, "max_iters": 100},
        "removal_modes": ["delete", "mask"],
        "out": str(tmp_path / "runs"),
    }
    (tmp_path / "cfg.yaml").write_text(yaml.safe_dump(config))
    cfg = load_config(tmp_path / "cfg.yaml")
    rep = cmd_evaluate_full(cfg)
    assert rep["cf_mode"] == "continuous"
    assert rep["metrics"]["ground_truth"]["whitebox"] == 1.0
    for name in rep["explainers"]:
        m = rep["metrics"]
        assert m["ces"][name] == pytest.approx(m["validity"][name] / m["proximity"][name], abs=1e-12)


def cmd_evaluate_full(cfg):
    run = cmd_full(cfg)
    return json.loads((run / "report.json").read_text())


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: [1,\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("3\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(scalar)
