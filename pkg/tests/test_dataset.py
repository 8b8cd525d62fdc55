import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfeval.blackbox import LogisticModel, ground_truth_features, predict
from cfeval.dataset import (
    Dataset,
    EmbeddingTable,
    FeatureSchema,
    FeatureSpec,
    Instance,
    SyntheticSpec,
    decode,
    encode,
    load_tabular,
    load_text,
    read_embeddings,
    synthesize,
)
from cfeval.errors import DataError


def test_load_tabular_shape(occupation_files):
    data = load_tabular(*occupation_files)
    assert len(data) == 3
    assert len(data.schema) == 3
    assert data.schema.names == ["race", "gender", "agegroup"]
    assert data.gold_labels == [1, 0, 0]
    assert data.instances[0].values == (2, 1, 0)


def test_load_tabular_rejects_unknown_value(tmp_path, occupation_files):
    _, schema = occupation_files
    bad = tmp_path / "bad.csv"
    bad.write_text("race,gender,agegroup\nwhite,female,10-16\nasian,purple,35-48\n")
    with pytest.raises(DataError, match=r"bad\.csv:3: .*'purple'.*'gender'"):
        load_tabular(bad, schema)


def test_load_tabular_missing_column(tmp_path, occupation_files):
    _, schema = occupation_files
    bad = tmp_path / "bad.csv"
    bad.write_text("race,agegroup\nwhite,10-16\n")
    with pytest.raises(DataError, match="missing column.*gender"):
        load_tabular(bad, schema)


def test_load_tabular_empty(tmp_path, occupation_files):
    _, schema = occupation_files
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_tabular(empty, schema)
    header_only = tmp_path / "header.csv"
    header_only.write_text("race,gender,agegroup\n")
    with pytest.raises(DataError, match="no data rows"):
        load_tabular(header_only, schema)


def test_load_tabular_without_label(tmp_path, occupation_files):
    _, schema = occupation_files
    f = tmp_path / "nolabel.csv"
    f.write_text("race,gender,agegroup\nwhite,male,17-34\n")
    data = load_tabular(f, schema)
    assert data.gold_labels == [None]


def test_occupation_row_round_trips(occupation_files):
    data = load_tabular(*occupation_files)
    inst = data.instances[0]
    assert data.schema[2].value_label(inst.values[2]) == "10-16"
    rep = encode(inst, data.schema)
    assert decode(rep, data.schema).values == inst.values


def test_loaders_are_deterministic(occupation_files):
    a = load_tabular(*occupation_files)
    b = load_tabular(*occupation_files)
    assert a.instances == b.instances
    assert np.array_equal(a.matrix, b.matrix)


# ------------------------------------------------------------------- text


@pytest.fixture
def text_files(tmp_path):
    emb = tmp_path / "emb.txt"
    emb.write_text("good 1 0\nbad -1 0\nfilm 0 1\nplot 0 -1\n")
    corpus = tmp_path / "corpus.tsv"
    corpus.write_text("1\tgood film good plot\n0\tbad bad plot film dull and long\n")
    return corpus, emb


def test_load_text_pads_with_mask(text_files):
    data = load_text(*text_files, max_len=5)
    table = data.schema[0].table
    assert len(data) == 2 and len(data.schema) == 5
    first = [table.tokens[t] for t in data.instances[0].values]
    assert first == ["good", "film", "good", "plot", "<unk>"]
    assert data.gold_labels == [1, 0]


def test_load_text_truncates_and_counts_oov(text_files):
    data = load_text(*text_files, max_len=6)
    table = data.schema[0].table
    second = [table.tokens[t] for t in data.instances[1].values]
    # "dull" and "and" are not in the embedding file
    assert second == ["bad", "bad", "plot", "film", "<unk>", "<unk>"]
    assert data.info["oov_tokens"] == 2


def test_mask_token_added_with_zero_vector(text_files):
    table = read_embeddings(text_files[1])
    assert table.mask_token == "<unk>"
    assert np.array_equal(table.mask_vector, [0.0, 0.0])


def test_ragged_embedding_row(tmp_path):
    emb = tmp_path / "emb.txt"
    emb.write_text("a 1 2 3\nb 1 2\n")
    with pytest.raises(DataError, match=r"emb\.txt:2: expected 3 values, got 2"):
        read_embeddings(emb)


def test_empty_corpus(tmp_path, text_files):
    empty = tmp_path / "empty.tsv"
    empty.write_text("\n")
    with pytest.raises(DataError, match="empty"):
        load_text(empty, text_files[1], max_len=3)


def test_text_schema_kind_rejected_in_tabular_schema(tmp_path):
    schema = tmp_path / "s.yaml"
    schema.write_text("features:\n  - name: x\n    kind: ordinal\n")
    from cfeval.dataset import load_schema

    with pytest.raises(DataError, match="unknown kind"):
        load_schema(schema)


def test_tabular_schema_with_embedded_column(tmp_path, text_files):
    _, emb = text_files
    schema = tmp_path / "s.yaml"
    schema.write_text(
        "features:\n  - name: color\n    kind: categorical\n    vocabulary: [red, blue]\n"
        f"  - name: word\n    kind: embedded\n    embedding_path: {emb.name}\n"
    )
    (tmp_path / emb.name).write_text(emb.read_text()) if emb.parent != tmp_path else None
    csv = tmp_path / "d.csv"
    csv.write_text("color,word\nred,good\nblue,zebra\n")
    data = load_tabular(csv, schema)
    assert data.schema.width == 2 + 2
    assert data.info["oov_tokens"] == 1


# ----------------------------------------------------------- schema checks


def test_schema_invariants(emb_table):
    with pytest.raises(DataError, match="empty vocabulary"):
        FeatureSpec.categorical("a", [])
    with pytest.raises(DataError, match="duplicate"):
        FeatureSpec.categorical("a", ["x", "x"])
    with pytest.raises(DataError, match="unique"):
        FeatureSchema([FeatureSpec.categorical("a", ["x"]), FeatureSpec.categorical("a", ["y"])])
    with pytest.raises(DataError, match="mask token"):
        EmbeddingTable(("a", "b"), np.zeros((2, 3)))
    with pytest.raises(DataError, match="vectors of shape"):
        EmbeddingTable(("a", "<unk>"), np.zeros((3, 3)))


def test_instance_validation(cat_schema):
    with pytest.raises(DataError, match="3 features"):
        cat_schema.validate(Instance((0, 1)))
    with pytest.raises(DataError, match="out of range"):
        cat_schema.validate(Instance((0, 3, 0)))
    with pytest.raises(DataError, match="instance 1"):
        Dataset(cat_schema, (Instance((0, 0, 0)), Instance((2, 0, 0))))
    with pytest.raises(DataError, match="empty"):
        Dataset(cat_schema, ())


# ----------------------------------------------------------------- encode


def test_one_hot_span():
    schema = FeatureSchema([FeatureSpec.categorical("a", ["x", "y", "z"])])
    assert encode(Instance((1,)), schema).vector.tolist() == [0.0, 1.0, 0.0]


def test_layout_length():
    schema = FeatureSchema([FeatureSpec.categorical("a", ["x", "y"]), FeatureSpec.categorical("b", ["p", "q", "r"])])
    rep = encode(Instance((0, 2)), schema)
    assert len(rep) == 5
    assert rep.spans == ((0, 2), (2, 5))


def test_single_edit_distance_is_sqrt2(cat_schema):
    a = encode(Instance((0, 1, 2)), cat_schema).vector
    b = encode(Instance((0, 2, 2)), cat_schema).vector
    assert np.sqrt(((a - b) ** 2).sum()) == pytest.approx(1.4142, abs=1e-4)
    assert np.linalg.norm(a - b) == math.sqrt(2)


def test_embedded_lookup(emb_schema, emb_table):
    rep = encode(Instance((3, 0, 4)), emb_schema)
    assert np.array_equal(rep.span(0), emb_table.vectors[3])
    assert np.array_equal(rep.span(2), emb_table.mask_vector)
    assert decode(rep, emb_schema).values == (3, 0, 4)


def _all_instances(schema):
    return [Instance(v) for v in itertools.product(*(range(f.n_values) for f in schema))]


def test_encode_is_injective(cat_schema):
    vecs = {encode(inst, cat_schema).vector.tobytes() for inst in _all_instances(cat_schema)}
    assert len(vecs) == 2 * 3 * 4


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_k_edits_give_sqrt_2k(data):
    sizes = data.draw(st.lists(st.integers(2, 5), min_size=1, max_size=6))
    schema = FeatureSchema([FeatureSpec.categorical(f"f{j}", [str(v) for v in range(s)]) for j, s in enumerate(sizes)])
    a = [data.draw(st.integers(0, s - 1)) for s in sizes]
    b = [data.draw(st.integers(0, s - 1)) for s in sizes]
    k = sum(x != y for x, y in zip(a, b))
    d = np.linalg.norm(encode(Instance(a), schema).vector - encode(Instance(b), schema).vector)
    assert d == pytest.approx(math.sqrt(2 * k), abs=1e-12)


# -------------------------------------------------------------- synthetic


def test_synthesize_is_deterministic():
    spec = SyntheticSpec(n_features=4, n_instances=100, vocab_size=3)
    d1, m1 = synthesize(spec, 7)
    d2, m2 = synthesize(spec, 7)
    assert d1.instances == d2.instances
    assert np.array_equal(d1.matrix, d2.matrix)
    assert np.array_equal(m1.weights, m2.weights)
    d3, _ = synthesize(spec, 8)
    assert d3.instances != d1.instances


def test_synthesize_labels_follow_planted_model():
    data, model = synthesize(SyntheticSpec(n_features=5, n_instances=300), 1)
    assert [predict(model, row).label for row in data.matrix] == data.gold_labels
    assert 0 < sum(data.gold_labels) < 300


def test_synthesize_single_instance():
    data, _ = synthesize(SyntheticSpec(n_features=3, n_instances=1), 0)
    assert len(data) == 1


def test_synthesize_embedded():
    data, model = synthesize(SyntheticSpec(n_features=4, n_instances=20, kind="embedded", dim=3, n_tokens=6), 2)
    assert data.schema.width == 12
    assert model.dim == 12
    table = data.schema[0].table
    assert table.mask_id not in set(data.values.ravel().tolist())


@pytest.mark.parametrize(
    "spec",
    [
        SyntheticSpec(n_features=0, n_instances=10),
        SyntheticSpec(n_features=2, n_instances=10, vocab_size=(3, 0)),
        SyntheticSpec(n_features=2, n_instances=0),
        SyntheticSpec(n_features=2, n_instances=5, kind="image"),
    ],
)
def test_synthesize_degenerate(spec):
    with pytest.raises(DataError):
        synthesize(spec, 0)


def test_dominant_weight_is_top_ground_truth():
    data, _ = synthesize(SyntheticSpec(n_features=4, n_instances=60, vocab_size=3), 3)
    rng = np.random.default_rng(3)
    w = rng.normal(scale=0.05, size=data.schema.width)
    a, b = data.schema.spans[2]
    w[a:b] = [4.0, -4.0, 0.0]
    model = LogisticModel(w, 0.0)
    for inst in data.instances:
        # brute-force per-feature effects: weight of the active one-hot entry
        effects = [w[data.schema.spans[j][0] + v] for j, v in enumerate(inst.values)]
        if effects[2] != 0.0:
            assert ground_truth_features(model, data.schema, inst, 1).feature_indices == (2,)
