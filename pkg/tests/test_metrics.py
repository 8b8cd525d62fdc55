import math

import numpy as np
import pytest

from cfeval.blackbox import LogisticModel, Prediction, predict
from cfeval.counterfactual import CounterfactualResult, batch_counterfactuals
from cfeval.dataset import Dataset, FeatureSchema, FeatureSpec, Instance, SyntheticSpec, encode, synthesize
from cfeval.errors import NumericalError
from cfeval.explanation import Explanation
from cfeval.metrics import (
    ces,
    ces_soft,
    comprehensiveness,
    dfr,
    erase,
    erasure_drops,
    proximity,
    sufficiency,
    validity,
    validity_soft,
)


def _result(flipped=False, dist=1.0, p_orig1=0.9, p_cf1=None):
    orig = Prediction.from_p1(p_orig1)
    if p_cf1 is None:
        p_cf1 = 0.1 if flipped else p_orig1
    cf = Prediction.from_p1(p_cf1)
    return CounterfactualResult(
        original=Instance((0,)),
        explanation=Explanation((0,)),
        original_prediction=orig,
        edited_values={},
        y_cf=cf.label,
        p_cf=cf.probs,
        flipped=flipped,
        distance=dist,
    )


def _schema(sizes):
    return FeatureSchema([FeatureSpec.categorical(f"f{j}", [str(v) for v in range(s)]) for j, s in enumerate(sizes)])


# ---------------------------------------------------------- counterfactual


def test_validity_examples():
    assert validity([_result(False)] * 3) == 0.0
    assert validity([_result(True)] * 3) == 1.0
    assert validity([_result(True), _result(False), _result(True), _result(False)]) == 0.5


def test_proximity_examples():
    assert proximity([_result(dist=1.0), _result(dist=3.0)]) == 2.0
    assert proximity([_result(dist=math.sqrt(2))] * 5) == pytest.approx(1.4142, abs=1e-4)


def test_ces_examples():
    assert ces([_result(True, 1.0), _result(False, 1.0)]) == 0.5
    # Adults random row: 0.0682 / 1.414 rounds to 0.0482
    assert round(0.0682 / 1.414, 4) == 0.0482


def test_ces_is_validity_over_proximity():
    rng = np.random.default_rng(0)
    rs = [_result(bool(rng.random() < 0.3), float(rng.uniform(0.5, 2))) for _ in range(50)]
    assert ces(rs) == pytest.approx(validity(rs) / proximity(rs), abs=1e-12)


def test_ces_undefined_for_zero_distance():
    with pytest.raises(NumericalError):
        ces([_result(dist=0.0)])


def test_soft_examples():
    assert validity_soft([_result(p_orig1=0.8, p_cf1=0.8)]) == 0.0
    rs = [_result(p_orig1=0.9, p_cf1=0.7), _result(p_orig1=0.9, p_cf1=0.5)]
    assert validity_soft(rs) == pytest.approx(0.3)
    assert validity_soft([_result(p_orig1=0.7, p_cf1=0.9)]) == pytest.approx(-0.2)
    rs = [_result(p_orig1=0.9, p_cf1=0.6, dist=1.0), _result(p_orig1=0.9, p_cf1=0.6, dist=2.0)]
    assert ces_soft(rs) == pytest.approx(0.2)
    assert ces_soft([_result(p_orig1=0.9, p_cf1=0.9, dist=2.0)]) == 0.0


def test_soft_with_explicit_predictions():
    rs = [_result(p_orig1=0.9, p_cf1=0.7)]
    assert validity_soft(rs, [Prediction.from_p1(0.8)]) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        validity_soft(rs, [])


def test_metrics_ignore_instance_order():
    rng = np.random.default_rng(1)
    rs = [_result(bool(rng.random() < 0.5), float(rng.uniform(0.5, 2)), 0.9, float(rng.random())) for _ in range(30)]
    perm = [rs[i] for i in rng.permutation(len(rs))]
    for fn in (validity, proximity, ces, validity_soft, ces_soft):
        assert fn(perm) == pytest.approx(fn(rs), abs=1e-14)


def test_single_feature_one_hot_edits_give_ces_validity_over_sqrt2():
    data, model = synthesize(SyntheticSpec(n_features=4, n_instances=80), 5)
    expl = [Explanation((j % 4,)) for j in range(len(data))]
    rs = batch_counterfactuals(model, data, expl, "discrete")
    assert proximity(rs) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert ces(rs) == pytest.approx(validity(rs) / math.sqrt(2), abs=1e-12)


# ----------------------------------------------------------------- erasure


def test_erase_delete_zeroes_span(cat_schema):
    rep = encode(Instance((1, 2, 3)), cat_schema)
    out = erase(rep, Explanation((1,)), "delete", cat_schema)
    a, b = cat_schema.spans[1]
    assert np.all(out.vector[a:b] == 0.0)
    mask = np.ones(len(rep), bool)
    mask[a:b] = False
    assert np.array_equal(out.vector[mask], rep.vector[mask])
    assert np.array_equal(erase(out, Explanation((1,)), "delete", cat_schema).vector, out.vector)


def test_erase_mask_uses_mask_embedding(emb_schema, emb_table):
    rep = encode(Instance((0, 1, 2)), emb_schema)
    out = erase(rep, Explanation((2, 0)), "mask", emb_schema)
    assert np.array_equal(out.span(0), emb_table.mask_vector)
    assert np.array_equal(out.span(2), emb_table.mask_vector)
    assert np.array_equal(out.span(1), rep.span(1))


def _data(schema, n, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(schema, tuple(Instance(tuple(int(rng.integers(f.n_values)) for f in schema)) for _ in range(n)))


def test_zero_weight_model_scores_zero(cat_schema):
    data = _data(cat_schema, 20)
    model = LogisticModel(np.zeros(cat_schema.width), 0.3)
    expl = [Explanation((0,))] * 20
    assert comprehensiveness(model, data, expl) == 0.0
    assert sufficiency(model, data, expl) == 0.0
    assert dfr(model, data, expl) == 0.0


def test_erasing_everything_leaves_the_bias(cat_schema):
    data = _data(cat_schema, 30, 1)
    rng = np.random.default_rng(2)
    model = LogisticModel(rng.normal(size=cat_schema.width), 0.0)
    expl = [Explanation((0, 1, 2))] * 30
    p = [max(predict(model, row).probs) for row in data.matrix]
    assert comprehensiveness(model, data, expl) == pytest.approx(np.mean(p) - 0.5, abs=1e-12)
    assert sufficiency(model, data, expl) == 0.0


def test_dead_feature_contributes_nothing(cat_schema):
    data = _data(cat_schema, 10)
    w = np.random.default_rng(3).normal(size=cat_schema.width)
    a, b = cat_schema.spans[1]
    w[a:b] = 0.0
    assert comprehensiveness(LogisticModel(w), data, [Explanation((1,))] * 10) == pytest.approx(0.0, abs=1e-15)


def test_comp_equals_suff_of_complement(cat_schema):
    data = _data(cat_schema, 25, 4)
    model = LogisticModel(np.random.default_rng(4).normal(size=cat_schema.width), 0.2)
    e = [Explanation((0,))] * 25
    comp_e = [Explanation((1, 2))] * 25
    for mode in ("delete", "mask"):
        assert comprehensiveness(model, data, e, mode) == pytest.approx(sufficiency(model, data, comp_e, mode), abs=1e-15)


def test_dfr_matches_per_instance_drops(cat_schema):
    data = _data(cat_schema, 40, 5)
    model = LogisticModel(np.random.default_rng(5).normal(scale=2, size=cat_schema.width), 0.1)
    expl = [Explanation((i % 3,)) for i in range(40)]
    drop, flips = erasure_drops(model, data, expl, "delete")
    p_hat = np.array([max(predict(model, row).probs) for row in data.matrix])
    # a flip happens exactly when p(y_hat) falls to 0.5 or below
    # (for y_hat = 0, p = 0.5 stays class 0, so the strict side differs)
    y_hat = model.labels(data.matrix)
    after = p_hat - drop
    expected = np.where(y_hat == 1, after <= 0.5, after < 0.5)
    assert np.array_equal(flips, expected)
    assert 0.0 <= dfr(model, data, expl) <= 1.0


def test_every_erasure_flips():
    schema = _schema([2, 2])
    data = Dataset(schema, (Instance((0, 0)), Instance((0, 1))))
    model = LogisticModel(np.array([4.0, 0.0, 0.0, 0.0]), -1.0)
    assert dfr(model, data, [Explanation((0,))] * 2) == 1.0


def test_delete_equals_mask_with_zero_mask_embedding(emb_table):
    table = type(emb_table)(emb_table.tokens, np.vstack([emb_table.vectors[:-1], np.zeros(3)]))
    schema = FeatureSchema([FeatureSpec.embedded(f"tok{j}", table) for j in range(3)])
    data = _data(schema, 15, 6)
    model = LogisticModel(np.random.default_rng(6).normal(size=schema.width))
    expl = [Explanation((1,))] * 15
    assert comprehensiveness(model, data, expl, "delete") == comprehensiveness(model, data, expl, "mask")
