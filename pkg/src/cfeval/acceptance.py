"""Release acceptance checks.

Each check returns an :class:`Outcome`; ``passed=None`` marks a check that is
deliberately skipped (with the reason in ``detail``). Brute-force oracles
here are written independently of the code they check: they re-derive
logits from per-value weights and count rank pairs with plain loops.
"""

from __future__ import annotations

import itertools
import math
import tempfile
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .blackbox import LogisticModel, predict
from .counterfactual import (
    OptimizerConfig,
    continuous_search,
    discrete_search,
    free_coordinates,
    relaxed_objective,
)
from .dataset import EmbeddingTable, FeatureSchema, FeatureSpec, Instance, SyntheticSpec, encode, synthesize
from .explanation import Explanation
from .metrics import ces, proximity, validity
from .pipeline import RunConfig, cmd_full, run_in_memory, synthetic_config
from .rankstats import kendall_tau, spearman_rho
from .report import rank_table

EXPLAINER_ORDER = ("Random", "Omission", "LIME", "Anchor", "DecisionBoundary", "LogisticRegression")

# Reference benchmark scores, one value per explainer in EXPLAINER_ORDER.
# "01536" in the source table is read as 0.1536.
ADULTS = {
    "comp_delete": (0.0217, 0.0314, 0.1228, 0.1372, 0.1396, 0.1661),
    "suff_delete": (0.2744, 0.2546, 0.1536, 0.1483, 0.1466, 0.1096),
    "dfr_delete": (0.0587, 0.0436, 0.2378, 0.3163, 0.3812, 0.3807),
    "validity": (0.0682, 0.0689, 0.2844, 0.2073, 0.2736, 0.3565),
    "ces": (0.0483, 0.0487, 0.2012, 0.1466, 0.1935, 0.2521),
    "validity_soft": (0.0196, 0.0274, 0.1148, 0.1118, 0.1105, 0.1721),
    "ces_soft": (0.0069, 0.0092, 0.0462, 0.0281, 0.0453, 0.0667),
    "ground_truth": (0.0746, 0.1033, 0.6466, 0.2334, 0.3173, 1.0),
}
ADULTS_PROXIMITY = 1.414
MOVIE_REVIEWS = {
    "comp_delete": (0.0376, 0.0483, 0.0868, 0.1956, 0.0391, 0.2272),
    "comp_mask": (0.0358, 0.0499, 0.0872, 0.2162, 0.0432, 0.2225),
    "dfr_delete": (0.0838, 0.0972, 0.1365, 0.2566, 0.0765, 0.2898),
    "validity": (0.8743, 0.8920, 0.9102, 0.9197, 0.8944, 0.1099),
    "proximity": (0.1573, 0.1405, 0.1194, 0.1088, 0.1376, 0.0775),
    "ces": (5.5590, 6.3479, 7.6240, 8.4492, 6.5007, 12.2585),
    "validity_soft": (0.7769, 0.7953, 0.8147, 0.8216, 0.7969, 0.8517),
    "ces_soft": (6.3586, 7.1169, 8.3763, 9.1873, 7.2681, 12.9077),
    "ground_truth": (0.0790, 0.0492, 0.3065, 0.539, 0.0946, 1.0),
}
# (table, metric) -> published (tau, rho)
CORRELATION_TARGETS = {
    ("adults", "dfr_delete"): (0.4667, 0.6571),
    ("adults", "comp_delete"): (0.7333, 0.8285),
    ("adults", "ces"): (1.0, 1.0),
    ("movie_reviews", "ces"): (0.8666, 0.9428),
}
CORRELATION_TOL = 1e-3


@dataclass
class Outcome:
    passed: bool | None
    detail: str


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    check: Callable[[], Outcome]


def table_rows(table: dict) -> dict[str, dict[str, float]]:
    return {k: dict(zip(EXPLAINER_ORDER, v)) for k, v in table.items()}


# ---------------------------------------------------------------- 1


def check_table2_arithmetic() -> Outcome:
    tables = {"adults": ADULTS, "movie_reviews": MOVIE_REVIEWS}
    lines, ok = [], True
    for (table, metric), (tau_ref, rho_ref) in CORRELATION_TARGETS.items():
        _, corr = rank_table(table_rows(tables[table]))
        tau, rho = corr[metric]["tau"], corr[metric]["rho"]
        good = abs(tau - tau_ref) <= CORRELATION_TOL and abs(rho - rho_ref) <= CORRELATION_TOL
        ok &= good
        lines.append(f"{table}/{metric}: tau={tau:.4f} (ref {tau_ref}) rho={rho:.4f} (ref {rho_ref})")
    return Outcome(ok, "; ".join(lines))


# ---------------------------------------------------------------- 2


def _single_feature_results(seed: int = 0, n: int = 200):
    data, model = synthesize(SyntheticSpec(n_features=6, n_instances=n, vocab_size=4), seed)
    rng = np.random.default_rng(seed)
    results = []
    for i, inst in enumerate(data.instances):
        expl = Explanation((int(rng.integers(len(data.schema))),))
        results.append(discrete_search(model, data.schema, inst, expl, seed=i))
    return results


def check_onehot_proximity() -> Outcome:
    results = _single_feature_results()
    worst = max(abs(r.distance - math.sqrt(2)) for r in results)
    prox = proximity(results)
    ok = worst <= 1e-12 and abs(prox - math.sqrt(2)) <= 1e-6 and f"{prox:.4f}" == "1.4142"
    return Outcome(ok, f"max |d - sqrt2| = {worst:.1e}; proximity = {prox:.6f}")


# ---------------------------------------------------------------- 3


def check_ces_consistency() -> Outcome:
    published = ADULTS["validity"][0] / ADULTS_PROXIMITY
    ok = abs(published - ADULTS["ces"][0]) <= 2e-4
    results = _single_feature_results(seed=3)
    worst = abs(ces(results) - validity(results) / proximity(results))
    report, _ = run_in_memory(_small_config(5))
    for name in report.explainers:
        m = report.metrics
        worst = max(worst, abs(m["ces"][name] - m["validity"][name] / m["proximity"][name]))
        worst = max(worst, abs(m["ces_soft"][name] - m["validity_soft"][name] / m["proximity_soft"][name]))
    ok &= worst <= 1e-12
    return Outcome(ok, f"0.0682/1.414 = {published:.5f} vs 0.0483; internal max deviation {worst:.1e}")


def _small_config(seed: int) -> RunConfig:
    return RunConfig.from_dict(
        {"seed": seed, "dataset": {"source": "synthetic", "n_features": 5, "n_instances": 400, "vocab_size": 3}}
    )


# ---------------------------------------------------------------- 4


def brute_force_flip_exists(weights_by_value, bias, values, feats) -> bool:
    """Enumerate every assignment of ``feats`` with a hand-computed logit."""
    def label(vals):
        z = bias + sum(weights_by_value[j][v] for j, v in enumerate(vals))
        return 1 if 1.0 / (1.0 + math.exp(-z)) > 0.5 else 0

    y = label(values)
    for combo in itertools.product(*(range(len(weights_by_value[j])) for j in feats)):
        vals = list(values)
        for j, v in zip(feats, combo):
            vals[j] = v
        if tuple(vals) != tuple(values) and label(vals) != y:
            return True
    return False


def check_discrete_oracle(n_cases: int = 50) -> Outcome:
    start = time.perf_counter()
    rng = np.random.default_rng(20240)
    agree, flips = 0, 0
    for case in range(n_cases):
        M = int(rng.integers(2, 6))
        sizes = [int(s) for s in rng.integers(2, 5, size=M)]
        schema = FeatureSchema([FeatureSpec.categorical(f"f{j}", [str(k) for k in range(v)]) for j, v in enumerate(sizes)])
        per_value = [rng.normal(size=v) for v in sizes]
        bias = float(rng.normal())
        model = LogisticModel(np.concatenate(per_value), bias)
        inst = Instance(tuple(int(rng.integers(v)) for v in sizes))
        L = int(rng.integers(1, 3))
        feats = [int(j) for j in rng.choice(M, size=L, replace=False)]
        res = discrete_search(model, schema, inst, Explanation(tuple(feats)), seed=case)
        expected = brute_force_flip_exists(per_value, bias, inst.values, feats)
        agree += res.flipped == expected
        flips += expected
    elapsed = time.perf_counter() - start
    ok = agree == n_cases and elapsed < 5.0
    return Outcome(ok, f"{agree}/{n_cases} agree ({flips} with a flip) in {elapsed:.2f}s")


# ---------------------------------------------------------------- 5


def _random_embedded_case(rng):
    d = int(rng.integers(2, 6))
    M = int(rng.integers(2, 5))
    T = int(rng.integers(3, 8))
    tokens = tuple(f"w{k}" for k in range(T)) + ("<unk>",)
    table = EmbeddingTable(tokens, rng.normal(size=(T + 1, d)))
    schema = FeatureSchema([FeatureSpec.embedded(f"t{j}", table) for j in range(M)])
    model = LogisticModel(rng.normal(size=schema.width), float(rng.normal()))
    inst = Instance(tuple(int(rng.integers(T)) for _ in range(M)))
    L = int(rng.integers(1, M + 1))
    feats = tuple(int(j) for j in rng.choice(M, size=L, replace=False))
    return schema, model, inst, feats


def check_gradient(n_draws: int = 100, h: float = 1e-5) -> Outcome:
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(n_draws):
        schema, model, inst, feats = _random_embedded_case(rng)
        x = encode(inst, schema).vector
        coords = free_coordinates(schema, feats)
        w0 = x[coords]
        w_cf = w0 + rng.normal(scale=0.5, size=w0.shape)
        y_hat = predict(model, x).label
        alpha = float(rng.uniform(0.1, 5.0))
        _, g = relaxed_objective(model, x, coords, w0, w_cf, y_hat, alpha)
        fd = np.empty_like(w_cf)
        for k in range(len(w_cf)):
            e = np.zeros_like(w_cf)
            e[k] = h
            fp, _ = relaxed_objective(model, x, coords, w0, w_cf + e, y_hat, alpha)
            fm, _ = relaxed_objective(model, x, coords, w0, w_cf - e, y_hat, alpha)
            fd[k] = (fp - fm) / (2 * h)
        rel = np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(rel))
    elapsed = time.perf_counter() - start
    return Outcome(worst <= 1e-4 and elapsed < 5.0, f"max relative error {worst:.2e} over {n_draws} draws in {elapsed:.2f}s")


# ---------------------------------------------------------------- 6


def check_optimizer_sanity() -> Outcome:
    rng = np.random.default_rng(5)
    worst_ratio = 0.0
    for k in range(20):
        schema, model, inst, feats = _random_embedded_case(rng)
        cfg = OptimizerConfig(alpha=0.0, init_noise_scale=0.05, seed=k)
        res = continuous_search(model, schema, inst, Explanation(feats), cfg)
        width = len(free_coordinates(schema, feats))
        noise = np.random.default_rng(k).normal(0.0, 0.05, size=width)
        worst_ratio = max(worst_ratio, res.distance / np.linalg.norm(noise))
    # one embedded feature, d = 2, weight only on its span
    table = EmbeddingTable(("a", "b", "<unk>"), np.array([[1.0, 0.5], [-1.0, 0.0], [0.0, 0.0]]))
    schema = FeatureSchema([FeatureSpec.embedded("tok", table)])
    model = LogisticModel(np.array([3.0, 0.0]), 0.0)
    inst = Instance((0,))
    big = continuous_search(model, schema, inst, Explanation((0,)), OptimizerConfig(alpha=10.0, seed=1))
    p_same = big.p_cf[big.original_prediction.label]
    ok = worst_ratio <= 1.0 and big.flipped and p_same < 0.5
    return Outcome(ok, f"alpha=0: max dist/init-noise = {worst_ratio:.3g}; alpha=10: flipped={big.flipped}, p(y_hat|x_cf)={p_same:.4f}")


# ---------------------------------------------------------------- 7


RANKING_EXPLAINERS = {"whitebox": {}, "omission": {}, "lime": {}, "random": {}}


def check_end_to_end_ranking(seeds=range(10)) -> Outcome:
    """C(disc.) places whitebox first (ties share first place) and random last."""
    start = time.perf_counter()
    good, taus_c, taus_dfr = 0, [], []
    for s in seeds:
        cfg = synthetic_config(s, explainers=dict(RANKING_EXPLAINERS))
        report, summary = run_in_memory(cfg)
        if summary["n_test"] != 200:
            return Outcome(False, f"expected 200 test instances, got {summary['n_test']}")
        c = report.metrics["ces"]
        top = max(c.values())
        bottom = min(c.values())
        if c["whitebox"] == top and c["random"] == bottom and sum(v == bottom for v in c.values()) == 1:
            good += 1
        taus_c.append(report.correlations["ces"]["tau"])
        taus_dfr.append(report.correlations["dfr_delete"]["tau"])
    elapsed = time.perf_counter() - start
    n = len(list(seeds))
    ok = good >= math.ceil(0.9 * n) and np.mean(taus_c) >= np.mean(taus_dfr) and elapsed < 120
    return Outcome(
        ok,
        f"whitebox 1st & random last in {good}/{n}; mean tau C={np.mean(taus_c):.4f} "
        f"vs DFR={np.mean(taus_dfr):.4f}; {elapsed:.1f}s",
    )


# ---------------------------------------------------------------- 8


def brute_kendall(u, v) -> float:
    n, c, d = len(u), 0, 0
    for i in range(n):
        for j in range(i + 1, n):
            if (u[i] > u[j] and v[i] > v[j]) or (u[i] < u[j] and v[i] < v[j]):
                c += 1
            elif (u[i] > u[j] and v[i] < v[j]) or (u[i] < u[j] and v[i] > v[j]):
                d += 1
    return (c - d) / (n * (n - 1) / 2)


def brute_spearman(u, v) -> float:
    n = len(u)
    a = [sorted(u).index(x) + 1 for x in u]
    b = [sorted(v).index(x) + 1 for x in v]
    return 1 - 6 * sum((x - y) ** 2 for x, y in zip(a, b)) / (n * (n * n - 1))


def check_rank_oracle() -> Outcome:
    base = list(range(6))
    mismatches = 0
    for perm in itertools.permutations(base):
        for ref in (base, base[::-1], [2, 0, 5, 1, 4, 3]):
            mismatches += kendall_tau(ref, perm) != brute_kendall(ref, perm)
            mismatches += spearman_rho(ref, perm) != brute_spearman(ref, perm)
    return Outcome(mismatches == 0, f"{mismatches} mismatches over 3 x 720 permutations")


# ---------------------------------------------------------------- 9


def determinism_config(out: str) -> RunConfig:
    return RunConfig.from_dict(
        {
            "seed": 11,
            "out": out,
            "dataset": {"source": "synthetic", "n_features": 5, "n_instances": 300, "vocab_size": 3},
            "removal_modes": ["delete", "mask"],
        }
    )


def check_determinism() -> Outcome:
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        run_a = cmd_full(determinism_config(a))
        run_b = cmd_full(determinism_config(b))
        bytes_a = (run_a / "report.json").read_bytes()
        bytes_b = (run_b / "report.json").read_bytes()
    return Outcome(bytes_a == bytes_b, f"report.json {len(bytes_a)} bytes, identical={bytes_a == bytes_b}")


# ---------------------------------------------------------------- 10


def check_typo_c_disc() -> Outcome:
    # The correlation table prints "10" for tau of C(disc.) on Adults; rho = 1.0
    # and the bold first place show it means 1.0. Criterion 1 asserts 1.0.
    return Outcome(None, "tau printed as '10' is read as 1.0 (asserted under criterion 1)")


def check_typo_mr_validity() -> Outcome:
    # Movie Reviews LR Validity is printed as 0.1099, but C = 12.2585 at
    # proximity 0.0775 implies about 0.95. The printed value is not asserted.
    implied = 12.2585 * 0.0775
    return Outcome(None, f"validity 0.1099 vs implied {implied:.4f}; not asserted")


CRITERIA: tuple[Criterion, ...] = (
    Criterion(1, "rank-correlation arithmetic on published tables", check_table2_arithmetic),
    Criterion(2, "one-hot proximity is sqrt(2)", check_onehot_proximity),
    Criterion(3, "CES = validity / proximity", check_ces_consistency),
    Criterion(4, "exhaustive search agrees with brute force", check_discrete_oracle),
    Criterion(5, "relaxed-objective gradient vs finite differences", check_gradient),
    Criterion(6, "continuous optimiser sanity", check_optimizer_sanity),
    Criterion(7, "end-to-end ranking on synthetic benchmarks", check_end_to_end_ranking),
    Criterion(8, "rank statistics vs definitional oracles", check_rank_oracle),
    Criterion(9, "byte-identical report.json", check_determinism),
    Criterion(10, "known table typos (skipped, documented)", check_typo_c_disc),
    Criterion(10, "known table typos (skipped, documented)", check_typo_mr_validity),
)


def format_line(c: Criterion, outcome: Outcome) -> str:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[outcome.passed]
    return f"[{status}] criterion {c.number}: {c.title} -- {outcome.detail}"


def run_all(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for c in CRITERIA:
        try:
            outcome = c.check()
        except Exception as exc:  # a crashing check is a failing check
            outcome = Outcome(False, f"{type(exc).__name__}: {exc}")
        echo(format_line(c, outcome))
        ok &= outcome.passed is not False
    return ok
