#!/usr/bin/env python3
"""Smoke test for the inkling_py extension module.

Builds nothing itself: run `cargo build -p inkling-py` (or --release)
first. The script locates the compiled cdylib, stages it under
target/python/ with the importable name, and walks the whole pipeline on a
tiny synthetic corpus.
"""

import math
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libinkling_py.so", "libinkling_py.dylib", "inkling_py.dll")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit(
            "inkling_py cdylib not found; run `cargo build -p inkling-py` first"
        )
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = REPO / "target" / "python"
    stage.mkdir(parents=True, exist_ok=True)
    suffix = ".pyd" if newest.suffix == ".dll" else ".so"
    target = stage / f"inkling_py{suffix}"
    shutil.copy2(newest, target)
    sys.path.insert(0, str(stage))


stage_module()
import inkling_py as ink  # noqa: E402

checks = 0


def check(condition, message):
    global checks
    assert condition, message
    checks += 1


# --- tokenization ---------------------------------------------------------
tokens = ink.tokenize("We heard them. Don't stop!")
words = [t[0] for t in tokens if t[1] == "word"]
check(words == ["we", "heard", "them", "don't", "stop"], f"tokenize: {words}")
kinds = {t[1] for t in tokens}
check("period" in kinds and "exclam" in kinds, f"punct kinds: {kinds}")

# --- lexicon ---------------------------------------------------------------
lexicon = ink.Lexicon.parse_file(str(REPO / "data" / "lexicon_demo.dic"))
check(lexicon.feature_count() == 46, "demo lexicon has 46 categories")
check(set(lexicon.match_word("hearing")) >= {32, 34}, "stem match")
counts, word_count, message_count = lexicon.count(["We heard them.", "We agree!"])
check(word_count == 5 and message_count == 2, "counting")

# --- corpus ----------------------------------------------------------------
corpus, truths = ink.gen_corpus(
    users=24,
    messages_per_user=30,
    words_mean=12.0,
    words_spread=4.0,
    categories=[
        ("1st-person-plural", ["we", "us", "our"], 0.12, 0.1),
        ("perceptual-process", ["hear", "feel", "see"], 0.1, 0.08),
        ("swear-words", ["damn", "hell", "crap"], 0.05, 0.05),
    ],
    filler_words=["lorem", "ipsum", "dolor", "sit"],
    seed=7,
)
check(corpus.user_count() == 24, "synthetic corpus users")
check(len(truths) == 24 and abs(sum(truths[0][1]) + truths[0][2] - 1.0) < 1e-12,
      "planted rates sum to 1")
round_trip = ink.Corpus.from_jsonl(corpus.to_jsonl())
check(round_trip.message_count() == corpus.message_count(), "jsonl round trip")

# --- features + traits ------------------------------------------------------
matrix = ink.build_matrix(lexicon, corpus)
check(all(0.0 <= v <= 1.0 for row in matrix.values for v in row), "matrix in [0,1]")
weights = ink.WeightMatrix.parse_file(
    str(REPO / "data" / "weights_demo.csv"), lexicon.feature_names()
)
plural = lexicon.feature_names().index("1st-person-plural")
check(weights.get("Ag", plural) == 0.068, "published weight row")
scores = ink.score_traits(matrix, weights)
check(len(scores) == 24 and len(scores[0][1]) == 8, "trait scores shape")
check(ink.trait_names() == ["Na", "Ma", "Ps", "Op", "Co", "Ex", "Ag", "Ne"], "trait order")

stats = ink.boxplot([float(v) for v in range(1, 10)] + [100.0])
check(abs(stats["q1"] - 3.25) < 1e-12 and abs(stats["q3"] - 7.75) < 1e-12, "boxplot quartiles")

partition = ink.partition_outliers(scores)
na_sizes = sum(len(partition.members("Na", g)) for g in ("upper", "box", "lower"))
check(na_sizes == 24, "partition covers all users")

# --- harm -------------------------------------------------------------------
check(ink.logit(0.5) == 0.0 and abs(ink.expit(0.0) - 0.5) < 1e-15, "logit/expit")
check(abs(ink.expit(ink.logit(0.37)) - 0.37) < 1e-12, "expit(logit(x)) identity")

labeler = ink.KeywordLabeler([("damn", "vulgar", 6), ("hell", "vulgar", 5)])
labels = labeler.label_corpus(corpus)
check(len(labels) == corpus.message_count(), "labeler covers corpus")
ranking, unlabeled = ink.harm_ranking(corpus, labels)
check(len(ranking) + len(unlabeled) == 24, "ranking covers users")
check(all(ranking[i]["transformed"] >= ranking[i + 1]["transformed"]
          for i in range(len(ranking) - 1)), "ranking sorted")

table = ink.harm_ratio_table(partition, labels, corpus)
box_cell = table["Na"]["box"]
check(box_cell is None or abs(box_cell[0] + box_cell[1] - 100.0) < 1e-9,
      "safe+unsafe sums to 100")

# --- regression --------------------------------------------------------------
base = [[(i * 7 % 13) / 12.0, (i * 5 % 11) / 10.0 + 0.05] for i in range(60)]
y = [2.0 * a - 1.2 * b + 0.3 for a, b in base]
model = ink.fit(base, y, method="ridge", degree=1, mode="full", alpha=1e-8)
check(model.converged, "ridge converged")
predictions = model.predict(base)
check(ink.pearson(predictions, y) > 0.9999, "ridge recovers a plane")
check(ink.mse(predictions, y) < 1e-10, "mse near zero")
raw = model.raw_coefficients()
check(abs(raw[1] - 2.0) < 1e-6 and abs(raw[2] + 1.2) < 1e-6, f"raw coefficients: {raw}")

contributions, cohort = model.ablate(base)
check(abs(contributions[0] - 2.0) < 1e-6 and abs(contributions[1] + 1.2) < 1e-6,
      "ablation equals coefficients for a linear model")

reloaded = ink.RegressionModel.from_json(model.to_json())
check(reloaded.predict(base[:3]) == model.predict(base[:3]), "model json round trip")

sgd = ink.fit(base, y, method="sgd", degree=1, mode="full", seed=11, epochs=400)
check(ink.pearson(sgd.predict(base), y) > 0.99, "sgd fits")

# --- planted harm + overlay ---------------------------------------------------
coefficients = [0.0] * (1 + len(matrix.params))
coefficients[1 + plural] = 2.5
targets, planted_labels = ink.gen_harm(
    matrix, corpus, coefficients, degree=1, mode="univariate", noise=0.0, seed=3
)
check(len(targets) == 24, "planted targets per user")
planted_ranking, _ = ink.harm_ranking(corpus, planted_labels)
pairs = [(r["user"], r["transformed"]) for r in planted_ranking]
sizes, fractions, classes = ink.overlay(pairs, partition, groups=3)
check(sum(sizes) == len(pairs), "overlay buckets cover the ranking")
check(all(0.0 <= f <= 1.0 for f in fractions), "overlay fractions in range")
check(set(classes) <= {"Ps", "Ma", "Na", "none"}, "overlay classes")

# --- stability -----------------------------------------------------------------
stability = ink.stability_table(
    corpus, lexicon, weights, checkpoints=[5, 15], reference=30,
    correlation="pearson",
)
check(set(stability) == set(ink.trait_names()), "stability rows per trait")
check(len(stability["Na"]) == 2, "stability columns per checkpoint")

# --- overlap --------------------------------------------------------------------
report = ink.lexicon_overlap(
    ["we", "us", "heard"], ["heard", "damn"],
    risk_tags={"heard": 1}, signs={"heard": "+"},
)
check(report["in_both"] == 1 and report["only_in_a"] == 2, "overlap counts")
check(report["disagreement_fraction"] == 1.0, "safe word with positive sign conflicts")

# --- error paths -----------------------------------------------------------------
for bad_call, label in [
    (lambda: ink.logit(1.5), "logit domain"),
    (lambda: ink.fit(base, y, method="lasso"), "unknown method"),
    (lambda: ink.Lexicon.parse("%\n1\ta\n%\nword\t9\n"), "undeclared category"),
]:
    try:
        bad_call()
    except ValueError:
        checks += 1
    else:
        raise AssertionError(f"{label} should raise ValueError")

print(f"smoke test PASS: {checks} checks")
