"""Smoke test for the stablemil extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml
"""

import json
import os
import tempfile

import stablemil


def main():
    population = stablemil.generate(setting=1, seed=3, bags_total=120)
    assert len(population) == 120 and population.dim == 10
    train, test = stablemil.biased_split(population, 0.8, 5)
    assert len(train) + len(test) == 120

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "train.jsonl")
        train.save(path)
        again = stablemil.Dataset.load(path)
        assert again.ids() == train.ids() and again.labels() == train.labels()

    oracle = stablemil.Classifier.oracle()
    assert oracle.accuracy(test) == 1.0
    pool = stablemil.learn_stable_instances(train, oracle, 0.5)
    truths = {truth for (_, _, score, truth) in pool.scores() if score >= 0.5}
    assert truths == {"causal"}, truths

    base = stablemil.Classifier.train(train, seed=1)
    restored = stablemil.Classifier.from_json(base.to_json())
    assert restored.predict(test) == base.predict(test)
    tau = stablemil.select_threshold(train, base, 2)
    assert 0.0 <= tau <= 1.0
    pool = stablemil.learn_stable_instances(train, base, tau)
    assert json.loads(pool.to_json())["tau"] == tau

    model = stablemil.EmbeddingModel.train(train, pool, seed=4)
    vectors = model.embed(test)
    assert len(vectors) == len(test) and len(vectors[0]) == len(pool)
    assert all(0.0 < v <= 1.0 for row in vectors for v in row)

    result = stablemil.run_stablemil(train, test, seed=4)
    assert 0.0 <= result["accuracy"] <= 1.0

    tiny = stablemil.Dataset([("a", 1, [[0.0, 1.0]], ["causal"]), ("b", 0, [[5.0, 5.0]], None)])
    assert tiny.labels() == [1, 0]
    try:
        stablemil.Dataset([("a", 1, [[0.0]], None), ("b", 0, [[1.0, 2.0]], None)])
    except ValueError:
        pass
    else:
        raise AssertionError("dimension mismatch accepted")

    summary = stablemil.reproduce(setting=2, seed=1, repetitions=2)
    assert len(summary["stablemil"]) == 2
    print(summary["report"])
    print("smoke test passed")


if __name__ == "__main__":
    main()
