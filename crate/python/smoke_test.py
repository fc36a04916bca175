"""Smoke test for the codeshift extension module.

Build and install first:
    pip install --no-build-isolation ./crates/py
"""

import json
import pathlib
import tempfile

import codeshift

SOURCE = """
class Counter {
    int sum(int[] xs) { int total = 0; for (int x : xs) { total += x; } return total; }
    boolean isEmpty(int[] xs) { return xs.length == 0; }
}
"""


def main():
    tokens = codeshift.tokenize(SOURCE)
    assert tokens[0][1] == "class", tokens[:3]

    methods = codeshift.method_samples(SOURCE)
    assert [m[0] for m in methods] == ["sum", "isEmpty"], methods
    assert all(len(ctx) > 0 for _, ctx in methods)
    windows = codeshift.cbow_samples(SOURCE, window=2)
    assert all(len(ctx) == 4 for _, ctx in windows)

    assert codeshift.roc_auc([0.9, 0.8, 0.1], [True, True, False]) == 100.0
    assert codeshift.roc_auc([0.5, 0.5], [True, True]) is None
    assert codeshift.brier([0.5] * 4, [True, False, True, False]) == 25.0
    assert codeshift.format_drop(29.96, 29.14) == "29.14(-2.74%)"

    vocab = codeshift.Vocabulary(["a", "b", "a"])
    assert "a" in vocab and vocab.token(vocab.id("a")) == "a"

    model = codeshift.MethodNameModel.train([SOURCE], embedding_dim=16, epochs=60, learning_rate=0.01, seed=1)
    preds = model.predict(SOURCE)
    assert [p[1] for p in preds] == ["sum", "isEmpty"], preds
    assert all(0.0 <= c <= 1.0 for *_, c in model.mc_dropout(SOURCE, passes=5))
    assert all(0.0 <= c <= 1.0 for *_, c in model.mmutant(SOURCE, "NAI", mutants=5))

    with tempfile.TemporaryDirectory() as tmp:
        assert codeshift.run_cli(["synth-corpus", "--out", tmp]) == 0
        cfg = json.loads(pathlib.Path(tmp, "config.json").read_text())
        assert set(cfg["manifests"]) == {"timeline", "project", "author"}
        assert codeshift.run_cli(["eval", "--config", str(pathlib.Path(tmp, "config.json"))]) == 2

    print("smoke test passed")


if __name__ == "__main__":
    main()
