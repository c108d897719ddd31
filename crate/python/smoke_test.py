"""Smoke test for the Python bindings.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import math

import eccentric


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * (1 + abs(b))


def text():
    assert eccentric.stem("running") == "run"
    toks = eccentric.clean("The cats were RUNNING, 42 times!")
    assert toks == ["cat", "run", "time"], toks

    docs = [eccentric.clean(s) for s in ["cats run", "dogs run", "cats sleep"]]
    vec = eccentric.Vectorizer.fit(docs, dim=8, min_count=1)
    assert vec.dim == 8
    v = vec.embed(docs[0])
    assert len(v) == 8 and close(math.sqrt(sum(x * x for x in v)), 1.0)


def pca():
    rows = [[float(i), 2.0 * i + 0.01 * (i % 3), 1.0] for i in range(20)]
    model = eccentric.Pca.fit(rows, variance=0.9)
    assert model.k == 1
    full = eccentric.Pca.fit(rows, variance=None)
    back = full.inverse_transform(full.transform(rows[5]))
    assert all(close(a, b) for a, b in zip(back, rows[5]))


def replay():
    day = 86400
    posts = [
        {"id": "p1", "author": "a", "created_at": 0},
        {"id": "p2", "author": "b", "created_at": day},
        {"id": "p3", "author": "a", "created_at": 3 * day, "likes": 2},
    ]
    corpus = eccentric.Corpus(posts, [("a", "b")])
    vectors = {"p1": [0.0, 0.0], "p2": [3.0, 4.0], "p3": [0.0, 0.0]}
    recs = corpus.replay(vectors, window_days=5.0)
    assert [r["post_id"] for r in recs] == ["p1", "p2", "p3"]
    assert recs[0]["eccentricity"] is None
    assert close(recs[2]["eccentricity"], 2.5)
    assert recs[2]["self_eccentricity"] == 0.0
    assert corpus.eccentricity_oracle(vectors, "p3") == (
        recs[2]["eccentricity"],
        recs[2]["self_eccentricity"],
    )
    assert eccentric.fg_scores([(0, 0.0), (10, 1.0), (20, 2.0)]) == (1.0, 1.0)


def stats():
    x = [1.2, 3.4, 0.5, 2.2, 5.1, 3.3, 0.9]
    y = [4.4, 6.1, 2.9, 7.7, 5.5, 3.8]
    ad = eccentric.anderson_darling(x, y)
    assert close(ad["standardized"], 2.9974074443485783, 1e-9)
    sep = eccentric.anderson_darling([1, 2, 3, 4], [5, 6, 7, 8], method="permutation")
    assert sep["exact"] and close(sep["p"], 2 / 70)
    u, p = eccentric.mann_whitney([1, 2, 3], [4, 5, 6])
    assert u == 0.0 and close(p, 0.1)
    assert eccentric.bonferroni([0.01, 0.5], 3) == [0.03, 1.0]
    dens = eccentric.kde([0.0], [0.0], bandwidth=1.0)
    assert close(dens[0], 1 / math.sqrt(2 * math.pi))


def pipeline():
    corpus, vectors = eccentric.synthesize(
        n_users=40, n_days=4, dim=4, seed=7, effect="elevator-drift"
    )
    big = corpus.largest_connected_component()
    recs = big.replay(vectors)
    assert len(recs) == len(big)
    rows = eccentric.user_dynamics(recs, weighting="uniform")
    assert rows and all("g_self" in r for r in rows)


if __name__ == "__main__":
    for check in (text, pca, replay, stats, pipeline):
        check()
        print(f"{check.__name__}: ok")
    print(repr(eccentric.Corpus([], [])), eccentric.__version__)
