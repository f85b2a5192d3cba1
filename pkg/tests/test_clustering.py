import math

import numpy as np
import pytest

from patternsim import EmbeddingSet, InputError, build_knn_graph, cluster_class, pic_cluster
from patternsim.clustering import read_assignments, read_embeddings, write_assignments, write_embeddings

from conftest import blobs
from oracles import pic_reference


def partition(labels):
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), set()).add(i)
    return {frozenset(g) for g in groups.values()}


def emb(vectors):
    vectors = np.asarray(vectors, dtype=float)
    return EmbeddingSet(tuple(f"i{k}" for k in range(len(vectors))), vectors)


def test_weight_at_zero_distance():
    g = build_knn_graph(emb([[0.0, 0.0], [0.0, 0.0]]))
    assert g.weights[0, 1] == 1.0 and g.weights[0, 0] == 0.0


def test_weight_at_half_bandwidth():
    g = build_knn_graph(emb([[0.0], [0.5]]), sigma=0.5)
    assert g.weights[0, 1] == pytest.approx(math.exp(-1), abs=1e-12)
    assert g.weights[0, 1] == pytest.approx(0.36787944117144233)


def test_neighbor_clamp():
    g = build_knn_graph(emb(np.random.default_rng(0).random((5, 3))), k=10)
    assert g.k == 4
    assert all(np.count_nonzero(row) == 4 for row in g.weights)


def test_graph_invariants():
    x, _ = blobs(3)
    g = build_knn_graph(emb(x), k=10)
    assert np.all(np.diag(g.weights) == 0)
    assert np.all((np.count_nonzero(g.weights, axis=1) <= 10))
    nz = g.weights[g.weights > 0]
    assert np.all((nz > 0) & (nz <= 1))


def test_degenerate_class():
    with pytest.raises(InputError, match="degenerate class"):
        build_knn_graph(emb([[1.0, 2.0]]))


@pytest.mark.parametrize("c", [1, 2, 3])
def test_blobs_recovered(c):
    x, truth = blobs(c, seed=c)
    history = []
    result = pic_cluster(build_knn_graph(emb(x)), history=history)
    assert result.n_clusters == c
    assert partition(result.labels) == partition(truth)
    assert all(abs(h - 1) <= 1e-9 for h in history)


@pytest.mark.parametrize("seed", range(6))
def test_matches_reference_implementation(seed):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(c, 0.3, size=(8, 4)) for c in (0.0, 1.0)])
    ours = pic_cluster(build_knn_graph(emb(x), k=4))
    assert partition(ours.labels) == pic_reference(x.tolist(), k=4)


def test_labels_ordered_by_size_and_deterministic():
    x = np.vstack([blobs(1, per_blob=25, seed=1)[0], blobs(1, per_blob=10, seed=2)[0] + 5.0])
    a = pic_cluster(build_knn_graph(emb(x)))
    b = pic_cluster(build_knn_graph(emb(x)))
    assert np.array_equal(a.labels, b.labels)
    sizes = np.bincount(a.labels)
    assert list(sizes) == sorted(sizes, reverse=True) and sizes.min() > 0


def test_cluster_class_single_image():
    a = cluster_class("pho", ["x"], {"x": np.zeros(3)})
    assert a.n_clusters == 1 and a.labels.tolist() == [0]


def test_cluster_class_separated_groups():
    x, _ = blobs(2, per_blob=12)
    ids = [f"img{i}" for i in range(len(x))]
    a = cluster_class("ramen", ids, dict(zip(ids, x)))
    assert a.n_clusters >= 2
    assert a.ids == tuple(ids) and a.class_name == "ramen"


def test_cluster_class_prefers_qualified_key():
    vecs = {"ramen/a": np.zeros(2), "a": np.ones(2), "b": np.ones(2)}
    a = cluster_class("ramen", ["a", "b"], vecs)
    assert a.n_clusters == 2


def test_cluster_class_missing_ids():
    with pytest.raises(InputError, match="b, c"):
        cluster_class("x", ["a", "b", "c"], {"a": np.zeros(2)})


def test_embedding_text_round_trip(tmp_path):
    vecs = {"a": np.array([0.1, -2.5]), "b": np.array([1e-17, 3.0])}
    f = tmp_path / "e.txt"
    write_embeddings(f, vecs)
    back = read_embeddings(f)
    assert back.keys() == vecs.keys()
    assert all(np.array_equal(back[k], vecs[k]) for k in vecs)


def test_embedding_npz(tmp_path):
    f = tmp_path / "e.npz"
    np.savez(f, ids=np.array(["a", "b"]), vectors=np.eye(2))
    assert read_embeddings(f)["b"].tolist() == [0.0, 1.0]


@pytest.mark.parametrize("text", ["bad header\n", "id dim 2\na 1.0\n", "id dim 1\na x\n", "id dim 1\na 1\na 2\n"])
def test_embedding_errors(tmp_path, text):
    f = tmp_path / "e.txt"
    f.write_text(text)
    with pytest.raises(InputError):
        read_embeddings(f)


def test_assignment_round_trip(tmp_path):
    x, _ = blobs(2, per_blob=6)
    ids = [f"p{i}" for i in range(len(x))]
    a = cluster_class("pizza", ids, dict(zip(ids, x)))
    f = tmp_path / "a.csv"
    write_assignments(f, [a])
    back = read_assignments(f)["pizza"]
    assert back.ids == a.ids and np.array_equal(back.labels, a.labels)
    assert f.read_text().splitlines()[0] == "image_id,class,cluster"
