import numpy as np
import pytest

from graphprior import io
from graphprior.errors import InputError
from graphprior.graph import build_graph


def test_edge_list_round_trip(tmp_path):
    g = build_graph([(0, 1, 1.5), (1, 3, 0.25)], n=5)
    path = tmp_path / "g.tsv"
    io.write_edge_list(g, path)
    h = io.read_edge_list(path, n=5)
    assert np.array_equal(g.to_dense(), h.to_dense())


def test_edge_list_comments_and_node_override(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("# header\n0\t1\t1\n\n1\t0\t1\n")
    g = io.read_edge_list(path)
    assert g.n == 2 and g.to_dense()[0, 1] == 2.0
    assert io.read_edge_list(path, n=4).n == 4


@pytest.mark.parametrize("text", ["0 1 1\n", "0\t1\n", "a\t1\t1\n", "0\t1\t-2\n"])
def test_edge_list_errors(tmp_path, text):
    path = tmp_path / "g.tsv"
    path.write_text(text)
    with pytest.raises(InputError):
        io.read_edge_list(path)


def test_labels_round_trip_and_missing(tmp_path):
    path = tmp_path / "l.tsv"
    path.write_text("0\t1\n2\t0\n")
    labels = io.read_labels(path, n=4)
    assert labels.tolist() == [1, -1, 0, -1]
    out = tmp_path / "m.tsv"
    io.write_labels(labels, out)
    assert io.read_labels(out, n=4).tolist() == labels.tolist()


@pytest.mark.parametrize("text", ["0\t1\n0\t2\n", "0\n", "-1\t0\n"])
def test_label_errors(tmp_path, text):
    path = tmp_path / "l.tsv"
    path.write_text(text)
    with pytest.raises(InputError):
        io.read_labels(path)


def test_labels_out_of_range(tmp_path):
    path = tmp_path / "l.tsv"
    path.write_text("5\t0\n")
    with pytest.raises(InputError):
        io.read_labels(path, n=3)


def test_priors_round_trip_and_renormalize(tmp_path):
    P = np.array([[0.2, 0.8], [0.5, 0.5000001]])
    path = tmp_path / "p.csv"
    io.write_priors(P, path)
    Q = io.read_priors(path)
    assert np.allclose(Q.sum(axis=1), 1.0, atol=1e-15)
    assert np.allclose(Q, P, atol=1e-6)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "id,p_0,p_1\n0,0.5,0.5\n",
        "node,p_0,p_1\n0,0.5\n",
        "node,p_0,p_1\n0,0.5,0.6\n",
        "node,p_0,p_1\n1,0.5,0.5\n",
        "node,p_0,p_1\n0,x,0.5\n",
    ],
)
def test_priors_errors(tmp_path, text):
    path = tmp_path / "p.csv"
    path.write_text(text)
    with pytest.raises(InputError):
        io.read_priors(path)


def test_scores_dump_and_distribution(tmp_path):
    F = np.array([[2.0, -1.0], [-0.5, -0.1]])
    path = tmp_path / "f.csv"
    io.write_scores(F, path)
    assert path.read_text().splitlines()[0] == "node,f_0,f_1"
    D = io.scores_to_distribution(F)
    assert np.array_equal(D, [[1.0, 0.0], [0.5, 0.5]])
