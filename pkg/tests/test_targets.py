import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat, taxonomies
from oracles import flow_targets
from hace.targets import (
    _NEEDS,
    KINDS,
    TargetScheme,
    ancestral_smooth,
    ancestral_smooth_dag,
    build_target_matrix,
    lca_soft_labels,
    one_hot,
    uniform_smooth,
)
from hace.taxonomy import TaxonomyError, parse_taxonomy


def test_one_hot(animal):
    row = one_hot(animal, "Husky")
    assert row.tolist() == [0, 0, 1, 0]
    assert one_hot(flat(100), 7)[:100].tolist() == np.eye(100)[7].tolist()
    with pytest.raises(TaxonomyError):
        one_hot(animal, "Dog")


def test_uniform_smooth_values():
    p = uniform_smooth(flat(100), 3, 0.1)
    assert p[3] == pytest.approx(0.901, abs=1e-15)
    assert np.allclose(np.delete(p, 3), 0.001, rtol=0, atol=1e-15)
    assert uniform_smooth(flat(2), 0, 0.5).tolist() == [0.75, 0.25]
    assert uniform_smooth(flat(5), 2, 0.0).tolist() == [0, 0, 1, 0, 0]
    for bad in (-0.1, 1.0):
        with pytest.raises(ValueError):
            uniform_smooth(flat(5), 0, bad)


def test_ancestral_chain(chain):
    row, root = ancestral_smooth(chain, np.array([1.0]), 0.6)
    assert row[chain.index["leaf"]] == pytest.approx(0.6, abs=1e-15)
    assert row[chain.index["parent"]] == pytest.approx(0.24, abs=1e-15)
    assert root == pytest.approx(0.16, abs=1e-15)


def test_ancestral_no_dilution_returns_leaf_distribution(animal):
    p = np.array([0.2, 0.3, 0.5])
    row, root = ancestral_smooth(animal, p, 1.0)
    assert row[:3].tolist() == p.tolist()
    assert row[3] == 0 and root == 0


def test_ancestral_mass_summed_at_shared_parent():
    t = parse_taxonomy("root\tP\nP\ta\nP\tb\n")
    row, root = ancestral_smooth(t, np.array([0.5, 0.5]), 0.5)
    assert row.tolist() == [0.25, 0.25, 0.25]
    assert root == 0.25


def test_ancestral_smooth_rejects_bad_input(diamond, animal):
    with pytest.raises(TaxonomyError):
        ancestral_smooth(diamond, np.array([1.0]), 0.5)
    with pytest.raises(ValueError, match="sum to 1"):
        ancestral_smooth(animal, np.array([0.5, 0.2, 0.2]), 0.5)
    with pytest.raises(ValueError, match="dilution"):
        ancestral_smooth(animal, np.array([0, 0, 1.0]), 0.0)


def test_dag_diamond(diamond):
    row, root = ancestral_smooth_dag(diamond, np.array([1.0]), 0.5)
    i = diamond.index
    assert row[i["L"]] == 0.5
    assert row[i["X"]] == row[i["Y"]] == 0.125
    assert root == 0.25


def test_dag_no_dilution(diamond):
    row, root = ancestral_smooth_dag(diamond, np.array([1.0]), 1.0)
    assert row.tolist() == [1.0, 0.0, 0.0] and root == 0.0


def test_lca_soft_labels(animal):
    p = lca_soft_labels(animal, "Husky", math.log(2))
    assert np.allclose(p, [2 / 7, 1 / 7, 4 / 7], atol=1e-15)
    sharp, soft = lca_soft_labels(animal, "Husky", 30.0), lca_soft_labels(animal, "Husky", 10.0)
    assert sharp[2] > soft[2]
    assert lca_soft_labels(parse_taxonomy("root\tx\n"), "x", 10.0).tolist() == [1.0]
    with pytest.raises(TaxonomyError):
        lca_soft_labels(parse_taxonomy("root\tX\nroot\tY\nX\tL\nY\tL\n", dag=True), "L", 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="nope"),
        dict(kind="uniform_smooth"),
        dict(kind="ancestral"),
        dict(kind="ancestral", dilution=0.5, beta=1.0),
        dict(kind="ancestral", dilution=0.5, epsilon=0.1),
        dict(kind="ancestral_with_uniform", dilution=0.5, epsilon=1.0),
        dict(kind="lca_soft", beta=0.0),
        dict(kind="one_hot", dilution=0.5),
        dict(kind="ancestral", dilution=1.5),
    ],
)
def test_scheme_validation(kwargs):
    with pytest.raises(ValueError):
        TargetScheme(**kwargs)


def test_plain_ancestral_accepts_zero_epsilon():
    assert TargetScheme("ancestral", epsilon=0.0, dilution=0.5).dilution == 0.5


def test_matrix_one_hot(animal):
    tm = build_target_matrix(animal, TargetScheme("one_hot"))
    assert np.array_equal(tm.t, np.hstack([np.eye(3), np.zeros((3, 1))]))
    assert np.all(tm.root_mass == 0)
    assert tm.gather([2, 0]).tolist() == [[0, 0, 1, 0], [1, 0, 0, 0]]


def test_matrix_chain(chain):
    tm = build_target_matrix(chain, TargetScheme("ancestral", dilution=0.6))
    assert np.allclose(tm.t[0], [0.6, 0.24], atol=1e-15)
    assert tm.root_mass[0] == pytest.approx(0.16, abs=1e-15)


def test_matrix_cifar_rows_sum_to_one(real_hierarchies):
    tm = build_target_matrix(real_hierarchies["cifar100"], TargetScheme("ancestral_with_uniform", epsilon=0.1, dilution=0.5))
    assert np.max(np.abs(tm.t.sum(axis=1) + tm.root_mass - 1)) < 1e-12


def test_matrix_is_read_only(animal):
    tm = build_target_matrix(animal, TargetScheme("one_hot"))
    with pytest.raises(ValueError):
        tm.t[0, 0] = 2.0


def test_csv_export(tmp_path, chain):
    tm = build_target_matrix(chain, TargetScheme("ancestral", dilution=0.6))
    path = tmp_path / "t.csv"
    tm.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["leaf", "parent", "__root__"]
    assert [float(v) for v in rows[1]] == pytest.approx([0.6, 0.24, 0.16], abs=1e-15)


def _schemes():
    return [
        TargetScheme("one_hot"),
        TargetScheme("uniform_smooth", epsilon=0.1),
        TargetScheme("lca_soft", beta=10.0),
        TargetScheme("ancestral", dilution=0.3),
        TargetScheme("ancestral_with_uniform", epsilon=0.2, dilution=0.6),
        TargetScheme("ancestral_with_lca", beta=2.0, dilution=0.5),
    ]


@settings(max_examples=60, deadline=None)
@given(taxonomies(max_nodes=10))
def test_mass_conservation_on_trees(t):
    for scheme in _schemes():
        tm = build_target_matrix(t, scheme)
        assert np.all(tm.t >= 0) and np.all(tm.root_mass >= 0)
        assert np.max(np.abs(tm.t.sum(axis=1) + tm.root_mass - 1)) < 1e-12


@settings(max_examples=80, deadline=None)
@given(taxonomies(max_nodes=10), st.floats(0.05, 1.0))
def test_tree_and_dag_routines_agree(t, d):
    rng = np.random.default_rng(t.N)
    p = rng.dirichlet(np.ones(t.n))
    a, ra = ancestral_smooth(t, p, d)
    b, rb = ancestral_smooth_dag(t, p, d)
    assert np.max(np.abs(a - b)) < 1e-12 and abs(ra - rb) < 1e-12


@settings(max_examples=80, deadline=None)
@given(taxonomies(max_nodes=10, dag=True), st.floats(0.05, 1.0))
def test_dag_matches_mass_flow_simulation(t, d):
    rng = np.random.default_rng(t.N)
    p = rng.dirichlet(np.ones(t.n))
    row, root = ancestral_smooth_dag(t, p, d)
    ref_row, ref_root = flow_targets(t, p, d)
    assert np.max(np.abs(row - ref_row)) < 1e-12 and abs(root - ref_root) < 1e-12
    assert abs(row.sum() + root - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(taxonomies(max_nodes=10), st.floats(0.0, 0.9))
def test_reduction_chain(t, eps):
    exact = build_target_matrix(t, TargetScheme("ancestral", dilution=1.0))
    assert np.array_equal(exact.t[:, : t.n], np.eye(t.n)) and not exact.t[:, t.n :].any()
    smoothed = build_target_matrix(t, TargetScheme("ancestral_with_uniform", epsilon=eps, dilution=1.0))
    for i in range(t.n):
        assert np.allclose(smoothed.t[i, : t.n], uniform_smooth(t, i, eps), rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(taxonomies(max_nodes=10), st.floats(0.05, 0.95))
def test_geometric_decay_along_path(t, d):
    tm = build_target_matrix(t, TargetScheme("ancestral", dilution=d))
    for i, leaf in enumerate(t.leaves):
        path = [leaf]
        while path[-1] != t.root:
            path.append(t.parents[path[-1]][0])
        vals = [tm.t[i, t.index[v]] for v in path[:-1]]
        for lower, upper in zip(vals, vals[1:]):
            assert upper / lower == pytest.approx(1 - d, rel=1e-12)


def test_every_kind_is_buildable(animal):
    params = {"epsilon": 0.1, "dilution": 0.5, "beta": 1.0}
    for kind in KINDS:
        scheme = TargetScheme(kind, **{k: v for k, v in params.items() if k in _NEEDS[kind]})
        build_target_matrix(animal, scheme)
