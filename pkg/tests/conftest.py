from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from hace.taxonomy import from_edges, load_taxonomy, parse_taxonomy

DATA = Path(__file__).resolve().parent.parent / "data"

ANIMAL = "root\tDog\nroot\tCat\nDog\tHusky\nDog\tBeagle\n"
CHAIN = "root\tparent\nparent\tleaf\n"
DIAMOND = "root\tX\nroot\tY\nX\tL\nY\tL\n"

_acceptance = pytest.StashKey[list]()


@pytest.fixture
def animal():
    return parse_taxonomy(ANIMAL)


@pytest.fixture
def chain():
    return parse_taxonomy(CHAIN)


@pytest.fixture
def diamond():
    return parse_taxonomy(DIAMOND, dag=True)


def flat(n):
    return from_edges([("root", f"c{i:03d}") for i in range(n)])


@pytest.fixture(scope="session")
def real_hierarchies():
    return {
        "cifar100": load_taxonomy(DATA / "cifar100.tsv"),
        "fgvc_shaped": load_taxonomy(DATA / "fgvc_shaped.tsv"),
        "nabirds_shaped": load_taxonomy(DATA / "nabirds_shaped.tsv"),
        "fgvc_shaped_dag": load_taxonomy(DATA / "fgvc_shaped_dag.tsv", dag=True),
    }


@st.composite
def taxonomies(draw, max_nodes=12, dag=False):
    """Random rooted hierarchy: node k picks parents among nodes 0..k-1 (0 = root)."""
    n_nodes = draw(st.integers(1, max_nodes))
    names = ["root"] + [f"v{k:02d}" for k in range(1, n_nodes + 1)]
    edges = []
    for k in range(1, n_nodes + 1):
        if dag:
            ps = draw(st.sets(st.integers(0, k - 1), min_size=1, max_size=min(k, 3)))
        else:
            ps = {draw(st.integers(0, k - 1))}
        edges += [(names[p], names[k]) for p in sorted(ps)]
    return from_edges(edges, dag=dag)


@pytest.fixture
def criterion(request):
    """Records one acceptance line; printed in the terminal summary."""
    log = request.config.stash.setdefault(_acceptance, [])

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" ({detail})" if detail else "")
        log.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_acceptance, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def rng_for(*key):
    return np.random.default_rng(list(key))
