from __future__ import annotations

import random
from pathlib import Path

import pytest

from lacelab.graph import build

DATA = Path(__file__).parent / "data"

_RESULTS: dict[int, tuple[bool, str]] = {}


def make_g9(dim: int = 3):
    """Anchors s1, s2, s3 with an internal path a-b-c-d."""
    return build(
        ["s1", "s2", "s3", "a", "b", "c", "d"],
        [
            ("s1", "a"), ("s1", "b"), ("s2", "c"), ("s2", "d"), ("s3", "a"), ("s3", "d"),
            ("a", "b"), ("b", "c"), ("c", "d"),
        ],
        {"s1": (0,) * dim, "s2": (4,) + (0,) * (dim - 1), "s3": (0, 4) + (0,) * (dim - 2)},
        dim=dim,
        marked=("s1", "s2", "s3"),
    )


def make_triangle(dim: int = 3):
    return build(
        ["s1", "s2", "s3"],
        [("s1", "s2"), ("s2", "s3"), ("s1", "s3")],
        {"s1": (0,) * dim, "s2": (4,) + (0,) * (dim - 1), "s3": (0, 4) + (0,) * (dim - 2)},
        dim=dim,
        marked=("s1", "s2", "s3"),
    )


def make_k23(dim: int = 3):
    return build(
        ["s1", "s2", "s3", "v1", "v2"],
        [(s, v) for s in ("s1", "s2", "s3") for v in ("v1", "v2")],
        {"s1": (0,) * dim, "s2": (4,) + (0,) * (dim - 1), "s3": (0, 4) + (0,) * (dim - 2)},
        dim=dim,
        marked=("s1", "s2", "s3"),
    )


def random_multigraph(rng: random.Random, n_vertices=6, n_labeled=3, max_edges=8, dim=3):
    """A connected random multigraph with some labelled vertices."""
    vs = [f"v{i}" for i in range(n_vertices)]
    edges = []
    for i in range(1, n_vertices):
        edges.append((vs[rng.randrange(i)], vs[i]))
    for _ in range(rng.randrange(max_edges - n_vertices + 2)):
        a, b = rng.sample(vs, 2)
        edges.append((a, b))
    pts = set()
    while len(pts) < n_labeled:
        pts.add(tuple(rng.randint(-3, 3) for _ in range(dim)))
    labels = dict(zip(rng.sample(vs, n_labeled), sorted(pts)))
    return build(vs, edges, labels, dim=dim)


@pytest.fixture
def g9():
    return make_g9()


@pytest.fixture
def triangle():
    return make_triangle()


@pytest.fixture
def k23():
    return make_k23()


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion for the summary."""

    def record(n: int, ok: bool, detail: str = ""):
        _RESULTS[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
