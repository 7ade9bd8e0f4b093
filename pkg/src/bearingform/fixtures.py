"""Named example formations used by the tests, the acceptance suite and the CLI."""
from __future__ import annotations

import numpy as np

from .graph import Graph, build_graph
from .rigidity import Framework
from .target import BearingConstraints


def pair() -> tuple[Graph, np.ndarray]:
    """Two agents that should line up horizontally, agent 2 to the right of agent 1."""
    return build_graph(2, [(1, 2)]), np.array([[0.0, 0.0], [1.0, 0.0]])


def square() -> tuple[Graph, np.ndarray]:
    """Unit square with one diagonal; agents 1..4 go up, right, down, left."""
    p = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    return build_graph(4, [(1, 2), (2, 3), (3, 4), (1, 4), (1, 3)]), p


def square_3d() -> tuple[Graph, np.ndarray]:
    """The square with diagonal placed in the plane z = 0 of R^3."""
    graph, p = square()
    return graph, np.column_stack([p, np.zeros(4)])


def four_cycle() -> tuple[Graph, np.ndarray]:
    """Unit square without the diagonal (bearing flexible: it can stretch into a rectangle)."""
    p = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    return build_graph(4, [(1, 2), (2, 3), (3, 4), (1, 4)]), p


def collinear_triangle() -> tuple[Graph, np.ndarray]:
    """Three collinear points on a path graph."""
    return build_graph(3, [(1, 2), (2, 3)]), np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])


def octagon() -> tuple[Graph, np.ndarray]:
    """Regular octagon on the unit circle, with the cycle plus every second-neighbour chord (m = 16)."""
    a = 2 * np.pi * np.arange(8) / 8
    p = np.column_stack([np.cos(a), np.sin(a)])
    edges = [(i + 1, (i + 1) % 8 + 1) for i in range(8)] + [(i + 1, (i + 2) % 8 + 1) for i in range(8)]
    return build_graph(8, edges), p


def cube() -> tuple[Graph, np.ndarray]:
    """Unit cube with twelve sides and one space diagonal (m = 13)."""
    p = np.array(
        [[0, 0, 1], [1, 0, 1], [1, 0, 0], [0, 0, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0], [0, 1, 0]],
        dtype=float,
    )
    edges = [(1, 2), (2, 3), (3, 4), (4, 1), (1, 5), (5, 6), (6, 2), (6, 7), (7, 3), (5, 8), (7, 8), (4, 8), (1, 7)]
    return build_graph(8, edges), p


def hexagonal_pyramid() -> tuple[Graph, np.ndarray]:
    """Regular hexagon (circumradius 1) in z = 0 plus an apex above its centre (m = 12)."""
    a = 2 * np.pi * np.arange(6) / 6
    base = np.column_stack([np.cos(a), np.sin(a), np.zeros(6)])
    p = np.vstack([base, [0.0, 0.0, 1.0]])
    edges = [(i + 1, (i + 1) % 6 + 1) for i in range(6)] + [(i + 1, 7) for i in range(6)]
    return build_graph(7, edges), p


FIXTURES = {
    "pair": pair,
    "square": square,
    "square_3d": square_3d,
    "four_cycle": four_cycle,
    "collinear_triangle": collinear_triangle,
    "octagon": octagon,
    "cube": cube,
    "hexagonal_pyramid": hexagonal_pyramid,
}


def framework(name: str) -> Framework:
    graph, p = FIXTURES[name]()
    return Framework(graph, p)


def constraints(name: str) -> BearingConstraints:
    """Bearing constraints read off the named fixture's configuration."""
    graph, p = FIXTURES[name]()
    return BearingConstraints.from_configuration(graph, p)


def random_connected_framework(rng: np.random.Generator, n: int, d: int, extra: float = 0.4) -> Framework:
    """Random spanning tree plus each remaining pair with probability ``extra``; points uniform in the unit box."""
    order = rng.permutation(n) + 1
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(0, k)])))) for k in range(1, n)}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if (i, j) not in edges and rng.random() < extra:
                edges.add((i, j))
    while True:
        p = rng.uniform(-1.0, 1.0, size=(n, d))
        diff = p[:, None] - p[None]
        dist = np.sqrt(np.sum(diff * diff, axis=-1)) + np.eye(n)
        if dist.min() > 1e-3:
            return Framework(build_graph(n, sorted(edges)), p)
