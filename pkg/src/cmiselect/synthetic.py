"""Synthetic data generators and ground-truth oracles.

Includes the 2D bullseye distribution with its analytic MI oracle, a
DAG-driven 3D bullseye generator, and an exact d-separation checker
used as ground truth for conditional independence labels.
"""

import json
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .data import Dataset

# Ring conventions: the experiments use [1,2] u [3,4]; the analytic MI
# derivation uses the quarter-scale rings.
DEFAULT_RINGS = ((1.0, 2.0), (3.0, 4.0))
ORACLE_RINGS = ((0.25, 0.5), (0.75, 1.0))


@dataclass(frozen=True)
class BullseyeConfig:
    epsilon: float = 0.3
    n: int = 2000
    radius_rings: tuple = DEFAULT_RINGS
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 0.5:
            raise ValueError("epsilon must be in [0, 0.5]")
        (a1, b1), (a2, b2) = self.radius_rings
        if not (a1 < b1 <= a2 < b2):
            raise ValueError("rings must be ordered and disjoint")


def _sample_ring_radius(rings, n, rng):
    (a1, b1), (a2, b2) = rings
    l1, l2 = b1 - a1, b2 - a2
    u = rng.uniform(0.0, l1 + l2, size=n)
    return np.where(u < l1, a1 + u, a2 + (u - l1))


def gen_bullseye_2d(cfg):
    """Samples (X, Y, R) with X = (R cos T, R sin T) and Y = R + noise."""
    rng = np.random.default_rng(cfg.seed)
    r = _sample_ring_radius(cfg.radius_rings, cfg.n, rng)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n)
    noise = rng.uniform(-cfg.epsilon, cfg.epsilon, size=cfg.n)
    x = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    y = r + noise
    return x, y.reshape(-1, 1), r.reshape(-1, 1)


def _trapezoid_pdf(y, a, b, eps):
    """Density of Unif[a,b] + Unif[-eps,eps] (vectorized in y)."""
    w_small = min(b - a, 2.0 * eps)
    w_large = max(b - a, 2.0 * eps)
    val = np.minimum(np.minimum(y - (a - eps), (b + eps) - y), w_small)
    return np.clip(val, 0.0, None) / (w_small * w_large)


def mi_oracle_bullseye(epsilon, rings=ORACLE_RINGS):
    """Analytic I(X;Y) = h(Y) - log(2 eps) for the bullseye construction.

    h(Y) is computed by adaptive quadrature over the equal-weight
    mixture of the two trapezoidal ring densities.
    """
    if not 0.0 < epsilon <= 0.5:
        raise ValueError("epsilon must be in (0, 0.5]")
    (a1, b1), (a2, b2) = rings
    if not (a1 < b1 <= a2 < b2):
        raise ValueError("rings must be ordered and disjoint")

    def pdf(y):
        return 0.5 * (_trapezoid_pdf(np.asarray(y), a1, b1, epsilon)
                      + _trapezoid_pdf(np.asarray(y), a2, b2, epsilon))

    def integrand(y):
        p = pdf(y)
        return float(-p * np.log(p)) if p > 0 else 0.0

    lo, hi = a1 - epsilon, b2 + epsilon
    breaks = sorted({a1 - epsilon, a1 + epsilon, b1 - epsilon, b1 + epsilon,
                     a2 - epsilon, a2 + epsilon, b2 - epsilon, b2 + epsilon})
    breaks = [p for p in breaks if lo < p < hi]
    h_y, err = quad(integrand, lo, hi, points=breaks, limit=400,
                    epsabs=1e-10, epsrel=1e-10)
    if err > 1e-6:
        raise RuntimeError(f"quadrature error {err} above tolerance")
    return h_y - np.log(2.0 * epsilon)


# ---------------------------------------------------------------------
# DAG specification, generation and d-separation
# ---------------------------------------------------------------------

Y_NODE = "y"


def feature_node(i):
    """Name of feature i (0-based index -> x1..xm convention)."""
    return f"x{i + 1}"


@dataclass
class DagSpec:
    m: int
    edges: list
    epsilon: float = 0.3

    def __post_init__(self):
        valid = {feature_node(i) for i in range(self.m)} | {Y_NODE}
        for a, b in self.edges:
            if a not in valid or b not in valid:
                raise ValueError(f"edge ({a}, {b}) uses unknown node")
        self.topological_order()  # raises on cycles

    @property
    def nodes(self):
        return [feature_node(i) for i in range(self.m)] + [Y_NODE]

    def parents(self, node):
        return [a for a, b in self.edges if b == node]

    def children(self, node):
        return [b for a, b in self.edges if a == node]

    def topological_order(self):
        nodes = self.nodes
        indeg = {v: 0 for v in nodes}
        for _, b in self.edges:
            indeg[b] += 1
        queue = deque(v for v in nodes if indeg[v] == 0)
        order = []
        while queue:
            v = queue.popleft()
            order.append(v)
            for c in self.children(v):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(order) != len(nodes):
            raise ValueError("edge list contains a cycle")
        return order

    def markov_blanket_of_y(self):
        """Parents, children and coparents of y, as 0-based feature indices."""
        pa = set(self.parents(Y_NODE))
        ch = set(self.children(Y_NODE))
        cop = set()
        for c in ch:
            cop.update(p for p in self.parents(c) if p != Y_NODE)
        blanket = (pa | ch | cop) - {Y_NODE}
        return {int(v[1:]) - 1 for v in blanket}

    def to_json(self, path=None):
        doc = {"m": self.m, "epsilon": self.epsilon,
               "edges": [list(e) for e in self.edges]}
        if path is None:
            return json.dumps(doc)
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, source):
        if isinstance(source, str) and source.lstrip().startswith("{"):
            doc = json.loads(source)
        else:
            with open(source) as f:
                doc = json.load(f)
        return cls(m=int(doc["m"]),
                   edges=[tuple(e) for e in doc["edges"]],
                   epsilon=float(doc.get("epsilon", 0.3)))


def default_dag(epsilon=0.3):
    """Six-feature benchmark DAG; the blanket of y is {x3, x5}."""
    edges = [("x1", "x2"), ("x1", "x3"), ("x2", "x4"),
             ("x6", "x5"), ("x3", "y"), ("x5", "y")]
    return DagSpec(m=6, edges=edges, epsilon=epsilon)


def _uniform_sphere(n, rng):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def gen_bullseye_dag(dag, n, seed=0, rings=DEFAULT_RINGS):
    """Generate 3D-sphere features and scalar y along the DAG.

    Root features have ring-distributed radii; every other node's
    magnitude is the average of its parents' magnitudes plus uniform
    noise. Feature values are uniform directions on the sphere scaled
    by the magnitude.
    """
    rng = np.random.default_rng(seed)
    magnitudes = {}
    values = {}
    for node in dag.topological_order():
        parents = dag.parents(node)
        if parents:
            base = np.mean([magnitudes[p] for p in parents], axis=0)
            base = base + rng.uniform(-dag.epsilon, dag.epsilon, size=n)
        else:
            base = _sample_ring_radius(rings, n, rng)
        if node == Y_NODE:
            values[node] = base
            magnitudes[node] = np.abs(base)
        else:
            values[node] = base[:, None] * _uniform_sphere(n, rng)
            magnitudes[node] = np.abs(base)
    blocks = [values[feature_node(i)] for i in range(dag.m)]
    return Dataset(blocks=blocks, y=values[Y_NODE])


def d_separated(dag, a, b, given=()):
    """Exact d-separation via the moralized ancestral graph.

    `a` and `b` are node names; `given` is an iterable of node names.
    """
    given = set(given)
    if a == b:
        raise ValueError("a and b must differ")
    if a in given or b in given:
        raise ValueError("conditioning set must exclude the endpoints")
    # ancestral set of {a, b} union given
    relevant = {a, b} | given
    ancestors = set(relevant)
    frontier = deque(relevant)
    while frontier:
        v = frontier.popleft()
        for p in dag.parents(v):
            if p not in ancestors:
                ancestors.add(p)
                frontier.append(p)
    # moralize: undirect edges, marry parents of common children
    adj = {v: set() for v in ancestors}
    for u, v in dag.edges:
        if u in ancestors and v in ancestors:
            adj[u].add(v)
            adj[v].add(u)
    for v in ancestors:
        ps = [p for p in dag.parents(v) if p in ancestors]
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                adj[ps[i]].add(ps[j])
                adj[ps[j]].add(ps[i])
    # reachability avoiding conditioned nodes
    seen = {a}
    frontier = deque([a])
    while frontier:
        v = frontier.popleft()
        for u in adj[v]:
            if u in given or u in seen:
                continue
            if u == b:
                return False
            seen.add(u)
            frontier.append(u)
    return True
