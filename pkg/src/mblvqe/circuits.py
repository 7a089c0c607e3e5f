"""Layered hardware-efficient ansatz: connectivity graphs, parameter ensembles, application.

Each layer applies, in order, the single-qubit X rotations, single-qubit Z
rotations, then the two-qubit XX, YY, ZZ rotations over the coupling graph's
edges (rotations inside one block commute, so intra-block order is free but
fixed to qubit/edge order for reproducibility).

Parameters per layer: m_s = n + |E| steady angles (z, zz) and m_k = n + 2|E|
kick angles (x, xx, yy).  The flat parameter layout, used by gradients and
optimizers, is per layer [x(n), z(n), xx(|E|), yy(|E|), zz(|E|)] in
application order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import state as st


@dataclass(frozen=True)
class CouplingGraph:
    """Qubit connectivity for the two-qubit blocks."""

    n: int
    edges: tuple[tuple[int, int], ...]
    kind: str = "custom"

    def __post_init__(self):
        seen = set()
        for j, k in self.edges:
            if j == k:
                raise ValueError("self-loop edge")
            if not (0 <= j < self.n and 0 <= k < self.n):
                raise ValueError("edge index out of range")
            if j > k:
                raise ValueError("edges must be ordered (j < k)")
            if (j, k) in seen:
                raise ValueError("duplicate edge")
            seen.add((j, k))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def m_steady(self) -> int:
        return self.n + self.num_edges

    @property
    def m_kick(self) -> int:
        return self.n + 2 * self.num_edges

    def neighbors(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {q: set() for q in range(self.n)}
        for j, k in self.edges:
            adj[j].add(k)
            adj[k].add(j)
        return adj

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "edges": [list(e) for e in self.edges]}


def ring_graph(n: int) -> CouplingGraph:
    if n < 3:
        raise ValueError("ring needs n >= 3")
    edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    return CouplingGraph(n, tuple(sorted(edges)), "ring")


def circulant_graph(n: int) -> CouplingGraph:
    """Ci_n(1,2): every qubit coupled to neighbors at ring distance 1 and 2."""
    if n < 5:
        raise ValueError("Ci_n(1,2) needs n >= 5")
    edges = set()
    for d in (1, 2):
        for i in range(n):
            j = (i + d) % n
            edges.add((min(i, j), max(i, j)))
    return CouplingGraph(n, tuple(sorted(edges)), "circulant-1-2")


def intermittent_chain_graph(n: int) -> CouplingGraph:
    """Backbone path of ceil(2n/3) qubits plus pendants on every second site.

    Backbone qubits are 0..B-1 along the path; pendant p gets label B+p and
    attaches to backbone site 1 + 2p.  This uses up exactly n qubits.
    """
    if n < 3:
        raise ValueError("intermittent chain needs n >= 3")
    backbone = math.ceil(2 * n / 3)
    pendants = n - backbone
    if 1 + 2 * (pendants - 1) >= backbone:
        raise ValueError(f"no intermittent-chain layout for n={n}")
    edges = [(i, i + 1) for i in range(backbone - 1)]
    edges += [(1 + 2 * p, backbone + p) for p in range(pendants)]
    return CouplingGraph(n, tuple(sorted(edges)), "intermittent-chain")


def make_graph(kind: str, n: int, edges=None) -> CouplingGraph:
    if kind == "ring":
        return ring_graph(n)
    if kind in ("circulant-1-2", "circulant"):
        return circulant_graph(n)
    if kind == "intermittent-chain":
        return intermittent_chain_graph(n)
    if kind == "custom":
        if edges is None:
            raise ValueError("custom graph needs explicit edges")
        return CouplingGraph(n, tuple(sorted(tuple(e) for e in edges)), "custom")
    raise ValueError(f"unknown graph kind {kind!r}")


# ---------------------------------------------------------------------------
# Parameter tensors
# ---------------------------------------------------------------------------

KICK_BLOCKS = ("x", "xx", "yy")
STEADY_BLOCKS = ("z", "zz")
PERIODIC_KINDS = ("floquet", "chebyshev")


@dataclass
class ParameterTensor:
    """Rotation angles for every block of every layer, plus ensemble metadata.

    ``ensemble`` records how the tensor was drawn: a dict with at least a
    ``kind`` key ("floquet", "chebyshev", "random", "close-to-identity",
    "manual"), and ``W`` / ``seed`` where meaningful.  Floquet/Chebyshev
    tensors replicate layer 1 across all layers exactly.
    """

    graph: CouplingGraph
    depth: int
    x: np.ndarray       # (D, n)
    z: np.ndarray       # (D, n)
    xx: np.ndarray      # (D, |E|)
    yy: np.ndarray      # (D, |E|)
    zz: np.ndarray      # (D, |E|)
    ensemble: dict = field(default_factory=lambda: {"kind": "manual"})

    def __post_init__(self):
        n, e, d = self.graph.n, self.graph.num_edges, self.depth
        shapes = {"x": (d, n), "z": (d, n), "xx": (d, e), "yy": (d, e), "zz": (d, e)}
        for name, want in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != want:
                raise ValueError(f"{name} block has shape {arr.shape}, want {want}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} block has non-finite entries")
            setattr(self, name, arr)

    @property
    def num_parameters(self) -> int:
        return self.depth * (self.graph.m_steady + self.graph.m_kick)

    def blocks(self) -> tuple[np.ndarray, ...]:
        return (self.x, self.z, self.xx, self.yy, self.zz)

    def is_periodic(self) -> bool:
        return all(np.array_equal(b, np.tile(b[:1], (self.depth, 1))) for b in self.blocks())

    def flatten(self) -> np.ndarray:
        """Flat vector, per layer [x, z, xx, yy, zz] in application order."""
        layers = [
            np.concatenate([b[layer] for b in self.blocks()])
            for layer in range(self.depth)
        ]
        return np.concatenate(layers) if layers else np.zeros(0)

    def with_flat(self, flat: np.ndarray, ensemble=None) -> "ParameterTensor":
        n, e = self.graph.n, self.graph.num_edges
        per_layer = n + n + 3 * e
        if flat.shape != (self.depth * per_layer,):
            raise ValueError("flat parameter vector has wrong length")
        mat = np.asarray(flat, dtype=float).reshape(self.depth, per_layer)
        cuts = np.cumsum([n, n, e, e])
        xs, zs, xxs, yys, zzs = np.hsplit(mat, cuts)
        return ParameterTensor(
            self.graph, self.depth, xs, zs, xxs, yys, zzs,
            ensemble=dict(ensemble or {"kind": "manual"}),
        )

    def copy(self) -> "ParameterTensor":
        return ParameterTensor(
            self.graph, self.depth,
            *(b.copy() for b in self.blocks()), ensemble=dict(self.ensemble),
        )

    def to_json_dict(self) -> dict:
        return {
            "n": self.graph.n,
            "D": self.depth,
            "graph": self.graph.to_json_dict(),
            "steady": {"z": self.z.tolist(), "zz": self.zz.tolist()},
            "kick": {"x": self.x.tolist(), "xx": self.xx.tolist(), "yy": self.yy.tolist()},
            "ensemble": self.ensemble,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "ParameterTensor":
        d = json.loads(text)
        g = d["graph"]
        graph = CouplingGraph(g["n"], tuple(tuple(e) for e in g["edges"]), g["kind"])
        return cls(
            graph, d["D"],
            np.array(d["kick"]["x"]), np.array(d["steady"]["z"]),
            np.array(d["kick"]["xx"]), np.array(d["kick"]["yy"]),
            np.array(d["steady"]["zz"]), ensemble=d.get("ensemble", {"kind": "manual"}),
        )


def _replicate(layer: dict[str, np.ndarray], depth: int) -> dict[str, np.ndarray]:
    return {k: np.tile(v, (depth, 1)) for k, v in layer.items()}


def floquet_init(graph: CouplingGraph, depth: int, w: float, rng) -> ParameterTensor:
    """Sample one layer (steady on [-pi, pi), kick on [-W, W]) and replicate it."""
    if w < 0:
        raise ValueError("kick strength must be >= 0")
    n, e = graph.n, graph.num_edges
    layer = {
        "z": rng.uniform(-np.pi, np.pi, n),
        "zz": rng.uniform(-np.pi, np.pi, e),
        "x": rng.uniform(-w, w, n),
        "xx": rng.uniform(-w, w, e),
        "yy": rng.uniform(-w, w, e),
    }
    full = _replicate(layer, depth)
    return ParameterTensor(
        graph, depth, full["x"], full["z"], full["xx"], full["yy"], full["zz"],
        ensemble={"kind": "floquet", "W": float(w)},
    )


def random_init(graph: CouplingGraph, depth: int, rng) -> ParameterTensor:
    """Every angle of every layer independent uniform on [-pi, pi)."""
    n, e = graph.n, graph.num_edges
    draw = lambda m: rng.uniform(-np.pi, np.pi, (depth, m))
    return ParameterTensor(
        graph, depth, draw(n), draw(n), draw(e), draw(e), draw(e),
        ensemble={"kind": "random"},
    )


def cti_init(graph: CouplingGraph, depth: int, eps: float, rng) -> ParameterTensor:
    """Close-to-identity: every angle independent uniform on [-eps, eps]."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    n, e = graph.n, graph.num_edges
    draw = lambda m: rng.uniform(-eps, eps, (depth, m))
    return ParameterTensor(
        graph, depth, draw(n), draw(n), draw(e), draw(e), draw(e),
        ensemble={"kind": "close-to-identity", "eps": float(eps)},
    )


def narrow_init(graph: CouplingGraph, depth: int, w: float, rng) -> ParameterTensor:
    """Non-Floquet control ensemble: every angle independent uniform on [-w, w]."""
    if w < 0:
        raise ValueError("range must be >= 0")
    n, e = graph.n, graph.num_edges
    draw = lambda m: rng.uniform(-w, w, (depth, m))
    return ParameterTensor(
        graph, depth, draw(n), draw(n), draw(e), draw(e), draw(e),
        ensemble={"kind": "narrow", "W": float(w)},
    )


def chebyshev_zeros(count: int) -> np.ndarray:
    j = np.arange(1, count + 1)
    return np.pi * np.cos((2 * j - 1) * np.pi / (2 * count))


def chebyshev_init(graph: CouplingGraph, depth: int, w: float) -> ParameterTensor:
    """Deterministic seeding from Chebyshev zeros, staggered by sign.

    The m_s + m_k zeros of T_{m_s+m_k}, scaled to [-pi, pi], are sorted by
    absolute value (descending) and interleaved: non-negative values fill even
    slots of the angle array, negative values the odd slots.  The array is
    split [z, zz, x, xx, yy]; kick entries are rescaled by W/pi into [-W, W].
    Layer 1 is replicated across all layers.
    """
    if w < 0:
        raise ValueError("kick strength must be >= 0")
    n, e = graph.n, graph.num_edges
    total = graph.m_steady + graph.m_kick
    zeros = chebyshev_zeros(total)
    pos = sorted([v for v in zeros if v >= 0], key=abs, reverse=True)
    neg = sorted([v for v in zeros if v < 0], key=abs, reverse=True)
    angles = np.empty(total)
    angles[0::2] = pos
    angles[1::2] = neg
    z, zz = angles[:n], angles[n : n + e]
    scale = w / np.pi
    x = angles[n + e : 2 * n + e] * scale
    xx = angles[2 * n + e : 2 * n + 2 * e] * scale
    yy = angles[2 * n + 2 * e :] * scale
    layer = {"x": x, "z": z, "xx": xx, "yy": yy, "zz": zz}
    full = _replicate(layer, depth)
    return ParameterTensor(
        graph, depth, full["x"], full["z"], full["xx"], full["yy"], full["zz"],
        ensemble={"kind": "chebyshev", "W": float(w)},
    )


def uniform_kick_scaling(params: ParameterTensor, lam: float) -> ParameterTensor:
    """Multiply every kick angle by lam, in every layer; steady angles untouched."""
    if params.ensemble.get("kind") not in PERIODIC_KINDS:
        raise ValueError("uniform kick scaling is defined on Floquet-initialized tensors")
    if lam < 1:
        raise ValueError("scale factor must be >= 1")
    out = params.copy()
    out.x = out.x * lam
    out.xx = out.xx * lam
    out.yy = out.yy * lam
    out.ensemble = dict(params.ensemble)
    out.ensemble["lambda"] = float(lam) * float(params.ensemble.get("lambda", 1.0))
    return out


def interpolate(theta_a: ParameterTensor, theta_b: ParameterTensor, s: float) -> ParameterTensor:
    """Elementwise affine blend (1-s)*theta_a + s*theta_b."""
    if theta_a.graph != theta_b.graph or theta_a.depth != theta_b.depth:
        raise ValueError("parameter tensors have mismatched shapes")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    blend = [(1 - s) * a + s * b for a, b in zip(theta_a.blocks(), theta_b.blocks())]
    return ParameterTensor(
        theta_a.graph, theta_a.depth, *blend,
        ensemble={"kind": "interpolated", "s": float(s)},
    )


# ---------------------------------------------------------------------------
# Circuit application
# ---------------------------------------------------------------------------

def gate_plan(graph: CouplingGraph, depth: int) -> list[tuple[str, tuple, int]]:
    """Ordered gate list (kind, targets, flat-parameter index) for the ansatz."""
    n, e = graph.n, graph.num_edges
    per_layer = 2 * n + 3 * e
    plan: list[tuple[str, tuple, int]] = []
    for layer in range(depth):
        base = layer * per_layer
        for q in range(n):
            plan.append(("x", (q,), base + q))
        for q in range(n):
            plan.append(("z", (q,), base + n + q))
        for i, (j, k) in enumerate(graph.edges):
            plan.append(("xx", (j, k), base + 2 * n + i))
        for i, (j, k) in enumerate(graph.edges):
            plan.append(("yy", (j, k), base + 2 * n + e + i))
        for i, (j, k) in enumerate(graph.edges):
            plan.append(("zz", (j, k), base + 2 * n + 2 * e + i))
    return plan


_KERNELS = {
    "x": st.apply_rx,
    "z": st.apply_rz,
    "xx": st.apply_rxx,
    "yy": st.apply_ryy,
    "zz": st.apply_rzz,
}


def apply_plan(psi: np.ndarray, n: int, plan, flat: np.ndarray) -> np.ndarray:
    for kind, targets, idx in plan:
        _KERNELS[kind](psi, n, *targets, flat[idx])
    return psi


def apply_plan_dagger(psi: np.ndarray, n: int, plan, flat: np.ndarray) -> np.ndarray:
    for kind, targets, idx in reversed(plan):
        _KERNELS[kind](psi, n, *targets, -flat[idx])
    return psi


def apply_circuit(psi: np.ndarray, graph: CouplingGraph, params: ParameterTensor) -> np.ndarray:
    """Apply the full layered ansatz in place (x, z, xx, yy, zz per layer)."""
    n = st.num_qubits(psi)
    if n != graph.n:
        raise ValueError(f"state has {n} qubits, graph has {graph.n}")
    return apply_plan(psi, n, gate_plan(graph, params.depth), params.flatten())


def apply_layer(psi: np.ndarray, graph: CouplingGraph, params: ParameterTensor, layer: int = 0) -> np.ndarray:
    """Apply a single layer of the ansatz in place."""
    n = st.num_qubits(psi)
    one = ParameterTensor(
        graph, 1,
        params.x[layer : layer + 1], params.z[layer : layer + 1],
        params.xx[layer : layer + 1], params.yy[layer : layer + 1],
        params.zz[layer : layer + 1], ensemble={"kind": "manual"},
    )
    return apply_plan(psi, n, gate_plan(graph, 1), one.flatten())


def circuit_unitary(graph: CouplingGraph, params: ParameterTensor, cap: int | None = None) -> np.ndarray:
    plan, flat = gate_plan(graph, params.depth), params.flatten()
    return st.dense_unitary(graph.n, lambda mat: apply_plan(mat, graph.n, plan, flat), cap=cap)


def layer_unitary(graph: CouplingGraph, params: ParameterTensor, cap: int | None = None) -> np.ndarray:
    """Dense matrix of the single-layer (Floquet) unitary."""
    plan = gate_plan(graph, 1)
    one = ParameterTensor(
        graph, 1, params.x[:1], params.z[:1], params.xx[:1], params.yy[:1],
        params.zz[:1], ensemble={"kind": "manual"},
    )
    flat = one.flatten()
    return st.dense_unitary(graph.n, lambda mat: apply_plan(mat, graph.n, plan, flat), cap=cap)
