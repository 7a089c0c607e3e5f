"""Target Hamiltonians as Pauli sums, plus an exact-diagonalization ground-truth oracle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .paulis import ObservableSum, PauliString
from .state import CompiledObservable, ResourceLimitError, dense_cap

GROUND_CAP = 14
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AubryAndreParams:
    """Qubit-form Aubry-Andre couplings: hopping J, interaction Gamma, potential V."""

    J: float = 1.0
    Gamma: float = 0.0
    V: float = 2.0
    alpha: float = GOLDEN
    phi: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be 'open' or 'periodic'")
        for v in (self.J, self.Gamma, self.V, self.alpha, self.phi):
            if not np.isfinite(v):
                raise ValueError("non-finite Hamiltonian parameter")


# Named parameter sets used in the optimization study (all with J=1, phi=0).
AA_PHASES = {
    "extended": AubryAndreParams(J=1.0, Gamma=0.0, V=1.0),
    "anderson": AubryAndreParams(J=1.0, Gamma=0.0, V=4.0),
    "mbl": AubryAndreParams(J=1.0, Gamma=3.0, V=6.0),
    "ergodic": AubryAndreParams(J=1.0, Gamma=1.0, V=2.0),
    "critical": AubryAndreParams(J=1.0, Gamma=0.0, V=2.0),
}


def _string(n: int, ops: dict[int, str]) -> PauliString:
    chars = ["I"] * n
    for q, c in ops.items():
        chars[q] = c
    return PauliString("".join(chars))


def aubry_andre(n: int, params: AubryAndreParams) -> ObservableSum:
    """-(J/2) sum (XX+YY) + (Gamma/4) sum ZZ - (1/2) sum [V cos(2 pi alpha j + phi) + Gamma] Z_j.

    The field coefficient is kept in expanded form so V=0 is well defined.
    Couplings run over bonds j=1..n-1 (plus the wrap bond when periodic);
    fields run over sites j=1..n, with the 1-based site index in the cosine.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    p = params
    terms: list[tuple[float, PauliString]] = []
    bonds = [(j, j + 1) for j in range(n - 1)]
    if p.boundary == "periodic":
        bonds.append((0, n - 1))
    for j, k in bonds:
        terms.append((-p.J / 2.0, _string(n, {j: "X", k: "X"})))
        terms.append((-p.J / 2.0, _string(n, {j: "Y", k: "Y"})))
        terms.append((p.Gamma / 4.0, _string(n, {j: "Z", k: "Z"})))
    for site in range(1, n + 1):
        coeff = -0.5 * (p.V * np.cos(2.0 * np.pi * p.alpha * site + p.phi) + p.Gamma)
        terms.append((coeff, _string(n, {site - 1: "Z"})))
    return ObservableSum(terms).canonicalize(drop_tol=0.0)


def ferromagnetic_heisenberg(graph) -> ObservableSum:
    """-(1/2) sum over edges of (XX + YY + ZZ); no field terms."""
    n = graph.n
    terms = []
    for j, k in graph.edges:
        for axis in "XYZ":
            terms.append((-0.5, _string(n, {j: axis, k: axis})))
    return ObservableSum(terms).canonicalize()


@dataclass(frozen=True)
class LongRangeParams:
    """Staggered power-law XXZ chain: J[1 + gamma(-1)^(i+j)]/(2|i-j|^alpha) couplings."""

    J: float = 1.0
    gamma: float = 0.75
    Delta: float = 2.0
    alpha_decay: float = 1.1
    fields: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.alpha_decay <= 0:
            raise ValueError("decay exponent must be > 0")


def alternating_fields(n: int, magnitude: float = 0.5) -> tuple[float, ...]:
    """h_i = (-1)^i * magnitude with 1-based site index i."""
    return tuple(magnitude * (-1.0) ** i for i in range(1, n + 1))


def long_range_xxz(n: int, params: LongRangeParams) -> ObservableSum:
    if n < 2:
        raise ValueError("need n >= 2")
    p = params
    fields = p.fields if p.fields else (0.0,) * n
    if len(fields) != n:
        raise ValueError(f"need {n} field values, got {len(fields)}")
    terms = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            c = p.J * (1.0 + p.gamma * (-1.0) ** (i + j)) / (2.0 * abs(i - j) ** p.alpha_decay)
            if c == 0.0:
                continue
            qi, qj = i - 1, j - 1
            terms.append((c, _string(n, {qi: "X", qj: "X"})))
            terms.append((c, _string(n, {qi: "Y", qj: "Y"})))
            terms.append((c * p.Delta, _string(n, {qi: "Z", qj: "Z"})))
    for i, h in enumerate(fields):
        if h != 0.0:
            terms.append((float(h), _string(n, {i: "Z"})))
    return ObservableSum(terms).canonicalize()


def sample_long_range(n: int, rng) -> LongRangeParams:
    """Disorder draw used in the robustness study: alpha~U(1,2), gamma~U(.5,1), Delta~U(1,3), h~U(-1,1)."""
    return LongRangeParams(
        J=1.0,
        gamma=float(rng.uniform(0.5, 1.0)),
        Delta=float(rng.uniform(1.0, 3.0)),
        alpha_decay=float(rng.uniform(1.0, 2.0)),
        fields=tuple(rng.uniform(-1.0, 1.0, n).tolist()),
    )


def build_model(spec: dict, n: int) -> ObservableSum:
    """Build a Hamiltonian from an experiment-config model spec."""
    kind = spec.get("model")
    opts = {k: v for k, v in spec.items() if k != "model"}
    if kind == "aubry_andre":
        phase = opts.pop("phase", None)
        if phase is not None:
            base = AA_PHASES[phase]
            params = AubryAndreParams(**{**base.__dict__, **opts})
        else:
            params = AubryAndreParams(**opts)
        return aubry_andre(n, params)
    if kind == "heisenberg":
        from .circuits import make_graph

        graph = make_graph(opts.get("graph", "intermittent-chain"), n)
        return ferromagnetic_heisenberg(graph)
    if kind == "long_range":
        fields = opts.pop("fields", None)
        if fields == "alternating":
            opts["fields"] = alternating_fields(n)
        elif fields is not None:
            opts["fields"] = tuple(fields)
        return long_range_xxz(n, LongRangeParams(**opts))
    raise ValueError(f"unknown model {kind!r}")


def exact_ground(obs: ObservableSum, n: int, want_state: bool = False,
                 cap: int | None = None):
    """Smallest eigenvalue (and optionally an eigenvector) of the Hamiltonian.

    Dense eigh below 2^11; Lanczos with a deterministic start vector above,
    so repeated calls are bit-stable.  Degenerate ground spaces return one
    minimizer.
    """
    limit = dense_cap(GROUND_CAP) if cap is None else cap
    if n > limit:
        raise ResourceLimitError(f"exact diagonalization capped at n <= {limit}, got {n}")
    if obs.n != n:
        raise ValueError("observable size mismatch")
    dim = 2**n
    if dim <= 2048:
        mat = obs.to_dense()
        if want_state:
            vals, vecs = np.linalg.eigh(mat)
            return float(vals[0]), vecs[:, 0]
        return float(np.linalg.eigvalsh(mat)[0]), None
    compiled = CompiledObservable(obs, n)
    op = spla.LinearOperator((dim, dim), matvec=compiled.apply, dtype=np.complex128)
    v0 = np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)
    vals, vecs = spla.eigsh(op, k=1, which="SA", v0=v0, tol=1e-12, maxiter=20000)
    if want_state:
        return float(vals[0]), vecs[:, 0]
    return float(vals[0]), None
