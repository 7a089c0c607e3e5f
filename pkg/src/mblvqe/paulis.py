"""Sparse Pauli-string algebra: weighted sums, low-weight enumeration, measurement grouping.

Conventions
-----------
A Pauli string is a plain string over the alphabet ``IXYZ``; character ``j``
acts on qubit ``j`` (qubit 0 first).  All strings carry an implied phase +1.
Weighted sums keep real coefficients only, so every ``ObservableSum`` is
Hermitian by construction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

PAULI_LETTERS = "IXYZ"

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, order=True)
class PauliString:
    """An n-qubit Pauli tensor product with phase +1; ``letters[j]`` acts on qubit j."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("empty Pauli string")
        bad = set(self.letters) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)}")

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(1 for c in self.letters if c != "I")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.letters) if c != "I")

    def is_diagonal(self) -> bool:
        return all(c in "IZ" for c in self.letters)

    def to_dense(self) -> np.ndarray:
        """Dense 2^n matrix, little-endian (qubit j = bit j of the index)."""
        mat = np.array([[1.0 + 0j]])
        # np.kron puts its first factor on the high bits, so build from qubit n-1 down.
        for c in reversed(self.letters):
            mat = np.kron(mat, _PAULI_MATS[c])
        return mat

    def __str__(self) -> str:
        return self.letters


def qubitwise_commute(a: PauliString, b: PauliString) -> bool:
    """True if the strings commute letter-by-letter (one measurement basis fits both)."""
    return all(x == "I" or y == "I" or x == y for x, y in zip(a.letters, b.letters))


@dataclass
class ObservableSum:
    """Hermitian operator as a real-weighted sum of Pauli strings of equal length."""

    terms: list[tuple[float, PauliString]] = field(default_factory=list)

    def __post_init__(self):
        self.terms = [(float(c), p) for c, p in self.terms]
        if self.terms:
            n = self.terms[0][1].n
            for c, p in self.terms:
                if p.n != n:
                    raise ValueError("mixed string lengths in observable")
                if not np.isfinite(c):
                    raise ValueError("non-finite coefficient")

    @property
    def n(self) -> int:
        if not self.terms:
            raise ValueError("empty observable has no size")
        return self.terms[0][1].n

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def canonicalize(self, drop_tol: float = 0.0) -> "ObservableSum":
        """Merge duplicate strings, drop |coeff| <= drop_tol, sort deterministically."""
        acc: dict[str, float] = {}
        for c, p in self.terms:
            acc[p.letters] = acc.get(p.letters, 0.0) + c
        kept = sorted(
            (letters, c) for letters, c in acc.items() if abs(c) > drop_tol
        )
        kept.sort(key=lambda lc: (_weight(lc[0]), lc[0]))
        return ObservableSum([(c, PauliString(s)) for s, c in kept])

    def coeff_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def to_dense(self) -> np.ndarray:
        dim = 2**self.n
        mat = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            mat += c * p.to_dense()
        return mat

    def to_text(self) -> str:
        """One term per line: ``coefficient letters`` (e.g. ``-0.5 XXII``)."""
        return "\n".join(f"{repr(c)} {p.letters}" for c, p in self.terms) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ObservableSum":
        terms = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'coefficient letters'")
            terms.append((float(parts[0]), PauliString(parts[1].upper())))
        return cls(terms)


def _weight(letters: str) -> int:
    return sum(1 for c in letters if c != "I")


def enumerate_low_weight(n: int, k: int) -> list[PauliString]:
    """All n-qubit Pauli strings of weight <= k, identity included.

    Deterministic order: weight-major, then lexicographic by (support positions,
    letters).  Cardinality is sum_{w<=k} 3^w C(n, w).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    out = [PauliString("I" * n)]
    for w in range(1, k + 1):
        for positions in itertools.combinations(range(n), w):
            for letters in itertools.product("XYZ", repeat=w):
                chars = ["I"] * n
                for pos, c in zip(positions, letters):
                    chars[pos] = c
                out.append(PauliString("".join(chars)))
    return out


def low_weight_cardinality(n: int, k: int) -> int:
    from math import comb

    return sum(3**w * comb(n, w) for w in range(k + 1))


def group_commuting(obs: ObservableSum) -> list[list[int]]:
    """Partition term indices into qubit-wise commuting groups (greedy first-fit).

    Every pair inside a group commutes letter-by-letter, so one measurement
    basis per group suffices.  Term order is the observable's order, which
    keeps the grouping deterministic.
    """
    if not obs.terms:
        raise ValueError("cannot group an empty observable")
    groups: list[list[int]] = []
    for idx, (_, p) in enumerate(obs.terms):
        for members in groups:
            if all(qubitwise_commute(p, obs.terms[j][1]) for j in members):
                members.append(idx)
                break
        else:
            groups.append([idx])
    return groups


def group_basis(obs: ObservableSum, members: list[int]) -> str:
    """Shared measurement basis of a qubit-wise commuting group.

    Returns a string over ``IXYZ``; ``I`` marks qubits untouched by the group
    (measured in Z by convention).
    """
    basis = ["I"] * obs.n
    for j in members:
        for q, c in enumerate(obs.terms[j][1].letters):
            if c == "I":
                continue
            if basis[q] == "I":
                basis[q] = c
            elif basis[q] != c:
                raise ValueError("group is not qubit-wise commuting")
    return "".join(basis)
