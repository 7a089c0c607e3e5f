"""Trial states and the encoder mapping them to computational basis states.

The alternating-bond matrix-product trial (bond 2 inside a pair, bond 1
between pairs) is exactly a tensor product of arbitrary two-qubit states, so
it is stored that way: one normalized 4-amplitude vector per qubit pair
(2p, 2p+1), local index = bit(2p) + 2*bit(2p+1).

The encoder is one 4x4 unitary per pair sending the pair state exactly to its
highest-overlap two-bit basis state, so the encoded trial is a computational
basis state with overlap 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import state as st
from .paulis import ObservableSum, _PAULI_MATS
from .state import CompiledObservable


@dataclass
class PairProductTrial:
    """Tensor product of two-qubit states on pairs (0,1), (2,3), ..."""

    n: int
    pairs: list[np.ndarray]

    def __post_init__(self):
        if self.n % 2 or self.n < 2:
            raise ValueError("pair-product trial needs even n >= 2")
        if len(self.pairs) != self.n // 2:
            raise ValueError("wrong number of pair states")
        self.pairs = [np.asarray(p, dtype=np.complex128) for p in self.pairs]
        for p in self.pairs:
            if p.shape != (4,):
                raise ValueError("pair states are 4-amplitude vectors")
            if abs(np.linalg.norm(p) - 1.0) > 1e-10:
                raise ValueError("pair state not normalized")

    def state(self) -> np.ndarray:
        # np.kron puts its first factor on the high bits, so low pairs enter last
        psi = np.array([1.0 + 0j])
        for p in self.pairs:
            psi = np.kron(p, psi)
        return psi

    def copy(self) -> "PairProductTrial":
        return PairProductTrial(self.n, [p.copy() for p in self.pairs])

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "pairs": [{"re": p.real.tolist(), "im": p.imag.tolist()} for p in self.pairs],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PairProductTrial":
        d = json.loads(text)
        pairs = [np.array(p["re"]) + 1j * np.array(p["im"]) for p in d["pairs"]]
        return cls(d["n"], pairs)


@dataclass
class EncoderUt:
    """Per-pair 4x4 unitaries plus the target basis bitstring they map onto."""

    n: int
    blocks: list[np.ndarray]
    target_bits: str

    def __post_init__(self):
        if len(self.blocks) != self.n // 2 or len(self.target_bits) != self.n:
            raise ValueError("encoder shape mismatch")
        for b in self.blocks:
            if np.linalg.norm(b @ b.conj().T - np.eye(4)) > 1e-10:
                raise ValueError("encoder block not unitary")

    @property
    def is_identity(self) -> bool:
        return all(np.array_equal(b, np.eye(4)) for b in self.blocks)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        n = st.num_qubits(psi)
        for p, block in enumerate(self.blocks):
            st.apply_2q_unitary(psi, n, 2 * p, 2 * p + 1, block)
        return psi

    def apply_dagger(self, psi: np.ndarray) -> np.ndarray:
        n = st.num_qubits(psi)
        for p, block in enumerate(self.blocks):
            st.apply_2q_unitary(psi, n, 2 * p, 2 * p + 1, block.conj().T)
        return psi

    def target_state(self) -> np.ndarray:
        return st.basis_state(self.n, self.target_bits)


def identity_encoder(n: int, target_bits: str | None = None) -> EncoderUt:
    if n % 2:
        raise ValueError("encoder needs even n")
    bits = target_bits if target_bits is not None else "0" * n
    return EncoderUt(n, [np.eye(4, dtype=complex) for _ in range(n // 2)], bits)


def haar_product_trial(n: int, rng) -> np.ndarray:
    """Product of independent Haar-random single-qubit states (any n >= 1)."""
    psi = np.array([1.0 + 0j])
    for _ in range(n):
        q = st.haar_1q_unitary(rng)[:, 0]
        psi = np.kron(q, psi)
    return psi


def haar_pair_trial(n: int, rng) -> PairProductTrial:
    """Haar product state in pair form (for the encoder pipeline)."""
    if n % 2:
        raise ValueError("pair form needs even n")
    pairs = []
    for _ in range(n // 2):
        a = st.haar_1q_unitary(rng)[:, 0]
        b = st.haar_1q_unitary(rng)[:, 0]
        pairs.append(np.kron(b, a))  # local index: bit(low qubit) is bit 0
    return PairProductTrial(n, pairs)


def build_encoder(trial: PairProductTrial) -> EncoderUt:
    """Unitary completion sending each pair state exactly to its best basis state.

    The two-bit target of a pair is its largest-|amplitude| basis state (ties
    break toward the lowest index); the block's remaining columns come from
    Gram-Schmidt over the untouched basis vectors, so the construction is
    deterministic.
    """
    blocks, bits = [], []
    for chi in trial.pairs:
        m_star = int(np.argmax(np.abs(chi)))
        cols = [chi]
        for j in range(4):
            if j == m_star:
                continue
            v = np.zeros(4, dtype=complex)
            v[j] = 1.0
            for u in cols:
                v = v - u * np.vdot(u, v)
            norm = np.linalg.norm(v)
            if norm > 1e-7:
                cols.append(v / norm)
        if len(cols) != 4:  # fill any dropped direction from the remaining axis
            for j in range(4):
                v = np.zeros(4, dtype=complex)
                v[j] = 1.0
                for u in cols:
                    v = v - u * np.vdot(u, v)
                norm = np.linalg.norm(v)
                if norm > 1e-7:
                    cols.append(v / norm)
                if len(cols) == 4:
                    break
        u_dag = np.zeros((4, 4), dtype=complex)
        u_dag[:, m_star] = cols[0]
        rest = iter(cols[1:])
        for j in range(4):
            if j != m_star:
                u_dag[:, j] = next(rest)
        blocks.append(u_dag.conj().T)
        bits.append(f"{m_star & 1}{(m_star >> 1) & 1}")
    return EncoderUt(trial.n, blocks, "".join(bits))


# ---------------------------------------------------------------------------
# Trial-energy optimization over the pair-product manifold
# ---------------------------------------------------------------------------

def _term_pair_mats(letters: str) -> dict[int, np.ndarray]:
    """Restriction of a Pauli term to 4x4 factors on the pairs it touches."""
    mats: dict[int, np.ndarray] = {}
    for q, letter in enumerate(letters):
        if letter == "I":
            continue
        pair, hi = divmod(q, 2)
        one = _PAULI_MATS[letter]
        factor = np.kron(one, np.eye(2)) if hi else np.kron(np.eye(2), one)
        mats[pair] = factor @ mats.get(pair, np.eye(4, dtype=complex))
    return mats


class PairEnergy:
    """Evaluates <psi_t|H|psi_t> and its per-pair effective operators."""

    def __init__(self, obs: ObservableSum, n: int):
        self.n = n
        self.terms = [(c, _term_pair_mats(p.letters)) for c, p in obs.terms]

    def energy(self, pairs: list[np.ndarray]) -> float:
        total = 0.0
        for c, mats in self.terms:
            prod = c
            for pair, mat in mats.items():
                prod *= float(np.real(np.vdot(pairs[pair], mat @ pairs[pair])))
            total += prod
        return total

    def effective(self, pairs: list[np.ndarray], p_idx: int) -> tuple[np.ndarray, float]:
        """(A, const) with E = <chi_p|A|chi_p> + const at fixed other pairs."""
        a = np.zeros((4, 4), dtype=complex)
        const = 0.0
        for c, mats in self.terms:
            if p_idx in mats:
                prod = c
                for pair, mat in mats.items():
                    if pair != p_idx:
                        prod *= float(np.real(np.vdot(pairs[pair], mat @ pairs[pair])))
                a += prod * mats[p_idx]
            else:
                prod = c
                for pair, mat in mats.items():
                    prod *= float(np.real(np.vdot(pairs[pair], mat @ pairs[pair])))
                const += prod
        return a, const


def best_basis_state(obs: ObservableSum, n: int) -> tuple[int, float]:
    """Computational basis state minimizing <b|H|b> (diagonal scan)."""
    diag = CompiledObservable(obs, n).diag
    idx = int(np.argmin(diag))
    return idx, float(diag[idx])


def optimize_pair_trial(
    obs: ObservableSum,
    n: int,
    rng,
    max_sweeps: int = 400,
    lr: float = 0.05,
    tol: float = 1e-10,
) -> PairProductTrial:
    """Minimize the trial energy by projected gradient descent on the pair vectors.

    Seeded from the best computational basis state (plus a nudged restart to
    leave saddle points); backtracking keeps every accepted step non-increasing,
    so the returned energy never exceeds the best basis-state energy.
    """
    if n % 2:
        raise ValueError("pair trial needs even n")
    if obs.n != n:
        raise ValueError("observable size mismatch")
    pe = PairEnergy(obs, n)
    idx, _ = best_basis_state(obs, n)
    seed_pairs = []
    for p in range(n // 2):
        v = np.zeros(4, dtype=np.complex128)
        v[(idx >> (2 * p)) & 3] = 1.0
        seed_pairs.append(v)

    def descend(pairs):
        energy = pe.energy(pairs)
        step = lr
        for _ in range(max_sweeps):
            prev = energy
            for p in range(n // 2):
                a, const = pe.effective(pairs, p)
                chi = pairs[p]
                e_loc = float(np.real(np.vdot(chi, a @ chi)))
                grad = 2.0 * (a @ chi - e_loc * chi)
                gn = np.linalg.norm(grad)
                if gn < 1e-14:
                    continue
                trial_step = step
                for _ in range(30):
                    cand = chi - trial_step * grad
                    cand /= np.linalg.norm(cand)
                    e_new = float(np.real(np.vdot(cand, a @ cand)))
                    if e_new <= e_loc + 1e-15:
                        pairs[p] = cand
                        break
                    trial_step *= 0.5
            energy = pe.energy(pairs)
            if prev - energy < tol:
                break
        return energy, pairs

    e_plain, pairs_plain = descend([v.copy() for v in seed_pairs])
    nudged = []
    for v in seed_pairs:
        w = v + 0.01 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        nudged.append(w / np.linalg.norm(w))
    e_nudge, pairs_nudge = descend(nudged)
    pairs = pairs_nudge if e_nudge < e_plain else pairs_plain
    return PairProductTrial(n, pairs)


def trial_energy(obs: ObservableSum, trial: PairProductTrial) -> float:
    return PairEnergy(obs, trial.n).energy(trial.pairs)


def perturb_trial(trial: PairProductTrial, gamma: float, rng) -> PairProductTrial:
    """Blend each pair toward an independent random state and renormalize.

    gamma=0 returns an identical copy; gamma=1 is a fully random trial.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("interpolation factor must lie in [0, 1]")
    if gamma == 0.0:
        return trial.copy()
    pairs = []
    for chi in trial.pairs:
        rand = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        rand /= np.linalg.norm(rand)
        mix = (1.0 - gamma) * chi + gamma * rand
        norm = np.linalg.norm(mix)
        if norm < 1e-12:  # pathological cancellation; fall back to the random draw
            mix, norm = rand, 1.0
        pairs.append(mix / norm)
    return PairProductTrial(trial.n, pairs)


def conjugated_energy(params, graph, obs: ObservableSum, encoder: EncoderUt) -> float:
    """<phi_c| U(theta)^dag U_t H U_t^dag U(theta) |phi_c>."""
    from .circuits import apply_circuit

    psi = encoder.target_state()
    apply_circuit(psi, graph, params)
    encoder.apply_dagger(psi)
    return CompiledObservable(obs, graph.n).expectation(psi)
