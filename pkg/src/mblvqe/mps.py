"""Two-site variational MPS ground search with bond truncation (desk-scale).

Site ``i`` of the chain is qubit ``i`` in the little-endian state convention.
The two-site effective eigenproblem is solved through the dense-space
isometry (the environment tensors are contracted against full 2^n vectors),
which is exact and keeps the code small; the variational class is still the
chi-truncated MPS, so energies are variational upper bounds.  This limits the
solver to the same qubit cap as exact diagonalization, which is all the
benchmarks need.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .hamiltonians import GROUND_CAP
from .paulis import ObservableSum
from .state import CompiledObservable, ResourceLimitError, dense_cap


@dataclass
class MPS:
    """Open-boundary MPS; tensors[i] has shape (chi_left, 2, chi_right)."""

    tensors: list[np.ndarray]

    @property
    def n(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def state(self) -> np.ndarray:
        """Contract to a full statevector (little-endian)."""
        vec = np.array([[1.0 + 0j]])  # (dim_done, chi)
        for t in self.tensors:
            vec = np.einsum("pa,asb->spb", vec, t).reshape(-1, t.shape[2])
        return vec[:, 0]

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors])


def random_product_mps(n: int, rng) -> MPS:
    tensors = []
    for _ in range(n):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        tensors.append((v / np.linalg.norm(v)).reshape(1, 2, 1))
    return MPS(tensors)


def _left_env(prev: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    # prev: (dimL, chi_in); tensor: (chi_in, 2, chi_out) -> (2*dimL, chi_out)
    return np.einsum("pa,asb->spb", prev, tensor).reshape(-1, tensor.shape[2])


def _right_env(tensor: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    # nxt: (chi_out, dimR); tensor: (chi_in, 2, chi_out) -> (chi_in, 2*dimR)
    return np.einsum("asb,bp->aps", tensor, nxt).reshape(tensor.shape[0], -1)


class _TwoSiteProblem:
    def __init__(self, compiled: CompiledObservable, left: np.ndarray, right: np.ndarray):
        self.compiled = compiled
        self.left = left        # (dimL, chi_l), isometric columns
        self.right = right      # (chi_r, dimR), isometric rows
        self.chi_l = left.shape[1]
        self.chi_r = right.shape[0]
        self.dim = self.chi_l * 4 * self.chi_r

    def embed(self, block: np.ndarray) -> np.ndarray:
        v = block.reshape(self.chi_l, 2, 2, self.chi_r)
        out = np.einsum("pa,axyb,bq->qyxp", self.left, v, self.right)
        return np.ascontiguousarray(out).reshape(-1)

    def project(self, psi: np.ndarray) -> np.ndarray:
        t = psi.reshape(-1, 2, 2, self.left.shape[0])
        out = np.einsum("qyxp,pa,bq->axyb", t, self.left.conj(), self.right.conj())
        return np.ascontiguousarray(out).reshape(-1)

    def matvec(self, block: np.ndarray) -> np.ndarray:
        return self.project(self.compiled.apply(self.embed(block)))

    def ground_block(self, v0: np.ndarray) -> tuple[float, np.ndarray]:
        if self.dim <= 64:
            mat = np.empty((self.dim, self.dim), dtype=np.complex128)
            eye = np.eye(self.dim, dtype=np.complex128)
            for j in range(self.dim):
                mat[:, j] = self.matvec(eye[:, j])
            vals, vecs = np.linalg.eigh(mat)
            return float(vals[0]), vecs[:, 0]
        op = spla.LinearOperator((self.dim, self.dim), matvec=self.matvec,
                                 dtype=np.complex128)
        vals, vecs = spla.eigsh(op, k=1, which="SA", v0=v0, tol=1e-11,
                                ncv=min(self.dim, 24), maxiter=5000)
        return float(vals[0]), vecs[:, 0]


def mps_variational_ground(obs: ObservableSum, n: int, chi_max: int,
                           sweeps: int = 10, tol: float = 1e-8, rng=None,
                           init: MPS | None = None,
                           cap: int | None = None) -> tuple[float, MPS]:
    """DMRG-style two-site sweeps with singular-value truncation at chi_max.

    Energy is non-increasing across sweeps and bounded below by the exact
    ground energy.  Convergence is declared when a full sweep improves the
    energy by less than ``tol``; ``init`` warm-starts from a previous result
    (e.g. a smaller-chi run).
    """
    if chi_max < 1:
        raise ValueError("need chi_max >= 1")
    limit = dense_cap(GROUND_CAP) if cap is None else cap
    if n > limit:
        raise ResourceLimitError(f"MPS sweep solver capped at n <= {limit}")
    if obs.n != n:
        raise ValueError("observable size mismatch")
    compiled = CompiledObservable(obs, n)
    rng = rng or np.random.default_rng(0)
    mps = init.copy() if init is not None else random_product_mps(n, rng)
    tensors = mps.tensors

    rights: list[np.ndarray | None] = [None] * (n + 1)
    rights[n] = np.ones((1, 1), dtype=np.complex128)
    for j in range(n - 1, 1, -1):
        rights[j] = _right_env(tensors[j], rights[j + 1])
    lefts: list[np.ndarray | None] = [None] * (n + 1)
    lefts[0] = np.ones((1, 1), dtype=np.complex128)

    def solve_bond(i: int, to_right: bool) -> float:
        left, right = lefts[i], rights[i + 2]
        prob = _TwoSiteProblem(compiled, left, right)
        v0 = np.einsum("asb,btc->astc", tensors[i], tensors[i + 1]).reshape(-1)
        energy, block = prob.ground_block(v0)
        chi_l, chi_r = left.shape[1], right.shape[0]
        mat = block.reshape(chi_l * 2, 2 * chi_r)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = min(chi_max, int(np.sum(s > 1e-12)) or 1)
        u, s, vh = u[:, :keep], s[:keep], vh[:keep]
        s = s / np.linalg.norm(s)
        if to_right:
            tensors[i] = u.reshape(chi_l, 2, keep)
            tensors[i + 1] = (s[:, None] * vh).reshape(keep, 2, chi_r)
            lefts[i + 1] = _left_env(lefts[i], tensors[i])
        else:
            tensors[i + 1] = vh.reshape(keep, 2, chi_r)
            tensors[i] = (u * s[None, :]).reshape(chi_l, 2, keep)
            rights[i + 1] = _right_env(tensors[i + 1], rights[i + 2])
        return energy

    energy = np.inf
    for _ in range(sweeps):
        for i in range(n - 1):
            last = solve_bond(i, to_right=True)
        for i in range(n - 2, -1, -1):
            last = solve_bond(i, to_right=False)
        if energy - last < tol:
            energy = last
            break
        energy = last
    # report the energy of the state actually kept (the final truncation may
    # sit a hair above the last local eigenvalue)
    result = MPS(tensors)
    psi = result.state()
    psi /= np.linalg.norm(psi)
    return compiled.expectation(psi), result


def mps_chi_curve(obs: ObservableSum, n: int, chi_values, exact_energy: float,
                  sweeps: int = 10, rng=None) -> list[tuple[int, float]]:
    """(chi, |E_mps - E_exact|) curve, warm-starting each chi from the last."""
    rng = rng or np.random.default_rng(0)
    out = []
    mps = None
    for chi in sorted(chi_values):
        energy, mps = mps_variational_ground(obs, n, chi, sweeps=sweeps, rng=rng,
                                             init=mps)
        out.append((int(chi), abs(energy - exact_energy)))
    return out
