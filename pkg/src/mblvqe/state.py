"""Dense statevector engine: gate kernels, expectations, entropies, sampling, Haar oracles.

Bit order
---------
Qubit ``j`` is bit ``j`` of the basis index (little-endian), everywhere.
``|01>`` for two qubits means qubit 0 in ``|0>``, qubit 1 in ``|1>``, i.e.
basis index 2.  A state is a plain 1-D complex ndarray of length 2^n; the
kernels also accept a (2^n, m) array and act on every column (used to build
dense unitaries).

All rotation gates are exp(-i*(theta/2)*P) for an involutory Pauli product P,
applied in place through reshaped views, so a gate costs a handful of
vectorized passes over the amplitudes and no matrix products.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np

DENSE_UNITARY_CAP = 12


class ResourceLimitError(RuntimeError):
    """Raised when a dense operation exceeds the configured qubit cap."""


def dense_cap(default: int) -> int:
    env = os.environ.get("MBLVQE_DENSE_CAP")
    return int(env) if env else default


def num_qubits(psi: np.ndarray) -> int:
    n = int(np.log2(psi.shape[0]) + 0.5)
    if 2**n != psi.shape[0]:
        raise ValueError("state length is not a power of two")
    return n


def basis_state(n: int, bits: str) -> np.ndarray:
    """Computational basis state; ``bits[j]`` is the value of qubit j."""
    if len(bits) != n:
        raise ValueError(f"bitstring length {len(bits)} != n={n}")
    idx = 0
    for j, b in enumerate(bits):
        if b not in "01":
            raise ValueError("bitstring must be over {0,1}")
        idx |= int(b) << j
    psi = np.zeros(2**n, dtype=np.complex128)
    psi[idx] = 1.0
    return psi


def neel_state(n: int) -> np.ndarray:
    """Alternating-spin basis state 0101... (qubit j holds j mod 2)."""
    return basis_state(n, "".join(str(j % 2) for j in range(n)))


def index_bits(idx: int, n: int) -> str:
    return "".join(str((idx >> j) & 1) for j in range(n))


# ---------------------------------------------------------------------------
# Gate kernels.  Views: for qubit q the array is reshaped so axis 1 is bit q;
# any trailing batch dimension is folded into the last axis.
# ---------------------------------------------------------------------------

def _batch(psi: np.ndarray) -> int:
    return 1 if psi.ndim == 1 else int(np.prod(psi.shape[1:]))


def _view1(psi: np.ndarray, n: int, q: int) -> np.ndarray:
    m = _batch(psi)
    return psi.reshape(2 ** (n - 1 - q), 2, (2**q) * m)


def _view2(psi: np.ndarray, n: int, qa: int, qb: int) -> np.ndarray:
    # qa < qb required; axis 1 is bit qb, axis 3 is bit qa.
    m = _batch(psi)
    return psi.reshape(
        2 ** (n - 1 - qb), 2, 2 ** (qb - qa - 1), 2, (2**qa) * m
    )


def _check_qubit(n: int, q: int):
    if not 0 <= q < n:
        raise ValueError(f"qubit index {q} out of range for n={n}")


try:  # jitted fast path for 1-D states; numpy views remain the reference
    if os.environ.get("MBLVQE_NO_NUMBA"):
        raise ImportError
    from . import _kernels as _nb
except ImportError:  # pragma: no cover - exercised via MBLVQE_NO_NUMBA
    _nb = None


def _np_rz(psi, n, q, theta):
    v = _view1(psi, n, q)
    half = 0.5 * theta
    p = complex(np.cos(half), -np.sin(half))
    v *= np.array([p, p.conjugate()]).reshape(1, 2, 1)


def _np_rx(psi, n, q, theta):
    v = _view1(psi, n, q)
    c, ks = np.cos(0.5 * theta), -1j * np.sin(0.5 * theta)
    tmp = ks * v[:, ::-1, :]
    v *= c
    v += tmp


def _np_rzz(psi, n, qa, qb, theta):
    v = _view2(psi, n, qa, qb)
    half = 0.5 * theta
    p = complex(np.cos(half), -np.sin(half))
    q_ = p.conjugate()
    v *= np.array([[p, q_], [q_, p]]).reshape(1, 2, 1, 2, 1)


def _np_rxx(psi, n, qa, qb, theta):
    v = _view2(psi, n, qa, qb)
    c, ks = np.cos(0.5 * theta), -1j * np.sin(0.5 * theta)
    tmp = ks * v[:, ::-1, :, ::-1, :]
    v *= c
    v += tmp


def _np_ryy(psi, n, qa, qb, theta):
    v = _view2(psi, n, qa, qb)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    # YY maps |00> -> -|11> and |01> -> +|10>, hence the sign pattern.
    tmp = v[:, ::-1, :, ::-1, :] * np.array(
        [[1j * s, -1j * s], [-1j * s, 1j * s]]
    ).reshape(1, 2, 1, 2, 1)
    v *= c
    v += tmp


def _fast(psi) -> bool:
    return _nb is not None and psi.ndim == 1 and psi.dtype == np.complex128


def apply_rz(psi: np.ndarray, n: int, q: int, theta: float) -> None:
    _check_qubit(n, q)
    if _fast(psi):
        _nb.rz(psi, q, np.cos(0.5 * theta), np.sin(0.5 * theta))
    else:
        _np_rz(psi, n, q, theta)


def apply_rx(psi: np.ndarray, n: int, q: int, theta: float) -> None:
    _check_qubit(n, q)
    if _fast(psi):
        _nb.rx(psi, q, np.cos(0.5 * theta), np.sin(0.5 * theta))
    else:
        _np_rx(psi, n, q, theta)


def _check_pair(n, qa, qb):
    if qa == qb:
        raise ValueError("two-qubit gate needs distinct qubits")
    _check_qubit(n, qa)
    _check_qubit(n, qb)


def apply_rzz(psi: np.ndarray, n: int, qa: int, qb: int, theta: float) -> None:
    qa, qb = min(qa, qb), max(qa, qb)
    _check_pair(n, qa, qb)
    if _fast(psi):
        _nb.rzz(psi, qa, qb, np.cos(0.5 * theta), np.sin(0.5 * theta))
    else:
        _np_rzz(psi, n, qa, qb, theta)


def apply_rxx(psi: np.ndarray, n: int, qa: int, qb: int, theta: float) -> None:
    qa, qb = min(qa, qb), max(qa, qb)
    _check_pair(n, qa, qb)
    if _fast(psi):
        _nb.rxx(psi, qa, qb, np.cos(0.5 * theta), np.sin(0.5 * theta))
    else:
        _np_rxx(psi, n, qa, qb, theta)


def apply_ryy(psi: np.ndarray, n: int, qa: int, qb: int, theta: float) -> None:
    qa, qb = min(qa, qb), max(qa, qb)
    _check_pair(n, qa, qb)
    if _fast(psi):
        _nb.ryy(psi, qa, qb, np.cos(0.5 * theta), np.sin(0.5 * theta))
    else:
        _np_ryy(psi, n, qa, qb, theta)


_ROTATIONS = {"x": apply_rx, "z": apply_rz, "xx": apply_rxx, "yy": apply_ryy, "zz": apply_rzz}


def apply_pauli_rotation(psi, axis: str, qubits, theta: float) -> np.ndarray:
    """exp(-i theta/2 * sigma^a) or exp(-i theta/2 * sigma^a sigma^a), in place.

    ``axis`` in {X, Y, Z}; one qubit index applies the single-qubit rotation,
    two indices the two-qubit one.  Returns psi for chaining.
    """
    if not np.isfinite(theta):
        raise ValueError("non-finite rotation angle")
    n = num_qubits(psi)
    axis = axis.lower()
    qubits = [qubits] if np.isscalar(qubits) else list(qubits)
    if len(qubits) == 1:
        if axis == "y":
            apply_1q_unitary(psi, n, qubits[0], _ry_matrix(theta))
        else:
            _ROTATIONS[axis](psi, n, qubits[0], theta)
    elif len(qubits) == 2:
        _ROTATIONS[axis * 2](psi, n, qubits[0], qubits[1], theta)
    else:
        raise ValueError("rotations act on one or two qubits")
    return psi


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def apply_1q_unitary(psi: np.ndarray, n: int, q: int, u: np.ndarray) -> None:
    _check_qubit(n, q)
    if _fast(psi):
        _nb.u1(psi, q, complex(u[0, 0]), complex(u[0, 1]), complex(u[1, 0]), complex(u[1, 1]))
        return
    v = _view1(psi, n, q)
    v0 = v[:, 0, :].copy()
    v[:, 0, :] *= u[0, 0]
    v[:, 0, :] += u[0, 1] * v[:, 1, :]
    v[:, 1, :] *= u[1, 1]
    v[:, 1, :] += u[1, 0] * v0


def apply_2q_unitary(psi: np.ndarray, n: int, qa: int, qb: int, u: np.ndarray) -> None:
    """General 4x4 unitary on (qa, qb); local index is bit(qa) + 2*bit(qb)."""
    _check_pair(n, qa, qb)
    if _fast(psi):
        _nb.u2(psi, qa, qb, np.ascontiguousarray(u, dtype=np.complex128))
        return
    lo, hi = min(qa, qb), max(qa, qb)
    v = _view2(psi, n, lo, hi)
    # slice m of the local basis: bit qa = m & 1, bit qb = m >> 1
    def sl(m):
        b_lo = m & 1 if qa == lo else (m >> 1) & 1
        b_hi = (m >> 1) & 1 if qb == hi else m & 1
        return v[:, b_hi, :, b_lo, :]

    old = [sl(m).copy() for m in range(4)]
    for i in range(4):
        acc = u[i, 0] * old[0]
        for jdx in range(1, 4):
            acc += u[i, jdx] * old[jdx]
        sl(i)[...] = acc


# ---------------------------------------------------------------------------
# Pauli application and expectations
# ---------------------------------------------------------------------------

def pauli_masks(letters: str) -> tuple[int, int, complex]:
    """Encode a string as (flip mask, Z|Y sign mask, global (-1j)^y factor).

    P|psi>[i] = factor * (-1)^popcount(i & zymask) * psi[i ^ flip].
    """
    flip = zy = ycount = 0
    for q, c in enumerate(letters):
        if c in "XY":
            flip |= 1 << q
        if c in "ZY":
            zy |= 1 << q
        if c == "Y":
            ycount += 1
    return flip, zy, (-1j) ** ycount


def _np_pauli_apply(psi: np.ndarray, n: int, letters: str) -> np.ndarray:
    t = psi.reshape((2,) * n)
    idx = [slice(None)] * n
    for q, c in enumerate(letters):
        if c in "XY":
            idx[n - 1 - q] = slice(None, None, -1)
    out = t[tuple(idx)].copy()
    for q, c in enumerate(letters):
        if c == "I" or c == "X":
            continue
        shape = [1] * n
        shape[n - 1 - q] = 2
        if c == "Z":
            out *= np.array([1.0, -1.0]).reshape(shape)
        else:  # Y: phase depends on the source bit, i.e. the flipped target bit
            out *= np.array([-1j, 1j]).reshape(shape)
    return out.reshape(-1)


def pauli_apply(psi: np.ndarray, letters: str) -> np.ndarray:
    """Return P|psi> for a Pauli string (new array)."""
    n = num_qubits(psi)
    if len(letters) != n:
        raise ValueError("Pauli length mismatch")
    if _fast(psi):
        flip, zy, factor = pauli_masks(letters)
        out = np.zeros_like(psi)
        _nb.pauli_accum(out, psi, flip, zy, factor)
        return out
    return _np_pauli_apply(psi, n, letters)


def pauli_expectation(psi: np.ndarray, letters: str) -> float:
    n = num_qubits(psi)
    if len(letters) != n:
        raise ValueError("Pauli length mismatch")
    if _fast(psi):
        flip, zy, factor = pauli_masks(letters)
        return float((factor * _nb.pauli_bracket(psi, psi, flip, zy)).real)
    return float(np.real(np.vdot(psi, _np_pauli_apply(psi, n, letters))))


def _parity(ints: np.ndarray, mask: int) -> np.ndarray:
    return (np.bitwise_count(ints & mask) & 1).astype(np.int8)


class CompiledObservable:
    """An ObservableSum prepared for fast repeated application to states.

    Diagonal (I/Z-only) terms collapse into a single real diagonal vector;
    each off-diagonal term keeps its flip/phase recipe.
    """

    def __init__(self, obs, n: int | None = None):
        obs = obs.canonicalize()
        self.obs = obs
        self.n = obs.n if n is None else n
        if obs.n != self.n:
            raise ValueError("observable size mismatch")
        dim = 2**self.n
        ints = np.arange(dim, dtype=np.int64)
        diag = np.zeros(dim)
        self.offdiag: list[tuple[float, str]] = []
        self._masks: list[tuple[int, int, complex]] = []
        for c, p in obs.terms:
            if p.is_diagonal():
                mask = sum(1 << q for q in p.support)
                diag += c * (1.0 - 2.0 * _parity(ints, mask))
            else:
                self.offdiag.append((c, p.letters))
                flip, zy, factor = pauli_masks(p.letters)
                self._masks.append((flip, zy, c * factor))
        self.diag = diag
        self.coeff_norm = obs.coeff_norm()

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if _fast(psi):
            out = self.diag * psi
            for flip, zy, coeff in self._masks:
                _nb.pauli_accum(out, psi, flip, zy, coeff)
            return out
        out = self.diag * psi
        for c, letters in self.offdiag:
            out += c * pauli_apply(psi, letters)
        return out

    def expectation(self, psi: np.ndarray) -> float:
        if _fast(psi):
            val = _nb.diag_expectation(psi, self.diag)
            for flip, zy, coeff in self._masks:
                val += (coeff * _nb.pauli_bracket(psi, psi, flip, zy)).real
            return float(val)
        val = float(np.real(np.vdot(psi, self.diag * psi)))
        for c, letters in self.offdiag:
            val += c * float(np.real(np.vdot(psi, pauli_apply(psi, letters))))
        return val


def expectation(psi: np.ndarray, obs) -> float:
    """Exact <psi|O|psi> for an ObservableSum (real by construction)."""
    n = num_qubits(psi)
    if obs.n != n:
        raise ValueError(f"observable acts on {obs.n} qubits, state has {n}")
    val = 0.0
    for c, p in obs.terms:
        val += c * pauli_expectation(psi, p.letters)
    return val


# ---------------------------------------------------------------------------
# Reduced density matrices and entropies (natural log / nats)
# ---------------------------------------------------------------------------

@dataclass
class ReducedDensity:
    """Reduced density matrix on ``region`` (little-endian in listed order)."""

    matrix: np.ndarray
    region: tuple[int, ...]


def _region_matrix(psi: np.ndarray, region) -> np.ndarray:
    """Reshape psi to (2^|L|, 2^|L^c|); row index little-endian over ``region``."""
    n = num_qubits(psi)
    region = tuple(region)
    if not region or len(region) >= n:
        raise ValueError("region must be a nonempty strict subset of qubits")
    if len(set(region)) != len(region) or not all(0 <= q < n for q in region):
        raise ValueError("invalid region")
    t = psi.reshape((2,) * n)
    src = [n - 1 - q for q in reversed(region)]
    t = np.moveaxis(t, src, range(len(region)))
    return np.ascontiguousarray(t).reshape(2 ** len(region), -1)


def reduced_density(psi: np.ndarray, region) -> ReducedDensity:
    m = _region_matrix(psi, region)
    return ReducedDensity(m @ m.conj().T, tuple(region))


def _clean_probs(vals: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if np.any(vals < -tol):
        raise ValueError(f"density matrix has eigenvalue {vals.min():.3e} < -{tol}")
    return np.clip(vals, 0.0, None)


def von_neumann_entropy(rd: ReducedDensity) -> float:
    vals = _clean_probs(np.linalg.eigvalsh(rd.matrix))
    nz = vals[vals > 0]
    return float(-np.sum(nz * np.log(nz)))


def renyi2_entropy(rd: ReducedDensity) -> float:
    purity = float(np.real(np.trace(rd.matrix @ rd.matrix)))
    return float(-np.log(min(max(purity, 1e-300), 1.0)))


def entanglement_entropy(psi: np.ndarray, region) -> float:
    """von Neumann entropy of the region, via singular values (fast path)."""
    s = np.linalg.svd(_region_matrix(psi, region), compute_uv=False)
    p = _clean_probs(s * s)
    nz = p[p > 1e-300]
    return float(-np.sum(nz * np.log(nz)))


def renyi2_of_state(psi: np.ndarray, region) -> float:
    s = np.linalg.svd(_region_matrix(psi, region), compute_uv=False)
    p = s * s
    return float(-np.log(min(float(np.sum(p * p)), 1.0)))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

_BASIS_ROT = {
    "I": None,
    "Z": None,
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0),
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / np.sqrt(2.0),
}


def rotate_to_z_basis(psi: np.ndarray, basis: str) -> np.ndarray:
    """Copy of psi rotated so measuring Z reads out the given per-qubit bases."""
    n = num_qubits(psi)
    out = psi.copy()
    for q, c in enumerate(basis):
        u = _BASIS_ROT[c]
        if u is not None:
            apply_1q_unitary(out, n, q, u)
    return out


def sample_counts(psi: np.ndarray, shots: int, rng, basis: str | None = None) -> dict[str, int]:
    """Sample computational-basis outcomes; returns {bitstring: count}.

    ``basis`` optionally rotates each qubit into the X/Y/Z eigenbasis first.
    Identical rng state gives identical counts.
    """
    if shots < 1:
        raise ValueError("need shots >= 1")
    n = num_qubits(psi)
    work = rotate_to_z_basis(psi, basis) if basis else psi
    probs = np.abs(work) ** 2
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    hits = np.nonzero(counts)[0]
    return {index_bits(int(i), n): int(counts[i]) for i in hits}


# ---------------------------------------------------------------------------
# Haar samplers
# ---------------------------------------------------------------------------

def haar_state(n: int, rng) -> np.ndarray:
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def haar_states(n: int, count: int, rng) -> np.ndarray:
    """(count, 2^n) array of independent Haar-random states."""
    v = rng.standard_normal((count, 2**n)) + 1j * rng.standard_normal((count, 2**n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def haar_1q_unitary(rng) -> np.ndarray:
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def haar_unitary(dim: int, rng) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# Dense unitaries and quasienergies
# ---------------------------------------------------------------------------

def dense_unitary(n: int, apply_fn, cap: int | None = None) -> np.ndarray:
    """Assemble the 2^n x 2^n matrix of a circuit.

    ``apply_fn(mat)`` must apply the circuit in place to a (2^n, m) batch of
    column states.  Guarded by the dense cap (default 12, env MBLVQE_DENSE_CAP).
    """
    limit = dense_cap(DENSE_UNITARY_CAP) if cap is None else cap
    if n > limit:
        raise ResourceLimitError(f"dense unitary needs n <= {limit}, got {n}")
    mat = np.eye(2**n, dtype=np.complex128)
    apply_fn(mat)
    return mat


def quasienergies(u: np.ndarray) -> np.ndarray:
    """Sorted eigenphases of a unitary, in [-pi, pi)."""
    phases = np.angle(np.linalg.eigvals(u))
    phases[phases >= np.pi] -= 2 * np.pi
    return np.sort(phases)


# ---------------------------------------------------------------------------
# Binary state dump (debug interface)
# ---------------------------------------------------------------------------

_MAGIC = b"MBLV"


def save_state(psi: np.ndarray, path) -> None:
    n = num_qubits(psi)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.uint32(n).tobytes())
        pairs = np.empty(2 * psi.size, dtype="<f8")
        pairs[0::2] = psi.real
        pairs[1::2] = psi.imag
        fh.write(pairs.tobytes())


def load_state(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a state dump")
        n = int(np.frombuffer(fh.read(4), dtype=np.uint32)[0])
        pairs = np.frombuffer(fh.read(), dtype="<f8")
    if pairs.size != 2 ** (n + 1):
        raise ValueError("truncated state dump")
    return (pairs[0::2] + 1j * pairs[1::2]).astype(np.complex128)


def check_norm(psi: np.ndarray, tol: float = 1e-8) -> None:
    drift = abs(float(np.vdot(psi, psi).real) - 1.0)
    if drift > tol:
        warnings.warn(f"statevector norm drifted by {drift:.2e}")
