"""Gradients, optimizers, VQE driver, and the trainability instrumentation.

Gradients are exact.  ``gradient_parameter_shift`` evaluates the two-point
rule [E(theta + pi/2 e_j) - E(theta - pi/2 e_j)]/2 literally (every gate is
exp(-i theta/2 P) with P^2 = 1).  ``gradient_adjoint`` computes the identical
values in a single forward/backward sweep and is what the optimizers use; the
two are cross-checked in the test suite.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import state as st
from .circuits import CouplingGraph, ParameterTensor, gate_plan, uniform_kick_scaling
from .diagnostics import low_weight_sre, page_entropy
from .paulis import ObservableSum, enumerate_low_weight, group_basis, group_commuting
from .state import CompiledObservable


class DivergenceError(RuntimeError):
    """Raised when an optimizer's energy runs away from the initial value."""


_GEN_MASKS = {"x": (True, False), "z": (False, True), "xx": (True, False),
              "yy": (True, True), "zz": (False, True)}


def _plan_with_masks(graph: CouplingGraph, depth: int):
    """Gate plan annotated with the generator's (flip, zy, factor) masks."""
    out = []
    for kind, targets, idx in gate_plan(graph, depth):
        flips, zys = _GEN_MASKS[kind]
        flip = sum(1 << q for q in targets) if flips else 0
        zy = sum(1 << q for q in targets) if zys else 0
        factor = -1.0 if kind == "yy" else 1.0  # (-1j)^2 for the YY generator
        out.append((kind, targets, idx, flip, zy, factor))
    return out


def _bracket(lam: np.ndarray, psi: np.ndarray, flip: int, zy: int) -> complex:
    if st._fast(psi):
        return st._nb.pauli_bracket(lam, psi, flip, zy)
    n = st.num_qubits(psi)
    # X = flip only, Z = zy only, Y = both; undo pauli_apply's (-1j)^y factor
    letters = "".join("IXZY"[((flip >> q) & 1) + 2 * ((zy >> q) & 1)] for q in range(n))
    py = letters.count("Y")
    return np.vdot(lam, st.pauli_apply(psi, letters)) * (1j) ** py


@dataclass
class GradientRecord:
    gradient: np.ndarray
    energy: float

    @property
    def linf(self) -> float:
        return float(np.max(np.abs(self.gradient))) if self.gradient.size else 0.0

    @property
    def argmax(self) -> int:
        return int(np.argmax(np.abs(self.gradient))) if self.gradient.size else -1


class VQEProblem:
    """Energy landscape <phi_c| U(theta)^dag O U(theta) |phi_c>.

    ``O`` is the Hamiltonian conjugated by the trial-state encoder when one is
    given (O = U_t H U_t^dag), so theta = 0 reproduces the trial energy.
    """

    def __init__(self, graph: CouplingGraph, depth: int, hamiltonian: ObservableSum,
                 encoder=None, initial_bits: str | None = None):
        self.graph = graph
        self.depth = depth
        self.n = graph.n
        self.hamiltonian = hamiltonian
        self.compiled = CompiledObservable(hamiltonian, self.n)
        self.encoder = encoder if (encoder is not None and not encoder.is_identity) else None
        self.plan = _plan_with_masks(graph, depth)
        if encoder is not None and initial_bits is None:
            initial_bits = encoder.target_bits
        if initial_bits is None:
            initial_bits = "0" * self.n
        self.initial_bits = initial_bits
        self.num_parameters = depth * (graph.m_steady + graph.m_kick)

    def initial_state(self) -> np.ndarray:
        return st.basis_state(self.n, self.initial_bits)

    def observable_apply(self, psi: np.ndarray) -> np.ndarray:
        if self.encoder is None:
            return self.compiled.apply(psi)
        work = psi.copy()
        self.encoder.apply_dagger(work)
        work = self.compiled.apply(work)
        self.encoder.apply(work)
        return work

    def _forward(self, flat: np.ndarray) -> np.ndarray:
        psi = self.initial_state()
        for kind, targets, idx, *_ in self.plan:
            st._ROTATIONS[kind](psi, self.n, *targets, flat[idx])
        return psi

    def energy(self, flat: np.ndarray) -> float:
        psi = self._forward(flat)
        if self.encoder is None:
            return self.compiled.expectation(psi)
        self.encoder.apply_dagger(psi)
        return self.compiled.expectation(psi)

    def output_state(self, flat: np.ndarray, decoded: bool = True) -> np.ndarray:
        psi = self._forward(flat)
        if decoded and self.encoder is not None:
            self.encoder.apply_dagger(psi)
        return psi

    def energy_and_gradient(self, flat: np.ndarray) -> GradientRecord:
        """Exact energy and full gradient by one adjoint (reverse) sweep."""
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.num_parameters,):
            raise ValueError("flat parameter vector has wrong length")
        psi = self._forward(flat)
        lam = self.observable_apply(psi)
        energy = float(np.real(np.vdot(psi, lam)))
        grad = np.zeros(self.num_parameters)
        for kind, targets, idx, flip, zy, factor in reversed(self.plan):
            grad[idx] = (factor * _bracket(lam, psi, flip, zy)).imag
            st._ROTATIONS[kind](psi, self.n, *targets, -flat[idx])
            st._ROTATIONS[kind](lam, self.n, *targets, -flat[idx])
        return GradientRecord(grad, energy)


def gradient_adjoint(problem: VQEProblem, flat: np.ndarray) -> GradientRecord:
    return problem.energy_and_gradient(flat)


def gradient_parameter_shift(problem: VQEProblem, flat: np.ndarray) -> GradientRecord:
    """Two-point rule per component; O(parameters) full circuit evaluations."""
    flat = np.asarray(flat, dtype=float)
    grad = np.zeros_like(flat)
    for j in range(flat.size):
        shifted = flat.copy()
        shifted[j] += 0.5 * np.pi
        e_plus = problem.energy(shifted)
        shifted[j] -= np.pi
        e_minus = problem.energy(shifted)
        grad[j] = 0.5 * (e_plus - e_minus)
    return GradientRecord(grad, problem.energy(flat))


def gradient_finite_difference(problem: VQEProblem, flat: np.ndarray, h: float = 1e-5) -> np.ndarray:
    flat = np.asarray(flat, dtype=float)
    grad = np.zeros_like(flat)
    for j in range(flat.size):
        shifted = flat.copy()
        shifted[j] += h
        e_plus = problem.energy(shifted)
        shifted[j] -= 2 * h
        e_minus = problem.energy(shifted)
        grad[j] = (e_plus - e_minus) / (2 * h)
    return grad


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryPoint:
    iteration: int
    energy: float
    grad_linf: float
    wall_ms: float
    sre22: float | None = None
    shot_mean: float | None = None
    shot_std: float | None = None


@dataclass
class OptimizationResult:
    theta: np.ndarray
    energy: float
    iterations: int
    stop_reason: str
    trajectory: list[TrajectoryPoint] = field(default_factory=list)


class _Recorder:
    def __init__(self, problem, sre_every=0, sre_k=2, shot_estimator=None,
                 shot_repetitions=1, shot_rng=None):
        self.problem = problem
        self.sre_every = sre_every
        self.shot_estimator = shot_estimator
        self.shot_repetitions = shot_repetitions
        self.shot_rng = shot_rng
        self.pauli_set = (
            enumerate_low_weight(problem.n, sre_k) if sre_every else None
        )
        self.start = time.perf_counter()

    def point(self, it, energy, linf, theta) -> TrajectoryPoint:
        sre = shot_mean = shot_std = None
        if self.sre_every and it % self.sre_every == 0:
            psi = self.problem.output_state(theta)
            sre = low_weight_sre(psi, 2, 2, pauli_set=self.pauli_set)
        if self.shot_estimator is not None:
            psi = self.problem.output_state(theta, decoded=False)
            vals = [
                self.shot_estimator.estimate(psi, self.shot_rng)[0]
                for _ in range(self.shot_repetitions)
            ]
            shot_mean = float(np.mean(vals))
            shot_std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        wall = (time.perf_counter() - self.start) * 1e3
        return TrajectoryPoint(it, energy, linf, wall, sre, shot_mean, shot_std)


def gd_minimize(problem: VQEProblem, theta0, eta: float = 0.05, tol: float | None = None,
                max_iter: int = 1000, stall_tol: float | None = 1e-3,
                stall_window: int = 50, sre_every: int = 0,
                shot_estimator=None, shot_repetitions: int = 1,
                shot_rng=None) -> OptimizationResult:
    """Plain gradient descent theta <- theta - eta * grad.

    Convergence within tolerance is judged over a window: the run stops when
    the energy fails to improve by ``stall_tol`` (default 0.001) across
    ``stall_window`` consecutive iterations, when consecutive energies agree
    within ``tol`` (off by default), or at ``max_iter``.  Raises
    DivergenceError if the energy climbs 10 above its start.
    """
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    recorder = _Recorder(problem, sre_every, 2, shot_estimator, shot_repetitions, shot_rng)

    def update(theta, grad, _it):
        return theta - eta * grad

    return _descent_loop(problem, theta0, update, max_iter, tol, stall_tol,
                         stall_window, recorder)


def adam_minimize(problem: VQEProblem, theta0, lr: float = 0.005, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8, max_iter: int = 1000,
                  tol: float | None = None, stall_tol: float | None = 1e-4,
                  stall_window: int = 50, sre_every: int = 0,
                  shot_estimator=None, shot_repetitions: int = 1,
                  shot_rng=None) -> OptimizationResult:
    """Adam with the stall stopping rule (no improvement >= stall_tol for stall_window iters)."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    m = np.zeros(problem.num_parameters)
    v = np.zeros(problem.num_parameters)
    recorder = _Recorder(problem, sre_every, 2, shot_estimator, shot_repetitions, shot_rng)

    def update(theta, grad, it):
        nonlocal m, v
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        mhat = m / (1 - beta1 ** (it + 1))
        vhat = v / (1 - beta2 ** (it + 1))
        return theta - lr * mhat / (np.sqrt(vhat) + eps)

    return _descent_loop(problem, theta0, update, max_iter, tol, stall_tol,
                         stall_window, recorder)


def _descent_loop(problem, theta0, update, max_iter, tol, stall_tol, stall_window,
                  recorder) -> OptimizationResult:
    theta = np.asarray(theta0, dtype=float).copy()
    trajectory: list[TrajectoryPoint] = []
    best = np.inf
    since_best = 0
    prev_energy = None
    e0 = None
    stop = "max_iter"
    it = -1
    for it in range(max_iter):
        rec = problem.energy_and_gradient(theta)
        trajectory.append(recorder.point(it, rec.energy, rec.linf, theta))
        if e0 is None:
            e0 = rec.energy
        if rec.energy > e0 + 10.0:
            raise DivergenceError(
                f"energy {rec.energy:.3f} exceeded initial {e0:.3f} + 10 at iteration {it}"
            )
        if prev_energy is not None and tol is not None and abs(prev_energy - rec.energy) < tol:
            stop = "tol"
            break
        if stall_tol is not None:
            if rec.energy < best - stall_tol:
                best = rec.energy
                since_best = 0
            else:
                since_best += 1
                if since_best >= stall_window:
                    stop = "stall"
                    break
        prev_energy = rec.energy
        theta = update(theta, rec.gradient, it)
    final_energy = trajectory[-1].energy if stop != "max_iter" else problem.energy(theta)
    return OptimizationResult(theta, final_energy, it + 1, stop, trajectory)


# ---------------------------------------------------------------------------
# VQE driver
# ---------------------------------------------------------------------------

INIT_KINDS = ("mbl", "thermal", "random", "cti")


def initial_parameters(graph: CouplingGraph, depth: int, kind: str, rng,
                       w_mbl: float = 0.4, w_thermal: float = 1.4,
                       cti_eps: float = 0.001) -> ParameterTensor:
    from . import circuits as ci

    if kind == "mbl":
        return ci.floquet_init(graph, depth, w_mbl, rng)
    if kind == "thermal":
        return ci.floquet_init(graph, depth, w_thermal, rng)
    if kind == "random":
        return ci.random_init(graph, depth, rng)
    if kind == "cti":
        return ci.cti_init(graph, depth, cti_eps, rng)
    raise ValueError(f"unknown initialization {kind!r}")


@dataclass
class VQESeedRecord:
    seed: int
    init_kind: str
    w: float
    trial_energy: float
    final_energy: float
    exact_energy: float | None
    ratio: float | None
    iterations: int
    stop_reason: str
    trajectory: list[TrajectoryPoint] = field(default_factory=list)


def vqe_run(hamiltonian: ObservableSum, graph: CouplingGraph, depth: int,
            init_kind: str, seeds, master_seed: int = 0,
            optimizer: str = "gd", encoder=None, trial_energy: float | None = None,
            exact_energy: float | None = None, opt_kwargs: dict | None = None,
            w_mbl: float = 0.4, w_thermal: float = 1.4, cti_eps: float = 0.001,
            keep_trajectory: bool = False) -> list[VQESeedRecord]:
    """Optimize from ``seeds`` independent initial-parameter draws.

    The trial state (hence encoder and trial energy) is fixed across seeds;
    only the circuit initialization is resampled.  ``ratio`` is the converged
    energy divided by the exact ground energy when the latter is available.
    """
    opt_kwargs = dict(opt_kwargs or {})
    problem = VQEProblem(graph, depth, hamiltonian, encoder=encoder)
    if trial_energy is None:
        trial_energy = problem.energy(np.zeros(problem.num_parameters))
    w_tag = {"mbl": w_mbl, "thermal": w_thermal}.get(init_kind, 0.0)
    records = []
    for seed in seeds:
        rng = np.random.default_rng(
            np.random.SeedSequence(master_seed, spawn_key=(hash(init_kind) & 0xFFFF, seed))
        )
        theta0 = initial_parameters(
            graph, depth, init_kind, rng, w_mbl=w_mbl, w_thermal=w_thermal, cti_eps=cti_eps
        ).flatten()
        if optimizer == "gd":
            result = gd_minimize(problem, theta0, **opt_kwargs)
        elif optimizer == "adam":
            result = adam_minimize(problem, theta0, **opt_kwargs)
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        ratio = None
        if exact_energy is not None and exact_energy != 0:
            ratio = result.energy / exact_energy
        records.append(
            VQESeedRecord(
                seed, init_kind, w_tag, trial_energy, result.energy, exact_energy,
                ratio, result.iterations, result.stop_reason,
                result.trajectory if keep_trajectory else [],
            )
        )
    return records


# ---------------------------------------------------------------------------
# Weak barren plateau detector
# ---------------------------------------------------------------------------

def connected_regions(graph: CouplingGraph, k_max: int) -> list[tuple[int, ...]]:
    """All connected vertex subsets of size 1..k_max of the coupling graph."""
    adj = graph.neighbors()
    frontier = {frozenset((q,)) for q in range(graph.n)}
    found = set(frontier)
    for _ in range(2, k_max + 1):
        grown = set()
        for region in frontier:
            for q in region:
                for nb in adj[q]:
                    if nb not in region:
                        grown.add(region | {nb})
        frontier = grown
        found |= grown
    return sorted(tuple(sorted(r)) for r in found)


@dataclass
class WbpReport:
    has_wbp: bool
    flagged: list[tuple[int, ...]]
    checked: int
    delta: float


def weak_bp_check(psi: np.ndarray, graph: CouplingGraph, k_max: int,
                  delta: float) -> WbpReport:
    """Flag connected regions whose Renyi-2 entropy reaches (1-delta) of Page.

    Conservative detector: any flagged region counts as a weak-barren-plateau
    signature ("no WBP" only when no region satisfies the inequality).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    n = graph.n
    if k_max >= n / 2:
        raise ValueError("k_max must be below n/2 (Page formula domain)")
    flagged = []
    regions = connected_regions(graph, k_max)
    for region in regions:
        s2 = st.renyi2_of_state(psi, region)
        if s2 >= (1.0 - delta) * page_entropy(len(region), n):
            flagged.append(region)
    return WbpReport(bool(flagged), flagged, len(regions), delta)


# ---------------------------------------------------------------------------
# Gradient lower-bound check along the kick-scaling path
# ---------------------------------------------------------------------------

@dataclass
class KickPathReport:
    lhs: float
    rhs: float
    holds: bool
    margin: float
    mean_grad_linf: float
    delta_l1: float
    delta_l1_bound: float
    s_grid: np.ndarray
    grad_linf: np.ndarray


def theorem3_check(problem: VQEProblem, theta_mbl: ParameterTensor, lam: float,
                   s_points: int = 21, slack: float = 0.05) -> KickPathReport:
    """Check E_s||grad||_inf * ||delta||_1 >= |E(theta_th) - E(theta_mbl)|.

    theta_th scales every kick angle of the Floquet-initialized theta_mbl by
    ``lam``; the path mean uses the trapezoid rule on ``s_points`` >= 11 grid
    points, and the inequality is granted ``slack`` discretization headroom.
    """
    if s_points < 11:
        raise ValueError("need at least 11 grid points")
    theta_th = uniform_kick_scaling(theta_mbl, lam)
    flat_a, flat_b = theta_mbl.flatten(), theta_th.flatten()
    delta = flat_b - flat_a
    delta_l1 = float(np.abs(delta).sum())
    w = float(theta_mbl.ensemble.get("W", np.max(np.abs(theta_mbl.x))))
    bound = theta_mbl.depth * theta_mbl.graph.m_kick * (lam - 1.0) * w
    s_grid = np.linspace(0.0, 1.0, s_points)
    norms = np.empty(s_points)
    for i, s in enumerate(s_grid):
        rec = problem.energy_and_gradient((1.0 - s) * flat_a + s * flat_b)
        norms[i] = rec.linf
    mean_norm = float(np.trapezoid(norms, s_grid))
    lhs = mean_norm * delta_l1
    rhs = abs(problem.energy(flat_b) - problem.energy(flat_a))
    holds = lhs >= rhs * (1.0 - slack)
    margin = lhs - rhs
    return KickPathReport(lhs, rhs, holds, margin, mean_norm, delta_l1, bound,
                          s_grid, norms)


# ---------------------------------------------------------------------------
# l-infinity tail vs component variance (statistical consistency)
# ---------------------------------------------------------------------------

@dataclass
class TailVarianceReport:
    alpha: float
    tail_probability: float
    variance_bound: float
    max_component_variance: float
    holds: bool
    skipped: bool
    reason: str = ""


def prop2_consistency(samples: np.ndarray, alpha: float,
                      p: float | None = None) -> TailVarianceReport:
    """If Pr[||grad||_inf >= alpha] >= p then max_j Var[g_j] >= p alpha^2 / M.

    ``samples`` is (R, M) with R >= 100 gradient draws from one ensemble.
    The zero-mean premise is checked first; a clearly nonzero mean skips the
    check (premise violated).  Variances use the population convention so the
    second-moment identity behind the bound is exact on the sample.
    """
    g = np.asarray(samples, dtype=float)
    if g.ndim != 2 or g.shape[0] < 100:
        raise ValueError("need a (samples >= 100, parameters) gradient matrix")
    r, m = g.shape
    means = g.mean(axis=0)
    stds = g.std(axis=0, ddof=0)
    se = stds / np.sqrt(r)
    nonzero = np.abs(means) > 5.0 * np.maximum(se, 1e-15)
    if np.any(nonzero):
        return TailVarianceReport(alpha, float("nan"), float("nan"), float("nan"),
                                  False, True,
                                  f"{int(nonzero.sum())} components have nonzero mean")
    linf = np.max(np.abs(g), axis=1)
    p_hat = float(np.mean(linf >= alpha)) if p is None else float(p)
    variances = g.var(axis=0, ddof=0)
    bound = p_hat * alpha**2 / m
    max_var = float(variances.max())
    return TailVarianceReport(alpha, p_hat, bound, max_var,
                              max_var >= bound * (1.0 - 1e-9), False)


# ---------------------------------------------------------------------------
# Finite-shot energy estimation with grouping and variance-based allocation
# ---------------------------------------------------------------------------

@dataclass
class ShotPlan:
    groups: list[list[int]]
    shots: np.ndarray
    weights: np.ndarray
    total: int

    def variance_bound(self) -> float:
        val = 0.0
        for w, s in zip(self.weights, self.shots):
            if w > 0:
                val += w * w / max(int(s), 1)
        return val


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation proportional to weights, minimum 1 per positive weight."""
    shots = np.zeros(weights.size, dtype=int)
    active = np.nonzero(weights > 0)[0]
    if active.size == 0:
        if weights.size:
            shots[0] = total
        return shots
    if total < active.size:
        raise ValueError("shot budget below the number of measured groups")
    spare = total - active.size
    raw = spare * weights[active] / weights[active].sum()
    base = np.floor(raw).astype(int)
    leftover = spare - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:leftover]] += 1
    shots[active] = 1 + base
    return shots


def plan_shots(obs: ObservableSum, psi: np.ndarray, total_shots: int,
               groups: list[list[int]] | None = None) -> ShotPlan:
    """Allocate shots across qubit-wise commuting groups.

    Group weight is sum_k |c_k| sqrt(Var <P_k>) with exact variances from the
    simulated state; shots go proportionally to the weights (largest-remainder
    rounding, floor of one shot per group that needs measuring).
    """
    if groups is None:
        groups = group_commuting(obs)
    weights = np.zeros(len(groups))
    for gi, members in enumerate(groups):
        acc = 0.0
        for k in members:
            c, pstr = obs.terms[k]
            if pstr.weight == 0:
                continue
            mean = st.pauli_expectation(psi, pstr.letters)
            acc += abs(c) * np.sqrt(max(0.0, 1.0 - mean * mean))
        weights[gi] = acc
    return ShotPlan(groups, _largest_remainder(weights, total_shots), weights, total_shots)


def _estimate_group(obs: ObservableSum, members, psi: np.ndarray, shots: int, rng) -> float:
    basis = group_basis(obs, members)
    rotated = st.rotate_to_z_basis(psi, basis)
    probs = np.abs(rotated) ** 2
    probs /= probs.sum()
    counts = rng.multinomial(shots, probs)
    ints = np.arange(probs.size, dtype=np.int64)
    total = 0.0
    for k in members:
        c, pstr = obs.terms[k]
        if pstr.weight == 0:
            total += c
            continue
        mask = sum(1 << q for q in pstr.support)
        signs = 1.0 - 2.0 * ((np.bitwise_count(ints & mask) & 1).astype(float))
        total += c * float(np.dot(counts, signs)) / shots
    return total


def shot_energy(psi: np.ndarray, obs: ObservableSum, total_shots: int, rng,
                plan: ShotPlan | None = None) -> tuple[float, float, ShotPlan]:
    """Finite-shot estimate of <psi|H|psi> via grouped measurement.

    Returns (estimate, std bound, plan); the std is the square root of the
    allocation's variance bound sum_g w_g^2 / S_g.  Groups with zero weight
    (deterministic outcomes) contribute their exact expectation.
    """
    if plan is None:
        plan = plan_shots(obs, psi, total_shots)
    estimate = 0.0
    for members, weight, shots in zip(plan.groups, plan.weights, plan.shots):
        if weight <= 0.0 or shots == 0:
            for k in members:
                c, pstr = obs.terms[k]
                estimate += c if pstr.weight == 0 else c * st.pauli_expectation(psi, pstr.letters)
            continue
        estimate += _estimate_group(obs, members, psi, int(shots), rng)
    return estimate, float(np.sqrt(plan.variance_bound())), plan


class ShotEstimator:
    """Reusable estimator that refreshes its allocation every ``replan_every`` calls."""

    def __init__(self, obs: ObservableSum, total_shots: int, replan_every: int = 10):
        self.obs = obs.canonicalize()
        self.total_shots = total_shots
        self.replan_every = max(1, replan_every)
        self.groups = group_commuting(self.obs)
        self.plan: ShotPlan | None = None
        self.calls = 0

    def estimate(self, psi: np.ndarray, rng) -> tuple[float, float]:
        if self.plan is None or self.calls % self.replan_every == 0:
            self.plan = plan_shots(self.obs, psi, self.total_shots, self.groups)
        self.calls += 1
        est, std, _ = shot_energy(psi, self.obs, self.total_shots, rng, plan=self.plan)
        return est, std


# ---------------------------------------------------------------------------
# Representative-gradient protocol (single tracked rotation)
# ---------------------------------------------------------------------------

def center_xx_index(graph: CouplingGraph, depth: int) -> int:
    """Flat index of the layer-1 XX rotation at the chain center.

    The tracked edge is the one whose lower endpoint is floor(n/2); when a
    pendant also hangs off that site the backbone edge (smaller upper
    endpoint) wins.
    """
    target = graph.n // 2
    candidates = [(k, i) for i, (j, k) in enumerate(graph.edges) if j == target]
    if not candidates:
        raise ValueError(f"no edge with lower endpoint {target}")
    _, edge_idx = min(candidates)
    return 2 * graph.n + edge_idx  # layer 0 offset: x(n), z(n), then xx block


def single_parameter_gradient(problem: VQEProblem, flat: np.ndarray, index: int,
                              shots: int | None = None, rng=None) -> float:
    """Exact (or finite-shot) parameter-shift derivative of one component."""
    shifted = flat.copy()
    shifted[index] += 0.5 * np.pi

    def value(vec):
        if shots is None:
            return problem.energy(vec)
        psi = problem.output_state(vec, decoded=False)
        est, _, _ = shot_energy(psi, problem.hamiltonian, shots, rng)
        return est

    e_plus = value(shifted)
    shifted[index] -= np.pi
    e_minus = value(shifted)
    return 0.5 * (e_plus - e_minus)


@dataclass
class GradientScanRow:
    n: int
    w: float
    mean_abs_grad: float
    std: float
    samples: int
    depth: int


def representative_gradient_scan(n_list, w_grid, samples: int, master_seed: int = 0,
                                 graph_kind: str = "intermittent-chain",
                                 init: str = "chebyshev", shots: int | None = None,
                                 depth_rule=None) -> list[GradientScanRow]:
    """Mean |dE/d theta*| of the tracked first-layer XX rotation per (n, W).

    Protocol: ferromagnetic Heisenberg target on the coupling graph, Neel
    input state, depth floor((n-1)/6).  Chebyshev seeding is deterministic,
    so one evaluation per point suffices; Floquet seeding averages ``samples``
    draws.
    """
    from . import circuits as ci
    from .hamiltonians import ferromagnetic_heisenberg

    if depth_rule is None:
        depth_rule = lambda n: max(1, (n - 1) // 6)
    rows = []
    for n in n_list:
        graph = ci.make_graph(graph_kind, n)
        depth = depth_rule(n)
        ham = ferromagnetic_heisenberg(graph)
        bits = "".join(str(j % 2) for j in range(n))
        problem = VQEProblem(graph, depth, ham, initial_bits=bits)
        theta_index = center_xx_index(graph, depth)
        for wi, w in enumerate(w_grid):
            count = 1 if init == "chebyshev" else samples
            vals = np.empty(count)
            for s in range(count):
                rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(n, wi, s)))
                if init == "chebyshev":
                    params = ci.chebyshev_init(graph, depth, w)
                elif init == "floquet":
                    params = ci.floquet_init(graph, depth, w, rng)
                else:
                    raise ValueError(f"unknown init {init!r} for gradient scan")
                vals[s] = abs(single_parameter_gradient(problem, params.flatten(),
                                                        theta_index, shots=shots, rng=rng))
            rows.append(GradientScanRow(n, float(w), float(vals.mean()),
                                        float(vals.std(ddof=1)) if count > 1 else 0.0,
                                        count, depth))
    return rows
