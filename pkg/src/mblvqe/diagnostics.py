"""Localization and thermalization diagnostics with closed-form Haar benchmarks.

Entropies are in nats throughout.  Haar moment formulas are evaluated through
log-gamma ratios so they stay finite up to n ~ 30.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import state as st
from .paulis import enumerate_low_weight, low_weight_cardinality

GAP_RATIO_POISSON = 0.386
GAP_RATIO_COE = 0.536
GAP_RATIO_CUE = 0.603


# ---------------------------------------------------------------------------
# Inverse participation ratio
# ---------------------------------------------------------------------------

def ipr_t(psi: np.ndarray, encoder=None, t: int = 2) -> float:
    """sum_j |<beta_j|psi>|^(2t) with beta_j = U_t^dag |j>, i.e. amplitudes of U_t psi."""
    if t < 1 or int(t) != t:
        raise ValueError("order t must be a positive integer")
    work = psi
    if encoder is not None and not encoder.is_identity:
        work = psi.copy()
        encoder.apply(work)
    probs = np.abs(work) ** 2
    return float(np.sum(probs**t))


def ipr_of_probs(probs: np.ndarray, t: int = 2) -> float:
    return float(np.sum(probs**t))


def _log_binom(a: float, b: float) -> float:
    return gammaln(a + 1.0) - gammaln(b + 1.0) - gammaln(a - b + 1.0)


def haar_ipr(n: int, t: int) -> float:
    """Haar mean of IPR_t: 2^n * t! * (2^n - 1)! / (t + 2^n - 1)!."""
    if t < 1 or n < 1:
        raise ValueError("need t >= 1 and n >= 1")
    if n > 30:
        raise ValueError("haar_ipr capped at n <= 30")
    dim = 2.0**n
    log_val = gammaln(dim + 1.0) + gammaln(t + 1.0) - gammaln(t + dim)
    return float(np.exp(log_val))


# ---------------------------------------------------------------------------
# Page entropy
# ---------------------------------------------------------------------------

def page_entropy(k: int, n: int) -> float:
    """Mean entanglement entropy (nats) of a k-qubit block of a Haar state.

    Exact harmonic-sum form: sum_{j=2^(n-k)+1}^{2^n} 1/j - (2^k - 1)/(2*2^(n-k)).
    Requires k <= n - k.
    """
    if k < 1 or k > n - k:
        raise ValueError("page_entropy needs 1 <= k <= n/2")
    d_small, d_total = 2**k, 2**n
    d_large = d_total // d_small
    js = np.arange(d_large + 1, d_total + 1, dtype=np.float64)
    return float(np.sum(1.0 / js) - (d_small - 1) / (2.0 * d_large))


# ---------------------------------------------------------------------------
# Low-weight stabilizer Renyi entropy and its Haar benchmark
# ---------------------------------------------------------------------------

def low_weight_sre(psi: np.ndarray, t: int = 2, k: int = 2,
                   pauli_set=None) -> float:
    """(1-t)^{-1} log of the mean 2t-th Pauli moment over weight-<=k strings."""
    if t < 2 or int(t) != t:
        raise ValueError("order t must be an integer >= 2")
    n = st.num_qubits(psi)
    strings = pauli_set if pauli_set is not None else enumerate_low_weight(n, k)
    moment = 0.0
    for p in strings:
        moment += st.pauli_expectation(psi, p.letters) ** (2 * t)
    moment /= len(strings)
    return float(np.log(moment) / (1.0 - t))


def pauli_moment(psi: np.ndarray, t: int = 2, k: int = 2, pauli_set=None) -> float:
    """Mean of <P>^(2t) over the weight-<=k set (the quantity inside the SRE log)."""
    n = st.num_qubits(psi)
    strings = pauli_set if pauli_set is not None else enumerate_low_weight(n, k)
    moment = 0.0
    for p in strings:
        moment += st.pauli_expectation(psi, p.letters) ** (2 * t)
    return moment / len(strings)


def sre_haar_moment(n: int, t: int = 2, k: int = 2) -> float:
    """Haar value T_{t,k} of the mean 2t-th low-weight Pauli moment.

    T = (1 - r)/card + r with r = C(2^(n-1)+t-1, t) / C(2^n+2t-1, 2t); the
    identity string contributes the 1/card part.
    """
    card = low_weight_cardinality(n, k)
    dim = 2.0**n
    log_r = _log_binom(dim / 2.0 + t - 1.0, float(t)) - _log_binom(dim + 2.0 * t - 1.0, 2.0 * t)
    r = float(np.exp(log_r))
    return (1.0 - r) / card + r


def sre_haar_lower_bound(n: int, t: int = 2, k: int = 2) -> float:
    """Jensen lower bound log(T_{t,k})/(1-t) on the Haar-mean low-weight SRE."""
    return float(np.log(sre_haar_moment(n, t, k)) / (1.0 - t))


def sre_saturation(n: int, k: int = 2) -> float:
    """log card(P_{n,k}), the thermal-phase plateau of the low-weight SRE."""
    return float(np.log(low_weight_cardinality(n, k)))


# ---------------------------------------------------------------------------
# Frame potential / expressibility
# ---------------------------------------------------------------------------

def welch_bound(n: int, t: int) -> float:
    """Haar frame potential 1 / C(2^n + t - 1, t)."""
    if t < 1:
        raise ValueError("need t >= 1")
    return float(np.exp(-_log_binom(2.0**n + t - 1.0, float(t))))


@dataclass
class FramePotential:
    value: float
    std_error: float
    pairs: int
    t: int


def frame_potential(states: np.ndarray, t: int, pair_cap: int = 1_000_000,
                    rng=None) -> FramePotential:
    """Mean |<psi_i|psi_j>|^(2t) over unordered state pairs.

    ``states`` is (count, 2^n).  Above ``pair_cap`` pairs a random subsample
    is used (pass ``rng`` for reproducibility).  The standard error comes from
    batch means over 20 state batches, leaving the estimator itself untouched.
    """
    states = np.asarray(states)
    count = states.shape[0]
    if count < 2:
        raise ValueError("frame potential needs at least 2 states")
    total_pairs = count * (count - 1) // 2
    if total_pairs > pair_cap:
        rng = rng or np.random.default_rng(0)
        i = rng.integers(0, count, size=pair_cap)
        j = rng.integers(0, count - 1, size=pair_cap)
        j = np.where(j >= i, j + 1, j)
        overlaps = np.abs(np.sum(states[i].conj() * states[j], axis=1)) ** (2 * t)
        return FramePotential(float(overlaps.mean()),
                              float(overlaps.std(ddof=1) / np.sqrt(pair_cap)),
                              pair_cap, t)
    gram = np.abs(states @ states.conj().T) ** (2 * t)
    iu = np.triu_indices(count, k=1)
    vals = gram[iu]
    value = float(vals.mean())
    # batch-means error: split states into B groups, within-group estimates
    b = min(20, count // 10) or 2
    idx = np.array_split(np.arange(count), b)
    batch_vals = []
    for part in idx:
        if len(part) < 2:
            continue
        sub = gram[np.ix_(part, part)]
        batch_vals.append(sub[np.triu_indices(len(part), k=1)].mean())
    se = float(np.std(batch_vals, ddof=1) / np.sqrt(len(batch_vals))) if len(batch_vals) > 1 else 0.0
    return FramePotential(value, se, int(total_pairs), t)


def expressibility_ratio(states: np.ndarray, n: int, t: int, **kw) -> float:
    """Frame potential relative to the Haar (Welch) value; ~1 marks a t-design."""
    return frame_potential(states, t, **kw).value / welch_bound(n, t)


# ---------------------------------------------------------------------------
# Level statistics
# ---------------------------------------------------------------------------

def gap_ratio_stats(phases: np.ndarray, zero_tol: float = 1e-12) -> float:
    """Mean adjacent-gap ratio of sorted eigenphases on the circle.

    Gaps include the wraparound one and ratio pairs are taken cyclically, so
    the statistic is exactly invariant under a global phase rotation.  Gaps
    below ``zero_tol`` are excluded with a warning.
    """
    phases = np.sort(np.asarray(phases, dtype=float))
    if phases.size < 3:
        raise ValueError("need at least 3 eigenphases")
    gaps = np.diff(phases, append=phases[0] + 2.0 * np.pi)
    keep = gaps > zero_tol
    if not np.all(keep):
        warnings.warn(f"excluded {int((~keep).sum())} near-degenerate gaps")
        gaps = gaps[keep]
        if gaps.size < 2:
            raise ValueError("spectrum too degenerate for gap ratios")
    nxt = np.roll(gaps, -1)
    r = np.minimum(gaps, nxt) / np.maximum(gaps, nxt)
    return float(r.mean())


# ---------------------------------------------------------------------------
# Power spectral density of deep-circuit expectation traces
# ---------------------------------------------------------------------------

def psd_analysis(series: np.ndarray, use_fft: bool = False) -> np.ndarray:
    """Normalized power spectrum of a depth trace.

    Pipeline: subtract mean and fitted line, multiply by the Hanning window
    (1 - cos(2 pi D/(N-1)))/2, discrete Fourier transform (exact O(N^2) matrix
    by default, FFT fast path optional), |z_k|^2/N, then normalize to unit sum
    over k = 0..N/2.  A constant series yields an all-zero spectrum and a
    warning.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 16:
        raise ValueError("need at least 16 samples")
    if n > 4096 and not use_fft:
        raise ValueError("direct DFT capped at 4096 samples; pass use_fft=True")
    d = np.arange(n, dtype=float)
    y = y - y.mean()
    slope, intercept = np.polyfit(d, y, 1)
    y = y - (slope * d + intercept)
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * d / (n - 1)))
    y = y * window
    half = n // 2
    if use_fft:
        z = np.fft.fft(y)[: half + 1]
    else:
        k = np.arange(half + 1)
        z = np.exp(-2j * np.pi * np.outer(k, d) / n) @ y
    power = np.abs(z) ** 2 / n
    total = power.sum()
    if total < 1e-300:
        warnings.warn("constant series: power spectrum is identically zero")
        return np.zeros(half + 1)
    return power / total


# ---------------------------------------------------------------------------
# Transition-point estimation
# ---------------------------------------------------------------------------

@dataclass
class TransitionEstimate:
    w_star: float
    curve_w: np.ndarray
    curve_d2: np.ndarray


def estimate_transition(w_grid: np.ndarray, values: np.ndarray,
                        refine: int = 10) -> TransitionEstimate:
    """Kick strength of maximal susceptibility |d^2 X / dW^2|.

    Fits a cubic smoothing spline (GCV-chosen smoothing, fixed-parameter
    fallback) and returns the argmax of the absolute second derivative on a
    ``refine``-times finer grid.  A curvature-free (linear) input is flagged
    as an error.
    """
    w = np.asarray(w_grid, dtype=float)
    x = np.asarray(values, dtype=float)
    if w.size < 7:
        raise ValueError("need at least 7 grid points")
    if np.any(np.diff(w) <= 0):
        raise ValueError("W grid must be strictly increasing")
    if w.shape != x.shape:
        raise ValueError("grid/value shape mismatch")
    try:
        from scipy.interpolate import make_smoothing_spline

        spline = make_smoothing_spline(w, x)
        d2 = spline.derivative(2)
    except Exception:
        from scipy.interpolate import UnivariateSpline

        spline = UnivariateSpline(w, x, k=3)
        d2 = spline.derivative(2)
    fine = np.linspace(w[0], w[-1], refine * w.size)
    curvature = np.abs(d2(fine))
    scale = (np.max(x) - np.min(x)) / (w[-1] - w[0]) ** 2
    if np.max(curvature) <= 1e-8 * max(scale, 1e-12):
        raise ValueError("no interior susceptibility peak (curvature-free input)")
    return TransitionEstimate(float(fine[int(np.argmax(curvature))]), fine, curvature)


def combined_transition(estimates: list[float]) -> tuple[float, float]:
    """Unweighted mean and spread (std) of per-observable/size W* estimates."""
    arr = np.asarray(estimates, dtype=float)
    spread = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), spread


# ---------------------------------------------------------------------------
# Ensemble bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class EnsembleStats:
    """Per-metric sample record with mean and (ddof=1) sample variance."""

    name: str
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size < 1:
            raise ValueError("need at least one sample")

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def variance(self) -> float:
        return float(self.values.var(ddof=1)) if self.values.size > 1 else 0.0

    @property
    def count(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class HaarBenchmarks:
    """Closed-form Haar reference values for system size n (order t, locality k)."""

    n: int
    t: int = 2
    k: int = 2
    poisson_r: float = GAP_RATIO_POISSON
    coe_r: float = GAP_RATIO_COE
    cue_r: float = GAP_RATIO_CUE

    @property
    def ipr_haar(self) -> float:
        return haar_ipr(self.n, self.t)

    @property
    def page_half_chain(self) -> float:
        return page_entropy(self.n // 2, self.n)

    @property
    def sre_lower_bound(self) -> float:
        return sre_haar_lower_bound(self.n, self.t, self.k)

    @property
    def sre_saturation(self) -> float:
        return sre_saturation(self.n, self.k)

    @property
    def welch_bound(self) -> float:
        return welch_bound(self.n, self.t)
