"""Config-driven batch experiments: per-sample pipelines, CSV emission, reports.

Every sample draws its own generator from SeedSequence(master_seed, spawn_key)
with the grid position in the key, so results are byte-identical however the
work is scheduled, and any CSV row can be re-derived in isolation from the
seed column.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import circuits as ci
from . import state as st
from .circuits import apply_circuit, apply_layer, floquet_init, layer_unitary, make_graph
from .config import ExperimentConfig
from .diagnostics import (
    combined_transition,
    estimate_transition,
    frame_potential,
    gap_ratio_stats,
    haar_ipr,
    low_weight_sre,
    page_entropy,
    sre_haar_lower_bound,
    welch_bound,
)
from .hamiltonians import (
    alternating_fields,
    build_model,
    exact_ground,
    long_range_xxz,
    LongRangeParams,
    sample_long_range,
)
from .mps import mps_chi_curve
from .optimize import (
    VQEProblem,
    representative_gradient_scan,
    theorem3_check,
    vqe_run,
)
from .paulis import enumerate_low_weight
from .state import quasienergies
from .trial import build_encoder, haar_pair_trial, optimize_pair_trial, trial_energy


def spawn_rng(master_seed: int, *key: int):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def depth_for(rule, n: int) -> int:
    if rule is None or rule == "n":
        return n
    if rule == "floor((n-1)/6)":
        return max(1, (n - 1) // 6)
    return int(rule)


# ---------------------------------------------------------------------------
# Transition sweep (IPR / entropy / low-weight SRE vs kick strength)
# ---------------------------------------------------------------------------

def sweep_sample(graph, depth: int, w: float, rng, pauli_set) -> dict:
    """One disorder sample of the localization diagnostics.

    A fresh Haar-product trial fixes the encoder frame; the Floquet circuit
    acts on the encoded basis state; IPR is read in the trial-aligned basis
    (the raw output amplitudes) and entropy/SRE on the decoded output state.
    """
    n = graph.n
    trial = haar_pair_trial(n, rng)
    encoder = build_encoder(trial)
    params = floquet_init(graph, depth, w, rng)
    psi = encoder.target_state()
    apply_circuit(psi, graph, params)
    probs = np.abs(psi) ** 2
    ipr2 = float(np.sum(probs * probs))
    encoder.apply_dagger(psi)
    entropy = st.entanglement_entropy(psi, range(n // 2))
    sre22 = low_weight_sre(psi, 2, 2, pauli_set=pauli_set)
    return {"ipr2": ipr2, "entropy_half": entropy, "sre22": sre22}


def run_transition_sweep(cfg: ExperimentConfig, workers: int = 1,
                         progress=None, existing=None,
                         on_row=None) -> tuple[list[dict], dict]:
    graph_kind = cfg.graph
    w_grid = [float(w) for w in cfg.w_grid]
    samples = cfg.samples
    rows: list[dict] = []
    for n in cfg.n_list:
        graph = make_graph(graph_kind, n)
        depth = depth_for(cfg.get("depth_rule"), n)
        pauli_set = enumerate_low_weight(n, 2)
        ipr_h = haar_ipr(n, 2)
        page = page_entropy(n // 2, n)
        sre_lb = sre_haar_lower_bound(n, 2, 2)
        tasks = [
            (n, wi, si)
            for wi in range(len(w_grid))
            for si in range(samples)
            if existing is None or (n, w_grid[wi], si) not in existing
        ]

        def one(task):
            _, wi, si = task
            rng = spawn_rng(cfg.master_seed, 1, n, wi, si)
            metrics = sweep_sample(graph, depth, w_grid[wi], rng, pauli_set)
            return {
                "n": n, "D": depth, "W": w_grid[wi], "graph": graph_kind, "seed": si,
                "ipr2": metrics["ipr2"], "ipr2_haar": ipr_h,
                "entropy_half": metrics["entropy_half"], "entropy_page": page,
                "entropy_var": "", "sre22": metrics["sre22"], "sre22_haar_lb": sre_lb,
            }

        rows.extend(_map_tasks(one, tasks, workers, progress, on_result=on_row))
    summary = summarize_sweep(rows)
    return rows, summary


def summarize_sweep(rows: list[dict]) -> dict:
    """Group means/variances per (n, W) plus the susceptibility-peak estimate."""
    groups: dict[tuple[int, float], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["n"], r["W"]), []).append(r)
    per_point = []
    for (n, w), bunch in sorted(groups.items()):
        ipr = np.array([b["ipr2"] for b in bunch])
        ent = np.array([b["entropy_half"] for b in bunch])
        sre = np.array([b["sre22"] for b in bunch])
        per_point.append({
            "n": n, "W": w, "count": len(bunch),
            "ipr2_mean": float(ipr.mean()),
            "entropy_mean": float(ent.mean()),
            "entropy_var": float(ent.var(ddof=1)) if len(bunch) > 1 else 0.0,
            "sre22_mean": float(sre.mean()),
            "ipr2_haar": bunch[0]["ipr2_haar"],
            "entropy_page": bunch[0]["entropy_page"],
            "sre22_haar_lb": bunch[0]["sre22_haar_lb"],
        })
    estimates = []
    by_n: dict[int, list[dict]] = {}
    for p in per_point:
        by_n.setdefault(p["n"], []).append(p)
    w_star_detail = {}
    for n, pts in by_n.items():
        pts = sorted(pts, key=lambda p: p["W"])
        w = np.array([p["W"] for p in pts])
        if w.size < 7:
            continue
        for key, transform in (
            ("ipr2_mean", lambda v: np.log10(v)),
            ("entropy_mean", lambda v: v),
            ("sre22_mean", lambda v: v),
        ):
            vals = transform(np.array([p[key] for p in pts]))
            try:
                est = estimate_transition(w, vals)
            except ValueError:
                continue
            estimates.append(est.w_star)
            w_star_detail[f"n={n}:{key}"] = est.w_star
    summary = {"per_point": per_point, "w_star_detail": w_star_detail}
    if estimates:
        w_star, spread = combined_transition(estimates)
        summary["w_star"] = w_star
        summary["w_star_spread"] = spread
    return summary


# ---------------------------------------------------------------------------
# Frame-potential / design probe
# ---------------------------------------------------------------------------

def design_probe_states(graph, depth: int, w: float, count: int, master_seed: int,
                        w_index: int, input_mode: str = "fixed",
                        input_bits: str | None = None) -> np.ndarray:
    """Ensemble of circuit output states for frame-potential estimation.

    ``fixed`` feeds every circuit the same basis state (bits given, or one
    index drawn from the master seed); ``random-basis`` draws an independent
    computational basis input per sample.
    """
    n = graph.n
    states = np.empty((count, 2**n), dtype=np.complex128)
    if input_mode == "fixed":
        if input_bits is None:
            idx = int(spawn_rng(master_seed, 2, n, 0, 0).integers(0, 2**n))
            input_bits = st.index_bits(idx, n)
        if len(input_bits) != n:
            raise ValueError("input_bits length must equal n")
    for si in range(count):
        rng = spawn_rng(master_seed, 2, n, w_index, si)
        if input_mode == "random-basis":
            psi = np.zeros(2**n, dtype=np.complex128)
            psi[int(rng.integers(0, 2**n))] = 1.0
        else:
            psi = st.basis_state(n, input_bits)
        params = floquet_init(graph, depth, w, rng)
        apply_circuit(psi, graph, params)
        states[si] = psi
    return states


def run_design_probe(cfg: ExperimentConfig, workers: int = 1, progress=None,
                     existing=None) -> tuple[list[dict], dict]:
    t_orders = [int(t) for t in cfg.get("t_orders", [2])]
    mode = cfg.get("input_mode", "fixed")
    rows = []
    for n in cfg.n_list:
        graph = make_graph(cfg.graph, n)
        depth = depth_for(cfg.get("depth_rule"), n)
        for w in cfg.w_values:
            states = design_probe_states(
                graph, depth, float(w), cfg.samples, cfg.master_seed,
                _windex(cfg.w_values, w), mode, cfg.get("input_bits"),
            )
            for t in t_orders:
                fp = frame_potential(states, t)
                wb = welch_bound(n, t)
                rows.append({
                    "n": n, "D": depth, "W": float(w), "graph": cfg.graph, "t": t,
                    "states": cfg.samples, "frame_potential": fp.value,
                    "frame_se": fp.std_error, "welch_bound": wb,
                    "ratio": fp.value / wb, "input_mode": mode,
                })
            if progress:
                progress(len(rows))
    return rows, {}


def _windex(grid, w) -> int:
    return [float(x) for x in grid].index(float(w))


# ---------------------------------------------------------------------------
# Level statistics
# ---------------------------------------------------------------------------

def run_level_stats(cfg: ExperimentConfig, workers: int = 1, progress=None,
                    existing=None, on_row=None) -> tuple[list[dict], dict]:
    rows = []
    w_grid = [float(w) for w in cfg.w_grid]
    for n in cfg.n_list:
        graph = make_graph(cfg.graph, n)
        tasks = [
            (n, wi, si)
            for wi in range(len(w_grid))
            for si in range(cfg.samples)
            if existing is None or (n, w_grid[wi], si) not in existing
        ]

        def one(task):
            _, wi, si = task
            rng = spawn_rng(cfg.master_seed, 3, n, wi, si)
            params = floquet_init(graph, 1, w_grid[wi], rng)
            u = layer_unitary(graph, params)
            r_mean = gap_ratio_stats(quasienergies(u))
            return {"n": n, "D": 1, "W": w_grid[wi], "graph": cfg.graph,
                    "seed": si, "r_mean": r_mean}

        rows.extend(_map_tasks(one, tasks, workers, progress, on_result=on_row))
    by_point: dict[tuple[int, float], list[float]] = {}
    for r in rows:
        by_point.setdefault((r["n"], r["W"]), []).append(r["r_mean"])
    summary = {
        "r_mean": {
            f"n={n},W={w}": float(np.mean(v)) for (n, w), v in sorted(by_point.items())
        }
    }
    return rows, summary


# ---------------------------------------------------------------------------
# Deep-circuit dynamics
# ---------------------------------------------------------------------------

def deep_dynamics_trace(graph, ensemble_kind: str, w: float, depth_max: int,
                        rng, initial_bits: str | None = None) -> np.ndarray:
    """<Z_1> of the evolving state after each of depth_max layers.

    ``floquet`` repeats one sampled layer (stroboscopic drive); ``narrow``
    resamples every layer independently from [-w, w].
    """
    n = graph.n
    psi = st.basis_state(n, initial_bits or "0" * n)
    z1 = "Z" + "I" * (n - 1)
    out = np.empty(depth_max)
    if ensemble_kind == "floquet":
        params = floquet_init(graph, 1, w, rng)
        for d in range(depth_max):
            apply_layer(psi, graph, params)
            out[d] = st.pauli_expectation(psi, z1)
    elif ensemble_kind == "narrow":
        for d in range(depth_max):
            params = ci.narrow_init(graph, 1, w, rng)
            apply_layer(psi, graph, params)
            out[d] = st.pauli_expectation(psi, z1)
    else:
        raise ValueError(f"unknown ensemble {ensemble_kind!r}")
    return out


def run_deep_dynamics(cfg: ExperimentConfig, workers: int = 1, progress=None,
                      existing=None, on_row=None) -> tuple[list[dict], dict]:
    rows = []
    stride = cfg.get("depth_stride", 1)

    def emit_chunk(chunk):
        if on_row:
            for row in chunk:
                on_row(row)

    for n in cfg.n_list:
        graph = make_graph(cfg.graph, n)
        for ei, ens in enumerate(cfg.ensembles):
            tasks = [(n, ei, si) for si in range(cfg.samples)]

            def one(task):
                _, ei_, si = task
                ens_ = cfg.ensembles[ei_]
                rng = spawn_rng(cfg.master_seed, 4, n, ei_, si)
                trace = deep_dynamics_trace(graph, ens_["kind"], float(ens_["w"]),
                                            cfg.depth_max, rng)
                return [
                    {"n": n, "kind": ens_["kind"], "W": float(ens_["w"]), "seed": si,
                     "depth": d + 1, "z1": float(trace[d])}
                    for d in range(0, cfg.depth_max, stride)
                ]

            for chunk in _map_tasks(one, tasks, workers, progress,
                                    on_result=emit_chunk):
                rows.extend(chunk)
    return rows, {}


# ---------------------------------------------------------------------------
# Representative gradient scan
# ---------------------------------------------------------------------------

def run_gradient_scan(cfg: ExperimentConfig, workers: int = 1, progress=None,
                      existing=None) -> tuple[list[dict], dict]:
    shots = cfg.get("shots", {}).get("total") if cfg.get("shots") else None
    scan = representative_gradient_scan(
        cfg.n_list, [float(w) for w in cfg.w_grid], cfg.samples,
        master_seed=cfg.master_seed,
        graph_kind=cfg.get("graph", "intermittent-chain"),
        init=cfg.get("init", "chebyshev"), shots=shots,
        depth_rule=(lambda n: depth_for(cfg.get("depth_rule", "floor((n-1)/6)"), n)),
    )
    rows = [
        {"n": r.n, "D": r.depth, "W": r.w, "mean_abs_grad": r.mean_abs_grad,
         "std": r.std, "samples": r.samples}
        for r in scan
    ]
    return rows, {}


# ---------------------------------------------------------------------------
# VQE batch
# ---------------------------------------------------------------------------

def _optimizer_call(opt_cfg: dict):
    opt_cfg = dict(opt_cfg or {})
    name = opt_cfg.pop("name", "gd")
    return name, opt_cfg


def run_vqe(cfg: ExperimentConfig, workers: int = 1, progress=None,
            existing=None) -> tuple[list[dict], dict]:
    opt_name, opt_kwargs = _optimizer_call(cfg.get("optimizer"))
    rows = []
    for n in cfg.n_list:
        graph = make_graph(cfg.get("graph", "ring"), n)
        depth = depth_for(cfg.get("depth_rule"), n)
        ham = build_model(cfg.model, n)
        exact, _ = exact_ground(ham, n)
        trial_rng = spawn_rng(cfg.master_seed, 5, n, 0, 0)
        trial = optimize_pair_trial(ham, n, trial_rng)
        encoder = build_encoder(trial)
        t_energy = trial_energy(ham, trial)
        for init_kind in cfg.init_kinds:
            records = vqe_run(
                ham, graph, depth, init_kind, seeds=range(cfg.seeds),
                master_seed=cfg.master_seed, optimizer=opt_name,
                encoder=encoder, trial_energy=t_energy, exact_energy=exact,
                opt_kwargs=opt_kwargs,
                w_mbl=cfg.get("w_mbl", 0.4), w_thermal=cfg.get("w_thermal", 1.4),
                cti_eps=cfg.get("cti_eps", 0.001),
            )
            for rec in records:
                rows.append({
                    "n": n, "D": depth, "seed": rec.seed, "init_kind": rec.init_kind,
                    "W": rec.w, "trial_E": rec.trial_energy, "final_E": rec.final_energy,
                    "exact_E": rec.exact_energy, "ratio": rec.ratio,
                    "iters": rec.iterations, "stop_reason": rec.stop_reason,
                })
                if progress:
                    progress(len(rows))
    summary: dict = {}
    for n in cfg.n_list:
        for kind in cfg.init_kinds:
            ratios = [r["ratio"] for r in rows if r["n"] == n and r["init_kind"] == kind]
            if ratios:
                summary[f"mean_ratio[n={n},{kind}]"] = float(np.mean(ratios))
    return rows, summary


# ---------------------------------------------------------------------------
# Gradient-bound checks along the kick-scaling path
# ---------------------------------------------------------------------------

def run_theorem_checks(cfg: ExperimentConfig, workers: int = 1, progress=None,
                       existing=None) -> tuple[list[dict], dict]:
    rows = []
    w = cfg.get("w_mbl", 0.3)
    s_points = cfg.get("s_points", 21)
    for n in cfg.n_list:
        graph = make_graph(cfg.get("graph", "ring"), n)
        depth = depth_for(cfg.get("depth_rule"), n)
        model = cfg.get("model", {"model": "aubry_andre", "phase": "critical"})
        ham = build_model(model, n)
        for inst in range(cfg.instances):
            rng = spawn_rng(cfg.master_seed, 6, n, inst, 0)
            trial = haar_pair_trial(n, rng) if n % 2 == 0 else None
            encoder = build_encoder(trial) if trial is not None else None
            problem = VQEProblem(graph, depth, ham, encoder=encoder)
            theta = floquet_init(graph, depth, w, rng)
            for lam in cfg.lambdas:
                report = theorem3_check(problem, theta, float(lam), s_points=s_points)
                rows.append({
                    "n": n, "D": depth, "W": w, "instance": inst, "lambda": float(lam),
                    "lhs": report.lhs, "rhs": report.rhs, "margin": report.margin,
                    "holds": report.holds, "delta_l1": report.delta_l1,
                    "delta_l1_bound": report.delta_l1_bound,
                })
                if progress:
                    progress(len(rows))
    summary = {"all_hold": all(r["holds"] for r in rows)}
    return rows, summary


# ---------------------------------------------------------------------------
# Long-range benchmark: MPS chi curves and escape-from-trial comparison
# ---------------------------------------------------------------------------

def run_longrange_bench(cfg: ExperimentConfig, workers: int = 1, progress=None,
                        existing=None) -> tuple[list[dict], dict]:
    rows = []
    chi_values = [int(c) for c in cfg.chi_values]
    for n in cfg.n_list:
        ham = long_range_xxz(n, LongRangeParams(
            J=1.0, gamma=0.75, Delta=2.0, alpha_decay=cfg.get("model", {}).get("alpha_decay", 1.1),
            fields=alternating_fields(n)))
        exact, _ = exact_ground(ham, n)
        chis = [c for c in chi_values if c <= 2 ** (n // 2)]
        curve = mps_chi_curve(ham, n, chis, exact, rng=spawn_rng(cfg.master_seed, 7, n, 0, 0))
        for chi, err in curve:
            rows.append({"section": "mps", "n": n, "instance": -1, "chi": chi,
                         "abs_error": err, "init_kind": "", "trial_E": "",
                         "final_E": "", "exact_E": exact, "gap_closed": ""})
            if progress:
                progress(len(rows))
    n_vqe = cfg.get("vqe_n", max(cfg.n_list))
    if cfg.instances > 0:
        graph = make_graph(cfg.get("graph", "ring"), n_vqe)
        depth = depth_for(cfg.get("depth_rule"), n_vqe)
        opt_name, opt_kwargs = _optimizer_call(cfg.get("optimizer", {
            "name": "gd", "eta": 0.005, "tol": None, "stall_tol": 1e-4,
            "stall_window": 50, "max_iter": 1000,
        }))
        for inst in range(cfg.instances):
            rng = spawn_rng(cfg.master_seed, 7, n_vqe, 1, inst)
            params = sample_long_range(n_vqe, rng)
            ham = long_range_xxz(n_vqe, params)
            exact, _ = exact_ground(ham, n_vqe)
            trial = optimize_pair_trial(ham, n_vqe, rng)
            encoder = build_encoder(trial)
            t_energy = trial_energy(ham, trial)
            gap = t_energy - exact
            for init_kind in ("cti", "mbl"):
                recs = vqe_run(
                    ham, graph, depth, init_kind, seeds=[inst],
                    master_seed=cfg.master_seed, optimizer=opt_name,
                    encoder=encoder, trial_energy=t_energy, exact_energy=exact,
                    opt_kwargs=opt_kwargs, w_mbl=cfg.get("w_mbl", 0.2),
                    cti_eps=cfg.get("cti_eps", 0.001),
                )
                rec = recs[0]
                closed = (t_energy - rec.final_energy) / gap if gap > 1e-12 else 1.0
                rows.append({
                    "section": "vqe", "n": n_vqe, "instance": inst, "chi": "",
                    "abs_error": abs(rec.final_energy - exact), "init_kind": init_kind,
                    "trial_E": t_energy, "final_E": rec.final_energy,
                    "exact_E": exact, "gap_closed": float(closed),
                })
                if progress:
                    progress(len(rows))
    return rows, {}


# ---------------------------------------------------------------------------
# Shared runner machinery
# ---------------------------------------------------------------------------

_PIPELINES = {
    "transition-sweep": run_transition_sweep,
    "design-probe": run_design_probe,
    "level-stats": run_level_stats,
    "deep-dynamics": run_deep_dynamics,
    "gradient-scan": run_gradient_scan,
    "vqe": run_vqe,
    "theorem-checks": run_theorem_checks,
    "longrange-bench": run_longrange_bench,
}

_GLOBAL_TASK_FN = None


def _pool_call(task):
    return _GLOBAL_TASK_FN(task)


def _map_tasks(fn, tasks, workers: int, progress=None, on_result=None) -> list:
    """Apply fn over tasks, serially or in a process pool, preserving order."""
    out = []
    if workers <= 1:
        for i, task in enumerate(tasks):
            result = fn(task)
            out.append(result)
            if on_result:
                on_result(result)
            if progress:
                progress(i + 1)
        return out
    global _GLOBAL_TASK_FN
    _GLOBAL_TASK_FN = fn
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, result in enumerate(pool.map(_pool_call, tasks, chunksize=8)):
                out.append(result)
                if on_result:
                    on_result(result)
                if progress:
                    progress(i + 1)
    finally:
        _GLOBAL_TASK_FN = None
    return out


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    return str(value)


class RowSink:
    """Streaming CSV writer: fixed column order, repr floats, flush every 10 rows.

    Interrupted runs leave a clean prefix (plus at most one torn line, which
    the resume path drops), so long sweeps are resumable.
    """

    def __init__(self, path: Path, flush_every: int = 10):
        self.path = Path(path)
        self.flush_every = flush_every
        self._fh = None
        self._writer = None
        self.fields: list[str] | None = None
        self.count = 0

    def _open(self, fields: list[str], mode: str):
        self._fh = open(self.path, mode, newline="")
        self._writer = csv.writer(self._fh)
        self.fields = fields
        if mode == "w":
            self._writer.writerow(fields)

    def seed_existing(self, rows: list[dict]):
        """Rewrite previously completed rows (resume), then append new ones."""
        if not rows:
            return
        self._open(list(rows[0].keys()), "w")
        for row in rows:
            self._writer.writerow([_format_cell(row[f]) for f in self.fields])
            self.count += 1
        self._fh.flush()

    def write(self, row: dict):
        if self._writer is None:
            self._open(list(row.keys()), "w")
        self._writer.writerow([_format_cell(row[f]) for f in self.fields])
        self.count += 1
        if self.count % self.flush_every == 0:
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def write_csv(rows: list[dict], path: Path, flush_every: int = 10) -> None:
    """Deterministic CSV written in one pass (streaming runs use RowSink)."""
    if not rows:
        raise ValueError("no rows to write")
    sink = RowSink(path, flush_every)
    for row in rows:
        sink.write(row)
    sink.close()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_clean_rows(path: Path) -> list[dict]:
    """Typed rows from a possibly interrupted CSV; torn trailing lines dropped."""
    with open(path, newline="") as fh:
        raw = list(csv.reader(fh))
    if not raw:
        return []
    header = raw[0]
    rows = []
    for cells in raw[1:]:
        if len(cells) != len(header):
            continue
        row = {}
        for key, cell in zip(header, cells):
            try:
                row[key] = int(cell)
            except ValueError:
                try:
                    row[key] = float(cell)
                except ValueError:
                    row[key] = cell
        rows.append(row)
    return rows


def write_trajectory_csv(trajectory, path: Path) -> None:
    """Optimizer trajectory: iter, energy, grad_linf, sre22 (optional), wall_ms."""
    rows = [
        {"iter": p.iteration, "energy": p.energy, "grad_linf": p.grad_linf,
         "sre22": p.sre22, "wall_ms": p.wall_ms}
        for p in trajectory
    ]
    write_csv(rows, Path(path))


def existing_keys(path: Path) -> set | None:
    """(n, W, seed) triples already present in a partial CSV (for --resume)."""
    if not path.exists():
        return None
    keys = set()
    for row in read_csv(path):
        try:
            keys.add((int(row["n"]), float(row["W"]), int(row["seed"])))
        except (KeyError, ValueError):
            return None
    return keys


@dataclass
class RunReport:
    config: dict
    config_hash: str
    version: str
    rows_written: int
    wall_seconds: float
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=str)


# pipelines with unique (n, W, seed) row keys support --resume
_RESUMABLE = {"transition-sweep", "level-stats"}
# pipelines that stream rows to disk as they are computed
_STREAMING = _RESUMABLE | {"deep-dynamics"}


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int = 1,
                   resume: bool = False, progress=None) -> RunReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.kind}.csv"
    start = time.perf_counter()
    streaming = cfg.kind in _STREAMING
    old_rows: list[dict] = []
    existing = None
    if resume and cfg.kind in _RESUMABLE and csv_path.exists():
        old_rows = read_clean_rows(csv_path)
        existing = {(r["n"], float(r["W"]), r["seed"]) for r in old_rows} or None
    pipeline = _PIPELINES[cfg.kind]
    if streaming:
        sink = RowSink(csv_path)
        try:
            if old_rows:
                sink.seed_existing(old_rows)
            new_rows, summary = pipeline(cfg, workers=workers, progress=progress,
                                         existing=existing, on_row=sink.write)
        finally:
            sink.close()
        rows = old_rows + new_rows
        if old_rows:
            if cfg.kind == "transition-sweep":
                summary = summarize_sweep(rows)
            elif cfg.kind == "level-stats":
                by_point: dict[tuple[int, float], list[float]] = {}
                for r in rows:
                    by_point.setdefault((r["n"], r["W"]), []).append(float(r["r_mean"]))
                summary = {"r_mean": {
                    f"n={n},W={w}": float(np.mean(v))
                    for (n, w), v in sorted(by_point.items())
                }}
    else:
        rows, summary = pipeline(cfg, workers=workers, progress=progress,
                                 existing=existing)
        write_csv(rows, csv_path)
    wall = time.perf_counter() - start
    report = RunReport(cfg.raw, cfg.config_hash(), __version__, len(rows), wall, summary)
    (out_dir / f"{cfg.kind}.report.json").write_text(report.to_json())
    return report
