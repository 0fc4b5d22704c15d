"""Implementations of the ``simulate``, ``sweep``, ``verify-lemmas`` and ``fit-rates`` commands.

Each command takes a validated :class:`~tcpks.lab.config.RunConfig` and an
output directory, writes its artifacts there and returns a process exit code.
"""

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from ..diagnostics import fit_decay_rate, scaling_exponents
from ..discretization import build_grid
from ..dynamics import Simulation, initial_gaussian, initial_vorticity, measure_decay_rate, random_modes
from ..elliptic import LEMMA_SLACK, LemmaReport, verify_lemma_c0, verify_lemma_ck, verify_lemma_phi0, verify_lemma_phik
from ..errors import InsufficientData, NonPositiveValues
from . import checkpoint

log = logging.getLogger(__name__)

EXIT_BOUNDED = 0
EXIT_BLOWN_UP = 2
EXIT_UNDECIDED = 3
EXIT_CODES = {"bounded": EXIT_BOUNDED, "blown-up": EXIT_BLOWN_UP, "undecided": EXIT_UNDECIDED}
CHECKPOINT_NAME = "checkpoint.apks"


def _ensure_dir(out):
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")


def initial_fields(cfg, params):
    """Density and vorticity coefficients described by the config."""
    grid = build_grid(params.N_r, params.R)
    K = params.K_max
    if cfg.ic_type == "gaussian":
        M = cfg.M if cfg.M is not None else 2.0 * np.pi
        n0 = initial_gaussian(M, cfg.center_radius, cfg.theta0, cfg.sigma, grid, K)
    elif cfg.ic_type == "random":
        n0 = random_modes(np.random.default_rng(params.seed), grid, K)
    else:
        n0 = np.zeros((K + 1, grid.N_r), dtype=complex)
    w0 = initial_vorticity(cfg.w_amp, cfg.w_mode, grid, K)
    return n0, w0


# -- simulate ----------------------------------------------------------------

class SeriesWriter:
    """Appends DiagRecord rows to series.csv, flushing after every row."""

    def __init__(self, path, keep_through_step=None):
        self.path = path
        kept = []
        if keep_through_step is not None and os.path.exists(path):
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            kept = [rows[0]] + [row for row in rows[1:] if int(row[0]) <= keep_through_step] if rows else []
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.wrote_header = bool(kept)
        self.writer.writerows(kept)

    def __call__(self, record):
        if not self.wrote_header:
            self.writer.writerow(record.header())
            self.wrote_header = True
        self.writer.writerow(record.row())
        self.fh.flush()

    def close(self):
        self.fh.close()


def read_series(path):
    """series.csv as a dict of float columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InsufficientData(f"{path} has no data rows")
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, j] for j, name in enumerate(header)}


def fit_series(columns, window=0.6):
    """Decay rate of every n_k / w_k column; nan where no fit is possible."""
    rates = {}
    t = columns["t"]
    for name, values in columns.items():
        if not (name.startswith("n_k") or name.startswith("w_k")):
            continue
        try:
            rates[name] = fit_decay_rate(t, values, window)
        except (InsufficientData, NonPositiveValues):
            rates[name] = float("nan")
    return rates


def _write_summary(path, res, params, rates):
    ratio = res.sup_max_n / res.initial_max_n if res.initial_max_n > 0 else float("nan")
    lines = [
        f"classification: {res.classification}",
        f"reason: {res.reason}",
        f"run_mode: {params.run_mode}",
        f"A: {params.A!r}",
        f"steps: {res.steps}",
        f"t_final: {res.final_state.t!r}",
        f"initial_max_n: {res.initial_max_n!r}",
        f"sup_max_n: {res.sup_max_n!r}",
        f"sup_max_n_over_initial: {ratio!r}",
        f"sup_n0_norm: {res.sup_n0_norm!r}",
        f"sup_w0_norm: {res.sup_w0_norm!r}",
        f"E_final: {res.E_final!r}",
        f"worst_flat_mass_increase: {res.mass_increase!r}",
        f"worst_min_over_max_n: {res.worst_negativity!r}",
    ]
    lines += [f"rate_{name}: {value!r}" for name, value in rates.items()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_simulate(cfg, out, resume=None):
    """Integrate one run; exit 0 bounded, 2 blown-up, 3 undecided."""
    _ensure_dir(out)
    series_path = os.path.join(out, "series.csv")
    ckpt_path = os.path.join(out, CHECKPOINT_NAME)
    if resume:
        sim = checkpoint.load(resume, diag_interval=cfg.diag_interval)
        params = sim.params
        writer = SeriesWriter(series_path, keep_through_step=sim.step_index)
        sim.on_record = writer
    else:
        params = cfg.sim_params()
        n0, w0 = initial_fields(cfg, params)
        sim = Simulation(params, diag_interval=cfg.diag_interval)
        writer = SeriesWriter(series_path)
        sim.on_record = writer
        sim.start(n0, w0)
    try:
        sim.advance(on_checkpoint=lambda s: checkpoint.save(s, ckpt_path),
                    checkpoint_interval=cfg.checkpoint_interval)
    finally:
        writer.close()
    if cfg.checkpoint_interval:
        checkpoint.save(sim, ckpt_path)
    res = sim.result()
    rates = fit_series(read_series(series_path), cfg.fit_window)
    _write_summary(os.path.join(out, "summary.txt"), res, params, rates)
    log.info("%s: %s", res.classification, res.reason)
    return EXIT_CODES[res.classification]


# -- sweep -------------------------------------------------------------------

def _unique(values, label):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    if len(seen) < len(values):
        log.warning("duplicate %s values collapsed: %s -> %s", label, values, seen)
    return seen


def _rate_task(args):
    A, k, R, N_r, dt, efolds, t_max, window, seed = args
    rate, t, _ = measure_decay_rate(A, k, R=R, N_r=N_r, dt=dt, efolds=efolds, t_max=t_max,
                                    window=window, seed=seed)
    return A, k, rate, float(t[-1])


def _classify_task(args):
    cfg, A, M = args
    params = cfg.sim_params(A=A)
    n0, w0 = initial_fields(replace(cfg, M=M), params)
    sim = Simulation(params, diag_interval=cfg.diag_interval)
    sim.start(n0, w0)
    sim.advance()
    res = sim.result()
    return A, M, res.classification, res.sup_max_n / res.initial_max_n, res.steps


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def cmd_sweep(cfg, out, workers=None):
    """Decay-rate sweep (linear-model) or classification sweep (other modes)."""
    _ensure_dir(out)
    workers = workers or os.cpu_count() or 1
    A_list = _unique(cfg.A_list, "A")
    if cfg.run_mode != "linear-model":
        M_list = _unique(cfg.M_list, "M")
        rows = _map(_classify_task, [(cfg, A, M) for A in A_list for M in M_list], workers)
        with open(os.path.join(out, "classes.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["A", "M", "classification", "sup_max_n_over_initial", "steps"])
            for A, M, cls, ratio, steps in rows:
                w.writerow([repr(A), repr(M), cls, repr(float(ratio)), steps])
        return 0

    k_list = _unique([abs(k) for k in cfg.k_list], "k")
    if len(A_list) < 3 or len(k_list) < 3:
        raise InsufficientData("a rate sweep needs at least 3 distinct A and 3 distinct k values")
    tasks = [(A, k, cfg.R, cfg.N_r, cfg.lm_dt, cfg.lm_efolds, cfg.lm_t_max, cfg.fit_window, cfg.seed)
             for A in A_list for k in k_list]
    results = _map(_rate_task, tasks, workers)
    with open(os.path.join(out, "rates.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["A", "k", "rate", "normalized_rate", "t_final"])
        for A, k, rate, t_final in results:
            w.writerow([repr(A), k, repr(rate), repr(normalized_rate(rate, A, k, cfg.R)), repr(t_final)])
    fit = scaling_exponents([(A, k, rate) for A, k, rate, _ in results])
    suggested_a = 0.5 * min(normalized_rate(rate, A, k, cfg.R) for A, k, rate, _ in results)
    lines = [f"p_A: {fit.p_A!r}", f"p_k: {fit.p_k!r}"]
    lines += [f"p_A_at_k{k}: {v!r}" for k, v in fit.p_A_groups.items()]
    lines += [f"p_k_at_A{A:g}: {v!r}" for A, v in fit.p_k_groups.items()]
    lines.append(f"suggested_a_weight: {suggested_a!r}")
    with open(os.path.join(out, "exponents.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def normalized_rate(rate, A, k, R):
    """rate / (A^(-1/3) |k|^(2/3) R^(-2)), the prefactor of the enhanced-dissipation scaling."""
    return rate * A ** (1.0 / 3.0) * abs(k) ** (-2.0 / 3.0) * R ** 2


# -- verify-lemmas -----------------------------------------------------------

def run_lemma_checks(cfg):
    rows = []
    for R in cfg.lemma_R_list:
        rows += verify_lemma_ck(cfg.samples, cfg.lemma_k_list, R, cfg.N_r, cfg.seed, eigen=True).rows
        rows += verify_lemma_c0(cfg.samples, R, cfg.N_r, cfg.seed).rows
        rows += verify_lemma_phik(cfg.samples, cfg.phik_k_list, R, cfg.N_r, cfg.seed).rows
        rows += verify_lemma_phi0(cfg.samples, R, cfg.N_r, cfg.seed).rows
    return LemmaReport(rows)


def cmd_verify_lemmas(cfg, out):
    """Write lemma_report.csv; exit 0 iff every explicit-constant margin is within the slack."""
    _ensure_dir(out)
    report = run_lemma_checks(cfg)
    with open(os.path.join(out, "lemma_report.csv"), "w") as fh:
        fh.write("\n".join(report.csv_lines()) + "\n")
    failures = report.failures(LEMMA_SLACK)
    for row in failures:
        log.warning("margin %.4f > %.2f: %s R=%g k=%d sample=%d", row.margin, LEMMA_SLACK,
                    row.lemma, row.R, row.k, row.sample)
    for lemma in ("ck", "c0"):
        log.info("%s: max margin %.4f", lemma, report.max_margin(lemma))
    return 0 if not failures else 1


# -- fit-rates ---------------------------------------------------------------

def cmd_fit_rates(series_path, out, window=0.6):
    """Re-fit per-mode decay rates from an existing series.csv into rates_fit.csv."""
    _ensure_dir(out)
    rates = fit_series(read_series(series_path), window)
    with open(os.path.join(out, "rates_fit.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["column", "rate"])
        for name, value in rates.items():
            w.writerow([name, repr(value)])
    return 0
