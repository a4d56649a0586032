"""Monte Carlo comparison of vMF and Gaussian filters/smoothers.

Every (alpha2, s) cell simulates ``runs`` independent scenarios and feeds the
same data to each estimator.  ``s`` is used as the diffusion intensity
``gamma^2`` of the state SDE.

Seeding: run ``r`` of cell ``c`` draws from
``np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c, r)))``,
so any run can be regenerated on its own, independently of execution order.
Cells are numbered in table order: ``s`` is the outer loop, ``alpha2`` the
inner one.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .dynamics import OuParams, Scenario, ScenarioConfig, simulate_batch
from .gaussian import norm_constrained_estimates, run_gaussian_filter, run_gaussian_smoother
from .projection import NumericalBlowupError, run_vmf_filter, run_vmf_smoother
from .sphere_math import DomainError, angular_error_deg
from .vmf import MeasurementModel, mode

log = logging.getLogger(__name__)

ESTIMATORS = ("VMFF", "VMFS", "GF", "GS")

# Mean angular errors in degrees reported for the reference study,
# keyed by (alpha2, s).
REFERENCE_TABLE = {
    (1e-3, 1e-3): {"VMFF": 1.3042, "VMFS": 0.9691, "GF": 1.3083, "GS": 1.1055},
    (1e-2, 1e-3): {"VMFF": 2.3000, "VMFS": 1.6799, "GF": 2.3094, "GS": 1.7860},
    (1e-3, 1e-2): {"VMFF": 3.5286, "VMFS": 2.9079, "GF": 3.5619, "GS": 4.3473},
    (1e-2, 1e-2): {"VMFF": 6.8679, "VMFS": 5.0925, "GF": 7.0990, "GS": 7.6873},
}


@dataclass
class ExperimentConfig:
    alpha2_values: list = field(default_factory=lambda: [1e-3, 1e-2])
    s_values: list = field(default_factory=lambda: [1e-3, 1e-2])
    runs: int = 100
    duration_s: float = 10.0
    meas_rate_hz: float = 100.0
    substeps_per_meas: int = 10
    ou_reversion_rate: float = -5.0
    ou_diffusion: float = 2.5
    gravity_g: float = 9.82
    seed: int = 20190601
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    output_dir: str = "results"

    def __post_init__(self):
        self.alpha2_values = [float(a) for a in self.alpha2_values]
        self.s_values = [float(s) for s in self.s_values]
        self.estimators = [e.upper() for e in self.estimators]
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if any(a <= 0 for a in self.alpha2_values) or any(s <= 0 for s in self.s_values):
            raise ValueError("alpha2 and s values must be positive")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")

    def cells(self):
        """``(cell_index, alpha2, s)`` in table order."""
        out = []
        for s in self.s_values:
            for a in self.alpha2_values:
                out.append((len(out), a, s))
        return out

    def scenario_config(self, alpha2, s) -> ScenarioConfig:
        return ScenarioConfig(
            duration_s=self.duration_s,
            meas_rate_hz=self.meas_rate_hz,
            substeps_per_meas=self.substeps_per_meas,
            gamma2=s,
            model=MeasurementModel(self.gravity_g, alpha2),
            ou=OuParams(self.ou_reversion_rate, self.ou_diffusion),
            seed=self.seed,
        )

    def run_rng(self, cell_index: int, run_index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(cell_index, run_index)))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        """Build from a plain config mapping or from a ``summary.json``
        document (its ``config`` entry is used)."""
        if "config" in d and isinstance(d["config"], dict):
            d = d["config"]
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with Path(path).open() as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ResultTable:
    """Per-run mean angular errors.

    ``errors[(alpha2, s, estimator)]`` lists ``(run_index, error_deg)`` for
    successful runs; ``failures`` lists ``(alpha2, s, estimator, run, message)``.
    """

    config: ExperimentConfig
    errors: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def cell_summary(self, alpha2, s, estimator):
        runs = self.errors.get((alpha2, s, estimator), [])
        if not runs:
            return None
        mean, stderr = aggregate_metrics([e for _, e in runs])
        return {"mean": mean, "stderr": stderr, "n": len(runs)}

    def mean(self, alpha2, s, estimator):
        return self.cell_summary(alpha2, s, estimator)["mean"]


def aggregate_metrics(per_run_errors):
    """Arithmetic mean and standard error of the mean."""
    x = np.asarray(per_run_errors, dtype=float)
    if x.size == 0:
        raise ValueError("cannot aggregate an empty list")
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def error_window(scenario: Scenario) -> int:
    """Index of the first measurement; errors are averaged from here on."""
    return int(np.flatnonzero(scenario.meas_mask)[0])


def trajectory_errors(truth, estimates):
    """Per-run mean angular error (degrees) of unit ``estimates`` against
    ``truth``, averaged over the leading (time) axis.  Runs with any
    non-finite estimate get NaN."""
    with np.errstate(invalid="ignore"):
        bad = ~np.all(np.isfinite(estimates), axis=(0, -1))
    safe = np.where(np.isfinite(estimates), estimates, np.array([0.0, 0.0, 1.0]))
    err = angular_error_deg(safe, truth).mean(axis=0)
    return np.where(bad, np.nan, err)


def run_estimators(scenario: Scenario, gamma2, model, estimators):
    """Run the requested estimators on one (possibly batched) scenario and
    return ``{name: per-run error array}``."""
    want = set(estimators)
    k = error_window(scenario)
    truth = scenario.truth[k:]
    out = {}
    if want & {"VMFF", "VMFS"}:
        filt = run_vmf_filter(scenario, gamma2, model)
        if "VMFF" in want:
            out["VMFF"] = trajectory_errors(truth, mode(filt.theta_f[k:]))
        if "VMFS" in want:
            sm = run_vmf_smoother(filt, scenario, gamma2)
            out["VMFS"] = trajectory_errors(truth, mode(sm.theta_s[k:]))
    if want & {"GF", "GS"}:
        gf = run_gaussian_filter(scenario, gamma2, model)
        if "GF" in want:
            out["GF"] = trajectory_errors(truth, norm_constrained_estimates(gf.means[k:])[0])
        if "GS" in want:
            gs = run_gaussian_smoother(gf, scenario, gamma2)
            out["GS"] = trajectory_errors(truth, norm_constrained_estimates(gs.means[k:])[0])
    return out


_RECOVERABLE = (NumericalBlowupError, DomainError, np.linalg.LinAlgError, FloatingPointError)


def _run_cell(config: ExperimentConfig, cell_index, alpha2, s, table: ResultTable):
    sc_cfg = config.scenario_config(alpha2, s)
    rngs = [config.run_rng(cell_index, r) for r in range(config.runs)]
    scenario = simulate_batch(sc_cfg, rngs)
    ests = [e for e in ESTIMATORS if e in config.estimators]

    try:
        per_est = run_estimators(scenario, s, sc_cfg.model, ests)
    except _RECOVERABLE as exc:
        # isolate the failing runs; the others are unaffected
        log.warning("batch failed (alpha2=%g, s=%g): %s; retrying per run", alpha2, s, exc)
        per_est = {e: np.full(config.runs, np.nan) for e in ests}
        for r in range(config.runs):
            single = scenario.run(r)
            for est in ests:
                try:
                    per_est[est][r] = run_estimators(single, s, sc_cfg.model, [est])[est]
                except _RECOVERABLE as exc_r:
                    table.failures.append((alpha2, s, est, r, str(exc_r)))

    for est in ests:
        ok = []
        for r, e in enumerate(per_est[est]):
            if np.isfinite(e):
                ok.append((r, float(e)))
            elif not any(f[:4] == (alpha2, s, est, r) for f in table.failures):
                table.failures.append((alpha2, s, est, r, "non-finite estimate"))
        table.errors[(alpha2, s, est)] = ok
        if len(ok) < config.runs:
            log.warning("%s (alpha2=%g, s=%g): %d of %d runs succeeded",
                        est, alpha2, s, len(ok), config.runs)


def run_monte_carlo(config: ExperimentConfig) -> ResultTable:
    table = ResultTable(config)
    for cell_index, alpha2, s in config.cells():
        t0 = time.perf_counter()
        _run_cell(config, cell_index, alpha2, s, table)
        log.info("cell alpha2=%g s=%g done in %.1fs", alpha2, s, time.perf_counter() - t0)
    return table


RESULT_COLUMNS = ["alpha2", "s", "estimator", "run", "mean_angular_error_deg"]


def summary_dict(table: ResultTable):
    cfg = table.config
    ests = [e for e in ESTIMATORS if e in cfg.estimators]
    rows = []
    for _, alpha2, s in cfg.cells():
        row = {"alpha2": alpha2, "s": s}
        for est in ests:
            cs = table.cell_summary(alpha2, s, est)
            row[est] = None if cs is None else {
                "mean": round(cs["mean"], 4), "stderr": round(cs["stderr"], 4), "n": cs["n"]}
        rows.append(row)
    return {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "estimators": ests,
        "table": rows,
        "failed_runs": len(table.failures),
    }


def write_outputs(table: ResultTable, out_dir) -> None:
    """Write ``results.csv`` (one row per run) and ``summary.json``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "results.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for _, alpha2, s in table.config.cells():
                for est in ESTIMATORS:
                    if est not in table.config.estimators:
                        continue
                    for run, err in table.errors.get((alpha2, s, est), []):
                        w.writerow([repr(alpha2), repr(s), est, run, repr(err)])
        with (out_dir / "summary.json").open("w") as fh:
            json.dump(summary_dict(table), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"could not write results to {out_dir}: {exc}") from exc


def format_table(summary) -> str:
    """Render a summary mapping as a fixed-width grid."""
    ests = summary["estimators"]
    head = f"{'(alpha2, s)':<22}" + "".join(f"{e:>18}" for e in ests)
    lines = ["Mean angular error (degrees), mean +/- standard error", head, "-" * len(head)]
    for row in summary["table"]:
        label = f"({row['alpha2']:.0e}, {row['s']:.0e})"
        cells = []
        for e in ests:
            c = row.get(e)
            cells.append(f"{'n/a':>18}" if c is None else f"{c['mean']:>10.4f} +/- {c['stderr']:<5.3f}")
        lines.append(f"{label:<22}" + "".join(cells))
    return "\n".join(lines)
