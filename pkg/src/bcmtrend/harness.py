"""Monte Carlo scenarios, configuration files, data import and reports."""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .blinded import BlindedMethod, blinded_fisher, fit_blinded_arrays
from .core import AllocationWeights, Group, ModelParams, trend_integral
from .errors import DomainError, NumericalError, ValidationError
from .monitoring import (MonitoringOutcome, MonitoringSpec, Procedure, run_monitored_trial,
                         target_information)
from .simulation import Snapshot, TrialDesign, simulate_trial_arrays
from .trend import SufficientData

CUM_RATE_HORIZON = 2.0
DEFAULT_REPLICATIONS = 5000


def solve_alpha0(target_cum_rate: float, horizon: float, alpha1: float) -> float:
    """Intercept giving a control cumulative rate of ``target_cum_rate`` at ``horizon``."""
    if not target_cum_rate > 0:
        raise DomainError("target cumulative rate must be positive")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    return math.log(target_cum_rate) - math.log(trend_integral(alpha1, horizon))


@dataclass(frozen=True)
class Scenario:
    """One simulated configuration: truth, design, monitoring rule and Monte Carlo size."""

    design: TrialDesign
    true_params: ModelParams
    spec: MonitoringSpec
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValidationError("must be a positive integer", field="replications")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("must be a 64-bit non-negative integer", field="seed")

    @classmethod
    def reference(cls, rate_ratio_h1: float, alpha1: float, n_total: int, procedure,
                  null: bool = False, replications: int = DEFAULT_REPLICATIONS, seed: int = 0,
                  cum_rate: float = 1.5, phi: float = 1.25, power: float = 0.8,
                  alpha: float = 0.025, label: str = "") -> "Scenario":
        """Scenario with the fixed simulation-study settings and the given free parameters."""
        a0 = solve_alpha0(cum_rate, CUM_RATE_HORIZON, alpha1)
        beta = 0.0 if null else math.log(rate_ratio_h1)
        spec = MonitoringSpec.planned(procedure, rate_ratio_h1, alpha, power)
        return cls(TrialDesign(n_total), ModelParams(a0, alpha1, beta, phi), spec,
                   replications, seed, label)


@dataclass
class ScenarioSummary:
    """Aggregated operating characteristics of one scenario."""

    label: str
    procedure: str
    replications: int
    reject_rate: float
    mc_error: float
    mean_stop_time: float
    sd_stop_time: float
    mean_n: float
    mean_beta_hat: float
    bias_exp_beta: float
    skipped_fit_count: int
    final_fit_failures: int
    degraded: bool
    stop_times: np.ndarray = field(repr=False, default=None)
    rejects: np.ndarray = field(repr=False, default=None)

    CSV_FIELDS = ("label", "procedure", "replications", "reject_rate", "mc_error",
                  "mean_stop_time", "sd_stop_time", "mean_n", "mean_beta_hat",
                  "bias_exp_beta", "skipped_fit_count", "final_fit_failures", "degraded")

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep``; identical for every worker layout."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep),)))


def run_replication(sc: Scenario, rep: int) -> MonitoringOutcome:
    trial = simulate_trial_arrays(sc.design, sc.true_params, replication_rng(sc.seed, rep))
    return run_monitored_trial(trial, sc.design, sc.spec)


def _compact(sc: Scenario, rep: int):
    out = run_replication(sc, rep)
    looks = len(out.info_trajectory) + out.skipped_fits
    return (out.reject, out.stop_time, out.n_analyzed, out.beta_hat, out.skipped_fits,
            looks, out.final_converged)


def summarize(sc: Scenario, results) -> ScenarioSummary:
    reject = np.array([r[0] for r in results], dtype=bool)
    stop = np.array([r[1] for r in results], dtype=float)
    n = np.array([r[2] for r in results], dtype=float)
    beta = np.array([r[3] for r in results], dtype=float)
    skipped = int(sum(r[4] for r in results))
    looks = int(sum(r[5] for r in results))
    failed = int(sum(not r[6] for r in results))
    reps = len(results)
    p = float(reject.mean())
    ok = np.isfinite(beta)
    mean_beta = float(beta[ok].mean()) if ok.any() else math.nan
    bias = float(np.exp(beta[ok]).mean() - math.exp(sc.true_params.beta)) if ok.any() else math.nan
    degraded = failed > 0.05 * reps or (looks > 0 and skipped > 0.05 * looks)
    return ScenarioSummary(
        sc.label, sc.spec.procedure.value, reps, p, math.sqrt(p * (1.0 - p) / reps),
        float(stop.mean()), float(stop.std(ddof=1)) if reps > 1 else 0.0, float(n.mean()),
        mean_beta, bias, skipped, failed, bool(degraded), stop, reject,
    )


def run_scenario(sc: Scenario, workers: int = 1) -> ScenarioSummary:
    """Simulate, monitor and analyze ``sc.replications`` trials.

    Results are aggregated in replication order, so the summary does not
    depend on ``workers``.
    """
    job = partial(_compact, sc)
    reps = range(int(sc.replications))
    if workers <= 1:
        results = [job(r) for r in reps]
    else:
        with multiprocessing.get_context("spawn").Pool(workers) as pool:
            results = pool.map(job, reps, chunksize=max(1, len(reps) // (8 * workers)))
    return summarize(sc, results)


# ---------------------------------------------------------------------------
# configuration files

_FLOAT_KEYS = {
    "rate_ratio_h1", "trend_alpha1", "cum_rate_control_2y", "shape_phi", "recruitment_years",
    "max_followup_years", "study_years", "monitor_start_years", "monitor_step_years",
    "power_target", "alpha_one_sided", "rate_ratio_true", "allocation_treatment",
}
_INT_KEYS = {"n_total", "replications", "seed"}
_TEXT_KEYS = {"procedure", "label"}
_DEFAULTS = {
    "cum_rate_control_2y": 1.5, "shape_phi": 1.25, "recruitment_years": 2.0,
    "max_followup_years": 2.0, "study_years": 4.0, "monitor_start_years": 0.5,
    "monitor_step_years": 1.0 / 52.0, "procedure": "TrendLump", "power_target": 0.8,
    "alpha_one_sided": 0.025, "replications": DEFAULT_REPLICATIONS, "seed": 0,
    "allocation_treatment": 0.5,
}
_REQUIRED = ("rate_ratio_h1", "trend_alpha1", "n_total")


def _parse_value(key: str, raw: str, line: int):
    try:
        if key in _INT_KEYS:
            value = int(raw, 0)
        elif key in _FLOAT_KEYS:
            value = float(raw) if "/" not in raw else _ratio(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = raw
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse {raw!r}", field=key, line=line) from None
    return value


def _ratio(raw: str) -> float:
    num, den = raw.split("/")
    return float(num) / float(den)


def _build_scenario(block: dict, lines: dict) -> Scenario:
    def fail(key, msg):
        return ValidationError(msg, field=key, line=lines.get(key, lines["__start__"]))

    for key in _REQUIRED:
        if key not in block:
            raise fail(key, "required key is missing")
    cfg = {**_DEFAULTS, **block}
    for key in ("rate_ratio_h1", "cum_rate_control_2y", "shape_phi", "monitor_step_years"):
        if not cfg[key] > 0:
            raise fail(key, "must be positive")
    if cfg["replications"] < 1:
        raise fail("replications", "must be a positive integer")
    if not 0 <= cfg["seed"] < 2**64:
        raise fail("seed", "must be a 64-bit non-negative integer")
    if not 0 < cfg["power_target"] < 1:
        raise fail("power_target", "must lie in (0, 1)")
    ratio_true = cfg.get("rate_ratio_true", cfg["rate_ratio_h1"])
    if not ratio_true > 0:
        raise fail("rate_ratio_true", "must be positive")
    try:
        weights = AllocationWeights(cfg["allocation_treatment"])
        design = TrialDesign(cfg["n_total"], weights, cfg["recruitment_years"],
                             cfg["max_followup_years"], cfg["study_years"],
                             cfg["monitor_start_years"], cfg["monitor_step_years"])
        a0 = solve_alpha0(cfg["cum_rate_control_2y"], CUM_RATE_HORIZON, cfg["trend_alpha1"])
        params = ModelParams(a0, cfg["trend_alpha1"], math.log(ratio_true), cfg["shape_phi"])
        spec = MonitoringSpec.planned(cfg["procedure"], cfg["rate_ratio_h1"],
                                      cfg["alpha_one_sided"], cfg["power_target"])
    except ValidationError as exc:
        key = {"n_total": "n_total", "recruitment_period": "recruitment_years",
               "max_followup": "max_followup_years", "study_duration": "study_years",
               "monitor_start": "monitor_start_years", "monitor_step": "monitor_step_years",
               "alpha": "alpha_one_sided"}.get(exc.field, exc.field)
        raise fail(key, str(exc).split(": ", 1)[-1]) from None
    except DomainError as exc:
        raise ValidationError(str(exc), line=lines["__start__"]) from None
    label = cfg.get("label") or (
        f"rr{cfg['rate_ratio_h1']:g}_a1{cfg['trend_alpha1']:g}_n{cfg['n_total']}"
        f"_{'H0' if ratio_true == 1 else 'H1'}_{spec.procedure.value}")
    return Scenario(design, params, spec, cfg["replications"], cfg["seed"], label)


def parse_config(text: str) -> list:
    """Parse ``[scenario]`` blocks of ``key = value`` lines (``#`` starts a comment)."""
    known = _FLOAT_KEYS | _INT_KEYS | _TEXT_KEYS
    scenarios = []
    block = None
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line.lower() != "[scenario]":
                raise ValidationError(f"unknown section {line!r}", line=lineno)
            if block is not None:
                scenarios.append(_build_scenario(block, lines))
            block, lines = {}, {"__start__": lineno}
            continue
        if "=" not in line:
            raise ValidationError(f"expected 'key = value', got {line!r}", line=lineno)
        if block is None:
            raise ValidationError("key outside a [scenario] block", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValidationError("unknown key", field=key, line=lineno)
        if key in block:
            raise ValidationError("duplicate key", field=key, line=lineno)
        block[key] = _parse_value(key, value, lineno)
        lines[key] = lineno
    if block is not None:
        scenarios.append(_build_scenario(block, lines))
    return scenarios


def load_config(path) -> list:
    """Scenarios from a configuration file; an empty file gives an empty list."""
    return parse_config(Path(path).read_text(encoding="utf-8"))


def bundled_config(name: str) -> Path:
    """Path of a configuration file shipped with the package."""
    return Path(__file__).resolve().parent / "data" / name


# ---------------------------------------------------------------------------
# blinded event files

_EVENT_COLUMNS = ("subject_id", "exposure_years", "event_times")
_OPTIONAL_COLUMNS = ("entry_years", "group")


def _number(row, key, line, check, what):
    try:
        value = float(row[key])
    except (TypeError, ValueError):
        raise ValidationError("not a number", field=key, line=line) from None
    if not (math.isfinite(value) and check(value)):
        raise ValidationError(f"must be {what}", field=key, line=line)
    return value


def parse_events(text: str, blinded: bool = True) -> Snapshot:
    """Snapshot from CSV event data.

    Required columns are ``subject_id,exposure_years,event_times`` with
    event times ``;``-separated (empty for none).  Optional columns are
    ``entry_years`` (calendar entry, needed by :func:`information_curve`)
    and ``group`` (``T``/``C``, needed for unblinded fits).  With
    ``blinded`` set any group column is ignored.
    """
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for col in _EVENT_COLUMNS:
        if col not in header:
            raise ValidationError("missing column", field=col, line=1)
    extra = set(header) - set(_EVENT_COLUMNS) - set(_OPTIONAL_COLUMNS)
    if extra:
        raise ValidationError(f"unknown columns {sorted(extra)}", line=1)
    use_group = not blinded
    if use_group and "group" not in header:
        raise ValidationError("unblinded data need a group column", field="group", line=1)
    ids, expo, events, entry, group = [], [], [], [], []
    seen = set()
    for row in reader:
        line = reader.line_num
        sid = (row["subject_id"] or "").strip()
        if not sid:
            raise ValidationError("empty subject id", field="subject_id", line=line)
        if sid in seen:
            raise ValidationError(f"duplicate subject id {sid!r}", field="subject_id", line=line)
        seen.add(sid)
        s = _number(row, "exposure_years", line, lambda v: v > 0, "positive")
        raw = (row["event_times"] or "").strip()
        try:
            times = np.array([float(v) for v in raw.split(";")] if raw else [], dtype=float)
        except ValueError:
            raise ValidationError("not a number", field="event_times", line=line) from None
        if np.any(~np.isfinite(times)) or np.any(times < 0) or np.any(times > s):
            raise ValidationError("event times must lie in [0, exposure]", field="event_times",
                                  line=line)
        if "entry_years" in header:
            entry.append(_number(row, "entry_years", line, lambda v: v >= 0, "non-negative"))
        if use_group:
            try:
                group.append(int(Group.parse(row["group"])))
            except DomainError:
                raise ValidationError(f"unknown group {row['group']!r}", field="group",
                                      line=line) from None
        ids.append(sid)
        expo.append(s)
        events.append(np.sort(times))
    if not ids:
        raise ValidationError("file contains no subjects", field="subject_id")
    return Snapshot(np.array(expo), tuple(events), np.array(group, dtype=float) if use_group else None,
                    tuple(ids), np.array(entry) if entry else None)


def parse_blinded_events(text: str) -> Snapshot:
    """Blinded snapshot from CSV text; see :func:`parse_events`."""
    return parse_events(text, blinded=True)


def load_blinded_events(path) -> Snapshot:
    """Blinded snapshot from a CSV file; see :func:`parse_events`."""
    return parse_events(Path(path).read_text(encoding="utf-8"), blinded=True)


def load_events(path, blinded: bool = False) -> Snapshot:
    """Snapshot (unblinded by default) from a CSV file; see :func:`parse_events`."""
    return parse_events(Path(path).read_text(encoding="utf-8"), blinded=blinded)


# ---------------------------------------------------------------------------
# information curves

MONITORED = (Procedure.TREND_LUMP, Procedure.TREND_MIX, Procedure.CONST_LUMP, Procedure.CONST_MIX)


def _blinded_at(data: Snapshot, t: float) -> SufficientData | None:
    idx = np.flatnonzero(data.entry < t)
    if idx.size == 0:
        return None
    expo = np.minimum(t - data.entry[idx], data.exposure[idx])
    counts, tsum = [], 0.0
    for j, s in zip(idx, expo):
        ev = data.event_times[j]
        ev = ev[ev <= s]
        counts.append(ev.size)
        tsum += float(ev.sum())
    return SufficientData.from_arrays(np.array(counts, dtype=float), expo, None, tsum)


def information_curve(data: Snapshot, beta_h1: float, grid, weights: AllocationWeights = None,
                      procedures=MONITORED, init=None) -> dict:
    """Blinded information at each calendar time in ``grid`` for each procedure.

    ``data`` must carry calendar entry times.  A time point where no subject
    is enrolled, the fit fails or the information is singular gives NaN.
    Fits are warm-started from the previous time point; ``init``
    (``(alpha0, alpha1, phi)``) seeds the first fit.
    """
    if data.entry is None:
        raise ValidationError("calendar entry times are required", field="entry_years")
    weights = AllocationWeights() if weights is None else weights
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be strictly increasing", field="grid")
    out = {}
    for proc in (Procedure.parse(p) for p in procedures):
        method = BlindedMethod.LUMPING if proc in (Procedure.TREND_LUMP, Procedure.CONST_LUMP) \
            else BlindedMethod.MIXTURE
        curve, last = [], init
        for t in grid:
            snap = _blinded_at(data, t)
            info = math.nan
            if snap is not None and snap.total_events > 0:
                try:
                    bfit = fit_blinded_arrays(snap, method, beta_h1, weights, last, proc.with_trend)
                    if not bfit.converged and last is not None:
                        bfit = fit_blinded_arrays(snap, method, beta_h1, weights, None,
                                                  proc.with_trend)
                    if bfit.converged:
                        last = bfit
                        info = blinded_fisher(bfit, beta_h1, weights, snap.exposure).info
                except (NumericalError, ValidationError):
                    info = math.nan
            curve.append((float(t), float(info)))
        out[proc] = curve
    return out


def curve_csv(curves: dict) -> str:
    """Delimited text with one column per procedure; missing values are ``NA``."""
    procs = list(curves)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [p.value for p in procs])
    for i, (t, _) in enumerate(curves[procs[0]]):
        vals = [curves[p][i][1] for p in procs]
        w.writerow([repr(t)] + ["NA" if not math.isfinite(v) else repr(v) for v in vals])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# sample sizes

def fixed_sample_size(rate_ratio: float, cum_rate: float = 1.5, phi: float = 1.25,
                      followup: float = CUM_RATE_HORIZON, alpha: float = 0.025,
                      power: float = 0.8, w_treatment: float = 0.5) -> int:
    """Smallest total sample size whose expected information reaches the target.

    Every subject is followed for ``followup`` years with control cumulative
    rate ``cum_rate``; the result is rounded up to a multiple of two.
    """
    target = target_information(alpha, power, math.log(rate_ratio))
    lam_c = cum_rate
    lam_t = cum_rate * rate_ratio
    i_c = lam_c / (1.0 + phi * lam_c)
    i_t = lam_t / (1.0 + phi * lam_t)
    per_subject = 1.0 / (1.0 / (w_treatment * i_t) + 1.0 / ((1.0 - w_treatment) * i_c))
    n = math.ceil(target / per_subject - 1e-9)
    return n + (n % 2)


def find_n_fix(rate_ratio: float, alpha1: float, power: float = 0.8, alpha: float = 0.025,
               replications: int = 2000, seed: int = 0, lo: int = 20, hi: int = 2000,
               cum_rate: float = 1.5, phi: float = 1.25) -> int:
    """Bisection on simulated fixed-design power for the smallest even ``n``.

    Every candidate ``n`` uses the same replication seeds, so the simulated
    power is close to monotone in ``n``.
    """
    def power_at(n):
        sc = Scenario.reference(rate_ratio, alpha1, n, Procedure.FIXED, replications=replications,
                                seed=seed, cum_rate=cum_rate, phi=phi, power=power, alpha=alpha)
        return run_scenario(sc).reject_rate

    lo, hi = lo + lo % 2, hi + hi % 2
    if power_at(hi) < power:
        raise NumericalError(f"power {power} not reached at n={hi}")
    while hi - lo > 2:
        mid = (lo + hi) // 2
        mid += mid % 2
        if power_at(mid) >= power:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# reports

def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def write_report(summaries: list, scenarios: list, out_dir) -> tuple:
    """Write ``summary.csv`` and the ``summary.json`` sidecar; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "summary.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ScenarioSummary.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for s in summaries:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in s.row().items()})
    sidecar = []
    for s, sc in zip(summaries, scenarios):
        grid = sc.design.monitoring_grid()
        edges = np.append(grid - sc.design.monitor_step / 2, grid[-1] + sc.design.monitor_step / 2)
        hist, _ = np.histogram(s.stop_times, bins=edges)
        sidecar.append({
            "summary": s.row(),
            "scenario": {
                "design": asdict(sc.design),
                "true_params": asdict(sc.true_params),
                "procedure": sc.spec.procedure.value,
                "beta_h1": sc.spec.beta_h1,
                "alpha": sc.spec.alpha,
                "target_info": sc.spec.target_info,
                "replications": sc.replications,
                "seed": sc.seed,
            },
            "stop_time_histogram": {"grid": grid, "counts": hist},
            "stop_time_quantiles": dict(zip(
                ("q05", "q25", "q50", "q75", "q95"),
                np.quantile(s.stop_times, [0.05, 0.25, 0.5, 0.75, 0.95]))),
        })
    json_path = out / "summary.json"
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True, default=_json_default) + "\n",
                         encoding="utf-8")
    return csv_path, json_path
