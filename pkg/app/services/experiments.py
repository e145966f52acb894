"""
Experiment Service
Experiment specs (JSON files plus overrides), seed replication on a process
pool, summaries and the CSV formats written by the CLI.
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional
import csv
import io
import json
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.config import settings
from app.errors import ConfigurationError, UnknownObjectiveError
from app.services import saltelli
from app.services.constraints import SobolConstraint, experiment_preset
from app.services.optimizer import RunConfig, RunResult, run
from app.services.testbed import AffineBox, get_objective_spec, make_objective

logger = logging.getLogger(__name__)

RUN_COLUMNS = ["experiment", "seed", "n_eval", "m_best", "solves_used", "termination"]
SENSITIVITY_COLUMNS = ["index", "first_order", "total", "n_base"]


def parse_seeds(value) -> List[int]:
    """'1-20', '1..20', '1,2,5', '7', or a list of ints"""
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    seeds: List[int] = []
    for part in str(value).replace(" ", "").split(","):
        if not part:
            continue
        for sep in ("..", "-"):
            head, found, tail = part.partition(sep)
            if found and head and tail:
                lo, hi = int(head), int(tail)
                if hi < lo:
                    raise ValueError(f"empty seed range '{part}'")
                seeds.extend(range(lo, hi + 1))
                break
        else:
            seeds.append(int(part))
    return seeds


class SaltelliSource(BaseModel):
    """Constraints generated from a Saltelli estimate of the objective itself"""

    model_config = ConfigDict(extra="forbid")

    n_base: int = Field(default_factory=lambda: settings.SALTELLI_N_BASE, ge=2)
    margin: float = Field(default=0.1, ge=0.0)
    seed: int = 0
    assume_zero: bool = False
    full_total: bool = False


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    objective: str = "rosenbrock3"
    box: Optional[AffineBox] = None
    d: Optional[int] = Field(default=None, ge=1)
    degree: int = Field(default_factory=lambda: settings.DEGREE, ge=1)
    budget_solves: int = Field(default_factory=lambda: settings.BUDGET_SOLVES, ge=1)
    preset: Optional[Literal["A", "B", "C", "D"]] = None
    constraints: Optional[List[SobolConstraint]] = None
    from_saltelli: Optional[SaltelliSource] = None
    seeds: List[int] = Field(default_factory=lambda: parse_seeds(settings.DEFAULT_SEEDS))
    out: Optional[str] = None
    max_consecutive_infeasible: int = Field(default_factory=lambda: settings.MAX_CONSECUTIVE_INFEASIBLE, ge=1)

    @field_validator("seeds", mode="before")
    @classmethod
    def expand_seeds(cls, value):
        return parse_seeds(value)

    @field_validator("preset", mode="before")
    @classmethod
    def upper_preset(cls, value):
        return value.upper() if isinstance(value, str) else value

    @model_validator(mode="after")
    def check_consistency(self):
        try:
            spec = get_objective_spec(self.objective)
        except UnknownObjectiveError as exc:
            raise ValueError(str(exc)) from exc
        if self.d is None:
            self.d = self.box.d if self.box is not None else spec.d
        if self.box is not None and self.box.d != self.d:
            raise ValueError(f"box has {self.box.d} coordinates but d = {self.d}")
        if self.d < spec.min_d or (spec.fixed_d and self.d != spec.d):
            raise ValueError(f"objective '{self.objective}' does not accept d = {self.d}")
        sources = [s for s in ("preset", "constraints", "from_saltelli") if getattr(self, s) is not None]
        if len(sources) > 1:
            raise ValueError(f"give one constraint source, got {', '.join(sources)}")
        if self.preset is not None and self.d != 3:
            raise ValueError("presets A-D are defined for d = 3")
        for constraint in self.constraints or []:
            if any(max(u) > self.d for u in constraint.family):
                raise ValueError(f"constraint {constraint.family} names a variable beyond d = {self.d}")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        return self

    @property
    def label(self) -> str:
        return self.name or self.preset or "custom"


def _describe(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in err['loc']) or 'spec'}: {err['msg']}" for err in exc.errors()
    )


def build_spec(data: Dict[str, Any]) -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid experiment spec: {_describe(exc)}") from exc
    except ConfigurationError:
        raise
    except Exception as exc:
        raise ConfigurationError(f"invalid experiment spec: {exc}") from exc


def load_spec(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """Read a JSON spec file (optional) and apply non-None overrides on top"""
    data: Dict[str, Any] = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigurationError(f"spec file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"spec file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"spec file {path} must hold a JSON object")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "preset":
            data.pop("constraints", None)
            data.pop("from_saltelli", None)
        data[key] = value
    return build_spec(data)


def resolve_constraints(spec: ExperimentSpec) -> List[SobolConstraint]:
    if spec.preset is not None:
        return experiment_preset(spec.preset)
    if spec.constraints is not None:
        return list(spec.constraints)
    if spec.from_saltelli is not None:
        source = spec.from_saltelli
        est = run_sensitivity(spec.objective, source.n_base, source.seed, d=spec.d, box=spec.box)
        constraints = saltelli.suggest_bounds(est, source.margin, source.assume_zero, source.full_total)
        logger.info(f"📐 {len(constraints)} constraints from Saltelli estimate (n_base={source.n_base})")
        return constraints
    return []


def run_config(spec: ExperimentSpec, constraints: List[SobolConstraint], seed: int) -> RunConfig:
    return RunConfig(
        d=spec.d,
        D=spec.degree,
        budget_solves=spec.budget_solves,
        constraints=constraints,
        seed=seed,
        max_consecutive_infeasible=spec.max_consecutive_infeasible,
    )


def _run_seed(spec: ExperimentSpec, constraints: List[SobolConstraint], seed: int) -> RunResult:
    f = make_objective(spec.objective, box=spec.box, d=spec.d)
    return run(f, run_config(spec, constraints, seed))


def run_experiment(spec: ExperimentSpec, max_workers: Optional[int] = None) -> List[RunResult]:
    """One run per seed; results sorted by seed"""
    constraints = resolve_constraints(spec)
    seeds = sorted(spec.seeds)
    workers = settings.MAX_WORKERS if max_workers is None else max_workers
    logger.info(
        f"🧪 Experiment {spec.label}: objective={spec.objective}, D={spec.degree}, "
        f"budget={spec.budget_solves}, {len(seeds)} seeds, {workers} workers"
    )
    if workers <= 1 or len(seeds) == 1:
        results = [_run_seed(spec, constraints, seed) for seed in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_seed, spec, constraints, seed) for seed in seeds]
            results = [future.result() for future in futures]
    summary = summarize(results)
    logger.info(
        f"📊 Experiment {spec.label}: median n_eval={summary['n_eval_median']:g}, "
        f"median m_best={summary['m_best_median']:.4g}"
    )
    return results


def summarize(results: List[RunResult]) -> Dict[str, float]:
    """Median and interquartile range of n_eval, m_best and solves_used"""
    n_eval = np.array([r.n_eval for r in results], dtype=float)
    m_best = np.array([r.m_best for r in results], dtype=float)
    solves = np.array([r.solves_used for r in results], dtype=float)

    def iqr(values: np.ndarray) -> float:
        q75, q25 = np.percentile(values, [75, 25])
        return float(q75 - q25)

    return {
        "n_eval_median": float(np.median(n_eval)),
        "n_eval_iqr": iqr(n_eval),
        "m_best_median": float(np.median(m_best)),
        "m_best_iqr": iqr(m_best),
        "solves_used_median": float(np.median(solves)),
        "solves_used_iqr": iqr(solves),
    }


def format_number(value: float) -> str:
    """17 significant digits, integers without a decimal point"""
    value = float(value)
    if value.is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return format(value, ".17g")


def _to_csv(columns: List[str], rows: List[List[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def results_csv(label: str, results: List[RunResult]) -> str:
    """Per-seed rows sorted by seed, then the 'median' and 'iqr' summary rows"""
    rows = [
        [label, r.seed, r.n_eval, format_number(r.m_best), r.solves_used, r.termination.value]
        for r in sorted(results, key=lambda r: r.seed)
    ]
    summary = summarize(results)
    for stat in ("median", "iqr"):
        rows.append([
            label, stat,
            format_number(summary[f"n_eval_{stat}"]),
            format_number(summary[f"m_best_{stat}"]),
            format_number(summary[f"solves_used_{stat}"]),
            "",
        ])
    return _to_csv(RUN_COLUMNS, rows)


def run_sensitivity(objective: str, n_base: int, seed: int, d: Optional[int] = None,
                    box: Optional[AffineBox] = None) -> saltelli.SensitivityEstimate:
    f = make_objective(objective, box=box, d=d)
    spec = get_objective_spec(objective)
    rng = np.random.default_rng(seed)
    return saltelli.estimate(f, d or (box.d if box else spec.d), n_base, rng)


def sensitivity_csv(est: saltelli.SensitivityEstimate) -> str:
    rows = [
        [i + 1, format_number(est.first_order[i]), format_number(est.total[i]), est.n_base]
        for i in range(est.d)
    ]
    return _to_csv(SENSITIVITY_COLUMNS, rows)
