"""
Sobol-Constrained Optimizer - Main FastAPI Application
Runs experiments, Saltelli sensitivity estimates and single certifications over HTTP
"""
from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from fastapi.middleware.cors import CORSMiddleware
from contextlib import asynccontextmanager
from datetime import datetime
from typing import List, Literal, Optional, Union
import logging

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import settings, setup_logging
from app.errors import (
    BasisSizeError,
    ConfigurationError,
    DimensionMismatchError,
    InvalidConstraintError,
    SobolOptError,
    UnknownObjectiveError,
)
from app.services import experiments
from app.services.constraints import SobolConstraint, compile_constraints, experiment_preset
from app.services.legendre_basis import BasisConfig
from app.services.subproblem import Certifier, History
from app.services.qcqp_solver import SolveStatus
from app.services.testbed import OBJECTIVES, get_objective_spec

setup_logging()
logger = logging.getLogger(__name__)

VERSION = "1.0.0"


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan handler"""
    logger.info("🚀 Sobol-Constrained Optimizer starting up...")
    logger.info(f"📍 API Base URL: {settings.API_BASE_URL}")
    logger.info(f"⚙️ D={settings.DEGREE}, budget={settings.BUDGET_SOLVES}, workers={settings.MAX_WORKERS}")
    yield
    logger.info("👋 Sobol-Constrained Optimizer shutting down...")


app = FastAPI(
    title="Sobol-Constrained Optimizer API",
    description="Derivative-free global minimization with Sobol-index constraints",
    version=VERSION,
    lifespan=lifespan
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _json_float(value: float) -> Union[float, str]:
    """JSON has no infinities; they travel as the strings 'inf' / '-inf'"""
    value = float(value)
    if np.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


# ===========================================
# REQUEST MODELS
# ===========================================

class SensitivityRequest(BaseModel):
    objective: str = "rosenbrock3"
    n_base: int = Field(default=4096, ge=2, le=2 ** 20)
    seed: int = 0
    d: Optional[int] = Field(default=None, ge=1)

    @field_validator("objective")
    @classmethod
    def known_objective(cls, value):
        try:
            get_objective_spec(value)
        except UnknownObjectiveError as exc:
            raise ValueError(str(exc)) from exc
        return value


class CertifyRequest(BaseModel):
    d: int = Field(ge=1)
    degree: int = Field(default_factory=lambda: settings.DEGREE, ge=1)
    preset: Optional[Literal["A", "B", "C", "D"]] = None
    constraints: List[SobolConstraint] = Field(default_factory=list)
    points: List[List[float]] = Field(min_length=1)
    values: List[float] = Field(min_length=1)
    query: List[float]

    @model_validator(mode="after")
    def check_shapes(self):
        if self.preset is not None and self.constraints:
            raise ValueError("give either preset or constraints, not both")
        if self.preset is not None and self.d != 3:
            raise ValueError("presets A-D are defined for d = 3")
        if len(self.points) != len(self.values):
            raise ValueError(f"{len(self.points)} points but {len(self.values)} values")
        if any(len(p) != self.d for p in self.points) or len(self.query) != self.d:
            raise ValueError(f"every point and the query must have {self.d} coordinates")
        if any(abs(v) > 1.0 for p in [*self.points, self.query] for v in p):
            raise ValueError("points and query must lie in the canonical box [-1, 1]^d")
        return self


# ===========================================
# HEALTH & INFO ROUTES
# ===========================================

@app.get("/")
async def root():
    """Root endpoint - API information"""
    return {
        "name": "Sobol-Constrained Optimizer API",
        "version": VERSION,
        "status": "running",
        "objectives": sorted(OBJECTIVES),
        "endpoints": {
            "experiments": ["/experiments/presets", "/experiments/run"],
            "analysis": ["/sensitivity", "/certify"],
            "health": "/health"
        }
    }


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "timestamp": datetime.now().isoformat(),
    }


# ===========================================
# EXPERIMENT ENDPOINTS
# ===========================================

@app.get("/experiments/presets")
async def list_presets():
    """Constraint lists of experiments A-D on the 3D Rosenbrock testbed"""
    return {
        tag: [c.model_dump() for c in experiment_preset(tag)]
        for tag in ("A", "B", "C", "D")
    }


@app.post("/experiments/run")
async def run_experiment(spec: experiments.ExperimentSpec):
    """Run every seed of an experiment and return per-seed rows plus medians"""
    logger.info(f"🧪 Experiment request: {spec.label}, {len(spec.seeds)} seeds")
    results = await run_in_threadpool(experiments.run_experiment, spec)
    summary = experiments.summarize(results)
    return {
        "experiment": spec.label,
        "runs": [
            {
                "seed": r.seed,
                "n_eval": r.n_eval,
                "m_best": r.m_best,
                "solves_used": r.solves_used,
                "termination": r.termination.value,
                "x_best": r.x_best.tolist() if r.x_best is not None else None,
            }
            for r in results
        ],
        "summary": summary,
    }


# ===========================================
# ANALYSIS ENDPOINTS
# ===========================================

def _estimate(request: SensitivityRequest):
    try:
        return experiments.run_sensitivity(request.objective, request.n_base, request.seed, request.d)
    except DimensionMismatchError as exc:
        raise ConfigurationError(str(exc)) from exc


@app.post("/sensitivity")
async def sensitivity(request: SensitivityRequest):
    """Saltelli first-order and total indices with standard errors"""
    est = await run_in_threadpool(_estimate, request)
    return {
        "objective": request.objective,
        "n_base": est.n_base,
        "total_evals": est.total_evals,
        "variance": est.variance,
        "first_order": est.first_order.tolist(),
        "total": est.total.tolist(),
        "first_order_se": est.first_order_se.tolist(),
        "total_se": est.total_se.tolist(),
    }


def _certify(request: CertifyRequest) -> dict:
    cfg = BasisConfig(d=request.d, D=request.degree)
    constraints = experiment_preset(request.preset) if request.preset else request.constraints
    try:
        certifier = Certifier(compile_constraints(constraints, cfg), cfg)
    except (InvalidConstraintError, BasisSizeError) as exc:
        raise ConfigurationError(str(exc)) from exc
    history = History.from_arrays(np.array(request.points), np.array(request.values))
    bound = certifier.lower_bound(np.array(request.query, dtype=float), history)
    improving = bound.status != SolveStatus.INFEASIBLE and bound.value < history.best
    return {
        "lower_bound": _json_float(bound.value),
        "status": bound.status.value,
        "incumbent": history.best,
        "improving": improving,
    }


@app.post("/certify")
async def certify(request: CertifyRequest):
    """Lower bound m(x) at one query point for a given history"""
    return await run_in_threadpool(_certify, request)


# ===========================================
# ERROR HANDLERS
# ===========================================

@app.exception_handler(ConfigurationError)
async def configuration_error_handler(request: Request, exc: ConfigurationError):
    logger.warning(f"Rejected request to {request.url.path}: {exc}")
    return JSONResponse(
        status_code=400,
        content={"detail": str(exc)}
    )


@app.exception_handler(SobolOptError)
async def sobolopt_error_handler(request: Request, exc: SobolOptError):
    logger.error(f"❌ {type(exc).__name__} on {request.url.path}: {exc}")
    return JSONResponse(
        status_code=500,
        content={"detail": str(exc)}
    )


# ===========================================
# RUN APPLICATION
# ===========================================

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app.main:app",
        host="0.0.0.0",
        port=8000,
    )
