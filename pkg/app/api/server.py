from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import Literal
from app.errors import BalancerError, ConfigError, DomainError
from app.models.schemas import ExperimentConfig, PackModel, ScalingSettings, ScheduleResult, SummaryReport
from app.services.experiment import run_experiment, summarize_experiment
from app.services.scaling import scaling_for_pack
from app.services.scheduler import solve_schedule

# Initialize FastAPI app
app = FastAPI(
    title="Balancer API",
    description="Optimal current scheduling for parallel buck-regulated battery modules",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class SolveRequest(BaseModel):
    """Request model for a one-shot schedule."""
    pack: PackModel
    load_ohms: float = Field(gt=0, description="External load resistance in ohms")
    scaling: ScalingSettings = ScalingSettings()
    solver: Literal["linprog", "analytic"] = "linprog"


def _http_error(e: BalancerError) -> HTTPException:
    status = 422 if isinstance(e, (DomainError, ConfigError)) else 500
    return HTTPException(status_code=status, detail=str(e))


@app.get("/")
async def root():
    """Root endpoint - API information."""
    return {
        "message": "Balancer API",
        "version": "1.0.0",
        "docs": "/docs",
        "redoc": "/redoc"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "service": "balancer-api"}


@app.post("/api/solve", response_model=ScheduleResult)
def solve(request: SolveRequest):
    """
    Solve the scheduling LP for a pack at a known load.

    - **pack**: modules with id, ocv, impedance and soc
    - **load_ohms**: external load
    - **scaling**: equal, discharge_soc, charge_soc or explicit betas
    """
    try:
        scaling = scaling_for_pack(request.pack, request.scaling.mode, request.scaling.betas)
        return solve_schedule(
            request.pack.ocvs, request.pack.impedances, scaling, request.load_ohms, request.solver
        )
    except BalancerError as e:
        raise _http_error(e)


@app.post("/api/simulate", response_model=SummaryReport)
def simulate(cfg: ExperimentConfig):
    """
    Run an experiment in memory and return its summary.

    Telemetry is not persisted; use the `simulate` CLI command for CSV output.
    """
    try:
        records = run_experiment(cfg)
        return summarize_experiment(cfg, records)
    except BalancerError as e:
        raise _http_error(e)
