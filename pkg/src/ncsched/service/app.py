"""FastAPI service exposing the simulator, oracle, search, and training.

Compute endpoints (riccati, oracle, search, eval, allocate) run inline.
Training endpoints return a job record: with wait=true the request blocks
until the run finishes, otherwise poll GET /jobs/{id}.  A deployed
scheduler is served by POST /allocate: given the stacked estimate-error
vector, it returns the channel subset a trained policy would grant.
"""

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__, dqn
from ..baselines import PeriodicSchedule, exhaustive_periodic_search, expected_schedule_loss, schedule_error_term
from ..control import riccati_backward
from ..env import build_gain_schedules
from ..errors import (
    BudgetExceeded,
    CheckpointMismatch,
    ConfigError,
    ContractViolation,
    NumericalFailure,
    TrainingFailure,
)
from ..experiments import evaluate_policy, load_policy, run_monte_carlo, run_training
from ..plants import spectral_radius
from ..subsets import action_to_subset
from . import schemas
from .jobs import JobRegistry

_BAD_REQUEST = (ConfigError, ContractViolation, BudgetExceeded, CheckpointMismatch)
_SERVER_ERROR = (NumericalFailure, TrainingFailure)


def _error_handler(status_code):
    async def handle(request: Request, exc: Exception):
        return JSONResponse(status_code=status_code, content={"detail": str(exc)})

    return handle


def create_app(max_job_workers=1):
    app = FastAPI(title="ncsched", version=__version__)
    jobs = JobRegistry(max_workers=max_job_workers)
    app.state.jobs = jobs

    for exc_type in _BAD_REQUEST:
        app.add_exception_handler(exc_type, _error_handler(400))
    for exc_type in _SERVER_ERROR:
        app.add_exception_handler(exc_type, _error_handler(500))

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", service="ncsched", version=__version__)

    @app.post("/riccati", response_model=schemas.RiccatiResponse)
    def riccati(req: schemas.RiccatiRequest):
        from ..config import subsystem_from_dict

        spec = subsystem_from_dict(req.subsystem.model_dump(), "subsystem")
        sched = riccati_backward(spec, req.horizon)
        resp = schemas.RiccatiResponse(
            horizon=req.horizon,
            S0=sched.S[0].tolist(),
            L0=sched.L[0].tolist(),
            Gamma0=sched.Gamma[0].tolist(),
            spectral_radius=spectral_radius(spec.A),
        )
        if req.include_sequences:
            resp.S = [m.tolist() for m in sched.S]
            resp.L = [m.tolist() for m in sched.L]
            resp.Gamma = [m.tolist() for m in sched.Gamma]
        return resp

    def _env_from_model(model):
        from ..config import env_from_dict

        return env_from_dict(model.model_dump(), "env")

    @app.post("/oracle", response_model=schemas.OracleResponse)
    def oracle(req: schemas.OracleRequest):
        cfg = _env_from_model(req.env)
        schedule = PeriodicSchedule(tuple(tuple(s) for s in req.schedule.sequence))
        schedule.validate(cfg.n_subsystems, cfg.n_channels)
        gains = build_gain_schedules(cfg)
        total = expected_schedule_loss(cfg, gains, schedule)
        error = schedule_error_term(cfg, gains, schedule)
        return schemas.OracleResponse(
            expected_loss=total,
            baseline_loss=total - error,
            error_term=error,
            period=schedule.period,
        )

    @app.post("/search", response_model=schemas.SearchResponse)
    def search(req: schemas.SearchRequest):
        cfg = _env_from_model(req.env)
        gains = build_gain_schedules(cfg)
        result = exhaustive_periodic_search(
            cfg, gains, p_min=req.p_min, p_max=req.p_max, budget=req.budget
        )
        return schemas.SearchResponse(
            sequence=[list(s) for s in result.schedule.sequence],
            expected_loss=result.expected_loss,
            candidates=result.candidates,
            per_period=[
                schemas.PeriodBest(
                    period=p,
                    sequence=[list(s) for s in sched.sequence],
                    expected_loss=loss,
                )
                for p, sched, loss in result.per_period
            ],
        )

    @app.post("/train", response_model=schemas.JobModel)
    def train(req: schemas.TrainRequest):
        cfg = req.config.to_core()

        def work():
            result = run_training(cfg, out_dir=req.output_dir, run_index=req.run_index)
            final = result.metrics[-1]
            return {
                "out_dir": str(result.out_dir),
                "csv": str(result.csv_path),
                "checkpoint": str(result.checkpoint_path),
                "epochs": len(result.metrics),
                "final_loss": final.control_loss,
                "final_running_avg_loss": final.running_avg_loss,
            }

        job = jobs.run_sync("train", work) if req.wait else jobs.submit("train", work)
        return schemas.JobModel(**job.as_dict())

    @app.post("/mc", response_model=schemas.JobModel)
    def mc(req: schemas.McRequest):
        cfg = req.config.to_core()

        def work():
            result = run_monte_carlo(cfg, out_dir=req.output_dir, workers=req.workers)
            return {
                "out_dir": str(result.out_dir),
                "curve_csv": str(result.curve_path),
                "runs_csv": str(result.runs_path),
                "runs": int(result.losses.shape[0]),
                "epochs": int(result.losses.shape[1]),
                "final_mean_loss": float(result.mean[-1]),
                "min_mean_loss": float(result.mean.min()),
            }

        job = jobs.run_sync("mc", work) if req.wait else jobs.submit("mc", work)
        return schemas.JobModel(**job.as_dict())

    @app.get("/jobs/{job_id}", response_model=schemas.JobModel)
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such job: {job_id}")
        return schemas.JobModel(**job.as_dict())

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_policy(req: schemas.EvalRequest):
        cfg = req.config.to_core()
        result = evaluate_policy(
            cfg, req.checkpoint, runs=req.runs, episode_log_dir=req.episode_log_dir
        )
        return schemas.EvalResponse(
            mean_loss=result.mean_loss,
            allocation=[float(a) for a in result.allocation],
            losses=[float(l) for l in result.losses],
            spectral_radii=[spectral_radius(spec.A) for spec in cfg.env.specs],
        )

    @app.post("/allocate", response_model=schemas.AllocateResponse)
    def allocate(req: schemas.AllocateRequest):
        params, meta = load_policy(req.checkpoint)
        if len(req.error_vector) != params.obs_dim:
            raise ContractViolation(
                f"error vector has length {len(req.error_vector)}, policy expects "
                f"{params.obs_dim}"
            )
        q_values = dqn.forward(params, req.error_vector)
        action = int(q_values.argmax())
        subset = action_to_subset(
            action, meta["env"]["n_subsystems"], meta["env"]["n_channels"]
        )
        return schemas.AllocateResponse(
            action=action, subset=list(subset), q_values=[float(q) for q in q_values]
        )

    return app


app = create_app()
