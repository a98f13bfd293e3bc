"""Pydantic request/response models for the HTTP service.

The experiment models mirror the YAML config schema field for field;
`ExperimentModel.to_core()` funnels them through the same validation as
file-based configs.
"""

from pydantic import BaseModel, Field

from ..config import experiment_from_dict

Matrix = list[list[float]]
Vector = list[float]


class SubsystemModel(BaseModel):
    name: str = ""
    A: Matrix
    B: Matrix
    C: Matrix
    W: Matrix
    V: Matrix
    x0_mean: Vector
    X0: Matrix
    Q: Matrix
    R: Matrix
    Qf: Matrix


class EnvModel(BaseModel):
    channels: int
    horizon: int
    reward_mode: str = "error_penalty"
    subsystems: list[SubsystemModel]


class DqnModel(BaseModel):
    hidden_units: int = 1024
    replay_capacity: int = 20_000
    minibatch_size: int = 32
    warmup_transitions: int = 1_000
    discount: float = 0.95
    learning_rate: float = 1e-4
    lr_decay: float = 0.001
    epsilon_rate: float = 0.9
    epsilon_floor: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


class TrainingModel(BaseModel):
    epochs: int
    monte_carlo_runs: int = 30
    checkpoint_every: int = 0
    master_seed: int


class ExperimentModel(BaseModel):
    name: str = "experiment"
    env: EnvModel
    dqn: DqnModel = Field(default_factory=DqnModel)
    training: TrainingModel
    output_dir: str | None = None

    def to_core(self):
        return experiment_from_dict(self.model_dump(), source="request")


class HealthResponse(BaseModel):
    status: str
    service: str
    version: str


class RiccatiRequest(BaseModel):
    subsystem: SubsystemModel
    horizon: int
    include_sequences: bool = False


class RiccatiResponse(BaseModel):
    horizon: int
    S0: Matrix
    L0: Matrix
    Gamma0: Matrix
    spectral_radius: float
    S: list[Matrix] | None = None
    L: list[Matrix] | None = None
    Gamma: list[Matrix] | None = None


class ScheduleModel(BaseModel):
    sequence: list[list[int]]


class OracleRequest(BaseModel):
    env: EnvModel
    schedule: ScheduleModel


class OracleResponse(BaseModel):
    expected_loss: float
    baseline_loss: float
    error_term: float
    period: int


class SearchRequest(BaseModel):
    env: EnvModel
    p_min: int = 2
    p_max: int = 11
    budget: int = 10_000_000


class PeriodBest(BaseModel):
    period: int
    sequence: list[list[int]]
    expected_loss: float


class SearchResponse(BaseModel):
    sequence: list[list[int]]
    expected_loss: float
    candidates: int
    per_period: list[PeriodBest]


class TrainRequest(BaseModel):
    config: ExperimentModel
    wait: bool = True
    output_dir: str | None = None
    run_index: int = 0


class McRequest(BaseModel):
    config: ExperimentModel
    wait: bool = True
    output_dir: str | None = None
    workers: int | None = None


class JobModel(BaseModel):
    id: str
    kind: str
    status: str
    error: str | None = None
    result: dict | None = None


class EvalRequest(BaseModel):
    config: ExperimentModel
    checkpoint: str
    runs: int = 20
    episode_log_dir: str | None = None


class EvalResponse(BaseModel):
    mean_loss: float
    allocation: list[float]
    losses: list[float]
    spectral_radii: list[float]


class AllocateRequest(BaseModel):
    checkpoint: str
    error_vector: Vector


class AllocateResponse(BaseModel):
    action: int
    subset: list[int]
    q_values: list[float]
