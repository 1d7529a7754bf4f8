"""Pydantic request/response models for the service API.

The request models mirror the experiment config JSON one to one, so a config
file can be posted as a request body unchanged.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from .experiments import (
    ClassifierConfig,
    EncoderConfig,
    ExperimentConfig,
)
from .lfd import DroConfig
from .noise import NoiseSpec
from .training import TrainConfig


class NoiseModel(BaseModel):
    sigma_multiplier: float = Field(default=0.0, ge=0)
    edge_removal_rate: float = Field(default=0.0, ge=0, lt=1)
    seed: int = 0

    def to_spec(self) -> NoiseSpec:
        return NoiseSpec(**self.model_dump())


class DroModel(BaseModel):
    radii: Optional[Union[float, list[float]]] = None
    cost_kind: Literal["euclidean", "squared_euclidean"] = "euclidean"
    solver_tolerance: float = Field(default=1e-9, gt=0)
    radius_rule: Literal["absolute", "median_fraction"] = "median_fraction"
    radius_fraction: float = Field(default=0.1, ge=0)

    def to_config(self) -> DroConfig:
        radii = self.radii
        if isinstance(radii, list):
            radii = tuple(radii)
        return DroConfig(radii=radii, cost_kind=self.cost_kind,
                         solver_tolerance=self.solver_tolerance,
                         radius_rule=self.radius_rule,
                         radius_fraction=self.radius_fraction)


class TrainModel(BaseModel):
    learning_rate: float = Field(default=1e-4, gt=0)
    epochs: int = Field(default=200, ge=1)
    miniset_size: Optional[int] = Field(default=None, ge=2)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_epsilon: float = Field(default=1e-8, gt=0)
    dro: DroModel = Field(default_factory=DroModel)
    seed: int = 0
    objective_sign: Literal[1, -1] = 1
    fixed_minisets: bool = False

    def to_config(self) -> TrainConfig:
        data = self.model_dump()
        data["dro"] = self.dro.to_config()
        return TrainConfig(**data)


class EncoderModel(BaseModel):
    hidden: int = Field(default=16, ge=1)
    embedding: int = Field(default=16, ge=2)
    dropout: float = Field(default=0.5, ge=0, lt=1)

    def to_config(self) -> EncoderConfig:
        return EncoderConfig(**self.model_dump())


class ClassifierModel(BaseModel):
    kind: Literal["softmax", "knn", "kde", "label_propagation"] = "softmax"
    head_epochs: int = Field(default=500, ge=0)
    head_lr: float = Field(default=1e-2, gt=0)
    head_hidden: int = Field(default=16, ge=1)
    k: int = Field(default=5, ge=1)
    bandwidth: Optional[float] = Field(default=None, gt=0)
    iterations: int = Field(default=50, ge=1)

    def to_config(self) -> ClassifierConfig:
        return ClassifierConfig(**self.model_dump())


class ExperimentModel(BaseModel):
    dataset: str
    shots: int = Field(default=5, ge=1)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    train: TrainModel = Field(default_factory=TrainModel)
    encoder: EncoderModel = Field(default_factory=EncoderModel)
    classifier: ClassifierModel = Field(default_factory=ClassifierModel)
    repetitions: int = Field(default=3, ge=1)
    base_seed: int = 0
    mode: Literal["vanilla", "drgl"] = "drgl"

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            dataset=self.dataset,
            shots=self.shots,
            noise=self.noise.to_spec(),
            train=self.train.to_config(),
            encoder=self.encoder.to_config(),
            classifier=self.classifier.to_config(),
            repetitions=self.repetitions,
            base_seed=self.base_seed,
            mode=self.mode,
        )


class SweepSpec(BaseModel):
    noise_grid: list[NoiseModel] = Field(default_factory=list)
    modes: list[Literal["vanilla", "drgl"]] = Field(default_factory=lambda: ["vanilla", "drgl"])


class SweepModel(ExperimentModel):
    sweep: SweepSpec = Field(default_factory=SweepSpec)


class InspectRequest(BaseModel):
    path: str


class InspectResponse(BaseModel):
    name: str
    n: int
    d: int
    M: int
    undirected_pairs: int
    directed_edges: int
    feature_std: float
    observed: int
    unobserved: int
    test: int


class LfdRequest(BaseModel):
    embeddings: list[list[float]]
    labels: list[int]
    M: Optional[int] = None
    dro: DroModel = Field(default_factory=DroModel)
    return_gradients: bool = False


class LfdResponse(BaseModel):
    total_margin: float
    worst_case_risk: float
    weights: list[list[float]]
    plans: list[list[list[float]]]
    duals: list[float]
    radii: list[float]
    cost_gradients: Optional[list[list[list[float]]]] = None
    embedding_gradient: Optional[list[list[float]]] = None


class TableRowModel(BaseModel):
    model: str
    classifier: str
    noise: str
    accuracies: list[float]
    mean: float


class RunResponse(BaseModel):
    table: list[TableRowModel]
    report_lines: list[dict]
    timing_lines: list[dict]
    checkpoint_b64: Optional[str] = None
    viz_csv: Optional[str] = None


class SelftestCheck(BaseModel):
    name: str
    passed: bool
    detail: str


class SelftestResponse(BaseModel):
    passed: bool
    checks: list[SelftestCheck]


class HealthResponse(BaseModel):
    status: str
    version: str
