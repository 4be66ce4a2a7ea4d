"""Experiment configuration: JSON-loadable, fully defaulted, content-hashed.

The config hash keys the results store, so any field that changes the
numbers changes the hash and forces a fresh run directory.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

OUTPUT_ROOT_ENV = "QCAAN_OUT"

DEFAULT_STRATEGIES = ["none", "random", "smote", "qcaan"]


class ConfigError(ValueError):
    pass


@dataclass
class DatasetSpec:
    name: str
    path: str
    label_column: str
    positive_label: str
    delimiter: str = ","


@dataclass
class ExperimentConfig:
    datasets: list = field(default_factory=list)
    strategies: list = field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    seeds: list = field(default_factory=lambda: [0])

    # quantum noise source
    q: int = 16
    qcbm_layers: int = 2
    qcbm_iters: int = 20
    qcbm_batch: int = 512
    refresh_period: int = 5
    sinkhorn_epsilon: float = 1.0
    sinkhorn_max_iters: int = 200
    qcbm_step_size: float = 0.5
    qcbm_perturbation: float = 0.1
    qcbm_stability: float = 10.0

    # adversarial training
    epochs: int = 300
    batch_size: int = 64
    lr: float = 0.001
    architecture_rule: str = "doubling"

    # preprocessing and augmentation
    train_fraction: float = 0.75
    smote_k: int = 5
    target_ratio: float = 1.0
    metadata_cap: int = 20000
    min_features: int = 16

    # classifiers
    l2: float = 1.0
    logistic_max_iters: int = 100
    logistic_tol: float = 1e-8
    mlp_epochs: int = 100
    mlp_lr: float = 0.001
    mlp_batch_size: int = 32

    # second experiment
    exp2_dataset: str = ""          # defaults to the first configured dataset
    exp2_samples: int = 2000        # per model, for the distinguishability check
    exp2_epochs: int = 0            # 0 = reuse `epochs`

    # analysis
    bootstrap_replications: int = 1000
    hdi_mass: float = 0.95
    p_adjust: str = "none"
    analysis_baseline: str = "smote"
    analysis_contender: str = "qcaan"
    gbt_rounds: int = 200
    gbt_max_depth: int = 3
    gbt_learning_rate: float = 0.1
    importance_repeats: int = 20
    cp_grid_size: int = 50
    cp_top_features: int = 3

    # output
    output_dir: str = ""
    plot_format: str = "svg"

    def __post_init__(self):
        if self.q < 1:
            raise ConfigError("q must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.strategies:
            raise ConfigError("need at least one strategy")
        self.datasets = [ds if isinstance(ds, DatasetSpec) else DatasetSpec(**ds)
                         for ds in self.datasets]
        if not self.output_dir:
            self.output_dir = os.environ.get(OUTPUT_ROOT_ENV, "runs")

    @classmethod
    def dev(cls, **overrides) -> "ExperimentConfig":
        """Desk-scale profile: 8 qubits, exact simulation, short training."""
        base = dict(q=8, epochs=30, qcbm_iters=10, qcbm_batch=256, exp2_samples=400,
                    bootstrap_replications=1000)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        profile = raw.pop("profile", None)
        if profile == "dev":
            return cls.dev(**raw)
        if profile not in (None, "full"):
            raise ConfigError(f"unknown profile {profile!r}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        # output_dir and plot_format do not affect the numbers
        payload = self.to_dict()
        payload.pop("output_dir")
        payload.pop("plot_format")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def run_dir(self) -> str:
        return os.path.join(self.output_dir, self.config_hash())
