"""GAN and QC-AAN training: alternating generator/discriminator Adam updates
with a pluggable noise source.

The quantum variant feeds circuit-sampled bitstrings to the generator and
periodically pauses the adversarial loop to retrain the circuit: the
discriminator's penultimate activations on a real batch are squashed through
a sigmoid into per-bit Bernoulli probabilities, bitstring targets are drawn,
and the circuit chases them under the Sinkhorn loss for a fixed number of
SPSA iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .classify import ClassificationReport, evaluate, fit_logistic, predict_proba
from .data import TabularDataset, train_test_split
from .neuralnet import (AdamState, NetParams, adam_step, backprop,
                        backprop_from_output, build_discriminator_spec,
                        build_generator_spec, forward)
from .quantum import (BitstringBatch, CircuitParams, QcbmTrainConfig,
                      ring_ansatz, sample_bitstrings, simulate, train_qcbm)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class GaussianNoise:
    latent_dim: int
    kind: str = "gaussian"

    def draw(self, m: int, rng) -> np.ndarray:
        return rng.standard_normal((m, self.latent_dim))


@dataclass
class QcbmNoise:
    ansatz: object
    params: CircuitParams
    kind: str = "qcbm"

    @property
    def latent_dim(self) -> int:
        return self.ansatz.q

    def draw(self, m: int, rng) -> np.ndarray:
        dist = simulate(self.ansatz, self.params)
        seed = int(rng.integers(0, 2 ** 31))
        return sample_bitstrings(dist, m, seed=seed).bits.astype(float)


def make_noise_source(kind: str, q: int, layers: int = 2, seed: int = 0):
    if kind == "gaussian":
        return GaussianNoise(latent_dim=q)
    if kind == "qcbm":
        ansatz = ring_ansatz(q, layers)
        return QcbmNoise(ansatz=ansatz, params=CircuitParams.random(ansatz, seed=seed))
    raise ValueError(f"unknown noise source kind {kind!r}")


def latent_targets(penultimate_activations: np.ndarray, seed: int = 0) -> BitstringBatch:
    """Bernoulli bitstrings with per-entry p = sigmoid(activation)."""
    acts = np.atleast_2d(np.asarray(penultimate_activations, dtype=float))
    if not np.isfinite(acts).all():
        raise ValueError("non-finite activations")
    p = expit(acts)
    rng = np.random.default_rng(seed)
    return BitstringBatch((rng.random(p.shape) < p).astype(np.uint8))


@dataclass
class QcAanConfig:
    epochs: int = 300
    batch_size: int = 64
    refresh_period: int = 5   # epochs between circuit refreshes
    qcbm_iters: int = 20      # SPSA steps per refresh
    qcbm_batch: int = 512
    sinkhorn_epsilon: float = 1.0
    sinkhorn_max_iters: int = 200
    qcbm_step_size: float = 0.5
    qcbm_perturbation: float = 0.1
    qcbm_stability: float = 10.0
    lr: float = 0.001
    disc_steps: int = 1  # discriminator updates per batch
    gen_steps: int = 1   # generator updates per batch
    seed: int = 0
    simple_architecture: bool = False
    architecture_rule: str = "doubling"

    def __post_init__(self):
        if self.refresh_period < 1:
            raise ValueError("refresh_period must be >= 1")
        if self.qcbm_iters < 0:
            raise ValueError("qcbm_iters must be >= 0")
        if self.disc_steps < 1 or self.gen_steps < 1:
            raise ValueError("update ratio needs at least one step per side")


@dataclass
class TrainingHistory:
    d_losses: list = field(default_factory=list)
    g_losses: list = field(default_factory=list)
    qcbm_refreshes: list = field(default_factory=list)  # (epoch, loss_trace)

    def check_complete(self, epochs: int):
        assert len(self.d_losses) == len(self.g_losses) == epochs


@dataclass
class TrainedGenerator:
    generator_spec: object
    generator_params: NetParams
    discriminator_spec: object
    discriminator_params: NetParams
    noise: object
    history: TrainingHistory
    config: QcAanConfig


def train(minority: np.ndarray, noise, config: QcAanConfig) -> TrainedGenerator:
    """Adversarial training on minority-class rows (scaled to [0, 1]).

    Per batch: one discriminator Adam step on real-vs-fake BCE, then one
    generator step on the non-saturating objective.  With a qcbm noise
    source, every ``refresh_period`` epochs the circuit is retrained for
    ``qcbm_iters`` SPSA iterations toward latent targets drawn from the
    discriminator's penultimate layer on a real batch.
    """
    minority = np.atleast_2d(np.asarray(minority, dtype=float))
    n, f = minority.shape
    q = noise.latent_dim
    g_spec = build_generator_spec(f, q, simple=config.simple_architecture,
                                  rule=config.architecture_rule)
    d_spec = build_discriminator_spec(f, q, simple=config.simple_architecture,
                                      rule=config.architecture_rule)

    root = np.random.SeedSequence(config.seed)
    init_g, init_d, loop_seed, refresh_seed = root.generate_state(4)
    g_params = NetParams.initialize(g_spec, seed=int(init_g))
    d_params = NetParams.initialize(d_spec, seed=int(init_d))
    g_state = AdamState.initialize(g_params, lr=config.lr)
    d_state = AdamState.initialize(d_params, lr=config.lr)
    rng = np.random.default_rng(int(loop_seed))
    refresh_rng = np.random.default_rng(int(refresh_seed))

    history = TrainingHistory()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        d_batch_losses, g_batch_losses = [], []
        for start in range(0, n, config.batch_size):
            real = minority[order[start:start + config.batch_size]]
            m = real.shape[0]

            for _ in range(config.disc_steps):
                z = noise.draw(m, rng)
                fake = forward(g_spec, g_params, z).output
                stacked = np.vstack([real, fake])
                labels = np.concatenate([np.ones(m), np.zeros(m)])
                d_grads = backprop(d_spec, d_params, stacked, "gan_discriminator", labels)
                d_params, d_state = adam_step(d_params, d_grads, d_state)

            for _ in range(config.gen_steps):
                z2 = noise.draw(m, rng)
                fake2 = forward(g_spec, g_params, z2).output
                through_d = backprop(d_spec, d_params, fake2, "gan_generator")
                g_grads = backprop_from_output(g_spec, g_params, z2, through_d.d_input)
                g_params, g_state = adam_step(g_params, g_grads, g_state)

            d_batch_losses.append(d_grads.loss)
            g_batch_losses.append(through_d.loss)

        d_loss = float(np.mean(d_batch_losses))
        g_loss = float(np.mean(g_batch_losses))
        if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch}: d={d_loss}, g={g_loss}")
        history.d_losses.append(d_loss)
        history.g_losses.append(g_loss)

        wants_refresh = (noise.kind == "qcbm" and config.qcbm_iters > 0
                         and (epoch + 1) % config.refresh_period == 0)
        if wants_refresh:
            batch = minority[refresh_rng.permutation(n)[: min(config.batch_size, n)]]
            penult = forward(d_spec, d_params, batch).penultimate
            targets = latent_targets(penult, seed=int(refresh_rng.integers(0, 2 ** 31)))
            result = train_qcbm(
                noise.ansatz, noise.params, targets,
                QcbmTrainConfig(iters=config.qcbm_iters,
                                batch_size=config.qcbm_batch,
                                epsilon=config.sinkhorn_epsilon,
                                sinkhorn_max_iters=config.sinkhorn_max_iters,
                                step_size=config.qcbm_step_size,
                                perturbation=config.qcbm_perturbation,
                                stability=config.qcbm_stability,
                                seed=int(refresh_rng.integers(0, 2 ** 31))))
            noise.params = result.params
            history.qcbm_refreshes.append((epoch, result.loss_trace))

    history.check_complete(config.epochs)
    return TrainedGenerator(g_spec, g_params, d_spec, d_params, noise, history, config)


def generate_synthetic(model: TrainedGenerator, count: int, seed: int = 0) -> np.ndarray:
    """count generator outputs from fresh noise; relu output keeps them >= 0."""
    f = model.generator_spec.output_dim
    if count == 0:
        return np.empty((0, f))
    rng = np.random.default_rng(seed)
    z = model.noise.draw(count, rng)
    return forward(model.generator_spec, model.generator_params, z).output


def distinguishability_report(samples_a: np.ndarray, samples_b: np.ndarray,
                              seed: int = 0) -> ClassificationReport:
    """Can plain logistic regression tell two sample sets apart?

    Labels are a=0, b=1; 75/25 stratified split; the report is computed on
    the holdout quarter.  Accuracy near 0.5 means indistinguishable.
    """
    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample sets must share width")
    features = np.vstack([a, b])
    labels = np.concatenate([np.zeros(a.shape[0], dtype=int),
                             np.ones(b.shape[0], dtype=int)])
    ds = TabularDataset("distinguishability", features, labels)
    split = train_test_split(ds, 0.75, seed=seed)
    model = fit_logistic(split.train.features, split.train.labels)
    scores = predict_proba(model, split.test.features)
    return evaluate(split.test.labels, scores)
