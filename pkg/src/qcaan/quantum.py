"""Exact statevector simulation of a layered parameterized circuit, Born-rule
bitstring sampling, Sinkhorn divergence between bitstring batches, and
gradient-free circuit training via SPSA.

The circuit acts as a trainable noise source: measuring it yields bitstrings
whose distribution is pushed (by minimizing a Sinkhorn divergence with
Hamming cost) toward a target batch of bitstrings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

MAX_QUBITS = 20  # statevector memory guard (2^20 complex doubles = 16 MiB)

_NORM_TOL = 1e-10


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class GateOp:
    kind: str         # "ry" | "rz" | "cz"
    targets: tuple    # one qubit for rotations, an adjacent pair for cz
    param_index: int | None = None


@dataclass(frozen=True)
class CircuitAnsatz:
    """Layered ring ansatz: per block one RY and one RZ on every qubit, then a
    ring of controlled-Z entanglers over adjacent qubits; a final rotation
    layer closes the circuit.  Parameter count is 2q(L+1)."""

    q: int
    layers: int
    gate_plan: tuple = ()

    def __post_init__(self):
        if self.q < 1:
            raise CircuitError("need at least one qubit")
        for op in self.gate_plan:
            if op.param_index is not None and op.param_index >= self.param_count:
                raise CircuitError(f"parameter index {op.param_index} out of range")

    @property
    def param_count(self) -> int:
        return sum(1 for op in self.gate_plan if op.param_index is not None)


def ring_ansatz(q: int, layers: int = 2) -> CircuitAnsatz:
    plan = []
    pidx = 0
    if q == 1:
        pairs = []
    elif q == 2:
        pairs = [(0, 1)]  # the two ring edges coincide; a doubled CZ is identity
    else:
        pairs = [(i, (i + 1) % q) for i in range(q)]
    for _ in range(layers):
        for qubit in range(q):
            plan.append(GateOp("ry", (qubit,), pidx)); pidx += 1
            plan.append(GateOp("rz", (qubit,), pidx)); pidx += 1
        for pair in pairs:
            plan.append(GateOp("cz", pair))
    for qubit in range(q):
        plan.append(GateOp("ry", (qubit,), pidx)); pidx += 1
        plan.append(GateOp("rz", (qubit,), pidx)); pidx += 1
    return CircuitAnsatz(q=q, layers=layers, gate_plan=tuple(plan))


@dataclass
class CircuitParams:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not np.isfinite(self.theta).all():
            raise CircuitError("non-finite circuit parameters")

    @classmethod
    def zeros(cls, ansatz: CircuitAnsatz) -> "CircuitParams":
        return cls(np.zeros(ansatz.param_count))

    @classmethod
    def random(cls, ansatz: CircuitAnsatz, seed: int = 0, scale: float = np.pi) -> "CircuitParams":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-scale, scale, size=ansatz.param_count))


@dataclass
class BornDistribution:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > _NORM_TOL:
            raise CircuitError(f"state norm {norm} deviates from 1 beyond {_NORM_TOL}")

    @property
    def q(self) -> int:
        return int(np.log2(self.amplitudes.size))

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()


@dataclass
class BitstringBatch:
    bits: np.ndarray  # (m, q) of {0, 1}

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise CircuitError("bitstring batch must be a 2-D matrix")
        if self.bits.size and self.bits.max() > 1:
            raise CircuitError("bitstring entries must be 0 or 1")

    @property
    def m(self) -> int:
        return self.bits.shape[0]

    @property
    def q(self) -> int:
        return self.bits.shape[1]


def simulate(ansatz: CircuitAnsatz, params: CircuitParams) -> BornDistribution:
    """Apply the circuit to |0...0> and return the exact amplitude vector.

    Basis-state index convention: qubit 0 is the most significant bit, so
    amplitude index b corresponds to the bitstring given by the binary
    expansion of b over q digits.
    """
    q = ansatz.q
    if q > MAX_QUBITS:
        raise CircuitError(f"{q} qubits exceeds the {MAX_QUBITS}-qubit simulator guard")
    if params.theta.shape != (ansatz.param_count,):
        raise CircuitError(
            f"expected {ansatz.param_count} parameters, got {params.theta.shape[0]}")

    psi = np.zeros((2,) * q, dtype=complex)
    psi[(0,) * q] = 1.0
    for op in ansatz.gate_plan:
        if op.kind == "cz":
            i, j = op.targets
            idx = [slice(None)] * q
            idx[i] = 1
            idx[j] = 1
            psi[tuple(idx)] *= -1.0
        else:
            theta = params.theta[op.param_index]
            if op.kind == "ry":
                c, s = np.cos(theta / 2), np.sin(theta / 2)
                gate = np.array([[c, -s], [s, c]], dtype=complex)
            elif op.kind == "rz":
                gate = np.array([[np.exp(-0.5j * theta), 0],
                                 [0, np.exp(0.5j * theta)]], dtype=complex)
            else:
                raise CircuitError(f"unknown gate kind {op.kind!r}")
            (target,) = op.targets
            psi = np.moveaxis(psi, target, 0)
            shape = psi.shape
            psi = (gate @ psi.reshape(2, -1)).reshape(shape)
            psi = np.moveaxis(psi, 0, target)
    return BornDistribution(psi.reshape(-1))


def sample_bitstrings(dist: BornDistribution, m: int, seed: int = 0) -> BitstringBatch:
    """Draw m i.i.d. bitstrings from the Born probabilities |amplitude|^2."""
    if m < 1:
        raise CircuitError("need at least one sample")
    rng = np.random.default_rng(seed)
    q = dist.q
    indices = rng.choice(dist.amplitudes.size, size=m, p=dist.probabilities())
    bits = (indices[:, None] >> np.arange(q - 1, -1, -1)) & 1
    return BitstringBatch(bits.astype(np.uint8))


def hamming_cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances (count of differing bits) between 0/1 rows."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a @ (1.0 - b).T + (1.0 - a) @ b.T


@dataclass
class OtResult:
    value: float
    converged: bool
    iterations: int
    marginal_error: float


def entropic_ot(x: np.ndarray, wx: np.ndarray, y: np.ndarray, wy: np.ndarray,
                epsilon: float, max_iters: int = 200, tol: float = 1e-9) -> OtResult:
    """KL-regularized optimal transport cost between weighted point clouds.

    Runs log-domain Sinkhorn fixed-point iterations on the dual potentials
    f, g and returns <f, wx> + <g, wy>, which equals the regularized cost
    min_pi <C, pi> + eps*KL(pi | wx x wy) at the fixed point.  Iterations
    stop once the unmatched marginal's L1 error drops below ``tol``.
    """
    cost = hamming_cost(x, y)
    log_wx = np.log(wx)
    log_wy = np.log(wy)
    f = np.zeros(len(wx))
    g = np.zeros(len(wy))
    err = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        f = -epsilon * logsumexp((g[None, :] - cost) / epsilon + log_wy[None, :], axis=1)
        g = -epsilon * logsumexp((f[:, None] - cost) / epsilon + log_wx[:, None], axis=0)
        # column marginals are exact after the g update; check the row side
        log_plan = (f[:, None] + g[None, :] - cost) / epsilon + log_wx[:, None] + log_wy[None, :]
        row_marginals = np.exp(logsumexp(log_plan, axis=1))
        err = float(np.abs(row_marginals - wx).sum())
        if err < tol:
            break
    value = float(f @ wx + g @ wy)
    return OtResult(value, err < tol, iterations, err)


def _weighted_support(batch: BitstringBatch):
    # the empirical measure with uniform row weights collapses to counts on
    # the distinct rows, which keeps Sinkhorn cost matrices small
    support, counts = np.unique(batch.bits, axis=0, return_counts=True)
    return support.astype(float), counts / counts.sum()


@dataclass
class SinkhornResult:
    value: float
    converged: bool
    parts: tuple  # (OT(a,b), OT(a,a), OT(b,b))


def sinkhorn_divergence_detailed(a: BitstringBatch, b: BitstringBatch,
                                 epsilon: float = 1.0, max_iters: int = 200) -> SinkhornResult:
    """Debiased entropic OT with Hamming cost and uniform weights on rows:

        S(a, b) = OT(a, b) - OT(a, a)/2 - OT(b, b)/2

    The two batches are canonically ordered internally so that S(a, b) and
    S(b, a) run through identical arithmetic and agree exactly.
    """
    if epsilon <= 0:
        raise CircuitError("epsilon must be positive")
    if a.m == 0 or b.m == 0:
        raise CircuitError("batches must be non-empty")
    if a.q != b.q:
        raise CircuitError("batches must share the qubit count")
    xa, wa = _weighted_support(a)
    xb, wb = _weighted_support(b)
    if (xa.shape, xa.tobytes(), wa.tobytes()) > (xb.shape, xb.tobytes(), wb.tobytes()):
        xa, wa, xb, wb = xb, wb, xa, wa
    ab = entropic_ot(xa, wa, xb, wb, epsilon, max_iters)
    aa = entropic_ot(xa, wa, xa, wa, epsilon, max_iters)
    bb = entropic_ot(xb, wb, xb, wb, epsilon, max_iters)
    value = ab.value - 0.5 * aa.value - 0.5 * bb.value
    return SinkhornResult(value, ab.converged and aa.converged and bb.converged,
                          (ab.value, aa.value, bb.value))


def sinkhorn_divergence(a: BitstringBatch, b: BitstringBatch,
                        epsilon: float = 1.0, max_iters: int = 200) -> float:
    result = sinkhorn_divergence_detailed(a, b, epsilon, max_iters)
    if not result.converged:
        warnings.warn("Sinkhorn iterations hit max_iters before the marginal "
                      "tolerance; returning the best iterate", RuntimeWarning)
    return result.value


@dataclass
class QcbmTrainConfig:
    """SPSA schedule: gains a_k = a/(k+A)^alpha and c_k = c/k^gamma, with the
    two perturbed loss evaluations per step sharing a sampling seed (common
    random numbers)."""

    iters: int = 200
    batch_size: int = 512
    epsilon: float = 1.0
    sinkhorn_max_iters: int = 200
    step_size: float = 0.5     # a
    perturbation: float = 0.1  # c
    stability: float = 10.0    # A
    alpha: float = 0.602
    gamma: float = 0.101
    seed: int = 0


@dataclass
class QcbmTrainResult:
    params: CircuitParams
    loss_trace: list = field(default_factory=list)
    initial_loss: float = np.nan
    final_loss: float = np.nan
    config: QcbmTrainConfig | None = None


def train_qcbm(ansatz: CircuitAnsatz, params: CircuitParams, target: BitstringBatch,
               config: QcbmTrainConfig) -> QcbmTrainResult:
    """Minimize the Sinkhorn divergence between fresh circuit samples and the
    target batch over ``config.iters`` SPSA steps.

    The loss trace records the mean of the two perturbed evaluations per
    step; initial/final losses are measured at a fixed evaluation seed so
    they are comparable.
    """
    if target.q != ansatz.q:
        raise CircuitError(f"target is {target.q}-wide, ansatz has {ansatz.q} qubits")
    theta = params.theta.copy()
    seeds = np.random.SeedSequence(config.seed).generate_state(config.iters + 1)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5b5]))

    def loss(t, sample_seed):
        dist = simulate(ansatz, CircuitParams(t))
        batch = sample_bitstrings(dist, config.batch_size, seed=int(sample_seed))
        return sinkhorn_divergence(batch, target, config.epsilon, config.sinkhorn_max_iters)

    result = QcbmTrainResult(params=CircuitParams(theta.copy()), config=config)
    result.initial_loss = loss(theta, seeds[0])
    for k in range(1, config.iters + 1):
        a_k = config.step_size / (k + config.stability) ** config.alpha
        c_k = config.perturbation / k ** config.gamma
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        loss_plus = loss(theta + c_k * delta, seeds[k])
        loss_minus = loss(theta - c_k * delta, seeds[k])
        gradient = (loss_plus - loss_minus) / (2.0 * c_k) * delta  # 1/delta == delta
        theta = theta - a_k * gradient
        result.loss_trace.append(0.5 * (loss_plus + loss_minus))
    result.final_loss = loss(theta, seeds[0]) if config.iters else result.initial_loss
    result.params = CircuitParams(theta)
    return result
