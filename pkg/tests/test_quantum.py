import numpy as np
import pytest
from scipy.stats import chisquare

from qcaan.quantum import (BitstringBatch, CircuitAnsatz, CircuitError,
                           CircuitParams, QcbmTrainConfig, entropic_ot,
                           hamming_cost, ring_ansatz, sample_bitstrings,
                           simulate, sinkhorn_divergence,
                           sinkhorn_divergence_detailed, train_qcbm)


def point_mass(q, bit, m=64):
    return BitstringBatch(np.full((m, q), bit, dtype=np.uint8))


class TestAnsatz:
    def test_parameter_count(self):
        for q, layers in [(1, 0), (2, 1), (3, 2), (5, 3)]:
            assert ring_ansatz(q, layers).param_count == 2 * q * (layers + 1)

    def test_entanglers_touch_ring_neighbors(self):
        ansatz = ring_ansatz(5, 2)
        for op in ansatz.gate_plan:
            if op.kind == "cz":
                i, j = op.targets
                assert j == (i + 1) % 5

    def test_two_qubit_ring_has_single_edge(self):
        czs = [op for op in ring_ansatz(2, 1).gate_plan if op.kind == "cz"]
        assert len(czs) == 1

    def test_bad_param_index_rejected(self):
        from qcaan.quantum import GateOp
        with pytest.raises(CircuitError):
            CircuitAnsatz(q=2, layers=0, gate_plan=(GateOp("ry", (0,), 5),))


class TestSimulate:
    def test_identity_circuit(self):
        ansatz = ring_ansatz(3, 2)
        dist = simulate(ansatz, CircuitParams.zeros(ansatz))
        probs = dist.probabilities()
        assert probs[0] == pytest.approx(1.0, abs=1e-12)
        assert probs[1:].max() < 1e-12

    def test_y_rotation_flips_bit(self):
        ansatz = ring_ansatz(1, 0)
        dist = simulate(ansatz, CircuitParams(np.array([np.pi, 0.0])))
        assert abs(dist.amplitudes[1]) == pytest.approx(1.0, abs=1e-12)

    def test_tensor_product_uniform(self):
        ansatz = ring_ansatz(2, 0)
        theta = np.zeros(4)
        theta[0] = theta[2] = np.pi / 2  # RY(pi/2) on both qubits
        probs = simulate(ansatz, CircuitParams(theta)).probabilities()
        np.testing.assert_allclose(probs, 0.25, atol=1e-10)

    def test_norm_preserved_random_circuits(self):
        rng = np.random.default_rng(0)
        for trial in range(200):
            q = int(rng.integers(1, 7))
            ansatz = ring_ansatz(q, int(rng.integers(0, 4)))
            params = CircuitParams(rng.uniform(-np.pi, np.pi, ansatz.param_count))
            amps = simulate(ansatz, params).amplitudes
            assert abs(np.sum(np.abs(amps) ** 2) - 1.0) < 1e-10

    def test_qubit_guard(self):
        with pytest.raises(CircuitError, match="guard"):
            simulate(ring_ansatz(21, 1), CircuitParams(np.zeros(2 * 21 * 2)))

    def test_param_length_mismatch(self):
        ansatz = ring_ansatz(2, 1)
        with pytest.raises(CircuitError, match="parameters"):
            simulate(ansatz, CircuitParams(np.zeros(3)))


class TestSampling:
    def test_point_mass_sampling(self):
        ansatz = ring_ansatz(3, 1)
        dist = simulate(ansatz, CircuitParams.zeros(ansatz))
        batch = sample_bitstrings(dist, 100, seed=0)
        assert batch.bits.shape == (100, 3)
        assert not batch.bits.any()

    def test_deterministic_per_seed(self):
        ansatz = ring_ansatz(3, 2)
        dist = simulate(ansatz, CircuitParams.random(ansatz, seed=5))
        a = sample_bitstrings(dist, 500, seed=7)
        b = sample_bitstrings(dist, 500, seed=7)
        np.testing.assert_array_equal(a.bits, b.bits)

    def test_uniform_two_qubit_chi_square(self):
        ansatz = ring_ansatz(2, 0)
        theta = np.zeros(4)
        theta[0] = theta[2] = np.pi / 2
        dist = simulate(ansatz, CircuitParams(theta))
        batch = sample_bitstrings(dist, 100_000, seed=3)
        states = batch.bits @ np.array([2, 1])
        counts = np.bincount(states, minlength=4)
        assert chisquare(counts).pvalue > 0.01

    def test_frequencies_match_born_probabilities(self):
        # three-qubit circuit with random parameters, merged small bins
        ansatz = ring_ansatz(3, 2)
        params = CircuitParams.random(ansatz, seed=11)
        dist = simulate(ansatz, params)
        probs = dist.probabilities()
        batch = sample_bitstrings(dist, 100_000, seed=13)
        states = batch.bits @ np.array([4, 2, 1])
        counts = np.bincount(states, minlength=8).astype(float)
        expected = probs * 100_000
        keep = expected >= 5
        counts_merged = np.append(counts[keep], counts[~keep].sum())
        expected_merged = np.append(expected[keep], expected[~keep].sum())
        if expected_merged[-1] == 0:
            counts_merged, expected_merged = counts_merged[:-1], expected_merged[:-1]
        assert chisquare(counts_merged, expected_merged).pvalue > 0.001


class TestSinkhorn:
    def test_identical_batches_zero(self):
        ansatz = ring_ansatz(4, 2)
        dist = simulate(ansatz, CircuitParams.random(ansatz, seed=1))
        batch = sample_bitstrings(dist, 300, seed=2)
        assert abs(sinkhorn_divergence(batch, batch)) <= 1e-6

    def test_symmetric_exactly(self):
        ansatz = ring_ansatz(4, 2)
        dist = simulate(ansatz, CircuitParams.random(ansatz, seed=3))
        a = sample_bitstrings(dist, 200, seed=4)
        b = sample_bitstrings(dist, 200, seed=5)
        assert sinkhorn_divergence(a, b) == sinkhorn_divergence(b, a)

    def test_point_masses_approach_hamming_distance(self):
        for q in (3, 6, 10):
            value = sinkhorn_divergence(point_mass(q, 0), point_mass(q, 1),
                                        epsilon=0.01)
            assert value == pytest.approx(q, abs=0.05)

    def test_nonnegative(self):
        rng = np.random.default_rng(17)
        for trial in range(15):
            q = int(rng.integers(2, 6))
            a = BitstringBatch(rng.integers(0, 2, size=(40, q)).astype(np.uint8))
            b = BitstringBatch(rng.integers(0, 2, size=(60, q)).astype(np.uint8))
            assert sinkhorn_divergence(a, b) >= -1e-8

    def test_hamming_cost_matrix(self):
        a = np.array([[0, 0, 0], [1, 1, 1]])
        b = np.array([[0, 1, 0]])
        np.testing.assert_array_equal(hamming_cost(a, b), [[1.0], [2.0]])

    def test_qubit_mismatch_rejected(self):
        with pytest.raises(CircuitError):
            sinkhorn_divergence(point_mass(3, 0), point_mass(4, 1))

    def test_nonconvergence_flagged(self):
        rng = np.random.default_rng(0)
        a = BitstringBatch(rng.integers(0, 2, size=(50, 5)).astype(np.uint8))
        b = BitstringBatch(rng.integers(0, 2, size=(50, 5)).astype(np.uint8))
        strict = sinkhorn_divergence_detailed(a, b, epsilon=1.0, max_iters=1)
        loose = sinkhorn_divergence_detailed(a, b, epsilon=1.0, max_iters=200)
        assert not strict.converged and loose.converged
        assert abs(strict.value - loose.value) < 0.05  # best iterate is close
        with pytest.warns(RuntimeWarning):
            sinkhorn_divergence(a, b, epsilon=1.0, max_iters=1)

    def test_ot_marginals(self):
        rng = np.random.default_rng(23)
        x = rng.integers(0, 2, size=(8, 4)).astype(float)
        wx = np.full(8, 1 / 8)
        y = rng.integers(0, 2, size=(5, 4)).astype(float)
        wy = np.full(5, 0.2)
        result = entropic_ot(x, wx, y, wy, epsilon=0.5, max_iters=500)
        assert result.converged and result.marginal_error < 1e-9


def all_states(q):
    idx = np.arange(2 ** q)
    return ((idx[:, None] >> np.arange(q - 1, -1, -1)) & 1).astype(float)


def exact_divergence(ansatz, theta, target_support, target_weights, eps=1.0):
    """Sinkhorn divergence of the exact circuit distribution against a fixed
    weighted target: a smooth function of theta, unlike the sampled loss."""
    probs = simulate(ansatz, CircuitParams(np.asarray(theta))).probabilities()
    states = all_states(ansatz.q)
    keep = probs > 1e-15
    x, wx = states[keep], probs[keep] / probs[keep].sum()
    ab = entropic_ot(x, wx, target_support, target_weights, eps, 500)
    aa = entropic_ot(x, wx, x, wx, eps, 500)
    bb = entropic_ot(target_support, target_weights, target_support,
                     target_weights, eps, 500)
    return ab.value - 0.5 * aa.value - 0.5 * bb.value


class TestSpsaTraining:
    def test_zero_iters_returns_params_unchanged(self):
        ansatz = ring_ansatz(3, 1)
        params = CircuitParams.random(ansatz, seed=0)
        result = train_qcbm(ansatz, params, point_mass(3, 1),
                            QcbmTrainConfig(iters=0, batch_size=64, seed=1))
        np.testing.assert_array_equal(result.params.theta, params.theta)
        assert result.loss_trace == []

    def test_already_optimal_target(self):
        ansatz = ring_ansatz(3, 1)
        params = CircuitParams.zeros(ansatz)
        target = sample_bitstrings(simulate(ansatz, params), 128, seed=5)
        result = train_qcbm(ansatz, params, target,
                            QcbmTrainConfig(iters=5, batch_size=128, seed=2))
        assert result.initial_loss <= 1e-6
        assert np.linalg.norm(result.params.theta - params.theta) < 0.2

    def test_descent_direction_matches_finite_differences(self):
        # the SPSA estimate should be a descent direction of the true
        # gradient on at least 80% of random parameter draws
        ansatz = ring_ansatz(2, 1)
        target_support = np.ones((1, 2))
        target_weights = np.ones(1)
        rng = np.random.default_rng(31)
        agreements = []
        for trial in range(20):
            theta = rng.uniform(-np.pi, np.pi, ansatz.param_count)
            h = 1e-5
            grad_fd = np.zeros_like(theta)
            for i in range(theta.size):
                up, down = theta.copy(), theta.copy()
                up[i] += h
                down[i] -= h
                grad_fd[i] = (exact_divergence(ansatz, up, target_support, target_weights)
                              - exact_divergence(ansatz, down, target_support,
                                                 target_weights)) / (2 * h)
            delta = rng.choice([-1.0, 1.0], size=theta.size)
            c = 0.05
            spsa = (exact_divergence(ansatz, theta + c * delta, target_support, target_weights)
                    - exact_divergence(ansatz, theta - c * delta, target_support,
                                       target_weights)) / (2 * c) * delta
            agreements.append(float(spsa @ grad_fd) > 0.0)
        assert np.mean(agreements) >= 0.8

    def test_point_mass_training_smoke(self):
        ansatz = ring_ansatz(4, 2)
        target = point_mass(4, 1, m=256)
        reductions = []
        for seed in range(3):
            params = CircuitParams.random(ansatz, seed=seed)
            result = train_qcbm(ansatz, params, target,
                                QcbmTrainConfig(iters=60, batch_size=256, seed=seed))
            reductions.append(result.final_loss / max(result.initial_loss, 1e-12))
            assert len(result.loss_trace) == 60
        assert np.median(reductions) < 1.0

    def test_deterministic(self):
        ansatz = ring_ansatz(3, 1)
        params = CircuitParams.random(ansatz, seed=8)
        target = point_mass(3, 1, m=64)
        config = QcbmTrainConfig(iters=10, batch_size=64, seed=3)
        a = train_qcbm(ansatz, params, target, config)
        b = train_qcbm(ansatz, params, target, config)
        np.testing.assert_array_equal(a.params.theta, b.params.theta)
        assert a.loss_trace == b.loss_trace
