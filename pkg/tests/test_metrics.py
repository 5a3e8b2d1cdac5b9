import numpy as np
import pytest

from blocksona.block_consensus import BlockLayout, BlockSchedule, \
    run_block_consensus, weighted_average
from blocksona.core import StepSchedule
from blocksona.metrics import (
    MetricsLog,
    TraceFormatError,
    completion_time,
    dgrad_step,
    disagreement,
    make_stationarity_merit,
    read_trace,
    run_dgrad,
    stationarity_residual,
    write_trace,
)
from blocksona.regression import (
    RegressionInstance,
    RegressionProblem,
    centralized_reference_solve,
    generate_instance,
)
from blocksona.surrogates import Box
from blocksona.topology import Digraph, build_column_stochastic, \
    generate_connected_erdos_renyi


class TestWeightedAverage:
    def test_identical_agents_give_common_vector(self):
        layout = BlockLayout(2, 3)
        x = np.tile(np.arange(6.0), (4, 1))
        z = weighted_average(np.ones((4, 2)), x, layout)
        np.testing.assert_array_equal(z, np.arange(6.0))

    def test_two_agents_scalar_mean(self):
        layout = BlockLayout(1, 1)
        z = weighted_average(np.ones((2, 1)), np.array([[0.0], [4.0]]), layout)
        assert z[0] == 2.0

    def test_matches_consensus_limit(self):
        g = generate_connected_erdos_renyi(8, 0.5, seed=3)
        base = build_column_stochastic(g)
        layout = BlockLayout(2, 2)
        sched = BlockSchedule("shifted_round_robin", 2)
        rng = np.random.default_rng(5)
        x0 = rng.standard_normal((8, 4))
        x, phi, _ = run_block_consensus(g, base, sched, layout, x0,
                                        tol=1e-11, max_iters=5000)
        z = weighted_average(phi, x, layout)
        np.testing.assert_allclose(x, np.tile(z, (8, 1)), atol=1e-8)
        np.testing.assert_allclose(z, x0.mean(axis=0), atol=1e-8)


class TestStationarityResidual:
    def test_zero_at_reference_solution(self):
        inst = generate_instance(4, 12, 8, 0.0, 0.05, seed=11, lam=0.0,
                                 box=Box(-100.0, 100.0))
        ref = centralized_reference_solve(inst, tol=1e-13)
        assert stationarity_residual(ref, inst) < 1e-8

    def test_zero_at_origin_for_zero_data(self):
        inst = RegressionInstance(design=(np.zeros((3, 5)),),
                                  observations=(np.zeros(3),),
                                  ground_truth=np.zeros(5), lam=0.1, theta=20.0)
        assert stationarity_residual(np.zeros(5), inst) == 0.0

    def test_positive_away_from_solutions_and_detects_perturbations(self):
        inst = generate_instance(4, 12, 8, 0.0, 0.05, seed=13, lam=0.0,
                                 box=Box(-100.0, 100.0))
        ref = centralized_reference_solve(inst, tol=1e-13)
        rng = np.random.default_rng(1)
        for _ in range(10):
            z = ref + rng.standard_normal(12) * 0.1
            assert stationarity_residual(z, inst) > 1e-4

    def test_decreases_along_algorithm_windows(self):
        from blocksona.core import run
        inst = generate_instance(6, 24, 10, 0.5, 0.05, seed=17)
        prob = RegressionProblem(inst, BlockLayout.for_dim(24, 4), kind="pl")
        g = generate_connected_erdos_renyi(6, 0.5, seed=2)
        sched = BlockSchedule("shifted_round_robin", 4)
        merit = make_stationarity_merit(inst)
        trace = run(prob, g, sched, StepSchedule(0.5, 1e-5), max_iters=300,
                    merit=merit)
        j = np.array(trace.j)
        # windowed trend: later windows improve on earlier ones
        w = 50
        mins = [j[k: k + w].min() for k in range(0, 300, w)]
        assert mins[-1] < mins[0]
        assert mins[-1] < 1e-2 * j[0]


class TestDisagreement:
    def test_zero_when_equal(self):
        x = np.tile(np.arange(3.0), (5, 1))
        assert disagreement(x, np.arange(3.0)) == 0.0

    def test_two_scalar_agents(self):
        x = np.array([[0.0], [4.0]])
        assert disagreement(x, np.array([2.0])) == 2.0

    def test_invariant_under_relabeling(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((6, 4))
        z = x.mean(axis=0)
        perm = rng.permutation(6)
        assert disagreement(x, z) == disagreement(x[perm], z)

    def test_decreasing_along_consensus(self):
        g = generate_connected_erdos_renyi(7, 0.6, seed=9)
        base = build_column_stochastic(g)
        layout = BlockLayout(1, 3)
        sched = BlockSchedule("round_robin", 1)
        rng = np.random.default_rng(3)
        x0 = rng.standard_normal((7, 3))
        x, phi, errs = run_block_consensus(g, base, sched, layout, x0,
                                           max_iters=60)
        # sup-norm error to the limit decays (allow small transients)
        assert errs[-1] < 1e-6 * errs[0]
        assert np.median(np.diff(errs) <= 1e-12) == 1.0


class TestCompletionTime:
    def make_log(self, js):
        log = MetricsLog(num_blocks=2)
        for t, j in enumerate(js):
            log.append(t=t, j=j, d=0.0, gamma=0.5, msgs=t > 0, reals_tx=t)
        return log

    def test_first_crossing(self):
        log = self.make_log([1.0, 1e-3, 1e-5])
        assert completion_time(log, 1e-4) == 2

    def test_tolerance_above_everything_gives_zero(self):
        log = self.make_log([1.0, 0.5])
        assert completion_time(log, 2.0) == 0

    def test_never_reached_gives_none(self):
        log = self.make_log([1.0, 0.5, 0.2])
        assert completion_time(log, 1e-6) is None

    def test_requires_positive_tolerance(self):
        with pytest.raises(ValueError):
            completion_time(self.make_log([1.0]), 0.0)


class TestMetricsLogInvariants:
    def test_rows_must_increase(self):
        log = MetricsLog(num_blocks=1)
        log.append(t=0, j=1.0, d=0.0, gamma=0.5, msgs=0, reals_tx=0)
        with pytest.raises(ValueError, match="increase"):
            log.append(t=0, j=1.0, d=0.0, gamma=0.5, msgs=0, reals_tx=0)

    def test_counters_cannot_decrease(self):
        log = MetricsLog(num_blocks=1)
        log.append(t=0, j=1.0, d=0.0, gamma=0.5, msgs=0, reals_tx=100)
        with pytest.raises(ValueError, match="decrease"):
            log.append(t=1, j=1.0, d=0.0, gamma=0.5, msgs=1, reals_tx=50)


class TestDGrad:
    def test_zero_step_is_pure_consensus(self):
        inst = generate_instance(4, 6, 5, 0.5, 0.05, seed=21)
        g = generate_connected_erdos_renyi(4, 0.7, seed=1)
        base = build_column_stochastic(g)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 6))
        phi = np.ones(4)
        mass_before = (phi[:, None] * x).sum(axis=0)
        x1, phi1 = dgrad_step(x, phi, inst, base, gamma=0.0)
        np.testing.assert_allclose((phi1[:, None] * x1).sum(axis=0),
                                   mass_before, atol=1e-12)
        oracle = (base.matrix @ (phi[:, None] * x)) / (base.matrix @ phi)[:, None]
        np.testing.assert_allclose(x1, oracle, atol=1e-14)

    def test_single_agent_is_projected_subgradient(self):
        inst = generate_instance(1, 5, 4, 0.5, 0.0, seed=23, box=Box(-0.5, 0.5))
        g = Digraph(n=1)
        base = build_column_stochastic(g)
        x = np.array([[0.3, -0.2, 0.5, 0.0, -0.5]])
        from blocksona.regression import dg0_minus, eta
        grad = inst.f_grad(0, x[0])
        sub = eta(inst.theta) * np.sign(x[0]) - dg0_minus(x[0], inst.theta)
        expected = np.clip(x[0] - 0.1 * (grad + inst.lam * sub), -0.5, 0.5)
        x1, phi1 = dgrad_step(x, np.ones(1), inst, base, gamma=0.1)
        np.testing.assert_allclose(x1[0], expected, atol=1e-14)

    def test_run_dgrad_transmits_full_vectors(self):
        inst = generate_instance(5, 8, 4, 0.5, 0.05, seed=25)
        g = generate_connected_erdos_renyi(5, 0.6, seed=4)
        log = run_dgrad(inst, g, StepSchedule(0.5, 1e-5), max_iters=10)
        per_iter = g.num_directed_edges * (8 + 1)
        assert log.reals_tx[-1] == 10 * per_iter

    def test_block_messages_are_factor_b_smaller(self):
        # vector payload per edge: 2d for block messages, 2m for full ones
        m, b = 24, 6
        d = m // b
        assert (2 * d) * b == 2 * m


class TestTraceIO:
    def fill(self, log):
        for t in range(4):
            log.append(t=t, j=10.0 ** -t, d=0.5 * t, gamma=0.5 - 0.01 * t,
                       msgs=12 * (t > 0), reals_tx=100 * t)
        return log

    def test_round_trip(self, tmp_path):
        log = self.fill(MetricsLog(num_blocks=4))
        path = tmp_path / "trace.csv"
        write_trace(log, path)
        back = read_trace(path)
        assert back.t == log.t
        assert back.j == log.j
        assert back.d == log.d
        assert back.gamma == log.gamma
        assert back.msgs == log.msgs
        assert back.reals_tx == log.reals_tx
        assert back.num_blocks == 4

    def test_header_is_exact(self, tmp_path):
        log = self.fill(MetricsLog(num_blocks=2))
        path = tmp_path / "trace.csv"
        write_trace(log, path)
        assert path.read_text().splitlines()[0] == "t,t_norm,J,D,gamma,msgs,reals_tx"

    def test_wrong_header_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,J\n0,1\n")
        with pytest.raises(TraceFormatError, match=":1:"):
            read_trace(path)

    def test_short_row_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,t_norm,J,D,gamma,msgs,reals_tx\n0,0,1,0,0.5,0\n")
        with pytest.raises(TraceFormatError, match=":2:"):
            read_trace(path)

    def test_full_precision_serialization(self, tmp_path):
        log = MetricsLog(num_blocks=1)
        value = 0.1234567890123456789
        log.append(t=0, j=value, d=value / 3.0, gamma=0.5, msgs=0, reals_tx=0)
        path = tmp_path / "trace.csv"
        write_trace(log, path)
        back = read_trace(path)
        assert back.j[0] == log.j[0]
        assert back.d[0] == log.d[0]
