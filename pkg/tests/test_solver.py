import numpy as np
import pytest

from pdsaddle.errors import StepsizeViolation
from pdsaddle.operators import scalar_map
from pdsaddle.prox import abs_value, l1_norm, quad_fit, quad_fit_conjugate
from pdsaddle.saddle import SaddleProblem
from pdsaddle.solver import (IterateTrace, StepConfig, StoppingRules,
                             epsilon_monitor, format_trace_row, solve_dual_first,
                             solve_primal_first, stopping, validate_steps)

ZERO = [(np.zeros(1), np.zeros(1))]


def bilinear_abs():
    return SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0),
                         saddle_set=ZERO)


class TestValidateSteps:
    def test_quartic_settings_ok(self):
        chk = validate_steps(StepConfig(0.35, 0.25, 1.0), rho=2.0, norm_L=1.0,
                             regime="dual-first")
        assert chk.ok and not chk.failures

    def test_boundary_violation(self):
        chk = validate_steps(StepConfig(0.5, 0.25, 1.0), rho=2.0, norm_L=1.0,
                             regime="dual-first")
        assert not chk.ok
        names = [n for n, _ in chk.failures]
        assert "sigma*rho < 1" in names

    def test_tau_formula_ok_by_construction(self):
        # tau = min{0.99, 1/(||A||^2 sigma)} with a conservative norm
        normA = 31.7
        sigma = 0.1
        tau = min(0.99, 1.0 / (sigma * (normA * (1 + 1e-6)) ** 2))
        chk = validate_steps(StepConfig(sigma, tau, 1.0), rho=0.0, norm_L=normA,
                             regime="primal-first")
        assert chk.ok

    def test_reports_margin(self):
        chk = validate_steps(StepConfig(0.6, 0.25, 1.0), rho=2.0, norm_L=1.0,
                             regime="dual-first")
        failed = dict(chk.failures)
        assert np.isclose(failed["sigma*rho < 1"], 0.2)

    def test_unknown_regime(self):
        with pytest.raises(ValueError):
            validate_steps(StepConfig(0.1, 0.1, 0.0), 0.0, 1.0, "sideways")


class TestDualFirst:
    def test_hand_checked_first_iteration(self):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.array([1.0]), np.array([0.0])), iters=1)
        x1, y1 = tr.rows[1].x, tr.rows[1].y
        assert x1[0] == 0.25 and y1[0] == 0.0

    def test_saddle_is_fixed_point(self):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.zeros(1), np.zeros(1)), iters=20)
        assert all(r.x[0] == 0.0 and r.y[0] == 0.0 for r in tr.rows)

    def test_reaches_exact_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            z0 = (rng.uniform(-10, 10, 1), rng.uniform(-10, 10, 1))
            tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                                  z0, iters=60)
            assert tr.rows[-1].x[0] == 0.0 and tr.rows[-1].y[0] == 0.0

    def test_base_predicate_enforced(self):
        with pytest.raises(StepsizeViolation):
            solve_dual_first(bilinear_abs(), StepConfig(0.75, 3.0, 1.0),
                             (np.ones(1), np.ones(1)), iters=1)

    def test_dual_modulus_checked_up_front(self):
        from pdsaddle.prox import abs_plus_square_well
        p = SaddleProblem(f=abs_value(), gstar=abs_plus_square_well(2.0),
                          L=scalar_map(1.0), saddle_set=ZERO)
        with pytest.raises(StepsizeViolation):
            solve_dual_first(p, StepConfig(0.3, 0.6, 1.0),
                             (np.zeros(1), np.zeros(1)), iters=5)

    def test_x0_outside_domain(self):
        from pdsaddle.prox import ProxFunction
        f = ProxFunction(eval=lambda x: np.inf, rho=0.0, prox=lambda g, v: v)
        p = SaddleProblem(f=f, gstar=abs_value(), L=scalar_map(1.0))
        with pytest.raises(ValueError):
            solve_dual_first(p, StepConfig(0.1, 0.1, 0.0), (np.ones(1), np.ones(1)), 1)


class TestPrimalFirst:
    def test_hand_checked_first_iteration(self):
        tr = solve_primal_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                                (np.array([1.0]), np.array([0.0])), iters=1,
                                store_relaxed=True)
        assert tr.rows[1].x[0] == 0.25 and tr.rows[1].y[0] == 0.0
        assert tr.rows[1].xbar[0] == -0.5

    def test_saddle_is_fixed_point(self):
        tr = solve_primal_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                                (np.zeros(1), np.zeros(1)), iters=20)
        assert all(r.dist == 0.0 for r in tr.rows)

    def test_decoupled_updates_match_dual_first(self):
        # theta = 0 and L = 0: the two orderings produce identical traces
        p = SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(0.0),
                          saddle_set=ZERO)
        z0 = (np.array([2.0]), np.array([-3.0]))
        cfg = StepConfig(0.5, 0.5, 0.0)
        ta = solve_dual_first(p, cfg, z0, iters=15)
        tb = solve_primal_first(p, cfg, z0, iters=15)
        for ra, rb in zip(ta.rows, tb.rows):
            assert ra.x[0] == rb.x[0] and ra.y[0] == rb.y[0]


class TestDeterminism:
    def test_bit_identical_traces(self):
        z0 = (np.array([3.3]), np.array([-1.7]))
        cfg = StepConfig(0.75, 0.25, 1.0)
        ta = solve_dual_first(bilinear_abs(), cfg, z0, iters=50, seed=5)
        tb = solve_dual_first(bilinear_abs(), cfg, z0, iters=50, seed=5)
        for ra, rb in zip(ta.rows, tb.rows):
            assert ra.x[0] == rb.x[0] and ra.y[0] == rb.y[0]
            assert format_trace_row(ra) == format_trace_row(rb)


class TestEpsilonMonitor:
    def test_sign_vector_inside(self):
        p = SaddleProblem(f=quad_fit(np.zeros(2)), g=l1_norm(2),
                          gstar=None, L=scalar_map(1.0, 2))
        x_next = np.array([2.0, -1.0])
        assert epsilon_monitor(p, np.array([1.0, -1.0]), x_next) == 0.0

    def test_interval_distance(self):
        p = SaddleProblem(f=quad_fit(np.zeros(1)), g=l1_norm(1),
                          gstar=None, L=scalar_map(1.0))
        assert epsilon_monitor(p, np.array([2.0]), np.zeros(1)) == 1.0

    def test_quad_singleton(self):
        b = np.array([0.5, 0.5])
        p = SaddleProblem(f=l1_norm(2), g=quad_fit(b, 1.0),
                          gstar=quad_fit_conjugate(b, 1.0), L=scalar_map(1.0, 2))
        y = np.array([0.2, -0.2])
        x1 = np.array([1.0, 1.0])
        expect = np.linalg.norm(y - (x1 - b))
        assert np.isclose(epsilon_monitor(p, y, x1), expect)

    def test_recorded_in_trace(self):
        b = np.array([1.0])
        p = SaddleProblem(f=abs_value(), g=quad_fit(b, 1.0),
                          gstar=quad_fit_conjugate(b, 1.0), L=scalar_map(1.0))
        tr = solve_primal_first(p, StepConfig(0.5, 0.5, 1.0),
                                (np.array([2.0]), np.array([0.0])), iters=3)
        assert tr.rows[0].eps is None
        assert all(r.eps is not None for r in tr.rows[1:])


class TestStopping:
    def test_fixed_point_halts_on_residual(self):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.zeros(1), np.zeros(1)), iters=100,
                              rules=StoppingRules(residual_tol=0.0))
        assert tr.iterations == 1
        assert tr.metadata["stop_reason"] == "residual_tol"

    def test_max_iters_rule(self):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.array([5.0]), np.array([5.0])), iters=100,
                              rules=StoppingRules(max_iters=7))
        assert tr.iterations == 7 and tr.metadata["stop_reason"] == "max_iters"

    def test_dist_tol_rule(self):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.array([5.0]), np.array([5.0])), iters=2001,
                              rules=StoppingRules(dist_tol=0.0))
        assert tr.rows[-1].dist == 0.0
        assert tr.metadata["stop_reason"] == "dist_tol"

    def test_stopping_none_rules(self):
        tr = IterateTrace()
        assert stopping(tr, None) is None


class TestTrace:
    def test_row_count(self):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.array([1.0]), np.array([1.0])), iters=13)
        assert len(tr.rows) == 14 and tr.iterations == 13

    def test_csv_format(self, tmp_path):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.array([1.0]), np.array([1.0])), iters=3)
        path = tmp_path / "t.csv"
        tr.to_csv(path)
        lines = path.read_text().split("\n")
        assert lines[0] == "n,dist,H,eps,objective,residual"
        first = lines[1].split(",")
        assert first[0] == "0" and first[5] == ""  # no residual on row 0
        assert first[3] == "" and first[4] == ""   # no eps oracle, no g
        assert float(first[1]) == np.sqrt(2.0)

    def test_metadata_sidecar(self, tmp_path):
        tr = solve_dual_first(bilinear_abs(), StepConfig(0.75, 0.25, 1.0),
                              (np.ones(1), np.ones(1)), iters=2, seed=9)
        path = tmp_path / "t.meta"
        tr.write_metadata(path)
        text = path.read_text()
        assert "regime=dual-first" in text and "seed=9" in text
        assert "regime_predicate_ok=True" in text

    def test_regime_predicate_recorded_when_violated(self):
        # base predicates hold, the primal-first theory predicate does not
        from pdsaddle.prox import abs_plus_square_well
        p = SaddleProblem(f=abs_plus_square_well(2.0), gstar=abs_value(),
                          L=scalar_map(1.0), saddle_set=ZERO)
        tr = solve_primal_first(p, StepConfig(0.35, 0.6, 1.0),
                                (np.zeros(1), np.zeros(1)), iters=1)
        assert tr.metadata["regime_predicate_ok"] is False
        assert "regime_predicate_failures" in tr.metadata

    def test_objective_column_when_g_known(self):
        b = np.array([1.0])
        p = SaddleProblem(f=abs_value(), g=quad_fit(b, 1.0),
                          gstar=quad_fit_conjugate(b, 1.0), L=scalar_map(1.0))
        tr = solve_primal_first(p, StepConfig(0.5, 0.5, 1.0),
                                (np.array([0.0]), np.array([0.0])), iters=5)
        assert tr.rows[0].objective == 0.5  # |0| + (0-1)^2/2
        assert all(r.objective is not None for r in tr.rows)


class TestContractionProperties:
    def test_quartic_contraction_and_ball(self):
        from pdsaddle.problems import example_wc_quartic
        from pdsaddle.saddle import rate_constant_B
        spec = example_wc_quartic()
        report = spec.extras["radius_report"]
        for seed in range(10):
            tr = spec.run(seed=seed, start="inside", iters=500,
                          rules=StoppingRules(dist_tol=0.0))
            d = tr.dists()
            assert np.all(d[1:] <= d[:-1] + 1e-12)
            assert np.all(d <= report.ball_radius + 1e-12)
            B = rate_constant_B(report, spec.mu, d[0], spec.config.sigma,
                                spec.config.tau)
            n = np.arange(len(d))
            assert np.all(d ** 2 <= B ** (n - 1) * d[0] ** 2 * (1 + 1e-9))
