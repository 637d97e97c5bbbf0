import numpy as np
import pytest

from pdsaddle.errors import OutOfBall, StepsizeViolation
from pdsaddle.operators import identity_map, scalar_map
from pdsaddle.prox import (ProxFunction, abs_plus_square_well, abs_value, l1_norm,
                           quad_fit)
from pdsaddle.saddle import (SaddleProblem, dist_to_set, epsilon_bounds,
                             feasible_sigma_interval, gap_G, gap_G_grid, gap_H,
                             gap_H_grid, gap_weak_convexity_check, grid_axis,
                             lagrangian, radius_report, rate_constant_B,
                             reduce_fully_weakly_convex, verify_inf_sharpness,
                             verify_saddle_points)

ZERO_SADDLE = [(np.zeros(1), np.zeros(1))]


def bilinear_abs():
    """L(x,y) = |x| + xy - |y| (inf-sharp with constant 1)."""
    return SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0),
                         saddle_set=ZERO_SADDLE)


def decoupled_abs():
    """K(x,y) = |x| - |y| (no bilinear term)."""
    return SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(0.0),
                         saddle_set=ZERO_SADDLE)


def abs_vs_quad():
    """L(x,y) = |x| + xy - y^2/8 (not inf-sharp near the origin)."""
    return SaddleProblem(f=abs_value(), gstar=quad_fit(0.0, 0.25),
                         L=scalar_map(1.0), saddle_set=ZERO_SADDLE)


def quartic_wells(c=2.0):
    return SaddleProblem(f=abs_plus_square_well(c), gstar=abs_plus_square_well(c),
                         L=scalar_map(1.0), saddle_set=ZERO_SADDLE)


class TestLagrangian:
    def test_bilinear_point(self):
        assert lagrangian(bilinear_abs(), [1.0], [1.0]) == 1.0

    def test_saddle_value(self):
        assert lagrangian(bilinear_abs(), [0.0], [0.0]) == 0.0

    def test_quadratic_dual(self):
        assert lagrangian(abs_vs_quad(), [1.0], [2.0]) == 2.5

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            lagrangian(bilinear_abs(), [1.0, 2.0], [0.0])


class TestGapH:
    def test_decoupled_example(self):
        assert gap_H(decoupled_abs(), [3.0], [4.0]) == 7.0

    def test_zero_at_saddle(self):
        assert gap_H(decoupled_abs(), [0.0], [0.0]) == 0.0

    def test_quadratic_dual_example(self):
        assert gap_H(abs_vs_quad(), [0.0], [1.0]) == 0.125

    def test_requires_saddle_set(self):
        p = SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0))
        with pytest.raises(ValueError):
            gap_H(p, [1.0], [1.0])

    def test_zero_set_larger_than_saddle_set(self):
        # the quartic-well Lagrangian with c=1 vanishes at non-saddle points
        p = quartic_wells(1.0)
        for z in ([0.0], [1.0]), ([1.0], [1.0]), ([1.0], [0.0]):
            assert gap_H(p, *z) == 0.0

    def test_bad_saddle_set_counts_warnings(self):
        p = SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0),
                          saddle_set=[(np.array([1.0]), np.array([0.5]))])
        val = gap_H(p, [0.0], [0.0])
        assert val == 0.0 and p.gap_warnings >= 1

    def test_strongly_convex_toy_zero_set_is_saddle(self):
        # f, g* strongly convex: H vanishes only on the saddle set
        p = SaddleProblem(f=quad_fit(0.0, 1.0), gstar=quad_fit(0.0, 1.0),
                          L=scalar_map(1.0), saddle_set=ZERO_SADDLE)
        assert gap_H(p, [0.0], [0.0]) == 0.0
        rng = np.random.default_rng(0)
        for _ in range(50):
            z = rng.uniform(-2, 2, 2)
            if np.hypot(*z) > 1e-3:
                assert gap_H(p, [z[0]], [z[1]]) > 0.0


class TestGapG:
    def test_decoupled_exact(self):
        p = decoupled_abs()
        g = gap_G(p, [0.7], [-0.3], (-3, 3), 0.01)
        assert abs(g - 1.0) <= 0.01

    def test_zero_at_saddle(self):
        assert abs(gap_G(bilinear_abs(), [0.0], [0.0], (-3, 3), 0.01)) <= 0.01

    def test_chain_vs_H(self):
        p = bilinear_abs()
        assert gap_G(p, [1.0], [1.0], (-3, 3), 0.01) >= gap_H(p, [1.0], [1.0]) - 0.01

    def test_grid_chain_examples(self):
        for p, half in ((decoupled_abs(), 3.0), (abs_vs_quad(), 1.0),
                        (bilinear_abs(), 3.0)):
            step = 2 * half / 49
            xs = grid_axis(-half, half, step)
            G = gap_G_grid(p, xs, xs, (-half, half), step)
            H = gap_H_grid(p, xs, xs)
            assert np.all(H >= 0.0)
            assert np.all(G >= H - step - 1e-12)
            assert p.gap_warnings == 0

    def test_unsupported_beyond_scalar(self):
        p = SaddleProblem(f=l1_norm(2), gstar=l1_norm(2), L=identity_map(2),
                          saddle_set=[(np.zeros(2), np.zeros(2))])
        with pytest.raises(ValueError):
            gap_G(p, np.zeros(2), np.zeros(2), (-1, 1), 0.1)


class TestInfSharpness:
    def test_decoupled_sharp_mu1(self):
        r = verify_inf_sharpness(decoupled_abs(), 1.0, (-5, 5), 0.01)
        assert r.inf_sharp and r.min_value >= -1e-12

    def test_bilinear_sharp_mu1(self):
        r = verify_inf_sharpness(bilinear_abs(), 1.0, (-3, 3), 0.01)
        assert r.inf_sharp

    def test_quadratic_dual_not_sharp(self):
        r = verify_inf_sharpness(abs_vs_quad(), 0.1, (-1, 1), 0.01)
        assert not r.inf_sharp
        assert np.isclose(r.min_value, -0.02)
        assert abs(r.witness[0]) <= 1e-12 and np.isclose(abs(r.witness[1]), 0.4)

    def test_quartic_not_sharp_mu1(self):
        r = verify_inf_sharpness(quartic_wells(1.0), 1.0, (-3, 3), 0.01)
        assert r.min_value < 0.0

    def test_grid_scan_matches_loop(self):
        p = bilinear_abs()
        xs = grid_axis(-1, 1, 0.25)
        H = gap_H_grid(p, xs, xs)
        for i, xv in enumerate(xs):
            for j, yv in enumerate(xs):
                assert H[i, j] == gap_H(p, [xv], [yv])


class TestDistToSet:
    def test_pythagoras(self):
        assert dist_to_set((np.array([3.0]), np.array([4.0])), ZERO_SADDLE) == 5.0

    def test_membership(self):
        assert dist_to_set((np.zeros(1), np.zeros(1)), ZERO_SADDLE) == 0.0

    def test_nearest_of_two(self):
        members = [(np.array([0.0]), np.array([0.0])), (np.array([1.0]), np.array([0.0]))]
        assert np.isclose(dist_to_set((np.array([0.6]), np.array([0.0])), members), 0.4)

    def test_empty_set(self):
        with pytest.raises(ValueError):
            dist_to_set((np.zeros(1), np.zeros(1)), [])

    def test_triangle_against_members(self):
        rng = np.random.default_rng(1)
        members = [(rng.standard_normal(2), rng.standard_normal(2)) for _ in range(3)]
        for _ in range(50):
            z = (rng.standard_normal(2), rng.standard_normal(2))
            d = dist_to_set(z, members)
            for xs, ys in members:
                direct = np.sqrt(np.sum((z[0] - xs) ** 2) + np.sum((z[1] - ys) ** 2))
                assert d <= direct + 1e-12


class TestRadiusReport:
    def test_quartic_experiment_constants(self):
        r = radius_report(rho=2.0, mu=0.9, norm_L=1.0, sigma=0.35, tau=0.25,
                          theta=1.0, regime="dual-first")
        assert abs(r.A - 0.00599) <= 1e-4
        assert np.isclose(r.ball_radius, 0.9 / (2.0 - r.A))

    def test_symmetric_case_A_equals_A1(self):
        r = radius_report(rho=0.0, mu=1.0, norm_L=1.0, sigma=0.4, tau=0.4,
                          theta=0.0, regime="dual-first")
        assert r.A == r.A1

    def test_straight_line_transcription(self):
        # independent re-derivation guarding against transposed constants
        sigma, tau, theta, rho, normL, mu = 0.35, 0.25, 1.0, 2.0, 1.0, 0.9
        rt = np.sqrt(sigma * tau) * normL
        A = min((1 - rt) / (2 * tau), (1 - sigma * rho - theta * rt) / (2 * sigma))
        A1 = min((1 - theta * rt) / (2 * tau), (1 - sigma * rho - rt) / (2 * sigma))
        ball = mu / (max(1 / (2 * sigma), 1 / (2 * tau)) - A)
        r = radius_report(rho, mu, normL, sigma, tau, theta, "dual-first")
        assert r.A == A and r.A1 == A1 and r.ball_radius == ball

    def test_predicate_enforced(self):
        with pytest.raises(StepsizeViolation):
            radius_report(rho=2.0, mu=0.9, norm_L=1.0, sigma=0.5, tau=0.25,
                          theta=1.0, regime="dual-first")


class TestRateConstant:
    def setup_method(self):
        self.r = radius_report(rho=2.0, mu=0.9, norm_L=1.0, sigma=0.35, tau=0.25,
                               theta=1.0, regime="dual-first")

    def test_limit_small_dist(self):
        assert rate_constant_B(self.r, 0.9, 0.0, 0.35, 0.25) == 0.0
        assert rate_constant_B(self.r, 0.9, 1e-9, 0.35, 0.25) < 1e-8

    def test_half_radius(self):
        b = rate_constant_B(self.r, 0.9, self.r.ball_radius / 2, 0.35, 0.25)
        assert 0.0 < b < 1.0

    def test_boundary(self):
        b = rate_constant_B(self.r, 0.9, self.r.ball_radius * 0.999, 0.35, 0.25)
        assert b < 1.0

    def test_out_of_ball(self):
        with pytest.raises(OutOfBall):
            rate_constant_B(self.r, 0.9, self.r.ball_radius, 0.35, 0.25)


class TestEpsilonBounds:
    def test_zero_inexactness(self):
        eb = epsilon_bounds(mu=1.0, rho=2.0, norm_L=1.0, sigma=0.1, tau=0.5, eps_n=0.0)
        s = 0.1 * 2.0 + np.sqrt(0.05)
        assert eb.feasible and eb.E_minus == 0.0
        assert np.isclose(eb.E_plus, 2 * 0.1 * 1.0 / s)

    def test_boundary_coincide(self):
        # sigma a hair inside the feasibility boundary mu^2 sigma tau = s eps^2:
        # the discriminant vanishes and the two bounds coincide
        sigma, tau, rho, normL = 1 / 18, 0.5, 2.0, 1.0
        s = sigma * rho + np.sqrt(sigma * tau) * normL
        eps = np.sqrt(sigma * tau / s) * (1.0 - 1e-9)
        eb = epsilon_bounds(1.0, rho, normL, sigma, tau, eps)
        assert eb.E_plus is not None and abs(eb.E_plus - eb.E_minus) <= 1e-4

    def test_infeasible_reported_not_thrown(self):
        eb = epsilon_bounds(mu=0.1, rho=2.0, norm_L=1.0, sigma=0.3, tau=0.5, eps_n=1.0)
        assert not eb.feasible and eb.E_plus is None

    def test_interval_matches_paper(self):
        lo, hi = feasible_sigma_interval(rho=2.0, mu=1.0, norm_L=1.0, tau=0.5,
                                         eps_n=np.sqrt(0.1))
        assert abs(lo - 0.0555) <= 1e-3
        assert abs(hi - 0.3048) <= 1e-3


class TestReduction:
    def test_convex_g_unchanged(self):
        f, g = abs_value(), l1_norm(1)
        assert reduce_fully_weakly_convex(f, g, scalar_map(1.0)) == (f, g)

    def test_identity_modulus_shift(self):
        g = abs_plus_square_well(2.0)  # modulus 2
        f = abs_value()
        F, G = reduce_fully_weakly_convex(f, g, scalar_map(1.0))
        assert F.rho == f.rho + 2.0
        assert G.rho == 0.0
        y = np.array([1.3])
        assert np.isclose(G.eval(y), g.eval(y) + y[0] ** 2)

    def test_cancellation(self):
        neg_sq = ProxFunction(eval=lambda y: -float(np.sum(np.square(y))), rho=2.0)
        f0 = ProxFunction(eval=lambda x: 0.0, rho=0.0)
        F, G = reduce_fully_weakly_convex(f0, neg_sq, identity_map(2))
        for _ in range(10):
            y = np.random.default_rng(2).standard_normal(2)
            assert abs(G.eval(y)) <= 1e-12

    def test_scalar_L_prox_matches_definition(self):
        g = abs_plus_square_well(2.0)
        f = abs_value()
        L = scalar_map(1.0)
        F, G = reduce_fully_weakly_convex(f, g, L)
        rng = np.random.default_rng(3)
        from pdsaddle.prox import brute_force_prox
        for _ in range(25):
            gamma = rng.uniform(0.02, 0.9 / F.rho)
            v = rng.uniform(-2, 2)
            w = F.prox(gamma, np.array([v]))[0]
            t = brute_force_prox(lambda u: np.abs(u) - 1.0 * u * u, gamma, v, -6, 6)
            assert abs(w - t) <= 1e-6


class TestSaddleVerification:
    def test_examples_hold(self):
        for p in (decoupled_abs(), abs_vs_quad(), bilinear_abs(), quartic_wells(1.0)):
            assert verify_saddle_points(p, (-3, 3), 0.05) <= 1e-8

    def test_quartic_c2_saddle_is_local_only(self):
        # |t| + |t^2 - 2| dips below its value at 0 around t = sqrt(2), so
        # (0, 0) satisfies the saddle inequality on [-1, 1]^2 but not globally
        p = quartic_wells(2.0)
        assert verify_saddle_points(p, (-1, 1), 0.05) <= 1e-8
        assert verify_saddle_points(p, (-3, 3), 0.05) > 0.5

    def test_fake_saddle_detected(self):
        p = SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0),
                          saddle_set=[(np.array([1.0]), np.array([0.0]))])
        assert verify_saddle_points(p, (-3, 3), 0.05) > 0.1


class TestGapWeakConvexity:
    def test_convex_case(self):
        v = gap_weak_convexity_check(decoupled_abs(), 0.0, samples=200, seed=0,
                                     domain_box=(-3, 3), grid_step=0.05)
        assert v <= 1e-9

    def test_quartic_case(self):
        v = gap_weak_convexity_check(quartic_wells(2.0), 2.0, samples=200, seed=1,
                                     domain_box=(-3, 3), grid_step=0.05)
        assert v <= 1e-9

    def test_endpoints_tight(self):
        # lambda in {0,1}: the combination collapses onto an endpoint, so the
        # interpolation inequality holds with equality
        p = quartic_wells(2.0)
        rng = np.random.default_rng(5)
        for _ in range(10):
            z1 = rng.uniform(-2, 2, 2)
            z2 = rng.uniform(-2, 2, 2)
            g1 = gap_G(p, [z1[0]], [z1[1]], (-3, 3), 0.05)
            g2 = gap_G(p, [z2[0]], [z2[1]], (-3, 3), 0.05)
            for lam, ref in ((1.0, g1), (0.0, g2)):
                mid = lam * z1 + (1 - lam) * z2
                gm = gap_G(p, [mid[0]], [mid[1]], (-3, 3), 0.05)
                assert gm - (lam * g1 + (1 - lam) * g2) == 0.0
                assert gm == ref
