#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <syncmargin/graph.hpp>
#include <syncmargin/margin.hpp>
#include <syncmargin/spectral.hpp>

using namespace syncmargin;

namespace {

SpectralSummary abstract_summary(double l2, double lN, double tau) {
    SpectralSummary s;
    s.lambda2 = l2;
    s.lambdaN = lN;
    s.tau = tau;
    return s;
}

double f_oracle(double p, double delta) { return (p - 1.0 / delta) * (1.0 / p - 1.0 / delta); }

// brute-force max of f over a uniform grid on (0, delta)
double f_grid_max(double delta, int points) {
    double best = -1e300;
    for (int i = 1; i <= points; ++i) best = std::max(best, f_oracle(delta * i / (points + 1.0), delta));
    return best;
}

struct Draw {
    double a, delta, g, cod, tau, l2, lN;
};

Draw random_draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Draw d;
    d.a = 1.0 + 0.5 * u(rng);
    d.delta = 1.5 + 4.5 * u(rng);
    d.cod = 5.0 * u(rng);
    d.tau = u(rng);
    d.l2 = 0.5 + 20.0 * u(rng);
    d.lN = d.l2 * (1.0 + 5.0 * u(rng));
    const double a0 = d.a - 1.0 / d.delta;
    d.g = a0 / d.lN * (0.2 + 1.6 * u(rng));
    return d;
}

} // namespace

TEST(Alpha0Sq, PerfectCancellation) {
    const DynamicsParams p{1.05, 2.0, 0.1, 0.0};
    EXPECT_NEAR(alpha0_sq(p.a0() / p.g, p, 0.0, 0.7), 0.0, 1e-15);
}

TEST(Alpha0Sq, HandArithmetic) {
    const DynamicsParams p{1.05, 2.0, 0.1, 0.0};
    EXPECT_NEAR(alpha0_sq(4.0, p, 1.0, 1.0), 0.1025, 1e-15);
}

TEST(Alpha0Sq, MinimumAtLambdaStar) {
    for (auto [a, delta, g, ct] : {std::tuple{1.05, 2.0, 0.01, 0.5}, {1.3, 4.0, 0.002, 3.0}, {1.1, 1.5, 0.05, 0.2}}) {
        const DynamicsParams p{a, delta, g, 0.0};
        const double ls = lambda_star(p, ct, 1.0);
        EXPECT_NEAR(ls, p.a0() / g - ct, 1e-9 * ls);
        const double min_value = 2.0 * ct * p.a0() * g - (ct * g) * (ct * g);
        EXPECT_NEAR(alpha0_sq(ls, p, ct, 1.0), min_value, 1e-13);
        EXPECT_GT(alpha0_sq(ls * 1.01, p, ct, 1.0), min_value);
        EXPECT_GT(alpha0_sq(ls * 0.99, p, ct, 1.0), min_value);
    }
}

TEST(Alpha0Sq, ConvexInLambda) {
    const DynamicsParams p{1.1, 3.0, 0.01, 0.0};
    const double h = 0.5;
    for (double l = 1.0; l < 300.0; l += 7.0) {
        const double second = alpha0_sq(l + h, p, 2.0, 0.6) - 2.0 * alpha0_sq(l, p, 2.0, 0.6) + alpha0_sq(l - h, p, 2.0, 0.6);
        EXPECT_GT(second, 0.0);
    }
}

TEST(LambdaSup, FartherEndpointAndTie) {
    const DynamicsParams p{1.05, 2.0, 0.01, 0.0}; // lambda* = 55 at cod = 0
    EXPECT_EQ(lambda_sup(abstract_summary(10.0, 60.0, 1.0), p, 0.0), 10.0);
    EXPECT_EQ(lambda_sup(abstract_summary(50.0, 100.0, 1.0), p, 0.0), 100.0);
    EXPECT_EQ(lambda_sup(abstract_summary(45.0, 65.0, 1.0), p, 0.0), 65.0);
}

TEST(CheckMss, ZeroDispersionGivesUnitMargin) {
    const DynamicsParams p{1.05, 2.0, 0.01, 0.0};
    const auto r = check_mss(abstract_summary(20.0, 80.0, 1.0), p, 0.0);
    EXPECT_TRUE(r.feasible);
    ASSERT_TRUE(r.rho_SM.has_value());
    EXPECT_EQ(*r.rho_SM, 1.0);
    EXPECT_EQ(r.sigma_eff_sq, 0.0);
}

TEST(CheckMss, ReportInvariants) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto d = random_draw(rng);
        const DynamicsParams p{d.a, d.delta, d.g, 0.0};
        const auto r = check_mss(abstract_summary(d.l2, d.lN, d.tau), p, d.cod);
        EXPECT_EQ(r.alpha0_sq, r.hat_a * r.hat_a + r.sigma_eff_sq * d.g * d.g);
        EXPECT_EQ(r.feasible, r.lhs - r.alpha0_sq > 1e-12 * std::max(r.lhs, r.alpha0_sq));
        EXPECT_DOUBLE_EQ(r.hat_a, d.a - 1.0 / d.delta - r.lambda_sup * d.g);
        EXPECT_DOUBLE_EQ(r.sigma_eff_sq, 2.0 * d.cod * d.tau * r.lambda_sup);
        if (r.feasible) {
            ASSERT_TRUE(r.rho_SM.has_value());
            EXPECT_GT(*r.rho_SM, 0.0);
            EXPECT_LE(*r.rho_SM, 1.0);
            EXPECT_EQ(*r.rho_SM == 1.0, r.sigma_eff_sq * d.g * d.g == 0.0);
        }
        if (r.hat_a * r.hat_a >= r.lhs) { EXPECT_FALSE(r.rho_SM.has_value()); }
    }
}

TEST(CheckMss, UndefinedMarginWhenDenominatorVanishes) {
    const DynamicsParams p{1.05, 2.0, 0.01, 0.0};
    const auto r = check_mss(abstract_summary(1.0, 2.0, 1.0), p, 1.0); // hat_a near a0, far above 1 - 1/delta
    EXPECT_FALSE(r.feasible);
    EXPECT_FALSE(r.rho_SM.has_value());
}

TEST(CheckMss, TunnelCrossSectionShrinks) {
    const DynamicsParams p{1.125, 2.0, 0.01, 0.0};
    std::size_t previous = 1u << 30;
    bool closed = false;
    for (double cod = 0.0; cod <= 40.0; cod += 2.0) {
        std::size_t count = 0;
        for (double l = 0.5; l < 325.0; l += 0.5) count += check_mss(abstract_summary(l, l, 1.0), p, cod).feasible;
        EXPECT_LE(count, previous);
        previous = count;
        if (count == 0) closed = true;
    }
    EXPECT_TRUE(closed);
}

TEST(CheckMss, RejectsBadParameters) {
    EXPECT_THROW(check_mss(abstract_summary(1, 2, 1), DynamicsParams{1.05, 1.0, 0.01, 0}, 1.0), ParameterError);
    EXPECT_THROW(check_mss(abstract_summary(1, 2, 1), DynamicsParams{1.05, 2.0, 0.0, 0}, 1.0), ParameterError);
    EXPECT_THROW(check_mss(abstract_summary(1, 2, 1), DynamicsParams{-1.0, 2.0, 0.1, 0}, 1.0), ParameterError);
    EXPECT_THROW(check_mss(abstract_summary(1, 2, 1), DynamicsParams{1.05, 2.0, 0.1, 0}, -1.0), ParameterError);
}

TEST(CheckMssAllEigs, CompleteGraphMatches) {
    const auto s = spectral_summary(laplacian_split(ring_lattice(9, 4)));
    for (double g : {0.01, 0.05, 0.1, 0.2}) {
        const DynamicsParams p{1.05, 2.0, g, 0.0};
        EXPECT_EQ(check_mss_all_eigs(s, p, 0.0), check_mss(s, p, 0.0).feasible);
    }
}

TEST(CheckMssAllEigs, RingLatticeFeasible) {
    const auto s = spectral_summary(laplacian_split(ring_lattice(50, 2)));
    const auto opt = optimal_gain(s, 1.01, 4.0, 0.0);
    const DynamicsParams p{1.01, 4.0, opt.g_star, 0.0};
    ASSERT_TRUE(check_mss(s, p, 0.0).feasible);
    EXPECT_TRUE(check_mss_all_eigs(s, p, 0.0));
}

TEST(CheckMssAllEigs, InfeasibleAtLambdaNOnly) {
    const auto s = spectral_summary(laplacian_split(ring_lattice(20, 3)));
    const DynamicsParams p{1.05, 2.0, 0.5, 0.0};
    EXPECT_FALSE(strictly_greater(p.lhs(), alpha0_sq(s.lambdaN, p, 0.0, 0.0)));
    EXPECT_TRUE(strictly_greater(p.lhs(), alpha0_sq(s.lambda2, p, 0.0, 0.0)));
    EXPECT_FALSE(check_mss_all_eigs(s, p, 0.0));
    EXPECT_FALSE(check_mss(s, p, 0.0).feasible);
}

TEST(CheckMssAllEigs, AgreesWithLambdaSupVerdict) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SpectralSummary> graphs;
    for (int i = 0; i < 10; ++i)
        graphs.push_back(spectral_summary(
            laplacian_split(designate_uncertain(erdos_renyi(20, 0.2 + 0.6 * u(rng), i), 0.5, 1.0, i))));
    int feasible = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto& s = graphs[i % graphs.size()];
        const double a = 1.0 + 0.3 * u(rng);
        const double delta = 1.5 + 6.0 * u(rng);
        const double g = (a - 1.0 / delta) / s.lambdaN * (0.3 + 1.5 * u(rng));
        const double cod = 3.0 * u(rng);
        const DynamicsParams p{a, delta, g, 0.0};
        const bool verdict = check_mss(s, p, cod).feasible;
        feasible += verdict;
        EXPECT_EQ(check_mss_all_eigs(s, p, cod), verdict);
    }
    EXPECT_GT(feasible, 50);
    EXPECT_LT(feasible, 950);
}

TEST(Existence, ZeroAlphaHasUnitWitness) {
    const auto r = existence_p_condition(0.0, 2.0);
    ASSERT_TRUE(r.satisfiable);
    ASSERT_TRUE(r.witness.has_value());
    EXPECT_NEAR(*r.witness, 1.0, 1e-6);
    EXPECT_NEAR(lyapunov_scalar_gap(*r.witness, 2.0), 0.25, 1e-12);
}

TEST(Existence, BoundaryIsNotSatisfiable) {
    for (double delta : {1.5, 2.0, 7.0}) {
        const double lhs = (1.0 - 1.0 / delta) * (1.0 - 1.0 / delta);
        EXPECT_FALSE(existence_p_condition(lhs, delta).satisfiable);
        EXPECT_FALSE(existence_p_condition(lhs, delta).witness.has_value());
    }
}

TEST(Existence, WitnessBeatsThreshold) {
    const auto r = existence_p_condition(0.24, 2.0);
    ASSERT_TRUE(r.satisfiable);
    EXPECT_GT(f_oracle(*r.witness, 2.0), 0.24);
    // an independent grid on (0.01, 1.99) also finds points above 0.24
    bool grid = false;
    for (double p = 0.01; p < 1.99; p += 0.001) grid |= f_oracle(p, 2.0) > 0.24;
    EXPECT_TRUE(grid);
}

TEST(Existence, EquivalentToClosedForm) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(1.0, 20.0), ua(0.0, 2.0);
    for (int i = 0; i < 2000; ++i) {
        double delta = ud(rng);
        if (delta <= 1.0) continue;
        const double alpha = ua(rng);
        const double lhs = (1.0 - 1.0 / delta) * (1.0 - 1.0 / delta);
        if (std::abs(lhs - alpha) < 1e-9) continue;
        const auto r = existence_p_condition(alpha, delta);
        EXPECT_EQ(r.satisfiable, lhs > alpha);
        EXPECT_EQ(f_grid_max(delta, 2000) > alpha, r.satisfiable || std::abs(lhs - alpha) < 1e-5);
        if (r.witness) { EXPECT_GT(f_oracle(*r.witness, delta), alpha); }
    }
    EXPECT_THROW(existence_p_condition(0.1, 1.0), ParameterError);
}

TEST(Existence, AmGmBoundAndReciprocalSymmetry) {
    for (double delta : {1.2, 2.0, 5.0, 19.0}) {
        const double lhs = (1.0 - 1.0 / delta) * (1.0 - 1.0 / delta);
        for (int i = 1; i < 500; ++i) {
            const double p = delta * i / 500.0;
            const double f = lyapunov_scalar_gap(p, delta);
            EXPECT_LE(f, lhs + 1e-15);
            if (std::abs(p - 1.0) > 1e-3) { EXPECT_LT(f, lhs); }
            if (1.0 / p < delta && p > 1.0 / delta) { EXPECT_NEAR(f, lyapunov_scalar_gap(1.0 / p, delta), 1e-12); }
        }
        EXPECT_NEAR(lyapunov_scalar_gap(1.0, delta), lhs, 1e-15);
    }
}

TEST(CriticalEigenvalues, TunnelSliceParameters) {
    const auto c = critical_eigenvalues({1.125, 2.0, 0.01, 0.0});
    EXPECT_NEAR(c.lambda2_star, 12.5, 1e-12);
    // endpoints of |a0 - lambda g| < 1 - 1/delta
    EXPECT_NEAR(c.lambdaN_star, (0.625 + 0.5) / 0.01, 1e-12);
    EXPECT_NEAR(c.lambdaN_star, 112.5, 1e-12);
}

TEST(CriticalEigenvalues, SmallInstability) {
    EXPECT_NEAR(critical_eigenvalues({1.001, 2.0, 0.01, 0.0}).lambda2_star, 0.1, 1e-12);
    const auto c = critical_eigenvalues({1.05, 2.0, 0.001, 0.0});
    EXPECT_NEAR(c.lambda2_star, 50.0, 1e-9);
    EXPECT_NEAR(c.lambdaN_star, 1050.0, 1e-9);
}

TEST(CriticalEigenvalues, BoundaryAndWidth) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ua(1.0, 2.0), ud(1.1, 10.0), ug(0.001, 0.1);
    for (int i = 0; i < 200; ++i) {
        const DynamicsParams p{ua(rng), ud(rng), ug(rng), 0.0};
        const auto c = critical_eigenvalues(p);
        EXPECT_NEAR(alpha0_sq(c.lambda2_star, p, 0.0, 0.0), p.lhs(), 1e-9 * std::max(1.0, p.lhs()));
        EXPECT_NEAR(alpha0_sq(c.lambdaN_star, p, 0.0, 0.0), p.lhs(), 1e-9 * std::max(1.0, p.lhs()));
        const double width = (2.0 / p.g) * (1.0 - 1.0 / p.delta);
        EXPECT_NEAR(c.lambdaN_star - c.lambda2_star, width, 1e-12 * width);
    }
}

TEST(OptimalGain, CompleteGraphCancels) {
    const auto s = abstract_summary(7.0, 7.0, 0.0);
    const auto opt = optimal_gain(s, 1.05, 2.0, 0.0);
    EXPECT_NEAR(opt.g_star, 0.55 / 7.0, 1e-15);
    EXPECT_NEAR(opt.report.alpha0_sq, 0.0, 1e-15);
    ASSERT_TRUE(opt.report.rho_SM.has_value());
    EXPECT_EQ(*opt.report.rho_SM, 1.0);
}

TEST(OptimalGain, TwoEigenvalueExample) {
    const auto s = abstract_summary(1.0, 3.0, 1.0);
    const auto opt = optimal_gain(s, 1.05, 2.0, 0.0);
    EXPECT_NEAR(opt.g_star, 0.275, 1e-15);
    // with zero dispersion every feasible gain has unit margin; g* is the gain
    // with the smallest worst-case alpha0^2, which a grid over g locates
    double best_g = 0.0, best = 1e300;
    for (int i = 1; i <= 2000; ++i) {
        const double g = 4.0 * opt.g_star * i / 2000.0;
        const DynamicsParams p{1.05, 2.0, g, 0.0};
        EXPECT_EQ(check_mss(s, p, 0.0).feasible ? *check_mss(s, p, 0.0).rho_SM : 1.0, 1.0);
        const double worst = std::max(alpha0_sq(1.0, p, 0.0, 1.0), alpha0_sq(3.0, p, 0.0, 1.0));
        if (worst < best) {
            best = worst;
            best_g = g;
        }
    }
    EXPECT_NEAR(best_g, opt.g_star, 4.0 * opt.g_star / 2000.0);
}

TEST(OptimalGain, SingleEigenvalueBranch) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 3; ++i) {
        const double l2 = 1.0 + 5.0 * u(rng);
        const double ct = 1.0 + 2.0 * u(rng);
        const double lN = l2 + 2.0 * ct * u(rng);
        const auto opt = optimal_gain(abstract_summary(l2, lN, 1.0), 1.2, 3.0, ct);
        EXPECT_NEAR(opt.g_star, (1.2 - 1.0 / 3.0) / (l2 + 2.0 * ct), 1e-14);
    }
}

TEST(OptimalGain, MinimisesWorstCaseAlpha) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        const auto d = random_draw(rng);
        const auto s = abstract_summary(d.l2, d.lN, d.tau);
        const auto opt = optimal_gain(s, d.a, d.delta, d.cod);
        auto worst = [&](double g) {
            const DynamicsParams p{d.a, d.delta, g, 0.0};
            return std::max(alpha0_sq(d.l2, p, d.cod, d.tau), alpha0_sq(d.lN, p, d.cod, d.tau));
        };
        const double at_opt = worst(opt.g_star);
        for (int k = 1; k <= 400; ++k) EXPECT_GE(worst(4.0 * opt.g_star * k / 400.0), at_opt - 1e-12);
        // lambda2 binds at g*, possibly tied with lambdaN
        const DynamicsParams p{d.a, d.delta, opt.g_star, 0.0};
        EXPECT_NEAR(check_mss(s, p, d.cod).alpha0_sq, alpha0_sq(d.l2, p, d.cod, d.tau), 1e-12 * (1.0 + at_opt));
    }
}

TEST(OptimalGain, RejectsStableAgents) {
    EXPECT_THROW(optimal_gain(abstract_summary(1, 2, 1), 0.4, 2.0, 0.0), ParameterError);
}

TEST(SaddleGain, MatchesOptimalWhenSpreadIsLarge) {
    const auto s = abstract_summary(1.0, 3.0, 0.0);
    const auto e = saddle_gain(s, 1.05, 2.0, 0.0);
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR(e->g_e, 0.275, 1e-15);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto d = random_draw(rng);
        const auto sd = abstract_summary(d.l2, d.lN, d.tau);
        if (d.lN < d.l2 + 2.0 * d.cod * d.tau) continue;
        EXPECT_NEAR(saddle_gain(sd, d.a, d.delta, d.cod)->g_e, optimal_gain(sd, d.a, d.delta, d.cod).g_star,
                    1e-13 * d.g);
    }
}

TEST(SaddleGain, EqualAlphaAtBothEnds) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 500; ++i) {
        const auto d = random_draw(rng);
        const auto e = saddle_gain(abstract_summary(d.l2, d.lN, d.tau), d.a, d.delta, d.cod);
        ASSERT_TRUE(e.has_value());
        const DynamicsParams p{d.a, d.delta, e->g_e, 0.0};
        const double x = alpha0_sq(d.l2, p, d.cod, d.tau);
        const double y = alpha0_sq(d.lN, p, d.cod, d.tau);
        EXPECT_NEAR(x, y, 1e-10 * std::max(std::abs(x), 1e-300));
        EXPECT_NEAR(e->alpha0_sq, x, 1e-10 * std::max(std::abs(x), 1e-12));
    }
    EXPECT_FALSE(saddle_gain(abstract_summary(4, 4, 1), 1.05, 2.0, 1.0).has_value());
}

namespace {

// margin of one draw with one field perturbed, or nullopt when infeasible
std::optional<double> feasible_margin(const Draw& d) {
    const auto r = check_mss(abstract_summary(d.l2, d.lN, d.tau), {d.a, d.delta, d.g, 0.0}, d.cod);
    if (!r.feasible) return std::nullopt;
    return r.rho_SM;
}

template <class Mutate>
int count_monotonicity_violations(Mutate mutate, double sign, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int violations = 0;
    for (int i = 0; i < 3000; ++i) {
        Draw d = random_draw(rng);
        const auto before = feasible_margin(d);
        mutate(d);
        const auto after = feasible_margin(d);
        if (before && after && sign * (*after - *before) > 1e-12) ++violations;
    }
    return violations;
}

} // namespace

TEST(MarginMonotonicity, NonIncreasingInCod) {
    EXPECT_EQ(count_monotonicity_violations([](Draw& d) { d.cod *= 1.1; }, 1.0, 1), 0);
}

TEST(MarginMonotonicity, NonIncreasingInTau) {
    EXPECT_EQ(count_monotonicity_violations([](Draw& d) { d.tau = std::min(1.0, d.tau * 1.1); }, 1.0, 2), 0);
}

TEST(MarginMonotonicity, NonDecreasingInDelta) {
    EXPECT_EQ(count_monotonicity_violations([](Draw& d) { d.delta *= 1.05; }, -1.0, 3), 0);
}

TEST(MarginMonotonicity, NonIncreasingInAWhileCouplingUndershoots) {
    std::mt19937_64 rng(4);
    int violations = 0, checked = 0;
    for (int i = 0; i < 3000; ++i) {
        Draw d = random_draw(rng);
        const auto r0 = check_mss(abstract_summary(d.l2, d.lN, d.tau), {d.a, d.delta, d.g, 0.0}, d.cod);
        Draw e = d;
        e.a += 0.005;
        const auto r1 = check_mss(abstract_summary(e.l2, e.lN, e.tau), {e.a, e.delta, e.g, 0.0}, e.cod);
        if (!r0.feasible || !r1.feasible || r0.hat_a < 0.0 || r1.lambda_sup != r0.lambda_sup) continue;
        ++checked;
        if (*r1.rho_SM > *r0.rho_SM + 1e-12) ++violations;
    }
    EXPECT_GT(checked, 100);
    EXPECT_EQ(violations, 0);
}
