#include "relfuse/er.hpp"
#include "relfuse/error.hpp"
#include "relfuse/oracles.hpp"

#include "support/generators.hpp"

#include "doctest.h"

#include <cmath>

using namespace relfuse;
using namespace relfuse::oracle;

namespace {

PowersetMass two_grade(double h1, double h2, double frame) {
    std::map<std::uint32_t, double> m;
    if (h1 > 0) m[0b01] = h1;
    if (h2 > 0) m[0b10] = h2;
    if (frame > 0) m[0b11] = frame;
    return PowersetMass(2, m);
}

} // namespace

TEST_CASE("powerset mass validation") {
    CHECK_THROWS_AS(PowersetMass(2, {{0, 1.0}}), ValidationError);
    CHECK_THROWS_AS(PowersetMass(2, {{0b100, 1.0}}), ValidationError);
    CHECK_THROWS_AS(PowersetMass(2, {{0b01, 0.4}}), ValidationError);
    CHECK_THROWS_AS(PowersetMass(17, {{1, 1.0}}), ValidationError);
}

TEST_CASE("dempster_combine_powerset worked cases") {
    SUBCASE("vacuous partner is the identity") {
        const auto a = two_grade(0.3, 0.5, 0.2);
        const auto r = dempster_combine_powerset(a, two_grade(0, 0, 1));
        CHECK(r.mass(0b01) == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(r.mass(0b10) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(r.mass(0b11) == doctest::Approx(0.2).epsilon(1e-15));
    }
    SUBCASE("agreeing discounted evidence") {
        const auto a = two_grade(0.5, 0, 0.5);
        const auto r = dempster_combine_powerset(a, a);
        CHECK(r.mass(0b01) == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(r.mass(0b10) == 0.0);
        CHECK(r.mass(0b11) == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("opposing discounted evidence") {
        const auto r = dempster_combine_powerset(two_grade(0.5, 0, 0.5), two_grade(0, 0.5, 0.5));
        for (std::uint32_t s : {0b01u, 0b10u, 0b11u}) CHECK(r.mass(s) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
    SUBCASE("disjoint certainties") {
        CHECK_THROWS_AS(dempster_combine_powerset(two_grade(1, 0, 0), two_grade(0, 1, 0)), TotalConflictError);
    }
}

TEST_CASE("powerset rule is commutative and associative on general focal sets") {
    testing::Rng rng(61);
    auto random_powerset = [&](std::size_t n) {
        std::map<std::uint32_t, double> m;
        double total = 0.0;
        for (int i = 0; i < 4; ++i) {
            const auto subset = static_cast<std::uint32_t>(testing::pick(rng, 1, (1u << n) - 1));
            const double v = testing::uniform(rng, 0.05, 1.0);
            m[subset] += v;
            total += v;
        }
        m[(1u << n) - 1] += 0.1;
        total += 0.1;
        for (auto& [s, v] : m) v /= total;
        return PowersetMass(n, m);
    };
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = testing::pick(rng, 2, 5);
        const auto a = random_powerset(n), b = random_powerset(n), c = random_powerset(n);
        const auto ab = dempster_combine_powerset(a, b), ba = dempster_combine_powerset(b, a);
        for (std::uint32_t s = 1; s < (1u << n); ++s) CHECK(ab.mass(s) == ba.mass(s));
        const auto left = dempster_combine_powerset(ab, c);
        const auto right = dempster_combine_powerset(a, dempster_combine_powerset(b, c));
        for (std::uint32_t s = 1; s < (1u << n); ++s) CHECK(std::abs(left.mass(s) - right.mass(s)) < 1e-12);
    }
}

TEST_CASE("restricted to singletons and frame the oracle reproduces combine_pair") {
    testing::Rng rng(67);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = testing::pick(rng, 2, 8);
        const auto a = testing::random_mass(rng, n), b = testing::random_mass(rng, n);
        const auto [m, d] = er::combine_pair(a, b);
        const auto r = dempster_combine_powerset(PowersetMass::from_mass_function(a), PowersetMass::from_mass_function(b));
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(m.singleton(k) - r.mass(1u << k)) < 1e-12);
        CHECK(std::abs(m.frame_mass() - r.mass((1u << n) - 1)) < 1e-12);
    }
}

TEST_CASE("grid axes") {
    const GridAxis axis{1e-3, 1e3, 7};
    const auto p = axis.points();
    REQUIRE(p.size() == 7);
    CHECK(p.front() == 1e-3);
    CHECK(p.back() == 1e3);
    CHECK(p[3] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(GridAxis{2.0, 8.0, 1}.points() == std::vector<double>{4.0});
    HyperPrior bad;
    bad.axes[0] = GridAxis{5.0, 1.0, 10};
    CHECK_THROWS_AS(validate_hyperprior(bad), ValidationError);
}

TEST_CASE("grid_marginal_argmax") {
    SUBCASE("mirrored data puts the grid optimum on the diagonal") {
        const eb::ObservationSet obs(eb::PriorFamily::BetaBinomial,
                                     {{"a", eb::Provenance::Observed, eb::DemandData{20, 4}},
                                      {"b", eb::Provenance::Observed, eb::DemandData{20, 16}},
                                      {"c", eb::Provenance::Observed, eb::DemandData{20, 9}},
                                      {"d", eb::Provenance::Observed, eb::DemandData{20, 11}}});
        const auto prior = HyperPrior::flat_log(200);
        const auto [best, value] = grid_marginal_argmax(obs, prior);
        const auto fit = eb::fit_hyperparams(obs);
        CHECK(fit.estimate.first() == doctest::Approx(fit.estimate.second()).epsilon(1e-6));
        const double cell = std::log(1e6) / 199.0;
        CHECK(std::abs(std::log(best.first()) - std::log(fit.estimate.first())) <= cell);
        CHECK(std::abs(std::log(best.second()) - std::log(fit.estimate.second())) <= cell);
        CHECK(best.first() == best.second());
    }
    SUBCASE("refinement does not lower the best value") {
        const auto obs = testing::simulate_beta_binomial(5, 30, 20, 2, 5);
        const double coarse = grid_marginal_argmax(obs, HyperPrior::flat_log(10)).second;
        const double fine = grid_marginal_argmax(obs, HyperPrior::flat_log(200)).second;
        CHECK(fine >= coarse);
    }
    SUBCASE("single cell") {
        const auto obs = testing::simulate_beta_binomial(5, 30, 20, 2, 5);
        HyperPrior one;
        one.axes[0] = GridAxis{2.0, 8.0, 1};
        one.axes[1] = GridAxis{1.0, 9.0, 1};
        const auto [best, value] = grid_marginal_argmax(obs, one);
        CHECK(best.first() == doctest::Approx(4.0).epsilon(1e-15));
        CHECK(best.second() == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(value == eb::log_marginal(obs, best));
    }
}

TEST_CASE("hierarchical posterior quadrature") {
    const auto obs = testing::simulate_beta_binomial(9, 40, 20, 2, 5);
    const auto& unit = obs.units().front();
    const eb::HyperParams phi(2.0, 5.0);

    SUBCASE("point-mass hyperprior collapses to the conjugate posterior") {
        const auto h = hierarchical_posterior_quadrature(obs, unit, HyperPrior::point_mass(phi));
        const auto ref = discretize(eb::posterior(obs.family(), phi, unit), theta_grid(obs, unit));
        REQUIRE(h.probability.size() == kThetaPoints);
        double sum = 0.0;
        for (std::size_t i = 0; i < h.probability.size(); ++i) {
            CHECK(std::abs(h.probability[i] - ref.probability[i]) < 1e-8);
            sum += h.probability[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-10);
    }
    SUBCASE("single-cell box matches the point mass at its centre") {
        HyperPrior cell;
        cell.axes[0] = GridAxis{1.0, 4.0, 1};
        cell.axes[1] = GridAxis{2.5, 10.0, 1};
        const auto h = hierarchical_posterior_quadrature(obs, unit, cell);
        const auto p = hierarchical_posterior_quadrature(obs, unit, HyperPrior::point_mass(phi));
        CHECK(total_variation(h, p) < 1e-8);
    }
    SUBCASE("gamma families integrate to one") {
        testing::Rng rng(71);
        for (auto family : {eb::PriorFamily::GammaPoisson, eb::PriorFamily::GammaExponential}) {
            const auto gobs = testing::random_observations(rng, family, 10);
            const auto h = hierarchical_posterior_quadrature(gobs, gobs.units().front(), HyperPrior::flat_log(40));
            double sum = 0.0;
            for (double p : h.probability) sum += p;
            CHECK(std::abs(sum - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("mission survival quadrature reproduces the closed form") {
    for (double shape : {0.7, 2.0, 15.0}) {
        for (double rate : {0.5, 30.0, 800.0}) {
            for (double t : {0.0, 1.0, 50.0, 1000.0}) {
                const double exact = std::pow(rate / (rate + t), shape);
                CHECK(std::abs(mission_survival_quadrature(shape, rate, t) - exact) < 1e-10);
            }
        }
    }
}
