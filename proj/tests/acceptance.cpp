// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: relfuse_acceptance [path-to-rel]

#include "relfuse/commands.hpp"
#include "relfuse/eb.hpp"
#include "relfuse/er.hpp"
#include "relfuse/oracles.hpp"

#include "support/generators.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace relfuse;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = RELFUSE_DATA_DIR;

struct Outcome {
    bool passed;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

oracle::PowersetMass powerset_fold(std::span<const MassFunction> masses) {
    auto acc = oracle::PowersetMass::from_mass_function(masses[0]);
    for (std::size_t i = 1; i < masses.size(); ++i) {
        acc = oracle::dempster_combine_powerset(acc, oracle::PowersetMass::from_mass_function(masses[i]));
    }
    return acc;
}

double max_deviation(const er::AggregationResult& x, const er::AggregationResult& y) {
    double dev = std::abs(x.unassigned - y.unassigned);
    for (std::size_t k = 0; k < x.combined_beliefs.size(); ++k) {
        dev = std::max(dev, std::abs(x.combined_beliefs[k] - y.combined_beliefs[k]));
    }
    return dev;
}

Outcome er_oracle_equivalence() {
    testing::Rng rng(1001);
    double worst = 0.0;
    const auto start = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = testing::pick(rng, 2, 5), l = testing::pick(rng, 2, 6);
        std::vector<double> raw(l);
        for (auto& w : raw) w = testing::uniform(rng, 0.0, 1.0);
        const auto weights = er::normalize_weights(raw);
        std::vector<MassFunction> masses;
        for (double w : weights) masses.push_back(er::assign_masses(w, testing::random_belief(rng, n)));
        const auto [out, diags] = er::fold_attributes(masses);
        const auto ref = powerset_fold(masses);
        for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(out.singleton(k) - ref.mass(1u << k)));
        worst = std::max(worst, std::abs(out.frame_mass() - ref.mass(ref.full_mask())));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst < 1e-12 && secs < 5.0,
            fmt("1000 instances, max deviation %.3g (tol 1e-12), %.2f s (limit 5 s)", worst, secs)};
}

Outcome product_rule_reduction() {
    testing::Rng rng(1002);
    double worst = 0.0;
    int done = 0;
    while (done < 200) {
        const std::size_t n = testing::pick(rng, 2, 5), l = testing::pick(rng, 2, 6);
        std::vector<MassFunction> masses;
        for (std::size_t i = 0; i < l; ++i) masses.push_back(er::assign_masses(1.0, testing::random_belief(rng, n, false)));
        std::vector<double> product(n, 1.0);
        double z = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            for (const auto& m : masses) product[k] *= m.singleton(k);
            z += product[k];
        }
        if (z == 0.0) continue; // disjoint support is a total conflict, not a reduction instance
        const auto [out, diags] = er::fold_attributes(masses);
        for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(out.singleton(k) - product[k] / z));
        worst = std::max(worst, std::abs(out.frame_mass()));
        ++done;
    }
    return {worst < 1e-12, fmt("200 complete full-weight instances, max deviation %.3g (tol 1e-12)", worst)};
}

Outcome permutation_invariance() {
    testing::Rng rng(1003);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = testing::pick(rng, 2, 5);
        const auto frame = make_frame(testing::grade_labels(n));
        const auto tree = trial % 2 ? testing::random_two_level_tree(rng, n)
                                    : testing::random_flat_tree(rng, n, testing::pick(rng, 2, 6));
        const auto base = er::aggregate_tree(tree, frame);
        for (int p = 0; p < 10; ++p) {
            auto children = tree.children();
            std::shuffle(children.begin(), children.end(), rng);
            worst = std::max(worst, max_deviation(base, er::aggregate_tree(AttributeNode::group("root", 1.0, children), frame)));
        }
    }
    return {worst < 1e-12, fmt("200 instances x 10 permutations, max deviation %.3g (tol 1e-12)", worst)};
}

Outcome neutrality_and_consensus() {
    testing::Rng rng(1004);
    double neutral = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = testing::pick(rng, 2, 5);
        const auto frame = make_frame(testing::grade_labels(n));
        const auto tree = testing::random_flat_tree(rng, n, testing::pick(rng, 1, 5));
        auto children = tree.children();
        children.insert(children.begin() + testing::pick(rng, 0, children.size()),
                        AttributeNode::leaf("ghost", 0.0, testing::random_belief(rng, n)));
        neutral = std::max(neutral, max_deviation(er::aggregate_tree(tree, frame),
                                                  er::aggregate_tree(AttributeNode::group("root", 1.0, children), frame)));
    }
    double off_target = 0.0, consensus = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = testing::pick(rng, 2, 5), target = testing::pick(rng, 0, n - 1);
        const auto frame = make_frame(testing::grade_labels(n));
        std::vector<double> v(n, 0.0);
        v[target] = 1.0;
        std::vector<AttributeNode> leaves;
        for (std::size_t i = 0, l = testing::pick(rng, 1, 6); i < l; ++i) {
            leaves.push_back(AttributeNode::leaf("a" + std::to_string(i), testing::uniform(rng, 0.05, 1.0), make_belief(frame, v)));
        }
        const auto root = AttributeNode::group("root", 1.0, leaves);
        const auto raw = er::aggregate_tree(root, frame);
        for (std::size_t k = 0; k < n; ++k) {
            if (k != target) off_target = std::max(off_target, std::abs(raw.combined_beliefs[k]));
        }
        const auto prop = er::aggregate_tree(root, frame, {FinalizationMode::Proportional});
        consensus = std::max(consensus, std::abs(prop.combined_beliefs[target] - 1.0));
    }
    return {neutral < 1e-12 && off_target < 1e-12 && consensus < 1e-12,
            fmt("zero-weight deviation %.3g, off-grade belief %.3g, proportional |beta-1| %.3g (tol 1e-12)", neutral,
                off_target, consensus)};
}

Outcome conjugacy() {
    testing::Rng rng(1005);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto family = testing::kFamilies[testing::pick(rng, 0, 2)];
        const auto prior = testing::random_interior_params(rng);
        const auto unit = testing::random_observations(rng, family, 1).units().front();
        const auto closed = eb::posterior_moments(eb::posterior(family, prior, unit));
        const auto quad = oracle::posterior_moments_quadrature(family, prior, unit, 1000);
        worst = std::max({worst, std::abs(quad[0] / closed[0] - 1.0), std::abs(quad[1] / closed[1] - 1.0)});
    }
    return {worst < 1e-6, fmt("50 triples, max relative error of mean/variance %.3g (tol 1e-6)", worst)};
}

Outcome gradient_check() {
    testing::Rng rng(1006);
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (auto family : testing::kFamilies) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto obs = testing::random_observations(rng, family, testing::pick(rng, 2, 20));
            const auto phi = testing::random_interior_params(rng);
            const double la = std::log(phi.first()), lb = std::log(phi.second());
            const auto f = [&](double x, double y) { return eb::detail::log_marginal_at(obs, std::exp(x), std::exp(y)); };
            const std::array<double, 2> fd{(f(la + h, lb) - f(la - h, lb)) / (2 * h), (f(la, lb + h) - f(la, lb - h)) / (2 * h)};
            const auto g = eb::log_marginal_grad(obs, phi);
            worst = std::max(worst, std::hypot(g[0] - fd[0], g[1] - fd[1]) / std::max(std::hypot(fd[0], fd[1]), 1e-8));
        }
    }
    return {worst < 1e-4, fmt("150 points, max relative error %.3g (tol 1e-4)", worst)};
}

Outcome optimizer_optimality() {
    double worst = -INFINITY;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto obs = testing::simulate_beta_binomial(7000 + seed, 30, 20, 2.0, 5.0);
        const auto fit = eb::fit_hyperparams(obs);
        const auto [best, value] = oracle::grid_marginal_argmax(obs, oracle::HyperPrior::flat_log(200));
        worst = std::max(worst, value - fit.log_marginal);
    }
    return {worst <= 1e-3, fmt("20 datasets, max (grid best - fit) %.3g (tol 1e-3)", worst)};
}

Outcome statistical_recovery() {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto fit = eb::fit_hyperparams(testing::simulate_beta_binomial(8000 + seed, 200, 50, 2.0, 5.0));
        const double mean = fit.estimate.first() / (fit.estimate.first() + fit.estimate.second());
        if (std::abs(mean - 2.0 / 7.0) <= 0.05) ++hits;
    }
    return {hits >= 16, fmt("%d of 20 seeds within 0.05 of 2/7 (need 16)", hits)};
}

Outcome eb_vs_hierarchical() {
    const auto out = cli::cmd_validate(kDataDir / "pumpsets.json", cli::ValidateKind::Eb);
    if (out.exit_code != cli::kOk && out.exit_code != cli::kValidationFailed) return {false, out.message};
    const auto report = io::Json::parse(out.report);
    double tv = NAN, convergence = NAN;
    for (const auto& check : report["checks"]) {
        if (check["name"] == "eb-vs-hierarchical-total-variation") tv = check["value"];
        if (check["name"] == "hierarchical-grid-convergence-total-variation") convergence = check["value"];
    }
    return {tv < 0.1 && convergence < 1e-3,
            fmt("pumpsets, TV(EB, hierarchical) %.3g (tol 0.1), TV(100, 200) %.3g (tol 1e-3)", tv, convergence)};
}

Outcome predictive_sanity() {
    testing::Rng rng(1010);
    double at_zero = 0.0, violation = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto family = trial % 2 ? eb::PriorFamily::GammaPoisson : eb::PriorFamily::GammaExponential;
        const auto unit = testing::random_observations(rng, family, 1).units().front();
        const auto post = eb::posterior(family, testing::random_interior_params(rng), unit);
        const double horizon = 10.0 * post.second / post.first;
        double prev = eb::predictive_reliability(family, post.first, post.second, eb::PredictiveQuery::mission(0.0));
        at_zero = std::max(at_zero, std::abs(prev - 1.0));
        for (int i = 1; i < 100; ++i) {
            const double r = eb::predictive_reliability(family, post.first, post.second,
                                                        eb::PredictiveQuery::mission(horizon * i / 99.0));
            violation = std::max(violation, r - prev);
            prev = r;
        }
    }
    return {at_zero == 0.0 && violation <= 1e-12,
            fmt("50 posteriors, |R(0)-1| %.3g, largest increase %.3g (tol 1e-12)", at_zero, violation)};
}

int run(const std::string& command) {
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome golden_files(const std::string& rel) {
    if (rel.empty()) return {false, "no rel binary given"};
    const fs::path dir = fs::temp_directory_path() / ("relfuse-golden-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string motorcycle = (kDataDir / "motorcycle.json").string(), pumps = (kDataDir / "pumpsets.json").string();
    const auto out = [&](const char* name) { return (dir / name).string(); };
    bool identical = true;
    for (const char* suffix : {"1", "2"}) {
        run(rel + " er assess " + motorcycle + " --out " + out("er") + suffix);
        run(rel + " eb fit " + pumps + " --out " + out("eb") + suffix);
    }
    identical = fs::exists(out("er1")) && fs::exists(out("eb1")) && slurp(out("er1")) == slurp(out("er2")) &&
                slurp(out("eb1")) == slurp(out("eb2"));
    const int er_code = run(rel + " validate " + motorcycle + " --kind er --out " + out("ver"));
    const int eb_code = run(rel + " validate " + pumps + " --kind eb --out " + out("veb"));
    fs::remove_all(dir);
    return {identical && er_code == 0 && eb_code == 0,
            fmt("reports %s across runs, validate exit codes er=%d eb=%d", identical ? "identical" : "differ", er_code,
                eb_code)};
}

} // namespace

int main(int argc, char** argv) {
    const std::string rel = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"ER oracle equivalence", er_oracle_equivalence},
        {"product rule reduction", product_rule_reduction},
        {"permutation invariance", permutation_invariance},
        {"zero-weight neutrality and consensus", neutrality_and_consensus},
        {"conjugacy", conjugacy},
        {"gradient check", gradient_check},
        {"optimizer optimality", optimizer_optimality},
        {"statistical recovery", statistical_recovery},
        {"EB vs hierarchical", eb_vs_hierarchical},
        {"predictive sanity", predictive_sanity},
        {"golden files", [&] { return golden_files(rel); }},
    };
    int failures = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.passed) ++failures;
        std::printf("%s %2zu %s: %s\n", outcome.passed ? "PASS" : "FAIL", i + 1, criteria[i].first, outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed in %.1f s\n", int(criteria.size()) - failures, criteria.size(),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    return failures == 0 ? 0 : 1;
}
