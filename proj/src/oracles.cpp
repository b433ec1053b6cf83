#include "relfuse/oracles.hpp"

#include "relfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace relfuse::oracle {

PowersetMass::PowersetMass(std::size_t grades, std::map<std::uint32_t, double> masses)
    : grades_(grades), masses_(std::move(masses)) {
    if (grades_ == 0 || grades_ > kMaxPowersetGrades) {
        throw ValidationError("powerset frames support 1..16 grades");
    }
    double total = 0.0;
    for (const auto& [subset, m] : masses_) {
        if (subset == 0) throw ValidationError("mass on the empty set");
        if ((subset & ~full_mask()) != 0) throw ValidationError("subset outside the frame");
        if (!(m >= 0.0)) throw ValidationError("negative or non-finite mass");
        total += m;
    }
    if (!(std::abs(total - 1.0) <= kSumTolerance)) throw ValidationError("powerset masses do not sum to 1");
}

PowersetMass PowersetMass::from_mass_function(const MassFunction& mass) {
    std::map<std::uint32_t, double> masses;
    for (std::size_t n = 0; n < mass.size(); ++n) {
        if (mass.singleton(n) > 0.0) masses[std::uint32_t{1} << n] = mass.singleton(n);
    }
    const std::uint32_t full = (std::uint32_t{1} << mass.size()) - 1u;
    if (mass.frame_mass() > 0.0) masses[full] += mass.frame_mass();
    return PowersetMass(mass.size(), std::move(masses));
}

double PowersetMass::mass(std::uint32_t subset) const {
    auto it = masses_.find(subset);
    return it == masses_.end() ? 0.0 : it->second;
}

PowersetMass dempster_combine_powerset(const PowersetMass& a, const PowersetMass& b) {
    if (a.grades() != b.grades()) throw ValidationError("powerset masses over different frames");
    // Products are summed in sorted order per intersection so the result is
    // independent of argument order.
    std::map<std::uint32_t, std::vector<double>> terms;
    for (const auto& [sa, ma] : a.masses()) {
        for (const auto& [sb, mb] : b.masses()) {
            const std::uint32_t meet = sa & sb;
            if (meet == 0) continue;
            terms[meet].push_back(ma * mb);
        }
    }
    std::map<std::uint32_t, double> joint;
    double agreement = 0.0;
    for (auto& [subset, products] : terms) {
        std::sort(products.begin(), products.end());
        const double m = std::accumulate(products.begin(), products.end(), 0.0);
        joint[subset] = m;
        agreement += m;
    }
    if (!(agreement > 0.0)) throw TotalConflictError("total conflict in powerset combination", 0);
    for (auto& [subset, m] : joint) m /= agreement;
    return PowersetMass(a.grades(), std::move(joint));
}

std::vector<double> GridAxis::points() const {
    if (resolution == 1) return {std::sqrt(low * high)};
    std::vector<double> out(resolution);
    const double lo = std::log(low), hi = std::log(high);
    const double step = (hi - lo) / static_cast<double>(resolution - 1);
    for (std::size_t i = 0; i < resolution; ++i) {
        out[i] = std::clamp(std::exp(lo + step * static_cast<double>(i)), low, high);
    }
    out.front() = low;
    out.back() = high;
    return out;
}

HyperPrior HyperPrior::flat_log(std::size_t resolution) {
    HyperPrior prior;
    for (auto& axis : prior.axes) axis = GridAxis{eb::kParamLow, eb::kParamHigh, resolution};
    return prior;
}

HyperPrior HyperPrior::point_mass(const eb::HyperParams& phi) {
    HyperPrior prior;
    prior.axes[0] = GridAxis{phi.first(), phi.first(), 1};
    prior.axes[1] = GridAxis{phi.second(), phi.second(), 1};
    return prior;
}

void validate_hyperprior(const HyperPrior& prior) {
    for (const auto& axis : prior.axes) {
        if (!(axis.low >= eb::kParamLow && axis.high <= eb::kParamHigh && axis.low <= axis.high)) {
            throw ValidationError("hyperprior box must satisfy 1e-3 <= low <= high <= 1e3");
        }
        if (axis.resolution == 0) throw ValidationError("hyperprior resolution must be positive");
        if (axis.low == axis.high && axis.resolution != 1) {
            throw ValidationError("a degenerate hyperprior axis must have resolution 1");
        }
    }
}

std::pair<eb::HyperParams, double> grid_marginal_argmax(const eb::ObservationSet& obs, const HyperPrior& box) {
    validate_hyperprior(box);
    const auto first = box.axes[0].points();
    const auto second = box.axes[1].points();
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (std::size_t j = 0; j < second.size(); ++j) {
            const double v = eb::detail::log_marginal_at(obs, first[i], second[j]);
            if (v > best) {
                best = v;
                best_i = i;
                best_j = j;
            }
        }
    }
    return {eb::HyperParams(first[best_i], second[best_j]), best};
}

std::vector<double> theta_grid(const eb::ObservationSet& obs, const eb::UnitData& unit, std::size_t points) {
    if (points < 2) throw ValidationError("theta grid needs at least 2 points");
    std::vector<double> theta(points);
    double upper = 1.0;
    if (obs.family() != eb::PriorFamily::BetaBinomial) {
        auto counts = [](const eb::UnitData& u) -> std::pair<double, double> {
            if (const auto* c = std::get_if<eb::CountData>(&u.data)) return {c->events, c->exposure};
            const auto& l = std::get<eb::LifetimeData>(u.data);
            return {l.failures, l.total_time};
        };
        double events = 0.0, time = 0.0;
        for (const auto& u : obs.units()) {
            const auto [k, t] = counts(u);
            events += k;
            time += t;
        }
        const auto [k_unit, t_unit] = counts(unit);
        upper = 10.0 * std::max((events + 1.0) / time, (k_unit + 1.0) / t_unit);
    }
    for (std::size_t i = 0; i < points; ++i) {
        theta[i] = upper * (static_cast<double>(i) + 0.5) / static_cast<double>(points);
    }
    return theta;
}

namespace {

// Precomputed logs of the Θ grid so each conjugate density costs one exp per point.
struct ThetaLogs {
    std::vector<double> log_theta;
    std::vector<double> other;  // log(1-θ) for beta, θ itself for gamma

    ThetaLogs(eb::PriorFamily family, const std::vector<double>& theta) {
        log_theta.reserve(theta.size());
        other.reserve(theta.size());
        for (double t : theta) {
            log_theta.push_back(std::log(t));
            other.push_back(family == eb::PriorFamily::BetaBinomial ? std::log1p(-t) : t);
        }
    }
};

void add_density(eb::PriorFamily family, double first, double second, const ThetaLogs& logs, double weight,
                 std::vector<double>& out, std::vector<double>& scratch) {
    const std::size_t m = logs.log_theta.size();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        const double v = family == eb::PriorFamily::BetaBinomial
                             ? (first - 1.0) * logs.log_theta[i] + (second - 1.0) * logs.other[i]
                             : (first - 1.0) * logs.log_theta[i] - second * logs.other[i];
        scratch[i] = v;
        peak = std::max(peak, v);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        scratch[i] = std::exp(scratch[i] - peak);
        total += scratch[i];
    }
    const double scale = weight / total;
    for (std::size_t i = 0; i < m; ++i) out[i] += scratch[i] * scale;
}

void normalize(std::vector<double>& p) {
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= total;
}

} // namespace

DiscretePosterior discretize(const eb::PosteriorParams& post, std::vector<double> theta) {
    const ThetaLogs logs(post.family, theta);
    std::vector<double> p(theta.size(), 0.0), scratch(theta.size());
    add_density(post.family, post.first, post.second, logs, 1.0, p, scratch);
    normalize(p);
    return {std::move(theta), std::move(p)};
}

DiscretePosterior hierarchical_posterior_quadrature(const eb::ObservationSet& obs, const eb::UnitData& unit,
                                                    const HyperPrior& hyperprior, std::size_t theta_points) {
    validate_hyperprior(hyperprior);
    if (unit.family() != obs.family()) throw ValidationError("unit does not match observation family");
    const auto first = hyperprior.axes[0].points();
    const auto second = hyperprior.axes[1].points();

    // Flat prior in log coordinates on an evenly spaced log grid: p(Φ) is constant.
    std::vector<double> log_weight(first.size() * second.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (std::size_t j = 0; j < second.size(); ++j) {
            const double v = eb::detail::log_marginal_at(obs, first[i], second[j]);
            log_weight[i * second.size() + j] = v;
            if (v > peak) peak = v;
        }
    }
    if (!std::isfinite(peak)) throw ValidationError("all hyperprior grid weights underflow");

    auto theta = theta_grid(obs, unit, theta_points);
    const ThetaLogs logs(obs.family(), theta);
    std::vector<double> p(theta.size(), 0.0), scratch(theta.size());
    // Cells whose weight underflows to zero contribute nothing.
    constexpr double kUnderflow = -745.0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (std::size_t j = 0; j < second.size(); ++j) {
            const double rel = log_weight[i * second.size() + j] - peak;
            if (rel < kUnderflow) continue;
            const auto post = eb::posterior(obs.family(), eb::HyperParams(first[i], second[j]), unit);
            add_density(obs.family(), post.first, post.second, logs, std::exp(rel), p, scratch);
        }
    }
    normalize(p);
    return {std::move(theta), std::move(p)};
}

double total_variation(const DiscretePosterior& p, const DiscretePosterior& q) {
    if (p.probability.size() != q.probability.size()) throw ValidationError("posteriors on different grids");
    double tv = 0.0;
    for (std::size_t i = 0; i < p.probability.size(); ++i) tv += std::abs(p.probability[i] - q.probability[i]);
    return 0.5 * tv;
}

namespace {

using LogDensity = std::function<double(double)>;

// Range in the integration variable outside which the log integrand sits
// more than 80 nats below its peak, located by a coarse scan.
std::pair<double, double> significant_range(const LogDensity& logf) {
    constexpr double kLo = -100.0, kHi = 100.0;
    constexpr std::size_t kScan = 4001;
    constexpr double kDrop = 80.0;
    const double step = (kHi - kLo) / static_cast<double>(kScan - 1);
    std::vector<double> values(kScan);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kScan; ++i) {
        values[i] = logf(kLo + step * static_cast<double>(i));
        if (values[i] > peak) peak = values[i];
    }
    if (!std::isfinite(peak)) throw ValidationError("quadrature integrand vanishes everywhere");
    std::size_t first = kScan, last = 0;
    for (std::size_t i = 0; i < kScan; ++i) {
        if (values[i] > peak - kDrop) {
            first = std::min(first, i);
            last = i;
        }
    }
    const double lo = kLo + step * static_cast<double>(first == 0 ? 0 : first - 1);
    const double hi = kLo + step * static_cast<double>(std::min(last + 1, kScan - 1));
    return {lo, hi};
}

struct Nodes {
    std::vector<double> x;
    std::vector<double> weight;  // trapezoid weight times exp(logf - peak)
};

Nodes trapezoid(const LogDensity& logf, double lo, double hi, std::size_t points) {
    Nodes nodes;
    nodes.x.resize(points);
    std::vector<double> values(points);
    const double h = (hi - lo) / static_cast<double>(points - 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i) {
        nodes.x[i] = lo + h * static_cast<double>(i);
        values[i] = logf(nodes.x[i]);
        peak = std::max(peak, values[i]);
    }
    nodes.weight.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double end = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
        nodes.weight[i] = end * std::exp(values[i] - peak);
    }
    return nodes;
}

double log_sigmoid(double u) { return -std::log1p(std::exp(-u)); }

} // namespace

std::array<double, 2> posterior_moments_quadrature(eb::PriorFamily family, const eb::HyperParams& prior,
                                                   const eb::UnitData& unit, std::size_t points) {
    eb::validate_unit(unit);
    if (unit.family() != family) throw ValidationError("unit does not match family");
    if (points < 3) throw ValidationError("quadrature needs at least 3 points");
    const double p1 = prior.first(), p2 = prior.second();

    LogDensity log_integrand;
    std::function<double(double)> theta_of;
    if (const auto* d = std::get_if<eb::DemandData>(&unit.data)) {
        // θ = sigmoid(u); dθ = θ(1-θ) du.
        const double s = d->successes, f = d->trials - d->successes;
        log_integrand = [=](double u) {
            const double lt = log_sigmoid(u), l1t = log_sigmoid(-u);
            const double log_prior = (p1 - 1.0) * lt + (p2 - 1.0) * l1t;
            const double log_lik = s * lt + f * l1t;
            return log_prior + log_lik + lt + l1t;
        };
        theta_of = [](double u) { return 1.0 / (1.0 + std::exp(-u)); };
    } else {
        // λ = exp(u); dλ = λ du.
        double k = 0.0, t = 0.0;
        if (const auto* c = std::get_if<eb::CountData>(&unit.data)) {
            k = c->events;
            t = c->exposure;
        } else {
            const auto& l = std::get<eb::LifetimeData>(unit.data);
            k = l.failures;
            t = l.total_time;
        }
        log_integrand = [=](double u) {
            const double lambda = std::exp(u);
            const double log_prior = (p1 - 1.0) * u - p2 * lambda;
            const double log_lik = k * u - lambda * t;
            return log_prior + log_lik + u;
        };
        theta_of = [](double u) { return std::exp(u); };
    }

    const auto [lo, hi] = significant_range(log_integrand);
    const Nodes nodes = trapezoid(log_integrand, lo, hi, points);
    double z = 0.0, first_moment = 0.0;
    std::vector<double> theta(points);
    for (std::size_t i = 0; i < points; ++i) {
        theta[i] = theta_of(nodes.x[i]);
        z += nodes.weight[i];
        first_moment += nodes.weight[i] * theta[i];
    }
    const double mean = first_moment / z;
    double central = 0.0;
    for (std::size_t i = 0; i < points; ++i) central += nodes.weight[i] * (theta[i] - mean) * (theta[i] - mean);
    return {mean, central / z};
}

double mission_survival_quadrature(double shape, double rate, double mission_time, std::size_t points) {
    if (!(shape > 0.0) || !(rate > 0.0) || !(mission_time >= 0.0)) {
        throw ValidationError("invalid gamma parameters or mission time");
    }
    const LogDensity log_gamma = [=](double u) { return shape * u - rate * std::exp(u); };
    const LogDensity log_survival = [=](double u) { return log_gamma(u) - mission_time * std::exp(u); };
    const auto [lo_a, hi_a] = significant_range(log_gamma);
    const auto [lo_b, hi_b] = significant_range(log_survival);
    const double lo = std::min(lo_a, lo_b), hi = std::max(hi_a, hi_b);

    const Nodes nodes = trapezoid(log_gamma, lo, hi, points);
    double z = 0.0, survival = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        z += nodes.weight[i];
        survival += nodes.weight[i] * std::exp(-mission_time * std::exp(nodes.x[i]));
    }
    return survival / z;
}

namespace {

PowersetNodeResult powerset_node(const AttributeNode& node, const GradeFrame& frame, WeightScheme weighting,
                                 std::map<std::string, PowersetNodeResult>& out) {
    const std::size_t n = frame.size();
    const std::uint32_t full = (std::uint32_t{1} << n) - 1u;
    auto weighted = [&](double weight, std::span<const double> beliefs) {
        std::map<std::uint32_t, double> masses;
        double assigned = 0.0;
        for (std::size_t g = 0; g < n; ++g) {
            masses[std::uint32_t{1} << g] = weight * beliefs[g];
            assigned += weight * beliefs[g];
        }
        masses[full] = std::max(0.0, 1.0 - assigned);
        return PowersetMass(n, std::move(masses));
    };

    if (node.is_leaf()) return {{node.belief().beliefs().begin(), node.belief().beliefs().end()}, node.belief().residual()};

    const auto& children = node.children();
    double total_weight = 0.0;
    for (const auto& c : children) total_weight += c.weight;
    if (weighting == WeightScheme::Absolute) total_weight = 1.0;

    std::optional<PowersetMass> acc;
    for (const auto& child : children) {
        std::vector<double> beliefs;
        if (child.is_leaf()) {
            beliefs.assign(child.belief().beliefs().begin(), child.belief().beliefs().end());
        } else {
            beliefs = powerset_node(child, frame, weighting, out).singletons;
        }
        PowersetMass mass = weighted(child.weight / total_weight, beliefs);
        acc = acc ? dempster_combine_powerset(*acc, mass) : std::move(mass);
    }
    PowersetNodeResult result;
    for (std::size_t g = 0; g < n; ++g) result.singletons.push_back(acc->mass(std::uint32_t{1} << g));
    result.frame_mass = acc->mass(full);
    out[node.id] = result;
    return result;
}

} // namespace

std::map<std::string, PowersetNodeResult> aggregate_tree_powerset(const AttributeNode& root,
                                                                  const GradeFrame& frame, WeightScheme weighting) {
    validate_tree(root, frame);
    if (frame.size() > kMaxPowersetGrades) throw ValidationError("powerset oracle supports at most 16 grades");
    std::map<std::string, PowersetNodeResult> out;
    const auto top = powerset_node(root, frame, weighting, out);
    out[root.id] = top;
    return out;
}

} // namespace relfuse::oracle
