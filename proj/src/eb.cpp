#include "relfuse/eb.hpp"

#include "relfuse/error.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace relfuse::eb {

namespace {

const double kLogLow = std::log(kParamLow);
const double kLogHigh = std::log(kParamHigh);

double digamma(double x) { return boost::math::digamma(x); }

bool in_box(double v) { return v >= kParamLow && v <= kParamHigh; }

std::string describe(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string to_string(PriorFamily family) {
    switch (family) {
    case PriorFamily::BetaBinomial: return "beta-binomial";
    case PriorFamily::GammaPoisson: return "gamma-poisson";
    case PriorFamily::GammaExponential: return "gamma-exponential";
    }
    return "unknown";
}

PriorFamily parse_family(std::string_view text) {
    if (text == "beta-binomial") return PriorFamily::BetaBinomial;
    if (text == "gamma-poisson") return PriorFamily::GammaPoisson;
    if (text == "gamma-exponential") return PriorFamily::GammaExponential;
    throw ValidationError("unknown prior family '" + std::string(text) + "'");
}

std::string to_string(Provenance provenance) {
    return provenance == Provenance::Observed ? "observed" : "expert-elicited";
}

Provenance parse_provenance(std::string_view text) {
    if (text == "observed") return Provenance::Observed;
    if (text == "expert-elicited") return Provenance::ExpertElicited;
    throw ValidationError("unknown provenance '" + std::string(text) + "'");
}

HyperParams::HyperParams(double first, double second) : first_(first), second_(second) {
    if (!in_box(first) || !in_box(second)) {
        throw ValidationError("hyperparameters (" + describe(first) + ", " + describe(second) +
                              ") outside working box [1e-3, 1e3]");
    }
}

HyperParams HyperParams::from_log(double log_first, double log_second) {
    auto to_box = [](double x) { return std::clamp(std::exp(x), kParamLow, kParamHigh); };
    return HyperParams(to_box(log_first), to_box(log_second));
}

PriorFamily UnitData::family() const noexcept {
    switch (data.index()) {
    case 0: return PriorFamily::BetaBinomial;
    case 1: return PriorFamily::GammaPoisson;
    default: return PriorFamily::GammaExponential;
    }
}

void validate_unit(const UnitData& unit) {
    const std::string where = "unit '" + unit.id + "': ";
    if (unit.id.empty()) throw ValidationError("unit id must be non-empty");
    auto count = [&](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(where + name + " must be a non-negative count");
    };
    auto time = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(where + name + " must be strictly positive");
    };
    if (const auto* d = std::get_if<DemandData>(&unit.data)) {
        count(d->trials, "trials");
        count(d->successes, "successes");
        if (d->successes > d->trials) throw ValidationError(where + "successes exceed trials");
    } else if (const auto* c = std::get_if<CountData>(&unit.data)) {
        time(c->exposure, "exposure");
        count(c->events, "events");
    } else {
        const auto& l = std::get<LifetimeData>(unit.data);
        count(l.failures, "failures");
        time(l.total_time, "total_time");
    }
}

ObservationSet::ObservationSet(PriorFamily family, std::vector<UnitData> units)
    : family_(family), units_(std::move(units)) {
    if (units_.empty()) throw ValidationError("observation set has no units");
    std::set<std::string> ids;
    for (const auto& u : units_) {
        validate_unit(u);
        if (u.family() != family_) {
            throw ValidationError("unit '" + u.id + "' does not match family " + to_string(family_));
        }
        if (!ids.insert(u.id).second) throw ValidationError("duplicate unit id '" + u.id + "'");
    }
    std::sort(units_.begin(), units_.end(), [](const UnitData& a, const UnitData& b) { return a.id < b.id; });
}

const UnitData& ObservationSet::unit(std::string_view id) const {
    auto it = std::lower_bound(units_.begin(), units_.end(), id,
                               [](const UnitData& u, std::string_view key) { return u.id < key; });
    if (it == units_.end() || it->id != id) throw ValidationError("no unit with id '" + std::string(id) + "'");
    return *it;
}

namespace detail {

double log_marginal_at(const ObservationSet& obs, double first, double second) {
    double total = 0.0;
    switch (obs.family()) {
    case PriorFamily::BetaBinomial: {
        const double a = first, b = second;
        const double prior_term = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
        for (const auto& u : obs.units()) {
            const auto& d = std::get<DemandData>(u.data);
            const double n = d.trials, s = d.successes;
            const double log_choose = std::lgamma(n + 1) - std::lgamma(s + 1) - std::lgamma(n - s + 1);
            total += log_choose + prior_term + std::lgamma(a + s) + std::lgamma(b + n - s) -
                     std::lgamma(a + b + n);
        }
        break;
    }
    case PriorFamily::GammaPoisson: {
        const double shape = first, rate = second;
        const double log_rate = std::log(rate);
        const double lg_shape = std::lgamma(shape);
        for (const auto& u : obs.units()) {
            const auto& c = std::get<CountData>(u.data);
            const double k = c.events, t = c.exposure;
            total += std::lgamma(shape + k) - lg_shape - std::lgamma(k + 1) + shape * log_rate -
                     (shape + k) * std::log(rate + t) + k * std::log(t);
        }
        break;
    }
    case PriorFamily::GammaExponential: {
        const double shape = first, rate = second;
        const double log_rate = std::log(rate);
        const double lg_shape = std::lgamma(shape);
        for (const auto& u : obs.units()) {
            const auto& l = std::get<LifetimeData>(u.data);
            const double n = l.failures, time = l.total_time;
            total += shape * log_rate + std::lgamma(shape + n) - lg_shape - (shape + n) * std::log(rate + time);
        }
        break;
    }
    }
    return total;
}

std::array<double, 2> log_marginal_grad_at(const ObservationSet& obs, double first, double second) {
    double d_first = 0.0, d_second = 0.0;
    switch (obs.family()) {
    case PriorFamily::BetaBinomial: {
        const double a = first, b = second;
        const double psi_ab = digamma(a + b), psi_a = digamma(a), psi_b = digamma(b);
        for (const auto& u : obs.units()) {
            const auto& d = std::get<DemandData>(u.data);
            const double n = d.trials, s = d.successes;
            const double psi_abn = digamma(a + b + n);
            d_first += digamma(a + s) - psi_a + psi_ab - psi_abn;
            d_second += digamma(b + n - s) - psi_b + psi_ab - psi_abn;
        }
        break;
    }
    case PriorFamily::GammaPoisson:
    case PriorFamily::GammaExponential: {
        const double shape = first, rate = second;
        const double psi_shape = digamma(shape), log_rate = std::log(rate);
        for (const auto& u : obs.units()) {
            double k = 0.0, t = 0.0;
            if (const auto* c = std::get_if<CountData>(&u.data)) {
                k = c->events;
                t = c->exposure;
            } else {
                const auto& l = std::get<LifetimeData>(u.data);
                k = l.failures;
                t = l.total_time;
            }
            d_first += digamma(shape + k) - psi_shape + log_rate - std::log(rate + t);
            d_second += shape / rate - (shape + k) / (rate + t);
        }
        break;
    }
    }
    // Chain rule into log coordinates.
    return {first * d_first, second * d_second};
}

} // namespace detail

double log_marginal(const ObservationSet& obs, const HyperParams& phi) {
    return detail::log_marginal_at(obs, phi.first(), phi.second());
}

std::array<double, 2> log_marginal_grad(const ObservationSet& obs, const HyperParams& phi) {
    return detail::log_marginal_grad_at(obs, phi.first(), phi.second());
}

MomentEstimate moments_init(const ObservationSet& obs) {
    if (obs.size() < 2) throw InsufficientDataError("need at least 2 units, got " + std::to_string(obs.size()));
    std::vector<double> estimates;
    estimates.reserve(obs.size());
    for (const auto& u : obs.units()) {
        if (const auto* d = std::get_if<DemandData>(&u.data)) {
            if (d->trials > 0) estimates.push_back(d->successes / d->trials);
        } else if (const auto* c = std::get_if<CountData>(&u.data)) {
            estimates.push_back(c->events / c->exposure);
        } else {
            const auto& l = std::get<LifetimeData>(u.data);
            estimates.push_back(l.failures / l.total_time);
        }
    }
    const MomentEstimate fallback{HyperParams(1.0, 1.0), true};
    if (estimates.size() < 2) return fallback;

    const double count = static_cast<double>(estimates.size());
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= count;
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= count - 1.0;
    if (!(var > 0.0) || !(mean > 0.0)) return fallback;

    auto clamp = [](double v) { return std::clamp(v, kParamLow, kParamHigh); };
    if (obs.family() == PriorFamily::BetaBinomial) {
        const double spread = mean * (1.0 - mean);
        if (!(mean < 1.0) || !(var < spread)) return fallback;
        const double concentration = spread / var - 1.0;
        return {HyperParams(clamp(mean * concentration), clamp((1.0 - mean) * concentration)), false};
    }
    return {HyperParams(clamp(mean * mean / var), clamp(mean / var)), false};
}

namespace {

struct Objective {
    const ObservationSet& obs;
    double value(const std::array<double, 2>& x) const {
        return detail::log_marginal_at(obs, std::exp(x[0]), std::exp(x[1]));
    }
    std::array<double, 2> grad(const std::array<double, 2>& x) const {
        return detail::log_marginal_grad_at(obs, std::exp(x[0]), std::exp(x[1]));
    }
};

std::array<double, 2> clamp_box(std::array<double, 2> x) {
    for (double& v : x) v = std::clamp(v, kLogLow, kLogHigh);
    return x;
}

// Components pushing outward at an active bound do not count toward optimality.
std::array<bool, 2> free_mask(const std::array<double, 2>& x, const std::array<double, 2>& g) {
    std::array<bool, 2> free{};
    for (int i = 0; i < 2; ++i) {
        const bool stuck_low = x[i] <= kLogLow && g[i] < 0.0;
        const bool stuck_high = x[i] >= kLogHigh && g[i] > 0.0;
        free[i] = !(stuck_low || stuck_high);
    }
    return free;
}

} // namespace

FitResult fit_hyperparams(const ObservationSet& obs) {
    if (obs.size() < 2) throw InsufficientDataError("need at least 2 units, got " + std::to_string(obs.size()));
    const MomentEstimate init = moments_init(obs);
    const Objective objective{obs};

    std::array<double, 2> x = clamp_box({std::log(init.params.first()), std::log(init.params.second())});
    double f = objective.value(x);
    if (!std::isfinite(f)) throw ValidationError("marginal likelihood is not finite at the initial point");

    constexpr int kMaxIterations = 500;
    constexpr double kHessianStep = 1e-5;
    bool converged = false;
    int iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        const auto g = objective.grad(x);
        const auto free = free_mask(x, g);
        std::array<double, 2> pg{free[0] ? g[0] : 0.0, free[1] ? g[1] : 0.0};
        if (std::hypot(pg[0], pg[1]) < kGradientTolerance) {
            converged = true;
            break;
        }

        // Hessian by central differences of the analytic gradient.
        std::array<std::array<double, 2>, 2> h{};
        for (int j = 0; j < 2; ++j) {
            auto xp = x, xm = x;
            xp[j] += kHessianStep;
            xm[j] -= kHessianStep;
            const auto gp = objective.grad(xp), gm = objective.grad(xm);
            for (int i = 0; i < 2; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * kHessianStep);
        }
        const double off = 0.5 * (h[0][1] + h[1][0]);
        h[0][1] = h[1][0] = off;

        std::array<double, 2> dir{0.0, 0.0};
        bool newton = false;
        if (free[0] && free[1]) {
            const double det = h[0][0] * h[1][1] - off * off;
            if (h[0][0] < 0.0 && det > 0.0) {
                dir = {-(h[1][1] * pg[0] - off * pg[1]) / det, -(-off * pg[0] + h[0][0] * pg[1]) / det};
                newton = true;
            }
        } else {
            for (int i = 0; i < 2; ++i) {
                if (free[i] && h[i][i] < 0.0) {
                    dir[i] = -pg[i] / h[i][i];
                    newton = true;
                }
            }
        }
        if (!newton || dir[0] * pg[0] + dir[1] * pg[1] <= 0.0) {
            const double norm = std::hypot(pg[0], pg[1]);
            const double scale = std::min(1.0, 1.0 / norm);
            dir = {pg[0] * scale, pg[1] * scale};
            newton = false;
        }

        double step = 1.0;
        bool accepted = false;
        std::array<double, 2> x_new = x;
        double f_new = f;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = clamp_box({x[0] + step * dir[0], x[1] + step * dir[1]});
            f_new = objective.value(x_new);
            const double predicted = g[0] * (x_new[0] - x[0]) + g[1] * (x_new[1] - x[1]);
            if (std::isfinite(f_new) && f_new >= f + 1e-4 * predicted) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No ascent possible at working precision: the value no longer changes.
            converged = true;
            break;
        }
        const double change = f_new - f;
        x = x_new;
        f = f_new;
        if (newton && std::abs(change) < kValueTolerance) {
            converged = true;
            ++iter;
            break;
        }
    }
    if (!std::isfinite(f)) throw ValidationError("marginal likelihood is not finite");

    constexpr double kBoundSlack = 1e-9;
    const bool at_bound = x[0] <= kLogLow + kBoundSlack || x[0] >= kLogHigh - kBoundSlack ||
                          x[1] <= kLogLow + kBoundSlack || x[1] >= kLogHigh - kBoundSlack;
    const HyperParams estimate = HyperParams::from_log(x[0], x[1]);
    return FitResult{obs.family(), estimate, log_marginal(obs, estimate), init.params, init.fallback,
                     converged, at_bound, iter};
}

PosteriorParams posterior(PriorFamily family, const HyperParams& phi, const UnitData& unit) {
    validate_unit(unit);
    if (unit.family() != family) {
        throw ValidationError("unit '" + unit.id + "' does not belong to family " + to_string(family));
    }
    PosteriorParams post{family, unit.id, phi.first(), phi.second()};
    if (const auto* d = std::get_if<DemandData>(&unit.data)) {
        post.first += d->successes;
        post.second += d->trials - d->successes;
    } else if (const auto* c = std::get_if<CountData>(&unit.data)) {
        post.first += c->events;
        post.second += c->exposure;
    } else {
        const auto& l = std::get<LifetimeData>(unit.data);
        post.first += l.failures;
        post.second += l.total_time;
    }
    return post;
}

double predictive_reliability(PriorFamily family, double first, double second, const PredictiveQuery& query) {
    if (!(first > 0.0) || !(second > 0.0)) throw ValidationError("distribution parameters must be positive");
    if (family == PriorFamily::BetaBinomial) {
        if (query.target != PredictiveQuery::Target::NextDemand) {
            throw ValidationError("mission-time queries need a gamma family; beta-binomial predicts next-demand success");
        }
        return first / (first + second);
    }
    if (query.target != PredictiveQuery::Target::MissionSurvival) {
        throw ValidationError("gamma families predict mission survival; a mission time is required");
    }
    const double t = query.mission_time;
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("mission time must be finite and non-negative");
    return std::clamp(std::exp(-first * std::log1p(t / second)), 0.0, 1.0);
}

double prior_predictive_reliability(PriorFamily family, const HyperParams& phi, const PredictiveQuery& query) {
    return predictive_reliability(family, phi.first(), phi.second(), query);
}

double posterior_predictive_reliability(PriorFamily family, const FitResult& fit, const UnitData& unit,
                                        const PredictiveQuery& query) {
    const auto post = posterior(family, fit.estimate, unit);
    return predictive_reliability(family, post.first, post.second, query);
}

std::array<double, 2> posterior_moments(const PosteriorParams& post) {
    if (post.family == PriorFamily::BetaBinomial) {
        const double a = post.first, b = post.second, s = a + b;
        return {a / s, a * b / (s * s * (s + 1.0))};
    }
    return {post.first / post.second, post.first / (post.second * post.second)};
}

} // namespace relfuse::eb
