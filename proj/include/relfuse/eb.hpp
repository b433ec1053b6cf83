#pragma once

// Empirical Bayes for unit-level reliability parameters under three conjugate
// families. Hyperparameters are fitted by maximizing the marginal likelihood
// of all units (Type-II ML), then each unit is updated with the fitted prior.

#include <array>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace relfuse::eb {

enum class PriorFamily { BetaBinomial, GammaPoisson, GammaExponential };

std::string to_string(PriorFamily family);
PriorFamily parse_family(std::string_view text);

/// Working box for every hyperparameter.
inline constexpr double kParamLow = 1e-3;
inline constexpr double kParamHigh = 1e3;

/// Prior hyperparameters: (a, b) for beta-binomial, (shape, rate) for the
/// gamma families. Both entries lie in the working box.
class HyperParams {
public:
    /// Throws ValidationError outside [kParamLow, kParamHigh].
    HyperParams(double first, double second);

    /// From log-coordinates, clamped into the box.
    static HyperParams from_log(double log_first, double log_second);

    double first() const noexcept { return first_; }
    double second() const noexcept { return second_; }

    friend bool operator==(const HyperParams&, const HyperParams&) = default;

private:
    double first_;
    double second_;
};

/// Pass/fail counts on demand.
struct DemandData {
    double trials = 0;
    double successes = 0;
};

/// Event count over an exposure time.
struct CountData {
    double exposure = 1;
    double events = 0;
};

/// Failures over a total time on test.
struct LifetimeData {
    double failures = 0;
    double total_time = 1;
};

enum class Provenance { Observed, ExpertElicited };

std::string to_string(Provenance provenance);
Provenance parse_provenance(std::string_view text);

/// One unit's data. Expert judgements enter as pseudo-observations and may
/// carry fractional counts.
struct UnitData {
    std::string id;
    Provenance provenance = Provenance::Observed;
    std::variant<DemandData, CountData, LifetimeData> data;

    PriorFamily family() const noexcept;
};

/// Throws ValidationError for negative counts, successes above trials or
/// non-positive times.
void validate_unit(const UnitData& unit);

/// Units of a single family, held sorted by id so that every reduction over
/// units happens in one fixed order.
class ObservationSet {
public:
    /// Throws ValidationError for an empty set, duplicate ids, invalid units
    /// or units of another family.
    ObservationSet(PriorFamily family, std::vector<UnitData> units);

    PriorFamily family() const noexcept { return family_; }
    const std::vector<UnitData>& units() const noexcept { return units_; }
    std::size_t size() const noexcept { return units_.size(); }
    const UnitData& unit(std::string_view id) const;

private:
    PriorFamily family_;
    std::vector<UnitData> units_;
};

/// Conjugate posterior of one unit. Not confined to the working box.
struct PosteriorParams {
    PriorFamily family;
    std::string unit_id;
    double first;
    double second;
};

struct FitResult {
    PriorFamily family;
    HyperParams estimate;
    double log_marginal;
    HyperParams init;
    bool init_fallback = false;
    bool converged = false;
    bool at_bound = false;
    int iterations = 0;
};

struct MomentEstimate {
    HyperParams params;
    bool fallback = false;  ///< zero variance or infeasible moments; params = (1, 1)
};

/// What "design reliability" means for a query.
struct PredictiveQuery {
    enum class Target { NextDemand, MissionSurvival };
    Target target = Target::NextDemand;
    double mission_time = 0.0;

    static PredictiveQuery next_demand() { return {Target::NextDemand, 0.0}; }
    static PredictiveQuery mission(double time) { return {Target::MissionSurvival, time}; }
};

inline constexpr double kGradientTolerance = 1e-8;
inline constexpr double kValueTolerance = 1e-12;

/// Log marginal likelihood of all units, summed in id order.
double log_marginal(const ObservationSet& obs, const HyperParams& phi);

/// Gradient of log_marginal with respect to (log first, log second).
std::array<double, 2> log_marginal_grad(const ObservationSet& obs, const HyperParams& phi);

/// Method-of-moments start: matches the mean and sample variance of per-unit
/// success proportions (beta) or rate estimates (gamma).
MomentEstimate moments_init(const ObservationSet& obs);

/// Maximizes log_marginal over the working box in log coordinates.
/// Throws InsufficientDataError for fewer than two units.
FitResult fit_hyperparams(const ObservationSet& obs);

PosteriorParams posterior(PriorFamily family, const HyperParams& phi, const UnitData& unit);

/// Next-demand success probability a/(a+b) for beta; mission survival
/// (rate/(rate+t))^shape for gamma. `first`/`second` are any positive
/// parameters of the family's Θ-distribution.
double predictive_reliability(PriorFamily family, double first, double second,
                              const PredictiveQuery& query);

double prior_predictive_reliability(PriorFamily family, const HyperParams& phi,
                                    const PredictiveQuery& query);

double posterior_predictive_reliability(PriorFamily family, const FitResult& fit,
                                        const UnitData& unit, const PredictiveQuery& query);

/// Posterior mean and variance of Θ from the conjugate closed form.
std::array<double, 2> posterior_moments(const PosteriorParams& post);

namespace detail {
// Unchecked evaluators in log-parameter coordinates, shared by the optimizer
// and the grid oracle.
double log_marginal_at(const ObservationSet& obs, double first, double second);
std::array<double, 2> log_marginal_grad_at(const ObservationSet& obs, double first,
                                           double second);
} // namespace detail

} // namespace relfuse::eb
