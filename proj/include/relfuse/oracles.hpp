#pragma once

// Reference implementations used to cross-check the engines: Dempster's rule
// over the full powerset, brute-force grid maximization of the marginal
// likelihood, hierarchical Bayes by quadrature, and direct quadrature of
// the unnormalized posterior.

#include "relfuse/belief.hpp"
#include "relfuse/eb.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace relfuse::oracle {

inline constexpr std::size_t kMaxPowersetGrades = 16;

/// Mass over arbitrary subsets of at most 16 grades, keyed by bitmask.
class PowersetMass {
public:
    /// Throws ValidationError on mass on the empty set, a subset outside the
    /// frame, negative mass or a total other than 1.
    PowersetMass(std::size_t grades, std::map<std::uint32_t, double> masses);

    static PowersetMass from_mass_function(const MassFunction& mass);

    std::size_t grades() const noexcept { return grades_; }
    std::uint32_t full_mask() const noexcept { return (std::uint32_t{1} << grades_) - 1u; }
    const std::map<std::uint32_t, double>& masses() const noexcept { return masses_; }
    double mass(std::uint32_t subset) const;

private:
    std::size_t grades_;
    std::map<std::uint32_t, double> masses_;
};

/// Classical Dempster's rule over arbitrary focal elements.
PowersetMass dempster_combine_powerset(const PowersetMass& a, const PowersetMass& b);

/// Box over hyperparameters (log-spaced grid, flat prior in log coordinates).
struct GridAxis {
    double low = eb::kParamLow;
    double high = eb::kParamHigh;
    std::size_t resolution = 200;

    /// Grid points including both ends; a single point sits at the geometric centre.
    std::vector<double> points() const;
};

struct HyperPrior {
    std::array<GridAxis, 2> axes{};

    static HyperPrior flat_log(std::size_t resolution = 200);
    static HyperPrior point_mass(const eb::HyperParams& phi);
};

void validate_hyperprior(const HyperPrior& prior);

/// Exhaustive search of log_marginal over the grid. Ties keep the first point.
std::pair<eb::HyperParams, double> grid_marginal_argmax(const eb::ObservationSet& obs,
                                                        const HyperPrior& box);

/// Probabilities over a fixed grid of Θ values (midpoints of equal cells).
struct DiscretePosterior {
    std::vector<double> theta;
    std::vector<double> probability;
};

inline constexpr std::size_t kThetaPoints = 1000;

/// Θ grid over the family's support: (0,1) for beta, (0, λ_max) for gamma with
/// λ_max ten times the larger of the pooled and unit rate estimates.
std::vector<double> theta_grid(const eb::ObservationSet& obs, const eb::UnitData& unit,
                               std::size_t points = kThetaPoints);

/// Conjugate posterior density on a grid, normalized to sum to one.
DiscretePosterior discretize(const eb::PosteriorParams& post, std::vector<double> theta);

/// Full hierarchical posterior of one unit's Θ: conjugate posteriors mixed
/// over the hyperprior grid with weights p(x|Φ)p(Φ).
DiscretePosterior hierarchical_posterior_quadrature(const eb::ObservationSet& obs,
                                                    const eb::UnitData& unit,
                                                    const HyperPrior& hyperprior,
                                                    std::size_t theta_points = kThetaPoints);

double total_variation(const DiscretePosterior& p, const DiscretePosterior& q);

/// Posterior mean and variance of Θ by trapezoidal quadrature of
/// likelihood × prior in logit/log coordinates. Uses no conjugate update.
std::array<double, 2> posterior_moments_quadrature(eb::PriorFamily family,
                                                   const eb::HyperParams& prior,
                                                   const eb::UnitData& unit,
                                                   std::size_t points = 1000);

/// E[exp(-λ t)] for λ ~ Gamma(shape, rate), by quadrature in log λ.
double mission_survival_quadrature(double shape, double rate, double mission_time,
                                   std::size_t points = 1000);

} // namespace relfuse::oracle

namespace relfuse::oracle {

/// Raw combined masses of one internal node.
struct PowersetNodeResult {
    std::vector<double> singletons;
    double frame_mass = 1.0;
};

/// Tree aggregation routed entirely through dempster_combine_powerset, with
/// every internal node's raw result keyed by id.
std::map<std::string, PowersetNodeResult> aggregate_tree_powerset(
    const AttributeNode& root, const GradeFrame& frame, WeightScheme weighting = WeightScheme::Normalized);

} // namespace relfuse::oracle
