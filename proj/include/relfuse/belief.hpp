#pragma once

// Core value types for evidential reasoning: evaluation grades, belief
// distributions over those grades, mass functions and weighted attribute trees.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace relfuse {

inline constexpr double kSumTolerance = 1e-12;

/// Ordered set of evaluation grades, worst first, each with a utility in [0,1].
class GradeFrame {
public:
    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<double>& utilities() const noexcept { return utilities_; }
    const std::string& label(std::size_t n) const { return labels_.at(n); }
    double utility(std::size_t n) const { return utilities_.at(n); }

    /// True when the utilities were supplied rather than defaulted.
    bool explicit_utilities() const noexcept { return explicit_utilities_; }

    friend bool operator==(const GradeFrame&, const GradeFrame&) = default;

private:
    friend GradeFrame make_frame(std::vector<std::string>, std::optional<std::vector<double>>);

    std::vector<std::string> labels_;
    std::vector<double> utilities_;
    bool explicit_utilities_ = false;
};

/// Builds a validated frame. Without utilities the grades are spaced evenly
/// on [0,1]. Throws ValidationError on duplicate/empty labels, N < 2, or
/// utilities that are mis-sized, out of range or decreasing.
GradeFrame make_frame(std::vector<std::string> labels,
                      std::optional<std::vector<double>> utilities = std::nullopt);

/// Degrees of belief per grade. May be incomplete: the unassigned part is the residual.
class BeliefDistribution {
public:
    /// Validates entries in [0,1] with sum at most 1 + tolerance.
    static BeliefDistribution from_values(std::vector<double> beliefs,
                                          double tolerance = kSumTolerance);

    std::size_t size() const noexcept { return beliefs_.size(); }
    std::span<const double> beliefs() const noexcept { return beliefs_; }
    double operator[](std::size_t n) const { return beliefs_.at(n); }
    double residual() const noexcept { return residual_; }
    double total() const noexcept;

    friend bool operator==(const BeliefDistribution&, const BeliefDistribution&) = default;

private:
    BeliefDistribution(std::vector<double> beliefs, double residual)
        : beliefs_(std::move(beliefs)), residual_(residual) {}

    std::vector<double> beliefs_;
    double residual_ = 1.0;
};

BeliefDistribution make_belief(const GradeFrame& frame, std::vector<double> beliefs,
                               double tolerance = kSumTolerance);

/// [s_min, s_max] expected utility, with the residual pushed to the worst or
/// best grade respectively.
std::pair<double, double> expected_score_interval(const GradeFrame& frame,
                                                  const BeliefDistribution& belief);

/// Basic probability masses on each singleton grade plus the whole frame.
class MassFunction {
public:
    /// Throws ValidationError unless every mass is >= 0 and the total is 1
    /// within tolerance.
    static MassFunction make(std::vector<double> singletons, double frame_mass,
                             double tolerance = kSumTolerance);

    /// All mass on the frame: total ignorance.
    static MassFunction vacuous(std::size_t grades);

    std::size_t size() const noexcept { return singletons_.size(); }
    std::span<const double> singletons() const noexcept { return singletons_; }
    double singleton(std::size_t n) const { return singletons_.at(n); }
    double frame_mass() const noexcept { return frame_mass_; }
    double total() const noexcept;

    friend bool operator==(const MassFunction&, const MassFunction&) = default;

private:
    MassFunction(std::vector<double> singletons, double frame_mass)
        : singletons_(std::move(singletons)), frame_mass_(frame_mass) {}

    std::vector<double> singletons_;
    double frame_mass_ = 1.0;
};

/// Node of a weighted attribute hierarchy. Leaves carry an assessment,
/// internal nodes carry children whose weights are relative to each other.
struct AttributeNode {
    std::string id;
    double weight = 1.0;
    std::variant<std::vector<AttributeNode>, BeliefDistribution> payload;

    bool is_leaf() const noexcept { return std::holds_alternative<BeliefDistribution>(payload); }
    const BeliefDistribution& belief() const { return std::get<BeliefDistribution>(payload); }
    const std::vector<AttributeNode>& children() const {
        return std::get<std::vector<AttributeNode>>(payload);
    }

    static AttributeNode leaf(std::string id, double weight, BeliefDistribution belief);
    static AttributeNode group(std::string id, double weight, std::vector<AttributeNode> children);

    friend bool operator==(const AttributeNode&, const AttributeNode&) = default;
};

/// Checks structural invariants of a tree against a frame: unique non-empty
/// ids, finite non-negative weights, a positive weight in every sibling
/// group, non-empty internal nodes and leaf beliefs sized to the frame.
/// Errors name the node path, e.g. "root/brakes/feel".
void validate_tree(const AttributeNode& root, const GradeFrame& frame);

enum class FinalizationMode { Raw, Proportional };

/// How sibling weights become discount factors: rescaled to sum to one, or
/// taken as given (each must then lie in [0,1]).
enum class WeightScheme { Normalized, Absolute };

struct AggregationConfig {
    FinalizationMode mode = FinalizationMode::Raw;
    double tolerance = kSumTolerance;
    WeightScheme weighting = WeightScheme::Normalized;
};

void validate_config(const AggregationConfig& config);

std::string to_string(FinalizationMode mode);
FinalizationMode parse_mode(const std::string& text);
std::string to_string(WeightScheme scheme);
WeightScheme parse_weighting(const std::string& text);

} // namespace relfuse
