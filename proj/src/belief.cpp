#include "relfuse/belief.hpp"

#include "relfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace relfuse {

namespace {

double sum(std::span<const double> values) {
    return std::accumulate(values.begin(), values.end(), 0.0);
}

} // namespace

GradeFrame make_frame(std::vector<std::string> labels, std::optional<std::vector<double>> utilities) {
    const std::size_t n = labels.size();
    if (n < 2) throw ValidationError("grade frame needs at least 2 grades, got " + std::to_string(n));
    std::set<std::string> seen;
    for (const auto& label : labels) {
        if (label.empty()) throw ValidationError("grade labels must be non-empty");
        if (!seen.insert(label).second) throw ValidationError("duplicate grade label '" + label + "'");
    }

    GradeFrame frame;
    if (utilities) {
        if (utilities->size() != n) {
            throw ValidationError("expected " + std::to_string(n) + " utilities, got " +
                                  std::to_string(utilities->size()));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (*utilities)[i];
            if (!(u >= 0.0 && u <= 1.0)) {
                throw ValidationError("utility of grade '" + labels[i] + "' outside [0,1]");
            }
            if (i > 0 && u < (*utilities)[i - 1]) {
                throw ValidationError("utilities must be non-decreasing in grade order (at '" +
                                      labels[i] + "')");
            }
        }
        frame.utilities_ = std::move(*utilities);
        frame.explicit_utilities_ = true;
    } else {
        frame.utilities_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            frame.utilities_[i] = static_cast<double>(i) / static_cast<double>(n - 1);
        }
    }
    frame.labels_ = std::move(labels);
    return frame;
}

BeliefDistribution BeliefDistribution::from_values(std::vector<double> beliefs, double tolerance) {
    for (std::size_t i = 0; i < beliefs.size(); ++i) {
        const double b = beliefs[i];
        if (!(b >= 0.0 && b <= 1.0)) {
            std::ostringstream os;
            os << "belief " << b << " at grade " << i << " outside [0,1]";
            throw ValidationError(os.str());
        }
    }
    const double total = sum(beliefs);
    if (total > 1.0 + tolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "beliefs sum to " << total << " > 1";
        throw ValidationError(os.str());
    }
    const double residual = std::clamp(1.0 - total, 0.0, 1.0);
    return BeliefDistribution(std::move(beliefs), residual);
}

double BeliefDistribution::total() const noexcept { return sum(beliefs_); }

BeliefDistribution make_belief(const GradeFrame& frame, std::vector<double> beliefs, double tolerance) {
    if (beliefs.size() != frame.size()) {
        throw ValidationError("expected " + std::to_string(frame.size()) + " beliefs, got " +
                              std::to_string(beliefs.size()));
    }
    return BeliefDistribution::from_values(std::move(beliefs), tolerance);
}

std::pair<double, double> expected_score_interval(const GradeFrame& frame,
                                                  const BeliefDistribution& belief) {
    if (belief.size() != frame.size()) throw ValidationError("belief size does not match frame");
    double base = 0.0;
    for (std::size_t n = 0; n < frame.size(); ++n) base += belief[n] * frame.utility(n);
    const double r = belief.residual();
    const double lo = base + r * frame.utility(0);
    const double hi = base + r * frame.utility(frame.size() - 1);
    return {std::clamp(lo, 0.0, 1.0), std::clamp(hi, 0.0, 1.0)};
}

MassFunction MassFunction::make(std::vector<double> singletons, double frame_mass, double tolerance) {
    for (double m : singletons) {
        if (!(m >= 0.0)) throw ValidationError("negative or non-finite singleton mass");
    }
    if (!(frame_mass >= 0.0)) throw ValidationError("negative or non-finite frame mass");
    const double total = sum(singletons) + frame_mass;
    if (!(std::abs(total - 1.0) <= tolerance)) {
        std::ostringstream os;
        os.precision(17);
        os << "masses sum to " << total << ", expected 1";
        throw ValidationError(os.str());
    }
    return MassFunction(std::move(singletons), frame_mass);
}

MassFunction MassFunction::vacuous(std::size_t grades) {
    return MassFunction(std::vector<double>(grades, 0.0), 1.0);
}

double MassFunction::total() const noexcept { return sum(singletons_) + frame_mass_; }

AttributeNode AttributeNode::leaf(std::string id, double weight, BeliefDistribution belief) {
    return AttributeNode{std::move(id), weight, std::move(belief)};
}

AttributeNode AttributeNode::group(std::string id, double weight, std::vector<AttributeNode> children) {
    return AttributeNode{std::move(id), weight, std::move(children)};
}

namespace {

void validate_node(const AttributeNode& node, const GradeFrame& frame, const std::string& path,
                   std::set<std::string>& ids) {
    if (node.id.empty()) throw ValidationError(path + ": attribute id must be non-empty");
    if (!ids.insert(node.id).second) throw ValidationError(path + ": duplicate attribute id '" + node.id + "'");
    if (!(node.weight >= 0.0) || !std::isfinite(node.weight)) {
        throw ValidationError(path + ": weight must be finite and non-negative");
    }
    if (node.is_leaf()) {
        if (node.belief().size() != frame.size()) {
            throw ValidationError(path + ": expected " + std::to_string(frame.size()) +
                                  " beliefs, got " + std::to_string(node.belief().size()));
        }
        return;
    }
    const auto& children = node.children();
    if (children.empty()) throw ValidationError(path + ": internal attribute has no children");
    bool any_positive = false;
    for (const auto& child : children) {
        validate_node(child, frame, path + "/" + child.id, ids);
        any_positive = any_positive || child.weight > 0.0;
    }
    if (!any_positive) throw ValidationError(path + ": all child weights are zero");
}

} // namespace

void validate_tree(const AttributeNode& root, const GradeFrame& frame) {
    std::set<std::string> ids;
    validate_node(root, frame, "root", ids);
}

void validate_config(const AggregationConfig& config) {
    if (config.mode != FinalizationMode::Raw && config.mode != FinalizationMode::Proportional) {
        throw ValidationError("unknown finalization mode");
    }
    if (!(config.tolerance > 0.0)) throw ValidationError("tolerance must be positive");
    if (config.weighting != WeightScheme::Normalized && config.weighting != WeightScheme::Absolute) {
        throw ValidationError("unknown weight scheme");
    }
}

std::string to_string(FinalizationMode mode) {
    return mode == FinalizationMode::Raw ? "raw" : "proportional";
}

FinalizationMode parse_mode(const std::string& text) {
    if (text == "raw") return FinalizationMode::Raw;
    if (text == "proportional") return FinalizationMode::Proportional;
    throw ValidationError("unknown mode '" + text + "' (expected raw or proportional)");
}

std::string to_string(WeightScheme scheme) {
    return scheme == WeightScheme::Normalized ? "normalized" : "absolute";
}

WeightScheme parse_weighting(const std::string& text) {
    if (text == "normalized") return WeightScheme::Normalized;
    if (text == "absolute") return WeightScheme::Absolute;
    throw ValidationError("unknown weighting '" + text + "' (expected normalized or absolute)");
}

} // namespace relfuse
