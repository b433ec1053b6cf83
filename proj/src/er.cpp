#include "relfuse/er.hpp"

#include "relfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relfuse::er {

std::vector<double> normalize_weights(std::span<const double> raw_weights) {
    if (raw_weights.empty()) throw ValidationError("no weights to normalize");
    double total = 0.0;
    for (double w : raw_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be finite and non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw ValidationError("all weights are zero");
    std::vector<double> out(raw_weights.size());
    std::transform(raw_weights.begin(), raw_weights.end(), out.begin(),
                   [total](double w) { return w / total; });
    return out;
}

MassFunction assign_masses(double weight, const BeliefDistribution& belief) {
    if (!(weight >= 0.0 && weight <= 1.0)) throw ValidationError("attribute weight outside [0,1]");
    std::vector<double> singletons(belief.size());
    double assigned = 0.0;
    for (std::size_t n = 0; n < belief.size(); ++n) {
        singletons[n] = weight * belief[n];
        assigned += singletons[n];
    }
    return MassFunction::make(std::move(singletons), std::max(0.0, 1.0 - assigned));
}

std::pair<MassFunction, CombinationDiagnostics> combine_pair(const MassFunction& a, const MassFunction& b) {
    if (a.size() != b.size()) throw ValidationError("mass functions over different frames");
    const double a_frame = a.frame_mass();
    const double b_frame = b.frame_mass();

    // Each summand is symmetric in (a, b) so the result does not depend on argument order.
    std::vector<double> numerators(a.size());
    double agreement = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const double an = a.singleton(n);
        const double bn = b.singleton(n);
        numerators[n] = an * bn + (an * b_frame + a_frame * bn);
        agreement += numerators[n];
    }
    const double frame_numerator = a_frame * b_frame;
    agreement += frame_numerator;

    if (!(agreement > 0.0)) throw TotalConflictError("total conflict: no combined mass survives", 0);

    for (double& m : numerators) m /= agreement;

    CombinationDiagnostics diag;
    diag.conflict_mass = std::clamp(1.0 - agreement, 0.0, 1.0);
    diag.normalizer = 1.0 / (1.0 - diag.conflict_mass);
    return {MassFunction::make(std::move(numerators), frame_numerator / agreement), diag};
}

std::pair<MassFunction, std::vector<CombinationDiagnostics>>
fold_attributes(std::span<const MassFunction> masses) {
    if (masses.empty()) throw ValidationError("nothing to combine");
    MassFunction acc = masses.front();
    std::vector<CombinationDiagnostics> diagnostics;
    diagnostics.reserve(masses.size() - 1);
    for (std::size_t i = 1; i < masses.size(); ++i) {
        try {
            auto [combined, diag] = combine_pair(acc, masses[i]);
            acc = std::move(combined);
            diagnostics.push_back(diag);
        } catch (const TotalConflictError&) {
            throw TotalConflictError("total conflict at fold step " + std::to_string(i - 1) +
                                         " (combining attribute " + std::to_string(i) + ")",
                                     i - 1);
        }
    }
    return {std::move(acc), std::move(diagnostics)};
}

Finalized finalize(const MassFunction& combined, const AggregationConfig& config) {
    validate_config(config);
    std::vector<double> beliefs(combined.singletons().begin(), combined.singletons().end());
    if (config.mode == FinalizationMode::Raw) {
        return {BeliefDistribution::from_values(std::move(beliefs), config.tolerance), combined.frame_mass()};
    }
    const double support = std::accumulate(beliefs.begin(), beliefs.end(), 0.0);
    if (!(support > 0.0)) {
        throw ValidationError("proportional finalization of a vacuous mass function");
    }
    for (double& b : beliefs) b = std::min(1.0, b / support);
    return {BeliefDistribution::from_values(std::move(beliefs), config.tolerance), 0.0};
}

namespace {

struct Subtree {
    MassFunction mass;
    std::vector<CombinationDiagnostics> diagnostics;
};

const AggregationConfig kRaw{FinalizationMode::Raw, kSumTolerance};

std::vector<double> sibling_weights(std::span<const double> raw, WeightScheme scheme) {
    if (scheme == WeightScheme::Normalized) return normalize_weights(raw);
    for (double w : raw) {
        if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("absolute weights must lie in [0,1]");
    }
    return {raw.begin(), raw.end()};
}

// Combines the children of `node` (or the node itself, if it is a leaf) and
// records every internal node in `per_node` with raw finalization.
Subtree combine_node(const AttributeNode& node, const std::string& path, WeightScheme scheme,
                     std::map<std::string, NodeResult>& per_node) {
    if (node.is_leaf()) {
        return {assign_masses(1.0, node.belief()), {}};
    }
    const auto& children = node.children();
    std::vector<double> raw_weights;
    raw_weights.reserve(children.size());
    for (const auto& child : children) raw_weights.push_back(child.weight);
    std::vector<double> weights;
    try {
        weights = sibling_weights(raw_weights, scheme);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }

    std::vector<MassFunction> masses;
    masses.reserve(children.size());
    for (std::size_t i = 0; i < children.size(); ++i) {
        const auto& child = children[i];
        if (child.is_leaf()) {
            masses.push_back(assign_masses(weights[i], child.belief()));
        } else {
            const std::string child_path = path + "/" + child.id;
            combine_node(child, child_path, scheme, per_node);
            masses.push_back(assign_masses(weights[i], per_node.at(child.id).beliefs));
        }
    }

    Subtree out{MassFunction::vacuous(0), {}};
    try {
        auto [mass, diags] = fold_attributes(masses);
        out = {std::move(mass), std::move(diags)};
    } catch (const TotalConflictError& e) {
        throw TotalConflictError(path + ": " + e.what(), e.fold_index(), path);
    }
    auto fin = finalize(out.mass, kRaw);
    per_node.insert_or_assign(node.id, NodeResult{path, std::move(fin.beliefs), fin.unassigned, out.diagnostics});
    return out;
}

} // namespace

AggregationResult aggregate_tree(const AttributeNode& root, const GradeFrame& frame,
                                 const AggregationConfig& config) {
    validate_config(config);
    validate_tree(root, frame);

    AggregationResult result{BeliefDistribution::from_values(std::vector<double>(frame.size(), 0.0)), 1.0, {}, {}};
    Subtree top = combine_node(root, "root", config.weighting, result.per_node);
    auto fin = finalize(top.mass, config);
    result.combined_beliefs = fin.beliefs;
    result.unassigned = fin.unassigned;
    result.diagnostics = top.diagnostics;
    result.per_node.insert_or_assign(root.id, NodeResult{"root", std::move(fin.beliefs), fin.unassigned,
                                                         std::move(top.diagnostics)});
    return result;
}

} // namespace relfuse::er
