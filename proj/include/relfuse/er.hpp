#pragma once

// Evidential reasoning: weighted masses, recursive Dempster combination over
// singleton+frame focal elements, and bottom-up aggregation of attribute trees.

#include "relfuse/belief.hpp"

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace relfuse::er {

struct CombinationDiagnostics {
    double conflict_mass = 0.0;  ///< mass on disjoint grade pairs before normalization
    double normalizer = 1.0;     ///< K = 1 / (1 - conflict_mass)
};

/// Result for one internal node of the tree.
struct NodeResult {
    std::string path;
    BeliefDistribution beliefs;
    double unassigned = 0.0;
    std::vector<CombinationDiagnostics> diagnostics;
};

struct AggregationResult {
    BeliefDistribution combined_beliefs;
    double unassigned = 0.0;
    std::vector<CombinationDiagnostics> diagnostics;
    /// Every internal node by id (the root included). Intermediate nodes are
    /// always raw; the root entry carries the configured mode.
    std::map<std::string, NodeResult> per_node;
};

/// Scales non-negative weights to sum to one.
std::vector<double> normalize_weights(std::span<const double> raw_weights);

/// m_n = weight * beta_n, with the remainder placed on the whole frame.
MassFunction assign_masses(double weight, const BeliefDistribution& belief);

/// Dempster's rule for masses whose focal elements are singletons and the
/// frame. Symmetric in its arguments bit for bit. Throws TotalConflictError
/// when no mass survives intersection.
std::pair<MassFunction, CombinationDiagnostics> combine_pair(const MassFunction& a,
                                                            const MassFunction& b);

/// Left fold of combine_pair in input order. Diagnostics are in fold order;
/// a total conflict reports the failing step as its fold index.
std::pair<MassFunction, std::vector<CombinationDiagnostics>>
fold_attributes(std::span<const MassFunction> masses);

struct Finalized {
    BeliefDistribution beliefs;
    double unassigned = 0.0;
};

/// Raw: beliefs are the singleton masses and the frame mass stays unassigned.
/// Proportional: singleton masses rescaled to sum to one. Proportional mode on
/// a vacuous mass throws ValidationError.
Finalized finalize(const MassFunction& combined, const AggregationConfig& config);

/// Aggregates the tree bottom-up. A leaf root is treated as a group of one.
AggregationResult aggregate_tree(const AttributeNode& root, const GradeFrame& frame,
                                 const AggregationConfig& config = {});

} // namespace relfuse::er
