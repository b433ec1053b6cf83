#include "relfuse/commands.hpp"

#include "relfuse/error.hpp"
#include "relfuse/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace relfuse::cli {

namespace {

io::Json header(const char* kind) {
    io::Json j;
    j["format"] = io::kReportFormat;
    j["kind"] = kind;
    return j;
}

io::Json beliefs_json(const GradeFrame& frame, const BeliefDistribution& beliefs) {
    io::Json j;
    for (std::size_t n = 0; n < frame.size(); ++n) j[frame.label(n)] = beliefs[n];
    return j;
}

io::Json node_json(const std::string& id, const GradeFrame& frame, const er::NodeResult& r) {
    io::Json j;
    j["id"] = id;
    j["path"] = r.path;
    j["beliefs"] = beliefs_json(frame, r.beliefs);
    j["unassigned"] = r.unassigned;
    const auto [lo, hi] = expected_score_interval(frame, r.beliefs);
    j["score_interval"] = {lo, hi};
    io::Json diags = io::Json::array();
    for (std::size_t i = 0; i < r.diagnostics.size(); ++i) {
        io::Json d;
        d["step"] = i;
        d["conflict_mass"] = r.diagnostics[i].conflict_mass;
        d["normalizer"] = r.diagnostics[i].normalizer;
        diags.push_back(std::move(d));
    }
    j["diagnostics"] = std::move(diags);
    return j;
}

void collect_internal(const AttributeNode& node, std::vector<std::string>& ids) {
    if (node.is_leaf()) return;
    ids.push_back(node.id);
    for (const auto& c : node.children()) collect_internal(c, ids);
}

CommandOutput failure(int code, const std::string& message) { return {code, {}, message}; }

// Maps library exceptions onto the exit-code contract.
CommandOutput guarded(const std::function<CommandOutput()>& body) {
    try {
        return body();
    } catch (const TotalConflictError& e) {
        return failure(kTotalConflict, e.what());
    } catch (const InsufficientDataError& e) {
        return failure(kInsufficientUnits, e.what());
    } catch (const ValidationError& e) {
        return failure(kValidationError, e.what());
    } catch (const nlohmann::json::exception& e) {
        return failure(kValidationError, std::string("malformed report: ") + e.what());
    } catch (const std::exception& e) {
        return failure(kInternalError, e.what());
    }
}

io::Json check_json(const char* name, double value, double tolerance) {
    io::Json j;
    j["name"] = name;
    j["value"] = value;
    j["tolerance"] = tolerance;
    j["passed"] = value <= tolerance;
    return j;
}

void require_units(const eb::ObservationSet& obs) {
    if (obs.size() < 2) {
        throw InsufficientDataError("need at least 2 units to fit hyperparameters, got " + std::to_string(obs.size()));
    }
}

} // namespace

io::Json er_report(const io::Assessment& assessment, const AggregationConfig& config,
                   const er::AggregationResult& result) {
    io::Json j = header("er-assessment");
    io::Json settings;
    settings["mode"] = to_string(config.mode);
    settings["tolerance"] = config.tolerance;
    settings["weighting"] = to_string(config.weighting);
    j["settings"] = std::move(settings);
    j["input"] = io::to_json(assessment);

    const auto& frame = assessment.frame;
    io::Json root = node_json(assessment.root.id, frame, result.per_node.at(assessment.root.id));
    j["root"] = std::move(root);

    std::vector<std::string> ids;
    collect_internal(assessment.root, ids);
    io::Json nodes = io::Json::array();
    for (const auto& id : ids) {
        if (id == assessment.root.id) continue;
        nodes.push_back(node_json(id, frame, result.per_node.at(id)));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

io::Json fit_report(const eb::ObservationSet& obs, const eb::FitResult& fit) {
    const auto family = obs.family();
    io::Json j = header("eb-fit");
    j["family"] = eb::to_string(family);
    io::Json settings;
    settings["working_box"] = {eb::kParamLow, eb::kParamHigh};
    settings["gradient_tolerance"] = eb::kGradientTolerance;
    settings["value_tolerance"] = eb::kValueTolerance;
    j["settings"] = std::move(settings);
    j["input"] = io::to_json(obs);

    io::Json f;
    f["estimate"] = io::params_json(family, fit.estimate.first(), fit.estimate.second());
    f["log_marginal"] = fit.log_marginal;
    f["init"] = io::params_json(family, fit.init.first(), fit.init.second());
    f["init_fallback"] = fit.init_fallback;
    f["converged"] = fit.converged;
    f["at_bound"] = fit.at_bound;
    f["iterations"] = fit.iterations;
    j["fit"] = std::move(f);

    if (family == eb::PriorFamily::BetaBinomial) {
        j["prior_next_demand_reliability"] =
            eb::prior_predictive_reliability(family, fit.estimate, eb::PredictiveQuery::next_demand());
    }

    io::Json units = io::Json::array();
    for (const auto& unit : obs.units()) {
        const auto post = eb::posterior(family, fit.estimate, unit);
        const auto [mean, var] = eb::posterior_moments(post);
        io::Json u;
        u["id"] = unit.id;
        u["provenance"] = eb::to_string(unit.provenance);
        u["posterior"] = io::params_json(family, post.first, post.second);
        u["posterior_mean"] = mean;
        u["posterior_variance"] = var;
        if (family == eb::PriorFamily::BetaBinomial) {
            u["next_demand_reliability"] =
                eb::predictive_reliability(family, post.first, post.second, eb::PredictiveQuery::next_demand());
        }
        units.push_back(std::move(u));
    }
    j["units"] = std::move(units);
    return j;
}

CommandOutput cmd_er_assess(const std::filesystem::path& path, FinalizationMode mode) {
    return guarded([&] {
        const auto assessment = io::parse_assessment(path);
        const AggregationConfig config{mode, kSumTolerance, assessment.weighting};
        const auto result = er::aggregate_tree(assessment.root, assessment.frame, config);
        return CommandOutput{kOk, io::dump(er_report(assessment, config, result)), "assessment complete"};
    });
}

CommandOutput cmd_eb_fit(const std::filesystem::path& path) {
    return guarded([&] {
        const auto obs = io::parse_observations(path);
        require_units(obs);
        const auto fit = eb::fit_hyperparams(obs);
        std::string message = fit.converged ? "fit converged" : "fit did not converge";
        if (fit.at_bound) message += " (estimate on the working-box boundary)";
        return CommandOutput{kOk, io::dump(fit_report(obs, fit)), message};
    });
}

namespace {

double param(const io::Json& params, eb::PriorFamily family, int index) {
    const bool beta = family == eb::PriorFamily::BetaBinomial;
    const char* key = index == 0 ? (beta ? "a" : "shape") : (beta ? "b" : "rate");
    return params.at(key).get<double>();
}

} // namespace

CommandOutput cmd_eb_predict(const std::filesystem::path& fit_path, const std::string& unit_id,
                             std::optional<double> mission_time) {
    return guarded([&] {
        const std::string source = fit_path.string();
        io::Json doc;
        try {
            doc = io::Json::parse(io::read_file(fit_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(source + ": malformed JSON: " + e.what());
        }
        if (doc.value("format", "") != io::kReportFormat || doc.value("kind", "") != "eb-fit") {
            throw ValidationError(source + ": not an eb-fit report of format " + std::string(io::kReportFormat));
        }
        const auto obs = io::observations_from_json(doc.at("input"), source);
        const auto family = obs.family();
        const io::Json& f = doc.at("fit");
        const eb::HyperParams estimate(param(f.at("estimate"), family, 0), param(f.at("estimate"), family, 1));
        const eb::HyperParams init(param(f.at("init"), family, 0), param(f.at("init"), family, 1));
        const eb::FitResult fit{family,
                                estimate,
                                f.at("log_marginal").get<double>(),
                                init,
                                f.at("init_fallback").get<bool>(),
                                f.at("converged").get<bool>(),
                                f.at("at_bound").get<bool>(),
                                f.at("iterations").get<int>()};

        const eb::UnitData& unit = obs.unit(unit_id);
        eb::PredictiveQuery query = eb::PredictiveQuery::next_demand();
        if (family == eb::PriorFamily::BetaBinomial) {
            if (mission_time) throw ValidationError("--mission-time applies to gamma families only");
        } else {
            if (!mission_time) throw ValidationError("--mission-time is required for family " + eb::to_string(family));
            query = eb::PredictiveQuery::mission(*mission_time);
        }

        const auto post = eb::posterior(family, fit.estimate, unit);
        io::Json j = header("eb-predict");
        j["family"] = eb::to_string(family);
        j["unit"] = io::to_json(unit);
        j["prior"] = io::params_json(family, estimate.first(), estimate.second());
        j["posterior"] = io::params_json(family, post.first, post.second);
        io::Json q;
        q["target"] = query.target == eb::PredictiveQuery::Target::NextDemand ? "next-demand" : "mission-survival";
        if (query.target == eb::PredictiveQuery::Target::MissionSurvival) q["mission_time"] = query.mission_time;
        j["query"] = std::move(q);
        j["prior_reliability"] = eb::prior_predictive_reliability(family, estimate, query);
        j["reliability"] = eb::posterior_predictive_reliability(family, fit, unit, query);
        return CommandOutput{kOk, io::dump(j), "prediction complete"};
    });
}

CommandOutput cmd_validate(const std::filesystem::path& path, ValidateKind kind, const ValidateTolerances& tol) {
    return guarded([&] {
        io::Json j = header("validation");
        io::Json checks = io::Json::array();
        if (kind == ValidateKind::Er) {
            j["target"] = "er";
            const auto assessment = io::parse_assessment(path);
            const AggregationConfig config{FinalizationMode::Raw, kSumTolerance, assessment.weighting};
            const auto result = er::aggregate_tree(assessment.root, assessment.frame, config);
            const auto oracle = oracle::aggregate_tree_powerset(assessment.root, assessment.frame, assessment.weighting);
            double deviation = 0.0;
            for (const auto& [id, node] : result.per_node) {
                const auto& ref = oracle.at(id);
                for (std::size_t n = 0; n < assessment.frame.size(); ++n) {
                    deviation = std::max(deviation, std::abs(node.beliefs[n] - ref.singletons[n]));
                }
                deviation = std::max(deviation, std::abs(node.unassigned - ref.frame_mass));
            }
            checks.push_back(check_json("er-vs-powerset-max-deviation", deviation, tol.er_deviation));
        } else {
            j["target"] = "eb";
            const auto obs = io::parse_observations(path);
            require_units(obs);
            const auto fit = eb::fit_hyperparams(obs);
            const auto [grid_best, grid_value] = oracle::grid_marginal_argmax(obs, oracle::HyperPrior::flat_log(200));
            io::Json fit_j;
            fit_j["family"] = eb::to_string(obs.family());
            fit_j["estimate"] = io::params_json(obs.family(), fit.estimate.first(), fit.estimate.second());
            fit_j["log_marginal"] = fit.log_marginal;
            fit_j["grid_best"] = io::params_json(obs.family(), grid_best.first(), grid_best.second());
            fit_j["grid_log_marginal"] = grid_value;
            fit_j["converged"] = fit.converged;
            fit_j["at_bound"] = fit.at_bound;
            j["fit"] = std::move(fit_j);
            checks.push_back(check_json("grid-minus-optimizer-log-marginal", grid_value - fit.log_marginal, tol.grid_gap));

            const auto& unit = obs.units().front();
            const auto theta = oracle::theta_grid(obs, unit);
            const auto eb_post = oracle::discretize(eb::posterior(obs.family(), fit.estimate, unit), theta);
            const auto fine = oracle::hierarchical_posterior_quadrature(obs, unit, oracle::HyperPrior::flat_log(200));
            const auto coarse = oracle::hierarchical_posterior_quadrature(obs, unit, oracle::HyperPrior::flat_log(100));
            j["hierarchical_unit"] = unit.id;
            checks.push_back(check_json("eb-vs-hierarchical-total-variation", oracle::total_variation(eb_post, fine),
                                        tol.eb_vs_hierarchical));
            checks.push_back(check_json("hierarchical-grid-convergence-total-variation",
                                        oracle::total_variation(coarse, fine), tol.grid_convergence));
        }
        bool passed = true;
        for (const auto& c : checks) passed = passed && c.at("passed").get<bool>();
        j["checks"] = std::move(checks);
        j["passed"] = passed;
        return CommandOutput{passed ? kOk : kValidationFailed, io::dump(j),
                             passed ? "all checks within tolerance" : "validation checks failed"};
    });
}

} // namespace relfuse::cli
