// rel: reliability assessment from expert-elicited data.
//
//   rel er assess <file> [--mode raw|proportional] [--out <file>]
//   rel eb fit <file> [--out <file>]
//   rel eb predict <fit> --unit <id> [--mission-time <t>] [--out <file>]
//   rel validate <file> --kind er|eb [--out <file>]

#include "relfuse/commands.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <unistd.h>

namespace {

using relfuse::cli::CommandOutput;

bool use_color() { return std::getenv("NO_COLOR") == nullptr && isatty(fileno(stderr)); }

int emit(const CommandOutput& out, const std::string& out_path) {
    if (out.exit_code != relfuse::cli::kOk && out.report.empty()) {
        std::cerr << (use_color() ? "\033[31merror:\033[0m " : "error: ") << out.message << '\n';
        return out.exit_code;
    }
    if (out_path.empty()) {
        std::cout << out.report;
    } else {
        std::ofstream file(out_path, std::ios::binary);
        if (!file) {
            std::cerr << "error: cannot write " << out_path << '\n';
            return relfuse::cli::kValidationError;
        }
        file << out.report;
    }
    if (out.exit_code != relfuse::cli::kOk) std::cerr << "error: " << out.message << '\n';
    return out.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reliability assessment by evidential reasoning and empirical Bayes", "rel"};
    app.require_subcommand(1);

    std::string input, out_path, unit_id, mode = "raw", kind;
    double mission_time = 0.0;
    relfuse::cli::ValidateTolerances tolerances;

    auto* er = app.add_subcommand("er", "Evidential reasoning over attribute trees");
    er->require_subcommand(1);
    auto* assess = er->add_subcommand("assess", "Aggregate an assessment file");
    assess->add_option("file", input, "Assessment JSON")->required();
    assess->add_option("--mode", mode, "Root finalization")->check(CLI::IsMember({"raw", "proportional"}));
    assess->add_option("--out", out_path, "Write the report here instead of stdout");

    auto* eb = app.add_subcommand("eb", "Empirical Bayes inference");
    eb->require_subcommand(1);
    auto* fit = eb->add_subcommand("fit", "Fit prior hyperparameters to an observation file");
    fit->add_option("file", input, "Observation JSON")->required();
    fit->add_option("--out", out_path, "Write the report here instead of stdout");
    auto* predict = eb->add_subcommand("predict", "Predictive reliability of one unit from a fit report");
    predict->add_option("fit", input, "Fit report JSON")->required();
    predict->add_option("--unit", unit_id, "Unit id")->required();
    auto* mission = predict->add_option("--mission-time", mission_time, "Mission time (gamma families)");
    predict->add_option("--out", out_path, "Write the report here instead of stdout");

    auto* validate = app.add_subcommand("validate", "Cross-check the engines against reference oracles");
    validate->add_option("file", input, "Assessment or observation JSON")->required();
    validate->add_option("--kind", kind, "Which engine to check")->required()->check(CLI::IsMember({"er", "eb"}));
    validate->add_option("--out", out_path, "Write the report here instead of stdout");
    validate->add_option("--er-tolerance", tolerances.er_deviation, "Max ER deviation from the powerset oracle");
    validate->add_option("--gap-tolerance", tolerances.grid_gap, "Max grid-minus-optimizer log marginal gap");
    validate->add_option("--tv-tolerance", tolerances.eb_vs_hierarchical,
                         "Max total variation between EB and hierarchical posteriors");
    validate->add_option("--convergence-tolerance", tolerances.grid_convergence,
                         "Max total variation between hyperprior grid resolutions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return relfuse::cli::kValidationError;
    }

    CommandOutput out;
    if (*assess) {
        out = relfuse::cli::cmd_er_assess(input, relfuse::parse_mode(mode));
    } else if (*fit) {
        out = relfuse::cli::cmd_eb_fit(input);
    } else if (*predict) {
        std::optional<double> t;
        if (*mission) t = mission_time;
        out = relfuse::cli::cmd_eb_predict(input, unit_id, t);
    } else {
        out = relfuse::cli::cmd_validate(
            input, kind == "er" ? relfuse::cli::ValidateKind::Er : relfuse::cli::ValidateKind::Eb, tolerances);
    }
    return emit(out, out_path);
}
