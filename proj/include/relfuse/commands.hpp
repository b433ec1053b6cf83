#pragma once

// Command implementations behind the `rel` CLI. Each returns the exit code,
// the report text (empty on failure) and a human-readable message.

#include "relfuse/belief.hpp"
#include "relfuse/er.hpp"
#include "relfuse/eb.hpp"
#include "relfuse/io.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace relfuse::cli {

enum ExitCode : int {
    kOk = 0,
    kInternalError = 1,
    kValidationError = 2,
    kTotalConflict = 3,
    kInsufficientUnits = 4,
    kValidationFailed = 5,
};

struct CommandOutput {
    int exit_code = kOk;
    std::string report;
    std::string message;
};

io::Json er_report(const io::Assessment& assessment, const AggregationConfig& config,
                   const er::AggregationResult& result);

io::Json fit_report(const eb::ObservationSet& obs, const eb::FitResult& fit);

CommandOutput cmd_er_assess(const std::filesystem::path& path, FinalizationMode mode);

CommandOutput cmd_eb_fit(const std::filesystem::path& path);

/// Reads a fit report, rebuilds the fitted prior and the unit's data from it.
/// Mission time is required for gamma families and rejected for beta-binomial.
CommandOutput cmd_eb_predict(const std::filesystem::path& fit_path, const std::string& unit_id,
                             std::optional<double> mission_time);

enum class ValidateKind { Er, Eb };

struct ValidateTolerances {
    double er_deviation = 1e-12;
    double grid_gap = 1e-3;
    double eb_vs_hierarchical = 0.1;
    double grid_convergence = 1e-3;
};

CommandOutput cmd_validate(const std::filesystem::path& path, ValidateKind kind,
                           const ValidateTolerances& tolerances = {});

} // namespace relfuse::cli
