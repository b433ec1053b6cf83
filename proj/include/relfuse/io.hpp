#pragma once

// JSON file formats for assessments, observation sets and reports.

#include "relfuse/belief.hpp"
#include "relfuse/eb.hpp"

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace relfuse::io {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kReportFormat = "relfuse-report/1";

struct Assessment {
    GradeFrame frame;
    AttributeNode root;
    WeightScheme weighting = WeightScheme::Normalized;
};

/// Reads a whole file; throws ValidationError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

Assessment parse_assessment(const std::filesystem::path& path);
Assessment parse_assessment_text(std::string_view text, std::string_view source = "<input>");
Json to_json(const Assessment& assessment);
Json to_json(const AttributeNode& node);

eb::ObservationSet parse_observations(const std::filesystem::path& path);
eb::ObservationSet parse_observations_text(std::string_view text,
                                           std::string_view source = "<input>");
eb::ObservationSet observations_from_json(const Json& doc, std::string_view source);
Json to_json(const eb::ObservationSet& obs);
Json to_json(const eb::UnitData& unit);

/// Parameter pair with family-specific field names ("a"/"b" or "shape"/"rate").
Json params_json(eb::PriorFamily family, double first, double second);

/// Two-space indented dump with a trailing newline. Doubles are written in
/// shortest round-trip form.
std::string dump(const Json& doc);

} // namespace relfuse::io
