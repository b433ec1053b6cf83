#include "relfuse/io.hpp"

#include "relfuse/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace relfuse::io {

namespace {

// Error prefix: "<source>: <location>: ".
class Context {
public:
    Context(std::string_view source) : source_(source) {}

    [[noreturn]] void fail(const std::string& where, const std::string& message) const {
        throw ValidationError(source_ + ": " + where + ": " + message);
    }

    const Json& require(const Json& obj, const char* key, const std::string& where) const {
        auto it = obj.find(key);
        if (it == obj.end()) fail(where, std::string("missing field '") + key + "'");
        return *it;
    }

    void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) const {
        if (!obj.is_object()) fail(where, "expected an object");
        for (const auto& [key, value] : obj.items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) fail(where, "unknown field '" + key + "'");
        }
    }

    double number(const Json& v, const std::string& where) const {
        if (!v.is_number()) fail(where, "expected a number");
        return v.get<double>();
    }

    std::string string(const Json& v, const std::string& where) const {
        if (!v.is_string()) fail(where, "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const Json& v, const std::string& where) const {
        if (!v.is_array()) fail(where, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
        return out;
    }

    Json parse(std::string_view text) const {
        try {
            return Json::parse(text.begin(), text.end());
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(source_ + ": malformed JSON: " + e.what());
        }
    }

private:
    std::string source_;
};

AttributeNode parse_node(const Json& j, const GradeFrame& frame, const Context& ctx, const std::string& path) {
    ctx.check_keys(j, {"id", "weight", "beliefs", "children", "description"}, path);
    AttributeNode node;
    node.id = ctx.string(ctx.require(j, "id", path), path + ".id");
    node.weight = j.contains("weight") ? ctx.number(j.at("weight"), path + ".weight") : 1.0;
    const bool has_beliefs = j.contains("beliefs");
    const bool has_children = j.contains("children");
    if (has_beliefs == has_children) ctx.fail(path, "a node needs exactly one of 'beliefs' or 'children'");
    if (has_beliefs) {
        try {
            node.payload = make_belief(frame, ctx.numbers(j.at("beliefs"), path + ".beliefs"));
        } catch (const ValidationError& e) {
            ctx.fail(path, e.what());
        }
    } else {
        const Json& kids = j.at("children");
        if (!kids.is_array()) ctx.fail(path + ".children", "expected an array");
        std::vector<AttributeNode> children;
        for (const auto& k : kids) {
            const std::string id = k.is_object() && k.contains("id") && k.at("id").is_string()
                                       ? k.at("id").get<std::string>()
                                       : "#" + std::to_string(children.size());
            children.push_back(parse_node(k, frame, ctx, path + "/" + id));
        }
        node.payload = std::move(children);
    }
    return node;
}

} // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path.string() + ": cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Assessment parse_assessment(const std::filesystem::path& path) {
    return parse_assessment_text(read_file(path), path.string());
}

Assessment parse_assessment_text(std::string_view text, std::string_view source) {
    const Context ctx(source);
    const Json doc = ctx.parse(text);
    ctx.check_keys(doc, {"grades", "utilities", "weighting", "root", "description"}, "document");

    const Json& grades = ctx.require(doc, "grades", "document");
    if (!grades.is_array()) ctx.fail("grades", "expected an array of strings");
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < grades.size(); ++i) labels.push_back(ctx.string(grades[i], "grades[" + std::to_string(i) + "]"));
    std::optional<std::vector<double>> utilities;
    if (doc.contains("utilities")) utilities = ctx.numbers(doc.at("utilities"), "utilities");

    GradeFrame frame = [&] {
        try {
            return make_frame(std::move(labels), std::move(utilities));
        } catch (const ValidationError& e) {
            ctx.fail("grades", e.what());
        }
    }();

    WeightScheme weighting = WeightScheme::Normalized;
    if (doc.contains("weighting")) {
        try {
            weighting = parse_weighting(ctx.string(doc.at("weighting"), "weighting"));
        } catch (const ValidationError& e) {
            ctx.fail("weighting", e.what());
        }
    }

    AttributeNode root = parse_node(ctx.require(doc, "root", "document"), frame, ctx, "root");
    try {
        validate_tree(root, frame);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(source) + ": " + e.what());
    }
    return {std::move(frame), std::move(root), weighting};
}

Json to_json(const AttributeNode& node) {
    Json j;
    j["id"] = node.id;
    j["weight"] = node.weight;
    if (node.is_leaf()) {
        const auto b = node.belief().beliefs();
        j["beliefs"] = std::vector<double>(b.begin(), b.end());
    } else {
        Json kids = Json::array();
        for (const auto& c : node.children()) kids.push_back(to_json(c));
        j["children"] = std::move(kids);
    }
    return j;
}

Json to_json(const Assessment& assessment) {
    Json j;
    j["grades"] = assessment.frame.labels();
    if (assessment.frame.explicit_utilities()) j["utilities"] = assessment.frame.utilities();
    if (assessment.weighting != WeightScheme::Normalized) j["weighting"] = to_string(assessment.weighting);
    j["root"] = to_json(assessment.root);
    return j;
}

eb::ObservationSet parse_observations(const std::filesystem::path& path) {
    return parse_observations_text(read_file(path), path.string());
}

eb::ObservationSet parse_observations_text(std::string_view text, std::string_view source) {
    const Context ctx(source);
    return observations_from_json(ctx.parse(text), source);
}

eb::ObservationSet observations_from_json(const Json& doc, std::string_view source) {
    const Context ctx(source);
    ctx.check_keys(doc, {"family", "units", "description"}, "document");
    eb::PriorFamily family{};
    try {
        family = eb::parse_family(ctx.string(ctx.require(doc, "family", "document"), "family"));
    } catch (const ValidationError& e) {
        ctx.fail("family", e.what());
    }
    const Json& units = ctx.require(doc, "units", "document");
    if (!units.is_array()) ctx.fail("units", "expected an array");

    std::vector<eb::UnitData> parsed;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const Json& u = units[i];
        std::string where = "units[" + std::to_string(i) + "]";
        if (u.is_object() && u.contains("id") && u.at("id").is_string()) where += " (" + u.at("id").get<std::string>() + ")";
        eb::UnitData unit;
        switch (family) {
        case eb::PriorFamily::BetaBinomial:
            ctx.check_keys(u, {"id", "provenance", "trials", "successes"}, where);
            unit.data = eb::DemandData{ctx.number(ctx.require(u, "trials", where), where + ".trials"),
                                       ctx.number(ctx.require(u, "successes", where), where + ".successes")};
            break;
        case eb::PriorFamily::GammaPoisson:
            ctx.check_keys(u, {"id", "provenance", "exposure", "events"}, where);
            unit.data = eb::CountData{ctx.number(ctx.require(u, "exposure", where), where + ".exposure"),
                                      ctx.number(ctx.require(u, "events", where), where + ".events")};
            break;
        case eb::PriorFamily::GammaExponential:
            ctx.check_keys(u, {"id", "provenance", "failures", "total_time"}, where);
            unit.data = eb::LifetimeData{ctx.number(ctx.require(u, "failures", where), where + ".failures"),
                                         ctx.number(ctx.require(u, "total_time", where), where + ".total_time")};
            break;
        }
        unit.id = ctx.string(ctx.require(u, "id", where), where + ".id");
        try {
            if (u.contains("provenance")) unit.provenance = eb::parse_provenance(ctx.string(u.at("provenance"), where));
            eb::validate_unit(unit);
        } catch (const ValidationError& e) {
            ctx.fail(where, e.what());
        }
        parsed.push_back(std::move(unit));
    }
    try {
        return eb::ObservationSet(family, std::move(parsed));
    } catch (const ValidationError& e) {
        ctx.fail("units", e.what());
    }
}

Json to_json(const eb::UnitData& unit) {
    Json j;
    j["id"] = unit.id;
    j["provenance"] = eb::to_string(unit.provenance);
    if (const auto* d = std::get_if<eb::DemandData>(&unit.data)) {
        j["trials"] = d->trials;
        j["successes"] = d->successes;
    } else if (const auto* c = std::get_if<eb::CountData>(&unit.data)) {
        j["exposure"] = c->exposure;
        j["events"] = c->events;
    } else {
        const auto& l = std::get<eb::LifetimeData>(unit.data);
        j["failures"] = l.failures;
        j["total_time"] = l.total_time;
    }
    return j;
}

Json to_json(const eb::ObservationSet& obs) {
    Json j;
    j["family"] = eb::to_string(obs.family());
    Json units = Json::array();
    for (const auto& u : obs.units()) units.push_back(to_json(u));
    j["units"] = std::move(units);
    return j;
}

Json params_json(eb::PriorFamily family, double first, double second) {
    Json j;
    if (family == eb::PriorFamily::BetaBinomial) {
        j["a"] = first;
        j["b"] = second;
    } else {
        j["shape"] = first;
        j["rate"] = second;
    }
    return j;
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

} // namespace relfuse::io
