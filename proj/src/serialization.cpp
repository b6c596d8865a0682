#include "priorweaver/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace priorweaver {

namespace {

[[noreturn]] void schema(const std::string& message) { throw Error("schema_error", message); }

const json& field(const json& doc, const char* key) {
    if (!doc.is_object()) schema("expected a JSON object");
    auto it = doc.find(key);
    if (it == doc.end()) schema(std::string("missing field '") + key + "'");
    return *it;
}

void check_version(const json& doc) {
    const json& v = field(doc, "version");
    if (!v.is_number_integer()) schema("'version' must be an integer");
    const auto version = v.get<std::int64_t>();
    if (version < 1 || version > kSchemaVersion)
        schema("unsupported schema version " + std::to_string(version) + " (this build reads up to " +
               std::to_string(kSchemaVersion) + ")");
}

double number(const json& value, const std::string& what) {
    if (!value.is_number()) schema("'" + what + "' must be a number");
    return value.get<double>();
}

std::uint64_t unsigned_integer(const json& value, const std::string& what) {
    if (!value.is_number_unsigned()) schema("'" + what + "' must be a non-negative integer");
    return value.get<std::uint64_t>();
}

Interval interval(const json& value, const std::string& what) {
    if (!value.is_array() || value.size() != 2) schema("'" + what + "' must be [lo, hi]");
    return {number(value[0], what), number(value[1], what)};
}

json prior_params(const PriorDistribution& p) {
    if (p.family == PriorFamily::normal) return {{"mean", p.location}, {"sd", p.scale}};
    return {{"log_mean", p.location}, {"log_sd", p.scale}};
}

}  // namespace

json snapshot_to_json(const ModelSpec& model, const Dataset& dataset) {
    json variables = json::array();
    for (const auto& v : dataset.variables())
        variables.push_back({{"name", v.name},
                             {"role", std::string(to_string(v.role))},
                             {"range", {v.range.lo, v.range.hi}},
                             {"bins", v.bin_count}});
    json entities = json::array();
    for (const auto& e : dataset.entities()) {
        json values = json::object();
        for (std::size_t i = 0; i < e.values.size(); ++i)
            if (e.values[i]) values[dataset.variables()[i].name] = *e.values[i];
        entities.push_back({{"id", e.id.value}, {"values", std::move(values)}});
    }
    return {{"version", kSchemaVersion},
            {"model_formula", model.to_formula()},
            {"variables", std::move(variables)},
            {"entities", std::move(entities)},
            {"rng_seed", dataset.seed()},
            {"rng_counter", dataset.stream_counter()}};
}

Snapshot snapshot_from_json(const json& doc) {
    check_version(doc);
    const json& formula = field(doc, "model_formula");
    if (!formula.is_string()) schema("'model_formula' must be a string");
    ModelSpec model;
    try {
        model = parse_model(formula.get<std::string>());
    } catch (const Error& e) {
        schema("model_formula: " + e.message());
    }

    const json& vars = field(doc, "variables");
    if (!vars.is_array()) schema("'variables' must be an array");
    std::vector<VariableSpec> variables;
    for (const auto& v : vars) {
        VariableSpec spec;
        const json& name = field(v, "name");
        if (!name.is_string()) schema("variable name must be a string");
        spec.name = name.get<std::string>();
        const json& role = field(v, "role");
        if (!role.is_string()) schema("variable role must be a string");
        spec.role = role_from_string(role.get<std::string>());
        spec.range = interval(field(v, "range"), spec.name + ".range");
        const json& bins = field(v, "bins");
        if (!bins.is_number_integer()) schema("'bins' must be an integer");
        spec.bin_count = bins.get<int>();
        try {
            spec.validate();
        } catch (const Error& e) {
            schema(e.message());
        }
        variables.push_back(std::move(spec));
    }

    const auto expected = model.variables();
    if (variables.size() != expected.size()) schema("variables do not match the model formula");
    for (const auto& spec : variables) {
        const bool is_response = spec.name == model.response;
        const bool known = std::find(expected.begin(), expected.end(), spec.name) != expected.end();
        if (!known) schema("variable '" + spec.name + "' is not part of the model");
        if (is_response != (spec.role == VariableRole::response)) schema("variable '" + spec.name + "' has the wrong role");
    }

    const json& ents = field(doc, "entities");
    if (!ents.is_array()) schema("'entities' must be an array");
    std::vector<Entity> entities;
    for (const auto& e : ents) {
        Entity entity{EntityId{unsigned_integer(field(e, "id"), "id")}, std::vector<std::optional<double>>(variables.size())};
        const json& values = field(e, "values");
        if (!values.is_object()) schema("entity values must be an object");
        for (const auto& [name, value] : values.items()) {
            auto it = std::find_if(variables.begin(), variables.end(), [&](const VariableSpec& s) { return s.name == name; });
            if (it == variables.end()) schema("entity " + to_string(entity.id) + " has unknown variable '" + name + "'");
            entity.values[static_cast<std::size_t>(it - variables.begin())] = number(value, name);
        }
        entities.push_back(std::move(entity));
    }

    const std::uint64_t seed = unsigned_integer(field(doc, "rng_seed"), "rng_seed");
    const std::uint64_t counter = doc.contains("rng_counter") ? unsigned_integer(doc["rng_counter"], "rng_counter") : 0;
    try {
        return {model, Dataset::restore(std::move(variables), std::move(entities), seed, counter)};
    } catch (const Error& e) {
        schema(e.message());
    }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        schema(std::string("malformed JSON: ") + e.what());
    }
}

std::string snapshot_fingerprint(const ModelSpec& model, const Dataset& dataset) {
    const std::string text = snapshot_to_json(model, dataset).dump();
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return std::string("snapshot:") + buf;
}

json priors_to_json(const PriorsDocument& doc) {
    json priors = json::array();
    for (const auto& p : doc.priors)
        priors.push_back({{"parameter", p.parameter},
                          {"family", std::string(to_string(p.family))},
                          {"params", prior_params(p)},
                          {"estimates", p.estimates}});
    return {{"version", kSchemaVersion},
            {"model_formula", doc.model_formula},
            {"derived_at", doc.derived_at},
            {"config",
             {{"B", doc.config.resample_count},
              {"n", doc.config.resample_size},
              {"seed", doc.config.seed},
              {"max_retries", doc.config.max_retries_per_resample}}},
            {"priors", std::move(priors)}};
}

PriorsDocument priors_from_json(const json& doc) {
    check_version(doc);
    PriorsDocument out;
    const json& formula = field(doc, "model_formula");
    if (!formula.is_string()) schema("'model_formula' must be a string");
    out.model_formula = formula.get<std::string>();
    const json& derived = field(doc, "derived_at");
    if (!derived.is_string()) schema("'derived_at' must be a string");
    out.derived_at = derived.get<std::string>();

    const json& cfg = field(doc, "config");
    out.config.resample_count = unsigned_integer(field(cfg, "B"), "B");
    out.config.resample_size = unsigned_integer(field(cfg, "n"), "n");
    out.config.seed = unsigned_integer(field(cfg, "seed"), "seed");
    if (cfg.contains("max_retries")) out.config.max_retries_per_resample = unsigned_integer(cfg["max_retries"], "max_retries");

    const json& priors = field(doc, "priors");
    if (!priors.is_array()) schema("'priors' must be an array");
    for (const auto& p : priors) {
        PriorDistribution prior;
        const json& name = field(p, "parameter");
        if (!name.is_string()) schema("'parameter' must be a string");
        prior.parameter = name.get<std::string>();
        const json& family = field(p, "family");
        if (!family.is_string()) schema("'family' must be a string");
        prior.family = family_from_string(family.get<std::string>());
        const json& params = field(p, "params");
        if (prior.family == PriorFamily::normal) {
            prior.location = number(field(params, "mean"), "mean");
            prior.scale = number(field(params, "sd"), "sd");
        } else {
            prior.location = number(field(params, "log_mean"), "log_mean");
            prior.scale = number(field(params, "log_sd"), "log_sd");
        }
        if (!(prior.scale > 0.0)) schema("prior '" + prior.parameter + "' needs a positive scale");
        if (p.contains("estimates")) {
            if (!p["estimates"].is_array()) schema("'estimates' must be an array");
            for (const auto& e : p["estimates"]) prior.estimates.push_back(number(e, "estimates"));
        }
        out.priors.push_back(std::move(prior));
    }
    return out;
}

json check_to_json(const ModelSpec& model, const PredictiveCheckResult& result) {
    json draws = json::array();
    for (std::size_t j = 0; j < result.densities.size(); ++j) {
        json params = json::object();
        for (std::size_t i = 0; i < model.parameters.size(); ++i)
            params[model.parameters[i].name] =
                result.parameter_draws(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        draws.push_back({{"parameters", std::move(params)}, {"density", result.densities[j]}});
    }
    json bins = json::array();
    for (const auto& b : result.response_bins) bins.push_back({b.bin.lo, b.bin.hi});
    return {{"version", kSchemaVersion},
            {"model_formula", model.to_formula()},
            {"config",
             {{"predictor_sample_count", result.config.predictor_sample_count},
              {"parameter_draw_count", result.config.parameter_draw_count},
              {"seed", result.config.seed},
              {"include_noise", result.config.include_noise}}},
            {"grid", {{"lo", result.grid.lo}, {"hi", result.grid.hi}, {"n", result.grid.point_count}}},
            {"draws", std::move(draws)},
            {"average_density", result.average_density},
            {"response_histogram", {{"bins", std::move(bins)}, {"normalized_counts", result.response_histogram}}}};
}

std::string check_to_csv(const PredictiveCheckResult& result) {
    std::ostringstream out;
    out << "grid_x";
    for (std::size_t j = 0; j < result.densities.size(); ++j) out << ",draw_" << (j + 1);
    out << ",average\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < result.grid.point_count; ++i) {
        put(result.grid.x(i));
        for (const auto& curve : result.densities) {
            out << ',';
            put(curve[i]);
        }
        out << ',';
        put(result.average_density[i]);
        out << '\n';
    }
    return out.str();
}

PredictiveConfig predictive_config_from_json(const json& doc, PredictiveConfig base) {
    if (doc.is_null()) return base;
    if (!doc.is_object()) throw Error("invalid_argument", "predictive config must be an object");
    if (doc.contains("predictor_sample_count"))
        base.predictor_sample_count = unsigned_integer(doc["predictor_sample_count"], "predictor_sample_count");
    if (doc.contains("parameter_draw_count"))
        base.parameter_draw_count = unsigned_integer(doc["parameter_draw_count"], "parameter_draw_count");
    if (doc.contains("seed")) base.seed = unsigned_integer(doc["seed"], "seed");
    if (doc.contains("include_noise")) {
        if (!doc["include_noise"].is_boolean()) schema("'include_noise' must be a boolean");
        base.include_noise = doc["include_noise"].get<bool>();
    }
    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        base.grid = DensityGrid{number(field(g, "lo"), "grid.lo"), number(field(g, "hi"), "grid.hi"),
                                static_cast<std::size_t>(unsigned_integer(field(g, "n"), "grid.n"))};
    }
    base.validate();
    return base;
}

BootstrapConfig bootstrap_config_from_json(const json& doc, BootstrapConfig base) {
    if (doc.is_null()) return base;
    if (!doc.is_object()) throw Error("invalid_argument", "bootstrap config must be an object");
    if (doc.contains("B")) base.resample_count = unsigned_integer(doc["B"], "B");
    if (doc.contains("n")) base.resample_size = unsigned_integer(doc["n"], "n");
    if (doc.contains("seed")) base.seed = unsigned_integer(doc["seed"], "seed");
    if (doc.contains("max_retries")) base.max_retries_per_resample = unsigned_integer(doc["max_retries"], "max_retries");
    return base;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out.flush()) throw Error("io_error", "failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace priorweaver
