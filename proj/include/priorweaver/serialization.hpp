#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "priorweaver/dataset.hpp"
#include "priorweaver/model_spec.hpp"
#include "priorweaver/predictive_check.hpp"
#include "priorweaver/prior_engine.hpp"

namespace priorweaver {

using json = nlohmann::json;

/// Newest schema version written and accepted for every JSON artifact.
inline constexpr int kSchemaVersion = 1;

struct Snapshot {
    ModelSpec model;
    Dataset dataset;
};

json snapshot_to_json(const ModelSpec& model, const Dataset& dataset);
/// Throws Error("schema_error") on any structural or invariant violation.
Snapshot snapshot_from_json(const json& doc);

/// Canonical text form: two-space indent, sorted keys, trailing newline.
/// Doubles are written in shortest round-trip form.
std::string dump(const json& doc);
json parse_json(const std::string& text);

/// Stable content stamp of a dataset snapshot, used as `derived_at`.
std::string snapshot_fingerprint(const ModelSpec& model, const Dataset& dataset);

struct PriorsDocument {
    std::string model_formula;
    std::string derived_at;
    BootstrapConfig config;
    std::vector<PriorDistribution> priors;
};

json priors_to_json(const PriorsDocument& doc);
PriorsDocument priors_from_json(const json& doc);

json check_to_json(const ModelSpec& model, const PredictiveCheckResult& result);
/// Columns grid_x, draw_1..draw_k, average; one row per grid point.
std::string check_to_csv(const PredictiveCheckResult& result);

PredictiveConfig predictive_config_from_json(const json& doc, PredictiveConfig base = {});
BootstrapConfig bootstrap_config_from_json(const json& doc, BootstrapConfig base = {});

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace priorweaver
