#include "priorweaver/service.hpp"

#include <random>
#include <regex>

namespace priorweaver {

struct Service::Session {
    std::mutex mutex;
    std::string id;
    ModelSpec model;
    Dataset dataset;
    std::uint64_t version = 1;

    std::optional<json> priors_json;
    std::vector<PriorDistribution> priors;
    std::uint64_t priors_version = 0;

    std::optional<json> check_json;
    std::uint64_t check_version = 0;

    std::map<std::string, ConnectPlan> plans;
    std::uint64_t next_plan = 1;

    Session(std::string id_, ModelSpec model_, Dataset dataset_)
        : id(std::move(id_)), model(std::move(model_)), dataset(std::move(dataset_)) {}

    void mutated() { ++version; }
};

namespace {

HttpResponse reply(int status, const json& body) { return {status, dump(body), "application/json"}; }

HttpResponse error_reply(int status, const std::string& code, const std::string& message, json extra = json::object()) {
    extra["code"] = code;
    extra["message"] = message;
    return reply(status, extra);
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
        json doc = json::parse(body);
        if (!doc.is_object()) throw Error("malformed_request", "request body must be a JSON object");
        return doc;
    } catch (const json::parse_error& e) {
        throw Error("malformed_request", std::string("malformed JSON body: ") + e.what());
    }
}

const json& require(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end()) throw Error("malformed_request", std::string("missing field '") + key + "'");
    return *it;
}

double require_number(const json& body, const char* key) {
    const json& v = require(body, key);
    if (!v.is_number()) throw Error("malformed_request", std::string("'") + key + "' must be a number");
    return v.get<double>();
}

Interval interval_of(const json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw Error("malformed_request", "'" + what + "' must be [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

EntityId entity_of(const json& v) {
    if (!v.is_number_unsigned()) throw Error("malformed_request", "entity ids must be non-negative integers");
    return EntityId{v.get<std::uint64_t>()};
}

json ids_json(const std::vector<EntityId>& ids) {
    json out = json::array();
    for (const auto& id : ids) out.push_back(id.value);
    return out;
}

std::uint64_t random_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

int status_for(const std::string& code) noexcept {
    if (code == "malformed_request" || code == "syntax_error" || code == "duplicate_predictor" ||
        code == "response_in_predictors" || code == "schema_error")
        return 400;
    if (code == "unknown_session" || code == "unknown_entity" || code == "unknown_variable" || code == "unknown_plan" ||
        code == "not_found")
        return 404;
    if (code == "stale_plan" || code == "priors_stale" || code == "priors_missing" || code == "would_orphan_values")
        return 409;
    return 422;
}

Service::Service(ServiceOptions options) : options_(std::move(options)) {
    if (!options_.seed_source) options_.seed_source = random_seed;
    if (options_.snapshot_dir) {
        std::filesystem::create_directories(*options_.snapshot_dir);
        load_persisted();
    }
}

Service::~Service() = default;

std::size_t Service::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

void Service::load_persisted() {
    for (const auto& entry : std::filesystem::directory_iterator(*options_.snapshot_dir)) {
        if (entry.path().extension() != ".json") continue;
        Snapshot snap = snapshot_from_json(parse_json(read_file(entry.path())));
        const std::string id = entry.path().stem().string();
        sessions_[id] = std::make_shared<Session>(id, std::move(snap.model), std::move(snap.dataset));
        if (id.size() > 1 && id[0] == 's') {
            try {
                next_session_ = std::max<std::uint64_t>(next_session_, std::stoull(id.substr(1)) + 1);
            } catch (const std::exception&) {
            }
        }
    }
}

void Service::persist(const Session& session) const {
    if (!options_.snapshot_dir) return;
    write_file(*options_.snapshot_dir / (session.id + ".json"), dump(snapshot_to_json(session.model, session.dataset)));
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error("unknown_session", "unknown session '" + id + "'");
    return it->second;
}

std::string Service::create_session(const json& body) {
    const json& formula = require(body, "formula");
    if (!formula.is_string()) throw Error("malformed_request", "'formula' must be a string");
    ModelSpec model = parse_model(formula.get<std::string>());

    std::vector<VariableSpec> variables = default_variables(model);
    if (body.contains("variables")) {
        const json& overrides = body["variables"];
        if (!overrides.is_array()) throw Error("malformed_request", "'variables' must be an array");
        for (const auto& v : overrides) {
            const json& name = require(v, "name");
            if (!name.is_string()) throw Error("malformed_request", "variable name must be a string");
            auto it = std::find_if(variables.begin(), variables.end(),
                                   [&](const VariableSpec& s) { return s.name == name.get<std::string>(); });
            if (it == variables.end())
                throw Error("malformed_request", "variable '" + name.get<std::string>() + "' is not in the model");
            if (v.contains("range")) it->range = interval_of(v["range"], "range");
            if (v.contains("bins")) {
                if (!v["bins"].is_number_integer()) throw Error("malformed_request", "'bins' must be an integer");
                it->bin_count = v["bins"].get<int>();
            }
        }
    }

    std::uint64_t seed = 0;
    if (body.contains("seed")) {
        if (!body["seed"].is_number_unsigned()) throw Error("malformed_request", "'seed' must be a non-negative integer");
        seed = body["seed"].get<std::uint64_t>();
    } else {
        seed = options_.seed_source();
    }
    Dataset dataset(std::move(variables), seed);

    std::lock_guard lock(sessions_mutex_);
    std::string id;
    do id = "s" + std::to_string(next_session_++);
    while (sessions_.contains(id));
    auto session = std::make_shared<Session>(id, std::move(model), std::move(dataset));
    persist(*session);
    sessions_[id] = session;
    return id;
}

HttpResponse Service::handle(const HttpRequest& request) {
    try {
        return route(request);
    } catch (const OrphanedValuesError& e) {
        return error_reply(409, e.code(), e.message(), {{"entity_ids", ids_json(e.entities())}});
    } catch (const Error& e) {
        json extra = json::object();
        if (!e.step().empty()) extra["step"] = e.step();
        return error_reply(status_for(e.code()), e.code(), e.what(), extra);
    } catch (const json::exception& e) {
        return error_reply(400, "malformed_request", e.what());
    } catch (const std::exception& e) {
        return error_reply(500, "internal_error", e.what());
    }
}

HttpResponse Service::route(const HttpRequest& request) {
    static const std::regex session_re(R"(^/sessions/([A-Za-z0-9_-]+)(/.*)?$)");
    static const std::regex values_re(R"(^/values$)");
    static const std::regex remove_re(R"(^/entities/([0-9]+)/values/([A-Za-z_][A-Za-z0-9_]*)$)");
    static const std::regex variable_re(R"(^/variables/([A-Za-z_][A-Za-z0-9_]*)$)");
    static const std::regex histogram_re(R"(^/variables/([A-Za-z_][A-Za-z0-9_]*)/histogram$)");

    const std::string& method = request.method;
    if (request.path == "/sessions") {
        if (method != "POST") return error_reply(405, "method_not_allowed", "use POST /sessions");
        const std::string id = create_session(parse_body(request.body));
        auto session = find_session(id);
        std::lock_guard lock(session->mutex);
        json params = json::array();
        for (const auto& p : session->model.parameters) params.push_back(p.name);
        return reply(201, {{"session_id", id},
                           {"version", session->version},
                           {"model_formula", session->model.to_formula()},
                           {"parameters", std::move(params)}});
    }

    std::smatch m;
    if (!std::regex_match(request.path, m, session_re)) return error_reply(404, "not_found", "no route for " + request.path);
    auto session = find_session(m[1].str());
    const std::string sub = m[2].matched ? m[2].str() : "";
    std::lock_guard lock(session->mutex);
    Session& s = *session;
    Dataset& ds = s.dataset;

    if (sub.empty() && method == "GET") {
        json doc = snapshot_to_json(s.model, ds);
        doc["session_id"] = s.id;
        doc["session_version"] = s.version;
        if (s.priors_json) {
            doc["priors"] = *s.priors_json;
            doc["priors_version"] = s.priors_version;
            doc["priors_stale"] = s.priors_version != s.version;
        }
        if (s.check_json) {
            doc["check"] = *s.check_json;
            doc["check_version"] = s.check_version;
        }
        return reply(200, doc);
    }

    if (sub == "/snapshot") {
        if (method == "GET") return {200, dump(snapshot_to_json(s.model, ds))};
        if (method == "PUT") {
            Snapshot snap = snapshot_from_json(parse_json(request.body));
            s.model = std::move(snap.model);
            s.dataset = std::move(snap.dataset);
            s.plans.clear();
            s.mutated();
            persist(s);
            return reply(200, {{"version", s.version}});
        }
    }

    std::smatch sm;
    if (std::regex_match(sub, sm, values_re) && method == "POST") {
        const json body = parse_body(request.body);
        const json& var = require(body, "var");
        if (!var.is_string()) throw Error("malformed_request", "'var' must be a string");
        EntityId id;
        if (body.contains("bin_index")) {
            if (!body["bin_index"].is_number_integer()) throw Error("malformed_request", "'bin_index' must be an integer");
            id = ds.add_value_at_bin(var.get<std::string>(), body["bin_index"].get<int>());
        } else {
            id = ds.add_value(var.get<std::string>(), require_number(body, "value"));
        }
        s.mutated();
        persist(s);
        return reply(201, {{"entity_id", id.value}, {"version", s.version}});
    }

    if (std::regex_match(sub, sm, remove_re) && method == "DELETE") {
        ds.remove_value(EntityId{std::stoull(sm[1].str())}, sm[2].str());
        s.mutated();
        persist(s);
        return {204, ""};
    }

    if (std::regex_match(sub, sm, variable_re) && method == "PUT") {
        const json body = parse_body(request.body);
        const VariableSpec& current = ds.variable(sm[1].str());
        int bins = current.bin_count;
        Interval range = current.range;
        if (body.contains("bins")) {
            if (!body["bins"].is_number_integer()) throw Error("malformed_request", "'bins' must be an integer");
            bins = body["bins"].get<int>();
        }
        if (body.contains("range")) range = interval_of(body["range"], "range");
        const bool force = body.value("force", false);
        const std::size_t dropped = ds.set_binning(sm[1].str(), bins, range, force);
        s.mutated();
        persist(s);
        return reply(200, {{"dropped_values", dropped}, {"version", s.version}});
    }

    if (std::regex_match(sub, sm, histogram_re) && method == "GET") {
        json bins = json::array(), counts = json::array();
        for (const auto& b : ds.histogram(sm[1].str())) {
            bins.push_back({b.bin.lo, b.bin.hi});
            counts.push_back(b.count);
        }
        return reply(200, {{"bins", std::move(bins)}, {"counts", std::move(counts)}});
    }

    if (sub == "/generate" && method == "POST") {
        const json body = parse_body(request.body);
        const json& constraints = require(body, "constraints");
        if (!constraints.is_object()) throw Error("malformed_request", "'constraints' must be an object");
        std::map<std::string, Interval> resolved;
        for (const auto& [name, value] : constraints.items()) resolved[name] = interval_of(value, name);
        std::size_t count = 5;
        if (body.contains("count")) {
            if (!body["count"].is_number_unsigned()) throw Error("malformed_request", "'count' must be a non-negative integer");
            count = body["count"].get<std::size_t>();
        }
        if (body.contains("mode") && mode_from_string(body["mode"].get<std::string>()) == EntityMode::complete) {
            for (const auto& v : ds.variables())
                if (!resolved.contains(v.name))
                    throw Error("incomplete_constraints", "complete-mode GENERATE needs a brush on '" + v.name + "'");
        }
        const auto ids = ds.generate_entities(resolved, count);
        if (!ids.empty()) {
            s.mutated();
            persist(s);
        }
        return reply(201, {{"entity_ids", ids_json(ids)}, {"version", s.version}});
    }

    if (sub == "/connect/preview" && method == "POST") {
        const json body = parse_body(request.body);
        const json& groups_json = require(body, "groups");
        if (!groups_json.is_array()) throw Error("malformed_request", "'groups' must be an array");
        std::vector<ConnectGroup> groups;
        for (const auto& g : groups_json) {
            ConnectGroup group;
            for (const auto& v : require(g, "variables")) group.variables.push_back(v.get<std::string>());
            for (const auto& e : require(g, "entities")) group.entities.push_back(entity_of(e));
            groups.push_back(std::move(group));
        }
        ConnectPlan plan = ds.preview_connections(groups);
        const std::string token = "plan-" + std::to_string(s.next_plan++);
        json merges = json::array();
        for (const auto& merge : plan.merges) merges.push_back(ids_json(merge));
        if (s.plans.size() >= 64) s.plans.erase(s.plans.begin());
        s.plans[token] = std::move(plan);
        return reply(200, {{"plan_token", token}, {"version", s.version}, {"merges", std::move(merges)}});
    }

    if (sub == "/connect" && method == "POST") {
        const json body = parse_body(request.body);
        const json& token = require(body, "plan_token");
        if (!token.is_string()) throw Error("malformed_request", "'plan_token' must be a string");
        auto it = s.plans.find(token.get<std::string>());
        if (it == s.plans.end()) throw Error("unknown_plan", "unknown plan token '" + token.get<std::string>() + "'");
        const auto ids = ds.connect(it->second);
        s.plans.erase(it);
        if (!ids.empty()) {
            s.mutated();
            persist(s);
        }
        return reply(200, {{"entity_ids", ids_json(ids)}, {"version", s.version}});
    }

    if (sub == "/query" && method == "POST") {
        const json body = parse_body(request.body);
        Selection selection;
        if (body.contains("mode")) selection.mode = mode_from_string(body["mode"].get<std::string>());
        if (body.contains("brushes")) {
            if (!body["brushes"].is_object()) throw Error("malformed_request", "'brushes' must be an object");
            for (const auto& [name, value] : body["brushes"].items()) selection.brushes[name] = interval_of(value, name);
        }
        return reply(200, {{"entity_ids", ids_json(ds.query(selection))}});
    }

    if (sub == "/translate" && method == "POST") {
        const json body = parse_body(request.body);
        BootstrapConfig base;
        base.seed = ds.seed();
        const BootstrapConfig cfg =
            bootstrap_config_from_json(body.contains("bootstrap_config") ? body["bootstrap_config"] : json(), base);
        auto priors = derive_priors(ds, s.model, cfg);
        json doc = priors_to_json({s.model.to_formula(), snapshot_fingerprint(s.model, ds), cfg, priors});
        s.priors = std::move(priors);
        s.priors_json = doc;
        s.priors_version = s.version;
        return reply(200, doc);
    }

    if (sub == "/check" && method == "POST") {
        const json body = parse_body(request.body);
        if (!s.priors_json) throw Error("priors_missing", "no priors yet; call translate first");
        if (s.priors_version != s.version)
            throw Error("priors_stale", "priors were derived at version " + std::to_string(s.priors_version) +
                                            ", dataset is at version " + std::to_string(s.version));
        PredictiveConfig base;
        base.seed = ds.seed();
        const PredictiveConfig cfg =
            predictive_config_from_json(body.contains("predictive_config") ? body["predictive_config"] : json(), base);
        json doc = check_to_json(s.model, run_check(ds, s.model, s.priors, cfg));
        s.check_json = doc;
        s.check_version = s.version;
        return reply(200, doc);
    }

    return error_reply(404, "not_found", "no route for " + method + " " + request.path);
}

}  // namespace priorweaver
