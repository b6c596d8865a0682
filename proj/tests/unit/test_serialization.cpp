#include <doctest.h>

#include <cmath>

#include "sessions.hpp"
#include "priorweaver/serialization.hpp"
#include "priorweaver/simulate.hpp"

using namespace priorweaver;

using test_support::random_session;

TEST_CASE("snapshot save-load-save is byte identical and value exact") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Snapshot s = random_session(seed);
        const std::string first = dump(snapshot_to_json(s.model, s.dataset));
        const Snapshot back = snapshot_from_json(parse_json(first));
        CHECK(dump(snapshot_to_json(back.model, back.dataset)) == first);
        REQUIRE(back.dataset.entities().size() == s.dataset.entities().size());
        for (std::size_t i = 0; i < s.dataset.entities().size(); ++i) {
            CHECK(back.dataset.entities()[i].id == s.dataset.entities()[i].id);
            CHECK(back.dataset.entities()[i].values == s.dataset.entities()[i].values);
        }
        CHECK(back.dataset.seed() == s.dataset.seed());
        CHECK(back.dataset.stream_counter() == s.dataset.stream_counter());
    }
}

TEST_CASE("restored sessions continue the same random sequence") {
    Snapshot s = random_session(4);
    Snapshot back = snapshot_from_json(parse_json(dump(snapshot_to_json(s.model, s.dataset))));
    std::map<std::string, Interval> c{{s.dataset.variables()[0].name, s.dataset.variables()[0].range}};
    s.dataset.generate_entities(c, 3);
    back.dataset.generate_entities(c, 3);
    CHECK(dump(snapshot_to_json(s.model, s.dataset)) == dump(snapshot_to_json(back.model, back.dataset)));
}

TEST_CASE("snapshot schema errors") {
    const Snapshot s = random_session(1);
    const json good = snapshot_to_json(s.model, s.dataset);
    auto rejects = [](json doc) {
        try {
            snapshot_from_json(doc);
            return false;
        } catch (const Error& e) {
            return e.code() == "schema_error";
        }
    };
    json doc = good;
    doc["version"] = kSchemaVersion + 1;
    CHECK(rejects(doc));
    doc = good;
    doc.erase("entities");
    CHECK(rejects(doc));
    doc = good;
    doc["model_formula"] = "y ~ y";
    CHECK(rejects(doc));
    doc = good;
    doc["variables"].erase(0);
    CHECK(rejects(doc));
    doc = good;
    doc["entities"].push_back({{"id", 1}, {"values", {{doc["variables"][0]["name"].get<std::string>(), 1e300}}}});
    CHECK(rejects(doc));
    doc = good;
    doc["entities"].push_back({{"id", 9999}, {"values", json::object()}});
    CHECK(rejects(doc));
    CHECK_THROWS_AS(parse_json("{not json"), Error);
}

TEST_CASE("priors document round trip") {
    PriorsDocument doc{"y ~ 0 + x", "snapshot:0", BootstrapConfig{}, {}};
    doc.priors.push_back({"beta_x", PriorFamily::normal, 0.1 + 0.2, 1.0 / 3.0, {1.0, 2.5}});
    doc.priors.push_back({"sigma", PriorFamily::lognormal, -1e-300, kScaleFloor, {std::exp(1.0)}});
    const std::string text = dump(priors_to_json(doc));
    const PriorsDocument back = priors_from_json(parse_json(text));
    CHECK(back.priors == doc.priors);
    CHECK(back.config == doc.config);
    CHECK(dump(priors_to_json(back)) == text);

    json future = priors_to_json(doc);
    future["version"] = 2;
    CHECK_THROWS_AS(priors_from_json(future), Error);
}

TEST_CASE("check export layout") {
    const Snapshot snap = simulate_truth(std::vector<double>{2, 3}, 1.0, 60, 2);
    BootstrapConfig boot;
    const auto priors = derive_priors(snap.dataset, snap.model, boot);
    PredictiveConfig cfg;
    cfg.grid = DensityGrid{0, 600, 64};
    const auto result = run_check(snap.dataset, snap.model, priors, cfg);
    const json doc = check_to_json(snap.model, result);
    CHECK(doc["grid"]["n"] == 64);
    CHECK(doc["draws"].size() == 10);
    CHECK(doc["draws"][0]["parameters"].contains("beta_x1"));
    CHECK(doc["draws"][0]["density"].size() == 64);
    CHECK(doc["average_density"].size() == 64);
    CHECK(doc["response_histogram"]["bins"].size() == 10);
    CHECK(doc["config"]["parameter_draw_count"] == 10);
    CHECK(doc["config"]["predictor_sample_count"] == 100);

    const std::string csv = check_to_csv(result);
    CHECK(csv.rfind("grid_x,draw_1,draw_2,draw_3,draw_4,draw_5,draw_6,draw_7,draw_8,draw_9,draw_10,average\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
}

TEST_CASE("simulate_truth") {
    const std::vector<double> coeffs{2, 3};
    const Snapshot a = simulate_truth(coeffs, 1.0, 200, 9);
    const Snapshot b = simulate_truth(coeffs, 1.0, 200, 9);
    CHECK(dump(snapshot_to_json(a.model, a.dataset)) == dump(snapshot_to_json(b.model, b.dataset)));
    CHECK(a.model.to_formula() == "y ~ 0 + x1 + x2");
    CHECK(a.dataset.complete_count() == 200);

    const Snapshot exact = simulate_truth(coeffs, 0.0, 50, 9);
    for (const auto& e : exact.dataset.entities()) CHECK(*e.values[2] == 2 * *e.values[0] + 3 * *e.values[1]);
    const auto priors = derive_priors(exact.dataset, exact.model, BootstrapConfig{});
    CHECK(priors[0].scale == doctest::Approx(kScaleFloor).epsilon(1e-3));
    CHECK(priors[2].family == PriorFamily::lognormal);
    CHECK(std::isfinite(priors[2].location));

    const std::vector<double> negative{-1.5};
    const Snapshot neg = simulate_truth(negative, 2.0, 100, 1);
    CHECK(neg.dataset.variable("y").range.lo <= -150 - 12);
}
