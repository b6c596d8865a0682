// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oplog.hpp"
#include "oracles.hpp"
#include "sessions.hpp"
#include "priorweaver/cli.hpp"
#include "priorweaver/http_server.hpp"
#include "priorweaver/predictive_check.hpp"
#include "priorweaver/prior_engine.hpp"
#include "priorweaver/serialization.hpp"
#include "priorweaver/service.hpp"
#include "priorweaver/simulate.hpp"

#include <httplib.h>

using namespace priorweaver;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds >= budget_seconds) {
        if (o.pass) o.detail = "over runtime budget";
        o.pass = false;
    }
    if (!o.pass) ++failures;
    std::printf("%s %s (%.3fs / %.0fs)%s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds, budget_seconds,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "priorweaver");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::fprintf(stderr, "cli: %s", err.str().c_str());
    return code;
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / "priorweaver_acceptance";
    TempDir() {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

Outcome constants() {
    Outcome o;
    const TempDir dir;
    const Snapshot truth = simulate_truth(std::vector<double>{2, 3}, 1.0, 80, 1);
    write_file(dir / "snap.json", dump(snapshot_to_json(truth.model, truth.dataset)));
    o.require(cli({"derive", "--model", "y ~ 0 + x1 + x2", "--data", dir / "snap.json", "--out", dir / "p.json"}) == 0, "derive failed");
    o.require(cli({"check", "--model", "y ~ 0 + x1 + x2", "--data", dir / "snap.json", "--priors", dir / "p.json", "--out",
                   dir / "c.json"}) == 0, "check failed");
    if (!o.pass) return o;
    const json priors = parse_json(read_file(dir / "p.json"));
    const json check = parse_json(read_file(dir / "c.json"));
    o.require(priors["config"]["B"] == 100, "B != 100");
    o.require(priors["config"]["n"] == 50, "n != 50");
    o.require(check["config"]["predictor_sample_count"] == 100, "predictor samples != 100");
    o.require(check["config"]["parameter_draw_count"] == 10, "parameter draws != 10");
    o.require(check["draws"].size() == 10, "check JSON does not hold 10 draws");

    Service service;
    const auto created = service.handle({"POST", "/sessions", R"({"formula": "income ~ 0 + age + education_years"})"});
    const std::string id = json::parse(created.body)["session_id"];
    const json session = json::parse(service.handle({"GET", "/sessions/" + id + "/snapshot", ""}).body);
    o.require(session["variables"].size() == 3, "session lacks three variables");
    for (const auto& v : session["variables"]) {
        o.require(v["bins"] == 10, "default bins != 10");
        o.require(v["range"] == json::array({0.0, 100.0}), "default range != [0,100]");
    }
    const json hist = json::parse(service.handle({"GET", "/sessions/" + id + "/variables/age/histogram", ""}).body);
    o.require(hist["counts"].size() == 10, "histogram does not have 10 bins");
    o.detail = o.pass ? "B=100 n=50 predictors=100 k=10 bins=10 over [0,100]" : o.detail;
    return o;
}

Outcome ols_oracle() {
    Outcome o;
    oracle::Lcg gen(20240601);
    double worst_rel = 0, worst_orth = 0;
    int instances = 0;
    while (instances < 100) {
        const std::size_t p = 1 + gen.below(4);
        const std::size_t n = 5 + gen.below(56);
        if (n < p + 1) continue;
        const bool intercept = gen.below(2) == 0;
        const std::size_t predictors = intercept ? p - 1 : p;
        if (predictors == 0) continue;
        std::string formula = "y ~ ";
        formula += intercept ? "" : "0 + ";
        for (std::size_t j = 0; j < predictors; ++j) formula += (j ? " + x" : "x") + std::to_string(j + 1);
        const ModelSpec model = parse_model(formula);

        Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(predictors + 1));
        for (std::size_t r = 0; r < n; ++r) {
            double y = gen.uniform(-5, 5);
            for (std::size_t j = 0; j < predictors; ++j) {
                const double x = gen.uniform(-100, 100);
                rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = x;
                y += gen.uniform(-3, 3) * x + gen.normal();
            }
            rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(predictors)) = y;
        }
        const Eigen::MatrixXd design = design_matrix(rows, model);
        if (!full_rank(design)) continue;
        ++instances;

        oracle::Matrix x(n, std::vector<double>(p));
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            y[r] = rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(predictors));
            for (std::size_t c = 0; c < p; ++c) x[r][c] = design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
        const std::vector<double> expect = oracle::normal_equations(x, y);
        const Eigen::VectorXd got = ols_fit(rows, model);
        double norm_b = 0, diff = 0;
        for (std::size_t c = 0; c < p; ++c) {
            norm_b = std::max(norm_b, std::fabs(expect[c]));
            diff = std::max(diff, std::fabs(expect[c] - got(static_cast<Eigen::Index>(c))));
        }
        worst_rel = std::max(worst_rel, diff / norm_b);

        // Residual orthogonality, computed here from the returned coefficients.
        double norm_y = 0;
        std::vector<double> resid(n);
        for (std::size_t r = 0; r < n; ++r) {
            double fit = 0;
            for (std::size_t c = 0; c < p; ++c) fit += x[r][c] * got(static_cast<Eigen::Index>(c));
            resid[r] = y[r] - fit;
            norm_y += y[r] * y[r];
        }
        norm_y = std::sqrt(norm_y);
        for (std::size_t c = 0; c < p; ++c) {
            long double dot = 0;
            for (std::size_t r = 0; r < n; ++r) dot += static_cast<long double>(x[r][c]) * resid[r];
            worst_orth = std::max(worst_orth, static_cast<double>(std::fabs(dot)) / norm_y);
        }
    }
    o.require(worst_rel < 1e-9, fmt("relative error %.3g >= 1e-9", worst_rel));
    o.require(worst_orth < 1e-8, fmt("|X^T r|/||y|| %.3g >= 1e-8", worst_orth));
    if (o.pass) o.detail = fmt("100 instances, max rel err %.3g, max |X^T r|/||y|| %.3g", worst_rel, worst_orth);
    return o;
}

Outcome recovery() {
    Outcome o;
    const TempDir dir;
    o.require(cli({"simulate-truth", "--coeffs", "2,3", "--sigma", "1", "--rows", "200", "--seed", "42", "--out", dir / "s.json"}) == 0,
              "simulate-truth failed");
    if (!o.pass) return o;
    const Snapshot snap = snapshot_from_json(parse_json(read_file(dir / "s.json")));
    BootstrapConfig cfg;
    cfg.seed = 42;
    const auto priors = derive_priors(snap.dataset, snap.model, cfg);
    const double truth[] = {2, 3};
    std::string detail;
    for (int i = 0; i < 2; ++i) {
        const auto& p = priors[static_cast<std::size_t>(i)];
        // Bootstrap standard error: sample sd of the estimates.
        const double n = static_cast<double>(p.estimates.size());
        double mean = 0, ss = 0;
        for (double v : p.estimates) mean += v;
        mean /= n;
        for (double v : p.estimates) ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (n - 1));
        const double z = std::fabs(p.mean() - truth[i]) / se;
        o.require(z <= 3.0, p.parameter + fmt(" mean %.5g is %.2f SE from truth", p.mean(), z));
        detail += p.parameter + fmt(" mean %.5g (%.2f SE), ", p.mean(), z);
    }
    const double median = priors[2].median();
    o.require(std::fabs(median - 1.0) <= 0.25, fmt("sigma median %.4g not within 25%% of 1", median));
    if (o.pass) o.detail = detail + fmt("sigma median %.4g", median);
    return o;
}

Outcome determinism() {
    Outcome o;
    const TempDir dir;
    const Snapshot truth = simulate_truth(std::vector<double>{2, 3}, 1.0, 200, 9);
    const std::string snapshot = dump(snapshot_to_json(truth.model, truth.dataset));
    write_file(dir / "snap.json", snapshot);

    Service service;
    HttpServer server(service, ServerOptions{"127.0.0.1", 0, ""});
    const int port = server.bind();
    std::thread thread([&] { server.listen(); });
    httplib::Client client("127.0.0.1", port);

    for (int run = 0; run < 3; ++run) {
        const std::string tag = std::to_string(run);
        const std::string seed = std::to_string(100 + run);
        o.require(cli({"derive", "--model", "y ~ 0 + x1 + x2", "--data", dir / "snap.json", "--seed", seed, "--out",
                       dir / ("p" + tag)}) == 0, "derive failed");
        o.require(cli({"check", "--model", "y ~ 0 + x1 + x2", "--data", dir / "snap.json", "--priors", dir / ("p" + tag),
                       "--seed", seed, "--out", dir / ("c" + tag)}) == 0, "check failed");

        auto res = client.Post("/sessions", R"({"formula": "y ~ 0 + x1 + x2", "seed": 1})", "application/json");
        if (!res || res->status != 201) {
            o.require(false, "session creation failed");
            break;
        }
        const std::string base = "/sessions/" + json::parse(res->body)["session_id"].get<std::string>();
        res = client.Put(base + "/snapshot", snapshot, "application/json");
        o.require(res && res->status == 200, "snapshot upload failed");
        res = client.Post(base + "/translate", R"({"bootstrap_config": {"seed": )" + seed + "}}", "application/json");
        o.require(res && res->status == 200, "translate failed");
        const std::string service_priors = res ? res->body : "";
        res = client.Post(base + "/check", R"({"predictive_config": {"seed": )" + seed + "}}", "application/json");
        o.require(res && res->status == 200, "check failed");
        const std::string service_check = res ? res->body : "";
        if (!o.pass) break;
        o.require(read_file(dir / ("p" + tag)) == service_priors, "priors JSON differs between CLI and service, run " + tag);
        o.require(read_file(dir / ("c" + tag)) == service_check, "check JSON differs between CLI and service, run " + tag);
        if (run > 0) {
            // Same seed again through the CLI reproduces run 0's seed-100 outputs.
            o.require(cli({"derive", "--model", "y ~ 0 + x1 + x2", "--data", dir / "snap.json", "--seed", "100", "--out",
                           dir / "again"}) == 0, "derive failed");
            o.require(read_file(dir / "again") == read_file(dir / "p0"), "repeated CLI derive differs");
        }
    }
    server.stop();
    thread.join();
    if (o.pass) o.detail = "3 runs, CLI and HTTP outputs byte identical";
    return o;
}

Outcome conservation() {
    Outcome o;
    std::size_t connects = 0, merges = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        for (const auto& obs : test_support::play_random_log(seed, 60)) {
            ++connects;
            merges += obs.merges;
            o.require(obs.conserved, "value multiset changed, log " + std::to_string(seed));
            o.require(obs.in_range, "value out of range, log " + std::to_string(seed));
            o.require(obs.merge_count_ok, "merge count != min group size, log " + std::to_string(seed));
            o.require(obs.entity_count_ok, "entity count inconsistent, log " + std::to_string(seed));
        }
    }
    o.require(merges > 0, "no merges exercised");
    if (o.pass) o.detail = "1000 logs, " + std::to_string(connects) + " connects, " + std::to_string(merges) + " merges";
    return o;
}

Outcome predictive_invariants() {
    Outcome o;
    double worst_area = 0;
    std::size_t densities = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Snapshot snap = simulate_truth(std::vector<double>{2, 3}, 1.0 + static_cast<double>(seed), 150, seed);
        BootstrapConfig boot;
        boot.seed = seed;
        const auto priors = derive_priors(snap.dataset, snap.model, boot);
        PredictiveConfig cfg;
        cfg.seed = seed;
        const auto r = run_check(snap.dataset, snap.model, priors, cfg);
        const double h = r.grid.step();
        for (const auto& f : r.densities) {
            // Trapezoid rule written out here.
            double area = 0;
            for (std::size_t i = 1; i < f.size(); ++i) area += 0.5 * (f[i - 1] + f[i]) * h;
            worst_area = std::max(worst_area, std::fabs(area - 1.0));
            ++densities;
        }
        for (std::size_t i = 0; i < r.grid.point_count; ++i) {
            double sum = 0;
            for (const auto& f : r.densities) sum += f[i];
            o.require(r.average_density[i] == sum / static_cast<double>(r.densities.size()), "average is not the pointwise mean");
        }
    }
    o.require(worst_area <= 1e-6, fmt("density integral off by %.3g", worst_area));

    const ModelSpec model = parse_model("income ~ 0 + age + education_years");
    Dataset ds = Dataset::for_model(model, 3);
    ds.add_value("age", 10);
    ds.add_value("education_years", 5);
    ds.add_value("income", 35);
    const std::vector<PriorDistribution> spike{{"beta_age", PriorFamily::normal, 2, kScaleFloor, {}},
                                               {"beta_education_years", PriorFamily::normal, 3, kScaleFloor, {}},
                                               {"sigma", PriorFamily::lognormal, std::log(1e-9), kScaleFloor, {}}};
    PredictiveConfig cfg;
    cfg.seed = 5;
    const auto r = run_check(ds, model, spike, cfg);
    double worst_offset = 0;
    for (const auto& f : r.densities) {
        const auto arg = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
        worst_offset = std::max(worst_offset, std::fabs(r.grid.x(arg) - 35.0));
    }
    o.require(worst_offset <= r.grid.step(), fmt("spike argmax %.4g from 35 exceeds step %.4g", worst_offset, r.grid.step()));
    if (o.pass)
        o.detail = std::to_string(densities) + fmt(" densities, max |area-1| %.3g, spike offset %.3g (step %.3g)", worst_area,
                                                   worst_offset, r.grid.step());
    return o;
}

Outcome scaling() {
    Outcome o;
    constexpr double c = 10.0;
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Snapshot snap = simulate_truth(std::vector<double>{2, 3}, 1.0, 200, seed);
        const json doc = snapshot_to_json(snap.model, snap.dataset);
        json scaled = doc;
        const std::string& y = snap.model.response;
        for (auto& v : scaled["variables"])
            if (v["name"] == snap.model.response) v["range"] = {v["range"][0].get<double>() * c, v["range"][1].get<double>() * c};
        for (auto& e : scaled["entities"])
            if (e["values"].contains(y)) e["values"][y] = e["values"][y].get<double>() * c;
        const Snapshot big = snapshot_from_json(scaled);

        BootstrapConfig cfg;
        cfg.seed = seed;
        const auto a = derive_priors(snap.dataset, snap.model, cfg);
        const auto b = derive_priors(big.dataset, big.model, cfg);
        for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, std::fabs(b[i].location - c * a[i].location) / std::fabs(c * a[i].location));
    }
    o.require(worst < 1e-9, fmt("relative error %.3g", worst));
    if (o.pass) o.detail = fmt("5 datasets, max relative error %.3g", worst);
    return o;
}

Outcome round_trip() {
    Outcome o;
    const TempDir dir;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Snapshot s = test_support::random_session(1000 + seed, 80);
        const std::string a = dir / "a.json", b = dir / "b.json";
        write_file(a, dump(snapshot_to_json(s.model, s.dataset)));
        const Snapshot back = snapshot_from_json(parse_json(read_file(a)));
        write_file(b, dump(snapshot_to_json(back.model, back.dataset)));
        o.require(read_file(a) == read_file(b), "session " + std::to_string(seed) + " differs after reload");
    }
    if (o.pass) o.detail = "50 sessions byte identical";
    return o;
}

}  // namespace

int main() {
    criterion("procedural constants", 1, constants);
    criterion("OLS oracle equivalence", 5, ols_oracle);
    criterion("parameter recovery", 10, recovery);
    criterion("CLI/service determinism", 10, determinism);
    criterion("conservation under CONNECT", 10, conservation);
    criterion("predictive check invariants", 5, predictive_invariants);
    criterion("response-scaling equivariance", 5, scaling);
    criterion("snapshot round-trip", 5, round_trip);
    std::printf("%d failed\n", failures);
    return failures == 0 ? 0 : 1;
}
