#include "priorweaver/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <sstream>

#include "priorweaver/http_server.hpp"
#include "priorweaver/serialization.hpp"
#include "priorweaver/service.hpp"
#include "priorweaver/simulate.hpp"

namespace priorweaver::cli {

namespace {

/// Failure with an exit code attached.
struct Exit {
    int code;
    std::string message;
};

Error io_to_schema(const Error& e) { return e.code() == "io_error" ? Error("schema_error", e.message()) : e; }

ModelSpec load_model(const std::string& model_arg) {
    std::string text = model_arg;
    std::error_code ec;
    if (std::filesystem::is_regular_file(model_arg, ec)) text = read_file(model_arg);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    try {
        return parse_model(text);
    } catch (const Error& e) {
        throw Exit{exit_code::usage, "invalid --model: " + std::string(e.what())};
    }
}

Snapshot load_snapshot(const std::string& path, const ModelSpec& model) {
    Snapshot snap = [&] {
        try {
            return snapshot_from_json(parse_json(read_file(path)));
        } catch (const Error& e) {
            throw Exit{exit_code::schema, "snapshot '" + path + "': " + io_to_schema(e).message()};
        }
    }();
    for (const auto& name : model.variables()) {
        try {
            const auto& spec = snap.dataset.variable(name);
            if ((spec.role == VariableRole::response) != (name == model.response))
                throw Exit{exit_code::schema, "variable '" + name + "' has a different role in the snapshot"};
        } catch (const Error&) {
            throw Exit{exit_code::schema, "snapshot has no variable '" + name + "' required by the model"};
        }
    }
    return snap;
}

void write_output(const std::string& path, const std::string& contents) {
    try {
        write_file(path, contents);
    } catch (const Error& e) {
        throw Exit{exit_code::schema, e.message()};
    } catch (const std::filesystem::filesystem_error& e) {
        throw Exit{exit_code::schema, e.what()};
    }
}

std::vector<double> parse_coefficients(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Exit{exit_code::usage, "invalid coefficient '" + item + "'"};
        }
    }
    if (out.empty()) throw Exit{exit_code::usage, "--coeffs needs at least one value"};
    return out;
}


}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Prior elicitation through dataset construction: derive priors, run prior predictive checks, serve the API"};
    app.require_subcommand(1);

    std::string model_arg, data_path, out_path, priors_path, csv_path;
    std::optional<std::uint64_t> seed;

    BootstrapConfig boot;
    auto* derive = app.add_subcommand("derive", "Bootstrap-fit the model to a snapshot and write priors JSON");
    derive->add_option("--model", model_arg, "Formula text or a file containing it")->required();
    derive->add_option("--data", data_path, "Session snapshot JSON")->required();
    derive->add_option("--bootstrap-count", boot.resample_count, "Number of bootstrap resamples")->capture_default_str();
    derive->add_option("--resample-size", boot.resample_size, "Rows per resample")->capture_default_str();
    derive->add_option("--max-retries", boot.max_retries_per_resample, "Redraws for a rank-deficient resample")
        ->capture_default_str();
    derive->add_option("--seed", seed, "Bootstrap seed (default: the snapshot's rng_seed)");
    derive->add_option("--out", out_path, "Output priors JSON")->required();

    PredictiveConfig pred;
    std::size_t grid_points = kDefaultGridPoints;
    bool no_noise = false;
    auto* check = app.add_subcommand("check", "Run a prior predictive check and write check JSON (and CSV)");
    check->add_option("--model", model_arg, "Formula text or a file containing it")->required();
    check->add_option("--data", data_path, "Session snapshot JSON")->required();
    check->add_option("--priors", priors_path, "Priors JSON from derive")->required();
    check->add_option("--draws", pred.parameter_draw_count, "Parameter sets drawn from the priors")->capture_default_str();
    check->add_option("--pred-samples", pred.predictor_sample_count, "Predictor rows sampled from the marginals")
        ->capture_default_str();
    check->add_option("--grid-points", grid_points, "Density grid size")->capture_default_str();
    check->add_flag("--no-noise", no_noise, "Simulate responses without the noise term");
    check->add_option("--seed", seed, "Check seed (default: the snapshot's rng_seed)");
    check->add_option("--out", out_path, "Output check JSON")->required();
    check->add_option("--csv", csv_path, "Optional CSV of grid_x, draw_1..k, average");

    std::string coeffs_text;
    double sigma = 1.0;
    std::size_t rows = 200;
    std::uint64_t sim_seed = 0;
    auto* simulate = app.add_subcommand("simulate-truth", "Write a snapshot of complete rows drawn from a known linear model");
    simulate->add_option("--coeffs", coeffs_text, "Comma-separated coefficients, one per predictor")->required();
    simulate->add_option("--sigma", sigma, "Noise standard deviation")->capture_default_str();
    simulate->add_option("--rows", rows, "Number of rows")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "Generator seed")->capture_default_str();
    simulate->add_option("--out", out_path, "Output snapshot JSON")->required();

    std::string listen = "127.0.0.1:8787", snapshot_dir, cors_origin;
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--listen", listen, "host:port")->envname("PRIORWEAVER_LISTEN")->capture_default_str();
    serve->add_option("--snapshot-dir", snapshot_dir, "Directory for per-session snapshots")
        ->envname("PRIORWEAVER_SNAPSHOT_DIR");
    serve->add_option("--cors-origin", cors_origin, "Access-Control-Allow-Origin value")->envname("PRIORWEAVER_CORS_ORIGIN");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_code::ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_code::ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::usage;
    }

    try {
        if (derive->parsed()) {
            const ModelSpec model = load_model(model_arg);
            const Snapshot snap = load_snapshot(data_path, model);
            boot.seed = seed.value_or(snap.dataset.seed());
            try {
                boot.validate(model);
            } catch (const Error& e) {
                throw Exit{exit_code::usage, e.message()};
            }
            std::vector<PriorDistribution> priors;
            try {
                priors = derive_priors(snap.dataset, model, boot);
            } catch (const Error& e) {
                throw Exit{exit_code::domain, e.what()};
            }
            write_output(out_path, dump(priors_to_json(
                                       {model.to_formula(), snapshot_fingerprint(snap.model, snap.dataset), boot, priors})));
            out << "wrote " << priors.size() << " priors to " << out_path << "\n";
            return exit_code::ok;
        }

        if (check->parsed()) {
            const ModelSpec model = load_model(model_arg);
            const Snapshot snap = load_snapshot(data_path, model);
            PriorsDocument priors = [&] {
                try {
                    return priors_from_json(parse_json(read_file(priors_path)));
                } catch (const Error& e) {
                    throw Exit{exit_code::schema, "priors '" + priors_path + "': " + io_to_schema(e).message()};
                }
            }();
            bool names_match = priors.priors.size() == model.parameters.size();
            for (std::size_t i = 0; names_match && i < priors.priors.size(); ++i)
                names_match = priors.priors[i].parameter == model.parameters[i].name;
            if (!names_match) {
                std::string have, want;
                for (const auto& p : priors.priors) have += (have.empty() ? "" : ", ") + p.parameter;
                for (const auto& p : model.parameters) want += (want.empty() ? "" : ", ") + p.name;
                throw Exit{exit_code::mismatch, "priors parameters [" + have + "] do not match model parameters [" + want + "]"};
            }
            pred.seed = seed.value_or(snap.dataset.seed());
            pred.include_noise = !no_noise;
            pred.grid = default_grid(snap.dataset.variable(model.response), grid_points);
            try {
                pred.validate();
            } catch (const Error& e) {
                throw Exit{exit_code::usage, e.message()};
            }
            PredictiveCheckResult result;
            try {
                result = run_check(snap.dataset, model, priors.priors, pred);
            } catch (const Error& e) {
                throw Exit{e.code() == "parameter_mismatch" ? exit_code::mismatch : exit_code::domain, e.what()};
            }
            write_output(out_path, dump(check_to_json(model, result)));
            if (!csv_path.empty()) write_output(csv_path, check_to_csv(result));
            out << "wrote check with " << result.densities.size() << " draws to " << out_path << "\n";
            return exit_code::ok;
        }

        if (simulate->parsed()) {
            const std::vector<double> coeffs = parse_coefficients(coeffs_text);
            Snapshot snap = [&] {
                try {
                    return simulate_truth(coeffs, sigma, rows, sim_seed);
                } catch (const Error& e) {
                    throw Exit{exit_code::usage, e.message()};
                }
            }();
            write_output(out_path, dump(snapshot_to_json(snap.model, snap.dataset)));
            out << "wrote " << rows << " rows for '" << snap.model.to_formula() << "' to " << out_path << "\n";
            return exit_code::ok;
        }

        if (serve->parsed()) {
            ServerOptions server_opts;
            ServiceOptions service_opts;
            try {
                server_opts = parse_listen_address(listen);
            } catch (const Error& e) {
                throw Exit{exit_code::usage, e.message()};
            }
            server_opts.cors_origin = cors_origin;
            if (!snapshot_dir.empty()) service_opts.snapshot_dir = snapshot_dir;
            Service service(std::move(service_opts));
            HttpServer server(service, server_opts);
            const int port = server.bind();
            out << "listening on " << server_opts.host << ":" << port << std::endl;
            server.listen();
            return exit_code::ok;
        }
    } catch (const Exit& e) {
        err << "error: " << e.message << "\n";
        return e.code;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == "schema_error" ? exit_code::schema : exit_code::domain;
    }
    return exit_code::usage;
}

}  // namespace priorweaver::cli
