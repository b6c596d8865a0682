#include "priorweaver/predictive_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "priorweaver/rng.hpp"

namespace priorweaver {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_priors_match(std::span<const PriorDistribution> priors, const ModelSpec& model) {
    if (priors.size() != model.parameters.size())
        throw Error("parameter_mismatch", "expected " + std::to_string(model.parameters.size()) + " priors, got " +
                                              std::to_string(priors.size()));
    for (std::size_t i = 0; i < priors.size(); ++i) {
        if (priors[i].parameter != model.parameters[i].name)
            throw Error("parameter_mismatch", "prior '" + priors[i].parameter + "' does not match model parameter '" +
                                                  model.parameters[i].name + "'");
        const bool sigma = model.parameters[i].kind == ParameterKind::noise_scale;
        if (sigma != (priors[i].family == PriorFamily::lognormal))
            throw Error("parameter_mismatch", "prior family of '" + priors[i].parameter + "' does not fit its kind");
    }
}

}  // namespace

void DensityGrid::validate() const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) throw Error("invalid_argument", "density grid needs lo < hi");
    if (point_count < 16) throw Error("invalid_argument", "density grid needs at least 16 points");
}

DensityGrid default_grid(const VariableSpec& response, std::size_t point_count) {
    const double pad = kGridPadding * response.range.width();
    return {response.range.lo - pad, response.range.hi + pad, point_count};
}

void PredictiveConfig::validate() const {
    if (predictor_sample_count < 1) throw Error("invalid_argument", "predictor sample count must be at least 1");
    if (parameter_draw_count < 1) throw Error("invalid_argument", "parameter draw count must be at least 1");
    if (grid) grid->validate();
}

Eigen::MatrixXd sample_predictors(const Dataset& dataset, const ModelSpec& model, std::size_t count, std::uint64_t seed) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(model.predictors.size()));
    for (std::size_t i = 0; i < model.predictors.size(); ++i) {
        const std::vector<double> marginal = dataset.marginal(model.predictors[i]);
        if (marginal.empty())
            throw Error("empty_marginal", "predictor '" + model.predictors[i] + "' has no values to sample from");
        Rng rng = Rng::substream(seed, {stream::predictors, i});
        for (std::size_t r = 0; r < count; ++r)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = marginal[rng.below(marginal.size())];
    }
    return out;
}

std::vector<double> simulate_response(const Eigen::MatrixXd& predictors, std::span<const double> parameters,
                                      const ModelSpec& model, std::uint64_t seed, bool include_noise) {
    if (parameters.size() != model.parameters.size())
        throw Error("parameter_mismatch", "parameter vector does not match the model");
    if (predictors.cols() != static_cast<Eigen::Index>(model.predictors.size()))
        throw Error("invalid_argument", "predictor matrix does not match the model");

    const std::size_t offset = model.has_intercept ? 1 : 0;
    const double intercept = model.has_intercept ? parameters[0] : 0.0;
    const double sigma = parameters[model.noise_index()];

    Rng rng(seed);
    std::vector<double> out(static_cast<std::size_t>(predictors.rows()));
    for (Eigen::Index r = 0; r < predictors.rows(); ++r) {
        double y = intercept;
        for (Eigen::Index c = 0; c < predictors.cols(); ++c) y += parameters[offset + static_cast<std::size_t>(c)] * predictors(r, c);
        if (include_noise) y += sigma * rng.normal();
        out[static_cast<std::size_t>(r)] = y;
    }
    return out;
}

double silverman_bandwidth(double sd, double iqr, std::size_t n) noexcept {
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double silverman_bandwidth(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n == 0) return 0.0;
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    return silverman_bandwidth(sd, iqr, n);
}

double trapezoid(std::span<const double> values, double step) noexcept {
    if (values.size() < 2) return 0.0;
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
    return sum * step;
}

std::vector<double> kde(std::span<const double> samples, const DensityGrid& grid) {
    grid.validate();
    if (samples.empty()) throw Error("invalid_argument", "KDE needs at least one sample");
    const double h = std::max(silverman_bandwidth(samples), 1e-3 * (grid.hi - grid.lo));
    const double inv_two_h2 = 1.0 / (2.0 * h * h);

    // Evaluated in log space so that curves stay normalizable even when all
    // samples sit far outside the grid.
    std::vector<double> log_density(grid.point_count);
    std::vector<double> terms(samples.size());
    for (std::size_t i = 0; i < grid.point_count; ++i) {
        const double x = grid.x(i);
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const double d = x - samples[s];
            terms[s] = -d * d * inv_two_h2;
            peak = std::max(peak, terms[s]);
        }
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - peak);
        log_density[i] = peak + std::log(acc);
    }

    const double top = *std::max_element(log_density.begin(), log_density.end());
    std::vector<double> density(grid.point_count);
    for (std::size_t i = 0; i < grid.point_count; ++i) density[i] = std::exp(log_density[i] - top);
    const double area = trapezoid(density, grid.step());
    for (double& d : density) d /= area;
    return density;
}

PredictiveCheckResult run_check(const Dataset& dataset, const ModelSpec& model, std::span<const PriorDistribution> priors,
                                const PredictiveConfig& cfg) {
    cfg.validate();
    check_priors_match(priors, model);

    PredictiveCheckResult result;
    result.config = cfg;
    result.grid = cfg.grid ? *cfg.grid : default_grid(dataset.variable(model.response));
    result.config.grid = result.grid;

    const std::size_t k = cfg.parameter_draw_count;
    const Eigen::MatrixXd predictors = sample_predictors(dataset, model, cfg.predictor_sample_count, cfg.seed);
    result.parameter_draws = sample_parameters(priors, k, cfg.seed);

    result.responses.reserve(k);
    result.densities.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::VectorXd params = result.parameter_draws.row(static_cast<Eigen::Index>(j)).transpose();
        result.responses.push_back(simulate_response(predictors,
                                                     std::span<const double>(params.data(), static_cast<std::size_t>(params.size())),
                                                     model, derive_seed(cfg.seed, {stream::response, j}), cfg.include_noise));
        result.densities.push_back(kde(result.responses.back(), result.grid));
    }

    result.average_density.assign(result.grid.point_count, 0.0);
    for (std::size_t i = 0; i < result.grid.point_count; ++i) {
        double sum = 0.0;
        for (const auto& curve : result.densities) sum += curve[i];
        result.average_density[i] = sum / static_cast<double>(k);
    }

    result.response_bins = dataset.histogram(model.response);
    std::size_t total = 0;
    for (const auto& b : result.response_bins) total += b.count;
    result.response_histogram.reserve(result.response_bins.size());
    for (const auto& b : result.response_bins)
        result.response_histogram.push_back(total == 0 ? 0.0 : static_cast<double>(b.count) / (static_cast<double>(total) * b.bin.width()));
    return result;
}

}  // namespace priorweaver
