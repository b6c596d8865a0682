#include "priorweaver/prior_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "priorweaver/rng.hpp"

namespace priorweaver {

namespace {

Error insufficient_rows(std::size_t have, std::size_t need) {
    return Error("insufficient_rows",
                 "need at least " + std::to_string(need) + " rows, got " + std::to_string(have));
}

}  // namespace

void BootstrapConfig::validate(const ModelSpec& model) const {
    if (resample_count < 1) throw Error("invalid_argument", "resample count must be at least 1");
    if (resample_size < model.linear_parameter_count() + 1)
        throw Error("invalid_argument", "resample size must be at least " +
                                            std::to_string(model.linear_parameter_count() + 1) + " for this model");
}

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& rows, const ModelSpec& model) {
    const auto k = static_cast<Eigen::Index>(model.predictors.size());
    if (rows.cols() != k + 1) throw Error("invalid_argument", "row matrix does not match the model's variables");
    const Eigen::Index offset = model.has_intercept ? 1 : 0;
    Eigen::MatrixXd x(rows.rows(), k + offset);
    if (model.has_intercept) x.col(0).setOnes();
    x.rightCols(k) = rows.leftCols(k);
    return x;
}

bool full_rank(const Eigen::MatrixXd& design) {
    if (design.rows() < design.cols() || design.cols() == 0) return false;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(design).singularValues();
    const double largest = sv(0);
    const double smallest = sv(sv.size() - 1);
    return largest > 0.0 && std::isfinite(largest) && smallest / largest > kRankTolerance;
}

Eigen::VectorXd ols_fit(const Eigen::MatrixXd& rows, const ModelSpec& model) {
    const std::size_t p = model.linear_parameter_count();
    const auto n = static_cast<std::size_t>(rows.rows());
    if (n < p + 1) throw insufficient_rows(n, p + 1);

    const Eigen::MatrixXd x = design_matrix(rows, model);
    if (!full_rank(x)) throw Error("rank_deficient", "design matrix is rank-deficient");
    const Eigen::VectorXd y = rows.col(rows.cols() - 1);

    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    const double rss = (y - x * beta).squaredNorm();

    Eigen::VectorXd out(static_cast<Eigen::Index>(p + 1));
    out.head(static_cast<Eigen::Index>(p)) = beta;
    out(static_cast<Eigen::Index>(p)) = std::sqrt(rss / static_cast<double>(n - p));
    return out;
}

std::size_t EstimateMatrix::success_count() const noexcept {
    return static_cast<std::size_t>(std::count(succeeded.begin(), succeeded.end(), true));
}

EstimateMatrix bootstrap_estimates(const Eigen::MatrixXd& rows, const ModelSpec& model, const BootstrapConfig& cfg) {
    cfg.validate(model);
    const std::size_t p = model.linear_parameter_count();
    const auto available = static_cast<std::size_t>(rows.rows());
    if (available < p + 1) throw insufficient_rows(available, p + 1);

    const auto cols = static_cast<Eigen::Index>(model.parameters.size());
    std::vector<Eigen::VectorXd> fits;
    EstimateMatrix out;
    out.succeeded.assign(cfg.resample_count, false);
    out.attempts.assign(cfg.resample_count, 0);

    Eigen::MatrixXd sample(static_cast<Eigen::Index>(cfg.resample_size), rows.cols());
    for (std::size_t b = 0; b < cfg.resample_count; ++b) {
        Rng rng = Rng::substream(cfg.seed, {stream::bootstrap, b});
        for (std::size_t attempt = 0; attempt <= cfg.max_retries_per_resample; ++attempt) {
            ++out.attempts[b];
            for (Eigen::Index r = 0; r < sample.rows(); ++r)
                sample.row(r) = rows.row(static_cast<Eigen::Index>(rng.below(available)));
            if (!full_rank(design_matrix(sample, model))) continue;
            fits.push_back(ols_fit(sample, model));
            out.succeeded[b] = true;
            break;
        }
    }

    const std::size_t required = (cfg.resample_count + 1) / 2;
    if (fits.size() < required)
        throw Error("degenerate_resamples", std::to_string(cfg.resample_count - fits.size()) + " of " +
                                                std::to_string(cfg.resample_count) +
                                                " resamples stayed rank-deficient after retries; need " +
                                                std::to_string(required) + " successes");

    out.estimates.resize(static_cast<Eigen::Index>(fits.size()), cols);
    for (std::size_t i = 0; i < fits.size(); ++i) out.estimates.row(static_cast<Eigen::Index>(i)) = fits[i].transpose();
    return out;
}

std::string_view to_string(PriorFamily family) noexcept { return family == PriorFamily::normal ? "normal" : "lognormal"; }

PriorFamily family_from_string(std::string_view text) {
    if (text == "normal") return PriorFamily::normal;
    if (text == "lognormal") return PriorFamily::lognormal;
    throw Error("schema_error", "unknown prior family '" + std::string(text) + "'");
}

double PriorDistribution::median() const noexcept {
    return family == PriorFamily::normal ? location : std::exp(location);
}

double PriorDistribution::mean() const noexcept {
    return family == PriorFamily::normal ? location : std::exp(location + 0.5 * scale * scale);
}

PriorDistribution fit_prior(std::span<const double> estimates, ParameterKind kind, std::string parameter) {
    if (estimates.size() < 2)
        throw Error("insufficient_estimates", "need at least 2 estimates to fit a prior, got " +
                                                  std::to_string(estimates.size()));

    PriorDistribution prior;
    prior.parameter = std::move(parameter);
    prior.estimates.assign(estimates.begin(), estimates.end());

    std::vector<double> xs(estimates.begin(), estimates.end());
    if (kind == ParameterKind::noise_scale) {
        prior.family = PriorFamily::lognormal;
        for (double& x : xs) {
            if (!(x >= 0.0)) throw Error("invalid_argument", "noise-scale estimates must be non-negative");
            x = std::log(x == 0.0 ? kLogEpsilon : x);
        }
    }

    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    prior.location = mean;
    prior.scale = std::max(std::sqrt(ss / n), kScaleFloor);
    return prior;
}

std::vector<PriorDistribution> derive_priors(const Eigen::MatrixXd& rows, const ModelSpec& model,
                                             const BootstrapConfig& cfg) {
    EstimateMatrix est;
    try {
        est = bootstrap_estimates(rows, model, cfg);
    } catch (const Error& e) {
        throw e.tagged("bootstrap");
    }

    std::vector<PriorDistribution> priors;
    try {
        for (std::size_t j = 0; j < model.parameters.size(); ++j) {
            const Eigen::VectorXd column = est.estimates.col(static_cast<Eigen::Index>(j));
            priors.push_back(fit_prior(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())),
                                       model.parameters[j].kind, model.parameters[j].name));
        }
    } catch (const Error& e) {
        throw e.tagged("fit");
    }
    return priors;
}

std::vector<PriorDistribution> derive_priors(const Dataset& dataset, const ModelSpec& model, const BootstrapConfig& cfg) {
    Eigen::MatrixXd rows;
    try {
        rows = dataset.complete_rows(model);
    } catch (const Error& e) {
        throw e.tagged("filter");
    }
    const std::size_t need = model.linear_parameter_count() + 1;
    if (static_cast<std::size_t>(rows.rows()) < need)
        throw Error("insufficient_complete_rows",
                    "insufficient complete rows: " + std::to_string(rows.rows()) + " complete, need at least " +
                        std::to_string(need),
                    "filter");
    return derive_priors(rows, model, cfg);
}

Eigen::MatrixXd sample_parameters(std::span<const PriorDistribution> priors, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw Error("invalid_argument", "parameter draw count must be at least 1");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(priors.size()));
    for (std::size_t j = 0; j < k; ++j) {
        Rng rng = Rng::substream(seed, {stream::parameters, j});
        for (std::size_t i = 0; i < priors.size(); ++i) {
            const auto& prior = priors[i];
            const double z = prior.location + prior.scale * rng.normal();
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                prior.family == PriorFamily::normal ? z : std::max(std::exp(z), std::numeric_limits<double>::denorm_min());
        }
    }
    return out;
}

}  // namespace priorweaver
