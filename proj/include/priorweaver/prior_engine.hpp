#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "priorweaver/dataset.hpp"
#include "priorweaver/model_spec.hpp"

namespace priorweaver {

/// Lower bound on every fitted prior scale (log-scale for LogNormal).
inline constexpr double kScaleFloor = 1e-6;
/// Substituted for noise-scale estimates that are exactly zero before taking logs.
inline constexpr double kLogEpsilon = 1e-12;
/// Design matrices with sigma_min / sigma_max at or below this are rank-deficient.
inline constexpr double kRankTolerance = 1e-10;

struct BootstrapConfig {
    std::size_t resample_count = 100;
    std::size_t resample_size = 50;
    std::uint64_t seed = 0;
    std::size_t max_retries_per_resample = 20;

    void validate(const ModelSpec& model) const;
    bool operator==(const BootstrapConfig&) const = default;
};

/// Design matrix for `rows` laid out as model.variables(): optional leading
/// column of ones, then the predictor columns.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& rows, const ModelSpec& model);

bool full_rank(const Eigen::MatrixXd& design);

/// Least-squares fit through column-pivoted Householder QR. Returns estimates
/// in model.parameters order; the last entry is sigma-hat = sqrt(RSS / (n - p)).
Eigen::VectorXd ols_fit(const Eigen::MatrixXd& rows, const ModelSpec& model);

struct EstimateMatrix {
    Eigen::MatrixXd estimates;            ///< successful resamples x parameters, resample order
    std::vector<bool> succeeded;          ///< per resample index
    std::vector<std::size_t> attempts;    ///< draws used per resample index

    std::size_t success_count() const noexcept;
};

/// Resample `rows` with replacement and fit each resample. Resample b draws
/// from its own substream derive_seed(cfg.seed, {bootstrap, b}); a
/// rank-deficient draw is redrawn from the same substream up to
/// cfg.max_retries_per_resample times, then flagged failed.
EstimateMatrix bootstrap_estimates(const Eigen::MatrixXd& rows, const ModelSpec& model, const BootstrapConfig& cfg);

enum class PriorFamily { normal, lognormal };

std::string_view to_string(PriorFamily family) noexcept;
PriorFamily family_from_string(std::string_view text);

struct PriorDistribution {
    std::string parameter;
    PriorFamily family = PriorFamily::normal;
    double location = 0.0;  ///< Normal: mean. LogNormal: mean of log.
    double scale = 1.0;     ///< Normal: standard deviation. LogNormal: sd of log.
    std::vector<double> estimates;

    double median() const noexcept;
    double mean() const noexcept;
    bool operator==(const PriorDistribution&) const = default;
};

/// Closed-form MLE: Normal(mean, population sd) for intercepts and
/// coefficients, LogNormal for the noise scale. Scales are floored at kScaleFloor.
PriorDistribution fit_prior(std::span<const double> estimates, ParameterKind kind, std::string parameter = {});

/// complete_rows -> bootstrap_estimates -> fit_prior per parameter. Errors
/// carry the failing step ("filter", "bootstrap", "fit").
std::vector<PriorDistribution> derive_priors(const Dataset& dataset, const ModelSpec& model, const BootstrapConfig& cfg);

/// Same pipeline starting from an already-filtered row matrix.
std::vector<PriorDistribution> derive_priors(const Eigen::MatrixXd& rows, const ModelSpec& model, const BootstrapConfig& cfg);

/// k x parameters matrix; draw j uses substream derive_seed(seed, {parameters, j}).
Eigen::MatrixXd sample_parameters(std::span<const PriorDistribution> priors, std::size_t k, std::uint64_t seed);

}  // namespace priorweaver
