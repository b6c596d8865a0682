#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "priorweaver/dataset.hpp"
#include "priorweaver/model_spec.hpp"
#include "priorweaver/prior_engine.hpp"

namespace priorweaver {

/// Evenly spaced evaluation points lo, ..., hi.
struct DensityGrid {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t point_count = 256;

    double step() const noexcept { return (hi - lo) / static_cast<double>(point_count - 1); }
    double x(std::size_t i) const noexcept { return i + 1 == point_count ? hi : lo + static_cast<double>(i) * step(); }
    void validate() const;
    bool operator==(const DensityGrid&) const = default;
};

inline constexpr std::size_t kDefaultGridPoints = 256;
inline constexpr double kGridPadding = 0.25;

/// Response range padded by 25% of its width on each side.
DensityGrid default_grid(const VariableSpec& response, std::size_t point_count = kDefaultGridPoints);

struct PredictiveConfig {
    std::size_t predictor_sample_count = 100;
    std::size_t parameter_draw_count = 10;
    std::uint64_t seed = 0;
    std::optional<DensityGrid> grid;  ///< default_grid(response) when unset
    bool include_noise = true;

    void validate() const;
};

struct PredictiveCheckResult {
    PredictiveConfig config;  ///< with the grid resolved
    DensityGrid grid;
    Eigen::MatrixXd parameter_draws;                 ///< k x parameters
    std::vector<std::vector<double>> responses;      ///< k x predictor_sample_count
    std::vector<std::vector<double>> densities;      ///< k x grid points
    std::vector<double> average_density;             ///< pointwise mean of densities
    std::vector<HistogramBin> response_bins;
    std::vector<double> response_histogram;          ///< unit area over the bins
};

/// count x predictors; column i draws with replacement from predictor i's
/// marginal using substream derive_seed(seed, {predictors, i}).
Eigen::MatrixXd sample_predictors(const Dataset& dataset, const ModelSpec& model, std::size_t count, std::uint64_t seed);

/// response_r = [b0 +] sum b_i x_ri + eps_r with eps_r ~ Normal(0, sigma).
std::vector<double> simulate_response(const Eigen::MatrixXd& predictors, std::span<const double> parameters,
                                      const ModelSpec& model, std::uint64_t seed, bool include_noise = true);

/// Silverman's rule: 0.9 * min(sd, iqr / 1.34) * n^(-1/5).
double silverman_bandwidth(double sd, double iqr, std::size_t n) noexcept;
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE on `grid`, renormalized to unit trapezoidal area. The
/// bandwidth is floored at 1e-3 of the grid width.
std::vector<double> kde(std::span<const double> samples, const DensityGrid& grid);

double trapezoid(std::span<const double> values, double step) noexcept;

PredictiveCheckResult run_check(const Dataset& dataset, const ModelSpec& model, std::span<const PriorDistribution> priors,
                                const PredictiveConfig& cfg);

}  // namespace priorweaver
