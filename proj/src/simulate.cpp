#include "priorweaver/simulate.hpp"

#include <cmath>
#include <string>

#include "priorweaver/rng.hpp"

namespace priorweaver {

Snapshot simulate_truth(std::span<const double> coefficients, double sigma, std::size_t rows, std::uint64_t seed) {
    if (coefficients.empty()) throw Error("invalid_argument", "at least one coefficient is required");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("invalid_argument", "sigma must be finite and non-negative");

    std::vector<std::string> predictors;
    for (std::size_t i = 0; i < coefficients.size(); ++i) predictors.push_back("x" + std::to_string(i + 1));
    ModelSpec model = make_model("y", predictors, false);

    double lo = 0.0, hi = 0.0;
    for (double c : coefficients) {
        lo += std::min(0.0, c * kDefaultRange.hi);
        hi += std::max(0.0, c * kDefaultRange.hi);
    }
    const double margin = 6.0 * sigma;
    std::vector<VariableSpec> variables = default_variables(model);
    variables.back().range = {std::floor(lo - margin) - 1.0, std::ceil(hi + margin) + 1.0};

    std::vector<Entity> entities;
    Rng rng = Rng::substream(seed, {stream::simulate});
    for (std::size_t r = 0; r < rows; ++r) {
        Entity e{EntityId{r + 1}, std::vector<std::optional<double>>(variables.size())};
        double y = 0.0;
        for (std::size_t i = 0; i < coefficients.size(); ++i) {
            const double x = rng.uniform(kDefaultRange.lo, kDefaultRange.hi);
            e.values[i] = x;
            y += coefficients[i] * x;
        }
        double noise = 0.0;
        if (sigma > 0.0) {
            do noise = sigma * rng.normal();
            while (std::abs(noise) > margin);
        }
        e.values.back() = y + noise;
        entities.push_back(std::move(e));
    }
    return {model, Dataset::restore(variables, std::move(entities), seed, 0)};
}

}  // namespace priorweaver
