#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "priorweaver/serialization.hpp"

namespace priorweaver {

/// Complete dataset drawn from y = sum c_i x_i + Normal(0, sigma) with
/// x_i ~ Uniform[0, 100], model `y ~ 0 + x1 + ... + xk`. The response range
/// covers every attainable value within 6 sigma; noise beyond that is redrawn.
Snapshot simulate_truth(std::span<const double> coefficients, double sigma, std::size_t rows, std::uint64_t seed);

}  // namespace priorweaver
