#pragma once

#include <functional>
#include <span>

namespace sgdyn {

/// Vector-valued function of a point: writes num_outputs values into `out`.
/// Implementations passed to parallel builders must be safe to call concurrently.
using VectorFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

}  // namespace sgdyn
