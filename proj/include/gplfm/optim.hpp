#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gplfm/linalg.hpp"

namespace gplfm {

struct NelderMeadOptions {
  int max_iterations = 400;
  double f_tolerance = 1e-10;   ///< stop when simplex value spread falls below this
  double x_tolerance = 1e-8;    ///< ...and its diameter falls below this
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> best_trace;  ///< best value after each iteration (non-increasing)
};

/// Minimizes f inside the box [lower, upper] (points are clamped onto the box).
/// Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const Vector& lower, const Vector& upper,
                             const NelderMeadOptions& opts = {});

/// Deterministic Latin-hypercube sample of `count` points in [lower, upper].
std::vector<Vector> latin_hypercube(int count, const Vector& lower, const Vector& upper,
                                    std::uint64_t seed);

}  // namespace gplfm
