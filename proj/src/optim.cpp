#include "gplfm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gplfm/error.hpp"

namespace gplfm {

namespace {

double safe_eval(const std::function<double(const Vector&)>& f, const Vector& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

// Uniform double in [0, 1) from the raw 64-bit stream (portable across standard libraries).
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const Vector& lower, const Vector& upper,
                             const NelderMeadOptions& opts) {
  const Index n = x0.size();
  if (n == 0 || lower.size() != n || upper.size() != n) throw InvalidInput("nelder_mead: dimension mismatch");
  if ((lower.array() > upper.array()).any()) throw InvalidInput("nelder_mead: lower bound above upper bound");

  auto clamp = [&](Vector x) {
    for (Index i = 0; i < n; ++i) x(i) = std::clamp(x(i), lower(i), upper(i));
    return x;
  };

  NelderMeadResult res;
  std::vector<Vector> simplex;
  std::vector<double> values;
  simplex.push_back(clamp(x0));
  for (Index i = 0; i < n; ++i) {
    Vector v = simplex.front();
    const double width = upper(i) - lower(i);
    double step = opts.initial_step * (width > 0.0 ? std::min(1.0, width) : 1.0);
    if (width > 0.0 && v(i) + step > upper(i)) step = -step;
    v(i) += step;
    simplex.push_back(clamp(v));
  }
  for (const auto& v : simplex) values.push_back(safe_eval(f, v));
  res.evaluations = static_cast<int>(values.size());

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Vector> s2;
    std::vector<double> v2;
    for (std::size_t i : order) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex.swap(s2);
    values.swap(v2);
  };

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  sort_simplex();
  for (int it = 0; it < opts.max_iterations; ++it) {
    double diameter = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i)
      diameter = std::max(diameter, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
    if (std::abs(values.back() - values.front()) <= opts.f_tolerance && diameter <= opts.x_tolerance) {
      res.converged = true;
      break;
    }
    ++res.iterations;

    Vector centroid = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) centroid += simplex[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n);
    const Vector& worst = simplex.back();

    const Vector xr = clamp(centroid + kReflect * (centroid - worst));
    const double fr = safe_eval(f, xr);
    ++res.evaluations;
    if (fr < values.front()) {
      const Vector xe = clamp(centroid + kExpand * (centroid - worst));
      const double fe = safe_eval(f, xe);
      ++res.evaluations;
      if (fe < fr) {
        simplex.back() = xe;
        values.back() = fe;
      } else {
        simplex.back() = xr;
        values.back() = fr;
      }
    } else if (fr < values[values.size() - 2]) {
      simplex.back() = xr;
      values.back() = fr;
    } else {
      const bool outside = fr < values.back();
      const Vector xc = outside ? clamp(centroid + kContract * (xr - centroid))
                                : clamp(centroid + kContract * (worst - centroid));
      const double fc = safe_eval(f, xc);
      ++res.evaluations;
      if (fc < (outside ? fr : values.back())) {
        simplex.back() = xc;
        values.back() = fc;
      } else {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = clamp(simplex[0] + kShrink * (simplex[i] - simplex[0]));
          values[i] = safe_eval(f, simplex[i]);
          ++res.evaluations;
        }
      }
    }
    sort_simplex();
    res.best_trace.push_back(values.front());
  }
  res.x = simplex.front();
  res.value = values.front();
  return res;
}

std::vector<Vector> latin_hypercube(int count, const Vector& lower, const Vector& upper, std::uint64_t seed) {
  if (count < 1) throw InvalidInput("latin_hypercube: count must be >= 1");
  const Index n = lower.size();
  std::mt19937_64 rng(seed);
  std::vector<Vector> pts(static_cast<std::size_t>(count), Vector(n));
  std::vector<int> perm(static_cast<std::size_t>(count));
  for (Index d = 0; d < n; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with the portable uniform
    for (int i = count - 1; i > 0; --i) {
      const int j = static_cast<int>(unit_uniform(rng) * (i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(std::min(j, i))]);
    }
    for (int i = 0; i < count; ++i) {
      const double u = (perm[static_cast<std::size_t>(i)] + unit_uniform(rng)) / count;
      pts[static_cast<std::size_t>(i)](d) = lower(d) + u * (upper(d) - lower(d));
    }
  }
  return pts;
}

}  // namespace gplfm
