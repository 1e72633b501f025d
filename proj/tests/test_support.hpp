#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "reldec/autodiff.hpp"
#include "reldec/model.hpp"
#include "reldec/tensor.hpp"

namespace reldec::testing {

inline ModelParams tiny_model(std::size_t src_vocab, std::size_t tgt_vocab, std::uint64_t seed, double scale = 0.5,
                              Direction direction = Direction::kLeftToRight, Side side = Side::kSourceToTarget,
                              std::size_t hidden = 16) {
  ModelConfig c;
  c.src_vocab = src_vocab;
  c.tgt_vocab = tgt_vocab;
  c.embed = 8;
  c.hidden = hidden;
  c.attention = 8;
  c.direction = direction;
  c.side = side;
  return ModelParams::random(c, seed, scale);
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Rows drawn from a flat Dirichlet-like distribution, strictly interior.
inline Tensor random_simplex(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (double& v : t.row(i)) s += v = u(rng);
    for (double& v : t.row(i)) v /= s;
  }
  return t;
}

inline TokenIds random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& rng, int lo = kNumReserved) {
  std::uniform_int_distribution<int> d(lo, static_cast<int>(vocab) - 1);
  TokenIds out(n);
  for (int& t : out) t = d(rng);
  return out;
}

// |a - b| / max(|a|, |b|, floor); the floor keeps entries whose true
// derivative is ~0 from turning rounding noise into huge ratios.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences of f around x.
inline Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps = 1e-4) {
  Tensor g = Tensor::zeros_like(x);
  for (std::size_t k = 0; k < x.size(); ++k) {
    Tensor a = x, b = x;
    a.data()[k] += eps;
    b.data()[k] -= eps;
    g.data()[k] = (f(a) - f(b)) / (2 * eps);
  }
  return g;
}

inline double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, relative_error(a[k], b[k], floor));
  return worst;
}

}  // namespace reldec::testing
