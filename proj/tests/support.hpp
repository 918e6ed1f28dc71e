#pragma once

// Independent reference implementations used as test oracles.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "edhie/expr.hpp"
#include "edhie/hvae.hpp"

namespace oracle {

using edhie::ExprTree;
using edhie::Rng;
using edhie::Symbol;
using edhie::Vocabulary;

/// Uniformly random tree over `vocab` with height at most `max_height`.
inline ExprTree random_tree(const Vocabulary& vocab, std::size_t max_height, Rng& rng) {
  std::vector<Symbol> leaves, inner;
  for (const auto& s : vocab.symbols()) (s.is_leaf() ? leaves : inner).push_back(s);
  std::function<ExprTree(std::size_t)> grow = [&](std::size_t depth) -> ExprTree {
    const bool leaf = depth >= max_height || inner.empty() || std::bernoulli_distribution(0.35)(rng);
    if (leaf) return ExprTree::leaf(leaves[std::uniform_int_distribution<std::size_t>(0, leaves.size() - 1)(rng)]);
    const Symbol& s = inner[std::uniform_int_distribution<std::size_t>(0, inner.size() - 1)(rng)];
    if (s.arity() == 1) return ExprTree::unary(s, grow(depth + 1));
    ExprTree l = grow(depth + 1);
    return ExprTree::binary(s, l, grow(depth + 1));
  };
  return grow(1);
}

/// Levenshtein distance by memoized recursion over suffix pairs.
inline std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return memo[key] = best;
  };
  return go(0, 0);
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Encoder cell written out element by element.
inline std::vector<double> gru21(const edhie::HvaeModel& m, const std::vector<double>& x,
                                 const std::vector<double>& hl, const std::vector<double>& hr) {
  const auto& g = m.encoder;
  const std::size_t H = hl.size(), V = x.size();
  std::vector<double> cat(hl);
  cat.insert(cat.end(), hr.begin(), hr.end());
  std::vector<double> out(H);
  for (std::size_t i = 0; i < H; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double xr = g.b_ir.value(ii, 0), xu = g.b_iu.value(ii, 0), xn = g.b_in.value(ii, 0);
    for (std::size_t k = 0; k < V; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      xr += g.w_ir.value(ii, kk) * x[k];
      xu += g.w_iu.value(ii, kk) * x[k];
      xn += g.w_in.value(ii, kk) * x[k];
    }
    double hr_ = g.b_hr.value(ii, 0), hu = g.b_hu.value(ii, 0), hn = g.b_hn.value(ii, 0);
    for (std::size_t k = 0; k < cat.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      hr_ += g.w_hr.value(ii, kk) * cat[k];
      hu += g.w_hu.value(ii, kk) * cat[k];
      hn += g.w_hn.value(ii, kk) * cat[k];
    }
    const double r = sigmoid(xr + hr_);
    const double u = sigmoid(xu + hu);
    const double n = std::tanh(xn + r * hn);
    out[i] = (1.0 - u) * n + u / 2.0 * hl[i] + u / 2.0 * hr[i];
  }
  return out;
}

/// Decoder cell written out element by element; returns [h_left, h_right].
inline std::vector<double> gru12(const edhie::HvaeModel& m, const std::vector<double>& x, const std::vector<double>& h) {
  const auto& g = m.decoder;
  const std::size_t H = h.size(), V = x.size();
  std::vector<double> d(2 * H);
  for (std::size_t i = 0; i < 2 * H; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double xr = g.b_ir.value(ii, 0), xu = g.b_iu.value(ii, 0), xn = g.b_in.value(ii, 0);
    for (std::size_t k = 0; k < V; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      xr += g.w_ir.value(ii, kk) * x[k];
      xu += g.w_iu.value(ii, kk) * x[k];
      xn += g.w_in.value(ii, kk) * x[k];
    }
    double hr_ = g.b_hr.value(ii, 0), hu = g.b_hu.value(ii, 0), hn = g.b_hn.value(ii, 0);
    for (std::size_t k = 0; k < H; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      hr_ += g.w_hr.value(ii, kk) * h[k];
      hu += g.w_hu.value(ii, kk) * h[k];
      hn += g.w_hn.value(ii, kk) * h[k];
    }
    const double r = sigmoid(xr + hr_);
    const double u = sigmoid(xu + hu);
    const double n = std::tanh(xn + r * hn);
    d[i] = (1.0 - u) * n + u * h[i % H];
  }
  return d;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Largest relative deviation between analytic and central-difference
/// gradients of `f` over every parameter entry. `analytic` must already hold
/// the gradients. Entries where both are below `floor` are compared against
/// `floor` instead of their own magnitude.
inline double max_gradient_error(std::vector<edhie::Parameter*> params, const std::vector<edhie::Matrix>& analytic,
                                 const std::function<double()>& f, double h = 1e-5, double floor = 1e-4) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& value = params[p]->value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value(i);
      value(i) = saved + h;
      const double up = f();
      value(i) = saved - h;
      const double down = f();
      value(i) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p](i);
      const double scale = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace oracle
