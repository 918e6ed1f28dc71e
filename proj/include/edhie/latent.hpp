#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "edhie/hvae.hpp"

namespace edhie {

/// Decodes `n` draws from N(0, I).
std::vector<ExprTree> sample_prior(const HvaeModel& model, std::size_t n, std::size_t max_height, Rng& rng,
                                   DecodeMode mode = DecodeMode::greedy);

/// Decodes `n` draws from N(mu, diag(exp(logvar))) around the encoding of `tree`.
/// `fixed_logvar` replaces every log-variance component when set.
std::vector<ExprTree> neighborhood_sample(const HvaeModel& model, const ExprTree& tree, std::size_t n,
                                          std::size_t max_height, Rng& rng,
                                          DecodeMode mode = DecodeMode::greedy,
                                          std::optional<double> fixed_logvar = std::nullopt);

struct InterpolationStep {
  double alpha = 0.0;
  ExprTree tree;
};

/// Greedy decodes of (1 - alpha) * mu_a + alpha * mu_b for alpha = i / steps.
std::vector<InterpolationStep> interpolate(const HvaeModel& model, const ExprTree& a, const ExprTree& b,
                                           std::size_t steps, std::size_t max_height);

/// Mean edit distance between consecutive decodes of a ladder.
double ladder_roughness(const std::vector<InterpolationStep>& ladder);

}  // namespace edhie
