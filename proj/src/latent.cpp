#include "edhie/latent.hpp"

#include <stdexcept>

namespace edhie {

std::vector<ExprTree> sample_prior(const HvaeModel& model, std::size_t n, std::size_t max_height, Rng& rng,
                                   DecodeMode mode) {
  std::vector<ExprTree> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector z = standard_normal(model.latent_dim(), rng);
    out.push_back(decode_tree(model, z, max_height, mode, &rng));
  }
  return out;
}

std::vector<ExprTree> neighborhood_sample(const HvaeModel& model, const ExprTree& tree, std::size_t n,
                                          std::size_t max_height, Rng& rng, DecodeMode mode,
                                          std::optional<double> fixed_logvar) {
  LatentPoint p = encode_tree(model, tree);
  if (fixed_logvar) p.logvar.setConstant(*fixed_logvar);
  std::vector<ExprTree> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(decode_tree(model, reparameterize(p.mu, p.logvar, rng), max_height, mode, &rng));
  return out;
}

std::vector<InterpolationStep> interpolate(const HvaeModel& model, const ExprTree& a, const ExprTree& b,
                                           std::size_t steps, std::size_t max_height) {
  if (steps < 1) throw std::invalid_argument("interpolation needs at least one step");
  const Vector za = encode_tree(model, a).mu;
  const Vector zb = encode_tree(model, b).mu;
  std::vector<InterpolationStep> out;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(steps);
    const Vector z = (1.0 - alpha) * za + alpha * zb;
    out.push_back({alpha, decode_tree(model, z, max_height)});
  }
  return out;
}

double ladder_roughness(const std::vector<InterpolationStep>& ladder) {
  if (ladder.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < ladder.size(); ++i)
    total += static_cast<double>(edit_distance(ladder[i - 1].tree, ladder[i].tree));
  return total / static_cast<double>(ladder.size() - 1);
}

}  // namespace edhie
