#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edhie/expr.hpp"
#include "edhie/nnmath.hpp"
#include "edhie/random.hpp"

namespace edhie {

using nn::Matrix;
using nn::Parameter;
using nn::Vector;

/// Gate weights of a GRU-style cell. `w_i*` act on the one-hot symbol,
/// `w_h*` on the recurrent code(s).
struct GruWeights {
  Parameter w_ir, w_iu, w_in;
  Parameter w_hr, w_hu, w_hn;
  Parameter b_ir, b_iu, b_in;
  Parameter b_hr, b_hu, b_hn;

  GruWeights() = default;
  GruWeights(const std::string& prefix, Eigen::Index out, Eigen::Index in_symbol, Eigen::Index in_code);
};

/// All learned parameters of the tree autoencoder.
///
/// Encoder cell (children -> parent): gates of size `hidden`, recurrent
/// input `[h_left; h_right]` of size 2*hidden.
/// Decoder cell (parent -> children): gates of size 2*hidden, recurrent input
/// the parent code of size `hidden`.
class HvaeModel {
 public:
  HvaeModel(Vocabulary vocab, int hidden_dim, int latent_dim);

  /// Uniform in +-1/sqrt(fan_in) per block; biases use the fan-in of the
  /// weight they are paired with.
  void initialize(Rng& rng);

  const Vocabulary& vocab() const { return vocab_; }
  int hidden_dim() const { return hidden_; }
  int latent_dim() const { return latent_; }
  Eigen::Index vocab_size() const { return static_cast<Eigen::Index>(vocab_.size()); }

  /// Fixed order; serialization and the optimizer rely on it.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  GruWeights encoder;
  Parameter mu_w, mu_b;
  Parameter logvar_w, logvar_b;
  Parameter z2h_w, z2h_b;
  Parameter symbol_w, symbol_b;
  GruWeights decoder;

 private:
  Vocabulary vocab_;
  int hidden_;
  int latent_;
};

struct LatentPoint {
  Vector mu;
  Vector logvar;
  Vector z;
};

struct ChildCodes {
  Vector left;
  Vector right;
};

enum class DecodeMode { greedy, stochastic };

struct DecodeStep {
  std::size_t symbol = 0;
  ChildCodes children;  // empty for leaves
};

// ---- cells (inference path, no tape)

/// Encoder cell for a general symbol input vector.
Vector encode_node(const HvaeModel& model, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& h_left, const Eigen::Ref<const Vector>& h_right);
/// Encoder cell for a one-hot input at `symbol`.
Vector encode_node(const HvaeModel& model, std::size_t symbol, const Eigen::Ref<const Vector>& h_left,
                   const Eigen::Ref<const Vector>& h_right);

/// Decoder cell: the two child codes for a parent code and symbol input.
ChildCodes decoder_cell(const HvaeModel& model, const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& h);
ChildCodes decoder_cell(const HvaeModel& model, std::size_t symbol, const Eigen::Ref<const Vector>& h);

/// Symbol probabilities for a code.
Vector symbol_distribution(const HvaeModel& model, const Eigen::Ref<const Vector>& h);

/// Chooses a symbol (greedy argmax with lowest-index ties, or categorical
/// sample) and, for non-leaf symbols, runs the decoder cell. With
/// `leaf_only`, the choice is restricted to arity-0 symbols.
DecodeStep decode_node(const HvaeModel& model, const Eigen::Ref<const Vector>& h, DecodeMode mode,
                       Rng* rng = nullptr, bool leaf_only = false);

// ---- trees

/// Root code of `tree` (post-order application of the encoder cell).
Vector encode_root(const HvaeModel& model, const ExprTree& tree);

struct NodeCode {
  std::string symbol;
  Vector code;
};
/// Codes of every node in the order the encoder computes them.
std::vector<NodeCode> encode_trace(const HvaeModel& model, const ExprTree& tree);

/// Mean/log-variance heads applied to the root code; z = mu.
LatentPoint encode_tree(const HvaeModel& model, const ExprTree& tree);
/// As above with z drawn by the reparameterization.
LatentPoint encode_tree(const HvaeModel& model, const ExprTree& tree, Rng& rng);

Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& eps);
Vector reparameterize(const Vector& mu, const Vector& logvar, Rng& rng);
Vector standard_normal(Eigen::Index n, Rng& rng);

/// Depth-masked recursive decoding; the result is always structurally valid.
ExprTree decode_tree(const HvaeModel& model, const Eigen::Ref<const Vector>& z, std::size_t max_height,
                     DecodeMode mode = DecodeMode::greedy, Rng* rng = nullptr);

double kl_divergence(const Vector& mu, const Vector& logvar);

struct LossTerms {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// Teacher-forced VAE objective with a fixed noise vector, computed without
/// the tape.
LossTerms loss_value(const HvaeModel& model, const ExprTree& tree, double lambda, const Vector& eps);

struct TapedLoss {
  nn::Var total;
  LossTerms terms;
};

/// Records the same objective on `tape` for backpropagation.
TapedLoss taped_loss(HvaeModel& model, const ExprTree& tree, double lambda, const Vector& eps,
                     nn::Tape& tape);

/// Draws eps and records the objective.
TapedLoss loss(HvaeModel& model, const ExprTree& tree, double lambda, Rng& rng, nn::Tape& tape);

// ---- persistence

/// Binary container: magic, format version, vocabulary, dimensions, then the
/// parameter blocks in row-major little-endian doubles.
void save_model(const HvaeModel& model, const std::string& path);
HvaeModel load_model(const std::string& path);
std::string serialize_model(const HvaeModel& model);
HvaeModel deserialize_model(std::string_view bytes);

/// Lossless JSON rendering of the same content.
std::string model_to_json(const HvaeModel& model);
HvaeModel model_from_json(std::string_view text);

}  // namespace edhie
