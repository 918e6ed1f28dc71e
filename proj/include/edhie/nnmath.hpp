#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "edhie/random.hpp"

namespace edhie::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A learned dense block with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }

  std::string name;
  Matrix value;
  Matrix grad;
};

/// Uniform in [-bound, bound].
void init_uniform(Parameter& p, double bound, Rng& rng);

class Tape;

/// Handle to a tape node. Cheap to copy; only valid while its tape is alive
/// and not cleared.
class Var {
 public:
  Var() = default;
  const Vector& value() const;
  const Vector& grad() const;
  Eigen::Index size() const { return value().size(); }
  double scalar() const { return value()(0); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so the
/// reverse sweep in backward() is a topological order and visits each node
/// exactly once. Parameter gradients accumulate directly into Parameter::grad.
class Tape {
 public:
  Var constant(Vector v);
  Var parameter_vector(Parameter& bias);                // bias column as a value
  Var column(Parameter& w, Eigen::Index col);           // w * e_col
  Var affine_column(Parameter& w, Parameter& b, Eigen::Index col);  // w * e_col + b
  Var matvec(Parameter& w, Var x);                      // w * x
  Var affine(Parameter& w, Parameter& b, Var x);        // w * x + b

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var softmax(Var a);
  Var concat(Var a, Var b);
  Var slice(Var a, Eigen::Index start, Eigen::Index len);
  std::pair<Var, Var> split_half(Var a);
  Var sum(Var a);
  /// -log p[target] for a probability vector p.
  Var cross_entropy(Var probs, Eigen::Index target);
  /// Same quantity computed from logits through a log-sum-exp.
  Var cross_entropy_logits(Var logits, Eigen::Index target);
  /// -1/2 * sum(1 + logvar - mu^2 - exp(logvar)).
  Var kl_divergence(Var mu, Var logvar);

  /// Seeds d(root)=seed and accumulates gradients into every reachable node
  /// and parameter. Calling twice accumulates twice into parameters.
  void backward(Var root, double seed = 1.0);
  void clear();

  std::size_t size() const { return nodes_.size(); }
  const Vector& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Vector& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

 private:
  enum class Op : unsigned char {
    constant, bias, column, affine_column, matvec, affine, add, sub, mul, scale, one_minus,
    sigmoid, tanh, exp, softmax, concat, slice, sum, xent, xent_logits, kl
  };
  struct Node {
    Op op = Op::constant;
    int a = -1;
    int b = -1;
    Parameter* w = nullptr;
    Parameter* bias = nullptr;
    Eigen::Index k = 0;
    Eigen::Index len = 0;
    double s = 0.0;
    Vector value;
    Vector grad;
  };

  Var push(Node node);
  const Vector& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id_)].value; }
  void check(Var v) const;

  std::vector<Node> nodes_;
};

inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator*(double s, Var a) { return a.tape()->scale(a, s); }
inline Var sigmoid(Var a) { return a.tape()->sigmoid(a); }
inline Var tanh(Var a) { return a.tape()->tanh(a); }
inline Var exp(Var a) { return a.tape()->exp(a); }
inline Var softmax(Var a) { return a.tape()->softmax(a); }
inline Var concat(Var a, Var b) { return a.tape()->concat(a, b); }
inline Var one_minus(Var a) { return a.tape()->one_minus(a); }

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

/// Bias-corrected adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config = {});

  /// Applies one update and zeroes gradients. A non-finite gradient skips the
  /// update (step counter unchanged), zeroes gradients and returns false.
  bool step();
  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamConfig config_;
  std::size_t steps_ = 0;
};

}  // namespace edhie::nn
