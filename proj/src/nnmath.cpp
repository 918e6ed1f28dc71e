#include "edhie/nnmath.hpp"

#include <cmath>
#include <stdexcept>

namespace edhie::nn {

void init_uniform(Parameter& p, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  // Column-major fill order; fixed so that a seed pins the weights.
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = dist(rng);
  p.zero_grad();
}

const Vector& Var::value() const { return tape_->value(id_); }
const Vector& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size())
    throw std::invalid_argument("variable does not belong to this tape");
}

namespace {

void require_same_size(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
}

}  // namespace

Var Tape::constant(Vector v) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::parameter_vector(Parameter& bias) {
  if (bias.value.cols() != 1) throw std::invalid_argument("bias parameter must be a column");
  Node n;
  n.op = Op::bias;
  n.bias = &bias;
  n.value = bias.value.col(0);
  return push(std::move(n));
}

Var Tape::column(Parameter& w, Eigen::Index col) {
  if (col < 0 || col >= w.value.cols()) throw std::invalid_argument("column: index out of range");
  Node n;
  n.op = Op::column;
  n.w = &w;
  n.k = col;
  n.value = w.value.col(col);
  return push(std::move(n));
}

Var Tape::affine_column(Parameter& w, Parameter& b, Eigen::Index col) {
  if (col < 0 || col >= w.value.cols()) throw std::invalid_argument("affine_column: index out of range");
  if (b.value.rows() != w.value.rows() || b.value.cols() != 1)
    throw std::invalid_argument("affine_column: bias shape mismatch");
  Node n;
  n.op = Op::affine_column;
  n.w = &w;
  n.bias = &b;
  n.k = col;
  n.value = w.value.col(col) + b.value.col(0);
  return push(std::move(n));
}

Var Tape::matvec(Parameter& w, Var x) {
  check(x);
  if (w.value.cols() != val(x).size()) throw std::invalid_argument("matvec: shape mismatch");
  Node n;
  n.op = Op::matvec;
  n.w = &w;
  n.a = x.id_;
  n.value.noalias() = w.value * val(x);
  return push(std::move(n));
}

Var Tape::affine(Parameter& w, Parameter& b, Var x) {
  check(x);
  if (w.value.cols() != val(x).size()) throw std::invalid_argument("affine: shape mismatch");
  if (b.value.rows() != w.value.rows() || b.value.cols() != 1)
    throw std::invalid_argument("affine: bias shape mismatch");
  Node n;
  n.op = Op::affine;
  n.w = &w;
  n.bias = &b;
  n.a = x.id_;
  n.value = b.value.col(0);
  n.value.noalias() += w.value * val(x);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check(a), check(b);
  require_same_size(val(a), val(b), "add");
  Node n;
  n.op = Op::add;
  n.a = a.id_;
  n.b = b.id_;
  n.value = val(a) + val(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check(a), check(b);
  require_same_size(val(a), val(b), "sub");
  Node n;
  n.op = Op::sub;
  n.a = a.id_;
  n.b = b.id_;
  n.value = val(a) - val(b);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check(a), check(b);
  require_same_size(val(a), val(b), "mul");
  Node n;
  n.op = Op::mul;
  n.a = a.id_;
  n.b = b.id_;
  n.value = val(a).cwiseProduct(val(b));
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  check(a);
  Node n;
  n.op = Op::scale;
  n.a = a.id_;
  n.s = s;
  n.value = s * val(a);
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  check(a);
  Node n;
  n.op = Op::one_minus;
  n.a = a.id_;
  n.value = (1.0 - val(a).array()).matrix();
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check(a);
  Node n;
  n.op = Op::sigmoid;
  n.a = a.id_;
  n.value = val(a).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check(a);
  Node n;
  n.op = Op::tanh;
  n.a = a.id_;
  n.value = val(a).unaryExpr([](double v) { return std::tanh(v); });
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  check(a);
  Node n;
  n.op = Op::exp;
  n.a = a.id_;
  n.value = val(a).unaryExpr([](double v) { return std::exp(v); });
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  check(a);
  if (val(a).size() == 0) throw std::invalid_argument("softmax of an empty vector");
  Node n;
  n.op = Op::softmax;
  n.a = a.id_;
  const double mx = val(a).maxCoeff();
  n.value = (val(a).array() - mx).exp().matrix();
  n.value /= n.value.sum();
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  check(a), check(b);
  Node n;
  n.op = Op::concat;
  n.a = a.id_;
  n.b = b.id_;
  n.value.resize(val(a).size() + val(b).size());
  n.value << val(a), val(b);
  return push(std::move(n));
}

Var Tape::slice(Var a, Eigen::Index start, Eigen::Index len) {
  check(a);
  if (start < 0 || len < 0 || start + len > val(a).size())
    throw std::invalid_argument("slice out of range");
  Node n;
  n.op = Op::slice;
  n.a = a.id_;
  n.k = start;
  n.len = len;
  n.value = val(a).segment(start, len);
  return push(std::move(n));
}

std::pair<Var, Var> Tape::split_half(Var a) {
  check(a);
  const Eigen::Index size = val(a).size();
  if (size % 2 != 0) throw std::invalid_argument("split_half of an odd-length vector");
  return {slice(a, 0, size / 2), slice(a, size / 2, size / 2)};
}

Var Tape::sum(Var a) {
  check(a);
  Node n;
  n.op = Op::sum;
  n.a = a.id_;
  n.value = Vector::Constant(1, val(a).sum());
  return push(std::move(n));
}

Var Tape::cross_entropy(Var probs, Eigen::Index target) {
  check(probs);
  if (target < 0 || target >= val(probs).size())
    throw std::invalid_argument("cross_entropy: target out of range");
  Node n;
  n.op = Op::xent;
  n.a = probs.id_;
  n.k = target;
  n.value = Vector::Constant(1, -std::log(val(probs)(target)));
  return push(std::move(n));
}

Var Tape::cross_entropy_logits(Var logits, Eigen::Index target) {
  check(logits);
  const Vector& z = val(logits);
  if (target < 0 || target >= z.size())
    throw std::invalid_argument("cross_entropy_logits: target out of range");
  Node n;
  n.op = Op::xent_logits;
  n.a = logits.id_;
  n.k = target;
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  n.value = Vector::Constant(1, lse - z(target));
  return push(std::move(n));
}

Var Tape::kl_divergence(Var mu, Var logvar) {
  check(mu), check(logvar);
  require_same_size(val(mu), val(logvar), "kl_divergence");
  Node n;
  n.op = Op::kl;
  n.a = mu.id_;
  n.b = logvar.id_;
  const auto& m = val(mu).array();
  const auto& lv = val(logvar).array();
  n.value = Vector::Constant(1, -0.5 * (1.0 + lv - m.square() - lv.exp()).sum());
  return push(std::move(n));
}

void Tape::backward(Var root, double seed) {
  check(root);
  if (val(root).size() != 1) throw std::invalid_argument("backward needs a scalar root");
  for (auto& n : nodes_) n.grad.setZero(n.value.size());
  nodes_[static_cast<std::size_t>(root.id_)].grad(0) = seed;

  for (auto i = static_cast<std::ptrdiff_t>(root.id_); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    const Vector& g = n.grad;
    if (n.op == Op::constant) continue;
    auto ga = [&]() -> Vector& { return nodes_[static_cast<std::size_t>(n.a)].grad; };
    auto gb = [&]() -> Vector& { return nodes_[static_cast<std::size_t>(n.b)].grad; };
    auto va = [&]() -> const Vector& { return nodes_[static_cast<std::size_t>(n.a)].value; };
    auto vb = [&]() -> const Vector& { return nodes_[static_cast<std::size_t>(n.b)].value; };
    switch (n.op) {
      case Op::constant: break;
      case Op::bias: n.bias->grad.col(0) += g; break;
      case Op::column: n.w->grad.col(n.k) += g; break;
      case Op::affine_column:
        n.w->grad.col(n.k) += g;
        n.bias->grad.col(0) += g;
        break;
      case Op::matvec:
        n.w->grad.noalias() += g * va().transpose();
        ga().noalias() += n.w->value.transpose() * g;
        break;
      case Op::affine:
        n.w->grad.noalias() += g * va().transpose();
        n.bias->grad.col(0) += g;
        ga().noalias() += n.w->value.transpose() * g;
        break;
      case Op::add: ga() += g; gb() += g; break;
      case Op::sub: ga() += g; gb() -= g; break;
      case Op::mul:
        ga() += g.cwiseProduct(vb());
        gb() += g.cwiseProduct(va());
        break;
      case Op::scale: ga() += n.s * g; break;
      case Op::one_minus: ga() -= g; break;
      case Op::sigmoid:
        ga().array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::tanh: ga().array() += g.array() * (1.0 - n.value.array().square()); break;
      case Op::exp: ga() += g.cwiseProduct(n.value); break;
      case Op::softmax: {
        const double dot = g.dot(n.value);
        ga().array() += n.value.array() * (g.array() - dot);
        break;
      }
      case Op::concat: {
        const Eigen::Index na = va().size();
        ga() += g.head(na);
        gb() += g.tail(g.size() - na);
        break;
      }
      case Op::slice: ga().segment(n.k, n.len) += g; break;
      case Op::sum: ga().array() += g(0); break;
      case Op::xent: ga()(n.k) -= g(0) / va()(n.k); break;
      case Op::xent_logits: {
        const Vector& z = va();
        Vector p = (z.array() - z.maxCoeff()).exp().matrix();
        p /= p.sum();
        p(n.k) -= 1.0;
        ga() += g(0) * p;
        break;
      }
      case Op::kl:
        ga() += g(0) * va();
        gb().array() += g(0) * 0.5 * (vb().array().exp() - 1.0);
        break;
    }
  }
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------- Adam

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

bool Adam::step() {
  double sq_norm = 0.0;
  bool finite = true;
  for (const Parameter* p : params_) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw std::invalid_argument("gradient shape mismatch for " + p->name);
    if (!p->grad.allFinite()) finite = false;
    sq_norm += p->grad.squaredNorm();
  }
  if (!finite) {
    for (Parameter* p : params_) p->zero_grad();
    return false;
  }
  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    const auto g = (clip * p.grad.array()).eval();
    m_[i].array() = config_.beta1 * m_[i].array() + (1.0 - config_.beta1) * g;
    v_[i].array() = config_.beta2 * v_[i].array() + (1.0 - config_.beta2) * g.square();
    p.value.array() -= config_.learning_rate * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + config_.epsilon);
    p.zero_grad();
  }
  return true;
}

}  // namespace edhie::nn
