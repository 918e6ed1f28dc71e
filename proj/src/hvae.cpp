#include "edhie/hvae.hpp"

#include <cmath>
#include <stdexcept>

namespace edhie {

GruWeights::GruWeights(const std::string& prefix, Eigen::Index out, Eigen::Index in_symbol,
                       Eigen::Index in_code)
    : w_ir(prefix + ".w_ir", out, in_symbol),
      w_iu(prefix + ".w_iu", out, in_symbol),
      w_in(prefix + ".w_in", out, in_symbol),
      w_hr(prefix + ".w_hr", out, in_code),
      w_hu(prefix + ".w_hu", out, in_code),
      w_hn(prefix + ".w_hn", out, in_code),
      b_ir(prefix + ".b_ir", out, 1),
      b_iu(prefix + ".b_iu", out, 1),
      b_in(prefix + ".b_in", out, 1),
      b_hr(prefix + ".b_hr", out, 1),
      b_hu(prefix + ".b_hu", out, 1),
      b_hn(prefix + ".b_hn", out, 1) {}

HvaeModel::HvaeModel(Vocabulary vocab, int hidden_dim, int latent_dim)
    : vocab_(std::move(vocab)), hidden_(hidden_dim), latent_(latent_dim) {
  if (hidden_dim < 1 || latent_dim < 1) throw std::invalid_argument("model dimensions must be positive");
  if (vocab_.size() == 0) throw std::invalid_argument("empty vocabulary");
  const Eigen::Index v = vocab_size(), h = hidden_, z = latent_;
  encoder = GruWeights("encoder", h, v, 2 * h);
  mu_w = Parameter("mu.w", z, h);
  mu_b = Parameter("mu.b", z, 1);
  logvar_w = Parameter("logvar.w", z, h);
  logvar_b = Parameter("logvar.b", z, 1);
  z2h_w = Parameter("z2h.w", h, z);
  z2h_b = Parameter("z2h.b", h, 1);
  symbol_w = Parameter("symbol.w", v, h);
  symbol_b = Parameter("symbol.b", v, 1);
  decoder = GruWeights("decoder", 2 * h, v, h);
}

namespace {

template <typename Self, typename Ptr>
std::vector<Ptr> collect(Self& m) {
  std::vector<Ptr> out;
  for (auto* g : {&m.encoder}) {
    for (auto* p : {&g->w_ir, &g->w_iu, &g->w_in, &g->w_hr, &g->w_hu, &g->w_hn, &g->b_ir, &g->b_iu,
                    &g->b_in, &g->b_hr, &g->b_hu, &g->b_hn})
      out.push_back(p);
  }
  for (auto* p : {&m.mu_w, &m.mu_b, &m.logvar_w, &m.logvar_b, &m.z2h_w, &m.z2h_b, &m.symbol_w,
                  &m.symbol_b})
    out.push_back(p);
  for (auto* g : {&m.decoder}) {
    for (auto* p : {&g->w_ir, &g->w_iu, &g->w_in, &g->w_hr, &g->w_hu, &g->w_hn, &g->b_ir, &g->b_iu,
                    &g->b_in, &g->b_hr, &g->b_hu, &g->b_hn})
      out.push_back(p);
  }
  return out;
}

void init_gru(GruWeights& g, Rng& rng) {
  const double bi = 1.0 / std::sqrt(static_cast<double>(g.w_ir.value.cols()));
  const double bh = 1.0 / std::sqrt(static_cast<double>(g.w_hr.value.cols()));
  for (auto* p : {&g.w_ir, &g.w_iu, &g.w_in, &g.b_ir, &g.b_iu, &g.b_in}) nn::init_uniform(*p, bi, rng);
  for (auto* p : {&g.w_hr, &g.w_hu, &g.w_hn, &g.b_hr, &g.b_hu, &g.b_hn}) nn::init_uniform(*p, bh, rng);
}

void init_linear(Parameter& w, Parameter& b, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.value.cols()));
  nn::init_uniform(w, bound, rng);
  nn::init_uniform(b, bound, rng);
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

template <typename Derived>
Vector sigmoid_of(const Eigen::MatrixBase<Derived>& v) {
  return v.unaryExpr([](double a) { return sigmoid(a); });
}

template <typename Derived>
Vector tanh_of(const Eigen::MatrixBase<Derived>& v) {
  return v.unaryExpr([](double a) { return std::tanh(a); });
}

// Shared gate arithmetic. `in_r/in_u/in_n` are the symbol projections
// (W_i* x + b_i*), `rec` the recurrent input and `carry` the vector the update
// gate blends the candidate with.
template <typename R, typename U, typename N>
Vector gru_gates(const GruWeights& w, const R& in_r, const U& in_u, const N& in_n,
                 const Eigen::Ref<const Vector>& rec, Vector& u_out) {
  Vector r = sigmoid_of(in_r + w.w_hr.value * rec + w.b_hr.value.col(0));
  u_out = sigmoid_of(in_u + w.w_hu.value * rec + w.b_hu.value.col(0));
  Vector hn = w.w_hn.value * rec + w.b_hn.value.col(0);
  return tanh_of(in_n + r.cwiseProduct(hn));
}

void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw std::invalid_argument(std::string(what) + ": expected size " + std::to_string(want) +
                                ", got " + std::to_string(got));
}

Vector encoder_from_projection(const HvaeModel& m, const Vector& in_r, const Vector& in_u,
                               const Vector& in_n, const Eigen::Ref<const Vector>& hl,
                               const Eigen::Ref<const Vector>& hr) {
  const Eigen::Index h = m.hidden_dim();
  require_size(hl.size(), h, "encode_node h_left");
  require_size(hr.size(), h, "encode_node h_right");
  Vector cat(2 * h);
  cat << hl, hr;
  Vector u;
  Vector n = gru_gates(m.encoder, in_r, in_u, in_n, cat, u);
  return (1.0 - u.array()) * n.array() + (0.5 * u.array()) * hl.array() + (0.5 * u.array()) * hr.array();
}

ChildCodes decoder_from_projection(const HvaeModel& m, const Vector& in_r, const Vector& in_u,
                                   const Vector& in_n, const Eigen::Ref<const Vector>& h) {
  const Eigen::Index hd = m.hidden_dim();
  require_size(h.size(), hd, "decoder_cell h");
  Vector u;
  Vector n = gru_gates(m.decoder, in_r, in_u, in_n, h, u);
  Vector hh(2 * hd);
  hh << h, h;
  Vector d = (1.0 - u.array()) * n.array() + u.array() * hh.array();
  return {d.head(hd), d.tail(hd)};
}

Vector one_hot_projection(const Parameter& w, const Parameter& b, std::size_t symbol) {
  return w.value.col(static_cast<Eigen::Index>(symbol)) + b.value.col(0);
}

std::size_t symbol_index(const HvaeModel& m, const Symbol& s) {
  auto idx = m.vocab().find(s.name);
  if (!idx || !(m.vocab()[*idx] == s)) throw ParseError("symbol not in model vocabulary: " + s.name);
  return *idx;
}

}  // namespace

void HvaeModel::initialize(Rng& rng) {
  init_gru(encoder, rng);
  init_linear(mu_w, mu_b, rng);
  init_linear(logvar_w, logvar_b, rng);
  init_linear(z2h_w, z2h_b, rng);
  init_linear(symbol_w, symbol_b, rng);
  init_gru(decoder, rng);
}

std::vector<Parameter*> HvaeModel::parameters() { return collect<HvaeModel, Parameter*>(*this); }

std::vector<const Parameter*> HvaeModel::parameters() const {
  return collect<const HvaeModel, const Parameter*>(*this);
}

std::size_t HvaeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void HvaeModel::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------- cells

Vector encode_node(const HvaeModel& m, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& hl, const Eigen::Ref<const Vector>& hr) {
  require_size(x.size(), m.vocab_size(), "encode_node x");
  const auto& g = m.encoder;
  return encoder_from_projection(m, g.w_ir.value * x + g.b_ir.value.col(0),
                                 g.w_iu.value * x + g.b_iu.value.col(0),
                                 g.w_in.value * x + g.b_in.value.col(0), hl, hr);
}

Vector encode_node(const HvaeModel& m, std::size_t symbol, const Eigen::Ref<const Vector>& hl,
                   const Eigen::Ref<const Vector>& hr) {
  const auto& g = m.encoder;
  return encoder_from_projection(m, one_hot_projection(g.w_ir, g.b_ir, symbol),
                                 one_hot_projection(g.w_iu, g.b_iu, symbol),
                                 one_hot_projection(g.w_in, g.b_in, symbol), hl, hr);
}

ChildCodes decoder_cell(const HvaeModel& m, const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& h) {
  require_size(x.size(), m.vocab_size(), "decoder_cell x");
  const auto& g = m.decoder;
  return decoder_from_projection(m, g.w_ir.value * x + g.b_ir.value.col(0),
                                 g.w_iu.value * x + g.b_iu.value.col(0),
                                 g.w_in.value * x + g.b_in.value.col(0), h);
}

ChildCodes decoder_cell(const HvaeModel& m, std::size_t symbol, const Eigen::Ref<const Vector>& h) {
  const auto& g = m.decoder;
  return decoder_from_projection(m, one_hot_projection(g.w_ir, g.b_ir, symbol),
                                 one_hot_projection(g.w_iu, g.b_iu, symbol),
                                 one_hot_projection(g.w_in, g.b_in, symbol), h);
}

Vector symbol_distribution(const HvaeModel& m, const Eigen::Ref<const Vector>& h) {
  require_size(h.size(), m.hidden_dim(), "symbol_distribution h");
  Vector logits = m.symbol_w.value * h + m.symbol_b.value.col(0);
  Vector p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

DecodeStep decode_node(const HvaeModel& m, const Eigen::Ref<const Vector>& h, DecodeMode mode, Rng* rng,
                       bool leaf_only) {
  Vector p = symbol_distribution(m, h);
  const auto& vocab = m.vocab();
  if (leaf_only)
    for (std::size_t i = 0; i < vocab.size(); ++i)
      if (!vocab[i].is_leaf()) p(static_cast<Eigen::Index>(i)) = 0.0;

  DecodeStep step;
  if (mode == DecodeMode::greedy) {
    double best = -1.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p(i) > best) {
        best = p(i);
        step.symbol = static_cast<std::size_t>(i);
      }
  } else {
    if (!rng) throw std::invalid_argument("stochastic decoding needs a random stream");
    std::uniform_real_distribution<double> unit(0.0, p.sum());
    double u = unit(*rng);
    step.symbol = static_cast<std::size_t>(p.size() - 1);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) <= 0.0) continue;
      if (u < p(i)) {
        step.symbol = static_cast<std::size_t>(i);
        break;
      }
      u -= p(i);
    }
    // Rounding can leave the fallback on a masked entry; take the last allowed.
    while (p(static_cast<Eigen::Index>(step.symbol)) <= 0.0 && step.symbol > 0) --step.symbol;
  }
  if (!vocab[step.symbol].is_leaf()) step.children = decoder_cell(m, step.symbol, h);
  return step;
}

// ---------------------------------------------------------------------- trees

namespace {

Vector encode_rec(const HvaeModel& m, const ExprTree& t, const Vector& zero,
                  std::vector<NodeCode>* trace) {
  Vector hl = t.has_left() ? encode_rec(m, t.left(), zero, trace) : zero;
  Vector hr = t.has_right() ? encode_rec(m, t.right(), zero, trace) : zero;
  Vector h = encode_node(m, symbol_index(m, t.symbol()), hl, hr);
  if (trace) trace->push_back({t.symbol().name, h});
  return h;
}

ExprTree decode_rec(const HvaeModel& m, const Vector& h, std::size_t depth, std::size_t max_height,
                    DecodeMode mode, Rng* rng) {
  DecodeStep step = decode_node(m, h, mode, rng, depth >= max_height);
  const Symbol& s = m.vocab()[step.symbol];
  switch (s.arity()) {
    case 0: return ExprTree::leaf(s);
    case 1: return ExprTree::unary(s, decode_rec(m, step.children.left, depth + 1, max_height, mode, rng));
    default: {
      ExprTree l = decode_rec(m, step.children.left, depth + 1, max_height, mode, rng);
      ExprTree r = decode_rec(m, step.children.right, depth + 1, max_height, mode, rng);
      return ExprTree::binary(s, std::move(l), std::move(r));
    }
  }
}

}  // namespace

Vector encode_root(const HvaeModel& m, const ExprTree& tree) {
  const Vector zero = Vector::Zero(m.hidden_dim());
  return encode_rec(m, tree, zero, nullptr);
}

std::vector<NodeCode> encode_trace(const HvaeModel& m, const ExprTree& tree) {
  std::vector<NodeCode> trace;
  const Vector zero = Vector::Zero(m.hidden_dim());
  encode_rec(m, tree, zero, &trace);
  return trace;
}

LatentPoint encode_tree(const HvaeModel& m, const ExprTree& tree) {
  Vector root = encode_root(m, tree);
  LatentPoint lp;
  lp.mu = m.mu_w.value * root + m.mu_b.value.col(0);
  lp.logvar = m.logvar_w.value * root + m.logvar_b.value.col(0);
  lp.z = lp.mu;
  return lp;
}

LatentPoint encode_tree(const HvaeModel& m, const ExprTree& tree, Rng& rng) {
  LatentPoint lp = encode_tree(m, tree);
  lp.z = reparameterize(lp.mu, lp.logvar, rng);
  return lp;
}

Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& eps) {
  require_size(logvar.size(), mu.size(), "reparameterize logvar");
  require_size(eps.size(), mu.size(), "reparameterize eps");
  return mu.array() + (0.5 * logvar.array()).exp() * eps.array();
}

Vector reparameterize(const Vector& mu, const Vector& logvar, Rng& rng) {
  return reparameterize(mu, logvar, standard_normal(mu.size(), rng));
}

ExprTree decode_tree(const HvaeModel& m, const Eigen::Ref<const Vector>& z, std::size_t max_height,
                     DecodeMode mode, Rng* rng) {
  require_size(z.size(), m.latent_dim(), "decode_tree z");
  if (max_height < 1) throw std::invalid_argument("max_height must be >= 1");
  Vector h = m.z2h_w.value * z + m.z2h_b.value.col(0);
  return decode_rec(m, h, 1, max_height, mode, rng);
}

double kl_divergence(const Vector& mu, const Vector& logvar) {
  require_size(logvar.size(), mu.size(), "kl_divergence");
  return -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();
}

// ----------------------------------------------------------------------- loss

namespace {

double teacher_forced_ce(const HvaeModel& m, const ExprTree& t, const Vector& h) {
  const std::size_t idx = symbol_index(m, t.symbol());
  Vector logits = m.symbol_w.value * h + m.symbol_b.value.col(0);
  const double mx = logits.maxCoeff();
  double ce = mx + std::log((logits.array() - mx).exp().sum()) - logits(static_cast<Eigen::Index>(idx));
  if (t.symbol().arity() == 0) return ce;
  ChildCodes kids = decoder_cell(m, idx, h);
  double left = teacher_forced_ce(m, t.left(), kids.left);
  // In-order accumulation: left subtree, node, right subtree.
  double total = left + ce;
  if (t.has_right()) total += teacher_forced_ce(m, t.right(), kids.right);
  return total;
}

struct TapeBuilder {
  HvaeModel& m;
  nn::Tape& tape;
  nn::Var zero;

  nn::Var encode(const ExprTree& t) {
    nn::Var hl = t.has_left() ? encode(t.left()) : zero;
    nn::Var hr = t.has_right() ? encode(t.right()) : zero;
    const auto idx = static_cast<Eigen::Index>(symbol_index(m, t.symbol()));
    auto& g = m.encoder;
    nn::Var cat = concat(hl, hr);
    nn::Var r = sigmoid(tape.affine_column(g.w_ir, g.b_ir, idx) + tape.affine(g.w_hr, g.b_hr, cat));
    nn::Var u = sigmoid(tape.affine_column(g.w_iu, g.b_iu, idx) + tape.affine(g.w_hu, g.b_hu, cat));
    nn::Var n = tanh(tape.affine_column(g.w_in, g.b_in, idx) + r * tape.affine(g.w_hn, g.b_hn, cat));
    nn::Var half_u = 0.5 * u;
    return one_minus(u) * n + half_u * hl + half_u * hr;
  }

  // Appends per-node cross-entropies in in-order position.
  void decode(const ExprTree& t, nn::Var h, std::vector<nn::Var>& terms) {
    const auto idx = static_cast<Eigen::Index>(symbol_index(m, t.symbol()));
    nn::Var ce = tape.cross_entropy_logits(tape.affine(m.symbol_w, m.symbol_b, h), idx);
    if (t.symbol().arity() == 0) {
      terms.push_back(ce);
      return;
    }
    auto& g = m.decoder;
    nn::Var r = sigmoid(tape.affine_column(g.w_ir, g.b_ir, idx) + tape.affine(g.w_hr, g.b_hr, h));
    nn::Var u = sigmoid(tape.affine_column(g.w_iu, g.b_iu, idx) + tape.affine(g.w_hu, g.b_hu, h));
    nn::Var n = tanh(tape.affine_column(g.w_in, g.b_in, idx) + r * tape.affine(g.w_hn, g.b_hn, h));
    nn::Var d = one_minus(u) * n + u * concat(h, h);
    auto [hl, hr] = tape.split_half(d);
    decode(t.left(), hl, terms);
    terms.push_back(ce);
    if (t.has_right()) decode(t.right(), hr, terms);
  }
};

}  // namespace

LossTerms loss_value(const HvaeModel& m, const ExprTree& tree, double lambda, const Vector& eps) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  LatentPoint lp = encode_tree(m, tree);
  Vector z = reparameterize(lp.mu, lp.logvar, eps);
  Vector h = m.z2h_w.value * z + m.z2h_b.value.col(0);
  LossTerms out;
  out.reconstruction = teacher_forced_ce(m, tree, h);
  out.kl = kl_divergence(lp.mu, lp.logvar);
  out.total = out.reconstruction + lambda * out.kl;
  return out;
}

TapedLoss taped_loss(HvaeModel& m, const ExprTree& tree, double lambda, const Vector& eps,
                     nn::Tape& tape) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  require_size(eps.size(), m.latent_dim(), "taped_loss eps");
  TapeBuilder b{m, tape, tape.constant(Vector::Zero(m.hidden_dim()))};
  nn::Var root = b.encode(tree);
  nn::Var mu = tape.affine(m.mu_w, m.mu_b, root);
  nn::Var logvar = tape.affine(m.logvar_w, m.logvar_b, root);
  nn::Var z = mu + exp(0.5 * logvar) * tape.constant(eps);
  nn::Var h = tape.affine(m.z2h_w, m.z2h_b, z);

  std::vector<nn::Var> terms;
  terms.reserve(tree.size());
  b.decode(tree, h, terms);
  nn::Var rec = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) rec = rec + terms[i];
  nn::Var kl = tape.kl_divergence(mu, logvar);
  nn::Var total = rec + lambda * kl;

  TapedLoss out{total, {}};
  out.terms.total = total.scalar();
  out.terms.reconstruction = rec.scalar();
  out.terms.kl = kl.scalar();
  return out;
}

TapedLoss loss(HvaeModel& m, const ExprTree& tree, double lambda, Rng& rng, nn::Tape& tape) {
  return taped_loss(m, tree, lambda, standard_normal(m.latent_dim(), rng), tape);
}

}  // namespace edhie
