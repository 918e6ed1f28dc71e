#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "edhie/grammar.hpp"
#include "edhie/hvae.hpp"
#include "support.hpp"

using namespace edhie;

namespace {

HvaeModel small_model(std::uint64_t seed, int hidden = 6, int latent = 4) {
  HvaeModel m(builtin_vocabulary("ae"), hidden, latent);
  Rng rng(seed);
  m.initialize(rng);
  return m;
}

Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return standard_normal(n, rng) * scale;
}

}  // namespace

TEST_CASE("parameter layout") {
  const HvaeModel m = small_model(1);
  const Eigen::Index H = 6, V = m.vocab_size();
  CHECK(m.encoder.w_hr.value.rows() == H);
  CHECK(m.encoder.w_hr.value.cols() == 2 * H);
  CHECK(m.decoder.w_hr.value.rows() == 2 * H);
  CHECK(m.decoder.w_ir.value.cols() == V);
  CHECK(m.symbol_w.value.rows() == V);
  std::size_t total = 0;
  for (const auto* p : m.parameters()) total += static_cast<std::size_t>(p->value.size());
  CHECK(m.parameter_count() == total);
  CHECK_THROWS(HvaeModel(builtin_vocabulary("ae"), 0, 4));
}

TEST_CASE("encoder cell matches the scalar reference") {
  HvaeModel m = small_model(2);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(m.vocab_size(), rng);
    const Vector hl = random_vector(6, rng), hr = random_vector(6, rng);
    const auto expect = oracle::gru21(m, oracle::to_std(x), oracle::to_std(hl), oracle::to_std(hr));
    const Vector got = encode_node(m, x, hl, hr);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(got(static_cast<Eigen::Index>(i)) == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("encoder cell properties") {
  HvaeModel m = small_model(4);
  const Vector zero = Vector::Zero(6);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector hl = random_vector(6, rng, 0.5), hr = random_vector(6, rng, 0.5);
    const Vector h = encode_node(m, 0, hl, hr);
    const Vector bound = 0.5 * (hl.cwiseAbs() + hr.cwiseAbs());
    // Convex mix of a tanh and the children average.
    CHECK((h.cwiseAbs().array() <= bound.cwiseMax(1.0).array() + 1e-12).all());
  }
  const Vector leaf = encode_node(m, 1, zero, zero);
  const auto expect = oracle::gru21(m, oracle::to_std(Vector::Unit(m.vocab_size(), 1)), oracle::to_std(zero),
                                    oracle::to_std(zero));
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(leaf(static_cast<Eigen::Index>(i)) == doctest::Approx(expect[i]));
}

TEST_CASE("decoder cell matches the scalar reference") {
  HvaeModel m = small_model(6);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(m.vocab_size(), rng);
    const Vector h = random_vector(6, rng);
    const auto d = oracle::gru12(m, oracle::to_std(x), oracle::to_std(h));
    const ChildCodes got = decoder_cell(m, x, h);
    REQUIRE(got.left.size() == 6);
    REQUIRE(got.right.size() == 6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      CHECK(got.left(i) == doctest::Approx(d[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(got.right(i) == doctest::Approx(d[static_cast<std::size_t>(i + 6)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("kl divergence") {
  CHECK(kl_divergence(Vector::Zero(3), Vector::Zero(3)) == 0.0);
  Vector mu(1), lv(1);
  mu << 1.0;
  lv << 0.0;
  CHECK(kl_divergence(mu, lv) == doctest::Approx(0.5));
  mu << 0.0;
  lv << std::log(2.0);
  CHECK(kl_divergence(mu, lv) == doctest::Approx(-0.5 * (1.0 + std::log(2.0) - 2.0)));
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Vector m = random_vector(5, rng, 3.0), l = random_vector(5, rng, 3.0);
    CHECK(kl_divergence(m, l) >= 0.0);
  }
}

TEST_CASE("reparameterization") {
  Vector mu(2), lv(2), eps(2);
  mu << 1.0, -1.0;
  lv << 0.0, std::log(4.0);
  eps << 0.5, 0.5;
  const Vector z = reparameterize(mu, lv, eps);
  CHECK(z(0) == doctest::Approx(1.5));
  CHECK(z(1) == doctest::Approx(0.0));
}

TEST_CASE("decoded trees are always valid") {
  const HvaeModel m = small_model(9, 8, 4);
  Rng rng(10);
  for (std::size_t height : {1u, 2u, 4u, 7u}) {
    for (int i = 0; i < 100; ++i) {
      const Vector z = random_vector(4, rng, 3.0);
      const ExprTree t = decode_tree(m, z, height, i % 2 ? DecodeMode::greedy : DecodeMode::stochastic, &rng);
      CHECK(t.height() <= height);
      CHECK(parse_postfix(to_postfix_string(t), m.vocab()) == t);
    }
  }
  CHECK_THROWS(decode_tree(m, Vector::Zero(4), 0));
  CHECK_THROWS(decode_tree(m, Vector::Zero(3), 4));
}

TEST_CASE("greedy decoding is deterministic") {
  const HvaeModel m = small_model(11);
  Rng rng(12);
  const Vector z = random_vector(4, rng);
  CHECK(decode_tree(m, z, 6) == decode_tree(m, z, 6));
}

TEST_CASE("taped loss matches the direct loss and finite differences") {
  HvaeModel m = small_model(13, 5, 3);
  const ExprTree tree = parse_postfix("x c + x *", m.vocab());
  REQUIRE(tree.height() == 3);
  Rng rng(14);
  const Vector eps = standard_normal(3, rng);
  const double lambda = 0.7;

  nn::Tape tape;
  m.zero_grad();
  const TapedLoss tl = taped_loss(m, tree, lambda, eps, tape);
  const LossTerms direct = loss_value(m, tree, lambda, eps);
  CHECK(tl.total.scalar() == doctest::Approx(direct.total).epsilon(1e-12));
  CHECK(tl.terms.reconstruction == doctest::Approx(direct.reconstruction).epsilon(1e-12));
  CHECK(tl.terms.kl == doctest::Approx(direct.kl).epsilon(1e-12));
  CHECK(direct.total == doctest::Approx(direct.reconstruction + lambda * direct.kl));
  tape.backward(tl.total);

  std::vector<Matrix> analytic;
  for (const auto* p : m.parameters()) analytic.push_back(p->grad);
  const double err =
      oracle::max_gradient_error(m.parameters(), analytic, [&] { return loss_value(m, tree, lambda, eps).total; });
  CHECK(err < 1e-4);
}

TEST_CASE("persistence round trips") {
  const HvaeModel m = small_model(15);
  const std::string bytes = serialize_model(m);
  const HvaeModel back = deserialize_model(bytes);
  CHECK(serialize_model(back) == bytes);
  CHECK(back.vocab() == m.vocab());
  CHECK(back.hidden_dim() == m.hidden_dim());

  const HvaeModel from_json = model_from_json(model_to_json(m));
  CHECK(serialize_model(from_json) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "edhie_test_model.hvae";
  save_model(m, path.string());
  CHECK(serialize_model(load_model(path.string())) == bytes);
  std::filesystem::remove(path);

  CHECK_THROWS(deserialize_model("not a model"));
  CHECK_THROWS(deserialize_model(bytes.substr(0, bytes.size() / 2)));
  CHECK_THROWS(model_from_json("{}"));
}
