// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "scawave/ap_branch.hpp"
#include "scawave/error.hpp"
#include "support/gradcheck.hpp"
#include "support/model_oracle.hpp"
#include "support/oracles.hpp"

using namespace scawave;
using scawave::testing::grad_check;
using scawave::testing::probe;
using scawave::testing::random_tensor;
using scawave::testing::toy_config;

namespace {

struct Branch {
  ModelConfig config;
  ParameterSet params;
  ApWeights w;
};

// Branch weights with every entry (biases included) drawn at random.
// `scale` bounds the entries; large scales saturate the sigmoids to exactly 0 or 1 in double.
std::unique_ptr<Branch> make_branch(Strategy s, std::uint64_t seed, bool randomize_all = true,
                                    double scale = 1.0) {
  auto b = std::make_unique<Branch>();
  b->config = toy_config(s, seed);
  ad::Rng rng(seed);
  b->w = init_ap_branch(b->config, b->params, rng);
  if (randomize_all) {
    std::uniform_real_distribution<double> d(-scale, scale);
    for (const auto& p : b->params.items())
      for (auto& v : p.tensor.data_mut()) v = d(rng);
  }
  return b;
}

double max_abs_diff(const oracle::Grid& a, const ad::Tensor& b) {
  double worst = 0;
  for (size_t r = 0; r < a.size(); ++r)
    for (size_t c = 0; c < a[r].size(); ++c)
      worst = std::max(worst, std::abs(a[r][c] - b.at(static_cast<Index>(r), static_cast<Index>(c))));
  return worst;
}

// Pointwise embedding written as loops over (out channel, position).
std::pair<oracle::Grid, oracle::Grid> embed_oracle(const ad::Tensor& a, const ApWeights& w, Strategy s) {
  const auto x = oracle::to_grid(a);
  const size_t k = x[0].size();
  oracle::Grid e = oracle::zeros(8, k);
  const auto kern = oracle::to_vec(w.embed_kernel);
  const auto bias = oracle::to_vec(w.embed_bias);
  for (size_t o = 0; o < 8; ++o)
    for (size_t j = 0; j < k; ++j) {
      double v = bias[o];
      if (s == Strategy::CD) {
        for (size_t i = 0; i < 4; ++i) v += kern[o * 4 + i] * x[i][j];
      } else {
        v += kern[o] * x[o % 4][j];
      }
      e[o][j] = v;
    }
  return {oracle::Grid(e.begin(), e.begin() + 4), oracle::Grid(e.begin() + 4, e.end())};
}

// sigmoid(down(up(row))) for every row of x, dense weights.
oracle::Grid gate_oracle(const oracle::Grid& x, const ad::Tensor& uw, const ad::Tensor& ub,
                         const ad::Tensor& dw, const ad::Tensor& db) {
  const auto up = oracle::to_grid(uw), down = oracle::to_grid(dw);
  const auto bu = oracle::to_vec(ub), bd = oracle::to_vec(db);
  oracle::Grid out = oracle::zeros(x.size(), bd.size());
  for (size_t r = 0; r < x.size(); ++r) {
    std::vector<double> h(bu.size());
    for (size_t u = 0; u < bu.size(); ++u) {
      h[u] = bu[u];
      for (size_t i = 0; i < x[r].size(); ++i) h[u] += x[r][i] * up[i][u];
    }
    for (size_t o = 0; o < bd.size(); ++o) {
      double s = bd[o];
      for (size_t u = 0; u < h.size(); ++u) s += h[u] * down[u][o];
      out[r][o] = oracle::sigmoid(s);
    }
  }
  return out;
}

oracle::Grid channel_gate_oracle(const ad::Tensor& a2, const ApWeights& w, Strategy s) {
  const auto x = oracle::to_grid(a2);
  const size_t k = x[0].size();
  if (s == Strategy::CD) {
    oracle::Grid t = oracle::zeros(k, 4);
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < k; ++j) t[j][i] = x[i][j];
    const auto g = gate_oracle(t, w.p3_w, w.p3_b, w.p4_w, w.p4_b);
    oracle::Grid out = oracle::zeros(4, k);
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < k; ++j) out[i][j] = g[j][i];
    return out;
  }
  const auto p3 = oracle::to_grid(w.p3_w), b3 = oracle::to_grid(w.p3_b), p4 = oracle::to_grid(w.p4_w);
  const auto b4 = oracle::to_vec(w.p4_b);
  oracle::Grid out = oracle::zeros(4, k);
  for (size_t c = 0; c < 4; ++c)
    for (size_t j = 0; j < k; ++j) {
      double s2 = b4[c];
      for (size_t u = 0; u < p3[c].size(); ++u) s2 += (x[c][j] * p3[c][u] + b3[c][u]) * p4[c][u];
      out[c][j] = oracle::sigmoid(s2);
    }
  return out;
}

}  // namespace

TEST_SUITE("ap_branch") {
  TEST_CASE("ap_embed: copy kernel, zero kernel, loop oracle") {
    ad::Rng rng(1);
    const ad::Tensor a = random_tensor({4, 9}, rng, -2, 2, false);
    {
      auto b = make_branch(Strategy::CD, 2, false);
      Eigen::MatrixXd k(8, 4);
      k << Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(4, 4);
      b->w.embed_kernel.data_mut() = Eigen::Map<Eigen::VectorXd>(ad::RowMatrix(k).data(), 32);
      const auto [a1, a2] = ap_embed(a, b->w, Strategy::CD);
      CHECK(a1.data() == a.data());
      CHECK(a2.data() == a.data());
      b->w.embed_kernel.data_mut().setZero();
      const auto [z1, z2] = ap_embed(a, b->w, Strategy::CD);
      CHECK(z1.data().isZero(0));
      CHECK(z2.data().isZero(0));
      CHECK_THROWS_AS(ap_embed(a, b->w, Strategy::CI), ConfigError);
      CHECK_THROWS_AS(ap_embed(ad::Tensor({3, 9}), b->w, Strategy::CD), DimensionError);
    }
    {
      auto b = make_branch(Strategy::CI, 3, false);
      b->w.embed_kernel.data_mut().setOnes();
      const auto [a1, a2] = ap_embed(a, b->w, Strategy::CI);
      CHECK(a1.data() == a.data());
      CHECK(a2.data() == a.data());
    }
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      auto b = make_branch(s, 4);
      const auto [a1, a2] = ap_embed(a, b->w, s);
      const auto [r1, r2] = embed_oracle(a, b->w, s);
      CHECK(max_abs_diff(r1, a1) < 1e-13);
      CHECK(max_abs_diff(r2, a2) < 1e-13);
    }
  }

  TEST_CASE("spatial_gate: zero projections, saturation, loop oracle") {
    ad::Rng rng(5);
    const ad::Tensor a1 = random_tensor({4, 9}, rng, -2, 2, false);
    auto b = make_branch(Strategy::CD, 6, false);
    for (auto* t : {&b->w.p1_w, &b->w.p1_b, &b->w.p2_w, &b->w.p2_b}) t->data_mut().setZero();
    CHECK((spatial_gate(a1, b->w).data().array() == 0.5).all());

    auto r = make_branch(Strategy::CD, 7);
    double previous = 0;
    for (double bias : {0.0, 10.0, 50.0, 100.0, 200.0}) {
      r->w.p2_b.data_mut().setConstant(bias);
      const double lo = spatial_gate(a1, r->w).data().minCoeff();
      CHECK(lo >= previous);
      previous = lo;
    }
    CHECK(previous > 0.999);

    auto o = make_branch(Strategy::CD, 8);
    CHECK(max_abs_diff(gate_oracle(oracle::to_grid(a1), o->w.p1_w, o->w.p1_b, o->w.p2_w, o->w.p2_b),
                       spatial_gate(a1, o->w)) < 1e-14);
  }

  TEST_CASE("channel_gate: zero projections, transpose symmetry, loop oracle") {
    ad::Rng rng(9);
    const ad::Tensor a2 = random_tensor({4, 9}, rng, -2, 2, false);
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      auto z = make_branch(s, 10, false);
      for (auto* t : {&z->w.p3_w, &z->w.p3_b, &z->w.p4_w, &z->w.p4_b}) t->data_mut().setZero();
      CHECK((channel_gate(a2, z->w, s).data().array() == 0.5).all());

      auto o = make_branch(s, 11);
      CHECK(max_abs_diff(channel_gate_oracle(a2, o->w, s), channel_gate(a2, o->w, s)) < 1e-14);
      CHECK_THROWS_AS(channel_gate(a2, o->w, s == Strategy::CD ? Strategy::CI : Strategy::CD), ConfigError);
    }
    // On a square 4×4 input the channel gate is the spatial gate of the
    // transpose with the projection blocks swapped in.
    auto b = make_branch(Strategy::CD, 12);
    const ad::Tensor sq = random_tensor({4, 4}, rng, -2, 2, false);
    ApWeights swapped = b->w;
    swapped.p1_w = b->w.p3_w;
    swapped.p1_b = b->w.p3_b;
    swapped.p2_w = b->w.p4_w;
    swapped.p2_b = b->w.p4_b;
    const ad::Tensor lhs = ad::transpose(spatial_gate(ad::transpose(sq), swapped));
    CHECK(lhs.data() == channel_gate(sq, b->w, Strategy::CD).data());
  }

  TEST_CASE("apply_gates: scalar gates, elementwise oracle, shape errors") {
    ad::Rng rng(13);
    const ad::Tensor a = random_tensor({4, 9}, rng, -2, 2, false);
    const ad::Tensor half = ad::Tensor::full({4, 9}, 0.5);
    CHECK(apply_gates(a, half, half).data() == (0.25 * a.data()).eval());
    const ad::Tensor g1 = random_tensor({4, 9}, rng, 0, 1, false);
    const ad::Tensor g2 = random_tensor({4, 9}, rng, 0, 1, false);
    const ad::Tensor out = apply_gates(a, g1, g2);
    for (Index i = 0; i < 36; ++i) CHECK(out.data()[i] == a.data()[i] * g1.data()[i] * g2.data()[i]);
    CHECK_THROWS_AS(apply_gates(a, ad::Tensor({4, 8}), g2), DimensionError);
  }

  TEST_CASE("properties: gates in (0,1), contraction, zero-projection baseline") {
    ad::Rng rng(14);
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      auto b = make_branch(s, 15, true, 0.3);
      for (int trial = 0; trial < 25; ++trial) {
        const ad::Tensor a = random_tensor({4, 9}, rng, -3, 3, false);
        const auto [a1, a2] = ap_embed(a, b->w, s);
        const ad::Tensor ws = spatial_gate(a1, b->w), wc = channel_gate(a2, b->w, s);
        CHECK(ws.data().minCoeff() > 0.0);
        CHECK(ws.data().maxCoeff() < 1.0);
        CHECK(wc.data().minCoeff() > 0.0);
        CHECK(wc.data().maxCoeff() < 1.0);
        const ad::Tensor out = ap_forward(a, b->w, s);
        CHECK((out.data().array().abs() <= a.data().array().abs()).all());
      }
      auto z = make_branch(s, 16);
      for (auto* t : {&z->w.p1_w, &z->w.p1_b, &z->w.p2_w, &z->w.p2_b, &z->w.p3_w, &z->w.p3_b, &z->w.p4_w,
                      &z->w.p4_b})
        t->data_mut().setZero();
      const ad::Tensor a = random_tensor({4, 9}, rng, -3, 3, false);
      CHECK(ap_forward(a, z->w, s).data() == (0.25 * a.data()).eval());
    }
  }

  TEST_CASE("gradient check for the whole branch") {
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      auto b = make_branch(s, 17, true, 0.3);
      ad::Rng rng(18);
      const ad::Tensor a = random_tensor({4, 9}, rng, -2, 2, true);
      std::vector<ad::Tensor> leaves{a};
      for (const auto& p : b->params.items()) leaves.push_back(p.tensor);
      const auto r = grad_check([&] { return probe(ap_forward(a, b->w, s), 3); }, leaves, 1e-6);
      INFO(to_string(s) << " worst " << r.worst);
      CHECK(r.max_rel_error < 1e-5);
    }
  }

  TEST_CASE("wind column widens every gate") {
    auto c = toy_config(Strategy::CD);
    c.use_wind = true;
    ParameterSet params;
    ad::Rng rng(19);
    const auto w = init_ap_branch(c, params, rng);
    CHECK(w.p1_w.shape() == ad::Shape{10, 40});
    const ad::Tensor a = random_tensor({4, 10}, rng, -1, 1, false);
    CHECK(ap_forward(a, w, Strategy::CD).shape() == ad::Shape{4, 10});
    CHECK(kApColumns[9] == "wind_speed");
  }
}
