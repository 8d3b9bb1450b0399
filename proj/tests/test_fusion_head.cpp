// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scawave/error.hpp"
#include "scawave/fusion_head.hpp"
#include "scawave/model.hpp"
#include "support/gradcheck.hpp"
#include "support/model_oracle.hpp"

using namespace scawave;
using scawave::testing::grad_check;
using scawave::testing::probe;
using scawave::testing::random_input;
using scawave::testing::random_tensor;
using scawave::testing::toy_config;

namespace {

ad::Tensor batch(Index rows, std::initializer_list<double> values) {
  return ad::Tensor({rows, 4}, Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Index>(values.size())));
}

HeadWeights tiny_head(Strategy s, ParameterSet& params, std::uint64_t seed) {
  ModelConfig c = toy_config(s, seed);
  c.head_hidden_layers = 9;
  c.head_min_width = 3;
  c.head_max_width = 5;
  // One patch and D_e = 1 keep the head input narrow.
  c.ddm_width = c.ddm_height = c.patch_size = 3;
  c.embed_dim = 1;
  ad::Rng rng(seed);
  return init_head(c, params, rng);
}

}  // namespace

TEST_SUITE("fusion_head") {
  TEST_CASE("fuse: lengths, zeros, channel permutation, layout") {
    ad::Rng rng(1);
    const ad::Tensor d = random_tensor({2, 4}, rng, -1, 1, false);
    const ad::Tensor a = random_tensor({4, 9}, rng, -1, 1, false);
    const ad::Tensor ci = fuse(d, a, Strategy::CI);
    const ad::Tensor cd = fuse(d, a, Strategy::CD);
    CHECK(ci.shape() == ad::Shape{4, 11});
    CHECK(cd.shape() == ad::Shape{1, 44});
    for (Index c = 0; c < 4; ++c) {
      for (Index r = 0; r < 2; ++r) CHECK(ci.at(c, r) == d.at(r, c));
      for (Index k = 0; k < 9; ++k) CHECK(ci.at(c, 2 + k) == a.at(c, k));
      for (Index j = 0; j < 11; ++j) CHECK(cd.at(0, c * 11 + j) == ci.at(c, j));
    }
    CHECK(fuse(ad::Tensor({2, 4}), ad::Tensor({4, 9}), Strategy::CD).data().isZero(0));

    const std::array<Index, 4> perm{3, 1, 0, 2};
    ad::RowMatrix dp(2, 4), ap(4, 9);
    for (Index c = 0; c < 4; ++c) {
      dp.col(c) = d.matrix().col(perm[c]);
      ap.row(c) = a.matrix().row(perm[c]);
    }
    const ad::Tensor permuted = fuse(ad::Tensor::from_matrix(dp), ad::Tensor::from_matrix(ap), Strategy::CI);
    for (Index c = 0; c < 4; ++c) CHECK(permuted.matrix().row(c) == ci.matrix().row(perm[c]));
    CHECK_THROWS_AS(fuse(ad::Tensor({2, 3}), a, Strategy::CI), DimensionError);
  }

  TEST_CASE("head widths taper from the input width to the floor") {
    ModelConfig c;
    const auto w = c.head_widths();
    CHECK(w.size() == 9);
    CHECK(w.back() == 32);
    CHECK(std::is_sorted(w.rbegin(), w.rend()));
    CHECK(w.front() < c.fused_width());
    c.head_max_width = 256;
    for (Index v : c.head_widths()) CHECK(v <= 256);
  }

  TEST_CASE("head_forward: zero weights emit the output bias") {
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      ParameterSet params;
      auto h = tiny_head(s, params, 2);
      for (const auto& p : params.items()) p.tensor.data_mut().setZero();
      const Index outs = s == Strategy::CD ? 4 : 1;
      for (Index o = 0; o < outs; ++o) h.biases.back().data_mut()[o] = 1.5 + static_cast<double>(o);
      ad::Rng rng(3);
      const Index rows = s == Strategy::CD ? 1 : 4;
      const ad::Tensor f = random_tensor({rows, h.weights.front().size(0)}, rng, -1, 1, false);
      const ad::Tensor y = head_forward(f, h);
      for (Index i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 1.5 + static_cast<double>(s == Strategy::CD ? i : 0));
    }
  }

  TEST_CASE("head_forward CI: one channel's features move only its prediction") {
    ParameterSet params;
    auto h = tiny_head(Strategy::CI, params, 4);
    ad::Rng rng(5);
    const ad::Tensor f = random_tensor({4, h.weights.front().size(0)}, rng, -1, 1, false);
    const ad::Tensor base = head_forward(f, h);
    for (Index j = 0; j < 4; ++j) {
      Eigen::VectorXd v = f.data();
      v.segment(j * f.size(1), f.size(1)).array() += 0.5;
      const ad::Tensor y = head_forward(ad::Tensor(f.shape(), v), h);
      for (Index i = 0; i < 4; ++i)
        if (i != j) CHECK(y.data()[i] == base.data()[i]);
    }
  }

  TEST_CASE("head_forward gradient check at tiny widths") {
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      ParameterSet params;
      auto h = tiny_head(s, params, 6);
      ad::Rng rng(7);
      std::uniform_real_distribution<double> d(-0.5, 0.5);
      for (const auto& b : h.biases)
        for (auto& v : b.data_mut()) v = d(rng);
      const ad::Tensor f = random_tensor({s == Strategy::CD ? 2 : 4, h.weights.front().size(0)}, rng, -1, 1, true);
      std::vector<ad::Tensor> leaves{f};
      for (const auto& p : params.items()) leaves.push_back(p.tensor);
      // Gradients below ~1e-5 sit at the finite-difference roundoff level.
      const auto r = grad_check([&] { return probe(head_forward(f, h), 8); }, leaves, 1e-6, 1e-5);
      INFO(to_string(s) << " worst " << r.worst << ": " << r.worst_analytic << " vs " << r.worst_numeric);
      CHECK(r.max_rel_error < 1e-5);
    }
  }

  TEST_CASE("huber: branch examples, continuity, bound") {
    CHECK(huber(3.0, 3.0, 2.0) == 0.0);
    CHECK(huber(0.0, 1.0, 2.0) == 0.5);
    CHECK(huber(0.0, 3.0, 2.0) == 4.0);
    CHECK(huber(0.0, -3.0, 2.0) == 4.0);
    CHECK(huber(0.0, 2.0, 2.0) == 2.0);
    CHECK(huber(0.0, -2.0, 2.0) == 2.0);
    CHECK_THROWS_AS(huber(0.0, 1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(huber(0.0, 1.0, -1.0), ConfigError);

    for (double delta : {0.5, 2.0, 7.0}) {
      for (double sign : {-1.0, 1.0}) {
        const double e = sign * delta;
        const double below = huber(0.0, e * (1 - 1e-12), delta), above = huber(0.0, e * (1 + 1e-12), delta);
        CHECK(std::abs(above - below) < 1e-9);
        // Derivatives of the mean loss just inside and just outside |e| = δ.
        auto slope = [&](double err) {
          const ad::Tensor pred = ad::Tensor::scalar(0.0, true);
          ad::backward(ad::huber_mean(pred, ad::Tensor::scalar(err), delta));
          return pred.grad()[0];
        };
        CHECK(std::abs(slope(e * (1 - 1e-12)) - slope(e * (1 + 1e-12))) < 1e-9);
      }
    }
    ad::Rng rng(9);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 1000; ++i) {
      const double e = u(rng);
      const double h = huber(0.0, e, 2.0), q = 0.5 * e * e;
      CHECK(h <= q);
      CHECK((h == q) == (std::abs(e) <= 2.0));
    }
  }

  TEST_CASE("batch_loss: examples, oracle, permutation invariance, errors") {
    const ad::Tensor y = batch(2, {1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(batch_loss(y, y, 2.0).item() == 0.0);
    CHECK(batch_loss(batch(1, {0, 0, 0, 0}), batch(1, {1, 1, 1, 1}), 2.0).item() == 0.5);

    ad::Rng rng(10);
    const ad::Tensor p = random_tensor({6, 4}, rng, 0, 8, false);
    const ad::Tensor r = random_tensor({6, 4}, rng, 0, 8, false);
    double ref = 0;
    for (Index i = 0; i < 6; ++i)
      for (Index c = 0; c < 4; ++c) ref += huber(p.at(i, c), r.at(i, c), 2.0);
    ref /= 24.0;
    const double loss = batch_loss(p, r, 2.0).item();
    CHECK(loss == doctest::Approx(ref).epsilon(1e-14));

    std::vector<Index> order(24);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::VectorXd ps(24), rs(24);
    for (Index k = 0; k < 24; ++k) {
      ps[k] = p.data()[order[static_cast<size_t>(k)]];
      rs[k] = r.data()[order[static_cast<size_t>(k)]];
    }
    CHECK(batch_loss(ad::Tensor({6, 4}, ps), ad::Tensor({6, 4}, rs), 2.0).item() == doctest::Approx(loss).epsilon(1e-14));

    CHECK_THROWS_AS(batch_loss(ad::Tensor(), ad::Tensor(), 2.0), ContractError);
    CHECK_THROWS_AS(batch_loss(p, batch(1, {0, 0, 0, 0}), 2.0), ContractError);
    CHECK_THROWS_AS(batch_loss(p, r, 0.0), ConfigError);
  }
}

TEST_SUITE("model") {
  TEST_CASE("forward shapes, empty batches and input validation") {
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      const auto c = toy_config(s);
      ScaWaveNet net(c);
      ad::Rng rng(1);
      std::vector<ModelInput> inputs{random_input(c, rng), random_input(c, rng), random_input(c, rng)};
      const auto y = net.predict(inputs);
      CHECK(y.rows() == 3);
      CHECK(y.cols() == 4);
      CHECK(y.allFinite());
      CHECK(net.predict({}).rows() == 0);
      CHECK_THROWS_AS(net.forward({}, false, rng), ContractError);

      ModelInput bad = inputs[0];
      bad.ddms = ad::Tensor({4, 3, 5, 6});
      CHECK_THROWS_AS(net.predict(std::span(&bad, 1)), DimensionError);
      bad = inputs[0];
      bad.aps = ad::Tensor({4, 10});
      CHECK_THROWS_AS(net.predict(std::span(&bad, 1)), ConfigError);
    }
  }

  TEST_CASE("same seed gives identical weights and predictions") {
    const auto c = toy_config(Strategy::CD, 42);
    ScaWaveNet a(c), b(c), other(toy_config(Strategy::CD, 43));
    ad::Rng rng(2);
    const std::vector<ModelInput> x{random_input(c, rng)};
    CHECK(a.predict(x) == b.predict(x));
    CHECK(a.predict(x) != other.predict(x));
    CHECK(a.parameters().count() == b.parameters().count());
  }

  TEST_CASE("CI end to end: a channel's inputs move only its prediction") {
    const auto c = toy_config(Strategy::CI);
    ScaWaveNet net(c);
    ad::Rng rng(3);
    const ModelInput x = random_input(c, rng);
    const auto base = net.predict(std::span(&x, 1));
    for (Index j = 0; j < 4; ++j) {
      ModelInput y = random_input(c, rng);
      Eigen::VectorXd ddm = x.ddms.data(), ap = x.aps.data();
      const Index per = 3 * c.ddm_width * c.ddm_height;
      ddm.segment(j * per, per) = y.ddms.data().segment(j * per, per);
      ap.segment(j * 9, 9) = y.aps.data().segment(j * 9, 9);
      const ModelInput mixed{ad::Tensor(x.ddms.shape(), ddm), ad::Tensor(x.aps.shape(), ap)};
      const auto out = net.predict(std::span(&mixed, 1));
      for (Index i = 0; i < 4; ++i) CHECK((out(0, i) == base(0, i)) == (i != j));
    }
  }

  TEST_CASE("CD: a channel's inputs reach the other predictions") {
    const auto c = toy_config(Strategy::CD);
    ScaWaveNet net(c);
    ad::Rng rng(4);
    const ModelInput x = random_input(c, rng);
    const auto base = net.predict(std::span(&x, 1));
    Eigen::VectorXd ap = x.aps.data();
    ap.segment(0, 9).array() += 1.0;
    const ModelInput moved{x.ddms, ad::Tensor(x.aps.shape(), ap)};
    const auto out = net.predict(std::span(&moved, 1));
    for (Index i = 1; i < 4; ++i) CHECK(out(0, i) != base(0, i));
  }

  TEST_CASE("global-only head input uses the first embed_dim rows") {
    auto c = toy_config(Strategy::CD);
    c.head_input = HeadInput::GlobalOnly;
    CHECK(c.fused_width() == 4 * (c.embed_dim + 9));
    ScaWaveNet net(c);
    ad::Rng rng(5);
    const std::vector<ModelInput> x{random_input(c, rng)};
    CHECK(net.predict(x).allFinite());
  }

  TEST_CASE("end-to-end gradient of batch_loss matches finite differences") {
    for (Strategy s : {Strategy::CD, Strategy::CI}) {
      const auto c = toy_config(s, 7);
      ScaWaveNet net(c);
      ad::Rng rng(6);
      const std::vector<ModelInput> x{random_input(c, rng), random_input(c, rng)};
      const ad::Tensor y = random_tensor({2, 4}, rng, 0.5, 3, false);
      std::vector<ad::Tensor> leaves;
      for (const auto& p : net.parameters().items()) leaves.push_back(p.tensor);
      const auto r = grad_check([&] {
        ad::Rng unused(0);
        return batch_loss(net.forward(x, false, unused), y, 2.0);
      }, leaves, 1e-6, 1e-5);
      INFO(to_string(s) << " worst " << r.worst << " of " << r.checked << ": " << r.worst_analytic << " vs " << r.worst_numeric);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}
