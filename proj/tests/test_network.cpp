#include <doctest.h>

#include <cmath>
#include <random>

#include "al/network.hpp"
#include "gradcheck.hpp"

using namespace al::nn;

TEST_CASE("softmax head gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto inst = testing::random_instance(HeadType::Softmax, seed);
    const auto r = testing::gradient_check(inst);
    INFO("seed " << seed);
    CHECK(r.max_relative_error < 1e-3);
    CHECK(r.compared > 0);
  }
}

TEST_CASE("sigmoid head gradient matches finite differences") {
  for (std::uint64_t seed = 100; seed < 125; ++seed) {
    const auto inst = testing::random_instance(HeadType::Sigmoid, seed);
    const auto r = testing::gradient_check(inst);
    INFO("seed " << seed);
    CHECK(r.max_relative_error < 1e-3);
  }
}

TEST_CASE("masked nodes receive exactly zero gradient") {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    auto inst = testing::random_instance(HeadType::Sigmoid, seed);
    // Mask output node 0 for the whole batch.
    inst.targets.node_mask.row(0).setZero();
    std::vector<Layer> grad;
    inst.net.loss_and_gradient(inst.x, inst.targets, grad);
    CHECK(grad.back().weight.row(0).isZero(0.0));
    CHECK(grad.back().bias(0) == 0.0);

    Eigen::MatrixXd d;
    Network::head_loss(HeadType::Sigmoid, inst.net.logits(inst.x), inst.targets, &d);
    for (Eigen::Index c = 0; c < d.cols(); ++c)
      for (Eigen::Index r = 0; r < d.rows(); ++r)
        if (inst.targets.node_mask(r, c) == 0.0) CHECK(d(r, c) == 0.0);

    // Masked targets do not influence the loss at all.
    auto flipped = inst.targets;
    flipped.node_target.row(0) = (1.0 - flipped.node_target.row(0).array()).matrix();
    CHECK(inst.net.loss(inst.x, flipped) == inst.net.loss(inst.x, inst.targets));
  }
}

TEST_CASE("a zero dropout rate matches the plain path bit for bit") {
  auto inst = testing::random_instance(HeadType::Softmax, 7);
  std::vector<Layer> plain;
  std::vector<Layer> with_rng;
  std::mt19937_64 rng(1);
  const double a = inst.net.loss_and_gradient(inst.x, inst.targets, plain);
  const double b = inst.net.loss_and_gradient(inst.x, inst.targets, with_rng, 0.0, &rng);
  CHECK(a == b);
  for (std::size_t l = 0; l < plain.size(); ++l) {
    CHECK(plain[l].weight == with_rng[l].weight);
    CHECK(plain[l].bias == with_rng[l].bias);
  }
}

TEST_CASE("zero weights give a uniform softmax") {
  Network net(3, {4}, 5, HeadType::Softmax, 1);
  for (auto& layer : net.layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  const Eigen::MatrixXd out = net.forward(Eigen::MatrixXd::Random(3, 2));
  for (Eigen::Index c = 0; c < 2; ++c)
    for (Eigen::Index r = 0; r < 5; ++r) CHECK(out(r, c) == 0.2);
}

TEST_CASE("initialisation is deterministic per seed") {
  Network a(4, {8, 6}, 3, HeadType::Softmax, 42);
  Network b(4, {8, 6}, 3, HeadType::Softmax, 42);
  Network c(4, {8, 6}, 3, HeadType::Softmax, 43);
  CHECK(a.layers()[0].weight == b.layers()[0].weight);
  CHECK_FALSE(a.layers()[0].weight == c.layers()[0].weight);
  CHECK(a.embedding_dim() == 6);
}
