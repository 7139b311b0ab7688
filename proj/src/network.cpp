#include "al/network.hpp"

#include <cmath>

#include "al/error.hpp"

namespace al::nn {

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double top = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - top).exp();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Network::Network(std::size_t input_dim, const std::vector<int>& hidden, std::size_t output_dim,
                 HeadType head, std::uint64_t seed)
    : input_dim_(input_dim), head_(head) {
  if (input_dim == 0 || output_dim == 0) throw InputError("network dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::size_t fan_in = input_dim;
  auto add_layer = [&](std::size_t out, double gain) {
    // He-uniform for ReLU layers, Glorot-like for the output layer.
    const double limit = std::sqrt(gain * 3.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer layer{Eigen::MatrixXd(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in)),
                Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = u(rng);
    layers_.push_back(std::move(layer));
    fan_in = out;
  };
  for (int width : hidden) {
    if (width <= 0) throw InputError("hidden layer widths must be positive");
    add_layer(static_cast<std::size_t>(width), 2.0);
  }
  add_layer(output_dim, 1.0);
}

std::size_t Network::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t Network::embedding_dim() const {
  return layers_.size() < 2 ? input_dim_
                            : static_cast<std::size_t>(layers_[layers_.size() - 2].weight.rows());
}

Eigen::MatrixXd Network::embed(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    a = z.cwiseMax(0.0);
  }
  return a;
}

Eigen::MatrixXd Network::logits(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim_)
    throw InputError("input has " + std::to_string(x.rows()) + " features, model expects " +
                     std::to_string(input_dim_));
  Eigen::MatrixXd z = layers_.back().weight * embed(x);
  z.colwise() += layers_.back().bias;
  return z;
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& x) const {
  const auto z = logits(x);
  return head_ == HeadType::Softmax ? softmax_columns(z) : sigmoid(z);
}

double Network::head_loss(HeadType head, const Eigen::MatrixXd& z, const Targets& targets,
                          Eigen::MatrixXd* d_logits) {
  const auto batch = static_cast<double>(z.cols());
  double loss = 0;
  if (head == HeadType::Softmax) {
    if (targets.classes.size() != static_cast<std::size_t>(z.cols()))
      throw InputError("one class target per sample required");
    if (d_logits) *d_logits = softmax_columns(z);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const int y = targets.classes[static_cast<std::size_t>(c)];
      if (y < 0 || y >= z.rows()) throw InputError("class target out of range");
      const double top = z.col(c).maxCoeff();
      const double lse = top + std::log((z.col(c).array() - top).exp().sum());
      loss += lse - z(y, c);
      if (d_logits) (*d_logits)(y, c) -= 1.0;
    }
    if (d_logits) *d_logits /= batch;
    return loss / batch;
  }
  if (targets.node_target.rows() != z.rows() || targets.node_target.cols() != z.cols() ||
      targets.node_mask.rows() != z.rows() || targets.node_mask.cols() != z.cols())
    throw InputError("node targets must match the output shape");
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const double m = targets.node_mask(r, c);
      if (m == 0.0) continue;
      const double v = z(r, c);
      const double t = targets.node_target(r, c);
      loss += m * (std::max(v, 0.0) - v * t + std::log1p(std::exp(-std::abs(v))));
    }
  }
  if (d_logits) {
    *d_logits = (sigmoid(z) - targets.node_target).cwiseProduct(targets.node_mask) / batch;
  }
  return loss / batch;
}

double Network::loss(const Eigen::MatrixXd& x, const Targets& targets) const {
  return head_loss(head_, logits(x), targets, nullptr);
}

double Network::loss_and_gradient(const Eigen::MatrixXd& x, const Targets& targets,
                                  std::vector<Layer>& gradient, double dropout_rate,
                                  std::mt19937_64* rng) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim_)
    throw InputError("input dimension mismatch");
  const bool dropout = dropout_rate > 0.0 && rng != nullptr;
  const double keep = 1.0 - dropout_rate;
  std::bernoulli_distribution keep_unit(keep);

  // activations[l] feeds layer l; masks hold the dropout scaling per hidden layer.
  std::vector<Eigen::MatrixXd> activations{x};
  std::vector<Eigen::MatrixXd> masks;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * activations.back();
    z.colwise() += layers_[l].bias;
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    if (dropout) {
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          mask(r, c) = keep_unit(*rng) ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(mask);
      masks.push_back(std::move(mask));
    }
    activations.push_back(std::move(a));
  }
  Eigen::MatrixXd z = layers_.back().weight * activations.back();
  z.colwise() += layers_.back().bias;

  Eigen::MatrixXd delta;
  const double value = head_loss(head_, z, targets, &delta);

  gradient.resize(layers_.size());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    gradient[l].weight = delta * activations[l].transpose();
    gradient[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers_[l].weight.transpose() * delta;
    // activations[l] > 0 exactly where the ReLU was active and the unit kept.
    back = back.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
    if (dropout) back = back.cwiseProduct(masks[l - 1]);
    delta = std::move(back);
  }
  return value;
}

void Network::sgd_step(const std::vector<Layer>& gradient, double learning_rate) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight -= learning_rate * gradient[l].weight;
    layers_[l].bias -= learning_rate * gradient[l].bias;
  }
}

}  // namespace al::nn
