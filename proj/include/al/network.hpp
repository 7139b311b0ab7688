#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace al::nn {

enum class HeadType {
  Softmax,  // one-of-C, cross-entropy
  Sigmoid,  // independent per-node outputs, masked binary cross-entropy
};

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Training targets for one batch; columns are samples.
struct Targets {
  std::vector<int> classes;     // Softmax head
  Eigen::MatrixXd node_target;  // Sigmoid head, outputs x batch, entries 0/1
  Eigen::MatrixXd node_mask;    // Sigmoid head, 0 removes the term from the loss
};

/// Fully connected ReLU network. Inputs are column vectors; every method
/// taking a matrix treats its columns as a batch.
class Network {
 public:
  Network() = default;
  Network(std::size_t input_dim, const std::vector<int>& hidden, std::size_t output_dim,
          HeadType head, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const;
  /// Width of the last hidden layer, or the input width without hidden layers.
  std::size_t embedding_dim() const;
  HeadType head() const { return head_; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Pre-activation of the output layer.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;
  /// Softmax or sigmoid of the logits.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  /// Post-ReLU activations of the last hidden layer, no dropout.
  Eigen::MatrixXd embed(const Eigen::MatrixXd& x) const;

  /// Mean loss over the batch.
  double loss(const Eigen::MatrixXd& x, const Targets& targets) const;

  /// Mean loss plus its gradient w.r.t. every weight and bias. With a
  /// positive dropout rate and an rng, inverted dropout is applied to the
  /// hidden activations; a zero rate takes the exact no-dropout path.
  double loss_and_gradient(const Eigen::MatrixXd& x, const Targets& targets,
                           std::vector<Layer>& gradient, double dropout_rate = 0.0,
                           std::mt19937_64* rng = nullptr) const;

  void sgd_step(const std::vector<Layer>& gradient, double learning_rate);

  /// Output-layer loss and its derivative w.r.t. the logits.
  static double head_loss(HeadType head, const Eigen::MatrixXd& logits, const Targets& targets,
                          Eigen::MatrixXd* d_logits);

 private:
  std::size_t input_dim_ = 0;
  HeadType head_ = HeadType::Softmax;
  std::vector<Layer> layers_;
};

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z);
Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z);

}  // namespace al::nn
