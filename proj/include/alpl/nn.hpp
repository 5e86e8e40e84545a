#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace alpl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kRelu };

/// Trainable tensors of a dense network, one weight matrix (out x in) and one bias
/// vector per layer. Also used for gradients and optimizer moments.
struct Parameters {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  Parameters zeros_like() const;
  std::size_t count() const;
  bool all_finite() const;
};

/// Feed-forward network with ReLU hidden layers and a linear output layer whose
/// logits are turned into class probabilities by a row-wise softmax.
class DenseNet {
 public:
  /// Zero-initialised network. layer_dims = (d, h1, ..., k) with at least two entries.
  explicit DenseNet(std::vector<std::size_t> layer_dims);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return dims_.size() - 1; }
  Activation activation() const { return Activation::kRelu; }

  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

 private:
  std::vector<std::size_t> dims_;
  Parameters params_;
};

/// Forward pass result. activations[l] is the input to layer l, so activations[0]
/// is the batch itself and activations.back() is the penultimate representation.
struct BatchOutput {
  Matrix logits;
  Matrix probabilities;
  std::vector<Matrix> activations;

  const Matrix& penultimate() const { return activations.back(); }
};

/// He-uniform weights and zero biases. Bit-identical for equal (layer_dims, seed).
DenseNet init_net(std::span<const std::size_t> layer_dims, std::uint64_t seed);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

BatchOutput forward(const DenseNet& net, const Matrix& batch);

/// Probabilities only; evaluates large inputs in chunks without caching activations.
Matrix predict_proba(const DenseNet& net, const Matrix& inputs);

/// Penultimate-layer activations (the input of the output layer).
Matrix embed(const DenseNet& net, const Matrix& inputs);

/// Exact parameter gradients of the scalar loss whose logit gradient is supplied.
/// The losses in this library already fold the 1/batch mean into grad_wrt_logits,
/// so the returned gradients are those of the batch-mean loss.
Parameters backward(const DenseNet& net, const BatchOutput& cache, const Matrix& grad_wrt_logits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  Parameters first_moment;
  Parameters second_moment;

  static AdamState for_net(const DenseNet& net, AdamConfig config = {});
};

/// One bias-corrected Adam update. Throws NumericError if any parameter becomes non-finite.
void adam_step(DenseNet& net, AdamState& state, const Parameters& grads);

}  // namespace alpl::nn
