#include "alpl/nn.hpp"

#include "alpl/error.hpp"
#include "alpl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace alpl::nn {

namespace {

constexpr Eigen::Index kEvalChunk = 4096;

void check_same_shape(const Parameters& a, const Parameters& b, const char* what) {
  bool ok = a.weights.size() == b.weights.size() && a.biases.size() == b.biases.size();
  for (std::size_t l = 0; ok && l < a.weights.size(); ++l) {
    ok = a.weights[l].rows() == b.weights[l].rows() && a.weights[l].cols() == b.weights[l].cols() &&
         a.biases[l].size() == b.biases[l].size();
  }
  if (!ok) throw ConfigError(std::string(what) + ": parameter shape mismatch");
}

void check_input(const DenseNet& net, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
    throw ConfigError("input has " + std::to_string(batch.cols()) + " columns, network expects " +
                      std::to_string(net.input_dim()));
  }
}

// Runs every hidden layer and returns the penultimate activations.
Matrix hidden_forward(const DenseNet& net, const Matrix& inputs) {
  const auto& p = net.params();
  Matrix a = inputs;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    Matrix z = a * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    a = z.cwiseMax(0.0);
  }
  return a;
}

Matrix output_layer(const DenseNet& net, const Matrix& penultimate) {
  const auto& p = net.params();
  Matrix z = penultimate * p.weights.back().transpose();
  z.rowwise() += p.biases.back().transpose();
  return z;
}

}  // namespace

Parameters Parameters::zeros_like() const {
  Parameters out;
  out.weights.reserve(weights.size());
  out.biases.reserve(biases.size());
  for (const auto& w : weights) out.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) out.biases.push_back(Vector::Zero(b.size()));
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

bool Parameters::all_finite() const {
  return std::all_of(weights.begin(), weights.end(), [](const Matrix& w) { return w.allFinite(); }) &&
         std::all_of(biases.begin(), biases.end(), [](const Vector& b) { return b.allFinite(); });
}

DenseNet::DenseNet(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ConfigError("a network needs at least input and output dimensions");
  if (std::any_of(dims_.begin(), dims_.end(), [](std::size_t d) { return d == 0; })) {
    throw ConfigError("layer dimensions must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(dims_[l + 1]);
    const auto in = static_cast<Eigen::Index>(dims_[l]);
    params_.weights.push_back(Matrix::Zero(out, in));
    params_.biases.push_back(Vector::Zero(out));
  }
}

DenseNet init_net(std::span<const std::size_t> layer_dims, std::uint64_t seed) {
  if (layer_dims.empty()) throw ConfigError("empty layer dimensions");
  DenseNet net(std::vector<std::size_t>(layer_dims.begin(), layer_dims.end()));
  Rng rng(seed);
  for (auto& w : net.params().weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    // Filled in a fixed row-major order so the draw sequence is layout independent.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  return net;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

BatchOutput forward(const DenseNet& net, const Matrix& batch) {
  check_input(net, batch);
  const auto& p = net.params();
  BatchOutput out;
  out.activations.reserve(net.num_layers());
  out.activations.push_back(batch);
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    Matrix z = out.activations.back() * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    out.activations.push_back(z.cwiseMax(0.0));
  }
  out.logits = output_layer(net, out.activations.back());
  out.probabilities = softmax_rows(out.logits);
  return out;
}

Matrix predict_proba(const DenseNet& net, const Matrix& inputs) {
  check_input(net, inputs);
  Matrix out(inputs.rows(), static_cast<Eigen::Index>(net.output_dim()));
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, inputs.rows() - start);
    out.middleRows(start, n) = softmax_rows(output_layer(net, hidden_forward(net, inputs.middleRows(start, n))));
  }
  return out;
}

Matrix embed(const DenseNet& net, const Matrix& inputs) {
  check_input(net, inputs);
  const auto width = static_cast<Eigen::Index>(net.layer_dims()[net.num_layers() - 1]);
  Matrix out(inputs.rows(), width);
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, inputs.rows() - start);
    out.middleRows(start, n) = hidden_forward(net, inputs.middleRows(start, n));
  }
  return out;
}

Parameters backward(const DenseNet& net, const BatchOutput& cache, const Matrix& grad_wrt_logits) {
  if (grad_wrt_logits.rows() != cache.logits.rows() || grad_wrt_logits.cols() != cache.logits.cols()) {
    throw ConfigError("logit gradient shape does not match the forward batch");
  }
  if (!grad_wrt_logits.allFinite()) throw NumericError("non-finite logit gradient");

  const auto& p = net.params();
  Parameters grads;
  grads.weights.resize(net.num_layers());
  grads.biases.resize(net.num_layers());

  Matrix g = grad_wrt_logits;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const Matrix& a = cache.activations[l];
    grads.weights[l].noalias() = g.transpose() * a;
    grads.biases[l] = g.colwise().sum().transpose();
    if (l > 0) {
      Matrix upstream = g * p.weights[l];
      // ReLU derivative: a is the post-activation of layer l-1.
      g = upstream.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

AdamState AdamState::for_net(const DenseNet& net, AdamConfig config) {
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
  AdamState s;
  s.config = config;
  s.first_moment = net.params().zeros_like();
  s.second_moment = net.params().zeros_like();
  return s;
}

void adam_step(DenseNet& net, AdamState& state, const Parameters& grads) {
  auto& p = net.params();
  check_same_shape(p, grads, "adam_step");
  check_same_shape(p, state.first_moment, "adam_step");
  check_same_shape(p, state.second_moment, "adam_step");

  const auto& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    update(p.weights[l], state.first_moment.weights[l], state.second_moment.weights[l], grads.weights[l]);
    update(p.biases[l], state.first_moment.biases[l], state.second_moment.biases[l], grads.biases[l]);
  }
  if (!p.all_finite()) {
    throw NumericError("non-finite parameter after Adam step " + std::to_string(state.step_count));
  }
}

}  // namespace alpl::nn
