#include "scate/mlp.hpp"

#include <cmath>

#include "scate/error.hpp"
#include "scate/parallel_kernels.hpp"
#include "scate/rng.hpp"

namespace scate {

std::int64_t Mlp::param_count() const {
  std::int64_t total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    total += static_cast<std::int64_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  }
  return total;
}

MlpParams MlpParams::zeros_like(const Mlp& mlp) {
  MlpParams p;
  for (int l = 0; l < mlp.layers(); ++l) {
    p.weights.push_back(Matrix::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
    p.biases.push_back(Vector::Zero(mlp.biases[l].size()));
  }
  return p;
}

std::vector<int> mlp_dims(int d_in, int width, int depth, int d_out) {
  std::vector<int> dims{d_in};
  for (int k = 0; k < depth; ++k) dims.push_back(width);
  dims.push_back(d_out);
  return dims;
}

double silu(double z) {
  if (z >= 0) return z / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return z * e / (1.0 + e);
}

double silu_grad(double z) {
  double s;
  if (z >= 0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  return s + z * s * (1.0 - s);
}

Mlp init_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(ErrorCode::BadDims, "need at least input and output dims");
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorCode::BadDims, "layer dims must be positive");
  }
  Rng rng(seed);
  Mlp mlp;
  mlp.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    Matrix W(dims[l], dims[l + 1]);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-limit, limit);
    }
    mlp.weights.push_back(std::move(W));
    mlp.biases.push_back(Vector::Zero(dims[l + 1]));
  }
  return mlp;
}

namespace {

void check_input(const Mlp& mlp, const Matrix& X) {
  if (X.cols() != mlp.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "network expects " + std::to_string(mlp.input_dim()) +
                                                  " inputs, got " + std::to_string(X.cols()));
  }
}

template <typename Dense>
Matrix run_forward(const Mlp& mlp, const Matrix& X, ForwardCache* cache, Dense&& dense) {
  check_input(mlp, X);
  if (cache) {
    cache->activations.assign(1, X);
    cache->pre.clear();
  }
  Matrix current = X;
  Matrix z;
  for (int l = 0; l < mlp.layers(); ++l) {
    dense(current, mlp.weights[l], mlp.biases[l], z);
    const bool hidden = l + 1 < mlp.layers();
    Matrix a = z;
    if (hidden) a = z.unaryExpr([](double v) { return silu(v); });
    if (cache) {
      cache->pre.push_back(z);
      cache->activations.push_back(a);
    }
    current = std::move(a);
  }
  return current;
}

}  // namespace

Matrix forward(const Mlp& mlp, const Matrix& X) { return run_forward(mlp, X, nullptr, kernels::dense_forward); }

Matrix forward(const Mlp& mlp, const Matrix& X, ForwardCache& cache) {
  return run_forward(mlp, X, &cache, kernels::dense_forward);
}

Matrix forward_serial(const Mlp& mlp, const Matrix& X) {
  return run_forward(mlp, X, nullptr, kernels::dense_forward_serial);
}

MlpParams backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_grad) {
  const int L = mlp.layers();
  if (static_cast<int>(cache.pre.size()) != L || output_grad.cols() != mlp.output_dim() ||
      output_grad.rows() != cache.activations.front().rows()) {
    throw Error(ErrorCode::DimensionMismatch, "output gradient does not match the forward pass");
  }
  MlpParams grads;
  grads.weights.resize(L);
  grads.biases.resize(L);
  Matrix delta = output_grad;
  Matrix upstream;
  for (int l = L - 1; l >= 0; --l) {
    if (l + 1 < L) {
      // Hidden layer: chain through the SiLU derivative at the stored pre-activation.
      delta.array() *= cache.pre[l].unaryExpr([](double v) { return silu_grad(v); }).array();
    }
    kernels::dense_backward(cache.activations[l], mlp.weights[l], delta, grads.weights[l], grads.biases[l],
                            l > 0 ? &upstream : nullptr);
    if (l > 0) delta = std::move(upstream);
  }
  return grads;
}

MlpParams backward(const Mlp& mlp, const Matrix& X, const Matrix& output_grad) {
  ForwardCache cache;
  forward(mlp, X, cache);
  return backward(mlp, cache, output_grad);
}

AdamState AdamState::for_model(const Mlp& mlp, double lr) {
  AdamState s;
  s.m = MlpParams::zeros_like(mlp);
  s.v = MlpParams::zeros_like(mlp);
  s.lr = lr;
  return s;
}

namespace {

template <typename Param>
void adam_update(Param& p, const Param& g, Param& m, Param& v, const AdamState& s, double bc1, double bc2) {
  auto pa = p.array();
  auto ga = g.array();
  m.array() = s.beta1 * m.array() + (1.0 - s.beta1) * ga;
  v.array() = s.beta2 * v.array() + (1.0 - s.beta2) * ga.square();
  pa -= s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

}  // namespace

void adam_step(Mlp& mlp, const MlpParams& grads, AdamState& state) {
  const auto L = static_cast<std::size_t>(mlp.layers());
  if (grads.weights.size() != L || grads.biases.size() != L || state.m.weights.size() != L) {
    throw Error(ErrorCode::ShapeMismatch, "gradient layer count differs from the network");
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (grads.weights[l].rows() != mlp.weights[l].rows() || grads.weights[l].cols() != mlp.weights[l].cols() ||
        grads.biases[l].size() != mlp.biases[l].size()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape differs at layer " + std::to_string(l));
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < L; ++l) {
    adam_update(mlp.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l], state, bc1, bc2);
    adam_update(mlp.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l], state, bc1, bc2);
  }
}

MlpF32 MlpF32::from(const Mlp& mlp) {
  MlpF32 out;
  out.dims = mlp.dims;
  for (int l = 0; l < mlp.layers(); ++l) {
    const auto& W = mlp.weights[l];
    std::vector<float> w(static_cast<std::size_t>(W.size()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) w[i * W.cols() + j] = static_cast<float>(W(i, j));
    }
    out.weights.push_back(std::move(w));
    std::vector<float> b(static_cast<std::size_t>(mlp.biases[l].size()));
    for (std::size_t j = 0; j < b.size(); ++j) b[j] = static_cast<float>(mlp.biases[l](j));
    out.biases.push_back(std::move(b));
  }
  return out;
}

std::vector<float> MlpF32::forward(std::span<const float> x) const {
  if (static_cast<int>(x.size()) != dims.front()) {
    throw Error(ErrorCode::DimensionMismatch, "network expects " + std::to_string(dims.front()) + " inputs");
  }
  std::vector<float> current(x.begin(), x.end());
  const std::size_t L = weights.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto out = static_cast<std::size_t>(dims[l + 1]);
    std::vector<float> next(biases[l]);
    for (std::size_t k = 0; k < in; ++k) {
      const float xk = current[k];
      const float* w = weights[l].data() + k * out;
      for (std::size_t c = 0; c < out; ++c) next[c] += xk * w[c];
    }
    if (l + 1 < L) {
      for (auto& v : next) v = v / (1.0f + std::exp(-v));
    }
    current = std::move(next);
  }
  return current;
}

}  // namespace scate
