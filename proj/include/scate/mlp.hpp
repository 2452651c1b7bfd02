#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scate/types.hpp"

namespace scate {

// Fully connected network: SiLU on hidden layers, identity on the output layer.
// weights[l] is (dims[l] x dims[l+1]); a batch row x maps to x * W + b.
struct Mlp {
  std::vector<int> dims;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  std::int64_t param_count() const;
};

// Same shapes as the network; used for gradients and optimizer moments.
struct MlpParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpParams zeros_like(const Mlp& mlp);
};

struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] = input, activations[l+1] = layer l output
  std::vector<Matrix> pre;          // pre-activation of each layer
};

// dims = [d_in, hidden..., d_out], e.g. [d, w, w, P] for width w and depth 2.
std::vector<int> mlp_dims(int d_in, int width, int depth, int d_out);

double silu(double z);
double silu_grad(double z);

Mlp init_mlp(const std::vector<int>& dims, std::uint64_t seed);
Matrix forward(const Mlp& mlp, const Matrix& X);
Matrix forward(const Mlp& mlp, const Matrix& X, ForwardCache& cache);
Matrix forward_serial(const Mlp& mlp, const Matrix& X);

// Reverse-mode gradients of sum(output_grad .* forward(X)) with respect to the parameters.
MlpParams backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_grad);
MlpParams backward(const Mlp& mlp, const Matrix& X, const Matrix& output_grad);

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_model(const Mlp& mlp, double lr = 1e-3);
};

void adam_step(Mlp& mlp, const MlpParams& grads, AdamState& state);

// Single-precision copy used for deployed inference; every arithmetic step is in float.
struct MlpF32 {
  std::vector<int> dims;
  std::vector<std::vector<float>> weights;  // row-major (fan_in x fan_out)
  std::vector<std::vector<float>> biases;

  static MlpF32 from(const Mlp& mlp);
  std::vector<float> forward(std::span<const float> x) const;
};

}  // namespace scate
