#pragma once

// Bias-free slice-wise Deep-Sets network.
//
// For a patch stack p (N tilts x P rows x P cols) and tilt angles theta:
//   slice s   : the P x N matrix of row s of every patch (rows run along the
//               tilt axis, so each slice is a constant-y cut)
//   set block : e_k = E_s p_{s,k} (.) PE(theta_k); g_s = pool_k e_k;
//               h_s = MLP_s(g_s) in R^F
//   output    : MLP_bar([h_1, ..., h_P]) in R^out_dim
// Every MLP is W_out ReLU(W_H ReLU(... ReLU(W_in x))) with no biases, so the
// whole map is positively 1-homogeneous in p.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loctomo/geometry.hpp"

namespace loctomo {

using Mat = Eigen::MatrixXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

enum class Pooling { mean, sum, max };

struct NetConfig {
  int patch_size = 21;
  int feature_dim = 128;  // F
  int hidden = 128;
  int depth = 5;          // H, hidden-to-hidden layers per MLP
  int pe_dim = 128;       // embed width == encoding width
  int out_dim = 1;        // 1 = pixel mode, 8 = wavelet mode
  double pe_scale = 0.0;  // angle multiplier; 0 selects pe_dim / pi
  Pooling pooling = Pooling::mean;

  double effective_pe_scale() const;
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Every learnable scalar lives in one flat buffer; tensors are column-major
// out x in views into it, in declared order:
//   for s in [0, P): embed_s, trunk_s.W_in, trunk_s.W_1..W_H, trunk_s.W_out
//   combiner.W_in, combiner.W_1..W_H, combiner.W_out
class SliceMlpParams {
 public:
  SliceMlpParams() = default;
  explicit SliceMlpParams(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t parameter_count() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  MatMap tensor(std::size_t i);
  ConstMatMap tensor(std::size_t i) const;

  std::size_t embed_index(int slice) const;
  // layer 0 = W_in, 1..H = hidden, H + 1 = W_out
  std::size_t trunk_index(int slice, int layer) const;
  std::size_t combiner_index(int layer) const;
  int layers_per_mlp() const { return config_.depth + 2; }

  // Kaiming fan-in normal initialisation.
  void init_kaiming(std::uint64_t seed);

 private:
  NetConfig config_{};
  std::vector<TensorInfo> tensors_;
  std::vector<double> values_;
};

// N x dim encoding; row k = [sin(a_k w_j)]_j ++ [cos(a_k w_j)]_j with
// a_k = theta_k * scale and w_j = 10000^(-2j/dim).
Mat positional_encoding(std::span<const double> angles, int dim, double scale);

// One set block on a P x N slice.
Eigen::VectorXd set_mlp_forward(const SliceMlpParams& params, int slice,
                                const Eigen::Ref<const Mat>& slice_data,
                                std::span<const double> angles);

// out_dim x B outputs for a batch of patch stacks (tilt counts may differ).
Mat slice_mlp_forward_batch(const SliceMlpParams& params, std::span<const PatchStack> batch);

Eigen::VectorXd slice_mlp_forward(const SliceMlpParams& params, const PatchStack& stack);

struct TrainingSample {
  PatchStack input;
  Eigen::VectorXd target;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as SliceMlpParams::values()
};

// Mean squared error over batch and output components, with reverse-mode
// gradients. Throws DivergenceError (step -1) on non-finite outputs.
LossAndGrad loss_and_grad(const SliceMlpParams& params, std::span<const TrainingSample> batch);

// Parameters that make the network return the weighted sum of the patch
// centres over tilts (scale * mean for mean pooling): the network form of
// backprojection. Requires hidden >= 2, pe_dim >= 4, mean pooling.
SliceMlpParams fbp_witness_params(const NetConfig& config, double scale);

}  // namespace loctomo
