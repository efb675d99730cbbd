#include "loctomo/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

#include "loctomo/forward.hpp"

namespace loctomo {

double NetConfig::effective_pe_scale() const {
  return pe_scale > 0.0 ? pe_scale : static_cast<double>(pe_dim) / std::numbers::pi;
}

void NetConfig::validate() const {
  if (patch_size < 1 || patch_size % 2 == 0)
    throw InvalidArgument("patch_size must be a positive odd integer");
  if (feature_dim < 1 || hidden < 1 || depth < 0)
    throw InvalidArgument("feature_dim, hidden must be >= 1 and depth >= 0");
  if (pe_dim < 2 || pe_dim % 2 != 0) throw InvalidArgument("pe_dim must be even and >= 2");
  if (out_dim != 1 && out_dim != 8) throw InvalidArgument("out_dim must be 1 or 8");
  if (!(pe_scale >= 0.0) || !std::isfinite(pe_scale)) throw InvalidArgument("pe_scale must be finite and >= 0");
}

SliceMlpParams::SliceMlpParams(const NetConfig& config) : config_(config) {
  config_.validate();
  const int p = config_.patch_size, h = config_.depth;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    tensors_.push_back({std::move(name), rows, cols, offset});
    offset += tensors_.back().size();
  };
  auto add_mlp = [&](const std::string& prefix, int in, int out) {
    add(prefix + ".W_in", config_.hidden, in);
    for (int l = 1; l <= h; ++l) add(prefix + ".W_" + std::to_string(l), config_.hidden, config_.hidden);
    add(prefix + ".W_out", out, config_.hidden);
  };
  for (int s = 0; s < p; ++s) {
    const std::string prefix = "slice" + std::to_string(s);
    add(prefix + ".embed", config_.pe_dim, p);
    add_mlp(prefix + ".trunk", config_.pe_dim, config_.feature_dim);
  }
  add_mlp("combiner", p * config_.feature_dim, config_.out_dim);
  values_.assign(offset, 0.0);
}

MatMap SliceMlpParams::tensor(std::size_t i) {
  const auto& t = tensors_[i];
  return MatMap(values_.data() + t.offset, t.rows, t.cols);
}

ConstMatMap SliceMlpParams::tensor(std::size_t i) const {
  const auto& t = tensors_[i];
  return ConstMatMap(values_.data() + t.offset, t.rows, t.cols);
}

std::size_t SliceMlpParams::embed_index(int slice) const {
  return static_cast<std::size_t>(slice) * static_cast<std::size_t>(layers_per_mlp() + 1);
}

std::size_t SliceMlpParams::trunk_index(int slice, int layer) const {
  return embed_index(slice) + 1 + static_cast<std::size_t>(layer);
}

std::size_t SliceMlpParams::combiner_index(int layer) const {
  return static_cast<std::size_t>(config_.patch_size) * static_cast<std::size_t>(layers_per_mlp() + 1) +
         static_cast<std::size_t>(layer);
}

void SliceMlpParams::init_kaiming(std::uint64_t seed) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    const auto& t = tensors_[i];
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / t.cols));
    for (std::size_t j = 0; j < t.size(); ++j) values_[t.offset + j] = g(rng);
  }
}

Mat positional_encoding(std::span<const double> angles, int dim, double scale) {
  if (dim < 2 || dim % 2 != 0) throw InvalidArgument("positional encoding dim must be even");
  const int half = dim / 2;
  Mat pe(static_cast<Eigen::Index>(angles.size()), dim);
  for (int j = 0; j < half; ++j) {
    const double w = std::pow(10000.0, -2.0 * j / dim);
    for (std::size_t k = 0; k < angles.size(); ++k) {
      const double a = angles[k] * scale * w;
      pe(static_cast<Eigen::Index>(k), j) = std::sin(a);
      pe(static_cast<Eigen::Index>(k), half + j) = std::cos(a);
    }
  }
  return pe;
}

namespace {

// Activations of one MLP; acts[l] is the input of layer l.
struct MlpTrace {
  std::vector<Mat> acts;
};

Mat mlp_forward(const SliceMlpParams& params, std::size_t first, int layers, const Mat& x,
                MlpTrace* trace) {
  Mat a = x;
  for (int l = 0; l < layers; ++l) {
    if (trace) trace->acts.push_back(a);
    Mat z = params.tensor(first + l) * a;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

// Returns d(loss)/d(input) and accumulates weight gradients into grad.
Mat mlp_backward(const SliceMlpParams& params, std::size_t first, int layers,
                 const MlpTrace& trace, Mat d_out, std::span<double> grad) {
  Mat d = std::move(d_out);
  for (int l = layers - 1; l >= 0; --l) {
    const auto& info = params.tensors()[first + l];
    MatMap g(grad.data() + info.offset, info.rows, info.cols);
    g.noalias() += d * trace.acts[l].transpose();
    Mat d_in = params.tensor(first + l).transpose() * d;
    if (l > 0) d_in = d_in.cwiseProduct((trace.acts[l].array() > 0.0).cast<double>().matrix());
    d = std::move(d_in);
  }
  return d;
}

// Column view of slice s of a stack: P x N, stride P*P between tilts.
using SliceMap = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

SliceMap slice_view(const PatchStack& stack, int s) {
  const int p = stack.patch_size;
  return SliceMap(stack.data.data() + static_cast<std::size_t>(s) * p, p,
                  static_cast<Eigen::Index>(stack.count()), Eigen::OuterStride<>(p * p));
}

// Per-sample embedding state kept for the backward pass.
struct EmbedTrace {
  // mean/sum pooling: M_s = Z_s PE * norm (P x pe), one per slice
  std::vector<Mat> moments;
  // max pooling: winning tilt index per (slice, channel)
  std::vector<std::vector<int>> argmax;
};

struct EncodingCache {
  std::vector<double> angles;
  Mat pe;
  bool valid = false;

  const Mat& get(std::span<const double> a, int dim, double scale) {
    if (!valid || angles.size() != a.size() || !std::equal(a.begin(), a.end(), angles.begin())) {
      angles.assign(a.begin(), a.end());
      pe = positional_encoding(a, dim, scale);
      valid = true;
    }
    return pe;
  }
};

double pool_norm(Pooling pooling, std::size_t n) {
  return pooling == Pooling::mean ? 1.0 / static_cast<double>(n) : 1.0;
}

// Fills column b of pooled[s] for all slices.
void embed_sample(const SliceMlpParams& params, const PatchStack& stack, const Mat& pe,
                  std::vector<Mat>& pooled, Eigen::Index b, EmbedTrace* trace) {
  const NetConfig& cfg = params.config();
  const int p = cfg.patch_size;
  const std::size_t n = stack.count();
  if (trace) {
    if (cfg.pooling == Pooling::max)
      trace->argmax.assign(static_cast<std::size_t>(p), std::vector<int>(static_cast<std::size_t>(cfg.pe_dim)));
    else
      trace->moments.resize(static_cast<std::size_t>(p));
  }
  for (int s = 0; s < p; ++s) {
    const auto z = slice_view(stack, s);
    const auto embed = params.tensor(params.embed_index(s));
    if (cfg.pooling == Pooling::max) {
      const Mat y = (embed * z).cwiseProduct(pe.transpose());  // pe x N
      for (int c = 0; c < cfg.pe_dim; ++c) {
        Eigen::Index best = 0;
        pooled[s](c, b) = y.row(c).maxCoeff(&best);
        if (trace) trace->argmax[s][c] = static_cast<int>(best);
      }
    } else {
      Mat m = (z * pe) * pool_norm(cfg.pooling, n);  // P x pe
      pooled[s].col(b) = (embed.transpose().cwiseProduct(m)).colwise().sum().transpose();
      if (trace) trace->moments[s] = std::move(m);
    }
  }
}

void check_stack(const NetConfig& cfg, const PatchStack& stack) {
  if (stack.patch_size != cfg.patch_size)
    throw InvalidArgument("patch stack size " + std::to_string(stack.patch_size) +
                          " does not match network patch size " + std::to_string(cfg.patch_size));
  if (stack.count() == 0) throw InvalidArgument("patch stack has no tilts");
  stack.validate();
}

// Tilt order sorted by angle, ties broken by the data. Pooling sums are
// evaluated in this order so jointly permuted inputs give bit-identical
// results despite non-associative floating-point addition.
template <typename Less>
std::vector<std::size_t> canonical_order(std::size_t n, Less less) {
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), less);
  return order;
}

bool is_identity(const std::vector<std::size_t>& order) {
  for (std::size_t k = 0; k < order.size(); ++k)
    if (order[k] != k) return false;
  return true;
}

// Returns nullptr when the stack is already canonical.
std::unique_ptr<PatchStack> canonicalize(const PatchStack& st) {
  const std::size_t stride = st.slice_stride();
  const auto order = canonical_order(st.count(), [&](std::size_t a, std::size_t b) {
    if (st.angles[a] != st.angles[b]) return st.angles[a] < st.angles[b];
    const double* da = st.data.data() + a * stride;
    const double* db = st.data.data() + b * stride;
    return std::lexicographical_compare(da, da + stride, db, db + stride);
  });
  if (is_identity(order)) return nullptr;
  auto out = std::make_unique<PatchStack>();
  out->patch_size = st.patch_size;
  out->angles.reserve(st.count());
  out->data.reserve(st.data.size());
  for (std::size_t k : order) {
    out->angles.push_back(st.angles[k]);
    out->data.insert(out->data.end(), st.data.begin() + static_cast<std::ptrdiff_t>(k * stride),
                     st.data.begin() + static_cast<std::ptrdiff_t>((k + 1) * stride));
  }
  return out;
}

struct CanonicalBatch {
  std::vector<std::unique_ptr<PatchStack>> owned;
  std::vector<const PatchStack*> stacks;

  explicit CanonicalBatch(std::span<const PatchStack* const> batch) {
    owned.resize(batch.size());
    stacks.resize(batch.size());
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < batch.size(); ++b) {
      owned[b] = canonicalize(*batch[b]);
      stacks[b] = owned[b] ? owned[b].get() : batch[b];
    }
  }
};

struct BatchTrace {
  std::vector<const PatchStack*> inputs;    // canonical order
  std::vector<EmbedTrace> embeds;           // per sample
  std::vector<Mat> pooled;                  // per slice, pe x B
  std::vector<MlpTrace> trunks;             // per slice
  MlpTrace combiner;
  std::vector<std::unique_ptr<PatchStack>> owned;
};

Mat forward_impl(const SliceMlpParams& params, std::span<const PatchStack* const> batch,
                 BatchTrace* trace) {
  const NetConfig& cfg = params.config();
  const int p = cfg.patch_size;
  const auto bsz = static_cast<Eigen::Index>(batch.size());
  for (const PatchStack* st : batch) check_stack(cfg, *st);

  CanonicalBatch canon(batch);
  std::vector<Mat> pooled(static_cast<std::size_t>(p), Mat(cfg.pe_dim, bsz));
  if (trace) trace->embeds.resize(batch.size());
  const double scale = cfg.effective_pe_scale();

#pragma omp parallel
  {
    EncodingCache cache;
#pragma omp for schedule(static)
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const auto& st = *canon.stacks[static_cast<std::size_t>(b)];
      const Mat& pe = cache.get(st.angles, cfg.pe_dim, scale);
      embed_sample(params, st, pe, pooled, b, trace ? &trace->embeds[static_cast<std::size_t>(b)] : nullptr);
    }
  }

  const int layers = params.layers_per_mlp();
  Mat concat(static_cast<Eigen::Index>(p) * cfg.feature_dim, bsz);
  if (trace) trace->trunks.assign(static_cast<std::size_t>(p), MlpTrace{});
#pragma omp parallel for schedule(static)
  for (int s = 0; s < p; ++s) {
    Mat h = mlp_forward(params, params.trunk_index(s, 0), layers, pooled[s],
                        trace ? &trace->trunks[s] : nullptr);
    concat.middleRows(static_cast<Eigen::Index>(s) * cfg.feature_dim, cfg.feature_dim) = h;
  }
  Mat out = mlp_forward(params, params.combiner_index(0), layers, concat,
                        trace ? &trace->combiner : nullptr);
  if (trace) {
    trace->pooled = std::move(pooled);
    trace->inputs = canon.stacks;
    trace->owned = std::move(canon.owned);
  }
  return out;
}

}  // namespace

Eigen::VectorXd set_mlp_forward(const SliceMlpParams& params, int slice,
                                const Eigen::Ref<const Mat>& slice_data,
                                std::span<const double> angles) {
  const NetConfig& cfg = params.config();
  if (slice < 0 || slice >= cfg.patch_size) throw InvalidArgument("slice index out of range");
  if (angles.empty()) throw InvalidArgument("set block needs at least one tilt");
  if (slice_data.rows() != cfg.patch_size || slice_data.cols() != static_cast<Eigen::Index>(angles.size()))
    throw InvalidArgument("slice must be P x N");
  const auto order = canonical_order(angles.size(), [&](std::size_t a, std::size_t b) {
    if (angles[a] != angles[b]) return angles[a] < angles[b];
    const auto ca = slice_data.col(static_cast<Eigen::Index>(a));
    const auto cb = slice_data.col(static_cast<Eigen::Index>(b));
    return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
  });
  std::vector<double> sorted_angles(angles.size());
  Mat sorted(slice_data.rows(), slice_data.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_angles[k] = angles[order[k]];
    sorted.col(static_cast<Eigen::Index>(k)) = slice_data.col(static_cast<Eigen::Index>(order[k]));
  }
  const Mat pe = positional_encoding(sorted_angles, cfg.pe_dim, cfg.effective_pe_scale());
  const Mat y = (params.tensor(params.embed_index(slice)) * sorted).cwiseProduct(pe.transpose());
  Mat pooled(cfg.pe_dim, 1);
  if (cfg.pooling == Pooling::max)
    pooled.col(0) = y.rowwise().maxCoeff();
  else
    pooled.col(0) = y.rowwise().sum() * pool_norm(cfg.pooling, angles.size());
  return mlp_forward(params, params.trunk_index(slice, 0), params.layers_per_mlp(), pooled, nullptr).col(0);
}

Mat slice_mlp_forward_batch(const SliceMlpParams& params, std::span<const PatchStack> batch) {
  if (batch.empty()) return Mat(params.config().out_dim, 0);
  std::vector<const PatchStack*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& st : batch) ptrs.push_back(&st);
  return forward_impl(params, ptrs, nullptr);
}

Eigen::VectorXd slice_mlp_forward(const SliceMlpParams& params, const PatchStack& stack) {
  const PatchStack* ptr = &stack;
  return forward_impl(params, std::span<const PatchStack* const>(&ptr, 1), nullptr).col(0);
}

LossAndGrad loss_and_grad(const SliceMlpParams& params, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw InvalidArgument("loss_and_grad needs a non-empty batch");
  const NetConfig& cfg = params.config();
  const int p = cfg.patch_size;
  const auto bsz = static_cast<Eigen::Index>(batch.size());

  std::vector<const PatchStack*> inputs;
  inputs.reserve(batch.size());
  Mat target(cfg.out_dim, bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const auto& sample = batch[static_cast<std::size_t>(b)];
    if (sample.target.size() != cfg.out_dim) throw InvalidArgument("target size does not match out_dim");
    inputs.push_back(&sample.input);
    target.col(b) = sample.target;
  }

  BatchTrace trace;
  const Mat out = forward_impl(params, inputs, &trace);
  if (!out.allFinite()) throw DivergenceError("non-finite network output", -1);

  const Mat resid = out - target;
  const double denom = static_cast<double>(bsz) * cfg.out_dim;
  LossAndGrad result;
  result.loss = resid.squaredNorm() / denom;
  result.grad.assign(params.parameter_count(), 0.0);
  std::span<double> grad(result.grad);

  const int layers = params.layers_per_mlp();
  const Mat d_concat =
      mlp_backward(params, params.combiner_index(0), layers, trace.combiner, resid * (2.0 / denom), grad);

  std::vector<Mat> d_pooled(static_cast<std::size_t>(p));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < p; ++s) {
    d_pooled[s] = mlp_backward(params, params.trunk_index(s, 0), layers, trace.trunks[s],
                               d_concat.middleRows(static_cast<Eigen::Index>(s) * cfg.feature_dim, cfg.feature_dim),
                               grad);
  }

  // Embedding gradients, reduced over samples in order per slice.
  const double scale = cfg.effective_pe_scale();
#pragma omp parallel
  {
    EncodingCache cache;
#pragma omp for schedule(static)
    for (int s = 0; s < p; ++s) {
      const auto& info = params.tensors()[params.embed_index(s)];
      MatMap g(grad.data() + info.offset, info.rows, info.cols);
      for (Eigen::Index b = 0; b < bsz; ++b) {
        const auto& embed_trace = trace.embeds[static_cast<std::size_t>(b)];
        const auto dg = d_pooled[s].col(b);
        if (cfg.pooling == Pooling::max) {
          const auto& st = *trace.inputs[static_cast<std::size_t>(b)];
          const Mat& pe = cache.get(st.angles, cfg.pe_dim, scale);
          const auto z = slice_view(st, s);
          for (int c = 0; c < cfg.pe_dim; ++c) {
            const int k = embed_trace.argmax[s][c];
            g.row(c) += (dg(c) * pe(k, c)) * z.col(k).transpose();
          }
        } else {
          // g_s[c] = sum_i E[c,i] M[i,c]  =>  dE[c,i] = dg[c] M[i,c]
          g.noalias() += dg.asDiagonal() * embed_trace.moments[s].transpose();
        }
      }
    }
  }
  return result;
}

SliceMlpParams fbp_witness_params(const NetConfig& config, double scale) {
  if (config.hidden < 2 || config.pe_dim < 8 || config.pooling != Pooling::mean)
    throw InvalidArgument("witness needs hidden >= 2, pe_dim >= 8 and mean pooling");
  SliceMlpParams params(config);
  const int p = config.patch_size, mid = p / 2, half = config.pe_dim / 2;
  const int layers = params.layers_per_mlp();

  // Two slowest cosine channels combined so their quadratic terms cancel:
  // a1 cos(w1 t) + a2 cos(w2 t) = 1 + O((w t)^4) with a1 + a2 = 1.
  const double pe_scale = config.effective_pe_scale();
  const int j1 = half - 1, j2 = half - 2;
  const double w1 = pe_scale * std::pow(10000.0, -2.0 * j1 / config.pe_dim);
  const double w2 = pe_scale * std::pow(10000.0, -2.0 * j2 / config.pe_dim);
  const double a1 = (w2 * w2) / (w2 * w2 - w1 * w1);
  const double a2 = -(w1 * w1) / (w2 * w2 - w1 * w1);

  auto embed = params.tensor(params.embed_index(mid));
  embed(half + j1, mid) = a1;
  embed(half + j2, mid) = a2;

  // Signed pass-through: x = relu(x) - relu(-x) carried on two hidden units.
  auto pass_through = [&](std::size_t first, int in_a, int in_b, int out_row, double out_scale) {
    auto w_in = params.tensor(first);
    w_in(0, in_a) = 1.0;
    w_in(1, in_a) = -1.0;
    if (in_b >= 0) {
      w_in(0, in_b) = 1.0;
      w_in(1, in_b) = -1.0;
    }
    for (int l = 1; l < layers - 1; ++l) {
      auto w = params.tensor(first + l);
      w(0, 0) = 1.0;
      w(1, 1) = 1.0;
    }
    auto w_out = params.tensor(first + layers - 1);
    w_out(out_row, 0) = out_scale;
    w_out(out_row, 1) = -out_scale;
  };
  pass_through(params.trunk_index(mid, 0), half + j1, half + j2, 0, 1.0);
  // Wavelet-mode witnesses carry the sum on output 0 only.
  pass_through(params.combiner_index(0), mid * config.feature_dim, -1, 0, scale);
  return params;
}

}  // namespace loctomo
