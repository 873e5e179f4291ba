#pragma once

/**
 * Minimal feed-forward network with hand-derived reverse-mode gradients.
 *
 * Hidden layers use SiLU, the output layer is linear. Dropout is inverted
 * (train-mode activations are scaled by 1/(1-rate)) and applied to hidden
 * activations only. All math is in 64-bit floats.
 *
 * Checkpoint format (see save_checkpoint): an 8-byte little-endian header
 * length, a JSON header describing every net (dimensions, dropout, optimizer
 * state) plus a caller-supplied "extra" document, then one flat
 * little-endian float64 array holding parameters and Adam moments in header
 * order. Round-trips bit-exactly.
 */

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "declab/rng.hpp"

namespace declab::net {

struct MlpSpec {
  /// Layer widths including input and output, e.g. {3, 32, 32, 4}.
  std::vector<int> dims;
  double dropout = 0.0;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int num_layers() const { return static_cast<int>(dims.size()) - 1; }
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

/// Per-call activation record consumed by Mlp::backward.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;    // input to each layer
  std::vector<std::vector<double>> preacts;   // W x + b per layer
  std::vector<std::vector<double>> dropout;   // post-activation multipliers
  bool train_mode = false;
};

class Mlp {
 public:
  /// Glorot-uniform initialization: U(+-sqrt(6 / (fan_in + fan_out))).
  Mlp(MlpSpec spec, rng::Stream& init);
  Mlp(MlpSpec spec, std::vector<double> params);

  const MlpSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.input_dim(); }
  int output_dim() const { return spec_.output_dim(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  size_t param_count() const { return params_.size(); }

  /// Deterministic eval-mode forward (dropout off, no rng).
  std::vector<double> forward(std::span<const double> x) const;

  /// Forward with cache. In train mode dropout masks are drawn from
  /// `dropout_rng` (required when dropout > 0).
  std::vector<double> forward(std::span<const double> x, ForwardCache& cache,
                              bool train_mode,
                              rng::Stream* dropout_rng = nullptr) const;

  /// Exact gradients of the cached forward. Accumulates (+=) parameter
  /// gradients into `param_grads` (same layout as params()); optionally
  /// writes the gradient with respect to the input.
  void backward(const ForwardCache& cache, std::span<const double> out_grad,
                std::span<double> param_grads,
                std::vector<double>* input_grad = nullptr) const;

  static size_t param_count_for(const MlpSpec& spec);

 private:
  // Layout: for each layer, W (out x in, row-major) then b (out).
  size_t weight_offset(int layer) const;
  size_t bias_offset(int layer) const;

  MlpSpec spec_;
  std::vector<double> params_;
  std::vector<size_t> offsets_;  // per-layer start of W; offsets_.back() = total
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Multiplicative learning-rate factor applied once per epoch boundary.
  double lr_decay = 0.97;
};

/// Bias-corrected Adam with exponential per-epoch learning-rate decay.
class AdamState {
 public:
  AdamState(size_t param_count, AdamConfig config);

  /// One update. Throws TrainingDivergedError on non-finite gradients.
  void step(std::span<double> params, std::span<const double> grads);

  /// Declares an epoch boundary: current lr *= lr_decay.
  void advance_epoch() { ++epochs_; }

  double current_lr() const;
  std::int64_t step_count() const { return steps_; }
  int epochs() const { return epochs_; }
  const AdamConfig& config() const { return config_; }

  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::int64_t steps, int epochs) {
    steps_ = steps;
    epochs_ = epochs;
  }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::int64_t steps_ = 0;
  int epochs_ = 0;
};

// ---- checkpoint io ---------------------------------------------------------

struct CheckpointEntry {
  std::string name;
  const Mlp* mlp = nullptr;
  const AdamState* optimizer = nullptr;  // optional
};

struct LoadedNet {
  std::string name;
  MlpSpec spec;
  std::vector<double> params;
  bool has_optimizer = false;
  AdamConfig optimizer_config;
  std::vector<double> first_moment, second_moment;
  std::int64_t steps = 0;
  int epochs = 0;
};

struct LoadedCheckpoint {
  std::vector<LoadedNet> nets;
  std::string extra;  // caller-supplied JSON document, verbatim
};

void save_checkpoint(std::ostream& out,
                     std::span<const CheckpointEntry> entries,
                     const std::string& extra_json);
LoadedCheckpoint load_checkpoint(std::istream& in);

void save_checkpoint_file(const std::string& path,
                          std::span<const CheckpointEntry> entries,
                          const std::string& extra_json);
LoadedCheckpoint load_checkpoint_file(const std::string& path);

}  // namespace declab::net
