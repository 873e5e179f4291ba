#include "declab/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "declab/errors.hpp"

namespace declab::net {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

void MlpSpec::validate() const {
  if (dims.size() < 2) {
    throw std::invalid_argument("MlpSpec needs at least input and output dims");
  }
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("MlpSpec dims must be >= 1");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
}

size_t Mlp::param_count_for(const MlpSpec& spec) {
  size_t n = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    n += static_cast<size_t>(spec.dims[l]) * spec.dims[l + 1] + spec.dims[l + 1];
  }
  return n;
}

Mlp::Mlp(MlpSpec spec, rng::Stream& init) : spec_(std::move(spec)) {
  spec_.validate();
  params_.resize(param_count_for(spec_));
  offsets_.reserve(spec_.num_layers() + 1);
  size_t off = 0;
  for (int l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(off);
    int fan_in = spec_.dims[l];
    int fan_out = spec_.dims[l + 1];
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    size_t w_count = static_cast<size_t>(fan_in) * fan_out;
    for (size_t i = 0; i < w_count; ++i) {
      params_[off + i] = (2.0 * init.next_double() - 1.0) * bound;
    }
    // biases start at zero
    off += w_count + static_cast<size_t>(fan_out);
  }
  offsets_.push_back(off);
}

Mlp::Mlp(MlpSpec spec, std::vector<double> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != param_count_for(spec_)) {
    throw std::invalid_argument("parameter vector does not match MlpSpec");
  }
  size_t off = 0;
  for (int l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(off);
    off += static_cast<size_t>(spec_.dims[l]) * spec_.dims[l + 1] +
           spec_.dims[l + 1];
  }
  offsets_.push_back(off);
}

size_t Mlp::weight_offset(int layer) const { return offsets_[layer]; }

size_t Mlp::bias_offset(int layer) const {
  return offsets_[layer] +
         static_cast<size_t>(spec_.dims[layer]) * spec_.dims[layer + 1];
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  ForwardCache cache;
  return forward(x, cache, /*train_mode=*/false, nullptr);
}

std::vector<double> Mlp::forward(std::span<const double> x, ForwardCache& cache,
                                 bool train_mode,
                                 rng::Stream* dropout_rng) const {
  if (static_cast<int>(x.size()) != spec_.input_dim()) {
    throw std::invalid_argument("input dimension mismatch");
  }
  if (train_mode && spec_.dropout > 0.0 && dropout_rng == nullptr) {
    throw std::invalid_argument("train-mode dropout requires an rng stream");
  }
  const int layers = spec_.num_layers();
  cache.inputs.assign(layers, {});
  cache.preacts.assign(layers, {});
  cache.dropout.assign(layers, {});
  cache.train_mode = train_mode;

  std::vector<double> activation(x.begin(), x.end());
  for (int l = 0; l < layers; ++l) {
    const int in = spec_.dims[l];
    const int out = spec_.dims[l + 1];
    cache.inputs[l] = activation;
    std::vector<double> z(static_cast<size_t>(out), 0.0);
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * activation[i];
      z[static_cast<size_t>(o)] = acc;
    }
    cache.preacts[l] = z;

    const bool hidden = l + 1 < layers;
    std::vector<double> a(static_cast<size_t>(out));
    for (int o = 0; o < out; ++o) {
      a[static_cast<size_t>(o)] = hidden ? silu(z[static_cast<size_t>(o)])
                                         : z[static_cast<size_t>(o)];
    }
    if (hidden && train_mode && spec_.dropout > 0.0) {
      std::vector<double> mask(static_cast<size_t>(out));
      const double keep = 1.0 - spec_.dropout;
      for (int o = 0; o < out; ++o) {
        mask[static_cast<size_t>(o)] =
            dropout_rng->next_double() < keep ? 1.0 / keep : 0.0;
        a[static_cast<size_t>(o)] *= mask[static_cast<size_t>(o)];
      }
      cache.dropout[l] = std::move(mask);
    }
    activation = std::move(a);
  }
  return activation;
}

void Mlp::backward(const ForwardCache& cache, std::span<const double> out_grad,
                   std::span<double> param_grads,
                   std::vector<double>* input_grad) const {
  const int layers = spec_.num_layers();
  if (static_cast<int>(cache.inputs.size()) != layers) {
    throw std::logic_error("backward called with a stale or foreign cache");
  }
  if (static_cast<int>(out_grad.size()) != spec_.output_dim() ||
      param_grads.size() != params_.size()) {
    throw std::invalid_argument("gradient buffer shape mismatch");
  }

  std::vector<double> delta(out_grad.begin(), out_grad.end());
  for (int l = layers - 1; l >= 0; --l) {
    const int in = spec_.dims[l];
    const int out = spec_.dims[l + 1];
    const bool hidden = l + 1 < layers;

    if (hidden) {
      if (!cache.dropout[l].empty()) {
        for (int o = 0; o < out; ++o) {
          delta[static_cast<size_t>(o)] *= cache.dropout[l][static_cast<size_t>(o)];
        }
      }
      for (int o = 0; o < out; ++o) {
        delta[static_cast<size_t>(o)] *=
            silu_grad(cache.preacts[l][static_cast<size_t>(o)]);
      }
    }

    double* wg = param_grads.data() + weight_offset(l);
    double* bg = param_grads.data() + bias_offset(l);
    const double* w = params_.data() + weight_offset(l);
    const std::vector<double>& layer_in = cache.inputs[l];

    std::vector<double> prev_delta(static_cast<size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[static_cast<size_t>(o)];
      bg[o] += d;
      double* wrow = wg + static_cast<size_t>(o) * in;
      const double* row = w + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        wrow[i] += d * layer_in[static_cast<size_t>(i)];
        prev_delta[static_cast<size_t>(i)] += d * row[i];
      }
    }
    delta = std::move(prev_delta);
  }
  if (input_grad) *input_grad = std::move(delta);
}

AdamState::AdamState(size_t param_count, AdamConfig config)
    : config_(config),
      m_(param_count, 0.0),
      v_(param_count, 0.0) {}

double AdamState::current_lr() const {
  return config_.learning_rate * std::pow(config_.lr_decay, epochs_);
}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam buffer shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw TrainingDivergedError("non-finite gradient in Adam step");
    }
  }
  ++steps_;
  const double lr = current_lr();
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t i = 0; i < m_.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    if (!std::isfinite(params[i])) {
      throw TrainingDivergedError("non-finite parameter after Adam step");
    }
  }
}

// ---- checkpoint io ---------------------------------------------------------

namespace {

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in, size_t count) {
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return values;
}

}  // namespace

void save_checkpoint(std::ostream& out,
                     std::span<const CheckpointEntry> entries,
                     const std::string& extra_json) {
  json header;
  header["format"] = "declab-checkpoint-v1";
  header["nets"] = json::array();
  for (const auto& e : entries) {
    json n;
    n["name"] = e.name;
    n["dims"] = e.mlp->spec().dims;
    n["activation"] = "silu";  // hidden layers; output is linear
    n["dropout"] = e.mlp->spec().dropout;
    n["param_count"] = e.mlp->param_count();
    if (e.optimizer) {
      n["optimizer"] = {
          {"learning_rate", e.optimizer->config().learning_rate},
          {"beta1", e.optimizer->config().beta1},
          {"beta2", e.optimizer->config().beta2},
          {"epsilon", e.optimizer->config().epsilon},
          {"lr_decay", e.optimizer->config().lr_decay},
          {"steps", e.optimizer->step_count()},
          {"epochs", e.optimizer->epochs()},
      };
    }
    header["nets"].push_back(std::move(n));
  }
  if (!extra_json.empty()) {
    header["extra"] = json::parse(extra_json);
  }
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : entries) {
    write_doubles(out, e.mlp->params());
    if (e.optimizer) {
      write_doubles(out, e.optimizer->first_moment());
      write_doubles(out, e.optimizer->second_moment());
    }
  }
  if (!out) throw std::runtime_error("failed to write checkpoint stream");
}

LoadedCheckpoint load_checkpoint(std::istream& in) {
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw std::runtime_error("checkpoint header missing");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint header truncated");
  json header = json::parse(text);
  if (header.value("format", "") != "declab-checkpoint-v1") {
    throw std::runtime_error("unrecognized checkpoint format");
  }

  LoadedCheckpoint result;
  for (const auto& n : header.at("nets")) {
    LoadedNet net;
    net.name = n.at("name").get<std::string>();
    net.spec.dims = n.at("dims").get<std::vector<int>>();
    net.spec.dropout = n.at("dropout").get<double>();
    const size_t count = n.at("param_count").get<size_t>();
    net.params = read_doubles(in, count);
    if (n.contains("optimizer")) {
      const auto& o = n.at("optimizer");
      net.has_optimizer = true;
      net.optimizer_config.learning_rate = o.at("learning_rate").get<double>();
      net.optimizer_config.beta1 = o.at("beta1").get<double>();
      net.optimizer_config.beta2 = o.at("beta2").get<double>();
      net.optimizer_config.epsilon = o.at("epsilon").get<double>();
      net.optimizer_config.lr_decay = o.at("lr_decay").get<double>();
      net.steps = o.at("steps").get<std::int64_t>();
      net.epochs = o.at("epochs").get<int>();
      net.first_moment = read_doubles(in, count);
      net.second_moment = read_doubles(in, count);
    }
    result.nets.push_back(std::move(net));
  }
  if (header.contains("extra")) {
    result.extra = header.at("extra").dump();
  }
  return result;
}

void save_checkpoint_file(const std::string& path,
                          std::span<const CheckpointEntry> entries,
                          const std::string& extra_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_checkpoint(out, entries, extra_json);
}

LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace declab::net
