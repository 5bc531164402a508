#include "risa/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "risa/error.hpp"
#include "risa/rng.hpp"

namespace risa::nn {

namespace {

constexpr std::uint64_t kCheckpointMagic = 0x5249534e45543031ULL;  // "RISNET01"

double apply_act(Activation act, double z) {
  switch (act) {
    case Activation::linear:
      return z;
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::softplus:
      // log1p(exp(z)) with the usual overflow guard
      return z > 30.0 ? z : std::log1p(std::exp(z));
    case Activation::exponential:
      return std::exp(z < 30.0 ? z : 30.0);
  }
  return z;
}

double act_derivative(Activation act, double z, double value) {
  switch (act) {
    case Activation::linear:
      return 1.0;
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::softplus:
      return 1.0 / (1.0 + std::exp(-z));
    case Activation::exponential:
      return z < 30.0 ? value : 0.0;
  }
  return 1.0;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "softplus") return Activation::softplus;
  if (name == "exp" || name == "exponential") return Activation::exponential;
  throw ConfigError("unknown activation: " + name);
}

const char* to_string(Activation act) {
  switch (act) {
    case Activation::linear:
      return "linear";
    case Activation::relu:
      return "relu";
    case Activation::softplus:
      return "softplus";
    case Activation::exponential:
      return "exp";
  }
  return "?";
}

void GradientTape::add(const GradientTape& other) {
  if (dw.size() != other.dw.size()) throw ContractViolation("GradientTape::add: layer count mismatch");
  for (std::size_t l = 0; l < dw.size(); ++l) {
    for (std::size_t i = 0; i < dw[l].data.size(); ++i) dw[l].data[i] += other.dw[l].data[i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += other.db[l][i];
  }
  for (std::size_t i = 0; i < dinput.size(); ++i) dinput[i] += other.dinput[i];
}

void GradientTape::scale(double s) {
  for (auto& m : dw)
    for (double& x : m.data) x *= s;
  for (auto& v : db)
    for (double& x : v) x *= s;
  for (double& x : dinput) x *= s;
}

bool GradientTape::finite() const {
  for (const auto& m : dw)
    if (!all_finite(m)) return false;
  for (const auto& v : db)
    if (!all_finite(v)) return false;
  return all_finite(dinput);
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractViolation("DenseNet: at least one layer required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.w.rows != layer.b.size())
      throw ContractViolation("DenseNet: bias size does not match layer output");
    if (l > 0 && layers_[l - 1].w.rows != layer.w.cols)
      throw ContractViolation("DenseNet: consecutive layer dimensions do not chain");
    if (!all_finite(layer.w) || !all_finite(layer.b))
      throw ContractViolation("DenseNet: non-finite parameters");
  }
}

DenseNet DenseNet::make(std::size_t input_dim, const std::vector<std::size_t>& widths,
                        const std::vector<Activation>& acts, std::uint64_t seed) {
  if (widths.empty() || widths.size() != acts.size())
    throw ContractViolation("DenseNet::make: widths/acts mismatch");
  auto rng = std::mt19937_64(seed);
  std::vector<DenseLayer> layers;
  layers.reserve(widths.size());
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t fan_out = widths[l];
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-r, r);
    DenseLayer layer;
    layer.w = Matrix(fan_out, fan_in);
    for (double& x : layer.w.data) x = dist(rng);
    layer.b = Vector(fan_out, 0.0);
    layer.act = acts[l];
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return DenseNet(std::move(layers));
}

std::size_t DenseNet::input_dim() const { return layers_.front().w.cols; }
std::size_t DenseNet::output_dim() const { return layers_.back().w.rows; }

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.data.size() + l.b.size();
  return n;
}

Vector DenseNet::evaluate(const Vector& x) const {
  if (x.size() != input_dim()) throw ContractViolation("DenseNet::evaluate: input dim mismatch");
  if (!all_finite(x)) throw ContractViolation("DenseNet::evaluate: non-finite input");
  Vector cur = x;
  for (const auto& layer : layers_) {
    Vector next(layer.w.rows);
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      double z = layer.b[i];
      const double* wrow = &layer.w.data[i * layer.w.cols];
      for (std::size_t j = 0; j < layer.w.cols; ++j) z += wrow[j] * cur[j];
      next[i] = apply_act(layer.act, z);
    }
    cur = std::move(next);
  }
  return cur;
}

std::pair<Vector, Trace> DenseNet::forward_traced(const Vector& x) const {
  if (x.size() != input_dim()) throw ContractViolation("DenseNet::forward: input dim mismatch");
  if (!all_finite(x)) throw ContractViolation("DenseNet::forward: non-finite input");
  Trace trace;
  trace.input = x;
  trace.pre.reserve(layers_.size());
  trace.post.reserve(layers_.size());
  const Vector* cur = &x;
  for (const auto& layer : layers_) {
    Vector z(layer.w.rows);
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      double acc = layer.b[i];
      const double* wrow = &layer.w.data[i * layer.w.cols];
      for (std::size_t j = 0; j < layer.w.cols; ++j) acc += wrow[j] * (*cur)[j];
      z[i] = acc;
    }
    Vector a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = apply_act(layer.act, z[i]);
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(a));
    cur = &trace.post.back();
  }
  return {trace.post.back(), trace};
}

Vector DenseNet::forward(const Vector& x) {
  auto [out, trace] = forward_traced(x);
  last_trace_ = std::move(trace);
  return out;
}

GradientTape DenseNet::backward(const Vector& upstream) {
  if (!last_trace_) throw StateError("DenseNet::backward: no recorded forward pass");
  return backward_at(*last_trace_, upstream);
}

GradientTape DenseNet::backward_at(const Trace& trace, const Vector& upstream) const {
  if (upstream.size() != output_dim())
    throw ContractViolation("DenseNet::backward: upstream dim mismatch");
  if (trace.pre.size() != layers_.size())
    throw ContractViolation("DenseNet::backward: trace does not match net");

  GradientTape tape = zero_tape();
  Vector delta(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    const auto& layer = layers_.back();
    delta[i] = upstream[i] * act_derivative(layer.act, trace.pre.back()[i], trace.post.back()[i]);
  }
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const Vector& in = li == 0 ? trace.input : trace.post[li - 1];
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      tape.db[li][i] = delta[i];
      double* dwrow = &tape.dw[li].data[i * layer.w.cols];
      for (std::size_t j = 0; j < layer.w.cols; ++j) dwrow[j] = delta[i] * in[j];
    }
    Vector prev(layer.w.cols, 0.0);
    for (std::size_t j = 0; j < layer.w.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < layer.w.rows; ++i) acc += layer.w(i, j) * delta[i];
      prev[j] = acc;
    }
    if (li > 0) {
      const auto& below = layers_[li - 1];
      for (std::size_t j = 0; j < prev.size(); ++j)
        prev[j] *= act_derivative(below.act, trace.pre[li - 1][j], trace.post[li - 1][j]);
    }
    delta = std::move(prev);
  }
  tape.dinput = std::move(delta);
  return tape;
}

GradientTape DenseNet::zero_tape() const {
  GradientTape tape;
  tape.dw.reserve(layers_.size());
  tape.db.reserve(layers_.size());
  for (const auto& l : layers_) {
    tape.dw.emplace_back(l.w.rows, l.w.cols);
    tape.db.emplace_back(l.b.size(), 0.0);
  }
  tape.dinput = Vector(input_dim(), 0.0);
  return tape;
}

void sgd_step(DenseNet& net, const GradientTape& tape, double lr) {
  if (lr < 0.0) throw ContractViolation("sgd_step: negative learning rate");
  if (tape.dw.size() != net.layers().size())
    throw ContractViolation("sgd_step: tape does not match net");
  if (!tape.finite()) throw DivergenceError("sgd_step: non-finite gradient");
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].w.data.size(); ++i)
      layers[l].w.data[i] -= lr * tape.dw[l].data[i];
    for (std::size_t i = 0; i < layers[l].b.size(); ++i)
      layers[l].b[i] -= lr * tape.db[l][i];
  }
}

void SgdOptimizer::step(DenseNet& net, const GradientTape& tape) {
  if (momentum_ == 0.0) {
    sgd_step(net, tape, lr_);
    return;
  }
  if (!velocity_) velocity_ = net.zero_tape();
  velocity_->scale(momentum_);
  velocity_->add(tape);
  sgd_step(net, *velocity_, lr_);
}

void save_checkpoint(const DenseNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  put_u64(kCheckpointMagic);
  put_u64(net.layers().size());
  for (const auto& layer : net.layers()) {
    put_u64(static_cast<std::uint64_t>(layer.act));
    put_u64(layer.w.rows);
    put_u64(layer.w.cols);
    out.write(reinterpret_cast<const char*>(layer.w.data.data()),
              static_cast<std::streamsize>(layer.w.data.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(layer.b.data()),
              static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

DenseNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  auto get_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  if (get_u64() != kCheckpointMagic) throw DataError("bad checkpoint magic: " + path);
  const std::uint64_t n_layers = get_u64();
  std::vector<DenseLayer> layers;
  layers.reserve(n_layers);
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    DenseLayer layer;
    layer.act = static_cast<Activation>(get_u64());
    const std::uint64_t rows = get_u64();
    const std::uint64_t cols = get_u64();
    layer.w = Matrix(rows, cols);
    in.read(reinterpret_cast<char*>(layer.w.data.data()),
            static_cast<std::streamsize>(layer.w.data.size() * sizeof(double)));
    layer.b = Vector(rows);
    in.read(reinterpret_cast<char*>(layer.b.data()),
            static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    layers.push_back(std::move(layer));
  }
  if (!in) throw DataError("truncated checkpoint: " + path);
  return DenseNet(std::move(layers));
}

}  // namespace risa::nn
