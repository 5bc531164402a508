#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "risa/linalg.hpp"

namespace risa::nn {

enum class Activation { linear, relu, softplus, exponential };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation act);

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
  Activation act = Activation::linear;
};

// Intermediate values of one forward pass, required for backprop.
struct Trace {
  Vector input;
  std::vector<Vector> pre;   // pre-activation per layer
  std::vector<Vector> post;  // post-activation per layer; post.back() is the output
};

// Parameter gradients mirroring a DenseNet layer for layer, plus the gradient
// with respect to the network input.
struct GradientTape {
  std::vector<Matrix> dw;
  std::vector<Vector> db;
  Vector dinput;

  void add(const GradientTape& other);
  void scale(double s);
  bool finite() const;
};

// Fully connected net with value semantics; no shared state between copies.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  // Seeded init: weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
  static DenseNet make(std::size_t input_dim, const std::vector<std::size_t>& widths,
                       const std::vector<Activation>& acts, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Pure evaluation; does not touch recorded state.
  Vector evaluate(const Vector& x) const;

  // Evaluation returning the trace consumed by backward_at.
  std::pair<Vector, Trace> forward_traced(const Vector& x) const;

  // Single-sample convenience API: records the trace on the net.
  Vector forward(const Vector& x);

  // Backprop through the trace recorded by the last forward().
  GradientTape backward(const Vector& upstream);

  // Backprop through an explicit trace.
  GradientTape backward_at(const Trace& trace, const Vector& upstream) const;

  GradientTape zero_tape() const;

 private:
  std::vector<DenseLayer> layers_;
  std::optional<Trace> last_trace_;
};

// p <- p - lr * grad for every parameter. Rejects non-finite gradients.
void sgd_step(DenseNet& net, const GradientTape& tape, double lr);

// SGD with optional momentum. momentum == 0 degenerates to plain sgd_step.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

  void step(DenseNet& net, const GradientTape& tape);

  double lr() const { return lr_; }

 private:
  double lr_;
  double momentum_;
  std::optional<GradientTape> velocity_;
};

// Binary parameter checkpoint; round-trips bit-exactly.
void save_checkpoint(const DenseNet& net, const std::string& path);
DenseNet load_checkpoint(const std::string& path);

}  // namespace risa::nn
