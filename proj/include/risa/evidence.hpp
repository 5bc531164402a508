#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "risa/linalg.hpp"

namespace risa::evidence {

// Smallest uncertainty admitted when mapping an opinion back to Dirichlet
// parameters; u == 0 is reachable only in exact-arithmetic corner cases.
inline constexpr double kMinUncertainty = 1e-12;

struct DirichletParams {
  Vector alpha;
  double strength = 0.0;  // S = sum(alpha)
  Vector prior;           // a_k; all-ones unless configured otherwise
};

// Subjective opinion: per-class belief masses plus one uncertainty mass.
// Invariant: b_k >= 0, u >= 0, u + sum(b) == 1.
struct Opinion {
  Vector b;
  double u = 1.0;

  std::size_t num_classes() const { return b.size(); }
};

// The opinion carrying no evidence at all: b = 0, u = 1.
Opinion vacuous(std::size_t num_classes);

bool is_valid(const Opinion& op, double tol = 1e-9);

// Maps non-negative evidence to Dirichlet parameters and the matching opinion:
//   alpha_k = e_k + a_k,  S = sum(alpha),  b_k = e_k / S,  u = sum(a) / S.
// The default all-ones prior gives the usual u = K / S.
std::pair<DirichletParams, Opinion> evidence_to_opinion(const Vector& e, std::size_t num_classes);
std::pair<DirichletParams, Opinion> evidence_to_opinion(const Vector& e, const Vector& prior);

// One pairwise combination step. The operands are retained: every partial
// derivative of the fused opinion is a linear form in them.
struct PairTape {
  Opinion lhs;
  Opinion rhs;
};

// Inter-class conflict mass C = sum_{i != j} b1_i * b2_j.
double conflict_mass(const Opinion& m1, const Opinion& m2);

// Reduced Yager combination: conflict mass is reassigned to the fused
// uncertainty instead of being renormalized away:
//   b_k = b1_k b2_k + b1_k u2 + b2_k u1,   u = u1 u2 + C.
// Mass conservation (u + sum b == 1) is an algebraic identity of this map.
Opinion fuse_pair(const Opinion& m1, const Opinion& m2, PairTape* tape = nullptr);

struct FusionResult {
  Opinion fused;
  std::vector<Opinion> inputs;
  std::vector<PairTape> steps;  // steps[i] combined the running fold with inputs[i+1]
  bool consumed = false;        // a fusion tape backs at most one backprop call
};

// Left-to-right fold in party-index order; a single opinion is returned as is.
FusionResult fuse_all(const std::vector<Opinion>& opinions);

// S = K / max(u, kMinUncertainty), alpha_k = b_k * S + 1.
DirichletParams opinion_to_dirichlet(const Opinion& op);

// Predicted class probabilities p_k = alpha_k / S and uncertainty K / S.
std::pair<Vector, double> predict(const DirichletParams& params);

// L = sum_k y_k (log S - log alpha_k) for one-hot y, together with
// dL/dalpha_j = 1/S - [j == true_class] / alpha_true.
std::pair<double, Vector> evidential_loss(const DirichletParams& params, std::size_t true_class);

// Gradient of some scalar loss with respect to an opinion.
struct OpinionGrad {
  Vector db;
  double du = 0.0;
};

// Pulls dL/dalpha back through alpha_k = b_k * S + 1, S = K / u.
OpinionGrad loss_grad_to_opinion(const Opinion& fused, const Vector& dl_dalpha);

// Backprop through one pairwise combination step.
std::pair<OpinionGrad, OpinionGrad> pair_backward(const PairTape& tape, const OpinionGrad& dfused);

// Pulls dL/d(opinion) back to dL/d(evidence) through the inverse of
// evidence_to_opinion (the opinion determines its evidence exactly).
Vector opinion_grad_to_evidence(const Opinion& op, const OpinionGrad& grad, double prior_sum);

// Backprop through an entire fuse_all call, all the way to each party's
// evidence head input. Consumes the tape; reuse raises StateError.
std::vector<Vector> backprop_fusion(FusionResult& fusion, const OpinionGrad& dfused,
                                    double prior_sum);

// Same, stopping at the per-party opinions (exposed for gradient tests).
std::vector<OpinionGrad> backprop_to_opinions(const FusionResult& fusion,
                                              const OpinionGrad& dfused);

}  // namespace risa::evidence
