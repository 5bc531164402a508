#include "risa/evidence.hpp"

#include <cmath>

#include "risa/error.hpp"

namespace risa::evidence {

namespace {

void check_same_classes(const Opinion& m1, const Opinion& m2) {
  if (m1.num_classes() != m2.num_classes())
    throw ContractViolation("fuse: opinions have different class counts");
}

}  // namespace

Opinion vacuous(std::size_t num_classes) {
  return Opinion{Vector(num_classes, 0.0), 1.0};
}

bool is_valid(const Opinion& op, double tol) {
  if (op.b.empty() || !all_finite(op.b) || !std::isfinite(op.u)) return false;
  double sum = op.u;
  for (double bk : op.b) {
    if (bk < -tol) return false;
    sum += bk;
  }
  return op.u >= -tol && std::abs(sum - 1.0) <= tol;
}

std::pair<DirichletParams, Opinion> evidence_to_opinion(const Vector& e, std::size_t num_classes) {
  return evidence_to_opinion(e, Vector(num_classes, 1.0));
}

std::pair<DirichletParams, Opinion> evidence_to_opinion(const Vector& e, const Vector& prior) {
  const std::size_t k = prior.size();
  if (k < 2) throw ContractViolation("evidence_to_opinion: need at least two classes");
  if (e.size() != k) throw ContractViolation("evidence_to_opinion: evidence size mismatch");
  if (!all_finite(e)) throw ContractViolation("evidence_to_opinion: non-finite evidence");
  double prior_sum = 0.0;
  for (double a : prior) {
    if (!(a > 0.0)) throw ContractViolation("evidence_to_opinion: prior must be positive");
    prior_sum += a;
  }
  DirichletParams params;
  params.alpha.resize(k);
  params.prior = prior;
  double strength = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (e[i] < 0.0) throw ContractViolation("evidence_to_opinion: negative evidence");
    params.alpha[i] = e[i] + prior[i];
    strength += params.alpha[i];
  }
  params.strength = strength;
  Opinion op;
  op.b.resize(k);
  for (std::size_t i = 0; i < k; ++i) op.b[i] = e[i] / strength;
  op.u = prior_sum / strength;
  return {params, op};
}

double conflict_mass(const Opinion& m1, const Opinion& m2) {
  check_same_classes(m1, m2);
  double c = 0.0;
  for (std::size_t i = 0; i < m1.b.size(); ++i)
    for (std::size_t j = 0; j < m2.b.size(); ++j)
      if (i != j) c += m1.b[i] * m2.b[j];
  return c;
}

Opinion fuse_pair(const Opinion& m1, const Opinion& m2, PairTape* tape) {
  check_same_classes(m1, m2);
  if (!is_valid(m1) || !is_valid(m2))
    throw ContractViolation("fuse_pair: invalid operand opinion");
  const std::size_t k = m1.num_classes();
  Opinion fused;
  fused.b.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    fused.b[i] = m1.b[i] * m2.b[i] + m1.b[i] * m2.u + m2.b[i] * m1.u;
  fused.u = m1.u * m2.u + conflict_mass(m1, m2);
  // mass conservation is an algebraic identity of the rule
  if (!is_valid(fused, 1e-9))
    throw ContractViolation("fuse_pair: fused opinion lost mass conservation");
  if (tape) {
    tape->lhs = m1;
    tape->rhs = m2;
  }
  return fused;
}

FusionResult fuse_all(const std::vector<Opinion>& opinions) {
  if (opinions.empty()) throw ContractViolation("fuse_all: empty opinion list");
  FusionResult result;
  result.inputs = opinions;
  result.fused = opinions.front();
  result.steps.reserve(opinions.size() - 1);
  for (std::size_t i = 1; i < opinions.size(); ++i) {
    PairTape tape;
    result.fused = fuse_pair(result.fused, opinions[i], &tape);
    result.steps.push_back(std::move(tape));
  }
  return result;
}

DirichletParams opinion_to_dirichlet(const Opinion& op) {
  if (!is_valid(op)) throw ContractViolation("opinion_to_dirichlet: invalid opinion");
  const std::size_t k = op.num_classes();
  const double u = std::max(op.u, kMinUncertainty);
  const double strength = static_cast<double>(k) / u;
  DirichletParams params;
  params.alpha.resize(k);
  params.prior = Vector(k, 1.0);
  for (std::size_t i = 0; i < k; ++i) params.alpha[i] = op.b[i] * strength + 1.0;
  params.strength = strength;
  return params;
}

std::pair<Vector, double> predict(const DirichletParams& params) {
  const std::size_t k = params.alpha.size();
  if (k == 0 || params.strength <= 0.0)
    throw ContractViolation("predict: invalid Dirichlet parameters");
  Vector p(k);
  for (std::size_t i = 0; i < k; ++i) p[i] = params.alpha[i] / params.strength;
  double prior_sum = 0.0;
  if (params.prior.size() == k)
    for (double a : params.prior) prior_sum += a;
  else
    prior_sum = static_cast<double>(k);
  return {p, prior_sum / params.strength};
}

std::pair<double, Vector> evidential_loss(const DirichletParams& params, std::size_t true_class) {
  const std::size_t k = params.alpha.size();
  if (true_class >= k) throw ContractViolation("evidential_loss: class index out of range");
  const double loss = std::log(params.strength) - std::log(params.alpha[true_class]);
  Vector grad(k, 1.0 / params.strength);
  grad[true_class] -= 1.0 / params.alpha[true_class];
  return {loss, grad};
}

OpinionGrad loss_grad_to_opinion(const Opinion& fused, const Vector& dl_dalpha) {
  const std::size_t k = fused.num_classes();
  if (dl_dalpha.size() != k) throw ContractViolation("loss_grad_to_opinion: size mismatch");
  const double u = std::max(fused.u, kMinUncertainty);
  const double strength = static_cast<double>(k) / u;
  OpinionGrad grad;
  grad.db.resize(k);
  for (std::size_t i = 0; i < k; ++i) grad.db[i] = dl_dalpha[i] * strength;
  // dS/du = -K/u^2; zero below the clamp
  if (fused.u >= kMinUncertainty) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += dl_dalpha[i] * fused.b[i];
    grad.du = -acc * static_cast<double>(k) / (u * u);
  }
  return grad;
}

std::pair<OpinionGrad, OpinionGrad> pair_backward(const PairTape& tape, const OpinionGrad& dfused) {
  const Opinion& m1 = tape.lhs;
  const Opinion& m2 = tape.rhs;
  const std::size_t k = m1.num_classes();
  if (dfused.db.size() != k) throw ContractViolation("pair_backward: gradient size mismatch");
  double b1_sum = 0.0, b2_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    b1_sum += m1.b[i];
    b2_sum += m2.b[i];
  }
  OpinionGrad d1, d2;
  d1.db.resize(k);
  d2.db.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    // d b_i / d b1_i = b2_i + u2; d u / d b1_i = sum(b2) - b2_i (conflict term)
    d1.db[i] = dfused.db[i] * (m2.b[i] + m2.u) + dfused.du * (b2_sum - m2.b[i]);
    d2.db[i] = dfused.db[i] * (m1.b[i] + m1.u) + dfused.du * (b1_sum - m1.b[i]);
    d1.du += dfused.db[i] * m2.b[i];
    d2.du += dfused.db[i] * m1.b[i];
  }
  d1.du += dfused.du * m2.u;
  d2.du += dfused.du * m1.u;
  return {d1, d2};
}

Vector opinion_grad_to_evidence(const Opinion& op, const OpinionGrad& grad, double prior_sum) {
  const std::size_t k = op.num_classes();
  if (grad.db.size() != k) throw ContractViolation("opinion_grad_to_evidence: size mismatch");
  if (!(prior_sum > 0.0)) throw ContractViolation("opinion_grad_to_evidence: bad prior sum");
  // The opinion determines its evidence: S = sum(a)/u, e_k = b_k * S. Through
  // b_k = e_k/S and u = sum(a)/S,
  //   dL/de_j = (g_bj - sum_k g_bk * b_k - g_u * u) / S.
  const double u = std::max(op.u, kMinUncertainty);
  const double strength = prior_sum / u;
  double mixed = 0.0;
  for (std::size_t i = 0; i < k; ++i) mixed += grad.db[i] * op.b[i];
  mixed += grad.du * op.u;
  Vector de(k);
  for (std::size_t i = 0; i < k; ++i) de[i] = (grad.db[i] - mixed) / strength;
  return de;
}

std::vector<OpinionGrad> backprop_to_opinions(const FusionResult& fusion,
                                              const OpinionGrad& dfused) {
  const std::size_t m = fusion.inputs.size();
  if (m == 0) throw ContractViolation("backprop_to_opinions: empty fusion");
  std::vector<OpinionGrad> grads(m);
  OpinionGrad acc = dfused;
  for (std::size_t i = m; i-- > 1;) {
    auto [lhs, rhs] = pair_backward(fusion.steps[i - 1], acc);
    grads[i] = std::move(rhs);
    acc = std::move(lhs);
  }
  grads[0] = std::move(acc);
  return grads;
}

std::vector<Vector> backprop_fusion(FusionResult& fusion, const OpinionGrad& dfused,
                                    double prior_sum) {
  if (fusion.consumed) throw StateError("backprop_fusion: tape already consumed");
  fusion.consumed = true;
  auto opinion_grads = backprop_to_opinions(fusion, dfused);
  std::vector<Vector> evidence_grads;
  evidence_grads.reserve(opinion_grads.size());
  for (std::size_t i = 0; i < opinion_grads.size(); ++i)
    evidence_grads.push_back(
        opinion_grad_to_evidence(fusion.inputs[i], opinion_grads[i], prior_sum));
  return evidence_grads;
}

}  // namespace risa::evidence
