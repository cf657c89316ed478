#include "rloss/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rloss/errors.hpp"

namespace rloss {

double default_precision(double beta) { return 1e-3 * std::sqrt(beta); }

BisectionResult constrained_max_bisect(const LinearClass& cls, const Eigen::MatrixXd& data_gram,
                                       const StateAction& z, double beta, double alpha,
                                       std::vector<BisectionTrace>* trace) {
  if (!(beta > 0.0)) throw InvalidInput("bisection needs beta > 0");
  if (!(alpha > 0.0)) alpha = default_precision(beta);
  const double hp1 = cls.horizon() + 1.0;
  const double target = cls.gap_ceiling();
  const double radius = 2.0 * cls.ball_bound();
  const Eigen::VectorXd phi = cls.feature(z);

  BisectionResult out;
  // argmin_g ||g||^2_Z + (w / 2) (g(z) - target)^2 over the ball of F - F.
  auto oracle = [&](double w) {
    Eigen::MatrixXd system = data_gram;
    system.selfadjointView<Eigen::Lower>().rankUpdate(phi, 0.5 * w);
    system.triangularView<Eigen::StrictlyUpper>() = system.transpose();
    const Eigen::VectorXd rhs = (0.5 * w * target) * phi;
    ++out.oracle_calls;
    return cls.solve_ball(system, rhs, radius);
  };
  auto norm_of = [&](const Eigen::VectorXd& u) { return u.dot(data_gram * u); };

  double w_low = 0.0;
  double w_high = beta / (alpha * hp1);
  out.feasible_direction = Eigen::VectorXd::Zero(phi.size());
  out.feasible_value = 0.0;
  out.feasible_norm_sq = 0.0;
  out.direction = oracle(w_high);
  out.value = out.direction.dot(phi);
  out.norm_sq = norm_of(out.direction);
  out.w_high = w_high;
  out.w_gap = alpha * beta / (8.0 * hp1 * hp1 * hp1);
  if (trace) trace->push_back({0, w_high, out.value, out.norm_sq});

  const int cap = static_cast<int>(std::ceil(std::log2(out.w_high / out.w_gap))) + 5;
  while (std::abs(out.value - out.feasible_value) > alpha && std::abs(w_high - w_low) > out.w_gap) {
    if (out.iterations >= cap) throw ConvergenceError("bisection exceeded its iteration cap");
    ++out.iterations;
    const double w = 0.5 * (w_high + w_low);
    Eigen::VectorXd g = oracle(w);
    const double value = g.dot(phi);
    const double norm = norm_of(g);
    if (trace) trace->push_back({out.iterations, w, value, norm});
    if (norm > beta) {
      w_high = w;
      out.direction = std::move(g);
      out.value = value;
      out.norm_sq = norm;
    } else {
      w_low = w;
      out.feasible_direction = std::move(g);
      out.feasible_value = value;
      out.feasible_norm_sq = norm;
    }
  }
  return out;
}

BisectionResult constrained_max_bisect(const LinearClass& cls, const ConstrainedMaxProblem& problem,
                                       std::vector<BisectionTrace>* trace) {
  static const WeightedSet kEmpty;
  const WeightedSet& data = problem.data ? *problem.data : kEmpty;
  return constrained_max_bisect(cls, cls.gram(data), problem.point, problem.beta, problem.alpha,
                                trace);
}

// ------------------------------------------------------------- finite

FinitePairNorms::FinitePairNorms(const FiniteClass& cls, const WeightedSet& data)
    : cls_(&cls), dist_(cls.size() * cls.size(), 0.0) {
  // Collapse the weighted set onto its support columns.
  std::vector<double> col_weight(cls.columns(), 0.0);
  for (const auto& [z, weight] : data) {
    if (z.state < 0 || z.state >= cls.num_states() || z.action < 0 || z.action >= cls.num_actions()) {
      throw InvalidInput("state-action pair outside the class domain");
    }
    col_weight[static_cast<std::size_t>(z.state) * cls.num_actions() + z.action] += weight;
  }
  std::vector<std::size_t> support;
  for (std::size_t j = 0; j < col_weight.size(); ++j) {
    if (col_weight[j] > 0.0) support.push_back(j);
  }
  const std::size_t n = cls.size();
  const std::size_t m = support.size();
  std::vector<double> sub(n * m);
  std::vector<double> weights(m);
  for (std::size_t j = 0; j < m; ++j) weights[j] = col_weight[support[j]];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) sub[i * m + j] = cls.values()[i * cls.columns() + support[j]];
  }
  kernels::pairwise_sq_distances(sub, n, m, weights, dist_);
}

std::vector<double> FinitePairNorms::at(const StateAction& z) const {
  std::vector<double> out(cls_->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cls_->value(i, z.state, z.action);
  return out;
}

kernels::PairMax FinitePairNorms::constrained_max(const StateAction& z, double beta) const {
  return kernels::constrained_pair_max(at(z), dist_, beta);
}

double FinitePairNorms::sensitivity(const StateAction& z, double beta, double cap) const {
  return kernels::sensitivity_sup(at(z), dist_, cap, beta);
}

kernels::PairMax constrained_max_enumerate(const FiniteClass& cls,
                                           const ConstrainedMaxProblem& problem) {
  static const WeightedSet kEmpty;
  if (problem.beta < 0.0) throw InvalidInput("constraint level must be nonnegative");
  FinitePairNorms norms(cls, problem.data ? *problem.data : kEmpty);
  return norms.constrained_max(problem.point, problem.beta);
}

// ------------------------------------------------------------- linear summary

LinearDataSummary::LinearDataSummary(const LinearClass& cls, const WeightedSet& data)
    : cls_(&cls), gram_(cls.gram(data)) {}

double LinearDataSummary::constrained_max(const StateAction& z, double beta, OracleCounts* counts,
                                          std::vector<BisectionTrace>* trace) const {
  const double ceiling = cls_->gap_ceiling();
  if (beta > 0.0) {
    const auto res = constrained_max_bisect(*cls_, gram_, z, beta, 0.0, trace);
    if (counts) counts->small += res.oracle_calls;
    return std::clamp(res.value, 0.0, ceiling);
  }
  if (beta < 0.0) throw InvalidInput("constraint level must be nonnegative");
  // beta == 0: feasible differences vanish on the data, i.e. live in the
  // null space of the Gram matrix.
  if (counts) ++counts->small;
  const Eigen::VectorXd phi = cls_->feature(z);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_);
  const double tol = 1e-10 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd projected = Eigen::VectorXd::Zero(phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    if (eig.eigenvalues()[i] <= tol) {
      const auto v = eig.eigenvectors().col(i);
      projected += v.dot(phi) * v;
    }
  }
  return std::min(2.0 * cls_->ball_bound() * projected.norm(), ceiling);
}

double constrained_max(const FunctionClass& cls, const ConstrainedMaxProblem& problem,
                       OracleCounts* counts) {
  static const WeightedSet kEmpty;
  const WeightedSet& data = problem.data ? *problem.data : kEmpty;
  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    if (counts) ++counts->small;
    return constrained_max_enumerate(*finite, problem).value;
  }
  const auto& linear = dynamic_cast<const LinearClass&>(cls);
  if (problem.beta > 0.0) {
    const auto res = constrained_max_bisect(linear, linear.gram(data), problem.point, problem.beta,
                                            problem.alpha);
    if (counts) counts->small += res.oracle_calls;
    return std::clamp(res.value, 0.0, cls.gap_ceiling());
  }
  return LinearDataSummary(linear, data).constrained_max(problem.point, problem.beta, counts);
}

int dyadic_levels(double total_steps, int horizon) {
  const double cap = total_steps * (horizon + 1.0) * (horizon + 1.0);
  return static_cast<int>(std::ceil(std::log2(std::max(cap, 1.0)))) + 1;
}

namespace {

double ratio(double value, double norm_sq, double cap, double beta) {
  return value * value / (std::min(norm_sq, cap) + beta);
}

}  // namespace

double estimate_sensitivity(const FunctionClass& cls, const WeightedSet& data,
                            const StateAction& z, double beta, double total_steps,
                            OracleCounts* counts) {
  if (!(beta >= 1.0)) throw InvalidInput("sensitivity needs beta >= 1");
  const int hz = cls.horizon();
  const double cap = total_steps * (hz + 1.0) * (hz + 1.0);
  const int levels = dyadic_levels(total_steps, hz);
  double best = 0.0;

  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    FinitePairNorms norms(*finite, data);
    for (int j = 0; j < levels; ++j) {
      const auto pm = norms.constrained_max(z, std::ldexp(1.0, j));
      if (counts) ++counts->small;
      best = std::max(best, ratio(pm.value, pm.norm_sq, cap, beta));
    }
    const auto pm = norms.constrained_max(z, std::numeric_limits<double>::infinity());
    if (counts) ++counts->small;
    best = std::max(best, ratio(pm.value, pm.norm_sq, cap, beta));
    return std::min(best, 1.0);
  }

  const auto& linear = dynamic_cast<const LinearClass&>(cls);
  const Eigen::MatrixXd gram = linear.gram(data);
  for (int j = 0; j < levels; ++j) {
    const auto res = constrained_max_bisect(linear, gram, z, std::ldexp(1.0, j), 0.0);
    if (counts) counts->small += res.oracle_calls;
    best = std::max(best, ratio(std::min(res.value, cls.gap_ceiling()), res.norm_sq, cap, beta));
    best = std::max(best, ratio(res.feasible_value, res.feasible_norm_sq, cap, beta));
  }
  // Unconstrained level: the largest reachable gap along phi(z).
  const Eigen::VectorXd phi = linear.feature(z);
  const double phi_norm = phi.norm();
  if (phi_norm > 0.0) {
    const double top = std::min(cls.gap_ceiling(), 2.0 * linear.ball_bound() * phi_norm);
    const Eigen::VectorXd u = (top / (phi_norm * phi_norm)) * phi;
    if (counts) ++counts->small;
    best = std::max(best, ratio(top, u.dot(gram * u), cap, beta));
  }
  return std::min(best, 1.0);
}

double exact_sensitivity(const FiniteClass& cls, const WeightedSet& data, const StateAction& z,
                         double beta, double total_steps) {
  if (!(beta >= 1.0)) throw InvalidInput("sensitivity needs beta >= 1");
  const double cap = total_steps * (cls.horizon() + 1.0) * (cls.horizon() + 1.0);
  return FinitePairNorms(cls, data).sensitivity(z, beta, cap);
}

}  // namespace rloss
