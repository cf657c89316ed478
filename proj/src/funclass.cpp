#include "rloss/funclass.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "rloss/errors.hpp"

namespace rloss {

bool same_function(const FunctionHandle& lhs, const FunctionHandle& rhs) {
  if (lhs.index() != rhs.index()) return false;
  if (const auto* l = std::get_if<FiniteHandle>(&lhs)) {
    return l->index == std::get<FiniteHandle>(rhs).index;
  }
  const auto& a = std::get<LinearHandle>(lhs).weights;
  const auto& b = std::get<LinearHandle>(rhs).weights;
  return a.size() == b.size() && a == b;
}

FunctionClass::FunctionClass(int horizon, int num_states, int num_actions)
    : horizon_(horizon), num_states_(num_states), num_actions_(num_actions) {
  if (horizon < 1 || num_states < 1 || num_actions < 1) {
    throw InvalidInput("function class needs H, S, A >= 1");
  }
}

void FunctionClass::check_point(const StateAction& z) const {
  if (z.state < 0 || z.state >= num_states_ || z.action < 0 || z.action >= num_actions_) {
    throw InvalidInput("state-action pair outside the class domain");
  }
}

double FunctionClass::distance_norm_sq(const FunctionHandle& f1, const FunctionHandle& f2,
                                       const WeightedSet& data) const {
  double total = 0.0;
  for (const auto& [z, weight] : data) {
    const double gap = evaluate(f1, z) - evaluate(f2, z);
    total += weight * gap * gap;
  }
  return total;
}

// ---------------------------------------------------------------- linear

LinearClass::LinearClass(Eigen::MatrixXd features, int num_states, int num_actions, int horizon,
                         double ball_bound, double ridge, std::size_t cover_cap)
    : FunctionClass(horizon, num_states, num_actions),
      features_(std::move(features)),
      ball_bound_(ball_bound),
      ridge_(ridge),
      cover_cap_(cover_cap) {
  if (features_.rows() != static_cast<Eigen::Index>(num_states) * num_actions) {
    throw InvalidInput("linear class needs one feature row per (s, a)");
  }
  if (features_.cols() < 1) throw InvalidInput("linear class needs d >= 1");
  if (ridge_ < 0.0) throw InvalidInput("ridge must be nonnegative");
  if (ball_bound_ < 0.0) ball_bound_ = 2.0 * horizon * std::sqrt(static_cast<double>(dim()));
  if (ball_bound_ <= 0.0) throw InvalidInput("ball bound must be positive");
  feature_sup_norm_ = features_.rowwise().norm().maxCoeff();
}

Eigen::VectorXd LinearClass::feature(const StateAction& z) const {
  if (!z.features.empty()) {
    if (z.features.size() != static_cast<std::size_t>(dim())) {
      throw InvalidInput("explicit feature vector has the wrong dimension");
    }
    return Eigen::Map<const Eigen::VectorXd>(z.features.data(), dim());
  }
  check_point(z);
  return features_.row(static_cast<Eigen::Index>(z.state) * num_actions() + z.action).transpose();
}

double LinearClass::raw(const Eigen::VectorXd& w, const StateAction& z) const {
  if (!z.features.empty()) return w.dot(feature(z));
  check_point(z);
  return features_.row(static_cast<Eigen::Index>(z.state) * num_actions() + z.action).dot(w);
}

double LinearClass::evaluate(const FunctionHandle& f, const StateAction& z) const {
  const auto* h = std::get_if<LinearHandle>(&f);
  if (h == nullptr) throw InvalidInput("finite handle passed to a linear class");
  if (h->weights.size() != dim()) throw InvalidInput("weight vector has the wrong dimension");
  return std::clamp(raw(h->weights, z), 0.0, range_max());
}

Eigen::MatrixXd LinearClass::gram(const WeightedSet& data) const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& [z, weight] : data) {
    const Eigen::VectorXd phi = feature(z);
    g.selfadjointView<Eigen::Lower>().rankUpdate(phi, weight);
  }
  return g.selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd LinearClass::solve_ball(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                        double radius) const {
  Eigen::MatrixXd system = gram;
  system.diagonal().array() += ridge_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  Eigen::VectorXd u;
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    const double pivot_floor = 1e-13 * std::max(1.0, system.diagonal().cwiseAbs().maxCoeff());
    ok = ldlt.vectorD().minCoeff() > pivot_floor;
  }
  if (ok) {
    u = ldlt.solve(rhs);
    if (u.norm() <= radius) return u;
  } else if (ridge_ == 0.0) {
    throw NumericalError("singular normal equations with zero ridge");
  }

  // The unconstrained minimizer leaves the ball: find mu >= 0 with
  // ||(A + mu I)^{-1} b|| = radius along the eigenbasis of A.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system);
  const Eigen::VectorXd coeff = eig.eigenvectors().transpose() * rhs;
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  auto norm_at = [&](double mu) {
    return (coeff.array() / (lambda.array() + mu)).matrix().norm();
  };
  double lo = 0.0;
  double hi = rhs.norm() / radius + 1e-300;
  if (lambda.minCoeff() <= 0.0) lo = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (norm_at(mid) > radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Eigen::VectorXd scaled = coeff.array() / (lambda.array() + hi);
  return eig.eigenvectors() * scaled;
}

FunctionHandle LinearClass::regress(const RegressionData& data) const {
  if (data.empty()) return zero();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim(), dim());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim());
  for (const auto& sample : data) {
    if (!(sample.weight >= 0.0) || !std::isfinite(sample.target)) {
      throw InvalidInput("regression weights must be nonnegative and targets finite");
    }
    const Eigen::VectorXd phi = feature(sample.point);
    g.selfadjointView<Eigen::Lower>().rankUpdate(phi, sample.weight);
    rhs += sample.weight * sample.target * phi;
  }
  g = g.selfadjointView<Eigen::Lower>();
  return LinearHandle{solve_ball(g, rhs, ball_bound_)};
}

long LinearClass::cover_points_per_axis(double eps) const {
  if (!(eps > 0.0)) throw InvalidInput("cover resolution must be positive");
  if (feature_sup_norm_ == 0.0) return 1;
  const double spacing = eps / (feature_sup_norm_ * std::sqrt(static_cast<double>(dim())));
  // points i * spacing, |i| <= m, cover [-B, B] within spacing / 2
  const double m = std::ceil(ball_bound_ / spacing - 0.5);
  const double count = 2.0 * std::max(0.0, m) + 1.0;
  if (count > static_cast<double>(std::numeric_limits<long>::max() / 2)) {
    throw CapacityError("cover grid too fine");
  }
  return static_cast<long>(count);
}

double LinearClass::log_cover_size(double eps) const {
  return dim() * std::log(static_cast<double>(cover_points_per_axis(eps)));
}

std::vector<FunctionHandle> LinearClass::cover(double eps) const {
  std::lock_guard lock(cover_mutex_);
  if (auto it = cover_cache_.find(eps); it != cover_cache_.end()) return it->second;

  const long per_axis = cover_points_per_axis(eps);
  const double total = std::pow(static_cast<double>(per_axis), dim());
  if (total > static_cast<double>(cover_cap_)) {
    throw CapacityError("cover of size " + std::to_string(total) + " exceeds cap " +
                        std::to_string(cover_cap_));
  }
  const double spacing =
      feature_sup_norm_ == 0.0 ? 0.0 : eps / (feature_sup_norm_ * std::sqrt(static_cast<double>(dim())));
  const long m = (per_axis - 1) / 2;

  std::vector<FunctionHandle> out;
  std::vector<long> idx(dim(), -m);
  std::vector<std::vector<double>> seen;
  for (;;) {
    Eigen::VectorXd w(dim());
    for (int i = 0; i < dim(); ++i) w[i] = static_cast<double>(idx[i]) * spacing;
    // Projection onto the ball keeps the point a member and is nonexpansive.
    if (const double n = w.norm(); n > ball_bound_) w *= ball_bound_ / n;
    std::vector<double> key(w.data(), w.data() + w.size());
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      seen.push_back(std::move(key));
      out.push_back(LinearHandle{w});
    }
    int axis = 0;
    while (axis < dim() && ++idx[axis] > m) idx[axis++] = -m;
    if (axis == dim()) break;
  }
  cover_cache_.emplace(eps, out);
  return out;
}

StateAction LinearClass::round(const StateAction& z, double eps) const {
  if (z.features.empty() || !(eps > 0.0)) return z;
  const double spacing = eps / (ball_bound_ * std::sqrt(static_cast<double>(dim())));
  StateAction out = z;
  for (double& x : out.features) x = std::round(x / spacing) * spacing;
  return out;
}

FunctionHandle LinearClass::zero() const { return LinearHandle{Eigen::VectorXd::Zero(dim())}; }

std::unique_ptr<LinearClass> make_onehot_class(int num_states, int num_actions, int horizon,
                                               double ball_bound, double ridge) {
  const int n = num_states * num_actions;
  return std::make_unique<LinearClass>(Eigen::MatrixXd::Identity(n, n), num_states, num_actions,
                                       horizon, ball_bound, ridge);
}

// ---------------------------------------------------------------- finite

FiniteClass::FiniteClass(std::vector<std::vector<double>> tables, int num_states, int num_actions,
                         int horizon)
    : FunctionClass(horizon, num_states, num_actions),
      columns_(static_cast<std::size_t>(num_states) * num_actions),
      zero_index_(std::numeric_limits<std::size_t>::max()) {
  if (tables.empty()) throw InvalidInput("finite class must be nonempty");
  std::vector<std::vector<double>> kept;
  for (auto& t : tables) {
    if (t.size() != columns_) throw InvalidInput("finite class table must have S * A entries");
    for (double& x : t) {
      if (!std::isfinite(x)) throw InvalidInput("finite class table has a non-finite value");
      x = std::clamp(x, 0.0, range_max());
    }
    if (std::find(kept.begin(), kept.end(), t) == kept.end()) kept.push_back(std::move(t));
  }
  size_ = kept.size();
  values_.reserve(size_ * columns_);
  for (std::size_t i = 0; i < size_; ++i) {
    values_.insert(values_.end(), kept[i].begin(), kept[i].end());
    if (zero_index_ == std::numeric_limits<std::size_t>::max() &&
        std::all_of(kept[i].begin(), kept[i].end(), [](double x) { return x == 0.0; })) {
      zero_index_ = i;
    }
  }
}

std::vector<double> FiniteClass::table(std::size_t i) const {
  return {values_.begin() + static_cast<std::ptrdiff_t>(i * columns_),
          values_.begin() + static_cast<std::ptrdiff_t>((i + 1) * columns_)};
}

std::size_t FiniteClass::index_of(const FunctionHandle& f) const {
  const auto* h = std::get_if<FiniteHandle>(&f);
  if (h == nullptr) throw InvalidInput("linear handle passed to a finite class");
  if (h->index >= size_) throw InvalidInput("finite handle index out of range");
  return h->index;
}

double FiniteClass::evaluate(const FunctionHandle& f, const StateAction& z) const {
  const std::size_t i = index_of(f);
  check_point(z);
  return value(i, z.state, z.action);
}

double FiniteClass::loss(std::size_t i, const RegressionData& data) const {
  double total = 0.0;
  for (const auto& sample : data) {
    const double r = value(i, sample.point.state, sample.point.action) - sample.target;
    total += sample.weight * r * r;
  }
  return total;
}

FunctionHandle FiniteClass::regress(const RegressionData& data) const {
  if (data.empty()) return zero();
  for (const auto& sample : data) {
    if (!(sample.weight >= 0.0) || !std::isfinite(sample.target)) {
      throw InvalidInput("regression weights must be nonnegative and targets finite");
    }
    check_point(sample.point);
  }
  std::size_t best = 0;
  double best_loss = loss(0, data);
  for (std::size_t i = 1; i < size_; ++i) {
    const double l = loss(i, data);
    if (l < best_loss) {
      best = i;
      best_loss = l;
    }
  }
  return FiniteHandle{best};
}

std::vector<FunctionHandle> FiniteClass::cover(double eps) const {
  if (!(eps > 0.0)) throw InvalidInput("cover resolution must be positive");
  std::vector<FunctionHandle> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(FiniteHandle{i});
  return out;
}

double FiniteClass::log_cover_size(double eps) const {
  if (!(eps > 0.0)) throw InvalidInput("cover resolution must be positive");
  return std::log(static_cast<double>(size_));
}

StateAction FiniteClass::round(const StateAction& z, double /*eps*/) const { return z; }

FunctionHandle FiniteClass::zero() const {
  return FiniteHandle{zero_index_ == std::numeric_limits<std::size_t>::max() ? 0 : zero_index_};
}

std::unique_ptr<FiniteClass> parse_finite_class(std::string_view text, int num_states,
                                                int num_actions, int horizon) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<double>> tables;
  const std::size_t cols = static_cast<std::size_t>(num_states) * num_actions;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::string id;
    int s = 0, a = 0;
    double v = 0.0;
    if (!(row >> id >> s >> a >> v)) {
      throw InvalidInput("finite class table line " + std::to_string(line_no) +
                         ": expected 'id s a value'");
    }
    if (s < 0 || s >= num_states || a < 0 || a >= num_actions) {
      throw InvalidInput("finite class table line " + std::to_string(line_no) +
                         ": state or action out of range");
    }
    auto [it, inserted] = tables.try_emplace(id, cols, 0.0);
    if (inserted) order.push_back(id);
    it->second[static_cast<std::size_t>(s) * num_actions + a] = v;
  }
  std::vector<std::vector<double>> list;
  list.reserve(order.size());
  for (const auto& id : order) list.push_back(std::move(tables[id]));
  return std::make_unique<FiniteClass>(std::move(list), num_states, num_actions, horizon);
}

std::string dump_finite_class(const FiniteClass& cls) {
  std::ostringstream out;
  char buf[64];
  for (std::size_t i = 0; i < cls.size(); ++i) {
    for (int s = 0; s < cls.num_states(); ++s) {
      for (int a = 0; a < cls.num_actions(); ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", cls.value(i, s, a));
        out << i << ' ' << s << ' ' << a << ' ' << buf << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace rloss
