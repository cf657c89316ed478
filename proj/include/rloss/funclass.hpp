#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace rloss {

// A state-action pair. Discrete pairs leave `features` empty; a point that was
// rounded onto a feature grid carries its rounded feature vector explicitly.
struct StateAction {
  int state = 0;
  int action = 0;
  std::vector<double> features;

  friend bool operator==(const StateAction&, const StateAction&) = default;
  friend auto operator<=>(const StateAction&, const StateAction&) = default;
};

struct LinearHandle {
  Eigen::VectorXd weights;
};

struct FiniteHandle {
  std::size_t index = 0;
};

using FunctionHandle = std::variant<LinearHandle, FiniteHandle>;

bool same_function(const FunctionHandle& lhs, const FunctionHandle& rhs);

struct RegressionSample {
  double weight = 1.0;
  StateAction point;
  double target = 0.0;
};

using RegressionData = std::vector<RegressionSample>;

struct WeightedPoint {
  StateAction point;
  double weight = 1.0;
};

// Weighted multiset of points; a weight counts copies.
using WeightedSet = std::vector<WeightedPoint>;

enum class ClassKind { Linear, Finite };

// Function class F over S x A with members valued in [0, H + 1].
class FunctionClass {
 public:
  FunctionClass(int horizon, int num_states, int num_actions);
  virtual ~FunctionClass() = default;

  FunctionClass(const FunctionClass&) = delete;
  FunctionClass& operator=(const FunctionClass&) = delete;

  virtual ClassKind kind() const = 0;

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double range_max() const { return horizon_ + 1.0; }
  // Ceiling of |f1(z) - f2(z)| used by the constrained maximizations.
  double gap_ceiling() const { return 2.0 * (horizon_ + 1.0); }

  StateAction point(int s, int a) const { return StateAction{s, a, {}}; }

  // Value clipped to [0, H + 1].
  virtual double evaluate(const FunctionHandle& f, const StateAction& z) const = 0;

  // argmin_g sum_i v_i (g(z_i) - y_i)^2. Empty data yields the zero function.
  virtual FunctionHandle regress(const RegressionData& data) const = 0;

  // sum over the weighted set of weight * (f1(z) - f2(z))^2.
  double distance_norm_sq(const FunctionHandle& f1, const FunctionHandle& f2,
                          const WeightedSet& data) const;

  // Members such that every member of the class lies within eps in sup-norm.
  virtual std::vector<FunctionHandle> cover(double eps) const = 0;
  virtual double log_cover_size(double eps) const = 0;

  // A representative z' of z with sup_f |f(z) - f(z')| <= eps.
  virtual StateAction round(const StateAction& z, double eps) const = 0;

  virtual FunctionHandle zero() const = 0;

 protected:
  void check_point(const StateAction& z) const;

 private:
  int horizon_;
  int num_states_;
  int num_actions_;
};

// f(z) = clip(w^T phi(z), 0, H + 1) with ||w||_2 <= B.
class LinearClass final : public FunctionClass {
 public:
  // `features` has one row per (s, a), row index s * A + a. A negative
  // ball bound selects the default 2 H sqrt(d).
  LinearClass(Eigen::MatrixXd features, int num_states, int num_actions, int horizon,
              double ball_bound = -1.0, double ridge = 1e-8, std::size_t cover_cap = 1'000'000);

  ClassKind kind() const override { return ClassKind::Linear; }

  int dim() const { return static_cast<int>(features_.cols()); }
  double ball_bound() const { return ball_bound_; }
  double ridge() const { return ridge_; }
  double feature_sup_norm() const { return feature_sup_norm_; }
  const Eigen::MatrixXd& features() const { return features_; }

  Eigen::VectorXd feature(const StateAction& z) const;
  // w^T phi(z) without clipping.
  double raw(const Eigen::VectorXd& w, const StateAction& z) const;

  double evaluate(const FunctionHandle& f, const StateAction& z) const override;
  FunctionHandle regress(const RegressionData& data) const override;
  std::vector<FunctionHandle> cover(double eps) const override;
  double log_cover_size(double eps) const override;
  StateAction round(const StateAction& z, double eps) const override;
  FunctionHandle zero() const override;

  // sum_i v_i phi_i phi_i^T over a weighted set.
  Eigen::MatrixXd gram(const WeightedSet& data) const;

  // argmin_{||u|| <= radius} u^T (G + ridge I) u - 2 b^T u. Throws
  // NumericalError when the ridge is zero and G is singular.
  Eigen::VectorXd solve_ball(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                             double radius) const;

  // Grid points per coordinate of the parameter cover at resolution eps.
  long cover_points_per_axis(double eps) const;

 private:
  Eigen::MatrixXd features_;
  double ball_bound_;
  double ridge_;
  double feature_sup_norm_ = 0.0;
  std::size_t cover_cap_;
  mutable std::mutex cover_mutex_;
  mutable std::map<double, std::vector<FunctionHandle>> cover_cache_;
};

// Tabular class: one-hot features over S x A, so every table is a member.
std::unique_ptr<LinearClass> make_onehot_class(int num_states, int num_actions, int horizon,
                                               double ball_bound = -1.0, double ridge = 1e-8);

// Explicit list of tables f_i(s, a).
class FiniteClass final : public FunctionClass {
 public:
  // tables[i][s * A + a]; values are clipped into [0, H + 1] and exact
  // duplicates dropped (first occurrence kept).
  FiniteClass(std::vector<std::vector<double>> tables, int num_states, int num_actions,
              int horizon);

  ClassKind kind() const override { return ClassKind::Finite; }

  std::size_t size() const { return size_; }
  std::size_t columns() const { return columns_; }
  double value(std::size_t i, int s, int a) const {
    return values_[i * columns_ + static_cast<std::size_t>(s) * num_actions() + a];
  }
  // Row-major size() x (S * A).
  const std::vector<double>& values() const { return values_; }
  std::vector<double> table(std::size_t i) const;

  double evaluate(const FunctionHandle& f, const StateAction& z) const override;
  FunctionHandle regress(const RegressionData& data) const override;
  std::vector<FunctionHandle> cover(double eps) const override;
  double log_cover_size(double eps) const override;
  StateAction round(const StateAction& z, double eps) const override;
  FunctionHandle zero() const override;

  // Loss of member i on a regression set.
  double loss(std::size_t i, const RegressionData& data) const;

 private:
  std::size_t index_of(const FunctionHandle& f) const;

  std::size_t size_ = 0;
  std::size_t columns_ = 0;
  std::vector<double> values_;
  std::size_t zero_index_;
};

// Text table with rows "id s a value"; ids need not be contiguous and are
// ordered by first appearance. Missing cells are 0.
std::unique_ptr<FiniteClass> parse_finite_class(std::string_view text, int num_states,
                                                int num_actions, int horizon);
std::string dump_finite_class(const FiniteClass& cls);

}  // namespace rloss
