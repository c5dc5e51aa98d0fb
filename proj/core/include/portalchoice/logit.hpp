#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "portalchoice/choice_set.hpp"

namespace portalchoice {

struct FitConfig {
  int max_iterations = 100;
  double grad_tol = 1e-6;        // infinity norm of the gradient
  double loglik_tol = 1e-9;      // relative log-likelihood change
  double beta_bound = 20.0;      // hard clamp on |beta_k|, separation proxy
  int min_occasions_margin = 2;  // estimable needs occasions >= p + margin
  int max_halvings = 20;
  bool record_path = false;      // keep the accepted-step log-likelihood trace
  std::optional<Eigen::VectorXd> start;  // defaults to zero
};

struct FitFlags {
  bool separation = false;
  bool singular_hessian = false;
  bool non_estimable = false;
  bool hit_bound = false;

  bool any() const { return separation || singular_hessian || non_estimable || hit_bound; }
};

struct HouseholdFit {
  std::string household_id;
  std::vector<std::string> layout;
  Eigen::VectorXd beta;                // empty when non_estimable
  std::optional<Eigen::VectorXd> se;
  std::vector<int> significance;       // per coefficient: +1, -1 or 0; empty without se
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  FitFlags flags;
  bool local_base = false;
  int dropped_occasions = 0;           // single-alternative occasions removed
  std::vector<double> loglik_path;     // filled when FitConfig::record_path
};

// Softmax with max-utility subtraction; safe for |utility| up to ~700.
Eigen::VectorXd softmax_utilities(const Eigen::VectorXd& utilities);

// Choice probabilities for one occasion's design rows; positive, sum to 1.
// Throws std::invalid_argument on a beta/columns mismatch.
Eigen::VectorXd choice_probabilities(const Eigen::VectorXd& beta,
                                     const Eigen::MatrixXd& rows);

struct LoglikResult {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

double loglik_only(const Eigen::VectorXd& beta,
                   std::span<const OccasionDesign> occasions);

// Log-likelihood, analytic gradient and Hessian, accumulated in occasion
// order so results are identical across runs and schedules.
LoglikResult loglik_grad_hess(const Eigen::VectorXd& beta,
                              std::span<const OccasionDesign> occasions);

enum class Estimability { ok, too_few_alternatives, too_few_occasions };

Estimability check_estimable(std::size_t n_alternatives,
                             std::size_t n_occasions, std::size_t p,
                             const FitConfig& cfg);

// Newton maximizer with step-halving line search from beta = 0.
// Coefficients are clamped to |beta_k| <= beta_bound (hit_bound flags a
// separation proxy); a singular Hessian falls back to a gradient step.
HouseholdFit fit_household(const HouseholdDesign& hh, const FitConfig& cfg);

// Inverse negative Hessian standard errors at fit.beta, plus 95% two-sided
// significance marks. Requires a converged, in-bounds fit; sets
// singular_hessian and leaves se absent when -H is not positive definite.
void attach_standard_errors(HouseholdFit& fit,
                            std::span<const OccasionDesign> occasions);

}  // namespace portalchoice
