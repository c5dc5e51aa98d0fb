#include "portalchoice/logit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace portalchoice {

Eigen::VectorXd softmax_utilities(const Eigen::VectorXd& utilities) {
  const double m = utilities.maxCoeff();
  Eigen::VectorXd w = (utilities.array() - m).exp();
  return w / w.sum();
}

Eigen::VectorXd choice_probabilities(const Eigen::VectorXd& beta,
                                     const Eigen::MatrixXd& rows) {
  if (rows.rows() < 1) throw std::invalid_argument("occasion has no design rows");
  if (rows.cols() != beta.size())
    throw std::invalid_argument("beta length does not match design columns");
  return softmax_utilities(rows * beta);
}

namespace {

// Scratch buffers reused across occasions, iterations and line-search trials;
// the hot path must not touch the allocator (fits run on many threads and
// malloc contention would serialize them).
struct Workspace {
  Eigen::VectorXd u, prob, xbar;
  Eigen::MatrixXd weighted;  // prob-scaled design rows

  void size_for(Eigen::Index n_alts, Eigen::Index p) {
    u.resize(n_alts);
    prob.resize(n_alts);
    xbar.resize(p);
    weighted.resize(n_alts, p);
  }
};

double loglik_only_ws(const Eigen::VectorXd& beta,
                      std::span<const OccasionDesign> occasions, Workspace& ws) {
  double ll = 0.0;
  for (const auto& occ : occasions) {
    ws.u.resize(occ.x.rows());
    ws.u.noalias() = occ.x * beta;
    const double m = ws.u.maxCoeff();
    const double z = (ws.u.array() - m).exp().sum();
    ll += ws.u(occ.chosen) - m - std::log(z);
  }
  return ll;
}

void loglik_grad_hess_ws(const Eigen::VectorXd& beta,
                         std::span<const OccasionDesign> occasions, Workspace& ws,
                         LoglikResult& r) {
  const Eigen::Index p = beta.size();
  r.loglik = 0.0;
  r.grad.resize(p);
  r.grad.setZero();
  r.hess.resize(p, p);
  r.hess.setZero();
  for (const auto& occ : occasions) {
    if (occ.x.cols() != p)
      throw std::invalid_argument("beta length does not match design columns");
    ws.size_for(occ.x.rows(), p);
    ws.u.noalias() = occ.x * beta;
    const double m = ws.u.maxCoeff();
    ws.prob = (ws.u.array() - m).exp();
    const double z = ws.prob.sum();
    ws.prob /= z;
    r.loglik += ws.u(occ.chosen) - m - std::log(z);
    ws.xbar.noalias() = occ.x.transpose() * ws.prob;
    r.grad += occ.x.row(occ.chosen).transpose();
    r.grad -= ws.xbar;
    ws.weighted.noalias() = ws.prob.asDiagonal() * occ.x;
    r.hess.noalias() -= occ.x.transpose() * ws.weighted;
    r.hess.noalias() += ws.xbar * ws.xbar.transpose();
  }
}

}  // namespace

double loglik_only(const Eigen::VectorXd& beta,
                   std::span<const OccasionDesign> occasions) {
  Workspace ws;
  return loglik_only_ws(beta, occasions, ws);
}

LoglikResult loglik_grad_hess(const Eigen::VectorXd& beta,
                              std::span<const OccasionDesign> occasions) {
  Workspace ws;
  LoglikResult r;
  loglik_grad_hess_ws(beta, occasions, ws, r);
  return r;
}

Estimability check_estimable(std::size_t n_alternatives,
                             std::size_t n_occasions, std::size_t p,
                             const FitConfig& cfg) {
  if (n_alternatives < 2) return Estimability::too_few_alternatives;
  if (n_occasions < p + static_cast<std::size_t>(cfg.min_occasions_margin))
    return Estimability::too_few_occasions;
  return Estimability::ok;
}

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& beta, double bound) {
  return beta.cwiseMax(-bound).cwiseMin(bound);
}

}  // namespace

HouseholdFit fit_household(const HouseholdDesign& hh, const FitConfig& cfg) {
  HouseholdFit fit;
  fit.household_id = hh.household_id;
  fit.layout = hh.layout;
  fit.local_base = hh.local_base;

  // Single-alternative occasions carry no information; drop them. The common
  // all-usable case borrows the caller's storage.
  std::vector<OccasionDesign> filtered;
  std::span<const OccasionDesign> usable(hh.occasions);
  for (const auto& occ : hh.occasions) {
    if (occ.x.rows() < 2) {
      filtered.reserve(hh.occasions.size());
      for (const auto& keep : hh.occasions) {
        if (keep.x.rows() >= 2)
          filtered.push_back(keep);
        else
          ++fit.dropped_occasions;
      }
      usable = filtered;
      break;
    }
  }

  const std::size_t p = hh.layout.size();
  if (check_estimable(hh.choice_set.size(), usable.size(), p, cfg) != Estimability::ok) {
    fit.flags.non_estimable = true;
    return fit;
  }
  const auto pi = static_cast<Eigen::Index>(p);

  Eigen::VectorXd beta = cfg.start ? clamp(*cfg.start, cfg.beta_bound)
                                   : Eigen::VectorXd::Zero(pi);
  if (beta.size() != pi)
    throw std::invalid_argument("start vector length does not match layout");

  Workspace ws;
  LoglikResult cur;
  loglik_grad_hess_ws(beta, usable, ws, cur);
  if (cfg.record_path) fit.loglik_path.push_back(cur.loglik);

  Eigen::LLT<Eigen::MatrixXd> llt(pi);
  Eigen::MatrixXd neg_hess(pi, pi);
  Eigen::VectorXd direction(pi), candidate(pi);

  double rel_change = 0.0;  // no step taken yet
  bool stalled = false;
  int iter = 0;
  while (true) {
    if (cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol && rel_change <= cfg.loglik_tol) {
      fit.converged = true;
      break;
    }
    if (stalled || iter >= cfg.max_iterations) break;
    ++iter;

    neg_hess = -cur.hess;
    llt.compute(neg_hess);
    bool newton_ok = llt.info() == Eigen::Success;
    if (newton_ok) {
      direction = llt.solve(cur.grad);
      newton_ok = direction.allFinite();
    }
    if (!newton_ok) {
      // Singular or indefinite Hessian: plain gradient ascent this iteration.
      const double scale = std::max(1.0, cur.grad.lpNorm<Eigen::Infinity>());
      direction = cur.grad / scale;
    }

    // Step-halving line search: accept the first step that does not decrease
    // the log-likelihood.
    bool accepted = false;
    double step = 1.0;
    for (int h = 0; h <= cfg.max_halvings; ++h, step *= 0.5) {
      candidate = (beta + step * direction).cwiseMax(-cfg.beta_bound).cwiseMin(cfg.beta_bound);
      const double cand_ll = loglik_only_ws(candidate, usable, ws);
      if (cand_ll >= cur.loglik) {
        const double old_ll = cur.loglik;
        beta.swap(candidate);
        loglik_grad_hess_ws(beta, usable, ws, cur);
        rel_change = std::abs(cur.loglik - old_ll) / std::max(1.0, std::abs(cur.loglik));
        if (cfg.record_path) fit.loglik_path.push_back(cur.loglik);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no non-decreasing step exists at this scale
    // A vanishing step with a live gradient means the clamp (or numerics)
    // blocks further progress.
    if (rel_change <= cfg.loglik_tol && cur.grad.lpNorm<Eigen::Infinity>() > cfg.grad_tol)
      stalled = true;
  }

  fit.beta = beta;
  fit.loglik = cur.loglik;
  fit.iterations = iter;
  fit.flags.hit_bound = (beta.cwiseAbs().array() >= cfg.beta_bound).any();
  fit.flags.separation = fit.flags.hit_bound;

  neg_hess = -cur.hess;
  llt.compute(neg_hess);
  if (llt.info() != Eigen::Success) fit.flags.singular_hessian = true;

  if (fit.converged && !fit.flags.hit_bound && !fit.flags.singular_hessian)
    attach_standard_errors(fit, usable);
  return fit;
}

void attach_standard_errors(HouseholdFit& fit,
                            std::span<const OccasionDesign> occasions) {
  fit.se.reset();
  fit.significance.clear();
  if (fit.beta.size() == 0 || fit.flags.hit_bound) return;

  LoglikResult at = loglik_grad_hess(fit.beta, occasions);
  Eigen::LLT<Eigen::MatrixXd> llt(-at.hess);
  if (llt.info() != Eigen::Success) {
    fit.flags.singular_hessian = true;
    return;
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(fit.beta.size(), fit.beta.size()));
  Eigen::VectorXd se(fit.beta.size());
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    const double v = cov(k, k);
    if (!(v > 0.0) || !std::isfinite(v)) {
      fit.flags.singular_hessian = true;
      return;
    }
    se(k) = std::sqrt(v);
  }
  fit.se = std::move(se);
  fit.significance.resize(static_cast<std::size_t>(fit.beta.size()), 0);
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    const double z = fit.beta(k) / (*fit.se)(k);
    fit.significance[static_cast<std::size_t>(k)] = z > 1.96 ? 1 : (z < -1.96 ? -1 : 0);
  }
}

}  // namespace portalchoice
