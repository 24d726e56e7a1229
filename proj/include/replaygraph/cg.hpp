#pragma once

#include "replaygraph/common.hpp"

#include <cmath>

namespace replaygraph {

struct CgSettings {
  Index max_iters = 200;
  double residual_tol = 1e-6;
  double damping = 0.01;

  /// max_iters = min(parameter_count, 200).
  static CgSettings for_dimension(Index parameter_count, double residual_tol = 1e-6, double damping = 0.01) {
    return CgSettings{std::min<Index>(parameter_count, 200), residual_tol, damping};
  }

  void validate() const {
    if (!(residual_tol > 0)) throw Error("cg: residual_tol must be > 0");
    if (damping < 0) throw Error("cg: damping must be >= 0");
    if (max_iters < 1) throw Error("cg: max_iters must be >= 1");
  }
};

struct CgResult {
  Vector solution;
  Index iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  /// Stopped because p^T (H + damping I) p <= 0.
  bool negative_curvature = false;
};

/// Solves (H + damping I) w = rhs given only products with H.
template <class HessianProduct>
CgResult cg_solve(HessianProduct&& apply_hessian, const Vector& rhs, const CgSettings& settings) {
  settings.validate();
  CgResult res;
  res.solution = Vector::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (!std::isfinite(rhs_norm)) throw DivergenceError("cg: non-finite right-hand side");
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }
  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  for (Index k = 0; k < settings.max_iters; ++k) {
    const Vector hp = Vector(apply_hessian(p)) + settings.damping * p;
    const double curvature = p.dot(hp);
    if (!std::isfinite(curvature)) throw DivergenceError("cg: non-finite curvature at iteration " + std::to_string(k));
    if (curvature <= 0.0) {
      res.negative_curvature = true;
      break;
    }
    const double alpha = rr / curvature;
    res.solution += alpha * p;
    r -= alpha * hp;
    res.iterations = k + 1;
    if (!res.solution.allFinite()) throw DivergenceError("cg: non-finite iterate at iteration " + std::to_string(k));
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) <= settings.residual_tol * rhs_norm) {
      rr = rr_next;
      res.converged = true;
      break;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  res.relative_residual = std::sqrt(rr) / rhs_norm;
  return res;
}

}  // namespace replaygraph
