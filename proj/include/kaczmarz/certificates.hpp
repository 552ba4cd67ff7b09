#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "kaczmarz/coherence.hpp"
#include "kaczmarz/solvers.hpp"
#include "kaczmarz/spectral.hpp"

namespace kaczmarz {

// Per-iteration contraction factors of the deterministic convergence bound:
//   ||x^(1) - x*||^2 <= rho0 ||x^(0) - x*||^2
//   ||x^(k) - x*||^2 <= rho2^{k-2} rho1 rho0 ||x^(0) - x*||^2,  k >= 2.
// degenerate marks a vacuous bound: (1 - delta^2) gamma2 <= sigma_min^2
// drives rho2 to zero or below, and the factors are reported as computed
// rather than clamped.
struct ConvergenceCertificate {
  double rho0 = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double sigma_min_sq = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double delta = 0.0;
  bool degenerate = false;
};

inline ConvergenceCertificate certificate(double frob_sq,
                                          const SpectralSummary& spectral,
                                          const CoherenceSummary& coherence) {
  ConvergenceCertificate cert;
  cert.sigma_min_sq = spectral.sigma_min_sq;
  cert.gamma1 = coherence.gamma1;
  cert.gamma2 = coherence.gamma2;
  cert.delta = coherence.delta;
  const double one_minus_d2 = 1.0 - coherence.delta * coherence.delta;
  cert.rho0 = 1.0 - spectral.sigma_min_sq / frob_sq;
  cert.rho1 = 1.0 - spectral.sigma_min_sq / (one_minus_d2 * coherence.gamma1);
  cert.rho2 = coherence.gamma2 > 0.0
                  ? 1.0 - spectral.sigma_min_sq / (one_minus_d2 * coherence.gamma2)
                  : -std::numeric_limits<double>::infinity();
  cert.degenerate = !(cert.rho2 > 0.0);
  return cert;
}

// The per-iteration factor of the plain greedy method's bound,
// 1 - (||A||_F^2/gamma1 + 1)/2 * sigma_min^2/||A||_F^2; the certificate
// factors are strictly below it whenever the rows are pairwise independent.
inline double grk_rate_factor(double frob_sq, double gamma1,
                              double sigma_min_sq) {
  return 1.0 - 0.5 * (frob_sq / gamma1 + 1.0) * sigma_min_sq / frob_sq;
}

struct CheckReport {
  bool applicable = true;   // trace carries what the check needs
  bool pass = true;
  std::optional<std::size_t> first_violation_k;
  std::size_t checked = 0;
  bool vacuous = false;     // degenerate factors made the bound unverifiable
};

// Verifies the deterministic error bound along a greedy inertial trace.
// err0 = ||x^(0) - x_star||^2. The rho2 power is accumulated in log space so
// long runs cannot underflow, and each comparison allows rel_slack of
// floating-point drift.
inline CheckReport check_theorem_bound(const IterationTrace& trace,
                                       const ConvergenceCertificate& cert,
                                       double err0, double rel_slack = 1e-9) {
  CheckReport report;
  if (std::isnan(trace.norm_x_star_sq) || trace.rows.empty()) {
    report.applicable = false;
    return report;
  }
  if (cert.degenerate || !(cert.rho0 > 0.0) || !(cert.rho1 > 0.0)) {
    report.vacuous = true;
    return report;
  }
  const double log_slacked = std::log1p(rel_slack);
  const double log_rho0 = std::log(cert.rho0);
  const double log_rho1 = std::log(cert.rho1);
  const double log_rho2 = std::log(cert.rho2);
  for (const TraceRow& row : trace.rows) {
    const std::size_t produced = row.k + 1;  // this step produced x^(produced)
    const double err = row.rse * trace.norm_x_star_sq;
    report.checked++;
    if (err == 0.0) continue;
    if (err0 == 0.0) {  // started at the solution; any nonzero error violates
      report.pass = false;
      report.first_violation_k = produced;
      break;
    }
    double log_bound = std::log(err0) + log_rho0;
    if (produced >= 2)
      log_bound += log_rho1 + static_cast<double>(produced - 2) * log_rho2;
    if (std::log(err) > log_bound + log_slacked) {
      report.pass = false;
      report.first_violation_k = produced;
      break;
    }
  }
  return report;
}

// Verifies that the residuals of x^(k) on the previous one or two working
// rows vanish, which is what the inertial extrapolation is designed to
// achieve. Needs retained iterates.
template <RowMatrix M>
CheckReport check_lemma_residuals(const IterationTrace& trace,
                                  const LinearSystem<M>& sys,
                                  double tol = 1e-9) {
  CheckReport report;
  if (!is_inertial(trace.variant) ||
      trace.iterates.size() != trace.rows.size() + 1) {
    report.applicable = false;
    return report;
  }
  auto row_residual_small = [&](std::size_t i, std::span<const double> x) {
    const double res = sys.matrix().row_dot(i, x) - sys.rhs()[i];
    const double scale = std::sqrt(sys.row_sq_norms()[i]) * norm2(x) +
                         std::abs(sys.rhs()[i]);
    return std::abs(res) <= tol * std::max(scale, 1.0);
  };
  for (std::size_t k = 1; k < trace.iterates.size(); ++k) {
    const auto& x = trace.iterates[k];
    report.checked++;
    if (!row_residual_small(trace.rows[k - 1].chosen_index, x)) {
      report.pass = false;
      report.first_violation_k = k;
      return report;
    }
    if (k >= 2 && !row_residual_small(trace.rows[k - 2].chosen_index, x)) {
      report.pass = false;
      report.first_violation_k = k;
      return report;
    }
  }
  return report;
}

// Verifies max_i |r_i|^2/||a_i||^2 >= ||r||^2 / Gamma_k at every recorded
// iteration, the inequality that keeps the greedy index set nonempty.
inline CheckReport check_lemma2_maxratio(const IterationTrace& trace,
                                         double rel_slack = 1e-12) {
  CheckReport report;
  if (trace.rows.empty()) {
    report.applicable = false;
    return report;
  }
  for (const TraceRow& row : trace.rows) {
    if (!(row.gamma_used > 0.0)) continue;  // vacuous for a two-row system
    report.checked++;
    const double lower = row.res_norm_sq / row.gamma_used;
    if (row.max_ratio < lower * (1.0 - rel_slack)) {
      report.pass = false;
      report.first_violation_k = row.k;
      return report;
    }
  }
  return report;
}

}  // namespace kaczmarz
