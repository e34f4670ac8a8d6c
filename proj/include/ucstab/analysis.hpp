#pragma once

#include "ucstab/problem.hpp"
#include "ucstab/solver.hpp"

#include <string>
#include <vector>

namespace ucstab {

struct NormPair {
    double l2 = 0.0;
    double h1 = 0.0; // full H1 norm
};

/// Norms of u_h - exact over the quadrature points of the subdomain selected by
/// the indicator (the whole domain when it is empty). An empty exact solution
/// means zero; an exact solution without gradient yields h1 = NaN.
[[nodiscard]] NormPair subdomain_norms(const FeFunction& u_h, const ExactSolution& exact,
                                       const SubdomainIndicator& indicator, int degree = -1);

/// Discrete dual norm of a functional over the free DOFs of a constrained
/// space: k = 1 gives sqrt(r^T K^{-1} r) with K the H1 Gram matrix; k = 2 gives
/// the L2 norm of the H1 Riesz representative (an H^-2 proxy).
[[nodiscard]] double dual_norm(const FeSpace& space, const Vector& functional, int k);

struct ResidualNorms {
    double hm1 = 0.0;
    double hm2_proxy = 0.0;
};

/// Dual norms of w -> a(u_h, w) - <f, w> on a reference mesh refined
/// `extra_levels` times beyond the mesh of u_h.
[[nodiscard]] ResidualNorms dual_residual_norms(const ProblemSpec& problem, const FeFunction& u_h,
                                                int extra_levels = 1);

struct ErrorRecord {
    double h = 0.0;
    int dofs = 0;
    double l2_B = 0.0;
    double h1_B = 0.0;
    double l2_omega = 0.0; // ||u_h - q||_omega
    double l2_Omega = 0.0;
    double h1_Omega = 0.0;
    double res_hm1 = 0.0;
    double res_hm2_proxy = 0.0;
    double prs = 0.0;
    double dus = 0.0;
};

/// Fills an ErrorRecord from a solve; errors against the exact solution are
/// NaN when the problem has none.
[[nodiscard]] ErrorRecord evaluate(const ProblemSpec& problem, const SaddleSystem& system, const SolveResult& result,
                                   bool residuals = true);

/// Least-squares slope of log(value) against log(h); NaN when a value is not positive.
[[nodiscard]] double loglog_slope(std::span<const double> h, std::span<const double> values);

struct RateEntry {
    std::string norm;
    double slope_global = 0.0;
    double slope_last = 0.0;
    double kappa_est = 0.0; // NaN unless the norm is l2_B or h1_B
};

struct RateReport {
    std::vector<RateEntry> entries;

    [[nodiscard]] const RateEntry& at(const std::string& norm) const;
};

/// Column names of ErrorRecord in CSV order, and value access by name.
[[nodiscard]] const std::vector<std::string>& record_norm_names();
[[nodiscard]] double record_value(const ErrorRecord& record, const std::string& norm);

/// Needs at least three records with strictly decreasing h.
[[nodiscard]] RateReport fit_rates(std::span<const ErrorRecord> records, double s_reg);

} // namespace ucstab
