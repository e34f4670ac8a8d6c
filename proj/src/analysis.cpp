#include "ucstab/analysis.hpp"

#include "ucstab/error.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>

namespace ucstab {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

} // namespace

NormPair subdomain_norms(const FeFunction& u_h, const ExactSolution& exact, const SubdomainIndicator& indicator,
                         int degree)
{
    const FeSpace& space = u_h.space();
    const Mesh& mesh = space.mesh();
    if (degree < 0) {
        degree = 2 * space.order() + 2;
    }
    const BasisTable table(space.order(), triangle_quadrature(degree));
    const Vector c = u_h.global_coefficients();
    const int n = space.dofs_per_element();
    const bool with_gradient = !exact.value || static_cast<bool>(exact.gradient);
    ElementBasis basis;
    double l2 = 0.0;
    double semi = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        table.fill(mesh, t, basis);
        const auto dofs = space.element_dofs(t);
        for (std::size_t q = 0; q < basis.weights.size(); ++q) {
            const Point& x = basis.points[q];
            if (indicator.contains && !indicator(x)) {
                continue;
            }
            double value = 0.0;
            Point grad = Point::Zero();
            for (int i = 0; i < n; ++i) {
                value += c[dofs[i]] * basis.values[q * n + i];
                grad += c[dofs[i]] * basis.gradients[q * n + i];
            }
            if (exact.value) {
                value -= exact.value(x);
            }
            if (exact.gradient) {
                grad -= exact.gradient(x);
            }
            l2 += basis.weights[q] * value * value;
            semi += basis.weights[q] * grad.squaredNorm();
        }
    }
    return {std::sqrt(l2), with_gradient ? std::sqrt(l2 + semi) : nan};
}

double dual_norm(const FeSpace& space, const Vector& functional, int k)
{
    UCSTAB_REQUIRE(k == 1 || k == 2, InvalidArgument, "order must be 1 or 2");
    UCSTAB_REQUIRE(space.constrained(), InvalidArgument, "dual norms are taken over the constrained space");
    UCSTAB_REQUIRE(functional.size() == space.num_free(), InvalidArgument, "functional does not match the space");
    if (functional.isZero(0.0)) {
        return 0.0;
    }
    const AssembledForm gram = assemble_h1_inner(space, TikhonovInner::FullH1);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(gram.matrix);
    UCSTAB_REQUIRE(ldlt.info() == Eigen::Success, SolverError, "reference-mesh Riesz factorization failed");
    const Vector phi = ldlt.solve(functional);
    UCSTAB_REQUIRE(ldlt.info() == Eigen::Success && phi.allFinite(), SolverError, "reference-mesh Riesz solve failed");
    if (k == 1) {
        return std::sqrt(std::max(0.0, functional.dot(phi)));
    }
    return std::sqrt(std::max(0.0, assemble_l2_mass(space).quadratic(phi)));
}

ResidualNorms dual_residual_norms(const ProblemSpec& problem, const FeFunction& u_h, int extra_levels)
{
    UCSTAB_REQUIRE(extra_levels >= 1, InvalidArgument, "the reference mesh must be finer than the solution mesh");
    const int p = u_h.space().order();
    FeFunction u = u_h;
    std::shared_ptr<const Mesh> mesh = u_h.space().mesh_ptr();
    for (int level = 0; level < extra_levels; ++level) {
        mesh = std::make_shared<const Mesh>(refine(*mesh));
        u = prolongate(u, std::make_shared<const FeSpace>(mesh, p, false));
    }
    const FeSpace W(mesh, p, true);
    const Vector r = assemble_a(u.space(), W, problem.potential).matrix * u.coefficients() -
                     assemble_source(W, problem.source);
    return {dual_norm(W, r, 1), dual_norm(W, r, 2)};
}

ErrorRecord evaluate(const ProblemSpec& problem, const SaddleSystem& system, const SolveResult& result,
                     bool residuals)
{
    ErrorRecord rec;
    rec.h = system.h;
    rec.dofs = system.size();
    rec.prs = result.prs;
    rec.dus = result.dus;
    rec.l2_omega = subdomain_norms(result.u_h, {problem.datum, {}}, problem.omega).l2;
    if (problem.exact) {
        const NormPair b = subdomain_norms(result.u_h, *problem.exact, problem.target);
        const NormPair all = subdomain_norms(result.u_h, *problem.exact, {});
        rec.l2_B = b.l2;
        rec.h1_B = b.h1;
        rec.l2_Omega = all.l2;
        rec.h1_Omega = all.h1;
    } else {
        rec.l2_B = rec.h1_B = rec.l2_Omega = rec.h1_Omega = nan;
    }
    if (residuals) {
        const ResidualNorms r = dual_residual_norms(problem, result.u_h);
        rec.res_hm1 = r.hm1;
        rec.res_hm2_proxy = r.hm2_proxy;
    } else {
        rec.res_hm1 = rec.res_hm2_proxy = nan;
    }
    return rec;
}

double loglog_slope(std::span<const double> h, std::span<const double> values)
{
    UCSTAB_REQUIRE(h.size() == values.size() && h.size() >= 2, InvalidArgument, "need two or more matching samples");
    const std::size_t n = h.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i]) || !(h[i] > 0.0)) {
            return nan;
        }
        const double x = std::log(h[i]);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    UCSTAB_REQUIRE(denom > 0.0, InvalidArgument, "mesh sizes must not all coincide");
    return (n * sxy - sx * sy) / denom;
}

const std::vector<std::string>& record_norm_names()
{
    static const std::vector<std::string> names = {"l2_B",   "h1_B",          "l2_omega", "l2_Omega", "h1_Omega",
                                                   "res_hm1", "res_hm2_proxy", "prs",      "dus"};
    return names;
}

double record_value(const ErrorRecord& r, const std::string& norm)
{
    if (norm == "l2_B") return r.l2_B;
    if (norm == "h1_B") return r.h1_B;
    if (norm == "l2_omega") return r.l2_omega;
    if (norm == "l2_Omega") return r.l2_Omega;
    if (norm == "h1_Omega") return r.h1_Omega;
    if (norm == "res_hm1") return r.res_hm1;
    if (norm == "res_hm2_proxy") return r.res_hm2_proxy;
    if (norm == "prs") return r.prs;
    if (norm == "dus") return r.dus;
    throw InvalidArgument("record_value: unknown norm '" + norm + "'");
}

const RateEntry& RateReport::at(const std::string& norm) const
{
    for (const auto& e : entries) {
        if (e.norm == norm) {
            return e;
        }
    }
    throw InvalidArgument("RateReport::at: no entry for '" + norm + "'");
}

RateReport fit_rates(std::span<const ErrorRecord> records, double s_reg)
{
    UCSTAB_REQUIRE(records.size() >= 3, InvalidArgument, "rate fits need at least three mesh levels");
    std::vector<double> h;
    for (std::size_t i = 0; i < records.size(); ++i) {
        UCSTAB_REQUIRE(i == 0 || records[i].h < records[i - 1].h, InvalidArgument,
                       "mesh sizes must be strictly decreasing");
        h.push_back(records[i].h);
    }
    RateReport report;
    for (const auto& name : record_norm_names()) {
        std::vector<double> v;
        for (const auto& r : records) {
            v.push_back(record_value(r, name));
        }
        RateEntry e{name, loglog_slope(h, v), loglog_slope(std::span(h).last(2), std::span(v).last(2)), nan};
        if (name == "h1_B" && s_reg > 1.0) {
            e.kappa_est = e.slope_global / (s_reg - 1.0);
        } else if (name == "l2_B") {
            e.kappa_est = e.slope_global / s_reg;
        }
        report.entries.push_back(e);
    }
    return report;
}

} // namespace ucstab
