#pragma once

#include "ucstab/fem.hpp"

#include <limits>
#include <optional>
#include <string>
#include <variant>

namespace ucstab {

/// Inner product used by the Tikhonov terms.
enum class TikhonovInner {
    FullH1,    // (u, v) + (grad u, grad v)
    Seminorm,  // (grad u, grad v) only
};

/// Exponents and switches of the stabilized scheme.
struct StabilizationParams {
    double alpha = 0.0;  // data weight h^{-2 alpha}
    double eta = 0.0;    // dual stabilizer weight h^{2 eta}; +inf drops that group
    double tau = 0.0;    // dual Tikhonov weight h^{tau}
    double s_reg = 2.0;  // primal Tikhonov weight h^{2 (s - 1)}
    bool tikhonov_off = false;
    TikhonovInner inner = TikhonovInner::FullH1;

    [[nodiscard]] bool eta_infinite() const noexcept { return eta == std::numeric_limits<double>::infinity(); }
    /// Throws InvalidArgument when a field is out of range.
    void validate() const;

    [[nodiscard]] double data_weight(double h) const;
    [[nodiscard]] double primal_tikhonov_weight(double h) const;
    [[nodiscard]] double dual_stabilizer_weight(double h) const;
    [[nodiscard]] double dual_tikhonov_weight(double h) const;

    /// Table presets: "L2-optimal" (alpha 1, eta 0, tau 2) and "H1-optimal"
    /// (alpha 0, eta inf, tau 0).
    [[nodiscard]] static StabilizationParams preset(const std::string& name);
};

/// Assembled bilinear form over the free DOFs of a test (rows) and trial
/// (columns) space.
struct AssembledForm {
    SparseMatrix matrix;
    std::string name;
    double h = 0.0;
    double weight = 1.0; // scalar already folded into the matrix

    [[nodiscard]] double apply(const Vector& v, const Vector& u) const { return v.dot(matrix * u); }
    [[nodiscard]] double quadratic(const Vector& v) const { return apply(v, v); }
};

/// Maximum |A - A^T| entry relative to the largest |A| entry.
[[nodiscard]] double relative_asymmetry(const SparseMatrix& a);

/// a(u, v) = (grad u, grad v) + (P u, v); rows follow the test space.
[[nodiscard]] AssembledForm assemble_a(const FeSpace& trial, const FeSpace& test, const PointFunction& potential);

/// Jump of the normal gradient over interior faces, weighted with the global h.
[[nodiscard]] AssembledForm assemble_jump(const FeSpace& space);

/// Elementwise residual pairing (h L_h u, h L_h v) with L_h = -Laplace + P.
[[nodiscard]] AssembledForm assemble_residual_term(const FeSpace& space, const PointFunction& potential);

/// Boundary normal-derivative pairing, h times the boundary integral; the
/// h^{2 eta} factor is applied when composing.
[[nodiscard]] AssembledForm assemble_boundary_normal(const FeSpace& space);

/// H1 inner product (or seminorm) used by the Tikhonov terms.
[[nodiscard]] AssembledForm assemble_h1_inner(const FeSpace& space, TikhonovInner inner = TikhonovInner::FullH1);

/// L2 mass matrix over the free DOFs.
[[nodiscard]] AssembledForm assemble_l2_mass(const FeSpace& space);

/// s_h = J_h + residual + h^{2(s-1)} <.,.>.
[[nodiscard]] AssembledForm compose_primal_stabilizer(const StabilizationParams& params, const AssembledForm& jump,
                                                      const AssembledForm& residual, const AssembledForm& h1_inner);

/// s*_h = h^{2 eta} (J_h + boundary + residual) + h^tau <.,.>.
[[nodiscard]] AssembledForm compose_dual_stabilizer(const StabilizationParams& params, const AssembledForm& jump,
                                                    const AssembledForm& boundary, const AssembledForm& residual,
                                                    const AssembledForm& h1_inner);

/// Consistency vector, entry i = h^2 (f_h, L_h phi_i) for phi_i in the unconstrained space.
[[nodiscard]] Vector assemble_G(const FeSpace& space, const FeFunction& f_h, const PointFunction& potential);

struct DataTerm {
    AssembledForm form; // h^{-2 alpha} (u, v)_omega
    Vector rhs;         // h^{-2 alpha} (q, v)_omega
};

/// Data-fidelity term on omega; the indicator is evaluated at quadrature points.
[[nodiscard]] DataTerm assemble_data_term(const FeSpace& space, const SubdomainIndicator& omega, const PointFunction& q,
                                          double alpha);

/// Functional w -> integral of w along a segment that is a union of mesh edges.
[[nodiscard]] Vector assemble_line_source(const FeSpace& space, const MeshLine& line);

/// Functional w -> (f, w) for a point function f.
[[nodiscard]] Vector assemble_load(const FeSpace& space, const PointFunction& f);

/// Unit line measure on a segment: <f, w> = integral of w along the segment.
struct LineSource {
    MeshLine segment;
};

/// Right-hand side of the PDE: none, an L2 function, or a line measure.
using Source = std::variant<std::monostate, PointFunction, LineSource>;

/// Functional w -> <f, w> over the free DOFs of the space.
[[nodiscard]] Vector assemble_source(const FeSpace& space, const Source& source);

/// Restricts a vector over global DOFs to the free DOFs.
[[nodiscard]] Vector restrict_vector(const Vector& global, const FeSpace& space);

} // namespace ucstab
