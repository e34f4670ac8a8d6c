#include "ucstab/forms.hpp"

#include "ucstab/error.hpp"

#include <cmath>

namespace ucstab {

using Triplets = std::vector<Eigen::Triplet<double>>;

void StabilizationParams::validate() const
{
    UCSTAB_REQUIRE(alpha >= 0.0 && alpha <= 1.0, InvalidArgument, "alpha must lie in [0, 1]");
    UCSTAB_REQUIRE(eta >= 0.0, InvalidArgument, "eta must be non-negative or infinite");
    UCSTAB_REQUIRE(tau >= 0.0 && std::isfinite(tau), InvalidArgument, "tau must be finite and non-negative");
    UCSTAB_REQUIRE(s_reg >= 1.0 && std::isfinite(s_reg), InvalidArgument, "s_reg must be at least 1");
}

double StabilizationParams::data_weight(double h) const { return std::pow(h, -2.0 * alpha); }

double StabilizationParams::primal_tikhonov_weight(double h) const
{
    return tikhonov_off ? 0.0 : std::pow(h, 2.0 * (s_reg - 1.0));
}

double StabilizationParams::dual_stabilizer_weight(double h) const
{
    return eta_infinite() ? 0.0 : std::pow(h, 2.0 * eta);
}

double StabilizationParams::dual_tikhonov_weight(double h) const { return tikhonov_off ? 0.0 : std::pow(h, tau); }

StabilizationParams StabilizationParams::preset(const std::string& name)
{
    StabilizationParams p;
    if (name == "L2-optimal") {
        p.alpha = 1.0;
        p.eta = 0.0;
        p.tau = 2.0;
    } else if (name == "H1-optimal") {
        p.alpha = 0.0;
        p.eta = std::numeric_limits<double>::infinity();
        p.tau = 0.0;
    } else {
        throw InvalidArgument("StabilizationParams::preset: unknown preset '" + name + "'");
    }
    return p;
}

double relative_asymmetry(const SparseMatrix& a)
{
    const SparseMatrix diff = a - SparseMatrix(a.transpose());
    double max_diff = 0.0;
    double max_entry = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
            max_diff = std::max(max_diff, std::abs(it.value()));
        }
    }
    for (int k = 0; k < a.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
            max_entry = std::max(max_entry, std::abs(it.value()));
        }
    }
    return max_entry > 0.0 ? max_diff / max_entry : 0.0;
}

Vector restrict_vector(const Vector& global, const FeSpace& space)
{
    UCSTAB_REQUIRE(global.size() == space.num_dofs(), InvalidArgument, "vector does not match the space");
    Vector r(space.num_free());
    const auto f2g = space.free_to_global();
    for (int i = 0; i < space.num_free(); ++i) {
        r[i] = global[f2g[i]];
    }
    return r;
}

namespace {

SparseMatrix from_triplets(const Triplets& entries, int rows, int cols)
{
    SparseMatrix m(rows, cols);
    m.setFromTriplets(entries.begin(), entries.end());
    m.makeCompressed();
    return m;
}

// Volume integral sum_q w_q kernel(q, i, j) over all elements.
template <class Kernel>
SparseMatrix assemble_volume(const FeSpace& space, int degree, Kernel&& kernel)
{
    const Mesh& mesh = space.mesh();
    const BasisTable table(space.order(), triangle_quadrature(degree));
    const int n = space.dofs_per_element();
    ElementBasis basis;
    Triplets entries;
    entries.reserve(static_cast<std::size_t>(mesh.num_triangles()) * n * n);
    Eigen::MatrixXd local(n, n);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        table.fill(mesh, t, basis);
        local.setZero();
        for (std::size_t q = 0; q < basis.weights.size(); ++q) {
            kernel(basis, q, local);
        }
        const auto dofs = space.element_dofs(t);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                entries.emplace_back(dofs[i], dofs[j], local(i, j));
            }
        }
    }
    return from_triplets(entries, space.num_dofs(), space.num_dofs());
}

// Physical gradients of all local basis functions of element t at x.
void gradients_at(const FeSpace& space, const ElementMap& map, const Point& x, std::span<Point> out)
{
    space.reference().gradients(map.to_reference(x), out);
    const Eigen::Matrix2d jit = map.inverse.transpose();
    for (auto& g : out) {
        g = jit * g;
    }
}

SparseMatrix global_mass(const FeSpace& space, int degree) { return assemble_mass(space, degree); }

SparseMatrix global_stiffness(const FeSpace& space)
{
    const int n = space.dofs_per_element();
    return assemble_volume(space, 2 * space.order(), [n](const ElementBasis& b, std::size_t q, Eigen::MatrixXd& local) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                local(i, j) += b.weights[q] * b.gradients[q * n + i].dot(b.gradients[q * n + j]);
            }
        }
    });
}

SparseMatrix global_weighted_mass(const FeSpace& space, const PointFunction& weight, int degree)
{
    const int n = space.dofs_per_element();
    return assemble_volume(space, degree, [&](const ElementBasis& b, std::size_t q, Eigen::MatrixXd& local) {
        const double w = b.weights[q] * weight(b.points[q]);
        if (w == 0.0) {
            return;
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                local(i, j) += w * b.values[q * n + i] * b.values[q * n + j];
            }
        }
    });
}

// Integral of (L_h phi_i) * g_j where g_j is phi_j or L_h phi_j.
SparseMatrix global_schrodinger_pairing(const FeSpace& space, const PointFunction& potential, bool both_sides)
{
    const int n = space.dofs_per_element();
    std::vector<double> lphi(static_cast<std::size_t>(n));
    return assemble_volume(space, 2 * space.order() + 2,
                           [&](const ElementBasis& b, std::size_t q, Eigen::MatrixXd& local) {
                               const double p = potential ? potential(b.points[q]) : 0.0;
                               for (int i = 0; i < n; ++i) {
                                   lphi[i] = -b.laplacians[q * n + i] + p * b.values[q * n + i];
                               }
                               for (int i = 0; i < n; ++i) {
                                   for (int j = 0; j < n; ++j) {
                                       const double right = both_sides ? lphi[j] : b.values[q * n + j];
                                       local(i, j) += b.weights[q] * lphi[i] * right;
                                   }
                               }
                           });
}

Vector global_load(const FeSpace& space, const PointFunction& f, int degree)
{
    const Mesh& mesh = space.mesh();
    const BasisTable table(space.order(), triangle_quadrature(degree));
    const int n = space.dofs_per_element();
    ElementBasis basis;
    Vector load = Vector::Zero(space.num_dofs());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        table.fill(mesh, t, basis);
        const auto dofs = space.element_dofs(t);
        for (std::size_t q = 0; q < basis.weights.size(); ++q) {
            const double fw = basis.weights[q] * f(basis.points[q]);
            if (fw == 0.0) {
                continue;
            }
            for (int i = 0; i < n; ++i) {
                load[dofs[i]] += fw * basis.values[q * n + i];
            }
        }
    }
    return load;
}

} // namespace

AssembledForm assemble_l2_mass(const FeSpace& space)
{
    return {restrict_matrix(global_mass(space, 2 * space.order()), space, space), "mass", space.mesh().h(), 1.0};
}

AssembledForm assemble_a(const FeSpace& trial, const FeSpace& test, const PointFunction& potential)
{
    UCSTAB_REQUIRE(trial.compatible(test), InvalidArgument, "trial and test spaces live on different meshes");
    SparseMatrix global = global_stiffness(trial);
    if (potential) {
        global += global_weighted_mass(trial, potential, 2 * trial.order() + 2);
    }
    return {restrict_matrix(global, test, trial), "a", trial.mesh().h(), 1.0};
}

AssembledForm assemble_jump(const FeSpace& space)
{
    const Mesh& mesh = space.mesh();
    const double h = mesh.h();
    const int n = space.dofs_per_element();
    const LineQuadrature line = gauss_legendre(space.order() + 1);
    std::vector<Point> g1(static_cast<std::size_t>(n)), g2(static_cast<std::size_t>(n));
    std::vector<double> jump(static_cast<std::size_t>(2 * n));
    std::vector<int> dofs(static_cast<std::size_t>(2 * n));
    Triplets entries;
    entries.reserve(mesh.interior_faces().size() * 4 * n * n);
    Eigen::MatrixXd local(2 * n, 2 * n);
    for (const auto& face : mesh.interior_faces()) {
        const ElementMap m1 = element_map(mesh, face.k1);
        const ElementMap m2 = element_map(mesh, face.k2);
        const Point a = mesh.vertices()[mesh.edges()[face.edge][0]];
        const Point b = mesh.vertices()[mesh.edges()[face.edge][1]];
        const auto d1 = space.element_dofs(face.k1);
        const auto d2 = space.element_dofs(face.k2);
        std::copy(d1.begin(), d1.end(), dofs.begin());
        std::copy(d2.begin(), d2.end(), dofs.begin() + n);
        local.setZero();
        for (std::size_t q = 0; q < line.points.size(); ++q) {
            const Point x = a + line.points[q] * (b - a);
            gradients_at(space, m1, x, g1);
            gradients_at(space, m2, x, g2);
            for (int i = 0; i < n; ++i) {
                jump[i] = g1[i].dot(face.normal);
                jump[n + i] = -g2[i].dot(face.normal);
            }
            const double w = h * line.weights[q] * face.length;
            for (int i = 0; i < 2 * n; ++i) {
                for (int j = 0; j < 2 * n; ++j) {
                    local(i, j) += w * jump[i] * jump[j];
                }
            }
        }
        for (int i = 0; i < 2 * n; ++i) {
            for (int j = 0; j < 2 * n; ++j) {
                entries.emplace_back(dofs[i], dofs[j], local(i, j));
            }
        }
    }
    const SparseMatrix global = from_triplets(entries, space.num_dofs(), space.num_dofs());
    return {restrict_matrix(global, space, space), "jump", h, 1.0};
}

AssembledForm assemble_residual_term(const FeSpace& space, const PointFunction& potential)
{
    const double h = space.mesh().h();
    SparseMatrix global = global_schrodinger_pairing(space, potential, true);
    global *= h * h;
    return {restrict_matrix(global, space, space), "residual", h, h * h};
}

AssembledForm assemble_boundary_normal(const FeSpace& space)
{
    const Mesh& mesh = space.mesh();
    const double h = mesh.h();
    const int n = space.dofs_per_element();
    const LineQuadrature line = gauss_legendre(space.order() + 1);
    std::vector<Point> g(static_cast<std::size_t>(n));
    std::vector<double> dn(static_cast<std::size_t>(n));
    Triplets entries;
    Eigen::MatrixXd local(n, n);
    for (const auto& face : mesh.boundary_faces()) {
        const ElementMap map = element_map(mesh, face.owner);
        const Point a = mesh.vertices()[mesh.edges()[face.edge][0]];
        const Point b = mesh.vertices()[mesh.edges()[face.edge][1]];
        local.setZero();
        for (std::size_t q = 0; q < line.points.size(); ++q) {
            gradients_at(space, map, a + line.points[q] * (b - a), g);
            for (int i = 0; i < n; ++i) {
                dn[i] = g[i].dot(face.normal);
            }
            const double w = h * line.weights[q] * face.length;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    local(i, j) += w * dn[i] * dn[j];
                }
            }
        }
        const auto dofs = space.element_dofs(face.owner);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                entries.emplace_back(dofs[i], dofs[j], local(i, j));
            }
        }
    }
    const SparseMatrix global = from_triplets(entries, space.num_dofs(), space.num_dofs());
    return {restrict_matrix(global, space, space), "boundary_normal", h, 1.0};
}

AssembledForm assemble_h1_inner(const FeSpace& space, TikhonovInner inner)
{
    SparseMatrix global = global_stiffness(space);
    if (inner == TikhonovInner::FullH1) {
        global += global_mass(space, 2 * space.order());
    }
    return {restrict_matrix(global, space, space), inner == TikhonovInner::FullH1 ? "h1" : "h1_seminorm",
            space.mesh().h(), 1.0};
}

AssembledForm compose_primal_stabilizer(const StabilizationParams& params, const AssembledForm& jump,
                                        const AssembledForm& residual, const AssembledForm& h1_inner)
{
    params.validate();
    const double w = params.primal_tikhonov_weight(jump.h);
    SparseMatrix m = jump.matrix + residual.matrix;
    if (w != 0.0) {
        m += w * h1_inner.matrix;
    }
    return {m, "s_h", jump.h, w};
}

AssembledForm compose_dual_stabilizer(const StabilizationParams& params, const AssembledForm& jump,
                                      const AssembledForm& boundary, const AssembledForm& residual,
                                      const AssembledForm& h1_inner)
{
    params.validate();
    UCSTAB_REQUIRE(!(params.eta_infinite() && params.tikhonov_off), InvalidArgument,
                   "degenerate dual block: eta = inf removes the stabilizer and the Tikhonov term is off");
    const double h = jump.h;
    SparseMatrix m(h1_inner.matrix.rows(), h1_inner.matrix.cols());
    if (!params.eta_infinite()) {
        m = params.dual_stabilizer_weight(h) * (jump.matrix + boundary.matrix + residual.matrix);
    }
    const double wt = params.dual_tikhonov_weight(h);
    if (wt != 0.0) {
        m += wt * h1_inner.matrix;
    }
    return {m, "s*_h", h, wt};
}

Vector assemble_G(const FeSpace& space, const FeFunction& f_h, const PointFunction& potential)
{
    UCSTAB_REQUIRE(f_h.space().compatible(space), InvalidArgument, "f_h lives on another mesh or order");
    const double h = space.mesh().h();
    const SparseMatrix pairing = global_schrodinger_pairing(space, potential, false);
    const Vector g = (h * h) * (pairing * f_h.global_coefficients());
    return restrict_vector(g, space);
}

DataTerm assemble_data_term(const FeSpace& space, const SubdomainIndicator& omega, const PointFunction& q,
                            double alpha)
{
    const double h = space.mesh().h();
    const double w = std::pow(h, -2.0 * alpha);
    const int degree = 2 * space.order() + 2;
    const auto indicator = [&](const Point& x) { return omega(x) ? 1.0 : 0.0; };
    SparseMatrix mass = global_weighted_mass(space, indicator, degree);
    UCSTAB_REQUIRE(mass.norm() > 0.0, InvalidArgument,
                   "subdomain '" + omega.label + "' contains no quadrature point (no data)");
    Vector rhs = Vector::Zero(space.num_dofs());
    if (q) {
        rhs = global_load(space, [&](const Point& x) { return omega(x) ? q(x) : 0.0; }, degree);
    }
    DataTerm term;
    term.form = {restrict_matrix(SparseMatrix(w * mass), space, space), "data_" + omega.label, h, w};
    term.rhs = w * restrict_vector(rhs, space);
    return term;
}

Vector assemble_line_source(const FeSpace& space, const MeshLine& line)
{
    const Mesh& mesh = space.mesh();
    UCSTAB_REQUIRE(mesh.is_mesh_line(line), InvalidArgument, "segment is not a union of mesh edges");
    std::vector<int> owner(static_cast<std::size_t>(mesh.num_edges()), -1);
    for (const auto& f : mesh.interior_faces()) {
        owner[f.edge] = f.k1;
    }
    for (const auto& f : mesh.boundary_faces()) {
        owner[f.edge] = f.owner;
    }
    const int n = space.dofs_per_element();
    const LineQuadrature rule = gauss_legendre(space.order() + 1);
    std::vector<double> values(static_cast<std::size_t>(n));
    Vector global = Vector::Zero(space.num_dofs());
    for (int e : mesh.edges_on_line(line)) {
        const int t = owner[e];
        const ElementMap map = element_map(mesh, t);
        const Point a = mesh.vertices()[mesh.edges()[e][0]];
        const Point b = mesh.vertices()[mesh.edges()[e][1]];
        const double length = (b - a).norm();
        const auto dofs = space.element_dofs(t);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            space.reference().values(map.to_reference(a + rule.points[q] * (b - a)), values);
            for (int i = 0; i < n; ++i) {
                global[dofs[i]] += rule.weights[q] * length * values[i];
            }
        }
    }
    return restrict_vector(global, space);
}

Vector assemble_load(const FeSpace& space, const PointFunction& f)
{
    return restrict_vector(global_load(space, f, 2 * space.order() + 2), space);
}

Vector assemble_source(const FeSpace& space, const Source& source)
{
    if (const auto* f = std::get_if<PointFunction>(&source)) {
        return assemble_load(space, *f);
    }
    if (const auto* line = std::get_if<LineSource>(&source)) {
        return assemble_line_source(space, line->segment);
    }
    return Vector::Zero(space.num_free());
}

} // namespace ucstab
