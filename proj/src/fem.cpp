#include "ucstab/fem.hpp"

#include "ucstab/error.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace ucstab {

// -- Quadrature ---------------------------------------------------------------

namespace {

// Legendre polynomial P_n(x) and its derivative.
std::pair<double, double> legendre(int n, double x)
{
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

} // namespace

LineQuadrature gauss_legendre(int n)
{
    UCSTAB_REQUIRE(n >= 1, InvalidArgument, "need at least one point");
    LineQuadrature rule;
    rule.points.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, dp] = legendre(n, x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        const double dp = legendre(n, x).second;
        rule.points[i] = 0.5 * (1.0 - x);
        rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

namespace {

Quadrature collapsed_rule(int degree)
{
    // The Duffy map (u, v) -> (u, v (1 - u)) turns a degree-d polynomial times
    // the Jacobian (1 - u) into degree d + 1 in u and d in v.
    const int n = (degree + 3) / 2;
    const LineQuadrature gl = gauss_legendre(n);
    Quadrature rule;
    rule.degree = degree;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double u = gl.points[i];
            const double v = gl.points[j];
            const double xi = u;
            const double eta = v * (1.0 - u);
            rule.points.emplace_back(xi, eta);
            rule.barycentric.push_back({1.0 - xi - eta, xi, eta});
            rule.weights.push_back(gl.weights[i] * gl.weights[j] * (1.0 - u));
        }
    }
    return rule;
}

} // namespace

const Quadrature& triangle_quadrature(int degree)
{
    UCSTAB_REQUIRE(degree >= 0 && degree <= 40, InvalidArgument, "unsupported quadrature degree");
    static std::mutex mutex;
    static std::map<int, Quadrature> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(degree);
    if (it == cache.end()) {
        it = cache.emplace(degree, collapsed_rule(degree)).first;
    }
    return it->second;
}

// -- Reference element -----------------------------------------------------------

ReferenceElement::ReferenceElement(int order) : order_(order)
{
    UCSTAB_REQUIRE(order >= 1 && order <= 3, InvalidArgument, "order must be 1, 2 or 3");
    const std::array<Point, 3> vertices{Point(0.0, 0.0), Point(1.0, 0.0), Point(0.0, 1.0)};
    nodes_.assign(vertices.begin(), vertices.end());
    for (int e = 0; e < 3; ++e) {
        const Point& a = vertices[e];
        const Point& b = vertices[(e + 1) % 3];
        for (int k = 1; k < order; ++k) {
            const double t = static_cast<double>(k) / order;
            nodes_.push_back((1.0 - t) * a + t * b);
        }
    }
    for (int j = 1; j < order; ++j) {
        for (int i = 1; i + j < order; ++i) {
            nodes_.emplace_back(static_cast<double>(i) / order, static_cast<double>(j) / order);
        }
    }
    for (int total = 0; total <= order; ++total) {
        for (int b = 0; b <= total; ++b) {
            exponents_.push_back({total - b, b});
        }
    }
    const int n = num_basis();
    Eigen::MatrixXd vandermonde(n, n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            vandermonde(i, k) = std::pow(nodes_[i].x(), exponents_[k][0]) * std::pow(nodes_[i].y(), exponents_[k][1]);
        }
    }
    coefficients_ = vandermonde.inverse();
}

const ReferenceElement& ReferenceElement::get(int order)
{
    static const std::array<ReferenceElement, 3> elements{ReferenceElement(1), ReferenceElement(2),
                                                          ReferenceElement(3)};
    UCSTAB_REQUIRE(order >= 1 && order <= 3, InvalidArgument, "order must be 1, 2 or 3");
    return elements[order - 1];
}

namespace {

double ipow(double x, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i) {
        r *= x;
    }
    return r;
}

} // namespace

void ReferenceElement::values(const Point& xi, std::span<double> out) const
{
    const int n = num_basis();
    for (int j = 0; j < n; ++j) {
        double v = 0.0;
        for (int k = 0; k < n; ++k) {
            v += coefficients_(k, j) * ipow(xi.x(), exponents_[k][0]) * ipow(xi.y(), exponents_[k][1]);
        }
        out[j] = v;
    }
}

void ReferenceElement::gradients(const Point& xi, std::span<Point> out) const
{
    const int n = num_basis();
    for (int j = 0; j < n; ++j) {
        Point g = Point::Zero();
        for (int k = 0; k < n; ++k) {
            const auto [a, b] = exponents_[k];
            if (a > 0) {
                g.x() += coefficients_(k, j) * a * ipow(xi.x(), a - 1) * ipow(xi.y(), b);
            }
            if (b > 0) {
                g.y() += coefficients_(k, j) * b * ipow(xi.x(), a) * ipow(xi.y(), b - 1);
            }
        }
        out[j] = g;
    }
}

void ReferenceElement::hessians(const Point& xi, std::span<std::array<double, 3>> out) const
{
    const int n = num_basis();
    for (int j = 0; j < n; ++j) {
        std::array<double, 3> h{0.0, 0.0, 0.0};
        for (int k = 0; k < n; ++k) {
            const auto [a, b] = exponents_[k];
            const double c = coefficients_(k, j);
            if (a > 1) {
                h[0] += c * a * (a - 1) * ipow(xi.x(), a - 2) * ipow(xi.y(), b);
            }
            if (a > 0 && b > 0) {
                h[1] += c * a * b * ipow(xi.x(), a - 1) * ipow(xi.y(), b - 1);
            }
            if (b > 1) {
                h[2] += c * b * (b - 1) * ipow(xi.x(), a) * ipow(xi.y(), b - 2);
            }
        }
        out[j] = h;
    }
}

// -- Element geometry ---------------------------------------------------------------

ElementMap element_map(const Mesh& mesh, int t)
{
    UCSTAB_REQUIRE(t >= 0 && t < mesh.num_triangles(), InvalidArgument, "element index out of range");
    const auto& tri = mesh.triangles()[t];
    const auto v = mesh.vertices();
    ElementMap m;
    m.origin = v[tri[0]];
    m.jacobian.col(0) = v[tri[1]] - v[tri[0]];
    m.jacobian.col(1) = v[tri[2]] - v[tri[0]];
    m.det = m.jacobian.determinant();
    m.inverse = m.jacobian.inverse();
    return m;
}

// -- Spaces ----------------------------------------------------------------------

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh, int order, bool constrained)
    : mesh_(std::move(mesh)), order_(order), constrained_(constrained)
{
    UCSTAB_REQUIRE(mesh_ != nullptr, InvalidArgument, "null mesh");
    UCSTAB_REQUIRE(order >= 1 && order <= 3, InvalidArgument, "order must be 1, 2 or 3");
    const int nv = mesh_->num_vertices();
    const int ne = mesh_->num_edges();
    const int nt = mesh_->num_triangles();
    const int per_edge = order - 1;
    const int per_cell = (order - 1) * (order - 2) / 2;
    const int total = nv + per_edge * ne + per_cell * nt;
    const int nloc = dofs_per_element();

    coordinates_.assign(static_cast<std::size_t>(total), Point::Zero());
    boundary_.assign(static_cast<std::size_t>(total), false);
    element_dofs_.resize(static_cast<std::size_t>(nt) * nloc);
    const auto& ref = ReferenceElement::get(order);

    for (int t = 0; t < nt; ++t) {
        const auto& tri = mesh_->triangles()[t];
        const ElementMap map = element_map(*mesh_, t);
        int* dofs = element_dofs_.data() + static_cast<std::size_t>(t) * nloc;
        int local = 0;
        for (int i = 0; i < 3; ++i) {
            dofs[local++] = tri[i];
        }
        for (int e = 0; e < 3; ++e) {
            const int edge = mesh_->triangle_edge(t, e);
            const bool forward = tri[e] < tri[(e + 1) % 3];
            for (int k = 0; k < per_edge; ++k) {
                const int pos = forward ? k : per_edge - 1 - k;
                dofs[local++] = nv + edge * per_edge + pos;
            }
        }
        for (int k = 0; k < per_cell; ++k) {
            dofs[local++] = nv + per_edge * ne + t * per_cell + k;
        }
        for (int i = 0; i < nloc; ++i) {
            coordinates_[dofs[i]] = map.to_physical(ref.nodes()[i]);
        }
    }
    for (int v = 0; v < nv; ++v) {
        boundary_[v] = mesh_->is_boundary_vertex(v);
    }
    for (int e = 0; e < ne; ++e) {
        if (mesh_->is_boundary_edge(e)) {
            for (int k = 0; k < per_edge; ++k) {
                boundary_[nv + e * per_edge + k] = true;
            }
        }
    }
    global_to_free_.assign(static_cast<std::size_t>(total), -1);
    for (int g = 0; g < total; ++g) {
        if (!constrained_ || !boundary_[g]) {
            global_to_free_[g] = static_cast<int>(free_to_global_.size());
            free_to_global_.push_back(g);
        }
    }
}

SparseMatrix FeSpace::restriction() const
{
    SparseMatrix r(num_free(), num_dofs());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(free_to_global_.size());
    for (int i = 0; i < num_free(); ++i) {
        entries.emplace_back(i, free_to_global_[i], 1.0);
    }
    r.setFromTriplets(entries.begin(), entries.end());
    return r;
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> space)
    : space_(std::move(space)), coefficients_(Vector::Zero(space_->num_free()))
{
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> space, Vector coefficients)
    : space_(std::move(space)), coefficients_(std::move(coefficients))
{
    UCSTAB_REQUIRE(coefficients_.size() == space_->num_free(), InvalidArgument,
                   "coefficient length does not match the free DOF count");
}

Vector FeFunction::global_coefficients() const
{
    Vector g = Vector::Zero(space_->num_dofs());
    const auto f2g = space_->free_to_global();
    for (int i = 0; i < space_->num_free(); ++i) {
        g[f2g[i]] = coefficients_[i];
    }
    return g;
}

ValueGradient eval(const FeFunction& f, int element, const Point& xi)
{
    const FeSpace& space = f.space();
    UCSTAB_REQUIRE(element >= 0 && element < space.mesh().num_triangles(), InvalidArgument,
                   "element index out of range");
    const auto& ref = space.reference();
    const int n = ref.num_basis();
    std::array<double, 10> values{};
    std::array<Point, 10> grads{};
    ref.values(xi, std::span(values.data(), n));
    ref.gradients(xi, std::span(grads.data(), n));
    const ElementMap map = element_map(space.mesh(), element);
    const Eigen::Matrix2d jit = map.inverse.transpose();
    ValueGradient out;
    const auto dofs = space.element_dofs(element);
    for (int i = 0; i < n; ++i) {
        const int free = space.free_index(dofs[i]);
        if (free < 0) {
            continue;
        }
        const double c = f.coefficients()[free];
        out.value += c * values[i];
        out.gradient += c * (jit * grads[i]);
    }
    return out;
}

FeFunction nodal_interpolate(std::shared_ptr<const FeSpace> space, const PointFunction& g)
{
    Vector c(space->num_free());
    const auto coords = space->dof_coordinates();
    const auto f2g = space->free_to_global();
    for (int i = 0; i < space->num_free(); ++i) {
        const double v = g(coords[f2g[i]]);
        UCSTAB_REQUIRE(std::isfinite(v), InvalidArgument, "non-finite sample value");
        c[i] = v;
    }
    return FeFunction(std::move(space), std::move(c));
}

FeFunction prolongate(const FeFunction& coarse, std::shared_ptr<const FeSpace> fine)
{
    const Mesh& fine_mesh = fine->mesh();
    const Mesh& coarse_mesh = coarse.space().mesh();
    const auto coords = fine->dof_coordinates();
    Vector c(fine->num_free());
    std::vector<bool> done(static_cast<std::size_t>(fine->num_dofs()), false);
    for (int t = 0; t < fine_mesh.num_triangles(); ++t) {
        const int parent = fine_mesh.parent(t);
        UCSTAB_REQUIRE(parent >= 0 && parent < coarse_mesh.num_triangles(), InvalidArgument,
                       "fine mesh is not a refinement of the coarse mesh");
        const ElementMap map = element_map(coarse_mesh, parent);
        for (int g : fine->element_dofs(t)) {
            const int free = fine->free_index(g);
            if (free < 0 || done[g]) {
                continue;
            }
            done[g] = true;
            c[free] = eval(coarse, parent, map.to_reference(coords[g])).value;
        }
    }
    return FeFunction(std::move(fine), std::move(c));
}

BasisTable::BasisTable(int order, const Quadrature& rule) : rule_(&rule)
{
    const auto& ref = ReferenceElement::get(order);
    n_ = ref.num_basis();
    const std::size_t nq = rule.size();
    values_.resize(nq * n_);
    gradients_.resize(nq * n_);
    hessians_.resize(nq * n_);
    for (std::size_t q = 0; q < nq; ++q) {
        ref.values(rule.points[q], std::span(values_.data() + q * n_, n_));
        ref.gradients(rule.points[q], std::span(gradients_.data() + q * n_, n_));
        ref.hessians(rule.points[q], std::span(hessians_.data() + q * n_, n_));
    }
}

void BasisTable::fill(const Mesh& mesh, int t, ElementBasis& out) const
{
    out.map = element_map(mesh, t);
    out.num_basis = n_;
    const std::size_t nq = rule_->size();
    out.points.resize(nq);
    out.weights.resize(nq);
    out.values = values_;
    out.gradients.resize(nq * n_);
    out.laplacians.resize(nq * n_);
    const Eigen::Matrix2d& inv = out.map.inverse;
    const Eigen::Matrix2d jit = inv.transpose();
    const double absdet = std::abs(out.map.det);
    for (std::size_t q = 0; q < nq; ++q) {
        out.points[q] = out.map.to_physical(rule_->points[q]);
        out.weights[q] = rule_->weights[q] * absdet;
        for (int i = 0; i < n_; ++i) {
            const std::size_t k = q * n_ + i;
            out.gradients[k] = jit * gradients_[k];
            const auto& h = hessians_[k];
            Eigen::Matrix2d href;
            href << h[0], h[1], h[1], h[2];
            out.laplacians[k] = (jit * href * inv).trace();
        }
    }
}

SparseMatrix assemble_mass(const FeSpace& space, int degree)
{
    const Mesh& mesh = space.mesh();
    const BasisTable table(space.order(), triangle_quadrature(degree));
    ElementBasis basis;
    const int n = space.dofs_per_element();
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(mesh.num_triangles()) * n * n);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        table.fill(mesh, t, basis);
        const auto dofs = space.element_dofs(t);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double v = 0.0;
                for (std::size_t q = 0; q < basis.weights.size(); ++q) {
                    v += basis.weights[q] * basis.values[q * n + i] * basis.values[q * n + j];
                }
                entries.emplace_back(dofs[i], dofs[j], v);
            }
        }
    }
    SparseMatrix m(space.num_dofs(), space.num_dofs());
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

SparseMatrix restrict_matrix(const SparseMatrix& global, const FeSpace& rows, const FeSpace& cols)
{
    UCSTAB_REQUIRE(global.rows() == rows.num_dofs() && global.cols() == cols.num_dofs(), InvalidArgument,
                   "matrix does not match the spaces");
    SparseMatrix r = rows.restriction() * global * SparseMatrix(cols.restriction().transpose());
    r.makeCompressed();
    return r;
}

FeFunction l2_project_onto_constrained(std::shared_ptr<const FeSpace> space, const Vector& rhs)
{
    UCSTAB_REQUIRE(rhs.size() == space->num_free(), InvalidArgument, "rhs length does not match free DOF count");
    const SparseMatrix mass = restrict_matrix(assemble_mass(*space, 2 * space->order()), *space, *space);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(mass);
    UCSTAB_REQUIRE(ldlt.info() == Eigen::Success, SolverError, "singular mass matrix");
    Vector c = ldlt.solve(rhs);
    const double scale = std::max(rhs.norm(), std::numeric_limits<double>::min());
    UCSTAB_REQUIRE((mass * c - rhs).norm() <= 1e-12 * scale || rhs.norm() == 0.0, SolverError,
                   "mass solve residual too large");
    return FeFunction(std::move(space), std::move(c));
}

ElementwiseField elementwise_schrodinger(const FeSpace& space, const PointFunction& potential, const FeFunction& f)
{
    UCSTAB_REQUIRE(f.space().compatible(space), InvalidArgument, "function lives on another space");
    const int degree = 2 * space.order() + 2;
    const BasisTable table(space.order(), triangle_quadrature(degree));
    const Vector c = f.global_coefficients();
    ElementBasis basis;
    const int n = space.dofs_per_element();
    ElementwiseField out;
    out.degree = degree;
    out.values.resize(static_cast<std::size_t>(space.mesh().num_triangles()));
    for (int t = 0; t < space.mesh().num_triangles(); ++t) {
        table.fill(space.mesh(), t, basis);
        const auto dofs = space.element_dofs(t);
        auto& vals = out.values[t];
        vals.assign(basis.weights.size(), 0.0);
        for (std::size_t q = 0; q < basis.weights.size(); ++q) {
            const double pq = potential ? potential(basis.points[q]) : 0.0;
            double v = 0.0;
            for (int i = 0; i < n; ++i) {
                v += c[dofs[i]] * (-basis.laplacians[q * n + i] + pq * basis.values[q * n + i]);
            }
            vals[q] = v;
        }
    }
    return out;
}

} // namespace ucstab
