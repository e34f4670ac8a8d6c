#pragma once

#include "ucstab/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ucstab {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using PointFunction = std::function<double(const Point&)>;

// -- Quadrature ---------------------------------------------------------------

/// Rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
struct Quadrature {
    std::vector<std::array<double, 3>> barycentric;
    std::vector<Point> points;
    std::vector<double> weights;
    int degree = 0;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
};

/// Gauss-Legendre rule with n points on [0, 1].
struct LineQuadrature {
    std::vector<double> points;
    std::vector<double> weights;
};

[[nodiscard]] LineQuadrature gauss_legendre(int n);

/// Collapsed Gauss-Legendre rule exact for polynomials of total degree <= degree.
[[nodiscard]] const Quadrature& triangle_quadrature(int degree);

// -- Reference element -----------------------------------------------------------

/// Lagrange element of order 1..3 on the reference triangle.
///
/// Local node order: the three vertices, then p - 1 nodes per edge (edge e runs
/// from vertex e to vertex (e + 1) % 3), then interior nodes.
class ReferenceElement {
public:
    explicit ReferenceElement(int order);

    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] int num_basis() const noexcept { return static_cast<int>(nodes_.size()); }
    [[nodiscard]] std::span<const Point> nodes() const noexcept { return nodes_; }

    void values(const Point& xi, std::span<double> out) const;
    void gradients(const Point& xi, std::span<Point> out) const;
    /// Second derivatives (d_xx, d_xy, d_yy) in reference coordinates.
    void hessians(const Point& xi, std::span<std::array<double, 3>> out) const;

    static const ReferenceElement& get(int order);

private:
    int order_;
    std::vector<Point> nodes_;
    std::vector<std::array<int, 2>> exponents_;
    Eigen::MatrixXd coefficients_; // column j holds the monomial coefficients of basis j
};

// -- Element geometry ---------------------------------------------------------------

struct ElementMap {
    Point origin;
    Eigen::Matrix2d jacobian;
    Eigen::Matrix2d inverse;
    double det = 0.0;

    [[nodiscard]] Point to_physical(const Point& xi) const { return origin + jacobian * xi; }
    [[nodiscard]] Point to_reference(const Point& x) const { return inverse * (x - origin); }
};

[[nodiscard]] ElementMap element_map(const Mesh& mesh, int t);

// -- Spaces ----------------------------------------------------------------------

/// Continuous Lagrange space V_h^p, or its subspace W_h^p of functions
/// vanishing on the boundary when constrained.
///
/// Global DOFs are numbered vertices first, then p - 1 per edge in edge order
/// (running from the lower to the higher vertex index), then interior DOFs per
/// triangle. Free DOFs keep the global order with boundary DOFs removed.
class FeSpace {
public:
    FeSpace(std::shared_ptr<const Mesh> mesh, int order, bool constrained);

    [[nodiscard]] const Mesh& mesh() const noexcept { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] bool constrained() const noexcept { return constrained_; }
    [[nodiscard]] const ReferenceElement& reference() const { return ReferenceElement::get(order_); }

    [[nodiscard]] int num_dofs() const noexcept { return static_cast<int>(coordinates_.size()); }
    [[nodiscard]] int num_free() const noexcept { return static_cast<int>(free_to_global_.size()); }
    [[nodiscard]] int dofs_per_element() const noexcept { return (order_ + 1) * (order_ + 2) / 2; }

    [[nodiscard]] std::span<const int> element_dofs(int t) const
    {
        return {element_dofs_.data() + static_cast<std::size_t>(t) * dofs_per_element(),
                static_cast<std::size_t>(dofs_per_element())};
    }
    [[nodiscard]] std::span<const Point> dof_coordinates() const noexcept { return coordinates_; }
    [[nodiscard]] bool is_boundary_dof(int g) const { return boundary_[g]; }

    /// Free index of a global DOF, or -1 when it is constrained.
    [[nodiscard]] int free_index(int g) const { return global_to_free_[g]; }
    [[nodiscard]] std::span<const int> free_to_global() const noexcept { return free_to_global_; }

    /// Sparse selection matrix (num_free x num_dofs).
    [[nodiscard]] SparseMatrix restriction() const;

    /// Spaces sharing mesh and order share the global DOF numbering.
    [[nodiscard]] bool compatible(const FeSpace& other) const
    {
        return mesh_ == other.mesh_ && order_ == other.order_;
    }

private:
    std::shared_ptr<const Mesh> mesh_;
    int order_;
    bool constrained_;
    std::vector<int> element_dofs_;
    std::vector<Point> coordinates_;
    std::vector<bool> boundary_;
    std::vector<int> global_to_free_;
    std::vector<int> free_to_global_;
};

/// Coefficients over the free DOFs of a space.
class FeFunction {
public:
    explicit FeFunction(std::shared_ptr<const FeSpace> space);
    FeFunction(std::shared_ptr<const FeSpace> space, Vector coefficients);

    [[nodiscard]] const FeSpace& space() const noexcept { return *space_; }
    [[nodiscard]] const std::shared_ptr<const FeSpace>& space_ptr() const noexcept { return space_; }
    [[nodiscard]] const Vector& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] Vector& coefficients() noexcept { return coefficients_; }

    /// Coefficients over all global DOFs; constrained DOFs are zero.
    [[nodiscard]] Vector global_coefficients() const;

private:
    std::shared_ptr<const FeSpace> space_;
    Vector coefficients_;
};

struct ValueGradient {
    double value = 0.0;
    Point gradient = Point::Zero();
};

/// Value and physical gradient at a reference point of an element.
[[nodiscard]] ValueGradient eval(const FeFunction& f, int element, const Point& xi);

/// Lagrange interpolant matching g at every free DOF node.
[[nodiscard]] FeFunction nodal_interpolate(std::shared_ptr<const FeSpace> space, const PointFunction& g);

/// Basis data of one element at the points of a quadrature rule, in physical
/// coordinates: entry [q * n + i] belongs to quadrature point q and local basis i.
struct ElementBasis {
    ElementMap map;
    std::vector<Point> points;     // physical quadrature points
    std::vector<double> weights;   // physical weights (include |det J|)
    std::vector<double> values;
    std::vector<Point> gradients;
    std::vector<double> laplacians;
    int num_basis = 0;
};

/// Interpolates a function on a coarse mesh into a space on a mesh refined
/// from it (the fine mesh must carry the parent map).
[[nodiscard]] FeFunction prolongate(const FeFunction& coarse, std::shared_ptr<const FeSpace> fine);

/// Precomputed reference tables for one (order, rule) pair.
class BasisTable {
public:
    BasisTable(int order, const Quadrature& rule);

    void fill(const Mesh& mesh, int t, ElementBasis& out) const;
    [[nodiscard]] const Quadrature& rule() const noexcept { return *rule_; }

private:
    const Quadrature* rule_;
    int n_;
    std::vector<double> values_;
    std::vector<Point> gradients_;
    std::vector<std::array<double, 3>> hessians_;
};

/// Global mass matrix over all DOFs of the space (ignores constraints).
[[nodiscard]] SparseMatrix assemble_mass(const FeSpace& space, int degree);

/// Restricts a matrix over global DOFs to the free DOFs of the two spaces.
[[nodiscard]] SparseMatrix restrict_matrix(const SparseMatrix& global, const FeSpace& rows, const FeSpace& cols);

/// Finds f_h in the constrained space with (f_h, w) = rhs(w) for every basis w.
[[nodiscard]] FeFunction l2_project_onto_constrained(std::shared_ptr<const FeSpace> space, const Vector& rhs);

/// Elementwise -Laplace(f) + P f sampled at the points of a quadrature rule.
struct ElementwiseField {
    int degree = 0;
    std::vector<std::vector<double>> values; // per element, per quadrature point
};

[[nodiscard]] ElementwiseField elementwise_schrodinger(const FeSpace& space, const PointFunction& potential,
                                                       const FeFunction& f);

} // namespace ucstab
