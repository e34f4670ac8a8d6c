#include "ucstab/error.hpp"
#include "ucstab/fem.hpp"
#include "ucstab/problem.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ucstab;
using namespace ucstab::testing;

namespace {

// Integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
double monomial_integral(int a, int b)
{
    return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
}

} // namespace

TEST(Quadrature, GaussLegendreIntegratesPolynomials)
{
    for (int n = 1; n <= 8; ++n) {
        const LineQuadrature rule = gauss_legendre(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double sum = 0.0;
            for (std::size_t q = 0; q < rule.points.size(); ++q) {
                sum += rule.weights[q] * std::pow(rule.points[q], k);
            }
            EXPECT_NEAR(sum, 1.0 / (k + 1), 1e-14) << "n = " << n << ", k = " << k;
        }
    }
}

TEST(Quadrature, TriangleRulesAreExact)
{
    for (int degree = 0; degree <= 10; ++degree) {
        const Quadrature& rule = triangle_quadrature(degree);
        EXPECT_GE(rule.degree, degree);
        double total = 0.0;
        for (double w : rule.weights) {
            EXPECT_GT(w, 0.0);
            total += w;
        }
        EXPECT_NEAR(total, 0.5, 1e-15);
        for (int a = 0; a <= degree; ++a) {
            for (int b = 0; a + b <= degree; ++b) {
                double sum = 0.0;
                for (std::size_t q = 0; q < rule.size(); ++q) {
                    sum += rule.weights[q] * std::pow(rule.points[q].x(), a) * std::pow(rule.points[q].y(), b);
                }
                EXPECT_NEAR(sum, monomial_integral(a, b), 1e-13) << "degree " << degree << ": x^" << a << " y^" << b;
            }
        }
    }
}

TEST(ReferenceElement, KroneckerAtNodes)
{
    for (int p = 1; p <= 3; ++p) {
        const ReferenceElement& element = ReferenceElement::get(p);
        const int n = element.num_basis();
        EXPECT_EQ(n, (p + 1) * (p + 2) / 2);
        std::vector<double> values(n);
        for (int j = 0; j < n; ++j) {
            element.values(element.nodes()[j], values);
            for (int i = 0; i < n; ++i) {
                EXPECT_NEAR(values[i], i == j ? 1.0 : 0.0, 1e-12);
            }
        }
    }
}

TEST(ReferenceElement, P1StiffnessMatchesHandValues)
{
    // Reference-triangle stiffness of the P1 basis: [[1, -1/2, -1/2], [-1/2, 1/2, 0], [-1/2, 0, 1/2]].
    const Eigen::Matrix3d expected{{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
    const ReferenceElement& element = ReferenceElement::get(1);
    const Quadrature& rule = triangle_quadrature(2);
    Eigen::Matrix3d stiffness = Eigen::Matrix3d::Zero();
    std::vector<Point> grads(3);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        element.gradients(rule.points[q], grads);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                stiffness(i, j) += rule.weights[q] * grads[i].dot(grads[j]);
            }
        }
    }
    EXPECT_LE((stiffness - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(FeSpace, LagrangeDofCounts)
{
    const auto mesh = unit_square(3);
    const int V = mesh->num_vertices(), E = mesh->num_edges(), T = mesh->num_triangles();
    for (int p = 1; p <= 3; ++p) {
        const FeSpace full(mesh, p, false);
        EXPECT_EQ(full.num_dofs(), V + (p - 1) * E + (p - 1) * (p - 2) / 2 * T);
        EXPECT_EQ(full.num_free(), full.num_dofs());

        const FeSpace constrained(mesh, p, true);
        int boundary = 0;
        for (int g = 0; g < constrained.num_dofs(); ++g) {
            if (constrained.is_boundary_dof(g)) {
                ++boundary;
                EXPECT_EQ(constrained.free_index(g), -1);
            } else {
                EXPECT_GE(constrained.free_index(g), 0);
            }
        }
        // 4n boundary vertices and 4n boundary edges carrying p - 1 nodes each.
        EXPECT_EQ(boundary, 4 * 3 * p);
        EXPECT_EQ(constrained.num_free(), constrained.num_dofs() - boundary);
    }
}

TEST(FeSpace, DofOrderingIsDeterministic)
{
    const auto a = std::make_shared<const FeSpace>(unit_square(2), 3, true);
    const auto b = std::make_shared<const FeSpace>(unit_square(2), 3, true);
    for (int t = 0; t < a->mesh().num_triangles(); ++t) {
        const auto da = a->element_dofs(t);
        const auto db = b->element_dofs(t);
        EXPECT_TRUE(std::equal(da.begin(), da.end(), db.begin()));
    }
    // Vertices come first in the global numbering.
    for (int v = 0; v < a->mesh().num_vertices(); ++v) {
        EXPECT_EQ(a->dof_coordinates()[v], a->mesh().vertices()[v]);
    }
}

TEST(Eval, LinearAndConstantReproduction)
{
    const auto mesh = unit_square(3);
    const auto space = std::make_shared<const FeSpace>(mesh, 1, false);
    Vector x(space->num_free());
    for (int g = 0; g < space->num_dofs(); ++g) {
        x[g] = space->dof_coordinates()[g].x();
    }
    const FeFunction fx(space, x);
    const FeFunction one(space, Vector::Ones(space->num_free()));
    const Point xi(0.2, 0.3);
    for (int t = 0; t < mesh->num_triangles(); ++t) {
        const Point physical = element_map(*mesh, t).to_physical(xi);
        const ValueGradient vx = eval(fx, t, xi);
        EXPECT_NEAR(vx.value, physical.x(), 1e-14);
        EXPECT_NEAR((vx.gradient - Point(1, 0)).norm(), 0.0, 1e-13);
        const ValueGradient v1 = eval(one, t, xi);
        EXPECT_NEAR(v1.value, 1.0, 1e-14);
        EXPECT_NEAR(v1.gradient.norm(), 0.0, 1e-13);
    }
    EXPECT_THROW((void)eval(fx, mesh->num_triangles(), xi), InvalidArgument);
    EXPECT_THROW((void)eval(fx, -1, xi), InvalidArgument);
}

TEST(Eval, QuadraticReproduction)
{
    const auto mesh = unit_square(2);
    const auto space = std::make_shared<const FeSpace>(mesh, 2, false);
    const FeFunction f = nodal_interpolate(space, [](const Point& p) { return p.x() * p.x(); });
    for (int t = 0; t < mesh->num_triangles(); ++t) {
        const Point xi(0.31, 0.17);
        const Point x = element_map(*mesh, t).to_physical(xi);
        const ValueGradient v = eval(f, t, xi);
        EXPECT_NEAR(v.value, x.x() * x.x(), 1e-14);
        EXPECT_NEAR(v.gradient.x(), 2.0 * x.x(), 1e-13);
    }
}

TEST(Interpolate, MatchesAtNodesAndReproducesAffine)
{
    const auto grid = unit_square(3);
    const PointFunction affine = [](const Point& p) { return 1.0 + 2.0 * p.x() - 3.0 * p.y(); };
    for (int p = 1; p <= 3; ++p) {
        const auto space = std::make_shared<const FeSpace>(grid, p, false);
        const FeFunction f = nodal_interpolate(space, affine);
        for (int g = 0; g < space->num_dofs(); ++g) {
            EXPECT_NEAR(f.coefficients()[g], affine(space->dof_coordinates()[g]), 1e-14);
        }
        for (int t = 0; t < grid->num_triangles(); ++t) {
            const Point xi(0.25, 0.4);
            EXPECT_NEAR(eval(f, t, xi).value, affine(element_map(*grid, t).to_physical(xi)), 1e-13);
        }
    }
}

TEST(Interpolate, RejectsNonFiniteSamples)
{
    const auto space = std::make_shared<const FeSpace>(unit_square(2), 1, false);
    EXPECT_THROW((void)nodal_interpolate(space, [](const Point& p) { return 1.0 / p.x(); }), InvalidArgument);
}

TEST(Interpolate, HadamardL2RateIsTwo)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    std::vector<double> h, err;
    auto mesh = std::make_shared<const Mesh>(generate(problem.domain, 8));
    for (int level = 0; level < 4; ++level) {
        const auto space = std::make_shared<const FeSpace>(mesh, 1, false);
        const FeFunction f = nodal_interpolate(space, problem.exact->value);
        h.push_back(mesh->h());
        err.push_back(std::sqrt(direct_l2_error_squared(f, problem.exact->value)));
        mesh = std::make_shared<const Mesh>(refine(*mesh));
    }
    EXPECT_NEAR(fitted_slope(h, err), 2.0, 0.1);
}

TEST(Interpolate, DiskDatumIsReproduced)
{
    const ProblemSpec problem = builtin_problem("disk-kink");
    const auto mesh = std::make_shared<const Mesh>(generate(problem.domain, 4));
    for (int p = 1; p <= 2; ++p) {
        const auto space = std::make_shared<const FeSpace>(mesh, p, false);
        const FeFunction f = nodal_interpolate(space, problem.exact->value);
        EXPECT_LE(std::sqrt(direct_l2_error_squared(f, problem.exact->value)), 1e-14);
    }
}

TEST(Projection, ZeroIdempotentAndStable)
{
    const auto mesh = unit_square(4);
    for (int p = 1; p <= 3; ++p) {
        const auto W = std::make_shared<const FeSpace>(mesh, p, true);
        const SparseMatrix mass = restrict_matrix(assemble_mass(*W, 2 * p), *W, *W);

        EXPECT_EQ(l2_project_onto_constrained(W, Vector::Zero(W->num_free())).coefficients().norm(), 0.0);

        const Vector c = random_vector(W->num_free(), 11u + p);
        const FeFunction again = l2_project_onto_constrained(W, mass * c);
        EXPECT_LE((again.coefficients() - c).norm(), 1e-12 * c.norm());

        // Non-expansive for f = 1, whose L2 norm on the unit square is 1.
        const FeSpace V(mesh, p, false);
        const Vector load = restrict_matrix(assemble_mass(V, 2 * p), *W, V) * Vector::Ones(V.num_free());
        const FeFunction f_h = l2_project_onto_constrained(W, load);
        const double norm = std::sqrt(f_h.coefficients().dot(mass * f_h.coefficients()));
        EXPECT_LE(norm, 1.0);
        EXPECT_GT(norm, 0.5);
    }
}

TEST(Projection, RejectsWrongLength)
{
    const auto W = std::make_shared<const FeSpace>(unit_square(2), 1, true);
    EXPECT_THROW((void)l2_project_onto_constrained(W, Vector::Zero(W->num_free() + 1)), InvalidArgument);
}

TEST(Schrodinger, ElementwiseValues)
{
    const auto mesh = unit_square(3);
    const PointFunction zero = [](const Point&) { return 0.0; };
    const PointFunction unit = [](const Point&) { return 1.0; };

    const auto V1 = std::make_shared<const FeSpace>(mesh, 1, false);
    const FeFunction linear = nodal_interpolate(V1, [](const Point& p) { return 3.0 * p.x() - p.y(); });
    for (const auto& element : elementwise_schrodinger(*V1, zero, linear).values) {
        for (double v : element) {
            EXPECT_NEAR(v, 0.0, 1e-12);
        }
    }
    const FeFunction one(V1, Vector::Ones(V1->num_free()));
    for (const auto& element : elementwise_schrodinger(*V1, unit, one).values) {
        for (double v : element) {
            EXPECT_NEAR(v, 1.0, 1e-14);
        }
    }

    const auto V2 = std::make_shared<const FeSpace>(mesh, 2, false);
    const FeFunction square = nodal_interpolate(V2, [](const Point& p) { return p.x() * p.x(); });
    for (const auto& element : elementwise_schrodinger(*V2, zero, square).values) {
        for (double v : element) {
            EXPECT_NEAR(v, -2.0, 1e-11);
        }
    }
}

TEST(Prolongation, IsExactForCoarseFunctions)
{
    // Disk refinement moves boundary midpoints, so nesting holds on rectangles only.
    const auto coarse_mesh = std::make_shared<const Mesh>(generate(DomainShape::rectangle(0, 2, 0, 1), 3));
    const auto fine_mesh = std::make_shared<const Mesh>(refine(*coarse_mesh));
    for (int p = 1; p <= 3; ++p) {
        const auto coarse = std::make_shared<const FeSpace>(coarse_mesh, p, false);
        const auto fine = std::make_shared<const FeSpace>(fine_mesh, p, false);
        const FeFunction f(coarse, random_vector(coarse->num_free(), 5u));
        const FeFunction g = prolongate(f, fine);
        for (int t = 0; t < fine_mesh->num_triangles(); ++t) {
            const Point xi(0.2, 0.3);
            const Point x = element_map(*fine_mesh, t).to_physical(xi);
            const int parent = fine_mesh->parent(t);
            const Point eta = element_map(*coarse_mesh, parent).to_reference(x);
            EXPECT_NEAR(eval(g, t, xi).value, eval(f, parent, eta).value, 1e-12);
        }
    }
}
