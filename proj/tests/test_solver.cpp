#include "ucstab/analysis.hpp"
#include "ucstab/error.hpp"
#include "ucstab/solver.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>

using namespace ucstab;
using namespace ucstab::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

StabilizationParams make_params(double alpha, double eta, double tau, double s_reg = 2.0)
{
    StabilizationParams p;
    p.alpha = alpha;
    p.eta = eta;
    p.tau = tau;
    p.s_reg = s_reg;
    return p;
}

std::shared_ptr<const Mesh> mesh_of(const ProblemSpec& problem, int n)
{
    return std::make_shared<const Mesh>(generate(problem.domain, n));
}

/// Hadamard problem with datum and source multiplied by c.
ProblemSpec scaled_hadamard(double c)
{
    ProblemSpec p = builtin_problem("hadamard-conv");
    const PointFunction q = p.datum;
    const PointFunction f = std::get<PointFunction>(p.source);
    p.datum = [=](const Point& x) { return c * q(x); };
    p.source = PointFunction([=](const Point& x) { return c * f(x); });
    return p;
}

ProblemSpec zero_data()
{
    ProblemSpec p = builtin_problem("hadamard-conv");
    p.datum = [](const Point&) { return 0.0; };
    p.source = std::monostate{};
    return p;
}

} // namespace

TEST(Build, MatrixIsSymmetricAndBlocksMatch)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const SaddleSystem sys = build(problem, make_params(1, 0, 2), mesh_of(problem, 4), 2);
    EXPECT_LE(relative_asymmetry(sys.matrix), 1e-12);
    EXPECT_EQ(sys.size(), sys.V->num_free() + sys.W->num_free());
    EXPECT_EQ(sys.nV, sys.V->num_dofs());
    EXPECT_LT(sys.nW, sys.W->num_dofs());
    const Eigen::MatrixXd dense(sys.matrix);
    const Eigen::MatrixXd top = Eigen::MatrixXd(sys.data.matrix + sys.primal.matrix);
    EXPECT_EQ((dense.topLeftCorner(sys.nV, sys.nV) - top).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((dense.bottomRightCorner(sys.nW, sys.nW) + Eigen::MatrixXd(sys.dual.matrix)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((dense.bottomLeftCorner(sys.nW, sys.nV) - Eigen::MatrixXd(sys.a_wv.matrix)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Build, ZeroPerturbationMatchesUnperturbed)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const auto mesh = mesh_of(problem, 4);
    const SaddleSystem a = build(problem, make_params(1, 0, 2), mesh, 1);
    const SaddleSystem b = build(problem, make_params(1, 0, 2), mesh, 1, Perturbation{0.0, 0.0, {}, 42});
    EXPECT_EQ((a.rhs - b.rhs).norm(), 0.0);
    EXPECT_EQ(SparseMatrix(a.matrix - b.matrix).norm(), 0.0);
    EXPECT_EQ(b.rhs_perturbation.norm(), 0.0);
}

TEST(Build, RejectsDegenerateDualBlock)
{
    const ProblemSpec problem = builtin_problem("smoke-harmonic");
    StabilizationParams p = make_params(0, kInf, 0);
    p.tikhonov_off = true;
    EXPECT_THROW((void)build(problem, p, mesh_of(problem, 2), 2), InvalidArgument);
}

TEST(Solve, ZeroDataGivesZeroSolution)
{
    const ProblemSpec problem = zero_data();
    for (const auto& params : {make_params(1, 0, 2), make_params(0, kInf, 0), make_params(0, kInf, 2)}) {
        const SaddleSystem sys = build(problem, params, mesh_of(problem, 4), 1);
        EXPECT_EQ(sys.rhs.norm(), 0.0);
        const SolveResult r = solve(sys);
        EXPECT_EQ(r.u_h.coefficients().norm(), 0.0);
        EXPECT_EQ(r.z_h.coefficients().norm(), 0.0);
        EXPECT_EQ(r.triple_norm, 0.0);
    }
}

TEST(Solve, HarmonicPolynomialIsReproduced)
{
    const ProblemSpec problem = builtin_problem("smoke-harmonic");
    for (double alpha : {0.0, 1.0}) {
        for (int p = 2; p <= 3; ++p) {
            StabilizationParams params = make_params(alpha, 0, 0);
            params.tikhonov_off = true;
            const SaddleSystem sys = build(problem, params, mesh_of(problem, 4), p);
            const Vector u = nodal_interpolate(sys.V, problem.exact->value).coefficients();

            // Residual substitution: (I_h u, 0) satisfies the discrete equations.
            Vector x = Vector::Zero(sys.size());
            x.head(sys.nV) = u;
            EXPECT_LE(backward_error(sys.matrix, x, sys.rhs), 1e-14);

            // Forward error is the assembly roundoff amplified by the
            // conditioning, which grows quickly with the degree.
            const double tol = p == 2 ? 1e-10 : 1e-8;
            const SolveResult r = solve(sys);
            EXPECT_LE((r.u_h.coefficients() - u).norm(), tol * u.norm());
            EXPECT_LE(r.z_h.coefficients().norm(), tol * u.norm());
            EXPECT_LE(r.residual, 1e-10);
        }
    }
}

TEST(Solve, ScalesLinearlyWithData)
{
    const auto params = make_params(1, 0, 2);
    const ProblemSpec base = scaled_hadamard(1.0);
    const auto mesh = mesh_of(base, 6);
    const SolveResult r1 = solve(build(base, params, mesh, 1));
    const SolveResult r3 = solve(build(scaled_hadamard(-3.0), params, mesh, 1));
    EXPECT_LE((r3.u_h.coefficients() + 3.0 * r1.u_h.coefficients()).norm(), 1e-12 * r3.u_h.coefficients().norm());
    EXPECT_LE((r3.z_h.coefficients() + 3.0 * r1.z_h.coefficients()).norm(), 1e-12 * r3.z_h.coefficients().norm() + 1e-15);
}

TEST(Solve, PerturbationIsLinear)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const auto mesh = mesh_of(problem, 6);
    const auto params = make_params(1, 0, 2);
    for (auto mode : {Perturbation::Mode::Noise, Perturbation::Mode::Constant}) {
        const SaddleSystem s1 = build(problem, params, mesh, 1, Perturbation{1e-3, 2e-3, mode, 9});
        const SaddleSystem s2 = build(problem, params, mesh, 1, Perturbation{2e-3, 4e-3, mode, 9});
        const Factorization lu(s1.matrix);
        const SolveResult d1 = solve(s1, lu, s1.rhs_perturbation);
        const SolveResult d2 = solve(s2, lu, s2.rhs_perturbation);
        EXPECT_LE((d2.u_h.coefficients() - 2.0 * d1.u_h.coefficients()).norm(), 1e-12 * d2.u_h.coefficients().norm());
        // Unperturbed solution plus the delta equals the perturbed solution.
        const SolveResult full = solve(s1, lu);
        const SolveResult base = solve(s1, lu, s1.rhs - s1.rhs_perturbation);
        EXPECT_LE((full.u_h.coefficients() - base.u_h.coefficients() - d1.u_h.coefficients()).norm(),
                  1e-10 * full.u_h.coefficients().norm());
    }
}

TEST(Solve, PerturbationFieldHasRequestedNorm)
{
    const auto V = std::make_shared<const FeSpace>(unit_square(5), 2, false);
    const SparseMatrix mass = restrict_matrix(assemble_mass(*V, 4), *V, *V);
    for (auto mode : {Perturbation::Mode::Noise, Perturbation::Mode::Constant}) {
        const FeFunction f = perturbation_field(V, 0.25, mode, 3);
        EXPECT_NEAR(std::sqrt(f.coefficients().dot(mass * f.coefficients())), 0.25, 1e-14);
    }
    const Vector a = perturbation_field(V, 1.0, Perturbation::Mode::Noise, 3).coefficients();
    const Vector b = perturbation_field(V, 1.0, Perturbation::Mode::Noise, 3).coefficients();
    const Vector c = perturbation_field(V, 1.0, Perturbation::Mode::Noise, 4).coefficients();
    EXPECT_EQ((a - b).norm(), 0.0);
    EXPECT_GT((a - c).norm(), 0.1);
}

TEST(Solve, IndependentOfDofOrdering)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const SaddleSystem sys = build(problem, make_params(1, 0, 2), mesh_of(problem, 6), 2);
    const SolveResult r = solve(sys);
    Vector x(sys.size());
    x << r.u_h.coefficients(), r.z_h.coefficients();

    std::vector<int> order(static_cast<std::size_t>(sys.size()));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 gen(17);
    std::shuffle(order.begin(), order.end(), gen);
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm(sys.size());
    for (int i = 0; i < sys.size(); ++i) {
        perm.indices()[i] = order[static_cast<std::size_t>(i)];
    }
    const SparseMatrix permuted = perm * sys.matrix * perm.inverse();
    const Factorization lu(permuted);
    const Vector y = perm.inverse() * lu.solve(perm * sys.rhs);
    EXPECT_LE((y - x).norm(), 1e-10 * x.norm());
}

TEST(TripleNorm, Examples)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const SaddleSystem sys = build(problem, make_params(1, 0, 2), mesh_of(problem, 4), 1);
    EXPECT_EQ(triple_norm(sys, Vector::Zero(sys.nV), Vector::Zero(sys.nW)), 0.0);
    EXPECT_GT(triple_norm(sys, Vector::Zero(sys.nV), random_vector(sys.nW, 1)), 0.0);
    EXPECT_GT(triple_norm(sys, random_vector(sys.nV, 2), Vector::Zero(sys.nW)), 0.0);

    // Only the data term survives for an affine function when omega is the
    // whole domain, alpha = 0, P = 0 and p = 1.
    ProblemSpec whole = builtin_problem("smoke-harmonic");
    whole.omega = {"omega", [](const Point&) { return true; }};
    StabilizationParams params = make_params(0, 0, 0);
    params.tikhonov_off = true;
    const SaddleSystem s = build(whole, params, mesh_of(whole, 4), 1);
    const Vector v = nodal_interpolate(s.V, [](const Point& x) { return 1.0 + x.x() - 2.0 * x.y(); }).coefficients();
    // Integral of (1 + x - 2y)^2 over the unit square is 2/3.
    EXPECT_NEAR(triple_norm(s, v, Vector::Zero(s.nW)), std::sqrt(2.0 / 3.0), 1e-13);
}

TEST(InfSup, IdentityOnRandomPairs)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const auto mesh = mesh_of(problem, 4);
    for (double eta : {0.0, kInf}) {
        for (double tau : {0.0, 2.0}) {
            for (double alpha : {0.0, 1.0}) {
                const SaddleSystem sys = build(problem, make_params(alpha, eta, tau), mesh, 1);
                for (unsigned k = 0; k < 100; ++k) {
                    const Vector u = random_vector(sys.nV, 2 * k);
                    const Vector z = random_vector(sys.nW, 2 * k + 1);
                    const double lhs = sys.bilinear(u, z, u, -z);
                    const double t = triple_norm(sys, u, z);
                    EXPECT_NEAR(lhs, t * t, 1e-12 * t * t);
                }
            }
        }
    }
}

TEST(InfSup, BilinearFormIsSymmetric)
{
    const ProblemSpec problem = builtin_problem("disk-kink");
    const SaddleSystem sys = build(problem, make_params(1, 0, 2, 1.49), mesh_of(problem, 4), 2);
    const Vector u = random_vector(sys.nV, 1), z = random_vector(sys.nW, 2);
    const Vector v = random_vector(sys.nV, 3), w = random_vector(sys.nW, 4);
    const double a = sys.bilinear(u, z, v, w), b = sys.bilinear(v, w, u, z);
    EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
}

TEST(Solve, H1ErrorDecreasesOnConvexGeometry)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    double previous = kInf;
    auto mesh = mesh_of(problem, 8);
    for (int level = 0; level < 3; ++level) {
        const SaddleSystem sys = build(problem, make_params(0, kInf, 0), mesh, 1);
        const SolveResult r = solve(sys);
        const double err = subdomain_norms(r.u_h, *problem.exact, problem.target).h1;
        EXPECT_LT(err, previous);
        previous = err;
        mesh = std::make_shared<const Mesh>(refine(*mesh));
    }
}

TEST(Condition, SmallMatrices)
{
    SparseMatrix eye(5, 5);
    eye.setIdentity();
    const ConditionReport r1 = condition_number(eye);
    EXPECT_NEAR(r1.cond, 1.0, 1e-12);

    SparseMatrix d(2, 2);
    d.insert(0, 0) = 1.0;
    d.insert(1, 1) = 10.0;
    const ConditionReport r2 = condition_number(d);
    EXPECT_NEAR(r2.cond, 10.0, 1e-2);
    EXPECT_NEAR(r2.sigma_max, 10.0, 1e-2);
    EXPECT_NEAR(r2.sigma_min, 1.0, 1e-3);
}

TEST(Condition, MatchesDenseSingularValues)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    for (int p = 1; p <= 2; ++p) {
        const SaddleSystem sys = build(problem, make_params(1, 0, 2), mesh_of(problem, 4), p);
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(sys.matrix)};
        const auto& s = svd.singularValues();
        const ConditionReport r = condition_number(sys.matrix);
        EXPECT_NEAR(r.sigma_max, s[0], 5e-3 * s[0]);
        EXPECT_NEAR(r.sigma_min, s[s.size() - 1], 5e-3 * s[s.size() - 1]);
        EXPECT_GE(r.sigma_max, r.sigma_min);
        EXPECT_GT(r.sigma_min, 0.0);
    }
}

TEST(Condition, ReportsNonConvergence)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const SaddleSystem sys = build(problem, make_params(1, 0, 2), mesh_of(problem, 4), 1);
    ConditionOptions opts;
    opts.tolerance = 1e-15;
    opts.max_iterations = 4;
    EXPECT_THROW((void)condition_number(sys.matrix, opts), SolverError);
}

TEST(BackwardError, IsScaleInvariant)
{
    const ProblemSpec problem = builtin_problem("hadamard-conv");
    const SaddleSystem sys = build(problem, make_params(1, 0, 2), mesh_of(problem, 4), 1);
    const Factorization lu(sys.matrix);
    const Vector x = lu.solve(sys.rhs);
    const double e1 = backward_error(sys.matrix, x, sys.rhs);
    // A power of two scales exactly; other factors agree up to roundoff.
    EXPECT_EQ(backward_error(sys.matrix, Vector(1024.0 * x), Vector(1024.0 * sys.rhs)), e1);
    const double e2 = backward_error(sys.matrix, Vector(1e6 * x), Vector(1e6 * sys.rhs));
    EXPECT_LE(e1, 1e-14);
    EXPECT_NEAR(e1, e2, 1e-15);
    EXPECT_EQ(backward_error(sys.matrix, Vector::Zero(sys.size()), Vector::Zero(sys.size())), 0.0);
}
