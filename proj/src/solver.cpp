#include "ucstab/solver.hpp"

#include "ucstab/error.hpp"

#include <Eigen/UmfPackSupport>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ucstab {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void append_block(Triplets& out, const SparseMatrix& block, int row0, int col0, double scale)
{
    for (int k = 0; k < block.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(block, k); it; ++it) {
            out.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()), scale * it.value());
        }
    }
}

double l2_norm(const AssembledForm& mass, const Vector& c) { return std::sqrt(std::max(0.0, mass.quadratic(c))); }

} // namespace

FeFunction perturbation_field(std::shared_ptr<const FeSpace> space, double amplitude, Perturbation::Mode mode,
                              std::uint64_t seed)
{
    Vector c(space->num_free());
    if (mode == Perturbation::Mode::Constant) {
        c.setOnes();
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> noise(-1.0, 1.0);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            c[i] = noise(rng);
        }
    }
    const double norm = l2_norm(assemble_l2_mass(*space), c);
    if (amplitude == 0.0 || norm == 0.0) {
        c.setZero();
    } else {
        c *= amplitude / norm;
    }
    return FeFunction(std::move(space), std::move(c));
}

double SaddleSystem::bilinear(const Vector& u, const Vector& z, const Vector& v, const Vector& w) const
{
    UCSTAB_REQUIRE(u.size() == nV && v.size() == nV && z.size() == nW && w.size() == nW, InvalidArgument,
                   "coefficient vectors do not match the system blocks");
    Vector x(size()), y(size());
    x << v, w;
    y << u, z;
    return x.dot(matrix * y);
}

SaddleSystem build(const ProblemSpec& problem, const StabilizationParams& params, std::shared_ptr<const Mesh> mesh,
                   int order, const Perturbation& perturbation)
{
    params.validate();
    UCSTAB_REQUIRE(mesh != nullptr, InvalidArgument, "no mesh");
    UCSTAB_REQUIRE(order >= 1 && order <= 3, InvalidArgument, "order must be 1, 2 or 3");

    auto V = std::make_shared<const FeSpace>(mesh, order, false);
    auto W = std::make_shared<const FeSpace>(mesh, order, true);
    const PointFunction& P = problem.potential;

    const AssembledForm jump_v = assemble_jump(*V);
    const AssembledForm primal = compose_primal_stabilizer(params, jump_v, assemble_residual_term(*V, P),
                                                           assemble_h1_inner(*V, params.inner));
    const AssembledForm dual =
        compose_dual_stabilizer(params, assemble_jump(*W), assemble_boundary_normal(*W), assemble_residual_term(*W, P),
                                assemble_h1_inner(*W, params.inner));
    const AssembledForm a_wv = assemble_a(*V, *W, P);
    DataTerm data = assemble_data_term(*V, problem.omega, problem.datum, params.alpha);

    const Vector f_load = assemble_source(*W, problem.source);
    FeFunction f_h = l2_project_onto_constrained(W, f_load);

    SaddleSystem sys{.mesh = mesh,
                     .V = V,
                     .W = W,
                     .params = params,
                     .h = mesh->h(),
                     .nV = V->num_free(),
                     .nW = W->num_free(),
                     .matrix = {},
                     .rhs = {},
                     .rhs_perturbation = {},
                     .data = data.form,
                     .primal = primal,
                     .dual = dual,
                     .a_wv = a_wv,
                     .jump_v = jump_v,
                     .mass_v = assemble_l2_mass(*V),
                     .mass_w = assemble_l2_mass(*W),
                     .f_h = f_h};

    Triplets entries;
    const SparseMatrix top_left = data.form.matrix + primal.matrix;
    append_block(entries, top_left, 0, 0, 1.0);
    append_block(entries, SparseMatrix(a_wv.matrix.transpose()), 0, sys.nV, 1.0);
    append_block(entries, a_wv.matrix, sys.nV, 0, 1.0);
    append_block(entries, dual.matrix, sys.nV, sys.nV, -1.0);
    sys.matrix.resize(sys.size(), sys.size());
    sys.matrix.setFromTriplets(entries.begin(), entries.end());
    sys.matrix.makeCompressed();

    sys.rhs.resize(sys.size());
    sys.rhs << data.rhs + assemble_G(*V, f_h, P), f_load;

    sys.rhs_perturbation = Vector::Zero(sys.size());
    if (perturbation.q_amplitude != 0.0) {
        const FeFunction dq = perturbation_field(V, perturbation.q_amplitude, perturbation.mode, perturbation.seed);
        sys.rhs_perturbation.head(sys.nV) += data.form.matrix * dq.coefficients();
    }
    if (perturbation.f_amplitude != 0.0) {
        const FeFunction df = perturbation_field(W, perturbation.f_amplitude, perturbation.mode, perturbation.seed + 1);
        sys.rhs_perturbation.head(sys.nV) += assemble_G(*V, df, P);
        sys.rhs_perturbation.tail(sys.nW) += sys.mass_w.matrix * df.coefficients();
    }
    sys.rhs += sys.rhs_perturbation;
    return sys;
}

struct Factorization::Impl {
    SparseMatrix matrix;
    Eigen::UmfPackLU<SparseMatrix> lu;
};

Factorization::Factorization(const SparseMatrix& matrix) : impl_(std::make_unique<Impl>())
{
    UCSTAB_REQUIRE(matrix.rows() == matrix.cols() && matrix.rows() > 0, InvalidArgument, "matrix must be square");
    impl_->matrix = matrix;
    impl_->matrix.makeCompressed();
    impl_->lu.compute(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "sparse LU failed on a " << matrix.rows() << "x" << matrix.cols()
            << " matrix (numerically singular; check for a degenerate parameter choice)";
        throw SolverError("Factorization: " + msg.str());
    }
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

const SparseMatrix& Factorization::matrix() const { return impl_->matrix; }

namespace {

// b - A x with products accumulated in extended precision.
Vector extended_residual(const SparseMatrix& a, const Vector& x, const Vector& b)
{
    std::vector<long double> acc(static_cast<std::size_t>(b.size()));
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        acc[i] = b[i];
    }
    for (int k = 0; k < a.outerSize(); ++k) {
        const long double xk = x[k];
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
            acc[it.row()] -= static_cast<long double>(it.value()) * xk;
        }
    }
    Vector r(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        r[i] = static_cast<double>(acc[i]);
    }
    return r;
}

} // namespace

Vector Factorization::solve(const Vector& b) const
{
    UCSTAB_REQUIRE(b.size() == impl_->matrix.rows(), InvalidArgument, "rhs length does not match the matrix");
    if (b.isZero(0.0)) {
        return Vector::Zero(b.size());
    }
    Vector x = impl_->lu.solve(b);
    // Iterative refinement with extended-precision residuals drives the
    // forward error towards working precision while the correction shrinks.
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
        const Vector dx = impl_->lu.solve(extended_residual(impl_->matrix, x, b));
        const double step = dx.lpNorm<Eigen::Infinity>();
        if (!(step < 0.5 * previous)) {
            break;
        }
        x += dx;
        previous = step;
        if (step <= 1e-16 * x.lpNorm<Eigen::Infinity>()) {
            break;
        }
    }
    UCSTAB_REQUIRE(x.allFinite(), SolverError, "solution has non-finite entries");
    return x;
}

double backward_error(const SparseMatrix& a, const Vector& x, const Vector& b)
{
    double a_norm = 0.0; // infinity norm: largest absolute row sum
    Vector row_sums = Vector::Zero(a.rows());
    for (int k = 0; k < a.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
            row_sums[it.row()] += std::abs(it.value());
        }
    }
    if (row_sums.size() > 0) {
        a_norm = row_sums.maxCoeff();
    }
    const double scale = a_norm * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
    return scale == 0.0 ? 0.0 : (b - a * x).lpNorm<Eigen::Infinity>() / scale;
}

double triple_norm(const SaddleSystem& system, const Vector& u, const Vector& z)
{
    const double sq = system.data.quadratic(u) + system.primal.quadratic(u) + system.dual.quadratic(z);
    return std::sqrt(std::max(0.0, sq));
}

SolveResult solve(const SaddleSystem& system, const Factorization& lu, const Vector& rhs)
{
    UCSTAB_REQUIRE(rhs.size() == system.size(), InvalidArgument, "rhs length does not match the system");
    const Vector x = lu.solve(rhs);
    const Vector r = rhs - system.matrix * x;
    const double residual = backward_error(system.matrix, x, rhs);
    if (residual > 1e-10) {
        std::ostringstream msg;
        msg << "relative residual " << residual << " exceeds 1e-10 (n = " << system.size() << ", h = " << system.h
            << ")";
        throw SolverError("solve: " + msg.str());
    }
    Vector u = x.head(system.nV);
    Vector z = x.tail(system.nW);
    SolveResult result{FeFunction(system.V, u),
                       FeFunction(system.W, z),
                       residual,
                       rhs.isZero(0.0) ? 0.0 : r.norm() / rhs.norm(),
                       triple_norm(system, u, z),
                       std::sqrt(std::max(0.0, system.jump_v.quadratic(u))),
                       l2_norm(system.mass_w, z)};
    return result;
}

SolveResult solve(const SaddleSystem& system, const Factorization& lu) { return solve(system, lu, system.rhs); }

SolveResult solve(const SaddleSystem& system)
{
    const Factorization lu(system.matrix);
    return solve(system, lu);
}

namespace {

Vector start_vector(Eigen::Index n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = d(rng);
    }
    return x.normalized();
}

// Power iteration x <- op(x) / |op(x)| for a symmetric positive semidefinite
// op; returns the limit of |op(x)| and the step count. The gains then increase
// monotonically, and the stopping rule extrapolates their geometric tail.
constexpr int kBurnIn = 10;
constexpr int kConfirmations = 3;

template <class Op>
std::pair<double, int> dominant_gain(Op&& op, Vector x, const ConditionOptions& options, const char* what)
{
    double prev = 0.0;
    double prev_step = 0.0;
    double gap = 0.0;
    int hits = 0;
    for (int k = 1; k <= options.max_iterations; ++k) {
        Vector y = op(x);
        const double gain = y.norm();
        UCSTAB_REQUIRE(gain > 0.0 && std::isfinite(gain), SolverError, std::string(what) + ": iterate collapsed");
        x = y / gain;
        const double step = gain - prev;
        gap = std::abs(step);
        bool met = gap <= 1e-14 * gain; // stagnation at roundoff
        if (prev_step != 0.0) {
            const double rho = step / prev_step;
            if (rho > 0.0 && rho < 1.0) {
                gap = std::abs(step) * rho / (1.0 - rho);
                met = met || gap <= options.tolerance * gain;
            }
        }
        // Early ratios reflect the start vector, not the spectral gap; demand
        // the test to hold on consecutive iterations past a short burn-in.
        hits = met ? hits + 1 : 0;
        if (k >= kBurnIn && hits >= kConfirmations) {
            return {gain, k};
        }
        prev_step = step;
        prev = gain;
    }
    std::ostringstream msg;
    msg << what << ": no convergence in " << options.max_iterations << " iterations (last relative gap "
        << gap / std::max(prev, std::numeric_limits<double>::min()) << ")";
    throw SolverError(msg.str());
}

} // namespace

ConditionReport condition_number(const Factorization& lu, const ConditionOptions& options)
{
    const SparseMatrix& a = lu.matrix();
    ConditionReport report;
    // Iterate on A^2 and A^-2: for symmetric A their spectra are the squared
    // singular values, so eigenvalues of opposite sign cannot compete.
    const auto [smax2, kmax] = dominant_gain([&](const Vector& x) { return Vector(a * Vector(a * x)); },
                                             start_vector(a.rows(), options.seed), options, "sigma_max");
    const auto [inv2, kmin] = dominant_gain([&](const Vector& x) { return lu.solve(lu.solve(x)); },
                                            start_vector(a.rows(), options.seed + 1), options, "sigma_min");
    report.sigma_max = std::sqrt(smax2);
    report.sigma_min = 1.0 / std::sqrt(inv2);
    report.iterations_max = kmax;
    report.iterations_min = kmin;
    report.cond = report.sigma_max / report.sigma_min;
    return report;
}

ConditionReport condition_number(const SparseMatrix& matrix, const ConditionOptions& options)
{
    return condition_number(Factorization(matrix), options);
}

} // namespace ucstab
