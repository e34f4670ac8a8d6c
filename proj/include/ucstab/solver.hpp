#pragma once

#include "ucstab/problem.hpp"

#include <cstdint>
#include <memory>

namespace ucstab {

/// Data perturbation folded into the right-hand side: delta q in V_h and
/// delta f in W_h, each scaled to the given L2(Omega) norm.
struct Perturbation {
    enum class Mode { Noise, Constant };

    double q_amplitude = 0.0;
    double f_amplitude = 0.0;
    Mode mode = Mode::Noise;
    std::uint64_t seed = 0;

    [[nodiscard]] bool active() const noexcept { return q_amplitude != 0.0 || f_amplitude != 0.0; }
};

/// Seeded perturbation field on a space with the given L2 norm.
[[nodiscard]] FeFunction perturbation_field(std::shared_ptr<const FeSpace> space, double amplitude,
                                            Perturbation::Mode mode, std::uint64_t seed);

/// Coupled primal-dual system over the free DOFs of V_h (first block) and W_h.
struct SaddleSystem {
    std::shared_ptr<const Mesh> mesh;
    std::shared_ptr<const FeSpace> V;
    std::shared_ptr<const FeSpace> W;
    StabilizationParams params;
    double h = 0.0;
    int nV = 0;
    int nW = 0;

    SparseMatrix matrix;
    Vector rhs;              // unperturbed data plus perturbation
    Vector rhs_perturbation; // perturbation part alone

    AssembledForm data;    // h^{-2 alpha} (u, v)_omega
    AssembledForm primal;  // s_h
    AssembledForm dual;    // s*_h
    AssembledForm a_wv;    // a(u, w): rows W, columns V
    AssembledForm jump_v;  // J_h on V
    AssembledForm mass_v;
    AssembledForm mass_w;
    FeFunction f_h;        // L2 projection of the source onto W_h

    [[nodiscard]] int size() const noexcept { return nV + nW; }
    /// A[(u, z), (v, w)] for coefficient vectors over free DOFs.
    [[nodiscard]] double bilinear(const Vector& u, const Vector& z, const Vector& v, const Vector& w) const;
};

[[nodiscard]] SaddleSystem build(const ProblemSpec& problem, const StabilizationParams& params,
                                 std::shared_ptr<const Mesh> mesh, int order, const Perturbation& perturbation = {});

/// Sparse LU factorization of a square matrix.
class Factorization {
public:
    explicit Factorization(const SparseMatrix& matrix);
    ~Factorization();
    Factorization(Factorization&&) noexcept;
    Factorization& operator=(Factorization&&) noexcept;

    [[nodiscard]] Vector solve(const Vector& b) const;
    [[nodiscard]] const SparseMatrix& matrix() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SolveResult {
    FeFunction u_h;
    FeFunction z_h;
    double residual = 0.0;     // backward error of the linear solve, see backward_error
    double rhs_residual = 0.0; // ||b - A x|| / ||b||
    double triple_norm = 0.0;
    double prs = 0.0;      // sqrt(J_h(u_h, u_h))
    double dus = 0.0;      // ||z_h||_Omega
};

/// Normwise relative residual ||b - A x|| / (||A|| ||x|| + ||b||) in the
/// infinity norm; unlike ||b - A x|| / ||b|| it does not depend on the scaling
/// of the right-hand side.
[[nodiscard]] double backward_error(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Solves with the given right-hand side (the system's own rhs by default).
[[nodiscard]] SolveResult solve(const SaddleSystem& system, const Factorization& lu, const Vector& rhs);
[[nodiscard]] SolveResult solve(const SaddleSystem& system, const Factorization& lu);
[[nodiscard]] SolveResult solve(const SaddleSystem& system);

/// sqrt(h^{-2 alpha} ||u||_omega^2 + s_h(u, u) + s*_h(z, z)).
[[nodiscard]] double triple_norm(const SaddleSystem& system, const Vector& u, const Vector& z);

struct ConditionReport {
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    int iterations_max = 0;
    int iterations_min = 0;
    double cond = 0.0;
};

struct ConditionOptions {
    double tolerance = 1e-3;
    int max_iterations = 10000;
    std::uint64_t seed = 1;
};

/// Extremal singular values of a symmetric matrix: power iteration on A^2 for
/// the largest, inverse iteration on A^2 through the factorization for the
/// smallest.
[[nodiscard]] ConditionReport condition_number(const Factorization& lu, const ConditionOptions& options = {});
[[nodiscard]] ConditionReport condition_number(const SparseMatrix& matrix, const ConditionOptions& options = {});

} // namespace ucstab
