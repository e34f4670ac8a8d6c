#pragma once

#include "ucstab/forms.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ucstab {

struct ExactSolution {
    PointFunction value;
    std::function<Point(const Point&)> gradient;
};

/// A unique continuation problem: -Laplace u + P u = f in the domain, u = q on omega.
struct ProblemSpec {
    std::string name;
    DomainShape domain;
    int base_n = 8;             // subdivisions of the coarsest mesh
    SubdomainIndicator omega;   // data set
    SubdomainIndicator target;  // set B where errors are measured
    PointFunction potential;    // empty means P = 0
    Source source;
    PointFunction datum;        // q on omega
    std::optional<ExactSolution> exact;
    double default_s_reg = 2.0; // a priori regularity s of the exact solution for order p = 1
    bool smooth = true;         // s follows p + 1 when true

    /// Regularity used for the primal Tikhonov weight and the kappa estimate.
    [[nodiscard]] double regularity(int order) const { return smooth ? order + 1.0 : default_s_reg; }
};

/// disk-kink, hadamard-conv, hadamard-nonconv or smoke-harmonic.
[[nodiscard]] ProblemSpec builtin_problem(const std::string& name);
[[nodiscard]] std::vector<std::string> list_problems();

/// Largest |q - exact| over up to `samples` deterministic points of omega.
[[nodiscard]] double datum_mismatch(const ProblemSpec& problem, int samples = 100);

} // namespace ucstab
