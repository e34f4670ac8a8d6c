#pragma once

#include "ucstab/fem.hpp"
#include "ucstab/mesh.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <vector>

namespace ucstab::testing {

inline std::shared_ptr<const Mesh> unit_square(int n)
{
    return std::make_shared<const Mesh>(generate(DomainShape::rectangle(0, 1, 0, 1), n));
}

inline Vector random_vector(int n, unsigned seed)
{
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = dist(gen);
    }
    return v;
}

/// Squared L2 distance between f and g by a high-order rule, element by element.
inline double direct_l2_error_squared(const FeFunction& f, const PointFunction& g, int degree = 14)
{
    const Mesh& mesh = f.space().mesh();
    const Quadrature& rule = triangle_quadrature(degree);
    double sum = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementMap map = element_map(mesh, t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double d = eval(f, t, rule.points[q]).value - g(map.to_physical(rule.points[q]));
            sum += rule.weights[q] * std::abs(map.det) * d * d;
        }
    }
    return sum;
}

/// Ordinary least-squares slope of log(y) against log(x).
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace ucstab::testing
