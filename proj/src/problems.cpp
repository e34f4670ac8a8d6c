#include "ucstab/problem.hpp"

#include "ucstab/error.hpp"

#include <cmath>
#include <numbers>

namespace ucstab {

namespace {

constexpr double pi = std::numbers::pi;

SubdomainIndicator box(std::string label, double x0, double x1, double y0, double y1)
{
    return {std::move(label), [=](const Point& p) { return p.x() > x0 && p.x() < x1 && p.y() > y0 && p.y() < y1; }};
}

// Hadamard example: u = sin(x) sinh(y) with P = 10 log(y + 1/2) on (0, pi) x (0, 1).
ProblemSpec hadamard(const std::string& name)
{
    ProblemSpec p;
    p.name = name;
    p.domain = DomainShape::rectangle(0.0, pi, 0.0, 1.0);
    p.base_n = 8;
    p.potential = [](const Point& x) { return 10.0 * std::log(x.y() + 0.5); };
    const auto u = [](const Point& x) { return std::sin(x.x()) * std::sinh(x.y()); };
    p.source = PointFunction([u](const Point& x) { return 10.0 * std::log(x.y() + 0.5) * u(x); });
    p.datum = u;
    p.exact = ExactSolution{u, [](const Point& x) {
                                return Point(std::cos(x.x()) * std::sinh(x.y()), std::sin(x.x()) * std::cosh(x.y()));
                            }};
    if (name == "hadamard-conv") {
        const auto cut = [](double top_from) {
            return [top_from](const Point& x) {
                const bool inside = x.x() >= pi / 4 && x.x() <= 3 * pi / 4 && x.y() >= top_from && x.y() <= 1.0;
                return !inside;
            };
        };
        p.omega = {"omega", cut(0.05)};
        p.target = {"B", cut(0.75)};
    } else {
        p.omega = box("omega", pi / 4, 3 * pi / 4, 0.05, 0.5);
        p.target = box("B", pi / 8, 7 * pi / 8, 0.05, 0.75);
    }
    return p;
}

// Kinked solution u = -y for y > 0, 0 otherwise, on the unit disk; its
// Laplacian is the line measure on the diameter y = 0.
ProblemSpec disk_kink()
{
    ProblemSpec p;
    p.name = "disk-kink";
    p.domain = DomainShape::unit_disk();
    // The 8-ring mesh is still pre-asymptotic for the data misfit; start one level finer.
    p.base_n = 16;
    p.omega = {"omega", [](const Point& x) { return x.x() > 0.0 && x.squaredNorm() > 0.25; }};
    p.target = {"B", [](const Point& x) { return x.x() > 0.0 && x.squaredNorm() > 0.0625; }};
    p.source = LineSource{{Point(-1.0, 0.0), Point(1.0, 0.0)}};
    const auto u = [](const Point& x) { return x.y() > 0.0 ? -x.y() : 0.0; };
    p.datum = u;
    p.exact = ExactSolution{u, [](const Point& x) { return x.y() > 0.0 ? Point(0.0, -1.0) : Point(0.0, 0.0); }};
    p.default_s_reg = 1.49;
    p.smooth = false;
    return p;
}

// Harmonic polynomial xy with data on the lower half of the unit square.
ProblemSpec smoke_harmonic()
{
    ProblemSpec p;
    p.name = "smoke-harmonic";
    p.domain = DomainShape::rectangle(0.0, 1.0, 0.0, 1.0);
    p.base_n = 2;
    p.omega = box("omega", 0.0, 1.0, 0.0, 0.5);
    p.target = box("B", 0.0, 1.0, 0.0, 0.75);
    const auto u = [](const Point& x) { return x.x() * x.y(); };
    p.datum = u;
    p.exact = ExactSolution{u, [](const Point& x) { return Point(x.y(), x.x()); }};
    return p;
}

bool in_domain(const DomainShape& d, const Point& x)
{
    if (d.kind == DomainShape::Kind::UnitDisk) {
        return x.squaredNorm() < 1.0;
    }
    return x.x() > d.x0 && x.x() < d.x1 && x.y() > d.y0 && x.y() < d.y1;
}

double halton(int index, int base)
{
    double f = 1.0;
    double r = 0.0;
    for (int i = index; i > 0; i /= base) {
        f /= base;
        r += f * (i % base);
    }
    return r;
}

} // namespace

std::vector<std::string> list_problems()
{
    return {"disk-kink", "hadamard-conv", "hadamard-nonconv", "smoke-harmonic"};
}

ProblemSpec builtin_problem(const std::string& name)
{
    if (name == "disk-kink") {
        return disk_kink();
    }
    if (name == "hadamard-conv" || name == "hadamard-nonconv") {
        return hadamard(name);
    }
    if (name == "smoke-harmonic") {
        return smoke_harmonic();
    }
    throw InvalidArgument("builtin_problem: unknown problem '" + name + "'");
}

double datum_mismatch(const ProblemSpec& problem, int samples)
{
    if (!problem.exact) {
        return 0.0;
    }
    const DomainShape& d = problem.domain;
    const bool disk = d.kind == DomainShape::Kind::UnitDisk;
    const double x0 = disk ? -1.0 : d.x0, x1 = disk ? 1.0 : d.x1;
    const double y0 = disk ? -1.0 : d.y0, y1 = disk ? 1.0 : d.y1;
    double worst = 0.0;
    int found = 0;
    for (int i = 1; found < samples && i < 100 * samples; ++i) {
        const Point x(x0 + (x1 - x0) * halton(i, 2), y0 + (y1 - y0) * halton(i, 3));
        if (!in_domain(d, x) || !problem.omega(x)) {
            continue;
        }
        worst = std::max(worst, std::abs(problem.datum(x) - problem.exact->value(x)));
        ++found;
    }
    return worst;
}

} // namespace ucstab
