#include "ucstab/mesh.hpp"

#include "ucstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace ucstab {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c)
{
    return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

// Distance from x to the segment [a, b] and the projection parameter.
std::pair<double, double> segment_distance(const Point& x, const Point& a, const Point& b)
{
    const Point d = b - a;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? (x - a).dot(d) / len2 : 0.0;
    return {(a + t * d - x).norm(), t};
}

} // namespace

DomainShape DomainShape::rectangle(double x0, double x1, double y0, double y1)
{
    UCSTAB_REQUIRE(x1 > x0 && y1 > y0, InvalidArgument, "degenerate rectangle");
    DomainShape s;
    s.kind = Kind::Rectangle;
    s.x0 = x0;
    s.x1 = x1;
    s.y0 = y0;
    s.y1 = y1;
    return s;
}

DomainShape DomainShape::unit_disk()
{
    DomainShape s;
    s.kind = Kind::UnitDisk;
    s.x0 = -1.0;
    s.x1 = 1.0;
    s.y0 = -1.0;
    s.y1 = 1.0;
    s.mesh_lines.push_back({Point(-1.0, 0.0), Point(1.0, 0.0)});
    return s;
}

std::string DomainShape::describe() const
{
    std::ostringstream os;
    os << std::setprecision(17);
    if (kind == Kind::Rectangle) {
        os << "rectangle " << x0 << ' ' << x1 << ' ' << y0 << ' ' << y1;
    } else {
        os << "disk";
    }
    return os.str();
}

std::vector<bool> classify_points(const SubdomainIndicator& indicator, std::span<const Point> points)
{
    std::vector<bool> mask(points.size());
    std::transform(points.begin(), points.end(), mask.begin(),
                   [&](const Point& x) { return indicator(x); });
    return mask;
}

Mesh::Mesh(DomainShape shape, std::vector<Point> vertices, std::vector<Triangle> triangles,
           std::vector<int> parents)
    : shape_(std::move(shape)),
      vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      parents_(std::move(parents))
{
    UCSTAB_REQUIRE(!triangles_.empty(), InvalidArgument, "mesh has no triangles");
    UCSTAB_REQUIRE(parents_.empty() || parents_.size() == triangles_.size(), InvalidArgument,
                   "parent map size mismatch");
    const int nv = num_vertices();
    for (const auto& tri : triangles_) {
        for (int v : tri) {
            UCSTAB_REQUIRE(v >= 0 && v < nv, InvalidArgument, "vertex index out of range");
        }
        UCSTAB_REQUIRE(signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]) > 0.0,
                       InvalidArgument, "triangle is not positively oriented");
    }
    build_topology();
}

void Mesh::build_topology()
{
    const auto nv = static_cast<std::int64_t>(vertices_.size());
    std::unordered_map<std::int64_t, int> edge_index;
    edge_index.reserve(triangles_.size() * 2);
    std::vector<std::array<int, 2>> edge_owners;

    triangle_edges_.resize(triangles_.size());
    for (int t = 0; t < num_triangles(); ++t) {
        for (int e = 0; e < 3; ++e) {
            int a = triangles_[t][e];
            int b = triangles_[t][(e + 1) % 3];
            if (a > b) {
                std::swap(a, b);
            }
            const std::int64_t key = a * nv + b;
            auto [it, inserted] = edge_index.try_emplace(key, static_cast<int>(edges_.size()));
            if (inserted) {
                edges_.push_back({a, b});
                edge_owners.push_back({t, -1});
            } else {
                auto& owners = edge_owners[it->second];
                UCSTAB_REQUIRE(owners[1] == -1, InvalidArgument, "edge shared by more than two triangles");
                owners[1] = t;
            }
            triangle_edges_[t][e] = it->second;
        }
    }

    edge_is_boundary_.assign(edges_.size(), false);
    vertex_is_boundary_.assign(vertices_.size(), false);
    h_ = 0.0;
    for (int e = 0; e < num_edges(); ++e) {
        const Point& a = vertices_[edges_[e][0]];
        const Point& b = vertices_[edges_[e][1]];
        const Point d = b - a;
        const double length = d.norm();
        h_ = std::max(h_, length);
        Point n(d.y() / length, -d.x() / length);
        const Point mid = 0.5 * (a + b);
        const auto [k1, k2] = edge_owners[e];
        if (n.dot(mid - centroid(k1)) < 0.0) {
            n = -n;
        }
        if (k2 >= 0) {
            interior_faces_.push_back({e, k1, k2, n, length});
        } else {
            edge_is_boundary_[e] = true;
            vertex_is_boundary_[edges_[e][0]] = true;
            vertex_is_boundary_[edges_[e][1]] = true;
            boundary_faces_.push_back({e, k1, n, length});
        }
    }
}

double Mesh::area(int t) const
{
    const auto& tri = triangles_.at(t);
    return signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double Mesh::diameter(int t) const
{
    const auto& tri = triangles_.at(t);
    double d = 0.0;
    for (int e = 0; e < 3; ++e) {
        d = std::max(d, (vertices_[tri[e]] - vertices_[tri[(e + 1) % 3]]).norm());
    }
    return d;
}

double Mesh::inradius(int t) const
{
    const auto& tri = triangles_.at(t);
    double perimeter = 0.0;
    for (int e = 0; e < 3; ++e) {
        perimeter += (vertices_[tri[e]] - vertices_[tri[(e + 1) % 3]]).norm();
    }
    return 2.0 * area(t) / perimeter;
}

Point Mesh::centroid(int t) const
{
    const auto& tri = triangles_.at(t);
    return (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) / 3.0;
}

double Mesh::total_area() const
{
    double sum = 0.0;
    for (int t = 0; t < num_triangles(); ++t) {
        sum += area(t);
    }
    return sum;
}

double Mesh::boundary_polygon_area() const
{
    // Boundary faces oriented by their outward normal traverse the boundary
    // counter-clockwise; sum the shoelace terms edge by edge.
    double sum = 0.0;
    for (const auto& face : boundary_faces_) {
        Point a = vertices_[edges_[face.edge][0]];
        Point b = vertices_[edges_[face.edge][1]];
        const Point tangent = b - a;
        // Counter-clockwise traversal has the outward normal on the right.
        if (tangent.x() * face.normal.y() - tangent.y() * face.normal.x() > 0.0) {
            std::swap(a, b);
        }
        sum += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * sum;
}

double Mesh::max_shape_ratio() const
{
    double r = 0.0;
    for (int t = 0; t < num_triangles(); ++t) {
        r = std::max(r, diameter(t) / inradius(t));
    }
    return r;
}

std::vector<int> Mesh::edges_on_line(const MeshLine& line, double tol) const
{
    const double scale = (line.b - line.a).norm();
    std::vector<int> result;
    for (int e = 0; e < num_edges(); ++e) {
        bool on = true;
        for (int v : edges_[e]) {
            const auto [dist, t] = segment_distance(vertices_[v], line.a, line.b);
            if (dist > tol * scale || t < -tol || t > 1.0 + tol) {
                on = false;
                break;
            }
        }
        if (on) {
            result.push_back(e);
        }
    }
    return result;
}

bool Mesh::is_mesh_line(const MeshLine& line, double tol) const
{
    const double length = (line.b - line.a).norm();
    double covered = 0.0;
    for (int e : edges_on_line(line, tol)) {
        covered += (vertices_[edges_[e][0]] - vertices_[edges_[e][1]]).norm();
    }
    return std::abs(covered - length) <= 1e-10 * length;
}

namespace {

Mesh generate_rectangle(const DomainShape& shape, int n)
{
    std::vector<Point> vertices;
    vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    const double dx = (shape.x1 - shape.x0) / n;
    const double dy = (shape.y1 - shape.y0) / n;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            const double x = i == n ? shape.x1 : shape.x0 + i * dx;
            const double y = j == n ? shape.y1 : shape.y0 + j * dy;
            vertices.emplace_back(x, y);
        }
    }
    auto id = [n](int i, int j) { return i + (n + 1) * j; };
    std::vector<Mesh::Triangle> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return Mesh(shape, std::move(vertices), std::move(triangles));
}

Mesh generate_disk(const DomainShape& shape, int n)
{
    // Ring k (1..n) at radius k/n holds 4k vertices; vertex m sits at angle
    // 2 pi m / (4k). Vertex 0 is the centre.
    std::vector<Point> vertices{Point(0.0, 0.0)};
    std::vector<int> ring_start(static_cast<std::size_t>(n) + 1, 0);
    for (int k = 1; k <= n; ++k) {
        ring_start[k] = static_cast<int>(vertices.size());
        const double r = static_cast<double>(k) / n;
        for (int m = 0; m < 4 * k; ++m) {
            // Exact values on the axes keep y = 0 and x = 0 mesh lines exact.
            const int quarter = m % k == 0 ? m / k : -1;
            if (quarter >= 0) {
                static constexpr std::array<std::array<double, 2>, 4> axes{
                    {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}}};
                vertices.emplace_back(r * axes[quarter][0], r * axes[quarter][1]);
            } else {
                const double theta = 2.0 * std::numbers::pi * m / (4.0 * k);
                vertices.emplace_back(r * std::cos(theta), r * std::sin(theta));
            }
        }
    }
    auto ring_vertex = [&](int k, int m) {
        if (k == 0) {
            return 0;
        }
        return ring_start[k] + (m % (4 * k));
    };

    std::vector<Mesh::Triangle> triangles;
    auto add = [&](int a, int b, int c) {
        if (signed_area(vertices[a], vertices[b], vertices[c]) < 0.0) {
            std::swap(b, c);
        }
        triangles.push_back({a, b, c});
    };
    for (int k = 1; k <= n; ++k) {
        const int inner = k - 1;
        for (int q = 0; q < 4; ++q) {
            const int ni = inner == 0 ? 1 : inner + 1;
            const int no = k + 1;
            auto in_vertex = [&](int i) { return ring_vertex(inner, q * inner + i); };
            auto out_vertex = [&](int j) { return ring_vertex(k, q * k + j); };
            auto diagonal = [&](int a, int b) { return (vertices[a] - vertices[b]).squaredNorm(); };
            int i = 0;
            int j = 0;
            // Stitch the two rings, always closing the shorter diagonal.
            while (i < ni - 1 || j < no - 1) {
                const bool advance_outer =
                    i == ni - 1 || (j < no - 1 && diagonal(in_vertex(i), out_vertex(j + 1)) <=
                                                      diagonal(in_vertex(i + 1), out_vertex(j)));
                if (advance_outer) {
                    add(in_vertex(i), out_vertex(j), out_vertex(j + 1));
                    ++j;
                } else {
                    add(in_vertex(i), out_vertex(j), in_vertex(i + 1));
                    ++i;
                }
            }
        }
    }
    return Mesh(shape, std::move(vertices), std::move(triangles));
}

} // namespace

Mesh generate(const DomainShape& shape, int n)
{
    UCSTAB_REQUIRE(n >= 1, InvalidArgument, "subdivision count must be at least 1");
    return shape.kind == DomainShape::Kind::Rectangle ? generate_rectangle(shape, n) : generate_disk(shape, n);
}

Mesh refine(const Mesh& mesh)
{
    const int nv = mesh.num_vertices();
    std::vector<Point> vertices(mesh.vertices().begin(), mesh.vertices().end());
    vertices.reserve(static_cast<std::size_t>(nv + mesh.num_edges()));
    const bool disk = mesh.shape().kind == DomainShape::Kind::UnitDisk;
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& edge = mesh.edges()[e];
        Point mid = 0.5 * (vertices[edge[0]] + vertices[edge[1]]);
        if (disk && mesh.is_boundary_edge(e)) {
            mid.normalize();
        }
        vertices.push_back(mid);
    }

    std::vector<Mesh::Triangle> triangles;
    std::vector<int> parents;
    triangles.reserve(static_cast<std::size_t>(4 * mesh.num_triangles()));
    parents.reserve(triangles.capacity());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangles()[t];
        const int m0 = nv + mesh.triangle_edge(t, 0);
        const int m1 = nv + mesh.triangle_edge(t, 1);
        const int m2 = nv + mesh.triangle_edge(t, 2);
        triangles.push_back({v[0], m0, m2});
        triangles.push_back({m0, v[1], m1});
        triangles.push_back({m2, m1, v[2]});
        triangles.push_back({m0, m1, m2});
        parents.insert(parents.end(), 4, t);
    }
    return Mesh(mesh.shape(), std::move(vertices), std::move(triangles), std::move(parents));
}

void write_mesh(std::ostream& os, const Mesh& mesh)
{
    os << "vertices " << mesh.num_vertices() << " / triangles " << mesh.num_triangles() << '\n';
    os << "shape " << mesh.shape().describe() << '\n';
    os << std::setprecision(17);
    for (const auto& v : mesh.vertices()) {
        os << v.x() << ' ' << v.y() << '\n';
    }
    for (const auto& t : mesh.triangles()) {
        os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
}

Mesh read_mesh(std::istream& is)
{
    std::string word_v, slash, word_t, word_s, kind;
    int nv = 0, nt = 0;
    is >> word_v >> nv >> slash >> word_t >> nt >> word_s >> kind;
    UCSTAB_REQUIRE(is && nv >= 0 && nt >= 0 && word_v == "vertices" && slash == "/" && word_t == "triangles" &&
                       word_s == "shape",
                   InvalidArgument, "malformed mesh header");
    DomainShape shape;
    if (kind == "rectangle") {
        double x0, x1, y0, y1;
        is >> x0 >> x1 >> y0 >> y1;
        shape = DomainShape::rectangle(x0, x1, y0, y1);
    } else if (kind == "disk") {
        shape = DomainShape::unit_disk();
    } else {
        throw InvalidArgument("read_mesh: unknown shape '" + kind + "'");
    }
    std::vector<Point> vertices(static_cast<std::size_t>(nv));
    for (auto& v : vertices) {
        is >> v.x() >> v.y();
    }
    std::vector<Mesh::Triangle> triangles(static_cast<std::size_t>(nt));
    for (auto& t : triangles) {
        is >> t[0] >> t[1] >> t[2];
    }
    UCSTAB_REQUIRE(static_cast<bool>(is), InvalidArgument, "truncated mesh file");
    return Mesh(std::move(shape), std::move(vertices), std::move(triangles));
}

} // namespace ucstab
