#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ucstab {

using Point = Eigen::Vector2d;

/// A straight segment that must be a union of mesh edges.
struct MeshLine {
    Point a;
    Point b;
};

/// Computational domain: an axis-aligned rectangle or a polygon inscribed in
/// the unit circle whose boundary is refined together with the mesh.
struct DomainShape {
    enum class Kind { Rectangle, UnitDisk };

    Kind kind = Kind::Rectangle;
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0; // rectangle extents
    std::vector<MeshLine> mesh_lines;

    static DomainShape rectangle(double x0, double x1, double y0, double y1);
    /// Unit-disk polygon; the diameter y = 0 is always a mesh line.
    static DomainShape unit_disk();

    [[nodiscard]] std::string describe() const;
};

/// Point predicate selecting a subdomain such as the data set or the target set.
struct SubdomainIndicator {
    std::string label;
    std::function<bool(const Point&)> contains;

    [[nodiscard]] bool operator()(const Point& x) const { return contains(x); }
};

[[nodiscard]] std::vector<bool> classify_points(const SubdomainIndicator& indicator,
                                                std::span<const Point> points);

struct InteriorFace {
    int edge = -1;
    int k1 = -1;
    int k2 = -1;
    Point normal; // unit normal pointing from k1 into k2
    double length = 0.0;
};

struct BoundaryFace {
    int edge = -1;
    int owner = -1;
    Point normal; // outward unit normal
    double length = 0.0;
};

/// Conforming triangulation with edge and face adjacency. Immutable once built.
class Mesh {
public:
    using Triangle = std::array<int, 3>;
    using Edge = std::array<int, 2>; // sorted vertex pair

    Mesh(DomainShape shape, std::vector<Point> vertices, std::vector<Triangle> triangles,
         std::vector<int> parents = {});

    [[nodiscard]] const DomainShape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::span<const Point> vertices() const noexcept { return vertices_; }
    [[nodiscard]] std::span<const Triangle> triangles() const noexcept { return triangles_; }
    [[nodiscard]] std::span<const Edge> edges() const noexcept { return edges_; }
    [[nodiscard]] std::span<const InteriorFace> interior_faces() const noexcept { return interior_faces_; }
    [[nodiscard]] std::span<const BoundaryFace> boundary_faces() const noexcept { return boundary_faces_; }

    [[nodiscard]] int num_vertices() const noexcept { return static_cast<int>(vertices_.size()); }
    [[nodiscard]] int num_triangles() const noexcept { return static_cast<int>(triangles_.size()); }
    [[nodiscard]] int num_edges() const noexcept { return static_cast<int>(edges_.size()); }

    /// Global edge index of local edge e of triangle t. Local edge e joins
    /// local vertices e and (e + 1) % 3.
    [[nodiscard]] int triangle_edge(int t, int e) const { return triangle_edges_[t][e]; }
    [[nodiscard]] bool is_boundary_edge(int e) const { return edge_is_boundary_[e]; }
    [[nodiscard]] bool is_boundary_vertex(int v) const { return vertex_is_boundary_[v]; }

    /// Parent triangle in the mesh this one was refined from, or -1.
    [[nodiscard]] int parent(int t) const { return parents_.empty() ? -1 : parents_[t]; }

    /// Maximum element diameter.
    [[nodiscard]] double h() const noexcept { return h_; }

    [[nodiscard]] double area(int t) const;
    [[nodiscard]] double diameter(int t) const;
    [[nodiscard]] double inradius(int t) const;
    [[nodiscard]] Point centroid(int t) const;
    [[nodiscard]] double total_area() const;
    /// Shoelace area of the boundary polygon, independent of the triangulation.
    [[nodiscard]] double boundary_polygon_area() const;
    /// Maximum over elements of diameter / inradius.
    [[nodiscard]] double max_shape_ratio() const;

    /// True iff the segment is covered exactly by mesh edges.
    [[nodiscard]] bool is_mesh_line(const MeshLine& line, double tol = 1e-12) const;
    /// Edges lying on the segment.
    [[nodiscard]] std::vector<int> edges_on_line(const MeshLine& line, double tol = 1e-12) const;

private:
    void build_topology();

    DomainShape shape_;
    std::vector<Point> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<int> parents_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> triangle_edges_;
    std::vector<bool> edge_is_boundary_;
    std::vector<bool> vertex_is_boundary_;
    std::vector<InteriorFace> interior_faces_;
    std::vector<BoundaryFace> boundary_faces_;
    double h_ = 0.0;
};

/// Builds the initial mesh of a domain with n subdivisions.
///
/// Rectangles are split into n x n cells, each cut along the same diagonal.
/// The disk is meshed by n concentric rings; ring k carries 4k vertices so the
/// two coordinate axes are unions of radial edges.
[[nodiscard]] Mesh generate(const DomainShape& shape, int n);

/// Uniform red refinement. Children of triangle t are 4t .. 4t + 3; on the disk
/// new boundary vertices are projected onto the unit circle.
[[nodiscard]] Mesh refine(const Mesh& mesh);

void write_mesh(std::ostream& os, const Mesh& mesh);
[[nodiscard]] Mesh read_mesh(std::istream& is);

} // namespace ucstab
