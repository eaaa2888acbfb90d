#ifndef PIEZO_MESH_HPP
#define PIEZO_MESH_HPP

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace piezo {

enum class PanelLabel : int { Dirichlet = 1, Neumann = 2 };

// One straight boundary segment, oriented so that the solid lies to its
// left and the unit normal points out of the solid.
struct Panel {
    int v0 = -1, v1 = -1;
    PanelLabel label = PanelLabel::Dirichlet;
    Eigen::Vector2d normal = Eigen::Vector2d::Zero();
    Eigen::Vector2d tangent = Eigen::Vector2d::Zero();
    double length = 0.0;
    int loop = -1; // boundary loop id
};

// Conforming triangulation of the solid with labeled, oriented boundary.
// Triangles are counter-clockwise after finalize().
class TriMesh {
public:
    std::vector<Eigen::Vector2d> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Panel> panels; // ordered loop by loop, consecutive share a vertex

    // Orients triangles CCW, extracts and orients the boundary, checks
    // manifoldness. `labels` maps unordered boundary edges to labels; when
    // empty every panel is labeled `default_label`. Throws MeshError.
    void finalize(const std::vector<std::array<int, 3>>& labeled_edges = {},
                  PanelLabel default_label = PanelLabel::Dirichlet);

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    int n_panels() const { return static_cast<int>(panels.size()); }
    int n_loops() const { return n_loops_; }

    double area() const;
    double boundary_length() const;
    double triangle_area(int t) const;
    bool has_dirichlet() const;
    bool has_neumann() const;

    // True when the point lies in some triangle (inclusive of edges).
    bool contains(const Eigen::Vector2d& p) const;
    // Triangle containing p, or -1.
    int locate(const Eigen::Vector2d& p) const;

private:
    int n_loops_ = 0;
};

// Gmsh MSH 2.2 ASCII subset: $Nodes / $Elements, element type 2 = triangle,
// type 1 = boundary line with physical tag 1 = Dirichlet, 2 = Neumann.
TriMesh load_mesh(const std::string& path);
void save_mesh(const TriMesh& mesh, const std::string& path);

struct BoundaryCurve {
    struct LoopRange {
        int begin = 0, end = 0;
    };
    std::vector<Panel> panels;          // ordered, consecutive share an endpoint
    std::vector<LoopRange> loops;
    std::vector<std::array<int, 2>> panel_vertices; // map into mesh vertex ids
    std::vector<Eigen::Vector2d> points;            // mesh vertex coordinates copied
    double total_length = 0.0;

    Eigen::Vector2d point(int panel, double t) const { // t in [0,1] along panel
        const auto& pv = panel_vertices[static_cast<size_t>(panel)];
        return (1.0 - t) * points[static_cast<size_t>(pv[0])] +
               t * points[static_cast<size_t>(pv[1])];
    }
};

BoundaryCurve boundary_of(const TriMesh& mesh);

// Builtin geometries. `h` is the target edge length.
TriMesh make_square_mesh(double h);              // unit square centered at origin
TriMesh make_circle_mesh(int n_panels, double radius = 1.0);
TriMesh make_pentagon_mesh(double h);            // regular, circumradius 0.55
TriMesh make_trapping_mesh(double h);            // U-shaped cavity
TriMesh make_annulus_mesh(double h);             // square with square hole (two loops)
TriMesh builtin_geometry(const std::string& name, double resolution);

// Uniform refinement of each triangle into m^2; conforming by construction.
TriMesh refine_uniform(const TriMesh& coarse, int m);

} // namespace piezo

#endif
