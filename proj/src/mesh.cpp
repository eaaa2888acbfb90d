#include "piezo/mesh.hpp"
#include "piezo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace piezo {

namespace {

inline double signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                          const Eigen::Vector2d& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

inline std::pair<int, int> ukey(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

} // namespace

double TriMesh::triangle_area(int t) const {
    const auto& tri = triangles[static_cast<size_t>(t)];
    return signed_area(vertices[static_cast<size_t>(tri[0])], vertices[static_cast<size_t>(tri[1])],
                       vertices[static_cast<size_t>(tri[2])]);
}

double TriMesh::area() const {
    double a = 0.0;
    for (int t = 0; t < n_triangles(); ++t) a += triangle_area(t);
    return a;
}

double TriMesh::boundary_length() const {
    double l = 0.0;
    for (const auto& p : panels) l += p.length;
    return l;
}

bool TriMesh::has_dirichlet() const {
    return std::any_of(panels.begin(), panels.end(),
                       [](const Panel& p) { return p.label == PanelLabel::Dirichlet; });
}

bool TriMesh::has_neumann() const {
    return std::any_of(panels.begin(), panels.end(),
                       [](const Panel& p) { return p.label == PanelLabel::Neumann; });
}

int TriMesh::locate(const Eigen::Vector2d& p) const {
    for (int t = 0; t < n_triangles(); ++t) {
        const auto& tri = triangles[static_cast<size_t>(t)];
        const auto& a = vertices[static_cast<size_t>(tri[0])];
        const auto& b = vertices[static_cast<size_t>(tri[1])];
        const auto& c = vertices[static_cast<size_t>(tri[2])];
        double a0 = signed_area(p, b, c), a1 = signed_area(a, p, c), a2 = signed_area(a, b, p);
        double tot = a0 + a1 + a2;
        double tol = -1e-12 * std::abs(tot);
        if (a0 >= tol && a1 >= tol && a2 >= tol) return t;
    }
    return -1;
}

bool TriMesh::contains(const Eigen::Vector2d& p) const { return locate(p) >= 0; }

void TriMesh::finalize(const std::vector<std::array<int, 3>>& labeled_edges,
                       PanelLabel default_label) {
    const int nv = n_vertices();
    for (auto& tri : triangles) {
        for (int k : tri)
            if (k < 0 || k >= nv) throw MeshError("triangle references missing vertex");
        double a = signed_area(vertices[static_cast<size_t>(tri[0])],
                               vertices[static_cast<size_t>(tri[1])],
                               vertices[static_cast<size_t>(tri[2])]);
        if (a == 0.0) throw MeshError("degenerate (zero-area) triangle");
        if (a < 0.0) std::swap(tri[1], tri[2]);
    }

    // Undirected edge -> incident triangle count plus the CCW orientation of
    // the (unique) boundary occurrence.
    std::map<std::pair<int, int>, std::pair<int, std::array<int, 2>>> edges;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[static_cast<size_t>(e)];
            int b = tri[static_cast<size_t>((e + 1) % 3)];
            auto& entry = edges[ukey(a, b)];
            entry.first += 1;
            entry.second = {a, b};
        }
    }

    std::map<std::pair<int, int>, PanelLabel> label_map;
    for (const auto& le : labeled_edges) {
        if (le[2] != 1 && le[2] != 2)
            throw MeshError("boundary edge with unknown physical tag " + std::to_string(le[2]));
        label_map[ukey(le[0], le[1])] = static_cast<PanelLabel>(le[2]);
    }

    std::vector<Panel> raw;
    for (const auto& [key, entry] : edges) {
        if (entry.first > 2)
            throw MeshError("non-manifold edge (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) + ") shared by " +
                            std::to_string(entry.first) + " triangles");
        if (entry.first != 1) continue;
        Panel p;
        p.v0 = entry.second[0];
        p.v1 = entry.second[1];
        if (!label_map.empty()) {
            auto it = label_map.find(key);
            if (it == label_map.end())
                throw MeshError("unlabeled boundary edge (" + std::to_string(key.first) + "," +
                                std::to_string(key.second) + ")");
            p.label = it->second;
        } else {
            p.label = default_label;
        }
        raw.push_back(p);
    }
    if (!label_map.empty() && label_map.size() != raw.size())
        throw MeshError("labeled edge list does not match the mesh boundary (" +
                        std::to_string(label_map.size()) + " labels, " +
                        std::to_string(raw.size()) + " boundary edges)");
    if (raw.empty()) throw MeshError("mesh has no boundary");

    // Walk the boundary into closed loops; each boundary vertex must start
    // exactly one panel.
    std::map<int, int> start_of; // v0 -> panel index
    for (size_t i = 0; i < raw.size(); ++i) {
        if (!start_of.emplace(raw[i].v0, static_cast<int>(i)).second)
            throw MeshError("non-manifold boundary vertex " + std::to_string(raw[i].v0));
    }
    panels.clear();
    n_loops_ = 0;
    std::vector<bool> used(raw.size(), false);
    for (size_t seed = 0; seed < raw.size(); ++seed) {
        if (used[seed]) continue;
        int loop = n_loops_++;
        int cur = static_cast<int>(seed);
        int first_vertex = raw[seed].v0;
        while (true) {
            used[static_cast<size_t>(cur)] = true;
            Panel p = raw[static_cast<size_t>(cur)];
            p.loop = loop;
            const auto& a = vertices[static_cast<size_t>(p.v0)];
            const auto& b = vertices[static_cast<size_t>(p.v1)];
            p.length = (b - a).norm();
            p.tangent = (b - a) / p.length;
            p.normal = Eigen::Vector2d(p.tangent.y(), -p.tangent.x());
            panels.push_back(p);
            if (p.v1 == first_vertex) break;
            auto it = start_of.find(p.v1);
            if (it == start_of.end() || used[static_cast<size_t>(it->second)])
                throw MeshError("open boundary loop at vertex " + std::to_string(p.v1));
            cur = it->second;
        }
    }
}

BoundaryCurve boundary_of(const TriMesh& mesh) {
    BoundaryCurve bc;
    bc.points = mesh.vertices;
    bc.panels = mesh.panels;
    bc.panel_vertices.reserve(mesh.panels.size());
    int cur_loop = -1;
    for (size_t i = 0; i < mesh.panels.size(); ++i) {
        const Panel& p = mesh.panels[i];
        bc.panel_vertices.push_back({p.v0, p.v1});
        bc.total_length += p.length;
        if (p.loop != cur_loop) {
            if (cur_loop >= 0) bc.loops.back().end = static_cast<int>(i);
            bc.loops.push_back({static_cast<int>(i), 0});
            cur_loop = p.loop;
        }
    }
    if (!bc.loops.empty()) bc.loops.back().end = static_cast<int>(bc.panels.size());
    return bc;
}

// ---------------------------------------------------------------------------
// MSH 2.2 ASCII subset

TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file '" + path + "'");
    TriMesh mesh;
    std::vector<std::array<int, 3>> labeled_edges;
    std::map<long, int> node_index;
    std::string line;
    bool saw_nodes = false, saw_elements = false;

    auto fail = [&](const std::string& msg) { throw MeshError(path + ": " + msg); };

    while (std::getline(in, line)) {
        if (line.rfind("$MeshFormat", 0) == 0) {
            if (!std::getline(in, line)) fail("truncated $MeshFormat");
            std::istringstream is(line);
            double version = 0;
            is >> version;
            if (!(version >= 2.0 && version < 3.0)) fail("unsupported MSH version");
            std::getline(in, line); // $EndMeshFormat
        } else if (line.rfind("$Nodes", 0) == 0) {
            saw_nodes = true;
            if (!std::getline(in, line)) fail("truncated $Nodes");
            long n = std::stol(line);
            mesh.vertices.reserve(static_cast<size_t>(n));
            for (long i = 0; i < n; ++i) {
                if (!std::getline(in, line)) fail("truncated node list");
                std::istringstream is(line);
                long id;
                double x, y, z;
                if (!(is >> id >> x >> y >> z)) fail("malformed node line: " + line);
                node_index[id] = static_cast<int>(mesh.vertices.size());
                mesh.vertices.emplace_back(x, y);
            }
            std::getline(in, line); // $EndNodes
        } else if (line.rfind("$Elements", 0) == 0) {
            saw_elements = true;
            if (!std::getline(in, line)) fail("truncated $Elements");
            long n = std::stol(line);
            auto node_of = [&](long id) {
                auto it = node_index.find(id);
                if (it == node_index.end()) fail("element references unknown node");
                return it->second;
            };
            for (long i = 0; i < n; ++i) {
                if (!std::getline(in, line)) fail("truncated element list");
                std::istringstream is(line);
                long id;
                int type, ntags;
                if (!(is >> id >> type >> ntags)) fail("malformed element line: " + line);
                std::vector<int> tags(static_cast<size_t>(ntags));
                for (int& t : tags)
                    if (!(is >> t)) fail("malformed tags: " + line);
                if (type == 2) {
                    long a, b, c;
                    if (!(is >> a >> b >> c)) fail("malformed triangle: " + line);
                    mesh.triangles.push_back({node_of(a), node_of(b), node_of(c)});
                } else if (type == 1) {
                    long a, b;
                    if (!(is >> a >> b)) fail("malformed line element: " + line);
                    int tag = tags.empty() ? 1 : tags[0];
                    labeled_edges.push_back({node_of(a), node_of(b), tag});
                } else if (type == 15) {
                    // point element, ignored
                } else {
                    fail("unsupported element type " + std::to_string(type));
                }
            }
            std::getline(in, line); // $EndElements
        }
    }
    if (!saw_nodes || !saw_elements) fail("missing $Nodes or $Elements section");
    if (mesh.triangles.empty()) fail("no triangles in mesh file");
    mesh.finalize(labeled_edges);
    return mesh;
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write mesh file '" + path + "'");
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
    out << "$Nodes\n" << mesh.n_vertices() << "\n";
    char buf[96];
    for (int i = 0; i < mesh.n_vertices(); ++i) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g 0\n", i + 1, mesh.vertices[static_cast<size_t>(i)].x(),
                      mesh.vertices[static_cast<size_t>(i)].y());
        out << buf;
    }
    out << "$EndNodes\n$Elements\n" << (mesh.n_panels() + mesh.n_triangles()) << "\n";
    long id = 1;
    for (const Panel& p : mesh.panels) {
        out << id++ << " 1 2 " << static_cast<int>(p.label) << " " << static_cast<int>(p.label)
            << " " << p.v0 + 1 << " " << p.v1 + 1 << "\n";
    }
    for (const auto& t : mesh.triangles)
        out << id++ << " 2 2 0 0 " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    out << "$EndElements\n";
}

// ---------------------------------------------------------------------------
// Builtin generators

TriMesh refine_uniform(const TriMesh& coarse, int m) {
    if (m < 1) throw MeshError("refinement factor must be >= 1");
    TriMesh fine;
    // Lattice nodes are identified by exact integer barycentric weights on
    // the coarse vertices, so shared nodes dedupe without tolerances.
    std::map<std::vector<std::pair<int, int>>, int> node_ids;
    auto node = [&](const std::array<int, 3>& tri, int i, int j) {
        int k = m - i - j;
        std::vector<std::pair<int, int>> key;
        if (k > 0) key.emplace_back(tri[0], k);
        if (i > 0) key.emplace_back(tri[1], i);
        if (j > 0) key.emplace_back(tri[2], j);
        std::sort(key.begin(), key.end());
        auto it = node_ids.find(key);
        if (it != node_ids.end()) return it->second;
        Eigen::Vector2d p = (double(k) * coarse.vertices[static_cast<size_t>(tri[0])] +
                             double(i) * coarse.vertices[static_cast<size_t>(tri[1])] +
                             double(j) * coarse.vertices[static_cast<size_t>(tri[2])]) /
                            double(m);
        int id = static_cast<int>(fine.vertices.size());
        fine.vertices.push_back(p);
        node_ids.emplace(std::move(key), id);
        return id;
    };
    for (const auto& tri : coarse.triangles) {
        for (int i = 0; i + 0 < m; ++i) {
            for (int j = 0; i + j < m; ++j) {
                int a = node(tri, i, j), b = node(tri, i + 1, j), c = node(tri, i, j + 1);
                fine.triangles.push_back({a, b, c});
                if (i + j < m - 1) {
                    int d = node(tri, i + 1, j + 1);
                    fine.triangles.push_back({b, d, c});
                }
            }
        }
    }
    return fine;
}

TriMesh make_square_mesh(double h) {
    int m = std::max(1, static_cast<int>(std::lround(1.0 / h)));
    TriMesh coarse;
    coarse.vertices = {{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}};
    coarse.triangles = {{0, 1, 2}, {0, 2, 3}};
    TriMesh mesh = refine_uniform(coarse, m);
    mesh.finalize();
    return mesh;
}

TriMesh make_circle_mesh(int n_panels, double radius) {
    if (n_panels < 8) throw MeshError("circle mesh needs at least 8 panels");
    int n = n_panels;
    int rings = std::max(2, static_cast<int>(std::lround(n / (2.0 * M_PI))));
    TriMesh mesh;
    mesh.vertices.emplace_back(0.0, 0.0);
    for (int k = 1; k <= rings; ++k) {
        double rk = radius * double(k) / double(rings);
        for (int i = 0; i < n; ++i) {
            double th = 2.0 * M_PI * double(i) / double(n);
            mesh.vertices.emplace_back(rk * std::cos(th), rk * std::sin(th));
        }
    }
    auto ring_id = [&](int k, int i) { return 1 + (k - 1) * n + ((i % n + n) % n); };
    for (int i = 0; i < n; ++i) mesh.triangles.push_back({0, ring_id(1, i), ring_id(1, i + 1)});
    for (int k = 1; k < rings; ++k) {
        for (int i = 0; i < n; ++i) {
            int a = ring_id(k, i), b = ring_id(k, i + 1);
            int c = ring_id(k + 1, i), d = ring_id(k + 1, i + 1);
            mesh.triangles.push_back({a, d, b});
            mesh.triangles.push_back({a, c, d});
        }
    }
    mesh.finalize();
    return mesh;
}

TriMesh make_pentagon_mesh(double h) {
    const double R = 0.55;
    const double side = 2.0 * R * std::sin(M_PI / 5.0);
    int m = std::max(1, static_cast<int>(std::lround(side / h)));
    TriMesh coarse;
    coarse.vertices.emplace_back(0.0, 0.0);
    for (int k = 0; k < 5; ++k) {
        double th = M_PI / 2.0 + 2.0 * M_PI * k / 5.0;
        coarse.vertices.emplace_back(R * std::cos(th), R * std::sin(th));
    }
    for (int k = 0; k < 5; ++k) coarse.triangles.push_back({0, 1 + k, 1 + (k + 1) % 5});
    TriMesh mesh = refine_uniform(coarse, m);
    mesh.finalize();
    return mesh;
}

TriMesh make_trapping_mesh(double h) {
    // U-shaped cavity opening toward +y: outer box [-0.5,0.5]x[-0.36,0.36]
    // minus the notch (-0.2,0.2)x(0.05,0.36]. Five rectangular blocks.
    const double x0 = -0.5, x1 = -0.2, x2 = 0.2, x3 = 0.5;
    const double y0 = -0.36, y1 = 0.05, y2 = 0.36;
    TriMesh coarse;
    auto vid = [&](double x, double y) {
        for (size_t i = 0; i < coarse.vertices.size(); ++i)
            if (coarse.vertices[i].x() == x && coarse.vertices[i].y() == y)
                return static_cast<int>(i);
        coarse.vertices.emplace_back(x, y);
        return static_cast<int>(coarse.vertices.size() - 1);
    };
    auto block = [&](double xa, double xb, double ya, double yb) {
        int a = vid(xa, ya), b = vid(xb, ya), c = vid(xb, yb), d = vid(xa, yb);
        coarse.triangles.push_back({a, b, c});
        coarse.triangles.push_back({a, c, d});
    };
    block(x0, x1, y0, y1);
    block(x1, x2, y0, y1);
    block(x2, x3, y0, y1);
    block(x0, x1, y1, y2); // left arm
    block(x2, x3, y1, y2); // right arm
    int m = std::max(1, static_cast<int>(std::lround(0.35 / h)));
    TriMesh mesh = refine_uniform(coarse, m);
    mesh.finalize();
    return mesh;
}

TriMesh make_annulus_mesh(double h) {
    // [-0.5,0.5]^2 with the hole (-0.25,0.25)^2: 8 blocks around the hole.
    const double xs[4] = {-0.5, -0.25, 0.25, 0.5};
    TriMesh coarse;
    auto vid = [&](double x, double y) {
        for (size_t i = 0; i < coarse.vertices.size(); ++i)
            if (coarse.vertices[i].x() == x && coarse.vertices[i].y() == y)
                return static_cast<int>(i);
        coarse.vertices.emplace_back(x, y);
        return static_cast<int>(coarse.vertices.size() - 1);
    };
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == 1 && j == 1) continue;
            int a = vid(xs[i], xs[j]), b = vid(xs[i + 1], xs[j]);
            int c = vid(xs[i + 1], xs[j + 1]), d = vid(xs[i], xs[j + 1]);
            coarse.triangles.push_back({a, b, c});
            coarse.triangles.push_back({a, c, d});
        }
    }
    int m = std::max(1, static_cast<int>(std::lround(0.25 / h)));
    TriMesh mesh = refine_uniform(coarse, m);
    mesh.finalize();
    return mesh;
}

TriMesh builtin_geometry(const std::string& name, double resolution) {
    if (name == "pentagon") return make_pentagon_mesh(resolution);
    if (name == "trapping" || name == "trapping_steep") return make_trapping_mesh(resolution);
    if (name == "circle") {
        int n = std::max(8, static_cast<int>(std::lround(2.0 * M_PI / resolution)));
        return make_circle_mesh(n);
    }
    if (name == "square") return make_square_mesh(resolution);
    if (name == "annulus") return make_annulus_mesh(resolution);
    throw ConfigError("unknown builtin geometry '" + name + "'");
}

} // namespace piezo
