#pragma once

#include "umitk/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace umitk {

/// Shared triangular surface template.
///
/// `one_ring[q]` is the closed one-ring neighborhood of vertex q: q itself
/// plus every vertex sharing an edge with q, sorted ascending. Positions are
/// optional and only used for I/O and overlay export; all operators work on
/// connectivity alone. A mesh with no triangles is valid and degenerates to
/// singleton one-rings (every vertex is its own neighborhood).
struct TriangleMesh {
    int vertex_count = 0;
    std::vector<std::array<double, 3>> positions;  // may be empty
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::vector<int>> one_ring;
};

/// Row p of a feature matrix maps to mesh vertex `row_to_vertex[p]`.
/// Must be a bijection onto [0, vertex_count); identity by default.
struct VertexMap {
    std::vector<int> row_to_vertex;
    std::vector<int> vertex_to_row;

    static VertexMap identity(int n) {
        VertexMap m;
        m.row_to_vertex.resize(static_cast<std::size_t>(n));
        m.vertex_to_row.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            m.row_to_vertex[static_cast<std::size_t>(i)] = i;
            m.vertex_to_row[static_cast<std::size_t>(i)] = i;
        }
        return m;
    }

    int size() const { return static_cast<int>(row_to_vertex.size()); }
};

/// Derives the closed one-ring adjacency from the triangle list and checks
/// 2-manifoldness (every edge on at most two triangles). Neighbor lists come
/// out sorted ascending so downstream reductions have a fixed order.
inline void build_one_ring(TriangleMesh& mesh) {
    require(mesh.vertex_count >= 0, "mesh: negative vertex count");
    std::map<std::pair<int, int>, int> edge_use;
    std::vector<std::set<int>> nbr(static_cast<std::size_t>(mesh.vertex_count));
    for (const auto& t : mesh.triangles) {
        for (int v : t)
            require(v >= 0 && v < mesh.vertex_count,
                    "mesh: triangle index " + std::to_string(v) + " out of range");
        require(t[0] != t[1] && t[1] != t[2] && t[0] != t[2],
                "mesh: degenerate triangle (" + std::to_string(t[0]) + "," +
                    std::to_string(t[1]) + "," + std::to_string(t[2]) + ")");
        for (int e = 0; e < 3; ++e) {
            int a = t[static_cast<std::size_t>(e)];
            int b = t[static_cast<std::size_t>((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            int uses = ++edge_use[{a, b}];
            if (uses > 2)
                throw InputError("mesh: non-manifold edge (" + std::to_string(a) + "," +
                                 std::to_string(b) + ") shared by " + std::to_string(uses) +
                                 " triangles");
            nbr[static_cast<std::size_t>(a)].insert(b);
            nbr[static_cast<std::size_t>(b)].insert(a);
        }
    }
    mesh.one_ring.assign(static_cast<std::size_t>(mesh.vertex_count), {});
    for (int q = 0; q < mesh.vertex_count; ++q) {
        auto& ring = mesh.one_ring[static_cast<std::size_t>(q)];
        ring.assign(nbr[static_cast<std::size_t>(q)].begin(), nbr[static_cast<std::size_t>(q)].end());
        ring.push_back(q);
        std::sort(ring.begin(), ring.end());
    }
}

inline void check_mesh_matrix(const Matrix& A, const TriangleMesh& mesh, const VertexMap& map) {
    require(map.size() == mesh.vertex_count, "vertex map size does not match mesh");
    require(A.rows() == mesh.vertex_count,
            "feature matrix has " + std::to_string(A.rows()) + " rows but mesh has " +
                std::to_string(mesh.vertex_count) + " vertices");
    require(static_cast<int>(mesh.one_ring.size()) == mesh.vertex_count,
            "mesh one-ring not built");
}

/// Per-entry one-ring Euclidean magnitude: the (p,i) output is the l2 norm of
/// column i restricted to the closed one-ring of the vertex row p maps to.
/// Summation runs ascending by vertex index, so results are reduction-order
/// deterministic.
inline Matrix local_magnitude(const Matrix& A, const TriangleMesh& mesh, const VertexMap& map) {
    check_mesh_matrix(A, mesh, map);
    Matrix out(A.rows(), A.cols());
    for (Index i = 0; i < A.cols(); ++i) {
        for (Index p = 0; p < A.rows(); ++p) {
            const int q = map.row_to_vertex[static_cast<std::size_t>(p)];
            double acc = 0.0;
            for (int qn : mesh.one_ring[static_cast<std::size_t>(q)]) {
                const double v = A(map.vertex_to_row[static_cast<std::size_t>(qn)], i);
                acc += v * v;
            }
            out(p, i) = std::sqrt(acc);
        }
    }
    return out;
}

/// Group shrink: S(p,i) = G(p,i) * max(0, 1 - threshold / Gbar(p,i)), with
/// Gbar the one-ring magnitude of G. Entries whose one-ring magnitude is at
/// or below the threshold come out exactly zero; 0/0 yields 0. On a mesh of
/// singleton one-rings this is plain scalar soft-thresholding.
inline Matrix local_shrink(const Matrix& G, double threshold, const TriangleMesh& mesh,
                           const VertexMap& map) {
    require(threshold >= 0.0, "local_shrink: negative threshold");
    const Matrix bar = local_magnitude(G, mesh, map);
    Matrix S(G.rows(), G.cols());
    for (Index i = 0; i < G.cols(); ++i) {
        for (Index p = 0; p < G.rows(); ++p) {
            const double b = bar(p, i);
            if (b <= threshold) {
                S(p, i) = 0.0;  // covers b == 0: G(p,i) is 0 there too
            } else {
                S(p, i) = G(p, i) * (1.0 - threshold / b);
            }
        }
    }
    return S;
}

/// Reported sparse-component scalar: entrywise l1 norm of S.
inline double local_sparse_norm(const Matrix& S, const TriangleMesh& mesh, const VertexMap& map) {
    check_mesh_matrix(S, mesh, map);
    double acc = 0.0;
    for (Index i = 0; i < S.cols(); ++i)
        for (Index p = 0; p < S.rows(); ++p) acc += std::abs(S(p, i));
    return acc;
}

// ---------------------------------------------------------------------------
// Mesh text format: first line "verts tris", then one "x y z" line per vertex,
// then one "a b c" index triple per triangle. Coordinates are printed with
// %.17g so a save/load cycle round-trips bit-exactly.
// ---------------------------------------------------------------------------

inline TriangleMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open mesh file: " + path);
    TriangleMesh mesh;
    int n_tris = 0;
    std::string header;
    require(static_cast<bool>(std::getline(in, header)), "mesh file empty: " + path);
    {
        std::istringstream hs(header);
        require(static_cast<bool>(hs >> mesh.vertex_count >> n_tris),
                "mesh header must be 'verts tris': " + path);
    }
    require(mesh.vertex_count >= 0 && n_tris >= 0, "mesh header counts must be nonnegative");
    mesh.positions.resize(static_cast<std::size_t>(mesh.vertex_count));
    for (auto& p : mesh.positions)
        require(static_cast<bool>(in >> p[0] >> p[1] >> p[2]), "mesh file truncated in vertices");
    mesh.triangles.resize(static_cast<std::size_t>(n_tris));
    for (auto& t : mesh.triangles)
        require(static_cast<bool>(in >> t[0] >> t[1] >> t[2]), "mesh file truncated in triangles");
    build_one_ring(mesh);
    return mesh;
}

inline void save_mesh(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write mesh file: " + path);
    out << mesh.vertex_count << " " << mesh.triangles.size() << "\n";
    char buf[96];
    for (int q = 0; q < mesh.vertex_count; ++q) {
        const auto& p = q < static_cast<int>(mesh.positions.size())
                            ? mesh.positions[static_cast<std::size_t>(q)]
                            : std::array<double, 3>{0, 0, 0};
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
    require(out.good(), "write failed: " + path);
}

/// Per-vertex scalar overlay for external mesh viewers: the mesh text format
/// followed by one scalar line per vertex.
inline void save_overlay(const TriangleMesh& mesh, const Vector& values, const std::string& path) {
    require(values.size() == mesh.vertex_count, "overlay length does not match mesh");
    std::ofstream out(path);
    require(out.good(), "cannot write overlay file: " + path);
    out << mesh.vertex_count << " " << mesh.triangles.size() << "\n";
    char buf[96];
    for (int q = 0; q < mesh.vertex_count; ++q) {
        const auto& p = q < static_cast<int>(mesh.positions.size())
                            ? mesh.positions[static_cast<std::size_t>(q)]
                            : std::array<double, 3>{0, 0, 0};
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
    for (int q = 0; q < mesh.vertex_count; ++q) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", values(q));
        out << buf;
    }
    require(out.good(), "write failed: " + path);
}

/// Optional "row,vertex" CSV override for the row-to-vertex correspondence.
inline VertexMap load_vertex_map(const std::string& path, int vertex_count) {
    std::ifstream in(path);
    require(in.good(), "cannot open vertex map: " + path);
    VertexMap map;
    map.row_to_vertex.assign(static_cast<std::size_t>(vertex_count), -1);
    map.vertex_to_row.assign(static_cast<std::size_t>(vertex_count), -1);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b;
        require(static_cast<bool>(std::getline(ls, a, ',')) &&
                    static_cast<bool>(std::getline(ls, b)),
                "vertex map line not 'row,vertex': " + line);
        if (first && (a == "row" || a == "\"row\"")) {
            first = false;
            continue;  // header
        }
        first = false;
        const int row = std::stoi(a);
        const int vtx = std::stoi(b);
        require(row >= 0 && row < vertex_count, "vertex map row out of range: " + line);
        require(vtx >= 0 && vtx < vertex_count, "vertex map vertex out of range: " + line);
        require(map.row_to_vertex[static_cast<std::size_t>(row)] == -1,
                "vertex map row repeated: " + std::to_string(row));
        require(map.vertex_to_row[static_cast<std::size_t>(vtx)] == -1,
                "vertex map vertex repeated: " + std::to_string(vtx));
        map.row_to_vertex[static_cast<std::size_t>(row)] = vtx;
        map.vertex_to_row[static_cast<std::size_t>(vtx)] = row;
    }
    for (int r = 0; r < vertex_count; ++r)
        require(map.row_to_vertex[static_cast<std::size_t>(r)] >= 0,
                "vertex map is not a bijection: row " + std::to_string(r) + " unmapped");
    return map;
}

}  // namespace umitk
