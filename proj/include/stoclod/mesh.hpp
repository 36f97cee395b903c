#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace stoclod {

using Vec3 = std::array<double, 3>;

/// Axis-aligned box domain in d in {1,2,3}; extents of order one.
struct BoxDomain {
    int d = 1;
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{1.0, 1.0, 1.0};

    double extent(int axis) const { return hi[axis] - lo[axis]; }
    double min_extent() const;
    double diameter() const;
    double volume() const;
    static BoxDomain unit(int d);
};

/// Structured Kuhn (Freudenthal) simplicial triangulation of a box.
///
/// Elements are stored cell-major: within a tensor cell the d! simplices
/// appear in a fixed permutation order, so element ids are reproducible.
/// A fine mesh produced by refine_uniform() carries a parent_map into the
/// coarse mesh it was derived from.
struct Mesh {
    enum class Level { Coarse, Fine };

    BoxDomain domain;
    Level level = Level::Coarse;
    int d = 1;
    std::array<int, 3> cells_per_axis{1, 1, 1};
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> elements; // d+1 used entries, rest -1
    std::vector<bool> boundary_vertex;
    std::vector<int> parent_map; // fine meshes only
    double H = 0.0;              // max element diameter

    std::vector<std::vector<int>> vertex_to_elements;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_elements() const { return static_cast<int>(elements.size()); }
    int verts_per_element() const { return d + 1; }

    double element_volume(int e) const;
    double element_diameter(int e) const;
    Vec3 barycenter(int e) const;

    /// Gradients of the d+1 barycentric (hat) functions on element e;
    /// constant per element. Also returns the volume.
    void element_gradients(int e, double& volume,
                           std::array<Vec3, 4>& grads) const;

    /// Barycentric coordinates of point x with respect to element e.
    std::array<double, 4> barycentric(int e, const Vec3& x) const;

    /// Hash of the structural data (dimension, grid, extents, level).
    uint64_t structural_hash() const;

    nlohmann::json to_json() const;
};

/// Kuhn triangulation of the tensor grid: 1 interval / 2 triangles /
/// 6 tetrahedra per cell.
Mesh build_coarse_mesh(const BoxDomain& domain,
                       const std::array<int, 3>& n_per_axis);

/// Uniform refinement: every simplex is split into 2^d children per level.
/// The refined mesh is again a Kuhn mesh of the dyadically refined grid and
/// nests exactly in the parent mesh.
Mesh refine_uniform(const Mesh& mesh, int levels);

/// ell-th order element patch N^ell(T), vertex-adjacency rings clipped at
/// the domain boundary.
struct Patch {
    int center_element = -1;
    int ell = 0;
    std::vector<int> element_set;      // coarse element ids, sorted
    std::vector<int> fine_element_set; // filled by attach_fine, sorted

    /// Classification of fine vertices covered by the patch.
    enum class VertexClass : uint8_t {
        Interior,      // all adjacent fine elements lie in the patch, not on domain boundary
        PatchBoundary, // on the interface to the rest of D (zero extension)
        DomainBoundary // on the Dirichlet boundary of D
    };
    std::vector<int> fine_vertices;             // sorted
    std::vector<VertexClass> fine_vertex_class; // parallel to fine_vertices

    bool contains_element(int coarse_element) const;
    void attach_fine(const Mesh& fine);
};

Patch build_patch(const Mesh& coarse, int T, int ell);

/// One adjacency ring: all elements sharing a vertex with the given set.
std::vector<int> one_ring(const Mesh& mesh, const std::vector<int>& elems);

} // namespace stoclod
