#include "stoclod/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "stoclod/rng.hpp"

namespace stoclod {

double BoxDomain::min_extent() const {
    double m = extent(0);
    for (int a = 1; a < d; ++a) m = std::min(m, extent(a));
    return m;
}

double BoxDomain::diameter() const {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += extent(a) * extent(a);
    return std::sqrt(s);
}

double BoxDomain::volume() const {
    double v = 1.0;
    for (int a = 0; a < d; ++a) v *= extent(a);
    return v;
}

BoxDomain BoxDomain::unit(int d) {
    BoxDomain b;
    b.d = d;
    return b;
}

namespace {

// Permutations of {0..d-1} in lexicographic order; fixes the per-cell
// simplex ordering for all meshes in the family.
std::vector<std::array<int, 3>> axis_permutations(int d) {
    std::array<int, 3> p{0, 1, 2};
    std::vector<std::array<int, 3>> out;
    std::vector<int> idx(p.begin(), p.begin() + d);
    std::sort(idx.begin(), idx.end());
    do {
        std::array<int, 3> q{0, 0, 0};
        for (int i = 0; i < d; ++i) q[i] = idx[i];
        out.push_back(q);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return out;
}

void validate_domain(const BoxDomain& domain) {
    if (domain.d < 1 || domain.d > 3)
        throw std::invalid_argument("BoxDomain: dimension must be 1, 2 or 3");
    for (int a = 0; a < domain.d; ++a)
        if (!(domain.lo[a] < domain.hi[a]))
            throw std::invalid_argument("BoxDomain: lo < hi required per axis");
    double diam = domain.diameter();
    if (diam < 0.5 || diam > 2.0)
        throw std::invalid_argument("BoxDomain: diameter must lie in [0.5, 2]");
}

} // namespace

Mesh build_coarse_mesh(const BoxDomain& domain,
                       const std::array<int, 3>& n_per_axis) {
    validate_domain(domain);
    const int d = domain.d;
    for (int a = 0; a < d; ++a)
        if (n_per_axis[a] < 1)
            throw std::invalid_argument("build_coarse_mesh: need >= 1 cell per axis");

    Mesh m;
    m.domain = domain;
    m.d = d;
    m.level = Mesh::Level::Coarse;
    m.cells_per_axis = {1, 1, 1};
    for (int a = 0; a < d; ++a) m.cells_per_axis[a] = n_per_axis[a];

    const int nx = m.cells_per_axis[0];
    const int ny = d >= 2 ? m.cells_per_axis[1] : 0;
    const int nz = d >= 3 ? m.cells_per_axis[2] : 0;

    std::array<double, 3> h{0, 0, 0};
    for (int a = 0; a < d; ++a) h[a] = domain.extent(a) / m.cells_per_axis[a];

    // Lattice vertices, x fastest.
    const int vx = nx + 1, vy = d >= 2 ? ny + 1 : 1, vz = d >= 3 ? nz + 1 : 1;
    m.vertices.reserve(static_cast<size_t>(vx) * vy * vz);
    m.boundary_vertex.reserve(m.vertices.capacity());
    for (int k = 0; k < vz; ++k)
        for (int j = 0; j < vy; ++j)
            for (int i = 0; i < vx; ++i) {
                Vec3 x{0, 0, 0};
                x[0] = domain.lo[0] + i * h[0];
                if (d >= 2) x[1] = domain.lo[1] + j * h[1];
                if (d >= 3) x[2] = domain.lo[2] + k * h[2];
                m.vertices.push_back(x);
                bool bnd = (i == 0 || i == nx);
                if (d >= 2) bnd = bnd || (j == 0 || j == ny);
                if (d >= 3) bnd = bnd || (k == 0 || k == nz);
                m.boundary_vertex.push_back(bnd);
            }

    auto vid = [&](int i, int j, int k) { return i + vx * (j + vy * k); };

    const auto perms = axis_permutations(d);
    for (int k = 0; k < std::max(nz, 1); ++k)
        for (int j = 0; j < std::max(ny, 1); ++j)
            for (int i = 0; i < nx; ++i) {
                std::array<int, 3> base{i, d >= 2 ? j : 0, d >= 3 ? k : 0};
                for (const auto& p : perms) {
                    std::array<int, 4> el{-1, -1, -1, -1};
                    std::array<int, 3> c = base;
                    el[0] = vid(c[0], c[1], c[2]);
                    for (int s = 0; s < d; ++s) {
                        c[p[s]] += 1;
                        el[s + 1] = vid(c[0], c[1], c[2]);
                    }
                    m.elements.push_back(el);
                }
            }

    m.H = 0.0;
    for (int e = 0; e < m.n_elements(); ++e)
        m.H = std::max(m.H, m.element_diameter(e));

    m.vertex_to_elements.assign(m.n_vertices(), {});
    for (int e = 0; e < m.n_elements(); ++e)
        for (int s = 0; s <= d; ++s)
            m.vertex_to_elements[m.elements[e][s]].push_back(e);

    return m;
}

double Mesh::element_volume(int e) const {
    const auto& el = elements[e];
    Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r)
            J(r, c) = vertices[el[c + 1]][r] - vertices[el[0]][r];
    static const double fact[4] = {1.0, 1.0, 2.0, 6.0};
    return std::abs(J.determinant()) / fact[d];
}

double Mesh::element_diameter(int e) const {
    const auto& el = elements[e];
    double diam = 0.0;
    for (int a = 0; a <= d; ++a)
        for (int b = a + 1; b <= d; ++b) {
            double s = 0.0;
            for (int r = 0; r < d; ++r) {
                double t = vertices[el[a]][r] - vertices[el[b]][r];
                s += t * t;
            }
            diam = std::max(diam, std::sqrt(s));
        }
    return diam;
}

Vec3 Mesh::barycenter(int e) const {
    const auto& el = elements[e];
    Vec3 c{0, 0, 0};
    for (int s = 0; s <= d; ++s)
        for (int r = 0; r < 3; ++r) c[r] += vertices[el[s]][r];
    for (int r = 0; r < 3; ++r) c[r] /= (d + 1);
    return c;
}

void Mesh::element_gradients(int e, double& volume,
                             std::array<Vec3, 4>& grads) const {
    const auto& el = elements[e];
    Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r)
            J(r, c) = vertices[el[c + 1]][r] - vertices[el[0]][r];
    static const double fact[4] = {1.0, 1.0, 2.0, 6.0};
    volume = std::abs(J.determinant()) / fact[d];
    Eigen::Matrix3d Jit = J.inverse().transpose();
    for (auto& g : grads) g = {0, 0, 0};
    for (int s = 1; s <= d; ++s) {
        for (int r = 0; r < d; ++r) {
            grads[s][r] = Jit(r, s - 1);
            grads[0][r] -= Jit(r, s - 1);
        }
    }
}

std::array<double, 4> Mesh::barycentric(int e, const Vec3& x) const {
    const auto& el = elements[e];
    Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (int c = 0; c < d; ++c) {
        for (int r = 0; r < d; ++r)
            J(r, c) = vertices[el[c + 1]][r] - vertices[el[0]][r];
    }
    for (int r = 0; r < d; ++r) rhs(r) = x[r] - vertices[el[0]][r];
    Eigen::Vector3d xi = J.partialPivLu().solve(rhs);
    std::array<double, 4> lam{0, 0, 0, 0};
    double l0 = 1.0;
    for (int s = 0; s < d; ++s) {
        lam[s + 1] = xi(s);
        l0 -= xi(s);
    }
    lam[0] = l0;
    return lam;
}

uint64_t Mesh::structural_hash() const {
    std::ostringstream os;
    os << d << '|' << (level == Level::Fine ? 'f' : 'c');
    for (int a = 0; a < d; ++a)
        os << '|' << cells_per_axis[a] << '|' << domain.lo[a] << '|' << domain.hi[a];
    return fnv1a64_str(os.str());
}

nlohmann::json Mesh::to_json() const {
    nlohmann::json j;
    j["level"] = level == Level::Fine ? "fine" : "coarse";
    j["H"] = H;
    auto& verts = j["vertices"] = nlohmann::json::array();
    for (const auto& v : vertices) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < d; ++a) row.push_back(v[a]);
        verts.push_back(std::move(row));
    }
    auto& els = j["elements"] = nlohmann::json::array();
    for (const auto& el : elements) {
        nlohmann::json row = nlohmann::json::array();
        for (int s = 0; s <= d; ++s) row.push_back(el[s]);
        els.push_back(std::move(row));
    }
    return j;
}

Mesh refine_uniform(const Mesh& mesh, int levels) {
    if (levels < 0) throw std::invalid_argument("refine_uniform: levels >= 0");
    const int d = mesh.d;
    const int factor = 1 << levels;

    std::array<int, 3> n_fine{1, 1, 1};
    for (int a = 0; a < d; ++a) n_fine[a] = mesh.cells_per_axis[a] * factor;
    Mesh fine = build_coarse_mesh(mesh.domain, n_fine);
    fine.level = Mesh::Level::Fine;

    // Kuhn meshes are self-similar under dyadic refinement, so each fine
    // simplex lies in exactly one coarse simplex; locate it through the
    // sort order of the barycenter's cell-local coordinates.
    const auto perms = axis_permutations(d);
    const int types = static_cast<int>(perms.size());
    std::array<double, 3> hc{1, 1, 1};
    for (int a = 0; a < d; ++a)
        hc[a] = mesh.domain.extent(a) / mesh.cells_per_axis[a];

    fine.parent_map.resize(fine.n_elements());
    for (int e = 0; e < fine.n_elements(); ++e) {
        Vec3 b = fine.barycenter(e);
        std::array<int, 3> cell{0, 0, 0};
        std::array<double, 3> u{0, 0, 0};
        for (int a = 0; a < d; ++a) {
            double t = (b[a] - mesh.domain.lo[a]) / hc[a];
            cell[a] = std::min(static_cast<int>(t), mesh.cells_per_axis[a] - 1);
            u[a] = t - cell[a];
        }
        // Descending order of local coordinates identifies the Kuhn simplex.
        std::array<int, 3> order{0, 1, 2};
        std::sort(order.begin(), order.begin() + d,
                  [&](int a, int b2) { return u[a] > u[b2]; });
        int type = -1;
        for (int t = 0; t < types; ++t) {
            bool same = true;
            for (int s = 0; s < d; ++s) same = same && perms[t][s] == order[s];
            if (same) { type = t; break; }
        }
        int cell_index = cell[0];
        if (d >= 2) cell_index += mesh.cells_per_axis[0] * cell[1];
        if (d >= 3) cell_index += mesh.cells_per_axis[0] * mesh.cells_per_axis[1] * cell[2];
        fine.parent_map[e] = cell_index * types + type;
    }
    return fine;
}

std::vector<int> one_ring(const Mesh& mesh, const std::vector<int>& elems) {
    std::vector<char> in(mesh.n_elements(), 0);
    std::vector<int> out;
    for (int e : elems)
        for (int s = 0; s <= mesh.d; ++s)
            for (int nb : mesh.vertex_to_elements[mesh.elements[e][s]])
                if (!in[nb]) {
                    in[nb] = 1;
                    out.push_back(nb);
                }
    std::sort(out.begin(), out.end());
    return out;
}

Patch build_patch(const Mesh& coarse, int T, int ell) {
    if (T < 0 || T >= coarse.n_elements())
        throw std::invalid_argument("build_patch: invalid element index");
    if (ell < 1) throw std::invalid_argument("build_patch: ell >= 1");

    Patch p;
    p.center_element = T;
    p.ell = ell;
    p.element_set = {T};
    for (int r = 0; r < ell; ++r) p.element_set = one_ring(coarse, p.element_set);
    return p;
}

bool Patch::contains_element(int coarse_element) const {
    return std::binary_search(element_set.begin(), element_set.end(),
                              coarse_element);
}

void Patch::attach_fine(const Mesh& fine) {
    if (fine.parent_map.empty())
        throw std::invalid_argument("Patch::attach_fine: mesh has no parent_map");
    fine_element_set.clear();
    std::vector<char> in_patch(fine.n_elements(), 0);
    for (int e = 0; e < fine.n_elements(); ++e)
        if (contains_element(fine.parent_map[e])) {
            in_patch[e] = 1;
            fine_element_set.push_back(e);
        }

    fine_vertices.clear();
    fine_vertex_class.clear();
    std::vector<char> seen(fine.n_vertices(), 0);
    for (int e : fine_element_set)
        for (int s = 0; s <= fine.d; ++s) seen[fine.elements[e][s]] = 1;
    for (int v = 0; v < fine.n_vertices(); ++v) {
        if (!seen[v]) continue;
        fine_vertices.push_back(v);
        if (fine.boundary_vertex[v]) {
            fine_vertex_class.push_back(VertexClass::DomainBoundary);
            continue;
        }
        bool interior = true;
        for (int nb : fine.vertex_to_elements[v]) interior = interior && in_patch[nb];
        fine_vertex_class.push_back(interior ? VertexClass::Interior
                                             : VertexClass::PatchBoundary);
    }
}

} // namespace stoclod
