#include "stoclod/fem.hpp"

#include <algorithm>
#include <stdexcept>

namespace stoclod {

DofMap::DofMap(const Mesh& m) : mesh(&m) {
    vertex_to_dof.assign(m.n_vertices(), -1);
    for (int v = 0; v < m.n_vertices(); ++v)
        if (!m.boundary_vertex[v]) {
            vertex_to_dof[v] = n_dofs++;
            dof_to_vertex.push_back(v);
        }
}

Vec3 FeFunction::gradient(int e) const {
    double vol;
    std::array<Vec3, 4> g;
    mesh->element_gradients(e, vol, g);
    Vec3 out{0, 0, 0};
    for (int s = 0; s <= mesh->d; ++s) {
        int dof = dofs->vertex_to_dof[mesh->elements[e][s]];
        if (dof < 0) continue;
        for (int r = 0; r < mesh->d; ++r) out[r] += coeffs[dof] * g[s][r];
    }
    return out;
}

double FeFunction::value_at_vertex(int v) const {
    int dof = dofs->vertex_to_dof[v];
    return dof < 0 ? 0.0 : coeffs[dof];
}

SpMat assemble_stiffness(const Mesh& mesh, const CoefficientField& coeff,
                         const DofMap& dofs) {
    if (coeff.mesh != &mesh || static_cast<int>(coeff.values.size()) != mesh.n_elements())
        throw std::invalid_argument("assemble_stiffness: coefficient/mesh mismatch");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(mesh.n_elements()) * (mesh.d + 1) * (mesh.d + 1));
    double vol;
    std::array<Vec3, 4> g;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        mesh.element_gradients(e, vol, g);
        const auto& el = mesh.elements[e];
        for (int a = 0; a <= mesh.d; ++a) {
            int i = dofs.vertex_to_dof[el[a]];
            if (i < 0) continue;
            for (int b = 0; b <= mesh.d; ++b) {
                int j = dofs.vertex_to_dof[el[b]];
                if (j < 0) continue;
                trips.emplace_back(i, j, vol * coeff.quad(e, g[a], g[b]));
            }
        }
    }
    SpMat K(dofs.n_dofs, dofs.n_dofs);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

namespace {

struct QuadRule {
    std::vector<std::array<double, 4>> points; // barycentric
    std::vector<double> weights;               // sum to 1
};

// Degree-2 exact rules on the reference simplex.
QuadRule order2_rule(int d) {
    QuadRule q;
    if (d == 1) {
        double a = 0.5 - 0.5 / std::sqrt(3.0);
        q.points = {{1 - a, a, 0, 0}, {a, 1 - a, 0, 0}};
        q.weights = {0.5, 0.5};
    } else if (d == 2) {
        q.points = {{0.5, 0.5, 0.0, 0}, {0.0, 0.5, 0.5, 0}, {0.5, 0.0, 0.5, 0}};
        q.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    } else {
        double a = 0.5854101966249685, b = 0.1381966011250105;
        q.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
        q.weights = {0.25, 0.25, 0.25, 0.25};
    }
    return q;
}

} // namespace

Vector assemble_load(const Mesh& mesh, const ScalarFn& f, const DofMap& dofs) {
    QuadRule q = order2_rule(mesh.d);
    Vector b = Vector::Zero(dofs.n_dofs);
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto& el = mesh.elements[e];
        double vol = mesh.element_volume(e);
        for (size_t p = 0; p < q.points.size(); ++p) {
            Vec3 x{0, 0, 0};
            for (int s = 0; s <= mesh.d; ++s)
                for (int r = 0; r < mesh.d; ++r)
                    x[r] += q.points[p][s] * mesh.vertices[el[s]][r];
            double fx = f(x) * q.weights[p] * vol;
            for (int s = 0; s <= mesh.d; ++s) {
                int i = dofs.vertex_to_dof[el[s]];
                if (i >= 0) b[i] += fx * q.points[p][s];
            }
        }
    }
    return b;
}

SpMat mass_matrix(const Mesh& mesh, const DofMap& dofs) {
    std::vector<Eigen::Triplet<double>> trips;
    const int d = mesh.d;
    const double denom = (d + 1.0) * (d + 2.0);
    for (int e = 0; e < mesh.n_elements(); ++e) {
        double vol = mesh.element_volume(e);
        const auto& el = mesh.elements[e];
        for (int a = 0; a <= d; ++a) {
            int i = dofs.vertex_to_dof[el[a]];
            if (i < 0) continue;
            for (int b = 0; b <= d; ++b) {
                int j = dofs.vertex_to_dof[el[b]];
                if (j < 0) continue;
                trips.emplace_back(i, j, vol * (a == b ? 2.0 : 1.0) / denom);
            }
        }
    }
    SpMat M(dofs.n_dofs, dofs.n_dofs);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

double l2_norm_on(const Mesh& mesh, const DofMap& dofs, const Vector& v,
                  const std::vector<int>& elements) {
    const int d = mesh.d;
    const double denom = (d + 1.0) * (d + 2.0);
    double acc = 0.0;
    for (int e : elements) {
        const auto& el = mesh.elements[e];
        double vol = mesh.element_volume(e);
        double nodal[4] = {0, 0, 0, 0};
        double sum = 0.0;
        for (int s = 0; s <= d; ++s) {
            int dof = dofs.vertex_to_dof[el[s]];
            nodal[s] = dof < 0 ? 0.0 : v[dof];
            sum += nodal[s];
        }
        double diag = 0.0;
        for (int s = 0; s <= d; ++s) diag += nodal[s] * nodal[s];
        acc += vol / denom * (sum * sum + diag);
    }
    return std::sqrt(acc);
}

double h1_seminorm_on(const Mesh& mesh, const DofMap& dofs, const Vector& v,
                      const std::vector<int>& elements) {
    double acc = 0.0;
    double vol;
    std::array<Vec3, 4> g;
    for (int e : elements) {
        mesh.element_gradients(e, vol, g);
        Vec3 grad{0, 0, 0};
        for (int s = 0; s <= mesh.d; ++s) {
            int dof = dofs.vertex_to_dof[mesh.elements[e][s]];
            if (dof < 0) continue;
            for (int r = 0; r < mesh.d; ++r) grad[r] += v[dof] * g[s][r];
        }
        double n2 = 0.0;
        for (int r = 0; r < mesh.d; ++r) n2 += grad[r] * grad[r];
        acc += vol * n2;
    }
    return std::sqrt(acc);
}

QuasiInterpolator build_quasi_interpolator(const Mesh& coarse, const Mesh& fine) {
    if (fine.parent_map.empty() ||
        static_cast<int>(fine.parent_map.size()) != fine.n_elements())
        throw std::invalid_argument("build_quasi_interpolator: meshes not nested");
    for (int p : fine.parent_map)
        if (p < 0 || p >= coarse.n_elements())
            throw std::invalid_argument("build_quasi_interpolator: parent_map out of range");

    QuasiInterpolator qi;
    qi.coarse = &coarse;
    qi.fine = &fine;
    qi.coarse_dofs = DofMap(coarse);
    qi.fine_dofs = DofMap(fine);

    const int d = coarse.d;
    const int nv = d + 1;

    std::vector<std::vector<int>> children(coarse.n_elements());
    for (int e = 0; e < fine.n_elements(); ++e)
        children[fine.parent_map[e]].push_back(e);

    // Barycentric coefficients of each coarse element: lambda_j(x), affine.
    // Row j of C_T expresses the local L2 projection's nodal value at the
    // j-th coarse vertex in terms of fine nodal values on T.
    std::vector<Eigen::Triplet<double>> trips;
    const double denom = (d + 1.0) * (d + 2.0);
    for (int T = 0; T < coarse.n_elements(); ++T) {
        double volT = coarse.element_volume(T);
        Eigen::MatrixXd M = Eigen::MatrixXd::Constant(nv, nv, volT / denom);
        for (int j = 0; j < nv; ++j) M(j, j) *= 2.0;

        // Columns: fine dofs appearing in T (local order of first appearance).
        std::vector<int> cols;
        std::vector<int> col_of_dof(qi.fine_dofs.n_dofs, -1);
        auto col_index = [&](int dof) {
            if (col_of_dof[dof] < 0) {
                col_of_dof[dof] = static_cast<int>(cols.size());
                cols.push_back(dof);
            }
            return col_of_dof[dof];
        };
        std::vector<Eigen::Triplet<double>> rtr;
        for (int tau : children[T]) {
            const auto& el = fine.elements[tau];
            double vol = fine.element_volume(tau);
            // lambda_j at the fine element's vertices
            double lam[4][4];
            double lam_sum[4] = {0, 0, 0, 0};
            for (int b = 0; b < nv; ++b) {
                auto l = coarse.barycentric(T, fine.vertices[el[b]]);
                for (int j = 0; j < nv; ++j) {
                    lam[j][b] = l[j];
                    lam_sum[j] += l[j];
                }
            }
            for (int a = 0; a < nv; ++a) {
                int dof = qi.fine_dofs.vertex_to_dof[el[a]];
                if (dof < 0) continue;
                int c = col_index(dof);
                for (int j = 0; j < nv; ++j)
                    rtr.emplace_back(j, c, vol / denom * (lam[j][a] + lam_sum[j]));
            }
        }
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nv, static_cast<int>(cols.size()));
        for (const auto& t : rtr) R(t.row(), t.col()) += t.value();
        Eigen::MatrixXd C = M.llt().solve(R);

        for (int j = 0; j < nv; ++j) {
            int z = coarse.elements[T][j];
            int row = qi.coarse_dofs.vertex_to_dof[z];
            if (row < 0) continue;
            double w = 1.0 / coarse.vertex_to_elements[z].size();
            for (size_t c = 0; c < cols.size(); ++c) {
                double val = w * C(j, static_cast<int>(c));
                if (val != 0.0) trips.emplace_back(row, cols[c], val);
            }
        }
        for (int dof : cols) col_of_dof[dof] = -1;
    }

    qi.interpolation.resize(qi.coarse_dofs.n_dofs, qi.fine_dofs.n_dofs);
    qi.interpolation.setFromTriplets(trips.begin(), trips.end());
    qi.interpolation.prune(0.0);

    // Nodal embedding of coarse functions into the fine space.
    std::vector<Eigen::Triplet<double>> ptr;
    for (int fdof = 0; fdof < qi.fine_dofs.n_dofs; ++fdof) {
        int v = qi.fine_dofs.dof_to_vertex[fdof];
        int tau = fine.vertex_to_elements[v].front();
        int T = fine.parent_map[tau];
        auto lam = coarse.barycentric(T, fine.vertices[v]);
        for (int j = 0; j < nv; ++j) {
            int cdof = qi.coarse_dofs.vertex_to_dof[coarse.elements[T][j]];
            if (cdof < 0 || std::abs(lam[j]) < 1e-14) continue;
            ptr.emplace_back(fdof, cdof, lam[j]);
        }
    }
    qi.prolongation.resize(qi.fine_dofs.n_dofs, qi.coarse_dofs.n_dofs);
    qi.prolongation.setFromTriplets(ptr.begin(), ptr.end());
    return qi;
}

ConstraintBlock kernel_constraint_rows(const QuasiInterpolator& interp,
                                       const Patch& patch) {
    ConstraintBlock cb;
    if (patch.fine_vertices.empty())
        throw std::invalid_argument("kernel_constraint_rows: patch has no fine data");

    for (size_t i = 0; i < patch.fine_vertices.size(); ++i) {
        if (patch.fine_vertex_class[i] != Patch::VertexClass::Interior) continue;
        int dof = interp.fine_dofs.vertex_to_dof[patch.fine_vertices[i]];
        if (dof >= 0) cb.patch_dofs.push_back(dof);
    }
    std::sort(cb.patch_dofs.begin(), cb.patch_dofs.end());

    std::vector<int> local_of_dof(interp.fine_dofs.n_dofs, -1);
    for (size_t i = 0; i < cb.patch_dofs.size(); ++i)
        local_of_dof[cb.patch_dofs[i]] = static_cast<int>(i);

    // Collect nonzero restrictions of I_H rows to the patch interior.
    std::vector<std::vector<std::pair<int, double>>> rows(interp.coarse_dofs.n_dofs);
    for (int col = 0; col < interp.interpolation.outerSize(); ++col) {
        if (local_of_dof[col] < 0) continue;
        for (SpMat::InnerIterator it(interp.interpolation, col); it; ++it)
            rows[it.row()].emplace_back(local_of_dof[col], it.value());
    }

    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < interp.coarse_dofs.n_dofs; ++r) {
        if (rows[r].empty()) continue;
        int out_row = static_cast<int>(cb.coarse_rows.size());
        cb.coarse_rows.push_back(r);
        for (const auto& [c, v] : rows[r]) trips.emplace_back(out_row, c, v);
    }
    cb.B.resize(static_cast<int>(cb.coarse_rows.size()),
                static_cast<int>(cb.patch_dofs.size()));
    cb.B.setFromTriplets(trips.begin(), trips.end());
    return cb;
}

} // namespace stoclod
