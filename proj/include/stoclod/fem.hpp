#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "stoclod/mesh.hpp"
#include "stoclod/random_field.hpp"

namespace stoclod {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using ScalarFn = std::function<double(const Vec3&)>;

/// Free (non-Dirichlet) vertex numbering; boundary vertices are eliminated.
struct DofMap {
    const Mesh* mesh = nullptr;
    std::vector<int> vertex_to_dof; // -1 for boundary vertices
    std::vector<int> dof_to_vertex;
    int n_dofs = 0;

    explicit DofMap(const Mesh& m);
    DofMap() = default;
};

/// P1 finite element function given by its free nodal values.
struct FeFunction {
    const Mesh* mesh = nullptr;
    const DofMap* dofs = nullptr;
    Vector coeffs;

    FeFunction() = default;
    FeFunction(const DofMap& dm, Vector c) : mesh(dm.mesh), dofs(&dm), coeffs(std::move(c)) {}

    /// Constant gradient on element e.
    Vec3 gradient(int e) const;
    double value_at_vertex(int v) const;
};

/// Stiffness matrix: entry (i,j) = sum_tau |tau| grad phi_i . A|_tau grad phi_j.
/// Exact for per-element-constant coefficients.
SpMat assemble_stiffness(const Mesh& mesh, const CoefficientField& coeff,
                         const DofMap& dofs);

/// Load vector by order-2 simplex quadrature.
Vector assemble_load(const Mesh& mesh, const ScalarFn& f, const DofMap& dofs);

/// P1 mass matrix (exact).
SpMat mass_matrix(const Mesh& mesh, const DofMap& dofs);

/// L2 norm over a subset of elements (exact P1 quadrature).
double l2_norm_on(const Mesh& mesh, const DofMap& dofs, const Vector& v,
                  const std::vector<int>& elements);
/// L2 norm of the gradient over a subset of elements.
double h1_seminorm_on(const Mesh& mesh, const DofMap& dofs, const Vector& v,
                      const std::vector<int>& elements);

/// Quasi-interpolation I_H: elementwise L2 projection onto discontinuous
/// P1 over the coarse mesh followed by vertex averaging; Dirichlet variant
/// (boundary vertices get value zero). Idempotent on coarse functions.
struct QuasiInterpolator {
    const Mesh* coarse = nullptr;
    const Mesh* fine = nullptr;
    DofMap coarse_dofs;
    DofMap fine_dofs;
    SpMat interpolation; // coarse free dofs x fine free dofs
    SpMat prolongation;  // fine free dofs x coarse free dofs (nodal embedding)

    Vector restrict_to_coarse(const Vector& fine_vec) const { return interpolation * fine_vec; }
    Vector embed(const Vector& coarse_vec) const { return prolongation * coarse_vec; }
};

QuasiInterpolator build_quasi_interpolator(const Mesh& coarse, const Mesh& fine);

/// Restriction of I_H to fine dofs interior to a patch; rows with empty
/// restriction are dropped so the block has full row rank.
struct ConstraintBlock {
    SpMat B;                      // kept rows x patch interior dofs
    std::vector<int> coarse_rows; // coarse dof id per kept row
    std::vector<int> patch_dofs;  // fine dof ids, sorted
};

ConstraintBlock kernel_constraint_rows(const QuasiInterpolator& interp,
                                       const Patch& patch);

} // namespace stoclod
