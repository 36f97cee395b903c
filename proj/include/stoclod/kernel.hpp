#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stoclod/corrector.hpp"
#include "stoclod/fem.hpp"

namespace stoclod {

/// d x d block stored row-major in a fixed 3x3 frame.
struct KernelBlock {
    std::array<double, 9> m{};

    double& at(int r, int c) { return m[3 * r + c]; }
    double at(int r, int c) const { return m[3 * r + c]; }
    double frobenius(int d) const;
};

/// Quasi-local effective kernel: one d x d block per element pair (T,K)
/// with K in the ell-th patch of T; absent pairs are zero.
///
/// Convention tied to the Petrov-Galerkin structure of the method: the
/// first index T is the corrector's home element and carries the gradient
/// of the *second* (corrected, test) argument of the induced form; the
/// second index K carries the gradient of the first argument.
struct SparseKernel {
    const Mesh* coarse = nullptr;
    int d = 1;
    int ell = 0;
    uint64_t mesh_hash = 0;
    bool averaged = false;
    SeedRecord seed;

    // rows[T] sorted by K
    std::vector<std::vector<std::pair<int, KernelBlock>>> rows;

    const KernelBlock* find(int T, int K) const;
    /// Zero block if the pair is not stored.
    KernelBlock block(int T, int K) const;
    int stored_entries() const;
};

/// Incremental kernel assembly: one row per solved corrector set.
class KernelAssembler {
  public:
    KernelAssembler(const QuasiInterpolator& interp, const CoefficientField& coeff,
                    int ell);

    void add_row(const CorrectorSet& correctors);
    SparseKernel take();

  private:
    const QuasiInterpolator* interp_;
    const CoefficientField* coeff_;
    SparseKernel kernel_;
    std::vector<std::vector<int>> children_;
    std::vector<double> coarse_volume_;
};

/// Assemble the full kernel from one corrector set per coarse element.
SparseKernel assemble_kernel(const std::vector<CorrectorSet>& correctors,
                             const CoefficientField& coeff,
                             const QuasiInterpolator& interp);

/// a(v,z) = sum_{T,K} |T||K| grad v|_K . (block_{T,K} grad z|_T); the double
/// integral is exact for piecewise constant gradients. z enters through the
/// corrected side.
double bilinear_form(const SparseKernel& kernel, const FeFunction& v,
                     const FeFunction& z);

/// Sparse coarse system matrix M_ab = a(phi_b, phi_a) on free coarse dofs.
SpMat coarse_matrix(const SparseKernel& kernel, const DofMap& coarse_dofs);

/// Interchange format between offline and online phases.
void write_kernel_json(const SparseKernel& kernel, const std::string& path);
SparseKernel read_kernel_json(const std::string& path, const Mesh& coarse);

} // namespace stoclod
