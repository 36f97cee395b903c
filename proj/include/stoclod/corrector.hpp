#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "stoclod/fem.hpp"

namespace stoclod {

/// Failure of a linear solve or of a solution invariant; maps to the
/// numerical-failure exit code in the CLI.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fine-scale element correctors q_{T,j} on the patch around T, one per
/// Cartesian direction, with their Lagrange multipliers.
struct CorrectorSet {
    int T = -1;
    int ell = 0;
    const Patch* patch = nullptr;
    std::vector<int> patch_dofs;      // fine dof ids (patch interior), sorted
    std::vector<Vector> q;            // d vectors over patch_dofs
    std::vector<Vector> multiplier;   // d vectors over constraint rows
    std::vector<int> constraint_rows; // coarse dof id per row
    SeedRecord seed;
};

/// KKT system of one cell problem: [[K, B^T],[B, 0]].
struct SaddleSystem {
    SpMat stiffness;  // patch interior dofs
    SpMat constraints; // kept I_H rows restricted to the patch
    std::vector<int> patch_dofs;
    std::vector<int> constraint_rows;
    std::vector<Vector> rhs; // one per direction j
};

/// Per-sample corrector solver. Assembles the global fine stiffness once,
/// slices patch systems out of it, and shares one factorization between all
/// cell problems with identical patch interiors (equal dof sets give equal
/// KKT matrices; only the right-hand side depends on T).
class CorrectorSolver {
  public:
    CorrectorSolver(const QuasiInterpolator& interp, const CoefficientField& coeff);

    /// patch must have fine data attached.
    CorrectorSet solve(const Patch& patch) const;

    SaddleSystem build_system(const Patch& patch) const;

    const SpMat& fine_stiffness() const { return stiffness_; }
    const std::vector<std::vector<int>>& children() const { return children_; }
    double lambda_min() const { return lambda_min_; }
    double lambda_max() const { return lambda_max_; }

  private:
    struct Factorization {
        Eigen::SparseLU<SpMat> lu;
        ConstraintBlock block;
        int n = 0, m = 0;
    };
    const Factorization& factorize(const Patch& patch) const;

    const QuasiInterpolator* interp_;
    const CoefficientField* coeff_;
    SpMat stiffness_;
    std::vector<std::vector<int>> children_;
    double lambda_min_ = 0.0, lambda_max_ = 0.0;
    mutable std::map<std::vector<int>, std::unique_ptr<Factorization>> cache_;
};

/// Convenience wrapper for a single cell problem.
CorrectorSet solve_corrector(const Patch& patch, const CoefficientField& coeff,
                             const QuasiInterpolator& interp);

/// Correction operator: fine vector sum_T sum_j (d_j v_H|_T) q_{T,j}.
Vector apply_correction(const FeFunction& v_coarse,
                        const std::vector<CorrectorSet>& correctors,
                        const QuasiInterpolator& interp);

/// Energy of the corrector per patch ring r = 1..ell:
/// ||grad q_{T,j}||_{L2(N^r(T) \ N^{r-1}(T))}.
std::vector<double> decay_profile(const CorrectorSet& corrector, int j,
                                  const QuasiInterpolator& interp);

/// Least-squares fit of e_r ~ C theta^r over the positive entries.
double fit_decay_rate(const std::vector<double>& ring_energies);

} // namespace stoclod
