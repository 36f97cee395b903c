#include "stoclod/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace stoclod {

CorrectorSolver::CorrectorSolver(const QuasiInterpolator& interp,
                                 const CoefficientField& coeff)
    : interp_(&interp), coeff_(&coeff) {
    if (coeff.mesh != interp.fine)
        throw std::invalid_argument("CorrectorSolver: coefficient not on the fine mesh");
    stiffness_ = assemble_stiffness(*interp.fine, coeff, interp.fine_dofs);
    children_.assign(interp.coarse->n_elements(), {});
    for (int e = 0; e < interp.fine->n_elements(); ++e)
        children_[interp.fine->parent_map[e]].push_back(e);

    const int d = coeff.d;
    lambda_min_ = std::numeric_limits<double>::infinity();
    lambda_max_ = 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    Eigen::MatrixXd A(d, d);
    for (const auto& m : coeff.values) {
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) A(r, c) = m[3 * r + c];
        es.compute(A, Eigen::EigenvaluesOnly);
        lambda_min_ = std::min(lambda_min_, es.eigenvalues().minCoeff());
        lambda_max_ = std::max(lambda_max_, es.eigenvalues().maxCoeff());
    }
}

const CorrectorSolver::Factorization&
CorrectorSolver::factorize(const Patch& patch) const {
    ConstraintBlock block = kernel_constraint_rows(*interp_, patch);
    auto it = cache_.find(block.patch_dofs);
    if (it != cache_.end()) return *it->second;

    auto fac = std::make_unique<Factorization>();
    fac->n = static_cast<int>(block.patch_dofs.size());
    fac->m = static_cast<int>(block.coarse_rows.size());
    if (fac->n == 0)
        throw NumericalError("corrector: patch has no interior fine dofs");

    std::vector<int> local(interp_->fine_dofs.n_dofs, -1);
    for (int i = 0; i < fac->n; ++i) local[block.patch_dofs[i]] = i;

    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < fac->n; ++i) {
        int col = block.patch_dofs[i];
        for (SpMat::InnerIterator itK(stiffness_, col); itK; ++itK) {
            int lr = local[itK.row()];
            if (lr >= 0) trips.emplace_back(lr, i, itK.value());
        }
    }
    for (int c = 0; c < block.B.outerSize(); ++c)
        for (SpMat::InnerIterator itB(block.B, c); itB; ++itB) {
            trips.emplace_back(fac->n + itB.row(), itB.col(), itB.value());
            trips.emplace_back(itB.col(), fac->n + itB.row(), itB.value());
        }

    SpMat kkt(fac->n + fac->m, fac->n + fac->m);
    kkt.setFromTriplets(trips.begin(), trips.end());
    fac->lu.compute(kkt);
    if (fac->lu.info() != Eigen::Success)
        throw NumericalError(
            "corrector: singular saddle-point system (rank-deficient constraints?)");
    fac->block = std::move(block);

    auto [pos, _] = cache_.emplace(fac->block.patch_dofs, std::move(fac));
    return *pos->second;
}

SaddleSystem CorrectorSolver::build_system(const Patch& patch) const {
    const auto& fac = factorize(patch);
    SaddleSystem sys;
    sys.constraints = fac.block.B;
    sys.patch_dofs = fac.block.patch_dofs;
    sys.constraint_rows = fac.block.coarse_rows;

    std::vector<int> local(interp_->fine_dofs.n_dofs, -1);
    for (size_t i = 0; i < sys.patch_dofs.size(); ++i)
        local[sys.patch_dofs[i]] = static_cast<int>(i);
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t i = 0; i < sys.patch_dofs.size(); ++i)
        for (SpMat::InnerIterator it(stiffness_, sys.patch_dofs[i]); it; ++it)
            if (local[it.row()] >= 0)
                trips.emplace_back(local[it.row()], static_cast<int>(i), it.value());
    sys.stiffness.resize(static_cast<int>(sys.patch_dofs.size()),
                         static_cast<int>(sys.patch_dofs.size()));
    sys.stiffness.setFromTriplets(trips.begin(), trips.end());

    const Mesh& fine = *interp_->fine;
    const int d = fine.d;
    sys.rhs.assign(d, Vector::Zero(static_cast<int>(sys.patch_dofs.size())));
    double vol;
    std::array<Vec3, 4> g;
    for (int tau : children_[patch.center_element]) {
        fine.element_gradients(tau, vol, g);
        for (int s = 0; s <= d; ++s) {
            int dof = interp_->fine_dofs.vertex_to_dof[fine.elements[tau][s]];
            if (dof < 0 || local[dof] < 0) continue;
            for (int j = 0; j < d; ++j) {
                Vec3 ej{0, 0, 0};
                ej[j] = 1.0;
                sys.rhs[j][local[dof]] += vol * coeff_->quad(tau, g[s], ej);
            }
        }
    }
    return sys;
}

CorrectorSet CorrectorSolver::solve(const Patch& patch) const {
    const auto& fac = factorize(patch);
    SaddleSystem sys = build_system(patch);
    const int d = interp_->fine->d;
    const int n = fac.n, m = fac.m;

    CorrectorSet cs;
    cs.T = patch.center_element;
    cs.ell = patch.ell;
    cs.patch = &patch;
    cs.patch_dofs = sys.patch_dofs;
    cs.constraint_rows = sys.constraint_rows;
    cs.seed = coeff_->seed;

    // chi_T energy, for the a priori energy bound on each corrector.
    std::vector<double> rhs_energy(d, 0.0);
    for (int tau : children_[patch.center_element]) {
        double vol = interp_->fine->element_volume(tau);
        for (int j = 0; j < d; ++j)
            rhs_energy[j] += vol * coeff_->entry(tau, j, j);
    }

    for (int j = 0; j < d; ++j) {
        Vector full = Vector::Zero(n + m);
        full.head(n) = sys.rhs[j];
        Vector sol = fac.lu.solve(full);
        if (fac.lu.info() != Eigen::Success)
            throw NumericalError("corrector: backsolve failed (T=" +
                                 std::to_string(patch.center_element) + ")");
        Vector qj = sol.head(n);
        Vector pj = sol.tail(m);

        double rhs_norm = sys.rhs[j].norm();
        double res1 = (sys.stiffness * qj + sys.constraints.transpose() * pj -
                       sys.rhs[j]).norm();
        double res2 = m > 0 ? (sys.constraints * qj).lpNorm<Eigen::Infinity>() : 0.0;
        double qnorm = qj.norm();
        double scale = std::max(rhs_norm, 1e-300);
        if (res1 > 1e-10 * scale)
            throw NumericalError("corrector: stiffness-block residual " +
                                 std::to_string(res1 / scale) + " at T=" +
                                 std::to_string(patch.center_element));
        if (res2 > 1e-10 * std::max(qnorm, 1e-300) && qnorm > 0)
            throw NumericalError("corrector: constraint residual " +
                                 std::to_string(res2 / qnorm) + " at T=" +
                                 std::to_string(patch.center_element));

        double energy = qj.dot(sys.stiffness * qj);
        double bound = rhs_energy[j] * (lambda_max_ / lambda_min_) * (1.0 + 1e-8) + 1e-14;
        if (energy > bound)
            throw NumericalError("corrector: energy bound violated at T=" +
                                 std::to_string(patch.center_element));

        cs.q.push_back(std::move(qj));
        cs.multiplier.push_back(std::move(pj));
    }
    return cs;
}

CorrectorSet solve_corrector(const Patch& patch, const CoefficientField& coeff,
                             const QuasiInterpolator& interp) {
    CorrectorSolver solver(interp, coeff);
    return solver.solve(patch);
}

Vector apply_correction(const FeFunction& v_coarse,
                        const std::vector<CorrectorSet>& correctors,
                        const QuasiInterpolator& interp) {
    const Mesh& coarse = *interp.coarse;
    if (static_cast<int>(correctors.size()) != coarse.n_elements())
        throw std::invalid_argument("apply_correction: need a corrector per coarse element");
    Vector out = Vector::Zero(interp.fine_dofs.n_dofs);
    for (int T = 0; T < coarse.n_elements(); ++T) {
        const CorrectorSet& cs = correctors[T];
        if (cs.T != T)
            throw std::invalid_argument("apply_correction: corrector order mismatch");
        Vec3 grad = v_coarse.gradient(T);
        for (int j = 0; j < coarse.d; ++j) {
            if (grad[j] == 0.0) continue;
            for (size_t i = 0; i < cs.patch_dofs.size(); ++i)
                out[cs.patch_dofs[i]] += grad[j] * cs.q[j][static_cast<int>(i)];
        }
    }
    return out;
}

std::vector<double> decay_profile(const CorrectorSet& corrector, int j,
                                  const QuasiInterpolator& interp) {
    const Mesh& coarse = *interp.coarse;
    const Mesh& fine = *interp.fine;
    if (corrector.ell < 2)
        throw std::invalid_argument("decay_profile: ell >= 2 required");

    Vector full = Vector::Zero(interp.fine_dofs.n_dofs);
    for (size_t i = 0; i < corrector.patch_dofs.size(); ++i)
        full[corrector.patch_dofs[i]] = corrector.q[j][static_cast<int>(i)];

    std::vector<std::vector<int>> children(coarse.n_elements());
    for (int e = 0; e < fine.n_elements(); ++e)
        children[fine.parent_map[e]].push_back(e);

    std::vector<double> energies;
    std::vector<int> prev{corrector.T};
    for (int r = 1; r <= corrector.ell; ++r) {
        std::vector<int> cur = one_ring(coarse, prev);
        std::vector<int> annulus;
        std::set_difference(cur.begin(), cur.end(), prev.begin(), prev.end(),
                            std::back_inserter(annulus));
        std::vector<int> fine_els;
        for (int K : annulus)
            fine_els.insert(fine_els.end(), children[K].begin(), children[K].end());
        energies.push_back(h1_seminorm_on(fine, interp.fine_dofs, full, fine_els));
        prev = std::move(cur);
    }
    return energies;
}

double fit_decay_rate(const std::vector<double>& ring_energies) {
    std::vector<double> xs, ys;
    for (size_t r = 0; r < ring_energies.size(); ++r)
        if (ring_energies[r] > 0.0) {
            xs.push_back(static_cast<double>(r + 1));
            ys.push_back(std::log(ring_energies[r]));
        }
    if (xs.size() < 2)
        throw std::invalid_argument("fit_decay_rate: need >= 2 positive rings");
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    return std::exp(sxy / sxx);
}

} // namespace stoclod
