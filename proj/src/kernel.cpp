#include "stoclod/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stoclod {

double KernelBlock::frobenius(int d) const {
    double s = 0.0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) s += at(r, c) * at(r, c);
    return std::sqrt(s);
}

const KernelBlock* SparseKernel::find(int T, int K) const {
    const auto& row = rows[T];
    auto it = std::lower_bound(row.begin(), row.end(), K,
                               [](const auto& p, int k) { return p.first < k; });
    if (it == row.end() || it->first != K) return nullptr;
    return &it->second;
}

KernelBlock SparseKernel::block(int T, int K) const {
    const KernelBlock* b = find(T, K);
    return b ? *b : KernelBlock{};
}

int SparseKernel::stored_entries() const {
    int n = 0;
    for (const auto& row : rows) n += static_cast<int>(row.size());
    return n;
}

KernelAssembler::KernelAssembler(const QuasiInterpolator& interp,
                                 const CoefficientField& coeff, int ell)
    : interp_(&interp), coeff_(&coeff) {
    const Mesh& coarse = *interp.coarse;
    kernel_.coarse = &coarse;
    kernel_.d = coarse.d;
    kernel_.ell = ell;
    kernel_.mesh_hash = coarse.structural_hash();
    kernel_.seed = coeff.seed;
    kernel_.rows.assign(coarse.n_elements(), {});
    children_.assign(coarse.n_elements(), {});
    for (int e = 0; e < interp.fine->n_elements(); ++e)
        children_[interp.fine->parent_map[e]].push_back(e);
    coarse_volume_.resize(coarse.n_elements());
    for (int T = 0; T < coarse.n_elements(); ++T)
        coarse_volume_[T] = coarse.element_volume(T);
}

void KernelAssembler::add_row(const CorrectorSet& cs) {
    const Mesh& fine = *interp_->fine;
    const int d = kernel_.d;
    const int T = cs.T;
    const double volT = coarse_volume_[T];

    std::vector<int> local(interp_->fine_dofs.n_dofs, -1);
    for (size_t i = 0; i < cs.patch_dofs.size(); ++i)
        local[cs.patch_dofs[i]] = static_cast<int>(i);

    // int_T A (for the Kronecker term)
    KernelBlock intT;
    for (int tau : children_[T]) {
        double vol = fine.element_volume(tau);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
                intT.at(r, c) += vol * coeff_->entry(tau, r, c);
    }

    auto& row = kernel_.rows[T];
    row.reserve(cs.patch->element_set.size());
    double vol;
    std::array<Vec3, 4> g;
    for (int K : cs.patch->element_set) {
        // flux[k] = int_K A grad q_{T,k}
        std::array<Vec3, 3> flux{Vec3{0, 0, 0}, Vec3{0, 0, 0}, Vec3{0, 0, 0}};
        for (int tau : children_[K]) {
            fine.element_gradients(tau, vol, g);
            for (int k = 0; k < d; ++k) {
                Vec3 grad{0, 0, 0};
                for (int s = 0; s <= d; ++s) {
                    int dof = interp_->fine_dofs.vertex_to_dof[fine.elements[tau][s]];
                    if (dof < 0 || local[dof] < 0) continue;
                    double c = cs.q[k][local[dof]];
                    for (int r = 0; r < d; ++r) grad[r] += c * g[s][r];
                }
                Vec3 ag = coeff_->apply(tau, grad);
                for (int r = 0; r < d; ++r) flux[k][r] += vol * ag[r];
            }
        }
        KernelBlock blk;
        const double volK = coarse_volume_[K];
        const double scale = 1.0 / (volT * volK);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                blk.at(j, k) = scale * ((K == T ? intT.at(j, k) : 0.0) - flux[k][j]);
        row.emplace_back(K, blk);
    }
    // element_set is sorted, so the row is sorted by K already.
}

SparseKernel KernelAssembler::take() { return std::move(kernel_); }

SparseKernel assemble_kernel(const std::vector<CorrectorSet>& correctors,
                             const CoefficientField& coeff,
                             const QuasiInterpolator& interp) {
    if (static_cast<int>(correctors.size()) != interp.coarse->n_elements())
        throw std::invalid_argument("assemble_kernel: need a corrector per coarse element");
    int ell = correctors.empty() ? 0 : correctors.front().ell;
    for (const auto& cs : correctors) {
        if (cs.seed.master_seed != coeff.seed.master_seed ||
            cs.seed.sample_index != coeff.seed.sample_index)
            throw std::invalid_argument("assemble_kernel: corrector/coefficient sample mismatch");
    }
    KernelAssembler asmb(interp, coeff, ell);
    for (const auto& cs : correctors) asmb.add_row(cs);
    return asmb.take();
}

namespace {

std::vector<Vec3> coarse_gradients(const SparseKernel& kernel, const FeFunction& f) {
    const Mesh& coarse = *kernel.coarse;
    std::vector<Vec3> g(coarse.n_elements());
    for (int e = 0; e < coarse.n_elements(); ++e) g[e] = f.gradient(e);
    return g;
}

} // namespace

double bilinear_form(const SparseKernel& kernel, const FeFunction& v,
                     const FeFunction& z) {
    if (v.mesh != kernel.coarse || z.mesh != kernel.coarse)
        throw std::invalid_argument("bilinear_form: functions not on the kernel's mesh");
    const Mesh& coarse = *kernel.coarse;
    const int d = kernel.d;
    std::vector<Vec3> gv = coarse_gradients(kernel, v);
    std::vector<Vec3> gz = coarse_gradients(kernel, z);
    std::vector<double> vols(coarse.n_elements());
    for (int e = 0; e < coarse.n_elements(); ++e) vols[e] = coarse.element_volume(e);

    double acc = 0.0;
    for (int T = 0; T < coarse.n_elements(); ++T)
        for (const auto& [K, blk] : kernel.rows[T]) {
            double s = 0.0;
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) s += gv[K][j] * blk.at(j, k) * gz[T][k];
            acc += vols[T] * vols[K] * s;
        }
    return acc;
}

SpMat coarse_matrix(const SparseKernel& kernel, const DofMap& coarse_dofs) {
    const Mesh& coarse = *kernel.coarse;
    const int d = kernel.d;
    std::vector<double> vols(coarse.n_elements());
    for (int e = 0; e < coarse.n_elements(); ++e) vols[e] = coarse.element_volume(e);

    // Hat gradients per element.
    std::vector<std::array<Vec3, 4>> grads(coarse.n_elements());
    for (int e = 0; e < coarse.n_elements(); ++e) {
        double vol;
        coarse.element_gradients(e, vol, grads[e]);
    }

    std::vector<Eigen::Triplet<double>> trips;
    for (int T = 0; T < coarse.n_elements(); ++T) {
        for (const auto& [K, blk] : kernel.rows[T]) {
            double w = vols[T] * vols[K];
            for (int sa = 0; sa <= d; ++sa) {
                int a = coarse_dofs.vertex_to_dof[coarse.elements[T][sa]];
                if (a < 0) continue; // test function phi_a, corrected side on T
                for (int sb = 0; sb <= d; ++sb) {
                    int b = coarse_dofs.vertex_to_dof[coarse.elements[K][sb]];
                    if (b < 0) continue; // trial function phi_b on K
                    double s = 0.0;
                    for (int j = 0; j < d; ++j)
                        for (int k = 0; k < d; ++k)
                            s += grads[K][sb][j] * blk.at(j, k) * grads[T][sa][k];
                    trips.emplace_back(a, b, w * s);
                }
            }
        }
    }
    SpMat M(coarse_dofs.n_dofs, coarse_dofs.n_dofs);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

void write_kernel_json(const SparseKernel& kernel, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["mesh_hash"] = kernel.mesh_hash;
    j["ell"] = kernel.ell;
    j["d"] = kernel.d;
    if (kernel.averaged) {
        j["sample"] = {{"averaged", true}};
    } else {
        j["sample"] = {{"master_seed", kernel.seed.master_seed},
                       {"sample_index", kernel.seed.sample_index}};
    }
    auto& entries = j["entries"] = nlohmann::json::array();
    for (int T = 0; T < static_cast<int>(kernel.rows.size()); ++T)
        for (const auto& [K, blk] : kernel.rows[T]) {
            nlohmann::json e;
            e["T"] = T;
            e["K"] = K;
            auto& b = e["block"] = nlohmann::json::array();
            for (int r = 0; r < kernel.d; ++r)
                for (int c = 0; c < kernel.d; ++c) b.push_back(blk.at(r, c));
            entries.push_back(std::move(e));
        }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_kernel_json: cannot open " + path);
    os << j.dump(2) << "\n";
}

SparseKernel read_kernel_json(const std::string& path, const Mesh& coarse) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_kernel_json: cannot open " + path);
    nlohmann::json j;
    is >> j;
    if (j.at("schema_version").get<int>() != 1)
        throw std::runtime_error("read_kernel_json: unsupported schema version");
    SparseKernel k;
    k.coarse = &coarse;
    k.d = j.at("d").get<int>();
    k.ell = j.at("ell").get<int>();
    k.mesh_hash = j.at("mesh_hash").get<uint64_t>();
    if (k.mesh_hash != coarse.structural_hash())
        throw std::runtime_error("read_kernel_json: mesh hash mismatch");
    const auto& sample = j.at("sample");
    if (sample.contains("averaged") && sample.at("averaged").get<bool>()) {
        k.averaged = true;
    } else {
        k.seed.master_seed = sample.at("master_seed").get<uint64_t>();
        k.seed.sample_index = sample.at("sample_index").get<uint64_t>();
    }
    k.rows.assign(coarse.n_elements(), {});
    for (const auto& e : j.at("entries")) {
        int T = e.at("T").get<int>();
        int K = e.at("K").get<int>();
        KernelBlock blk;
        const auto& b = e.at("block");
        int i = 0;
        for (int r = 0; r < k.d; ++r)
            for (int c = 0; c < k.d; ++c) blk.at(r, c) = b.at(i++).get<double>();
        k.rows.at(T).emplace_back(K, blk);
    }
    for (auto& row : k.rows)
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b2) { return a.first < b2.first; });
    return k;
}

} // namespace stoclod
