#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stoclod/mesh.hpp"

namespace stoclod {

/// Specification of the random coefficient ensemble: correlation length,
/// ellipticity bounds and the squash map applied to the latent Gaussian.
struct FieldSpec {
    double eps = 0.125;     // correlation length
    double lambda = 1.0;    // lower ellipticity bound
    double Lambda = 1.0;    // upper ellipticity bound
    int k = 1;              // latent Gaussian channels
    bool isotropic = true;  // scalar coefficient a(x)*I
    std::string xi = "logistic";

    void validate(const BoxDomain& domain) const;
    nlohmann::json to_json() const;
    static FieldSpec from_json(const nlohmann::json& j);
};

struct SeedRecord {
    uint64_t master_seed = 0;
    uint64_t sample_index = 0;
};

/// One realization of the coefficient: a symmetric d x d matrix per element,
/// eigenvalues in [lambda, Lambda].
struct CoefficientField {
    const Mesh* mesh = nullptr;
    int d = 1;
    SeedRecord seed;
    std::vector<std::array<double, 9>> values; // row-major d x d per element

    double entry(int e, int r, int c) const { return values[e][3 * r + c]; }
    /// A(e) * v for the element matrix.
    Vec3 apply(int e, const Vec3& v) const;
    /// v . A(e) w
    double quad(int e, const Vec3& v, const Vec3& w) const;
};

/// Constant-coefficient field (tests, degenerate specs).
CoefficientField constant_field(const Mesh& mesh, double value);

/// Filtered-white-noise sampler with exact finite range of dependence:
/// iid standard Gaussians on an auxiliary lattice covering the padded
/// domain are convolved with a compactly supported bump of radius eps/2
/// and normalized to unit pointwise variance. Two points farther apart
/// than eps depend on disjoint lattice sets, hence are independent.
class RandomFieldSampler {
  public:
    RandomFieldSampler(FieldSpec spec, const Mesh& fine_mesh);

    const FieldSpec& spec() const { return spec_; }

    /// Latent channel value at point x for the given sample.
    double latent(uint64_t master_seed, uint64_t sample_index, int channel,
                  const Vec3& x) const;

    CoefficientField sample(uint64_t master_seed, uint64_t sample_index) const;

  private:
    FieldSpec spec_;
    const Mesh* mesh_;
    std::array<double, 3> grid_h_{0, 0, 0};
    std::array<double, 3> grid_lo_{0, 0, 0};
    std::array<int64_t, 3> grid_n_{1, 1, 1};
};

CoefficientField sample_field(const FieldSpec& spec, const Mesh& fine_mesh,
                              const SeedRecord& seed);

/// Monte-Carlo covariance estimates of the latent field at given lags.
struct CovarianceEstimate {
    double lag = 0.0;
    double covariance = 0.0;     // averaged over translations
    double standard_error = 0.0; // of the averaged estimate
    std::vector<double> per_translation;
    std::vector<double> per_translation_se;
};

std::vector<CovarianceEstimate>
empirical_covariance(const FieldSpec& spec, const Mesh& fine_mesh,
                     const std::vector<double>& lags, int n_samples,
                     uint64_t master_seed, int n_translations = 5);

/// Binary dump (little-endian float64 per-element values, row-major blocks)
/// plus a JSON sidecar with spec, seed, mesh hash and schema version.
void dump_field(const CoefficientField& field, const FieldSpec& spec,
                const std::string& path_prefix);

} // namespace stoclod
