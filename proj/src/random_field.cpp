#include "stoclod/random_field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stoclod/rng.hpp"

namespace stoclod {

void FieldSpec::validate(const BoxDomain& domain) const {
    if (!(eps > 0.0)) throw std::invalid_argument("FieldSpec: eps > 0 required");
    if (!(lambda > 0.0) || !(lambda <= Lambda))
        throw std::invalid_argument("FieldSpec: 0 < lambda <= Lambda required");
    if (k < 1) throw std::invalid_argument("FieldSpec: k >= 1 required");
    if (eps > domain.min_extent() / 4.0)
        throw std::invalid_argument("FieldSpec: eps must be <= min extent / 4");
}

nlohmann::json FieldSpec::to_json() const {
    return nlohmann::json{{"eps", eps},   {"lambda", lambda}, {"Lambda", Lambda},
                          {"k", k},       {"isotropic", isotropic},
                          {"xi", xi}};
}

FieldSpec FieldSpec::from_json(const nlohmann::json& j) {
    FieldSpec s;
    s.eps = j.at("eps").get<double>();
    s.lambda = j.at("lambda").get<double>();
    s.Lambda = j.at("Lambda").get<double>();
    if (j.contains("k")) s.k = j.at("k").get<int>();
    if (j.contains("isotropic")) s.isotropic = j.at("isotropic").get<bool>();
    if (j.contains("xi")) s.xi = j.at("xi").get<std::string>();
    return s;
}

Vec3 CoefficientField::apply(int e, const Vec3& v) const {
    Vec3 out{0, 0, 0};
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out[r] += values[e][3 * r + c] * v[c];
    return out;
}

double CoefficientField::quad(int e, const Vec3& v, const Vec3& w) const {
    Vec3 aw = apply(e, w);
    double s = 0.0;
    for (int r = 0; r < d; ++r) s += v[r] * aw[r];
    return s;
}

CoefficientField constant_field(const Mesh& mesh, double value) {
    CoefficientField f;
    f.mesh = &mesh;
    f.d = mesh.d;
    f.values.assign(mesh.n_elements(), {});
    for (auto& m : f.values)
        for (int r = 0; r < mesh.d; ++r) m[3 * r + r] = value;
    return f;
}

namespace {

// C^2 bump, support |s| < 1.
inline double bump(double s2) {
    double t = 1.0 - s2;
    return t > 0.0 ? t * t * t : 0.0;
}

inline double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }

} // namespace

RandomFieldSampler::RandomFieldSampler(FieldSpec spec, const Mesh& fine_mesh)
    : spec_(std::move(spec)), mesh_(&fine_mesh) {
    spec_.validate(fine_mesh.domain);
    const int d = fine_mesh.d;
    for (int a = 0; a < d; ++a) {
        double h = fine_mesh.domain.extent(a) / fine_mesh.cells_per_axis[a];
        if (h > spec_.eps / 4.0 + 1e-12 * spec_.eps)
            throw std::invalid_argument(
                "RandomFieldSampler: fine mesh does not resolve eps (need h <= eps/4)");
        grid_h_[a] = h;
        grid_lo_[a] = fine_mesh.domain.lo[a] - spec_.eps;
        double span = fine_mesh.domain.extent(a) + 2.0 * spec_.eps;
        grid_n_[a] = static_cast<int64_t>(std::ceil(span / h)) + 1;
    }
}

double RandomFieldSampler::latent(uint64_t master_seed, uint64_t sample_index,
                                  int channel, const Vec3& x) const {
    const int d = mesh_->d;
    const double radius = spec_.eps / 2.0;
    const uint64_t stream = rng::stream_id(sample_index, rng::Purpose::Field,
                                           static_cast<uint32_t>(channel));

    std::array<int64_t, 3> i_lo{0, 0, 0}, i_hi{0, 0, 0};
    for (int a = 0; a < d; ++a) {
        i_lo[a] = static_cast<int64_t>(
            std::ceil((x[a] - radius - grid_lo_[a]) / grid_h_[a]));
        i_hi[a] = static_cast<int64_t>(
            std::floor((x[a] + radius - grid_lo_[a]) / grid_h_[a]));
        i_lo[a] = std::max<int64_t>(i_lo[a], 0);
        i_hi[a] = std::min<int64_t>(i_hi[a], grid_n_[a] - 1);
    }

    double acc = 0.0, wsq = 0.0;
    std::array<int64_t, 3> idx{0, 0, 0};
    for (idx[2] = i_lo[2]; idx[2] <= i_hi[2]; ++idx[2])
        for (idx[1] = i_lo[1]; idx[1] <= i_hi[1]; ++idx[1])
            for (idx[0] = i_lo[0]; idx[0] <= i_hi[0]; ++idx[0]) {
                double s2 = 0.0;
                for (int a = 0; a < d; ++a) {
                    double r = (x[a] - (grid_lo_[a] + idx[a] * grid_h_[a])) / radius;
                    s2 += r * r;
                }
                double w = bump(s2);
                if (w == 0.0) continue;
                uint64_t node = idx[0] + grid_n_[0] * (idx[1] + grid_n_[1] * idx[2]);
                acc += w * rng::normal(master_seed, stream, node);
                wsq += w * w;
            }
    if (wsq == 0.0)
        throw std::runtime_error("RandomFieldSampler: empty filter support");
    return acc / std::sqrt(wsq);
}

CoefficientField RandomFieldSampler::sample(uint64_t master_seed,
                                            uint64_t sample_index) const {
    const int d = mesh_->d;
    CoefficientField f;
    f.mesh = mesh_;
    f.d = d;
    f.seed = {master_seed, sample_index};
    f.values.assign(mesh_->n_elements(), {});

    const double span = spec_.Lambda - spec_.lambda;
    const int channels = spec_.isotropic ? 1 : std::min(spec_.k, d);
    for (int e = 0; e < mesh_->n_elements(); ++e) {
        Vec3 x = mesh_->barycenter(e);
        if (spec_.isotropic || channels == 1) {
            double a = spec_.lambda + span * logistic(latent(master_seed, sample_index, 0, x));
            for (int r = 0; r < d; ++r) f.values[e][3 * r + r] = a;
        } else {
            // Diagonal matrix: one squashed latent channel per axis.
            for (int r = 0; r < d; ++r) {
                int c = std::min(r, channels - 1);
                double a = spec_.lambda + span * logistic(latent(master_seed, sample_index, c, x));
                f.values[e][3 * r + r] = a;
            }
        }
    }
    return f;
}

CoefficientField sample_field(const FieldSpec& spec, const Mesh& fine_mesh,
                              const SeedRecord& seed) {
    RandomFieldSampler sampler(spec, fine_mesh);
    return sampler.sample(seed.master_seed, seed.sample_index);
}

std::vector<CovarianceEstimate>
empirical_covariance(const FieldSpec& spec, const Mesh& fine_mesh,
                     const std::vector<double>& lags, int n_samples,
                     uint64_t master_seed, int n_translations) {
    if (n_samples < 100)
        throw std::invalid_argument("empirical_covariance: N >= 100 required");
    RandomFieldSampler sampler(spec, fine_mesh);
    const auto& dom = fine_mesh.domain;
    const int d = fine_mesh.d;

    double max_lag = 0.0;
    for (double l : lags) max_lag = std::max(max_lag, l);

    // Base points shifted by whole lattice steps, so that translated pairs
    // see identically distributed filter geometry (exact stationarity on
    // the lattice). All points stay away from the boundary pad.
    double h0 = dom.extent(0) / fine_mesh.cells_per_axis[0];
    int shift_cells = std::max<int>(1, static_cast<int>(std::round(spec.eps / h0)));
    std::vector<Vec3> bases;
    for (int t = 0; t < n_translations; ++t) {
        Vec3 p{0, 0, 0};
        p[0] = dom.lo[0] + 0.1 * dom.extent(0) + t * shift_cells * h0;
        for (int a = 1; a < d; ++a) p[a] = dom.lo[a] + 0.5 * dom.extent(a);
        if (p[0] + max_lag > dom.hi[0] - 0.05 * dom.extent(0))
            throw std::invalid_argument(
                "empirical_covariance: translations/lags exceed the domain");
        bases.push_back(p);
    }

    std::vector<CovarianceEstimate> out;
    for (double lag : lags) {
        CovarianceEstimate est;
        est.lag = lag;
        const int nt = static_cast<int>(bases.size());
        std::vector<std::vector<double>> prod(nt);
        std::vector<double> m1(nt, 0.0), m2(nt, 0.0);
        for (int t = 0; t < nt; ++t) prod[t].reserve(n_samples);
        for (int n = 0; n < n_samples; ++n) {
            for (int t = 0; t < nt; ++t) {
                Vec3 p = bases[t];
                Vec3 q = p;
                q[0] += lag;
                double y1 = sampler.latent(master_seed, n, 0, p);
                double y2 = sampler.latent(master_seed, n, 0, q);
                prod[t].push_back(y1 * y2);
                m1[t] += y1;
                m2[t] += y2;
            }
        }
        double cov_sum = 0.0, var_sum = 0.0;
        for (int t = 0; t < nt; ++t) {
            double mu1 = m1[t] / n_samples, mu2 = m2[t] / n_samples;
            double mean_prod = 0.0;
            for (double v : prod[t]) mean_prod += v;
            mean_prod /= n_samples;
            double cov = mean_prod - mu1 * mu2;
            double var = 0.0;
            for (double v : prod[t]) var += (v - mean_prod) * (v - mean_prod);
            var /= (n_samples - 1);
            double se = std::sqrt(var / n_samples);
            est.per_translation.push_back(cov);
            est.per_translation_se.push_back(se);
            cov_sum += cov;
            var_sum += var / n_samples;
        }
        est.covariance = cov_sum / nt;
        // Translations overlap in general; treat them as fully correlated
        // for a conservative standard error.
        est.standard_error = std::sqrt(var_sum) / nt * std::sqrt(static_cast<double>(nt));
        out.push_back(std::move(est));
    }
    return out;
}

void dump_field(const CoefficientField& field, const FieldSpec& spec,
                const std::string& path_prefix) {
    const int d = field.d;
    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("dump_field: cannot open " + path_prefix + ".bin");
    for (const auto& m : field.values)
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                double v = m[3 * r + c];
                uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                unsigned char le[8];
                for (int b = 0; b < 8; ++b)
                    le[b] = static_cast<unsigned char>(bits >> (8 * b));
                bin.write(reinterpret_cast<const char*>(le), 8);
            }
    bin.close();

    nlohmann::json side;
    side["schema_version"] = 1;
    side["spec"] = spec.to_json();
    side["seed"] = {{"master_seed", field.seed.master_seed},
                    {"sample_index", field.seed.sample_index}};
    side["mesh_hash"] = field.mesh->structural_hash();
    side["n_elements"] = field.mesh->n_elements();
    side["d"] = d;
    std::ofstream js(path_prefix + ".json");
    js << side.dump(2) << "\n";
}

} // namespace stoclod
