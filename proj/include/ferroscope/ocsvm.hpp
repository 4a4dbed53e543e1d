// nu-one-class support vector machine over discriminator features.
// RBF kernel, dual solved by maximal-violating-pair two-variable updates,
// decision function v, (min v, max v) calibration, and the normalized
// anomaly scores derived from it.

#pragma once

#include <list>
#include <span>

#include "ferroscope/core.hpp"

namespace ferroscope::ocsvm {

using Feature = std::vector<float>;

// exp(-gamma * ||x - y||^2)
inline double rbf_kernel(std::span<const float> x, std::span<const float> y, double gamma) {
    if (x.size() != y.size())
        throw InvalidArgument("rbf_kernel: length mismatch " + std::to_string(x.size()) + " vs " +
                              std::to_string(y.size()));
    if (gamma < 0.0) throw InvalidArgument("rbf_kernel: gamma must be >= 0");
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = double(x[i]) - double(y[i]);
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

struct AnomalyScore {
    double raw_v = 0.0;      // decision value; positive = normal-like
    double eq1_score = 0.0;  // in [-1, 0]; 0 = most anomalous
    double norm_score = 0.0; // in [0, 1]; 1 = most anomalous
};

// Normalization of a decision value over calibration extremes. The raw value
// is clamped into [min_v, max_v] first. The eq1 form is the primary
// computation, -(v - min_v)/(max_v - min_v) in [-1, 0]; the norm form is
// exactly eq1 + 1, so the two rank identically and the shift identity holds
// bitwise.
inline double eq1_score_from(double v, double min_v, double max_v) {
    if (!(max_v > min_v)) throw DegenerateCalibrationError("calibration extremes are not distinct");
    const double clamped = std::clamp(v, min_v, max_v);
    return -((clamped - min_v) / (max_v - min_v));
}

inline double norm_score_from(double v, double min_v, double max_v) {
    return eq1_score_from(v, min_v, max_v) + 1.0;
}

struct FitOptions {
    double tol = 1e-3;             // max KKT violation at convergence
    std::size_t max_iter = 100000;
    bool standardize = true;       // per-dimension z-scoring from the training pool
    std::size_t cache_rows_max = 1u << 22;  // kernel cache budget in doubles
};

struct OcsvmModel {
    int dim = 0;
    double nu = 0.0;
    double gamma = 0.0;
    double rho = 0.0;
    std::vector<Feature> support_vectors;  // stored in standardized space
    std::vector<double> alphas;
    std::vector<double> feat_mean;         // standardization vectors
    std::vector<double> feat_std;
    bool converged = true;
    double kkt_violation = 0.0;            // worst per-point residual on the training set
    bool calibrated = false;
    double calib_min_v = 0.0;
    double calib_max_v = 0.0;

    Feature standardize(std::span<const float> f) const {
        if (int(f.size()) != dim)
            throw InvalidArgument("feature dimension " + std::to_string(f.size()) + " does not match model (" +
                                  std::to_string(dim) + ")");
        Feature out(f.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            out[i] = float((double(f[i]) - feat_mean[i]) / feat_std[i]);
        return out;
    }
};

namespace detail {

// LRU cache of kernel matrix rows.
class KernelCache {
  public:
    KernelCache(const std::vector<Feature>& x, double gamma, std::size_t budget_doubles)
        : x_(x), gamma_(gamma), rows_(x.size()),
          max_rows_(std::max<std::size_t>(2, budget_doubles / std::max<std::size_t>(1, x.size()))) {}

    const std::vector<double>& row(std::size_t i) {
        if (!rows_[i].empty()) {
            lru_.splice(lru_.begin(), lru_, pos_[i]);
            return rows_[i];
        }
        if (lru_.size() >= max_rows_) {
            const std::size_t victim = lru_.back();
            lru_.pop_back();
            pos_.erase(victim);
            rows_[victim].clear();
            rows_[victim].shrink_to_fit();
        }
        auto& r = rows_[i];
        r.resize(x_.size());
        const auto& xi = x_[i];
        for (std::size_t j = 0; j < x_.size(); ++j)
            r[j] = rbf_kernel(xi, x_[j], gamma_);
        lru_.push_front(i);
        pos_[i] = lru_.begin();
        return r;
    }

  private:
    const std::vector<Feature>& x_;
    double gamma_;
    std::vector<std::vector<double>> rows_;
    std::list<std::size_t> lru_;
    std::map<std::size_t, std::list<std::size_t>::iterator> pos_;
    std::size_t max_rows_;
};

}  // namespace detail

// Solves the nu-one-class dual
//   min 1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu*N),  sum a = 1
// by repeated updates of the maximal-violating pair until the pair gap falls
// below tol or the iteration cap is reached.
inline OcsvmModel fit(const std::vector<Feature>& features, double nu, double gamma = 0.0,
                      const FitOptions& opt = {}) {
    if (features.empty()) throw InvalidArgument("fit: need at least one feature vector");
    if (!(nu > 0.0) || nu > 1.0) throw InvalidArgument("fit: nu must be in (0, 1]");
    const std::size_t n = features.size();
    const int dim = int(features[0].size());
    for (const auto& f : features)
        if (int(f.size()) != dim) throw InvalidArgument("fit: features differ in length");

    OcsvmModel model;
    model.dim = dim;
    model.nu = nu;
    model.feat_mean.assign(std::size_t(dim), 0.0);
    model.feat_std.assign(std::size_t(dim), 1.0);

    if (opt.standardize) {
        for (const auto& f : features)
            for (int d = 0; d < dim; ++d) model.feat_mean[std::size_t(d)] += double(f[std::size_t(d)]);
        for (auto& m : model.feat_mean) m /= double(n);
        std::vector<double> var(std::size_t(dim), 0.0);
        for (const auto& f : features)
            for (int d = 0; d < dim; ++d) {
                const double dv = double(f[std::size_t(d)]) - model.feat_mean[std::size_t(d)];
                var[std::size_t(d)] += dv * dv;
            }
        for (int d = 0; d < dim; ++d) {
            var[std::size_t(d)] /= double(n);
            model.feat_std[std::size_t(d)] = var[std::size_t(d)] > 1e-24 ? std::sqrt(var[std::size_t(d)]) : 1.0;
        }
    }

    std::vector<Feature> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = model.standardize(features[i]);

    if (gamma <= 0.0) {
        // default width: 1/(D * mean feature variance) of the solver-space pool
        double mean_var = 0.0;
        std::vector<double> mean(std::size_t(dim), 0.0);
        for (const auto& f : x)
            for (int d = 0; d < dim; ++d) mean[std::size_t(d)] += double(f[std::size_t(d)]);
        for (auto& m : mean) m /= double(n);
        for (const auto& f : x)
            for (int d = 0; d < dim; ++d) {
                const double dv = double(f[std::size_t(d)]) - mean[std::size_t(d)];
                mean_var += dv * dv;
            }
        mean_var /= double(n) * double(dim);
        gamma = mean_var > 1e-12 ? 1.0 / (double(dim) * mean_var) : 1.0 / double(dim);
    }
    model.gamma = gamma;

    const double C = 1.0 / (nu * double(n));
    std::vector<double> alpha(n, 0.0);
    {
        // feasible start: the first floor(nu*n) points at the upper bound,
        // remainder on the next point
        const double nn = nu * double(n);
        const std::size_t full = std::size_t(nn);
        for (std::size_t i = 0; i < full && i < n; ++i) alpha[i] = C;
        if (full < n) alpha[full] = (nn - double(full)) * C;
    }

    detail::KernelCache cache(x, gamma, opt.cache_rows_max);
    std::vector<double> g(n, 0.0);  // g = K alpha
    for (std::size_t j = 0; j < n; ++j) {
        if (alpha[j] <= 0.0) continue;
        const auto& kj = cache.row(j);
        for (std::size_t i = 0; i < n; ++i) g[i] += alpha[j] * kj[i];
    }

    const double bound_eps = 1e-12 + 1e-9 * C;
    model.converged = false;
    for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
        // i: smallest gradient among coordinates that can grow;
        // j: largest gradient among coordinates that can shrink
        std::size_t bi = n, bj = n;
        double gi = std::numeric_limits<double>::infinity();
        double gj = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            if (alpha[k] < C - bound_eps && g[k] < gi) {
                gi = g[k];
                bi = k;
            }
            if (alpha[k] > bound_eps && g[k] > gj) {
                gj = g[k];
                bj = k;
            }
        }
        if (bi == n || bj == n || gj - gi < opt.tol) {
            model.converged = true;
            break;
        }
        const auto& ki = cache.row(bi);
        const auto& kj = cache.row(bj);
        double eta = ki[bi] + kj[bj] - 2.0 * ki[bj];
        if (eta < 1e-12) eta = 1e-12;
        double t = (gj - gi) / eta;
        t = std::min(t, C - alpha[bi]);
        t = std::min(t, alpha[bj]);
        alpha[bi] += t;
        alpha[bj] -= t;
        for (std::size_t k = 0; k < n; ++k) g[k] += t * (ki[k] - kj[k]);
    }

    // rho: mean gradient over free support vectors, else midpoint of the
    // feasible interval
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        if (alpha[k] > bound_eps && alpha[k] < C - bound_eps) {
            free_sum += g[k];
            ++free_count;
        } else if (alpha[k] >= C - bound_eps) {
            lo = std::max(lo, g[k]);
        } else {
            hi = std::min(hi, g[k]);
        }
    }
    if (free_count > 0)
        model.rho = free_sum / double(free_count);
    else if (std::isfinite(lo) && std::isfinite(hi))
        model.rho = 0.5 * (lo + hi);
    else
        model.rho = std::isfinite(lo) ? lo : hi;

    // worst per-point KKT residual w.r.t. the fitted rho
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double r = 0.0;
        if (alpha[k] <= bound_eps)
            r = std::max(0.0, model.rho - g[k]);
        else if (alpha[k] >= C - bound_eps)
            r = std::max(0.0, g[k] - model.rho);
        else
            r = std::abs(g[k] - model.rho);
        worst = std::max(worst, r);
    }
    model.kkt_violation = worst;

    for (std::size_t k = 0; k < n; ++k) {
        if (alpha[k] > 1e-8) {
            model.support_vectors.push_back(x[k]);
            model.alphas.push_back(alpha[k]);
        }
    }
    return model;
}

// Decision value v = sum_i a_i k(x_i, f) - rho. Positive = normal-like,
// negative = anomalous-like.
inline double decision(const OcsvmModel& model, std::span<const float> f) {
    const Feature z = model.standardize(f);
    double v = 0.0;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
        v += model.alphas[i] * rbf_kernel(model.support_vectors[i], z, model.gamma);
    return v - model.rho;
}

// Dual objective 1/2 a^T K a of the stored expansion.
inline double dual_objective(const OcsvmModel& model) {
    double obj = 0.0;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
        for (std::size_t j = 0; j < model.support_vectors.size(); ++j)
            obj += model.alphas[i] * model.alphas[j] *
                   rbf_kernel(model.support_vectors[i], model.support_vectors[j], model.gamma);
    return 0.5 * obj;
}

// Stores the decision extremes over `features`; scoring clamps into them.
inline void calibrate(OcsvmModel& model, const std::vector<Feature>& features) {
    if (features.empty()) throw InvalidArgument("calibrate: empty feature set");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& f : features) {
        const double v = decision(model, f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo))
        throw DegenerateCalibrationError("calibrate: all decision values identical (v = " +
                                         std::to_string(lo) + ")");
    model.calib_min_v = lo;
    model.calib_max_v = hi;
    model.calibrated = true;
}

inline AnomalyScore score(const OcsvmModel& model, std::span<const float> f) {
    if (!model.calibrated) throw StateError("model is not calibrated");
    AnomalyScore s;
    s.raw_v = decision(model, f);
    s.eq1_score = eq1_score_from(s.raw_v, model.calib_min_v, model.calib_max_v);
    s.norm_score = s.eq1_score + 1.0;
    return s;
}

inline double score_eq1(const OcsvmModel& model, std::span<const float> f) { return score(model, f).eq1_score; }
inline double score_norm(const OcsvmModel& model, std::span<const float> f) { return score(model, f).norm_score; }

// ---------------------------------------------------------------------------
// Feature file (FVEC1): magic, count, dimension, float32 rows.
// ---------------------------------------------------------------------------

inline std::string serialize_features(const std::vector<Feature>& rows) {
    if (rows.empty()) throw InvalidArgument("serialize_features: empty set");
    std::string out("FVEC1", 5);
    put_u32le(out, std::uint32_t(rows.size()));
    put_u32le(out, std::uint32_t(rows[0].size()));
    for (const auto& r : rows) {
        if (r.size() != rows[0].size()) throw InvalidArgument("serialize_features: ragged rows");
        put_f32_array(out, r.data(), r.size());
    }
    return out;
}

inline std::vector<Feature> parse_features(const std::string& bytes) {
    ByteReader r(bytes, "FVEC1 feature file");
    if (r.raw(5) != "FVEC1") throw FormatError("FVEC1 feature file: bad magic");
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (std::uint64_t(count) * dim * 4 != r.remaining())
        throw FormatError("FVEC1 feature file: payload size mismatch");
    std::vector<Feature> rows(count, Feature(dim));
    for (auto& row : rows) r.f32_array(row.data(), dim);
    return rows;
}

inline void write_features(const std::filesystem::path& path, const std::vector<Feature>& rows) {
    write_file_atomic(path, serialize_features(rows));
}

inline std::vector<Feature> read_features(const std::filesystem::path& path) {
    return parse_features(read_file(path));
}

// ---------------------------------------------------------------------------
// Model file (OCSV1): every field including standardization vectors and the
// calibration pair; bit-exact round-trip.
// ---------------------------------------------------------------------------

inline std::string serialize_model(const OcsvmModel& m) {
    std::string out("OCSV1", 5);
    put_u32le(out, std::uint32_t(m.dim));
    put_u32le(out, std::uint32_t(m.support_vectors.size()));
    put_f64le(out, m.nu);
    put_f64le(out, m.gamma);
    put_f64le(out, m.rho);
    put_f64le(out, m.kkt_violation);
    out.push_back(m.converged ? 1 : 0);
    out.push_back(m.calibrated ? 1 : 0);
    put_f64le(out, m.calib_min_v);
    put_f64le(out, m.calib_max_v);
    for (double v : m.feat_mean) put_f64le(out, v);
    for (double v : m.feat_std) put_f64le(out, v);
    for (double v : m.alphas) put_f64le(out, v);
    for (const auto& sv : m.support_vectors) put_f32_array(out, sv.data(), sv.size());
    return out;
}

inline OcsvmModel parse_model(const std::string& bytes) {
    ByteReader r(bytes, "OCSV1 model file");
    if (r.raw(5) != "OCSV1") throw FormatError("OCSV1 model file: bad magic");
    OcsvmModel m;
    m.dim = int(r.u32());
    const std::uint32_t nsv = r.u32();
    m.nu = r.f64();
    m.gamma = r.f64();
    m.rho = r.f64();
    m.kkt_violation = r.f64();
    m.converged = r.raw(1)[0] != 0;
    m.calibrated = r.raw(1)[0] != 0;
    m.calib_min_v = r.f64();
    m.calib_max_v = r.f64();
    m.feat_mean.resize(std::size_t(m.dim));
    for (auto& v : m.feat_mean) v = r.f64();
    m.feat_std.resize(std::size_t(m.dim));
    for (auto& v : m.feat_std) v = r.f64();
    m.alphas.resize(nsv);
    for (auto& v : m.alphas) v = r.f64();
    m.support_vectors.assign(nsv, Feature(std::size_t(m.dim)));
    for (auto& sv : m.support_vectors) r.f32_array(sv.data(), sv.size());
    if (!r.at_end()) throw FormatError("OCSV1 model file: trailing bytes");
    return m;
}

inline void write_model(const std::filesystem::path& path, const OcsvmModel& m) {
    write_file_atomic(path, serialize_model(m));
}

inline OcsvmModel read_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace ferroscope::ocsvm
