#pragma once

// Scoring math over plain Eigen matrices (double precision). Nothing here
// touches torch; the adapted IS/FID wrappers live in adapted_metrics.hpp.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fitcap/errors.hpp"

namespace fitcap {

struct GaussianMoments {
    Eigen::VectorXd mu;
    Eigen::MatrixXd C;

    Eigen::Index dim() const { return mu.size(); }
};

inline constexpr double kCovJitter = 1e-6;

// Rows are observations. Unbiased (n-1) covariance plus jitter * I.
inline GaussianMoments moments_from_samples(const Eigen::MatrixXd& x, double jitter = kCovJitter) {
    if (x.rows() < 2) throw ArgumentError("moments need at least two samples");
    GaussianMoments m;
    m.mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - m.mu.transpose();
    m.C = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    m.C = 0.5 * (m.C + m.C.transpose());
    m.C.diagonal().array() += jitter;
    return m;
}

// --- accuracy-derived scores --------------------------------------------------

inline double fitting_capacity(double test_accuracy, double tau) {
    if (tau != 1.0) throw ArgumentError("fitting capacity is only defined for tau = 1 runs");
    if (!(test_accuracy >= 0.0 && test_accuracy <= 1.0)) throw ArgumentError("accuracy must lie in [0,1]");
    return test_accuracy;
}

inline std::vector<double> per_class_relative(const std::vector<double>& model, const std::vector<double>& baseline) {
    if (model.size() != baseline.size()) throw ArgumentError("per-class vectors differ in length");
    std::vector<double> out(model.size());
    for (std::size_t k = 0; k < model.size(); ++k) out[k] = model[k] - baseline[k];
    return out;
}

inline double diff_is(double is_gen, double is_test) { return is_gen - is_test; }

// --- inception score ----------------------------------------------------------

inline void validate_prob_matrix(const Eigen::MatrixXd& p, double tol = 1e-6) {
    if (p.rows() < 1 || p.cols() < 1) throw ArgumentError("probability matrix is empty");
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const auto row = p.row(i);
        if (!row.allFinite() || row.minCoeff() < -tol || row.maxCoeff() > 1.0 + tol) {
            throw ArgumentError("row " + std::to_string(i) + " has entries outside [0,1]");
        }
        if (std::abs(row.sum() - 1.0) > tol) {
            throw ArgumentError("row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

// The three per-sample averages behind IS: KL(p(y|x) || p(y)), the cross
// entropy H(p(y|x), p(y)) and the entropy H(p(y|x)).
struct IsDecomposition {
    double mean_kl = 0.0;
    double mean_cross_entropy = 0.0;
    double mean_entropy = 0.0;
};

inline IsDecomposition is_decomposition(const Eigen::MatrixXd& p) {
    validate_prob_matrix(p);
    const Eigen::RowVectorXd py = p.colwise().mean();
    IsDecomposition d;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index k = 0; k < p.cols(); ++k) {
            const double q = p(i, k);
            if (q <= 0.0) continue;
            d.mean_kl += q * std::log(q / py(k));
            d.mean_cross_entropy -= q * std::log(py(k));
            d.mean_entropy -= q * std::log(q);
        }
    }
    const auto n = static_cast<double>(p.rows());
    d.mean_kl /= n;
    d.mean_cross_entropy /= n;
    d.mean_entropy /= n;
    return d;
}

inline double inception_score(const Eigen::MatrixXd& p) {
    const double kl = is_decomposition(p).mean_kl;
    // The mean KL is mathematically >= 0; guard the last ulp.
    return std::exp(std::max(kl, 0.0));
}

// --- Frechet distance ---------------------------------------------------------

inline void check_symmetric(const Eigen::MatrixXd& a, double tol = 1e-8) {
    if (a.rows() != a.cols()) throw ArgumentError("matrix is not square");
    const double scale = 1.0 + (a.size() ? a.cwiseAbs().maxCoeff() : 0.0);
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale) throw ArgumentError("matrix is not symmetric");
}

inline Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a) {
    check_symmetric(a);
    if (a.size() == 0) return a;
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw ArgumentError("eigendecomposition failed");
    const double scale = 1.0 + sym.cwiseAbs().maxCoeff();
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-8 * scale) throw ArgumentError("matrix is not positive semi-definite");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd& v = es.eigenvectors();
    Eigen::MatrixXd s = v * ev.asDiagonal() * v.transpose();
    return 0.5 * (s + s.transpose());
}

inline double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
    if (a.dim() != b.dim() || a.C.rows() != a.dim() || b.C.rows() != b.dim()) {
        throw ArgumentError("moment dimensions differ");
    }
    const Eigen::MatrixXd sa = matrix_sqrt_psd(a.C);
    Eigen::MatrixXd inner = sa * b.C * sa;
    inner = 0.5 * (inner + inner.transpose());
    const double cross = matrix_sqrt_psd(inner).trace();
    const double d = (a.mu - b.mu).squaredNorm() + a.C.trace() + b.C.trace() - 2.0 * cross;
    if (d < 0.0 && d >= -1e-8 * (1.0 + a.C.trace() + b.C.trace())) return 0.0;
    return d;
}

// --- normalisation ------------------------------------------------------------

enum class MetricKind { accuracy, inception_score, frechet_distance };

// FID is negated first so that higher is better for every kind; then z-scored
// with the population standard deviation.
inline std::map<std::string, double> normalize_scores(const std::map<std::string, double>& values, MetricKind kind) {
    if (values.size() < 2) throw ArgumentError("normalisation needs at least two models");
    const double sign = kind == MetricKind::frechet_distance ? -1.0 : 1.0;
    double mean = 0.0;
    for (const auto& [_, v] : values) {
        if (!std::isfinite(v)) throw ArgumentError("non-finite score");
        mean += sign * v;
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (const auto& [_, v] : values) var += (sign * v - mean) * (sign * v - mean);
    var /= static_cast<double>(values.size());
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw DegenerateInputError("all scores are equal");
    std::map<std::string, double> out;
    for (const auto& [name, v] : values) out[name] = (sign * v - mean) / sd;
    return out;
}

// --- boxplot statistics -------------------------------------------------------

struct ScoreSummary {
    std::vector<double> per_seed_values;
    double mean = 0.0;
    std::optional<double> std;  // sample std; undefined for one value
    double best = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
    double whisker_low = 0.0;   // most extreme values inside the fences
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

// Inclusive linear interpolation on sorted data: position (n-1)*q.
inline double quantile_inclusive(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ScoreSummary boxplot_stats(const std::vector<double>& values) {
    if (values.empty()) throw ArgumentError("boxplot of an empty sample");
    ScoreSummary s;
    s.per_seed_values = values;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    s.best = sorted.back();
    s.q1 = quantile_inclusive(sorted, 0.25);
    s.median = quantile_inclusive(sorted, 0.5);
    s.q3 = quantile_inclusive(sorted, 0.75);
    const double iqr = s.q3 - s.q1;
    s.lower_fence = s.q1 - 1.5 * iqr;
    s.upper_fence = s.q3 + 1.5 * iqr;
    s.whisker_low = s.q1;
    s.whisker_high = s.q3;
    bool any_inside = false;
    for (double v : sorted) {
        if (v < s.lower_fence || v > s.upper_fence) {
            s.outliers.push_back(v);
        } else if (!any_inside) {
            s.whisker_low = s.whisker_high = v;
            any_inside = true;
        } else {
            s.whisker_high = v;
        }
    }
    return s;
}

}  // namespace fitcap
