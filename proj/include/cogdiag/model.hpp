#ifndef COGDIAG_MODEL_HPP
#define COGDIAG_MODEL_HPP

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/ingest.hpp"

namespace cogdiag {

enum class DiscriminationMode { scalar, per_kc };

inline std::string_view to_string(DiscriminationMode mode) {
    return mode == DiscriminationMode::scalar ? "scalar" : "per_kc";
}

inline DiscriminationMode discrimination_mode_from_string(std::string_view s) {
    if (s == "scalar") return DiscriminationMode::scalar;
    if (s == "per_kc") return DiscriminationMode::per_kc;
    throw Error(ErrorCode::InvalidConfig, "discrimination_mode must be 'scalar' or 'per_kc'");
}

struct HyperParams {
    std::size_t K = 0;
    std::size_t H1 = 64;
    std::size_t H2 = 32;
    DiscriminationMode discrimination_mode = DiscriminationMode::scalar;

    void validate() const {
        if (K < 1) throw Error(ErrorCode::InvalidConfig, "K must be >= 1");
        if (H1 < 1 || H2 < 1) throw Error(ErrorCode::InvalidConfig, "hidden widths must be >= 1");
    }

    std::size_t disc_cols() const noexcept { return discrimination_mode == DiscriminationMode::scalar ? 1 : K; }

    bool operator==(const HyperParams&) const = default;
};

/// All learnable tensors of the diagnosis network plus the frozen Q-matrix.
///
/// Mastery is sigmoid(A), per-KC difficulty sigmoid(B), discrimination
/// sigmoid(D). The interaction x = Q_e * (h_s - h_diff) * h_disc feeds three
/// sigmoid layers whose weights W1..W3 are kept nonnegative so the output is
/// nondecreasing in every required KC's mastery.
struct ModelParams {
    HyperParams hyper;
    QMatrix qmatrix;
    std::vector<std::string> student_ids;

    Matrix A;   // N x K
    Matrix B;   // M x K
    Matrix D;   // M x 1 or M x K
    Matrix W1;  // H1 x K
    Matrix W2;  // H2 x H1
    Matrix W3;  // 1 x H2
    std::vector<double> b1;
    std::vector<double> b2;
    double b3 = 0.0;

    std::size_t num_students() const noexcept { return A.rows(); }
    std::size_t num_items() const noexcept { return B.rows(); }
    std::size_t num_kcs() const noexcept { return hyper.K; }

    /// Zero-filled parameters with dimensions consistent with (N, M, K, H1, H2).
    static ModelParams zeros(HyperParams hyper, QMatrix qmatrix, std::vector<std::string> student_ids) {
        hyper.K = qmatrix.kcs();
        hyper.validate();
        ModelParams p;
        p.hyper = hyper;
        const std::size_t N = student_ids.size();
        const std::size_t M = qmatrix.items();
        p.qmatrix = std::move(qmatrix);
        p.student_ids = std::move(student_ids);
        p.A = Matrix(N, hyper.K);
        p.B = Matrix(M, hyper.K);
        p.D = Matrix(M, hyper.disc_cols());
        p.W1 = Matrix(hyper.H1, hyper.K);
        p.W2 = Matrix(hyper.H2, hyper.H1);
        p.W3 = Matrix(1, hyper.H2);
        p.b1.assign(hyper.H1, 0.0);
        p.b2.assign(hyper.H2, 0.0);
        return p;
    }

    void check_shapes() const {
        const std::size_t K = hyper.K;
        const bool ok = qmatrix.kcs() == K && A.cols() == K && A.rows() == student_ids.size() &&
                        B.rows() == qmatrix.items() && B.cols() == K && D.rows() == qmatrix.items() &&
                        D.cols() == hyper.disc_cols() && W1.rows() == hyper.H1 && W1.cols() == K &&
                        W2.rows() == hyper.H2 && W2.cols() == hyper.H1 && W3.rows() == 1 &&
                        W3.cols() == hyper.H2 && b1.size() == hyper.H1 && b2.size() == hyper.H2;
        if (!ok) throw Error(ErrorCode::ShapeMismatch, "parameter dimensions are inconsistent");
    }

    double min_weight() const {
        double m = 0.0;
        bool first = true;
        for (const Matrix* w : {&W1, &W2, &W3}) {
            for (double v : w->data()) {
                m = first ? v : std::min(m, v);
                first = false;
            }
        }
        return m;
    }

    bool operator==(const ModelParams&) const = default;
};

/// Intermediate values of one forward pass for (mastery, item).
struct ForwardTrace {
    std::vector<double> h_s;
    std::vector<std::uint8_t> q_e;
    std::vector<double> h_diff;
    std::vector<double> h_disc;  // size 1 in scalar mode, K in per-KC mode
    std::vector<double> x;
    std::vector<double> g1;
    std::vector<double> g2;
    double logit = 0.0;
    double y = 0.5;

    double disc(std::size_t k) const noexcept { return h_disc.size() == 1 ? h_disc[0] : h_disc[k]; }

    bool operator==(const ForwardTrace&) const = default;
};

struct ItemFactors {
    std::vector<std::uint8_t> q_e;
    std::vector<double> h_diff;
    std::vector<double> h_disc;
};

inline std::vector<double> student_factor(const ModelParams& params, std::size_t student) {
    if (student >= params.num_students()) {
        throw Error(ErrorCode::IndexOutOfRange, "student index " + std::to_string(student) + " out of range");
    }
    const auto row = params.A.row(student);
    std::vector<double> h(row.size());
    std::transform(row.begin(), row.end(), h.begin(), sigmoid);
    return h;
}

inline ItemFactors item_factors(const ModelParams& params, std::size_t item) {
    if (item >= params.num_items()) {
        throw Error(ErrorCode::IndexOutOfRange, "item index " + std::to_string(item) + " out of range");
    }
    ItemFactors f;
    const auto q = params.qmatrix.row(item);
    f.q_e.assign(q.begin(), q.end());
    const auto b = params.B.row(item);
    f.h_diff.resize(b.size());
    std::transform(b.begin(), b.end(), f.h_diff.begin(), sigmoid);
    const auto d = params.D.row(item);
    f.h_disc.resize(d.size());
    std::transform(d.begin(), d.end(), f.h_disc.begin(), sigmoid);
    return f;
}

namespace detail {

/// Forward pass without argument validation; `trace` buffers are reused.
inline void forward(const ModelParams& p, std::span<const double> h_s, std::size_t item, ForwardTrace& t) {
    const std::size_t K = p.hyper.K;
    const std::size_t H1 = p.hyper.H1;
    const std::size_t H2 = p.hyper.H2;

    t.h_s.assign(h_s.begin(), h_s.end());
    const auto q = p.qmatrix.row(item);
    t.q_e.assign(q.begin(), q.end());
    t.h_diff.resize(K);
    const auto b = p.B.row(item);
    for (std::size_t k = 0; k < K; ++k) t.h_diff[k] = sigmoid(b[k]);
    const auto d = p.D.row(item);
    t.h_disc.resize(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) t.h_disc[j] = sigmoid(d[j]);

    t.x.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        // Masked coordinates are an exact 0.0 so they cannot influence the sums below.
        t.x[k] = t.q_e[k] ? (t.h_s[k] - t.h_diff[k]) * t.disc(k) : 0.0;
    }

    t.g1.resize(H1);
    for (std::size_t i = 0; i < H1; ++i) {
        double z = p.b1[i];
        const auto w = p.W1.row(i);
        for (std::size_t k = 0; k < K; ++k) z += w[k] * t.x[k];
        t.g1[i] = sigmoid(z);
    }
    t.g2.resize(H2);
    for (std::size_t j = 0; j < H2; ++j) {
        double z = p.b2[j];
        const auto w = p.W2.row(j);
        for (std::size_t i = 0; i < H1; ++i) z += w[i] * t.g1[i];
        t.g2[j] = sigmoid(z);
    }
    double z = p.b3;
    const auto w3 = p.W3.row(0);
    for (std::size_t j = 0; j < H2; ++j) z += w3[j] * t.g2[j];
    t.logit = z;
    t.y = sigmoid(z);
}

/// Gradient sink for the network weights; any pointer may be null.
struct NetworkGrads {
    Matrix* W1 = nullptr;
    Matrix* W2 = nullptr;
    Matrix* W3 = nullptr;
    std::vector<double>* b1 = nullptr;
    std::vector<double>* b2 = nullptr;
    double* b3 = nullptr;
};

/// Backpropagates dL/dlogit through the three layers. Accumulates weight
/// gradients into `out` and writes dL/dx into `dx`.
inline void backprop_network(const ModelParams& p, const ForwardTrace& t, double dlogit, const NetworkGrads& out,
                             std::vector<double>& dx, std::vector<double>& dz2, std::vector<double>& dz1) {
    const std::size_t K = p.hyper.K;
    const std::size_t H1 = p.hyper.H1;
    const std::size_t H2 = p.hyper.H2;

    if (out.b3) *out.b3 += dlogit;
    dz2.resize(H2);
    const auto w3 = p.W3.row(0);
    for (std::size_t j = 0; j < H2; ++j) {
        if (out.W3) (*out.W3)(0, j) += dlogit * t.g2[j];
        dz2[j] = dlogit * w3[j] * t.g2[j] * (1.0 - t.g2[j]);
    }
    dz1.assign(H1, 0.0);
    for (std::size_t j = 0; j < H2; ++j) {
        if (out.b2) (*out.b2)[j] += dz2[j];
        const auto w = p.W2.row(j);
        for (std::size_t i = 0; i < H1; ++i) {
            if (out.W2) (*out.W2)(j, i) += dz2[j] * t.g1[i];
            dz1[i] += w[i] * dz2[j];
        }
    }
    dx.assign(K, 0.0);
    for (std::size_t i = 0; i < H1; ++i) {
        dz1[i] *= t.g1[i] * (1.0 - t.g1[i]);
        if (out.b1) (*out.b1)[i] += dz1[i];
        const auto w = p.W1.row(i);
        for (std::size_t k = 0; k < K; ++k) {
            if (out.W1) (*out.W1)(i, k) += dz1[i] * t.x[k];
            dx[k] += w[k] * dz1[i];
        }
    }
}

}  // namespace detail

/// Forward pass for a mastery vector and an item.
inline ForwardTrace predict(const ModelParams& params, std::span<const double> h_s, std::size_t item) {
    if (item >= params.num_items()) {
        throw Error(ErrorCode::IndexOutOfRange, "item index " + std::to_string(item) + " out of range");
    }
    if (h_s.size() != params.num_kcs()) {
        throw Error(ErrorCode::ShapeMismatch, "mastery vector has " + std::to_string(h_s.size()) +
                                                  " entries, model has K=" + std::to_string(params.num_kcs()));
    }
    for (double v : h_s) {
        if (!(v > 0.0 && v < 1.0)) {
            throw Error(ErrorCode::MasteryOutOfRange, "mastery values must lie strictly inside (0, 1)");
        }
    }
    ForwardTrace t;
    detail::forward(params, h_s, item, t);
    return t;
}

/// Clips W1, W2, W3 to be entrywise nonnegative; other tensors untouched.
inline void project_nonnegative_inplace(ModelParams& params) {
    for (Matrix* w : {&params.W1, &params.W2, &params.W3}) {
        for (double& v : w->data()) v = std::max(v, 0.0);
    }
}

inline ModelParams project_nonnegative(ModelParams params) {
    project_nonnegative_inplace(params);
    return params;
}

}  // namespace cogdiag

#endif  // COGDIAG_MODEL_HPP
