#ifndef COGDIAG_TRAIN_HPP
#define COGDIAG_TRAIN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/ingest.hpp"
#include "cogdiag/model.hpp"

namespace cogdiag {

/// One observed (student, item, correctness) triple.
struct Observation {
    std::size_t student = 0;
    std::size_t item = 0;
    int correct = 0;

    bool operator==(const Observation&) const = default;
};

inline std::vector<Observation> observations(const EncodedDataset& ds) {
    std::vector<Observation> out;
    out.reserve(ds.records.size());
    for (const auto& r : ds.records) out.push_back({r.student, r.item, r.correct});
    return out;
}

enum class Optimizer { sgd, adam };

inline std::string_view to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

inline Optimizer optimizer_from_string(std::string_view s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    throw Error(ErrorCode::InvalidConfig, "optimizer must be 'sgd' or 'adam'");
}

struct TrainConfig {
    double learning_rate = 0.002;
    std::size_t epochs = 50;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    double init_scale = 0.1;
    double holdout_fraction = 0.1;
    /// Records per optimizer step; 0 means one full-batch step per epoch.
    std::size_t batch_size = 32;
    std::size_t H1 = 64;
    std::size_t H2 = 32;
    DiscriminationMode discrimination_mode = DiscriminationMode::scalar;

    /// Called after every optimizer step (post-projection) with the step count.
    std::function<void(const ModelParams&, std::size_t)> on_step;

    void validate() const {
        if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
        if (!(init_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "init_scale must be positive");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 0.5)) {
            throw Error(ErrorCode::InvalidConfig, "holdout_fraction must lie in [0, 0.5)");
        }
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
            throw Error(ErrorCode::InvalidConfig, "Adam moments must lie in [0, 1) and epsilon be positive");
        }
        if (H1 < 1 || H2 < 1) throw Error(ErrorCode::InvalidConfig, "hidden widths must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> losses;  // mean training cross-entropy: [initial, after epoch 1, ...]
    std::optional<double> holdout_accuracy;
    std::optional<double> holdout_ce;
    std::size_t epochs_run = 0;
    std::size_t steps_run = 0;
    std::size_t train_records = 0;
    std::size_t holdout_records = 0;
    std::uint64_t seed = 0;

    bool operator==(const TrainReport&) const = default;
};

/// Gradient of the loss with the same shapes as the learnable tensors.
struct Gradients {
    Matrix A, B, D, W1, W2, W3;
    std::vector<double> b1, b2;
    double b3 = 0.0;

    static Gradients zeros_like(const ModelParams& p) {
        Gradients g;
        g.A = Matrix(p.A.rows(), p.A.cols());
        g.B = Matrix(p.B.rows(), p.B.cols());
        g.D = Matrix(p.D.rows(), p.D.cols());
        g.W1 = Matrix(p.W1.rows(), p.W1.cols());
        g.W2 = Matrix(p.W2.rows(), p.W2.cols());
        g.W3 = Matrix(p.W3.rows(), p.W3.cols());
        g.b1.assign(p.b1.size(), 0.0);
        g.b2.assign(p.b2.size(), 0.0);
        return g;
    }

    bool operator==(const Gradients&) const = default;
};

namespace detail {

inline void check_batch(const ModelParams& p, std::span<const Observation> pairs) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "batch contains no observations");
    for (const auto& o : pairs) {
        if (o.student >= p.num_students() || o.item >= p.num_items()) {
            throw Error(ErrorCode::IndexOutOfRange, "observation index out of range");
        }
    }
}

/// Visits every learnable tensor as a flat span, paired with its gradient.
template <typename Fn>
void for_each_tensor(ModelParams& p, Gradients& g, Fn&& fn) {
    fn(std::span<double>(p.A.data()), std::span<double>(g.A.data()));
    fn(std::span<double>(p.B.data()), std::span<double>(g.B.data()));
    fn(std::span<double>(p.D.data()), std::span<double>(g.D.data()));
    fn(std::span<double>(p.W1.data()), std::span<double>(g.W1.data()));
    fn(std::span<double>(p.W2.data()), std::span<double>(g.W2.data()));
    fn(std::span<double>(p.W3.data()), std::span<double>(g.W3.data()));
    fn(std::span<double>(p.b1), std::span<double>(g.b1));
    fn(std::span<double>(p.b2), std::span<double>(g.b2));
    fn(std::span<double>(&p.b3, 1), std::span<double>(&g.b3, 1));
}

/// Sums loss and (optionally) gradients over `pairs`, in order.
inline double accumulate(const ModelParams& p, std::span<const Observation> pairs, Gradients* grads) {
    const std::size_t K = p.hyper.K;
    ForwardTrace t;
    std::vector<double> h_s(K), dx, dz2, dz1;
    NetworkGrads net;
    if (grads) net = {&grads->W1, &grads->W2, &grads->W3, &grads->b1, &grads->b2, &grads->b3};
    double total = 0.0;
    for (const auto& o : pairs) {
        const auto a = p.A.row(o.student);
        for (std::size_t k = 0; k < K; ++k) h_s[k] = sigmoid(a[k]);
        forward(p, h_s, o.item, t);
        total += bce_from_logit(t.logit, o.correct);
        if (!grads) continue;

        backprop_network(p, t, t.y - o.correct, net, dx, dz2, dz1);
        auto dA = grads->A.row(o.student);
        auto dB = grads->B.row(o.item);
        auto dD = grads->D.row(o.item);
        const bool scalar = dD.size() == 1;
        double ddisc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!t.q_e[k]) continue;
            const double gate = t.disc(k);
            dA[k] += dx[k] * gate * t.h_s[k] * (1.0 - t.h_s[k]);
            dB[k] -= dx[k] * gate * t.h_diff[k] * (1.0 - t.h_diff[k]);
            const double dgate = dx[k] * (t.h_s[k] - t.h_diff[k]);
            if (scalar) {
                ddisc += dgate;
            } else {
                dD[k] += dgate * gate * (1.0 - gate);
            }
        }
        if (scalar) dD[0] += ddisc * t.h_disc[0] * (1.0 - t.h_disc[0]);
    }
    return total;
}

}  // namespace detail

/// Summed cross-entropy over the observations.
inline double loss(const ModelParams& params, std::span<const Observation> pairs) {
    detail::check_batch(params, pairs);
    return detail::accumulate(params, pairs, nullptr);
}

/// Exact gradient of `loss` with respect to every learnable tensor.
inline Gradients gradients(const ModelParams& params, std::span<const Observation> pairs) {
    detail::check_batch(params, pairs);
    Gradients g = Gradients::zeros_like(params);
    detail::accumulate(params, pairs, &g);
    return g;
}

/// Seeded initialization: A, B, D ~ U(-s, s), W1..W3 ~ U(0, s), biases 0.
inline ModelParams initialize(const EncodedDataset& ds, const TrainConfig& config) {
    HyperParams hyper{ds.num_kcs(), config.H1, config.H2, config.discrimination_mode};
    ModelParams p = ModelParams::zeros(hyper, ds.qmatrix, ds.student_ids);
    Rng rng(config.seed);
    const double s = config.init_scale;
    for (Matrix* m : {&p.A, &p.B, &p.D})
        for (double& v : m->data()) v = rng.uniform(-s, s);
    for (Matrix* m : {&p.W1, &p.W2, &p.W3})
        for (double& v : m->data()) v = rng.uniform(0.0, s);
    return p;
}

/// Splits records into (train, holdout) by a seeded shuffle. Both lists keep
/// file order internally.
inline std::pair<std::vector<Observation>, std::vector<Observation>> split_holdout(const EncodedDataset& ds,
                                                                                    double fraction,
                                                                                    std::uint64_t seed) {
    const auto all = observations(ds);
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed ^ 0x6A09E667F3BCC908ULL);
    rng.shuffle(order);
    std::size_t n_hold = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(all.size())));
    if (n_hold >= all.size()) n_hold = all.size() - 1;
    std::vector<char> held(all.size(), 0);
    for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = 1;
    std::vector<Observation> train, hold;
    for (std::size_t i = 0; i < all.size(); ++i) (held[i] ? hold : train).push_back(all[i]);
    return {std::move(train), std::move(hold)};
}

/// Fits the model by minimizing the cross-entropy with gradient steps,
/// clipping W1..W3 to be nonnegative after every step. Deterministic given
/// (dataset, config).
inline std::pair<ModelParams, TrainReport> fit(const EncodedDataset& ds, const TrainConfig& config) {
    config.validate();
    if (ds.records.empty()) throw Error(ErrorCode::EmptyBatch, "dataset has no observed responses");
    ModelParams p = initialize(ds, config);
    auto [train, hold] = split_holdout(ds, config.holdout_fraction, config.seed);

    TrainReport report;
    report.seed = config.seed;
    report.train_records = train.size();
    report.holdout_records = hold.size();
    const double n_train = static_cast<double>(train.size());
    report.losses.push_back(detail::accumulate(p, train, nullptr) / n_train);

    Gradients g = Gradients::zeros_like(p);
    std::vector<double> m1, m2;
    if (config.optimizer == Optimizer::adam) {
        std::size_t total = 0;
        detail::for_each_tensor(p, g, [&](std::span<double> w, std::span<double>) { total += w.size(); });
        m1.assign(total, 0.0);
        m2.assign(total, 0.0);
    }
    Rng batch_rng(config.seed ^ 0xBB67AE8584CAA73BULL);
    std::vector<std::size_t> order(train.size());
    std::vector<Observation> batch;
    const std::size_t batch_size =
        config.batch_size == 0 ? train.size() : std::min(config.batch_size, train.size());

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (batch_size < train.size()) batch_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);

            g = Gradients::zeros_like(p);
            detail::accumulate(p, batch, &g);
            // Steps use the batch-mean gradient so the rate does not scale with batch size.
            const double scale = 1.0 / static_cast<double>(batch.size());
            ++step;
            if (config.optimizer == Optimizer::sgd) {
                detail::for_each_tensor(p, g, [&](std::span<double> w, std::span<double> dw) {
                    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * scale * dw[i];
                });
            } else {
                const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
                std::size_t offset = 0;
                detail::for_each_tensor(p, g, [&](std::span<double> w, std::span<double> dw) {
                    for (std::size_t i = 0; i < w.size(); ++i, ++offset) {
                        const double grad = scale * dw[i];
                        m1[offset] = config.beta1 * m1[offset] + (1.0 - config.beta1) * grad;
                        m2[offset] = config.beta2 * m2[offset] + (1.0 - config.beta2) * grad * grad;
                        const double mhat = m1[offset] / c1;
                        const double vhat = m2[offset] / c2;
                        w[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
                    }
                });
            }
            project_nonnegative_inplace(p);
#ifdef COGDIAG_CHECK_INVARIANTS
            if (p.min_weight() < 0.0) throw std::logic_error("negative network weight after projection");
#endif
            if (config.on_step) config.on_step(p, step);
        }
        report.losses.push_back(detail::accumulate(p, train, nullptr) / n_train);
        ++report.epochs_run;
    }
    report.steps_run = step;

    if (!hold.empty()) {
        std::size_t hits = 0;
        double ce = 0.0;
        ForwardTrace t;
        for (const auto& o : hold) {
            const auto h = student_factor(p, o.student);
            detail::forward(p, h, o.item, t);
            hits += ((t.y >= 0.5) == (o.correct == 1)) ? 1 : 0;
            ce += bce_from_logit(t.logit, o.correct);
        }
        report.holdout_accuracy = static_cast<double>(hits) / static_cast<double>(hold.size());
        report.holdout_ce = ce / static_cast<double>(hold.size());
    }
    return {std::move(p), std::move(report)};
}

}  // namespace cogdiag

#endif  // COGDIAG_TRAIN_HPP
