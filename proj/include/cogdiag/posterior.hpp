#ifndef COGDIAG_POSTERIOR_HPP
#define COGDIAG_POSTERIOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/model.hpp"

namespace cogdiag {

/// One response of the student being diagnosed.
struct StudentResponse {
    std::size_t item = 0;
    int correct = 0;

    bool operator==(const StudentResponse&) const = default;
};

struct PosteriorConfig {
    double learning_rate = 0.05;
    std::size_t max_steps = 1000;
    double tolerance = 1e-7;
    std::vector<double> u0;  // empty means all zeros (mastery 0.5)
    std::uint64_t seed = 0;

    void validate(std::size_t K) const {
        if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "posterior learning_rate must be positive");
        if (max_steps < 1) throw Error(ErrorCode::InvalidConfig, "posterior max_steps must be >= 1");
        if (!u0.empty() && u0.size() != K) throw Error(ErrorCode::ShapeMismatch, "u0 must have K entries");
    }
};

struct PosteriorState {
    std::vector<double> u;
    std::vector<double> mastery;
    std::vector<StudentResponse> responses;
    std::size_t steps_run = 0;
    double final_loss = 0.0;

    bool operator==(const PosteriorState&) const = default;
};

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d u
};

/// Student-specific cross-entropy (summed over responses) and its gradient
/// with respect to the mastery logits u.
inline LossAndGradient student_objective(const ModelParams& params, std::span<const double> u,
                                         std::span<const StudentResponse> responses) {
    const std::size_t K = params.num_kcs();
    std::vector<double> h(K);
    for (std::size_t k = 0; k < K; ++k) h[k] = sigmoid(u[k]);
    LossAndGradient out;
    out.grad.assign(K, 0.0);
    ForwardTrace t;
    std::vector<double> dx, dz2, dz1;
    for (const auto& r : responses) {
        detail::forward(params, h, r.item, t);
        out.loss += bce_from_logit(t.logit, r.correct);
        detail::backprop_network(params, t, t.y - r.correct, {}, dx, dz2, dz1);
        for (std::size_t k = 0; k < K; ++k) {
            if (t.q_e[k]) out.grad[k] += dx[k] * t.disc(k) * h[k] * (1.0 - h[k]);
        }
    }
    return out;
}

namespace detail {

inline void check_responses(const ModelParams& params, std::span<const StudentResponse> responses) {
    for (const auto& r : responses) {
        if (r.item >= params.num_items()) {
            throw Error(ErrorCode::UnknownItem, "item index " + std::to_string(r.item) + " is not in the model");
        }
        if (r.correct != 0 && r.correct != 1) throw Error(ErrorCode::BadCorrectValue, "correct must be 0 or 1");
    }
}

}  // namespace detail

/// Estimates a student's mastery from their responses with every model
/// parameter frozen, by gradient descent on the logits u from config.u0.
///
/// Each step searches the step size along the negative gradient: starting
/// from the previous rate (initially config.learning_rate) it halves until
/// the loss decreases, then doubles while the loss keeps decreasing. The run
/// stops after max_steps accepted steps, when a step improves the loss by less
/// than the tolerance, or when no step size decreases the loss. No step moves
/// any logit by more than one unit, which keeps mastery strictly inside (0, 1)
/// when the loss keeps falling toward a boundary.
inline PosteriorState diagnose(const ModelParams& params, std::vector<StudentResponse> responses,
                               const PosteriorConfig& config = {}) {
    const std::size_t K = params.num_kcs();
    config.validate(K);
    detail::check_responses(params, responses);
#ifdef COGDIAG_CHECK_INVARIANTS
    const ModelParams before = params;
#endif

    PosteriorState state;
    state.u = config.u0.empty() ? std::vector<double>(K, 0.0) : config.u0;
    state.responses = std::move(responses);

    if (!state.responses.empty()) {
        auto current = student_objective(params, state.u, state.responses);
        const double min_rate = config.learning_rate * 1e-12;
        double rate = config.learning_rate;
        std::vector<double> trial(K);
        auto along = [&](double r) {
            for (std::size_t k = 0; k < K; ++k) trial[k] = state.u[k] - r * current.grad[k];
            return student_objective(params, trial, state.responses);
        };
        while (state.steps_run < config.max_steps) {
            double gmax = 0.0;
            for (double g : current.grad) gmax = std::max(gmax, std::abs(g));
            if (gmax == 0.0) break;
            const double max_rate = 1.0 / gmax;
            rate = std::min(rate, max_rate);
            auto next = along(rate);
            while (!(next.loss < current.loss) && rate >= min_rate) {
                rate *= 0.5;
                next = along(rate);
            }
            if (!(next.loss < current.loss)) break;
            while (rate * 2.0 <= max_rate) {
                auto wider = along(rate * 2.0);
                if (!(wider.loss < next.loss)) break;
                rate *= 2.0;
                next = std::move(wider);
            }
            const double improvement = current.loss - next.loss;
            for (std::size_t k = 0; k < K; ++k) state.u[k] -= rate * current.grad[k];
            current = std::move(next);
            ++state.steps_run;
            if (improvement < config.tolerance) break;
        }
        state.final_loss = current.loss;
    }
    state.mastery.resize(K);
    for (std::size_t k = 0; k < K; ++k) state.mastery[k] = sigmoid(state.u[k]);

#ifdef COGDIAG_CHECK_INVARIANTS
    if (!(before == params)) throw std::logic_error("diagnose modified frozen model parameters");
#endif
    return state;
}

}  // namespace cogdiag

#endif  // COGDIAG_POSTERIOR_HPP
