#ifndef COGDIAG_EXPLAIN_HPP
#define COGDIAG_EXPLAIN_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/model.hpp"
#include "cogdiag/posterior.hpp"
#include "cogdiag/train.hpp"

namespace cogdiag {

// ---------------------------------------------------------------------------
// Mastery bands shared by the reasoning chain and the teaching suggestions.

enum class Band { weak, partial, strong };

inline std::string_view to_string(Band b) {
    switch (b) {
        case Band::weak: return "weak";
        case Band::partial: return "partial";
        case Band::strong: return "strong";
    }
    return "partial";
}

struct MasteryBands {
    double weak_below = 0.4;
    double strong_from = 0.7;

    Band classify(double mastery) const noexcept {
        if (mastery < weak_below) return Band::weak;
        if (mastery < strong_from) return Band::partial;
        return Band::strong;
    }
};

inline std::string percent(double v) { return std::to_string(std::lround(v * 100.0)) + "%"; }

// ---------------------------------------------------------------------------
// Contrastive re-diagnosis.

struct FlipItems {
    std::vector<std::size_t> items;
};

struct ContrastiveQuery {
    std::vector<StudentResponse> base_responses;
    std::variant<FlipItems, std::vector<StudentResponse>> variant;
    PosteriorConfig config;
};

struct ContrastiveResult {
    std::vector<double> mastery_1;
    std::vector<double> mastery_2;
    std::vector<double> delta;  // mastery_2 - mastery_1
    PosteriorState state_1;
    PosteriorState state_2;
};

/// Toggles correctness of each listed item in a copy of `base`. Listing an
/// item twice toggles it back.
inline std::vector<StudentResponse> apply_flips(std::vector<StudentResponse> base,
                                                const std::vector<std::size_t>& flips) {
    for (std::size_t item : flips) {
        auto it = std::find_if(base.begin(), base.end(), [&](const StudentResponse& r) { return r.item == item; });
        if (it == base.end()) {
            throw Error(ErrorCode::FlipTargetNotInBase,
                        "item index " + std::to_string(item) + " is not among the student's responses");
        }
        it->correct = 1 - it->correct;
    }
    return base;
}

/// Diagnoses the two evidence sets with one shared configuration (same u0
/// and schedule) and reports the per-KC change. No per-item attribution.
inline ContrastiveResult contrastive(const ModelParams& params, const ContrastiveQuery& query) {
    detail::check_responses(params, query.base_responses);
    std::vector<StudentResponse> second;
    if (const auto* flips = std::get_if<FlipItems>(&query.variant)) {
        second = apply_flips(query.base_responses, flips->items);
    } else {
        second = std::get<std::vector<StudentResponse>>(query.variant);
    }
    ContrastiveResult out;
    out.state_1 = diagnose(params, query.base_responses, query.config);
    out.state_2 = diagnose(params, std::move(second), query.config);
    out.mastery_1 = out.state_1.mastery;
    out.mastery_2 = out.state_2.mastery;
    out.delta.resize(out.mastery_1.size());
    for (std::size_t k = 0; k < out.delta.size(); ++k) out.delta[k] = out.mastery_2[k] - out.mastery_1[k];
    return out;
}

// ---------------------------------------------------------------------------
// Counterfactual forward simulation.

inline const std::vector<double>& default_value_grid() {
    static const std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9};
    return grid;
}

struct CounterfactualQuery {
    std::vector<double> base_mastery;
    std::map<std::size_t, double> overrides;  // KC index -> asserted mastery
    double threshold = 0.5;
    std::vector<std::size_t> target_items;  // empty means every item
};

struct ItemPrediction {
    std::size_t item = 0;
    double y = 0.0;
    int predicted = 0;

    bool operator==(const ItemPrediction&) const = default;
};

struct CounterfactualResult {
    std::vector<double> effective_mastery;
    std::vector<ItemPrediction> predictions;
    double threshold = 0.5;
};

/// Ties at the threshold count as correct.
inline int threshold_prediction(double y, double threshold) noexcept { return y >= threshold ? 1 : 0; }

/// Overwrites the base mastery on the chosen KCs and runs one forward pass
/// per target item. Nothing is optimized and the model is not touched.
inline CounterfactualResult counterfactual(const ModelParams& params, const CounterfactualQuery& query) {
    const std::size_t K = params.num_kcs();
    if (query.base_mastery.size() != K) throw Error(ErrorCode::ShapeMismatch, "base mastery must have K entries");
    if (!(query.threshold > 0.0 && query.threshold < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "threshold must lie strictly inside (0, 1)");
    }
    for (double v : query.base_mastery) {
        if (!(v > 0.0 && v < 1.0)) throw Error(ErrorCode::MasteryOutOfRange, "base mastery must lie inside (0, 1)");
    }
#ifdef COGDIAG_CHECK_INVARIANTS
    const ModelParams before = params;
#endif
    CounterfactualResult out;
    out.threshold = query.threshold;
    out.effective_mastery = query.base_mastery;
    for (const auto& [kc, value] : query.overrides) {
        if (kc >= K) throw Error(ErrorCode::UnknownKC, "KC index " + std::to_string(kc) + " is not in the model");
        if (!(value > 0.0 && value < 1.0)) {
            throw Error(ErrorCode::OverrideOutOfRange, "override for KC '" + params.qmatrix.kc_ids()[kc] +
                                                           "' must lie strictly inside (0, 1)");
        }
        out.effective_mastery[kc] = value;
    }
    std::vector<std::size_t> targets = query.target_items;
    if (targets.empty()) {
        targets.resize(params.num_items());
        for (std::size_t e = 0; e < targets.size(); ++e) targets[e] = e;
    }
    for (std::size_t e : targets) {
        if (e >= params.num_items()) {
            throw Error(ErrorCode::UnknownItem, "item index " + std::to_string(e) + " is not in the model");
        }
    }
    ForwardTrace t;
    for (std::size_t e : targets) {
        detail::forward(params, out.effective_mastery, e, t);
        out.predictions.push_back({e, t.y, threshold_prediction(t.y, query.threshold)});
    }
#ifdef COGDIAG_CHECK_INVARIANTS
    if (!(before == params)) throw std::logic_error("counterfactual modified model parameters");
#endif
    return out;
}

/// Sweeps one KC over a grid of asserted values (default 0.1 .. 0.9).
inline std::vector<CounterfactualResult> counterfactual_sweep(const ModelParams& params,
                                                              CounterfactualQuery query, std::size_t kc,
                                                              const std::vector<double>& grid = default_value_grid()) {
    std::vector<CounterfactualResult> out;
    for (double v : grid) {
        query.overrides[kc] = v;
        out.push_back(counterfactual(params, query));
    }
    return out;
}

/// Cutoff maximizing accuracy on the given observations; ties resolve to the
/// candidate closest to 0.5.
inline double calibrated_threshold(const ModelParams& params, std::span<const Observation> pairs) {
    if (pairs.empty()) return 0.5;
    std::vector<std::pair<double, int>> scored;
    ForwardTrace t;
    for (const auto& o : pairs) {
        const auto h = student_factor(params, o.student);
        detail::forward(params, h, o.item, t);
        scored.emplace_back(t.y, o.correct);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<double> candidates{0.5};
    for (std::size_t i = 0; i + 1 < scored.size(); ++i) {
        const double mid = 0.5 * (scored[i].first + scored[i + 1].first);
        if (mid > 0.0 && mid < 1.0) candidates.push_back(mid);
    }
    double best = 0.5;
    std::size_t best_hits = 0;
    for (double c : candidates) {
        std::size_t hits = 0;
        for (const auto& [y, r] : scored) hits += threshold_prediction(y, c) == r;
        if (hits > best_hits || (hits == best_hits && std::abs(c - 0.5) < std::abs(best - 0.5))) {
            best = c;
            best_hits = hits;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reasoning chain: evidence -> KC -> mastery -> conclusion.

struct EvidenceItem {
    std::size_t item = 0;
    int correct = 0;

    bool operator==(const EvidenceItem&) const = default;
};

struct ReasoningStep {
    std::size_t kc = 0;
    std::vector<EvidenceItem> evidence;  // responses whose item measures this KC
    std::size_t correct_count = 0;
    double mastery = 0.5;
    std::string band;        // weak | partial | strong | insufficient_evidence
    std::string conclusion;  // templated sentence

    bool operator==(const ReasoningStep&) const = default;
};

struct ReasoningChain {
    std::vector<ReasoningStep> steps;  // one per KC, in KC order
    double mean_mastery = 0.5;

    bool operator==(const ReasoningChain&) const = default;
};

inline ReasoningChain build_reasoning_chain(const ModelParams& params, const PosteriorState& posterior,
                                            const MasteryBands& bands = {}) {
    const auto& q = params.qmatrix;
    ReasoningChain chain;
    double sum = 0.0;
    for (std::size_t k = 0; k < params.num_kcs(); ++k) {
        ReasoningStep step;
        step.kc = k;
        step.mastery = posterior.mastery[k];
        sum += step.mastery;
        std::string cited;
        for (const auto& r : posterior.responses) {
            if (!q(r.item, k)) continue;
            step.evidence.push_back({r.item, r.correct});
            step.correct_count += r.correct;
            if (!cited.empty()) cited += ", ";
            cited += q.item_ids()[r.item] + (r.correct ? " (correct)" : " (incorrect)");
        }
        const std::string& kc = q.kc_ids()[k];
        const std::string pct = percent(step.mastery);
        if (step.evidence.empty()) {
            step.band = "insufficient_evidence";
            step.conclusion = "Insufficient evidence for " + kc + ": no answered question measures it, so the estimate stays near the prior (" + pct + ").";
        } else {
            const Band b = bands.classify(step.mastery);
            step.band = std::string(to_string(b));
            const std::string tally = std::to_string(step.correct_count) + " of " +
                                      std::to_string(step.evidence.size()) + " related questions correct: " + cited;
            switch (b) {
                case Band::weak:
                    step.conclusion = kc + " appears weak (" + pct + "); " + tally + ".";
                    break;
                case Band::partial:
                    step.conclusion = kc + " is partially mastered (" + pct + "); " + tally + ".";
                    break;
                case Band::strong:
                    step.conclusion = kc + " appears well mastered (" + pct + "); " + tally + ".";
                    break;
            }
        }
        chain.steps.push_back(std::move(step));
    }
    if (params.num_kcs() > 0) chain.mean_mastery = sum / static_cast<double>(params.num_kcs());
    return chain;
}

}  // namespace cogdiag

#endif  // COGDIAG_EXPLAIN_HPP
