#ifndef COGDIAG_ANALYTICS_HPP
#define COGDIAG_ANALYTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/explain.hpp"
#include "cogdiag/ingest.hpp"
#include "cogdiag/model.hpp"

namespace cogdiag {

struct ItemStats {
    std::size_t item = 0;
    std::size_t respondents = 0;
    std::size_t correct = 0;
    std::optional<double> accuracy;              // undefined with zero respondents
    std::optional<double> difficulty_classical;  // 1 - accuracy
    std::optional<double> discrimination_pb;     // corrected point-biserial
    std::string discrimination_note;             // why discrimination_pb is undefined, if it is
    std::vector<std::pair<std::size_t, double>> difficulty_model;  // (kc, h_diff) for measured KCs
    std::vector<double> discrimination_model;                      // h_disc (1 or K values)
    std::vector<std::pair<std::string, std::size_t>> option_counts;
};

struct KCStats {
    std::size_t kc = 0;
    double weight = 0.0;
    std::size_t item_count = 0;
    std::optional<double> class_mean_mastery;
    std::optional<double> accuracy;  // pooled accuracy on responses to this KC's items
    std::map<std::string, std::size_t> difficulty_distribution;  // easy / medium / hard / unanswered
};

struct ItemErrorPattern {
    std::size_t item = 0;
    std::size_t wrong = 0;
    std::vector<std::pair<std::string, std::size_t>> distractors;  // descending count, ties by label
};

struct ErrorPatterns {
    std::vector<ItemErrorPattern> items;
    std::vector<std::size_t> items_without_options;
    std::string coverage_note;
};

struct ComparisonThresholds {
    double item_gap = 0.3;
    double student_gap = 0.2;
    double class_low_accuracy = 0.5;
};

struct ItemGap {
    std::size_t item = 0;
    std::optional<double> gap;
    bool exceeds_class_ability = false;
};

struct StudentKCDelta {
    std::size_t student = 0;
    std::vector<double> delta;            // per KC: mastery - class mean
    std::vector<std::size_t> below_class; // KCs with delta < -student_gap
};

struct ClassComparison {
    double class_accuracy = 0.0;
    std::vector<ItemGap> items;
    std::vector<StudentKCDelta> students;
    std::vector<std::size_t> class_wide_low_kcs;  // topic-alignment flag
    ComparisonThresholds thresholds;
};

struct Overview {
    std::size_t students = 0;
    std::size_t items = 0;
    std::size_t kcs = 0;
    std::size_t records = 0;
    double class_accuracy = 0.0;
    std::vector<std::size_t> item_accuracy_histogram;  // 10 bins over [0, 1]
    std::vector<double> kc_weights;
    std::optional<std::vector<double>> class_mean_mastery;
};

namespace detail {

inline std::vector<std::size_t> respondents_by_item(const EncodedDataset& ds) {
    std::vector<std::size_t> n(ds.num_items(), 0);
    for (const auto& r : ds.records) ++n[r.item];
    return n;
}

inline std::vector<double> total_scores(const EncodedDataset& ds) {
    std::vector<double> total(ds.num_students(), 0.0);
    for (const auto& r : ds.records) total[r.student] += r.correct;
    return total;
}

}  // namespace detail

/// Mastery of every dataset student (N x K), looked up in the model by
/// student id.
inline Matrix student_mastery(const EncodedDataset& ds, const ModelParams& params) {
    if (params.num_kcs() != ds.num_kcs()) throw Error(ErrorCode::ShapeMismatch, "model and dataset KC counts differ");
    std::map<std::string, std::size_t> index;
    for (std::size_t s = 0; s < params.student_ids.size(); ++s) index.emplace(params.student_ids[s], s);
    Matrix out(ds.num_students(), ds.num_kcs());
    for (std::size_t s = 0; s < ds.num_students(); ++s) {
        auto it = index.find(ds.student_ids[s]);
        if (it == index.end()) {
            throw Error(ErrorCode::UnknownStudent, "student '" + ds.student_ids[s] + "' is not in the model");
        }
        const auto h = student_factor(params, it->second);
        std::copy(h.begin(), h.end(), out.row(s).begin());
    }
    return out;
}

inline std::vector<double> kc_weights(const QMatrix& q) {
    const auto sums = q.column_sums();
    double total = 0.0;
    for (auto v : sums) total += static_cast<double>(v);
    std::vector<double> w(sums.size());
    for (std::size_t k = 0; k < sums.size(); ++k) w[k] = static_cast<double>(sums[k]) / total;
    return w;
}

inline std::vector<ItemStats> item_stats(const EncodedDataset& ds, const ModelParams* params = nullptr) {
    const std::size_t M = ds.num_items();
    std::vector<ItemStats> out(M);
    const auto total = detail::total_scores(ds);
    std::vector<std::vector<std::pair<double, double>>> pairs(M);  // (item correct, rest score)
    for (std::size_t e = 0; e < M; ++e) out[e].item = e;
    for (const auto& r : ds.records) {
        auto& st = out[r.item];
        ++st.respondents;
        st.correct += r.correct;
        pairs[r.item].emplace_back(r.correct, total[r.student] - r.correct);
    }
    for (std::size_t e = 0; e < M; ++e) {
        auto& st = out[e];
        if (st.respondents == 0) {
            st.discrimination_note = "no respondents";
        } else {
            st.accuracy = static_cast<double>(st.correct) / static_cast<double>(st.respondents);
            st.difficulty_classical = 1.0 - *st.accuracy;
            const auto& xy = pairs[e];
            const double n = static_cast<double>(xy.size());
            double mx = 0, my = 0;
            for (const auto& [x, y] : xy) {
                mx += x;
                my += y;
            }
            mx /= n;
            my /= n;
            double sxy = 0, sxx = 0, syy = 0;
            for (const auto& [x, y] : xy) {
                sxy += (x - mx) * (y - my);
                sxx += (x - mx) * (x - mx);
                syy += (y - my) * (y - my);
            }
            if (xy.size() < 2) {
                st.discrimination_note = "fewer than two respondents";
            } else if (sxx == 0.0) {
                st.discrimination_note = "zero variance in item correctness";
            } else if (syy == 0.0) {
                st.discrimination_note = "zero variance in rest score";
            } else {
                st.discrimination_pb = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
            }
        }
        if (params) {
            const auto f = item_factors(*params, e);
            for (std::size_t k = 0; k < f.q_e.size(); ++k)
                if (f.q_e[k]) st.difficulty_model.emplace_back(k, f.h_diff[k]);
            st.discrimination_model = f.h_disc;
        }
    }
    for (const auto& [key, count] : ds.options) out[key.first].option_counts.emplace_back(key.second, count);
    return out;
}

/// Distractor counts among incorrect answers, for items that carry option data.
inline ErrorPatterns error_patterns(const EncodedDataset& ds) {
    const std::size_t M = ds.num_items();
    std::vector<bool> has_option(M, false);
    std::vector<std::size_t> wrong(M, 0);
    std::vector<std::map<std::string, std::size_t>> counts(M);
    for (const auto& r : ds.records) {
        if (r.option) has_option[r.item] = true;
        if (r.correct) continue;
        ++wrong[r.item];
        if (r.option) ++counts[r.item][*r.option];
    }
    ErrorPatterns out;
    for (std::size_t e = 0; e < M; ++e) {
        if (!has_option[e]) {
            out.items_without_options.push_back(e);
            continue;
        }
        ItemErrorPattern p;
        p.item = e;
        p.wrong = wrong[e];
        p.distractors.assign(counts[e].begin(), counts[e].end());
        std::stable_sort(p.distractors.begin(), p.distractors.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        out.items.push_back(std::move(p));
    }
    if (!out.items_without_options.empty()) {
        std::string list;
        for (std::size_t e : out.items_without_options) {
            if (!list.empty()) list += ", ";
            list += ds.item_ids()[e];
        }
        out.coverage_note = "no selected-option data for: " + list;
    }
    return out;
}

inline std::vector<KCStats> kc_stats(const EncodedDataset& ds, const ModelParams* params = nullptr) {
    const std::size_t K = ds.num_kcs();
    const auto weights = kc_weights(ds.qmatrix);
    const auto sums = ds.qmatrix.column_sums();
    const auto items = item_stats(ds);
    std::optional<Matrix> mastery;
    if (params) mastery = student_mastery(ds, *params);

    std::vector<double> hits(K, 0.0), seen(K, 0.0);
    for (const auto& r : ds.records)
        for (std::size_t k = 0; k < K; ++k)
            if (ds.qmatrix(r.item, k)) {
                seen[k] += 1.0;
                hits[k] += r.correct;
            }

    std::vector<KCStats> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        auto& st = out[k];
        st.kc = k;
        st.weight = weights[k];
        st.item_count = sums[k];
        if (seen[k] > 0) st.accuracy = hits[k] / seen[k];
        if (mastery && mastery->rows() > 0) {
            double m = 0.0;
            for (std::size_t s = 0; s < mastery->rows(); ++s) m += (*mastery)(s, k);
            st.class_mean_mastery = m / static_cast<double>(mastery->rows());
        }
        st.difficulty_distribution = {{"easy", 0}, {"medium", 0}, {"hard", 0}, {"unanswered", 0}};
        for (std::size_t e = 0; e < ds.num_items(); ++e) {
            if (!ds.qmatrix(e, k)) continue;
            const auto& d = items[e].difficulty_classical;
            const char* bin = !d ? "unanswered" : *d < 0.3 ? "easy" : *d < 0.7 ? "medium" : "hard";
            ++st.difficulty_distribution[bin];
        }
    }
    return out;
}

inline ClassComparison compare(const EncodedDataset& ds, const ModelParams& params,
                               const ComparisonThresholds& thresholds = {}) {
    ClassComparison out;
    out.thresholds = thresholds;
    double correct = 0.0;
    for (const auto& r : ds.records) correct += r.correct;
    out.class_accuracy = ds.records.empty() ? 0.0 : correct / static_cast<double>(ds.records.size());

    for (const auto& st : item_stats(ds)) {
        ItemGap g;
        g.item = st.item;
        if (st.difficulty_classical) {
            g.gap = *st.difficulty_classical - (1.0 - out.class_accuracy);
            g.exceeds_class_ability = *g.gap > thresholds.item_gap;
        }
        out.items.push_back(g);
    }

    const Matrix mastery = student_mastery(ds, params);
    const std::size_t N = mastery.rows(), K = mastery.cols();
    std::vector<double> mean(K, 0.0);
    for (std::size_t s = 0; s < N; ++s)
        for (std::size_t k = 0; k < K; ++k) mean[k] += mastery(s, k);
    for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(N, 1));
    for (std::size_t s = 0; s < N; ++s) {
        StudentKCDelta d;
        d.student = s;
        for (std::size_t k = 0; k < K; ++k) {
            d.delta.push_back(mastery(s, k) - mean[k]);
            if (d.delta.back() < -thresholds.student_gap) d.below_class.push_back(k);
        }
        out.students.push_back(std::move(d));
    }
    for (const auto& kc : kc_stats(ds)) {
        if (kc.accuracy && *kc.accuracy < thresholds.class_low_accuracy) out.class_wide_low_kcs.push_back(kc.kc);
    }
    return out;
}

inline Overview overview(const EncodedDataset& ds, const ModelParams* params = nullptr) {
    Overview o;
    o.students = ds.num_students();
    o.items = ds.num_items();
    o.kcs = ds.num_kcs();
    o.records = ds.records.size();
    double correct = 0.0;
    for (const auto& r : ds.records) correct += r.correct;
    o.class_accuracy = ds.records.empty() ? 0.0 : correct / static_cast<double>(ds.records.size());
    o.item_accuracy_histogram.assign(10, 0);
    for (const auto& st : item_stats(ds)) {
        if (!st.accuracy) continue;
        const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(*st.accuracy * 10.0));
        ++o.item_accuracy_histogram[bin];
    }
    o.kc_weights = kc_weights(ds.qmatrix);
    if (params) {
        std::vector<double> means;
        for (const auto& kc : kc_stats(ds, params)) means.push_back(kc.class_mean_mastery.value_or(0.5));
        o.class_mean_mastery = std::move(means);
    }
    return o;
}

// ---------------------------------------------------------------------------
// Teaching suggestions.

enum class Scope { class_, student, item, kc };

inline std::string_view to_string(Scope s) {
    switch (s) {
        case Scope::class_: return "class";
        case Scope::student: return "student";
        case Scope::item: return "item";
        case Scope::kc: return "kc";
    }
    return "class";
}

struct SuggestionTemplate {
    std::string id;
    Scope scope;
    std::string pattern;  // {name} placeholders filled from the trigger snapshot
};

struct Suggestion {
    Scope scope;
    std::string template_id;
    std::string text;
    std::vector<std::pair<std::string, std::string>> snapshot;

    bool operator==(const Suggestion&) const = default;
};

/// Rules fire in table order. Ids are the rule keys; patterns may be reworded.
inline std::vector<SuggestionTemplate> default_templates() {
    return {
        {"class_reteach_kc", Scope::class_,
         "Class-wide weakness in {kc} (mean mastery {mastery}); plan a whole-class review."},
        {"kc_topic_alignment", Scope::kc,
         "Only {accuracy} of answers on {kc} questions are correct; check whether the topic was taught as assessed."},
        {"item_exceeds_ability", Scope::item,
         "Question {item} is much harder than the class level (difficulty {difficulty}, gap {gap}); it may exceed "
         "the current scope."},
        {"item_common_distractor", Scope::item,
         "{count} of {wrong} students who missed {item} chose {option}; discuss the misconception behind it."},
        {"item_negative_discrimination", Scope::item,
         "Question {item} favors weaker students (discrimination {discrimination}); review its wording and key."},
        {"student_reteach_kc", Scope::student, "Reteach {kc} with {student} (mastery {mastery})."},
        {"student_below_class", Scope::student,
         "{student} is {gap} below the class mean on {kc}; consider individual follow-up."},
    };
}

inline std::string render_suggestion(const std::string& pattern,
                                     const std::vector<std::pair<std::string, std::string>>& snapshot) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] == '{') {
            const auto close = pattern.find('}', i);
            if (close != std::string::npos) {
                const std::string key = pattern.substr(i + 1, close - i - 1);
                auto it = std::find_if(snapshot.begin(), snapshot.end(), [&](const auto& kv) { return kv.first == key; });
                if (it != snapshot.end()) {
                    out += it->second;
                    i = close;
                    continue;
                }
            }
        }
        out.push_back(pattern[i]);
    }
    return out;
}

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Everything the suggestion rules read.
struct StatsBundle {
    std::vector<std::string> student_ids;
    std::vector<std::string> item_ids;
    std::vector<std::string> kc_ids;
    std::vector<ItemStats> items;
    std::vector<KCStats> kcs;
    ErrorPatterns errors;
    ClassComparison comparison;
    Matrix mastery;  // N x K
};

inline StatsBundle compute_stats(const EncodedDataset& ds, const ModelParams& params,
                                 const ComparisonThresholds& thresholds = {}) {
    StatsBundle b;
    b.student_ids = ds.student_ids;
    b.item_ids = ds.item_ids();
    b.kc_ids = ds.kc_ids();
    b.items = item_stats(ds, &params);
    b.kcs = kc_stats(ds, &params);
    b.errors = error_patterns(ds);
    b.comparison = compare(ds, params, thresholds);
    b.mastery = student_mastery(ds, params);
    return b;
}

/// Walks the template table in order and emits one suggestion per trigger.
/// Unknown template ids are ignored; nothing is emitted when no rule fires.
inline std::vector<Suggestion> suggest(const StatsBundle& b,
                                       const std::vector<SuggestionTemplate>& templates = default_templates(),
                                       const MasteryBands& bands = {}) {
    std::vector<Suggestion> out;
    auto emit = [&](const SuggestionTemplate& t, std::vector<std::pair<std::string, std::string>> snap) {
        out.push_back({t.scope, t.id, render_suggestion(t.pattern, snap), std::move(snap)});
    };
    for (const auto& t : templates) {
        if (t.id == "class_reteach_kc") {
            for (const auto& kc : b.kcs)
                if (kc.class_mean_mastery && bands.classify(*kc.class_mean_mastery) == Band::weak)
                    emit(t, {{"kc", b.kc_ids[kc.kc]}, {"mastery", percent(*kc.class_mean_mastery)}});
        } else if (t.id == "kc_topic_alignment") {
            for (std::size_t k : b.comparison.class_wide_low_kcs)
                emit(t, {{"kc", b.kc_ids[k]}, {"accuracy", percent(b.kcs[k].accuracy.value_or(0.0))}});
        } else if (t.id == "item_exceeds_ability") {
            for (const auto& g : b.comparison.items)
                if (g.exceeds_class_ability)
                    emit(t, {{"item", b.item_ids[g.item]},
                             {"difficulty", fixed2(b.items[g.item].difficulty_classical.value_or(0.0))},
                             {"gap", fixed2(g.gap.value_or(0.0))}});
        } else if (t.id == "item_common_distractor") {
            for (const auto& p : b.errors.items) {
                if (p.distractors.empty()) continue;
                const auto& [option, count] = p.distractors.front();
                if (count >= 2 && 2 * count >= p.wrong)
                    emit(t, {{"item", b.item_ids[p.item]},
                             {"option", option},
                             {"count", std::to_string(count)},
                             {"wrong", std::to_string(p.wrong)}});
            }
        } else if (t.id == "item_negative_discrimination") {
            for (const auto& st : b.items)
                if (st.discrimination_pb && *st.discrimination_pb < 0.0)
                    emit(t, {{"item", b.item_ids[st.item]}, {"discrimination", fixed2(*st.discrimination_pb)}});
        } else if (t.id == "student_reteach_kc") {
            for (std::size_t s = 0; s < b.mastery.rows(); ++s)
                for (std::size_t k = 0; k < b.mastery.cols(); ++k)
                    if (bands.classify(b.mastery(s, k)) == Band::weak)
                        emit(t, {{"student", b.student_ids[s]}, {"kc", b.kc_ids[k]}, {"mastery", percent(b.mastery(s, k))}});
        } else if (t.id == "student_below_class") {
            for (const auto& d : b.comparison.students)
                for (std::size_t k : d.below_class)
                    emit(t, {{"student", b.student_ids[d.student]}, {"kc", b.kc_ids[k]}, {"gap", percent(-d.delta[k])}});
        }
    }
    return out;
}

}  // namespace cogdiag

#endif  // COGDIAG_ANALYTICS_HPP
