#ifndef COGDIAG_SYNTH_HPP
#define COGDIAG_SYNTH_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/ingest.hpp"

namespace cogdiag {

struct SynthConfig {
    std::size_t N = 40;
    std::size_t M = 125;
    std::size_t K = 5;
    std::size_t items_per_kc = 25;
    double slip = 0.1;
    double guess = 0.15;
    std::uint64_t seed = 0;
};

struct GroundTruth {
    Matrix true_mastery;   // N x K
    QMatrix qmatrix;
    Matrix probabilities;  // N x M

    bool operator==(const GroundTruth&) const = default;
};

/// Builds the Q-matrix by round-robin assignment of KC slots to items.
///
/// There are L = max(M, items_per_kc * K) slots; slot j is KC (j mod K).
/// The first L - M items take two consecutive slots, the rest take one, so
/// every item measures 1 or 2 distinct KCs and each KC receives
/// items_per_kc items whenever M <= items_per_kc * K.
inline QMatrix round_robin_qmatrix(const SynthConfig& c) {
    if (c.N < 1 || c.M < 1 || c.K < 1 || c.items_per_kc < 1) {
        throw Error(ErrorCode::InfeasibleConfig, "N, M, K and items_per_kc must all be >= 1");
    }
    const std::size_t slots = std::max(c.M, c.items_per_kc * c.K);
    const std::size_t doubles = slots - c.M;
    if (doubles > c.M || (doubles > 0 && c.K < 2)) {
        throw Error(ErrorCode::InfeasibleConfig,
                    "M=" + std::to_string(c.M) + " is too small for " + std::to_string(c.items_per_kc) +
                        " items per KC across K=" + std::to_string(c.K) + " KCs (need M >= " +
                        std::to_string((c.items_per_kc * c.K + 1) / 2) + ")");
    }
    std::vector<std::string> items, kcs;
    for (std::size_t e = 0; e < c.M; ++e) items.push_back("i" + std::to_string(e + 1));
    for (std::size_t k = 0; k < c.K; ++k) kcs.push_back("kc" + std::to_string(k + 1));
    std::vector<std::uint8_t> q(c.M * c.K, 0);
    std::size_t slot = 0;
    for (std::size_t e = 0; e < c.M; ++e) {
        const std::size_t take = e < doubles ? 2 : 1;
        for (std::size_t t = 0; t < take; ++t, ++slot) q[e * c.K + slot % c.K] = 1;
    }
    return QMatrix(std::move(items), std::move(kcs), std::move(q));
}

/// Probability of a correct answer under the noisy-conjunctive generator.
inline double response_probability(std::span<const double> mastery, std::span<const std::uint8_t> q_row, double slip,
                                   double guess) {
    double prod = 1.0;
    for (std::size_t k = 0; k < q_row.size(); ++k)
        if (q_row[k]) prod *= mastery[k];
    return guess + (1.0 - slip - guess) * prod;
}

/// Draws a full response matrix (student-major) from the generating probabilities.
inline std::vector<int> sample_responses(const GroundTruth& truth, Rng& rng) {
    std::vector<int> out(truth.probabilities.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.bernoulli(truth.probabilities.data()[i]) ? 1 : 0;
    return out;
}

inline std::pair<GroundTruth, EncodedDataset> generate(const SynthConfig& c) {
    if (!(c.slip >= 0.0 && c.slip < 0.5) || !(c.guess >= 0.0 && c.guess < 0.5)) {
        throw Error(ErrorCode::InfeasibleConfig, "slip and guess must lie in [0, 0.5)");
    }
    GroundTruth truth;
    truth.qmatrix = round_robin_qmatrix(c);
    Rng rng(c.seed);
    truth.true_mastery = Matrix(c.N, c.K);
    for (double& v : truth.true_mastery.data()) v = rng.uniform(0.05, 0.95);
    truth.probabilities = Matrix(c.N, c.M);
    for (std::size_t s = 0; s < c.N; ++s)
        for (std::size_t e = 0; e < c.M; ++e)
            truth.probabilities(s, e) =
                response_probability(truth.true_mastery.row(s), truth.qmatrix.row(e), c.slip, c.guess);

    const auto responses = sample_responses(truth, rng);
    std::vector<ResponseRecord> records;
    records.reserve(c.N * c.M);
    for (std::size_t s = 0; s < c.N; ++s)
        for (std::size_t e = 0; e < c.M; ++e)
            records.push_back({"s" + std::to_string(s + 1), truth.qmatrix.item_ids()[e], responses[s * c.M + e],
                               std::nullopt, 0});
    auto encoded = encode(records, truth.qmatrix);
    return {std::move(truth), std::move(*encoded.dataset)};
}

struct RecoveryMetrics {
    std::vector<double> spearman;          // per KC
    std::vector<double> mean_abs_dev;      // per KC
    std::vector<double> alignment_per_kc;  // per KC, concordant / comparable pairs
    double alignment = 0.0;                // pooled over KCs
};

namespace detail {

/// 1-based average ranks (ties share their mean rank).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return detail::pearson(detail::average_ranks(x), detail::average_ranks(y));
}

/// Per-student correctness rate on the items measuring each KC (N x K).
/// Students without responses on a KC's items get NaN.
inline Matrix kc_correctness(const EncodedDataset& ds) {
    const std::size_t N = ds.num_students(), K = ds.num_kcs();
    Matrix hits(N, K), seen(N, K);
    for (const auto& r : ds.records)
        for (std::size_t k = 0; k < K; ++k)
            if (ds.qmatrix(r.item, k)) {
                seen(r.student, k) += 1.0;
                hits(r.student, k) += r.correct;
            }
    Matrix rate(N, K);
    for (std::size_t i = 0; i < rate.size(); ++i)
        rate.data()[i] = seen.data()[i] > 0 ? hits.data()[i] / seen.data()[i] : std::nan("");
    return rate;
}

/// Compares estimated mastery (N x K) with the generator's truth.
///
/// Alignment: over student pairs within a KC, the fraction whose estimated
/// mastery order agrees with their empirical correctness order. Pairs tied on
/// either quantity (or lacking evidence) are not comparable and are skipped.
inline RecoveryMetrics recovery_metrics(const GroundTruth& truth, const EncodedDataset& ds,
                                        const Matrix& estimated) {
    const std::size_t N = truth.true_mastery.rows(), K = truth.true_mastery.cols();
    if (estimated.rows() != N || estimated.cols() != K || ds.num_students() != N || ds.num_kcs() != K) {
        throw Error(ErrorCode::ShapeMismatch, "estimated mastery must be N x K matching the ground truth");
    }
    const Matrix rate = kc_correctness(ds);
    RecoveryMetrics m;
    std::size_t concordant_total = 0, comparable_total = 0;
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> est(N), tru(N);
        double mad = 0.0;
        for (std::size_t s = 0; s < N; ++s) {
            est[s] = estimated(s, k);
            tru[s] = truth.true_mastery(s, k);
            mad += std::abs(est[s] - tru[s]);
        }
        m.spearman.push_back(spearman(est, tru));
        m.mean_abs_dev.push_back(mad / static_cast<double>(N));

        std::size_t concordant = 0, comparable = 0;
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = a + 1; b < N; ++b) {
                const double dr = rate(a, k) - rate(b, k);
                const double de = est[a] - est[b];
                if (std::isnan(dr) || dr == 0.0 || de == 0.0) continue;
                ++comparable;
                if ((dr > 0) == (de > 0)) ++concordant;
            }
        m.alignment_per_kc.push_back(comparable ? static_cast<double>(concordant) / comparable : 1.0);
        concordant_total += concordant;
        comparable_total += comparable;
    }
    m.alignment = comparable_total ? static_cast<double>(concordant_total) / comparable_total : 1.0;
    return m;
}

}  // namespace cogdiag

#endif  // COGDIAG_SYNTH_HPP
