#ifndef COGDIAG_TESTS_SUPPORT_HPP
#define COGDIAG_TESTS_SUPPORT_HPP

#include <cmath>
#include <string>
#include <vector>

#include "cogdiag/cogdiag.hpp"

namespace testing_support {

using namespace cogdiag;

inline std::string fixture(const std::string& name) { return read_file(std::string(COGDIAG_FIXTURE_DIR) + "/" + name); }

inline EncodedDataset fixture_dataset(const std::string& responses, const std::string& qmatrix) {
    auto r = load_dataset(fixture(responses), fixture(qmatrix));
    if (!r.dataset) throw std::runtime_error("fixture failed validation: " + responses);
    return std::move(*r.dataset);
}

/// Random Q-matrix with at least one KC per item.
inline QMatrix random_qmatrix(std::size_t M, std::size_t K, Rng& rng) {
    std::vector<std::string> items, kcs;
    for (std::size_t e = 0; e < M; ++e) items.push_back("i" + std::to_string(e + 1));
    for (std::size_t k = 0; k < K; ++k) kcs.push_back("kc" + std::to_string(k + 1));
    std::vector<std::uint8_t> q(M * K, 0);
    for (std::size_t e = 0; e < M; ++e) {
        bool any = false;
        for (std::size_t k = 0; k < K; ++k) {
            q[e * K + k] = rng.bernoulli(0.5);
            any = any || q[e * K + k];
        }
        if (!any) q[e * K + rng.index(K)] = 1;
    }
    return QMatrix(items, kcs, q);
}

/// Random parameters; W entries nonnegative when `projected`.
inline ModelParams random_model(std::size_t N, std::size_t M, std::size_t K, std::size_t H1, std::size_t H2,
                                Rng& rng, double scale = 1.0, bool projected = true,
                                DiscriminationMode mode = DiscriminationMode::scalar) {
    std::vector<std::string> students;
    for (std::size_t s = 0; s < N; ++s) students.push_back("s" + std::to_string(s + 1));
    HyperParams hp;
    hp.H1 = H1;
    hp.H2 = H2;
    hp.discrimination_mode = mode;
    auto p = ModelParams::zeros(hp, random_qmatrix(M, K, rng), students);
    for (Matrix* m : {&p.A, &p.B, &p.D})
        for (auto& v : m->data()) v = rng.uniform(-2.0, 2.0);
    for (Matrix* m : {&p.W1, &p.W2, &p.W3})
        for (auto& v : m->data()) v = projected ? rng.uniform(0.0, scale) : rng.uniform(-scale, scale);
    for (auto& v : p.b1) v = rng.uniform(-0.5, 0.5);
    for (auto& v : p.b2) v = rng.uniform(-0.5, 0.5);
    p.b3 = rng.uniform(-0.5, 0.5);
    return p;
}

inline bool fd_close(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-8) {
    if (std::abs(analytic) < abs_floor && std::abs(numeric) < abs_floor) return std::abs(analytic - numeric) < abs_floor;
    return std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric)) < rel;
}

}  // namespace testing_support

#endif  // COGDIAG_TESTS_SUPPORT_HPP
