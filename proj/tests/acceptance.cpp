// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>

#include "cogdiag/cli.hpp"
#include "support.hpp"

using namespace cogdiag;
using testing_support::random_model;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <typename Fn>
double seconds(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::vector<double> random_mastery(std::size_t K, Rng& rng) {
    std::vector<double> h(K);
    for (auto& v : h) v = rng.uniform(0.02, 0.98);
    return h;
}

std::vector<StudentResponse> random_responses(const ModelParams& p, Rng& rng) {
    std::vector<StudentResponse> rs;
    for (std::size_t e = 0; e < p.num_items(); ++e)
        if (rng.bernoulli(0.8)) rs.push_back({e, static_cast<int>(rng.index(2))});
    if (rs.empty()) rs.push_back({0, 1});
    return rs;
}

void gradient_correctness() {
    Rng rng(101);
    int models = 0, bad = 0;
    double worst = 0.0;
    const double t = seconds([&] {
        for (; models < 30; ++models) {
            const std::size_t N = 1 + rng.index(5), M = 1 + rng.index(6), K = 1 + rng.index(3);
            const auto mode = models % 3 == 2 ? DiscriminationMode::per_kc : DiscriminationMode::scalar;
            auto p = random_model(N, M, K, 1 + rng.index(4), 1 + rng.index(3), rng, 1.5, true, mode);
            std::vector<Observation> pairs;
            const std::size_t n = 1 + rng.index(10);
            for (std::size_t i = 0; i < n; ++i)
                pairs.push_back({rng.index(N), rng.index(M), static_cast<int>(rng.index(2))});
            auto g = gradients(p, pairs);
            detail::for_each_tensor(p, g, [&](std::span<double> w, std::span<double> dw) {
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double saved = w[i];
                    w[i] = saved + 1e-5;
                    const double up = loss(p, pairs);
                    w[i] = saved - 1e-5;
                    const double down = loss(p, pairs);
                    w[i] = saved;
                    const double numeric = (up - down) / 2e-5;
                    if (!testing_support::fd_close(dw[i], numeric)) ++bad;
                    const double scale = std::max(std::abs(dw[i]), std::abs(numeric));
                    if (scale >= 1e-8) worst = std::max(worst, std::abs(dw[i] - numeric) / scale);
                }
            });
        }
    });
    report("gradient-correctness", bad == 0 && models >= 20 && t < 10.0,
           fmt("%.0f models, %.0f mismatches, max rel err %.2e, %.2f s", models, bad, worst, t));
}

void monotonicity() {
    Rng rng(102);
    int violations = 0, mask_breaks = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto mode = trial % 2 ? DiscriminationMode::per_kc : DiscriminationMode::scalar;
        const auto p = random_model(1, 3, 4, 1 + rng.index(6), 1 + rng.index(6), rng, 3.0, true, mode);
        const auto h = random_mastery(4, rng);
        const std::size_t e = rng.index(3);
        const auto f = item_factors(p, e);
        std::vector<std::size_t> required;
        for (std::size_t k = 0; k < 4; ++k)
            if (f.q_e[k]) required.push_back(k);
        const std::size_t k = required[rng.index(required.size())];
        auto raised = h;
        raised[k] = rng.uniform(h[k], 0.999);
        if (predict(p, raised, e).y < predict(p, h, e).y) ++violations;

        auto masked = h;
        for (std::size_t j = 0; j < 4; ++j)
            if (!f.q_e[j]) masked[j] = rng.uniform(0.01, 0.99);
        const auto a = predict(p, h, e), b = predict(p, masked, e);
        if (a.y != b.y || a.x != b.x) ++mask_breaks;
    }
    report("monotonicity", violations == 0 && mask_breaks == 0,
           fmt("1000 trials, %.0f violations, %.0f masking differences", violations, mask_breaks));
}

void nonnegativity() {
    SynthConfig c;
    c.N = 20;
    c.M = 30;
    c.K = 3;
    c.items_per_kc = 10;
    c.seed = 103;
    const auto ds = generate(c).second;
    TrainConfig tc;
    tc.epochs = 50;
    std::size_t steps = 0;
    double worst = std::numeric_limits<double>::infinity();
    tc.on_step = [&](const ModelParams& p, std::size_t) {
        ++steps;
        worst = std::min(worst, p.min_weight());
    };
    const auto [p, r] = fit(ds, tc);
    report("nonnegativity", worst >= 0.0 && steps == r.steps_run && r.epochs_run == 50,
           fmt("%.0f optimizer steps over 50 epochs, min weight %.3g", steps, worst));
}

void posterior_optimality() {
    Rng rng(104);
    int ok = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    const double t = seconds([&] {
        for (int trial = 0; trial < 20; ++trial) {
            const auto p = random_model(1, 4 + rng.index(9), 2, 4, 3, rng, 1.0 + rng.uniform(0.0, 3.0));
            const auto rs = random_responses(p, rng);
            const double got = diagnose(p, rs).final_loss;
            double best = std::numeric_limits<double>::infinity();
            for (int i = -30; i <= 30; ++i)
                for (int j = -30; j <= 30; ++j) {
                    const std::vector<double> u{i / 10.0, j / 10.0};
                    best = std::min(best, student_objective(p, u, rs).loss);
                }
            ok += got <= best + 1e-3;
            worst_gap = std::max(worst_gap, got - best);
        }
    });
    report("posterior-optimality", ok == 20 && t < 30.0,
           fmt("%.0f/20 within 1e-3 of grid, worst gap %.2e, %.2f s", ok, worst_gap, t));
}

void explanation_identities() {
    Rng rng(105);
    int broken = 0, trials = 0;
    for (; trials < 200; ++trials) {
        const auto p = random_model(2, 6, 3, 4, 3, rng, 2.5);
        const auto before = p;
        const auto a = random_responses(p, rng), b = random_responses(p, rng);

        const auto same = contrastive(p, {a, a, {}});
        for (double d : same.delta) broken += d != 0.0;
        const auto ab = contrastive(p, {a, b, {}}), ba = contrastive(p, {b, a, {}});
        for (std::size_t k = 0; k < 3; ++k) broken += ab.delta[k] != -ba.delta[k];

        CounterfactualQuery q;
        q.base_mastery = random_mastery(3, rng);
        const auto cf = counterfactual(p, q);
        for (const auto& pred : cf.predictions) broken += pred.y != predict(p, q.base_mastery, pred.item).y;
        q.overrides[rng.index(3)] = rng.uniform(0.01, 0.99);
        counterfactual(p, q);
        broken += !(p == before);
    }
    report("explanation-identities", broken == 0,
           fmt("%.0f random models, %.0f identity or mutation failures", trials, broken));
}

struct Recovery {
    GroundTruth truth;
    EncodedDataset ds;
    ModelParams params;
    double train_seconds = 0.0;
};

Recovery train_recovery() {
    SynthConfig c;  // N=40, K=5, items_per_kc=25, M=125
    c.seed = 106;
    Recovery r;
    std::tie(r.truth, r.ds) = generate(c);
    r.train_seconds = seconds([&] { r.params = fit(r.ds, TrainConfig{}).first; });
    return r;
}

void flip_behavior(const Recovery& t) {
    const auto& p = t.params;
    Rng rng(107);
    int raised = 0, trials = 0;
    while (trials < 100) {
        const std::size_t s = rng.index(t.ds.num_students());
        std::vector<StudentResponse> base;
        for (const auto& r : t.ds.records)
            if (r.student == s) base.push_back({r.item, r.correct});
        std::vector<std::size_t> wrong;
        for (const auto& r : base)
            if (!r.correct) wrong.push_back(r.item);
        if (wrong.empty()) continue;
        ++trials;
        const std::size_t e = wrong[rng.index(wrong.size())];
        const auto r = contrastive(p, {base, FlipItems{{e}}, {}});
        bool up = true;
        for (std::size_t k = 0; k < p.num_kcs(); ++k)
            if (p.qmatrix(e, k) && r.delta[k] < -1e-9) up = false;
        raised += up;
    }

    int violations = 0, checks = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        CounterfactualQuery q;
        q.base_mastery = random_mastery(p.num_kcs(), rng);
        const std::size_t k = rng.index(p.num_kcs());
        const auto base = counterfactual(p, q);
        q.overrides[k] = rng.uniform(0.01, q.base_mastery[k]);
        const auto lowered = counterfactual(p, q);
        for (std::size_t i = 0; i < base.predictions.size(); ++i) {
            if (!p.qmatrix(base.predictions[i].item, k)) continue;
            ++checks;
            violations += lowered.predictions[i].y > base.predictions[i].y;
        }
    }
    report("flip-and-counterfactual", raised >= 95 && violations == 0,
           fmt("flip raised required KCs in %.0f/100 trials; lowering: %.0f violations over %.0f dependent items", raised,
               violations, checks));
}

void recovery(const Recovery& t) {
    const auto m = recovery_metrics(t.truth, t.ds, student_mastery(t.ds, t.params));
    int strong = 0;
    std::string rhos;
    for (double r : m.spearman) {
        strong += r >= 0.7;
        rhos += fmt("%.3f ", r);
    }
    report("parameter-recovery", strong >= 4 && m.alignment >= 0.8 && t.train_seconds < 300.0,
           "spearman " + rhos + fmt("(%.0f/5 >= 0.7), alignment %.3f, fit %.1f s", strong, m.alignment, t.train_seconds));
}

// Independent recomputation of every classical statistic from a dense matrix.
int analytics_mismatches(const EncodedDataset& ds) {
    int bad = 0;
    const std::size_t N = ds.num_students(), M = ds.num_items(), K = ds.num_kcs();
    std::vector<std::vector<int>> x(N, std::vector<int>(M, -1));
    std::vector<std::vector<std::string>> opt(N, std::vector<std::string>(M));
    for (const auto& r : ds.records) {
        x[r.student][r.item] = r.correct;
        if (r.option) opt[r.student][r.item] = *r.option;
    }
    std::vector<double> total(N, 0.0);
    for (std::size_t s = 0; s < N; ++s)
        for (std::size_t e = 0; e < M; ++e) total[s] += std::max(x[s][e], 0);
    auto near = [&](double a, double b) { bad += !(std::abs(a - b) <= 1e-9); };

    const auto items = item_stats(ds);
    for (std::size_t e = 0; e < M; ++e) {
        std::size_t seen = 0, right = 0;
        double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
        for (std::size_t s = 0; s < N; ++s) {
            if (x[s][e] < 0) continue;
            ++seen;
            right += x[s][e];
            const double a = x[s][e], b = total[s] - x[s][e];
            sx += a;
            sy += b;
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        bad += items[e].respondents != seen;
        bad += items[e].correct != right;
        if (seen == 0) {
            bad += items[e].accuracy.has_value();
            continue;
        }
        near(*items[e].accuracy, static_cast<double>(right) / seen);
        near(*items[e].difficulty_classical, 1.0 - static_cast<double>(right) / seen);
        const double n = static_cast<double>(seen);
        const double vx = n * sxx - sx * sx, vy = n * syy - sy * sy;
        if (seen >= 2 && vx > 0 && vy > 0) {
            if (!items[e].discrimination_pb) {
                ++bad;
            } else {
                near(*items[e].discrimination_pb, (n * sxy - sx * sy) / std::sqrt(vx * vy));
            }
        } else {
            bad += items[e].discrimination_pb.has_value();
        }
    }

    std::size_t ones = 0;
    for (std::size_t e = 0; e < M; ++e)
        for (std::size_t k = 0; k < K; ++k) ones += ds.qmatrix(e, k);
    const auto weights = kc_weights(ds.qmatrix);
    double weight_sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t links = 0;
        for (std::size_t e = 0; e < M; ++e) links += ds.qmatrix(e, k);
        near(weights[k], static_cast<double>(links) / ones);
        weight_sum += weights[k];
    }
    near(weight_sum, 1.0);

    const auto ep = error_patterns(ds);
    std::size_t with_options = 0;
    for (std::size_t e = 0; e < M; ++e) {
        std::map<std::string, std::size_t> counts;
        std::size_t wrong = 0;
        bool any_option = false;
        for (std::size_t s = 0; s < N; ++s) {
            if (x[s][e] < 0) continue;
            any_option |= !opt[s][e].empty();
            if (x[s][e] == 0) {
                ++wrong;
                if (!opt[s][e].empty()) ++counts[opt[s][e]];
            }
        }
        if (!any_option) continue;
        ++with_options;
        auto it = std::find_if(ep.items.begin(), ep.items.end(), [&](const auto& p) { return p.item == e; });
        if (it == ep.items.end()) {
            ++bad;
            continue;
        }
        bad += it->wrong != wrong;
        bad += std::map<std::string, std::size_t>(it->distractors.begin(), it->distractors.end()) != counts;
    }
    bad += ep.items.size() != with_options;
    return bad;
}

EncodedDataset random_dataset(std::size_t N, std::size_t M, std::size_t K, Rng& rng) {
    const auto q = testing_support::random_qmatrix(M, K, rng);
    std::vector<ResponseRecord> records;
    const double density = rng.uniform(0.3, 1.0);
    for (std::size_t s = 0; s < N; ++s)
        for (std::size_t e = 0; e < M; ++e) {
            if (!rng.bernoulli(density)) continue;
            ResponseRecord r{"s" + std::to_string(s), q.item_ids()[e], static_cast<int>(rng.index(2)), {}, 0};
            if (e % 3) r.selected_option = std::string(1, static_cast<char>('A' + rng.index(4)));
            records.push_back(r);
        }
    if (records.empty()) records.push_back({"s0", q.item_ids()[0], 1, {}, 0});
    return *encode(records, q).dataset;
}

std::string fx(const std::string& name) { return std::string(COGDIAG_FIXTURE_DIR) + "/" + name; }

void analytics_oracle() {
    int bad = 0, datasets = 0;
    std::size_t largest = 0;
    auto check = [&](const EncodedDataset& ds) {
        bad += analytics_mismatches(ds);
        ++datasets;
        largest = std::max(largest, ds.records.size());
    };
    check(testing_support::fixture_dataset("responses_2x3.csv", "qmatrix_3x2.csv"));
    check(testing_support::fixture_dataset("responses_options.csv", "qmatrix_options.csv"));
    check(*load_dataset(read_file(fx("class_responses.csv")), read_file(fx("class_qmatrix.csv"))).dataset);
    Rng rng(108);
    for (int i = 0; i < 60; ++i) check(random_dataset(2 + rng.index(40), 1 + rng.index(25), 1 + rng.index(4), rng));
    report("analytics-oracle", bad == 0 && largest <= 1000,
           fmt("%.0f datasets (largest %.0f records), %.0f mismatches", datasets, largest, bad));
}

struct CliRun {
    int code;
    std::string out;
};

CliRun cli_run(std::vector<std::string> args) {
    args.insert(args.begin(), "cogdiag");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str()};
}

void cross_surface() {
    const auto dir = fs::temp_directory_path() / "cogdiag_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    struct Fixture {
        std::string responses, qmatrix;
    };
    const std::vector<Fixture> fixtures{{"responses_2x3.csv", "qmatrix_3x2.csv"},
                                        {"responses_options.csv", "qmatrix_options.csv"},
                                        {"class_responses.csv", "class_qmatrix.csv"}};
    int compared = 0, differing = 0;
    bool byte_identical = true;
    auto same = [&](bool eq) {
        ++compared;
        differing += !eq;
    };
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        const auto responses = fx(fixtures[f].responses), qmatrix = fx(fixtures[f].qmatrix);
        const auto model = (dir / ("model" + std::to_string(f) + ".json")).string();
        const auto copy = (dir / ("copy" + std::to_string(f) + ".json")).string();
        const auto trained = cli_run({"train", "--responses", responses, "--qmatrix", qmatrix, "--out", model, "--seed", "11"});
        cli_run({"train", "--responses", responses, "--qmatrix", qmatrix, "--out", copy, "--seed", "11"});
        byte_identical = byte_identical && trained.code == 0 && read_file(model) == read_file(copy);

        Api api;
        const auto d = api.create_dataset(read_file(responses), read_file(qmatrix));
        const auto m = api.create_model({{"dataset_id", d.body["dataset_id"]}, {"config", {{"seed", 11}}}});
        const std::string id = m.body["model_id"];
        same(Json::parse(trained.out) == m.body["train_report"]);
        same(Json::parse(read_file(model)) == api.get_model(id).body);

        const auto params = model_from_json(api.get_model(id).body);
        const auto csv = read_file(responses);
        const auto rows = parse_responses(csv);
        for (const auto& student : params.student_ids) {
            Json rs = Json::array();
            for (const auto& r : rows)
                if (r.student_id == student) rs.push_back({{"item_id", r.item_id}, {"correct", r.correct}});
            const std::vector<std::string> who{"--model", model, "--responses", responses, "--student", student};

            auto args = who;
            args.insert(args.begin(), "diagnose");
            same(cli_run(args).out == api.diagnose(id, {{"responses", rs}}).body.dump(2) + "\n");

            args = who;
            args.insert(args.begin(), {"explain", "contrastive"});
            const std::string flip = rs[0]["item_id"];
            args.insert(args.end(), {"--flip", flip});
            same(cli_run(args).out == api.contrastive(id, {{"responses", rs}, {"flip_items", {flip}}}).body.dump(2) + "\n");

            args = who;
            args.insert(args.begin(), {"explain", "counterfactual"});
            const std::string kc = params.qmatrix.kc_ids()[0];
            args.insert(args.end(), {"--set", kc + "=0.3"});
            const Json body{{"base", {{"responses", rs}}}, {"overrides", {{kc, 0.3}}}};
            same(cli_run(args).out == api.counterfactual(id, body).body.dump(2) + "\n");
        }
        const auto rep = Json::parse(cli_run({"report", "--model", model, "--responses", responses}).out);
        for (const char* view : {"overview", "items", "kcs", "comparison", "suggestions"})
            same(rep[view] == api.analytics(id, view).body);
    }
    fs::remove_all(dir);
    report("cross-surface-determinism", differing == 0 && byte_identical,
           fmt("%.0f CLI/service payload pairs over 3 fixtures, %.0f differ; model.json byte-identical: %s", compared,
               differing) +
               (byte_identical ? "yes" : "no"));
}

}  // namespace

int main() {
    const auto run = [](const char* name, const std::function<void()>& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(name, false, std::string("threw: ") + e.what());
        }
    };
    run("gradient-correctness", gradient_correctness);
    run("monotonicity", monotonicity);
    run("nonnegativity", nonnegativity);
    run("posterior-optimality", posterior_optimality);
    run("explanation-identities", explanation_identities);
    Recovery trained;
    run("parameter-recovery", [&] { trained = train_recovery(); });
    run("flip-and-counterfactual", [&] { flip_behavior(trained); });
    run("parameter-recovery", [&] { recovery(trained); });
    run("analytics-oracle", analytics_oracle);
    run("cross-surface-determinism", cross_surface);
    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
