#ifndef COGDIAG_CLI_HPP
#define COGDIAG_CLI_HPP

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cogdiag/http.hpp"
#include "cogdiag/io.hpp"
#include "cogdiag/service.hpp"

namespace cogdiag::cli {

enum ExitStatus : int { ok = 0, validation_failure = 1, runtime_error = 2, bad_usage = 3 };

inline const char* version_string() { return "cogdiag 1.0.0 (model format_version 1)"; }

namespace detail {

inline std::vector<std::string> split_list(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& chunk : raw) {
        std::size_t start = 0;
        while (start <= chunk.size()) {
            const auto comma = chunk.find(',', start);
            const auto token = chunk.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!token.empty()) out.push_back(token);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return out;
}

inline std::string sibling(const std::string& path, const std::string& name) {
    const auto parent = std::filesystem::path(path).parent_path();
    return (parent / name).string();
}

}  // namespace detail

/// Runs the command line. Data goes to `out`, diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Explainable cognitive diagnosis: train, diagnose, explain, report, simulate, serve", "cogdiag"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    // train
    std::string responses_path, qmatrix_path, items_path, out_path, report_path;
    TrainConfig train_config;
    std::string optimizer = "adam", disc_mode = "scalar";
    auto* train = app.add_subcommand("train", "Fit a diagnosis model to class response data");
    train->add_option("--responses", responses_path, "responses.csv")->required();
    train->add_option("--qmatrix", qmatrix_path, "qmatrix.csv")->required();
    train->add_option("--items", items_path, "optional items.csv");
    train->add_option("--out", out_path, "path of the model.json to write")->required();
    train->add_option("--report", report_path, "path of trainreport.json (default: next to --out)");
    train->add_option("--epochs", train_config.epochs, "training epochs")->capture_default_str();
    train->add_option("--lr", train_config.learning_rate, "learning rate")->capture_default_str();
    train->add_option("--seed", train_config.seed, "random seed")->capture_default_str();
    train->add_option("--h1", train_config.H1, "first hidden width")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--h2", train_config.H2, "second hidden width")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--batch-size", train_config.batch_size, "records per step, 0 = full batch")->capture_default_str();
    train->add_option("--holdout", train_config.holdout_fraction, "holdout fraction in [0, 0.5)")->capture_default_str();
    train->add_option("--init-scale", train_config.init_scale, "initialization scale")->capture_default_str();
    train->add_option("--optimizer", optimizer, "sgd or adam")->capture_default_str()->check(CLI::IsMember({"sgd", "adam"}));
    train->add_option("--discrimination", disc_mode, "scalar or per_kc")
        ->capture_default_str()
        ->check(CLI::IsMember({"scalar", "per_kc"}));

    // diagnose
    std::string model_path, student;
    PosteriorConfig posterior;
    auto* diag = app.add_subcommand("diagnose", "Estimate one student's mastery with the model frozen");
    diag->add_option("--model", model_path, "model.json")->required();
    diag->add_option("--responses", responses_path, "responses.csv containing the student's rows")->required();
    diag->add_option("--student", student, "student id")->required();

    // explain
    std::vector<std::string> flips_raw, sets_raw;
    double threshold = 0.5;
    auto* explain = app.add_subcommand("explain", "Contrastive or counterfactual explanation for one student");
    explain->require_subcommand(1);
    auto* con = explain->add_subcommand("contrastive", "Re-diagnose with some responses' correctness toggled");
    auto* cf = explain->add_subcommand("counterfactual", "Predict responses under asserted mastery values");
    for (auto* sub : {con, cf}) {
        sub->add_option("--model", model_path, "model.json")->required();
        sub->add_option("--responses", responses_path, "responses.csv")->required();
        sub->add_option("--student", student, "student id")->required();
    }
    for (auto* sub : {diag, con, cf}) {
        sub->add_option("--posterior-lr", posterior.learning_rate, "posterior step size")->capture_default_str();
        sub->add_option("--max-steps", posterior.max_steps, "posterior step budget")->capture_default_str();
        sub->add_option("--seed", posterior.seed, "random seed")->capture_default_str();
    }
    con->add_option("--flip", flips_raw, "ITEM[,ITEM...] whose correctness is toggled");
    cf->add_option("--set", sets_raw, "KC=VALUE[,KC=VALUE...] asserted mastery in (0, 1)");
    cf->add_option("--threshold", threshold, "probability cutoff for the binary pattern")->capture_default_str();

    // report
    std::string format = "json";
    auto* report = app.add_subcommand("report", "Class analytics and teaching suggestions");
    report->add_option("--model", model_path, "model.json")->required();
    report->add_option("--responses", responses_path, "responses.csv the model was trained on")->required();
    report->add_option("--items", items_path, "optional items.csv");
    report->add_option("--format", format, "json or md")->capture_default_str()->check(CLI::IsMember({"json", "md"}));

    // simulate
    SynthConfig synth;
    std::string out_dir;
    auto* simulate = app.add_subcommand("simulate", "Write a synthetic class with known mastery");
    simulate->add_option("--students", synth.N, "students")->required();
    simulate->add_option("--items", synth.M, "items")->required();
    simulate->add_option("--kcs", synth.K, "knowledge components")->required();
    simulate->add_option("--items-per-kc", synth.items_per_kc, "target items per KC")->capture_default_str();
    simulate->add_option("--slip", synth.slip, "slip probability")->capture_default_str();
    simulate->add_option("--guess", synth.guess, "guess probability")->capture_default_str();
    simulate->add_option("--seed", synth.seed, "random seed")->capture_default_str();
    simulate->add_option("--out", out_dir, "output directory")->required();

    // serve
    std::string host = "0.0.0.0", cors = "*", snapshot_dir;
    int port = 0;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service (port from --port or $PORT, default 8080)");
    serve->add_option("--host", host, "bind address")->capture_default_str();
    serve->add_option("--port", port, "listen port");
    serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value")->capture_default_str();
    serve->add_option("--snapshot-dir", snapshot_dir, "directory for POST /api/snapshot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : bad_usage;
    }

    auto emit = [&](const Json& j) { out << j.dump(2) << "\n"; };

    try {
        if (*train) {
            train_config.optimizer = optimizer_from_string(optimizer);
            train_config.discrimination_mode = discrimination_mode_from_string(disc_mode);
            std::optional<std::string> items_text;
            if (!items_path.empty()) items_text = read_file(items_path);
            const auto responses = read_file(responses_path);
            const auto qmatrix = read_file(qmatrix_path);
            auto loaded = load_dataset(responses, qmatrix,
                                       items_text ? std::optional<std::string_view>(*items_text) : std::nullopt);
            if (!loaded.dataset) {
                err << validation_report_to_json(loaded.report).dump(2) << "\n";
                return validation_failure;
            }
            for (const auto& w : loaded.report.warnings) err << "warning: " << w.code << ": " << w.message << "\n";
            auto [params, train_report] = fit(*loaded.dataset, train_config);
            write_file(out_path, model_to_json(params).dump(2) + "\n");
            const auto report_json = train_report_to_json(train_report);
            write_file(report_path.empty() ? detail::sibling(out_path, "trainreport.json") : report_path,
                       report_json.dump(2) + "\n");
            emit(report_json);
            return ok;
        }
        if (*diag) {
            const auto params = model_from_json(Json::parse(read_file(model_path)));
            auto responses = student_responses_from_csv(params, read_file(responses_path), student);
            emit(diagnose_payload(params, std::move(responses), posterior));
            return ok;
        }
        if (*explain) {
            const auto params = model_from_json(Json::parse(read_file(model_path)));
            auto responses = student_responses_from_csv(params, read_file(responses_path), student);
            if (*con) {
                ContrastiveQuery q;
                q.base_responses = std::move(responses);
                q.config = posterior;
                FlipItems flips;
                for (const auto& item : detail::split_list(flips_raw)) flips.items.push_back(item_index_of(params, item));
                q.variant = std::move(flips);
                emit(contrastive_payload(params, q));
            } else {
                CounterfactualQuery q;
                q.threshold = threshold;
                q.base_mastery = diagnose(params, std::move(responses), posterior).mastery;
                for (const auto& kv : detail::split_list(sets_raw)) {
                    const auto eq = kv.find('=');
                    if (eq == std::string::npos) {
                        err << "--set expects KC=VALUE, got '" << kv << "'\n" << cf->help();
                        return bad_usage;
                    }
                    double value = 0.0;
                    try {
                        std::size_t used = 0;
                        value = std::stod(kv.substr(eq + 1), &used);
                        if (used != kv.size() - eq - 1) throw std::invalid_argument("trailing");
                    } catch (const std::exception&) {
                        err << "--set value for '" << kv.substr(0, eq) << "' is not a number\n" << cf->help();
                        return bad_usage;
                    }
                    q.overrides[kc_index_of(params, kv.substr(0, eq))] = value;
                }
                emit(counterfactual_payload(params, q));
            }
            return ok;
        }
        if (*report) {
            const auto params = model_from_json(Json::parse(read_file(model_path)));
            ValidationReport warnings;
            auto records = parse_responses(read_file(responses_path), &warnings);
            std::vector<ItemInfo> items;
            if (!items_path.empty()) items = parse_items(read_file(items_path));
            auto encoded = encode(records, params.qmatrix, std::move(items));
            if (!encoded.dataset) {
                err << validation_report_to_json(encoded.report).dump(2) << "\n";
                return validation_failure;
            }
            const auto payload = report_payload(*encoded.dataset, params);
            if (format == "md") {
                out << report_markdown(payload);
            } else {
                emit(payload);
            }
            return ok;
        }
        if (*simulate) {
            auto [truth, dataset] = generate(synth);
            std::filesystem::create_directories(out_dir);
            const auto dir = std::filesystem::path(out_dir);
            write_file((dir / "responses.csv").string(), write_responses_csv(dataset));
            write_file((dir / "qmatrix.csv").string(), write_qmatrix_csv(dataset.qmatrix));
            write_file((dir / "groundtruth.json").string(),
                       ground_truth_to_json(truth, synth, dataset.student_ids).dump(2) + "\n");
            emit({{"out", out_dir},
                  {"files", {"responses.csv", "qmatrix.csv", "groundtruth.json"}},
                  {"N", synth.N},
                  {"M", synth.M},
                  {"K", synth.K},
                  {"records", dataset.records.size()}});
            return ok;
        }
        if (*serve) {
            if (port == 0) {
                const char* env = std::getenv("PORT");
                port = env ? std::atoi(env) : 8080;
            }
            Api api(snapshot_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(snapshot_dir));
            httplib::Server server;
            mount(server, api, cors);
            err << "listening on " << host << ":" << port << "\n";
            if (!server.listen(host, port)) {
                err << "failed to bind " << host << ":" << port << "\n";
                return runtime_error;
            }
            return ok;
        }
    } catch (const ValidationError& e) {
        err << validation_report_to_json(e.report()).dump(2) << "\n";
        return validation_failure;
    } catch (const Error& e) {
        err << error_body(std::string(to_string(e.code())), e.message()).dump(2) << "\n";
        return validation_failure;
    } catch (const Json::parse_error& e) {
        err << error_body("BadModelFile", e.what()).dump(2) << "\n";
        return validation_failure;
    } catch (const std::exception& e) {
        err << error_body("RuntimeError", e.what()).dump(2) << "\n";
        return runtime_error;
    }
    return bad_usage;
}

}  // namespace cogdiag::cli

#endif  // COGDIAG_CLI_HPP
