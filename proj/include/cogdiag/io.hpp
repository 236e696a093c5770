#ifndef COGDIAG_IO_HPP
#define COGDIAG_IO_HPP

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogdiag/analytics.hpp"
#include "cogdiag/common.hpp"
#include "cogdiag/explain.hpp"
#include "cogdiag/ingest.hpp"
#include "cogdiag/model.hpp"
#include "cogdiag/posterior.hpp"
#include "cogdiag/synth.hpp"
#include "cogdiag/train.hpp"

namespace cogdiag {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << contents;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// Model persistence.

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        rows.push_back(Json(std::vector<double>(row.begin(), row.end())));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* name) {
    if (!j.is_array() || j.size() != rows) {
        throw Error(ErrorCode::BadModelFile, std::string(name) + " must have " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw Error(ErrorCode::BadModelFile, std::string(name) + " rows must have " + std::to_string(cols) + " entries");
        }
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline Json model_to_json(const ModelParams& p) {
    Json q = Json::array();
    for (std::size_t e = 0; e < p.qmatrix.items(); ++e) {
        const auto row = p.qmatrix.row(e);
        q.push_back(Json(std::vector<int>(row.begin(), row.end())));
    }
    Json j;
    j["format_version"] = kModelFormatVersion;
    j["N"] = p.num_students();
    j["M"] = p.num_items();
    j["K"] = p.num_kcs();
    j["H1"] = p.hyper.H1;
    j["H2"] = p.hyper.H2;
    j["discrimination_mode"] = to_string(p.hyper.discrimination_mode);
    j["kc_ids"] = p.qmatrix.kc_ids();
    j["item_ids"] = p.qmatrix.item_ids();
    j["student_ids"] = p.student_ids;
    j["Q"] = std::move(q);
    j["A"] = matrix_to_json(p.A);
    j["B"] = matrix_to_json(p.B);
    j["D"] = matrix_to_json(p.D);
    j["W1"] = matrix_to_json(p.W1);
    j["W2"] = matrix_to_json(p.W2);
    j["W3"] = matrix_to_json(p.W3);
    j["b1"] = p.b1;
    j["b2"] = p.b2;
    j["b3"] = p.b3;
    return j;
}

inline ModelParams model_from_json(const Json& j) {
    try {
        if (!j.is_object() || !j.contains("format_version")) {
            throw Error(ErrorCode::BadModelFile, "missing format_version");
        }
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error(ErrorCode::BadModelFile, "unsupported format_version " + std::to_string(version) +
                                                     " (this build reads version " +
                                                     std::to_string(kModelFormatVersion) + ")");
        }
        const auto N = j.at("N").get<std::size_t>();
        const auto M = j.at("M").get<std::size_t>();
        const auto K = j.at("K").get<std::size_t>();
        HyperParams hyper{K, j.at("H1").get<std::size_t>(), j.at("H2").get<std::size_t>(),
                          discrimination_mode_from_string(j.at("discrimination_mode").get<std::string>())};
        hyper.validate();
        auto kc_ids = j.at("kc_ids").get<std::vector<std::string>>();
        auto item_ids = j.at("item_ids").get<std::vector<std::string>>();
        auto student_ids = j.at("student_ids").get<std::vector<std::string>>();
        if (kc_ids.size() != K || item_ids.size() != M || student_ids.size() != N) {
            throw Error(ErrorCode::BadModelFile, "id lists do not match N, M, K");
        }
        const Matrix qm = matrix_from_json(j.at("Q"), M, K, "Q");
        std::vector<std::uint8_t> q(M * K);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double v = qm.data()[i];
            if (v != 0.0 && v != 1.0) throw Error(ErrorCode::BadModelFile, "Q entries must be 0 or 1");
            q[i] = static_cast<std::uint8_t>(v);
        }
        ModelParams p = ModelParams::zeros(hyper, QMatrix(std::move(item_ids), std::move(kc_ids), std::move(q)),
                                           std::move(student_ids));
        p.A = matrix_from_json(j.at("A"), N, K, "A");
        p.B = matrix_from_json(j.at("B"), M, K, "B");
        p.D = matrix_from_json(j.at("D"), M, hyper.disc_cols(), "D");
        p.W1 = matrix_from_json(j.at("W1"), hyper.H1, K, "W1");
        p.W2 = matrix_from_json(j.at("W2"), hyper.H2, hyper.H1, "W2");
        p.W3 = matrix_from_json(j.at("W3"), 1, hyper.H2, "W3");
        p.b1 = j.at("b1").get<std::vector<double>>();
        p.b2 = j.at("b2").get<std::vector<double>>();
        p.b3 = j.at("b3").get<double>();
        p.check_shapes();
        if (p.min_weight() < 0.0) throw Error(ErrorCode::BadModelFile, "network weights must be nonnegative");
        return p;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::BadModelFile, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BadModelFile) throw;
        throw Error(ErrorCode::BadModelFile, e.message());
    }
}

inline Json train_report_to_json(const TrainReport& r) {
    Json j;
    j["losses"] = r.losses;
    j["holdout_accuracy"] = optional_number(r.holdout_accuracy);
    j["holdout_ce"] = optional_number(r.holdout_ce);
    j["seed"] = r.seed;
    j["epochs_run"] = r.epochs_run;
    j["steps_run"] = r.steps_run;
    j["train_records"] = r.train_records;
    j["holdout_records"] = r.holdout_records;
    return j;
}

inline TrainReport train_report_from_json(const Json& j) {
    TrainReport r;
    r.losses = j.at("losses").get<std::vector<double>>();
    if (!j.at("holdout_accuracy").is_null()) r.holdout_accuracy = j.at("holdout_accuracy").get<double>();
    if (!j.at("holdout_ce").is_null()) r.holdout_ce = j.at("holdout_ce").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.epochs_run = j.at("epochs_run").get<std::size_t>();
    r.steps_run = j.at("steps_run").get<std::size_t>();
    r.train_records = j.at("train_records").get<std::size_t>();
    r.holdout_records = j.at("holdout_records").get<std::size_t>();
    return r;
}

inline Json validation_report_to_json(const ValidationReport& r) {
    auto issues = [](const std::vector<ValidationIssue>& list) {
        Json a = Json::array();
        for (const auto& i : list) a.push_back({{"code", i.code}, {"row", i.row}, {"message", i.message}});
        return a;
    };
    Json j;
    j["accepted"] = r.accepted();
    j["errors"] = issues(r.errors);
    j["warnings"] = issues(r.warnings);
    j["summary"] = {{"records", r.records}, {"students", r.students}, {"items", r.items}, {"kcs", r.kcs},
                    {"error_count", r.errors.size()}, {"warning_count", r.warnings.size()}};
    return j;
}

inline Json ground_truth_to_json(const GroundTruth& g, const SynthConfig& c, const std::vector<std::string>& students) {
    Json j;
    j["config"] = {{"N", c.N},         {"M", c.M},     {"K", c.K},         {"items_per_kc", c.items_per_kc},
                   {"slip", c.slip},   {"guess", c.guess}, {"seed", c.seed}};
    j["student_ids"] = students;
    j["item_ids"] = g.qmatrix.item_ids();
    j["kc_ids"] = g.qmatrix.kc_ids();
    j["true_mastery"] = matrix_to_json(g.true_mastery);
    j["probabilities"] = matrix_to_json(g.probabilities);
    return j;
}

// ---------------------------------------------------------------------------
// Request decoding shared by the CLI and the HTTP service. Tokens in, indices
// inside, tokens out.

/// Raised for malformed request bodies (HTTP 400, CLI exit 3).
class BadRequest : public std::runtime_error {
public:
    BadRequest(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

inline std::size_t item_index_of(const ModelParams& p, const std::string& id) {
    const auto& ids = p.qmatrix.item_ids();
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw Error(ErrorCode::UnknownItem, "item '" + id + "' is not in the model");
    return static_cast<std::size_t>(it - ids.begin());
}

inline std::size_t kc_index_of(const ModelParams& p, const std::string& id) {
    const auto& ids = p.qmatrix.kc_ids();
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw Error(ErrorCode::UnknownKC, "KC '" + id + "' is not in the model");
    return static_cast<std::size_t>(it - ids.begin());
}

inline std::vector<StudentResponse> responses_from_json(const ModelParams& p, const Json& j, const std::string& field) {
    if (!j.is_array()) throw BadRequest(field, field + " must be an array of {item_id, correct}");
    std::vector<StudentResponse> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& r = j[i];
        const std::string where = field + "[" + std::to_string(i) + "]";
        if (!r.is_object() || !r.contains("item_id") || !r["item_id"].is_string()) {
            throw BadRequest(where + ".item_id", where + ".item_id must be a string");
        }
        if (!r.contains("correct") || !r["correct"].is_number_integer() ||
            (r["correct"].get<int>() != 0 && r["correct"].get<int>() != 1)) {
            throw BadRequest(where + ".correct", where + ".correct must be 0 or 1");
        }
        const std::size_t item = item_index_of(p, r["item_id"].get<std::string>());
        for (const auto& prev : out) {
            if (prev.item == item) throw BadRequest(where, "duplicate response for item '" + r["item_id"].get<std::string>() + "'");
        }
        out.push_back({item, r["correct"].get<int>()});
    }
    return out;
}

inline Json responses_to_json(const ModelParams& p, const std::vector<StudentResponse>& rs) {
    Json a = Json::array();
    for (const auto& r : rs) a.push_back({{"item_id", p.qmatrix.item_ids()[r.item]}, {"correct", r.correct}});
    return a;
}

/// A student's responses taken from a responses file, keyed by the model's items.
/// Throws UnknownStudent if the id never appears in the file (blank rows count
/// as appearing).
inline std::vector<StudentResponse> student_responses_from_csv(const ModelParams& p, std::string_view csv_text,
                                                               const std::string& student) {
    ValidationReport warnings;
    const auto records = parse_responses(csv_text, &warnings);
    bool seen = false;
    std::vector<StudentResponse> out;
    for (const auto& r : records) {
        if (r.student_id != student) continue;
        seen = true;
        out.push_back({item_index_of(p, r.item_id), r.correct});
    }
    if (!seen) {
        for (const auto& w : warnings.warnings)
            if (w.code == "BlankResponse" && w.message.find("(" + student + ", ") != std::string::npos) seen = true;
    }
    if (!seen) throw Error(ErrorCode::UnknownStudent, "student '" + student + "' has no rows in the responses file");
    return out;
}

inline Json kc_map(const ModelParams& p, const std::vector<double>& values) {
    Json j = Json::object();
    for (std::size_t k = 0; k < values.size(); ++k) j[p.qmatrix.kc_ids()[k]] = values[k];
    return j;
}

inline PosteriorConfig posterior_config_from_json(const Json& body) {
    PosteriorConfig c;
    if (!body.contains("posterior")) return c;
    const auto& j = body["posterior"];
    if (!j.is_object()) throw BadRequest("posterior", "posterior must be an object");
    try {
        if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<std::size_t>();
        if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const Json::exception&) {
        throw BadRequest("posterior", "posterior fields must be numbers");
    }
    return c;
}

inline TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw BadRequest("config", "config must be an object");
    auto number = [&](const char* key, auto& target) {
        if (!j.contains(key)) return;
        try {
            target = j[key].get<std::remove_reference_t<decltype(target)>>();
        } catch (const Json::exception&) {
            throw BadRequest(std::string("config.") + key, std::string("config.") + key + " has the wrong type");
        }
    };
    number("learning_rate", c.learning_rate);
    number("epochs", c.epochs);
    number("seed", c.seed);
    number("init_scale", c.init_scale);
    number("holdout_fraction", c.holdout_fraction);
    number("batch_size", c.batch_size);
    number("h1", c.H1);
    number("h2", c.H2);
    if (j.contains("optimizer")) {
        if (!j["optimizer"].is_string()) throw BadRequest("config.optimizer", "config.optimizer must be a string");
        c.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
    }
    if (j.contains("discrimination_mode")) {
        if (!j["discrimination_mode"].is_string()) {
            throw BadRequest("config.discrimination_mode", "config.discrimination_mode must be a string");
        }
        c.discrimination_mode = discrimination_mode_from_string(j["discrimination_mode"].get<std::string>());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Response payloads.

inline Json reasoning_chain_to_json(const ModelParams& p, const ReasoningChain& chain) {
    Json steps = Json::array();
    for (const auto& s : chain.steps) {
        Json evidence = Json::array();
        for (const auto& e : s.evidence) evidence.push_back({{"item_id", p.qmatrix.item_ids()[e.item]}, {"correct", e.correct}});
        steps.push_back({{"kc_id", p.qmatrix.kc_ids()[s.kc]},
                         {"mastery", s.mastery},
                         {"band", s.band},
                         {"evidence", std::move(evidence)},
                         {"correct_count", s.correct_count},
                         {"conclusion", s.conclusion}});
    }
    return steps;
}

inline Json diagnose_payload(const ModelParams& p, std::vector<StudentResponse> responses,
                             const PosteriorConfig& config = {}) {
    const auto state = diagnose(p, std::move(responses), config);
    const auto chain = build_reasoning_chain(p, state);
    Json j;
    j["mastery"] = kc_map(p, state.mastery);
    j["mean_mastery"] = chain.mean_mastery;
    j["steps_run"] = state.steps_run;
    j["final_loss"] = state.final_loss;
    j["reasoning_chain"] = reasoning_chain_to_json(p, chain);
    return j;
}

inline Json contrastive_payload(const ModelParams& p, const ContrastiveQuery& q) {
    const auto r = contrastive(p, q);
    Json j;
    j["mastery_1"] = kc_map(p, r.mastery_1);
    j["mastery_2"] = kc_map(p, r.mastery_2);
    j["delta"] = kc_map(p, r.delta);
    j["responses_1"] = responses_to_json(p, r.state_1.responses);
    j["responses_2"] = responses_to_json(p, r.state_2.responses);
    j["steps_run"] = {r.state_1.steps_run, r.state_2.steps_run};
    return j;
}

inline Json counterfactual_payload(const ModelParams& p, const CounterfactualQuery& q) {
    const auto r = counterfactual(p, q);
    Json y = Json::object(), pattern = Json::object();
    for (const auto& pred : r.predictions) {
        y[p.qmatrix.item_ids()[pred.item]] = pred.y;
        pattern[p.qmatrix.item_ids()[pred.item]] = pred.predicted;
    }
    Json j;
    j["base_mastery"] = kc_map(p, q.base_mastery);
    j["effective_mastery"] = kc_map(p, r.effective_mastery);
    j["threshold"] = r.threshold;
    j["y_prime"] = std::move(y);
    j["binary_pattern"] = std::move(pattern);
    return j;
}

// Analytics payloads ---------------------------------------------------------

inline Json overview_payload(const EncodedDataset& ds, const ModelParams& p) {
    const auto o = overview(ds, &p);
    Json j;
    j["students"] = o.students;
    j["items"] = o.items;
    j["kcs"] = o.kcs;
    j["records"] = o.records;
    j["class_accuracy"] = o.class_accuracy;
    j["item_accuracy_histogram"] = o.item_accuracy_histogram;
    j["kc_weights"] = kc_map(p, o.kc_weights);
    j["class_mean_mastery"] = kc_map(p, o.class_mean_mastery.value_or(std::vector<double>{}));
    return j;
}

inline Json items_payload(const EncodedDataset& ds, const ModelParams& p) {
    Json items = Json::array();
    for (const auto& st : item_stats(ds, &p)) {
        Json diff = Json::object();
        for (const auto& [k, v] : st.difficulty_model) diff[ds.kc_ids()[k]] = v;
        Json options = Json::object();
        for (const auto& [o, c] : st.option_counts) options[o] = c;
        Json disc_model = st.discrimination_model.size() == 1 ? Json(st.discrimination_model[0])
                                                              : kc_map(p, st.discrimination_model);
        items.push_back({{"item_id", ds.item_ids()[st.item]},
                         {"respondents", st.respondents},
                         {"correct", st.correct},
                         {"accuracy", optional_number(st.accuracy)},
                         {"difficulty_classical", optional_number(st.difficulty_classical)},
                         {"discrimination_pb", optional_number(st.discrimination_pb)},
                         {"discrimination_note", st.discrimination_note.empty() ? Json(nullptr) : Json(st.discrimination_note)},
                         {"difficulty_model", std::move(diff)},
                         {"discrimination_model", std::move(disc_model)},
                         {"option_counts", std::move(options)}});
    }
    const auto errs = error_patterns(ds);
    Json patterns = Json::array();
    for (const auto& e : errs.items) {
        Json d = Json::array();
        for (const auto& [o, c] : e.distractors) d.push_back({{"option", o}, {"count", c}});
        patterns.push_back({{"item_id", ds.item_ids()[e.item]}, {"wrong", e.wrong}, {"distractors", std::move(d)}});
    }
    Json without = Json::array();
    for (std::size_t e : errs.items_without_options) without.push_back(ds.item_ids()[e]);
    Json j;
    j["items"] = std::move(items);
    j["error_patterns"] = {{"items", std::move(patterns)},
                           {"items_without_options", std::move(without)},
                           {"coverage_note", errs.coverage_note}};
    return j;
}

inline Json kcs_payload(const EncodedDataset& ds, const ModelParams& p) {
    Json a = Json::array();
    for (const auto& st : kc_stats(ds, &p)) {
        Json dist = Json::object();
        for (const char* bin : {"easy", "medium", "hard", "unanswered"}) dist[bin] = st.difficulty_distribution.at(bin);
        a.push_back({{"kc_id", ds.kc_ids()[st.kc]},
                     {"weight", st.weight},
                     {"item_count", st.item_count},
                     {"accuracy", optional_number(st.accuracy)},
                     {"class_mean_mastery", optional_number(st.class_mean_mastery)},
                     {"difficulty_distribution", std::move(dist)}});
    }
    return {{"kcs", std::move(a)}};
}

inline Json comparison_payload(const EncodedDataset& ds, const ModelParams& p,
                               const ComparisonThresholds& t = {}) {
    const auto c = compare(ds, p, t);
    Json items = Json::array();
    for (const auto& g : c.items)
        items.push_back({{"item_id", ds.item_ids()[g.item]},
                         {"gap", optional_number(g.gap)},
                         {"exceeds_class_ability", g.exceeds_class_ability}});
    Json students = Json::array();
    for (const auto& s : c.students) {
        Json below = Json::array();
        for (std::size_t k : s.below_class) below.push_back(ds.kc_ids()[k]);
        students.push_back({{"student_id", ds.student_ids[s.student]},
                            {"delta", kc_map(p, s.delta)},
                            {"below_class", std::move(below)}});
    }
    Json low = Json::array();
    for (std::size_t k : c.class_wide_low_kcs) low.push_back(ds.kc_ids()[k]);
    Json j;
    j["class_accuracy"] = c.class_accuracy;
    j["thresholds"] = {{"item_gap", t.item_gap}, {"student_gap", t.student_gap},
                       {"class_low_accuracy", t.class_low_accuracy}};
    j["items"] = std::move(items);
    j["students"] = std::move(students);
    j["class_wide_low_kcs"] = std::move(low);
    return j;
}

inline Json suggestions_payload(const EncodedDataset& ds, const ModelParams& p) {
    Json a = Json::array();
    for (const auto& s : suggest(compute_stats(ds, p))) {
        Json snap = Json::object();
        for (const auto& [k, v] : s.snapshot) snap[k] = v;
        a.push_back({{"scope", to_string(s.scope)}, {"template_id", s.template_id}, {"text", s.text}, {"trigger", std::move(snap)}});
    }
    return {{"suggestions", std::move(a)}};
}

inline Json analytics_view(const EncodedDataset& ds, const ModelParams& p, std::string_view view) {
    if (view == "overview") return overview_payload(ds, p);
    if (view == "items") return items_payload(ds, p);
    if (view == "kcs") return kcs_payload(ds, p);
    if (view == "comparison") return comparison_payload(ds, p);
    if (view == "suggestions") return suggestions_payload(ds, p);
    throw BadRequest("view", "unknown analytics view '" + std::string(view) + "'");
}

inline Json report_payload(const EncodedDataset& ds, const ModelParams& p) {
    Json j;
    for (const char* view : {"overview", "items", "kcs", "comparison", "suggestions"}) j[view] = analytics_view(ds, p, view);
    return j;
}

inline std::string fmt_optional(const Json& v) { return v.is_null() ? "n/a" : fixed2(v.get<double>()); }

/// Human-readable report. Section order: A overview, B items, C KCs, suggestions.
inline std::string report_markdown(const Json& report) {
    std::ostringstream md;
    const auto& o = report["overview"];
    md << "# Class diagnosis report\n\n";
    md << "## A. Overview\n\n";
    md << "- Students: " << o["students"].get<std::size_t>() << "\n";
    md << "- Items: " << o["items"].get<std::size_t>() << "\n";
    md << "- Knowledge components: " << o["kcs"].get<std::size_t>() << "\n";
    md << "- Responses: " << o["records"].get<std::size_t>() << "\n";
    md << "- Class accuracy: " << percent(o["class_accuracy"].get<double>()) << "\n\n";
    md << "| KC | Weight | Class mean mastery |\n|---|---|---|\n";
    for (const auto& [kc, w] : o["kc_weights"].items()) {
        const auto& m = o["class_mean_mastery"];
        md << "| " << kc << " | " << fixed2(w.get<double>()) << " | "
           << (m.contains(kc) ? percent(m[kc].get<double>()) : "n/a") << " |\n";
    }
    md << "\n## B. Items\n\n";
    md << "| Item | Respondents | Accuracy | Difficulty | Discrimination |\n|---|---|---|---|---|\n";
    for (const auto& it : report["items"]["items"]) {
        md << "| " << it["item_id"].get<std::string>() << " | " << it["respondents"].get<std::size_t>() << " | "
           << fmt_optional(it["accuracy"]) << " | " << fmt_optional(it["difficulty_classical"]) << " | "
           << fmt_optional(it["discrimination_pb"]) << " |\n";
    }
    const auto& ep = report["items"]["error_patterns"];
    if (!ep["items"].empty()) {
        md << "\n### Error patterns\n\n";
        for (const auto& e : ep["items"]) {
            md << "- " << e["item_id"].get<std::string>() << ":";
            for (const auto& d : e["distractors"])
                md << " " << d["option"].get<std::string>() << "=" << d["count"].get<std::size_t>();
            md << "\n";
        }
    }
    if (!ep["coverage_note"].get<std::string>().empty()) md << "\n_" << ep["coverage_note"].get<std::string>() << "_\n";
    md << "\n## C. Knowledge components\n\n";
    md << "| KC | Items | Accuracy | Class mean mastery | Easy | Medium | Hard |\n|---|---|---|---|---|---|---|\n";
    for (const auto& kc : report["kcs"]["kcs"]) {
        const auto& d = kc["difficulty_distribution"];
        md << "| " << kc["kc_id"].get<std::string>() << " | " << kc["item_count"].get<std::size_t>() << " | "
           << fmt_optional(kc["accuracy"]) << " | " << fmt_optional(kc["class_mean_mastery"]) << " | "
           << d["easy"].get<std::size_t>() << " | " << d["medium"].get<std::size_t>() << " | "
           << d["hard"].get<std::size_t>() << " |\n";
    }
    md << "\n## Suggestions\n\n";
    const auto& s = report["suggestions"]["suggestions"];
    if (s.empty()) md << "No suggestions were triggered.\n";
    for (const auto& sug : s) md << "- [" << sug["scope"].get<std::string>() << "] " << sug["text"].get<std::string>() << "\n";
    return md.str();
}

}  // namespace cogdiag

#endif  // COGDIAG_IO_HPP
