#ifndef COGDIAG_SERVICE_HPP
#define COGDIAG_SERVICE_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cogdiag/io.hpp"

namespace cogdiag {

struct DatasetEntry {
    EncodedDataset dataset;
    ValidationReport report;
    std::string responses_csv;
    std::string qmatrix_csv;
    std::optional<std::string> items_csv;
};

struct ModelEntry {
    std::string dataset_id;
    ModelParams params;
    TrainReport report;
};

/// In-memory store. Entries are immutable once inserted; only insertion
/// takes the exclusive lock.
class SessionStore {
public:
    std::string add_dataset(DatasetEntry entry) {
        std::unique_lock lock(mutex_);
        std::string id = "d" + std::to_string(++next_dataset_);
        datasets_.emplace(id, std::make_shared<const DatasetEntry>(std::move(entry)));
        return id;
    }

    std::string add_model(ModelEntry entry) {
        std::unique_lock lock(mutex_);
        if (!datasets_.contains(entry.dataset_id)) throw std::logic_error("model references unknown dataset");
        std::string id = "m" + std::to_string(++next_model_);
        models_.emplace(id, std::make_shared<const ModelEntry>(std::move(entry)));
        return id;
    }

    std::shared_ptr<const DatasetEntry> dataset(const std::string& id) const {
        std::shared_lock lock(mutex_);
        auto it = datasets_.find(id);
        return it == datasets_.end() ? nullptr : it->second;
    }

    std::shared_ptr<const ModelEntry> model(const std::string& id) const {
        std::shared_lock lock(mutex_);
        auto it = models_.find(id);
        return it == models_.end() ? nullptr : it->second;
    }

    Json snapshot() const {
        std::shared_lock lock(mutex_);
        Json j;
        j["next_dataset"] = next_dataset_;
        j["next_model"] = next_model_;
        Json ds = Json::object();
        for (const auto& [id, e] : datasets_) {
            ds[id] = {{"responses_csv", e->responses_csv},
                      {"qmatrix_csv", e->qmatrix_csv},
                      {"items_csv", e->items_csv ? Json(*e->items_csv) : Json(nullptr)}};
        }
        Json ms = Json::object();
        for (const auto& [id, e] : models_) {
            ms[id] = {{"dataset_id", e->dataset_id},
                      {"model", model_to_json(e->params)},
                      {"train_report", train_report_to_json(e->report)}};
        }
        j["datasets"] = std::move(ds);
        j["models"] = std::move(ms);
        return j;
    }

    void restore(const Json& j) {
        std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets;
        std::map<std::string, std::shared_ptr<const ModelEntry>> models;
        for (const auto& [id, d] : j.at("datasets").items()) {
            std::optional<std::string> items;
            if (!d.at("items_csv").is_null()) items = d.at("items_csv").get<std::string>();
            const auto responses = d.at("responses_csv").get<std::string>();
            const auto qmatrix = d.at("qmatrix_csv").get<std::string>();
            auto result = load_dataset(responses, qmatrix,
                                       items ? std::optional<std::string_view>(*items) : std::nullopt);
            if (!result.dataset) throw Error(ErrorCode::BadModelFile, "snapshot dataset " + id + " no longer validates");
            datasets.emplace(id, std::make_shared<const DatasetEntry>(
                                     DatasetEntry{std::move(*result.dataset), result.report, responses, qmatrix, items}));
        }
        for (const auto& [id, m] : j.at("models").items()) {
            models.emplace(id, std::make_shared<const ModelEntry>(ModelEntry{m.at("dataset_id").get<std::string>(),
                                                                            model_from_json(m.at("model")),
                                                                            train_report_from_json(m.at("train_report"))}));
        }
        std::unique_lock lock(mutex_);
        datasets_ = std::move(datasets);
        models_ = std::move(models);
        next_dataset_ = j.at("next_dataset").get<std::size_t>();
        next_model_ = j.at("next_model").get<std::size_t>();
    }

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets_;
    std::map<std::string, std::shared_ptr<const ModelEntry>> models_;
    std::size_t next_dataset_ = 0;
    std::size_t next_model_ = 0;
};

struct ApiResponse {
    int status = 200;
    Json body;
};

inline Json error_body(std::string code, std::string message, Json details = Json::array()) {
    return {{"code", std::move(code)}, {"message", std::move(message)}, {"details", std::move(details)}};
}

/// Transport-independent request handlers. Every handler is a pure function
/// of the stored state and the request body, except the two create calls.
class Api {
public:
    explicit Api(std::optional<std::filesystem::path> snapshot_dir = std::nullopt)
        : snapshot_dir_(std::move(snapshot_dir)) {}

    SessionStore& store() noexcept { return store_; }

    ApiResponse create_dataset(const std::string& responses_csv, const std::string& qmatrix_csv,
                               const std::optional<std::string>& items_csv = std::nullopt) {
        return guarded([&] {
            auto result = load_dataset(responses_csv, qmatrix_csv,
                                       items_csv ? std::optional<std::string_view>(*items_csv) : std::nullopt);
            if (!result.dataset) {
                Json details = Json::array();
                for (const auto& e : result.report.errors)
                    details.push_back({{"code", e.code}, {"row", e.row}, {"message", e.message}});
                Json body = error_body(result.report.errors.front().code, "dataset failed validation", std::move(details));
                body["report"] = validation_report_to_json(result.report);
                return ApiResponse{422, std::move(body)};
            }
            Json report = validation_report_to_json(result.report);
            const auto id = store_.add_dataset(
                {std::move(*result.dataset), std::move(result.report), responses_csv, qmatrix_csv, items_csv});
            return ApiResponse{201, {{"dataset_id", id}, {"report", std::move(report)}}};
        });
    }

    ApiResponse create_dataset(const Json& body) {
        return guarded([&] {
            auto text = [&](const char* key, bool required) -> std::optional<std::string> {
                if (!body.contains(key) || body[key].is_null()) {
                    if (required) throw BadRequest(key, std::string(key) + " is required");
                    return std::nullopt;
                }
                if (!body[key].is_string()) throw BadRequest(key, std::string(key) + " must be a string of CSV text");
                return body[key].get<std::string>();
            };
            const auto responses = text("responses_csv", true);
            const auto qmatrix = text("qmatrix_csv", true);
            return create_dataset(*responses, *qmatrix, text("items_csv", false));
        });
    }

    ApiResponse get_dataset(const std::string& id) const {
        const auto d = store_.dataset(id);
        if (!d) return not_found("dataset", id);
        return {200,
                {{"dataset_id", id},
                 {"students", d->dataset.student_ids},
                 {"item_ids", d->dataset.item_ids()},
                 {"kc_ids", d->dataset.kc_ids()},
                 {"report", validation_report_to_json(d->report)}}};
    }

    ApiResponse create_model(const Json& body) {
        return guarded([&] {
            if (!body.contains("dataset_id") || !body["dataset_id"].is_string()) {
                throw BadRequest("dataset_id", "dataset_id must be a string");
            }
            const auto id = body["dataset_id"].get<std::string>();
            const auto d = store_.dataset(id);
            if (!d) return not_found("dataset", id);
            const TrainConfig config = train_config_from_json(body.contains("config") ? body["config"] : Json());
            auto [params, report] = fit(d->dataset, config);
            Json report_json = train_report_to_json(report);
            const auto model_id = store_.add_model({id, std::move(params), std::move(report)});
            return ApiResponse{200, {{"model_id", model_id}, {"dataset_id", id}, {"train_report", std::move(report_json)}}};
        });
    }

    ApiResponse get_model(const std::string& id) const {
        const auto m = store_.model(id);
        if (!m) return not_found("model", id);
        return {200, model_to_json(m->params)};
    }

    ApiResponse diagnose(const std::string& id, const Json& body) const {
        return with_model(id, [&](const ModelEntry& m) {
            require_object(body);
            if (!body.contains("responses")) throw BadRequest("responses", "responses is required");
            auto responses = responses_from_json(m.params, body["responses"], "responses");
            return ApiResponse{200, diagnose_payload(m.params, std::move(responses), posterior_config_from_json(body))};
        });
    }

    ApiResponse contrastive(const std::string& id, const Json& body) const {
        return with_model(id, [&](const ModelEntry& m) {
            require_object(body);
            if (!body.contains("responses")) throw BadRequest("responses", "responses is required");
            ContrastiveQuery q;
            q.base_responses = responses_from_json(m.params, body["responses"], "responses");
            q.config = posterior_config_from_json(body);
            const bool has_flips = body.contains("flip_items");
            const bool has_variant = body.contains("variant_responses");
            if (has_flips == has_variant) {
                throw BadRequest("flip_items", "exactly one of flip_items or variant_responses is required");
            }
            if (has_flips) {
                const auto& f = body["flip_items"];
                if (!f.is_array()) throw BadRequest("flip_items", "flip_items must be an array of item ids");
                FlipItems flips;
                for (const auto& item : f) {
                    if (!item.is_string()) throw BadRequest("flip_items", "flip_items must be an array of item ids");
                    flips.items.push_back(item_index_of(m.params, item.get<std::string>()));
                }
                q.variant = std::move(flips);
            } else {
                q.variant = responses_from_json(m.params, body["variant_responses"], "variant_responses");
            }
            return ApiResponse{200, contrastive_payload(m.params, q)};
        });
    }

    ApiResponse counterfactual(const std::string& id, const Json& body) const {
        return with_model(id, [&](const ModelEntry& m) {
            require_object(body);
            const auto& p = m.params;
            CounterfactualQuery q;
            if (!body.contains("base") || !body["base"].is_object()) {
                throw BadRequest("base", "base must be an object with responses or mastery");
            }
            const auto& base = body["base"];
            if (base.contains("responses") == base.contains("mastery")) {
                throw BadRequest("base", "base needs exactly one of responses or mastery");
            }
            if (base.contains("responses")) {
                auto responses = responses_from_json(p, base["responses"], "base.responses");
                q.base_mastery = cogdiag::diagnose(p, std::move(responses), posterior_config_from_json(body)).mastery;
            } else {
                const auto& mj = base["mastery"];
                if (!mj.is_object()) throw BadRequest("base.mastery", "base.mastery must map every kc_id to a number");
                q.base_mastery.assign(p.num_kcs(), 0.0);
                std::vector<bool> set(p.num_kcs(), false);
                for (const auto& [kc, v] : mj.items()) {
                    if (!v.is_number()) throw BadRequest("base.mastery." + kc, "mastery values must be numbers");
                    const auto k = kc_index_of(p, kc);
                    q.base_mastery[k] = v.get<double>();
                    set[k] = true;
                }
                for (std::size_t k = 0; k < set.size(); ++k)
                    if (!set[k]) throw BadRequest("base.mastery", "missing mastery for KC '" + p.qmatrix.kc_ids()[k] + "'");
            }
            if (body.contains("overrides")) {
                const auto& o = body["overrides"];
                if (!o.is_object()) throw BadRequest("overrides", "overrides must map kc_id to a value in (0, 1)");
                for (const auto& [kc, v] : o.items()) {
                    if (!v.is_number()) throw BadRequest("overrides." + kc, "override values must be numbers");
                    q.overrides[kc_index_of(p, kc)] = v.get<double>();
                }
            }
            if (body.contains("target_items")) {
                const auto& t = body["target_items"];
                if (!t.is_array()) throw BadRequest("target_items", "target_items must be an array of item ids");
                for (const auto& item : t) {
                    if (!item.is_string()) throw BadRequest("target_items", "target_items must be an array of item ids");
                    q.target_items.push_back(item_index_of(p, item.get<std::string>()));
                }
            }
            if (body.contains("threshold")) {
                if (!body["threshold"].is_number()) throw BadRequest("threshold", "threshold must be a number");
                q.threshold = body["threshold"].get<double>();
            }
            return ApiResponse{200, counterfactual_payload(p, q)};
        });
    }

    ApiResponse analytics(const std::string& id, const std::string& view) const {
        return with_model(id, [&](const ModelEntry& m) {
            const auto d = store_.dataset(m.dataset_id);
            return ApiResponse{200, analytics_view(d->dataset, m.params, view)};
        });
    }

    ApiResponse snapshot() const {
        if (!snapshot_dir_) {
            return {409, error_body("SnapshotDisabled", "the server was started without a snapshot directory")};
        }
        return guarded([&] {
            const auto path = *snapshot_dir_ / "snapshot.json";
            write_file(path.string(), store_.snapshot().dump(2));
            return ApiResponse{200, {{"path", path.string()}}};
        });
    }

private:
    static void require_object(const Json& body) {
        if (!body.is_object()) throw BadRequest("body", "request body must be a JSON object");
    }

    static ApiResponse not_found(const std::string& kind, const std::string& id) {
        return {404, error_body("NotFound", kind + " '" + id + "' does not exist")};
    }

    template <typename Fn>
    static ApiResponse guarded(Fn&& fn) {
        try {
            return fn();
        } catch (const BadRequest& e) {
            return {400, error_body("BadRequest", e.what(), Json::array({{{"field", e.field()}, {"message", e.what()}}}))};
        } catch (const ValidationError& e) {
            Json body = error_body(std::string(to_string(e.code())), e.message());
            body["report"] = validation_report_to_json(e.report());
            return {422, std::move(body)};
        } catch (const Error& e) {
            return {422, error_body(std::string(to_string(e.code())), e.message())};
        } catch (const Json::exception& e) {
            return {400, error_body("BadRequest", e.what())};
        } catch (const std::exception& e) {
            return {500, error_body("InternalError", e.what())};
        }
    }

    template <typename Fn>
    ApiResponse with_model(const std::string& id, Fn&& fn) const {
        const auto m = store_.model(id);
        if (!m) return not_found("model", id);
        return guarded([&] { return fn(*m); });
    }

    SessionStore store_;
    std::optional<std::filesystem::path> snapshot_dir_;
};

}  // namespace cogdiag

#endif  // COGDIAG_SERVICE_HPP
