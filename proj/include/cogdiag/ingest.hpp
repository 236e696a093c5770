#ifndef COGDIAG_INGEST_HPP
#define COGDIAG_INGEST_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cogdiag/common.hpp"
#include "cogdiag/csv.hpp"

namespace cogdiag {

struct ResponseRecord {
    std::string student_id;
    std::string item_id;
    int correct = 0;
    std::optional<std::string> selected_option;
    std::size_t line = 0;

    bool operator==(const ResponseRecord&) const = default;
};

/// Binary item x KC relevancy table. Rows follow item order, columns KC order.
class QMatrix {
public:
    QMatrix() = default;
    QMatrix(std::vector<std::string> item_ids, std::vector<std::string> kc_ids,
            std::vector<std::uint8_t> entries)
        : item_ids_(std::move(item_ids)), kc_ids_(std::move(kc_ids)), entries_(std::move(entries)) {
        if (entries_.size() != item_ids_.size() * kc_ids_.size()) {
            throw Error(ErrorCode::ShapeMismatch, "Q-matrix entry count does not match M x K");
        }
    }

    std::size_t items() const noexcept { return item_ids_.size(); }
    std::size_t kcs() const noexcept { return kc_ids_.size(); }
    const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
    const std::vector<std::string>& kc_ids() const noexcept { return kc_ids_; }
    const std::vector<std::uint8_t>& entries() const noexcept { return entries_; }

    std::uint8_t operator()(std::size_t item, std::size_t kc) const { return entries_[item * kcs() + kc]; }
    std::span<const std::uint8_t> row(std::size_t item) const {
        return {entries_.data() + item * kcs(), kcs()};
    }

    std::vector<std::size_t> column_sums() const {
        std::vector<std::size_t> sums(kcs(), 0);
        for (std::size_t e = 0; e < items(); ++e)
            for (std::size_t k = 0; k < kcs(); ++k) sums[k] += (*this)(e, k);
        return sums;
    }

    bool operator==(const QMatrix&) const = default;

private:
    std::vector<std::string> item_ids_;
    std::vector<std::string> kc_ids_;
    std::vector<std::uint8_t> entries_;
};

/// Optional per-item display metadata (items.csv).
struct ItemInfo {
    std::string item_id;
    std::string text;
    std::string answer_key;
    std::vector<std::pair<std::string, std::string>> options;  // label -> option text

    bool operator==(const ItemInfo&) const = default;
};

struct ValidationIssue {
    std::string code;
    std::size_t row = 0;
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;  // row is 0 when not tied to a line
    std::size_t records = 0;
    std::size_t students = 0;
    std::size_t items = 0;
    std::size_t kcs = 0;

    bool accepted() const noexcept { return errors.empty(); }

    void error(ErrorCode code, std::size_t row, std::string message) {
        errors.push_back({std::string(to_string(code)), row, std::move(message)});
    }
    void warn(std::string code, std::string message, std::size_t row = 0) {
        warnings.push_back({std::move(code), row, std::move(message)});
    }
};

/// Thrown by the parsers when one or more rows are invalid. Carries every
/// problem found, not only the first.
class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport report)
        : Error(code_of(report), report.errors.front().message, report.errors.front().row),
          report_(std::move(report)) {}

    const ValidationReport& report() const noexcept { return report_; }

private:
    static ErrorCode code_of(const ValidationReport& report);
    ValidationReport report_;
};

inline ErrorCode error_code_from_string(std::string_view name) {
    for (int c = 0; c <= static_cast<int>(ErrorCode::BadModelFile); ++c) {
        if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
    }
    return ErrorCode::InvalidConfig;
}

inline ErrorCode ValidationError::code_of(const ValidationReport& report) {
    return error_code_from_string(report.errors.front().code);
}

struct EncodedRecord {
    std::size_t student = 0;
    std::size_t item = 0;
    int correct = 0;
    std::optional<std::string> option;

    bool operator==(const EncodedRecord&) const = default;
};

struct EncodedDataset {
    std::vector<std::string> student_ids;  // index -> token, first-appearance order
    std::map<std::string, std::size_t> student_index;
    std::map<std::string, std::size_t> item_index;
    std::map<std::string, std::size_t> kc_index;
    std::vector<EncodedRecord> records;
    QMatrix qmatrix;
    std::map<std::pair<std::size_t, std::string>, std::size_t> options;  // (item, option) -> count
    std::vector<ItemInfo> item_info;                                     // optional, by item id

    std::size_t num_students() const noexcept { return student_ids.size(); }
    std::size_t num_items() const noexcept { return qmatrix.items(); }
    std::size_t num_kcs() const noexcept { return qmatrix.kcs(); }
    const std::vector<std::string>& item_ids() const noexcept { return qmatrix.item_ids(); }
    const std::vector<std::string>& kc_ids() const noexcept { return qmatrix.kc_ids(); }
    bool has_options() const noexcept { return !options.empty(); }

    bool operator==(const EncodedDataset&) const = default;
};

struct EncodeResult {
    std::optional<EncodedDataset> dataset;
    ValidationReport report;
};

namespace detail {

inline void reject_excel(std::string_view text) {
    // xlsx is a zip container; legacy xls is an OLE2 compound file.
    if (text.starts_with("PK\x03\x04") || text.starts_with("\xD0\xCF\x11\xE0")) {
        throw Error(ErrorCode::ExcelNotSupported,
                    "Excel workbooks are not supported; export the sheet as CSV (File > Save As > CSV)");
    }
}

inline std::optional<std::uint8_t> parse_bit(std::string_view s) {
    s = csv::trim(s);
    if (s == "0") return 0;
    if (s == "1") return 1;
    return std::nullopt;
}

}  // namespace detail

/// Parses responses.csv: `student_id,item_id,correct[,selected_option]`.
/// Rows with an empty `correct` cell are treated as unobserved and reported
/// as warnings when `report` is given.
inline std::vector<ResponseRecord> parse_responses(std::string_view text, ValidationReport* report = nullptr) {
    detail::reject_excel(text);
    const auto rows = csv::read(text);
    ValidationReport local;
    if (rows.empty()) {
        local.error(ErrorCode::MissingHeader, 1, "responses file is empty; expected header student_id,item_id,correct");
        throw ValidationError(std::move(local));
    }
    const auto& header = rows.front().fields;
    std::vector<std::string> names;
    for (const auto& h : header) names.emplace_back(csv::trim(h));
    const bool has_option = names.size() == 4 && names[3] == "selected_option";
    if (names.size() < 3 || names[0] != "student_id" || names[1] != "item_id" || names[2] != "correct" ||
        (names.size() == 4 && !has_option) || names.size() > 4) {
        local.error(ErrorCode::MissingHeader, rows.front().line,
                    "expected header student_id,item_id,correct[,selected_option]");
        throw ValidationError(std::move(local));
    }

    std::vector<ResponseRecord> records;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != names.size()) {
            local.error(ErrorCode::BadColumnCount, row.line,
                        "expected " + std::to_string(names.size()) + " columns, found " +
                            std::to_string(row.fields.size()));
            continue;
        }
        ResponseRecord rec;
        rec.line = row.line;
        rec.student_id = std::string(csv::trim(row.fields[0]));
        rec.item_id = std::string(csv::trim(row.fields[1]));
        if (rec.student_id.empty() || rec.item_id.empty()) {
            local.error(ErrorCode::EmptyField, row.line, "student_id and item_id must be non-empty");
            continue;
        }
        const auto correct = csv::trim(row.fields[2]);
        if (correct.empty()) {
            local.warn("BlankResponse",
                       "blank correctness for (" + rec.student_id + ", " + rec.item_id + ") treated as unobserved",
                       row.line);
            continue;
        }
        const auto bit = detail::parse_bit(correct);
        if (!bit) {
            local.error(ErrorCode::BadCorrectValue, row.line,
                        "correct must be 0 or 1, got '" + std::string(correct) + "'");
            continue;
        }
        rec.correct = *bit;
        if (has_option) {
            const auto opt = csv::trim(row.fields[3]);
            if (!opt.empty()) rec.selected_option = std::string(opt);
        }
        if (!seen.emplace(rec.student_id, rec.item_id).second) {
            local.error(ErrorCode::DuplicateResponse, row.line,
                        "duplicate response for (" + rec.student_id + ", " + rec.item_id + ")");
            continue;
        }
        records.push_back(std::move(rec));
    }
    if (!local.accepted()) throw ValidationError(std::move(local));
    if (report) {
        for (auto& w : local.warnings) report->warnings.push_back(std::move(w));
    }
    return records;
}

/// Parses qmatrix.csv: `item_id,<kc_1>,...,<kc_K>` with 0/1 entries.
inline QMatrix parse_qmatrix(std::string_view text) {
    detail::reject_excel(text);
    const auto rows = csv::read(text);
    ValidationReport local;
    if (rows.empty()) {
        local.error(ErrorCode::MissingHeader, 1, "Q-matrix file is empty; expected header item_id,<kc_1>,...");
        throw ValidationError(std::move(local));
    }
    const auto& header = rows.front().fields;
    if (header.size() < 2 || csv::trim(header[0]) != "item_id") {
        local.error(ErrorCode::MissingHeader, rows.front().line,
                    "expected header item_id followed by at least one KC column");
        throw ValidationError(std::move(local));
    }
    std::vector<std::string> kc_ids;
    std::set<std::string> kc_seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        std::string kc(csv::trim(header[c]));
        if (kc.empty()) {
            local.error(ErrorCode::BadHeader, rows.front().line, "empty KC name in column " + std::to_string(c + 1));
        } else if (!kc_seen.insert(kc).second) {
            local.error(ErrorCode::BadHeader, rows.front().line, "duplicate KC column '" + kc + "'");
        }
        kc_ids.push_back(std::move(kc));
    }
    if (!local.accepted()) throw ValidationError(std::move(local));

    const std::size_t K = kc_ids.size();
    std::vector<std::string> item_ids;
    std::vector<std::uint8_t> entries;
    std::set<std::string> item_seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != K + 1) {
            local.error(ErrorCode::BadColumnCount, row.line,
                        "expected " + std::to_string(K + 1) + " columns, found " + std::to_string(row.fields.size()));
            continue;
        }
        std::string item(csv::trim(row.fields[0]));
        if (item.empty()) {
            local.error(ErrorCode::EmptyField, row.line, "item_id must be non-empty");
            continue;
        }
        std::vector<std::uint8_t> bits(K);
        bool ok = true;
        bool any = false;
        for (std::size_t k = 0; k < K; ++k) {
            const auto bit = detail::parse_bit(row.fields[k + 1]);
            if (!bit) {
                local.error(ErrorCode::NonBinaryEntry, row.line,
                            "entry for item '" + item + "', KC '" + kc_ids[k] + "' must be 0 or 1, got '" +
                                std::string(csv::trim(row.fields[k + 1])) + "'");
                ok = false;
                continue;
            }
            bits[k] = *bit;
            any = any || *bit;
        }
        if (!ok) continue;
        if (!any) {
            local.error(ErrorCode::EmptyRow, row.line, "item '" + item + "' measures no KC");
            continue;
        }
        if (!item_seen.insert(item).second) {
            local.error(ErrorCode::DuplicateItem, row.line, "duplicate item '" + item + "'");
            continue;
        }
        item_ids.push_back(std::move(item));
        entries.insert(entries.end(), bits.begin(), bits.end());
    }
    if (local.accepted() && item_ids.empty()) {
        local.error(ErrorCode::NoData, rows.front().line, "Q-matrix has no item rows");
    }
    if (!local.accepted()) throw ValidationError(std::move(local));
    return QMatrix(std::move(item_ids), std::move(kc_ids), std::move(entries));
}

/// Parses items.csv: `item_id,text,answer_key,option_a,option_b,...`.
inline std::vector<ItemInfo> parse_items(std::string_view text) {
    detail::reject_excel(text);
    const auto rows = csv::read(text);
    ValidationReport local;
    if (rows.empty()) {
        local.error(ErrorCode::MissingHeader, 1, "items file is empty; expected header item_id,text,answer_key,...");
        throw ValidationError(std::move(local));
    }
    const auto& header = rows.front().fields;
    if (header.size() < 3 || csv::trim(header[0]) != "item_id" || csv::trim(header[1]) != "text" ||
        csv::trim(header[2]) != "answer_key") {
        local.error(ErrorCode::MissingHeader, rows.front().line, "expected header item_id,text,answer_key[,option_*]");
        throw ValidationError(std::move(local));
    }
    std::vector<std::string> labels;
    for (std::size_t c = 3; c < header.size(); ++c) {
        std::string name(csv::trim(header[c]));
        if (!name.starts_with("option_") || name.size() == 7) {
            local.error(ErrorCode::BadHeader, rows.front().line, "option columns must be named option_<label>");
            throw ValidationError(std::move(local));
        }
        std::string label = name.substr(7);
        std::transform(label.begin(), label.end(), label.begin(), [](unsigned char ch) { return std::toupper(ch); });
        labels.push_back(std::move(label));
    }
    std::vector<ItemInfo> items;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != header.size()) {
            local.error(ErrorCode::BadColumnCount, row.line, "expected " + std::to_string(header.size()) + " columns");
            continue;
        }
        ItemInfo info;
        info.item_id = std::string(csv::trim(row.fields[0]));
        info.text = row.fields[1];
        info.answer_key = std::string(csv::trim(row.fields[2]));
        if (!seen.insert(info.item_id).second) {
            local.error(ErrorCode::DuplicateItem, row.line, "duplicate item '" + info.item_id + "'");
            continue;
        }
        for (std::size_t c = 0; c < labels.size(); ++c) {
            if (!row.fields[c + 3].empty()) info.options.emplace_back(labels[c], row.fields[c + 3]);
        }
        items.push_back(std::move(info));
    }
    if (!local.accepted()) throw ValidationError(std::move(local));
    return items;
}

/// Builds the indexed dataset. Students are indexed in first-appearance
/// order; items and KCs follow the Q-matrix. Problems are collected into the
/// report instead of thrown.
inline EncodeResult encode(const std::vector<ResponseRecord>& records, const QMatrix& qmatrix,
                           std::vector<ItemInfo> item_info = {}) {
    EncodeResult result;
    auto& report = result.report;
    EncodedDataset ds;
    ds.qmatrix = qmatrix;
    for (std::size_t e = 0; e < qmatrix.items(); ++e) ds.item_index.emplace(qmatrix.item_ids()[e], e);
    for (std::size_t k = 0; k < qmatrix.kcs(); ++k) ds.kc_index.emplace(qmatrix.kc_ids()[k], k);

    std::vector<std::size_t> respondents(qmatrix.items(), 0);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& rec : records) {
        const auto item_it = ds.item_index.find(rec.item_id);
        if (item_it == ds.item_index.end()) {
            report.error(ErrorCode::UnknownItem, rec.line, "item '" + rec.item_id + "' is not in the Q-matrix");
            continue;
        }
        if (rec.correct != 0 && rec.correct != 1) {
            report.error(ErrorCode::BadCorrectValue, rec.line, "correct must be 0 or 1");
            continue;
        }
        auto [student_it, inserted] = ds.student_index.emplace(rec.student_id, ds.student_ids.size());
        if (inserted) ds.student_ids.push_back(rec.student_id);
        const std::size_t s = student_it->second;
        const std::size_t e = item_it->second;
        if (!seen.emplace(s, e).second) {
            report.error(ErrorCode::DuplicateResponse, rec.line,
                         "duplicate response for (" + rec.student_id + ", " + rec.item_id + ")");
            continue;
        }
        ds.records.push_back({s, e, rec.correct, rec.selected_option});
        if (rec.selected_option) ++ds.options[{e, *rec.selected_option}];
        ++respondents[e];
    }
    for (std::size_t e = 0; e < qmatrix.items(); ++e) {
        if (respondents[e] == 0) {
            report.warn("UnansweredItem", "item '" + qmatrix.item_ids()[e] + "' has no responses");
        }
    }
    if (!item_info.empty()) {
        std::vector<ItemInfo> ordered;
        std::map<std::string, ItemInfo> by_id;
        for (auto& info : item_info) by_id.emplace(info.item_id, std::move(info));
        for (const auto& id : qmatrix.item_ids()) {
            if (auto it = by_id.find(id); it != by_id.end()) {
                ordered.push_back(std::move(it->second));
                by_id.erase(it);
            }
        }
        for (const auto& [id, info] : by_id) {
            report.warn("UnknownItemMetadata", "items file lists '" + id + "' which is not in the Q-matrix");
        }
        ds.item_info = std::move(ordered);
    }
    if (ds.records.empty() && report.accepted()) {
        report.error(ErrorCode::NoData, 0, "no observed responses");
    }

    report.records = ds.records.size();
    report.students = ds.student_ids.size();
    report.items = qmatrix.items();
    report.kcs = qmatrix.kcs();
    if (report.accepted()) result.dataset = std::move(ds);
    return result;
}

/// Parses and encodes in one go, folding parse failures into the report.
inline EncodeResult load_dataset(std::string_view responses_csv, std::string_view qmatrix_csv,
                                 std::optional<std::string_view> items_csv = std::nullopt) {
    EncodeResult result;
    std::vector<ResponseRecord> records;
    QMatrix q;
    std::vector<ItemInfo> items;
    ValidationReport warnings;
    auto absorb = [&](auto&& fn) {
        try {
            fn();
        } catch (const ValidationError& e) {
            for (const auto& err : e.report().errors) result.report.errors.push_back(err);
        } catch (const Error& e) {
            result.report.error(e.code(), e.row(), e.message());
        }
    };
    absorb([&] { records = parse_responses(responses_csv, &warnings); });
    absorb([&] { q = parse_qmatrix(qmatrix_csv); });
    if (items_csv) absorb([&] { items = parse_items(*items_csv); });
    if (!result.report.accepted()) return result;

    result = encode(records, q, std::move(items));
    result.report.warnings.insert(result.report.warnings.begin(), warnings.warnings.begin(), warnings.warnings.end());
    return result;
}

inline std::string write_qmatrix_csv(const QMatrix& q) {
    std::vector<std::string> header{"item_id"};
    header.insert(header.end(), q.kc_ids().begin(), q.kc_ids().end());
    std::string out = csv::join(header) + "\n";
    for (std::size_t e = 0; e < q.items(); ++e) {
        std::vector<std::string> row{q.item_ids()[e]};
        for (std::size_t k = 0; k < q.kcs(); ++k) row.push_back(q(e, k) ? "1" : "0");
        out += csv::join(row) + "\n";
    }
    return out;
}

inline std::string write_responses_csv(const EncodedDataset& ds) {
    const bool with_option = std::any_of(ds.records.begin(), ds.records.end(),
                                         [](const EncodedRecord& r) { return r.option.has_value(); });
    std::vector<std::string> header{"student_id", "item_id", "correct"};
    if (with_option) header.push_back("selected_option");
    std::string out = csv::join(header) + "\n";
    for (const auto& r : ds.records) {
        std::vector<std::string> row{ds.student_ids[r.student], ds.item_ids()[r.item], r.correct ? "1" : "0"};
        if (with_option) row.push_back(r.option.value_or(""));
        out += csv::join(row) + "\n";
    }
    return out;
}

}  // namespace cogdiag

#endif  // COGDIAG_INGEST_HPP
