#include "tabdit/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <unordered_map>

#include "tabdit/errors.hpp"

namespace tabdit {

bool parse_number(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + text.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

std::int64_t days_from_civil(int year, int month, int day) {
    year -= month <= 2;
    const std::int64_t era = (year >= 0 ? year : year - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(year - era * 400);
    const unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = static_cast<int>(y + (month <= 2));
}

bool parse_date(const std::string& text, std::int64_t& value, bool& has_time) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    const char* s = text.c_str();
    char sep = 0;
    int n = 0;
    if (std::sscanf(s, "%4d-%2d-%2d%n", &year, &month, &day, &n) != 3 || n != 10) return false;
    if (month < 1 || month > 12 || day < 1 || day > 31) return false;
    has_time = false;
    if (text.size() == 10) {
        value = days_from_civil(year, month, day);
        return true;
    }
    sep = text[10];
    if ((sep != ' ' && sep != 'T') || text.size() != 19) return false;
    if (std::sscanf(s + 11, "%2d:%2d:%2d%n", &hour, &minute, &second, &n) != 3 || n != 8)
        return false;
    if (hour > 23 || minute > 59 || second > 60) return false;
    has_time = true;
    value = days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
    return true;
}

std::string render_value(const FieldValue& value, const FieldSpec& spec) {
    if (const auto* text = std::get_if<std::string>(&value)) return *text;
    const double v = std::get<double>(value);
    char buf[64];
    if (!spec.date_unit.empty()) {
        const std::int64_t absolute = spec.date_origin + static_cast<std::int64_t>(std::llround(v));
        int year, month, day;
        if (spec.date_unit == "seconds") {
            std::int64_t days = absolute / 86400;
            std::int64_t rem = absolute % 86400;
            if (rem < 0) {
                rem += 86400;
                --days;
            }
            civil_from_days(days, year, month, day);
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02lld:%02lld:%02lld", year, month, day,
                          static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                          static_cast<long long>(rem % 60));
        } else {
            civil_from_days(absolute, year, month, day);
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        }
        return buf;
    }
    if (std::fabs(v - std::llround(v)) < 1e-9 && std::fabs(v) < 9.3e18) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(v)));
    } else {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
    }
    return buf;
}

namespace {

enum class ColumnKind { Numeric, Date, Categorical };

struct ColumnProfile {
    ColumnKind kind = ColumnKind::Categorical;
    bool has_negative = false;
    bool has_fractional = false;
    bool has_time = false;
    std::int64_t min_date = 0;
    std::vector<std::string> categories;  // sorted distinct values
};

ColumnProfile profile_column(const CsvTable& table, int col) {
    int numeric_hits = 0;
    int date_hits = 0;
    const int total = static_cast<int>(table.rows.size());
    ColumnProfile profile;
    bool first_date = true;
    for (const auto& row : table.rows) {
        double v;
        std::int64_t d;
        bool has_time;
        if (parse_number(row[col], v)) {
            ++numeric_hits;
            profile.has_negative = profile.has_negative || v < 0;
            profile.has_fractional =
                profile.has_fractional || std::fabs(v - std::llround(v)) > 1e-9;
        } else if (parse_date(row[col], d, has_time)) {
            ++date_hits;
            profile.has_time = profile.has_time || has_time;
            profile.min_date = first_date ? d : std::min(profile.min_date, d);
            first_date = false;
        }
    }
    if (numeric_hits == total && total > 0) {
        profile.kind = ColumnKind::Numeric;
        return profile;
    }
    if (date_hits == total && total > 0) {
        profile.kind = ColumnKind::Date;
        return profile;
    }
    if (numeric_hits + date_hits > 0) {
        // Partially numeric columns are almost always data errors; report
        // the offending rows instead of silently treating them as text.
        std::string rows_note;
        int listed = 0;
        for (std::size_t r = 0; r < table.rows.size() && listed < 5; ++r) {
            double v;
            std::int64_t d;
            bool ht;
            if (!parse_number(table.rows[r][col], v) && !parse_date(table.rows[r][col], d, ht)) {
                rows_note += (listed ? ", " : "") + std::to_string(r + 2);  // 1-based + header
                ++listed;
            }
        }
        fail(ErrorCode::MixedTypeColumn,
             "column '" + table.header[col] + "' mixes numbers and text (rows " + rows_note + ")");
    }
    std::set<std::string> distinct;
    for (const auto& row : table.rows) distinct.insert(row[col]);
    profile.categories.assign(distinct.begin(), distinct.end());
    return profile;
}

Schema infer_schema(const CsvTable& table, const std::vector<int>& field_cols,
                    const std::optional<Schema>& override_schema, int significant_digits) {
    if (override_schema) return *override_schema;
    std::vector<FieldSpec> fields;
    for (int col : field_cols) {
        ColumnProfile profile = profile_column(table, col);
        FieldSpec spec;
        spec.name = table.header[col];
        switch (profile.kind) {
            case ColumnKind::Numeric:
                spec.kind = FieldKind::Numerical;
                spec.allows_negative = profile.has_negative;
                spec.allows_fractional = profile.has_fractional;
                break;
            case ColumnKind::Date:
                spec.kind = FieldKind::Numerical;
                spec.date_unit = profile.has_time ? "seconds" : "days";
                spec.date_origin = profile.min_date;
                break;
            case ColumnKind::Categorical:
                spec.kind = FieldKind::Categorical;
                spec.vocabulary = profile.categories;
                break;
        }
        fields.push_back(std::move(spec));
    }
    return Schema::make(std::move(fields), significant_digits);
}

FieldValue convert_cell(const std::string& text, const FieldSpec& spec, std::size_t row_index) {
    if (spec.kind == FieldKind::Categorical) return text;
    double v;
    std::int64_t d;
    bool has_time;
    if (!spec.date_unit.empty()) {
        if (!parse_date(text, d, has_time))
            fail(ErrorCode::MixedTypeColumn, "row " + std::to_string(row_index + 2) +
                                                 ": '" + text + "' is not a date for field '" +
                                                 spec.name + "'");
        // Day-granularity schema with a timestamped value cannot happen via
        // inference; guard anyway.
        if (has_time && spec.date_unit == "days") d /= 86400;
        return static_cast<double>(d - spec.date_origin);
    }
    if (!parse_number(text, v))
        fail(ErrorCode::MixedTypeColumn, "row " + std::to_string(row_index + 2) + ": '" + text +
                                             "' is not numeric for field '" + spec.name + "'");
    return v;
}

}  // namespace

TrainingCorpus ingest_tables(const CsvTable& child, const CsvTable* parent,
                             const IngestConfig& cfg) {
    if (child.header.empty()) fail(ErrorCode::MalformedCsv, "child table has no header");
    if (child.rows.empty()) fail(ErrorCode::EmptyDataset, "child table has no rows");
    if (cfg.tau_max < 1) fail(ErrorCode::InvalidConfig, "tau_max must be >= 1");

    const std::string key_name = cfg.series_key.empty() ? child.header[0] : cfg.series_key;
    const int key_col = child.column(key_name);
    if (key_col < 0) fail(ErrorCode::InvalidConfig, "missing series key column '" + key_name + "'");
    const int order_col = cfg.order_by.empty() ? -1 : child.column(cfg.order_by);
    if (!cfg.order_by.empty() && order_col < 0)
        fail(ErrorCode::InvalidConfig, "missing order column '" + cfg.order_by + "'");

    std::vector<int> field_cols;
    for (std::size_t c = 0; c < child.header.size(); ++c)
        if (static_cast<int>(c) != key_col) field_cols.push_back(static_cast<int>(c));
    if (field_cols.empty()) fail(ErrorCode::InvalidConfig, "child table has no value columns");

    TrainingCorpus corpus;
    corpus.schema = infer_schema(child, field_cols, cfg.schema_override, cfg.significant_digits);
    if (corpus.schema.fields().size() != field_cols.size())
        fail(ErrorCode::SchemaMismatch, "schema field count does not match the child table");

    // Group rows by key, keeping first-appearance key order.
    std::vector<std::string> key_order;
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < child.rows.size(); ++r) {
        const std::string& key = child.rows[r][key_col];
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) key_order.push_back(key);
        it->second.push_back(r);
    }

    // Optional explicit ordering within each series.
    if (order_col >= 0) {
        for (auto& [key, rows] : groups) {
            std::vector<std::pair<double, std::size_t>> keyed;
            keyed.reserve(rows.size());
            for (std::size_t r : rows) {
                const std::string& text = child.rows[r][order_col];
                double v;
                std::int64_t d;
                bool has_time;
                if (parse_number(text, v)) {
                    keyed.emplace_back(v, r);
                } else if (parse_date(text, d, has_time)) {
                    keyed.emplace_back(static_cast<double>(d), r);
                } else {
                    fail(ErrorCode::UnorderableSeries,
                         "key '" + key + "': order value '" + text + "' at row " +
                             std::to_string(r + 2) + " is not numeric or a date");
                }
            }
            std::stable_sort(keyed.begin(), keyed.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = keyed[i].second;
        }
    }

    // Parent table, when present.
    std::unordered_map<std::string, Row> parent_rows;
    if (parent) {
        if (parent->rows.empty()) fail(ErrorCode::EmptyDataset, "parent table has no rows");
        const int parent_key = parent->column(key_name);
        if (parent_key < 0)
            fail(ErrorCode::InvalidConfig, "parent table lacks key column '" + key_name + "'");
        std::vector<int> parent_cols;
        for (std::size_t c = 0; c < parent->header.size(); ++c)
            if (static_cast<int>(c) != parent_key) parent_cols.push_back(static_cast<int>(c));
        if (parent_cols.empty()) fail(ErrorCode::InvalidConfig, "parent table has no value columns");
        corpus.parent_schema =
            infer_schema(*parent, parent_cols, cfg.parent_schema_override, cfg.significant_digits);
        for (std::size_t r = 0; r < parent->rows.size(); ++r) {
            Row row;
            for (std::size_t f = 0; f < parent_cols.size(); ++f)
                row.values.push_back(convert_cell(parent->rows[r][parent_cols[f]],
                                                  corpus.parent_schema->fields()[f], r));
            if (!parent_rows.emplace(parent->rows[r][parent_key], std::move(row)).second)
                fail(ErrorCode::MalformedCsv,
                     "duplicate parent key '" + parent->rows[r][parent_key] + "'");
        }
    }

    // Convert rows and window each series to tau_max.
    for (const auto& key : key_order) {
        const auto& row_ids = groups[key];
        const Row* parent_row = nullptr;
        if (parent) {
            auto it = parent_rows.find(key);
            if (it == parent_rows.end())
                fail(ErrorCode::SchemaMismatch, "no parent row for series key '" + key + "'");
            parent_row = &it->second;
        }
        TimeSeries current;
        for (std::size_t r : row_ids) {
            Row row;
            for (std::size_t f = 0; f < field_cols.size(); ++f)
                row.values.push_back(
                    convert_cell(child.rows[r][field_cols[f]], corpus.schema.fields()[f], r));
            current.rows.push_back(std::move(row));
            if (static_cast<int>(current.rows.size()) == cfg.tau_max) {
                corpus.series.push_back(std::move(current));
                corpus.keys.push_back(key);
                if (parent_row) corpus.parents.push_back(*parent_row);
                current = TimeSeries{};
            }
        }
        if (!current.rows.empty()) {
            corpus.series.push_back(std::move(current));
            corpus.keys.push_back(key);
            if (parent_row) corpus.parents.push_back(*parent_row);
        }
    }
    return corpus;
}

TrainingCorpus ingest_corpus(const std::string& child_csv_path, const std::string& parent_csv_path,
                             const IngestConfig& cfg) {
    CsvTable child = read_csv_file(child_csv_path);
    if (parent_csv_path.empty()) return ingest_tables(child, nullptr, cfg);
    CsvTable parent = read_csv_file(parent_csv_path);
    return ingest_tables(child, &parent, cfg);
}

}  // namespace tabdit
