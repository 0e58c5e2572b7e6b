#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabdit/csv.hpp"
#include "tabdit/schema.hpp"

namespace tabdit {

struct IngestConfig {
    std::string series_key;  // defaults to the first child column
    std::string order_by;    // optional ordering column (numeric or date)
    int tau_max = 50;
    int significant_digits = 4;
    std::optional<Schema> schema_override;
    std::optional<Schema> parent_schema_override;
};

// The ingested dataset: windows of at most tau_max rows, one key per
// window, and (when a parent table is supplied) one parent row per window.
struct TrainingCorpus {
    Schema schema;
    std::vector<TimeSeries> series;
    std::vector<std::string> keys;
    std::optional<Schema> parent_schema;
    std::vector<Row> parents;

    std::size_t total_rows() const {
        std::size_t total = 0;
        for (const auto& s : series) total += s.rows.size();
        return total;
    }
};

TrainingCorpus ingest_corpus(const std::string& child_csv_path, const std::string& parent_csv_path,
                             const IngestConfig& cfg);
// Same inference over already-parsed tables (used by tests and evaluate).
TrainingCorpus ingest_tables(const CsvTable& child, const CsvTable* parent, const IngestConfig& cfg);

// Strict full-string numeric parse (finite values only).
bool parse_number(const std::string& text, double& out);
// "YYYY-MM-DD" with optional " HH:MM:SS" / "THH:MM:SS" suffix; returns the
// value in days or seconds since 1970-01-01.
bool parse_date(const std::string& text, std::int64_t& value, bool& has_time);

std::int64_t days_from_civil(int year, int month, int day);
void civil_from_days(std::int64_t days, int& year, int& month, int& day);

// Rendering used by the generation CSV writer: dates render back through
// the field's origin and unit, other numerics use a stable decimal form.
std::string render_value(const FieldValue& value, const FieldSpec& spec);

}  // namespace tabdit
