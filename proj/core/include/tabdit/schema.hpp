#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tabdit {

// Token string reserved in every vocabulary to mark padding / end of series.
inline constexpr const char* kEosToken = "[EoS]";

enum class FieldKind { Categorical, Numerical };

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::Categorical;
    // Categorical only: category strings, [EoS] included as the last entry.
    std::vector<std::string> vocabulary;
    // Numerical only.
    bool allows_negative = false;
    bool allows_fractional = false;
    // Ingested date/time columns: unit is "days" or "seconds" and values are
    // offsets from date_origin (same unit, measured from 1970-01-01).
    std::string date_unit;
    std::int64_t date_origin = 0;

    bool is_numerical() const { return kind == FieldKind::Numerical; }
};

// A field value is either a category string or a finite real number.
using FieldValue = std::variant<std::string, double>;

struct Row {
    std::vector<FieldValue> values;
};

struct TimeSeries {
    std::vector<Row> rows;  // length tau >= 1

    std::size_t length() const { return rows.size(); }
};

// One vocabulary in the dense token-id space.
struct VocabInfo {
    std::string name;       // field name, "digit" or "sign"
    int offset = 0;         // first dense token id of this vocabulary
    int size = 0;           // number of entries, [EoS] included
    int eos_local = 0;      // local index of [EoS]
    std::vector<std::string> entries;
};

// Per token position: which vocabulary it draws from.
struct PositionInfo {
    int field = 0;        // owning field index
    int vocab = 0;        // index into Schema::vocabs()
    enum class Role { Category, Sign, Order, Digit } role = Role::Category;
    int digit_index = 0;  // for Role::Digit: 0 = most significant
};

// Dataset schema: field declarations plus the derived token layout.
//
// Token ids are dense non-negative integers. Vocabularies are laid out
// back to back: one per categorical field (declaration order), then the
// shared digit vocabulary, then the shared sign vocabulary when any
// numerical field allows negatives. Within a vocabulary, local ids follow
// entry order and [EoS] is always the last entry; for digits, local id
// equals the digit value.
class Schema {
  public:
    Schema() = default;

    // Validates specs, appends missing [EoS] entries and derives the layout.
    static Schema make(std::vector<FieldSpec> fields, int significant_digits = 4);

    const std::vector<FieldSpec>& fields() const { return fields_; }
    int significant_digits() const { return n_; }

    // Tokens per row (nu): one per categorical field, n+1 (or n+2 with
    // sign) per numerical field.
    int token_width() const { return token_width_; }
    int total_tokens() const { return total_tokens_; }

    const std::vector<VocabInfo>& vocabs() const { return vocabs_; }
    const std::vector<PositionInfo>& positions() const { return positions_; }
    const VocabInfo& vocab_at(int position) const { return vocabs_[positions_[position].vocab]; }

    int digit_vocab() const { return digit_vocab_; }
    int sign_vocab() const { return sign_vocab_; }  // -1 when absent
    bool has_sign_vocab() const { return sign_vocab_ >= 0; }

    // Dense id helpers.
    int token_id(int vocab, int local) const { return vocabs_[vocab].offset + local; }
    int eos_id(int vocab) const { return vocabs_[vocab].offset + vocabs_[vocab].eos_local; }
    bool is_eos(int position, int id) const {
        return id == eos_id(positions_[position].vocab);
    }

    // Local id of a category in a categorical field's vocabulary.
    int category_local(int field, const std::string& value) const;

    std::string to_json() const;
    static Schema from_json(const std::string& text);

    // FNV-1a over the canonical JSON form; embedded in checkpoints.
    std::uint64_t hash() const;

  private:
    std::vector<FieldSpec> fields_;
    int n_ = 4;
    int token_width_ = 0;
    int total_tokens_ = 0;
    std::vector<VocabInfo> vocabs_;
    std::vector<PositionInfo> positions_;
    int digit_vocab_ = -1;
    int sign_vocab_ = -1;
};

}  // namespace tabdit
