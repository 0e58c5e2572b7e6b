#include "tabdit/schema.hpp"

#include <algorithm>
#include <unordered_set>

#include "json.hpp"

#include "tabdit/errors.hpp"

namespace tabdit {

using nlohmann::json;

Schema Schema::make(std::vector<FieldSpec> fields, int significant_digits) {
    if (fields.empty()) fail(ErrorCode::InvalidConfig, "schema needs at least one field");
    if (significant_digits < 1 || significant_digits > 10)
        fail(ErrorCode::InvalidConfig, "significant_digits must be in [1, 10]");

    Schema schema;
    schema.n_ = significant_digits;

    bool any_negative = false;
    std::unordered_set<std::string> names;
    for (auto& field : fields) {
        if (!names.insert(field.name).second)
            fail(ErrorCode::InvalidConfig, "duplicate field name '" + field.name + "'");
        if (field.kind == FieldKind::Categorical) {
            if (std::count(field.vocabulary.begin(), field.vocabulary.end(), kEosToken) == 0)
                field.vocabulary.push_back(kEosToken);
            std::unordered_set<std::string> seen;
            for (const auto& entry : field.vocabulary)
                if (!seen.insert(entry).second)
                    fail(ErrorCode::InvalidConfig,
                         "duplicate vocabulary entry '" + entry + "' in field '" + field.name + "'");
            if (field.vocabulary.size() < 2)
                fail(ErrorCode::InvalidConfig, "field '" + field.name + "' has an empty vocabulary");
        } else {
            any_negative = any_negative || field.allows_negative;
        }
    }
    schema.fields_ = std::move(fields);

    // Vocabulary layout: categorical fields first, then digits, then sign.
    int offset = 0;
    std::vector<int> field_vocab(schema.fields_.size(), -1);
    for (std::size_t f = 0; f < schema.fields_.size(); ++f) {
        const auto& field = schema.fields_[f];
        if (field.kind != FieldKind::Categorical) continue;
        VocabInfo vocab;
        vocab.name = field.name;
        vocab.offset = offset;
        vocab.size = static_cast<int>(field.vocabulary.size());
        vocab.entries = field.vocabulary;
        vocab.eos_local = static_cast<int>(
            std::find(vocab.entries.begin(), vocab.entries.end(), kEosToken) - vocab.entries.begin());
        offset += vocab.size;
        field_vocab[f] = static_cast<int>(schema.vocabs_.size());
        schema.vocabs_.push_back(std::move(vocab));
    }

    const bool any_numeric = std::any_of(schema.fields_.begin(), schema.fields_.end(),
                                         [](const FieldSpec& f) { return f.is_numerical(); });
    if (any_numeric) {
        VocabInfo digits;
        digits.name = "digit";
        digits.offset = offset;
        for (char c = '0'; c <= '9'; ++c) digits.entries.push_back(std::string(1, c));
        digits.entries.push_back(kEosToken);
        digits.size = 11;
        digits.eos_local = 10;
        offset += digits.size;
        schema.digit_vocab_ = static_cast<int>(schema.vocabs_.size());
        schema.vocabs_.push_back(std::move(digits));
    }
    if (any_negative) {
        VocabInfo sign;
        sign.name = "sign";
        sign.offset = offset;
        sign.entries = {"-", "+", kEosToken};
        sign.size = 3;
        sign.eos_local = 2;
        offset += sign.size;
        schema.sign_vocab_ = static_cast<int>(schema.vocabs_.size());
        schema.vocabs_.push_back(std::move(sign));
    }
    schema.total_tokens_ = offset;

    for (std::size_t f = 0; f < schema.fields_.size(); ++f) {
        const auto& field = schema.fields_[f];
        PositionInfo pos;
        pos.field = static_cast<int>(f);
        if (field.kind == FieldKind::Categorical) {
            pos.vocab = field_vocab[f];
            pos.role = PositionInfo::Role::Category;
            schema.positions_.push_back(pos);
            continue;
        }
        if (field.allows_negative) {
            pos.vocab = schema.sign_vocab_;
            pos.role = PositionInfo::Role::Sign;
            schema.positions_.push_back(pos);
        }
        pos.vocab = schema.digit_vocab_;
        pos.role = PositionInfo::Role::Order;
        schema.positions_.push_back(pos);
        for (int k = 0; k < schema.n_; ++k) {
            pos.role = PositionInfo::Role::Digit;
            pos.digit_index = k;
            schema.positions_.push_back(pos);
        }
    }
    schema.token_width_ = static_cast<int>(schema.positions_.size());
    return schema;
}

int Schema::category_local(int field, const std::string& value) const {
    const auto& vocabulary = fields_[field].vocabulary;
    const auto it = std::find(vocabulary.begin(), vocabulary.end(), value);
    if (it == vocabulary.end())
        fail(ErrorCode::OutOfVocabulary,
             "value '" + value + "' not in vocabulary of field '" + fields_[field].name + "'");
    return static_cast<int>(it - vocabulary.begin());
}

std::string Schema::to_json() const {
    json doc;
    doc["n"] = n_;
    doc["fields"] = json::array();
    for (const auto& field : fields_) {
        json f;
        f["name"] = field.name;
        if (field.kind == FieldKind::Categorical) {
            f["kind"] = "categorical";
            f["vocabulary"] = field.vocabulary;
        } else {
            f["kind"] = "numerical";
            f["allows_negative"] = field.allows_negative;
            f["allows_fractional"] = field.allows_fractional;
            if (!field.date_unit.empty()) {
                f["date_unit"] = field.date_unit;
                f["date_origin"] = field.date_origin;
            }
        }
        doc["fields"].push_back(std::move(f));
    }
    return doc.dump(2);
}

Schema Schema::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("schema JSON parse error: ") + e.what());
    }
    std::vector<FieldSpec> fields;
    for (const auto& f : doc.at("fields")) {
        FieldSpec spec;
        spec.name = f.at("name").get<std::string>();
        const auto kind = f.at("kind").get<std::string>();
        if (kind == "categorical") {
            spec.kind = FieldKind::Categorical;
            spec.vocabulary = f.at("vocabulary").get<std::vector<std::string>>();
        } else if (kind == "numerical") {
            spec.kind = FieldKind::Numerical;
            spec.allows_negative = f.value("allows_negative", false);
            spec.allows_fractional = f.value("allows_fractional", false);
            spec.date_unit = f.value("date_unit", "");
            spec.date_origin = f.value("date_origin", static_cast<std::int64_t>(0));
        } else {
            fail(ErrorCode::InvalidConfig, "unknown field kind '" + kind + "'");
        }
        fields.push_back(std::move(spec));
    }
    return make(std::move(fields), doc.value("n", 4));
}

std::uint64_t Schema::hash() const {
    const std::string canonical = to_json();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace tabdit
