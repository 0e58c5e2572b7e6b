#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tabdit/errors.hpp"
#include "tabdit/schema.hpp"

using namespace tabdit;

namespace {

Schema mixed_schema() {
    FieldSpec category{.name = "type", .kind = FieldKind::Categorical, .vocabulary = {"A", "B", "C"}};
    FieldSpec amount{.name = "amount", .kind = FieldKind::Numerical};
    amount.allows_negative = true;
    amount.allows_fractional = true;
    FieldSpec day{.name = "day", .kind = FieldKind::Numerical};
    return Schema::make({category, amount, day}, 4);
}

}  // namespace

TEST_CASE("token width counts one slot per categorical and n+1 or n+2 per numerical") {
    Schema schema = mixed_schema();
    // type: 1, amount: sign + order + 4 digits, day: order + 4 digits
    CHECK(schema.token_width() == 1 + 6 + 5);
    CHECK(schema.significant_digits() == 4);
}

TEST_CASE("every vocabulary carries exactly one EoS entry") {
    Schema schema = mixed_schema();
    for (const auto& vocab : schema.vocabs()) {
        int eos_count = 0;
        for (const auto& entry : vocab.entries)
            if (entry == kEosToken) ++eos_count;
        CHECK(eos_count == 1);
        CHECK(vocab.entries[vocab.eos_local] == kEosToken);
    }
}

TEST_CASE("vocabulary offsets are dense and non-overlapping") {
    Schema schema = mixed_schema();
    int expected_offset = 0;
    for (const auto& vocab : schema.vocabs()) {
        CHECK(vocab.offset == expected_offset);
        expected_offset += vocab.size;
    }
    CHECK(schema.total_tokens() == expected_offset);
    // digit local ids equal digit values
    const auto& digits = schema.vocabs()[schema.digit_vocab()];
    CHECK(digits.entries[7] == "7");
    CHECK(digits.eos_local == 10);
}

TEST_CASE("positions map fields to their vocabularies in declaration order") {
    Schema schema = mixed_schema();
    const auto& positions = schema.positions();
    CHECK(positions[0].role == PositionInfo::Role::Category);
    CHECK(positions[1].role == PositionInfo::Role::Sign);
    CHECK(positions[2].role == PositionInfo::Role::Order);
    CHECK(positions[3].role == PositionInfo::Role::Digit);
    CHECK(positions[3].digit_index == 0);
    CHECK(positions[7].role == PositionInfo::Role::Order);  // start of "day"
    for (const auto& pos : positions) CHECK(pos.vocab >= 0);
}

TEST_CASE("json round trip preserves layout and hash") {
    Schema schema = mixed_schema();
    Schema reparsed = Schema::from_json(schema.to_json());
    CHECK(reparsed.token_width() == schema.token_width());
    CHECK(reparsed.total_tokens() == schema.total_tokens());
    CHECK(reparsed.hash() == schema.hash());

    // Renaming a field must change the hash.
    auto fields = schema.fields();
    fields[0].name = "kind2";
    Schema renamed = Schema::make(fields, 4);
    CHECK(renamed.hash() != schema.hash());
}

TEST_CASE("schema validation rejects duplicates") {
    FieldSpec a{.name = "x", .kind = FieldKind::Categorical, .vocabulary = {"A", "A"}};
    CHECK_THROWS_AS(Schema::make({a}), Error);

    FieldSpec b{.name = "x", .kind = FieldKind::Categorical, .vocabulary = {"A"}};
    FieldSpec c{.name = "x", .kind = FieldKind::Numerical};
    CHECK_THROWS_AS(Schema::make({b, c}), Error);
}

TEST_CASE("sign vocabulary appears only when a field allows negatives") {
    FieldSpec day{.name = "day", .kind = FieldKind::Numerical};
    Schema schema = Schema::make({day}, 4);
    CHECK_FALSE(schema.has_sign_vocab());
    CHECK(schema.token_width() == 5);
}
