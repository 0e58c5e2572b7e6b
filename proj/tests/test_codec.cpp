#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "tabdit/codec.hpp"
#include "tabdit/errors.hpp"
#include "tabdit/rng.hpp"
#include "tabdit/schema.hpp"

using namespace tabdit;

namespace {

FieldSpec numeric_spec(bool negative = false, bool fractional = false) {
    FieldSpec spec{.name = "v", .kind = FieldKind::Numerical};
    spec.allows_negative = negative;
    spec.allows_fractional = fractional;
    return spec;
}

std::vector<int> digits_of(const NumericCode& code) { return code.digits; }

// Reference truncation oracle, independent of the codec: operates on the
// decimal string "<mantissa>e<exp>" with integer arithmetic only.
double truncated_reference(long long mantissa, int exp10, int n) {
    int digit_count = 1;
    for (long long t = mantissa; t >= 10; t /= 10) ++digit_count;
    const int top_place = digit_count - 1 + exp10;   // place of the leading digit
    const int m = top_place > 0 ? top_place : 0;     // clamped magnitude order
    const int lowest_kept = m - n + 1;
    long long kept = mantissa;
    for (int place = exp10; place < lowest_kept; ++place) kept /= 10;
    for (int place = exp10; place < lowest_kept; ++place) kept *= 10;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%llde%d", kept, exp10);
    return std::strtod(buf, nullptr);
}

double value_of(long long mantissa, int exp10) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%llde%d", mantissa, exp10);
    return std::strtod(buf, nullptr);
}

}  // namespace

TEST_CASE("magnitude order prefix examples") {
    const FieldSpec spec = numeric_spec();
    CHECK(encode_numeric(35967, spec, 4).order == 4);
    CHECK(digits_of(encode_numeric(35967, spec, 4)) == std::vector<int>{3, 5, 9, 6});

    CHECK(encode_numeric(35, spec, 4).order == 1);
    CHECK(digits_of(encode_numeric(35, spec, 4)) == std::vector<int>{3, 5, 0, 0});

    const FieldSpec frac = numeric_spec(false, true);
    NumericCode half = encode_numeric(3.5, frac, 4);
    CHECK(half.order == 0);
    CHECK(digits_of(half) == std::vector<int>{3, 5, 0, 0});

    NumericCode zero = encode_numeric(0.0, spec, 4);
    CHECK(zero.order == 0);
    CHECK(digits_of(zero) == std::vector<int>{0, 0, 0, 0});

    const FieldSpec neg = numeric_spec(true);
    NumericCode minus = encode_numeric(-35, neg, 4);
    REQUIRE(minus.sign.has_value());
    CHECK(*minus.sign == '-');
    CHECK(minus.order == 1);
    CHECK(digits_of(minus) == std::vector<int>{3, 5, 0, 0});
}

TEST_CASE("decoding truncates and ignores zero padding slots") {
    NumericCode code{.sign = std::nullopt, .order = 4, .digits = {3, 5, 9, 6}};
    CHECK(decode_numeric(code) == 35960.0);

    // m = 1 < n: trailing two tokens are padding and must be ignored.
    NumericCode noisy{.sign = std::nullopt, .order = 1, .digits = {3, 5, 7, 9}};
    CHECK(decode_numeric(noisy) == 35.0);

    NumericCode zero{.sign = std::nullopt, .order = 0, .digits = {0, 0, 0, 0}};
    CHECK(decode_numeric(zero) == 0.0);

    // Ignored padding slots may even hold [EoS] without harm.
    NumericCode junk{.sign = std::nullopt, .order = 1, .digits = {3, 5, kEosDigit, 9}};
    CHECK(decode_numeric(junk) == 35.0);

    // Fractional fields retain every digit instead.
    NumericCode frac{.sign = std::nullopt, .order = 0, .digits = {3, 5, 0, 0}, .fractional = true};
    CHECK(decode_numeric(frac) == 3.5);
}

TEST_CASE("codec error cases") {
    const FieldSpec spec = numeric_spec();
    CHECK_THROWS_AS(encode_numeric(std::nan(""), spec, 4), Error);
    CHECK_THROWS_AS(encode_numeric(-1.0, spec, 4), Error);
    CHECK_THROWS_AS(encode_numeric(1e10, spec, 4), Error);
    CHECK_THROWS_AS(encode_numeric(3.2e11, spec, 4), Error);
    CHECK_NOTHROW(encode_numeric(9999999999.0, spec, 4));

    NumericCode eos_order{.sign = std::nullopt, .order = kEosDigit, .digits = {1, 2, 3, 4}};
    CHECK_THROWS_AS(decode_numeric(eos_order), Error);
    NumericCode eos_digit{.sign = std::nullopt, .order = 3, .digits = {1, kEosDigit, 3, 4}};
    CHECK_THROWS_AS(decode_numeric(eos_digit), Error);
}

TEST_CASE("roundtrip matches the string truncation oracle") {
    Rng rng(20240811);
    const FieldSpec int_spec = numeric_spec();
    const FieldSpec frac_spec = numeric_spec(false, true);
    const FieldSpec neg_spec = numeric_spec(true, true);

    for (int trial = 0; trial < 100000; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(2, 6));
        const long long mantissa = rng.uniform_int(0, 999999999);
        // integer-valued draw
        {
            const int exp10 = static_cast<int>(rng.uniform_int(0, 3));
            const double v = value_of(mantissa, exp10);
            if (v < 1e10) {
                const double expected = truncated_reference(mantissa, exp10, n);
                CHECK(decode_numeric(encode_numeric(v, int_spec, n)) == expected);
            }
        }
        // fractional draw
        {
            const int exp10 = static_cast<int>(rng.uniform_int(-6, 2));
            const double v = value_of(mantissa, exp10);
            if (v < 1e10) {
                const double expected = truncated_reference(mantissa, exp10, n);
                CHECK(decode_numeric(encode_numeric(v, frac_spec, n)) == expected);
            }
        }
        // signed draw
        {
            const int exp10 = static_cast<int>(rng.uniform_int(-3, 2));
            const double v = value_of(mantissa, exp10);
            if (v < 1e10) {
                const double expected = truncated_reference(mantissa, exp10, n);
                CHECK(decode_numeric(encode_numeric(-v, neg_spec, n)) == -expected);
                CHECK(decode_numeric(encode_numeric(v, neg_spec, n)) == expected);
            }
        }
    }
}

TEST_CASE("truncation error is below one unit of the last kept place") {
    Rng rng(7);
    const FieldSpec spec = numeric_spec(false, true);
    for (int trial = 0; trial < 20000; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(1, 6));
        const double v = rng.uniform(std::pow(10.0, n), 1e10 - 1);
        const NumericCode code = encode_numeric(v, spec, n);
        const int m = code.order;
        REQUIRE(m >= n);
        const double error = std::fabs(decode_numeric(code) - v);
        CHECK(error < std::pow(10.0, m - n + 1));
    }
}

TEST_CASE("tokenized rows always have width nu and survive the roundtrip") {
    FieldSpec category{.name = "type", .kind = FieldKind::Categorical, .vocabulary = {"A", "B", "C"}};
    FieldSpec amount = numeric_spec(true, true);
    amount.name = "amount";
    FieldSpec day{.name = "day", .kind = FieldKind::Numerical};
    Schema schema = Schema::make({category, amount, day}, 4);

    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        Row row;
        row.values.emplace_back(std::string(1, static_cast<char>('A' + rng.uniform_int(0, 2))));
        const double amount_value =
            (rng.bernoulli(0.5) ? -1.0 : 1.0) * value_of(rng.uniform_int(0, 99999), -2);
        row.values.emplace_back(amount_value);
        row.values.emplace_back(static_cast<double>(rng.uniform_int(0, 99999)));

        const auto tokens = tokenize_row(row, schema);
        REQUIRE(static_cast<int>(tokens.size()) == schema.token_width());

        const auto decoded = detokenize_row(tokens, schema);
        REQUIRE(decoded.has_value());
        CHECK(std::get<std::string>(decoded->values[0]) == std::get<std::string>(row.values[0]));
        // Numeric fields come back as their n-digit truncation.
        const double amount_back = std::get<double>(decoded->values[1]);
        CHECK(decode_numeric(encode_numeric(amount_value, amount, 4)) == amount_back);
        // day has 5 digits max, m <= 4, so one trailing digit may truncate
        const double day_back = std::get<double>(decoded->values[2]);
        CHECK(std::fabs(day_back - std::get<double>(row.values[2])) < 10.0);
    }
}

TEST_CASE("a single EoS token anywhere flips the row to end-of-series") {
    FieldSpec category{.name = "type", .kind = FieldKind::Categorical, .vocabulary = {"A", "B"}};
    FieldSpec amount = numeric_spec(true, false);
    amount.name = "amount";
    Schema schema = Schema::make({category, amount}, 4);

    Row row;
    row.values.emplace_back(std::string("B"));
    row.values.emplace_back(-1234.0);
    const auto tokens = tokenize_row(row, schema);

    CHECK(detokenize_row(padding_row_tokens(schema), schema) == std::nullopt);
    for (int pos = 0; pos < schema.token_width(); ++pos) {
        auto corrupted = tokens;
        corrupted[pos] = schema.eos_id(schema.positions()[pos].vocab);
        CHECK(detokenize_row(corrupted, schema) == std::nullopt);
    }
}

TEST_CASE("tokenize rejects out of vocabulary categories and wrong arity") {
    FieldSpec category{.name = "type", .kind = FieldKind::Categorical, .vocabulary = {"A", "B"}};
    Schema schema = Schema::make({category}, 4);
    Row bad_value{.values = {std::string("Z")}};
    CHECK_THROWS_AS(tokenize_row(bad_value, schema), Error);
    Row bad_arity{.values = {std::string("A"), 1.0}};
    CHECK_THROWS_AS(tokenize_row(bad_arity, schema), Error);
}

TEST_CASE("fixed length error probability") {
    CHECK(error_probability_fixed({.q = 1.0, .p = 7}) == 0.0);
    CHECK(error_probability_fixed({.q = 0.5, .p = 1}) == 0.5);
    CHECK(error_probability_fixed({.q = 0.9, .p = 7}) == doctest::Approx(0.5217031).epsilon(1e-9));
    CHECK_THROWS_AS(error_probability_fixed({.q = 0.0, .p = 3}), Error);
    CHECK_THROWS_AS(error_probability_fixed({.q = 1.5, .p = 3}), Error);
}

TEST_CASE("variable range error probability") {
    CHECK(error_probability_variable({.q = 0.9, .p = 7, .m = 1, .n = 4}) ==
          doctest::Approx(0.271).epsilon(1e-9));
    CHECK(error_probability_variable({.q = 1.0, .p = 7, .m = 3, .n = 4}) == 0.0);
    // Large m saturates at the full n+1 tokens.
    CHECK(error_probability_variable({.q = 0.9, .p = 7, .m = 8, .n = 4}) ==
          doctest::Approx(1.0 - std::pow(0.9, 5)).epsilon(1e-12));
}

TEST_CASE("variable range beats the fixed sequence whenever m < p - 2") {
    for (double q = 0.50; q < 0.995; q += 0.01) {
        for (int p = 3; p <= 9; ++p) {
            for (int m = 0; m < p - 2; ++m) {
                const double fixed = error_probability_fixed({.q = q, .p = p});
                const double variable = error_probability_variable({.q = q, .p = p, .m = m, .n = 4});
                CHECK(variable < fixed);
            }
        }
    }
    // Equality holds at q = 1 (both zero).
    CHECK(error_probability_fixed({.q = 1.0, .p = 7}) ==
          error_probability_variable({.q = 1.0, .p = 7, .m = 1, .n = 4}));
}

TEST_CASE("significant digit lengths and the n recommendation rule") {
    CHECK(significant_length(87600) == 3);
    CHECK(significant_length(876) == 3);
    CHECK(significant_length(0) == 1);
    CHECK(significant_length(3.5) == 2);
    CHECK(significant_length(1000000) == 1);
    CHECK(significant_length(-35) == 2);

    // Half the values have 1 significant digit, half have 2:
    // mu = 1.5, sigma = 0.5, first integer above mu + 2 sigma = 3.
    std::vector<double> values;
    for (int i = 0; i < 50; ++i) {
        values.push_back(7.0);
        values.push_back(35.0);
    }
    const DigitLengthStats stats = digit_length_stats(values);
    CHECK(stats.mean == doctest::Approx(1.5));
    CHECK(stats.stddev == doctest::Approx(0.5));
    CHECK(stats.recommended_n == 3);
}
