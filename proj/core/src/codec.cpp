#include "tabdit/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "tabdit/errors.hpp"

namespace tabdit {

namespace {

// Decimal expansion of |v| as 15 significant digits plus exponent, so that
// digits[i] is the coefficient of 10^(exponent - i). 15 digits round-trip
// every decimal literal of that precision, so values like 0.29 yield
// [2,9,0,...] rather than the raw binary expansion [2,8,9,9,...].
struct DecimalExpansion {
    int digits[15];
    int exponent;
};

DecimalExpansion expand_decimal(double magnitude) {
    // 17 significant digits identify the double exactly; never carries
    // across a power of ten because the decimal grid is finer than an ulp.
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", magnitude);

    int raw[17];
    raw[0] = buf[0] - '0';
    for (int i = 1; i < 17; ++i) raw[i] = buf[i + 1] - '0';
    const char* epos = std::strchr(buf, 'e');
    int exponent = std::atoi(epos + 1);

    DecimalExpansion out;
    std::copy(raw, raw + 15, out.digits);
    if (raw[15] >= 5) {  // round half-up at digit 15
        int i = 14;
        while (i >= 0 && out.digits[i] == 9) out.digits[i--] = 0;
        if (i < 0) {
            out.digits[0] = 1;
            ++exponent;
        } else {
            ++out.digits[i];
        }
    }
    out.exponent = exponent;
    return out;
}

int digit_at(const DecimalExpansion& dec, int place) {
    const int idx = dec.exponent - place;
    return (idx >= 0 && idx < 15) ? dec.digits[idx] : 0;
}

}  // namespace

NumericCode encode_numeric(double value, const FieldSpec& spec, int significant_digits) {
    const int n = significant_digits;
    if (!std::isfinite(value)) fail(ErrorCode::NonFinite, "numeric field '" + spec.name + "'");
    if (value < 0 && !spec.allows_negative)
        fail(ErrorCode::NegativeNotAllowed, "field '" + spec.name + "'");
    const double magnitude = std::fabs(value);
    if (magnitude >= 1e10) fail(ErrorCode::MagnitudeOverflow, "|v| >= 1e10");

    const DecimalExpansion dec = expand_decimal(magnitude);
    if (dec.exponent >= 10) fail(ErrorCode::MagnitudeOverflow, "|v| rounds to 1e10");

    NumericCode code;
    code.fractional = spec.allows_fractional;
    if (spec.allows_negative) code.sign = value < 0 ? '-' : '+';
    // m is undefined by the representation for 0 < |v| < 1; clamp to 0 and
    // truncate below 10^(1-n).
    code.order = std::max(dec.exponent, 0);
    code.digits.resize(n);
    for (int j = 0; j < n; ++j) code.digits[j] = digit_at(dec, code.order - j);
    return code;
}

double decode_numeric(const NumericCode& code) {
    if (code.order < 0 || code.order >= kEosDigit)
        fail(ErrorCode::MalformedCode, "order token is not a digit");
    const int n = static_cast<int>(code.digits.size());
    const int m = code.order;
    // Integer-valued fields: generation errors in the last n-m-1 zero-padding
    // tokens are ignored. Fractional fields retain all n digits.
    const int retained = code.fractional ? n : std::min(n, m + 1);

    // Assemble "d0.d1d2...e<m>" and let strtod do the correctly rounded
    // decimal-to-binary conversion, so short decimals decode exactly.
    char buf[48];
    int len = 0;
    if (code.sign) buf[len++] = *code.sign;
    for (int j = 0; j < retained; ++j) {
        const int d = code.digits[j];
        if (d < 0 || d >= kEosDigit)
            fail(ErrorCode::MalformedCode, "non-digit token in a retained position");
        if (j == 1) buf[len++] = '.';
        buf[len++] = static_cast<char>('0' + d);
    }
    len += std::snprintf(buf + len, sizeof(buf) - len, "e%d", m);
    buf[len] = '\0';
    return std::strtod(buf, nullptr);
}

std::vector<int> tokenize_row(const Row& row, const Schema& schema) {
    if (row.values.size() != schema.fields().size())
        fail(ErrorCode::ShapeMismatch, "row arity does not match schema");

    std::vector<int> tokens;
    tokens.reserve(schema.token_width());
    for (std::size_t f = 0; f < schema.fields().size(); ++f) {
        const FieldSpec& spec = schema.fields()[f];
        if (spec.kind == FieldKind::Categorical) {
            const auto* value = std::get_if<std::string>(&row.values[f]);
            if (!value)
                fail(ErrorCode::OutOfVocabulary,
                     "expected a category string for field '" + spec.name + "'");
            const int local = schema.category_local(static_cast<int>(f), *value);
            tokens.push_back(schema.token_id(schema.positions()[tokens.size()].vocab, local));
        } else {
            const auto* value = std::get_if<double>(&row.values[f]);
            if (!value) fail(ErrorCode::NonFinite, "expected a number for field '" + spec.name + "'");
            const NumericCode code = encode_numeric(*value, spec, schema.significant_digits());
            if (code.sign)
                tokens.push_back(schema.token_id(schema.sign_vocab(), *code.sign == '-' ? 0 : 1));
            tokens.push_back(schema.token_id(schema.digit_vocab(), code.order));
            for (int d : code.digits) tokens.push_back(schema.token_id(schema.digit_vocab(), d));
        }
    }
    return tokens;
}

std::vector<int> padding_row_tokens(const Schema& schema) {
    std::vector<int> tokens(schema.token_width());
    for (int i = 0; i < schema.token_width(); ++i)
        tokens[i] = schema.eos_id(schema.positions()[i].vocab);
    return tokens;
}

std::optional<Row> detokenize_row(const std::vector<int>& tokens, const Schema& schema) {
    if (static_cast<int>(tokens.size()) != schema.token_width())
        fail(ErrorCode::ShapeMismatch, "token sequence length != nu");

    for (int i = 0; i < schema.token_width(); ++i) {
        const VocabInfo& vocab = schema.vocab_at(i);
        const int local = tokens[i] - vocab.offset;
        if (local < 0 || local >= vocab.size)
            fail(ErrorCode::OutOfVocabulary, "token id outside position vocabulary");
        if (local == vocab.eos_local) return std::nullopt;  // end of series
    }

    Row row;
    row.values.reserve(schema.fields().size());
    int pos = 0;
    for (const FieldSpec& spec : schema.fields()) {
        if (spec.kind == FieldKind::Categorical) {
            const VocabInfo& vocab = schema.vocab_at(pos);
            row.values.emplace_back(vocab.entries[tokens[pos] - vocab.offset]);
            ++pos;
            continue;
        }
        NumericCode code;
        code.fractional = spec.allows_fractional;
        if (spec.allows_negative) {
            const int local = tokens[pos] - schema.vocabs()[schema.sign_vocab()].offset;
            code.sign = local == 0 ? '-' : '+';
            ++pos;
        }
        const int digit_offset = schema.vocabs()[schema.digit_vocab()].offset;
        code.order = tokens[pos] - digit_offset;
        ++pos;
        code.digits.resize(schema.significant_digits());
        for (int j = 0; j < schema.significant_digits(); ++j, ++pos)
            code.digits[j] = tokens[pos] - digit_offset;
        row.values.emplace_back(decode_numeric(code));
    }
    return row;
}

double error_probability_fixed(const DigitErrorQuery& query) {
    if (!(query.q > 0.0 && query.q <= 1.0))
        fail(ErrorCode::InvalidProbability, "q must be in (0, 1]");
    if (query.p < 1) fail(ErrorCode::InvalidProbability, "p must be >= 1");
    return 1.0 - std::pow(query.q, query.p);
}

double error_probability_variable(const DigitErrorQuery& query) {
    if (!(query.q > 0.0 && query.q <= 1.0))
        fail(ErrorCode::InvalidProbability, "q must be in (0, 1]");
    if (query.m < 0 || query.n < 1) fail(ErrorCode::InvalidProbability, "m >= 0 and n >= 1 required");
    const int tokens = std::min(query.n + 1, query.m + 2);
    return 1.0 - std::pow(query.q, tokens);
}

int significant_length(double value) {
    if (!std::isfinite(value)) fail(ErrorCode::NonFinite, "significant_length");
    const double magnitude = std::fabs(value);
    if (magnitude == 0.0) return 1;
    const DecimalExpansion dec = expand_decimal(magnitude);
    int last = 0;
    for (int i = 0; i < 15; ++i)
        if (dec.digits[i] != 0) last = i;
    return last + 1;
}

DigitLengthStats digit_length_stats(const std::vector<double>& values) {
    if (values.empty()) fail(ErrorCode::EmptyDataset, "digit_length_stats");
    DigitLengthStats stats;
    stats.count = values.size();
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : values) {
        const double len = static_cast<double>(significant_length(v));
        sum += len;
        sum_sq += len * len;
    }
    const double count = static_cast<double>(values.size());
    stats.mean = sum / count;
    stats.stddev = std::sqrt(std::max(0.0, sum_sq / count - stats.mean * stats.mean));
    stats.recommended_n = static_cast<int>(std::floor(stats.mean + 2.0 * stats.stddev)) + 1;
    return stats;
}

}  // namespace tabdit
