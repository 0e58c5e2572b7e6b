#pragma once

#include <optional>
#include <vector>

#include "tabdit/schema.hpp"

namespace tabdit {

// Local digit-vocabulary id of [EoS] (digits '0'..'9' map to 0..9).
inline constexpr int kEosDigit = 10;

// Variable-range decimal code Q = [S?, O, D_1 .. D_n]:
// an optional sign token, the magnitude-order prefix O (= exponent m of
// |v|, clamped to [0, 9]) and the n most significant digits, right-padded
// with zeros when m < n.
struct NumericCode {
    std::optional<char> sign;  // '-' or '+', present iff the field allows negatives
    int order = 0;             // 0..9, or kEosDigit when carrying a raw [EoS] token
    std::vector<int> digits;   // length n, entries 0..9 or kEosDigit
    // When false (integer-valued field), decode ignores the trailing
    // n-m-1 digits as zero padding; when true they carry fractional
    // digits and are retained.
    bool fractional = false;
};

NumericCode encode_numeric(double value, const FieldSpec& spec, int significant_digits);
double decode_numeric(const NumericCode& code);

// Row <-> dense token ids (length = schema.token_width()).
std::vector<int> tokenize_row(const Row& row, const Schema& schema);
std::vector<int> padding_row_tokens(const Schema& schema);

// Any [EoS] token anywhere signals end of series (nullopt).
std::optional<Row> detokenize_row(const std::vector<int>& tokens, const Schema& schema);

// Appendix-style decoding-error probabilities under a uniform per-token
// correctness probability q.
struct DigitErrorQuery {
    double q = 1.0;  // per-token correctness probability, in (0, 1]
    int p = 1;       // fixed-sequence digit length
    int m = 0;       // magnitude exponent
    int n = 4;       // significant-digit count
};

// Fixed-length digit sequence: 1 - q^p.
double error_probability_fixed(const DigitErrorQuery& query);
// Variable-range code: 1 - q^min(n+1, m+2).
double error_probability_variable(const DigitErrorQuery& query);

// Number of significant decimal digits of |v|: leading digit through the
// last nonzero digit, trailing zeros stripped (1 for v = 0).
int significant_length(double value);

struct DigitLengthStats {
    double mean = 0.0;    // mu_S
    double stddev = 0.0;  // sigma_S
    int recommended_n = 1;  // first integer greater than mu_S + 2*sigma_S
    std::size_t count = 0;
};

DigitLengthStats digit_length_stats(const std::vector<double>& values);

}  // namespace tabdit
