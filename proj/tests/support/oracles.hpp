#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace testsupport {

// Exact fraction reduced to lowest terms with a positive denominator. Kept
// deliberately separate from the library's Rational class so formula tests
// compare two independent derivations of the same quantity.
struct Frac {
    long long num = 0;
    long long den = 1;
    bool operator==(const Frac&) const = default;
};

Frac frac(long long n, long long d);

// True when num/den (den > 0) lies inside [0, 100].
bool band_in_range(long long num, long long den);

// Percentage band -> 1..5 score via raw cross-multiplication.
// Precondition: band_in_range(num, den).
int band_score(long long num, long long den);

// clamp(100 * (1 - violations / max(n_a, n_b)), 0, 100); empty when both
// frames have no structures at all.
std::optional<Frac> geom_pct(int n_a, int n_b, int appear, int disappear, int layout);

// clamp(100 * n_match / min(n_a, n_b), 0, 100) with n_match capped at the
// smaller side; empty when either frame shows no props.
std::optional<Frac> prop_pct(int n_match, int n_a, int n_b);

// Mean of a list of fractions; empty for an empty list.
std::optional<Frac> mean(const std::vector<Frac>& xs);

struct GeomDiff {
    int n_a = 0, n_b = 0, appear = 0, disappear = 0, layout = 0;
    bool operator==(const GeomDiff&) const = default;
};

// Brute-force diff of two "base@placement" structure lists.
GeomDiff structure_diff(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct PropMatch {
    int n_a = 0, n_b = 0, n_match = 0;
    bool operator==(const PropMatch&) const = default;
};

// First mention of each prop name wins; a match is same name + same state.
PropMatch prop_match(const std::vector<std::pair<std::string, std::string>>& a,
                     const std::vector<std::pair<std::string, std::string>>& b);

}  // namespace testsupport
