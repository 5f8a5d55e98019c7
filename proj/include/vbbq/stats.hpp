#pragma once

// Small statistics helpers for experiment reports and statistical tests.

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vbbq::stats {

struct Interval {
    double lo = 0, hi = 0;
};

// Wilson score interval; z = 1.96 for 95%.
inline Interval wilson(std::uint64_t successes, std::uint64_t n, double z = 1.96) {
    if (n == 0) return {0, 1};
    const double p = double(successes) / double(n), nn = double(n);
    const double den = 1 + z * z / nn;
    const double centre = (p + z * z / (2 * nn)) / den;
    const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Binomial standard deviation of a frequency.
inline double sigma(double p, std::uint64_t n) { return n ? std::sqrt(p * (1 - p) / double(n)) : 0; }

// Pearson chi-square goodness of fit against the uniform distribution; returns
// the p-value.
inline double chi2_uniform_p(const std::vector<std::uint64_t>& counts) {
    if (counts.size() < 2) throw std::invalid_argument("chi2: need at least two cells");
    double n = 0;
    for (auto c : counts) n += double(c);
    const double e = n / double(counts.size());
    double x2 = 0;
    for (auto c : counts) x2 += (double(c) - e) * (double(c) - e) / e;
    boost::math::chi_squared dist(double(counts.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, x2));
}

// Chi-square test of homogeneity between two count vectors over the same
// cells (cells empty in both are dropped); returns the p-value.
inline double chi2_two_sample_p(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("chi2: cell count mismatch");
    double na = 0, nb = 0;
    for (auto c : a) na += double(c);
    for (auto c : b) nb += double(c);
    double x2 = 0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double tot = double(a[i] + b[i]);
        if (tot == 0) continue;
        ++cells;
        const double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
        x2 += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
    }
    if (cells < 2) return 1.0;
    boost::math::chi_squared dist(double(cells - 1));
    return boost::math::cdf(boost::math::complement(dist, x2));
}

}  // namespace vbbq::stats
