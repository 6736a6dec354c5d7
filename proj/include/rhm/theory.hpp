#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rhm/distribution.hpp"
#include "rhm/error.hpp"
#include "rhm/grammar.hpp"

namespace rhm {

enum class Provenance { theory, empirical, mc };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::theory: return "theory";
        case Provenance::empirical: return "empirical";
        case Provenance::mc: return "mc";
    }
    return "theory";
}

struct CurvePoint {
    double P = 0.0;
    double value = 0.0;
    std::optional<double> se;
};

struct CurveSeries {
    std::string label;
    Provenance provenance = Provenance::theory;
    std::vector<CurvePoint> points;

    std::vector<double> xs() const {
        std::vector<double> out;
        for (const auto& p : points) out.push_back(p.P);
        return out;
    }
    std::vector<double> values() const {
        std::vector<double> out;
        for (const auto& p : points) out.push_back(p.value);
        return out;
    }
};

enum class Task { classification, next_token };

struct SampleComplexity {
    std::uint32_t level = 1;
    std::uint32_t rank = 1;
    double threshold = 0.0;
};

struct SampleComplexitySet {
    Task task = Task::classification;
    std::vector<SampleComplexity> entries;
    bool interleaved = false;  ///< some P_{ℓ,1} ≤ P_{ℓ−1,m}

    double at(std::uint32_t level, std::uint32_t rank) const {
        for (const auto& e : entries)
            if (e.level == level && e.rank == rank) return e.threshold;
        throw ParameterError("no threshold for that (level, rank)");
    }
};

/// Increasing grid with `count` log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw ParameterError("log grid needs 0 < lo < hi and count >= 2");
    std::vector<double> out(count);
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo * std::exp(step * static_cast<double>(i));
    out.back() = hi;
    return out;
}

/// Least-squares slope of log y against log x; points with y ≤ 0 are skipped.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
        const double x = std::log(xs[i]), y = std::log(ys[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        ++n;
    }
    if (n < 2) throw ParameterError("slope needs at least two positive points");
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw ParameterError("slope needs distinct abscissae");
    return (n * sxy - sx * sy) / denom;
}

/// Σ_{n ≥ N} n^{-s} by Euler–Maclaurin; N ≥ 10 keeps the Bernoulli series far
/// inside its convergence region.
inline double zeta_tail(double s, double N) {
    static constexpr double bernoulli[] = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6, -3617.0 / 510};
    double sum = std::pow(N, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(N, -s);
    double rising = s;               // s(s+1)…(s+2j−2)
    double factorial = 2.0;          // (2j)!
    double power = std::pow(N, -s - 1.0);
    for (int j = 1; j <= 8; ++j) {
        sum += bernoulli[j - 1] / factorial * rising * power;
        rising *= (s + 2 * j - 1) * (s + 2 * j);
        factorial *= (2 * j + 1) * (2 * j + 2);
        power /= N * N;
    }
    return sum;
}

inline double zeta(double s) {
    if (!(s > 1.0)) throw ParameterError("zeta needs s > 1");
    constexpr int N = 20;
    double head = 0.0;
    for (int n = N - 1; n >= 1; --n) head += std::pow(n, -s);
    return head + zeta_tail(s, N);
}

/// Fraction of test data whose feature is absent from P training draws.
inline double hutter_error(const RuleDistribution& f, double P) {
    if (P < 0.0) throw ParameterError("P must be non-negative");
    double eps = 0.0;
    for (double w : f.weights()) eps += w * std::pow(1.0 - w, P);
    return eps;
}

/// Same for the unbounded Zipf law f_k = k^{-(1+a)}/ζ(1+a).
inline double hutter_error_unbounded(double a, double P) {
    if (!(a > 0.0)) throw ParameterError("zipf exponent must be positive");
    if (P < 0.0) throw ParameterError("P must be non-negative");
    const double s = 1.0 + a;
    const double z = zeta(s);
    double eps = 0.0;
    std::uint64_t k = 1;
    // Sum exactly while P f_k is not small, then expand (1-f)^P to second order.
    for (;; ++k) {
        const double f = std::pow(static_cast<double>(k), -s) / z;
        if (P * f < 1e-4 && k >= 20) break;
        eps += f * std::pow(1.0 - f, P);
    }
    const double t1 = zeta_tail(s, static_cast<double>(k)) / z;
    const double t2 = zeta_tail(2 * s, static_cast<double>(k)) / (z * z);
    const double t3 = zeta_tail(3 * s, static_cast<double>(k)) / (z * z * z);
    return eps + t1 - P * t2 + 0.5 * P * (P - 1) * t3;
}

namespace detail {

inline std::uint32_t zipf_level(const RhmParams& p) { return p.zipf_layer.value_or(1); }

inline double block_count(const RhmParams& p) {
    return std::pow(static_cast<double>(p.s), static_cast<double>(p.L - zipf_level(p)));
}

inline double zipf_exponent_of(const RhmParams& p) {
    if (!p.zipf_layer) throw ParameterError("closed-form asymptote needs a zipf layer");
    if (!(p.zipf_exponent > 0.0)) throw ParameterError("zipf exponent must be positive");
    return p.zipf_exponent;
}

}  // namespace detail

/// P*_k = v m^{L−1}/f_k for the rule distribution at the zipf layer.
inline SampleComplexitySet class_sample_complexities(const RhmParams& p) {
    p.validate();
    const auto f = make_distribution(p.m, p.kind_at(detail::zipf_level(p)));
    const double base = p.v * std::pow(static_cast<double>(p.m), static_cast<double>(p.L - 1));
    SampleComplexitySet out;
    out.task = Task::classification;
    for (std::uint32_t k = 1; k <= p.m; ++k) {
        const double w = f.weight(k);
        out.entries.push_back({detail::zipf_level(p), k, w > 0.0 ? base / w : std::numeric_limits<double>::infinity()});
    }
    return out;
}

/// Probability mass of the rules resolvable with P samples, Σ_{P*_k < P} f_k.
inline double resolved_mass(const RhmParams& p, double P) {
    const auto f = make_distribution(p.m, p.kind_at(detail::zipf_level(p)));
    const auto thresholds = class_sample_complexities(p);
    double mass = 0.0;
    bool all = true;
    for (const auto& e : thresholds.entries) {
        if (e.threshold < P) mass += f.weight(e.rank);
        else if (f.weight(e.rank) > 0.0) all = false;
    }
    return all ? 1.0 : mass;  // exact once every reachable rank is resolved
}

/// Number of resolvable ranks k(P).
inline std::uint32_t resolved_ranks(const RhmParams& p, double P) {
    std::uint32_t n = 0;
    for (const auto& e : class_sample_complexities(p).entries)
        if (e.threshold < P) ++n;
    return n;
}

/// ε(P) = 1 − (Σ_{P*_k < P} f_k)^{s^{L−ℓ_z}}.
inline double class_error(const RhmParams& p, double P) {
    return 1.0 - std::pow(resolved_mass(p, P), detail::block_count(p));
}

inline CurveSeries class_learning_curve(const RhmParams& p, const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1])))
            throw ParameterError("P grid must be positive and strictly increasing");
    CurveSeries out;
    out.label = "class-error(" + describe(p.kind_at(detail::zipf_level(p))) + ")";
    out.provenance = Provenance::theory;
    for (double P : grid) out.points.push_back({P, class_error(p, P), std::nullopt});
    return out;
}

/// c = 1/(a ζ(1+a)).
inline double asymptote_constant(double a) {
    if (!(a > 0.0)) throw ParameterError("zipf exponent must be positive");
    return 1.0 / (a * zeta(1.0 + a));
}

/// Large-P form of 1 − resolved_mass: c (P/(v m^{L−1}))^{−a/(1+a)}.
inline double unresolved_mass_asymptote(const RhmParams& p, double P) {
    const double a = detail::zipf_exponent_of(p);
    const double x = P / (p.v * std::pow(static_cast<double>(p.m), static_cast<double>(p.L - 1)));
    return asymptote_constant(a) * std::pow(x, -a / (1.0 + a));
}

/// s^{L−ℓ_z} · c · (P/(v m^{L−1}))^{−a/(1+a)}.
inline double class_asymptote(const RhmParams& p, double P) {
    return detail::block_count(p) * unresolved_mass_asymptote(p, P);
}

/// Entries ℓ = 1 are the memorization thresholds v/f_k; ℓ ≥ 2 follow
/// v m^{2ℓ−3} / [(1 − m/v^{s−1}) f_k Σf²].
inline SampleComplexitySet next_sample_complexities(const RhmParams& p) {
    p.validate();
    const double vs1 = std::pow(static_cast<double>(p.v), static_cast<double>(p.s - 1));
    const double gap = 1.0 - p.m / vs1;
    if (!(gap > 0.0)) throw ParameterError("next-token thresholds diverge when m = v^(s-1)");
    const auto f = make_distribution(p.m, p.kind_at(1));
    const double ipr = f.inverse_participation_ratio();
    SampleComplexitySet out;
    out.task = Task::next_token;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::uint32_t k = 1; k <= p.m; ++k) {
        const double w = f.weight(k);
        out.entries.push_back({1, k, w > 0.0 ? p.v / w : inf});
    }
    for (std::uint32_t level = 2; level <= p.L; ++level) {
        const double base = p.v * std::pow(static_cast<double>(p.m), 2.0 * level - 3.0) / (gap * ipr);
        for (std::uint32_t k = 1; k <= p.m; ++k) {
            const double w = f.weight(k);
            out.entries.push_back({level, k, w > 0.0 ? base / w : inf});
        }
    }
    for (std::uint32_t level = 2; level <= p.L; ++level)
        if (out.at(level, 1) <= out.at(level - 1, p.m)) out.interleaved = true;
    return out;
}

/// log(m/v^{s−1}) / (2 log m).
inline double next_scaling_exponent(std::uint32_t v, std::uint32_t m, std::uint32_t s) {
    const double vs1 = std::pow(static_cast<double>(v), static_cast<double>(s - 1));
    if (!(m > 1) || !(m < vs1)) throw ParameterError("scaling exponent needs 1 < m < v^(s-1)");
    return std::log(m / vs1) / (2.0 * std::log(static_cast<double>(m)));
}

/// Mean binary entropy of a normalized rule pair: k1 ~ f, k2 uniform over
/// the other ranks.
inline double h2_average(const RuleDistribution& f) {
    const auto m = f.size();
    if (m < 2) throw ParameterError("pair entropy needs m >= 2");
    std::size_t positive = 0;
    for (double w : f.weights()) positive += w > 0.0;
    if (positive < 2) throw ParameterError("pair entropy needs at least two rules with positive mass");
    double h = 0.0;
    for (std::uint32_t i = 1; i <= m; ++i) {
        const double fi = f.weight(i);
        if (fi == 0.0) continue;
        double inner = 0.0;
        for (std::uint32_t j = 1; j <= m; ++j) {
            if (j == i) continue;
            const double fj = f.weight(j);
            if (fj == 0.0) continue;
            const double p = fi / (fi + fj), q = fj / (fi + fj);
            inner -= p * std::log(p) + q * std::log(q);
        }
        h += fi * inner / static_cast<double>(m - 1);
    }
    return h;
}

struct CeLimit {
    double value = 0.0;
    bool in_regime = true;  ///< false outside 1 ≪ m ≪ v^{s−1} (taken as m ≥ 10, m/v^{s−1} ≤ 0.1)
};

/// H · [ρ/(1−ρ) + v ρ^ℓ] with ρ = m/v^{s−1}; ℓ = ∞ gives the plateau.
inline CeLimit ce_limit(const RhmParams& p, double level, double H) {
    const double rho = p.m / std::pow(static_cast<double>(p.v), static_cast<double>(p.s - 1));
    if (!(rho < 1.0)) throw ParameterError("cross-entropy limit needs m < v^(s-1)");
    CeLimit out;
    const double geometric = std::isinf(level) ? 0.0 : p.v * std::pow(rho, level);
    out.value = H * (rho / (1.0 - rho) + geometric);
    out.in_regime = p.m >= 10 && rho <= 0.1;
    return out;
}

}  // namespace rhm
