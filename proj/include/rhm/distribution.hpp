#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "rhm/error.hpp"
#include "rhm/random.hpp"

namespace rhm {

struct UniformRules {};
struct ZipfRules {
    double exponent;  ///< a in f_k ∝ k^{-(1+a)}
};
struct DeltaRules {};  ///< all mass on rank 1 (the a → ∞ limit)

using DistributionKind = std::variant<UniformRules, ZipfRules, DeltaRules>;

/// Probability of each rule rank k = 1..m, sorted non-increasing.
class RuleDistribution {
public:
    RuleDistribution() = default;

    /// Weights must be non-negative, non-increasing and have positive sum.
    /// They are rescaled to unit sum unless already normalized to 1e-12.
    explicit RuleDistribution(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) throw ParameterError("rule distribution needs at least one rank");
        double total = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("rule weights must be finite and non-negative");
            total += w;
        }
        if (!(total > 0.0)) throw ParameterError("rule weights sum to zero");
        for (std::size_t k = 1; k < weights_.size(); ++k) {
            if (weights_[k] > weights_[k - 1]) throw ParameterError("rule weights must be non-increasing in rank");
        }
        if (std::abs(total - 1.0) > 1e-12)
            for (double& w : weights_) w /= total;
        log_weights_.resize(weights_.size());
        cdf_.resize(weights_.size());
        double running = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            log_weights_[k] = weights_[k] > 0.0 ? std::log(weights_[k]) : -std::numeric_limits<double>::infinity();
            running += weights_[k];
            cdf_[k] = running;
        }
        cdf_.back() = 1.0;
    }

    std::size_t size() const noexcept { return weights_.size(); }

    /// f_k for rank k in 1..m.
    double weight(std::size_t rank) const { return weights_.at(rank - 1); }
    double log_weight(std::size_t rank) const { return log_weights_.at(rank - 1); }

    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& log_weights() const noexcept { return log_weights_; }

    /// Inverse participation ratio Σ_k f_k².
    double inverse_participation_ratio() const {
        double sum = 0.0;
        for (double w : weights_) sum += w * w;
        return sum;
    }

    /// Draws a rank in 1..m.
    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        auto idx = static_cast<std::size_t>(it - cdf_.begin());
        if (idx >= cdf_.size()) idx = cdf_.size() - 1;
        // Skip zero-mass ranks that share a cdf value with their predecessor.
        while (weights_[idx] == 0.0 && idx > 0) --idx;
        return idx + 1;
    }

    bool operator==(const RuleDistribution& other) const { return weights_ == other.weights_; }

private:
    std::vector<double> weights_;
    std::vector<double> log_weights_;
    std::vector<double> cdf_;
};

/// Builds the rank distribution for m rules. An infinite zipf exponent is the delta case.
inline RuleDistribution make_distribution(std::size_t m, const DistributionKind& kind) {
    if (m == 0) throw ParameterError("number of rules m must be positive");
    std::vector<double> weights(m, 0.0);
    if (std::holds_alternative<UniformRules>(kind)) {
        std::fill(weights.begin(), weights.end(), 1.0);
    } else if (const auto* zipf = std::get_if<ZipfRules>(&kind)) {
        if (!(zipf->exponent > 0.0)) throw ParameterError("zipf exponent a must be positive");
        if (std::isinf(zipf->exponent)) {
            weights[0] = 1.0;
        } else {
            for (std::size_t k = 0; k < m; ++k) weights[k] = std::pow(static_cast<double>(k + 1), -(1.0 + zipf->exponent));
        }
    } else {
        weights[0] = 1.0;
    }
    return RuleDistribution(std::move(weights));
}

inline std::string describe(const DistributionKind& kind) {
    if (std::holds_alternative<UniformRules>(kind)) return "uniform";
    if (const auto* zipf = std::get_if<ZipfRules>(&kind)) return "zipf(" + std::to_string(zipf->exponent) + ")";
    return "delta";
}

}  // namespace rhm
