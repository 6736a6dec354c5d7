#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rhm/error.hpp"
#include "rhm/grammar.hpp"
#include "rhm/oracles/correlations.hpp"
#include "rhm/oracles/marginals.hpp"
#include "rhm/oracles/slgram.hpp"
#include "rhm/parallel.hpp"
#include "rhm/random.hpp"

namespace rhm {

/// Mean over the v tuples of rank k and all tokens ν of C(μ, ν)², for the
/// tuple whose LCA with the last token is `lca`; reported with the matching
/// level-1 quantity one level up so their ratio isolates a single recursion step.
struct TokenCorrVariance {
    std::uint32_t lca;
    std::uint32_t rank;
};
struct ClassCorrVariance {};
struct AvgCompatSize {
    std::uint32_t level;
};
struct EntropyLadderQuantity {};

using McQuantity = std::variant<TokenCorrVariance, ClassCorrVariance, AvgCompatSize, EntropyLadderQuantity>;

inline std::string describe(const McQuantity& q) {
    struct {
        std::string operator()(const TokenCorrVariance& t) const {
            return "token-corr-variance(l=" + std::to_string(t.lca) + ",k=" + std::to_string(t.rank) + ")";
        }
        std::string operator()(const ClassCorrVariance&) const { return "class-corr-variance"; }
        std::string operator()(const AvgCompatSize& a) const { return "avg-compat-size(l=" + std::to_string(a.level) + ")"; }
        std::string operator()(const EntropyLadderQuantity&) const { return "entropy-ladder"; }
    } visitor;
    return std::visit(visitor, q);
}

struct McEstimate {
    std::string name;
    double mean = 0.0;
    double variance = 0.0;  ///< sample variance across realizations
    double se = 0.0;
    std::size_t n = 0;
};

struct McReport {
    std::string quantity;
    RhmParams params;
    std::size_t n = 0;
    std::vector<McEstimate> estimates;

    const McEstimate& at(const std::string& name) const {
        for (const auto& e : estimates)
            if (e.name == name) return e;
        throw ParameterError("no estimate named " + name);
    }
};

namespace detail {

inline McEstimate summarize(std::string name, const std::vector<double>& xs) {
    McEstimate e;
    e.name = std::move(name);
    e.n = xs.size();
    for (double x : xs) e.mean += x;
    e.mean /= static_cast<double>(xs.size());
    for (double x : xs) e.variance += (x - e.mean) * (x - e.mean);
    e.variance /= static_cast<double>(xs.size() - 1);
    e.se = std::sqrt(e.variance / static_cast<double>(xs.size()));
    return e;
}

/// mean(num)/mean(den) with a first-order delta-method standard error.
inline McEstimate ratio_of_means(std::string name, const std::vector<double>& num, const std::vector<double>& den) {
    const auto a = summarize("", num);
    const auto b = summarize("", den);
    double cov = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) cov += (num[i] - a.mean) * (den[i] - b.mean);
    cov /= static_cast<double>(num.size() - 1);
    McEstimate e;
    e.name = std::move(name);
    e.n = num.size();
    e.mean = a.mean / b.mean;
    const double r = e.mean;
    e.variance = (a.variance - 2.0 * r * cov + r * r * b.variance) / (b.mean * b.mean);
    e.se = std::sqrt(std::max(0.0, e.variance) / static_cast<double>(num.size()));
    return e;
}

inline double mean_square(const SquareMatrix& m) {
    double acc = 0.0;
    for (double x : m.data) acc += x * x;
    return acc / static_cast<double>(m.data.size());
}

}  // namespace detail

/// Monte Carlo over grammar realizations. Realization r is built from seed
/// derive_seed(params.seed, r); results are independent of `workers`.
inline McReport mc_realization_stats(const RhmParams& params, const McQuantity& quantity, std::size_t n_realizations,
                                     std::size_t workers = default_workers(),
                                     std::uint64_t budget = default_enumeration_budget) {
    if (n_realizations < 2) throw ParameterError("Monte Carlo needs at least 2 realizations");
    params.validate();
    McReport report;
    report.quantity = describe(quantity);
    report.params = params;
    report.n = n_realizations;

    auto instance = [&](std::size_t r) {
        RhmParams p = params;
        p.seed = derive_seed(params.seed, r);
        return build_grammar(p);
    };

    if (const auto* t = std::get_if<TokenCorrVariance>(&quantity)) {
        if (t->rank < 1 || t->rank > params.m) throw ParameterError("rank out of range");
        const auto position = tuple_position_with_lca(params, t->lca);
        std::vector<double> num(n_realizations), den(n_realizations);
        parallel_for(n_realizations, workers, [&](std::size_t r) {
            const auto g = instance(r);
            TransitionTables tables(g);
            const double f = g.distribution(1).weight(t->rank);
            const NodeRef parent{1, position};
            num[r] = f * f * detail::mean_square(node_correlation(tables, parent, {0, params.input_length() - 1}));
            den[r] = detail::mean_square(node_correlation(tables, parent, {1, params.width(1) - 1}));
        });
        report.estimates.push_back(detail::summarize("numerator", num));
        report.estimates.push_back(detail::summarize("denominator", den));
        report.estimates.push_back(detail::ratio_of_means("ratio", num, den));
    } else if (std::holds_alternative<ClassCorrVariance>(quantity)) {
        std::vector<double> xs(n_realizations);
        parallel_for(n_realizations, workers, [&](std::size_t r) {
            const auto g = instance(r);
            const auto table = ClassCorrelationOracle(g, 0).table();
            double acc = 0.0;
            for (double x : table.values) acc += x * x;
            xs[r] = acc / static_cast<double>(table.values.size());
        });
        report.estimates.push_back(detail::summarize("mean_square", xs));
    } else if (const auto* c = std::get_if<AvgCompatSize>(&quantity)) {
        std::vector<double> xs(n_realizations);
        parallel_for(n_realizations, workers, [&](std::size_t r) {
            const auto g = instance(r);
            xs[r] = SlgramOracle(g).mean_compatibility_size(c->level, budget);
        });
        report.estimates.push_back(detail::summarize("mean_size", xs));
    } else {
        const auto L = params.L;
        std::vector<std::vector<double>> ladders(n_realizations);
        parallel_for(n_realizations, workers, [&](std::size_t r) {
            const auto g = instance(r);
            ladders[r] = SlgramOracle(g).ladder(budget).values;
        });
        std::vector<double> col(n_realizations);
        for (std::uint32_t level = 0; level <= L; ++level) {
            for (std::size_t r = 0; r < n_realizations; ++r) col[r] = ladders[r][level];
            report.estimates.push_back(detail::summarize("L_" + std::to_string(level), col));
        }
        for (std::uint32_t level = 0; level <= L; ++level) {
            for (std::size_t r = 0; r < n_realizations; ++r) col[r] = ladders[r][level] - ladders[r][L];
            report.estimates.push_back(detail::summarize("residual_" + std::to_string(level), col));
        }
    }
    return report;
}

}  // namespace rhm
