#pragma once

// Full enumeration of every derivation of a small grammar. Everything here is
// computed from the derivation list alone and shares no code with the library
// oracles, so it can serve as their reference.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "rhm/grammar.hpp"
#include "rhm/sampling.hpp"

namespace rhm::testing {

struct Enumerated {
    std::vector<Derivation> derivations;
    std::vector<double> probs;  ///< joint probability with the label, (1/v)·Π f
};

/// All derivations with positive probability (or all of them when
/// `keep_zero`). Throws if more than `limit` would be produced.
inline Enumerated enumerate(const GrammarInstance& g, bool keep_zero = false, std::size_t limit = std::size_t{1} << 21) {
    const auto L = g.depth(), s = g.s(), v = g.v(), m = g.m();
    struct Partial {
        Derivation der;
        double prob;
    };
    std::vector<Partial> current;
    for (Symbol y = 0; y < v; ++y) {
        Derivation der;
        der.label = y;
        der.nodes.assign(L + 1, {});
        der.ranks.assign(L + 1, {});
        der.nodes[L] = {y};
        current.push_back({der, 1.0 / v});
    }
    for (std::uint32_t level = L; level >= 1; --level) {
        std::vector<Partial> next;
        for (const auto& part : current) {
            const auto& parents = part.der.nodes[level];
            std::vector<std::uint32_t> choice(parents.size(), 1);
            for (;;) {
                double p = part.prob;
                for (std::size_t j = 0; j < parents.size(); ++j) p *= g.distribution(level).weight(choice[j]);
                if (keep_zero || p > 0.0) {
                    Partial child = part;
                    child.prob = p;
                    child.der.ranks[level] = choice;
                    auto& kids = child.der.nodes[level - 1];
                    for (std::size_t j = 0; j < parents.size(); ++j) {
                        auto rhs = g.rhs(level, parents[j], choice[j]);
                        kids.insert(kids.end(), rhs.begin(), rhs.end());
                    }
                    next.push_back(std::move(child));
                    if (next.size() > limit) throw std::length_error("too many derivations to enumerate");
                }
                std::size_t j = 0;
                while (j < choice.size() && choice[j] == m) choice[j++] = 1;
                if (j == choice.size()) break;
                ++choice[j];
            }
        }
        current = std::move(next);
    }
    Enumerated out;
    for (auto& part : current) {
        out.derivations.push_back(std::move(part.der));
        out.probs.push_back(part.prob);
    }
    return out;
}

/// Same grammar restricted to levels 1..depth, root uniform at `depth`.
inline GrammarInstance lower_grammar(const GrammarInstance& g, std::uint32_t depth) {
    RhmParams p = g.params();
    p.L = depth;
    if (p.zipf_layer && *p.zipf_layer > depth) p.zipf_layer.reset();
    std::vector<std::vector<Symbol>> rhs;
    std::vector<RuleDistribution> dists;
    for (std::uint32_t level = 1; level <= depth; ++level) {
        rhs.push_back(g.rule_table(level));
        dists.push_back(g.distribution(level));
    }
    return GrammarInstance(p, std::move(rhs), std::move(dists));
}

class BruteForce {
public:
    explicit BruteForce(const GrammarInstance& g) : g_(&g), e_(enumerate(g)) {}

    const Enumerated& enumerated() const { return e_; }
    std::size_t size() const { return e_.probs.size(); }

    std::vector<double> marginal(std::uint32_t level, std::size_t j) const {
        std::vector<double> out(g_->v(), 0.0);
        for (std::size_t i = 0; i < size(); ++i) out[e_.derivations[i].nodes[level][j]] += e_.probs[i];
        return out;
    }

    /// P(Y = y, tuple j = μ) − P(y)P(μ) for every observed (y, μ).
    std::map<std::pair<Symbol, std::vector<Symbol>>, double> class_correlations(std::size_t j) const {
        return centered(j, [](const Derivation& d) { return d.label; });
    }

    /// P(tuple j = μ, X_d = ν) − P(μ)P(ν) for every observed (ν, μ).
    std::map<std::pair<Symbol, std::vector<Symbol>>, double> token_correlations(std::size_t j) const {
        return centered(j, [](const Derivation& d) { return d.nodes[0].back(); });
    }

    /// P(X_d | last s^ℓ − 1 tokens) for every context with positive mass.
    std::map<std::vector<Symbol>, std::vector<double>> conditionals(std::uint32_t level) const {
        std::map<std::vector<Symbol>, std::vector<double>> out;
        const std::size_t w = window(level);
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& x = e_.derivations[i].nodes[0];
            std::vector<Symbol> ctx(x.end() - static_cast<std::ptrdiff_t>(w), x.end() - 1);
            auto& row = out[ctx];
            if (row.empty()) row.assign(g_->v(), 0.0);
            row[x.back()] += e_.probs[i];
        }
        for (auto& [ctx, row] : out) {
            double total = 0.0;
            for (double p : row) total += p;
            for (double& p : row) p /= total;
        }
        return out;
    }

    double cross_entropy(std::uint32_t level) const {
        if (level == 0) return std::log(static_cast<double>(g_->v()));
        const auto cond = conditionals(level);
        const std::size_t w = window(level);
        double h = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& x = e_.derivations[i].nodes[0];
            std::vector<Symbol> ctx(x.end() - static_cast<std::ptrdiff_t>(w), x.end() - 1);
            h -= e_.probs[i] * std::log(cond.at(ctx)[x.back()]);
        }
        return h;
    }

    /// Level-1 symbols that can end a window whose other level-1 nodes are
    /// `prefix`, under a uniform root at the window level.
    std::map<std::vector<Symbol>, std::set<Symbol>> compatibility_sets(std::uint32_t level) const {
        const auto lower = lower_grammar(*g_, level);
        const auto all = enumerate(lower);
        std::map<std::vector<Symbol>, std::set<Symbol>> out;
        for (const auto& d : all.derivations) {
            const auto& u = d.nodes[1];
            out[std::vector<Symbol>(u.begin(), u.end() - 1)].insert(u.back());
        }
        return out;
    }

    /// Data-weighted mean of the compatibility-set size.
    double mean_compatibility_size(std::uint32_t level) const {
        const auto sets = compatibility_sets(level);
        const std::size_t w = level == 0 ? 1 : window(level - 1);
        double acc = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& u = e_.derivations[i].nodes[1];
            std::vector<Symbol> prefix(u.end() - static_cast<std::ptrdiff_t>(w), u.end() - 1);
            acc += e_.probs[i] * static_cast<double>(sets.at(prefix).size());
        }
        return acc;
    }

private:
    std::size_t window(std::uint32_t level) const {
        std::size_t w = 1;
        for (std::uint32_t i = 0; i < level; ++i) w *= g_->s();
        return w;
    }

    template <class Cond>
    std::map<std::pair<Symbol, std::vector<Symbol>>, double> centered(std::size_t j, Cond cond) const {
        const auto s = g_->s();
        std::map<std::pair<Symbol, std::vector<Symbol>>, double> joint;
        std::map<std::vector<Symbol>, double> pm;
        std::vector<double> pc(g_->v(), 0.0);
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& d = e_.derivations[i];
            std::vector<Symbol> mu(d.nodes[0].begin() + static_cast<std::ptrdiff_t>(j * s),
                                   d.nodes[0].begin() + static_cast<std::ptrdiff_t>((j + 1) * s));
            joint[{cond(d), mu}] += e_.probs[i];
            pm[mu] += e_.probs[i];
            pc[cond(d)] += e_.probs[i];
        }
        std::map<std::pair<Symbol, std::vector<Symbol>>, double> out;
        for (const auto& [mu, p] : pm)
            for (Symbol c = 0; c < g_->v(); ++c) {
                auto it = joint.find({c, mu});
                out[{c, mu}] = (it == joint.end() ? 0.0 : it->second) - pc[c] * p;
            }
        return out;
    }

    const GrammarInstance* g_;
    Enumerated e_;
};

/// The instance list with v^d ≤ 2^20 used for oracle equivalence checks.
inline std::vector<RhmParams> small_instances() {
    auto make = [](std::uint32_t v, std::uint32_t m, std::uint32_t s, std::uint32_t L, std::optional<std::uint32_t> layer,
                   double a, std::uint64_t seed) {
        RhmParams p;
        p.v = v;
        p.m = m;
        p.s = s;
        p.L = L;
        p.zipf_layer = layer;
        p.zipf_exponent = a;
        p.seed = seed;
        return p;
    };
    const double inf = std::numeric_limits<double>::infinity();
    return {
        make(2, 2, 2, 2, std::nullopt, 1.0, 1),
        make(2, 2, 2, 2, 1, 1.0, 2),
        make(3, 2, 2, 2, std::nullopt, 1.0, 3),
        make(4, 4, 2, 2, 1, 1.0, 4),
        make(4, 4, 2, 2, 2, 2.0, 5),
        make(4, 3, 2, 2, 1, inf, 6),
        make(2, 2, 2, 3, 2, 0.5, 7),
        make(4, 2, 2, 3, 1, 1.0, 8),
        make(4, 4, 2, 3, 1, inf, 9),
        make(5, 3, 2, 3, 3, 1.0, 10),
        make(2, 2, 2, 4, std::nullopt, 1.0, 11),
        make(2, 4, 3, 2, 1, 1.0, 12),
        make(2, 8, 4, 2, std::nullopt, 1.0, 13),
        make(8, 8, 2, 2, 1, 1.0, 14),
        make(16, 16, 2, 2, std::nullopt, 1.0, 15),
        make(32, 8, 2, 1, 1, 1.0, 16),
    };
}

}  // namespace rhm::testing
