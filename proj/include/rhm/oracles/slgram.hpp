#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "rhm/error.hpp"
#include "rhm/grammar.hpp"
#include "rhm/oracles/marginals.hpp"

namespace rhm {

inline constexpr std::uint64_t default_enumeration_budget = std::uint64_t{1} << 32;

/// What an s^ℓ-gram context reveals: for each spine level j = 1..ℓ, the s−1
/// left siblings of the spine node at level j−1, given as level-(j−1) symbols.
/// siblings[j-1] belongs to spine level j; siblings[0] are raw tokens.
struct SpineContext {
    std::uint32_t level = 0;
    std::vector<std::vector<Symbol>> siblings;
};

struct CompatibilitySet {
    std::uint32_t level = 0;
    SpineContext context;
    std::vector<Symbol> members;  ///< ascending level-1 symbols
};

struct EntropyLadder {
    std::vector<double> values;  ///< 𝓛_ℓ for ℓ = 0..L, nats

    double plateau() const { return values.back(); }
    std::vector<double> residuals() const {
        std::vector<double> r(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) r[i] = values[i] - values.back();
        return r;
    }
};

/// Exact s^ℓ-gram quantities for one grammar. Complete s-blocks of a context
/// collapse to their unique parents, so the conditional of the last token is a
/// forward filter down the right spine of the level-ℓ ancestor.
class SlgramOracle {
public:
    explicit SlgramOracle(const GrammarInstance& g) : g_(&g) {
        TransitionTables tables(g);
        spine_prior_.resize(g.depth() + 1);
        for (std::uint32_t level = 0; level <= g.depth(); ++level)
            spine_prior_[level] = tables.marginal({level, g.params().width(level) - 1});
        by_prefix_.resize(g.depth());
        for (std::uint32_t level = 1; level <= g.depth(); ++level) {
            auto& index = by_prefix_[level - 1];
            for (Symbol a = 0; a < g.v(); ++a)
                for (std::uint32_t k = 1; k <= g.m(); ++k) {
                    auto rhs = g.rhs(level, a, k);
                    index[prefix_code(rhs.first(g.s() - 1))].push_back({a, rhs.back(), g.distribution(level).weight(k)});
                }
        }
    }

    const GrammarInstance& grammar() const { return *g_; }

    /// Marginal of the spine node (ancestor of the last token) at `level`.
    const std::vector<double>& spine_prior(std::uint32_t level) const { return spine_prior_.at(level); }

    /// Collapses the last s^ℓ − 1 tokens into spine siblings.
    SpineContext collapse(std::uint32_t level, std::span<const Symbol> context) const {
        const auto& g = *g_;
        if (level < 1 || level > g.depth()) throw ParameterError("s^l-gram level must lie in 1..L");
        const std::uint64_t expected = *checked_pow(g.s(), level) - 1;
        if (context.size() != expected) throw ParameterError("context must hold s^l - 1 tokens");
        for (Symbol t : context)
            if (t >= g.v()) throw ParameterError("context token out of range");
        SpineContext out;
        out.level = level;
        out.siblings.resize(level);
        std::size_t offset = 0;
        for (std::uint32_t j = level; j >= 1; --j) {
            const std::uint64_t block = *checked_pow(g.s(), j - 1);
            auto& sib = out.siblings[j - 1];
            for (std::uint32_t i = 0; i + 1 < g.s(); ++i) {
                sib.push_back(parse_block(context.subspan(offset, block), j - 1));
                offset += block;
            }
        }
        return out;
    }

    /// Exact P(X_d | last s^ℓ − 1 tokens).
    std::vector<double> conditional(std::uint32_t level, std::span<const Symbol> context) const {
        auto alpha = filter(collapse(level, context), 0);
        double total = 0.0;
        for (double a : alpha) total += a;
        if (!(total > 0.0)) throw UnparseableError("context has zero probability under the grammar");
        for (double& a : alpha) a /= total;
        return alpha;
    }

    /// Level-1 symbols compatible with the complete blocks of the context.
    /// The window root is unconstrained (every symbol allowed).
    CompatibilitySet compatibility(std::uint32_t level, std::span<const Symbol> context) const {
        CompatibilitySet set;
        set.level = level;
        set.context = collapse(level, context);
        std::vector<double> uniform(g_->v(), 1.0);
        auto reach = filter(set.context, 1, &uniform);
        for (Symbol a = 0; a < g_->v(); ++a)
            if (reach[a] > 0.0) set.members.push_back(a);
        if (set.members.empty()) throw UnparseableError("context is not generated by any rule sequence");
        return set;
    }

    /// Upper bound on distinct spine contexts visited for window level ℓ.
    std::uint64_t enumeration_count(std::uint32_t level) const {
        const auto& g = *g_;
        std::uint64_t total = 0;
        for (std::uint32_t t = 1; t <= level; ++t) {
            auto by_rules = checked_pow(g.m(), t);
            auto by_alphabet = checked_pow(g.v(), static_cast<std::uint64_t>(t) * (g.s() - 1));
            std::uint64_t bound = std::numeric_limits<std::uint64_t>::max() / 4;
            if (by_rules && *by_rules < bound / g.v()) bound = *by_rules * g.v();
            if (by_alphabet && *by_alphabet < bound) bound = *by_alphabet;
            total += bound;
            if (total > std::numeric_limits<std::uint64_t>::max() / 4) return total;
        }
        return total;
    }

    /// 𝓛_ℓ: data-averaged −log P(x_d | last s^ℓ − 1 tokens); 𝓛_0 = log v.
    double cross_entropy(std::uint32_t level, std::uint64_t budget = default_enumeration_budget) const {
        if (level > g_->depth()) throw ParameterError("s^l-gram level must lie in 0..L");
        if (level == 0) return std::log(static_cast<double>(g_->v()));
        check_budget(level, budget);
        Walk walk(level);
        std::vector<Weighted> root;
        for (Symbol a = 0; a < g_->v(); ++a)
            if (spine_prior_[level][a] > 0.0) root.push_back({a, spine_prior_[level][a], 1.0});
        double entropy = 0.0;
        walk_entropy(level, root, walk, entropy);
        return entropy;
    }

    /// Data-weighted mean of |V_c,ℓ|.
    double mean_compatibility_size(std::uint32_t level, std::uint64_t budget = default_enumeration_budget) const {
        if (level < 1 || level > g_->depth()) throw ParameterError("s^l-gram level must lie in 1..L");
        if (level == 1) return g_->v();
        check_budget(level - 1, budget);
        Walk walk(level);
        std::vector<Weighted> root;
        for (Symbol a = 0; a < g_->v(); ++a) root.push_back({a, spine_prior_[level][a], 1.0});
        double acc = 0.0;
        walk_compat(level, root, walk, acc);
        return acc;
    }

    EntropyLadder ladder(std::uint64_t budget = default_enumeration_budget) const {
        EntropyLadder out;
        for (std::uint32_t level = 0; level <= g_->depth(); ++level) out.values.push_back(cross_entropy(level, budget));
        return out;
    }

private:
    struct RuleEntry {
        Symbol lhs;
        Symbol last;
        double weight;
    };

    /// Spine state: symbol, data probability jointly with the observed prefix,
    /// and reachability weight under an unconstrained window root.
    struct Weighted {
        Symbol sym;
        double prob;
        double reach;
    };

    struct Expansion {
        TupleCode prefix;
        Symbol child;
        double prob;
        double reach;
    };

    struct Walk {
        explicit Walk(std::uint32_t depth) : expansions(depth + 1), children(depth + 1) {}
        std::vector<std::vector<Expansion>> expansions;
        std::vector<std::vector<Weighted>> children;
    };

    TupleCode prefix_code(std::span<const Symbol> prefix) const {
        TupleCode code = 0;
        for (Symbol sym : prefix) code = code * g_->v() + sym;
        return code;
    }

    Symbol parse_block(std::span<const Symbol> block, std::uint32_t height) const {
        const auto s = g_->s();
        std::vector<Symbol> current(block.begin(), block.end());
        for (std::uint32_t level = 1; level <= height; ++level) {
            std::vector<Symbol> next(current.size() / s);
            for (std::size_t j = 0; j < next.size(); ++j) {
                auto ref = g_->lookup(level, std::span<const Symbol>(current.data() + j * s, s));
                if (!ref) throw UnparseableError("context contains an unreachable complete block");
                next[j] = ref->lhs;
            }
            current = std::move(next);
        }
        return current.front();
    }

    /// Runs the spine filter from ctx.level down to `stop`; returns the joint
    /// weight of each symbol at level `stop`. `prior` overrides the spine marginal.
    std::vector<double> filter(const SpineContext& ctx, std::uint32_t stop,
                               const std::vector<double>* prior = nullptr) const {
        std::vector<double> alpha = prior ? *prior : spine_prior_[ctx.level];
        for (std::uint32_t j = ctx.level; j > stop; --j) {
            std::vector<double> next(g_->v(), 0.0);
            const auto& index = by_prefix_[j - 1];
            auto it = index.find(prefix_code(ctx.siblings[j - 1]));
            if (it != index.end())
                for (const auto& e : it->second) next[e.last] += alpha[e.lhs] * e.weight;
            alpha = std::move(next);
        }
        return alpha;
    }

    void check_budget(std::uint32_t level, std::uint64_t budget) const {
        const auto required = enumeration_count(level);
        if (required > budget) throw BudgetError(required, budget);
    }

    // Expands every spine state by every rule of level j and sorts the results
    // by (observed prefix, child) so equal observations become contiguous runs.
    void expand(std::uint32_t j, std::span<const Weighted> states, std::vector<Expansion>& out) const {
        const auto& g = *g_;
        const auto s = g.s();
        const auto& dist = g.distribution(j);
        out.clear();
        for (const auto& st : states) {
            for (std::uint32_t k = 1; k <= g.m(); ++k) {
                const double f = dist.weight(k);
                if (f == 0.0) continue;
                auto rhs = g.rhs(j, st.sym, k);
                out.push_back({prefix_code(rhs.first(s - 1)), rhs[s - 1], st.prob * f, st.reach * f});
            }
        }
        std::sort(out.begin(), out.end(), [](const Expansion& a, const Expansion& b) {
            return a.prefix != b.prefix ? a.prefix < b.prefix : a.child < b.child;
        });
    }

    static void merge_run(std::span<const Expansion> run, std::vector<Weighted>& out) {
        out.clear();
        for (const auto& e : run) {
            if (!out.empty() && out.back().sym == e.child) {
                out.back().prob += e.prob;
                out.back().reach += e.reach;
            } else {
                out.push_back({e.child, e.prob, e.reach});
            }
        }
    }

    template <class Leaf>
    void for_each_run(std::uint32_t j, std::span<const Weighted> states, Walk& walk, Leaf&& leaf) const {
        auto& exps = walk.expansions[j];
        expand(j, states, exps);
        std::size_t begin = 0;
        while (begin < exps.size()) {
            std::size_t end = begin + 1;
            while (end < exps.size() && exps[end].prefix == exps[begin].prefix) ++end;
            auto& children = walk.children[j];
            merge_run(std::span<const Expansion>(exps.data() + begin, end - begin), children);
            leaf(children);
            begin = end;
        }
    }

    void walk_entropy(std::uint32_t j, std::span<const Weighted> states, Walk& walk, double& acc) const {
        for_each_run(j, states, walk, [&](const std::vector<Weighted>& children) {
            if (j == 1) {
                double total = 0.0;
                for (const auto& c : children) total += c.prob;
                if (!(total > 0.0)) return;
                for (const auto& c : children)
                    if (c.prob > 0.0) acc += c.prob * (std::log(total) - std::log(c.prob));
            } else {
                walk_entropy(j - 1, children, walk, acc);
            }
        });
    }

    void walk_compat(std::uint32_t j, std::span<const Weighted> states, Walk& walk, double& acc) const {
        for_each_run(j, states, walk, [&](const std::vector<Weighted>& children) {
            if (j == 2) {
                double total = 0.0;
                std::size_t members = 0;
                for (const auto& c : children) {
                    total += c.prob;
                    if (c.reach > 0.0) ++members;
                }
                acc += total * static_cast<double>(members);
            } else {
                walk_compat(j - 1, children, walk, acc);
            }
        });
    }

    const GrammarInstance* g_;
    std::vector<std::vector<double>> spine_prior_;
    std::vector<std::unordered_map<TupleCode, std::vector<RuleEntry>>> by_prefix_;
};

inline std::vector<double> slgram_conditional(const GrammarInstance& g, std::uint32_t level,
                                              std::span<const Symbol> context) {
    return SlgramOracle(g).conditional(level, context);
}

inline double slgram_cross_entropy(const GrammarInstance& g, std::uint32_t level,
                                   std::uint64_t budget = default_enumeration_budget) {
    return SlgramOracle(g).cross_entropy(level, budget);
}

inline CompatibilitySet compatibility_set(const GrammarInstance& g, std::uint32_t level,
                                          std::span<const Symbol> context) {
    return SlgramOracle(g).compatibility(level, context);
}

}  // namespace rhm
