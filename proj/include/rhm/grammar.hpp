#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rhm/distribution.hpp"
#include "rhm/error.hpp"
#include "rhm/random.hpp"

namespace rhm {

using Symbol = std::uint32_t;
using TupleCode = std::uint64_t;

/// Integer power with overflow detection; nullopt when the result exceeds 2^62.
inline std::optional<std::uint64_t> checked_pow(std::uint64_t base, std::uint64_t exp) {
    constexpr std::uint64_t limit = std::uint64_t{1} << 62;
    std::uint64_t result = 1;
    for (std::uint64_t i = 0; i < exp; ++i) {
        if (base != 0 && result > limit / base) return std::nullopt;
        result *= base;
    }
    return result;
}

struct RhmParams {
    std::uint32_t v = 2;  ///< vocabulary size per level
    std::uint32_t m = 2;  ///< rules per nonterminal
    std::uint32_t s = 2;  ///< branching factor
    std::uint32_t L = 1;  ///< depth
    std::optional<std::uint32_t> zipf_layer;  ///< level with Zipf rules; nullopt = fully uniform
    double zipf_exponent = 1.0;               ///< a; +infinity selects the delta distribution
    std::uint64_t seed = 0;

    /// d = s^L.
    std::uint64_t input_length() const {
        auto d = checked_pow(s, L);
        if (!d) throw ParameterError("input length s^L overflows");
        return *d;
    }

    /// Number of nodes at `level` (level 0 = tokens).
    std::uint64_t width(std::uint32_t level) const { return *checked_pow(s, L - level); }

    bool delta() const { return zipf_layer && std::isinf(zipf_exponent); }

    DistributionKind kind_at(std::uint32_t level) const {
        if (zipf_layer && *zipf_layer == level) {
            if (std::isinf(zipf_exponent)) return DeltaRules{};
            return ZipfRules{zipf_exponent};
        }
        return UniformRules{};
    }

    void validate() const {
        if (v < 1) throw ParameterError("v must be positive");
        if (m < 1) throw ParameterError("m must be positive");
        if (s < 2) throw ParameterError("s must be at least 2");
        if (L < 1) throw ParameterError("L must be at least 1");
        if (zipf_layer && (*zipf_layer < 1 || *zipf_layer > L))
            throw ParameterError("zipf_layer must lie in 1..L");
        if (zipf_layer && !(zipf_exponent > 0.0)) throw ParameterError("zipf exponent a must be positive");
        if (!checked_pow(v, s)) throw ParameterError("v^s overflows");
        if (!checked_pow(s, L)) throw ParameterError("s^L overflows");
        const std::uint64_t budget = *checked_pow(v, s - 1);
        if (m > budget)
            throw InfeasibleError("m = " + std::to_string(m) + " exceeds v^(s-1) = " + std::to_string(budget) +
                                  "; unambiguous rules cannot be guaranteed");
    }

    bool operator==(const RhmParams&) const = default;
};

struct RuleRef {
    Symbol lhs;
    std::uint32_t rank;  ///< 1..m
    bool operator==(const RuleRef&) const = default;
};

struct ProductionRule {
    std::uint32_t level;  ///< 1..L
    Symbol lhs;
    std::uint32_t rank;  ///< 1..m
    std::vector<Symbol> rhs;
};

/// Exact map from an s-tuple code to the rule producing it.
class TupleIndex {
public:
    static constexpr std::uint64_t dense_limit = std::uint64_t{1} << 24;
    static constexpr std::uint32_t absent = std::numeric_limits<std::uint32_t>::max();

    TupleIndex() = default;
    explicit TupleIndex(std::uint64_t space) : space_(space) {
        if (space <= dense_limit) dense_.assign(space, absent);
    }

    /// Returns false if the code was already present.
    bool insert(TupleCode code, std::uint32_t packed) {
        if (!dense_.empty()) {
            if (dense_[code] != absent) return false;
            dense_[code] = packed;
            return true;
        }
        return sparse_.emplace(code, packed).second;
    }

    std::uint32_t find(TupleCode code) const {
        if (code >= space_) return absent;
        if (!dense_.empty()) return dense_[code];
        auto it = sparse_.find(code);
        return it == sparse_.end() ? absent : it->second;
    }

private:
    std::uint64_t space_ = 0;
    std::vector<std::uint32_t> dense_;
    std::unordered_map<TupleCode, std::uint32_t> sparse_;
};

/// A frozen RHM realization. Immutable after construction.
class GrammarInstance {
public:
    /// rhs[level-1] holds v*m*s symbols laid out as [(lhs*m + rank-1)*s + i].
    GrammarInstance(RhmParams params, std::vector<std::vector<Symbol>> rhs,
                    std::vector<RuleDistribution> distributions)
        : params_(std::move(params)), rhs_(std::move(rhs)), distributions_(std::move(distributions)) {
        params_.validate();
        const auto& p = params_;
        if (rhs_.size() != p.L) throw SchemaError("expected one rule table per level");
        if (distributions_.size() != p.L) throw SchemaError("expected one distribution per level");
        tuple_space_ = *checked_pow(p.v, p.s);
        index_.reserve(p.L);
        for (std::uint32_t level = 1; level <= p.L; ++level) {
            const auto& table = rhs_[level - 1];
            if (table.size() != static_cast<std::size_t>(p.v) * p.m * p.s)
                throw SchemaError("level " + std::to_string(level) + " has the wrong number of rules");
            if (distributions_[level - 1].size() != p.m)
                throw SchemaError("level " + std::to_string(level) + " distribution has the wrong size");
            TupleIndex index(tuple_space_);
            for (std::uint32_t packed = 0; packed < p.v * p.m; ++packed) {
                std::span<const Symbol> tuple(table.data() + static_cast<std::size_t>(packed) * p.s, p.s);
                for (Symbol sym : tuple)
                    if (sym >= p.v) throw InvariantError("rule symbol out of range at level " + std::to_string(level));
                if (!index.insert(encode(tuple), packed))
                    throw InvariantError("ambiguous grammar: repeated rhs tuple at level " + std::to_string(level));
            }
            index_.push_back(std::move(index));
        }
    }

    const RhmParams& params() const noexcept { return params_; }
    std::uint32_t v() const noexcept { return params_.v; }
    std::uint32_t m() const noexcept { return params_.m; }
    std::uint32_t s() const noexcept { return params_.s; }
    std::uint32_t depth() const noexcept { return params_.L; }
    std::uint64_t tuple_space() const noexcept { return tuple_space_; }

    const RuleDistribution& distribution(std::uint32_t level) const { return distributions_.at(level - 1); }

    std::span<const Symbol> rhs(std::uint32_t level, Symbol lhs, std::uint32_t rank) const {
        const auto& table = rhs_.at(level - 1);
        const std::size_t offset = (static_cast<std::size_t>(lhs) * params_.m + (rank - 1)) * params_.s;
        return {table.data() + offset, params_.s};
    }

    /// All v*m rhs symbols of a level, flat.
    const std::vector<Symbol>& rule_table(std::uint32_t level) const { return rhs_.at(level - 1); }

    TupleCode encode(std::span<const Symbol> tuple) const {
        TupleCode code = 0;
        for (Symbol sym : tuple) code = code * params_.v + sym;
        return code;
    }

    std::vector<Symbol> decode(TupleCode code) const {
        std::vector<Symbol> tuple(params_.s);
        for (std::size_t i = params_.s; i-- > 0;) {
            tuple[i] = static_cast<Symbol>(code % params_.v);
            code /= params_.v;
        }
        return tuple;
    }

    /// Unchecked lookup by code.
    std::optional<RuleRef> lookup_code(std::uint32_t level, TupleCode code) const {
        const std::uint32_t packed = index_[level - 1].find(code);
        if (packed == TupleIndex::absent) return std::nullopt;
        return RuleRef{packed / params_.m, packed % params_.m + 1};
    }

    std::optional<RuleRef> lookup(std::uint32_t level, std::span<const Symbol> tuple) const {
        return lookup_code(level, encode(tuple));
    }

    std::vector<ProductionRule> rules(std::uint32_t level) const {
        std::vector<ProductionRule> out;
        out.reserve(static_cast<std::size_t>(params_.v) * params_.m);
        for (Symbol lhs = 0; lhs < params_.v; ++lhs)
            for (std::uint32_t rank = 1; rank <= params_.m; ++rank) {
                auto r = rhs(level, lhs, rank);
                out.push_back({level, lhs, rank, {r.begin(), r.end()}});
            }
        return out;
    }

    bool operator==(const GrammarInstance& other) const {
        return params_ == other.params_ && rhs_ == other.rhs_ && distributions_ == other.distributions_;
    }

private:
    RhmParams params_;
    std::vector<std::vector<Symbol>> rhs_;
    std::vector<RuleDistribution> distributions_;
    std::vector<TupleIndex> index_;
    std::uint64_t tuple_space_ = 0;
};

namespace detail {

// Partial Fisher-Yates over [0, space): the first `count` draws of a uniform
// permutation, in draw order. Sparse bookkeeping keeps this O(count).
inline std::vector<std::uint64_t> sample_without_replacement(std::uint64_t space, std::uint64_t count, Rng& rng) {
    std::vector<std::uint64_t> out;
    out.reserve(count);
    std::unordered_map<std::uint64_t, std::uint64_t> swapped;
    auto value_at = [&](std::uint64_t i) {
        auto it = swapped.find(i);
        return it == swapped.end() ? i : it->second;
    };
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t j = i + rng.below(space - i);
        const std::uint64_t vi = value_at(i);
        const std::uint64_t vj = value_at(j);
        out.push_back(vj);
        swapped[j] = vi;
    }
    return out;
}

}  // namespace detail

/// Draws m*v distinct tuples per level uniformly without replacement, split in
/// draw order into v groups of m; position within a group is the rank.
inline GrammarInstance build_grammar(const RhmParams& params) {
    params.validate();
    const std::uint64_t space = *checked_pow(params.v, params.s);
    const std::uint64_t count = static_cast<std::uint64_t>(params.v) * params.m;
    std::vector<std::vector<Symbol>> rhs;
    std::vector<RuleDistribution> distributions;
    for (std::uint32_t level = 1; level <= params.L; ++level) {
        Rng rng(derive_seed(params.seed, level));
        const auto codes = detail::sample_without_replacement(space, count, rng);
        std::vector<Symbol> table(count * params.s);
        for (std::uint64_t r = 0; r < count; ++r) {
            std::uint64_t code = codes[r];
            for (std::size_t i = params.s; i-- > 0;) {
                table[r * params.s + i] = static_cast<Symbol>(code % params.v);
                code /= params.v;
            }
        }
        rhs.push_back(std::move(table));
        distributions.push_back(make_distribution(params.m, params.kind_at(level)));
    }
    return GrammarInstance(params, std::move(rhs), std::move(distributions));
}

/// Inverse of the rule map; nullopt when no rule of the level produces `tuple`.
inline std::optional<RuleRef> rank_of_tuple(const GrammarInstance& g, std::uint32_t level,
                                            std::span<const Symbol> tuple) {
    if (level < 1 || level > g.depth()) throw ParameterError("level out of range");
    if (tuple.size() != g.s()) throw ParameterError("tuple must have s entries");
    for (Symbol sym : tuple)
        if (sym >= g.v()) throw ParameterError("tuple symbol out of range");
    return g.lookup(level, tuple);
}

}  // namespace rhm
