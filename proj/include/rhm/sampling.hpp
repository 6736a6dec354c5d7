#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rhm/grammar.hpp"
#include "rhm/random.hpp"

namespace rhm {

/// Full generation tree of one datum.
struct Derivation {
    Symbol label = 0;
    /// nodes[ℓ][j], ℓ = 0..L; nodes[0] are the tokens, nodes[L] = {label}.
    std::vector<std::vector<Symbol>> nodes;
    /// ranks[ℓ][j] is the rank of the rule expanding nodes[ℓ][j]; ranks[0] is empty.
    std::vector<std::vector<std::uint32_t>> ranks;

    const std::vector<Symbol>& tokens() const { return nodes.front(); }
    bool operator==(const Derivation&) const = default;
};

/// d × v indicator matrix, row-major, one byte per entry.
inline std::vector<std::uint8_t> one_hot(std::span<const Symbol> tokens, std::uint32_t v) {
    std::vector<std::uint8_t> out(tokens.size() * v, 0);
    for (std::size_t i = 0; i < tokens.size(); ++i) out[i * v + tokens[i]] = 1;
    return out;
}

/// Checks nodes[ℓ+1][j] → nodes[ℓ][js..js+s-1] with the recorded rank.
inline bool derivation_consistent(const GrammarInstance& g, const Derivation& der) {
    const auto L = g.depth();
    const auto s = g.s();
    if (der.nodes.size() != L + 1 || der.ranks.size() != L + 1) return false;
    if (der.nodes[L].size() != 1 || der.nodes[L][0] != der.label) return false;
    for (std::uint32_t level = 1; level <= L; ++level) {
        const auto& parents = der.nodes[level];
        const auto& children = der.nodes[level - 1];
        if (children.size() != parents.size() * s || der.ranks[level].size() != parents.size()) return false;
        for (std::size_t j = 0; j < parents.size(); ++j) {
            const auto rank = der.ranks[level][j];
            if (rank < 1 || rank > g.m() || parents[j] >= g.v()) return false;
            auto rhs = g.rhs(level, parents[j], rank);
            for (std::uint32_t i = 0; i < s; ++i)
                if (children[j * s + i] != rhs[i]) return false;
        }
    }
    return true;
}

/// Uniform root, then one rank draw per node from that level's distribution.
inline Derivation sample_derivation(const GrammarInstance& g, Rng& rng) {
    const auto L = g.depth();
    const auto s = g.s();
    Derivation der;
    der.nodes.resize(L + 1);
    der.ranks.resize(L + 1);
    der.label = static_cast<Symbol>(rng.below(g.v()));
    der.nodes[L] = {der.label};
    for (std::uint32_t level = L; level >= 1; --level) {
        const auto& parents = der.nodes[level];
        auto& children = der.nodes[level - 1];
        auto& ranks = der.ranks[level];
        children.resize(parents.size() * s);
        ranks.resize(parents.size());
        const auto& dist = g.distribution(level);
        for (std::size_t j = 0; j < parents.size(); ++j) {
            const auto rank = static_cast<std::uint32_t>(dist.sample(rng));
            ranks[j] = rank;
            auto rhs = g.rhs(level, parents[j], rank);
            std::copy(rhs.begin(), rhs.end(), children.begin() + static_cast<std::ptrdiff_t>(j * s));
        }
    }
    return der;
}

/// Deterministic bottom-up parse: L passes of tuple lookup. nullopt iff some
/// s-tuple at some level is produced by no rule.
inline std::optional<Derivation> parse_sequence(const GrammarInstance& g, std::span<const Symbol> tokens) {
    const auto L = g.depth();
    const auto s = g.s();
    if (tokens.size() != g.params().input_length()) throw ParameterError("sequence length must equal s^L");
    for (Symbol t : tokens)
        if (t >= g.v()) throw ParameterError("token out of range");
    Derivation der;
    der.nodes.resize(L + 1);
    der.ranks.resize(L + 1);
    der.nodes[0].assign(tokens.begin(), tokens.end());
    for (std::uint32_t level = 1; level <= L; ++level) {
        const auto& children = der.nodes[level - 1];
        const std::size_t width = children.size() / s;
        auto& parents = der.nodes[level];
        auto& ranks = der.ranks[level];
        parents.resize(width);
        ranks.resize(width);
        for (std::size_t j = 0; j < width; ++j) {
            auto ref = g.lookup(level, std::span<const Symbol>(children.data() + j * s, s));
            if (!ref) return std::nullopt;
            parents[j] = ref->lhs;
            ranks[j] = ref->rank;
        }
    }
    der.label = der.nodes[L][0];
    return der;
}

enum class SequenceOutcome { ok, zero_probability, root_mismatch, unparseable };

struct SequenceLogProb {
    SequenceOutcome outcome = SequenceOutcome::unparseable;
    double log_prob = -std::numeric_limits<double>::infinity();  ///< log P(x | y); -inf unless ok
};

/// log P(x | y) = Σ over internal nodes of log f_rank. Unparseable sequences,
/// sequences whose root differs from y, and parses through zero-mass rules are
/// reported as distinct outcomes.
inline SequenceLogProb sequence_log_prob(const GrammarInstance& g, std::span<const Symbol> tokens, Symbol label) {
    if (label >= g.v()) throw ParameterError("label out of range");
    auto der = parse_sequence(g, tokens);
    if (!der) return {};
    if (der->label != label) return {SequenceOutcome::root_mismatch, -std::numeric_limits<double>::infinity()};
    double total = 0.0;
    for (std::uint32_t level = 1; level <= g.depth(); ++level) {
        const auto& dist = g.distribution(level);
        for (auto rank : der->ranks[level]) total += dist.log_weight(rank);
    }
    return {std::isinf(total) ? SequenceOutcome::zero_probability : SequenceOutcome::ok, total};
}

}  // namespace rhm
