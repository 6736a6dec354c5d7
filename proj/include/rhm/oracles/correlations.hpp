#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rhm/grammar.hpp"
#include "rhm/oracles/marginals.hpp"

namespace rhm {

enum class CorrelationKind { label_tuple, token_tuple };

/// Exact centered joint between a conditioner (root label or last token) and
/// the s-tuple at tuple position j. Only produced tuples are stored; every
/// other tuple has correlation exactly zero.
struct CorrelationTable {
    CorrelationKind kind = CorrelationKind::label_tuple;
    std::uint64_t position = 0;
    std::uint32_t lca_level = 0;          ///< LCA of tuple and last token (token_tuple only)
    std::vector<TupleCode> tuples;         ///< produced level-1 tuples, ascending code
    std::vector<double> values;            ///< values[cond * tuples.size() + t]
    std::uint32_t conditioners = 0;

    double at(std::uint32_t cond, std::size_t t) const { return values[cond * tuples.size() + t]; }
};

struct CorrelationValue {
    double value = 0.0;
    bool produced = false;
};

namespace detail {

inline std::vector<TupleCode> produced_level1_tuples(const GrammarInstance& g) {
    std::vector<TupleCode> codes;
    codes.reserve(static_cast<std::size_t>(g.v()) * g.m());
    for (Symbol a = 0; a < g.v(); ++a)
        for (std::uint32_t k = 1; k <= g.m(); ++k) codes.push_back(g.encode(g.rhs(1, a, k)));
    std::sort(codes.begin(), codes.end());
    return codes;
}

inline void check_tuple(const GrammarInstance& g, std::span<const Symbol> tuple) {
    if (tuple.size() != g.s()) throw ParameterError("tuple must have s entries");
    for (Symbol sym : tuple)
        if (sym >= g.v()) throw ParameterError("tuple symbol out of range");
}

}  // namespace detail

/// Label-tuple correlations C_j(y, μ) for all y and produced μ.
class ClassCorrelationOracle {
public:
    ClassCorrelationOracle(const GrammarInstance& g, std::uint64_t position) : g_(&g), position_(position) {
        if (position >= g.params().width(1)) throw ParameterError("tuple position out of range");
        TransitionTables tables(g);
        down_ = tables.descend(g.depth(), {1, position});
        marginal_.assign(g.v(), 0.0);
        for (Symbol y = 0; y < g.v(); ++y)
            for (Symbol a = 0; a < g.v(); ++a) marginal_[a] += down_(y, a) / g.v();
    }

    /// P(level-1 node at this position = a | Y = y).
    double parent_given_label(Symbol y, Symbol a) const { return down_(y, a); }

    CorrelationValue operator()(Symbol y, std::span<const Symbol> tuple) const {
        detail::check_tuple(*g_, tuple);
        if (y >= g_->v()) throw ParameterError("label out of range");
        auto ref = g_->lookup(1, tuple);
        if (!ref) return {0.0, false};
        const double f = g_->distribution(1).weight(ref->rank);
        return {f * (down_(y, ref->lhs) - marginal_[ref->lhs]) / g_->v(), true};
    }

    CorrelationTable table() const {
        CorrelationTable t;
        t.kind = CorrelationKind::label_tuple;
        t.position = position_;
        t.tuples = detail::produced_level1_tuples(*g_);
        t.conditioners = g_->v();
        t.values.resize(t.conditioners * t.tuples.size());
        for (Symbol y = 0; y < g_->v(); ++y)
            for (std::size_t i = 0; i < t.tuples.size(); ++i)
                t.values[y * t.tuples.size() + i] = (*this)(y, g_->decode(t.tuples[i])).value;
        return t;
    }

private:
    const GrammarInstance* g_;
    std::uint64_t position_;
    SquareMatrix down_;
    std::vector<double> marginal_;
};

inline CorrelationValue class_correlation(const GrammarInstance& g, std::uint64_t position, Symbol y,
                                          std::span<const Symbol> tuple) {
    return ClassCorrelationOracle(g, position)(y, tuple);
}

/// Correlation between the label and a single node: P(Y=y, node=a) − P(y)P(a).
inline double label_node_correlation(const GrammarInstance& g, NodeRef node, Symbol y, Symbol a) {
    TransitionTables tables(g);
    const auto down = tables.descend(g.depth(), node);
    double marginal = 0.0;
    for (Symbol r = 0; r < g.v(); ++r) marginal += down(r, a) / g.v();
    return (down(y, a) - marginal) / g.v();
}

/// Centered joint of two nodes in disjoint subtrees.
inline SquareMatrix node_correlation(const TransitionTables& tables, NodeRef a, NodeRef b) {
    auto joint = tables.pair_joint(a, b);
    const auto v = joint.n;
    std::vector<double> ma(v, 0.0), mb(v, 0.0);
    for (Symbol i = 0; i < v; ++i)
        for (Symbol j = 0; j < v; ++j) {
            ma[i] += joint(i, j);
            mb[j] += joint(i, j);
        }
    for (Symbol i = 0; i < v; ++i)
        for (Symbol j = 0; j < v; ++j) joint(i, j) -= ma[i] * mb[j];
    return joint;
}

/// Tuple-token correlations C_j(μ, ν) between tuple j and the last token.
class TokenCorrelationOracle {
public:
    TokenCorrelationOracle(const GrammarInstance& g, std::uint64_t position) : g_(&g), position_(position) {
        const auto width = g.params().width(1);
        if (position + 1 >= width) throw ParameterError("tuple overlaps the last token");
        TransitionTables tables(g);
        const NodeRef parent{1, position};
        const NodeRef last{0, g.params().input_length() - 1};
        lca_ = tables.lca_level(parent, last);
        centered_ = node_correlation(tables, parent, last);
    }

    std::uint32_t lca_level() const { return lca_; }

    /// Correlation between the tuple's parent symbol a and the last token ν.
    double collapsed(Symbol a, Symbol nu) const { return centered_(a, nu); }

    CorrelationValue operator()(std::span<const Symbol> tuple, Symbol nu) const {
        detail::check_tuple(*g_, tuple);
        if (nu >= g_->v()) throw ParameterError("token out of range");
        auto ref = g_->lookup(1, tuple);
        if (!ref) return {0.0, false};
        return {g_->distribution(1).weight(ref->rank) * centered_(ref->lhs, nu), true};
    }

    CorrelationTable table() const {
        CorrelationTable t;
        t.kind = CorrelationKind::token_tuple;
        t.position = position_;
        t.lca_level = lca_;
        t.tuples = detail::produced_level1_tuples(*g_);
        t.conditioners = g_->v();
        t.values.resize(t.conditioners * t.tuples.size());
        for (Symbol nu = 0; nu < g_->v(); ++nu)
            for (std::size_t i = 0; i < t.tuples.size(); ++i)
                t.values[nu * t.tuples.size() + i] = (*this)(g_->decode(t.tuples[i]), nu).value;
        return t;
    }

private:
    const GrammarInstance* g_;
    std::uint64_t position_;
    std::uint32_t lca_ = 0;
    SquareMatrix centered_;
};

inline CorrelationValue token_correlation(const GrammarInstance& g, std::uint64_t position,
                                          std::span<const Symbol> tuple, Symbol nu) {
    return TokenCorrelationOracle(g, position)(tuple, nu);
}

/// Tuple position whose lowest common ancestor with the last token is `lca`:
/// the tuple immediately left of the last token's level-(lca-1) subtree.
inline std::uint64_t tuple_position_with_lca(const RhmParams& p, std::uint32_t lca) {
    if (lca < 2 || lca > p.L) throw ParameterError("tuple-token LCA level must lie in 2..L");
    const std::uint64_t d = p.input_length();
    const std::uint64_t block = *checked_pow(p.s, lca - 1);
    return (d - block) / p.s - 1;
}

}  // namespace rhm
