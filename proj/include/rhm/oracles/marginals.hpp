#pragma once

#include <cstdint>
#include <vector>

#include "rhm/grammar.hpp"

namespace rhm {

/// Dense v×v row-major matrix of probabilities.
struct SquareMatrix {
    std::uint32_t n = 0;
    std::vector<double> data;

    SquareMatrix() = default;
    explicit SquareMatrix(std::uint32_t size, double fill = 0.0) : n(size), data(static_cast<std::size_t>(size) * size, fill) {}

    static SquareMatrix identity(std::uint32_t size) {
        SquareMatrix id(size);
        for (std::uint32_t i = 0; i < size; ++i) id(i, i) = 1.0;
        return id;
    }

    double& operator()(std::uint32_t r, std::uint32_t c) { return data[static_cast<std::size_t>(r) * n + c]; }
    double operator()(std::uint32_t r, std::uint32_t c) const { return data[static_cast<std::size_t>(r) * n + c]; }

    SquareMatrix operator*(const SquareMatrix& rhs) const {
        SquareMatrix out(n);
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t k = 0; k < n; ++k) {
                const double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (std::uint32_t j = 0; j < n; ++j) out(i, j) += a * rhs(k, j);
            }
        return out;
    }

    SquareMatrix transposed() const {
        SquareMatrix out(n);
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < n; ++j) out(j, i) = (*this)(i, j);
        return out;
    }
};

inline std::vector<double> row_times(const std::vector<double>& row, const SquareMatrix& m) {
    std::vector<double> out(m.n, 0.0);
    for (std::uint32_t k = 0; k < m.n; ++k) {
        if (row[k] == 0.0) continue;
        for (std::uint32_t j = 0; j < m.n; ++j) out[j] += row[k] * m(k, j);
    }
    return out;
}

/// Position of a node: level ℓ (0 = tokens) and index j in 0..s^{L-ℓ}-1.
struct NodeRef {
    std::uint32_t level;
    std::uint64_t index;
    bool operator==(const NodeRef&) const = default;
};

/// T[ℓ][i](a, c) = P(child i of a level-ℓ node is c | node is a).
class TransitionTables {
public:
    explicit TransitionTables(const GrammarInstance& g) : g_(&g) {
        const auto v = g.v();
        tables_.resize(g.depth());
        for (std::uint32_t level = 1; level <= g.depth(); ++level) {
            const auto& dist = g.distribution(level);
            auto& per_child = tables_[level - 1];
            per_child.assign(g.s(), SquareMatrix(v));
            for (Symbol a = 0; a < v; ++a)
                for (std::uint32_t rank = 1; rank <= g.m(); ++rank) {
                    const double f = dist.weight(rank);
                    auto rhs = g.rhs(level, a, rank);
                    for (std::uint32_t i = 0; i < g.s(); ++i) per_child[i](a, rhs[i]) += f;
                }
        }
    }

    const GrammarInstance& grammar() const { return *g_; }
    const SquareMatrix& child(std::uint32_t level, std::uint32_t i) const { return tables_[level - 1][i]; }

    /// Index of `node`'s ancestor at level `up` (≥ node.level).
    std::uint64_t ancestor(NodeRef node, std::uint32_t up) const {
        std::uint64_t idx = node.index;
        for (std::uint32_t l = node.level; l < up; ++l) idx /= g_->s();
        return idx;
    }

    /// D(a, c) = P(node = c | its level-`from` ancestor = a).
    SquareMatrix descend(std::uint32_t from, NodeRef node) const {
        SquareMatrix acc = SquareMatrix::identity(g_->v());
        for (std::uint32_t level = from; level > node.level; --level) {
            const auto child_index = static_cast<std::uint32_t>(ancestor(node, level - 1) % g_->s());
            acc = acc * child(level, child_index);
        }
        return acc;
    }

    /// Exact marginal of the symbol at `node` under a uniform root.
    std::vector<double> marginal(NodeRef node) const {
        const auto& g = *g_;
        if (node.level > g.depth() || node.index >= g.params().width(node.level))
            throw ParameterError("node position out of range");
        std::vector<double> dist(g.v(), 1.0 / g.v());
        for (std::uint32_t level = g.depth(); level > node.level; --level) {
            const auto child_index = static_cast<std::uint32_t>(ancestor(node, level - 1) % g.s());
            dist = row_times(dist, child(level, child_index));
        }
        return dist;
    }

    /// Level of the lowest common ancestor of two nodes in disjoint subtrees.
    std::uint32_t lca_level(NodeRef a, NodeRef b) const {
        const auto top = std::max(a.level, b.level);
        for (std::uint32_t level = top; level <= g_->depth(); ++level)
            if (ancestor(a, level) == ancestor(b, level)) return level;
        return g_->depth();
    }

    /// J(α, β) = P(node a = α, node b = β). Nodes must lie in disjoint subtrees.
    SquareMatrix pair_joint(NodeRef a, NodeRef b) const {
        const auto& g = *g_;
        const auto v = g.v();
        const std::uint32_t lca = lca_level(a, b);
        if (lca == a.level || lca == b.level) throw ParameterError("nodes must lie in disjoint subtrees");
        const auto pi = marginal({lca, ancestor(a, lca)});
        const auto ca = static_cast<std::uint32_t>(ancestor(a, lca - 1) % g.s());
        const auto cb = static_cast<std::uint32_t>(ancestor(b, lca - 1) % g.s());
        SquareMatrix children(v);
        const auto& dist = g.distribution(lca);
        for (Symbol top = 0; top < v; ++top) {
            if (pi[top] == 0.0) continue;
            for (std::uint32_t rank = 1; rank <= g.m(); ++rank) {
                auto rhs = g.rhs(lca, top, rank);
                children(rhs[ca], rhs[cb]) += pi[top] * dist.weight(rank);
            }
        }
        const auto da = descend(lca - 1, a);
        const auto db = descend(lca - 1, b);
        return da.transposed() * children * db;
    }

private:
    const GrammarInstance* g_;
    std::vector<std::vector<SquareMatrix>> tables_;
};

/// Marginal of the level-ℓ symbol at `position`; see TransitionTables::marginal.
inline std::vector<double> level_marginals(const GrammarInstance& g, std::uint32_t level, std::uint64_t position) {
    return TransitionTables(g).marginal({level, position});
}

/// Grammar formed by levels 2..L of `g`, i.e. the grammar over level-1 strings.
inline GrammarInstance upper_subgrammar(const GrammarInstance& g) {
    if (g.depth() < 2) throw ParameterError("upper sub-grammar needs L >= 2");
    RhmParams p = g.params();
    p.L -= 1;
    if (p.zipf_layer) {
        if (*p.zipf_layer == 1) p.zipf_layer.reset();
        else *p.zipf_layer -= 1;
    }
    std::vector<std::vector<Symbol>> rhs;
    std::vector<RuleDistribution> dists;
    for (std::uint32_t level = 2; level <= g.depth(); ++level) {
        rhs.push_back(g.rule_table(level));
        dists.push_back(g.distribution(level));
    }
    return GrammarInstance(p, std::move(rhs), std::move(dists));
}

}  // namespace rhm
