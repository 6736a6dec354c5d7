#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rhm/dataset.hpp"
#include "rhm/error.hpp"
#include "rhm/grammar.hpp"
#include "rhm/oracles/correlations.hpp"
#include "rhm/parallel.hpp"
#include "rhm/random.hpp"
#include "rhm/theory.hpp"

namespace rhm {

enum class Conditioner { label, last_token };

/// Marks a node whose symbol the learner could not resolve.
inline constexpr Symbol unresolved_symbol = std::numeric_limits<Symbol>::max();

/// Plug-in joint counts between a conditioner and the s-tuple at one position.
/// Rows containing an unresolved symbol are skipped, so `P` counts valid rows.
struct EmpiricalCorrelations {
    Conditioner conditioner = Conditioner::label;
    std::uint64_t position = 0;
    std::uint32_t conditioners = 0;
    std::uint64_t P = 0;
    std::vector<TupleCode> tuples;               ///< observed tuples, ascending
    std::vector<std::uint64_t> counts;           ///< counts[t * conditioners + c]
    std::vector<std::uint64_t> tuple_counts;     ///< N(μ)
    std::vector<std::uint64_t> conditioner_counts;

    double estimate(std::uint32_t c, std::size_t t) const {
        if (P == 0) return 0.0;
        const double p = static_cast<double>(P);
        return counts[t * conditioners + c] / p - (tuple_counts[t] / p) * (conditioner_counts[c] / p);
    }

    std::optional<std::size_t> find(TupleCode code) const {
        auto it = std::lower_bound(tuples.begin(), tuples.end(), code);
        if (it == tuples.end() || *it != code) return std::nullopt;
        return static_cast<std::size_t>(it - tuples.begin());
    }

    /// Pearson statistic of the conditioner counts of tuple t against the marginal.
    double chi_square(std::size_t t) const {
        double x2 = 0.0;
        const double n = static_cast<double>(tuple_counts[t]);
        for (std::uint32_t c = 0; c < conditioners; ++c) {
            if (conditioner_counts[c] == 0) continue;
            const double expected = n * conditioner_counts[c] / static_cast<double>(P);
            const double diff = counts[t * conditioners + c] - expected;
            x2 += diff * diff / expected;
        }
        return x2;
    }

    std::uint32_t active_conditioners() const {
        std::uint32_t k = 0;
        for (auto c : conditioner_counts) k += c > 0;
        return k;
    }
};

namespace detail {

inline TupleCode encode_symbols(std::span<const Symbol> syms, std::uint32_t alphabet) {
    TupleCode code = 0;
    for (Symbol sym : syms) code = code * alphabet + sym;
    return code;
}

inline std::vector<Symbol> decode_symbols(TupleCode code, std::uint32_t alphabet, std::uint32_t s) {
    std::vector<Symbol> out(s);
    for (std::uint32_t i = s; i-- > 0;) {
        out[i] = static_cast<Symbol>(code % alphabet);
        code /= alphabet;
    }
    return out;
}

inline bool has_unresolved(std::span<const Symbol> syms) {
    return std::find(syms.begin(), syms.end(), unresolved_symbol) != syms.end();
}

}  // namespace detail

/// Counts over rows of level-(ℓ−1) symbols; tuple j spans row[j*s .. j*s+s-1].
inline EmpiricalCorrelations estimate_correlations(const std::vector<std::vector<Symbol>>& rows,
                                                   const std::vector<Symbol>& conditioner_values,
                                                   std::uint32_t conditioners, std::uint32_t alphabet,
                                                   std::uint32_t s, std::uint64_t position,
                                                   Conditioner kind = Conditioner::label) {
    EmpiricalCorrelations out;
    out.conditioner = kind;
    out.position = position;
    out.conditioners = conditioners;
    out.conditioner_counts.assign(conditioners, 0);
    std::map<TupleCode, std::vector<std::uint64_t>> table;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if ((position + 1) * s > row.size()) throw ParameterError("tuple position out of range");
        std::span<const Symbol> tuple(row.data() + position * s, s);
        const Symbol c = conditioner_values[i];
        if (detail::has_unresolved(tuple) || c == unresolved_symbol) continue;
        auto& counts = table[detail::encode_symbols(tuple, alphabet)];
        if (counts.empty()) counts.assign(conditioners, 0);
        ++counts[c];
        ++out.conditioner_counts[c];
        ++out.P;
    }
    for (auto& [code, counts] : table) {
        out.tuples.push_back(code);
        std::uint64_t total = 0;
        for (auto x : counts) total += x;
        out.tuple_counts.push_back(total);
        out.counts.insert(out.counts.end(), counts.begin(), counts.end());
    }
    return out;
}

/// Token-level estimate of the correlation between tuple j and the label or last token.
inline EmpiricalCorrelations estimate_correlations(const Dataset& ds, Conditioner conditioner, std::uint64_t position) {
    const auto& p = ds.params;
    if (position >= p.width(1)) throw ParameterError("tuple position out of range");
    if (conditioner == Conditioner::last_token && position + 1 >= p.width(1))
        throw ParameterError("tuple overlaps the last token");
    std::vector<std::vector<Symbol>> rows;
    std::vector<Symbol> cond;
    rows.reserve(ds.samples.size());
    for (const auto& sample : ds.samples) {
        rows.push_back(sample.tokens);
        cond.push_back(conditioner == Conditioner::label ? sample.label : sample.tokens.back());
    }
    return estimate_correlations(rows, cond, p.v, p.v, p.s, position, conditioner);
}

/// One feature row per tuple (concatenated over positions and conditioners),
/// plus whether its signal was detected above sampling noise.
struct TupleProfiles {
    std::vector<TupleCode> tuples;
    std::vector<std::vector<double>> rows;
    std::vector<bool> resolved;
};

/// Resolution test: Σ_j X²_j(μ) > 2 Σ_j df_j, i.e. the estimated signal power
/// exceeds the noise power expected from the counts alone.
inline TupleProfiles profiles_from(const std::vector<EmpiricalCorrelations>& corr) {
    TupleProfiles out;
    std::map<TupleCode, std::size_t> index;
    for (const auto& c : corr)
        for (auto code : c.tuples) index.emplace(code, 0);
    for (auto& [code, i] : index) {
        i = out.tuples.size();
        out.tuples.push_back(code);
    }
    std::size_t dim = 0;
    for (const auto& c : corr) dim += c.conditioners;
    out.rows.assign(out.tuples.size(), std::vector<double>(dim, 0.0));
    std::vector<double> x2(out.tuples.size(), 0.0), df(out.tuples.size(), 0.0);
    std::size_t offset = 0;
    for (const auto& c : corr) {
        const double dof = c.active_conditioners() > 0 ? c.active_conditioners() - 1.0 : 0.0;
        for (std::size_t t = 0; t < c.tuples.size(); ++t) {
            const auto i = index[c.tuples[t]];
            for (std::uint32_t y = 0; y < c.conditioners; ++y) out.rows[i][offset + y] = c.estimate(y, t);
            x2[i] += c.chi_square(t);
            df[i] += dof;
        }
        offset += c.conditioners;
    }
    out.resolved.resize(out.tuples.size());
    for (std::size_t i = 0; i < out.tuples.size(); ++i) out.resolved[i] = df[i] > 0.0 && x2[i] > 2.0 * df[i];
    return out;
}

/// Exact tables: every produced tuple is resolved by definition.
inline TupleProfiles profiles_from(const std::vector<CorrelationTable>& tables) {
    TupleProfiles out;
    if (tables.empty()) return out;
    out.tuples = tables.front().tuples;
    std::size_t dim = 0;
    for (const auto& t : tables) dim += t.conditioners;
    out.rows.assign(out.tuples.size(), std::vector<double>(dim, 0.0));
    std::size_t offset = 0;
    for (const auto& t : tables) {
        if (t.tuples != out.tuples) throw ParameterError("exact tables disagree on the produced tuples");
        for (std::size_t i = 0; i < out.tuples.size(); ++i)
            for (std::uint32_t c = 0; c < t.conditioners; ++c) out.rows[i][offset + c] = t.at(c, i);
        offset += t.conditioners;
    }
    out.resolved.assign(out.tuples.size(), true);
    return out;
}

struct LayerClustering {
    std::map<TupleCode, Symbol> assignment;  ///< resolved tuple → cluster id
    std::uint32_t clusters = 0;
    std::size_t observed = 0;
    bool partial = false;  ///< fewer resolved tuples than requested clusters

    std::optional<Symbol> cluster_of(TupleCode code) const {
        auto it = assignment.find(code);
        if (it == assignment.end()) return std::nullopt;
        return it->second;
    }
};

/// Agglomerative clustering of the resolved tuples into at most v clusters.
/// Cluster profile = sum of member rows; similarity = cosine; ties go to the
/// pair whose smallest member tuples are lexicographically first. Ids are
/// numbered by smallest member tuple.
inline LayerClustering infer_layer(const TupleProfiles& profiles, std::uint32_t v) {
    if (v < 1) throw ParameterError("cluster count must be positive");
    LayerClustering out;
    out.observed = profiles.tuples.size();
    struct Cluster {
        std::vector<double> sum;
        double norm = 0.0;
        TupleCode first;
        std::vector<TupleCode> members;
    };
    std::vector<Cluster> cl;
    for (std::size_t i = 0; i < profiles.tuples.size(); ++i) {
        if (!profiles.resolved[i]) continue;
        Cluster c{profiles.rows[i], 0.0, profiles.tuples[i], {profiles.tuples[i]}};
        for (double x : c.sum) c.norm += x * x;
        c.norm = std::sqrt(c.norm);
        cl.push_back(std::move(c));
    }
    out.partial = cl.size() < v;
    auto cosine = [](const Cluster& a, const Cluster& b) {
        if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
        double dot = 0.0;
        for (std::size_t i = 0; i < a.sum.size(); ++i) dot += a.sum[i] * b.sum[i];
        return dot / (a.norm * b.norm);
    };
    const std::size_t n = cl.size();
    std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = cosine(cl[i], cl[j]);
    std::vector<bool> alive(n, true);
    std::size_t count = n;
    while (count > v) {
        std::size_t bi = n, bj = n;
        double best = -std::numeric_limits<double>::infinity();
        // Clusters stay sorted by `first`, so scanning in index order resolves
        // ties toward the lexicographically smallest pair.
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j)
                if (alive[j] && sim[i][j] > best) best = sim[i][j], bi = i, bj = j;
        }
        auto& a = cl[bi];
        auto& b = cl[bj];
        for (std::size_t k = 0; k < a.sum.size(); ++k) a.sum[k] += b.sum[k];
        a.norm = 0.0;
        for (double x : a.sum) a.norm += x * x;
        a.norm = std::sqrt(a.norm);
        a.members.insert(a.members.end(), b.members.begin(), b.members.end());
        alive[bj] = false;
        --count;
        for (std::size_t k = 0; k < n; ++k)
            if (alive[k] && k != bi) sim[bi][k] = sim[k][bi] = cosine(a, cl[k]);
    }
    Symbol id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        for (auto code : cl[i].members) out.assignment[code] = id;
        ++id;
    }
    out.clusters = id;
    return out;
}

inline LayerClustering infer_layer(const std::vector<EmpiricalCorrelations>& corr, std::uint32_t v) {
    return infer_layer(profiles_from(corr), v);
}

struct InferredRule {
    Symbol lhs = 0;
    std::vector<Symbol> rhs;
    double frequency = 0.0;  ///< share of the lhs's training occurrences
};

struct InferredLevel {
    LayerClustering clustering;
    std::vector<InferredRule> rules;
    double coverage = 0.0;  ///< fraction of valid training tuples that were assigned
};

/// Interpolated s^ℓ-gram counts keyed by the collapsed context.
struct NgramTable {
    std::unordered_map<std::string, std::vector<std::uint32_t>> counts;
};

struct InferredGrammar {
    Task task = Task::classification;
    RhmParams params;
    std::size_t P = 0;
    /// levels[ℓ-1] for ℓ = 1..L. For classification the top level's clusters
    /// are labels; for next-token the top level is empty (the spine).
    std::vector<InferredLevel> levels;
    std::vector<NgramTable> ngrams;  ///< next-token: ngrams[ℓ-1] for ℓ = 1..L
    double backoff = 1.0;
    bool partial = false;

    double coverage(std::uint32_t level) const { return levels.at(level - 1).coverage; }
};

namespace detail {

inline std::vector<Symbol> rewrite_row(const std::vector<Symbol>& row, std::uint32_t alphabet, std::uint32_t s,
                                       const LayerClustering& clustering, bool keep_spine) {
    std::vector<Symbol> next(row.size() / s, unresolved_symbol);
    const std::size_t usable = keep_spine ? next.size() - 1 : next.size();
    for (std::size_t j = 0; j < usable; ++j) {
        std::span<const Symbol> tuple(row.data() + j * s, s);
        if (has_unresolved(tuple)) continue;
        if (auto id = clustering.cluster_of(encode_symbols(tuple, alphabet))) next[j] = *id;
    }
    return next;
}

inline std::vector<InferredRule> rules_from(const std::vector<std::vector<Symbol>>& rows, std::uint32_t alphabet,
                                            std::uint32_t s, const LayerClustering& clustering, std::size_t positions,
                                            double& coverage) {
    std::map<TupleCode, std::uint64_t> seen;
    std::uint64_t valid = 0, assigned = 0;
    for (const auto& row : rows)
        for (std::size_t j = 0; j < positions; ++j) {
            std::span<const Symbol> tuple(row.data() + j * s, s);
            if (has_unresolved(tuple)) continue;
            ++valid;
            const auto code = encode_symbols(tuple, alphabet);
            if (clustering.cluster_of(code)) {
                ++assigned;
                ++seen[code];
            }
        }
    coverage = valid ? static_cast<double>(assigned) / valid : 0.0;
    std::map<Symbol, std::uint64_t> per_lhs;
    for (auto& [code, n] : seen) per_lhs[*clustering.cluster_of(code)] += n;
    std::vector<InferredRule> rules;
    for (auto& [code, n] : seen) {
        const Symbol lhs = *clustering.cluster_of(code);
        rules.push_back({lhs, decode_symbols(code, alphabet, s), static_cast<double>(n) / per_lhs[lhs]});
    }
    std::stable_sort(rules.begin(), rules.end(), [](const auto& a, const auto& b) { return a.lhs < b.lhs; });
    return rules;
}

/// Context key of the s^ℓ-gram: last s−1 tokens, then the s−1 left siblings of
/// the spine at each level 1..ℓ−1. nullopt if any of them is unresolved.
inline std::optional<std::string> context_key(const std::vector<std::vector<Symbol>>& levels, std::uint32_t s,
                                              std::uint32_t level) {
    std::string key;
    for (std::uint32_t j = 0; j < level; ++j) {
        const auto& row = levels[j];
        for (std::size_t i = row.size() - s; i + 1 < row.size(); ++i) {
            const Symbol sym = row[i];
            if (sym == unresolved_symbol) return std::nullopt;
            char bytes[sizeof(Symbol)];
            std::memcpy(bytes, &sym, sizeof sym);
            key.append(bytes, sizeof bytes);
        }
    }
    return key;
}

/// Rewrites a full token row (last token included) to every level the
/// inferred grammar covers; the spine is left unresolved.
inline std::vector<std::vector<Symbol>> collapse_levels(const InferredGrammar& ig, const std::vector<Symbol>& tokens) {
    const auto& p = ig.params;
    std::vector<std::vector<Symbol>> rows{tokens};
    for (std::uint32_t level = 1; level < p.L; ++level) {
        const std::uint32_t alphabet = level == 1 ? p.v : ig.levels[level - 2].clustering.clusters;
        rows.push_back(rewrite_row(rows.back(), std::max<std::uint32_t>(alphabet, 1), p.s,
                                   ig.levels[level - 1].clustering, true));
    }
    return rows;
}

}  // namespace detail

/// Bottom-up reconstruction from training samples (split ignored).
/// Classification: levels 1..L−1 cluster tuples by label correlation, the top
/// level maps each tuple to its majority label. Next-token: levels 1..L−1
/// cluster by correlation with the last token, then s^ℓ-gram counts are kept
/// for every level.
inline InferredGrammar reconstruct(const Dataset& ds, Task task) {
    const auto& p = ds.params;
    InferredGrammar ig;
    ig.task = task;
    ig.params = p;
    ig.P = ds.samples.size();
    ig.levels.resize(p.L);
    std::vector<std::vector<Symbol>> rows;
    std::vector<Symbol> cond;
    for (const auto& sample : ds.samples) {
        rows.push_back(sample.tokens);
        cond.push_back(task == Task::classification ? sample.label : sample.tokens.back());
    }
    if (rows.empty()) {
        ig.partial = true;
        if (task == Task::next_token) ig.ngrams.resize(p.L);
        return ig;
    }
    std::uint32_t alphabet = p.v;
    const bool spine = task == Task::next_token;
    for (std::uint32_t level = 1; level < p.L; ++level) {
        const std::size_t width = rows.front().size() / p.s;
        const std::size_t positions = spine ? width - 1 : width;
        std::vector<EmpiricalCorrelations> corr;
        for (std::size_t j = 0; j < positions; ++j)
            corr.push_back(estimate_correlations(rows, cond, p.v, alphabet, p.s, j,
                                                 spine ? Conditioner::last_token : Conditioner::label));
        auto& lvl = ig.levels[level - 1];
        lvl.clustering = infer_layer(corr, p.v);
        ig.partial = ig.partial || lvl.clustering.partial;
        lvl.rules = detail::rules_from(rows, alphabet, p.s, lvl.clustering, positions, lvl.coverage);
        for (auto& row : rows) row = detail::rewrite_row(row, alphabet, p.s, lvl.clustering, spine);
        alphabet = std::max<std::uint32_t>(lvl.clustering.clusters, 1);
    }
    auto& top = ig.levels[p.L - 1];
    if (task == Task::classification) {
        std::map<TupleCode, std::vector<std::uint64_t>> votes;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (detail::has_unresolved(rows[i])) continue;
            auto& v = votes[detail::encode_symbols(rows[i], alphabet)];
            if (v.empty()) v.assign(p.v, 0);
            ++v[cond[i]];
        }
        for (auto& [code, v] : votes)
            top.clustering.assignment[code] = static_cast<Symbol>(std::max_element(v.begin(), v.end()) - v.begin());
        top.clustering.clusters = p.v;
        top.clustering.observed = votes.size();
        top.rules = detail::rules_from(rows, alphabet, p.s, top.clustering, 1, top.coverage);
    } else {
        ig.ngrams.resize(p.L);
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            auto levels = detail::collapse_levels(ig, ds.samples[i].tokens);
            const Symbol next = ds.samples[i].tokens.back();
            for (std::uint32_t level = 1; level <= p.L; ++level) {
                auto key = detail::context_key(levels, p.s, level);
                if (!key) break;
                auto& counts = ig.ngrams[level - 1].counts[*key];
                if (counts.empty()) counts.assign(p.v, 0);
                ++counts[next];
            }
        }
    }
    return ig;
}

/// Bottom-up parse with the inferred clusters; nullopt (abstain) if any
/// patch at any level is unresolved.
inline std::optional<Symbol> classify(const InferredGrammar& ig, std::span<const Symbol> tokens) {
    const auto& p = ig.params;
    if (tokens.size() != p.input_length()) throw ParameterError("sequence length must equal s^L");
    if (ig.P == 0) return std::nullopt;
    std::vector<Symbol> row(tokens.begin(), tokens.end());
    std::uint32_t alphabet = p.v;
    for (std::uint32_t level = 1; level <= p.L; ++level) {
        const auto& clustering = ig.levels[level - 1].clustering;
        row = detail::rewrite_row(row, alphabet, p.s, clustering, false);
        if (detail::has_unresolved(row)) return std::nullopt;
        alphabet = std::max<std::uint32_t>(clustering.clusters, 1);
    }
    return row.front();
}

struct NextTokenPrediction {
    std::vector<double> distribution;
    std::uint32_t level = 0;  ///< deepest context level with training counts; 0 = uniform fallback
};

/// p_ℓ(x|c_ℓ) = (n_ℓ(c_ℓ, x) + β p_{ℓ−1}(x|c_{ℓ−1})) / (N_ℓ(c_ℓ) + β), p_0 uniform,
/// up to the deepest level whose context is resolved.
inline NextTokenPrediction predict_next(const InferredGrammar& ig, std::span<const Symbol> context) {
    const auto& p = ig.params;
    if (ig.task != Task::next_token) throw ParameterError("grammar was not reconstructed for next-token prediction");
    if (context.size() + 1 != p.input_length()) throw ParameterError("context must hold s^L - 1 tokens");
    std::vector<Symbol> tokens(context.begin(), context.end());
    tokens.push_back(unresolved_symbol);
    const auto levels = detail::collapse_levels(ig, tokens);
    NextTokenPrediction out;
    out.distribution.assign(p.v, 1.0 / p.v);
    for (std::uint32_t level = 1; level <= p.L && !ig.ngrams.empty(); ++level) {
        auto key = detail::context_key(levels, p.s, level);
        if (!key) break;
        const auto& table = ig.ngrams[level - 1].counts;
        auto it = table.find(*key);
        if (it == table.end()) break;
        double total = 0.0;
        for (auto c : it->second) total += c;
        for (Symbol x = 0; x < p.v; ++x)
            out.distribution[x] = (it->second[x] + ig.backoff * out.distribution[x]) / (total + ig.backoff);
        out.level = level;
    }
    return out;
}

struct ClassEvaluation {
    double error = 1.0;  ///< abstentions count as errors
    double abstain_rate = 1.0;
};

inline ClassEvaluation evaluate_classification(const InferredGrammar& ig, const Dataset& test) {
    ClassEvaluation out;
    if (test.samples.empty()) return out;
    std::size_t wrong = 0, abstained = 0;
    for (const auto& sample : test.samples) {
        auto y = classify(ig, sample.tokens);
        if (!y) ++abstained;
        if (!y || *y != sample.label) ++wrong;
    }
    out.error = static_cast<double>(wrong) / test.samples.size();
    out.abstain_rate = static_cast<double>(abstained) / test.samples.size();
    return out;
}

/// Mean −log p(x_d | context) in nats.
inline double evaluate_next_token(const InferredGrammar& ig, const Dataset& test) {
    if (test.samples.empty()) throw ParameterError("empty test set");
    double loss = 0.0;
    for (const auto& sample : test.samples) {
        std::span<const Symbol> tokens(sample.tokens);
        auto pred = predict_next(ig, tokens.first(tokens.size() - 1));
        loss -= std::log(pred.distribution[tokens.back()]);
    }
    return loss / static_cast<double>(test.samples.size());
}

/// Per rank k, the fraction of produced level-1 tuples of rank k that are
/// assigned to a cluster whose dominant true parent (by rule weight) is their own.
inline std::vector<double> level1_rank_accuracy(const GrammarInstance& g, const InferredGrammar& ig) {
    const auto& clustering = ig.levels.at(0).clustering;
    const auto& dist = g.distribution(1);
    std::map<Symbol, std::vector<double>> mass;
    for (Symbol a = 0; a < g.v(); ++a)
        for (std::uint32_t k = 1; k <= g.m(); ++k)
            if (auto id = clustering.cluster_of(g.encode(g.rhs(1, a, k)))) {
                auto& w = mass[*id];
                if (w.empty()) w.assign(g.v(), 0.0);
                w[a] += dist.weight(k) + 1e-300;
            }
    std::map<Symbol, Symbol> parent;
    for (auto& [id, w] : mass) parent[id] = static_cast<Symbol>(std::max_element(w.begin(), w.end()) - w.begin());
    std::vector<double> acc(g.m(), 0.0);
    for (Symbol a = 0; a < g.v(); ++a)
        for (std::uint32_t k = 1; k <= g.m(); ++k) {
            auto id = clustering.cluster_of(g.encode(g.rhs(1, a, k)));
            if (id && parent[*id] == a) acc[k - 1] += 1.0 / g.v();
        }
    return acc;
}

struct ExperimentConfig {
    Task task = Task::classification;
    std::vector<double> grid;
    std::size_t trials = 1;
    std::size_t test_size = 10000;
    std::uint64_t seed = 0;
    std::size_t workers = default_workers();
};

struct ExperimentResult {
    CurveSeries curve;                          ///< mean ± SE over trials
    std::vector<std::vector<double>> per_trial;  ///< per_trial[t][i]
};

/// Trial t uses grammar seed derive_seed(seed, t, 0), test set derive_seed(seed, t, 1)
/// and, for grid point i, training set derive_seed(seed, t, 2 + i).
inline ExperimentResult learning_curve_experiment(const RhmParams& params, const ExperimentConfig& cfg) {
    params.validate();
    if (cfg.grid.empty() || cfg.trials == 0) throw ParameterError("experiment needs a grid and at least one trial");
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
        if (!(cfg.grid[i] >= 0.0) || (i > 0 && !(cfg.grid[i] > cfg.grid[i - 1])))
            throw ParameterError("P grid must be non-negative and strictly increasing");
    const std::size_t points = cfg.grid.size();
    ExperimentResult out;
    out.per_trial.assign(cfg.trials, std::vector<double>(points, 0.0));
    std::vector<GrammarInstance> grammars;
    std::vector<Dataset> tests;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        RhmParams p = params;
        p.seed = derive_seed(cfg.seed, t, 0);
        grammars.push_back(build_grammar(p));
        tests.push_back(sample_dataset(grammars.back(), cfg.test_size, derive_seed(cfg.seed, t, 1), false, Split::test));
    }
    parallel_for(cfg.trials * points, cfg.workers, [&](std::size_t job) {
        const std::size_t t = job / points, i = job % points;
        const auto P = static_cast<std::size_t>(std::llround(cfg.grid[i]));
        auto train = sample_dataset(grammars[t], P, derive_seed(cfg.seed, t, 2 + i));
        auto ig = reconstruct(train, cfg.task);
        out.per_trial[t][i] = cfg.task == Task::classification ? evaluate_classification(ig, tests[t]).error
                                                               : evaluate_next_token(ig, tests[t]);
    });
    out.curve.label = std::string(cfg.task == Task::classification ? "class-error" : "next-token-loss") + "(" +
                      describe(params.kind_at(params.zipf_layer.value_or(1))) + ")";
    out.curve.provenance = Provenance::empirical;
    for (std::size_t i = 0; i < points; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t t = 0; t < cfg.trials; ++t) mean += out.per_trial[t][i];
        mean /= cfg.trials;
        for (std::size_t t = 0; t < cfg.trials; ++t) var += (out.per_trial[t][i] - mean) * (out.per_trial[t][i] - mean);
        std::optional<double> se;
        if (cfg.trials > 1) se = std::sqrt(var / (cfg.trials - 1) / cfg.trials);
        out.curve.points.push_back({cfg.grid[i], mean, se});
    }
    return out;
}

}  // namespace rhm
