#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rhm/grammar.hpp"

namespace rhm {

inline constexpr const char* grammar_schema = "rhm-grammar/1";

inline nlohmann::json params_to_json(const RhmParams& p) {
    nlohmann::json j;
    j["v"] = p.v;
    j["m"] = p.m;
    j["s"] = p.s;
    j["L"] = p.L;
    if (p.zipf_layer) j["zipf_layer"] = *p.zipf_layer;
    else j["zipf_layer"] = "none";
    if (std::isinf(p.zipf_exponent)) j["zipf_exponent"] = "infinity";
    else j["zipf_exponent"] = p.zipf_exponent;
    j["seed"] = p.seed;
    return j;
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing required field '") + key + "'");
    return j.at(key);
}

}  // namespace detail

inline RhmParams params_from_json(const nlohmann::json& j) {
    using detail::require;
    RhmParams p;
    try {
        p.v = require(j, "v").get<std::uint32_t>();
        p.m = require(j, "m").get<std::uint32_t>();
        p.s = require(j, "s").get<std::uint32_t>();
        p.L = require(j, "L").get<std::uint32_t>();
        const auto& layer = require(j, "zipf_layer");
        if (layer.is_string()) {
            if (layer.get<std::string>() != "none") throw SchemaError("zipf_layer must be an integer or \"none\"");
            p.zipf_layer.reset();
        } else {
            p.zipf_layer = layer.get<std::uint32_t>();
        }
        const auto& a = require(j, "zipf_exponent");
        if (a.is_string()) {
            if (a.get<std::string>() != "infinity") throw SchemaError("zipf_exponent must be a number or \"infinity\"");
            p.zipf_exponent = std::numeric_limits<double>::infinity();
        } else {
            p.zipf_exponent = a.get<double>();
        }
        p.seed = require(j, "seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad params: ") + e.what());
    }
    return p;
}

inline nlohmann::json serialize_grammar(const GrammarInstance& g) {
    nlohmann::json doc;
    doc["schema"] = grammar_schema;
    doc["params"] = params_to_json(g.params());
    nlohmann::json levels = nlohmann::json::array();
    nlohmann::json distributions = nlohmann::json::array();
    for (std::uint32_t level = 1; level <= g.depth(); ++level) {
        nlohmann::json by_lhs = nlohmann::json::array();
        for (Symbol lhs = 0; lhs < g.v(); ++lhs) {
            nlohmann::json by_rank = nlohmann::json::array();
            for (std::uint32_t rank = 1; rank <= g.m(); ++rank) {
                auto r = g.rhs(level, lhs, rank);
                by_rank.push_back(std::vector<Symbol>(r.begin(), r.end()));
            }
            by_lhs.push_back(std::move(by_rank));
        }
        levels.push_back(std::move(by_lhs));
        distributions.push_back(g.distribution(level).weights());
    }
    doc["levels"] = std::move(levels);
    doc["distributions"] = std::move(distributions);
    return doc;
}

/// Rebuilds and fully re-validates an instance. Distributions must match the
/// ones implied by the params.
inline GrammarInstance deserialize_grammar(const nlohmann::json& doc) {
    using detail::require;
    if (!doc.is_object()) throw SchemaError("grammar document must be an object");
    const auto& schema = require(doc, "schema");
    if (!schema.is_string() || schema.get<std::string>() != grammar_schema)
        throw SchemaError("unsupported grammar schema tag");
    RhmParams params = params_from_json(require(doc, "params"));
    params.validate();
    const auto& levels = require(doc, "levels");
    const auto& dists = require(doc, "distributions");
    if (!levels.is_array() || levels.size() != params.L) throw SchemaError("levels must list L rule tables");
    if (!dists.is_array() || dists.size() != params.L) throw SchemaError("distributions must list L tables");

    std::vector<std::vector<Symbol>> rhs;
    std::vector<RuleDistribution> distributions;
    try {
        for (std::uint32_t level = 1; level <= params.L; ++level) {
            const auto& by_lhs = levels[level - 1];
            if (!by_lhs.is_array() || by_lhs.size() != params.v) throw SchemaError("each level must list v nonterminals");
            std::vector<Symbol> table;
            table.reserve(static_cast<std::size_t>(params.v) * params.m * params.s);
            for (const auto& by_rank : by_lhs) {
                if (!by_rank.is_array() || by_rank.size() != params.m)
                    throw SchemaError("each nonterminal must list m rules");
                for (const auto& tuple : by_rank) {
                    if (!tuple.is_array() || tuple.size() != params.s) throw SchemaError("each rule rhs must have s symbols");
                    for (const auto& sym : tuple) table.push_back(sym.get<Symbol>());
                }
            }
            rhs.push_back(std::move(table));

            auto weights = dists[level - 1].get<std::vector<double>>();
            double total = 0.0;
            for (double w : weights) total += w;
            if (std::abs(total - 1.0) > 1e-12) throw InvariantError("distribution at level " + std::to_string(level) + " is not normalized");
            RuleDistribution dist(std::move(weights));
            const RuleDistribution expected = make_distribution(params.m, params.kind_at(level));
            for (std::uint32_t k = 1; k <= params.m; ++k)
                if (std::abs(dist.weight(k) - expected.weight(k)) > 1e-12)
                    throw InvariantError("distribution at level " + std::to_string(level) + " disagrees with params");
            distributions.push_back(std::move(dist));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad grammar document: ") + e.what());
    }
    return GrammarInstance(params, std::move(rhs), std::move(distributions));
}

inline void save_grammar(const GrammarInstance& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot open " + path + " for writing");
    out << serialize_grammar(g).dump(1) << '\n';
}

inline GrammarInstance load_grammar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("grammar file is not valid JSON: ") + e.what());
    }
    return deserialize_grammar(doc);
}

}  // namespace rhm
