#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhm/grammar.hpp"
#include "rhm/parallel.hpp"
#include "rhm/sampling.hpp"
#include "rhm/serialize.hpp"

namespace rhm {

inline constexpr const char* dataset_schema = "rhm-data/1";
inline constexpr char tensor_magic[4] = {'R', 'H', 'M', 'T'};
inline constexpr std::size_t tensor_header_bytes = 16;  // magic + 3 × u32

enum class Split { train, test };

struct Sample {
    std::vector<Symbol> tokens;
    Symbol label = 0;
    std::optional<Derivation> derivation;
    Split split = Split::train;
    bool operator==(const Sample&) const = default;
};

struct Dataset {
    RhmParams params;
    std::uint64_t grammar_hash = 0;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool operator==(const Dataset&) const = default;
};

/// Content hash of the rule tables and distributions.
inline std::uint64_t grammar_hash(const GrammarInstance& g) {
    std::uint64_t h = splitmix64(g.params().seed);
    auto mix = [&h](std::uint64_t x) { h = splitmix64(h ^ x); };
    mix(g.v());
    mix(g.m());
    mix(g.s());
    mix(g.depth());
    for (std::uint32_t level = 1; level <= g.depth(); ++level) {
        for (Symbol sym : g.rule_table(level)) mix(sym);
        for (double w : g.distribution(level).weights()) {
            std::uint64_t bits;
            std::memcpy(&bits, &w, sizeof bits);
            mix(bits);
        }
    }
    return h;
}

/// i.i.d. samples; sample i uses substream derive_seed(seed, i), so the result
/// does not depend on `workers`.
inline Dataset sample_dataset(const GrammarInstance& g, std::size_t count, std::uint64_t seed,
                              bool keep_derivations = false, Split split = Split::train,
                              std::size_t workers = 1) {
    Dataset ds;
    ds.params = g.params();
    ds.grammar_hash = grammar_hash(g);
    ds.samples.resize(count);
    parallel_for(count, workers, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        Derivation der = sample_derivation(g, rng);
        Sample& out = ds.samples[i];
        out.tokens = der.nodes[0];
        out.label = der.label;
        out.split = split;
        if (keep_derivations) out.derivation = std::move(der);
    });
    return ds;
}

namespace detail {

inline std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

inline void put_u32(std::ostream& out, std::uint32_t x) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                                    static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// Line-delimited records. The first line is a header carrying the schema tag
/// and grammar reference; each following line is {tokens, label, split[, derivation]}.
inline void export_jsonl(const Dataset& ds, std::ostream& out) {
    nlohmann::json header;
    header["schema"] = dataset_schema;
    header["params"] = params_to_json(ds.params);
    header["grammar_hash"] = detail::hex64(ds.grammar_hash);
    header["count"] = ds.samples.size();
    out << header.dump() << '\n';
    for (const auto& sample : ds.samples) {
        nlohmann::json rec;
        rec["tokens"] = sample.tokens;
        rec["label"] = sample.label;
        rec["split"] = sample.split == Split::train ? "train" : "test";
        if (sample.derivation) {
            rec["derivation"] = {{"nodes", sample.derivation->nodes}, {"ranks", sample.derivation->ranks}};
        }
        out << rec.dump() << '\n';
    }
}

inline void export_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot open " + path + " for writing");
    export_jsonl(ds, out);
}

/// Reads a JSONL dataset. Every record is validated against the header params;
/// when `grammar` is given, the hash must match and every sample must parse.
inline Dataset ingest_jsonl(std::istream& in, const GrammarInstance* grammar = nullptr) {
    Dataset ds;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty dataset");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("dataset header is not valid JSON: ") + e.what());
    }
    if (!header.contains("schema") || header["schema"] != dataset_schema) throw SchemaError("missing rhm-data/1 header");
    ds.params = params_from_json(detail::require(header, "params"));
    ds.params.validate();
    try {
        ds.grammar_hash = std::stoull(detail::require(header, "grammar_hash").get<std::string>(), nullptr, 16);
    } catch (const std::exception&) {
        throw SchemaError("bad grammar_hash in dataset header");
    }
    if (grammar) {
        if (!(grammar->params() == ds.params) || grammar_hash(*grammar) != ds.grammar_hash)
            throw InvariantError("dataset was generated by a different grammar");
    }
    const std::uint64_t d = ds.params.input_length();
    const std::uint32_t v = ds.params.v;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Sample sample;
        try {
            auto rec = nlohmann::json::parse(line);
            sample.tokens = detail::require(rec, "tokens").get<std::vector<Symbol>>();
            sample.label = detail::require(rec, "label").get<Symbol>();
            if (rec.contains("split")) sample.split = rec["split"] == "test" ? Split::test : Split::train;
            if (rec.contains("derivation")) {
                Derivation der;
                der.nodes = rec["derivation"].at("nodes").get<std::vector<std::vector<Symbol>>>();
                der.ranks = rec["derivation"].at("ranks").get<std::vector<std::vector<std::uint32_t>>>();
                der.label = sample.label;
                sample.derivation = std::move(der);
            }
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("record " + std::to_string(line_no) + ": " + e.what());
        }
        if (sample.tokens.size() != d)
            throw InvariantError("record " + std::to_string(line_no) + ": expected " + std::to_string(d) + " tokens");
        for (Symbol t : sample.tokens)
            if (t >= v) throw InvariantError("record " + std::to_string(line_no) + ": token out of range");
        if (sample.label >= v) throw InvariantError("record " + std::to_string(line_no) + ": label out of range");
        if (grammar) {
            auto der = parse_sequence(*grammar, sample.tokens);
            if (!der || der->label != sample.label)
                throw InvariantError("record " + std::to_string(line_no) + ": does not parse to its label");
            if (sample.derivation && !(*sample.derivation == *der))
                throw InvariantError("record " + std::to_string(line_no) + ": stored derivation disagrees with parse");
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

inline Dataset ingest_jsonl(const std::string& path, const GrammarInstance* grammar = nullptr) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open " + path);
    return ingest_jsonl(in, grammar);
}

/// Flat one-hot tensor: magic, little-endian u32 {P, d, v}, then P·d·v bytes.
inline void export_tensor(const Dataset& ds, std::ostream& out) {
    const auto d = static_cast<std::uint32_t>(ds.params.input_length());
    const auto v = ds.params.v;
    out.write(tensor_magic, 4);
    detail::put_u32(out, static_cast<std::uint32_t>(ds.samples.size()));
    detail::put_u32(out, d);
    detail::put_u32(out, v);
    for (const auto& sample : ds.samples) {
        auto bytes = one_hot(sample.tokens, v);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

inline void export_tensor(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot open " + path + " for writing");
    export_tensor(ds, out);
}

struct TokenTensor {
    std::uint32_t d = 0;
    std::uint32_t v = 0;
    std::vector<std::vector<Symbol>> sequences;
};

/// Inverse of export_tensor. Labels are not part of the tensor format.
inline TokenTensor ingest_tensor(std::istream& in) {
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < tensor_header_bytes || std::memcmp(bytes.data(), tensor_magic, 4) != 0)
        throw SchemaError("not an rhm one-hot tensor");
    const std::uint32_t P = detail::get_u32(bytes.data() + 4);
    TokenTensor t;
    t.d = detail::get_u32(bytes.data() + 8);
    t.v = detail::get_u32(bytes.data() + 12);
    const std::uint64_t expected = tensor_header_bytes + static_cast<std::uint64_t>(P) * t.d * t.v;
    if (bytes.size() != expected)
        throw SchemaError("tensor size " + std::to_string(bytes.size()) + " does not match header (" +
                          std::to_string(expected) + ")");
    t.sequences.resize(P);
    const unsigned char* body = bytes.data() + tensor_header_bytes;
    for (std::uint32_t p = 0; p < P; ++p) {
        auto& seq = t.sequences[p];
        seq.resize(t.d);
        for (std::uint32_t i = 0; i < t.d; ++i) {
            const unsigned char* row = body + (static_cast<std::uint64_t>(p) * t.d + i) * t.v;
            int hot = -1;
            for (std::uint32_t c = 0; c < t.v; ++c) {
                if (row[c] > 1) throw SchemaError("tensor entries must be 0 or 1");
                if (row[c] == 1) {
                    if (hot >= 0) throw SchemaError("one-hot row has more than one active entry");
                    hot = static_cast<int>(c);
                }
            }
            if (hot < 0) throw SchemaError("one-hot row has no active entry");
            seq[i] = static_cast<Symbol>(hot);
        }
    }
    return t;
}

inline TokenTensor ingest_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open " + path);
    return ingest_tensor(in);
}

}  // namespace rhm
