#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rhm/csv.hpp"
#include "rhm/dataset.hpp"
#include "rhm/error.hpp"
#include "rhm/grammar.hpp"
#include "rhm/learner.hpp"
#include "rhm/oracles/correlations.hpp"
#include "rhm/oracles/marginals.hpp"
#include "rhm/oracles/montecarlo.hpp"
#include "rhm/oracles/slgram.hpp"
#include "rhm/serialize.hpp"
#include "rhm/theory.hpp"

#ifndef RHM_VERSION
#define RHM_VERSION "0.0.0-dev"
#endif

namespace rhm::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_runtime = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_budget = 3;
inline constexpr const char* out_dir_env = "RHM_OUT_DIR";
inline constexpr const char* manifest_schema = "rhm-manifest/1";

struct RunConfig {
    std::string subcommand;
    std::uint32_t v = 8, m = 8, s = 2, L = 2;
    std::string a = "uniform";  ///< "uniform", "inf"/"delta", or a positive number
    std::uint32_t zipf_layer = 1;
    std::uint64_t seed = 0;
    std::string p_grid = "log:10..1e5:12";
    std::string a_list = "uniform,0.5,1,2";
    std::string m_list = "4,8";
    std::uint32_t level = 2;
    std::uint32_t rank = 1;
    std::size_t trials = 10;
    std::size_t realizations = 32;
    std::size_t test_size = 10000;
    std::size_t count = 1000;
    std::uint64_t budget = default_enumeration_budget;
    std::size_t workers = default_workers();
    std::string out_dir;
    std::string task = "class";
    std::string quantity = "entropy-ladder";
    std::string input;
    std::string grammar;
    std::string format = "tensor";
    bool derivations = false;
    bool quick = false;
};

/// Parses "uniform", "inf"/"delta" or a positive real into params.
inline void apply_exponent(RhmParams& p, const std::string& a, std::uint32_t layer) {
    if (a == "uniform" || a == "none") {
        p.zipf_layer.reset();
        return;
    }
    p.zipf_layer = layer;
    if (a == "inf" || a == "delta" || a == "infinity") {
        p.zipf_exponent = std::numeric_limits<double>::infinity();
        return;
    }
    try {
        std::size_t used = 0;
        p.zipf_exponent = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(a);
    } catch (const std::exception&) {
        throw ParameterError("zipf exponent must be uniform, inf or a number, got '" + a + "'");
    }
    if (!(p.zipf_exponent > 0.0)) throw ParameterError("zipf exponent must be positive");
}

inline RhmParams params_of(const RunConfig& c) {
    RhmParams p;
    p.v = c.v, p.m = c.m, p.s = c.s, p.L = c.L, p.seed = c.seed;
    apply_exponent(p, c.a, c.zipf_layer);
    p.validate();
    return p;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline double parse_real(const std::string& text) {
    try {
        std::size_t used = 0;
        const double x = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return x;
    } catch (const std::exception&) {
        throw ParameterError("not a number: '" + text + "'");
    }
}

/// "log:LO..HI[:N]" (N defaults to 12), "lin:LO..HI:N", or "P1,P2,...".
inline std::vector<double> parse_grid(const std::string& text) {
    auto ranged = [&](const std::string& body, std::size_t default_n) {
        const auto parts = split(body, ':');
        if (parts.empty()) throw ParameterError("bad grid '" + text + "'");
        const auto dots = parts[0].find("..");
        if (dots == std::string::npos) throw ParameterError("bad grid range '" + text + "'");
        const double lo = parse_real(parts[0].substr(0, dots));
        const double hi = parse_real(parts[0].substr(dots + 2));
        const std::size_t n = parts.size() > 1 ? static_cast<std::size_t>(parse_real(parts[1])) : default_n;
        return std::tuple{lo, hi, n};
    };
    if (text.rfind("log:", 0) == 0) {
        auto [lo, hi, n] = ranged(text.substr(4), 12);
        return log_grid(lo, hi, n);
    }
    if (text.rfind("lin:", 0) == 0) {
        auto [lo, hi, n] = ranged(text.substr(4), 12);
        if (n < 2 || !(hi > lo)) throw ParameterError("bad linear grid '" + text + "'");
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
        return out;
    }
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_real(item));
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] > out[i - 1])) throw ParameterError("P grid must be strictly increasing");
    if (out.empty()) throw ParameterError("empty P grid");
    return out;
}

inline nlohmann::json config_json(const RunConfig& c) {
    return {{"subcommand", c.subcommand}, {"v", c.v}, {"m", c.m}, {"s", c.s}, {"L", c.L}, {"a", c.a},
            {"zipf_layer", c.zipf_layer}, {"seed", c.seed}, {"P_grid", c.p_grid}, {"a_list", c.a_list},
            {"m_list", c.m_list}, {"level", c.level}, {"rank", c.rank}, {"trials", c.trials},
            {"realizations", c.realizations}, {"test_size", c.test_size}, {"count", c.count},
            {"budget", c.budget}, {"out_dir", c.out_dir}, {"task", c.task}, {"quantity", c.quantity},
            {"input", c.input}, {"grammar", c.grammar}, {"format", c.format}, {"derivations", c.derivations},
            {"quick", c.quick}};
}

/// Collects artifacts and flags; written as manifest.json in the output dir.
/// Worker count is deliberately omitted: results do not depend on it.
class Manifest {
public:
    explicit Manifest(const RunConfig& c) : dir_(c.out_dir) {
        doc_["schema"] = manifest_schema;
        doc_["code_version"] = RHM_VERSION;
        doc_["config"] = config_json(c);
        doc_["artifacts"] = nlohmann::json::array();
        doc_["partial"] = false;
        doc_["notes"] = nlohmann::json::array();
    }

    std::filesystem::path path(const std::string& name) {
        doc_["artifacts"].push_back(name);
        return dir_ / name;
    }
    void flag_partial(const std::string& why) {
        doc_["partial"] = true;
        doc_["notes"].push_back(why);
    }
    void note(const std::string& text) { doc_["notes"].push_back(text); }
    void set(const std::string& key, nlohmann::json value) { doc_["results"][key] = std::move(value); }

    void write(const std::string& status) {
        doc_["status"] = status;
        std::ofstream out(dir_ / "manifest.json");
        out << doc_.dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    nlohmann::json doc_;
};

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path.string());
    return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << '\n'; }

inline GrammarInstance grammar_of(const RunConfig& c) {
    return c.grammar.empty() ? build_grammar(params_of(c)) : load_grammar(c.grammar);
}

inline void cmd_gen_grammar(const RunConfig& c, Manifest& man) {
    const auto g = build_grammar(params_of(c));
    save_grammar(g, man.path("grammar.json").string());
    man.set("grammar_hash", detail::hex64(grammar_hash(g)));
}

inline void cmd_sample(const RunConfig& c, Manifest& man) {
    const auto g = grammar_of(c);
    const auto ds = sample_dataset(g, c.count, derive_seed(c.seed, 1), c.derivations, Split::train, c.workers);
    export_jsonl(ds, man.path("samples.jsonl").string());
    man.set("count", ds.size());
}

inline void cmd_export(const RunConfig& c, Manifest& man) {
    if (c.input.empty()) throw ParameterError("export needs --input");
    const auto ds = ingest_jsonl(c.input);
    if (c.format == "tensor") {
        export_tensor(ds, man.path("samples.rhmt").string());
    } else if (c.format == "jsonl") {
        export_jsonl(ds, man.path("samples.jsonl").string());
    } else {
        throw ParameterError("unknown export format '" + c.format + "'");
    }
    man.set("count", ds.size());
}

/// Parses every record; without --grammar the grammar is rebuilt from the
/// dataset header (params include the seed) and checked against its hash.
inline void cmd_parse(const RunConfig& c, Manifest& man) {
    if (c.input.empty()) throw ParameterError("parse needs --input");
    const auto ds = ingest_jsonl(c.input);
    const auto g = c.grammar.empty() ? build_grammar(ds.params) : load_grammar(c.grammar);
    if (grammar_hash(g) != ds.grammar_hash) throw InvariantError("dataset was generated by a different grammar");
    std::size_t parsed = 0, labelled = 0, derivations = 0;
    for (const auto& sample : ds.samples) {
        auto der = parse_sequence(g, sample.tokens);
        if (!der) continue;
        ++parsed;
        labelled += der->label == sample.label;
        derivations += !sample.derivation || *sample.derivation == *der;
    }
    nlohmann::json report = {{"total", ds.size()}, {"parsed", parsed}, {"label_matches", labelled},
                             {"derivation_matches", derivations}};
    write_json(man.path("parse_report.json"), report);
    man.set("parse", report);
    if (parsed != ds.size() || labelled != ds.size()) man.flag_partial("some records did not parse to their label");
}

inline void cmd_theory(const RunConfig& c, Manifest& man) {
    const auto p = params_of(c);
    if (c.task == "class") {
        std::vector<CurveSeries> curves{class_learning_curve(p, parse_grid(c.p_grid))};
        if (p.zipf_layer && std::isfinite(p.zipf_exponent)) {
            CurveSeries asym;
            asym.label = "class-asymptote";
            for (const auto& pt : curves.front().points) asym.points.push_back({pt.P, class_asymptote(p, pt.P), {}});
            curves.push_back(std::move(asym));
        }
        write_curve_csv(open_out(man.path("theory_class.csv")), curves);
        write_json(man.path("theory_class.params.json"), curve_sidecar(p, curves));
        auto out = open_out(man.path("thresholds_class.csv"));
        out << "level,rank,P\n";
        for (const auto& e : class_sample_complexities(p).entries)
            out << e.level << ',' << e.rank << ',' << format_real(e.threshold) << '\n';
    } else if (c.task == "next") {
        const auto set = next_sample_complexities(p);
        auto out = open_out(man.path("thresholds_next.csv"));
        out << "level,rank,P\n";
        for (const auto& e : set.entries) out << e.level << ',' << e.rank << ',' << format_real(e.threshold) << '\n';
        if (set.interleaved) man.note("next-token thresholds of consecutive levels interleave");
        const double H = h2_average(make_distribution(p.m, p.kind_at(1)));
        auto lim = open_out(man.path("ce_limit.csv"));
        lim.exceptions(std::ios::failbit);
        lim << "l,L_ell,in_regime\n";
        for (std::uint32_t level = 1; level <= p.L; ++level) {
            const auto ce = ce_limit(p, level, H);
            lim << level << ',' << format_real(ce.value) << ',' << (ce.in_regime ? 1 : 0) << '\n';
        }
        man.set("scaling_exponent", next_scaling_exponent(p.v, p.m, p.s));
        man.set("H2", H);
    } else if (c.task == "hutter") {
        const auto f = make_distribution(p.m, p.kind_at(p.zipf_layer.value_or(1)));
        CurveSeries curve;
        curve.label = "hutter-error(" + describe(p.kind_at(p.zipf_layer.value_or(1))) + ")";
        for (double P : parse_grid(c.p_grid)) curve.points.push_back({P, hutter_error(f, P), {}});
        write_curve_csv(open_out(man.path("theory_hutter.csv")), {curve});
        write_json(man.path("theory_hutter.params.json"), curve_sidecar(p, {curve}));
    } else {
        throw ParameterError("unknown theory task '" + c.task + "' (class, next, hutter)");
    }
}

inline McQuantity mc_quantity_of(const RunConfig& c) {
    if (c.quantity == "token-corr-variance") return TokenCorrVariance{c.level, c.rank};
    if (c.quantity == "class-corr-variance") return ClassCorrVariance{};
    if (c.quantity == "avg-compat-size" || c.quantity == "compat-size") return AvgCompatSize{c.level};
    if (c.quantity == "entropy-ladder") return EntropyLadderQuantity{};
    throw ParameterError("unknown quantity '" + c.quantity + "'");
}

inline void write_ladder(Manifest& man, const std::string& name, const std::vector<std::pair<RhmParams, McReport>>& runs) {
    auto out = open_out(man.path(name));
    write_ladder_header(out);
    for (const auto& [p, report] : runs) write_ladder_rows(out, ladder_rows(report), exponent_label(p));
}

/// Exact per-instance oracles; with --realizations > 1 the MC average.
inline void cmd_oracle(const RunConfig& c, Manifest& man) {
    const auto p = params_of(c);
    if (c.quantity == "entropy-ladder") {
        if (c.realizations >= 2) {
            write_ladder(man, "ladder.csv", {{p, mc_realization_stats(p, EntropyLadderQuantity{}, c.realizations, c.workers, c.budget)}});
        } else {
            const auto g = build_grammar(p);
            auto out = open_out(man.path("ladder.csv"));
            write_ladder_header(out);
            write_ladder_rows(out, ladder_rows(SlgramOracle(g).ladder(c.budget)), exponent_label(p));
        }
        return;
    }
    const auto g = build_grammar(p);
    if (c.quantity == "marginals") {
        auto out = open_out(man.path("marginals.csv"));
        out << "level,position,symbol,prob\n";
        TransitionTables tables(g);
        for (std::uint32_t level = 0; level <= p.L; ++level)
            for (std::uint64_t j = 0; j < p.width(level); ++j) {
                const auto dist = tables.marginal({level, j});
                for (Symbol a = 0; a < p.v; ++a)
                    out << level << ',' << j << ',' << a << ',' << format_real(dist[a]) << '\n';
            }
    } else if (c.quantity == "class-corr" || c.quantity == "token-corr") {
        const bool label = c.quantity == "class-corr";
        const std::uint64_t j = label ? 0 : tuple_position_with_lca(p, c.level);
        const auto table = label ? ClassCorrelationOracle(g, j).table() : TokenCorrelationOracle(g, j).table();
        auto out = open_out(man.path(c.quantity + ".csv"));
        out << "position,conditioner,tuple,value\n";
        for (std::uint32_t k = 0; k < table.conditioners; ++k)
            for (std::size_t t = 0; t < table.tuples.size(); ++t)
                out << j << ',' << k << ',' << table.tuples[t] << ',' << format_real(table.at(k, t)) << '\n';
    } else if (c.quantity == "compat-size") {
        const double mean = SlgramOracle(g).mean_compatibility_size(c.level, c.budget);
        auto out = open_out(man.path("compat_size.csv"));
        write_records_csv(out, {record("avg-compat-size(l=" + std::to_string(c.level) + ")", p, mean, 0.0, 1)});
    } else {
        throw ParameterError("unknown oracle quantity '" + c.quantity + "'");
    }
}

inline void cmd_mc(const RunConfig& c, Manifest& man) {
    const auto p = params_of(c);
    const auto report = mc_realization_stats(p, mc_quantity_of(c), c.realizations, c.workers, c.budget);
    auto recs = records(report);
    write_records_csv(open_out(man.path("mc.csv")), recs);
    auto out = open_out(man.path("mc.jsonl"));
    for (const auto& r : recs) out << r.dump() << '\n';
    if (std::holds_alternative<EntropyLadderQuantity>(mc_quantity_of(c))) write_ladder(man, "ladder.csv", {{p, report}});
}

inline ExperimentConfig experiment_of(const RunConfig& c, Task task, std::vector<double> grid) {
    ExperimentConfig e;
    e.task = task;
    e.grid = std::move(grid);
    e.trials = c.trials;
    e.test_size = c.test_size;
    e.seed = c.seed;
    e.workers = c.workers;
    return e;
}

/// Empirical curve plus the matching theory overlay; next-token runs also
/// report the exact 𝓛_L averaged over the trial grammars.
inline void cmd_learn(const RunConfig& c, Manifest& man) {
    const auto p = params_of(c);
    const auto grid = parse_grid(c.p_grid);
    const Task task = c.task == "class" ? Task::classification
                      : c.task == "next" ? Task::next_token
                                         : throw ParameterError("unknown learn task '" + c.task + "' (class, next)");
    auto result = learning_curve_experiment(p, experiment_of(c, task, grid));
    std::vector<CurveSeries> curves{result.curve};
    if (task == Task::classification) {
        curves.push_back(class_learning_curve(p, grid));
    } else {
        double oracle = 0.0;
        for (std::size_t t = 0; t < c.trials; ++t) {
            RhmParams q = p;
            q.seed = derive_seed(c.seed, t, 0);
            oracle += slgram_cross_entropy(build_grammar(q), p.L, c.budget) / c.trials;
        }
        CurveSeries flat;
        flat.label = "exact-L" + std::to_string(p.L);
        for (double P : grid) flat.points.push_back({P, oracle, {}});
        curves.push_back(std::move(flat));
    }
    write_curve_csv(open_out(man.path("learn.csv")), curves);
    write_json(man.path("learn.params.json"), curve_sidecar(p, curves));
}

/// Desk-scale data bundles for the classification, collapse, memorization,
/// ladder and next-token scaling figures. --quick shrinks every budget.
inline void cmd_figs(const RunConfig& c, Manifest& man) {
    const std::size_t trials = c.quick ? 2 : c.trials;
    const std::size_t realizations = c.quick ? 2 : c.realizations;
    const std::size_t test = c.quick ? 500 : c.test_size;
    RunConfig base = c;
    base.trials = trials;
    base.test_size = test;

    {  // classification curves at v = m = 8 for each exponent
        std::vector<CurveSeries> curves;
        RhmParams p{.v = 8, .m = 8, .s = 2, .L = 2, .zipf_layer = 1, .zipf_exponent = 1.0, .seed = c.seed};
        const auto grid = log_grid(10, c.quick ? 1e4 : 1e5, c.quick ? 6 : 12);
        for (const auto& a : split(c.a_list, ',')) {
            if (a == "uniform") continue;
            apply_exponent(p, a, 1);
            auto emp = learning_curve_experiment(p, experiment_of(base, Task::classification, grid)).curve;
            auto th = class_learning_curve(p, grid);
            emp.label += ",a=" + a;
            th.label += ",a=" + a;
            curves.push_back(std::move(emp));
            curves.push_back(std::move(th));
        }
        write_curve_csv(open_out(man.path("class_curves.csv")), curves);
    }
    {  // collapse under P/(v m^{L-1})
        std::vector<CurveSeries> curves;
        for (const auto& ms : split(c.m_list, ',')) {
            const auto m = static_cast<std::uint32_t>(parse_real(ms));
            RhmParams p{.v = m, .m = m, .s = 2, .L = 2, .zipf_layer = 1, .zipf_exponent = 1.0, .seed = c.seed};
            const auto grid = log_grid(10, c.quick ? 1e4 : 1e5, c.quick ? 6 : 12);
            const double scale = p.v * std::pow(static_cast<double>(p.m), p.L - 1.0);
            for (auto curve : {learning_curve_experiment(p, experiment_of(base, Task::classification, grid)).curve,
                               class_learning_curve(p, grid)}) {
                for (auto& pt : curve.points) pt.P /= scale;
                curve.label += ",m=" + ms;
                curves.push_back(std::move(curve));
            }
        }
        write_curve_csv(open_out(man.path("collapse.csv")), curves);
    }
    {  // first-step memorization, L = 1
        RhmParams p{.v = 32, .m = 8, .s = 2, .L = 1, .zipf_layer = 1, .zipf_exponent = 1.0, .seed = c.seed};
        const auto grid = log_grid(10, c.quick ? 1e3 : 1e4, c.quick ? 5 : 13);
        auto emp = learning_curve_experiment(p, experiment_of(base, Task::next_token, grid)).curve;
        double oracle = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            RhmParams q = p;
            q.seed = derive_seed(c.seed, t, 0);
            oracle += slgram_cross_entropy(build_grammar(q), 1) / trials;
        }
        CurveSeries flat;
        flat.label = "exact-L1";
        for (double P : grid) flat.points.push_back({P, oracle, {}});
        write_curve_csv(open_out(man.path("memorization.csv")), {emp, flat});
    }
    {  // entropy ladders
        std::vector<std::pair<RhmParams, McReport>> runs;
        for (const auto& a : split(c.a_list, ',')) {
            RhmParams p{.v = 32, .m = 8, .s = 2, .L = c.quick ? 3u : 6u, .zipf_layer = 1, .zipf_exponent = 1.0, .seed = c.seed};
            apply_exponent(p, a, 1);
            runs.emplace_back(p, mc_realization_stats(p, EntropyLadderQuantity{}, realizations, c.workers, c.budget));
        }
        write_ladder(man, "ladders.csv", runs);
    }
    {  // next-token sample complexities and the scaling guide line
        RhmParams p{.v = 32, .m = 8, .s = 2, .L = 4, .zipf_layer = 1, .zipf_exponent = 1.0, .seed = c.seed};
        auto out = open_out(man.path("next_thresholds.csv"));
        out << "a,level,rank,P\n";
        for (const auto& a : split(c.a_list, ',')) {
            apply_exponent(p, a, 1);
            for (const auto& e : next_sample_complexities(p).entries)
                out << a << ',' << e.level << ',' << e.rank << ',' << format_real(e.threshold) << '\n';
        }
        man.set("next_scaling_exponent", next_scaling_exponent(p.v, p.m, p.s));
    }
}

inline void add_params(CLI::App& app, RunConfig& c) {
    app.add_option("--v", c.v, "Vocabulary size per level")->capture_default_str();
    app.add_option("--m", c.m, "Rules per nonterminal")->capture_default_str();
    app.add_option("--s", c.s, "Branching factor")->capture_default_str();
    app.add_option("--L", c.L, "Depth")->capture_default_str();
    app.add_option("--a", c.a, "Zipf exponent: uniform, inf, or a positive number")->capture_default_str();
    app.add_option("--zipf-layer", c.zipf_layer, "Level carrying the Zipf rule distribution")->capture_default_str();
    app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
    app.add_option("--workers", c.workers, "Worker threads (results do not depend on it)")->capture_default_str();
    app.add_option("--budget", c.budget, "Maximum exact-enumeration count")->capture_default_str();
    app.add_option("--out", c.out_dir, std::string("Output directory (default $") + out_dir_env + " or rhm-out)");
}

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
    RunConfig c;
    CLI::App app{"Random hierarchy model toolkit"};
    app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough(true);
    add_params(app, c);

    auto* gen = app.add_subcommand("gen-grammar", "Build a grammar instance and write grammar.json");
    auto* sample = app.add_subcommand("sample", "Sample a dataset as JSONL");
    sample->add_option("--count", c.count, "Number of samples")->capture_default_str();
    sample->add_option("--grammar", c.grammar, "Grammar file (default: build from params)");
    sample->add_flag("--derivations", c.derivations, "Store full derivations");
    auto* exp = app.add_subcommand("export", "Convert a JSONL dataset");
    exp->add_option("--input", c.input, "JSONL dataset")->required();
    exp->add_option("--format", c.format, "tensor or jsonl")->capture_default_str();
    auto* parse = app.add_subcommand("parse", "Parse every record of a JSONL dataset");
    parse->add_option("--input", c.input, "JSONL dataset")->required();
    parse->add_option("--grammar", c.grammar, "Grammar file (default: rebuild from the dataset header)");
    auto* theory = app.add_subcommand("theory", "Closed-form curves and thresholds");
    theory->add_option("--task", c.task, "class, next or hutter")->capture_default_str();
    theory->add_option("--P-grid", c.p_grid, "log:LO..HI[:N], lin:LO..HI:N or a comma list")->capture_default_str();
    auto* oracle = app.add_subcommand("oracle", "Exact per-instance oracles");
    oracle->add_option("--quantity", c.quantity, "entropy-ladder, marginals, class-corr, token-corr, compat-size")
        ->capture_default_str();
    oracle->add_option("--level", c.level, "Level l (LCA level for token-corr)")->capture_default_str();
    oracle->add_option("--realizations", c.realizations, "Average the ladder over this many grammars")->capture_default_str();
    auto* mc = app.add_subcommand("mc", "Monte Carlo over grammar realizations");
    mc->add_option("--quantity", c.quantity, "token-corr-variance, class-corr-variance, avg-compat-size, entropy-ladder")
        ->capture_default_str();
    mc->add_option("--level", c.level, "Level l")->capture_default_str();
    mc->add_option("--rank", c.rank, "Rule rank k")->capture_default_str();
    mc->add_option("--realizations", c.realizations, "Number of grammar realizations")->capture_default_str();
    auto* learn = app.add_subcommand("learn", "Correlation-learner learning curve");
    learn->add_option("--task", c.task, "class or next")->capture_default_str();
    learn->add_option("--P-grid", c.p_grid, "Training-set sizes")->capture_default_str();
    learn->add_option("--trials", c.trials, "Independent trials")->capture_default_str();
    learn->add_option("--test-size", c.test_size, "Held-out samples per trial")->capture_default_str();
    auto* figs = app.add_subcommand("figs", "Write desk-scale CSV bundles for the standard plots");
    figs->add_option("--a-list", c.a_list, "Exponents")->capture_default_str();
    figs->add_option("--m-list", c.m_list, "m = v values for the collapse bundle")->capture_default_str();
    figs->add_option("--trials", c.trials, "Trials per learning curve")->capture_default_str();
    figs->add_option("--realizations", c.realizations, "Realizations per ladder")->capture_default_str();
    figs->add_option("--test-size", c.test_size, "Held-out samples per trial")->capture_default_str();
    figs->add_flag("--quick", c.quick, "Small budgets for smoke runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, log);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, log, log);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, log);
        return exit_config;
    }
    for (auto* sub : app.get_subcommands()) c.subcommand = sub->get_name();
    if (c.out_dir.empty()) {
        const char* env = std::getenv(out_dir_env);
        c.out_dir = env && *env ? env : "rhm-out";
    }

    std::optional<Manifest> man;
    try {
        std::filesystem::create_directories(c.out_dir);
        man.emplace(c);
        if (gen->parsed()) cmd_gen_grammar(c, *man);
        else if (sample->parsed()) cmd_sample(c, *man);
        else if (exp->parsed()) cmd_export(c, *man);
        else if (parse->parsed()) cmd_parse(c, *man);
        else if (theory->parsed()) cmd_theory(c, *man);
        else if (oracle->parsed()) cmd_oracle(c, *man);
        else if (mc->parsed()) cmd_mc(c, *man);
        else if (learn->parsed()) cmd_learn(c, *man);
        else if (figs->parsed()) cmd_figs(c, *man);
        man->write("ok");
        return exit_ok;
    } catch (const BudgetError& e) {
        log << "budget exceeded: " << e.what() << " (required " << e.required() << ", budget " << e.budget() << ")\n";
        if (man) {
            man->flag_partial(e.what());
            man->write("budget-exceeded");
        }
        return exit_budget;
    } catch (const std::invalid_argument& e) {
        log << "invalid configuration: " << e.what() << '\n';
        if (man) man->write("invalid-config");
        return exit_config;
    } catch (const InfeasibleError& e) {
        log << "invalid configuration: " << e.what() << '\n';
        if (man) man->write("invalid-config");
        return exit_config;
    } catch (const SchemaError& e) {
        log << "invalid input: " << e.what() << '\n';
        if (man) man->write("invalid-config");
        return exit_config;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        if (man) {
            man->flag_partial(e.what());
            man->write("error");
        }
        return exit_runtime;
    }
}

}  // namespace rhm::cli
