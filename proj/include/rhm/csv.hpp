#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhm/grammar.hpp"
#include "rhm/oracles/montecarlo.hpp"
#include "rhm/oracles/slgram.hpp"
#include "rhm/serialize.hpp"
#include "rhm/theory.hpp"

namespace rhm {

/// Shortest round-trip decimal; identical inputs give identical bytes.
inline std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

/// Columns P, value, se, provenance, label. `se` is empty when absent.
inline void write_curve_csv(std::ostream& out, const std::vector<CurveSeries>& curves) {
    out << "P,value,se,provenance,label\n";
    for (const auto& c : curves)
        for (const auto& p : c.points)
            out << format_real(p.P) << ',' << format_real(p.value) << ',' << (p.se ? format_real(*p.se) : "") << ','
                << to_string(c.provenance) << ',' << c.label << '\n';
}

inline void write_curve_csv(std::ostream&& out, const std::vector<CurveSeries>& curves) { write_curve_csv(out, curves); }

inline nlohmann::json curve_sidecar(const RhmParams& params, const std::vector<CurveSeries>& curves) {
    nlohmann::json j;
    j["schema"] = "rhm-curve/1";
    j["params"] = params_to_json(params);
    for (const auto& c : curves) j["labels"].push_back(c.label);
    return j;
}

/// Columns l, L_ell, residual, a (mean over realizations when se is given).
struct LadderRow {
    std::uint32_t level;
    double value;
    double residual;
    double se;
};

inline std::vector<LadderRow> ladder_rows(const McReport& report) {
    std::vector<LadderRow> rows;
    for (std::uint32_t level = 0; level <= report.params.L; ++level) {
        const auto& v = report.at("L_" + std::to_string(level));
        const auto& r = report.at("residual_" + std::to_string(level));
        rows.push_back({level, v.mean, r.mean, v.se});
    }
    return rows;
}

inline std::vector<LadderRow> ladder_rows(const EntropyLadder& ladder) {
    std::vector<LadderRow> rows;
    const auto res = ladder.residuals();
    for (std::uint32_t level = 0; level < ladder.values.size(); ++level)
        rows.push_back({level, ladder.values[level], res[level], 0.0});
    return rows;
}

inline std::string exponent_label(const RhmParams& p) {
    if (!p.zipf_layer) return "uniform";
    if (std::isinf(p.zipf_exponent)) return "delta";
    return format_real(p.zipf_exponent);
}

inline void write_ladder_header(std::ostream& out) { out << "l,L_ell,residual,a,se\n"; }

inline void write_ladder_rows(std::ostream& out, const std::vector<LadderRow>& rows, const std::string& a) {
    for (const auto& r : rows)
        out << r.level << ',' << format_real(r.value) << ',' << format_real(r.residual) << ',' << a << ','
            << format_real(r.se) << '\n';
}

/// Structured record {quantity, params, value, se, n}.
inline nlohmann::json record(const std::string& quantity, const RhmParams& params, double value, double se,
                             std::size_t n) {
    return {{"quantity", quantity}, {"params", params_to_json(params)}, {"value", value}, {"se", se}, {"n", n}};
}

inline std::vector<nlohmann::json> records(const McReport& report) {
    std::vector<nlohmann::json> out;
    for (const auto& e : report.estimates)
        out.push_back(record(report.quantity + ":" + e.name, report.params, e.mean, e.se, e.n));
    return out;
}

inline void write_records_csv(std::ostream& out, const std::vector<nlohmann::json>& recs) {
    out << "quantity,value,se,n\n";
    for (const auto& r : recs)
        out << r["quantity"].get<std::string>() << ',' << format_real(r["value"].get<double>()) << ','
            << format_real(r["se"].get<double>()) << ',' << r["n"].get<std::size_t>() << '\n';
}

inline void write_records_csv(std::ostream&& out, const std::vector<nlohmann::json>& recs) { write_records_csv(out, recs); }

}  // namespace rhm
