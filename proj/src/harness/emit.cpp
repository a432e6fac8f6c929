#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "longdr/harness/harness.hpp"

#ifndef LONGDR_VERSION
#define LONGDR_VERSION "unknown"
#endif

namespace longdr::harness {

using nlohmann::json;

Format parse_format(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "jsonl") return Format::jsonl;
    throw ConfigError("unknown format '" + s + "' (expected csv or jsonl)");
}

namespace {

const char* const kRunColumns =
    "seed,variant,estimator,plan_id,psi_scaled,psi_unscaled,truth,error,se_plugin,se_conditional,clip_rate,"
    "weight_max,weight_p99,truncated,diverged,epsilons,xi,config_hash,message";

// %.17g, with nan / inf / -inf spelled out so strtod reads them back.
std::string real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_real(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ParseError(where, "expected a real, got '" + s + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& where) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError(where, "expected a non-negative integer, got '" + s + "'");
    return std::stoull(s);
}

std::string real_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ";" : "") + real(xs[i]);
    return out;
}

std::vector<double> parse_list(const std::string& s, const std::string& where) {
    std::vector<double> out;
    if (s.empty()) return out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ';')) out.push_back(parse_real(item, where));
    return out;
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// RFC 4180 records: quoted fields may hold commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                in_quotes = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
            any = true;
        }
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json real_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double real_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json run_json(const RunRecord& r) {
    json eps = json::array(), xi = json::array();
    for (double e : r.report.epsilons) eps.push_back(real_json(e));
    for (double x : r.report.xi) xi.push_back(real_json(x));
    const auto& p = r.report;
    return json{{"seed", r.seed},
                {"variant", r.variant},
                {"estimator", p.estimator},
                {"plan_id", p.plan_id},
                {"psi_scaled", real_json(p.psi_scaled)},
                {"psi_unscaled", real_json(p.psi_unscaled)},
                {"truth", real_json(r.truth)},
                {"error", real_json(r.error)},
                {"se_plugin", real_json(p.se_plugin)},
                {"se_conditional", real_json(p.se_conditional)},
                {"clip_rate", real_json(p.clip_rate)},
                {"weight_max", real_json(p.weight_max)},
                {"weight_p99", real_json(p.weight_p99)},
                {"truncated", p.truncated},
                {"diverged", r.diverged},
                {"epsilons", eps},
                {"xi", xi},
                {"config_hash", p.config_hash},
                {"message", r.message}};
}

RunRecord run_from(const json& j) {
    RunRecord r;
    auto& p = r.report;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.variant = j.at("variant").get<std::string>();
    p.estimator = j.at("estimator").get<std::string>();
    p.plan_id = j.at("plan_id").get<std::string>();
    p.psi_scaled = real_from(j.at("psi_scaled"));
    p.psi_unscaled = real_from(j.at("psi_unscaled"));
    r.truth = real_from(j.at("truth"));
    r.error = real_from(j.at("error"));
    p.se_plugin = real_from(j.at("se_plugin"));
    p.se_conditional = real_from(j.at("se_conditional"));
    p.clip_rate = real_from(j.at("clip_rate"));
    p.weight_max = real_from(j.at("weight_max"));
    p.weight_p99 = real_from(j.at("weight_p99"));
    p.truncated = j.at("truncated").get<std::size_t>();
    r.diverged = j.at("diverged").get<bool>();
    for (const auto& e : j.at("epsilons")) p.epsilons.push_back(real_from(e));
    for (const auto& x : j.at("xi")) p.xi.push_back(real_from(x));
    p.config_hash = j.at("config_hash").get<std::string>();
    p.seed = r.seed;
    r.message = j.at("message").get<std::string>();
    return r;
}

} // namespace

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error("write failed for '" + path + "'");
}

void write_runs(const std::string& path, const std::vector<RunRecord>& runs, Format format) {
    std::ostringstream out;
    if (format == Format::jsonl) {
        for (const auto& r : runs) out << run_json(r).dump() << '\n';
    } else {
        out << kRunColumns << '\n';
        for (const auto& r : runs) {
            const auto& p = r.report;
            out << r.seed << ',' << quoted(r.variant) << ',' << quoted(p.estimator) << ',' << quoted(p.plan_id) << ','
                << real(p.psi_scaled) << ',' << real(p.psi_unscaled) << ',' << real(r.truth) << ',' << real(r.error)
                << ',' << real(p.se_plugin) << ',' << real(p.se_conditional) << ',' << real(p.clip_rate) << ','
                << real(p.weight_max) << ',' << real(p.weight_p99) << ',' << p.truncated << ','
                << (r.diverged ? 1 : 0) << ',' << real_list(p.epsilons) << ',' << real_list(p.xi) << ','
                << quoted(p.config_hash) << ',' << quoted(r.message) << '\n';
        }
    }
    write_text(path, out.str());
}

std::vector<RunRecord> read_runs(const std::string& path, Format format) {
    const std::string text = read_file(path);
    std::vector<RunRecord> runs;
    if (format == Format::jsonl) {
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                runs.push_back(run_from(json::parse(line)));
            } catch (const json::exception& e) {
                throw ParseError(path + " line " + std::to_string(line_no), e.what());
            }
        }
        return runs;
    }
    const auto rows = parse_csv(text);
    if (rows.empty()) throw ParseError(path, "missing header");
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    if (header != kRunColumns) throw ParseError(path + " line 1", "unexpected header");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        const std::string where = path + " record " + std::to_string(i);
        if (f.size() != 19) throw ParseError(where, "expected 19 fields, got " + std::to_string(f.size()));
        RunRecord r;
        auto& p = r.report;
        r.seed = parse_uint(f[0], where);
        r.variant = f[1];
        p.estimator = f[2];
        p.plan_id = f[3];
        p.psi_scaled = parse_real(f[4], where);
        p.psi_unscaled = parse_real(f[5], where);
        r.truth = parse_real(f[6], where);
        r.error = parse_real(f[7], where);
        p.se_plugin = parse_real(f[8], where);
        p.se_conditional = parse_real(f[9], where);
        p.clip_rate = parse_real(f[10], where);
        p.weight_max = parse_real(f[11], where);
        p.weight_p99 = parse_real(f[12], where);
        p.truncated = parse_uint(f[13], where);
        r.diverged = f[14] == "1";
        p.epsilons = parse_list(f[15], where);
        p.xi = parse_list(f[16], where);
        p.config_hash = f[17];
        p.seed = r.seed;
        r.message = f[18];
        runs.push_back(std::move(r));
    }
    return runs;
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
    std::ostringstream out;
    out << "variant,estimator,plan_id,runs,diverged,abs_bias_mean,abs_bias_std,mean_error,rmse,truth,truth_se\n";
    for (const auto& c : table.cells)
        out << quoted(c.variant) << ',' << quoted(c.estimator) << ',' << quoted(c.plan_id) << ',' << c.runs << ','
            << c.diverged << ',' << real(c.abs_bias_mean) << ',' << real(c.abs_bias_std) << ','
            << real(c.mean_error) << ',' << real(c.rmse) << ',' << real(c.truth) << ',' << real(c.truth_se) << '\n';
    write_text(path, out.str());
}

void write_deltas_csv(const std::string& path, const std::vector<AblationDelta>& deltas) {
    std::ostringstream out;
    out << "variant,plan_id,seed,raw_abs_bias,ltmle_abs_bias,delta\n";
    for (const auto& d : deltas)
        out << quoted(d.variant) << ',' << quoted(d.plan_id) << ',' << d.seed << ',' << real(d.raw_abs_bias) << ','
            << real(d.ltmle_abs_bias) << ',' << real(d.delta) << '\n';
    write_text(path, out.str());
}

std::string manifest_json(const ExperimentConfig& input) {
    ExperimentConfig c = input;
    c.resolve();
    synth::DgpConfig first = c.dgp;
    first.seed = c.dgp.seed + c.seeds.front();
    const auto pos = synth::positivity_report(first);
    const json j{
        {"tool", "longdr"},
        {"version", LONGDR_VERSION},
        {"config", json::parse(to_json(c))},
        {"config_hash", c.hash()},
        {"coefficient_rule", synth::to_string(c.dgp.coefficient_rule)},
        {"parenthesis_reading", synth::kParenthesisReading},
        {"cf4_reading", c.cf4 == synth::Cf4Reading::literal ? "literal" : "six_to_tau"},
        {"positivity",
         {{"seed", first.seed},
          {"pairs", pos.pairs},
          {"inside_0.01_0.99", pos.inside},
          {"fraction_inside", pos.fraction_inside()},
          {"min_propensity", pos.min_propensity},
          {"max_propensity", pos.max_propensity}}},
        {"rmse_convention", "sqrt(mean(signed error^2)) over seeds"},
        {"abs_bias_std", "population standard deviation over seeds"},
        {"divergence_policy", to_string(c.divergence)},
        {"ground_truth", {{"n_mc", c.n_mc}, {"oracle_seed", c.oracle_seed}}}};
    return j.dump(2);
}

} // namespace longdr::harness
