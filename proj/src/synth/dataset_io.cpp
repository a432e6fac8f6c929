#include "longdr/synth/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "longdr/common/errors.hpp"

namespace longdr::synth {

using nlohmann::json;

std::string format_real(double x) {
    if (!std::isfinite(x)) throw DomainError("cannot serialise a non-finite real");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
    out << "{\"tau\":" << ds.tau << ",\"d\":" << ds.d << ",\"y_min\":" << format_real(ds.y_min)
        << ",\"y_max\":" << format_real(ds.y_max) << ",\"seed\":" << ds.seed
        << ",\"variant\":" << json(ds.variant).dump() << "}\n";
    for (const auto& tr : ds.trajectories) {
        out << "{\"id\":" << tr.id << ",\"split\":\"" << to_string(tr.split) << "\",\"L\":[";
        for (std::size_t t = 0; t < tr.covariates.size(); ++t) {
            out << (t ? ",[" : "[");
            for (std::size_t j = 0; j < tr.covariates[t].size(); ++j)
                out << (j ? "," : "") << format_real(tr.covariates[t][j]);
            out << ']';
        }
        out << "],\"A\":[";
        for (std::size_t t = 0; t < tr.actions.size(); ++t) out << (t ? "," : "") << tr.actions[t];
        out << "],\"Y\":" << format_real(tr.outcome) << "}\n";
    }
}

void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_dataset(out, ds);
    if (!out) throw Error("write failed for '" + path + "'");
}

namespace {

struct LineContext {
    std::size_t line;
    std::string where(const std::string& field) const {
        return "line " + std::to_string(line) + ", field " + field;
    }
};

const json& field(const json& obj, const char* name, const LineContext& ctx) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(ctx.where(name), "missing");
    return *it;
}

double real_field(const json& v, const std::string& name, const LineContext& ctx) {
    if (!v.is_number()) throw ParseError(ctx.where(name), "expected a number");
    return v.get<double>();
}

std::size_t count_field(const json& v, const std::string& name, const LineContext& ctx) {
    if (!v.is_number_unsigned()) throw ParseError(ctx.where(name), "expected a non-negative integer");
    return v.get<std::size_t>();
}

} // namespace

Dataset read_dataset(std::istream& in) {
    Dataset ds;
    std::string text;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.empty()) continue;
        const LineContext ctx{line_no};
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no), std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError("line " + std::to_string(line_no), "expected an object");

        if (!have_header) {
            ds.tau = count_field(field(obj, "tau", ctx), "tau", ctx);
            ds.d = count_field(field(obj, "d", ctx), "d", ctx);
            ds.y_min = real_field(field(obj, "y_min", ctx), "y_min", ctx);
            ds.y_max = real_field(field(obj, "y_max", ctx), "y_max", ctx);
            ds.seed = field(obj, "seed", ctx).get<std::uint64_t>();
            const auto& v = field(obj, "variant", ctx);
            if (!v.is_string()) throw ParseError(ctx.where("variant"), "expected a string");
            ds.variant = v.get<std::string>();
            if (ds.tau < 1 || ds.d < 1) throw ParseError(ctx.where("tau"), "tau and d must be positive");
            if (!(ds.y_min < ds.y_max)) throw ParseError(ctx.where("y_max"), "y_max must exceed y_min");
            have_header = true;
            continue;
        }

        Trajectory tr;
        tr.id = count_field(field(obj, "id", ctx), "id", ctx);
        if (auto it = obj.find("split"); it != obj.end()) {
            if (!it->is_string()) throw ParseError(ctx.where("split"), "expected a string");
            try {
                tr.split = parse_split(it->get<std::string>());
            } catch (const ConfigError& e) {
                throw ParseError(ctx.where("split"), e.what());
            }
        }
        const auto& L = field(obj, "L", ctx);
        if (!L.is_array() || L.size() != ds.tau)
            throw ParseError(ctx.where("L"), "expected " + std::to_string(ds.tau) + " rows");
        for (std::size_t t = 0; t < ds.tau; ++t) {
            const std::string name = "L[" + std::to_string(t) + "]";
            if (!L[t].is_array() || L[t].size() != ds.d)
                throw ParseError(ctx.where(name), "expected " + std::to_string(ds.d) + " values");
            std::vector<double> row(ds.d);
            for (std::size_t j = 0; j < ds.d; ++j)
                row[j] = real_field(L[t][j], name + "[" + std::to_string(j) + "]", ctx);
            tr.covariates.push_back(std::move(row));
        }
        const auto& A = field(obj, "A", ctx);
        if (!A.is_array() || A.size() != ds.tau)
            throw ParseError(ctx.where("A"), "expected " + std::to_string(ds.tau) + " actions");
        for (std::size_t t = 0; t < ds.tau; ++t) {
            const auto& a = A[t];
            if (!a.is_number_integer() || (a.get<long long>() != 0 && a.get<long long>() != 1))
                throw ParseError(ctx.where("A[" + std::to_string(t) + "]"), "action must be 0 or 1, got " + a.dump());
            tr.actions.push_back(a.get<int>());
        }
        tr.outcome = real_field(field(obj, "Y", ctx), "Y", ctx);
        ds.trajectories.push_back(std::move(tr));
    }
    if (!have_header) throw ParseError("line 1", "missing header record");
    return ds;
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_dataset(in);
}

} // namespace longdr::synth
