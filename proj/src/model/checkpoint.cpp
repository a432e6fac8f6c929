#include <fstream>

#include <json.hpp>

#include "longdr/common/errors.hpp"
#include "longdr/model/model.hpp"

namespace longdr::model {

using nlohmann::json;

namespace {

json config_json(const ModelConfig& c) {
    return {{"hidden", c.hidden},
            {"layers", c.layers},
            {"heads", c.heads},
            {"dropout", c.dropout},
            {"covariate_dim", c.covariate_dim},
            {"tau", c.tau},
            {"alpha", c.alpha},
            {"target_rate", c.target_rate},
            {"ff_multiplier", c.ff_multiplier},
            {"horizon_heads", c.horizon_heads},
            {"zero_heads", c.zero_heads}};
}

ModelConfig config_from(const json& j) {
    ModelConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.dropout = j.value("dropout", c.dropout);
    c.covariate_dim = j.value("covariate_dim", c.covariate_dim);
    c.tau = j.value("tau", c.tau);
    c.alpha = j.value("alpha", c.alpha);
    c.target_rate = j.value("target_rate", c.target_rate);
    c.ff_multiplier = j.value("ff_multiplier", c.ff_multiplier);
    c.horizon_heads = j.value("horizon_heads", c.horizon_heads);
    c.zero_heads = j.value("zero_heads", c.zero_heads);
    return c;
}

} // namespace

std::string to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const NuisanceModel& model) {
    json params = json::array();
    for (const auto& p : model.params()) {
        params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.storage()}});
    }
    const json doc{{"format", "longdr-checkpoint"},
                   {"version", 1},
                   {"block_order", "pre-norm"},
                   {"config", config_json(model.config())},
                   {"standardizer",
                    {{"mean", model.standardizer().mean}, {"scale", model.standardizer().scale}}},
                   {"params", params}};
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << doc.dump() << '\n';
    if (!out) throw Error("write failed for '" + path + "'");
}

NuisanceModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path, e.what());
    }
    try {
        if (doc.at("format") != "longdr-checkpoint") throw ParseError(path, "not a checkpoint file");
        auto model = NuisanceModel::init(config_from(doc.at("config")), 0);
        auto& st = model.standardizer();
        st.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
        st.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
        const auto& params = doc.at("params");
        if (params.size() != model.params().size())
            throw ParseError(path + ": params", "expected " + std::to_string(model.params().size()) + " tensors");
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = model.params()[i];
            const std::string where = path + ": params[" + std::to_string(i) + "]";
            if (params[i].at("name") != p.name) throw ParseError(where, "expected '" + p.name + "'");
            ad::Tensor value(params[i].at("shape").get<ad::Shape>(), params[i].at("data").get<std::vector<double>>());
            if (!value.same_shape(p.value)) throw ParseError(where, "shape does not match the config");
            p.value = std::move(value);
        }
        return model;
    } catch (const json::exception& e) {
        throw ParseError(path, e.what());
    } catch (const DimensionError& e) {
        throw ParseError(path, e.what());
    }
}

} // namespace longdr::model
