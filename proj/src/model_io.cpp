#include "fgm/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fgm/error.hpp"

namespace fgm {

using nlohmann::json;

std::string to_string(ScalingPolicy policy) {
    return policy == ScalingPolicy::ones ? "ones" : "inverse-norm";
}

ScalingPolicy parse_scaling(const std::string& name) {
    if (name == "ones") return ScalingPolicy::ones;
    if (name == "inverse-norm") return ScalingPolicy::inverse_norm;
    throw UsageError("unknown scaling '" + name + "' (expected ones or inverse-norm)");
}

namespace {

// JSON has no infinities; an unset bound is written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_inf(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

StopReason parse_stop(const std::string& s) {
    if (s == "duplicate_constraint") return StopReason::duplicate_constraint;
    if (s == "objective_converged") return StopReason::objective_converged;
    if (s == "max_outer") return StopReason::max_outer;
    throw DataError("unknown stop reason '" + s + "'");
}

json config_to_json(const SolverConfig& c) {
    json j;
    j["budget"] = c.budget;
    j["C"] = c.C;
    j["loss"] = to_string(c.loss);
    j["eps_apg"] = c.eps_apg;
    j["eps_outer"] = c.eps_outer;
    j["max_outer"] = c.max_outer;
    j["max_inner"] = c.max_inner;
    j["eta"] = c.eta;
    j["L0_policy"] = c.L0_policy == LipschitzPolicy::scaled_n_c ? "scaled-n-c" : "fixed";
    j["L0_value"] = c.L0_value;
    j["mode"] = to_string(c.mode);
    j["scaling"] = to_string(c.scaling);
    j["poly_block"] = c.poly_block;
    j["seed"] = c.seed;
    return j;
}

SolverConfig config_from_json(const json& j) {
    SolverConfig c;
    c.budget = j.at("budget").get<std::size_t>();
    c.C = j.at("C").get<double>();
    c.loss = parse_loss_type(j.at("loss").get<std::string>());
    c.eps_apg = j.at("eps_apg").get<double>();
    c.eps_outer = j.at("eps_outer").get<double>();
    c.max_outer = j.at("max_outer").get<std::size_t>();
    c.max_inner = j.at("max_inner").get<std::size_t>();
    c.eta = j.at("eta").get<double>();
    const auto policy = j.at("L0_policy").get<std::string>();
    if (policy != "scaled-n-c" && policy != "fixed") throw DataError("unknown L0 policy '" + policy + "'");
    c.L0_policy = policy == "fixed" ? LipschitzPolicy::fixed : LipschitzPolicy::scaled_n_c;
    c.L0_value = j.at("L0_value").get<double>();
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.scaling = parse_scaling(j.at("scaling").get<std::string>());
    c.poly_block = j.at("poly_block").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

json model_to_json(const Model& model, bool include_timing) {
    json j;
    j["format"] = "fgm-model";
    j["version"] = kModelFormatVersion;
    j["mode"] = to_string(model.mode);
    j["feature_dim"] = model.feature_dim;
    j["config"] = config_to_json(model.config);
    j["lambda_policy"] = to_string(model.config.scaling);
    if (model.mode == Mode::polynomial) {
        j["kernel"] = {{"gamma", model.config.poly.gamma}, {"r", model.config.poly.r}};
    }
    json entries = json::array();
    for (const auto& e : model.entries) entries.push_back({{"feature", e.feature}, {"weight", e.weight}, {"coef", e.coef}});
    j["entries"] = std::move(entries);
    j["support_units"] = model.support_units;
    j["support_features"] = model.support_features();
    j["constraints"] = model.constraints;
    j["kernel_weights"] = model.kernel_weights;
    j["stop"] = to_string(model.stop);
    json trace = json::array();
    for (const auto& r : model.trace) {
        json t;
        t["iteration"] = r.iteration;
        t["F"] = r.objective;
        t["beta"] = finite_or_null(r.beta);
        t["phi"] = finite_or_null(r.phi);
        t["inner_iters"] = r.inner_iterations;
        t["tau"] = r.tau;
        t["selected"] = r.selected;
        if (include_timing) t["seconds"] = r.seconds;
        trace.push_back(std::move(t));
    }
    j["trace"] = std::move(trace);
    return j;
}

Model model_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "fgm-model") throw DataError("not an fgm model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw DataError("unsupported model format version " + std::to_string(version));
        }
        Model m;
        m.mode = parse_mode(j.at("mode").get<std::string>());
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        m.config = config_from_json(j.at("config"));
        if (m.config.mode != m.mode) throw DataError("model mode differs from its config");
        if (m.mode == Mode::polynomial) {
            m.config.poly.gamma = j.at("kernel").at("gamma").get<double>();
            m.config.poly.r = j.at("kernel").at("r").get<double>();
        }
        for (const auto& e : j.at("entries")) {
            m.entries.push_back({e.at("feature").get<std::uint64_t>(), e.at("weight").get<double>(),
                                 e.at("coef").get<double>()});
        }
        m.support_units = j.at("support_units").get<std::vector<unit_id>>();
        m.constraints = j.at("constraints").get<std::vector<std::vector<unit_id>>>();
        m.kernel_weights = j.at("kernel_weights").get<std::vector<double>>();
        m.stop = parse_stop(j.at("stop").get<std::string>());
        for (const auto& t : j.at("trace")) {
            TraceRecord r;
            r.iteration = t.at("iteration").get<std::size_t>();
            r.objective = t.at("F").get<double>();
            r.beta = number_or_inf(t.at("beta"));
            r.phi = number_or_inf(t.at("phi"));
            r.inner_iterations = t.at("inner_iters").get<std::size_t>();
            r.tau = t.at("tau").get<double>();
            r.selected = t.at("selected").get<std::vector<unit_id>>();
            if (t.contains("seconds")) r.seconds = t.at("seconds").get<double>();
            m.trace.push_back(std::move(r));
        }
        const std::uint64_t limit = m.mode == Mode::polynomial ? virtual_dim(m.feature_dim) : m.feature_dim;
        for (const auto& e : m.entries) {
            if (e.feature >= limit) throw DataError("model entry " + std::to_string(e.feature) + " is out of range");
        }
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("malformed model: ") + e.what());
    }
}

std::string model_to_string(const Model& model, bool include_timing) {
    return model_to_json(model, include_timing).dump(2) + "\n";
}

void save_model(const std::string& path, const Model& model, bool include_timing) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file '" + path + "'");
    out << model_to_string(model, include_timing);
    if (!out) throw DataError("failed writing model file '" + path + "'");
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace fgm
