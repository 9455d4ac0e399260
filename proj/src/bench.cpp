#include "fgm/bench.hpp"

#include <chrono>
#include <set>

#include "fgm/baseline.hpp"
#include "fgm/cli_util.hpp"
#include "fgm/error.hpp"
#include "fgm/model_io.hpp"

namespace fgm::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kMethods{"fgm", "fgm-debias", "l1", "l1-debias", "l2-full"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw UsageError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("missing or invalid '" + key + "' in " + where);
    }
}

template <class T>
std::vector<T> get_list(const json& j, const std::string& key, std::vector<T> fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    try {
        if (v.is_array()) return v.get<std::vector<T>>();
        return {v.get<T>()};
    } catch (const json::exception&) {
        throw UsageError("invalid '" + key + "' in " + where);
    }
}

Weighting parse_weighting(int type) {
    switch (type) {
        case 1: return Weighting::type1;
        case 2: return Weighting::type2;
        case 3: return Weighting::type3;
        default: throw UsageError("feature weighting type must be 1, 2 or 3");
    }
}

int weighting_number(Weighting w) {
    return w == Weighting::type1 ? 1 : (w == Weighting::type2 ? 2 : 3);
}

struct SeedData {
    SparseDataset train;
    SparseDataset test;
    std::optional<GroundTruth> truth;
};

SeedData prepare(const BenchConfig& c, std::uint64_t seed) {
    SeedData d;
    if (c.synthetic) {
        const auto& s = *c.synthetic;
        auto syn = generate_synthetic(s.n, s.m, s.informative, s.weighting, seed);
        d.test = generate_test_split(s.n_test ? s.n_test : s.n, syn.truth, seed);
        d.train = std::move(syn.train);
        d.truth = std::move(syn.truth);
        return d;
    }
    const auto& f = *c.files;
    d.train = load_libsvm(f.train);
    if (!f.test.empty()) {
        d.test = load_libsvm(f.test);
        const auto dim = std::max(d.train.m(), d.test.m());
        d.train = d.train.with_dim(dim);
        d.test = d.test.with_dim(dim);
    } else {
        d.test = d.train;
    }
    if (!f.truth.empty()) d.truth = load_ground_truth(f.truth, d.train.m());
    return d;
}

Model dense_to_model(const DenseWeights& fit, std::size_t dim, LossType loss, double C) {
    std::vector<std::pair<std::uint64_t, double>> weights;
    for (auto j : fit.support()) weights.emplace_back(j, fit.w[j]);
    auto model = make_plain_model(dim, weights);
    model.config.loss = loss;
    model.config.C = C;
    return model;
}

BenchRow make_row(const std::string& method, const std::string& setting, std::uint64_t seed, const Model& model,
                  const SeedData& data, double seconds) {
    BenchRow row;
    row.method = method;
    row.setting = setting;
    row.seed = seed;
    row.accuracy = predict(model, data.test).accuracy.value_or(0.0);
    row.support = model.support_units.size();
    if (data.truth) row.recovered = evaluate_recovery(model, *data.truth);
    row.seconds = seconds;
    row.model_json = model_to_string(model);
    return row;
}

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<BenchRow> run_method(const BenchConfig& c, const BenchMethod& method, std::uint64_t seed,
                                 const SeedData& data) {
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    const std::size_t dim = data.train.m();
    const LossKind kind{c.loss, c.C};

    if (method.name == "fgm" || method.name == "fgm-debias") {
        for (auto B : method.budgets) {
            for (auto T : method.max_outer) {
                const auto t0 = clock::now();
                SolverConfig cfg;
                cfg.budget = B;
                cfg.max_outer = T;
                cfg.C = c.C;
                cfg.loss = c.loss;
                cfg.eps_outer = c.eps_outer;
                cfg.seed = seed;
                auto model = fgm_train(data.train, cfg);
                const auto iters = model.trace.size();
                if (method.name == "fgm-debias") {
                    model = retrain_unbiased(data.train, model.support_features(), c.loss, c.debias_C);
                }
                auto row = make_row(method.name, "B=" + std::to_string(B) + " T=" + std::to_string(T), seed, model,
                                    data, since(t0));
                row.budget = B;
                row.outer_iters = iters;
                rows.push_back(std::move(row));
            }
        }
        return rows;
    }
    if (method.name == "l1" || method.name == "l1-debias") {
        auto finish = [&](const DenseWeights& fit, const std::string& setting, clock::time_point t0) {
            Model model;
            if (method.name == "l1-debias") {
                if (fit.support_size() == 0) throw UsageError("l1 fit at " + setting + " selected no features");
                model = retrain_unbiased(data.train, fit.support(), c.loss, c.debias_C);
            } else {
                model = dense_to_model(fit, dim, c.loss, c.C);
            }
            rows.push_back(make_row(method.name, setting, seed, model, data, since(t0)));
        };
        for (double reg : method.regs) {
            const auto t0 = clock::now();
            finish(l1_prox_train(data.train, kind, reg), "reg=" + format_double(reg), t0);
        }
        if (!method.supports.empty()) {
            const auto t0 = clock::now();
            const auto matches = l1_match_support(data.train, kind, method.supports);
            for (const auto& m : matches) finish(m.weights, "support=" + std::to_string(m.target), t0);
        }
        return rows;
    }
    if (method.name == "l2-full") {
        const auto t0 = clock::now();
        const auto fit = l2_full_train(data.train, kind);
        rows.push_back(make_row(method.name, "C=" + format_double(c.C), seed, dense_to_model(fit, dim, c.loss, c.C),
                                data, since(t0)));
        return rows;
    }
    throw UsageError("unknown method '" + method.name + "'");
}

}  // namespace

BenchConfig parse_bench_config(const json& j) {
    check_keys(j, {"data", "seeds", "loss", "C", "debias_C", "eps_outer", "methods"}, "bench config");
    BenchConfig c;
    const auto& data = j.contains("data") ? j.at("data") : throw UsageError("bench config needs 'data'");
    check_keys(data, {"synthetic", "train", "test", "truth"}, "data");
    if (data.contains("synthetic")) {
        if (data.contains("train")) throw UsageError("data takes either 'synthetic' or 'train', not both");
        const auto& s = data.at("synthetic");
        check_keys(s, {"n", "n_test", "m", "informative", "type"}, "data.synthetic");
        SyntheticSpec spec;
        spec.n = get<std::size_t>(s, "n", "data.synthetic");
        spec.m = get<std::size_t>(s, "m", "data.synthetic");
        spec.informative = get<std::size_t>(s, "informative", "data.synthetic");
        if (s.contains("n_test")) spec.n_test = get<std::size_t>(s, "n_test", "data.synthetic");
        if (s.contains("type")) spec.weighting = parse_weighting(get<int>(s, "type", "data.synthetic"));
        if (spec.informative == 0 || spec.informative > spec.m) {
            throw UsageError("informative must lie in [1, m]");
        }
        c.synthetic = spec;
    } else if (data.contains("train")) {
        FileSpec f;
        f.train = get<std::string>(data, "train", "data");
        if (data.contains("test")) f.test = get<std::string>(data, "test", "data");
        if (data.contains("truth")) f.truth = get<std::string>(data, "truth", "data");
        c.files = f;
    } else {
        throw UsageError("data needs 'synthetic' or 'train'");
    }
    c.seeds = get_list<std::uint64_t>(j, "seeds", c.seeds, "bench config");
    if (c.seeds.empty()) throw UsageError("seeds must not be empty");
    if (j.contains("loss")) c.loss = parse_loss_type(get<std::string>(j, "loss", "bench config"));
    if (j.contains("C")) c.C = get<double>(j, "C", "bench config");
    if (j.contains("debias_C")) c.debias_C = get<double>(j, "debias_C", "bench config");
    if (j.contains("eps_outer")) c.eps_outer = get<double>(j, "eps_outer", "bench config");
    if (!(c.C > 0.0) || !(c.debias_C > 0.0) || !(c.eps_outer > 0.0)) {
        throw UsageError("C, debias_C and eps_outer must be positive");
    }
    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty()) {
        throw UsageError("bench config needs a non-empty 'methods' array");
    }
    for (const auto& mj : j.at("methods")) {
        BenchMethod m;
        if (mj.is_string()) {
            m.name = mj.get<std::string>();
        } else {
            check_keys(mj, {"name", "budget", "max_outer", "reg", "support"}, "method");
            m.name = get<std::string>(mj, "name", "method");
            m.budgets = get_list<std::size_t>(mj, "budget", m.budgets, "method " + m.name);
            m.max_outer = get_list<std::size_t>(mj, "max_outer", m.max_outer, "method " + m.name);
            m.regs = get_list<double>(mj, "reg", {}, "method " + m.name);
            m.supports = get_list<std::size_t>(mj, "support", {}, "method " + m.name);
        }
        if (!kMethods.count(m.name)) throw UsageError("unknown method '" + m.name + "'");
        if (m.name.starts_with("l1") && m.regs.empty() && m.supports.empty()) {
            throw UsageError("method " + m.name + " needs 'reg' or 'support'");
        }
        for (auto b : m.budgets)
            if (b == 0) throw UsageError("budget must be at least 1");
        for (auto t : m.max_outer)
            if (t == 0) throw UsageError("max_outer must be at least 1");
        for (auto r : m.regs)
            if (!(r > 0.0)) throw UsageError("l1 weights must be positive");
        c.methods.push_back(std::move(m));
    }
    return c;
}

json bench_config_to_json(const BenchConfig& c) {
    json j;
    if (c.synthetic) {
        const auto& s = *c.synthetic;
        j["data"]["synthetic"] = {{"n", s.n}, {"n_test", s.n_test ? s.n_test : s.n}, {"m", s.m},
                                  {"informative", s.informative}, {"type", weighting_number(s.weighting)}};
    } else if (c.files) {
        j["data"]["train"] = c.files->train;
        if (!c.files->test.empty()) j["data"]["test"] = c.files->test;
        if (!c.files->truth.empty()) j["data"]["truth"] = c.files->truth;
    }
    j["seeds"] = c.seeds;
    j["loss"] = to_string(c.loss);
    j["C"] = c.C;
    j["debias_C"] = c.debias_C;
    j["eps_outer"] = c.eps_outer;
    json methods = json::array();
    for (const auto& m : c.methods) {
        json mj{{"name", m.name}};
        if (m.name.starts_with("fgm")) {
            mj["budget"] = m.budgets;
            mj["max_outer"] = m.max_outer;
        }
        if (!m.regs.empty()) mj["reg"] = m.regs;
        if (!m.supports.empty()) mj["support"] = m.supports;
        methods.push_back(std::move(mj));
    }
    j["methods"] = std::move(methods);
    return j;
}

std::vector<BenchRow> run_bench(const BenchConfig& config, std::size_t threads) {
    if (config.methods.empty()) throw UsageError("no methods to run");
    const std::size_t S = config.seeds.size();
    std::vector<SeedData> data(S);
    if (config.synthetic) {
        parallel_for(S, threads, [&](std::size_t s) { data[s] = prepare(config, config.seeds[s]); });
    } else {
        const auto shared = prepare(config, config.seeds[0]);
        for (auto& d : data) d = shared;
    }

    const std::size_t M = config.methods.size();
    std::vector<std::vector<BenchRow>> results(M * S);
    parallel_for(M * S, threads, [&](std::size_t task) {
        const auto m = task / S, s = task % S;
        results[task] = run_method(config, config.methods[m], config.seeds[s], data[s]);
    });

    // reorder from (method, seed, setting) to (method, setting, seed)
    std::vector<BenchRow> rows;
    for (std::size_t m = 0; m < M; ++m) {
        const auto settings = results[m * S].size();
        for (std::size_t k = 0; k < settings; ++k)
            for (std::size_t s = 0; s < S; ++s) rows.push_back(std::move(results[m * S + s][k]));
    }
    return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
    CsvWriter csv(out);
    csv.row({"method", "setting", "seed", "budget", "outer_iters", "accuracy", "support", "recovered", "seconds"});
    auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& r : rows) {
        csv.row({r.method, r.setting, std::to_string(r.seed), opt(r.budget), opt(r.outer_iters),
                 format_double(r.accuracy), std::to_string(r.support), opt(r.recovered), format_double(r.seconds)});
    }
}

}  // namespace fgm::cli
