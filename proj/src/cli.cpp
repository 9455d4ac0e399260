#include "fgm/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fgm/baseline.hpp"
#include "fgm/bench.hpp"
#include "fgm/cli_util.hpp"
#include "fgm/dataset.hpp"
#include "fgm/engine.hpp"
#include "fgm/error.hpp"
#include "fgm/model_io.hpp"

namespace fgm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

fs::path default_manifest(const fs::path& primary) {
    fs::path p = primary;
    p.replace_extension(".manifest.json");
    return p;
}

void write_manifest(const fs::path& path, Manifest m) {
    m.outputs.push_back(path);
    write_text(path, m.to_json().dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    if (!dir.empty()) fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// ------------------------------------------------------------------ generate

struct GenerateArgs {
    std::size_t n = 0, m = 0, informative = 0, n_test = 0;
    int type = 1;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string manifest;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    const auto t0 = clock_type::now();
    if (a.n == 0 || a.m == 0) throw UsageError("--n and --m must be positive");
    if (a.informative == 0 || a.informative > a.m) {
        throw UsageError("--informative must lie in [1, m], got " + std::to_string(a.informative));
    }
    Weighting w = Weighting::type1;
    switch (a.type) {
        case 1: w = Weighting::type1; break;
        case 2: w = Weighting::type2; break;
        case 3: w = Weighting::type3; break;
        default: throw UsageError("--type must be 1, 2 or 3");
    }
    const fs::path dir = a.out_dir;
    ensure_dir(dir);
    auto syn = generate_synthetic(a.n, a.m, a.informative, w, a.seed);
    const auto test = generate_test_split(a.n_test ? a.n_test : a.n, syn.truth, a.seed);
    const auto train_path = dir / "train.svm", test_path = dir / "test.svm", truth_path = dir / "truth.txt";
    write_libsvm(train_path, syn.train);
    write_libsvm(test_path, test);
    write_ground_truth(truth_path, syn.truth);

    Manifest man;
    man.command = "generate";
    man.config = {{"n", a.n}, {"n_test", a.n_test ? a.n_test : a.n}, {"m", a.m}, {"informative", a.informative},
                  {"type", a.type}, {"seed", a.seed}};
    man.seed = a.seed;
    man.outputs = {train_path, test_path, truth_path};
    man.wall_seconds = since(t0);
    write_manifest(a.manifest.empty() ? dir / "manifest.json" : fs::path(a.manifest), man);
    out << json{{"train", train_path.string()}, {"test", test_path.string()}, {"truth", truth_path.string()}}.dump()
        << "\n";
    return 0;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
    std::string data, model = "model.json", trace, manifest;
    std::size_t dim = 0;
    std::string loss = "squared-hinge";
    std::string scaling = "ones";
    SolverConfig cfg;
    double L0 = 0.0;
    std::string groups, tree;
    bool poly = false;
    bool timing = false;
};

void write_trace_csv(const fs::path& path, const Model& model) {
    std::ostringstream s;
    CsvWriter csv(s);
    csv.row({"iter", "F", "beta", "phi", "inner_iters", "selected", "seconds"});
    for (const auto& r : model.trace) {
        std::string sel;
        for (std::size_t i = 0; i < r.selected.size(); ++i) {
            if (i) sel += ' ';
            sel += std::to_string(r.selected[i]);
        }
        csv.row({std::to_string(r.iteration), format_double(r.objective), format_double(r.beta),
                 std::isfinite(r.phi) ? format_double(r.phi) : std::string(), std::to_string(r.inner_iterations), sel,
                 format_double(r.seconds)});
    }
    write_text(path, s.str());
}

int cmd_train(TrainArgs a, const CLI::App& sub, std::ostream& out) {
    const auto t0 = clock_type::now();
    const int structures = (!a.groups.empty()) + (!a.tree.empty()) + (a.poly ? 1 : 0);
    if (structures > 1) throw UsageError("--groups, --tree and --poly are mutually exclusive");
    if (!a.poly && (sub.count("--gamma") || sub.count("--r"))) throw UsageError("--gamma and --r require --poly");

    SolverConfig cfg = a.cfg;
    cfg.loss = parse_loss_type(a.loss);
    cfg.scaling = parse_scaling(a.scaling);
    if (sub.count("--L0")) {
        cfg.L0_policy = LipschitzPolicy::fixed;
        cfg.L0_value = a.L0;
    }
    TrainStructure structure;
    LibsvmOptions opts;
    opts.dim = a.dim;
    std::vector<std::string> warnings;
    opts.warnings = &warnings;
    const auto data = load_libsvm(a.data, opts);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    Manifest man;
    man.inputs.push_back(a.data);
    if (!a.groups.empty()) {
        cfg.mode = Mode::group;
        structure.groups = load_groups(a.groups, data.m());
        man.inputs.push_back(a.groups);
    } else if (!a.tree.empty()) {
        cfg.mode = Mode::tree;
        structure.tree = load_tree(a.tree, data.m());
        man.inputs.push_back(a.tree);
    } else if (a.poly) {
        cfg.mode = Mode::polynomial;
    }
    cfg.validate();

    const auto model = fgm_train(data, cfg, structure);
    const fs::path model_path = a.model;
    ensure_dir(model_path.parent_path());
    save_model(model_path, model, a.timing);
    const fs::path trace_path = a.trace.empty() ? model_path.parent_path() / "trace.csv" : fs::path(a.trace);
    write_trace_csv(trace_path, model);

    man.command = "train";
    man.config = model_to_json(model).at("config");
    if (cfg.mode == Mode::polynomial) man.config["kernel"] = {{"gamma", cfg.poly.gamma}, {"r", cfg.poly.r}};
    man.seed = cfg.seed;
    man.outputs = {model_path, trace_path};
    man.wall_seconds = since(t0);
    write_manifest(a.manifest.empty() ? default_manifest(model_path) : fs::path(a.manifest), man);
    out << json{{"model", model_path.string()},
                {"support_units", model.support_units.size()},
                {"support_features", model.entries.size()},
                {"outer_iters", model.trace.size()},
                {"stop", to_string(model.stop)}}
               .dump()
        << "\n";
    return 0;
}

// ------------------------------------------------------------ predict / eval

struct PredictArgs {
    std::string model, data, truth, out, manifest;
};

struct Loaded {
    Model model;
    SparseDataset data;
};

Loaded load_for_inference(const PredictArgs& a) {
    Loaded l{load_model(a.model), {}};
    std::vector<std::string> warnings;
    LibsvmOptions opts;
    opts.warnings = &warnings;
    l.data = load_libsvm(a.data, opts);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (l.data.m() > l.model.feature_dim) {
        throw UsageError("data has " + std::to_string(l.data.m()) + " features but the model was trained on " +
                         std::to_string(l.model.feature_dim));
    }
    return l;
}

json metrics(const Loaded& l, const Prediction& p) {
    json j;
    j["mode"] = to_string(l.model.mode);
    j["n"] = l.data.n();
    j["accuracy"] = p.accuracy ? json(*p.accuracy) : json(nullptr);
    j["support_units"] = l.model.support_units.size();
    j["support_features"] = l.model.entries.size();
    return j;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const auto t0 = clock_type::now();
    const auto l = load_for_inference(a);
    const auto p = predict(l.model, l.data);
    Manifest man;
    man.command = "predict";
    man.inputs = {a.model, a.data};
    if (!a.out.empty()) {
        std::ostringstream s;
        for (double y : p.labels) s << (y > 0 ? "+1" : "-1") << "\n";
        write_text(a.out, s.str());
        man.outputs.push_back(a.out);
    }
    man.config = {{"model", a.model}, {"data", a.data}};
    man.wall_seconds = since(t0);
    write_manifest(a.manifest.empty() ? (a.out.empty() ? fs::path("predict.manifest.json") : default_manifest(a.out))
                                      : fs::path(a.manifest),
                   man);
    out << metrics(l, p).dump(2) << "\n";
    return 0;
}

int cmd_eval(const PredictArgs& a, std::ostream& out) {
    const auto t0 = clock_type::now();
    const auto l = load_for_inference(a);
    const auto p = predict(l.model, l.data);
    auto j = metrics(l, p);
    Manifest man;
    man.command = "eval";
    man.inputs = {a.model, a.data};
    if (!a.truth.empty()) {
        if (l.model.mode != Mode::plain) {
            throw UsageError("recovery needs a plain-feature model, got a " + to_string(l.model.mode) + " model");
        }
        const auto truth = load_ground_truth(a.truth, l.model.feature_dim);
        j["recovered"] = evaluate_recovery(l.model, truth);
        j["informative"] = truth.support.size();
        man.inputs.push_back(a.truth);
    }
    const std::string text = j.dump(2) + "\n";
    if (!a.out.empty()) {
        write_text(a.out, text);
        man.outputs.push_back(a.out);
    }
    man.config = {{"model", a.model}, {"data", a.data}, {"truth", a.truth}};
    man.wall_seconds = since(t0);
    write_manifest(a.manifest.empty() ? (a.out.empty() ? fs::path("eval.manifest.json") : default_manifest(a.out))
                                      : fs::path(a.manifest),
                   man);
    out << text;
    return 0;
}

// --------------------------------------------------------------------- bench

struct BenchArgs {
    std::string config, out = "results.csv", models_dir, manifest;
};

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
    }
    return s;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    const auto t0 = clock_type::now();
    std::ifstream in(a.config);
    if (!in) throw DataError("cannot open bench config '" + a.config + "'");
    json cj;
    try {
        cj = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("bench config '" + a.config + "': " + e.what());
    }
    const auto config = parse_bench_config(cj);
    const auto threads = thread_cap();
    const auto rows = run_bench(config, threads);

    Manifest man;
    man.command = "bench";
    man.config = bench_config_to_json(config);
    man.config["threads"] = threads;
    man.seed = config.seeds.front();
    man.inputs.push_back(a.config);
    if (config.files) {
        man.inputs.push_back(config.files->train);
        if (!config.files->test.empty()) man.inputs.push_back(config.files->test);
        if (!config.files->truth.empty()) man.inputs.push_back(config.files->truth);
    }
    const fs::path csv_path = a.out;
    ensure_dir(csv_path.parent_path());
    std::ostringstream s;
    write_bench_csv(s, rows);
    write_text(csv_path, s.str());
    man.outputs.push_back(csv_path);
    if (!a.models_dir.empty()) {
        ensure_dir(a.models_dir);
        for (const auto& r : rows) {
            const auto p = fs::path(a.models_dir) /
                           (sanitize(r.method + "_" + r.setting) + "_seed" + std::to_string(r.seed) + ".json");
            write_text(p, r.model_json);
            man.outputs.push_back(p);
        }
    }
    man.wall_seconds = since(t0);
    write_manifest(a.manifest.empty() ? default_manifest(csv_path) : fs::path(a.manifest), man);
    out << json{{"results", csv_path.string()}, {"rows", rows.size()}}.dump() << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Feature generating machine: sparse classifiers by cutting-plane feature generation"};
    app.name("fgm");
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic train/test/truth triple");
    g->add_option("--n", gen.n, "Training instances")->required();
    g->add_option("--m", gen.m, "Features")->required();
    g->add_option("--informative", gen.informative, "Nonzero ground-truth weights")->required();
    g->add_option("--type", gen.type, "Weight distribution: 1, 2 or 3");
    g->add_option("--seed", gen.seed, "Random seed");
    g->add_option("--n-test", gen.n_test, "Test instances (default: n)");
    g->add_option("--out-dir", gen.out_dir, "Output directory");
    g->add_option("--manifest", gen.manifest, "Manifest path");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a sparse classifier by feature generation");
    t->add_option("--data", tr.data, "LIBSVM training file")->required();
    t->add_option("--dim", tr.dim, "Feature dimension (default: inferred)");
    t->add_option("--model", tr.model, "Output model JSON");
    t->add_option("--trace", tr.trace, "Output trace CSV (default: trace.csv next to the model)");
    t->add_option("--manifest", tr.manifest, "Manifest path");
    t->add_option("--loss", tr.loss, "squared-hinge or logistic");
    t->add_option("--budget", tr.cfg.budget, "Units selected per generated constraint (B)");
    t->add_option("--C", tr.cfg.C, "Loss trade-off");
    t->add_option("--max-outer", tr.cfg.max_outer, "Outer iteration cap");
    t->add_option("--max-inner", tr.cfg.max_inner, "APG iteration cap");
    t->add_option("--eps-apg", tr.cfg.eps_apg, "APG relative objective tolerance");
    t->add_option("--eps-outer", tr.cfg.eps_outer, "Outer relative objective tolerance");
    t->add_option("--eta", tr.cfg.eta, "Line-search factor in (0, 1)");
    t->add_option("--L0", tr.L0, "Fixed initial Lipschitz estimate (default: 0.1 n C)");
    t->add_option("--scaling", tr.scaling, "Unit scaling: ones or inverse-norm");
    t->add_option("--groups", tr.groups, "Group structure file");
    t->add_option("--tree", tr.tree, "Tree structure file");
    t->add_flag("--poly", tr.poly, "Degree-2 polynomial feature generation");
    t->add_option("--gamma", tr.cfg.poly.gamma, "Polynomial gamma");
    t->add_option("--r", tr.cfg.poly.r, "Polynomial offset r");
    t->add_option("--poly-block", tr.cfg.poly_block, "Anchor features per streamed block");
    t->add_option("--seed", tr.cfg.seed, "Seed recorded with the model");
    t->add_flag("--timing", tr.timing, "Keep wall-clock seconds in the model trace");

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Predict labels for a LIBSVM file");
    p->add_option("--model", pr.model, "Model JSON")->required();
    p->add_option("--data", pr.data, "LIBSVM file")->required();
    p->add_option("--out", pr.out, "Predicted labels, one per line");
    p->add_option("--manifest", pr.manifest, "Manifest path");

    PredictArgs ev;
    auto* e = app.add_subcommand("eval", "Accuracy, support size and feature recovery");
    e->add_option("--model", ev.model, "Model JSON")->required();
    e->add_option("--data", ev.data, "LIBSVM file")->required();
    e->add_option("--truth", ev.truth, "Ground-truth weights file");
    e->add_option("--out", ev.out, "Metrics JSON path (also printed)");
    e->add_option("--manifest", ev.manifest, "Manifest path");

    BenchArgs be;
    auto* b = app.add_subcommand("bench", "Run a method comparison from a JSON config");
    b->add_option("--config", be.config, "Bench config JSON")->required();
    b->add_option("--out", be.out, "Results CSV");
    b->add_option("--models-dir", be.models_dir, "Directory for per-row model JSON");
    b->add_option("--manifest", be.manifest, "Manifest path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        return app.exit(ex, out, err) == 0 ? 0 : 2;
    }

    try {
        if (*g) return cmd_generate(gen, out);
        if (*t) return cmd_train(tr, *t, out);
        if (*p) return cmd_predict(pr, out);
        if (*e) return cmd_eval(ev, out);
        if (*b) return cmd_bench(be, out);
    } catch (const Error& ex) {
        err << "fgm: " << ex.what() << "\n";
        return ex.exit_code();
    } catch (const std::exception& ex) {
        err << "fgm: internal error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace fgm::cli
