#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "fgm/bench.hpp"
#include "fgm/cli.hpp"
#include "fgm/cli_util.hpp"
#include "fgm/error.hpp"
#include "fgm/model_io.hpp"
#include "support.hpp"

using namespace fgm;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run fgm_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fgm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read(p));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        rows.push_back(f);
    }
    return rows;
}

}  // namespace

TEST_CASE("csv escaping") {
    CHECK(cli::csv_escape("plain") == "plain");
    CHECK(cli::csv_escape("a,b") == "\"a,b\"");
    CHECK(cli::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(cli::csv_escape("two\nlines") == "\"two\nlines\"");
    std::ostringstream s;
    cli::CsvWriter(s).row({"x", "y,z"});
    CHECK(s.str() == "x,\"y,z\"\r\n");
}

TEST_CASE("sha256 and doubles") {
    CHECK(cli::sha256_bytes("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(std::stod(cli::format_double(0.1)) == 0.1);
    CHECK(cli::format_double(1e300) == "1e+300");
}

TEST_CASE("parallel_for runs every index and rethrows the first error") {
    std::vector<int> hit(50, 0);
    cli::parallel_for(50, 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) CHECK(h == 1);
    try {
        cli::parallel_for(20, 3, [&](std::size_t i) {
            if (i == 7 || i == 15) throw UsageError("at " + std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()) == "at 7");
    }
}

TEST_CASE("generate is deterministic and validates its arguments") {
    test::TempDir a, b;
    const std::vector<std::string> flags{"generate", "--n", "50", "--m", "30", "--informative", "5", "--type", "1",
                                         "--seed", "7"};
    auto fa = flags, fb = flags;
    fa.insert(fa.end(), {"--out-dir", a.path().string()});
    fb.insert(fb.end(), {"--out-dir", b.path().string()});
    REQUIRE(fgm_cli(fa).code == 0);
    REQUIRE(fgm_cli(fb).code == 0);
    for (const char* f : {"train.svm", "test.svm", "truth.txt"}) {
        REQUIRE(fs::exists(a / f));
        CHECK(cli::sha256_file(a / f) == cli::sha256_file(b / f));
    }
    const auto man = nlohmann::json::parse(read(a / "manifest.json"));
    CHECK(man.at("command") == "generate");
    CHECK(man.at("seed") == 7);
    CHECK(man.at("outputs").size() == 4);

    test::TempDir c;
    const auto bad = fgm_cli({"generate", "--n", "10", "--m", "4096", "--informative", "5000", "--out-dir",
                              c.path().string()});
    CHECK(bad.code == 2);
    CHECK(fgm_cli({"generate", "--n", "10"}).code == 2);
    CHECK(fgm_cli({"frobnicate"}).code == 2);
    CHECK(fgm_cli({}).code == 2);
}

TEST_CASE("train, predict and eval") {
    test::TempDir dir;
    REQUIRE(fgm_cli({"generate", "--n", "120", "--m", "60", "--informative", "8", "--seed", "3", "--out-dir",
                     dir.path().string()})
                .code == 0);
    const auto train = (dir / "train.svm").string();
    const auto model = (dir / "model.json").string();
    auto r = fgm_cli({"train", "--data", train, "--dim", "60", "--budget", "4", "--C", "10", "--eps-apg", "1e-9",
                 "--max-inner", "20000", "--model", model});
    REQUIRE(r.code == 0);
    const auto m = load_model(model);
    CHECK(m.support_units.size() >= 4);
    CHECK(m.support_units.size() <= 4 * m.trace.size());
    CHECK(fs::exists(dir / "model.manifest.json"));

    const auto trace = read_csv(dir / "trace.csv");
    REQUIRE(trace.size() == m.trace.size() + 1);
    CHECK(trace[0] == std::vector<std::string>{"iter", "F", "beta", "phi", "inner_iters", "selected", "seconds"});
    for (std::size_t k = 2; k < trace.size(); ++k) CHECK(std::stod(trace[k][2]) >= std::stod(trace[k - 1][2]) * (1 - 1e-6));

    const auto one = (dir / "one.json").string();
    REQUIRE(fgm_cli({"train", "--data", train, "--budget", "6", "--max-outer", "1", "--model", one}).code == 0);
    CHECK(load_model(one).support_units.size() == 6);

    const auto labels = (dir / "labels.txt").string();
    r = fgm_cli({"predict", "--model", model, "--data", (dir / "test.svm").string(), "--out", labels});
    REQUIRE(r.code == 0);
    std::istringstream ls(read(labels));
    std::size_t count = 0;
    for (std::string line; std::getline(ls, line);) {
        CHECK((line == "1" || line == "-1" || line == "+1"));
        ++count;
    }
    CHECK(count == 120);

    r = fgm_cli({"eval", "--model", model, "--data", (dir / "test.svm").string(), "--truth",
                 (dir / "truth.txt").string(), "--out", (dir / "metrics.json").string()});
    REQUIRE(r.code == 0);
    const auto metrics = nlohmann::json::parse(read(dir / "metrics.json"));
    CHECK(metrics.at("accuracy").get<double>() > 0.5);
    CHECK(metrics.at("recovered").get<std::size_t>() <= 8);
    CHECK(metrics.at("recovered").get<std::size_t>() == evaluate_recovery(m, load_ground_truth(dir / "truth.txt", 60)));
}

TEST_CASE("train flag conflicts and bad inputs") {
    test::TempDir dir;
    REQUIRE(fgm_cli({"generate", "--n", "40", "--m", "6", "--informative", "2", "--out-dir", dir.path().string()})
                .code == 0);
    const auto train = (dir / "train.svm").string();
    {
        std::ofstream g(dir / "g.txt");
        g << "a: 0 1 2\nb: 3 4 5\n";
    }
    const auto model = (dir / "m.json").string();
    CHECK(fgm_cli({"train", "--data", train, "--groups", (dir / "g.txt").string(), "--poly", "--model", model}).code == 2);
    CHECK(fgm_cli({"train", "--data", train, "--gamma", "2", "--model", model}).code == 2);
    CHECK(fgm_cli({"train", "--data", train, "--loss", "hinge", "--model", model}).code == 2);
    CHECK(fgm_cli({"train", "--data", train, "--budget", "0", "--model", model}).code == 2);
    CHECK(fgm_cli({"train", "--data", (dir / "nope.svm").string(), "--model", model}).code == 3);
    {
        std::ofstream bad(dir / "bad.svm");
        bad << "+1 1:1\n-1 oops\n";
    }
    const auto r = fgm_cli({"train", "--data", (dir / "bad.svm").string(), "--model", model});
    CHECK(r.code == 3);
    CHECK(r.err.find(":2:") != std::string::npos);

    REQUIRE(fgm_cli({"train", "--data", train, "--groups", (dir / "g.txt").string(), "--budget", "1", "--model", model})
                .code == 0);
    CHECK(load_model(model).mode == Mode::group);

    const auto poly = (dir / "p.json").string();
    REQUIRE(fgm_cli({"train", "--data", train, "--poly", "--gamma", "0.5", "--r", "1", "--budget", "2", "--model", poly})
                .code == 0);
    CHECK(fgm_cli({"eval", "--model", poly, "--data", train, "--truth", (dir / "truth.txt").string()}).code == 2);
    CHECK(fgm_cli({"eval", "--model", poly, "--data", train}).code == 0);
}

TEST_CASE("bench emits one row per method, setting and seed") {
    test::TempDir dir;
    const auto cfg_path = dir / "bench.json";
    {
        std::ofstream c(cfg_path);
        c << R"({"data": {"synthetic": {"n": 80, "m": 60, "informative": 6}},
                 "seeds": [1, 2, 3, 4, 5],
                 "methods": [{"name": "fgm", "budget": [3], "max_outer": [2, 3]},
                             {"name": "l1", "support": [6]},
                             "l2-full"]})";
    }
    const auto out = dir / "results.csv";
    const auto r = fgm_cli({"bench", "--config", cfg_path.string(), "--out", out.string(), "--models-dir",
                            (dir / "models").string()});
    REQUIRE(r.code == 0);
    const auto rows = read_csv(out);
    REQUIRE(rows.size() == 1 + 5 * 4);
    CHECK(rows[0] == std::vector<std::string>{"method", "setting", "seed", "budget", "outer_iters", "accuracy",
                                              "support", "recovered", "seconds"});
    std::map<std::string, int> per_setting;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        per_setting[rows[k][0] + "|" + rows[k][1]] += 1;
        if (rows[k][0] == "fgm") {
            const auto B = std::stoul(rows[k][3]), T = std::stoul(rows[k][4]), s = std::stoul(rows[k][6]);
            CHECK(s >= B);
            CHECK(s <= B * T);
        }
    }
    CHECK(per_setting.size() == 4);
    for (const auto& [k, v] : per_setting) CHECK(v == 5);
    CHECK(std::distance(fs::directory_iterator(dir / "models"), fs::directory_iterator{}) == 20);

    // a second run reproduces the accuracy column
    const auto out2 = dir / "again.csv";
    REQUIRE(fgm_cli({"bench", "--config", cfg_path.string(), "--out", out2.string()}).code == 0);
    const auto rows2 = read_csv(out2);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) CHECK(rows[k][5] == rows2[k][5]);
}

TEST_CASE("bench config errors") {
    CHECK_THROWS_AS(cli::parse_bench_config(nlohmann::json::parse(
                        R"({"data": {"synthetic": {"n": 8, "m": 6, "informative": 2}}, "methods": ["svm"]})")),
                    UsageError);
    CHECK_THROWS_AS(cli::parse_bench_config(nlohmann::json::parse(
                        R"({"data": {"synthetic": {"n": 8, "m": 6, "informative": 2}}, "methods": ["fgm"], "x": 1})")),
                    UsageError);
    CHECK_THROWS_AS(cli::parse_bench_config(nlohmann::json::parse(R"({"methods": ["fgm"]})")), UsageError);

    test::TempDir dir;
    {
        std::ofstream c(dir / "bad.json");
        c << R"({"data": {"synthetic": {"n": 8, "m": 6, "informative": 2}}, "methods": ["svm"]})";
    }
    CHECK(fgm_cli({"bench", "--config", (dir / "bad.json").string(), "--out", (dir / "r.csv").string()}).code == 2);
}
