#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "fgm/dataset.hpp"
#include "fgm/error.hpp"
#include "fgm/rng.hpp"
#include "support.hpp"

using namespace fgm;
using fgm::test::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("libsvm line converts to 0-based sorted row") {
    TempDir dir;
    write_file(dir / "a.svm", "+1 7:1.0 3:0.5\n-1\n");
    const auto d = load_libsvm(dir / "a.svm");
    REQUIRE(d.n() == 2);
    CHECK(d.m() == 7);
    const auto r0 = d.row(0);
    REQUIRE(r0.size() == 2);
    CHECK(r0[0] == Entry{2, 0.5});
    CHECK(r0[1] == Entry{6, 1.0});
    CHECK(d.label(0) == 1.0);
    CHECK(d.row(1).empty());
    CHECK(d.label(1) == -1.0);
}

TEST_CASE("libsvm dimension is inferred from the largest index") {
    TempDir dir;
    write_file(dir / "a.svm", "+1 1:1 2:1\n-1 5:2\n+1 3:1 4:1\n");
    const auto d = load_libsvm(dir / "a.svm");
    CHECK(d.n() == 3);
    CHECK(d.m() == 5);
    CHECK(load_libsvm(dir / "a.svm", {.dim = 9}).m() == 9);
}

TEST_CASE("libsvm errors carry the line number") {
    TempDir dir;
    auto fails_at = [&](const std::string& text, std::size_t line) {
        write_file(dir / "bad.svm", text);
        try {
            load_libsvm(dir / "bad.svm");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == line);
            CHECK(e.exit_code() == 3);
        }
    };
    fails_at("+1 1:1\n-1 x:2\n", 2);
    fails_at("+1 1:1\n2 1:1\n", 2);
    fails_at("+1 0:1\n", 1);
    fails_at("+1 2:1 2:3\n", 1);
    fails_at("+1 1:nan\n", 1);
    write_file(dir / "big.svm", "+1 6:1\n");
    CHECK_THROWS_AS(load_libsvm(dir / "big.svm", {.dim = 5}), ParseError);
}

TEST_CASE("0/1 labels are remapped with a warning") {
    TempDir dir;
    write_file(dir / "a.svm", "1 1:1\n0 2:1\n");
    std::vector<std::string> warnings;
    const auto d = load_libsvm(dir / "a.svm", {.warnings = &warnings});
    CHECK(d.label(0) == 1.0);
    CHECK(d.label(1) == -1.0);
    CHECK(warnings.size() == 1);
    write_file(dir / "mixed.svm", "1 1:1\n0 2:1\n-1 1:2\n");
    CHECK_THROWS_AS(load_libsvm(dir / "mixed.svm"), ParseError);
}

TEST_CASE("libsvm write then load is the identity") {
    TempDir dir;
    const auto d = test::random_dataset(20, 15, 3, 0.4);
    write_libsvm(dir / "r.svm", d);
    const auto back = load_libsvm(dir / "r.svm", {.dim = d.m()});
    CHECK(back == d);
}

TEST_CASE("dataset invariants are enforced") {
    CHECK_THROWS_AS(SparseDataset(3, {0, 1}, {{3, 1.0}}, {1.0}), DataError);
    CHECK_THROWS_AS(SparseDataset(3, {0, 2}, {{1, 1.0}, {1, 2.0}}, {1.0}), DataError);
    CHECK_THROWS_AS(SparseDataset(3, {0, 1}, {{0, 1.0}}, {0.5}), DataError);
    DatasetBuilder b;
    CHECK_THROWS_AS(b.add_row(2.0, {}), DataError);
    CHECK_THROWS_AS(b.add_row(1.0, {{1, 1.0}, {1, 1.0}}), DataError);
}

TEST_CASE("at and column norms") {
    DatasetBuilder b;
    b.add_row(1.0, {{0, 3.0}, {2, 1.0}});
    b.add_row(-1.0, {{0, 4.0}});
    const auto d = std::move(b).build(4);
    CHECK(d.at(0, 2) == 1.0);
    CHECK(d.at(1, 2) == 0.0);
    const auto norms = d.column_norms();
    CHECK(norms[0] == doctest::Approx(5.0));
    CHECK(norms[3] == 0.0);
}

TEST_CASE("scaling prior policies") {
    DatasetBuilder b;
    b.add_row(1.0, {{0, 3.0}, {1, 2.0}});
    b.add_row(-1.0, {{0, 4.0}});
    const auto d = std::move(b).build(3);
    const auto inv = compute_scaling_prior(d, ScalingPolicy::inverse_norm);
    CHECK(inv.lambda[0] == doctest::Approx(0.2));
    CHECK(inv.lambda[1] == doctest::Approx(0.5));
    CHECK(inv.lambda[2] == 0.0);
    const auto ones = compute_scaling_prior(d, ScalingPolicy::ones);
    CHECK(ones.lambda == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("group files") {
    TempDir dir;
    write_file(dir / "g.txt", "g0: 0 1\ng1: 2 3 | lambda=0.5\n");
    const auto g = load_groups(dir / "g.txt", 4);
    REQUIRE(g.size() == 2);
    CHECK(g.groups[0] == std::vector<index_t>{0, 1});
    CHECK(g.groups[1] == std::vector<index_t>{2, 3});
    CHECK(!g.lambda[0]);
    CHECK(*g.lambda[1] == 0.5);

    write_file(dir / "overlap.txt", "g0: 0 1\ng1: 1 2\n");
    CHECK_THROWS_AS(load_groups(dir / "overlap.txt", 4), StructureError);
    write_file(dir / "range.txt", "g0: 0 9\n");
    CHECK_THROWS_AS(load_groups(dir / "range.txt", 4), DataError);
    write_file(dir / "dup.txt", "g0: 0\ng0: 1\n");
    CHECK_THROWS_AS(load_groups(dir / "dup.txt", 4), ParseError);
}

TEST_CASE("group scaling prior") {
    DatasetBuilder b;
    b.add_row(1.0, {{0, 3.0}, {1, 4.0}});
    b.add_row(1.0, {{2, 0.0}});
    const auto d = std::move(b).build(4);
    GroupStructure g;
    g.names = {"a", "b", "c"};
    g.groups = {{0, 1}, {2}, {3}};
    g.lambda = {std::nullopt, std::nullopt, 7.0};
    const auto lam = group_scaling_prior(d, g, ScalingPolicy::inverse_norm);
    CHECK(lam.lambda[0] == doctest::Approx(0.2));
    CHECK(lam.lambda[1] == 0.0);
    CHECK(lam.lambda[2] == 7.0);
}

TEST_CASE("tree files") {
    TempDir dir;
    write_file(dir / "t.txt", "root ROOT: 0 1 2\nleft root: 0 1\nright root: 2 | lambda=3\n");
    const auto t = load_tree(dir / "t.txt", 3);
    REQUIRE(t.size() == 3);
    CHECK(t.roots().size() == 1);
    CHECK(t.node(0).children.size() == 2);
    CHECK(t.node(2).lambda == 3.0);
    CHECK(t.node(0).subtree_lambda_max == 3.0);

    write_file(dir / "cross.txt", "root ROOT: 0 1 2\na root: 0 1\nb a: 1 2\n");
    CHECK_THROWS_AS(load_tree(dir / "cross.txt", 3), StructureError);
    write_file(dir / "cover.txt", "root ROOT: 0 1\n");
    CHECK_THROWS_AS(load_tree(dir / "cover.txt", 3), StructureError);
    write_file(dir / "orphan.txt", "root ROOT: 0 1 2\na nowhere: 0\n");
    CHECK_THROWS_AS(load_tree(dir / "orphan.txt", 3), ParseError);
}

TEST_CASE("synthetic generator") {
    const auto a = generate_synthetic(50, 30, 7, Weighting::type1, 11);
    const auto b = generate_synthetic(50, 30, 7, Weighting::type1, 11);
    CHECK(a.train == b.train);
    CHECK(a.truth.weights == b.truth.weights);
    CHECK(a.truth.support.size() == 7);
    for (std::size_t j = 0; j < 30; ++j) {
        const bool in = std::binary_search(a.truth.support.begin(), a.truth.support.end(), j);
        CHECK(in == (a.truth.weights[j] != 0.0));
        if (in) {
            CHECK(a.truth.weights[j] > 0.0);
            CHECK(a.truth.weights[j] <= 1.0);
        }
    }
    // labels are sign(Xw) with sign(0) = +1
    for (std::size_t i = 0; i < a.train.n(); ++i) {
        double s = 0.0;
        for (const auto& e : a.train.row(i)) s += e.value * a.truth.weights[e.index];
        CHECK(a.train.label(i) == (s >= 0.0 ? 1.0 : -1.0));
    }

    const auto t2 = generate_synthetic(50, 30, 7, Weighting::type2, 11);
    const auto t3 = generate_synthetic(50, 30, 7, Weighting::type3, 11);
    CHECK(t2.truth.support == a.truth.support);
    for (auto j : a.truth.support) {
        CHECK(t2.truth.weights[j] >= a.truth.weights[j]);
        CHECK(t3.truth.weights[j] <= a.truth.weights[j]);
        CHECK(t2.truth.weights[j] == doctest::Approx(std::pow(a.truth.weights[j], 0.3)));
    }
    // X draws do not depend on the weighting
    for (std::size_t i = 0; i < a.train.n(); ++i) {
        const auto r1 = a.train.row(i), r2 = t2.train.row(i);
        CHECK(std::equal(r1.begin(), r1.end(), r2.begin(), r2.end()));
    }

    const auto test = generate_test_split(50, a.truth, 11);
    CHECK(!(test == a.train));
    CHECK(test == generate_test_split(50, a.truth, 11));
    CHECK_THROWS_AS(generate_synthetic(5, 4, 5, Weighting::type1, 1), UsageError);
    CHECK_THROWS_AS(generate_synthetic(5, 4, 0, Weighting::type1, 1), UsageError);
}

TEST_CASE("ground truth round trip") {
    TempDir dir;
    const auto s = generate_synthetic(10, 20, 4, Weighting::type1, 5);
    write_ground_truth(dir / "truth.txt", s.truth);
    const auto back = load_ground_truth(dir / "truth.txt", 20);
    CHECK(back.support == s.truth.support);
    CHECK(back.weights == s.truth.weights);
}

TEST_CASE("rng is reproducible and streams differ") {
    Rng a(9, 1), b(9, 1), c(9, 2);
    bool differs = false;
    for (int i = 0; i < 20; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs = differs || x != c.next_u64();
    }
    CHECK(differs);
    Rng u(3, 4);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform_open();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        CHECK(u.below(7) < 7);
    }
}
