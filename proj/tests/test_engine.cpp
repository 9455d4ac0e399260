#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fgm/engine.hpp"
#include "fgm/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fgm;

namespace {

SolverConfig plain(std::size_t B, double C, std::size_t max_outer = 15) {
    SolverConfig c;
    // the bound sequences are monotone up to the accuracy of the inner solves
    c.eps_apg = 1e-9;
    c.max_inner = 20000;
    c.budget = B;
    c.C = C;
    c.max_outer = max_outer;
    return c;
}

void check_bounds(const Model& m) {
    for (std::size_t t = 0; t < m.trace.size(); ++t) {
        const auto& r = m.trace[t];
        CHECK(r.beta <= r.phi + 1e-6 * std::abs(r.phi));
        if (t > 0) {
            const auto& p = m.trace[t - 1];
            CHECK(r.beta >= p.beta - 1e-6 * std::abs(p.beta));
            CHECK(r.phi <= p.phi + 1e-6 * std::abs(p.phi));
            CHECK(r.objective <= p.objective + 1e-8 * std::abs(p.objective));
        }
    }
}

}  // namespace

TEST_CASE("config validation") {
    auto c = plain(0, 1.0);
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = plain(1, 0.0);
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = plain(1, 1.0, 0);
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = plain(1, 1.0);
    c.eps_apg = 0.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    CHECK(parse_mode(to_string(Mode::tree)) == Mode::tree);
    CHECK_THROWS_AS(parse_mode("graph"), UsageError);
}

TEST_CASE("one informative feature is found first") {
    Rng rng(5, 1);
    DatasetBuilder b;
    for (int i = 0; i < 80; ++i) {
        std::vector<Entry> row;
        for (index_t j = 0; j < 10; ++j) row.push_back({j, 0.1 * rng.normal()});
        double lead = rng.normal();
        if (std::abs(lead) < 0.3) lead = lead < 0 ? -0.3 : 0.3;
        row[3].value = lead;
        b.add_row(lead > 0 ? 1.0 : -1.0, std::move(row));
    }
    const auto d = std::move(b).build(10);
    const auto m = fgm_train(d, plain(1, 0.1));
    REQUIRE(!m.trace.empty());
    CHECK(m.trace[0].selected == std::vector<unit_id>{3});
    CHECK(m.support_units == std::vector<unit_id>{3});
    CHECK(m.stop == StopReason::duplicate_constraint);
    CHECK(predict(m, d).accuracy.value() == 1.0);
}

TEST_CASE("single outer iteration selects exactly B units") {
    const auto s = generate_synthetic(60, 40, 5, Weighting::type1, 2);
    const auto m = fgm_train(s.train, plain(4, 10.0, 1));
    CHECK(m.trace.size() == 1);
    CHECK(m.constraints.size() == 1);
    CHECK(m.support_units.size() == 4);
    CHECK(m.entries.size() == 4);
    CHECK(m.stop == StopReason::max_outer);
}

TEST_CASE("training run properties") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
        for (auto loss : {LossType::squared_hinge, LossType::logistic}) {
            const auto s = generate_synthetic(120, 200, 10, Weighting::type1, seed);
            auto cfg = plain(5, 10.0, 8);
            cfg.loss = loss;
            cfg.scaling = seed == 2 ? ScalingPolicy::inverse_norm : ScalingPolicy::ones;
            FgmTrainer trainer(s.train, cfg);
            const auto m = trainer.run();
            const std::size_t T = m.trace.size();
            REQUIRE(T >= 1);
            CHECK(m.support_units.size() >= cfg.budget);
            CHECK(m.support_units.size() <= T * cfg.budget);
            check_bounds(m);

            // cache columns equal a fresh extraction, bit for bit
            const auto& active = trainer.active_set();
            CHECK(active.size() == T);
            const auto lam = compute_scaling_prior(s.train, cfg.scaling);
            for (std::size_t t = 0; t < active.size(); ++t) {
                const auto& blk = active.block(t);
                CHECK(blk.constraint.ids == m.trace[t].selected);
                for (std::size_t c = 0; c < blk.cols(); ++c) {
                    const auto j = static_cast<index_t>(blk.sources[c].feature);
                    CHECK(blk.sources[c].scale == lam.lambda[j]);
                    const auto col = blk.column(c, s.train.n());
                    bool same = true;
                    for (std::size_t i = 0; i < s.train.n(); ++i) same = same && col[i] == s.train.at(i, j) * lam.lambda[j];
                    CHECK(same);
                }
            }
            // no duplicate id sets in the active set
            std::set<std::vector<unit_id>> seen(m.constraints.begin(), m.constraints.end());
            CHECK(seen.size() == m.constraints.size());

            // beta of the last record is the max constraint value under the final duals
            const auto kind = cfg.loss_kind();
            double best = -INFINITY;
            for (std::size_t t = 0; t < T; ++t)
                best = std::max(best, constraint_value(trainer.alpha(), active, t, s.train.labels(), kind));
            CHECK(m.trace.back().beta == doctest::Approx(best).epsilon(1e-12));

            // kernel weights form a distribution
            double mu = 0.0;
            for (double v : m.kernel_weights) {
                CHECK(v >= 0.0);
                mu += v;
            }
            CHECK(mu == doctest::Approx(1.0));

            // aggregated weights sum the block weights feature by feature
            std::map<std::uint64_t, double> agg;
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < active.block(t).cols(); ++c)
                    agg[active.block(t).sources[c].feature] += trainer.weights()[t][c];
            REQUIRE(agg.size() == m.entries.size());
            for (const auto& e : m.entries) CHECK(e.weight == doctest::Approx(agg[e.feature]).epsilon(1e-14));
        }
}

TEST_CASE("duplicate stop is confirmed by a further worst-case analysis") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto d = test::separable_dataset(200, 50, 5, 0.5, seed);
        auto cfg = plain(5, 0.01, 15);
        FgmTrainer trainer(d, cfg);
        const auto m = trainer.run();
        CHECK(m.stop == StopReason::duplicate_constraint);
        const auto again = trainer.space().generate(trainer.alpha(), cfg.budget);
        CHECK(trainer.active_set().contains(again));
        CHECK(predict(m, d).accuracy.value() >= 0.95);
    }
}

TEST_CASE("bounds on the first constraint and at zero duals") {
    const auto s = generate_synthetic(30, 20, 3, Weighting::type1, 4);
    FgmTrainer trainer(s.train, plain(3, 1.0, 1));
    trainer.run();
    const auto& active = trainer.active_set();
    const LossKind kind{LossType::squared_hinge, 1.0};
    const auto b = eval_bounds(trainer.alpha(), active, s.train.labels(), kind, nullptr);
    CHECK(b.beta == doctest::Approx(constraint_value(trainer.alpha(), active, 0, s.train.labels(), kind)));
    const std::vector<double> zero(30, 0.0);
    CHECK(eval_bounds(zero, active, s.train.labels(), kind, nullptr).beta == 0.0);

    // the candidate from a generated constraint uses its recorded scores
    const auto d = trainer.space().generate(trainer.alpha(), 3);
    const auto with = eval_bounds(trainer.alpha(), active, s.train.labels(), kind, &d);
    CHECK(with.phi_candidate == doctest::Approx(0.5 * d.score_sum() + conjugate_term(trainer.alpha(), kind)));
    CHECK(with.phi_candidate >= with.beta - 1e-9 * std::abs(with.beta));
}

TEST_CASE("prediction") {
    const auto empty = make_plain_model(4, {});
    const auto d = test::random_dataset(10, 4, 3);
    for (double l : predict(empty, d).labels) CHECK(l == 1.0);

    const std::vector<double> lam{1.0, 1.0, -2.0, 1.0};
    const auto single = make_plain_model(4, {{2, 1.0}}, lam);
    const auto p = predict(single, d);
    std::size_t right = 0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double s = d.at(i, 2) * -2.0;
        CHECK(p.labels[i] == (s >= 0.0 ? 1.0 : -1.0));
        right += p.labels[i] == d.label(i);
    }
    CHECK(*p.accuracy == doctest::Approx(double(right) / d.n()));

    CHECK_THROWS_AS(predict(make_plain_model(3, {}), d), ContractError);
    CHECK(predict(make_plain_model(9, {}), d).labels.size() == 10);
}

TEST_CASE("recovery count") {
    GroundTruth truth;
    truth.weights.assign(10, 0.0);
    for (index_t j : {1, 4, 7}) {
        truth.weights[j] = 0.5;
        truth.support.push_back(j);
    }
    CHECK(evaluate_recovery(make_plain_model(10, {{0, 1.0}, {2, 1.0}}), truth) == 0);
    CHECK(evaluate_recovery(make_plain_model(10, {{1, 1.0}, {7, 1.0}}), truth) == 2);

    const auto s = generate_synthetic(80, 60, 8, Weighting::type1, 9);
    const auto m = fgm_train(s.train, plain(4, 10.0, 4));
    std::set<std::uint64_t> a(m.support_units.begin(), m.support_units.end());
    std::size_t both = 0;
    for (auto j : s.truth.support) both += a.count(j);
    CHECK(evaluate_recovery(m, s.truth) == both);
}

TEST_CASE("group mode") {
    const auto s = generate_synthetic(100, 30, 6, Weighting::type1, 3);
    GroupStructure g;
    for (index_t k = 0; k < 10; ++k) {
        g.names.push_back("g" + std::to_string(k));
        g.groups.push_back({index_t(3 * k), index_t(3 * k + 1), index_t(3 * k + 2)});
        g.lambda.push_back(std::nullopt);
    }
    auto cfg = plain(2, 10.0, 5);
    cfg.mode = Mode::group;
    TrainStructure st;
    st.groups = g;
    FgmTrainer trainer(s.train, cfg, st);
    const auto m = trainer.run();
    CHECK(m.support_units.size() >= 2);
    CHECK(m.support_units.size() <= 2 * m.trace.size());
    for (const auto& e : m.entries) {
        const auto grp = e.feature / 3;
        CHECK(std::binary_search(m.support_units.begin(), m.support_units.end(), grp));
    }
    CHECK(m.support_features().size() == 3 * m.support_units.size());
    check_bounds(m);

    // singleton groups behave like plain features
    GroupStructure singles;
    for (index_t j = 0; j < 30; ++j) {
        singles.names.push_back("s" + std::to_string(j));
        singles.groups.push_back({j});
        singles.lambda.push_back(std::nullopt);
    }
    TrainStructure st1;
    st1.groups = singles;
    auto gc = plain(3, 10.0, 3);
    gc.mode = Mode::group;
    const auto a = fgm_train(s.train, gc, st1);
    const auto b = fgm_train(s.train, plain(3, 10.0, 3));
    CHECK(a.constraints == b.constraints);

    CHECK_THROWS_AS(fgm_train(s.train, gc), UsageError);
}

TEST_CASE("tree mode") {
    const auto s = generate_synthetic(100, 40, 6, Weighting::type1, 5);
    TrainStructure st;
    st.tree = test::random_tree(40, 60, 5);
    auto cfg = plain(3, 10.0, 4);
    cfg.mode = Mode::tree;
    FgmTrainer trainer(s.train, cfg, st);
    const auto m = trainer.run();
    CHECK(m.support_units.size() >= 3);
    CHECK(m.support_units.size() <= 3 * m.trace.size());
    check_bounds(m);
    // features of nested nodes are counted once in the entries
    std::set<std::uint64_t> feats;
    for (const auto& e : m.entries) CHECK(feats.insert(e.feature).second);
}

TEST_CASE("polynomial mode picks the interaction") {
    Rng rng(4, 2);
    DatasetBuilder b;
    for (int i = 0; i < 150; ++i) {
        std::vector<Entry> row;
        for (index_t j = 0; j < 6; ++j) row.push_back({j, rng.normal()});
        const double label = row[0].value * row[1].value >= 0 ? 1.0 : -1.0;
        b.add_row(label, std::move(row));
    }
    const auto d = std::move(b).build(6);
    auto cfg = plain(1, 1.0, 3);
    cfg.mode = Mode::polynomial;
    cfg.poly = {1.0, 1.0};
    cfg.poly_block = 2;
    const auto m = fgm_train(d, cfg);
    const auto cross = to_flat({VirtualFeatureId::Kind::cross, 0, 1}, 6);
    CHECK(m.trace[0].selected == std::vector<unit_id>{cross});
    CHECK(predict(m, d).accuracy.value() >= 0.95);
    CHECK_THROWS_AS(evaluate_recovery(m, GroundTruth{}), UsageError);
}
