#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "fts/collector.hpp"
#include "fts/downstream.hpp"

using namespace fts;

namespace {

Dataset product_dataset(int n = 80) {
    Dataset d;
    d.task = Task::Regression;
    std::mt19937_64 rng(100);
    std::uniform_real_distribution<double> u(-1, 1);
    d.X.assign(3, std::vector<double>(static_cast<size_t>(n)));
    for (int i = 0; i < n; ++i) {
        for (int f = 0; f < 3; ++f) d.X[f][i] = u(rng);
        d.y.push_back(d.X[0][i] * d.X[1][i] + 0.02 * u(rng));
    }
    d.feature_names = {"f0", "f1", "f2"};
    return d;
}

CollectorConfig small_config(bool random_mode, uint64_t seed) {
    CollectorConfig cfg;
    cfg.epochs = 4;
    cfg.steps_per_episode = 3;
    cfg.random_mode = random_mode;
    cfg.seed = seed;
    cfg.eval = default_eval_config(Task::Regression);
    cfg.eval.cv_seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("epsilon anneals from 1.0 to 0.1 over the first half of training") {
    Dataset d = product_dataset();
    CollectorConfig cfg = small_config(false, 1);
    cfg.epochs = 100;
    Collector c(d, cfg);
    CHECK(c.epsilon_for_epoch(0) == doctest::Approx(1.0));
    CHECK(c.epsilon_for_epoch(25) == doctest::Approx(0.55));
    CHECK(c.epsilon_for_epoch(50) == doctest::Approx(0.1));
    CHECK(c.epsilon_for_epoch(99) == doctest::Approx(0.1));

    CollectorConfig rnd = small_config(true, 1);
    rnd.epochs = 100;
    Collector cr(d, rnd);
    CHECK(cr.epsilon_for_epoch(80) == 1.0);  // random mode never exploits
}

TEST_CASE("every record's score is reproducible from its program") {
    Dataset d = product_dataset();
    CollectorConfig cfg = small_config(true, 42);
    auto records = collect(d, cfg);
    REQUIRE(!records.empty());
    CHECK(records.size() <= static_cast<size_t>(cfg.epochs * cfg.steps_per_episode));
    for (const auto& r : records) {
        CHECK(r.provenance == "random");
        auto out = evaluate(r.program, d.X, EvalMode::Guarded);
        auto X = d.X;
        for (auto& col : out.columns) X.push_back(std::move(col));
        CHECK(train_eval(X, d.y, d.task, cfg.eval).value == r.performance);
    }
}

TEST_CASE("collection is deterministic given the seed") {
    Dataset d = product_dataset();
    auto a = collect(d, small_config(true, 9));
    auto b = collect(d, small_config(true, 9));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].program == b[i].program);
        CHECK(a[i].performance == b[i].performance);
    }
    auto c = collect(d, small_config(true, 10));
    bool identical = a.size() == c.size();
    if (identical)
        for (size_t i = 0; i < a.size(); ++i) identical = identical && a[i].program == c[i].program;
    CHECK_FALSE(identical);
}

TEST_CASE("rl mode trains networks and emits rl provenance") {
    Dataset d = product_dataset(60);
    CollectorConfig cfg = small_config(false, 3);
    cfg.epochs = 6;
    auto records = collect(d, cfg);
    REQUIRE(!records.empty());
    for (const auto& r : records) CHECK(r.provenance == "rl");
}

TEST_CASE("step applies operations and rejects malformed actions") {
    Dataset d = product_dataset();
    CollectorConfig cfg = small_config(false, 5);
    Collector c(d, cfg);
    double baseline = c.current_score();

    // unary step: tail stays -1
    Collector::Actions a{0, operation_id("square"), -1};
    auto out = c.step(a);
    CHECK(out.accepted);
    CHECK(c.feature_space().size() == 4);
    CHECK(out.reward == doctest::Approx(out.score - baseline));
    CHECK(c.feature_space().back() !=  d.X[0]);

    // binary without a tail throws
    Collector::Actions bad{0, operation_id("plus"), -1};
    CHECK_THROWS(c.step(bad));

    // a constant result (f0 - f0) is discarded with the penalty reward
    Collector::Actions sub{0, operation_id("subtract"), 0};
    auto rejected = c.step(sub);
    CHECK_FALSE(rejected.accepted);
    CHECK(rejected.reward == doctest::Approx(cfg.penalty));
    CHECK(c.feature_space().size() == 4);
    CHECK(c.current_score() == out.score);
}

TEST_CASE("q-network learns fixed targets and syncs its target copy") {
    QNetwork net(4, 3, 77, 0.01);
    std::vector<double> s0 = {0.1, -0.2, 0.3, 0.4};
    std::vector<double> s1 = {-0.5, 0.2, 0.0, 0.1};
    // discount 0 turns the Bellman target into plain regression on rewards
    std::vector<Transition> batch = {
        {s0, 0, 1.0, s1, 3, false},
        {s0, 1, -1.0, s1, 3, false},
        {s1, 2, 0.5, s0, 3, true},
    };
    double first = net.train_step(batch, 0.0);
    double last = first;
    for (int i = 0; i < 300; ++i) last = net.train_step(batch, 0.0);
    CHECK(last < first * 0.05);
    CHECK(net.values(s0)[0] == doctest::Approx(1.0).epsilon(0.15));
    CHECK(net.values(s0)[1] == doctest::Approx(-1.0).epsilon(0.15));
    CHECK(net.values(s1)[2] == doctest::Approx(0.5).epsilon(0.3));

    // after training, target and online nets disagree until synced
    bool differs = false;
    auto online = net.values(s0);
    auto target = net.target_values(s0);
    for (size_t i = 0; i < online.size(); ++i) differs = differs || online[i] != target[i];
    CHECK(differs);
    net.sync_target();
    CHECK(net.values(s0) == net.target_values(s0));

    CHECK_THROWS(net.values({0.1, 0.2}));
    CHECK_THROWS(net.train_step({}, 0.9));
}

TEST_CASE("select_actions respects arity and the feature-count mask") {
    Dataset d = product_dataset();
    CollectorConfig cfg = small_config(true, 21);
    Collector c(d, cfg);
    std::set<int> heads;
    for (int i = 0; i < 60; ++i) {
        auto a = c.select_actions(1.0);
        CHECK(a.head >= 0);
        CHECK(a.head < static_cast<int>(c.feature_space().size()));
        CHECK(a.op >= 0);
        CHECK(a.op < operation_count());
        if (operation(a.op).arity == 1) {
            CHECK(a.tail == -1);
        } else {
            CHECK(a.tail >= 0);
            CHECK(a.tail < static_cast<int>(c.feature_space().size()));
        }
        heads.insert(a.head);
    }
    CHECK(heads.size() == 3);  // uniform exploration hits every original feature
}
