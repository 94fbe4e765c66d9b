#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "alforge/al_loop.hpp"
#include "alforge/datagen.hpp"

namespace alforge {
namespace {

struct Small {
  ClusterSplit data;
  NetworkConfig net;
  LoopConfig loop;
};

Small small_setup(Strategy s) {
  Small out{gen_cluster_dataset(ClassProfile::kitti_ratios(), 400, 200, 6, 4.0, RngStream(11, 0)), {}, {}};
  out.net = NetworkConfig::desk_preset({6}, 5);
  out.net.fc_widths = {8};
  out.net.epochs = 3;
  out.loop.seed_per_class = 5;
  out.loop.query_batch = 20;
  out.loop.max_steps = 3;
  out.loop.strategy = s;
  out.loop.ensemble_size = 2;
  out.loop.mc_passes = 3;
  return out;
}

TEST(TopK, RankOrderWithLowIdTies) {
  const std::vector<double> scores = {0.5, 0.9, 0.5, 0.1, 0.9};
  const std::vector<std::size_t> ids = {40, 30, 20, 10, 0};
  // 0.9 at ids 30 and 0 -> id 0 (position 4) first; then 0.5 at ids 40, 20 -> 20 first.
  EXPECT_EQ(select_top_k(scores, ids, 4), (std::vector<std::size_t>{4, 1, 2, 0}));
  EXPECT_THROW(select_top_k(scores, ids, 6), ContractError);
  const std::vector<double> nan = {0.1, std::nan("")};
  EXPECT_ANY_THROW(select_top_k(nan, std::vector<std::size_t>{0, 1}, 1));
}

TEST(PoolState, MoveKeepsPartition) {
  PoolState p;
  p.unlabeled = {0, 1, 2, 3, 4};
  const std::vector<std::size_t> take = {3, 1};
  p.move_to_labeled(take);
  EXPECT_EQ(p.labeled, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(p.unlabeled, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_NO_THROW(p.check_partition(5));
  EXPECT_THROW(p.check_partition(6), ContractError);
  const std::vector<std::size_t> again = {1};
  EXPECT_THROW(p.move_to_labeled(again), ContractError);
  const std::vector<std::size_t> dup = {0, 0};
  EXPECT_THROW(p.move_to_labeled(dup), ContractError);
}

TEST(SeedSet, PerClassWithShortfall) {
  const Small s = small_setup(Strategy::Random);
  // Tram has 400 * 0.013 -> 5 samples; ask for 8 per class.
  const PoolState p = init_seed_set(s.data.train, 8, RngStream(1, 0));
  const auto counts = s.data.train.class_counts(p.labeled);
  const auto avail = s.data.train.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    EXPECT_EQ(counts[c], std::min<std::size_t>(8, avail[c]));
    EXPECT_EQ(p.shortfall[c], 8 - counts[c]);
  }
  EXPECT_NO_THROW(p.check_partition(s.data.train.size()));
  const PoolState q = init_seed_set(s.data.train, 8, RngStream(1, 0));
  EXPECT_EQ(p.labeled, q.labeled);
}

TEST(OracleTest, ReturnsStoredTruthAndRefusesLabeled) {
  const Small s = small_setup(Strategy::Random);
  PoolState p = init_seed_set(s.data.train, 2, RngStream(1, 0));
  const Oracle o{&s.data.train};
  const std::vector<std::size_t> pick = {p.unlabeled[0], p.unlabeled[5]};
  const OracleAnswer a = oracle_label(o, p, pick);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a.labels[k], s.data.train.labels[pick[k]]);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a.locations.at(k, j), s.data.train.locations.at(pick[k], j));
  }
  const std::vector<std::size_t> labeled = {p.labeled[0]};
  EXPECT_THROW(oracle_label(o, p, labeled), ContractError);
}

TEST(StopRules, MaxStepsConvergenceTarget) {
  LoopConfig c;
  c.max_steps = 10;
  std::vector<MetricsRecord> h(4);
  for (std::size_t i = 0; i < 4; ++i) {
    h[i].step = i;
    h[i].accuracy = 0.5 + 0.1 * i;
  }
  EXPECT_FALSE(stop_condition(h, c));
  c.max_steps = 3;
  EXPECT_TRUE(stop_condition(h, c));
  c.max_steps = 10;
  c.stop_rule = StopRule::Convergence;
  c.convergence_window = 3;
  c.convergence_epsilon = 1e-3;
  EXPECT_FALSE(stop_condition(h, c));
  for (auto& r : h) r.accuracy = 0.8;
  EXPECT_TRUE(stop_condition(h, c));
  EXPECT_FALSE(stop_condition(std::span(h).first(3), c));  // window not filled
  c.stop_rule = StopRule::Target;
  c.target_accuracy = 0.8;
  EXPECT_TRUE(stop_condition(h, c));
  c.target_accuracy = 0.81;
  EXPECT_FALSE(stop_condition(h, c));
  EXPECT_EQ(parse_stop_rule(stop_rule_name(StopRule::Convergence)), StopRule::Convergence);
}

TEST(LoopConfigTest, KeyValueRoundTripAndValidation) {
  LoopConfig c;
  c.strategy = Strategy::McMi;
  c.query_batch = 17;
  c.convergence_epsilon = 1.0 / 3.0;
  const LoopConfig back = LoopConfig::overlay(LoopConfig{}, c.to_key_values());
  EXPECT_EQ(back.strategy, Strategy::McMi);
  EXPECT_EQ(back.query_batch, 17u);
  EXPECT_EQ(back.convergence_epsilon, c.convergence_epsilon);
  c.query_batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

void expect_loop_invariants(const Small& s, const LoopResult& r) {
  const std::size_t n = s.data.train.size();
  EXPECT_NO_THROW(r.pool.check_partition(n));
  std::set<std::size_t> seen;
  for (const auto& q : r.pool.log) {
    EXPECT_EQ(q.indices.size(), s.loop.query_batch);
    for (std::size_t i : q.indices) EXPECT_TRUE(seen.insert(i).second) << "queried twice: " << i;
  }
  ASSERT_EQ(r.records.size(), r.pool.log.size() + 1);
  for (std::size_t k = 0; k < r.records.size(); ++k) {
    EXPECT_EQ(r.records[k].step, k);
    EXPECT_EQ(r.records[k].labeled_count, r.records[0].labeled_count + k * s.loop.query_batch);
    EXPECT_GE(r.records[k].accuracy, 0.0);
    EXPECT_LE(r.records[k].accuracy, 1.0);
  }
  EXPECT_EQ(r.pool.labeled.size(), r.records.back().labeled_count);
}

TEST(Loop, InvariantsForEveryStrategy) {
  for (Strategy st : {Strategy::Random, Strategy::SoftmaxEntropy, Strategy::McEntropy, Strategy::McMi,
                      Strategy::EnsEntropy, Strategy::EnsMi}) {
    const Small s = small_setup(st);
    const LoopResult r = run_loop(s.data.train, s.data.test, s.loop, s.net, 5);
    SCOPED_TRACE(std::string(strategy_name(st)));
    expect_loop_invariants(s, r);
    EXPECT_EQ(r.records.size(), 4u);
  }
}

TEST(Loop, ReplayIsBitwiseAndParallelMatchesSerial) {
  const Small s = small_setup(Strategy::McMi);
  const LoopResult a = run_loop(s.data.train, s.data.test, s.loop, s.net, 9);
  LoopOptions serial;
  serial.parallel = false;
  const LoopResult b = run_loop(s.data.train, s.data.test, s.loop, s.net, 9, serial);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].accuracy, b.records[k].accuracy);
    EXPECT_EQ(a.records[k].loc_mse, b.records[k].loc_mse);
    EXPECT_EQ(a.records[k].error_sum, b.records[k].error_sum);
  }
  ASSERT_EQ(a.pool.log.size(), b.pool.log.size());
  for (std::size_t k = 0; k < a.pool.log.size(); ++k) EXPECT_EQ(a.pool.log[k].indices, b.pool.log[k].indices);
}

TEST(Loop, StrategiesShareSeedSetAndStepZero) {
  const Small r = small_setup(Strategy::Random), e = small_setup(Strategy::SoftmaxEntropy);
  const LoopResult a = run_loop(r.data.train, r.data.test, r.loop, r.net, 3);
  const LoopResult b = run_loop(e.data.train, e.data.test, e.loop, e.net, 3);
  EXPECT_EQ(a.records[0].accuracy, b.records[0].accuracy);
  EXPECT_EQ(a.records[0].queried_per_class, b.records[0].queried_per_class);
  EXPECT_EQ(a.pool_class_counts, b.pool_class_counts);
}

TEST(Loop, StopsWhenPoolIsExhausted) {
  Small s = small_setup(Strategy::Random);
  s.loop.query_batch = 200;
  s.loop.max_steps = 50;
  const LoopResult r = run_loop(s.data.train, s.data.test, s.loop, s.net, 2);
  EXPECT_TRUE(r.pool.unlabeled.empty());
  EXPECT_EQ(r.pool.labeled.size(), s.data.train.size());
  EXPECT_NO_THROW(r.pool.check_partition(s.data.train.size()));
}

TEST(QueryLogFile, RoundTrip) {
  const std::vector<QueryRecord> log = {{1, Strategy::EnsMi, {5, 3, 9}}, {2, Strategy::EnsMi, {0}}};
  const auto path = (std::filesystem::temp_directory_path() / "alforge_querylog.txt").string();
  write_query_log(path, log);
  const auto back = read_query_log(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].indices, log[0].indices);
  EXPECT_EQ(back[1].step, 2u);
  EXPECT_EQ(back[1].strategy, Strategy::EnsMi);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace alforge
