#include <doctest.h>

#include <fstream>

#include "hrpm/errors.hpp"
#include "hrpm/mlp_io.hpp"
#include "hrpm/pipeline.hpp"
#include "oracles.hpp"

using namespace hrpm;

namespace {

const char* kTiny =
    "assets = 2\n"
    "days = 80\n"
    "steps_per_day = 8\n"
    "volatility = 0.01\n"
    "base_volume = 300\n"
    "period.holding_days = 3\n"
    "high.window = 4\n"
    "low.window = 2\n"
    "low.levels = 3\n"
    "low.q_max = 500\n"
    "low.quantity_levels = 2\n"
    "low.cycles = 1\n"
    "low.hidden = 8\n"
    "low.batch = 8\n"
    "low.heldout_episodes = 2\n"
    "high.episodes = 8\n"
    "high.batch = 4\n"
    "high.hidden = 8\n";

RunConfig tiny(const std::filesystem::path& out, const std::string& extra = "") {
  KeyValueFile kv = KeyValueFile::parse(std::string(kTiny) + extra);
  kv.set("output_dir", out.string());
  return RunConfig::read(kv);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config reader rejects unknown keys and bad values") {
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("nonsense = 1\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("commission = -0.1\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("period.trading_days = 2\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("eval.strategies = HRPM, Nope\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("rng = pcg\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("grid.proportions = 0.5, 1\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::read(KeyValueFile::parse("data.source = csv\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.cfg"), ConfigError);
  CHECK_NOTHROW(RunConfig::read(KeyValueFile{}));
}

TEST_CASE("config hash ignores the output directory and tracks everything else") {
  const RunConfig a = tiny("/tmp/a");
  const RunConfig b = tiny("/tmp/b");
  const RunConfig c = tiny("/tmp/a", "seed = 8\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
  // The canonical form reads back to the same configuration.
  CHECK(RunConfig::read(a.to_kv()).hash() == a.hash());
}

TEST_CASE("day split leaves history and keeps ranges ordered") {
  const RunConfig c = tiny("/tmp/x");
  const DaySplit s = split_days(c, 0, 79);
  CHECK(s.pretrain_first >= 1);
  CHECK(s.train_first + c.holding_days - c.window >= 0);
  CHECK(s.train_last < s.validation_first);
  CHECK(s.validation_last < s.test_first);
  CHECK(s.test_last == 79);
  CHECK_THROWS_AS(split_days(c, 0, 10), ConfigError);
}

TEST_CASE("run directories refuse a different configuration") {
  const auto dir = testkit::scratch_dir("pipe_refuse");
  const RunPaths paths(dir);
  open_run(tiny(dir), paths);
  CHECK(std::filesystem::exists(paths.config()));
  CHECK_NOTHROW(open_run(tiny(dir), paths));
  CHECK_THROWS_AS(open_run(tiny(dir, "seed = 99\n"), paths), ConfigError);
}

TEST_CASE("generated data loads back to the generated market") {
  const auto dir = testkit::scratch_dir("pipe_gen");
  const RunConfig c = tiny(dir);
  const RunPaths paths(dir);
  CHECK_THROWS_AS(load_market(c, paths), DataError);
  CHECK(cmd_gen_data(c, paths).size() == 4);
  const MarketData d = load_market(c, paths);
  SyntheticMarketConfig s = c.synthetic;
  s.seed = derive_seed(c.seed, "data/synthetic");
  const SyntheticMarket m = gen_synthetic_market(s);
  CHECK(d.bars[1].bars == m.bars[1].bars);
  CHECK(d.books[0].snapshots == m.books[0].snapshots);
}

TEST_CASE("training without a complete bank names the missing policies") {
  const auto dir = testkit::scratch_dir("pipe_nobank");
  const RunConfig c = tiny(dir);
  const RunPaths paths(dir);
  cmd_gen_data(c, paths);
  try {
    cmd_train(c, paths, 1);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("S0_buy") != std::string::npos);
  }
  CHECK_THROWS_AS(cmd_backtest(c, paths, "Nope"), ConfigError);
}

TEST_CASE("the full pipeline writes every artifact and repeats exactly") {
  auto run = [](const std::filesystem::path& dir) {
    const RunConfig c = tiny(dir);
    const RunPaths paths(dir);
    open_run(c, paths);
    cmd_gen_data(c, paths);
    cmd_pretrain(c, paths, 1);
    cmd_train(c, paths, 1);
    const auto rows = cmd_backtest(c, paths, "all");
    cmd_report(dir);
    return rows;
  };
  const auto a_dir = testkit::scratch_dir("pipe_full_a");
  const auto b_dir = testkit::scratch_dir("pipe_full_b");
  const auto a = run(a_dir);
  const auto b = run(b_dir);
  CHECK(a.size() == 7);
  CHECK(a == b);
  for (const char* f : {"bank/S0_buy.ckpt", "bank/S1_sell.json", "high.ckpt", "high.json", "logs/pretrain.jsonl",
                        "logs/train_curve.jsonl", "logs/ledger_HRPM.jsonl", "logs/fills_HRPM.jsonl",
                        "reports/HRPM.json", "curves/UCRP.csv", "curves/long.csv", "comparison.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(a_dir / f), f);
  }
  CHECK(slurp(a_dir / "comparison.json") == slurp(b_dir / "comparison.json"));
  const auto report = read_json_file(a_dir / "reports/HRPM.json");
  CHECK(report["execution_mode"] == "simulator");
  CHECK(report["config_hash"] == tiny(a_dir).hash());
}
