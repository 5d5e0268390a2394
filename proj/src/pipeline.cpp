#include "hrpm/pipeline.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/mlp_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <memory>

namespace hrpm {

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> universe(const RunConfig& config) {
  if (config.data_source == "csv") return config.asset_names;
  std::vector<std::string> names;
  for (int a = 0; a < config.synthetic.assets; ++a) names.push_back("S" + std::to_string(a));
  return names;
}

}  // namespace

void open_run(const RunConfig& config, const RunPaths& paths) {
  std::filesystem::create_directories(paths.root);
  const std::string hash = config.hash();
  if (std::filesystem::exists(paths.manifest())) {
    const nlohmann::json m = read_json_file(paths.manifest());
    const std::string recorded = m.value("config_hash", "");
    if (recorded != hash) {
      throw ConfigError("run directory " + paths.root.string() + " was created with config hash " + recorded +
                        ", current config hashes to " + hash);
    }
    return;
  }
  std::ofstream cfg(paths.config(), std::ios::binary);
  cfg << config.to_kv().serialize();
  write_json_file({{"config_hash", hash}, {"format", "hrpm.run"}, {"version", 1}}, paths.manifest());
}

MarketData load_market(const RunConfig& config, const RunPaths& paths) {
  const std::filesystem::path dir = config.data_source == "csv" ? config.data_dir : paths.data();
  MarketData data;
  data.steps_per_day = config.steps_per_day();
  data.tick = config.tick();
  for (const auto& name : universe(config)) {
    const auto ohlcv = dir / (name + "_ohlcv.csv");
    const auto lob = dir / (name + "_lob.csv");
    if (!std::filesystem::exists(ohlcv) || !std::filesystem::exists(lob)) {
      throw DataError("missing data for " + name + " under " + dir.string() +
                      (config.data_source == "synthetic" ? " (run gen-data first)" : ""));
    }
    data.bars.push_back(load_ohlcv(ohlcv, name));
    data.books.push_back(load_lob(lob, name));
  }
  data.validate();
  return data;
}

std::vector<std::filesystem::path> cmd_gen_data(const RunConfig& config, const RunPaths& paths) {
  if (config.data_source != "synthetic") throw ConfigError("gen-data needs data.source = synthetic");
  SyntheticMarketConfig synth = config.synthetic;
  synth.seed = derive_seed(config.seed, "data/synthetic");
  const SyntheticMarket market = gen_synthetic_market(synth);
  std::filesystem::create_directories(paths.data());
  std::vector<std::filesystem::path> written;
  for (std::size_t a = 0; a < market.bars.size(); ++a) {
    const auto ohlcv = paths.data() / (market.bars[a].asset + "_ohlcv.csv");
    const auto lob = paths.data() / (market.books[a].asset + "_lob.csv");
    write_ohlcv(ohlcv, market.bars[a]);
    write_lob(lob, market.books[a]);
    written.push_back(ohlcv);
    written.push_back(lob);
  }
  return written;
}

std::vector<PretrainStats> cmd_pretrain(const RunConfig& config, const RunPaths& paths, int jobs) {
  const MarketData data = load_market(config, paths);
  const DaySplit split = split_days(config, data.first_day(), data.last_day());
  const PretrainResult result = pretrain_low(pretrain_config(config, data, split, jobs), data);
  result.bank.save(paths.bank(), config.lob_window, config.levels);
  std::vector<std::string> lines;
  for (const auto& s : result.stats) {
    nlohmann::json j{{"asset", s.asset},
                     {"direction", to_string(s.direction)},
                     {"episodes", s.episodes},
                     {"steps", s.steps},
                     {"heldout_policy_cost", s.heldout_policy_cost},
                     {"heldout_market_cost", s.heldout_market_cost},
                     {"flagged", s.flagged},
                     {"config_hash", config.hash()}};
    lines.push_back(j.dump());
  }
  write_lines(paths.logs() / "pretrain.jsonl", lines);
  return result.stats;
}

namespace {

PolicyBank load_complete_bank(const RunConfig& config, const RunPaths& paths, const MarketData& data) {
  PolicyBank bank = PolicyBank::load(paths.bank(), data.names());
  const auto missing = bank.missing(data.names());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("policy bank incomplete, missing: " + list);
  }
  for (const auto& name : data.names()) {
    for (Direction d : {Direction::Buy, Direction::Sell}) {
      const BdqPolicy* p = bank.learned(name, d);
      if (p && (p->normalization().q_max != config.q_max || std::abs(p->tick() - data.tick) > 1e-12)) {
        throw ConfigError("banked policy " + bank_label(name, d) + " was trained under different settings");
      }
    }
  }
  return bank;
}

}  // namespace

TrainHighResult cmd_train(const RunConfig& config, const RunPaths& paths, int jobs) {
  const MarketData data = load_market(config, paths);
  const DaySplit split = split_days(config, data.first_day(), data.last_day());
  const PolicyBank bank = load_complete_bank(config, paths, data);
  const TrainHighResult result = train_high(train_high_config(config, split, jobs), bank, data);
  save_checkpoint(result.best, paths.high());
  nlohmann::json side = high_sidecar(data.assets(), config.window, config.high);
  side["hidden"] = config.high_hidden;
  side["best_validation_return"] = result.best_validation;
  side["config_hash"] = config.hash();
  write_json_file(side, paths.high_sidecar());
  std::vector<std::string> lines;
  for (const auto& p : result.curve) {
    nlohmann::json j{{"update", p.update}, {"mean_return", p.mean_return}, {"mean_entropy", p.mean_entropy}};
    j["validation_return"] = p.validation_return ? nlohmann::json(*p.validation_return) : nlohmann::json(nullptr);
    lines.push_back(j.dump());
  }
  write_lines(paths.logs() / "train_curve.jsonl", lines);
  return result;
}

std::vector<ReportRow> cmd_backtest(const RunConfig& config, const RunPaths& paths, const std::string& strategy) {
  const MarketData data = load_market(config, paths);
  const DaySplit split = split_days(config, data.first_day(), data.last_day());

  std::vector<std::string> names;
  if (strategy == "all") {
    names = config.strategies;
    names.push_back("index-proxy");
  } else {
    if (strategy != "HRPM" && strategy != "index-proxy" && !parse_baseline(strategy)) {
      throw ConfigError("unknown strategy '" + strategy + "'");
    }
    names.push_back(strategy);
  }

  const bool needs_bank = std::any_of(names.begin(), names.end(), [&](const std::string& n) {
    return n == "HRPM" || config.baseline_execution == ExecutionMode::Simulator;
  });
  PolicyBank bank;
  if (needs_bank) bank = load_complete_bank(config, paths, data);

  std::unique_ptr<Mlp> high;
  if (std::find(names.begin(), names.end(), "HRPM") != names.end()) {
    if (!std::filesystem::exists(paths.high())) throw DataError("no high-level checkpoint; run train first");
    high = std::make_unique<Mlp>(load_checkpoint(paths.high()));
    if (high->input_size() != high_input_size(data.assets(), config.window) || high->output_size() != data.assets() + 1) {
      throw DataError("high-level checkpoint does not match the asset universe or window");
    }
  }

  std::vector<BacktestResult> results;
  for (const auto& name : names) {
    std::unique_ptr<HighDecider> decider;
    ExecutionMode mode = config.baseline_execution;
    if (name == "HRPM") {
      decider = std::make_unique<PolicyDecider>(*high, config.high.kappa, config.window, true);
      mode = ExecutionMode::Simulator;
    } else if (name == "index-proxy") {
      decider = std::make_unique<IndexProxyDecider>();
    } else {
      decider = std::make_unique<BaselineDecider>(*parse_baseline(name), config.baselines);
    }
    const HierarchyConfig h = hierarchy_config(config, split.test_first, split.test_last, mode);
    BacktestResult r = run_backtest(name, *decider, mode == ExecutionMode::Simulator ? &bank : nullptr, data, h,
                                    derive_seed(config.seed, "backtest"));
    r.curve.trading_days_per_year = config.trading_days_per_year;
    write_lines(paths.logs() / ("ledger_" + name + ".jsonl"), r.episode.ledger);
    write_lines(paths.logs() / ("fills_" + name + ".jsonl"), r.episode.fills);
    write_curve_csv(paths.curves() / (name + ".csv"), r.curve);
    results.push_back(std::move(r));
  }
  const std::vector<ReportRow> rows = comparison_table(results, config.hash());
  for (const auto& row : rows) write_json_file(to_json(row), paths.reports() / (row.strategy + ".json"));
  if (strategy == "all") write_long_csv(paths.curves() / "long.csv", results);
  return rows;
}

std::string cmd_report(const std::filesystem::path& run_dir) {
  const RunPaths paths(run_dir);
  std::vector<ReportRow> rows;
  if (std::filesystem::is_directory(paths.reports())) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(paths.reports())) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) rows.push_back(report_row_from_json(read_json_file(f)));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.metrics.arr > b.metrics.arr; });
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : rows) table.push_back(to_json(r));
  write_json_file(table, run_dir / "comparison.json");
  return format_table(rows);
}

}  // namespace hrpm
