// hrpm: generate data, pretrain execution policies, train the portfolio policy,
// backtest and report, all from one flat config file.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>

#include "hrpm/errors.hpp"
#include "hrpm/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kDivergence = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  std::string strategy = "all";
};

hrpm::RunConfig resolve(const Options& o) {
  hrpm::KeyValueFile kv = o.config.empty() ? hrpm::KeyValueFile{} : hrpm::KeyValueFile::load(o.config);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (!o.out.empty()) kv.set("output_dir", o.out);
  return hrpm::RunConfig::read(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical portfolio trading engine"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "flat key = value config file");
    cmd->add_option("--seed", o.seed, "root seed (overrides the config)");
    cmd->add_option("--out", o.out, "run directory (overrides output_dir)");
  };
  auto* gen = app.add_subcommand("gen-data", "write synthetic OHLCV and LOB CSVs");
  common(gen);
  auto* pre = app.add_subcommand("pretrain", "train the low-level policy bank");
  common(pre);
  pre->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* train = app.add_subcommand("train", "train the high-level policy on the frozen bank");
  common(train);
  train->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* back = app.add_subcommand("backtest", "backtest strategies on the test days");
  common(back);
  back->add_option("--strategy", o.strategy, "strategy name or 'all'");
  back->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "merge reports of a run directory");
  report->add_option("--out", o.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (report->parsed()) {
      std::cout << hrpm::cmd_report(o.out);
      return kOk;
    }
    const hrpm::RunConfig config = resolve(o);
    const hrpm::RunPaths paths(config.output_dir);
    hrpm::open_run(config, paths);
    spdlog::info("run {} config hash {}", paths.root.string(), config.hash());
    if (gen->parsed()) {
      for (const auto& p : hrpm::cmd_gen_data(config, paths)) std::cout << p.string() << '\n';
    } else if (pre->parsed()) {
      for (const auto& s : hrpm::cmd_pretrain(config, paths, o.jobs)) {
        std::cout << hrpm::bank_label(s.asset, s.direction) << " episodes " << s.episodes << " held-out cost "
                  << s.heldout_policy_cost << " vs market " << s.heldout_market_cost << (s.flagged ? "  [flagged]" : "")
                  << '\n';
      }
    } else if (train->parsed()) {
      const auto r = hrpm::cmd_train(config, paths, o.jobs);
      std::cout << "best validation return " << r.best_validation << '\n';
    } else if (back->parsed()) {
      std::cout << hrpm::format_table(hrpm::cmd_backtest(config, paths, o.strategy));
    }
    return kOk;
  } catch (const hrpm::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const hrpm::DivergenceError& e) {
    spdlog::error("divergence: {}", e.what());
    return kDivergence;
  } catch (const hrpm::DataError& e) {
    spdlog::error("data: {}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}
