#include "hrpm/run_config.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/random.hpp"

#include <fmt/format.h>

#include <cmath>

namespace hrpm {

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(v[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      s += v[i];
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

ExecutionMode parse_mode(const std::string& s) {
  if (s == "ideal") return ExecutionMode::Ideal;
  if (s == "simulator") return ExecutionMode::Simulator;
  throw ConfigError("eval.baseline_execution must be 'ideal' or 'simulator'");
}

int as_int(const KeyValueFile& kv, const std::string& key, int fallback) {
  return static_cast<int>(kv.get_int(key, fallback));
}

}  // namespace

RunConfig RunConfig::read(const KeyValueFile& kv) {
  RunConfig c;
  c.seed = kv.get_u64("seed", c.seed);
  c.synthetic.read(kv);
  c.data_source = kv.get_string("data.source", c.data_source);
  c.data_dir = kv.get_string("data.dir", c.data_dir.string());
  c.asset_names = kv.get_strings("data.assets", c.asset_names);

  c.commission = kv.get_double("commission", c.commission);
  c.holding_days = as_int(kv, "period.holding_days", c.holding_days);
  c.trading_days = as_int(kv, "period.trading_days", c.trading_days);
  c.window = as_int(kv, "high.window", c.window);
  c.lob_window = as_int(kv, "low.window", c.lob_window);
  c.levels = as_int(kv, "low.levels", c.levels);
  c.execution_window = as_int(kv, "low.execution_window", c.execution_window);
  c.initial_value = kv.get_double("initial_value", c.initial_value);
  c.train_fraction = kv.get_double("split.train_fraction", c.train_fraction);
  c.validation_fraction = kv.get_double("split.validation_fraction", c.validation_fraction);

  c.grid.price_offsets = kv.get_ints("grid.price_offsets", c.grid.price_offsets);
  c.grid.proportions = kv.get_doubles("grid.proportions", c.grid.proportions);
  c.q_max = kv.get_double("low.q_max", c.q_max);
  c.quantity_levels = as_int(kv, "low.quantity_levels", c.quantity_levels);
  c.episodes_per_cell = as_int(kv, "low.episodes_per_cell", c.episodes_per_cell);
  c.cycles = as_int(kv, "low.cycles", c.cycles);
  c.heldout_episodes = as_int(kv, "low.heldout_episodes", c.heldout_episodes);
  c.shared_policy = kv.get_bool("low.shared_policy", c.shared_policy);
  c.low.gamma = kv.get_double("low.gamma", c.low.gamma);
  c.low.epsilon_start = kv.get_double("low.epsilon_start", c.low.epsilon_start);
  c.low.epsilon_end = kv.get_double("low.epsilon_end", c.low.epsilon_end);
  c.low.epsilon_decay_steps = kv.get_int("low.epsilon_decay_steps", c.low.epsilon_decay_steps);
  c.low.batch = static_cast<std::size_t>(kv.get_int("low.batch", static_cast<std::int64_t>(c.low.batch)));
  c.low.target_sync = kv.get_int("low.target_sync", c.low.target_sync);
  c.low.learning_rate = kv.get_double("low.learning_rate", c.low.learning_rate);
  c.low.capacity = static_cast<std::size_t>(kv.get_int("low.capacity", static_cast<std::int64_t>(c.low.capacity)));
  c.low.reward_scale = kv.get_double("low.reward_scale", c.low.reward_scale);
  c.low.hidden = kv.get_ints("low.hidden", c.low.hidden);

  c.high.gamma = kv.get_double("high.gamma", c.high.gamma);
  c.high.eta = kv.get_double("high.eta", c.high.eta);
  c.high.learning_rate = kv.get_double("high.learning_rate", c.high.learning_rate);
  c.high.kappa = kv.get_double("high.kappa", c.high.kappa);
  c.high.episodes = as_int(kv, "high.episodes", c.high.episodes);
  c.high.batch = as_int(kv, "high.batch", c.high.batch);
  c.high_hidden = kv.get_ints("high.hidden", c.high_hidden);
  c.validate_every = as_int(kv, "high.validate_every", c.validate_every);
  c.horizon = as_int(kv, "high.horizon", c.horizon);

  c.baselines.olmar_epsilon = kv.get_double("eval.olmar_epsilon", c.baselines.olmar_epsilon);
  c.baselines.olmar_window = as_int(kv, "eval.olmar_window", c.baselines.olmar_window);
  c.baselines.wmamr_epsilon = kv.get_double("eval.wmamr_epsilon", c.baselines.wmamr_epsilon);
  c.baselines.wmamr_window = as_int(kv, "eval.wmamr_window", c.baselines.wmamr_window);
  c.baselines.lookback = as_int(kv, "eval.lookback", c.holding_days);
  c.baselines.strict_loser = kv.get_bool("eval.strict_loser", c.baselines.strict_loser);
  c.strategies = kv.get_strings("eval.strategies", c.strategies);
  c.baseline_execution = parse_mode(kv.get_string("eval.baseline_execution", to_string(c.baseline_execution)));
  c.trading_days_per_year = kv.get_double("eval.trading_days_per_year", c.trading_days_per_year);

  c.output_dir = kv.get_string("output_dir", c.output_dir.string());
  kv.reject_unused();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return read(KeyValueFile::load(path)); }

KeyValueFile RunConfig::to_kv() const {
  KeyValueFile kv;
  synthetic.write(kv);
  kv.set("seed", std::to_string(seed));
  kv.set("data.source", data_source);
  kv.set("data.dir", data_dir.string());
  kv.set("data.assets", join(asset_names));
  kv.set("commission", format_double(commission));
  kv.set("period.holding_days", std::to_string(holding_days));
  kv.set("period.trading_days", std::to_string(trading_days));
  kv.set("high.window", std::to_string(window));
  kv.set("low.window", std::to_string(lob_window));
  kv.set("low.levels", std::to_string(levels));
  kv.set("low.execution_window", std::to_string(execution_window));
  kv.set("initial_value", format_double(initial_value));
  kv.set("split.train_fraction", format_double(train_fraction));
  kv.set("split.validation_fraction", format_double(validation_fraction));
  kv.set("grid.price_offsets", join(grid.price_offsets));
  kv.set("grid.proportions", join(grid.proportions));
  kv.set("low.q_max", format_double(q_max));
  kv.set("low.quantity_levels", std::to_string(quantity_levels));
  kv.set("low.episodes_per_cell", std::to_string(episodes_per_cell));
  kv.set("low.cycles", std::to_string(cycles));
  kv.set("low.heldout_episodes", std::to_string(heldout_episodes));
  kv.set("low.shared_policy", shared_policy ? "true" : "false");
  kv.set("low.gamma", format_double(low.gamma));
  kv.set("low.epsilon_start", format_double(low.epsilon_start));
  kv.set("low.epsilon_end", format_double(low.epsilon_end));
  kv.set("low.epsilon_decay_steps", std::to_string(low.epsilon_decay_steps));
  kv.set("low.batch", std::to_string(low.batch));
  kv.set("low.target_sync", std::to_string(low.target_sync));
  kv.set("low.learning_rate", format_double(low.learning_rate));
  kv.set("low.capacity", std::to_string(low.capacity));
  kv.set("low.reward_scale", format_double(low.reward_scale));
  kv.set("low.hidden", join(low.hidden));
  kv.set("high.gamma", format_double(high.gamma));
  kv.set("high.eta", format_double(high.eta));
  kv.set("high.learning_rate", format_double(high.learning_rate));
  kv.set("high.kappa", format_double(high.kappa));
  kv.set("high.episodes", std::to_string(high.episodes));
  kv.set("high.batch", std::to_string(high.batch));
  kv.set("high.hidden", join(high_hidden));
  kv.set("high.validate_every", std::to_string(validate_every));
  kv.set("high.horizon", std::to_string(horizon));
  kv.set("eval.olmar_epsilon", format_double(baselines.olmar_epsilon));
  kv.set("eval.olmar_window", std::to_string(baselines.olmar_window));
  kv.set("eval.wmamr_epsilon", format_double(baselines.wmamr_epsilon));
  kv.set("eval.wmamr_window", std::to_string(baselines.wmamr_window));
  kv.set("eval.lookback", std::to_string(baselines.lookback));
  kv.set("eval.strict_loser", baselines.strict_loser ? "true" : "false");
  kv.set("eval.strategies", join(strategies));
  kv.set("eval.baseline_execution", to_string(baseline_execution));
  kv.set("eval.trading_days_per_year", format_double(trading_days_per_year));
  return kv;
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", fnv1a64(to_kv().serialize())); }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(data_source == "synthetic" || data_source == "csv", "data.source must be 'synthetic' or 'csv'");
  if (data_source == "csv") {
    require(!data_dir.empty(), "data.dir is required for csv data");
    require(!asset_names.empty(), "data.assets is required for csv data");
  }
  require(commission >= 0.0 && commission < 1.0, "commission must lie in [0, 1)");
  require(holding_days >= 1, "period.holding_days must be >= 1");
  require(trading_days == 1, "period.trading_days must be 1");
  require(window >= 1 && lob_window >= 1 && levels >= 1, "windows and levels must be >= 1");
  require(effective_execution_window() >= 1 && effective_execution_window() <= steps_per_day() - 1,
          "low.execution_window must lie in [1, steps_per_day - 1]");
  require(lob_window <= steps_per_day(), "low.window may not exceed steps_per_day");
  require(initial_value > 0.0, "initial_value must be positive");
  require(train_fraction > 0.0 && train_fraction < 1.0, "split.train_fraction must lie in (0, 1)");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "split.validation_fraction must lie in [0, 1)");
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(q_max > 0.0, "low.q_max must be positive");
  require(quantity_levels >= 1 && episodes_per_cell >= 1 && cycles >= 0, "lattice settings must be positive");
  require(heldout_episodes >= 0, "low.heldout_episodes must be >= 0");
  require(low.gamma >= 0.0 && low.gamma <= 1.0, "low.gamma must lie in [0, 1]");
  require(low.epsilon_start >= 0.0 && low.epsilon_start <= 1.0 && low.epsilon_end >= 0.0 && low.epsilon_end <= 1.0,
          "exploration rates must lie in [0, 1]");
  require(low.epsilon_decay_steps >= 1 && low.batch >= 1 && low.target_sync >= 1 && low.capacity >= low.batch,
          "low-level intervals must be >= 1 and capacity >= batch");
  require(low.learning_rate >= 0.0 && high.learning_rate >= 0.0, "learning rates must be >= 0");
  require(high.gamma > 0.0 && high.gamma <= 1.0, "high.gamma must lie in (0, 1]");
  require(high.eta >= 0.0, "high.eta must be >= 0");
  require(high.kappa > 0.0, "high.kappa must be positive");
  require(high.episodes >= 1 && high.batch >= 1 && validate_every >= 1 && horizon >= 0,
          "high-level episode settings must be positive");
  require(baselines.olmar_epsilon > 0.0 && baselines.olmar_window >= 1 && baselines.wmamr_epsilon > 0.0 &&
              baselines.wmamr_window >= 1 && baselines.lookback >= 1,
          "baseline parameters must be positive");
  require(trading_days_per_year > 0.0, "eval.trading_days_per_year must be positive");
  for (const auto& s : strategies) {
    require(s == "HRPM" || parse_baseline(s).has_value(), "unknown strategy '" + s + "'");
  }
}

DaySplit split_days(const RunConfig& c, int first_day, int last_day) {
  DaySplit s;
  const int span = last_day - first_day + 1;
  const int period = c.holding_days + c.trading_days;
  s.pretrain_first = first_day + (c.lob_window + c.steps_per_day() - 1) / c.steps_per_day();
  s.train_first = std::max(first_day + 1, first_day + c.window - c.holding_days);
  const int train_end = first_day + static_cast<int>(std::floor(c.train_fraction * span)) - 1;
  const int validation_days = static_cast<int>(std::floor(c.validation_fraction * (train_end - s.train_first + 1)));
  s.train_last = train_end - validation_days;
  s.validation_first = validation_days > 0 ? s.train_last + 1 : s.train_first;
  s.validation_last = validation_days > 0 ? train_end : s.train_last;
  s.test_first = train_end + 1;
  s.test_last = last_day;
  if (s.train_last - s.train_first + 1 < period) throw ConfigError("training range shorter than one period");
  if (s.validation_last - s.validation_first + 1 < period) throw ConfigError("validation range shorter than one period");
  if (s.test_last - s.test_first + 1 < period) throw ConfigError("test range shorter than one period");
  if (s.pretrain_first > train_end) throw ConfigError("no days left for low-level pretraining");
  return s;
}

PretrainConfig pretrain_config(const RunConfig& c, const MarketData& data, const DaySplit& split, int jobs) {
  PretrainConfig p;
  for (int a = 0; a < data.assets(); ++a) p.assets.push_back(a);
  p.q_max = c.q_max;
  p.t_max = c.effective_execution_window();
  p.quantity_levels = c.quantity_levels;
  p.episodes_per_cell = c.episodes_per_cell;
  p.cycles = c.cycles;
  p.first_day = split.pretrain_first;
  p.last_day = split.validation_last;
  p.heldout_first_day = split.test_first;
  p.heldout_last_day = split.test_last;
  p.heldout_episodes = c.heldout_episodes;
  p.lob_window = c.lob_window;
  p.levels = c.levels;
  p.commission = c.commission;
  p.grid = c.grid;
  p.low = c.low;
  p.shared_policy = c.shared_policy;
  p.seed = derive_seed(c.seed, "pretrain");
  p.jobs = jobs;
  return p;
}

HierarchyConfig hierarchy_config(const RunConfig& c, int first_day, int last_day, ExecutionMode mode) {
  HierarchyConfig h;
  h.holding_days = c.holding_days;
  h.trading_days = c.trading_days;
  h.window = c.window;
  h.lob_window = c.lob_window;
  h.levels = c.levels;
  h.execution_window = c.effective_execution_window();
  h.commission = c.commission;
  h.initial_value = c.initial_value;
  h.q_max = c.q_max;
  h.horizon = 0;
  h.first_day = first_day;
  h.last_day = last_day;
  h.mode = mode;
  return h;
}

TrainHighConfig train_high_config(const RunConfig& c, const DaySplit& split, int jobs) {
  TrainHighConfig t;
  t.hierarchy = hierarchy_config(c, split.train_first, split.train_last, ExecutionMode::Simulator);
  t.hierarchy.horizon = c.horizon;
  t.high = c.high;
  t.hidden = c.high_hidden;
  t.validation_first_day = split.validation_first;
  t.validation_last_day = split.validation_last;
  t.validate_every = c.validate_every;
  t.seed = derive_seed(c.seed, "train");
  t.jobs = jobs;
  return t;
}

}  // namespace hrpm
