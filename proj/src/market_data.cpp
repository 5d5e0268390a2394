#include "hrpm/market_data.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hrpm {

void validate(const Bar& bar) {
  if (!(bar.open > 0.0 && bar.high > 0.0 && bar.low > 0.0 && bar.close > 0.0)) {
    throw ValidationError("day " + std::to_string(bar.day) + ": prices must be positive");
  }
  if (bar.high < bar.low) {
    throw ValidationError("day " + std::to_string(bar.day) + ": high below low");
  }
  if (bar.low > std::min(bar.open, bar.close) || bar.high < std::max(bar.open, bar.close)) {
    throw ValidationError("day " + std::to_string(bar.day) + ": open/close outside [low, high]");
  }
  if (!(bar.volume >= 0.0)) {
    throw ValidationError("day " + std::to_string(bar.day) + ": negative volume");
  }
}

const Bar& BarSeries::at_day(int day) const {
  if (!covers(day)) {
    throw WindowError(asset + ": day " + std::to_string(day) + " outside series");
  }
  return bars[static_cast<std::size_t>(day - first_day())];
}

BarSeries fill_gaps(BarSeries series) {
  if (series.bars.size() < 2) return series;
  std::vector<Bar> out;
  out.reserve(static_cast<std::size_t>(series.last_day() - series.first_day() + 1));
  for (const Bar& bar : series.bars) {
    while (!out.empty() && out.back().day + 1 < bar.day) {
      const double c = out.back().close;
      out.push_back(Bar{out.back().day + 1, c, c, c, c, 0.0});
    }
    out.push_back(bar);
  }
  series.bars = std::move(out);
  return series;
}

double LobSnapshot::total_volume() const {
  double v = 0.0;
  for (const auto& l : bids) v += l.volume;
  for (const auto& l : asks) v += l.volume;
  return v;
}

void validate(const LobSnapshot& s) {
  const std::string where = "step " + std::to_string(s.step) + ": ";
  if (s.bids.empty() || s.asks.empty()) throw ValidationError(where + "empty book side");
  auto check_side = [&](const std::vector<PriceLevel>& side, bool descending) {
    for (std::size_t i = 0; i < side.size(); ++i) {
      if (!(side[i].price > 0.0)) throw ValidationError(where + "non-positive price");
      const bool volume_ok = s.filled ? side[i].volume >= 0.0 : side[i].volume > 0.0;
      if (!volume_ok) throw ValidationError(where + "invalid level volume");
      if (i > 0) {
        const bool ordered = descending ? side[i].price < side[i - 1].price
                                        : side[i].price > side[i - 1].price;
        if (!ordered) throw ValidationError(where + "levels out of order");
      }
    }
  };
  check_side(s.bids, true);
  check_side(s.asks, false);
  if (!(s.best_bid() < s.best_ask())) throw ValidationError(where + "crossed book");
}

// ---------------------------------------------------------------------------
// Synthetic market

void SyntheticMarketConfig::validate() {
  if (assets < 1) throw ConfigError("synthetic market needs at least one asset");
  if (days < 1) throw ConfigError("synthetic market needs at least one day");
  if (steps_per_day < 2) throw ConfigError("steps_per_day must be >= 2");
  if (depth < 1) throw ConfigError("lob depth must be >= 1");
  if (!(level_spacing > 0.0) || !(tick_size > 0.0)) throw ConfigError("tick grid must be positive");
  if (!(base_volume > 0.0)) throw ConfigError("base_volume must be positive");
  if (!(initial_price > 0.0)) throw ConfigError("initial_price must be positive");
  auto broadcast = [&](std::vector<double>& v, const char* name) {
    if (v.size() == 1) v.assign(static_cast<std::size_t>(assets), v.front());
    if (v.size() != static_cast<std::size_t>(assets)) {
      throw ConfigError(std::string(name) + ": expected 1 or " + std::to_string(assets) + " values");
    }
  };
  broadcast(drift, "drift");
  broadcast(volatility, "volatility");
  for (double s : volatility) {
    if (!(s >= 0.0)) throw ConfigError("volatility must be non-negative");
  }
}

void SyntheticMarketConfig::read(const KeyValueFile& kv) {
  if (kv.get_string("rng", std::string(kRngName)) != kRngName) {
    throw ConfigError("rng: only " + std::string(kRngName) + " is supported");
  }
  assets = static_cast<int>(kv.get_int("assets", assets));
  days = static_cast<int>(kv.get_int("days", days));
  steps_per_day = static_cast<int>(kv.get_int("steps_per_day", steps_per_day));
  seed = kv.get_u64("seed", seed);
  drift = kv.get_doubles("drift", drift);
  volatility = kv.get_doubles("volatility", volatility);
  depth = static_cast<int>(kv.get_int("depth", depth));
  level_spacing = kv.get_double("level_spacing", level_spacing);
  tick_size = kv.get_double("tick_size", tick_size);
  base_volume = kv.get_double("base_volume", base_volume);
  initial_price = kv.get_double("initial_price", initial_price);
  validate();
}

void SyntheticMarketConfig::write(KeyValueFile& kv) const {
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
  };
  kv.set("rng", std::string(kRngName));
  kv.set("assets", std::to_string(assets));
  kv.set("days", std::to_string(days));
  kv.set("steps_per_day", std::to_string(steps_per_day));
  kv.set("seed", std::to_string(seed));
  kv.set("drift", join(drift));
  kv.set("volatility", join(volatility));
  kv.set("depth", std::to_string(depth));
  kv.set("level_spacing", format_double(level_spacing));
  kv.set("tick_size", format_double(tick_size));
  kv.set("base_volume", format_double(base_volume));
  kv.set("initial_price", format_double(initial_price));
}

namespace {

LobSnapshot make_book(int step, double mid, const SyntheticMarketConfig& cfg, Rng& rng) {
  LobSnapshot s;
  s.step = step;
  const double gap = cfg.level_spacing * cfg.tick_size;
  for (int l = 0; l < cfg.depth; ++l) {
    const double offset = (l + 0.5) * gap;
    s.bids.push_back({mid - offset, cfg.base_volume * rng.uniform(0.5, 1.5)});
    s.asks.push_back({mid + offset, cfg.base_volume * rng.uniform(0.5, 1.5)});
  }
  validate(s);
  return s;
}

}  // namespace

SyntheticMarket gen_synthetic_market(SyntheticMarketConfig cfg) {
  cfg.validate();
  SyntheticMarket market;
  const int steps = cfg.steps_per_day;
  for (int a = 0; a < cfg.assets; ++a) {
    Rng rng(derive_seed(cfg.seed, "synthetic/asset/" + std::to_string(a)));
    BarSeries bars{"S" + std::to_string(a), {}};
    LobSeries books{bars.asset, {}};
    bars.bars.reserve(static_cast<std::size_t>(cfg.days));
    books.snapshots.reserve(static_cast<std::size_t>(cfg.days) * static_cast<std::size_t>(steps));
    const double sigma = cfg.volatility[static_cast<std::size_t>(a)];
    const double mu = cfg.drift[static_cast<std::size_t>(a)];
    const double step_sigma = sigma / std::sqrt(static_cast<double>(steps - 1));

    double open = cfg.initial_price;
    std::vector<double> walk(static_cast<std::size_t>(steps));
    for (int d = 0; d < cfg.days; ++d) {
      const double log_return = mu + sigma * rng.normal();
      const double close = open * std::exp(log_return);

      // Brownian bridge pinned at open (step 0) and close (last step).
      walk[0] = 0.0;
      for (int j = 1; j < steps; ++j) walk[j] = walk[j - 1] + step_sigma * rng.normal();
      double high = std::max(open, close);
      double low = std::min(open, close);
      double volume = 0.0;
      for (int j = 0; j < steps; ++j) {
        const double frac = static_cast<double>(j) / (steps - 1);
        double mid;
        if (j == 0) {
          mid = open;
        } else if (j == steps - 1) {
          mid = close;
        } else {
          const double bridge = walk[j] - frac * walk[steps - 1];
          mid = open * std::exp(frac * log_return + bridge);
        }
        high = std::max(high, mid);
        low = std::min(low, mid);
        LobSnapshot book = make_book(d * steps + j, mid, cfg, rng);
        volume += 0.5 * (book.bids.front().volume + book.asks.front().volume);
        books.snapshots.push_back(std::move(book));
      }
      bars.bars.push_back(Bar{d, open, high, low, close, volume});
      open = close;
    }
    market.bars.push_back(std::move(bars));
    market.books.push_back(std::move(books));
  }
  return market;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError("not a number: `" + text + "`", line);
  }
  return x;
}

int parse_index(const std::string& text, std::size_t line) {
  int x = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || x < 0) {
    throw ParseError("not a non-negative integer: `" + text + "`", line);
  }
  return x;
}

/// Reads the file, checks the header, and returns (line number, fields) rows.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(
    const std::filesystem::path& path, const std::string& header, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!have_header) {
      if (line != header) throw ParseError("expected header `" + header + "`", line_no);
      have_header = true;
      continue;
    }
    auto fields = split_csv_row(line);
    if (fields.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " fields", line_no);
    }
    rows.emplace_back(line_no, std::move(fields));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty input");
  return rows;
}

}  // namespace

BarSeries load_ohlcv(const std::filesystem::path& path, const std::string& asset) {
  BarSeries series{asset, {}};
  for (const auto& [line, f] : read_csv(path, "day,open,high,low,close,volume", 6)) {
    Bar bar{parse_index(f[0], line), parse_number(f[1], line), parse_number(f[2], line),
            parse_number(f[3], line), parse_number(f[4], line), parse_number(f[5], line)};
    try {
      validate(bar);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + " line " + std::to_string(line) + ": " + e.what());
    }
    series.bars.push_back(bar);
  }
  std::stable_sort(series.bars.begin(), series.bars.end(),
                   [](const Bar& a, const Bar& b) { return a.day < b.day; });
  for (std::size_t i = 1; i < series.bars.size(); ++i) {
    if (series.bars[i].day == series.bars[i - 1].day) {
      throw ValidationError(path.string() + ": duplicate day " + std::to_string(series.bars[i].day));
    }
  }
  return fill_gaps(std::move(series));
}

LobSeries load_lob(const std::filesystem::path& path, const std::string& asset) {
  std::map<int, LobSnapshot> by_step;
  std::map<int, std::size_t> first_line;
  for (const auto& [line, f] : read_csv(path, "step,side,level,price,volume", 5)) {
    const int step = parse_index(f[0], line);
    if (f[1] != "B" && f[1] != "A") throw ParseError("side must be B or A", line);
    const auto level = static_cast<std::size_t>(parse_index(f[2], line));
    PriceLevel pl{parse_number(f[3], line), parse_number(f[4], line)};
    LobSnapshot& snap = by_step[step];
    snap.step = step;
    first_line.emplace(step, line);
    auto& side = f[1] == "B" ? snap.bids : snap.asks;
    if (level != side.size()) throw ParseError("levels must be listed in order from 0", line);
    side.push_back(pl);
  }
  LobSeries series{asset, {}};
  for (auto& [step, snap] : by_step) {
    try {
      validate(snap);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + " line " + std::to_string(first_line[step]) + ": " +
                            e.what());
    }
    while (!series.snapshots.empty() && series.snapshots.back().step + 1 < step) {
      LobSnapshot carry = series.snapshots.back();
      carry.step += 1;
      carry.filled = true;
      for (auto& l : carry.bids) l.volume = 0.0;
      for (auto& l : carry.asks) l.volume = 0.0;
      series.snapshots.push_back(std::move(carry));
    }
    series.snapshots.push_back(std::move(snap));
  }
  return series;
}

void write_ohlcv(const std::filesystem::path& path, const BarSeries& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "day,open,high,low,close,volume\n";
  for (const Bar& b : series.bars) {
    out << b.day << ',' << format_double(b.open) << ',' << format_double(b.high) << ','
        << format_double(b.low) << ',' << format_double(b.close) << ',' << format_double(b.volume)
        << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_lob(const std::filesystem::path& path, const LobSeries& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "step,side,level,price,volume\n";
  for (const LobSnapshot& s : series.snapshots) {
    if (s.filled) continue;
    for (std::size_t l = 0; l < s.bids.size(); ++l) {
      out << s.step << ",B," << l << ',' << format_double(s.bids[l].price) << ','
          << format_double(s.bids[l].volume) << '\n';
    }
    for (std::size_t l = 0; l < s.asks.size(); ++l) {
      out << s.step << ",A," << l << ',' << format_double(s.asks[l].price) << ','
          << format_double(s.asks[l].volume) << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Windows

FeatureWindow make_feature_window(std::span<const BarSeries> series, int end_day, int k) {
  if (k < 1) throw WindowError("feature window length must be >= 1");
  FeatureWindow w;
  w.assets = static_cast<int>(series.size());
  w.days = k;
  w.values.resize(static_cast<Eigen::Index>(w.assets) * k * FeatureWindow::kFeatures);
  const int start = end_day - k + 1;
  for (int a = 0; a < w.assets; ++a) {
    const BarSeries& s = series[static_cast<std::size_t>(a)];
    if (!s.covers(start) || !s.covers(end_day)) {
      throw WindowError(s.asset + ": insufficient history for window ending at day " +
                        std::to_string(end_day));
    }
    const Bar& anchor = s.at_day(start);
    const double price_div = anchor.close;
    const double volume_div = anchor.volume > 0.0 ? anchor.volume : 1.0;
    for (int d = 0; d < k; ++d) {
      const Bar& b = s.at_day(start + d);
      const Eigen::Index base = (static_cast<Eigen::Index>(a) * k + d) * FeatureWindow::kFeatures;
      w.values(base + 0) = b.open / price_div;
      w.values(base + 1) = b.high / price_div;
      w.values(base + 2) = b.low / price_div;
      w.values(base + 3) = b.close / price_div;
      w.values(base + 4) = b.volume / volume_div;
    }
  }
  return w;
}

LobWindow make_lob_window(std::span<const LobSnapshot> snapshots, int end_step, int k, int levels) {
  if (k < 1 || levels < 1) throw WindowError("lob window needs k >= 1 and levels >= 1");
  if (end_step < k || static_cast<std::size_t>(end_step) > snapshots.size()) {
    throw WindowError("insufficient lob history for window ending at step " +
                      std::to_string(end_step));
  }
  LobWindow w;
  w.steps = k;
  w.levels = levels;
  w.values.setZero(static_cast<Eigen::Index>(k) * levels * 4);
  const LobSnapshot& first = snapshots[static_cast<std::size_t>(end_step - k)];
  const double price_div = first.mid();
  const double total = first.total_volume();
  const double volume_div = total > 0.0 ? total : 1.0;
  for (int s = 0; s < k; ++s) {
    const LobSnapshot& snap = snapshots[static_cast<std::size_t>(end_step - k + s)];
    for (int side = 0; side < 2; ++side) {
      const auto& book = side == 0 ? snap.bids : snap.asks;
      for (int l = 0; l < levels; ++l) {
        const Eigen::Index base = ((static_cast<Eigen::Index>(s) * levels + l) * 2 + side) * 2;
        const std::size_t idx = std::min(static_cast<std::size_t>(l), book.size() - 1);
        w.values(base) = book[idx].price / price_div;
        w.values(base + 1) = static_cast<std::size_t>(l) < book.size() ? book[idx].volume / volume_div
                                                                        : 0.0;
      }
    }
  }
  return w;
}

}  // namespace hrpm
