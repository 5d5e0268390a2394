#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hrpm/kv_file.hpp"

namespace hrpm {

/// One trading day of OHLCV data.
struct Bar {
  int day = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

/// Throws ValidationError when the bar breaks the OHLC ordering or has a non-positive price.
void validate(const Bar& bar);

/// Daily bars of one asset with contiguous, strictly increasing days.
struct BarSeries {
  std::string asset;
  std::vector<Bar> bars;

  int first_day() const { return bars.empty() ? 0 : bars.front().day; }
  int last_day() const { return bars.empty() ? -1 : bars.back().day; }
  bool covers(int day) const { return !bars.empty() && day >= first_day() && day <= last_day(); }
  const Bar& at_day(int day) const;
};

/// Fills missing days with the previous close and zero volume. Input must be sorted.
BarSeries fill_gaps(BarSeries series);

struct PriceLevel {
  double price = 0.0;
  double volume = 0.0;

  friend bool operator==(const PriceLevel&, const PriceLevel&) = default;
};

/// Book snapshot at one intra-day step; levels are ordered best first.
struct LobSnapshot {
  int step = 0;
  std::vector<PriceLevel> bids;
  std::vector<PriceLevel> asks;
  /// Carried forward over a missing step; volumes are zero.
  bool filled = false;

  double best_bid() const { return bids.front().price; }
  double best_ask() const { return asks.front().price; }
  double mid() const { return 0.5 * (best_bid() + best_ask()); }
  double total_volume() const;

  friend bool operator==(const LobSnapshot&, const LobSnapshot&) = default;
};

/// Throws ValidationError unless prices are ordered and uncrossed and volumes positive.
void validate(const LobSnapshot& snapshot);

/// Snapshots of one asset indexed by a global step (day * steps_per_day + intra-day step).
struct LobSeries {
  std::string asset;
  std::vector<LobSnapshot> snapshots;
};

/// High-level market state: (asset, day, feature) with features open, high, low, close, volume.
struct FeatureWindow {
  int assets = 0;
  int days = 0;
  Eigen::VectorXd values;

  static constexpr int kFeatures = 5;
  double at(int asset, int day, int feature) const {
    return values((asset * days + day) * kFeatures + feature);
  }
};

/// Low-level market state: (step, level, side, channel); side 0 = bid, 1 = ask;
/// channel 0 = price, 1 = volume.
struct LobWindow {
  int steps = 0;
  int levels = 0;
  Eigen::VectorXd values;

  double at(int step, int level, int side, int channel) const {
    return values(((step * levels + level) * 2 + side) * 2 + channel);
  }
};

struct SyntheticMarketConfig {
  int assets = 1;
  int days = 100;
  int steps_per_day = 16;
  std::uint64_t seed = 7;
  /// Mean daily log-return per asset.
  std::vector<double> drift{0.0};
  /// Standard deviation of the daily log-return per asset.
  std::vector<double> volatility{0.01};
  int depth = 5;
  double level_spacing = 1.0;
  double tick_size = 0.01;
  double base_volume = 1000.0;
  double initial_price = 100.0;

  /// Broadcasts single drift/volatility entries to all assets; throws ConfigError.
  void validate();
  void read(const KeyValueFile& kv);
  void write(KeyValueFile& kv) const;
};

struct SyntheticMarket {
  std::vector<BarSeries> bars;
  std::vector<LobSeries> books;
};

SyntheticMarket gen_synthetic_market(SyntheticMarketConfig config);

BarSeries load_ohlcv(const std::filesystem::path& path, const std::string& asset);
LobSeries load_lob(const std::filesystem::path& path, const std::string& asset);
void write_ohlcv(const std::filesystem::path& path, const BarSeries& series);
void write_lob(const std::filesystem::path& path, const LobSeries& series);

/// Window of k days ending at `end_day`, normalized per asset by the first day's close
/// and volume (a zero volume divisor is replaced by 1).
FeatureWindow make_feature_window(std::span<const BarSeries> series, int end_day, int k);

/// Snapshots [end_step - k, end_step - 1], normalized by the first snapshot's mid price
/// and total volume. Levels missing from a snapshot are padded with zero volume.
LobWindow make_lob_window(std::span<const LobSnapshot> snapshots, int end_step, int k, int levels);

}  // namespace hrpm
