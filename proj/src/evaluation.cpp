#include "hrpm/evaluation.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/simplex.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace hrpm {

void EquityCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].value > 0.0)) throw std::invalid_argument("equity values must be positive");
    if (i > 0 && points[i].day <= points[i - 1].day) throw std::invalid_argument("equity days must increase");
  }
}

Eigen::VectorXd EquityCurve::returns() const {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd r(std::max<Eigen::Index>(0, n - 1));
  for (Eigen::Index i = 1; i < n; ++i) {
    r(i - 1) = points[static_cast<std::size_t>(i)].value / points[static_cast<std::size_t>(i - 1)].value - 1.0;
  }
  return r;
}

double arr(const EquityCurve& curve) {
  if (curve.points.size() < 2) throw std::invalid_argument("ARR needs at least two points");
  const double vi = curve.points.front().value;
  const double vf = curve.points.back().value;
  const double span = curve.points.back().day - curve.points.front().day;
  return (vf - vi) / vi * curve.trading_days_per_year / span;
}

std::optional<double> asr(const EquityCurve& curve) {
  if (curve.points.size() < 3) throw std::invalid_argument("ASR needs at least three points");
  const Eigen::VectorXd r = curve.returns();
  const double mean = r.mean();
  const double var = (r.array() - mean).square().sum() / static_cast<double>(r.size() - 1);
  const double sd = std::sqrt(var);
  if (sd <= 1e-12) return std::nullopt;
  return arr(curve) / (sd * std::sqrt(curve.trading_days_per_year));
}

double mdd(const EquityCurve& curve) {
  double peak = 0.0;
  double worst = 0.0;
  for (const auto& p : curve.points) {
    peak = std::max(peak, p.value);
    worst = std::max(worst, (peak - p.value) / peak);
  }
  return worst;
}

std::optional<double> ddr(const EquityCurve& curve, double mar) {
  if (curve.points.size() < 3) throw std::invalid_argument("DDR needs at least three points");
  const Eigen::VectorXd r = curve.returns();
  const Eigen::ArrayXd below = (r.array() - mar).min(0.0);
  if (!(below < 0.0).any()) return std::nullopt;
  const double dd = std::sqrt(below.square().mean());
  return arr(curve) / (dd * std::sqrt(curve.trading_days_per_year));
}

MetricsReport compute_metrics(const EquityCurve& curve, double mar) {
  curve.validate();
  MetricsReport m;
  m.mar = mar;
  m.arr = arr(curve);
  m.mdd = mdd(curve);
  if (curve.points.size() >= 3) {
    m.asr = asr(curve);
    m.ddr = ddr(curve, mar);
  }
  return m;
}

// ---------------------------------------------------------------------------

const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::UCRP: return "UCRP";
    case BaselineKind::Winner: return "Winner";
    case BaselineKind::Loser: return "Loser";
    case BaselineKind::OLMAR: return "OLMAR";
    case BaselineKind::WMAMR: return "WMAMR";
  }
  return "?";
}

std::optional<BaselineKind> parse_baseline(const std::string& name) {
  for (BaselineKind k : {BaselineKind::UCRP, BaselineKind::Winner, BaselineKind::Loser, BaselineKind::OLMAR,
                         BaselineKind::WMAMR}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

namespace {

/// Passive-aggressive step towards `x` scoring above `epsilon` (OLMAR) or below it
/// (WMAMR, sign -1), followed by simplex projection.
Eigen::VectorXd passive_aggressive(const Eigen::VectorXd& b, const Eigen::VectorXd& x, double epsilon, double sign) {
  const Eigen::VectorXd centred = x.array() - x.mean();
  const double norm2 = centred.squaredNorm();
  if (norm2 == 0.0) return b;
  const double step = std::max(0.0, sign * (epsilon - b.dot(x)) / norm2);
  return simplex_project(b + sign * step * centred);
}

}  // namespace

Eigen::VectorXd baseline_weights(BaselineKind kind, const BaselineParams& params,
                                 const std::vector<Eigen::VectorXd>& history, const Eigen::VectorXd& current) {
  const Eigen::Index n = current.size();
  const auto days = static_cast<int>(history.size());
  switch (kind) {
    case BaselineKind::UCRP:
      return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    case BaselineKind::Winner:
    case BaselineKind::Loser: {
      if (days <= params.lookback || n < 2) return current;
      const Eigen::VectorXd& last = history.back();
      const Eigen::VectorXd& then = history[static_cast<std::size_t>(days - 1 - params.lookback)];
      const Eigen::VectorXd ret = (last.array() / then.array()).matrix().tail(n - 1);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n - 1));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ret(a) > ret(b); });
      Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
      if (kind == BaselineKind::Winner) {
        w(order.front() + 1) = 1.0;
        return w;
      }
      const std::size_t count = params.strict_loser ? 1 : std::max<std::size_t>(1, order.size() / 2);
      for (std::size_t i = order.size() - count; i < order.size(); ++i) w(order[i] + 1) = 1.0 / static_cast<double>(count);
      return w;
    }
    case BaselineKind::OLMAR: {
      const int window = params.olmar_window;
      if (days < window) return current;
      // Predicted relative: moving average of the window's closes over the latest close.
      Eigen::VectorXd ma = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < window; ++i) ma += history[static_cast<std::size_t>(days - 1 - i)];
      const Eigen::VectorXd x = (ma.array() / window / history.back().array()).matrix();
      return passive_aggressive(current, x, params.olmar_epsilon, 1.0);
    }
    case BaselineKind::WMAMR: {
      const int window = params.wmamr_window;
      if (days < window + 1) return current;
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < window; ++i) {
        x += (history[static_cast<std::size_t>(days - 1 - i)].array() /
              history[static_cast<std::size_t>(days - 2 - i)].array()).matrix();
      }
      x /= window;
      return passive_aggressive(current, x, params.wmamr_epsilon, -1.0);
    }
  }
  return current;
}

Decision BaselineDecider::decide(const DecisionContext& ctx, Rng&) {
  const int need = std::max({params_.olmar_window, params_.wmamr_window + 1, params_.lookback + 1});
  std::vector<Eigen::VectorXd> history;
  for (int d = std::max(ctx.data.first_day(), ctx.day - need + 1); d <= ctx.day; ++d) {
    history.push_back(ctx.data.closes(d));
  }
  return {baseline_weights(kind_, params_, history, ctx.weights), std::nullopt};
}

Decision CashDecider::decide(const DecisionContext& ctx, Rng&) {
  return {Eigen::VectorXd::Unit(ctx.weights.size(), 0), std::nullopt};
}

Decision IndexProxyDecider::decide(const DecisionContext& ctx, Rng&) {
  if (ctx.period > 0) return {ctx.weights, std::nullopt};
  const Eigen::Index n = ctx.weights.size();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n - 1));
  w(0) = 0.0;
  return {w, std::nullopt};
}

// ---------------------------------------------------------------------------

BacktestResult run_backtest(const std::string& name, HighDecider& decider, const PolicyBank* bank,
                            const MarketData& data, const HierarchyConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "backtest/" + name));
  BacktestResult r;
  r.strategy = name;
  r.mode = config.mode;
  r.episode = run_hierarchical_episode(decider, bank, data, config, rng);
  r.curve.points = r.episode.curve;
  return r;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "-"; }

}  // namespace

nlohmann::json to_json(const ReportRow& row) {
  return {{"strategy", row.strategy},
          {"ARR", row.metrics.arr},
          {"ASR", optional_json(row.metrics.asr)},
          {"MDD", row.metrics.mdd},
          {"DDR", optional_json(row.metrics.ddr)},
          {"MAR", row.metrics.mar},
          {"execution_mode", row.execution_mode},
          {"config_hash", row.config_hash}};
}

ReportRow report_row_from_json(const nlohmann::json& j) {
  try {
    ReportRow r;
    r.strategy = j.at("strategy").get<std::string>();
    r.metrics.arr = j.at("ARR").get<double>();
    r.metrics.asr = optional_from(j.at("ASR"));
    r.metrics.mdd = j.at("MDD").get<double>();
    r.metrics.ddr = optional_from(j.at("DDR"));
    r.metrics.mar = j.value("MAR", 0.0);
    r.execution_mode = j.at("execution_mode").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::vector<ReportRow> comparison_table(const std::vector<BacktestResult>& results, const std::string& config_hash) {
  std::vector<ReportRow> rows;
  for (const auto& r : results) {
    rows.push_back({r.strategy, compute_metrics(r.curve), to_string(r.mode), config_hash});
  }
  return rows;
}

std::string format_table(std::vector<ReportRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.metrics.arr > b.metrics.arr; });
  std::string out = fmt::format("{:<16} {:>10} {:>10} {:>10} {:>10}  {}\n", "strategy", "ARR", "ASR", "MDD", "DDR", "mode");
  for (const auto& r : rows) {
    out += fmt::format("{:<16} {:>10.4f} {:>10} {:>10.4f} {:>10}  {}\n", r.strategy, r.metrics.arr, cell(r.metrics.asr),
                       r.metrics.mdd, cell(r.metrics.ddr), r.execution_mode);
  }
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const EquityCurve& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "day,value\n";
  for (const auto& p : curve.points) out << p.day << ',' << format_double(p.value) << '\n';
}

void write_long_csv(const std::filesystem::path& path, const std::vector<BacktestResult>& results) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "strategy,day,value\n";
  for (const auto& r : results) {
    for (const auto& p : r.curve.points) out << r.strategy << ',' << p.day << ',' << format_double(p.value) << '\n';
  }
}

}  // namespace hrpm
