#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "hybrid/bigstep.hpp"

namespace hybrid {

/// Strictly increasing, non-negative sample times.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.empty()) throw std::invalid_argument("time grid is empty");
    if (!(times_.front() >= 0.0)) throw std::invalid_argument("time grid must start at a non-negative time");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("time grid must be strictly increasing");
  }

  /// start, start + step, ... up to end; end is included when it lies on the lattice.
  static TimeGrid uniform(double start, double end, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
    if (!(end > start)) throw std::invalid_argument("grid end must exceed its start");
    auto n = static_cast<std::size_t>(std::floor((end - start) / step + 1e-9));
    std::vector<double> t;
    for (std::size_t i = 0; i <= n; ++i) t.push_back(std::min(end, start + static_cast<double>(i) * step));
    if (t.size() > 1 && t.back() <= t[t.size() - 2]) t.pop_back();
    return TimeGrid(std::move(t));
  }

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double operator[](std::size_t i) const { return times_[i]; }
  double start() const { return times_.front(); }
  double end() const { return times_.back(); }

  /// Index of t on the grid, tolerating roundoff in the caller's spelling of t.
  std::optional<std::size_t> index_of(double t) const {
    for (std::size_t i = 0; i < times_.size(); ++i)
      if (std::abs(times_[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
    return std::nullopt;
  }

 private:
  std::vector<double> times_;
};

struct Value {
  Store store;
};
/// The stack emptied before the grid time; the final store is held.
struct TerminatedEarly {
  Store store;
  double time;
};
struct Error {
  double time;
  UndefReason reason;
};
struct Diverged {
  std::size_t budget;
};

using GridSample = std::variant<Value, TerminatedEarly, Error, Diverged>;

inline bool operator==(const Value& a, const Value& b) { return a.store == b.store; }
inline bool operator==(const TerminatedEarly& a, const TerminatedEarly& b) {
  return a.store == b.store && a.time == b.time;
}
inline bool operator==(const Error& a, const Error& b) { return a.time == b.time && a.reason == b.reason; }
inline bool operator==(const Diverged& a, const Diverged& b) { return a.budget == b.budget; }

inline const char* status(const GridSample& s) {
  static constexpr const char* names[] = {"value", "terminated", "error", "diverged"};
  return names[s.index()];
}

/// Store observed at a grid time, when there is one.
inline const Store* observed(const GridSample& s) {
  if (const auto* v = std::get_if<Value>(&s)) return &v->store;
  if (const auto* e = std::get_if<TerminatedEarly>(&s)) return &e->store;
  return nullptr;
}

using Trajectory = std::vector<GridSample>;

struct SimOptions {
  std::size_t fuel = default_fuel;
  FlowMethod method = FlowMethod::automatic();
  bool fast = true;
};

namespace detail {

inline GridSample from_run(const RunResult& r, double t, std::size_t fuel) {
  return std::visit(
      [&](const auto& o) -> GridSample {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, TimeStop>)
          return Value{o.store};
        else if constexpr (std::is_same_v<T, Normal>)
          return TerminatedEarly{o.store, t - o.t};
        else if constexpr (std::is_same_v<T, Err>)
          return Error{t - r.remaining, o.reason};
        else
          return Diverged{fuel};
      },
      r.outcome);
}

inline Trajectory canonical_trajectory(const ProgramPtr& p, const Store& sigma0, const TimeGrid& grid,
                                       std::uint64_t seed, const SimOptions& opt) {
  Trajectory out;
  for (double t : grid.times())
    out.push_back(from_run(run_to_terminal(Config{p, sigma0, t, from_seed(seed)}, opt.fuel, opt.method), t, opt.fuel));
  return out;
}

// One run driven by the latest grid time. Every earlier grid time keeps its
// own remaining time, reduced by the same subtractions the per-time run makes.
inline Trajectory fast_trajectory(const ProgramPtr& p, const Store& sigma0, const TimeGrid& grid,
                                  std::uint64_t seed, const SimOptions& opt) {
  const std::size_t m = grid.size();
  std::vector<std::optional<GridSample>> out(m);
  std::vector<double> rem(grid.times());
  std::size_t first_open = 0;  // grid points below this index are resolved
  Config c{p, sigma0, grid.end(), from_seed(seed)};
  std::size_t steps = 0;

  auto finish = [&](auto make) {
    for (std::size_t j = first_open; j < m; ++j) out[j] = make(j);
    first_open = m;
  };

  while (first_open < m) {
    if (c.is_skip()) {
      finish([&](std::size_t j) -> GridSample { return TerminatedEarly{c.store, grid[j] - rem[j]}; });
      break;
    }
    if (steps == opt.fuel) {
      finish([&](std::size_t) -> GridSample { return Diverged{opt.fuel}; });
      break;
    }
    std::optional<double> elapsed;
    const Program& head = head_statement(*c.program);
    if (const auto* d = std::get_if<DiffBlock>(&head.node)) {
      auto dur = eval_expr(d->duration, c.store);
      if (dur && *dur >= 0.0) {
        // earlier grid times that stop inside this flow; rem is increasing in j
        std::size_t j = first_open;
        std::vector<double> stops;
        while (j + 1 < m && *dur > rem[j]) stops.push_back(rem[j++]);
        auto seg = flow_segment(*d->system, c.store, *dur, stops, opt.method);
        for (std::size_t i = 0; i < seg.size(); ++i) {
          const auto& r = seg[i].second;
          if (r)
            out[first_open + i] = Value{*r};
          else
            out[first_open + i] = Error{grid[first_open + i] - rem[first_open + i], r.reason()};
        }
        first_open = j;
        elapsed = *dur;
      }
    }
    auto s = step(c, opt.method);
    ++steps;
    if (const auto* e = std::get_if<Err>(&s.result)) {
      finish([&](std::size_t j) -> GridSample { return Error{grid[j] - rem[j], e->reason}; });
      break;
    }
    if (const auto* ts = std::get_if<TimeStop>(&s.result)) {
      out[m - 1] = Value{ts->store};
      first_open = m;
      break;
    }
    c = std::move(std::get<Config>(s.result));
    if (elapsed)
      for (std::size_t k = first_open; k + 1 < m; ++k) rem[k] = rem[k] - *elapsed;
    rem[m - 1] = c.t;
  }
  Trajectory traj;
  for (auto& o : out) traj.push_back(std::move(*o));
  return traj;
}

}  // namespace detail

/// Observe one run at every grid time, all with the same seed.
inline Trajectory sample_trajectory(const ProgramPtr& p, const Store& sigma0, const TimeGrid& grid,
                                    std::uint64_t seed, const SimOptions& opt = {}) {
  if (opt.fuel == 0) throw std::invalid_argument("fuel must be positive");
  return opt.fast ? detail::fast_trajectory(p, sigma0, grid, seed, opt)
                  : detail::canonical_trajectory(p, sigma0, grid, seed, opt);
}

struct Ensemble {
  TimeGrid grid;
  std::vector<std::uint64_t> seeds;
  std::vector<Trajectory> runs;
};

/// N independent runs; run i uses derive_seed(base, i). Results are placed by
/// run index, so the thread count never changes the output.
inline Ensemble run_ensemble(const ProgramPtr& p, const Store& sigma0, const TimeGrid& grid, std::size_t n,
                             std::uint64_t base_seed, const SimOptions& opt = {}, std::size_t threads = 1) {
  if (n == 0) throw std::invalid_argument("ensemble needs at least one run");
  Ensemble ens{grid, std::vector<std::uint64_t>(n), std::vector<Trajectory>(n)};
  for (std::size_t i = 0; i < n; ++i) ens.seeds[i] = derive_seed(base_seed, i);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) ens.runs[i] = sample_trajectory(p, sigma0, grid, ens.seeds[i], opt);
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& th : pool) th.join();
  }
  return ens;
}

// ---- analyses

struct ProbabilityPoint {
  double t;
  double fraction;
  std::size_t satisfied, excluded, runs;
};

inline bool holds(const BoolExprPtr& b, const GridSample& s) {
  const Store* st = observed(s);
  if (!st) return false;
  auto r = eval_bool(b, *st);
  return r && *r;
}

inline std::size_t excluded_at(const Ensemble& ens, std::size_t j) {
  std::size_t n = 0;
  for (const auto& run : ens.runs) n += observed(run[j]) == nullptr;
  return n;
}

/// Fraction of runs satisfying b at each grid time. Error and diverged runs
/// count as not satisfying and are reported in `excluded`.
inline std::vector<ProbabilityPoint> probability_over_time(const Ensemble& ens, const BoolExprPtr& b) {
  std::vector<ProbabilityPoint> out;
  const std::size_t n = ens.runs.size();
  for (std::size_t j = 0; j < ens.grid.size(); ++j) {
    std::size_t sat = 0;
    for (const auto& run : ens.runs) sat += holds(b, run[j]);
    out.push_back({ens.grid[j], static_cast<double>(sat) / static_cast<double>(n), sat, excluded_at(ens, j), n});
  }
  return out;
}

struct IntervalProbability {
  double fraction;
  std::size_t satisfied, runs, grid_points;
  std::string caveat;
};

/// Fraction of runs where b holds at one or more grid times inside [t1, t2].
inline IntervalProbability interval_probability(const Ensemble& ens, const BoolExprPtr& b, double t1, double t2) {
  if (!(t1 <= t2)) throw std::invalid_argument("interval must satisfy t1 <= t2");
  if (t1 < ens.grid.start() - 1e-12 || t2 > ens.grid.end() + 1e-12)
    throw std::invalid_argument("interval must lie within the grid");
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < ens.grid.size(); ++j)
    if (ens.grid[j] >= t1 && ens.grid[j] <= t2) idx.push_back(j);
  std::size_t sat = 0;
  for (const auto& run : ens.runs)
    sat += std::any_of(idx.begin(), idx.end(), [&](std::size_t j) { return holds(b, run[j]); });
  std::ostringstream caveat;
  caveat << "checked at " << idx.size() << " grid points only; crossings between grid points are not detected";
  return {static_cast<double>(sat) / static_cast<double>(ens.runs.size()), sat, ens.runs.size(), idx.size(),
          caveat.str()};
}

namespace detail {

inline std::size_t grid_index(const Ensemble& ens, double t) {
  auto j = ens.grid.index_of(t);
  if (!j) throw std::invalid_argument("time " + format_real(t) + " is not on the grid");
  return *j;
}

inline std::vector<double> values_at(const Ensemble& ens, std::size_t var, std::size_t j) {
  std::vector<double> v;
  for (const auto& run : ens.runs)
    if (const Store* s = observed(run[j])) v.push_back(s->at(var));
  return v;
}

}  // namespace detail

struct Histogram {
  double lo, hi;
  std::vector<std::size_t> counts;
  std::size_t excluded;

  double bin_lo(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(counts.size()); }
  double bin_hi(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(counts.size()); }
};

/// Equal-width bins over [min, max] of the variable at grid time t.
inline Histogram histogram(const Ensemble& ens, std::size_t var, double t, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::size_t j = detail::grid_index(ens, t);
  auto v = detail::values_at(ens, var, j);
  Histogram h{0.0, 0.0, std::vector<std::size_t>(bins, 0), ens.runs.size() - v.size()};
  if (v.empty()) return h;
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  h.lo = *mn;
  h.hi = *mx;
  for (double x : v) {
    std::size_t b = h.hi > h.lo ? static_cast<std::size_t>((x - h.lo) / (h.hi - h.lo) * static_cast<double>(bins)) : 0;
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

struct Moments {
  double mean, std;
  std::size_t count, excluded;
};

/// Sample mean and standard deviation (n - 1 denominator) at grid time t.
inline Moments moments(const Ensemble& ens, std::size_t var, double t) {
  std::size_t j = detail::grid_index(ens, t);
  auto v = detail::values_at(ens, var, j);
  Moments m{std::numeric_limits<double>::quiet_NaN(), 0.0, v.size(), ens.runs.size() - v.size()};
  if (v.empty()) return m;
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return m;
}

// ---- export

/// Columns: run, t, one per variable, status. Error and diverged rows leave
/// the variable columns empty.
inline std::string to_csv(const Ensemble& ens, const VarTable& vars) {
  std::string out = "run,t";
  for (const auto& n : vars.names()) out += "," + n;
  out += ",status\n";
  for (std::size_t r = 0; r < ens.runs.size(); ++r) {
    for (std::size_t j = 0; j < ens.grid.size(); ++j) {
      const auto& s = ens.runs[r][j];
      out += std::to_string(r) + "," + format_real(ens.grid[j]);
      const Store* st = observed(s);
      for (std::size_t i = 0; i < vars.size(); ++i) out += "," + (st ? format_real(st->at(i)) : std::string());
      out += ",";
      out += status(s);
      out += "\n";
    }
  }
  return out;
}

inline nlohmann::json sample_json(const GridSample& s) {
  nlohmann::json j{{"status", status(s)}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Value>) {
          j["store"] = store_json(x.store);
        } else if constexpr (std::is_same_v<T, TerminatedEarly>) {
          j["store"] = store_json(x.store);
          j["time"] = x.time;
        } else if constexpr (std::is_same_v<T, Error>) {
          j["time"] = x.time;
          j["reason"] = to_string(x.reason);
        } else {
          j["budget"] = x.budget;
        }
      },
      s);
  return j;
}

inline nlohmann::json to_json(const Ensemble& ens, const VarTable& vars) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t r = 0; r < ens.runs.size(); ++r) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : ens.runs[r]) samples.push_back(sample_json(s));
    runs.push_back({{"run", r}, {"seed", ens.seeds[r]}, {"samples", samples}});
  }
  return {{"variables", vars.names()}, {"grid", ens.grid.times()}, {"runs", runs}};
}

inline std::string probability_csv(const std::vector<ProbabilityPoint>& series) {
  std::string out = "t,fraction,satisfied,excluded,runs\n";
  for (const auto& p : series)
    out += format_real(p.t) + "," + format_real(p.fraction) + "," + std::to_string(p.satisfied) + "," +
           std::to_string(p.excluded) + "," + std::to_string(p.runs) + "\n";
  return out;
}

inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin,lo,hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out += std::to_string(i) + "," + format_real(h.bin_lo(i)) + "," + format_real(h.bin_hi(i)) + "," +
           std::to_string(h.counts[i]) + "\n";
  return out;
}

}  // namespace hybrid
