#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lcnl/error.hpp"
#include "lcnl/parameters.hpp"

namespace lcnl {

/// An objective that can be evaluated with one coordinate changed at a time.
/// propose() must not change the committed point; commit() adopts the last
/// proposal.
template <class F>
concept CoordinateObjective = requires(F& f, std::span<const double> x, std::size_t i, double v) {
  { f.reset(x) } -> std::convertible_to<double>;
  { f.propose(i, v) } -> std::convertible_to<double>;
  f.commit();
};

/// Adapts a plain callable double(span<const double>) to CoordinateObjective.
template <class Fn>
class FunctionObjective {
 public:
  explicit FunctionObjective(Fn fn) : fn_(std::move(fn)) {}

  double reset(std::span<const double> x) {
    x_.assign(x.begin(), x.end());
    pending_ = false;
    return fn_(std::span<const double>(x_));
  }

  double propose(std::size_t i, double v) {
    const double saved = x_[i];
    x_[i] = v;
    const double r = fn_(std::span<const double>(x_));
    x_[i] = saved;
    pending_ = true;
    pending_index_ = i;
    pending_value_ = v;
    return r;
  }

  void commit() {
    if (pending_) x_[pending_index_] = pending_value_;
    pending_ = false;
  }

 private:
  Fn fn_;
  std::vector<double> x_;
  bool pending_ = false;
  std::size_t pending_index_ = 0;
  double pending_value_ = 0.0;
};

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    return true;
  }
};

/// nonneg -> [0, B], nonpos -> [-B, 0], free -> [-B, B], fixed(v) -> [v, v].
inline Bounds bounds_from_tags(std::span<const Constraint> tags, double magnitude) {
  Bounds b;
  for (const Constraint& t : tags) {
    switch (t.kind) {
      case Constraint::Kind::free: b.lower.push_back(-magnitude); b.upper.push_back(magnitude); break;
      case Constraint::Kind::nonneg: b.lower.push_back(0.0); b.upper.push_back(magnitude); break;
      case Constraint::Kind::nonpos: b.lower.push_back(-magnitude); b.upper.push_back(0.0); break;
      case Constraint::Kind::fixed: b.lower.push_back(t.value); b.upper.push_back(t.value); break;
    }
  }
  return b;
}

struct PolishConfig {
  std::size_t max_evaluations = 20000;
  /// Initial simplex edge, relative to max(1, |x_i|).
  double initial_scale = 0.05;
  double x_tolerance = 1e-10;
  double f_tolerance = 1e-15;
};

/// Corana-style simulated annealing settings.
struct AnnealConfig {
  /// Unset: chosen by a pilot run so that about `pilot_acceptance` of
  /// proposals would be accepted.
  std::optional<double> initial_temperature;
  double cooling = 0.85;
  /// Step adjustments per temperature (N_T). Unset: max(100, 5 * free).
  std::optional<std::size_t> cycles;
  /// Sweeps between step adjustments (N_S).
  std::size_t adjustments = 20;
  double tolerance = 1e-8;
  std::size_t window = 4;
  std::size_t max_evaluations = 10'000'000;
  std::uint64_t seed = 1;
  double bound = 50.0;
  double initial_step = 1.0;
  /// Step floor as a fraction of each coordinate's bound width.
  double min_step_fraction = 1e-6;
  /// Corana's step-growth constant.
  double step_factor = 2.0;
  std::size_t pilot_proposals = 100;
  double pilot_acceptance = 0.8;
  /// Below this temperature the run stops as stalled.
  double min_temperature = 1e-14;
  bool polish = false;
  PolishConfig polish_config;

  std::size_t cycles_for(std::size_t free) const { return cycles.value_or(std::max<std::size_t>(100, 5 * free)); }

  void validate() const {
    auto bad = [](const std::string& key, const std::string& why) {
      throw ModelError(ErrorKind::config_error, key, why);
    };
    if (initial_temperature && !(*initial_temperature > 0.0)) bad("initial_temperature", "must be > 0");
    if (!(cooling > 0.0 && cooling < 1.0)) bad("cooling", "must lie in (0, 1)");
    if (cycles && *cycles == 0) bad("cycles", "must be >= 1");
    if (adjustments == 0) bad("adjustments", "must be >= 1");
    if (!(tolerance > 0.0)) bad("tolerance", "must be > 0");
    if (window == 0) bad("window", "must be >= 1");
    if (max_evaluations == 0) bad("max_evaluations", "must be >= 1");
    if (!(bound > 0.0)) bad("bound", "must be > 0");
    if (!(initial_step > 0.0)) bad("initial_step", "must be > 0");
    if (!(min_step_fraction >= 0.0 && min_step_fraction < 1.0)) bad("min_step_fraction", "must lie in [0, 1)");
    if (!(pilot_acceptance > 0.0 && pilot_acceptance < 1.0)) bad("pilot_acceptance", "must lie in (0, 1)");
    if (pilot_proposals == 0) bad("pilot_proposals", "must be >= 1");
  }
};

enum class AnnealStatus { converged, eval_budget, stalled };

inline const char* to_string(AnnealStatus s) {
  switch (s) {
    case AnnealStatus::converged: return "converged";
    case AnnealStatus::eval_budget: return "eval_budget";
    case AnnealStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct StageRecord {
  std::size_t stage = 0;
  double temperature = 0.0;
  double best = 0.0;
  double acceptance = 0.0;
  double step_norm = 0.0;
  std::size_t evaluations = 0;
};

struct AnnealTrace {
  std::vector<StageRecord> stages;
  AnnealStatus status = AnnealStatus::eval_budget;
  std::size_t evaluations = 0;
  std::size_t non_finite = 0;
  double initial_temperature = 0.0;
};

struct AnnealResult {
  std::vector<double> best;
  double value = 0.0;
  AnnealTrace trace;
};

/// One tab-separated record per stage: stage, T, bestLL, acceptRate, evals.
inline void write_trace(std::ostream& os, const AnnealTrace& trace) {
  os << "# stage\tT\tbestLL\tacceptRate\tevals\n";
  const auto old = os.precision(17);
  for (const StageRecord& r : trace.stages)
    os << r.stage << '\t' << r.temperature << '\t' << r.best << '\t' << r.acceptance << '\t' << r.evaluations << '\n';
  os.precision(old);
}

namespace detail {

/// Temperature at which the pilot proposals would be accepted at `target`.
inline double pilot_temperature(std::span<const double> downhill, std::size_t uphill, std::size_t total,
                                double target) {
  if (downhill.empty()) return 1.0;
  const double dmax = *std::max_element(downhill.begin(), downhill.end());
  const double dmean = std::accumulate(downhill.begin(), downhill.end(), 0.0) / downhill.size();
  auto rate = [&](double t) {
    double s = static_cast<double>(uphill);
    for (double d : downhill) s += std::exp(-d / t);
    return s / static_cast<double>(total);
  };
  if (rate(std::numeric_limits<double>::max()) <= target) return 1e3 * std::max(dmax, 1e-300);
  if (static_cast<double>(uphill) / total >= target) return std::max(dmean, 1e-300);
  double lo = std::log(std::max(dmax, 1e-300)) - 40.0;
  double hi = std::log(std::max(dmax, 1e-300)) + 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate(std::exp(mid)) < target ? lo : hi) = mid;
  }
  return std::exp(hi);
}

}  // namespace detail

/// Maximizes `objective` inside `bounds` from `start`. Coordinate-wise
/// uniform proposals in +/- step_i are clipped to the bounds and accepted by
/// the Metropolis rule exp(dF / T). Every N_S sweeps each step is rescaled
/// toward half acceptance; every N_T adjustments T <- cooling * T and the
/// chain restarts from the best point. The run converges once the best value
/// moves less than `tolerance` over `window` consecutive stages and each of
/// those stages ended within `tolerance` of the best.
template <CoordinateObjective F>
AnnealResult anneal(F& objective, std::span<const double> start, const Bounds& bounds, const AnnealConfig& config) {
  config.validate();
  const std::size_t n = start.size();
  if (bounds.lower.size() != n || bounds.upper.size() != n)
    throw ModelError(ErrorKind::dimension_mismatch, "bounds", "one bound pair per coordinate expected");
  if (!bounds.contains(start)) throw ModelError(ErrorKind::out_of_range, "start", "start lies outside the bounds");

  std::vector<double> x(start.begin(), start.end());
  double f = objective.reset(x);
  if (!std::isfinite(f)) throw ModelError(ErrorKind::non_finite, "start", "objective is not finite at the start");

  std::vector<std::size_t> active;
  std::vector<double> step(n, 0.0), floor(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double width = bounds.upper[i] - bounds.lower[i];
    if (width <= 0.0) continue;
    active.push_back(i);
    step[i] = std::min(config.initial_step, width);
    floor[i] = config.min_step_fraction * width;
  }

  AnnealResult result;
  AnnealTrace& trace = result.trace;
  trace.evaluations = 1;
  std::vector<double> best = x;
  double fbest = f;

  if (active.empty()) {
    trace.status = AnnealStatus::converged;
    result.best = best;
    result.value = fbest;
    return result;
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> symmetric(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto propose_at = [&](std::size_t i) {
    return std::clamp(x[i] + symmetric(rng) * step[i], bounds.lower[i], bounds.upper[i]);
  };

  double temperature = 0.0;
  if (config.initial_temperature) {
    temperature = *config.initial_temperature;
  } else {
    std::vector<double> downhill;
    std::size_t uphill = 0;
    for (std::size_t k = 0; k < config.pilot_proposals; ++k) {
      const std::size_t i = active[k % active.size()];
      const double fp = objective.propose(i, propose_at(i));
      ++trace.evaluations;
      if (!std::isfinite(fp)) {
        ++trace.non_finite;
        continue;
      }
      if (fp >= f)
        ++uphill;
      else
        downhill.push_back(f - fp);
    }
    temperature = detail::pilot_temperature(downhill, uphill, config.pilot_proposals, config.pilot_acceptance);
  }
  trace.initial_temperature = temperature;

  const std::size_t cycles = config.cycles_for(active.size());
  std::vector<std::size_t> accepted(n, 0);
  std::vector<double> history, current;
  bool out_of_budget = false;

  for (std::size_t stage = 0;; ++stage) {
    std::size_t stage_accepted = 0, stage_proposed = 0;
    for (std::size_t t = 0; t < cycles && !out_of_budget; ++t) {
      std::fill(accepted.begin(), accepted.end(), 0);
      for (std::size_t s = 0; s < config.adjustments && !out_of_budget; ++s) {
        for (std::size_t i : active) {
          if (trace.evaluations >= config.max_evaluations) {
            out_of_budget = true;
            break;
          }
          const double xi = propose_at(i);
          const double fp = objective.propose(i, xi);
          ++trace.evaluations;
          ++stage_proposed;
          if (!std::isfinite(fp)) {
            ++trace.non_finite;
            continue;
          }
          if (fp >= f || unit(rng) < std::exp((fp - f) / temperature)) {
            objective.commit();
            x[i] = xi;
            f = fp;
            ++accepted[i];
            ++stage_accepted;
            if (f > fbest) {
              fbest = f;
              best = x;
            }
          }
        }
      }
      if (out_of_budget) break;
      for (std::size_t i : active) {
        const double ratio = static_cast<double>(accepted[i]) / static_cast<double>(config.adjustments);
        if (ratio > 0.6)
          step[i] *= 1.0 + config.step_factor * (ratio - 0.6) / 0.4;
        else if (ratio < 0.4)
          step[i] /= 1.0 + config.step_factor * (0.4 - ratio) / 0.4;
        step[i] = std::clamp(step[i], floor[i], bounds.upper[i] - bounds.lower[i]);
      }
    }

    double norm = 0.0;
    for (std::size_t i : active) norm += step[i] * step[i];
    trace.stages.push_back(StageRecord{stage, temperature, fbest,
                                       stage_proposed ? static_cast<double>(stage_accepted) / stage_proposed : 0.0,
                                       std::sqrt(norm), trace.evaluations});
    if (out_of_budget) {
      trace.status = AnnealStatus::eval_budget;
      break;
    }

    history.push_back(fbest);
    current.push_back(f);
    if (history.size() > config.window) {
      bool settled = true;
      const std::size_t last = history.size() - 1;
      for (std::size_t l = 1; l <= config.window; ++l)
        if (std::abs(history[last] - history[last - l]) >= config.tolerance) settled = false;
      // the chain itself must have frozen near the best point too, otherwise a
      // hot walk that stops finding records would pass
      for (std::size_t l = 0; l <= config.window; ++l)
        if (fbest - current[last - l] >= config.tolerance) settled = false;
      if (settled) {
        trace.status = AnnealStatus::converged;
        break;
      }
    }

    temperature *= config.cooling;
    if (temperature < config.min_temperature) {
      trace.status = AnnealStatus::stalled;
      break;
    }
    x = best;
    f = objective.reset(x);
    ++trace.evaluations;
  }

  result.best = std::move(best);
  result.value = fbest;
  return result;
}

/// Convenience overload for plain callables.
template <class Fn>
  requires(!CoordinateObjective<Fn>) && std::invocable<Fn&, std::span<const double>>
AnnealResult anneal(Fn fn, std::span<const double> start, const Bounds& bounds, const AnnealConfig& config) {
  FunctionObjective<Fn> objective(std::move(fn));
  return anneal(objective, start, bounds, config);
}

struct PolishResult {
  std::vector<double> best;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Nelder-Mead maximization over the coordinates with nonzero bound width,
/// every vertex clipped into the bounds. Returns the start unless a strictly
/// better point was found, so the result never scores below the input.
template <class Fn>
PolishResult polish(Fn&& fn, std::span<const double> start, const Bounds& bounds, const PolishConfig& config = {}) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < start.size(); ++i)
    if (bounds.upper[i] > bounds.lower[i]) active.push_back(i);

  PolishResult result;
  result.best.assign(start.begin(), start.end());
  const double f0 = fn(std::span<const double>(result.best));
  result.evaluations = 1;
  result.value = f0;
  const std::size_t d = active.size();
  if (d == 0 || !std::isfinite(f0)) return result;

  using Point = std::vector<double>;
  auto clip = [&](Point& p) {
    for (std::size_t k = 0; k < d; ++k) p[k] = std::clamp(p[k], bounds.lower[active[k]], bounds.upper[active[k]]);
  };
  std::vector<double> full(start.begin(), start.end());
  // Nelder-Mead minimizes; cost = -objective, non-finite = +inf.
  auto cost = [&](const Point& p) {
    for (std::size_t k = 0; k < d; ++k) full[active[k]] = p[k];
    ++result.evaluations;
    const double v = fn(std::span<const double>(full));
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::vector<Point> simplex(d + 1, Point(d));
  std::vector<double> fs(d + 1);
  for (std::size_t k = 0; k < d; ++k) simplex[0][k] = start[active[k]];
  fs[0] = -f0;
  for (std::size_t j = 1; j <= d; ++j) {
    simplex[j] = simplex[0];
    const std::size_t i = active[j - 1];
    const double h = config.initial_scale * std::max(1.0, std::abs(start[i]));
    simplex[j][j - 1] += (start[i] + h <= bounds.upper[i]) ? h : -h;
    clip(simplex[j]);
    fs[j] = cost(simplex[j]);
  }

  std::vector<std::size_t> order(d + 1);
  Point centroid(d), trial(d), trial2(d);
  while (result.evaluations < config.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t lo = order.front(), hi = order.back(), second = order[d - 1];

    double diameter = 0.0;
    for (std::size_t j = 0; j <= d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        diameter = std::max(diameter, std::abs(simplex[j][k] - simplex[lo][k]) / std::max(1.0, std::abs(simplex[lo][k])));
    const double spread = fs[hi] - fs[lo];
    if (diameter <= config.x_tolerance && spread <= config.f_tolerance * (1.0 + std::abs(fs[lo]))) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t j = 0; j <= d; ++j)
      if (j != hi)
        for (std::size_t k = 0; k < d; ++k) centroid[k] += simplex[j][k] / d;

    for (std::size_t k = 0; k < d; ++k) trial[k] = centroid[k] + (centroid[k] - simplex[hi][k]);
    clip(trial);
    const double fr = cost(trial);
    if (fr < fs[lo]) {
      for (std::size_t k = 0; k < d; ++k) trial2[k] = centroid[k] + 2.0 * (centroid[k] - simplex[hi][k]);
      clip(trial2);
      const double fe = cost(trial2);
      if (fe < fr) {
        simplex[hi] = trial2;
        fs[hi] = fe;
      } else {
        simplex[hi] = trial;
        fs[hi] = fr;
      }
    } else if (fr < fs[second]) {
      simplex[hi] = trial;
      fs[hi] = fr;
    } else {
      const bool outside = fr < fs[hi];
      for (std::size_t k = 0; k < d; ++k)
        trial2[k] = outside ? centroid[k] + 0.5 * (trial[k] - centroid[k])
                            : centroid[k] + 0.5 * (simplex[hi][k] - centroid[k]);
      clip(trial2);
      const double fc = cost(trial2);
      if (fc < (outside ? fr : fs[hi])) {
        simplex[hi] = trial2;
        fs[hi] = fc;
      } else {
        for (std::size_t j = 0; j <= d; ++j) {
          if (j == lo) continue;
          for (std::size_t k = 0; k < d; ++k) simplex[j][k] = simplex[lo][k] + 0.5 * (simplex[j][k] - simplex[lo][k]);
          fs[j] = cost(simplex[j]);
        }
      }
    }
  }

  const std::size_t lo =
      static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  if (-fs[lo] > f0) {
    for (std::size_t k = 0; k < d; ++k) result.best[active[k]] = simplex[lo][k];
    result.value = -fs[lo];
  }
  return result;
}

}  // namespace lcnl
