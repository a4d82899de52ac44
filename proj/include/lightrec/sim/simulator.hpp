#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "lightrec/errors.hpp"
#include "lightrec/rng.hpp"
#include "lightrec/sim/scenario.hpp"

namespace lightrec::sim {

// --- reusable pieces --------------------------------------------------------

struct TokenBucket {
  double capacity = 0.0;
  double rate_per_s = 0.0;
  double tokens = 0.0;
  double last_ms = 0.0;

  TokenBucket() = default;
  TokenBucket(double cap, double rate) : capacity(cap), rate_per_s(rate), tokens(cap) {}

  void refill(double now_ms) {
    tokens = std::min(capacity, tokens + (now_ms - last_ms) * rate_per_s / 1000.0);
    last_ms = now_ms;
  }

  bool try_take(double now_ms) {
    refill(now_ms);
    if (tokens >= 1.0) {
      tokens -= 1.0;
      return true;
    }
    return false;
  }
};

enum class AdmitResult { Admit, Throttled, Shed };

// Hybrid rate limiter: per-tier token buckets, a shared reserve bucket that
// priority requests may draw from, and utilization-proportional shedding of
// non-priority traffic (admit probability 1 - slope * (util - threshold),
// clamped to [0, 1]).
struct RateLimiter {
  std::vector<TokenBucket> tier_buckets;
  TokenBucket reserve;
  double shed_threshold = 1.0;
  double shed_slope = 0.0;

  RateLimiter() = default;
  RateLimiter(const std::vector<TierSpec>& tiers, const RateLimiterSpec& spec) {
    for (const auto& t : tiers) tier_buckets.emplace_back(t.bucket_capacity, t.token_rate);
    reserve = TokenBucket(spec.reserve_capacity, spec.reserve_rate);
    shed_threshold = spec.shed_threshold;
    shed_slope = spec.shed_slope;
  }

  AdmitResult admit(std::size_t tier, bool priority, double now_ms, double utilization,
                    Rng& rng) {
    if (!priority && shed_slope > 0.0 && utilization > shed_threshold) {
      const double p = std::clamp(1.0 - shed_slope * (utilization - shed_threshold), 0.0, 1.0);
      if (rng.uniform() >= p) return AdmitResult::Shed;
    }
    if (tier_buckets[tier].try_take(now_ms)) return AdmitResult::Admit;
    if (priority && reserve.try_take(now_ms)) return AdmitResult::Admit;
    return AdmitResult::Throttled;
  }
};

// Pick a replica for one request. Least-loaded takes the argmin queue length
// with ties to the lowest index; round-robin cycles; random draws uniformly.
inline std::size_t route(const std::vector<std::size_t>& queue_lengths, RoutingPolicy policy,
                         Rng& rng, std::size_t& round_robin_state) {
  if (queue_lengths.empty()) throw ConfigError("route: no replicas");
  switch (policy) {
    case RoutingPolicy::LeastLoaded: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < queue_lengths.size(); ++i)
        if (queue_lengths[i] < queue_lengths[best]) best = i;
      return best;
    }
    case RoutingPolicy::RoundRobin:
      return round_robin_state++ % queue_lengths.size();
    case RoutingPolicy::Random:
      return rng.uniform_index(queue_lengths.size());
  }
  return 0;
}

// Indices of the top-m_prime stage-1 scores (ties favor the lower index),
// returned ascending.
inline std::vector<std::size_t> screen_candidates(const std::vector<double>& stage1_scores,
                                                  std::size_t m_prime) {
  if (m_prime > stage1_scores.size())
    throw ConfigError("screen_candidates: m_prime exceeds candidate count");
  std::vector<std::size_t> idx(stage1_scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (stage1_scores[a] != stage1_scores[b]) return stage1_scores[a] > stage1_scores[b];
    return a < b;
  });
  idx.resize(m_prime);
  std::sort(idx.begin(), idx.end());
  return idx;
}

enum class ScaleAction { Up, Down, Hold };

inline ScaleAction autoscale_decide(double window_mean_util, const AutoscaleSpec& policy,
                                    double now_ms, double last_action_ms, std::size_t replicas,
                                    std::size_t max_replicas, bool any_idle) {
  if (now_ms - last_action_ms < policy.cooldown_s * 1000.0) return ScaleAction::Hold;
  if (window_mean_util > policy.u_hi && replicas < max_replicas) return ScaleAction::Up;
  if (window_mean_util < policy.u_lo && replicas > 1 && any_idle) return ScaleAction::Down;
  return ScaleAction::Hold;
}

// Warm pool of pre-initialized instances. Acquire prefers a warm instance and
// schedules background replenishment; when empty the caller provisions cold.
struct WarmPool {
  std::size_t available = 0;
  std::size_t target = 0;
  double provision_ms = 0.0;

  bool acquire_warm() {
    if (available == 0) return false;
    --available;
    return true;
  }
  void replenish_arrived() { available = std::min(target, available + 1); }
};

// Batch service time: tau = alpha * batch * m_eff * L * h^2 + beta, shaped by
// the configured noise law, plus the cold-start delay on a cold replica's
// first batch.
inline double service_time_ms(std::size_t batch_size, const ModelCostSpec& mc,
                              const std::optional<CascadeSpec>& cascade, bool cold,
                              double cold_start_ms, Rng& rng) {
  if (batch_size < 1) throw ConfigError("service_time: batch_size must be >= 1");
  double tau = mc.per_request_ms(cascade) * static_cast<double>(batch_size) + mc.cost.beta_ms;
  switch (mc.dist) {
    case ModelCostSpec::Dist::Deterministic: break;
    case ModelCostSpec::Dist::Lognormal: tau *= rng.lognormal_factor(mc.noise_sigma); break;
    case ModelCostSpec::Dist::Exponential: tau = rng.exponential(tau); break;
  }
  return tau + (cold ? cold_start_ms : 0.0);
}

// --- report -----------------------------------------------------------------

struct TierMetrics {
  std::string name;
  std::uint64_t arrivals = 0, admitted = 0, dropped = 0, completed = 0;
  double latency_mean_ms = 0.0, latency_p50_ms = 0.0, latency_p95_ms = 0.0, latency_p99_ms = 0.0;
};

struct MetricsReport {
  double duration_s = 0.0;
  std::uint64_t arrivals = 0, admitted = 0, completed = 0;
  std::uint64_t dropped_throttled = 0, dropped_shed = 0, dropped_after_admit = 0;
  std::uint64_t in_flight_at_end = 0;
  double throughput_rps = 0.0;
  double latency_mean_ms = 0.0, latency_p50_ms = 0.0, latency_p95_ms = 0.0, latency_p99_ms = 0.0;
  double drop_rate = 0.0;
  double mean_utilization = 0.0;
  double total_busy_ms = 0.0;  // summed service time, the simulated-compute proxy
  std::size_t max_queue_length = 0;
  std::size_t final_replicas = 0;
  std::vector<std::pair<double, std::size_t>> replica_timeline;  // (t_ms, count)
  std::vector<TierMetrics> per_tier;
};

struct RequestRecord {
  std::uint64_t id = 0;
  std::string tier;
  double arrival_ms = 0.0;
  double completion_ms = 0.0;
  double latency_ms = 0.0;
  std::size_t replica = 0;
  std::size_t batch_size = 0;
  double service_ms = 0.0;  // batch service duration (not exported to CSV)
};

struct SimResult {
  MetricsReport report;
  std::vector<RequestRecord> records;  // completed requests, by completion time
};

// Nearest-rank percentile on an unsorted copy.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(q / 100.0 * static_cast<double>(values.size())));
  return values[std::min(values.size() - 1, std::max<std::size_t>(rank, 1) - 1)];
}

// --- engine -----------------------------------------------------------------

namespace detail_sim {

struct Request {
  std::uint64_t id = 0;
  std::size_t tier = 0;
  bool priority = false;
  double arrival_ms = 0.0;
};

struct Batch {
  std::vector<Request> requests;
};

struct Replica {
  std::size_t id = 0;
  bool active = true;
  bool busy = false;
  bool cold = false;
  std::deque<Request> waiting;
  std::deque<Batch> ready;  // priority batches enter at the front
  std::size_t in_service = 0;
  double busy_since_ms = 0.0;
  double total_busy_ms = 0.0;
  std::deque<std::pair<double, double>> busy_intervals;  // for windowed utilization

  std::size_t queued() const {
    std::size_t n = waiting.size();
    for (const auto& b : ready) n += b.requests.size();
    return n;
  }
  std::size_t load() const { return queued() + in_service; }
};

enum class EventKind { Arrival, BatchTimeout, ServiceDone, AutoscaleEval, WarmReplenish };

struct Event {
  double time_ms = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Arrival;
  std::size_t replica = 0;
  std::uint64_t request_id = 0;
  Batch batch;

  bool operator>(const Event& o) const {
    if (time_ms != o.time_ms) return time_ms > o.time_ms;
    return seq > o.seq;
  }
};

}  // namespace detail_sim

// Deterministic discrete-event simulator of the serving layer: arrivals flow
// through admission, routing, batching, service and completion in timestamp
// order with sequence-number tie-breaking. One seeded RNG drives every
// stochastic choice, so a scenario and seed fix the entire trajectory.
class Simulator {
 public:
  explicit Simulator(Scenario scenario) : sc_(std::move(scenario)) { sc_.validate(); }

  SimResult run() {
    Rng rng(sc_.seed);
    const double horizon_ms = sc_.duration_s * 1000.0;

    replicas_.clear();
    for (std::size_t i = 0; i < sc_.fleet.initial_replicas; ++i) spawn_replica(false);
    pool_.available = sc_.fleet.warm_pool_size;
    pool_.target = sc_.fleet.warm_pool_size;
    pool_.provision_ms = sc_.fleet.cold_start_ms;
    limiter_ = RateLimiter(sc_.tiers, sc_.rate_limiter);

    SimResult result;
    result.report.per_tier.resize(sc_.tiers.size());
    for (std::size_t t = 0; t < sc_.tiers.size(); ++t)
      result.report.per_tier[t].name = sc_.tiers[t].name;
    std::vector<std::vector<double>> tier_latencies(sc_.tiers.size());
    std::vector<double> latencies;

    // replica-count time integral for mean utilization
    double count_integral_ms = 0.0, last_count_change_ms = 0.0;
    auto on_count_change = [&](double now) {
      count_integral_ms += static_cast<double>(active_count()) * (now - last_count_change_ms);
      last_count_change_ms = now;
    };
    result.report.replica_timeline.emplace_back(0.0, active_count());

    schedule(next_arrival_time(0.0, rng), detail_sim::EventKind::Arrival, 0, 0);
    if (sc_.autoscale)
      schedule(sc_.autoscale->eval_interval_s * 1000.0, detail_sim::EventKind::AutoscaleEval, 0, 0);

    double last_action_ms = -1e18;
    std::uint64_t next_request_id = 0;

    // the horizon is exclusive: the simulation covers [0, duration)
    while (!events_.empty()) {
      detail_sim::Event ev = events_.top();
      if (ev.time_ms >= horizon_ms) break;
      events_.pop();
      const double now = ev.time_ms;

      switch (ev.kind) {
        case detail_sim::EventKind::Arrival: {
          // materialize the request, draw its tier, admit, route
          detail_sim::Request req;
          req.id = next_request_id++;
          req.arrival_ms = now;
          req.tier = draw_tier(rng);
          req.priority = sc_.tiers[req.tier].priority;
          ++result.report.arrivals;
          ++result.report.per_tier[req.tier].arrivals;

          const double util = shed_load(now, sc_.rate_limiter.shed_window_s * 1000.0);
          const AdmitResult admit = limiter_.admit(req.tier, req.priority, now, util, rng);
          if (admit == AdmitResult::Admit) {
            ++result.report.admitted;
            ++result.report.per_tier[req.tier].admitted;
            dispatch_to_replica(req, now, rng);
          } else {
            ++result.report.per_tier[req.tier].dropped;
            if (admit == AdmitResult::Throttled)
              ++result.report.dropped_throttled;
            else
              ++result.report.dropped_shed;
          }
          result.report.max_queue_length =
              std::max(result.report.max_queue_length, max_queue());
          const double next = next_arrival_time(now, rng);
          if (next <= horizon_ms) schedule(next, detail_sim::EventKind::Arrival, 0, 0);
          break;
        }
        case detail_sim::EventKind::BatchTimeout: {
          auto& rep = replicas_[ev.replica];
          if (!rep.active) break;
          bool still_waiting = false;
          for (const auto& r : rep.waiting)
            if (r.id == ev.request_id) still_waiting = true;
          if (!still_waiting) break;  // already batched or served
          form_partial_batch(rep);
          try_start(rep, now, rng);
          break;
        }
        case detail_sim::EventKind::ServiceDone: {
          auto& rep = replicas_[ev.replica];
          rep.busy = false;
          rep.in_service = 0;
          rep.total_busy_ms += now - rep.busy_since_ms;
          rep.busy_intervals.emplace_back(rep.busy_since_ms, now);
          prune_intervals(rep, now);
          const double service = now - rep.busy_since_ms;
          for (const auto& r : ev.batch.requests) {
            RequestRecord rec;
            rec.id = r.id;
            rec.tier = sc_.tiers[r.tier].name;
            rec.arrival_ms = r.arrival_ms;
            rec.completion_ms = now;
            rec.latency_ms = now - r.arrival_ms + sc_.tiers[r.tier].net_delay_ms;
            rec.replica = ev.replica;
            rec.batch_size = ev.batch.requests.size();
            rec.service_ms = service;
            result.records.push_back(rec);
            latencies.push_back(rec.latency_ms);
            tier_latencies[r.tier].push_back(rec.latency_ms);
            ++result.report.completed;
            ++result.report.per_tier[r.tier].completed;
          }
          result.report.total_busy_ms += service;
          try_start(rep, now, rng);
          break;
        }
        case detail_sim::EventKind::AutoscaleEval: {
          const auto& policy = *sc_.autoscale;
          const double util = window_utilization(now, policy.window_s * 1000.0);
          const ScaleAction action = autoscale_decide(
              util, policy, now, last_action_ms, active_count(), sc_.fleet.max_replicas,
              any_idle());
          if (action == ScaleAction::Up) {
            on_count_change(now);
            if (pool_.acquire_warm()) {
              spawn_replica(false);
              schedule(now + pool_.provision_ms, detail_sim::EventKind::WarmReplenish, 0, 0);
            } else {
              spawn_replica(true);  // cold: first batch pays the cold start
            }
            last_action_ms = now;
            result.report.replica_timeline.emplace_back(now, active_count());
          } else if (action == ScaleAction::Down) {
            on_count_change(now);
            retire_idle_replica();
            last_action_ms = now;
            result.report.replica_timeline.emplace_back(now, active_count());
          }
          const double next = now + policy.eval_interval_s * 1000.0;
          if (next <= horizon_ms) schedule(next, detail_sim::EventKind::AutoscaleEval, 0, 0);
          break;
        }
        case detail_sim::EventKind::WarmReplenish: {
          pool_.replenish_arrived();
          break;
        }
      }
    }

    // close out accounting at the horizon
    on_count_change(horizon_ms);
    for (auto& rep : replicas_) {
      if (rep.active && rep.busy) {
        rep.total_busy_ms += horizon_ms - rep.busy_since_ms;
        result.report.total_busy_ms += horizon_ms - rep.busy_since_ms;
      }
      retired_busy_ms_ += rep.total_busy_ms;
    }

    auto& rep_out = result.report;
    rep_out.duration_s = sc_.duration_s;
    rep_out.final_replicas = active_count();
    rep_out.in_flight_at_end = rep_out.admitted - rep_out.completed - rep_out.dropped_after_admit;
    rep_out.throughput_rps = static_cast<double>(rep_out.completed) / sc_.duration_s;
    const std::uint64_t dropped = rep_out.dropped_throttled + rep_out.dropped_shed;
    rep_out.drop_rate = rep_out.arrivals == 0
                            ? 0.0
                            : static_cast<double>(dropped) / static_cast<double>(rep_out.arrivals);
    rep_out.mean_utilization =
        count_integral_ms == 0.0 ? 0.0 : retired_busy_ms_ / count_integral_ms;
    if (!latencies.empty()) {
      rep_out.latency_mean_ms =
          std::accumulate(latencies.begin(), latencies.end(), 0.0) /
          static_cast<double>(latencies.size());
      rep_out.latency_p50_ms = percentile(latencies, 50.0);
      rep_out.latency_p95_ms = percentile(latencies, 95.0);
      rep_out.latency_p99_ms = percentile(latencies, 99.0);
    }
    for (std::size_t t = 0; t < sc_.tiers.size(); ++t) {
      auto& tm = rep_out.per_tier[t];
      const auto& ls = tier_latencies[t];
      if (ls.empty()) continue;
      tm.latency_mean_ms =
          std::accumulate(ls.begin(), ls.end(), 0.0) / static_cast<double>(ls.size());
      tm.latency_p50_ms = percentile(ls, 50.0);
      tm.latency_p95_ms = percentile(ls, 95.0);
      tm.latency_p99_ms = percentile(ls, 99.0);
    }
    return result;
  }

 private:
  Scenario sc_;
  std::vector<detail_sim::Replica> replicas_;
  std::priority_queue<detail_sim::Event, std::vector<detail_sim::Event>,
                      std::greater<detail_sim::Event>>
      events_;
  std::uint64_t event_seq_ = 0;
  RateLimiter limiter_;
  WarmPool pool_;
  std::size_t rr_state_ = 0;
  double retired_busy_ms_ = 0.0;
  std::size_t trace_segment_ = 0;
  double trace_segment_end_ms_ = 0.0;

  void schedule(double t, detail_sim::EventKind kind, std::size_t replica,
                std::uint64_t request_id, detail_sim::Batch batch = {}) {
    detail_sim::Event ev;
    ev.time_ms = t;
    ev.seq = event_seq_++;
    ev.kind = kind;
    ev.replica = replica;
    ev.request_id = request_id;
    ev.batch = std::move(batch);
    events_.push(std::move(ev));
  }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (const auto& r : replicas_) n += r.active ? 1 : 0;
    return n;
  }

  bool any_idle() const {
    for (const auto& r : replicas_)
      if (r.active && !r.busy && r.queued() == 0) return true;
    return false;
  }

  std::size_t max_queue() const {
    std::size_t mx = 0;
    for (const auto& r : replicas_)
      if (r.active) mx = std::max(mx, r.queued());
    return mx;
  }

  void spawn_replica(bool cold) {
    detail_sim::Replica r;
    r.id = replicas_.size();
    r.cold = cold;
    replicas_.push_back(std::move(r));
  }

  void retire_idle_replica() {
    // retire the highest-indexed idle replica
    for (std::size_t i = replicas_.size(); i-- > 0;) {
      auto& r = replicas_[i];
      if (r.active && !r.busy && r.queued() == 0) {
        r.active = false;
        retired_busy_ms_ += r.total_busy_ms;
        r.total_busy_ms = 0.0;
        return;
      }
    }
  }

  std::size_t draw_tier(Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t t = 0; t < sc_.tiers.size(); ++t) {
      acc += sc_.tiers[t].share;
      if (u < acc) return t;
    }
    return sc_.tiers.size() - 1;
  }

  double current_rate(double now_ms) {
    if (sc_.arrival.kind != ArrivalSpec::Kind::Trace) return sc_.arrival.rate_per_s;
    while (trace_segment_ < sc_.arrival.segments.size() &&
           now_ms >= trace_segment_end_ms_ + sc_.arrival.segments[trace_segment_].duration_s * 1000.0) {
      trace_segment_end_ms_ += sc_.arrival.segments[trace_segment_].duration_s * 1000.0;
      ++trace_segment_;
    }
    if (trace_segment_ >= sc_.arrival.segments.size())
      return sc_.arrival.segments.back().rate_per_s;
    return sc_.arrival.segments[trace_segment_].rate_per_s;
  }

  double next_arrival_time(double now_ms, Rng& rng) {
    const double rate = current_rate(now_ms);
    if (rate <= 0.0) return 1e18;  // silent tier: no arrivals
    const bool poisson = sc_.arrival.kind == ArrivalSpec::Kind::Poisson ||
                         (sc_.arrival.kind == ArrivalSpec::Kind::Trace && sc_.arrival.trace_poisson);
    if (poisson) return now_ms + rng.exponential(1000.0 / rate);
    // deterministic arrivals start at t = 0 and tick every 1/rate
    return now_ms == 0.0 && event_seq_ == 0 ? 0.0 : now_ms + 1000.0 / rate;
  }

  void prune_intervals(detail_sim::Replica& rep, double now_ms) {
    const double keep = std::max(sc_.rate_limiter.shed_window_s,
                                 sc_.autoscale ? sc_.autoscale->window_s : 0.0) *
                            1000.0 +
                        1000.0;
    while (!rep.busy_intervals.empty() && rep.busy_intervals.front().second < now_ms - keep)
      rep.busy_intervals.pop_front();
  }

  // Load signal for the rate limiter: windowed busy fraction plus queued
  // work normalized by the same window, so a growing backlog registers
  // immediately instead of one service time later.
  double shed_load(double now_ms, double window_ms) const {
    const std::size_t n = active_count();
    if (n == 0 || window_ms <= 0.0) return 0.0;
    double queued_ms = 0.0;
    const double per_request = sc_.model_cost.per_request_ms(sc_.cascade);
    for (const auto& r : replicas_)
      if (r.active) queued_ms += static_cast<double>(r.queued()) * per_request;
    const double w = std::min(window_ms, std::max(now_ms, 1e-9));
    return window_utilization(now_ms, window_ms) + queued_ms / (static_cast<double>(n) * w);
  }

  // Mean busy fraction of active replicas over [now - window, now].
  double window_utilization(double now_ms, double window_ms) const {
    const std::size_t n = active_count();
    if (n == 0 || window_ms <= 0.0) return 0.0;
    const double w = std::min(window_ms, std::max(now_ms, 1e-9));
    const double lo = now_ms - w;
    double busy = 0.0;
    for (const auto& r : replicas_) {
      if (!r.active) continue;
      for (const auto& [a, b] : r.busy_intervals)
        busy += std::max(0.0, std::min(b, now_ms) - std::max(a, lo));
      if (r.busy) busy += now_ms - std::max(r.busy_since_ms, lo);
    }
    return busy / (static_cast<double>(n) * w);
  }

  void dispatch_to_replica(const detail_sim::Request& req, double now, Rng& rng) {
    std::vector<std::size_t> loads;
    std::vector<std::size_t> ids;
    for (const auto& r : replicas_)
      if (r.active) {
        loads.push_back(r.load());
        ids.push_back(r.id);
      }
    const std::size_t pick = route(loads, sc_.routing, rng, rr_state_);
    auto& rep = replicas_[ids[pick]];
    if (req.priority) {
      // bypass: singleton batch, ahead of any waiting batch
      detail_sim::Batch b;
      b.requests.push_back(req);
      rep.ready.push_front(std::move(b));
      try_start(rep, now, rng);
      return;
    }
    rep.waiting.push_back(req);
    if (rep.waiting.size() >= sc_.batching.max_batch) {
      detail_sim::Batch b;
      for (std::size_t i = 0; i < sc_.batching.max_batch; ++i) {
        b.requests.push_back(rep.waiting.front());
        rep.waiting.pop_front();
      }
      rep.ready.push_back(std::move(b));
      try_start(rep, now, rng);
    } else if (sc_.batching.max_batch > 1) {
      schedule(now + sc_.batching.max_wait_ms, detail_sim::EventKind::BatchTimeout, rep.id,
               req.id);
      try_start(rep, now, rng);
    } else {
      try_start(rep, now, rng);
    }
  }

  void form_partial_batch(detail_sim::Replica& rep) {
    if (rep.waiting.empty()) return;
    detail_sim::Batch b;
    while (!rep.waiting.empty() && b.requests.size() < sc_.batching.max_batch) {
      b.requests.push_back(rep.waiting.front());
      rep.waiting.pop_front();
    }
    rep.ready.push_back(std::move(b));
  }

  void try_start(detail_sim::Replica& rep, double now, Rng& rng) {
    if (rep.busy || rep.ready.empty()) return;
    detail_sim::Batch batch = std::move(rep.ready.front());
    rep.ready.pop_front();
    const bool cold = rep.cold;
    rep.cold = false;
    const double tau = service_time_ms(batch.requests.size(), sc_.model_cost, sc_.cascade, cold,
                                       sc_.fleet.cold_start_ms, rng);
    rep.busy = true;
    rep.in_service = batch.requests.size();
    rep.busy_since_ms = now;
    schedule(now + tau, detail_sim::EventKind::ServiceDone, rep.id, 0, std::move(batch));
  }
};

inline SimResult simulate(const Scenario& scenario) { return Simulator(scenario).run(); }

// --- serialization ----------------------------------------------------------

inline ordered_json report_to_json(const MetricsReport& r) {
  ordered_json j;
  j["duration_s"] = r.duration_s;
  j["arrivals"] = r.arrivals;
  j["admitted"] = r.admitted;
  j["completed"] = r.completed;
  j["dropped_throttled"] = r.dropped_throttled;
  j["dropped_shed"] = r.dropped_shed;
  j["dropped_after_admit"] = r.dropped_after_admit;
  j["in_flight_at_end"] = r.in_flight_at_end;
  j["throughput_rps"] = r.throughput_rps;
  j["latency_mean_ms"] = r.latency_mean_ms;
  j["latency_p50_ms"] = r.latency_p50_ms;
  j["latency_p95_ms"] = r.latency_p95_ms;
  j["latency_p99_ms"] = r.latency_p99_ms;
  j["drop_rate"] = r.drop_rate;
  j["mean_utilization"] = r.mean_utilization;
  j["total_busy_ms"] = r.total_busy_ms;
  j["max_queue_length"] = r.max_queue_length;
  j["final_replicas"] = r.final_replicas;
  ordered_json timeline = ordered_json::array();
  for (const auto& [t, n] : r.replica_timeline) timeline.push_back({{"t_ms", t}, {"replicas", n}});
  j["replica_timeline"] = timeline;
  ordered_json tiers = ordered_json::array();
  for (const auto& tm : r.per_tier) {
    ordered_json tj;
    tj["name"] = tm.name;
    tj["arrivals"] = tm.arrivals;
    tj["admitted"] = tm.admitted;
    tj["dropped"] = tm.dropped;
    tj["completed"] = tm.completed;
    tj["latency_mean_ms"] = tm.latency_mean_ms;
    tj["latency_p50_ms"] = tm.latency_p50_ms;
    tj["latency_p95_ms"] = tm.latency_p95_ms;
    tj["latency_p99_ms"] = tm.latency_p99_ms;
    tiers.push_back(tj);
  }
  j["per_tier"] = tiers;
  return j;
}

// CSV time series, one row per completed request.
inline std::string records_to_csv(const std::vector<RequestRecord>& records) {
  std::string out = "id,tier,arrival_ms,completion_ms,latency_ms,replica,batch_size\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.6f,%.6f,%.6f,%zu,%zu\n",
                  static_cast<unsigned long long>(r.id), r.tier.c_str(), r.arrival_ms,
                  r.completion_ms, r.latency_ms, r.replica, r.batch_size);
    out += buf;
  }
  return out;
}

}  // namespace lightrec::sim
