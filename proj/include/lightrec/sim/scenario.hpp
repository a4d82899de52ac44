#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightrec/cost.hpp"
#include "lightrec/errors.hpp"

namespace lightrec::sim {

using ordered_json = nlohmann::ordered_json;

struct TierSpec {
  std::string name;
  double share = 1.0;            // fraction of arrivals
  double token_rate = 1e9;       // tokens per second
  double bucket_capacity = 1e9;  // burst size
  bool priority = false;
  double net_delay_ms = 0.0;     // constant network delay added to latency
};

struct ArrivalSpec {
  enum class Kind { Poisson, Deterministic, Trace };
  Kind kind = Kind::Poisson;
  double rate_per_s = 0.0;
  struct Segment {
    double duration_s = 0.0;
    double rate_per_s = 0.0;
  };
  std::vector<Segment> segments;  // Trace only; rates switch at segment starts
  bool trace_poisson = true;
};

struct FleetSpec {
  std::size_t initial_replicas = 1;
  std::size_t max_replicas = 1;
  std::size_t warm_pool_size = 0;
  double cold_start_ms = 0.0;
};

struct BatchingSpec {
  std::size_t max_batch = 1;    // B
  double max_wait_ms = 0.0;     // T_batch
};

enum class RoutingPolicy { LeastLoaded, RoundRobin, Random };

struct CascadeSpec {
  std::size_t m_prime = 0;
  double stage1_cost_factor = 0.0;
};

struct ModelCostSpec {
  enum class Dist { Deterministic, Lognormal, Exponential };
  CostParams cost{1e-6, 5.0};
  std::size_t m = 50;
  std::size_t l_net = 3;
  std::size_t h = 64;
  double noise_sigma = 0.1;  // lognormal sigma
  Dist dist = Dist::Lognormal;

  // variable per-request cost in ms, before batching and noise; with a
  // cascade, stage 2 scores m_prime candidates and stage 1 adds factor * m
  double per_request_ms(const std::optional<CascadeSpec>& cascade) const {
    const double unit = cost.alpha_ms_per_mac * static_cast<double>(l_net * h * h);
    if (cascade)
      return unit * (static_cast<double>(cascade->m_prime) +
                     cascade->stage1_cost_factor * static_cast<double>(m));
    return unit * static_cast<double>(m);
  }
};

struct AutoscaleSpec {
  double u_hi = 0.8;
  double u_lo = 0.3;
  double window_s = 10.0;
  double cooldown_s = 30.0;
  double eval_interval_s = 1.0;
};

struct RateLimiterSpec {
  double reserve_capacity = 0.0;  // shared bucket for priority overflow
  double reserve_rate = 0.0;
  double shed_threshold = 1.0;    // utilization above which shedding starts
  double shed_slope = 0.0;        // admit prob = 1 - slope * (util - threshold)
  double shed_window_s = 1.0;     // utilization averaging window for shedding
};

struct Scenario {
  double duration_s = 1.0;
  ArrivalSpec arrival;
  std::vector<TierSpec> tiers{TierSpec{}};
  FleetSpec fleet;
  BatchingSpec batching;
  RoutingPolicy routing = RoutingPolicy::LeastLoaded;
  ModelCostSpec model_cost;
  std::optional<CascadeSpec> cascade;
  std::optional<AutoscaleSpec> autoscale;
  RateLimiterSpec rate_limiter;
  std::uint64_t seed = 0;

  void validate() const {
    if (duration_s <= 0.0) throw ConfigError("scenario: duration must be > 0");
    if (tiers.empty()) throw ConfigError("scenario: at least one tier required");
    double share_sum = 0.0;
    for (const auto& t : tiers) {
      if (t.share < 0.0) throw ConfigError("scenario: tier share must be >= 0");
      share_sum += t.share;
    }
    if (std::abs(share_sum - 1.0) > 1e-9) throw ConfigError("scenario: tier shares must sum to 1");
    if (batching.max_batch < 1) throw ConfigError("scenario: max_batch must be >= 1");
    if (fleet.initial_replicas < 1 || fleet.max_replicas < fleet.initial_replicas)
      throw ConfigError("scenario: fleet replica bounds");
    if (cascade && cascade->m_prime > model_cost.m)
      throw ConfigError("scenario: m_prime must be <= m");
    if (autoscale && autoscale->u_lo >= autoscale->u_hi)
      throw ConfigError("scenario: autoscale requires u_lo < u_hi");
    if (arrival.kind == ArrivalSpec::Kind::Trace) {
      if (arrival.segments.empty()) throw ConfigError("scenario: trace arrival needs segments");
      for (const auto& seg : arrival.segments)
        if (seg.rate_per_s <= 0.0 || seg.duration_s <= 0.0)
          throw ConfigError("scenario: trace segments need positive rate and duration");
    }
    model_cost.cost.validate();
  }
};

// --- JSON (scenario file schema) -------------------------------------------

inline ordered_json to_json(const Scenario& s) {
  ordered_json j;
  j["duration_s"] = s.duration_s;
  ordered_json arrival;
  switch (s.arrival.kind) {
    case ArrivalSpec::Kind::Poisson: arrival["type"] = "poisson"; break;
    case ArrivalSpec::Kind::Deterministic: arrival["type"] = "deterministic"; break;
    case ArrivalSpec::Kind::Trace: arrival["type"] = "trace"; break;
  }
  arrival["rate_per_s"] = s.arrival.rate_per_s;
  if (s.arrival.kind == ArrivalSpec::Kind::Trace) {
    ordered_json segs = ordered_json::array();
    for (const auto& seg : s.arrival.segments)
      segs.push_back({{"duration_s", seg.duration_s}, {"rate_per_s", seg.rate_per_s}});
    arrival["segments"] = segs;
    arrival["poisson"] = s.arrival.trace_poisson;
  }
  j["arrival"] = arrival;
  ordered_json tiers = ordered_json::array();
  for (const auto& t : s.tiers) {
    ordered_json tj;
    tj["name"] = t.name;
    tj["share"] = t.share;
    tj["token_rate"] = t.token_rate;
    tj["bucket_capacity"] = t.bucket_capacity;
    tj["priority"] = t.priority;
    tj["net_delay_ms"] = t.net_delay_ms;
    tiers.push_back(tj);
  }
  j["tiers"] = tiers;
  j["fleet"] = {{"initial_replicas", s.fleet.initial_replicas},
                {"max_replicas", s.fleet.max_replicas},
                {"warm_pool_size", s.fleet.warm_pool_size},
                {"cold_start_ms", s.fleet.cold_start_ms}};
  j["batching"] = {{"max_batch", s.batching.max_batch}, {"max_wait_ms", s.batching.max_wait_ms}};
  j["routing"] = s.routing == RoutingPolicy::LeastLoaded   ? "least-loaded"
                 : s.routing == RoutingPolicy::RoundRobin  ? "round-robin"
                                                           : "random";
  ordered_json mc;
  mc["alpha_ms_per_mac"] = s.model_cost.cost.alpha_ms_per_mac;
  mc["beta_ms"] = s.model_cost.cost.beta_ms;
  mc["m"] = s.model_cost.m;
  mc["l_net"] = s.model_cost.l_net;
  mc["h"] = s.model_cost.h;
  mc["noise_sigma"] = s.model_cost.noise_sigma;
  mc["distribution"] = s.model_cost.dist == ModelCostSpec::Dist::Deterministic ? "deterministic"
                       : s.model_cost.dist == ModelCostSpec::Dist::Lognormal   ? "lognormal"
                                                                                : "exponential";
  j["model_cost"] = mc;
  if (s.cascade)
    j["cascade"] = {{"m_prime", s.cascade->m_prime},
                    {"stage1_cost_factor", s.cascade->stage1_cost_factor}};
  if (s.autoscale)
    j["autoscale"] = {{"u_hi", s.autoscale->u_hi},
                      {"u_lo", s.autoscale->u_lo},
                      {"window_s", s.autoscale->window_s},
                      {"cooldown_s", s.autoscale->cooldown_s},
                      {"eval_interval_s", s.autoscale->eval_interval_s}};
  j["rate_limiter"] = {{"reserve_capacity", s.rate_limiter.reserve_capacity},
                       {"reserve_rate", s.rate_limiter.reserve_rate},
                       {"shed_threshold", s.rate_limiter.shed_threshold},
                       {"shed_slope", s.rate_limiter.shed_slope},
                       {"shed_window_s", s.rate_limiter.shed_window_s}};
  j["seed"] = s.seed;
  return j;
}

inline Scenario scenario_from_json(const ordered_json& j) {
  Scenario s;
  s.duration_s = j.at("duration_s").get<double>();
  const auto& arrival = j.at("arrival");
  const std::string kind = arrival.at("type").get<std::string>();
  if (kind == "poisson")
    s.arrival.kind = ArrivalSpec::Kind::Poisson;
  else if (kind == "deterministic")
    s.arrival.kind = ArrivalSpec::Kind::Deterministic;
  else if (kind == "trace")
    s.arrival.kind = ArrivalSpec::Kind::Trace;
  else
    throw ConfigError("scenario: unknown arrival type " + kind);
  s.arrival.rate_per_s = arrival.value("rate_per_s", 0.0);
  if (arrival.contains("segments")) {
    for (const auto& seg : arrival.at("segments"))
      s.arrival.segments.push_back(
          {seg.at("duration_s").get<double>(), seg.at("rate_per_s").get<double>()});
    s.arrival.trace_poisson = arrival.value("poisson", true);
  }
  s.tiers.clear();
  for (const auto& tj : j.at("tiers")) {
    TierSpec t;
    t.name = tj.at("name").get<std::string>();
    t.share = tj.at("share").get<double>();
    t.token_rate = tj.value("token_rate", 1e9);
    t.bucket_capacity = tj.value("bucket_capacity", 1e9);
    t.priority = tj.value("priority", false);
    t.net_delay_ms = tj.value("net_delay_ms", 0.0);
    s.tiers.push_back(t);
  }
  if (j.contains("fleet")) {
    const auto& f = j.at("fleet");
    s.fleet.initial_replicas = f.value("initial_replicas", std::size_t{1});
    s.fleet.max_replicas = f.value("max_replicas", s.fleet.initial_replicas);
    s.fleet.warm_pool_size = f.value("warm_pool_size", std::size_t{0});
    s.fleet.cold_start_ms = f.value("cold_start_ms", 0.0);
  }
  if (j.contains("batching")) {
    s.batching.max_batch = j.at("batching").value("max_batch", std::size_t{1});
    s.batching.max_wait_ms = j.at("batching").value("max_wait_ms", 0.0);
  }
  if (j.contains("routing")) {
    const std::string routing = j.at("routing").get<std::string>();
    if (routing == "least-loaded")
      s.routing = RoutingPolicy::LeastLoaded;
    else if (routing == "round-robin")
      s.routing = RoutingPolicy::RoundRobin;
    else if (routing == "random")
      s.routing = RoutingPolicy::Random;
    else
      throw ConfigError("scenario: unknown routing policy " + routing);
  }
  if (j.contains("model_cost")) {
    const auto& mc = j.at("model_cost");
    s.model_cost.cost.alpha_ms_per_mac = mc.value("alpha_ms_per_mac", 1e-6);
    s.model_cost.cost.beta_ms = mc.value("beta_ms", 0.0);
    s.model_cost.m = mc.value("m", std::size_t{50});
    s.model_cost.l_net = mc.value("l_net", std::size_t{3});
    s.model_cost.h = mc.value("h", std::size_t{64});
    s.model_cost.noise_sigma = mc.value("noise_sigma", 0.1);
    const std::string dist = mc.value("distribution", "lognormal");
    if (dist == "deterministic")
      s.model_cost.dist = ModelCostSpec::Dist::Deterministic;
    else if (dist == "lognormal")
      s.model_cost.dist = ModelCostSpec::Dist::Lognormal;
    else if (dist == "exponential")
      s.model_cost.dist = ModelCostSpec::Dist::Exponential;
    else
      throw ConfigError("scenario: unknown service distribution " + dist);
  }
  if (j.contains("cascade")) {
    CascadeSpec c;
    c.m_prime = j.at("cascade").at("m_prime").get<std::size_t>();
    c.stage1_cost_factor = j.at("cascade").at("stage1_cost_factor").get<double>();
    s.cascade = c;
  }
  if (j.contains("autoscale")) {
    const auto& a = j.at("autoscale");
    AutoscaleSpec as;
    as.u_hi = a.at("u_hi").get<double>();
    as.u_lo = a.at("u_lo").get<double>();
    as.window_s = a.value("window_s", 10.0);
    as.cooldown_s = a.value("cooldown_s", 30.0);
    as.eval_interval_s = a.value("eval_interval_s", 1.0);
    s.autoscale = as;
  }
  if (j.contains("rate_limiter")) {
    const auto& r = j.at("rate_limiter");
    s.rate_limiter.reserve_capacity = r.value("reserve_capacity", 0.0);
    s.rate_limiter.reserve_rate = r.value("reserve_rate", 0.0);
    s.rate_limiter.shed_threshold = r.value("shed_threshold", 1.0);
    s.rate_limiter.shed_slope = r.value("shed_slope", 0.0);
    s.rate_limiter.shed_window_s = r.value("shed_window_s", 1.0);
  }
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_scenario: cannot open " + path);
  ordered_json j = ordered_json::parse(in, nullptr, true);
  return scenario_from_json(j);
}

}  // namespace lightrec::sim
