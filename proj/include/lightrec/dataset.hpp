#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"
#include "lightrec/rng.hpp"

namespace lightrec {

struct Event {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> seq;    // behavior sequence, length s_max
  std::vector<std::uint32_t> cands;  // m candidates, exactly one positive
  std::uint32_t pos_index = 0;       // index of the positive within cands
  bool is_test = false;
};

struct Dataset {
  std::uint64_t users = 0;
  std::uint64_t items = 0;
  std::uint64_t m = 0;
  std::uint64_t s_max = 0;
  std::uint64_t seed = 0;
  std::vector<Event> events;

  std::vector<const Event*> train_events() const {
    std::vector<const Event*> out;
    for (const auto& e : events)
      if (!e.is_test) out.push_back(&e);
    return out;
  }
  std::vector<const Event*> test_events() const {
    std::vector<const Event*> out;
    for (const auto& e : events)
      if (e.is_test) out.push_back(&e);
    return out;
  }
};

// Dataset plus the latent factors that generated it, for oracle-based tests.
struct SyntheticData {
  Dataset dataset;
  Matrix2D user_factors;  // users x d_latent
  Matrix2D item_factors;  // items x d_latent

  double affinity(std::uint32_t user, std::uint32_t item) const {
    double dot = 0.0;
    for (std::size_t j = 0; j < user_factors.cols; ++j)
      dot += user_factors(user, j) * item_factors(item, j);
    return dot;
  }
};

namespace detail {

// Sample one index from an unnormalized softmax over logits.
inline std::size_t sample_softmax(const std::vector<double>& logits, Rng& rng) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double total = 0.0;
  std::vector<double> weights(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp(logits[i] - mx);
    total += weights[i];
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace detail

// Latent-factor generative model standing in for real behavior logs. User and
// item vectors are seeded Gaussians; each event samples its positive from a
// softmax over user-item affinities (sharpened) and its behavior sequence
// from a softer softmax over the same affinities; negatives are uniform.
// Every fifth event is tagged test (80/20 split).
inline SyntheticData generate_synthetic_full(std::uint64_t users, std::uint64_t items,
                                             std::uint64_t d_latent, std::uint64_t events_per_user,
                                             std::uint64_t m, std::uint64_t s_max,
                                             std::uint64_t seed) {
  if (m < 2) throw ConfigError("generate_synthetic: m must be >= 2");
  if (items < m) throw ConfigError("generate_synthetic: items must be >= m");
  if (users < 1 || d_latent < 1 || events_per_user < 1 || s_max < 1)
    throw ConfigError("generate_synthetic: counts must be >= 1");
  Rng rng(seed);
  SyntheticData data;
  data.dataset.users = users;
  data.dataset.items = items;
  data.dataset.m = m;
  data.dataset.s_max = s_max;
  data.dataset.seed = seed;
  data.user_factors = Matrix2D::random_normal(users, d_latent, 0.0, 1.0, rng);
  data.item_factors = Matrix2D::random_normal(items, d_latent, 0.0, 1.0, rng);

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_latent));
  std::size_t event_index = 0;
  for (std::uint32_t u = 0; u < users; ++u) {
    std::vector<double> seq_logits(items), pos_logits(items);
    for (std::uint32_t i = 0; i < items; ++i) {
      const double a = data.affinity(u, i) * inv_sqrt_d;
      seq_logits[i] = a;        // soft: diverse behavior history
      pos_logits[i] = 4.0 * a;  // sharp: positives concentrate on taste items
    }
    for (std::uint64_t e = 0; e < events_per_user; ++e) {
      Event event;
      event.user = u;
      event.seq.reserve(s_max);
      for (std::uint64_t t = 0; t < s_max; ++t)
        event.seq.push_back(static_cast<std::uint32_t>(detail::sample_softmax(seq_logits, rng)));
      const auto pos = static_cast<std::uint32_t>(detail::sample_softmax(pos_logits, rng));
      std::vector<bool> excluded(items, false);
      excluded[pos] = true;
      auto negatives = rng.sample_distinct(items, m - 1, excluded);
      event.cands.reserve(m);
      event.cands.push_back(pos);
      for (auto n : negatives) event.cands.push_back(static_cast<std::uint32_t>(n));
      rng.shuffle(event.cands);
      for (std::uint32_t i = 0; i < event.cands.size(); ++i)
        if (event.cands[i] == pos) event.pos_index = i;
      event.is_test = event_index % 5 == 4;
      ++event_index;
      data.dataset.events.push_back(std::move(event));
    }
  }
  return data;
}

inline Dataset generate_synthetic(std::uint64_t users, std::uint64_t items, std::uint64_t d_latent,
                                  std::uint64_t events_per_user, std::uint64_t m,
                                  std::uint64_t s_max, std::uint64_t seed) {
  return generate_synthetic_full(users, items, d_latent, events_per_user, m, s_max, seed).dataset;
}

// JSON-lines serialization: a meta line followed by one event per line.
inline void save_dataset_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("save_dataset: cannot open " + path);
  nlohmann::ordered_json meta;
  meta["type"] = "meta";
  meta["users"] = ds.users;
  meta["items"] = ds.items;
  meta["m"] = ds.m;
  meta["s_max"] = ds.s_max;
  meta["seed"] = ds.seed;
  out << meta.dump() << "\n";
  for (const auto& e : ds.events) {
    nlohmann::ordered_json j;
    j["user"] = e.user;
    j["seq"] = e.seq;
    j["cands"] = e.cands;
    j["pos"] = e.pos_index;
    j["split"] = e.is_test ? "test" : "train";
    out << j.dump() << "\n";
  }
  if (!out) throw ConfigError("save_dataset: write failed for " + path);
}

inline Dataset load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DomainError("load_dataset: empty file");
  const auto meta = nlohmann::json::parse(line);
  if (meta.value("type", "") != "meta") throw DomainError("load_dataset: missing meta line");
  Dataset ds;
  ds.users = meta.at("users").get<std::uint64_t>();
  ds.items = meta.at("items").get<std::uint64_t>();
  ds.m = meta.at("m").get<std::uint64_t>();
  ds.s_max = meta.at("s_max").get<std::uint64_t>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Event e;
    e.user = j.at("user").get<std::uint32_t>();
    e.seq = j.at("seq").get<std::vector<std::uint32_t>>();
    e.cands = j.at("cands").get<std::vector<std::uint32_t>>();
    e.pos_index = j.at("pos").get<std::uint32_t>();
    e.is_test = j.at("split").get<std::string>() == "test";
    if (e.pos_index >= e.cands.size()) throw DomainError("load_dataset: positive index out of range");
    ds.events.push_back(std::move(e));
  }
  return ds;
}

}  // namespace lightrec
