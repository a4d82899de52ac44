#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightrec/errors.hpp"
#include "lightrec/model.hpp"

namespace lightrec {

// Model file: 8-byte magic+version, a JSON header (spec, layer shapes, mask
// flags, quantization parameters, bias lengths), then a little-endian blob of
// raw f64 weights in a fixed traversal order, followed by 1-bit-packed masks
// for the matrices that carry one. Round-trips are bit-exact.
namespace model_io {

inline constexpr char kMagic[4] = {'L', 'R', 'M', '1'};

using ordered_json = nlohmann::ordered_json;

inline ordered_json attention_to_json(const AttentionConfig& cfg) {
  ordered_json j;
  j["l_seq"] = cfg.l_seq;
  j["d_model"] = cfg.d_model;
  j["heads"] = cfg.heads;
  j["n_layers"] = cfg.n_layers;
  j["groups_k"] = cfg.groups_k;
  j["lowrank_r"] = cfg.lowrank_r;
  j["window_w"] = cfg.window_w;
  j["random_g"] = cfg.random_g;
  j["dw_kernel_c"] = cfg.dw_kernel_c;
  j["seed"] = cfg.seed;
  return j;
}

inline AttentionConfig attention_from_json(const ordered_json& j) {
  AttentionConfig cfg;
  cfg.l_seq = j.at("l_seq").get<std::size_t>();
  cfg.d_model = j.at("d_model").get<std::size_t>();
  cfg.heads = j.at("heads").get<std::size_t>();
  cfg.n_layers = j.at("n_layers").get<std::size_t>();
  cfg.groups_k = j.at("groups_k").get<std::size_t>();
  cfg.lowrank_r = j.at("lowrank_r").get<std::size_t>();
  cfg.window_w = j.at("window_w").get<std::size_t>();
  cfg.random_g = j.at("random_g").get<std::size_t>();
  cfg.dw_kernel_c = j.at("dw_kernel_c").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

inline ordered_json spec_to_json(const ModelSpec& spec) {
  ordered_json j;
  j["d"] = spec.d;
  j["d_e"] = spec.d_e;
  j["h"] = spec.h;
  j["l_net"] = spec.l_net;
  j["m"] = spec.m;
  j["vocab"] = spec.vocab;
  j["b_p"] = spec.b_p;
  j["b_a"] = spec.b_a;
  if (spec.attention) j["attention"] = attention_to_json(*spec.attention);
  return j;
}

inline ModelSpec spec_from_json(const ordered_json& j) {
  ModelSpec spec;
  spec.d = j.at("d").get<std::size_t>();
  spec.d_e = j.at("d_e").get<std::size_t>();
  spec.h = j.at("h").get<std::size_t>();
  spec.l_net = j.at("l_net").get<std::size_t>();
  spec.m = j.at("m").get<std::size_t>();
  spec.vocab = j.at("vocab").get<std::size_t>();
  spec.b_p = j.at("b_p").get<std::uint32_t>();
  spec.b_a = j.at("b_a").get<std::uint32_t>();
  if (j.contains("attention")) spec.attention = attention_from_json(j.at("attention"));
  return spec;
}

// Doubles are serialized as raw IEEE-754 bit patterns so headers round-trip
// exactly even for values with no short decimal form.
inline std::uint64_t double_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return bits;
}

inline double bits_double(std::uint64_t bits) {
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline ordered_json qp_to_json(const QuantParams& qp) {
  ordered_json j;
  j["bits"] = qp.bits;
  j["step_bits"] = double_bits(qp.step);
  j["w_min_bits"] = double_bits(qp.w_min);
  j["w_max_bits"] = double_bits(qp.w_max);
  return j;
}

inline QuantParams qp_from_json(const ordered_json& j) {
  QuantParams qp;
  qp.bits = j.at("bits").get<std::uint32_t>();
  qp.step = bits_double(j.at("step_bits").get<std::uint64_t>());
  qp.w_min = bits_double(j.at("w_min_bits").get<std::uint64_t>());
  qp.w_max = bits_double(j.at("w_max_bits").get<std::uint64_t>());
  return qp;
}

struct MatrixMeta {
  std::string name;
  const WeightMatrix* wm;
};

inline std::vector<MatrixMeta> matrix_order(const Model& model) {
  std::vector<MatrixMeta> order;
  for (std::size_t l = 0; l < model.attn.size(); ++l) {
    order.push_back({"attn" + std::to_string(l) + ".q", &model.attn[l].q});
    order.push_back({"attn" + std::to_string(l) + ".k", &model.attn[l].k});
    order.push_back({"attn" + std::to_string(l) + ".v", &model.attn[l].v});
  }
  for (std::size_t l = 0; l < model.tower.size(); ++l)
    order.push_back({"tower" + std::to_string(l), &model.tower[l].wm});
  order.push_back({"head", &model.head.wm});
  return order;
}

inline void append_doubles(std::vector<std::uint8_t>& blob, const double* src, std::size_t n) {
  const std::size_t at = blob.size();
  blob.resize(at + n * sizeof(double));
  std::memcpy(blob.data() + at, src, n * sizeof(double));
}

inline void read_doubles(const std::vector<std::uint8_t>& blob, std::size_t& cursor, double* dst,
                         std::size_t n) {
  if (cursor + n * sizeof(double) > blob.size()) throw DomainError("model file: blob truncated");
  std::memcpy(dst, blob.data() + cursor, n * sizeof(double));
  cursor += n * sizeof(double);
}

inline void append_mask_bits(std::vector<std::uint8_t>& blob, const Matrix2D& mask) {
  std::uint8_t acc = 0;
  int nbits = 0;
  for (double v : mask.data) {
    acc = static_cast<std::uint8_t>(acc | ((v != 0.0 ? 1 : 0) << nbits));
    if (++nbits == 8) {
      blob.push_back(acc);
      acc = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) blob.push_back(acc);
}

inline Matrix2D read_mask_bits(const std::vector<std::uint8_t>& blob, std::size_t& cursor,
                               std::size_t rows, std::size_t cols) {
  Matrix2D mask(rows, cols);
  const std::size_t nbytes = (rows * cols + 7) / 8;
  if (cursor + nbytes > blob.size()) throw DomainError("model file: mask bits truncated");
  for (std::size_t i = 0; i < rows * cols; ++i)
    mask.data[i] = (blob[cursor + i / 8] >> (i % 8)) & 1 ? 1.0 : 0.0;
  cursor += nbytes;
  return mask;
}

inline void save_model(const Model& model, const std::string& path) {
  ordered_json header;
  header["spec"] = spec_to_json(model.spec);
  if (model.act_quant_bits) header["act_quant_bits"] = *model.act_quant_bits;
  ordered_json layers = ordered_json::array();

  std::vector<std::uint8_t> blob;
  append_doubles(blob, model.embedding.data.data(), model.embedding.size());
  {
    ordered_json e;
    e["name"] = "embedding";
    e["rows"] = model.embedding.rows;
    e["cols"] = model.embedding.cols;
    e["mask"] = false;
    layers.push_back(e);
  }
  for (const auto& meta : matrix_order(model)) {
    append_doubles(blob, meta.wm->w.data.data(), meta.wm->w.size());
    ordered_json e;
    e["name"] = meta.name;
    e["rows"] = meta.wm->w.rows;
    e["cols"] = meta.wm->w.cols;
    e["mask"] = meta.wm->mask.has_value();
    if (meta.wm->qp) e["quant"] = qp_to_json(*meta.wm->qp);
    layers.push_back(e);
  }
  ordered_json biases = ordered_json::array();
  for (std::size_t l = 0; l < model.tower.size(); ++l) {
    append_doubles(blob, model.tower[l].bias.data(), model.tower[l].bias.size());
    biases.push_back(model.tower[l].bias.size());
  }
  append_doubles(blob, model.head.bias.data(), model.head.bias.size());
  biases.push_back(model.head.bias.size());
  header["layers"] = layers;
  header["bias_lengths"] = biases;
  for (const auto& meta : matrix_order(model))
    if (meta.wm->mask) append_mask_bits(blob, *meta.wm->mask);

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("save_model: cannot open " + path);
  out.write(kMagic, 4);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out) throw ConfigError("save_model: write failed for " + path);
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_model: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DomainError("load_model: bad magic in " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw DomainError("load_model: unsupported version");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  std::vector<std::uint8_t> blob{std::istreambuf_iterator<char>(in),
                                 std::istreambuf_iterator<char>()};

  const ordered_json header = ordered_json::parse(header_str);
  Model model;
  model.spec = spec_from_json(header.at("spec"));
  model.spec.validate();
  if (header.contains("act_quant_bits"))
    model.act_quant_bits = header.at("act_quant_bits").get<std::uint32_t>();
  if (model.spec.attention) {
    model.attn.resize(model.spec.attention->n_layers);
    if (model.spec.attention->sparse())
      model.attn_pattern = build_sparsity_pattern(*model.spec.attention);
  }
  model.tower.resize(model.spec.l_net);

  std::size_t cursor = 0;
  const auto& layers = header.at("layers");
  std::size_t entry = 0;
  auto read_matrix = [&](std::size_t rows, std::size_t cols) {
    Matrix2D m(rows, cols);
    read_doubles(blob, cursor, m.data.data(), m.size());
    return m;
  };
  // embedding first
  {
    const auto& e = layers.at(entry++);
    model.embedding = read_matrix(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>());
  }
  struct PendingMask {
    WeightMatrix* wm;
    std::size_t rows, cols;
  };
  std::vector<PendingMask> pending;
  auto read_weight = [&](WeightMatrix& wm) {
    const auto& e = layers.at(entry++);
    const std::size_t rows = e.at("rows").get<std::size_t>();
    const std::size_t cols = e.at("cols").get<std::size_t>();
    wm.w = read_matrix(rows, cols);
    if (e.contains("quant")) wm.qp = qp_from_json(e.at("quant"));
    if (e.at("mask").get<bool>()) pending.push_back({&wm, rows, cols});
  };
  for (auto& a : model.attn) {
    read_weight(a.q);
    read_weight(a.k);
    read_weight(a.v);
  }
  for (auto& l : model.tower) read_weight(l.wm);
  read_weight(model.head.wm);

  const auto& bias_lengths = header.at("bias_lengths");
  for (std::size_t l = 0; l < model.tower.size(); ++l) {
    model.tower[l].bias.assign(bias_lengths.at(l).get<std::size_t>(), 0.0);
    read_doubles(blob, cursor, model.tower[l].bias.data(), model.tower[l].bias.size());
  }
  model.head.bias.assign(bias_lengths.at(model.tower.size()).get<std::size_t>(), 0.0);
  read_doubles(blob, cursor, model.head.bias.data(), model.head.bias.size());

  for (auto& p : pending) p.wm->mask = read_mask_bits(blob, cursor, p.rows, p.cols);
  if (cursor != blob.size()) throw DomainError("load_model: trailing bytes in blob");
  return model;
}

}  // namespace model_io

using model_io::load_model;
using model_io::save_model;

}  // namespace lightrec
