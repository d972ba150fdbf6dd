/* Copyright 2026 The Reachgrid Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "reachgrid/cae.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "reachgrid/errors.h"
#include "reachgrid/io.h"

namespace reachgrid {

namespace {

using FloatNet = CaeNetwork<float>;

FloatNet::Matrix example_matrix(const CaeConfig& cfg,
                                std::span<const float> tensor) {
  return Eigen::Map<const FloatNet::Matrix>(tensor.data(), cfg.in_channels,
                                            Eigen::Index{cfg.side} * cfg.side);
}

FloatNet::Matrix example_matrix(const CaeConfig& cfg, const SummaryRows& rows,
                                Eigen::Index i) {
  return example_matrix(
      cfg, std::span<const float>(rows.row(i).data(),
                                  static_cast<std::size_t>(rows.cols())));
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s, std::string_view field) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(',', start), s.size());
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + end, v);
    if (ec != std::errc() || ptr != s.data() + end) {
      throw FormatError("CAE1 field '" + std::string(field) +
                        "' is not an integer list: '" + s + "'");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

}  // namespace

void CaeConfig::validate() const {
  if (in_channels < 1 || side < 1) throw ParameterError("bad input shape");
  if (conv_channels.empty()) throw ParameterError("need at least one conv layer");
  for (int c : conv_channels) {
    if (c < 1) throw ParameterError("conv channels must be >= 1");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ParameterError("kernel must be odd");
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (d_r < 1) throw ParameterError("d_R must be >= 1");
  if (!(lambda_c >= 0.0)) throw ParameterError("lambda_c must be >= 0");
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ParameterError("momentum must be in [0, 1)");
  }
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (epochs < 0) throw ParameterError("epochs must be >= 0");
}

CaeConfig config_for_radius(int r, CaeConfig base) {
  base.in_channels = kSummaryChannels;
  base.side = 2 * r + 1;
  return base;
}

bool is_validation_tile(TileId t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tile_to_quadkey(t)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h % 10 == 0;
}

CaeModel train(const SummaryRows& examples,
               std::span<const Eigen::Index> train_rows, const CaeConfig& cfg,
               const std::function<void(const TrainingLogRow&)>& on_epoch) {
  cfg.validate();
  if (train_rows.empty()) throw ParameterError("no training examples");
  if (examples.cols() != cfg.input_size()) {
    throw IncompatibleArtifact("r", "example size " +
                                        std::to_string(examples.cols()) +
                                        " does not match model input " +
                                        std::to_string(cfg.input_size()));
  }
  CaeModel model(cfg);
  FloatNet& net = model.network;
  net.init_params(cfg.seed);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  FloatNet::Vector velocity = FloatNet::Vector::Zero(net.param_count());
  FloatNet::Vector grad(net.param_count());
  std::vector<Eigen::Index> order(train_rows.begin(), train_rows.end());
  const bool contractive = cfg.lambda_c > 0.0;
  const auto lr = static_cast<float>(cfg.learning_rate);
  const auto mom = static_cast<float>(cfg.momentum);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double recon = 0.0, penalty = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<FloatNet::Matrix> xs, probes;
      for (std::size_t i = start; i < end; ++i) {
        xs.push_back(example_matrix(cfg, examples, order[i]));
        if (contractive) probes.push_back(random_unit_direction<float>(cfg, rng));
      }
      const FloatNet::Loss loss = net.evaluate(xs, probes, &grad);
      if (!std::isfinite(loss.total) || !grad.allFinite()) {
        throw std::runtime_error(
            "non-finite loss at epoch " + std::to_string(epoch) +
            " (recon=" + std::to_string(loss.recon) +
            ", contractive=" + std::to_string(loss.contractive) +
            "); lower the learning rate or lambda_c");
      }
      const auto n = static_cast<double>(end - start);
      recon += loss.recon * n;
      penalty += loss.contractive * n;
      velocity = mom * velocity - lr * grad;
      net.params() += velocity;
    }
    const auto count = static_cast<double>(order.size());
    TrainingLogRow row{epoch, recon / count, penalty / count, 0.0};
    row.total = row.recon_mse + cfg.lambda_c * row.contractive;
    model.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return model;
}

CaeModel train(const SummaryArchive& archive, const CaeConfig& cfg,
               const std::function<void(const TrainingLogRow&)>& on_epoch) {
  if (archive.tiles.empty()) throw ParameterError("summary archive is empty");
  if (cfg.side != archive.header.params.side() ||
      cfg.in_channels != kSummaryChannels) {
    throw IncompatibleArtifact("r", "model input side " +
                                        std::to_string(cfg.side) +
                                        " does not match archive side " +
                                        std::to_string(archive.header.params.side()));
  }
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < archive.tiles.size(); ++i) {
    if (!is_validation_tile(archive.tiles[i])) {
      rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  // Tiny archives may have no training tiles under the fixed split.
  if (rows.empty()) {
    rows.resize(archive.tiles.size());
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  }
  return train(archive.tensors, rows, cfg, on_epoch);
}

void check_compatible(const CaeModel& model, const SummaryArchiveHeader& h) {
  const CaeConfig& cfg = model.config();
  if (cfg.in_channels != kSummaryChannels) {
    throw IncompatibleArtifact("channels",
                               "model expects " + std::to_string(cfg.in_channels) +
                                   " channels, archive has " +
                                   std::to_string(kSummaryChannels));
  }
  if (cfg.side != h.params.side()) {
    throw IncompatibleArtifact(
        "r", "model was trained on r=" + std::to_string((cfg.side - 1) / 2) +
                 ", archive has r=" + std::to_string(h.params.r));
  }
}

Eigen::VectorXf embed_one(const CaeModel& model, std::span<const float> tensor) {
  if (tensor.size() != static_cast<std::size_t>(model.config().input_size())) {
    throw IncompatibleArtifact("r", "tensor size does not match the model");
  }
  return model.network.encode(example_matrix(model.config(), tensor));
}

std::vector<EmbeddingVector> embed(const CaeModel& model,
                                   const SummaryArchive& archive) {
  check_compatible(model, archive.header);
  std::vector<std::size_t> order(archive.tiles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quadkey_order(archive.tiles[a]) < quadkey_order(archive.tiles[b]);
  });
  std::vector<EmbeddingVector> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    out.push_back({archive.tiles[i],
                   model.network.encode(example_matrix(
                       model.config(), archive.tensors,
                       static_cast<Eigen::Index>(i)))});
  }
  return out;
}

double mean_jacobian_norm(const CaeModel& model, const SummaryRows& examples,
                          std::span<const Eigen::Index> rows, int probes,
                          std::uint64_t seed) {
  if (rows.empty() || probes < 1) return 0.0;
  const CaeConfig& cfg = model.config();
  Rng rng(seed);
  const double dim = cfg.input_size();
  double total = 0.0;
  for (Eigen::Index row : rows) {
    const auto x = example_matrix(cfg, examples, row);
    double sq = 0.0;
    for (int k = 0; k < probes; ++k) {
      const auto v = random_unit_direction<float>(cfg, rng);
      sq += static_cast<double>(model.network.jvp(x, v).squaredNorm());
    }
    total += std::sqrt(dim * sq / probes);
  }
  return total / static_cast<double>(rows.size());
}

double perturbation_sensitivity(const CaeModel& model,
                                const SummaryRows& examples,
                                std::span<const Eigen::Index> rows,
                                double eps_norm, std::uint64_t seed) {
  if (rows.empty()) return 0.0;
  const CaeConfig& cfg = model.config();
  Rng rng(seed);
  double total = 0.0;
  for (Eigen::Index row : rows) {
    const auto x = example_matrix(cfg, examples, row);
    const FloatNet::Matrix eps =
        random_unit_direction<float>(cfg, rng) * static_cast<float>(eps_norm);
    const auto fx = model.network.encode(x);
    const auto fxe = model.network.encode(x + eps);
    total += static_cast<double>((fxe - fx).norm()) / eps_norm;
  }
  return total / static_cast<double>(rows.size());
}

GradientCheckResult gradient_check(const CaeConfig& cfg, int examples,
                                   std::uint64_t seed, double h) {
  using Net = CaeNetwork<double>;
  // Differences are taken in extended precision: in double, one ulp of the
  // loss divided by 2h already exceeds 1e-7 of the smallest gradients.
  using Reference = CaeNetwork<long double>;
  Net net(cfg);
  net.init_params(seed);
  // Non-zero biases so every parameter is exercised.
  Rng rng(seed + 1);
  for (Eigen::Index i = 0; i < net.param_count(); ++i) {
    if (net.params()[i] == 0.0) net.params()[i] = rng.uniform(-0.1, 0.1);
  }
  std::vector<Net::Matrix> xs, probes;
  for (int n = 0; n < examples; ++n) {
    Net::Matrix x(cfg.in_channels, Eigen::Index{cfg.side} * cfg.side);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    xs.push_back(std::move(x));
    probes.push_back(random_unit_direction<double>(cfg, rng));
  }
  Net::Vector analytic;
  net.evaluate(xs, probes, &analytic);

  Reference ref(cfg);
  ref.params() = net.params().cast<long double>();
  std::vector<Reference::Matrix> xs_ref, probes_ref;
  for (int n = 0; n < examples; ++n) {
    xs_ref.push_back(xs[n].cast<long double>());
    probes_ref.push_back(probes[n].cast<long double>());
  }
  const long double step = h;

  GradientCheckResult result;
  result.parameters = net.param_count();
  for (Eigen::Index i = 0; i < net.param_count(); ++i) {
    const long double saved = ref.params()[i];
    ref.params()[i] = saved + step;
    const long double plus = ref.evaluate(xs_ref, probes_ref, nullptr).total;
    ref.params()[i] = saved - step;
    const long double minus = ref.evaluate(xs_ref, probes_ref, nullptr).total;
    ref.params()[i] = saved;
    const double numeric = static_cast<double>((plus - minus) / (2 * step));
    // Gradients below 1e-8 in magnitude are compared absolutely.
    const double denom =
        std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    const double rel = std::abs(numeric - analytic[i]) / denom;
    if (rel > result.max_relative_error || result.worst_parameter < 0) {
      result.max_relative_error = std::max(result.max_relative_error, rel);
      result.worst_parameter = i;
    }
  }
  return result;
}

void write_model(std::ostream& out, const CaeModel& model) {
  const CaeConfig& cfg = model.config();
  KeyValueManifest m;
  m.set("in_channels", std::int64_t{cfg.in_channels});
  m.set("side", std::int64_t{cfg.side});
  m.set("r", std::int64_t{(cfg.side - 1) / 2});
  m.set("conv_channels", join_ints(cfg.conv_channels));
  m.set("kernel", std::int64_t{cfg.kernel});
  m.set("stride", std::int64_t{cfg.stride});
  m.set("d_r", std::int64_t{cfg.d_r});
  m.set("activation",
        cfg.activation == Activation::kLeakyRelu ? "leaky_relu" : "identity");
  m.set("leak", cfg.leak);
  m.set("output", cfg.output_sigmoid ? "sigmoid" : "identity");
  m.set("lambda_c", cfg.lambda_c);
  m.set("learning_rate", cfg.learning_rate);
  m.set("momentum", cfg.momentum);
  m.set("batch_size", std::int64_t{cfg.batch_size});
  m.set("epochs", std::int64_t{cfg.epochs});
  m.set("seed", std::to_string(cfg.seed));
  m.set("param_count", static_cast<std::int64_t>(model.network.param_count()));
  out << kModelMagic << '\n';
  m.write(out);
  const auto& p = model.network.params();
  write_f32_le(out, std::span<const float>(p.data(), static_cast<std::size_t>(p.size())));
}

CaeModel read_model(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kModelMagic) {
    throw FormatError("not a CAE1 model file (bad magic)");
  }
  const KeyValueManifest m = KeyValueManifest::read(in);
  CaeConfig cfg;
  cfg.in_channels = static_cast<int>(m.get_int("in_channels"));
  cfg.side = static_cast<int>(m.get_int("side"));
  cfg.conv_channels = split_ints(m.get("conv_channels"), "conv_channels");
  cfg.kernel = static_cast<int>(m.get_int("kernel"));
  cfg.stride = static_cast<int>(m.get_int("stride"));
  cfg.d_r = static_cast<int>(m.get_int("d_r"));
  const std::string& act = m.get("activation");
  if (act != "leaky_relu" && act != "identity") {
    throw FormatError("CAE1 field 'activation' has unknown value '" + act + "'");
  }
  cfg.activation = act == "identity" ? Activation::kIdentity : Activation::kLeakyRelu;
  cfg.leak = m.get_double("leak");
  cfg.output_sigmoid = m.get("output") == "sigmoid";
  cfg.lambda_c = m.get_double("lambda_c");
  cfg.learning_rate = m.get_double("learning_rate");
  cfg.momentum = m.get_double("momentum");
  cfg.batch_size = static_cast<int>(m.get_int("batch_size"));
  cfg.epochs = static_cast<int>(m.get_int("epochs"));
  cfg.seed = std::stoull(m.get("seed"));
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("CAE1 header: ") + e.what());
  }
  CaeModel model(cfg);
  if (m.get_int("param_count") != model.network.param_count()) {
    throw FormatError("CAE1 field 'param_count' does not match the layer specs");
  }
  auto& p = model.network.params();
  read_f32_le(in, std::span<float>(p.data(), static_cast<std::size_t>(p.size())));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after CAE1 weights");
  }
  return model;
}

void save_model(const std::filesystem::path& path, const CaeModel& model) {
  atomic_write(path, [&](std::ostream& out) { write_model(out, model); });
}

CaeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in);
}

void write_training_log(std::ostream& out, std::span<const TrainingLogRow> log) {
  out << "epoch,recon_mse,contractive,total\n";
  char buf[128];
  for (const TrainingLogRow& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", row.epoch,
                  row.recon_mse, row.contractive, row.total);
    out << buf;
  }
}

void write_embeddings_csv(std::ostream& out,
                          std::span<const EmbeddingVector> embeddings) {
  const Eigen::Index d = embeddings.empty() ? 0 : embeddings.front().values.size();
  out << "quadkey";
  for (Eigen::Index k = 0; k < d; ++k) out << ",e" << k;
  out << '\n';
  char buf[32];
  for (const EmbeddingVector& e : embeddings) {
    if (e.values.size() != d) {
      throw IncompatibleArtifact("d_r", "embeddings have mixed lengths");
    }
    out << tile_to_quadkey(e.tile);
    for (Eigen::Index k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof(buf), ",%.9g", e.values[k]);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<EmbeddingVector> read_embeddings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("quadkey", 0) != 0) {
    throw FormatError("embeddings CSV must start with a 'quadkey' header");
  }
  const auto d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<EmbeddingVector> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<Eigen::Index>(fields.size()) != d + 1) {
      throw FormatError("embeddings CSV line " + std::to_string(line_no) +
                        " has " + std::to_string(fields.size() - 1) +
                        " values, header declares " + std::to_string(d));
    }
    EmbeddingVector e{quadkey_to_tile(fields[0]), Eigen::VectorXf(d)};
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto f = fields[static_cast<std::size_t>(k + 1)];
      float v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw FormatError("bad float on embeddings CSV line " +
                          std::to_string(line_no));
      }
      e.values[k] = v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace reachgrid
