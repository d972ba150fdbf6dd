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

// Stage 2: training the contractive autoencoder on summary archives,
// embedding tiles with its encoder, and the CAE1 model file.

#ifndef REACHGRID_CAE_H_
#define REACHGRID_CAE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachgrid/cae_network.h"
#include "reachgrid/summary_archive.h"
#include "reachgrid/tilegrid.h"

namespace reachgrid {

inline constexpr std::string_view kModelMagic = "CAE1";

struct TrainingLogRow {
  int epoch = 0;
  double recon_mse = 0.0;
  double contractive = 0.0;
  double total = 0.0;
};

struct CaeModel {
  CaeNetwork<float> network;
  std::vector<TrainingLogRow> log;

  explicit CaeModel(const CaeConfig& cfg) : network(cfg) {}
  const CaeConfig& config() const { return network.config(); }
};

struct EmbeddingVector {
  TileId tile;
  Eigen::VectorXf values;
};

// Config whose input shape matches summaries of radius r.
CaeConfig config_for_radius(int r, CaeConfig base = {});

// Fixed 90/10 split: a tile is held out iff FNV-1a(quadkey) % 10 == 0.
bool is_validation_tile(TileId t);

// Examples are summary tensors in archive layout (one row per tile).
using SummaryRows =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Mini-batch momentum SGD on the rows whose index is in `train_rows`.
// Throws std::runtime_error on a non-finite loss.
CaeModel train(const SummaryRows& examples,
               std::span<const Eigen::Index> train_rows, const CaeConfig& cfg,
               const std::function<void(const TrainingLogRow&)>& on_epoch = {});

// Trains on the archive's training split.
CaeModel train(const SummaryArchive& archive, const CaeConfig& cfg,
               const std::function<void(const TrainingLogRow&)>& on_epoch = {});

// Throws IncompatibleArtifact("r" / "channels") on shape mismatch.
void check_compatible(const CaeModel& model, const SummaryArchiveHeader& h);

Eigen::VectorXf embed_one(const CaeModel& model, std::span<const float> tensor);
std::vector<EmbeddingVector> embed(const CaeModel& model,
                                   const SummaryArchive& archive);

// Mean over rows of sqrt(D * mean_k ||J v_k||^2), an estimate of the
// encoder Jacobian Frobenius norm, with `probes` seeded directions per row.
double mean_jacobian_norm(const CaeModel& model, const SummaryRows& examples,
                          std::span<const Eigen::Index> rows, int probes,
                          std::uint64_t seed);

// Mean ||f(x + eps) - f(x)|| / ||eps|| for random eps of norm `eps_norm`.
double perturbation_sensitivity(const CaeModel& model,
                                const SummaryRows& examples,
                                std::span<const Eigen::Index> rows,
                                double eps_norm, std::uint64_t seed);

// Max relative error between the analytic gradient of the full objective
// and central finite differences (step h) over every parameter, in double
// precision, for a seeded network and seeded toy inputs.
struct GradientCheckResult {
  double max_relative_error = 0.0;
  Eigen::Index worst_parameter = -1;
  Eigen::Index parameters = 0;
};
GradientCheckResult gradient_check(const CaeConfig& cfg, int examples,
                                   std::uint64_t seed, double h = 1e-5);

void write_model(std::ostream& out, const CaeModel& model);
CaeModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const CaeModel& model);
CaeModel load_model(const std::filesystem::path& path);

// "epoch,recon_mse,contractive,total"
void write_training_log(std::ostream& out, std::span<const TrainingLogRow> log);

// "quadkey,e0,...,e{d-1}" with round-trip exact float formatting.
void write_embeddings_csv(std::ostream& out,
                          std::span<const EmbeddingVector> embeddings);
std::vector<EmbeddingVector> read_embeddings_csv(std::istream& in);

}  // namespace reachgrid

#endif  // REACHGRID_CAE_H_
