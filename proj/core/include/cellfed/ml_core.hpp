// Copyright 2026 The CellFed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CELLFED_ML_CORE_HPP
#define CELLFED_ML_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cellfed/random.hpp"
#include "cellfed/types.hpp"

namespace cellfed::ml {

/// Row i of `features` is sample i.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  int num_features() const { return static_cast<int>(features.cols()); }
  void validate() const;
};

enum class ModelKind { kLogistic, kMlp };

/// Softmax classifier. The MLP is inputs -> tanh(hidden) -> classes.
///
/// Flat parameter layout, all matrices row-major:
///   logistic: W (classes x inputs), b (classes)
///   mlp:      W1 (hidden x inputs), b1 (hidden), W2 (classes x hidden), b2 (classes)
struct Model {
  ModelKind kind = ModelKind::kMlp;
  int inputs = 0;
  int hidden = 0;
  int classes = 0;

  static Model logistic(int inputs, int classes);
  static Model mlp(int inputs, int hidden, int classes);

  Eigen::Index dimension() const;
};

struct LossGradient {
  double loss = 0.0;
  Vector gradient;
};

/// Mean softmax cross-entropy over `batch` and its gradient.
LossGradient loss_and_gradient(const Model& model, const VectorRef& w, const Dataset& data,
                               std::span<const std::size_t> batch);
double loss(const Model& model, const VectorRef& w, const Dataset& data,
            std::span<const std::size_t> batch);
/// Loss over the whole dataset.
double loss(const Model& model, const VectorRef& w, const Dataset& data);

/// Fraction of samples whose argmax logit (lowest index on ties) equals the label.
double evaluate(const Model& model, const VectorRef& w, const Dataset& data);

/// Glorot-uniform weights and zero biases for the MLP; zeros for logistic.
Vector initial_weights(const Model& model, Rng& rng);

/// `num_classes` Gaussian blobs in `num_features` dimensions. Class means
/// are random unit directions scaled by `separation`; noise is N(0, I).
/// Labels are balanced (sample counts differ by at most one) and shuffled.
Dataset generate_synthetic(std::uint64_t seed, std::size_t n, int num_classes, int num_features,
                           double separation);

enum class PartitionMode { kIid, kLabelShard };

struct PartitionSpec {
  PartitionMode mode = PartitionMode::kIid;
  int clients = 1;
  std::uint64_t seed = 0;
};

/// Disjoint index shards covering the dataset; sizes differ by at most one
/// (IID) or one per constituent shard (label-shard).
///
/// kLabelShard sorts by label, cuts 2M contiguous shards and deals two
/// random shards to each client.
std::vector<std::vector<std::size_t>> partition(const Dataset& data, const PartitionSpec& spec);

/// IDX (big-endian) files: ubyte images 0x00000803 (scaled to [0, 1],
/// flattened row-major) and ubyte labels 0x00000801.
Matrix read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);
Dataset load_idx(const std::string& images_path, const std::string& labels_path, int num_classes = 10);

/// label,f0,f1,... with a header row.
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace cellfed::ml

#endif  // CELLFED_ML_CORE_HPP
