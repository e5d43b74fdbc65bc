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

#include "cellfed/ml_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "cellfed/errors.hpp"

namespace cellfed::ml {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

Matrix gather(const Dataset& data, std::span<const std::size_t> batch) {
  Matrix X(static_cast<Eigen::Index>(batch.size()), data.features.cols());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    X.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(batch[r]));
  }
  return X;
}

// Logits (batch x classes); also returns the hidden activations for the MLP.
Matrix forward(const Model& model, const VectorRef& w, const Matrix& X, Matrix* hidden_out) {
  const Eigen::Index p = model.inputs;
  const Eigen::Index C = model.classes;
  if (model.kind == ModelKind::kLogistic) {
    ConstMap W(w.data(), C, p);
    const auto b = w.segment(C * p, C);
    Matrix Z = X * W.transpose();
    Z.rowwise() += b.transpose();
    return Z;
  }
  const Eigen::Index h = model.hidden;
  ConstMap W1(w.data(), h, p);
  const auto b1 = w.segment(h * p, h);
  ConstMap W2(w.data() + h * p + h, C, h);
  const auto b2 = w.segment(h * p + h + C * h, C);
  Matrix A = X * W1.transpose();
  A.rowwise() += b1.transpose();
  Matrix H = A.array().tanh().matrix();
  Matrix Z = H * W2.transpose();
  Z.rowwise() += b2.transpose();
  if (hidden_out != nullptr) *hidden_out = std::move(H);
  return Z;
}

// Row-wise softmax in place; returns the summed negative log-likelihood.
double softmax_nll(Matrix& Z, const std::vector<int>& labels, std::span<const std::size_t> batch) {
  double nll = 0.0;
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const double mx = Z.row(r).maxCoeff();
    Z.row(r).array() -= mx;
    const double lse = std::log(Z.row(r).array().exp().sum());
    const int y = labels[batch[static_cast<std::size_t>(r)]];
    nll += lse - Z(r, y);
    Z.row(r) = (Z.row(r).array() - lse).exp().matrix();
  }
  return nll;
}

void check_weights(const Model& model, const VectorRef& w) {
  if (w.size() != model.dimension()) throw DimensionMismatch("weight vector size differs from model dimension");
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw InvalidArgument("feature rows and label count differ");
  }
  if (num_classes < 1) throw InvalidArgument("dataset needs at least one class");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidArgument("label out of range");
  }
}

Model Model::logistic(int inputs, int classes) {
  if (inputs < 1 || classes < 2) throw InvalidArgument("logistic model needs inputs >= 1, classes >= 2");
  return Model{ModelKind::kLogistic, inputs, 0, classes};
}

Model Model::mlp(int inputs, int hidden, int classes) {
  if (inputs < 1 || hidden < 1 || classes < 2) throw InvalidArgument("mlp needs positive sizes and classes >= 2");
  return Model{ModelKind::kMlp, inputs, hidden, classes};
}

Eigen::Index Model::dimension() const {
  const Eigen::Index p = inputs;
  const Eigen::Index h = hidden;
  const Eigen::Index C = classes;
  if (kind == ModelKind::kLogistic) return C * p + C;
  return h * p + h + C * h + C;
}

LossGradient loss_and_gradient(const Model& model, const VectorRef& w, const Dataset& data,
                               std::span<const std::size_t> batch) {
  check_weights(model, w);
  if (batch.empty()) throw InvalidArgument("empty minibatch");
  const Matrix X = gather(data, batch);
  Matrix H;
  Matrix P = forward(model, w, X, model.kind == ModelKind::kMlp ? &H : nullptr);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossGradient out;
  out.loss = softmax_nll(P, data.labels, batch) * inv_b;

  // dZ = (softmax - onehot) / b
  Matrix dZ = P;
  for (std::size_t r = 0; r < batch.size(); ++r) dZ(static_cast<Eigen::Index>(r), data.labels[batch[r]]) -= 1.0;
  dZ *= inv_b;

  const Eigen::Index p = model.inputs;
  const Eigen::Index C = model.classes;
  out.gradient.resize(model.dimension());
  if (model.kind == ModelKind::kLogistic) {
    MutMap(out.gradient.data(), C, p) = dZ.transpose() * X;
    out.gradient.segment(C * p, C) = dZ.colwise().sum().transpose();
    return out;
  }
  const Eigen::Index h = model.hidden;
  ConstMap W2(w.data() + h * p + h, C, h);
  MutMap(out.gradient.data() + h * p + h, C, h) = dZ.transpose() * H;
  out.gradient.segment(h * p + h + C * h, C) = dZ.colwise().sum().transpose();
  const Matrix dA = ((dZ * W2).array() * (1.0 - H.array().square())).matrix();
  MutMap(out.gradient.data(), h, p) = dA.transpose() * X;
  out.gradient.segment(h * p, h) = dA.colwise().sum().transpose();
  return out;
}

double loss(const Model& model, const VectorRef& w, const Dataset& data, std::span<const std::size_t> batch) {
  check_weights(model, w);
  if (batch.empty()) throw InvalidArgument("empty batch");
  Matrix Z = forward(model, w, gather(data, batch), nullptr);
  return softmax_nll(Z, data.labels, batch) / static_cast<double>(batch.size());
}

double loss(const Model& model, const VectorRef& w, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss(model, w, data, all);
}

double evaluate(const Model& model, const VectorRef& w, const Dataset& data) {
  check_weights(model, w);
  if (data.size() == 0) return 0.0;
  const Matrix Z = forward(model, w, data.features, nullptr);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < Z.cols(); ++c) {
      if (Z(r, c) > Z(r, best)) best = c;
    }
    if (best == data.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Vector initial_weights(const Model& model, Rng& rng) {
  Vector w = Vector::Zero(model.dimension());
  if (model.kind == ModelKind::kLogistic) return w;
  const Eigen::Index p = model.inputs;
  const Eigen::Index h = model.hidden;
  const Eigen::Index C = model.classes;
  const auto fill = [&](Eigen::Index offset, Eigen::Index count, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < count; ++i) w[offset + i] = (2.0 * unit_uniform(rng) - 1.0) * a;
  };
  fill(0, h * p, static_cast<double>(p), static_cast<double>(h));
  fill(h * p + h, C * h, static_cast<double>(h), static_cast<double>(C));
  return w;
}

Dataset generate_synthetic(std::uint64_t seed, std::size_t n, int num_classes, int num_features,
                           double separation) {
  if (num_classes < 2 || num_features < 1) throw InvalidArgument("synthetic data needs classes >= 2, features >= 1");
  Rng rng = make_rng(seed, "data.synthetic");
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix means(num_classes, num_features);
  for (int c = 0; c < num_classes; ++c) {
    for (int f = 0; f < num_features; ++f) means(c, f) = normal(rng);
    const double norm = means.row(c).norm();
    if (norm > 0.0) means.row(c) *= separation / norm;
  }

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(num_classes));
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset data;
  data.num_classes = num_classes;
  data.labels = std::move(labels);
  data.features.resize(static_cast<Eigen::Index>(n), num_features);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int f = 0; f < num_features; ++f) data.features(r, f) = means(data.labels[i], f) + normal(rng);
  }
  return data;
}

std::vector<std::vector<std::size_t>> partition(const Dataset& data, const PartitionSpec& spec) {
  const std::size_t M = static_cast<std::size_t>(spec.clients);
  if (spec.clients < 1) throw InvalidArgument("partition needs at least one client");
  Rng rng = make_rng(spec.seed, "data.partition");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto split = [](const std::vector<std::size_t>& items, std::size_t parts) {
    std::vector<std::vector<std::size_t>> out(parts);
    const std::size_t base = items.size() / parts;
    const std::size_t extra = items.size() % parts;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < parts; ++s) {
      const std::size_t len = base + (s < extra ? 1 : 0);
      out[s].assign(items.begin() + static_cast<std::ptrdiff_t>(pos),
                    items.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
    return out;
  };

  if (spec.mode == PartitionMode::kIid) {
    if (data.size() < M) throw InvalidArgument("fewer samples than clients");
    std::shuffle(order.begin(), order.end(), rng);
    return split(order, M);
  }

  if (data.size() < 2 * M) throw InvalidArgument("label-shard partition needs at least 2 samples per client");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data.labels[a] < data.labels[b]; });
  const auto shards = split(order, 2 * M);
  std::vector<std::size_t> shard_ids(2 * M);
  std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
  std::shuffle(shard_ids.begin(), shard_ids.end(), rng);
  std::vector<std::vector<std::size_t>> clients(M);
  for (std::size_t j = 0; j < M; ++j) {
    for (std::size_t s : {shard_ids[2 * j], shard_ids[2 * j + 1]}) {
      clients[j].insert(clients[j].end(), shards[s].begin(), shards[s].end());
    }
    std::sort(clients[j].begin(), clients[j].end());
  }
  return clients;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError(path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t count, const std::string& path) {
  std::vector<std::uint8_t> bytes(count);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count))) {
    throw IoError(path + ": truncated IDX payload");
  }
  return bytes;
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Matrix read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_be32(in, path) != kIdxImagesMagic) throw IoError(path + ": not an IDX ubyte image file");
  const std::uint32_t n = read_be32(in, path);
  const std::uint32_t rows = read_be32(in, path);
  const std::uint32_t cols = read_be32(in, path);
  const std::size_t pixels = std::size_t{rows} * cols;
  const auto bytes = read_payload(in, std::size_t{n} * pixels, path);
  Matrix X(n, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < pixels; ++k) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = bytes[i * pixels + k] / 255.0;
    }
  }
  return X;
}

std::vector<int> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_be32(in, path) != kIdxLabelsMagic) throw IoError(path + ": not an IDX ubyte label file");
  const std::uint32_t n = read_be32(in, path);
  const auto bytes = read_payload(in, n, path);
  return {bytes.begin(), bytes.end()};
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols) throw InvalidArgument("pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_be32(out, kIdxImagesMagic);
  write_be32(out, count);
  write_be32(out, rows);
  write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, int num_classes) {
  Dataset data;
  data.features = read_idx_images(images_path);
  data.labels = read_idx_labels(labels_path);
  data.num_classes = num_classes;
  data.validate();
  return data;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "label";
  for (int f = 0; f < data.num_features(); ++f) out << ",f" << f;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (int f = 0; f < data.num_features(); ++f) out << ',' << data.features(static_cast<Eigen::Index>(i), f);
    out << '\n';
  }
}

}  // namespace cellfed::ml
