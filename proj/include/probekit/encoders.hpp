#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "probekit/taskgen.hpp"

namespace probekit {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Word vectors from a FastText-style .vec file. Immutable after load.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::size_t dim) : dim_(dim) {}

  static VectorStore parse(std::istream& in);
  static VectorStore load(const std::filesystem::path& path);

  // Returns false (and keeps the existing vector) for a duplicate token.
  bool add(const std::string& token, std::span<const float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }

  // Case-sensitive lookup; empty span when out of vocabulary.
  std::span<const float> find(const std::string& token) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
};

struct Encoding {
  std::vector<double> values;
  // Every token was out of vocabulary; `values` is all zeros.
  bool all_oov = false;
};

enum class PoolingKind { avg, pmeans };

// avg: mean of in-vocabulary vectors (d); pmeans: avg‖max‖min (3d).
Encoding encode_sentence(const VectorStore& store, std::span<const std::string> tokens, PoolingKind kind);

// Bidirectional single-layer LSTM with frozen uniform(-1/√h, 1/√h) weights,
// max-pooled over time. Output width is 2h.
class RandomLstm {
 public:
  RandomLstm(std::size_t input_dim, std::size_t hidden, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t width() const noexcept { return 2 * hidden_; }

  Encoding encode(const VectorStore& store, std::span<const std::string> tokens) const;

  // Per-timestep concatenated [forward; backward] hidden states for a sequence.
  std::vector<Eigen::VectorXd> hidden_states(const std::vector<Eigen::VectorXd>& inputs) const;

  struct Direction {
    Eigen::MatrixXd input_weights;      // 4h x d, gate blocks i, f, g, o
    Eigen::MatrixXd recurrent_weights;  // 4h x h
    Eigen::VectorXd bias;               // 4h
  };
  const Direction& forward_weights() const noexcept { return dirs_[0]; }
  const Direction& backward_weights() const noexcept { return dirs_[1]; }

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
  Direction dirs_[2];
};

struct EmbeddingMatrix {
  std::string encoder_id;
  std::size_t dim = 0;
  FeatureMatrix rows;
  std::vector<std::string> instance_ids;
  std::vector<bool> all_oov;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows.rows()); }
};

// Throws Error(alignment) unless the matrix has one row per instance with ids "0".."n-1".
void check_alignment(const EmbeddingMatrix& matrix, const ProbingDataset& dataset);

// Header "PROBEEMB 1 <n> <d> <encoder_id>", then "<id>\t<v1> ... <vd>".
void write_embeddings(const EmbeddingMatrix& matrix, std::ostream& out);
void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(std::istream& in);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::size_t width() const = 0;
  virtual Encoding encode(std::span<const std::string> tokens) const = 0;
};

std::unique_ptr<SentenceEncoder> make_pooling_encoder(std::shared_ptr<const VectorStore> store, PoolingKind kind);
std::unique_ptr<SentenceEncoder> make_random_lstm_encoder(std::shared_ptr<const VectorStore> store,
                                                          std::size_t hidden, std::uint64_t seed);

// Encodes every instance (sentence split on whitespace) in dataset order.
EmbeddingMatrix encode_dataset(const SentenceEncoder& encoder, const std::string& encoder_id,
                               const ProbingDataset& dataset);

}  // namespace probekit
