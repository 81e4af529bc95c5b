#include "probekit/encoders.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "probekit/util.hpp"

namespace probekit {

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

VectorStore VectorStore::parse(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!read_line(in, line)) throw Error(ErrorKind::format, "empty vector file");
  const auto header = split_whitespace(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) || dim == 0)
    throw LineError(ErrorKind::format, 1, "expected header '<count> <dim>'");
  VectorStore store(dim);
  store.index_.reserve(count);
  store.data_.reserve(count * dim);
  std::vector<float> values(dim);
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (find_invalid_utf8(line) != std::string::npos) throw LineError(ErrorKind::decode, line_no, "invalid UTF-8");
    // Tokens never contain spaces in .vec files; the first field is the token.
    const auto fields = split_whitespace(line);
    if (fields.size() != dim + 1)
      throw LineError(ErrorKind::format, line_no, "expected " + std::to_string(dim) + " values, found " +
                                                      std::to_string(fields.size() - 1));
    for (std::size_t j = 0; j < dim; ++j) {
      if (!parse_number(fields[j + 1], values[j]) || !std::isfinite(values[j]))
        throw LineError(ErrorKind::format, line_no, "malformed value '" + fields[j + 1] + "'");
    }
    store.add(fields[0], values);
  }
  return store;
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open vector file " + path.string());
  return parse(in);
}

bool VectorStore::add(const std::string& token, std::span<const float> values) {
  if (values.size() != dim_)
    throw Error(ErrorKind::invalid_argument, "vector for '" + token + "' has width " + std::to_string(values.size()) +
                                                 ", store width is " + std::to_string(dim_));
  if (index_.contains(token)) return false;
  index_.emplace(token, index_.size());
  data_.insert(data_.end(), values.begin(), values.end());
  return true;
}

std::span<const float> VectorStore::find(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return {};
  return {data_.data() + it->second * dim_, dim_};
}

Encoding encode_sentence(const VectorStore& store, std::span<const std::string> tokens, PoolingKind kind) {
  const std::size_t d = store.dim();
  std::vector<double> sum(d, 0.0);
  std::vector<double> mx(d, -std::numeric_limits<double>::infinity());
  std::vector<double> mn(d, std::numeric_limits<double>::infinity());
  std::size_t hits = 0;
  for (const auto& tok : tokens) {
    const auto v = store.find(tok);
    if (v.empty()) continue;
    ++hits;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = v[j];
      sum[j] += x;
      mx[j] = std::max(mx[j], x);
      mn[j] = std::min(mn[j], x);
    }
  }
  Encoding out;
  const std::size_t width = kind == PoolingKind::avg ? d : 3 * d;
  if (hits == 0) {
    out.values.assign(width, 0.0);
    out.all_oov = true;
    return out;
  }
  out.values.reserve(width);
  for (std::size_t j = 0; j < d; ++j) out.values.push_back(sum[j] / static_cast<double>(hits));
  if (kind == PoolingKind::pmeans) {
    out.values.insert(out.values.end(), mx.begin(), mx.end());
    out.values.insert(out.values.end(), mn.begin(), mn.end());
  }
  return out;
}

RandomLstm::RandomLstm(std::size_t input_dim, std::size_t hidden, std::uint64_t seed)
    : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim == 0 || hidden == 0) throw Error(ErrorKind::invalid_argument, "random LSTM needs positive widths");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const auto h4 = static_cast<Eigen::Index>(4 * hidden);
  for (auto& dir : dirs_) {
    dir.input_weights.resize(h4, static_cast<Eigen::Index>(input_dim));
    dir.recurrent_weights.resize(h4, static_cast<Eigen::Index>(hidden));
    dir.bias.resize(h4);
    for (Eigen::Index r = 0; r < h4; ++r)
      for (Eigen::Index c = 0; c < dir.input_weights.cols(); ++c) dir.input_weights(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < h4; ++r)
      for (Eigen::Index c = 0; c < dir.recurrent_weights.cols(); ++c)
        dir.recurrent_weights(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < h4; ++r) dir.bias(r) = rng.uniform(-bound, bound);
  }
}

namespace {

void lstm_pass(const RandomLstm::Direction& w, const std::vector<Eigen::VectorXd>& inputs, bool reverse,
               std::size_t hidden, std::vector<Eigen::VectorXd>& states, Eigen::Index offset) {
  const auto h = static_cast<Eigen::Index>(hidden);
  Eigen::VectorXd hs = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd cs = Eigen::VectorXd::Zero(h);
  const std::size_t n = inputs.size();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    const Eigen::VectorXd z = w.input_weights * inputs[t] + w.recurrent_weights * hs + w.bias;
    const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    const Eigen::VectorXd in_gate = z.segment(0, h).unaryExpr(sigmoid);
    const Eigen::VectorXd forget = z.segment(h, h).unaryExpr(sigmoid);
    const Eigen::VectorXd cand = z.segment(2 * h, h).array().tanh();
    const Eigen::VectorXd out_gate = z.segment(3 * h, h).unaryExpr(sigmoid);
    cs = forget.cwiseProduct(cs) + in_gate.cwiseProduct(cand);
    hs = out_gate.cwiseProduct(cs.array().tanh().matrix());
    states[t].segment(offset, h) = hs;
  }
}

}  // namespace

std::vector<Eigen::VectorXd> RandomLstm::hidden_states(const std::vector<Eigen::VectorXd>& inputs) const {
  std::vector<Eigen::VectorXd> states(inputs.size(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width())));
  lstm_pass(dirs_[0], inputs, false, hidden_, states, 0);
  lstm_pass(dirs_[1], inputs, true, hidden_, states, static_cast<Eigen::Index>(hidden_));
  return states;
}

Encoding RandomLstm::encode(const VectorStore& store, std::span<const std::string> tokens) const {
  if (store.dim() != input_dim_)
    throw Error(ErrorKind::invalid_argument, "vector store width " + std::to_string(store.dim()) +
                                                 " does not match LSTM input width " + std::to_string(input_dim_));
  std::vector<Eigen::VectorXd> inputs;
  for (const auto& tok : tokens) {
    const auto v = store.find(tok);
    if (v.empty()) continue;
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    for (std::size_t j = 0; j < v.size(); ++j) x(static_cast<Eigen::Index>(j)) = v[j];
    inputs.push_back(std::move(x));
  }
  Encoding out;
  if (inputs.empty()) {
    out.values.assign(width(), 0.0);
    out.all_oov = true;
    return out;
  }
  const auto states = hidden_states(inputs);
  Eigen::VectorXd pooled = states[0];
  for (std::size_t t = 1; t < states.size(); ++t) pooled = pooled.cwiseMax(states[t]);
  out.values.assign(pooled.data(), pooled.data() + pooled.size());
  return out;
}

void check_alignment(const EmbeddingMatrix& matrix, const ProbingDataset& dataset) {
  if (matrix.size() != dataset.size())
    throw Error(ErrorKind::alignment, "embedding file '" + matrix.encoder_id + "' has " + std::to_string(matrix.size()) +
                                          " rows but dataset '" + dataset.task + "' has " +
                                          std::to_string(dataset.size()) + " instances");
  for (std::size_t i = 0; i < matrix.instance_ids.size(); ++i) {
    if (matrix.instance_ids[i] != std::to_string(i))
      throw Error(ErrorKind::alignment, "embedding row " + std::to_string(i) + " carries instance id '" +
                                            matrix.instance_ids[i] + "'");
  }
}

void write_embeddings(const EmbeddingMatrix& matrix, std::ostream& out) {
  if (matrix.encoder_id.empty() || matrix.encoder_id.find_first_of(" \t\n") != std::string::npos)
    throw Error(ErrorKind::format, "encoder id must be a non-empty token without whitespace");
  if (static_cast<std::size_t>(matrix.rows.cols()) != matrix.dim || matrix.instance_ids.size() != matrix.size())
    throw Error(ErrorKind::format, "embedding matrix shape is inconsistent");
  out << "PROBEEMB 1 " << matrix.size() << ' ' << matrix.dim << ' ' << matrix.encoder_id << '\n';
  char buf[40];
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << matrix.instance_ids[i] << '\t';
    for (std::size_t j = 0; j < matrix.dim; ++j) {
      const double v = matrix.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!std::isfinite(v)) throw Error(ErrorKind::format, "non-finite value in row " + std::to_string(i));
      std::snprintf(buf, sizeof buf, "%.9g", v);
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_embeddings(matrix, ss);
  write_file_atomic(path, ss.str());
}

EmbeddingMatrix read_embeddings(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw Error(ErrorKind::format, "empty embedding file");
  const auto header = split_whitespace(line);
  EmbeddingMatrix m;
  std::size_t n = 0;
  if (header.size() != 5 || header[0] != "PROBEEMB" || header[1] != "1" || !parse_number(header[2], n) ||
      !parse_number(header[3], m.dim) || m.dim == 0)
    throw LineError(ErrorKind::format, 1, "expected header 'PROBEEMB 1 <n> <d> <encoder_id>'");
  m.encoder_id = header[4];
  m.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.dim));
  m.instance_ids.reserve(n);
  std::size_t line_no = 1;
  std::size_t row = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (row == n) throw LineError(ErrorKind::format, line_no, "more rows than the declared " + std::to_string(n));
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw LineError(ErrorKind::format, line_no, "missing instance id column");
    const auto values = split_whitespace(std::string_view(line).substr(tab + 1));
    if (values.size() != m.dim)
      throw LineError(ErrorKind::format, line_no, "row width " + std::to_string(values.size()) +
                                                      " does not match declared " + std::to_string(m.dim));
    for (std::size_t j = 0; j < m.dim; ++j) {
      double v = 0;
      if (!parse_number(values[j], v)) throw LineError(ErrorKind::format, line_no, "malformed value '" + values[j] + "'");
      if (!std::isfinite(v)) throw LineError(ErrorKind::format, line_no, "non-finite value");
      m.rows(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = v;
    }
    m.instance_ids.push_back(line.substr(0, tab));
    ++row;
  }
  if (row != n)
    throw Error(ErrorKind::format, "embedding file declares " + std::to_string(n) + " rows but has " +
                                       std::to_string(row));
  m.all_oov.assign(n, false);
  return m;
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open embedding file " + path.string());
  return read_embeddings(in);
}

namespace {

class PoolingEncoder final : public SentenceEncoder {
 public:
  PoolingEncoder(std::shared_ptr<const VectorStore> store, PoolingKind kind) : store_(std::move(store)), kind_(kind) {}
  std::size_t width() const override { return kind_ == PoolingKind::avg ? store_->dim() : 3 * store_->dim(); }
  Encoding encode(std::span<const std::string> tokens) const override {
    return encode_sentence(*store_, tokens, kind_);
  }

 private:
  std::shared_ptr<const VectorStore> store_;
  PoolingKind kind_;
};

class LstmEncoder final : public SentenceEncoder {
 public:
  LstmEncoder(std::shared_ptr<const VectorStore> store, std::size_t hidden, std::uint64_t seed)
      : store_(std::move(store)), lstm_(store_->dim(), hidden, seed) {}
  std::size_t width() const override { return lstm_.width(); }
  Encoding encode(std::span<const std::string> tokens) const override { return lstm_.encode(*store_, tokens); }

 private:
  std::shared_ptr<const VectorStore> store_;
  RandomLstm lstm_;
};

}  // namespace

std::unique_ptr<SentenceEncoder> make_pooling_encoder(std::shared_ptr<const VectorStore> store, PoolingKind kind) {
  return std::make_unique<PoolingEncoder>(std::move(store), kind);
}

std::unique_ptr<SentenceEncoder> make_random_lstm_encoder(std::shared_ptr<const VectorStore> store,
                                                          std::size_t hidden, std::uint64_t seed) {
  return std::make_unique<LstmEncoder>(std::move(store), hidden, seed);
}

EmbeddingMatrix encode_dataset(const SentenceEncoder& encoder, const std::string& encoder_id,
                               const ProbingDataset& dataset) {
  EmbeddingMatrix m;
  m.encoder_id = encoder_id;
  m.dim = encoder.width();
  m.rows.resize(static_cast<Eigen::Index>(dataset.size()), static_cast<Eigen::Index>(m.dim));
  m.instance_ids.reserve(dataset.size());
  m.all_oov.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto tokens = split_whitespace(dataset.instances[i].sentence);
    const auto enc = encoder.encode(tokens);
    for (std::size_t j = 0; j < m.dim; ++j)
      m.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = enc.values[j];
    m.instance_ids.push_back(std::to_string(i));
    m.all_oov.push_back(enc.all_oov);
  }
  return m;
}

}  // namespace probekit
