#include <cmath>
#include <sstream>

#include "doctest.h"
#include "probekit/encoders.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"

using namespace probekit;

namespace {

VectorStore store_of(const std::string& text) {
  std::istringstream in(text);
  return VectorStore::parse(in);
}

std::vector<std::string> toks(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-by-scalar LSTM recurrence for one direction.
std::vector<std::vector<double>> scalar_lstm(const RandomLstm::Direction& w, const std::vector<std::vector<double>>& xs,
                                             std::size_t h, bool reverse) {
  const std::size_t n = xs.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(h));
  std::vector<double> hp(h, 0.0), cp(h, 0.0);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    std::vector<double> z(4 * h);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = w.bias(static_cast<Eigen::Index>(r));
      for (std::size_t c = 0; c < xs[t].size(); ++c)
        acc += w.input_weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * xs[t][c];
      for (std::size_t c = 0; c < h; ++c)
        acc += w.recurrent_weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * hp[c];
      z[r] = acc;
    }
    std::vector<double> hn(h), cn(h);
    for (std::size_t k = 0; k < h; ++k) {
      const double i = sig(z[k]), f = sig(z[h + k]), g = std::tanh(z[2 * h + k]), o = sig(z[3 * h + k]);
      cn[k] = f * cp[k] + i * g;
      hn[k] = o * std::tanh(cn[k]);
    }
    out[t] = hn;
    hp = hn;
    cp = cn;
  }
  return out;
}

}  // namespace

TEST_CASE("vec loader") {
  const auto s = store_of("2 3\na 1 2 3\nb 4 5 6\n");
  CHECK(s.dim() == 3);
  CHECK(s.size() == 2);
  CHECK(s.find("b")[1] == doctest::Approx(5));
  CHECK(s.find("A").empty());
  const auto dup = store_of("2 1\na 1\na 2\n");
  CHECK(dup.size() == 1);
  CHECK(dup.find("a")[0] == doctest::Approx(1));
  try {
    store_of("2 3\na 1 2 3\nb 4 5\n");
    FAIL("expected error");
  } catch (const LineError& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(store_of("junk\n"), Error);
}

TEST_CASE("300-dim store gives a 300-wide average") {
  std::string text = "1 300\nw";
  for (int i = 0; i < 300; ++i) text += " 0.5";
  const auto s = store_of(text + "\n");
  CHECK(s.dim() == 300);
  CHECK(encode_sentence(s, toks({"w"}), PoolingKind::avg).values.size() == 300);
  CHECK(encode_sentence(s, toks({"w"}), PoolingKind::pmeans).values.size() == 900);
}

TEST_CASE("avg and pmeans pooling") {
  const auto s = store_of("2 2\nx 1 0\ny 0 1\n");
  const auto a = encode_sentence(s, toks({"x", "oov", "y"}), PoolingKind::avg);
  CHECK(a.values == std::vector<double>{0.5, 0.5});
  CHECK_FALSE(a.all_oov);
  const auto p = encode_sentence(s, toks({"x", "y"}), PoolingKind::pmeans);
  CHECK(p.values == std::vector<double>{0.5, 0.5, 1, 1, 0, 0});
  const auto none = encode_sentence(s, toks({"q"}), PoolingKind::pmeans);
  CHECK(none.all_oov);
  CHECK(none.values == std::vector<double>(6, 0.0));
  const auto one = encode_sentence(s, toks({"y"}), PoolingKind::avg);
  CHECK(one.values == std::vector<double>{0, 1});
}

TEST_CASE("pmeans starts with the avg row") {
  Rng rng(3);
  VectorStore s(4);
  for (int w = 0; w < 20; ++w) {
    std::vector<float> v(4);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    s.add("w" + std::to_string(w), v);
  }
  for (int k = 0; k < 20; ++k) {
    std::vector<std::string> t;
    for (int i = 0; i < 1 + k % 7; ++i) t.push_back("w" + std::to_string(rng.below(25)));
    const auto a = encode_sentence(s, t, PoolingKind::avg);
    const auto p = encode_sentence(s, t, PoolingKind::pmeans);
    for (std::size_t j = 0; j < 4; ++j) CHECK(p.values[j] == a.values[j]);
  }
}

TEST_CASE("random LSTM width and determinism") {
  const RandomLstm big(3, 2048, 1);
  CHECK(big.width() == 4096);
  const auto s = store_of("3 2\na 0.1 0.2\nb -0.3 0.5\nc 0.9 -0.1\n");
  const RandomLstm l1(2, 5, 42), l2(2, 5, 42);
  const auto e1 = l1.encode(s, toks({"a", "b", "c"}));
  const auto e2 = l2.encode(s, toks({"a", "b", "c"}));
  CHECK(e1.values == e2.values);
  const auto rev = l1.encode(s, toks({"c", "b", "a"}));
  CHECK(rev.values != e1.values);
  CHECK(l1.encode(s, toks({"zz"})).all_oov);
  for (Eigen::Index r = 0; r < 20; ++r)
    for (Eigen::Index c = 0; c < 2; ++c) CHECK(std::abs(l1.forward_weights().input_weights(r, c)) <= 1.0 / std::sqrt(5.0));
  const RandomLstm wrong(3, 5, 42);
  CHECK_THROWS_AS(wrong.encode(s, toks({"a"})), Error);
}

TEST_CASE("random LSTM one-token sentence equals that timestep's state") {
  const auto s = store_of("1 2\na 0.4 -0.7\n");
  const RandomLstm l(2, 3, 9);
  const auto e = l.encode(s, toks({"a"}));
  Eigen::VectorXd x(2);
  x << 0.4f, -0.7f;
  const auto st = l.hidden_states({x});
  for (std::size_t j = 0; j < 6; ++j) CHECK(e.values[j] == doctest::Approx(st[0](static_cast<Eigen::Index>(j))));
}

TEST_CASE("random LSTM matches a scalar recurrence (d=2, h=2)") {
  const RandomLstm l(2, 2, 17);
  const std::vector<std::vector<double>> xs{{0.5, -1.0}, {0.25, 0.75}, {-0.625, 0.125}, {1.25, 0.375}};
  std::vector<Eigen::VectorXd> in;
  for (const auto& x : xs) {
    Eigen::VectorXd v(2);
    v << x[0], x[1];
    in.push_back(v);
  }
  const auto states = l.hidden_states(in);
  const auto fwd = scalar_lstm(l.forward_weights(), xs, 2, false);
  const auto bwd = scalar_lstm(l.backward_weights(), xs, 2, true);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(states[t](static_cast<Eigen::Index>(k)) == doctest::Approx(fwd[t][k]).epsilon(1e-12));
      CHECK(states[t](static_cast<Eigen::Index>(2 + k)) == doctest::Approx(bwd[t][k]).epsilon(1e-12));
    }
  }
  // Max pooling of those states.
  VectorStore s(2);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const std::vector<float> v{static_cast<float>(xs[t][0]), static_cast<float>(xs[t][1])};
    s.add("t" + std::to_string(t), v);
  }
  const auto e = l.encode(s, toks({"t0", "t1", "t2", "t3"}));
  REQUIRE(e.values.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    double best = -1e300;
    for (const auto& st : states) best = std::max(best, st(static_cast<Eigen::Index>(k)));
    CHECK(e.values[k] == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("PROBEEMB round trip") {
  EmbeddingMatrix m;
  m.encoder_id = "toy";
  m.dim = 4;
  m.rows.resize(3, 4);
  Rng rng(8);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) m.rows(i, j) = rng.normal() * 1e3;
  m.instance_ids = {"0", "1", "2"};
  std::stringstream io;
  write_embeddings(m, io);
  const std::string text = io.str();
  CHECK(text.rfind("PROBEEMB 1 3 4 toy\n", 0) == 0);
  const auto back = read_embeddings(io);
  CHECK(back.encoder_id == "toy");
  CHECK(back.dim == 4);
  CHECK(back.instance_ids == m.instance_ids);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      CHECK(std::abs(back.rows(i, j) - m.rows(i, j)) <= 1e-8 * std::abs(m.rows(i, j)));
}

TEST_CASE("PROBEEMB header declaring 768 dims") {
  std::string text = "PROBEEMB 1 1 768 bert-base\n0\t";
  for (int i = 0; i < 768; ++i) text += (i ? " " : "") + std::string("0.1");
  std::istringstream in(text + "\n");
  CHECK(read_embeddings(in).dim == 768);
}

TEST_CASE("PROBEEMB format errors") {
  auto bad = [](const std::string& t) {
    std::istringstream in(t);
    CHECK_THROWS_AS(read_embeddings(in), Error);
  };
  bad("");
  bad("PROBEEMB 2 1 1 x\n0\t1\n");
  bad("PROBEEMB 1 1 2 x\n0\t1\n");
  bad("PROBEEMB 1 1 1 x\n0\tnan\n");
  bad("PROBEEMB 1 2 1 x\n0\t1\n");
  bad("PROBEEMB 1 1 1 x\n0\t1\n1\t2\n");
  bad("PROBEEMB 1 1 1 x\n0 1\n");
  EmbeddingMatrix m;
  m.encoder_id = "x";
  m.dim = 1;
  m.rows.resize(1, 1);
  m.rows(0, 0) = std::nan("");
  m.instance_ids = {"0"};
  std::ostringstream out;
  CHECK_THROWS_AS(write_embeddings(m, out), Error);
}

TEST_CASE("alignment check") {
  ProbingDataset d;
  d.task = "t";
  d.labels = {"a"};
  d.instances = {{Split::train, "a", "x"}, {Split::train, "a", "y"}};
  auto enc = make_pooling_encoder(std::make_shared<VectorStore>(store_of("1 2\nx 1 2\n")), PoolingKind::avg);
  auto m = encode_dataset(*enc, "avg", d);
  CHECK(m.size() == 2);
  CHECK(m.all_oov == std::vector<bool>{false, true});
  CHECK_NOTHROW(check_alignment(m, d));
  m.instance_ids[1] = "7";
  try {
    check_alignment(m, d);
    FAIL("expected alignment error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::alignment);
  }
  d.instances.pop_back();
  CHECK_THROWS_AS(check_alignment(encode_dataset(*enc, "avg", ProbingDataset{}), d), Error);
}

TEST_CASE("duplicate sentences encode identically") {
  ProbingDataset d;
  d.labels = {"a"};
  d.instances = {{Split::train, "a", "x y"}, {Split::train, "a", "x y"}};
  auto store = std::make_shared<VectorStore>(store_of("2 2\nx 1 2\ny 3 -1\n"));
  std::vector<std::unique_ptr<SentenceEncoder>> encs;
  encs.push_back(make_pooling_encoder(store, PoolingKind::pmeans));
  encs.push_back(make_random_lstm_encoder(store, 4, 2));
  for (const auto& enc : encs) {
    const auto m = encode_dataset(*enc, "e", d);
    CHECK(m.rows.row(0) == m.rows.row(1));
    CHECK(m.rows.allFinite());
  }
}
