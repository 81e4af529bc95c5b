#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures/synth.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "probekit/taskgen.hpp"
#include "probekit/util.hpp"

using namespace probekit;

namespace {

const std::vector<Sentence>& toy() {
  static const auto c = fixtures::make_toy_corpus({6000, 11});
  return c;
}

Sentence plain(const std::string& text) {
  Sentence s;
  s.id = text;
  std::istringstream in(text);
  std::string w;
  while (in >> w) s.tokens.push_back(Token{.form = w});
  s.text = text;
  return s;
}

// tokens as "form/upos/head/deprel[/Number]"
Sentence tree(std::initializer_list<std::vector<std::string>> toks) {
  Sentence s;
  for (const auto& f : toks) {
    Token t;
    t.form = f[0];
    t.upos = f[1];
    t.head = std::stoi(f[2]);
    t.deprel = f[3];
    if (f.size() > 4) t.feats["Number"] = f[4];
    s.tokens.push_back(t);
  }
  s.text = join_forms(s.forms());
  return s;
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

GenOptions opts(std::size_t n, std::uint64_t seed = 1) {
  GenOptions o;
  o.n = n;
  o.seed = seed;
  return o;
}

std::size_t count_label(const ProbingDataset& d, const std::string& label) {
  return static_cast<std::size_t>(
      std::count_if(d.instances.begin(), d.instances.end(), [&](const auto& i) { return i.label == label; }));
}

ProbingDataset binary(std::size_t a, std::size_t b) {
  ProbingDataset d;
  d.task = "bin";
  d.labels = {"A", "B"};
  for (std::size_t i = 0; i < a + b; ++i) d.instances.push_back({Split::train, i < a ? "A" : "B", "s" + std::to_string(i)});
  d.refresh_balance();
  return d;
}

int dfs_depth(const Sentence& s, std::size_t node) {
  int best = 0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i)
    if (static_cast<std::size_t>(*s.tokens[i].head) == node) best = std::max(best, 1 + dfs_depth(s, i + 1));
  return best;
}

}  // namespace

TEST_CASE("bigram shift: 1:1 and single adjacent swap") {
  const auto d = gen_bigram_shift(toy(), opts(4000));
  CHECK(d.size() == 4000);
  CHECK(count_label(d, "True") == 2000);
  CHECK(count_label(d, "False") == 2000);
  CHECK(d.balance == "1:1");
  for (const auto& inst : d.instances) {
    const auto orig = toy()[*inst.source].forms();
    auto got = words(inst.sentence);
    REQUIRE(got.size() == orig.size());
    if (inst.label == "False") {
      CHECK(got == orig);
      continue;
    }
    REQUIRE(inst.edit_position.has_value());
    std::vector<std::size_t> diff;
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i] != orig[i]) diff.push_back(i);
    REQUIRE(diff.size() == 2);
    CHECK(diff[1] == diff[0] + 1);
    CHECK(static_cast<int>(diff[0]) == *inst.edit_position);
    const auto p = static_cast<std::size_t>(*inst.edit_position);
    std::swap(got[p], got[p + 1]);
    CHECK(got == orig);
  }
}

TEST_CASE("bigram shift of the Christmas Eve sentence") {
  std::vector<Sentence> two{plain("This is my Christmas Eve ."), plain("we met at the station")};
  bool saw_true = false, saw_false = false;
  for (std::uint64_t seed = 0; seed < 200 && !(saw_true && saw_false); ++seed) {
    const auto d = gen_bigram_shift(two, opts(2, seed));
    REQUIRE(d.size() == 2);
    const auto& inst = d.instances[0].source == 0 ? d.instances[0] : d.instances[1];
    if (inst.label == "False") {
      CHECK(inst.sentence == "This is my Christmas Eve .");
      saw_false = true;
    } else if (inst.edit_position == 3) {
      CHECK(inst.sentence == "This is my Eve Christmas .");
      saw_true = true;
    }
  }
  CHECK(saw_true);
  CHECK(saw_false);
}

TEST_CASE("bigram shift skips short sentences and reports shortfall") {
  std::vector<Sentence> s{plain("a b c"), plain("a b c d")};
  try {
    gen_bigram_shift(s, opts(2));
    FAIL("expected shortfall");
  } catch (const ShortfallError& e) {
    CHECK(e.available() == 1);
    CHECK(e.requested() == 2);
  }
}

TEST_CASE("length with explicit edges") {
  std::vector<Sentence> s{plain("I like cats"), plain("a b c d e"), plain("a b c d e f g h i")};
  const std::vector<LengthBin> bins{{1, 4}, {5, 8}, {9, 100}};
  const auto d = gen_length(s, opts(3), bins);
  for (const auto& inst : d.instances) {
    const auto n = words(inst.sentence).size();
    if (n == 3) CHECK(inst.label == "1-4");
    if (n == 5) CHECK(inst.label == "5-8");
    if (n == 9) CHECK(inst.label == "9-100");
  }
  CHECK(d.params["bins"].size() == 3);
  CHECK(d.params["bins_fitted"] == false);
}

TEST_CASE("equal-frequency bins on uniform lengths 1..60") {
  std::vector<int> lengths;
  for (int i = 1; i <= 60; ++i) lengths.push_back(i);
  const auto bins = fit_length_bins(lengths);
  REQUIRE(bins.size() == 6);
  CHECK(bins.front().lo == 1);
  CHECK(bins.back().hi == 60);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const int held = bins[b].hi - bins[b].lo + 1;
    CHECK(std::abs(held - 10) <= 1);
    if (b > 0) CHECK(bins[b].lo == bins[b - 1].hi + 1);
  }
}

TEST_CASE("fitted bins cover every length with near-equal mass") {
  Rng rng(5);
  std::vector<int> lengths;
  for (int i = 0; i < 3000; ++i) lengths.push_back(1 + static_cast<int>(rng.below(40)) + static_cast<int>(rng.below(5)));
  const auto bins = fit_length_bins(lengths);
  std::vector<int> mass(6);
  for (int l : lengths) {
    int hits = 0;
    for (std::size_t b = 0; b < 6; ++b)
      if (bins[b].contains(l)) {
        ++mass[b];
        ++hits;
      }
    CHECK(hits == 1);
  }
  // Brute-force quantile oracle: each bin's upper edge is the smallest value
  // whose cumulative count reaches its share.
  std::vector<int> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t b = 0; b + 1 < 6; ++b) {
    const std::size_t want = ((b + 1) * sorted.size() + 5) / 6;
    CHECK(bins[b].hi == sorted[want - 1]);
  }
}

TEST_CASE("degenerate length distribution needs explicit edges") {
  CHECK_THROWS_AS(fit_length_bins({3, 3, 4, 4, 5}), Error);
  try {
    fit_length_bins({3, 4, 5});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("word content") {
  const auto d = gen_word_content(toy(), {30, 21, 50}, opts(600));
  CHECK(d.labels.size() == 30);
  std::set<std::string> targets(d.labels.begin(), d.labels.end());
  const auto rank = frequency_ranking(toy());
  for (std::size_t r = 20; r < 50; ++r) CHECK(targets.contains(rank[r].first));
  for (const auto& inst : d.instances) {
    std::size_t hits = 0;
    for (const auto& w : words(inst.sentence))
      if (targets.contains(w)) {
        ++hits;
        CHECK(w == inst.label);
      }
    CHECK(hits == 1);
  }
  // Water-filling: a class below the top level must have run out of sentences.
  std::map<std::string, std::set<std::string>> avail;
  for (const auto& s : toy()) {
    std::vector<std::string> hit;
    for (const auto& f : s.forms())
      if (targets.contains(f)) hit.push_back(f);
    if (hit.size() == 1) avail[hit[0]].insert(join(s.forms(), " "));
  }
  const auto counts = d.class_counts();
  const auto top = *std::max_element(counts.begin(), counts.end());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] + 1 < top) CHECK(counts[c] == avail[d.labels[c]].size());
    CHECK(counts[c] <= avail[d.labels[c]].size());
  }
}

TEST_CASE("word content: two targets excluded, window checked") {
  std::vector<Sentence> s{plain("x y"), plain("x"), plain("y"), plain("x y z"), plain("z")};
  // ranking: x(3) y(3) z(2); window covering x and y
  const auto d = gen_word_content(s, {2, 1, 2}, opts(2));
  for (const auto& inst : d.instances) CHECK(inst.sentence.size() == 1);
  CHECK_THROWS_AS(gen_word_content(s, {3, 1, 2}, opts(2)), Error);
  try {
    gen_word_content(s, {2, 5, 6}, opts(1));
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("subject number") {
  std::vector<Sentence> s{
      tree({{"They", "PRON", "2", "nsubj", "Plur"}, {"work", "VERB", "0", "root"}, {"together", "ADV", "2", "advmod"}}),
      tree({{"A", "NOUN", "3", "nsubj", "Sing"}, {"B", "NOUN", "3", "nsubj", "Sing"}, {"run", "VERB", "0", "root"}}),
      tree({{"It", "PRON", "2", "nsubj"}, {"runs", "VERB", "0", "root"}}),
  };
  const auto d = gen_subj_number(s, opts(1));
  REQUIRE(d.size() == 1);
  CHECK(d.instances[0].label == "Plural");
  CHECK(d.instances[0].sentence == "They work together");
  CHECK_THROWS_AS(gen_subj_number(s, opts(2)), ShortfallError);
}

TEST_CASE("subject number on the toy corpus matches the annotation") {
  const auto d = gen_subj_number(toy(), opts(2000));
  CHECK(count_label(d, "Singular") == 1000);
  for (const auto& inst : d.instances) {
    const auto& src = toy()[*inst.source];
    for (const auto& t : src.tokens)
      if (t.head == static_cast<int>(src.root()) && (t.deprel == "nsubj" || t.deprel == "nsubj:pass"))
        CHECK(inst.label == (t.feat("Number") == "Plur" ? "Plural" : "Singular"));
  }
}

TEST_CASE("voice") {
  std::vector<Sentence> s{
      tree({{"He", "PRON", "2", "nsubj"}, {"likes", "VERB", "0", "root"}, {"cats", "NOUN", "2", "obj"}}),
      tree({{"It", "PRON", "3", "nsubj:pass"}, {"was", "AUX", "3", "aux"}, {"seen", "VERB", "0", "root"}}),
  };
  const auto d = gen_voice(s, opts(2));
  for (const auto& inst : d.instances) {
    if (inst.sentence == "He likes cats") CHECK(inst.label == "False");
    else CHECK(inst.label == "True");
  }
}

TEST_CASE("voice records an imbalanced ratio") {
  std::vector<Sentence> s;
  for (int i = 0; i < 6; ++i) s.push_back(tree({{"w" + std::to_string(i), "VERB", "0", "root"}}));
  s.push_back(tree({{"x", "PRON", "2", "nsubj:pass"}, {"y", "VERB", "0", "root"}}));
  const auto d = gen_voice(s, opts(7));
  CHECK(d.balance == "6:1");
}

TEST_CASE("subject-verb agreement") {
  std::istringstream lex_in("work\twork works\n");
  const auto lex = ConjugationLexicon::parse(lex_in);
  std::vector<Sentence> s{plain("They work together"), plain("No verb here"), plain("We work hard")};
  bool saw = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = gen_sv_agree(s, lex, opts(2, seed));
    for (const auto& inst : d.instances) {
      CHECK(inst.sentence != "No verb here");
      if (inst.label == "Disagree" && inst.sentence.rfind("They", 0) == 0) {
        CHECK(inst.sentence == "They works together");
        saw = true;
      }
      if (inst.label == "Agree") CHECK((inst.sentence == "They work together" || inst.sentence == "We work hard"));
    }
  }
  CHECK(saw);
}

TEST_CASE("sv agree on the toy corpus: one token differs, same lemma") {
  std::istringstream in(fixtures::toy_lexicon_text());
  const auto lex = ConjugationLexicon::parse(in);
  const auto d = gen_sv_agree(toy(), lex, opts(2000));
  CHECK(count_label(d, "Agree") == 1000);
  for (const auto& inst : d.instances) {
    const auto orig = toy()[*inst.source].forms();
    const auto got = words(inst.sentence);
    REQUIRE(got.size() == orig.size());
    std::vector<std::size_t> diff;
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i] != orig[i]) diff.push_back(i);
    if (inst.label == "Agree") {
      CHECK(diff.empty());
    } else {
      REQUIRE(diff.size() == 1);
      CHECK(lex.lemma_of(got[diff[0]]) == lex.lemma_of(orig[diff[0]]));
    }
  }
}

TEST_CASE("sv dist bins are total and monotone") {
  CHECK(sv_dist_bin(1) == "[1]");
  CHECK(sv_dist_bin(4) == "[2,4]");
  CHECK(sv_dist_bin(5) == "[5,7]");
  CHECK(sv_dist_bin(12) == "[8,12]");
  CHECK(sv_dist_bin(13) == "[13,∞)");
  CHECK(sv_dist_bin(1000) == "[13,∞)");
  const auto& labels = sv_dist_labels();
  std::size_t prev = 0;
  for (int d = 1; d < 200; ++d) {
    const auto idx = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), sv_dist_bin(d)) - labels.begin());
    CHECK(idx >= prev);
    prev = idx;
  }
}

TEST_CASE("sv dist of 'The delivery was very late'") {
  std::vector<Sentence> s{tree({{"The", "DET", "2", "det"},
                                {"delivery", "NOUN", "3", "nsubj"},
                                {"was", "VERB", "0", "root"},
                                {"very", "ADV", "5", "advmod"},
                                {"late", "ADJ", "3", "xcomp"}})};
  const auto d = gen_sv_dist(s, opts(1));
  CHECK(d.instances[0].label == "[1]");
}

TEST_CASE("sv dist requires a verbal root") {
  std::vector<Sentence> s{tree({{"It", "PRON", "2", "nsubj"}, {"late", "ADJ", "0", "root"}})};
  CHECK_THROWS_AS(gen_sv_dist(s, opts(1)), ShortfallError);
}

TEST_CASE("tree depth: chain and star") {
  std::vector<Sentence> s{tree({{"a", "X", "2", "dep"}, {"b", "X", "3", "dep"}, {"c", "VERB", "0", "root"}}),
                          tree({{"d", "VERB", "0", "root"}, {"e", "X", "1", "dep"}, {"f", "X", "1", "dep"}})};
  const auto d = gen_tree_depth(s, opts(2));
  REQUIRE(d.size() == 2);
  for (const auto& inst : d.instances) CHECK(inst.label == (inst.sentence == "a b c" ? "2" : "1"));
}

TEST_CASE("tree depth matches a DFS oracle on random trees") {
  Rng rng(99);
  std::vector<Sentence> s;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + rng.below(15);
    Sentence t;
    // Random recursive tree over a shuffled token order.
    const auto order = rng.permutation(n);
    std::vector<int> head(n);
    head[order[0]] = 0;
    for (std::size_t i = 1; i < n; ++i) head[order[i]] = static_cast<int>(order[rng.below(i)] + 1);
    for (std::size_t i = 0; i < n; ++i) {
      Token tok;
      tok.form = "t" + std::to_string(k) + "_" + std::to_string(i);
      tok.head = head[i];
      tok.deprel = head[i] == 0 ? "root" : "dep";
      t.tokens.push_back(tok);
    }
    t.text = join_forms(t.forms());
    s.push_back(t);
  }
  for (const auto& t : s) CHECK(t.depth() == dfs_depth(t, 0) - 1);
  const auto d = gen_tree_depth(s, opts(50));
  for (const auto& inst : d.instances) CHECK(inst.label == std::to_string(dfs_depth(s[*inst.source], 0) - 1));
}

TEST_CASE("tree depth skips invalid trees") {
  std::vector<Sentence> s{tree({{"a", "X", "0", "root"}, {"b", "X", "0", "root"}}),
                          tree({{"c", "X", "0", "root"}, {"d", "X", "1", "dep"}})};
  const auto d = gen_tree_depth(s, opts(1));
  CHECK(d.instances[0].sentence == "c d");
  CHECK_THROWS_AS(gen_tree_depth(s, opts(2)), ShortfallError);
}

TEST_CASE("SentEval TSV import") {
  std::istringstream in(
      "tr\t5\tOne hand here , one hand there , that 's it\n"
      "va\tVDP_NP_VP\tDid he buy anything from Troy\n"
      "te\t5\tx y\n");
  const auto d = read_dataset_tsv(in, "t");
  REQUIRE(d.size() == 3);
  CHECK(d.instances[0].split == Split::train);
  CHECK(d.instances[0].label == "5");
  CHECK(d.instances[1].split == Split::dev);
  CHECK(d.instances[2].split == Split::test);
  CHECK(d.labels.size() == 2);
}

TEST_CASE("SentEval TSV errors") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_dataset_tsv(empty, "t"), Error);
  std::istringstream bad_tag("tr\ta\tx\nxx\ta\ty\n");
  try {
    read_dataset_tsv(bad_tag, "t");
    FAIL("expected error");
  } catch (const LineError& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(e.line() == 2);
  }
  std::istringstream cols("tr\tonly\n");
  CHECK_THROWS_AS(read_dataset_tsv(cols, "t"), LineError);
}

TEST_CASE("dataset write/read round trip keeps metadata") {
  const auto d = gen_subj_number(toy(), opts(300, 4));
  const auto dir = std::filesystem::temp_directory_path() / "probekit_unit_ds";
  std::filesystem::create_directories(dir);
  write_dataset(d, dir / "sn.tsv");
  const auto back = read_dataset(dir / "sn.tsv");
  CHECK(back.task == d.task);
  CHECK(back.labels == d.labels);
  CHECK(back.rng_seed == d.rng_seed);
  CHECK(back.balance == d.balance);
  CHECK(dataset_tsv_string(back) == dataset_tsv_string(d));
}

TEST_CASE("generators respect n and are deterministic") {
  std::istringstream in(fixtures::toy_lexicon_text());
  const auto lex = ConjugationLexicon::parse(in);
  using Gen = std::function<ProbingDataset(const GenOptions&)>;
  const std::vector<Gen> gens{
      [](const GenOptions& o) { return gen_bigram_shift(toy(), o); },
      [](const GenOptions& o) { return gen_length(toy(), o); },
      [](const GenOptions& o) { return gen_word_content(toy(), {30, 21, 50}, o); },
      [](const GenOptions& o) { return gen_subj_number(toy(), o); },
      [](const GenOptions& o) { return gen_voice(toy(), o); },
      [&](const GenOptions& o) { return gen_sv_agree(toy(), lex, o); },
      [](const GenOptions& o) { return gen_sv_dist(toy(), o); },
      [](const GenOptions& o) { return gen_tree_depth(toy(), o); },
  };
  for (const auto& g : gens) {
    const auto a = g(opts(500, 7));
    const auto b = g(opts(500, 7));
    CHECK(a.size() == 500);
    CHECK(dataset_tsv_string(a) == dataset_tsv_string(b));
    CHECK(dataset_metadata(a).dump() == dataset_metadata(b).dump());
    std::set<std::string> seen;
    for (const auto& inst : a.instances) {
      CHECK(std::find(a.labels.begin(), a.labels.end(), inst.label) != a.labels.end());
      CHECK_FALSE(inst.sentence.empty());
      CHECK(seen.insert(inst.sentence).second);
    }
    for (std::size_t c : a.class_counts()) CHECK(c >= 1);
    auto copy = a;
    copy.refresh_balance();
    CHECK(copy.balance == a.balance);
  }
}

TEST_CASE("balance formatting") {
  CHECK(format_balance({5000, 5000}) == "1:1");
  CHECK(format_balance({60, 10}) == "6:1");
  CHECK(format_balance({11, 10}) == "1.1:1");
}

TEST_CASE("rebalance: proportional downsampling") {
  const auto d = rebalance(binary(50000, 50000), 10000, std::nullopt, 3);
  CHECK(count_label(d, "A") == 5000);
  CHECK(count_label(d, "B") == 5000);
  const auto p = rebalance(binary(600, 400), 100, std::nullopt, 3);
  CHECK(count_label(p, "A") == 60);
  CHECK(count_label(p, "B") == 40);
  const auto q = rebalance(binary(6000, 4000), 1000, std::nullopt, 3);
  CHECK(count_label(q, "A") == 600);
  CHECK(count_label(q, "B") == 400);
  std::set<std::string> seen;
  for (const auto& inst : q.instances) CHECK(seen.insert(inst.sentence).second);
  CHECK(q.labels == std::vector<std::string>{"A", "B"});
}

TEST_CASE("rebalance: largest-remainder rounding sums to target") {
  ProbingDataset d;
  d.task = "tri";
  d.labels = {"a", "b", "c"};
  for (int i = 0; i < 10; ++i) d.instances.push_back({Split::train, i < 4 ? "a" : (i < 7 ? "b" : "c"), std::to_string(i)});
  const auto r = rebalance(d, 5, std::nullopt, 1);
  CHECK(r.size() == 5);
  CHECK(count_label(r, "a") == 2);
}

TEST_CASE("rebalance: ratio mode") {
  const auto d = rebalance(binary(11000, 11000), 22000, ClassRatio{1, 10}, 5);
  const auto a = count_label(d, "A"), b = count_label(d, "B");
  CHECK(b == 11000);
  CHECK(a == 1100);
  CHECK(a * 10 == b);
  const auto small = rebalance(binary(11000, 11000), 2200, ClassRatio{1, 10}, 5);
  CHECK(count_label(small, "A") == 200);
  CHECK(count_label(small, "B") == 2000);
  CHECK_THROWS_AS(rebalance(binary(5, 5), 20, std::nullopt, 1), Error);
  CHECK(parse_ratio("1:5").second == 5);
  CHECK_THROWS_AS(parse_ratio("1-5"), Error);
}

TEST_CASE("fixed splits are stratified") {
  const auto d = assign_splits(binary(5000, 5000), {0.8, 0.1, 0.1}, 2);
  std::map<Split, std::map<std::string, std::size_t>> c;
  for (const auto& inst : d.instances) ++c[inst.split][inst.label];
  CHECK(c[Split::train]["A"] == 4000);
  CHECK(c[Split::train]["B"] == 4000);
  CHECK(c[Split::dev]["A"] == 500);
  CHECK(c[Split::test]["B"] == 500);
  const auto u = assign_splits(binary(700, 300), {0.8, 0.1, 0.1}, 2);
  std::map<Split, std::map<std::string, std::size_t>> cu;
  for (const auto& inst : u.instances) ++cu[inst.split][inst.label];
  CHECK(cu[Split::dev]["A"] == 70);
  CHECK(cu[Split::dev]["B"] == 30);
}

TEST_CASE("k-fold partitions the dataset") {
  const auto d = binary(5000, 5000);
  const auto folds = assign_kfold(d, 5, 8);
  REQUIRE(folds.size() == 5);
  std::vector<int> hit(d.size());
  for (const auto& f : folds) {
    CHECK(f.size() == 2000);
    std::size_t a = 0;
    for (auto i : f) {
      ++hit[i];
      a += d.instances[i].label == "A";
    }
    CHECK(a == 1000);
  }
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(assign_kfold(binary(10, 3), 5, 1), Error);
}

TEST_CASE("deduplicate keeps the test copy") {
  ProbingDataset d;
  d.task = "t";
  d.labels = {"x"};
  d.instances = {{Split::train, "x", "same"}, {Split::dev, "x", "same"}, {Split::test, "x", "same"},
                 {Split::train, "x", "other"}, {Split::dev, "x", "dev-only"}, {Split::dev, "x", "dev-only"}};
  const auto r = deduplicate(d);
  REQUIRE(r.size() == 3);
  CHECK(r.instances[0].split == Split::test);
  CHECK(r.instances[0].sentence == "same");
}
