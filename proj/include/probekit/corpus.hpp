#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace probekit {

struct Token {
  std::string form;
  std::optional<std::string> lemma;
  std::optional<std::string> upos;
  // 1-based index of the governing token; 0 marks the root.
  std::optional<int> head;
  std::optional<std::string> deprel;
  std::map<std::string, std::string> feats;

  std::optional<std::string> feat(const std::string& name) const;

  bool operator==(const Token&) const = default;
};

enum class TreeStatus {
  ok,
  no_heads,       // no dependency annotation at all
  partial_heads,  // some tokens lack a head
  no_unique_root,
  cycle,
};

const char* tree_status_name(TreeStatus status) noexcept;

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::string text;

  TreeStatus tree_status() const;

  // 1-based index of the root token. Requires tree_status() == ok.
  std::size_t root() const;

  // 1-based indices of tokens attached to `head` (0 = root slot).
  std::vector<std::size_t> dependents(std::size_t head) const;

  // Edge count of the longest root-to-leaf path. Requires tree_status() == ok.
  int depth() const;

  std::vector<std::string> forms() const;

  bool operator==(const Sentence&) const = default;
};

std::string join_forms(const std::vector<std::string>& forms);

// CoNLL-U reader. Comment lines populate `id` (sent_id) and `text`; multiword
// range lines and empty nodes are dropped. Throws LineError(parse|decode).
std::vector<Sentence> parse_conllu(std::istream& in);
std::vector<Sentence> parse_conllu_string(const std::string& raw);

// Writes sent_id/text comments and one 10-column line per token.
void write_conllu(std::ostream& out, const std::vector<Sentence>& sentences);

enum class Tokenizer {
  whitespace,
  // Whitespace split, then ASCII punctuation peeled off token edges.
  unicode_word,
};

// One sentence per line; blank lines skipped; id = 1-based source line.
std::vector<Sentence> load_plain(std::istream& in, Tokenizer tokenizer = Tokenizer::whitespace);

std::vector<std::string> tokenize(const std::string& line, Tokenizer tokenizer);

}  // namespace probekit
