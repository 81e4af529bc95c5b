#include "probekit/corpus.hpp"

#include <charconv>
#include <sstream>

#include "probekit/error.hpp"
#include "probekit/util.hpp"

namespace probekit {

std::optional<std::string> Token::feat(const std::string& name) const {
  const auto it = feats.find(name);
  if (it == feats.end()) return std::nullopt;
  return it->second;
}

const char* tree_status_name(TreeStatus status) noexcept {
  switch (status) {
    case TreeStatus::ok: return "ok";
    case TreeStatus::no_heads: return "no dependency heads";
    case TreeStatus::partial_heads: return "missing heads";
    case TreeStatus::no_unique_root: return "no unique root";
    case TreeStatus::cycle: return "cyclic head chain";
  }
  return "unknown";
}

TreeStatus Sentence::tree_status() const {
  const std::size_t n = tokens.size();
  std::size_t with_head = 0;
  std::size_t roots = 0;
  for (const auto& t : tokens) {
    if (!t.head) continue;
    ++with_head;
    if (*t.head == 0) ++roots;
  }
  if (with_head == 0) return TreeStatus::no_heads;
  if (with_head != n) return TreeStatus::partial_heads;
  if (roots != 1) return TreeStatus::no_unique_root;
  for (std::size_t start = 1; start <= n; ++start) {
    std::size_t cur = start;
    std::size_t steps = 0;
    while (cur != 0) {
      const int h = *tokens[cur - 1].head;
      if (h < 0 || static_cast<std::size_t>(h) > n || static_cast<std::size_t>(h) == cur)
        return TreeStatus::cycle;
      cur = static_cast<std::size_t>(h);
      if (++steps > n) return TreeStatus::cycle;
    }
  }
  return TreeStatus::ok;
}

std::size_t Sentence::root() const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].head && *tokens[i].head == 0) return i + 1;
  }
  return 0;
}

std::vector<std::size_t> Sentence::dependents(std::size_t head) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].head && static_cast<std::size_t>(*tokens[i].head) == head) out.push_back(i + 1);
  }
  return out;
}

int Sentence::depth() const {
  const std::size_t n = tokens.size();
  std::vector<std::vector<std::size_t>> children(n + 1);
  for (std::size_t i = 0; i < n; ++i) children[static_cast<std::size_t>(*tokens[i].head)].push_back(i + 1);
  int best = 0;
  std::vector<std::pair<std::size_t, int>> stack{{root(), 0}};
  while (!stack.empty()) {
    const auto [node, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    for (const auto c : children[node]) stack.emplace_back(c, d + 1);
  }
  return best;
}

std::vector<std::string> Sentence::forms() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.form);
  return out;
}

std::string join_forms(const std::vector<std::string>& forms) { return join(forms, " "); }

namespace {

std::optional<std::string> optional_column(const std::string& s) {
  if (s == "_") return std::nullopt;
  return s;
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

struct PendingSentence {
  Sentence sentence;
  bool has_text = false;
  std::vector<std::size_t> token_lines;

  void clear() {
    sentence = Sentence{};
    has_text = false;
    token_lines.clear();
  }
};

void finish_block(PendingSentence& pending, std::vector<Sentence>& out, std::size_t ordinal) {
  auto& s = pending.sentence;
  if (s.tokens.empty()) {
    pending.clear();
    return;
  }
  const auto n = static_cast<int>(s.tokens.size());
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto& head = s.tokens[i].head;
    if (!head) continue;
    if (*head < 0 || *head > n)
      throw LineError(ErrorKind::parse, pending.token_lines[i], "head " + std::to_string(*head) + " outside sentence");
    if (*head == static_cast<int>(i + 1))
      throw LineError(ErrorKind::parse, pending.token_lines[i], "token is its own head");
  }
  if (s.id.empty()) s.id = std::to_string(ordinal);
  if (!pending.has_text) s.text = join_forms(s.forms());
  out.push_back(std::move(s));
  pending.clear();
}

}  // namespace

std::vector<Sentence> parse_conllu(std::istream& in) {
  std::vector<Sentence> out;
  PendingSentence pending;
  std::string line;
  std::size_t line_no = 0;
  std::size_t blocks = 0;
  bool in_block = false;

  while (read_line(in, line)) {
    ++line_no;
    if (find_invalid_utf8(line) != std::string::npos)
      throw LineError(ErrorKind::decode, line_no, "invalid UTF-8");
    if (trim(line).empty()) {
      if (in_block) finish_block(pending, out, ++blocks);
      in_block = false;
      continue;
    }
    in_block = true;
    if (line[0] == '#') {
      const auto body = trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = trim(body.substr(0, eq));
      const auto value = trim(body.substr(eq + 1));
      if (key == "sent_id") {
        pending.sentence.id = std::string(value);
      } else if (key == "text") {
        pending.sentence.text = std::string(value);
        pending.has_text = true;
      }
      continue;
    }
    const auto cols = split(line, '\t');
    if (cols.size() != 10)
      throw LineError(ErrorKind::parse, line_no, "expected 10 columns, found " + std::to_string(cols.size()));
    const auto& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    int index = 0;
    if (!parse_int(id, index) || index != static_cast<int>(pending.sentence.tokens.size()) + 1)
      throw LineError(ErrorKind::parse, line_no, "unexpected token id '" + id + "'");

    Token tok;
    tok.form = cols[1];
    tok.lemma = optional_column(cols[2]);
    tok.upos = optional_column(cols[3]);
    if (cols[5] != "_") {
      for (const auto& kv : split(cols[5], '|')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == kv.size())
          throw LineError(ErrorKind::parse, line_no, "malformed feature '" + kv + "'");
        tok.feats.emplace(kv.substr(0, eq), kv.substr(eq + 1));
      }
    }
    if (cols[6] != "_") {
      int head = 0;
      if (!parse_int(cols[6], head)) throw LineError(ErrorKind::parse, line_no, "malformed head '" + cols[6] + "'");
      tok.head = head;
    }
    tok.deprel = optional_column(cols[7]);
    pending.sentence.tokens.push_back(std::move(tok));
    pending.token_lines.push_back(line_no);
  }
  if (in_block) finish_block(pending, out, ++blocks);
  return out;
}

std::vector<Sentence> parse_conllu_string(const std::string& raw) {
  std::istringstream in(raw);
  return parse_conllu(in);
}

void write_conllu(std::ostream& out, const std::vector<Sentence>& sentences) {
  for (const auto& s : sentences) {
    out << "# sent_id = " << s.id << '\n';
    out << "# text = " << s.text << '\n';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto& t = s.tokens[i];
      std::string feats;
      for (const auto& [k, v] : t.feats) {
        if (!feats.empty()) feats += '|';
        feats += k + "=" + v;
      }
      out << (i + 1) << '\t' << t.form << '\t' << t.lemma.value_or("_") << '\t' << t.upos.value_or("_")
          << "\t_\t" << (feats.empty() ? "_" : feats) << '\t'
          << (t.head ? std::to_string(*t.head) : "_") << '\t' << t.deprel.value_or("_") << "\t_\t_\n";
    }
    out << '\n';
  }
}

namespace {

bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

}  // namespace

std::vector<std::string> tokenize(const std::string& line, Tokenizer tokenizer) {
  auto words = split_whitespace(line);
  if (tokenizer == Tokenizer::whitespace) return words;
  std::vector<std::string> out;
  for (const auto& w : words) {
    std::size_t b = 0;
    std::size_t e = w.size();
    while (b < e && is_ascii_punct(w[b])) out.emplace_back(1, w[b++]);
    std::vector<std::string> tail;
    while (e > b && is_ascii_punct(w[e - 1])) tail.emplace_back(1, w[--e]);
    if (e > b) out.push_back(w.substr(b, e - b));
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

std::vector<Sentence> load_plain(std::istream& in, Tokenizer tokenizer) {
  std::vector<Sentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (find_invalid_utf8(line) != std::string::npos)
      throw LineError(ErrorKind::decode, line_no, "invalid UTF-8");
    const auto forms = tokenize(line, tokenizer);
    if (forms.empty()) continue;
    Sentence s;
    s.id = std::to_string(line_no);
    for (const auto& f : forms) s.tokens.push_back(Token{.form = f});
    s.text = join_forms(forms);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace probekit
