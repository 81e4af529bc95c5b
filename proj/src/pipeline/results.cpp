#include <fstream>

#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/util.hpp"

namespace probekit {

namespace fs = std::filesystem;

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::optional<std::vector<std::string>> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) return std::nullopt;
  out.push_back(std::move(cur));
  return out;
}

const std::vector<std::string>& ResultStore::columns() {
  static const std::vector<std::string> cols{"language", "task",  "encoder",     "classifier", "size",   "metric",
                                             "score",    "hyperparams", "timestamp", "seed",   "sidecar"};
  return cols;
}

ResultStore::ResultStore(fs::path csv_path) : path_(std::move(csv_path)) {}

std::vector<ResultRow> ResultStore::load() const {
  std::vector<ResultRow> rows;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return rows;
  std::string line;
  bool header = true;
  while (read_line(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = csv_split(line);
    if (!cols || cols->size() != columns().size()) continue;
    const auto& c = *cols;
    try {
      ResultRow r;
      r.language = c[0];
      r.task = c[1];
      r.encoder = c[2];
      r.classifier = c[3];
      r.size = std::stoull(c[4]);
      r.metric = c[5];
      r.score = std::stod(c[6]);
      r.hyperparams = nlohmann::json::parse(c[7]);
      r.timestamp = c[8];
      r.seed = std::stoull(c[9]);
      r.sidecar = c[10];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      // A torn or hand-edited line: treat the cell as not completed.
    }
  }
  return rows;
}

void ResultStore::append(const ResultRow& row) {
  if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
  std::error_code ec;
  const bool fresh = !fs::exists(path_, ec) || fs::file_size(path_, ec) == 0;
  bool needs_newline = false;
  if (!fresh) {
    std::ifstream probe(path_, std::ios::binary | std::ios::ate);
    if (probe && probe.tellg() > 0) {
      probe.seekg(-1, std::ios::end);
      needs_newline = probe.get() != '\n';
    }
  }
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::io, "cannot append to " + path_.string());
  if (fresh) out << join(columns(), ",") << '\n';
  if (needs_newline) out << '\n';
  const std::vector<std::string> fields{row.language,
                                        row.task,
                                        row.encoder,
                                        row.classifier,
                                        std::to_string(row.size),
                                        row.metric,
                                        format_double(row.score, 17),
                                        row.hyperparams.dump(),
                                        row.timestamp,
                                        std::to_string(row.seed),
                                        row.sidecar};
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(fields[i]);
  }
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failed for " + path_.string());
}

}  // namespace probekit
