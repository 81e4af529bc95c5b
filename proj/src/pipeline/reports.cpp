#include <algorithm>
#include <cmath>
#include <sstream>

#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/util.hpp"

namespace probekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json values = json::array();
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) {
      const double v = m.at(r, c);
      row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    values.push_back(row);
  }
  return {{"rows", m.row_labels}, {"cols", m.col_labels}, {"values", values}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m;
  m.row_labels = j.at("rows").get<std::vector<std::string>>();
  m.col_labels = j.at("cols").get<std::vector<std::string>>();
  for (const auto& row : j.at("values")) {
    for (const auto& v : row) m.values.push_back(v.is_null() ? std::nan("") : v.get<double>());
  }
  return m;
}

std::string cell_text(double v, int digits = 4) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string matrix_csv(const Matrix& m, const std::string& corner) {
  std::string out = csv_escape(corner);
  for (const auto& c : m.col_labels) out += "," + csv_escape(c);
  out += "\n";
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    out += csv_escape(m.row_labels[r]);
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) out += "," + cell_text(m.at(r, c), 6);
    out += "\n";
  }
  return out;
}

// Restricts the grid to one language, the sweep sizes, and fully covered probing tasks.
ScoreGrid language_grid(const ScoreGrid& grid, const ExperimentConfig& config, const std::string& language,
                        std::vector<std::string>& excluded) {
  ScoreGrid sub;
  sub.languages = {language};
  sub.encoders = grid.encoders;
  sub.classifiers = grid.classifiers;
  sub.sizes = config.sizes;
  for (const auto& t : grid.probing_tasks()) {
    bool covered = true;
    for (const auto& c : sub.classifiers) {
      for (const auto s : sub.sizes) {
        for (const auto& e : sub.encoders) covered = covered && grid.contains({language, t, e, c, s});
      }
    }
    bool touched = false;
    for (const auto& [k, v] : grid.entries()) touched = touched || (k.language == language && k.task == t);
    if (covered) {
      sub.tasks.push_back(t);
    } else if (touched) {
      excluded.push_back(t);
    }
  }
  for (const auto& [k, v] : grid.entries()) {
    if (k.language == language && std::find(sub.tasks.begin(), sub.tasks.end(), k.task) != sub.tasks.end() &&
        std::find(sub.sizes.begin(), sub.sizes.end(), k.size) != sub.sizes.end())
      sub.insert(k, v);
  }
  return sub;
}

struct Emitter {
  fs::path dir;
  AnalysisOutput out;

  void file(const std::string& name, const std::string& contents) {
    const auto p = dir / name;
    write_file_atomic(p, contents);
    out.files.push_back(p);
  }
  void skip(const std::string& report, const std::string& reason) {
    out.skipped.push_back({report, reason});
  }
};

void analyze_language(Emitter& em, const ExperimentConfig& config, const ScoreGrid& grid, const std::string& lang,
                      json& lang_json) {
  std::vector<std::string> excluded;
  const auto sub = language_grid(grid, config, lang, excluded);
  for (const auto& t : excluded) em.skip("stability:" + lang + ":" + t, "task incomplete over (encoder, classifier, size)");
  if (sub.tasks.empty()) {
    em.skip("stability:" + lang, "no probing task covers every (encoder, classifier, size) cell");
    return;
  }
  if (sub.encoders.size() < 3) {
    em.skip("stability:" + lang, "requires ≥3 encoders");
    return;
  }
  lang_json["tasks"] = sub.tasks;
  json methods = json::object();
  std::map<std::string, StabilityReport> reports;
  for (const auto method : {CorrMethod::spearman, CorrMethod::pearson}) {
    auto opts = config.stats;
    opts.method = method;
    const auto mname = corr_method_name(method);
    const auto rep = stability_report(sub, lang, opts);
    json mj;
    for (const auto& [c, m] : rep.sim_size) {
      mj["sim_size"][c] = matrix_json(m);
      em.file("sim_size_" + lang + "_" + c + "_" + mname + ".csv", matrix_csv(m, "size"));
    }
    Matrix stab;
    stab.row_labels = sub.classifiers;
    for (const auto s : sub.sizes) stab.col_labels.push_back(std::to_string(s));
    for (const auto& c : sub.classifiers) {
      const auto& v = rep.size_stability.at(c);
      stab.values.insert(stab.values.end(), v.begin(), v.end());
    }
    mj["size_stability"] = matrix_json(stab);
    em.file("size_stability_" + lang + "_" + mname + ".csv", matrix_csv(stab, "classifier"));
    for (const auto& [c, ma] : rep.size_minavg) mj["size_minavg"][c] = {{"min", ma.min}, {"avg", ma.avg}};
    mj["cross_min"] = matrix_json(rep.cross_min);
    mj["cross_avg"] = matrix_json(rep.cross_avg);
    methods[mname] = mj;
    reports.emplace(mname, rep);
  }
  lang_json["methods"] = methods;

  const auto& sp = reports.at("spearman");
  const auto& pe = reports.at("pearson");
  if (sub.sizes.size() < 2) {
    em.skip("size_minavg:" + lang, "requires ≥2 sizes");
  } else {
    std::string csv = "classifier,spearman_min,spearman_avg,pearson_min,pearson_avg\n";
    for (const auto& c : sub.classifiers) {
      csv += c + "," + cell_text(sp.size_minavg.at(c).min, 6) + "," + cell_text(sp.size_minavg.at(c).avg, 6) + "," +
             cell_text(pe.size_minavg.at(c).min, 6) + "," + cell_text(pe.size_minavg.at(c).avg, 6) + "\n";
    }
    em.file("size_minavg_" + lang + ".csv", csv);
  }
  if (sub.classifiers.size() < 2) {
    em.skip("cross_classifier:" + lang, "requires ≥2 classifiers");
  } else {
    std::string csv = "classifier_c,classifier_d,spearman_min,spearman_avg,pearson_min,pearson_avg\n";
    const auto n = sub.classifiers.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        csv += sub.classifiers[i] + "," + sub.classifiers[j] + "," + cell_text(sp.cross_min.at(i, j), 6) + "," +
               cell_text(sp.cross_avg.at(i, j), 6) + "," + cell_text(pe.cross_min.at(i, j), 6) + "," +
               cell_text(pe.cross_avg.at(i, j), 6) + "\n";
      }
    }
    em.file("cross_classifier_" + lang + ".csv", csv);
  }

  json mu = json::array();
  std::string mu_csv = "rank,classifier,size,mu\n";
  for (std::size_t i = 0; i < sp.mu.size(); ++i) {
    const auto& m = sp.mu[i];
    mu.push_back({{"classifier", m.classifier}, {"size", m.size}, {"mu", m.mu}});
    mu_csv += std::to_string(i + 1) + "," + m.classifier + "," + std::to_string(m.size) + "," + cell_text(m.mu, 6) + "\n";
  }
  lang_json["mu"] = mu;
  em.file("mu_" + lang + ".csv", mu_csv);

  json rmax = json::object();
  std::string r_csv = "task,support,ranking\n";
  for (const auto& t : sub.tasks) {
    const auto& r = sp.r_max.at(t);
    std::vector<std::string> names;
    for (const auto i : r.order) names.push_back(sub.encoders[i]);
    rmax[t] = {{"ranking", names}, {"support", r.support}};
    r_csv += csv_escape(t) + "," + cell_text(r.support, 6) + "," + csv_escape(join(names, " > ")) + "\n";
  }
  lang_json["r_max"] = rmax;
  em.file("r_max_" + lang + ".csv", r_csv);
}

}  // namespace

AnalysisOutput emit_analysis(const ExperimentConfig& config, const ScoreGrid& grid, const fs::path& dir) {
  fs::create_directories(dir);
  Emitter em{dir, {}};
  json analysis{{"seed", config.seed},
                {"profile", config.profile},
                {"encoders", grid.encoders},
                {"classifiers", grid.classifiers},
                {"sizes", config.sizes},
                {"p_max", config.stats.p_max},
                {"closeness", config.stats.closeness},
                {"profile_cell", {{"classifier", config.profile_cell.classifier}, {"size", config.profile_cell.size}}}};
  json langs = json::object();
  for (const auto& lang : grid.languages) {
    json lj = json::object();
    try {
      analyze_language(em, config, grid, lang, lj);
    } catch (const Error& e) {
      em.skip("stability:" + lang, e.what());
    }
    if (!lj.empty()) langs[lang] = lj;
  }
  analysis["languages"] = langs;

  json profiles = json::object();
  const std::string cell = config.profile_cell.classifier + "/" + std::to_string(config.profile_cell.size);
  for (const auto& [mode, name] : {std::pair{ProfileMode::encoder, "encoder"}, std::pair{ProfileMode::task, "task"}}) {
    if (grid.languages.size() < 2) {
      em.skip(std::string("profile_") + name, "requires ≥2 languages");
      continue;
    }
    try {
      const auto m = profile_correlation(grid, mode, config.profile_cell, config.stats);
      profiles[name] = matrix_json(m);
      em.file(std::string("profile_") + name + ".csv", matrix_csv(m, name));
    } catch (const Error& e) {
      em.skip(std::string("profile_") + name, std::string(e.what()) + " at " + cell);
    }
  }
  if (grid.downstream_tasks.empty()) {
    em.skip("profile_probing_vs_downstream", "requires ≥1 downstream task");
  } else {
    for (const auto& lang : grid.languages) {
      try {
        const auto m = profile_correlation(grid, ProfileMode::probing_vs_downstream, config.profile_cell, config.stats, lang);
        profiles["probing_vs_downstream"][lang] = matrix_json(m);
        em.file("profile_probing_vs_downstream_" + lang + ".csv", matrix_csv(m, "probing_task"));
      } catch (const Error& e) {
        em.skip("profile_probing_vs_downstream:" + lang, std::string(e.what()) + " at " + cell);
      }
    }
  }
  analysis["profiles"] = profiles;

  json skipped = json::array();
  for (const auto& s : em.out.skipped) skipped.push_back({{"report", s.report}, {"reason", s.reason}});
  analysis["skipped"] = skipped;
  em.file("analysis.json", analysis.dump(2) + "\n");
  em.out.analysis = std::move(analysis);
  return std::move(em.out);
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Blue (lo) through white (mid) to red (hi).
std::string color_for(double v, double lo, double hi) {
  if (!std::isfinite(v)) return "#cccccc";
  const double mid = (lo + hi) / 2.0;
  const double t = std::clamp((v - mid) / ((hi - lo) / 2.0), -1.0, 1.0);
  int r = 255;
  int g = 255;
  int b = 255;
  if (t >= 0) {
    g = b = static_cast<int>(std::lround(255 * (1.0 - 0.8 * t)));
  } else {
    r = g = static_cast<int>(std::lround(255 * (1.0 + 0.8 * t)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render_heatmap_svg(const Matrix& m, const std::string& title, double lo, double hi) {
  const int cell_w = 64;
  const int cell_h = 28;
  std::size_t longest = 4;
  for (const auto& r : m.row_labels) longest = std::max(longest, r.size());
  const int left = 16 + static_cast<int>(longest) * 7;
  const int top = 56;
  const int width = left + cell_w * static_cast<int>(m.col_labels.size()) + 16;
  const int height = top + cell_h * static_cast<int>(m.row_labels.size()) + 16;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"8\" y=\"18\" font-size=\"13\" font-weight=\"bold\">" << xml_escape(title) << "</text>\n";
  for (std::size_t c = 0; c < m.col_labels.size(); ++c) {
    svg << "<text x=\"" << left + cell_w * static_cast<int>(c) + cell_w / 2 << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\">" << xml_escape(m.col_labels[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    const int y = top + cell_h * static_cast<int>(r);
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + cell_h / 2 + 4 << "\" text-anchor=\"end\">"
        << xml_escape(m.row_labels[r]) << "</text>\n";
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) {
      const double v = m.at(r, c);
      const int x = left + cell_w * static_cast<int>(c);
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\"" << cell_h
          << "\" fill=\"" << color_for(v, lo, hi) << "\" stroke=\"white\"/>";
      svg << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h / 2 + 4 << "\" text-anchor=\"middle\">"
          << cell_text(v, 2) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<fs::path> emit_reports(const json& analysis, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  auto write = [&](const std::string& name, const std::string& contents) {
    write_file_atomic(dir / name, contents);
    files.push_back(dir / name);
  };

  std::ostringstream md;
  md << "# Probing stability summary\n\n";
  md << "Seed " << analysis.value("seed", 0) << ", profile " << analysis.value("profile", std::string("?"))
     << ". Correlations with p > " << analysis.value("p_max", 0.2) << " are set to 0.\n\n";

  for (const auto& [lang, lj] : analysis.at("languages").items()) {
    md << "## " << lang << "\n\nTasks: " << join(lj.at("tasks").get<std::vector<std::string>>(), ", ") << "\n\n";
    for (const auto& [method, mj] : lj.at("methods").items()) {
      for (const auto& [c, m] : mj.at("sim_size").items()) {
        write("sim_size_" + lang + "_" + c + "_" + method + ".svg",
              render_heatmap_svg(matrix_from_json(m), "sim_size " + lang + " " + c + " (" + method + ")"));
      }
      write("size_stability_" + lang + "_" + method + ".svg",
            render_heatmap_svg(matrix_from_json(mj.at("size_stability")), "size stability " + lang + " (" + method + ")"));
      write("cross_classifier_" + lang + "_" + method + ".svg",
            render_heatmap_svg(matrix_from_json(mj.at("cross_avg")),
                               "average cross-classifier similarity " + lang + " (" + method + ")"));
    }

    const auto& mu = lj.at("mu");
    md << "### Most stable (classifier, size) cells\n\n";
    if (!mu.empty()) {
      const double top = mu.front().at("mu").get<double>();
      std::vector<std::string> best;
      for (const auto& m : mu) {
        if (m.at("mu").get<double>() >= top - 1e-12)
          best.push_back(m.at("classifier").get<std::string>() + "/" + std::to_string(m.at("size").get<std::size_t>()));
      }
      md << "Highest mu: **" << join(best, ", ") << "** (" << cell_text(top, 3) << " of "
         << lj.at("tasks").size() << ").\n\n";
    }
    md << "| rank | classifier | size | mu |\n|---:|---|---:|---:|\n";
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const auto& m = mu[i];
      const std::string b = i == 0 ? "**" : "";
      md << "| " << i + 1 << " | " << b << m.at("classifier").get<std::string>() << b << " | " << b
         << m.at("size").get<std::size_t>() << b << " | " << b << cell_text(m.at("mu").get<double>(), 3) << b << " |\n";
    }
    md << "\n";

    const auto& sp = lj.at("methods").at("spearman");
    if (sp.contains("size_minavg")) {
      const auto& pe = lj.at("methods").at("pearson");
      md << "### Stability over training sizes (min / avg)\n\n| classifier | Spearman | Pearson |\n|---|---|---|\n";
      for (const auto& [c, v] : sp.at("size_minavg").items()) {
        const auto& p = pe.at("size_minavg").at(c);
        md << "| " << c << " | " << cell_text(v.at("min").get<double>(), 3) << " / " << cell_text(v.at("avg").get<double>(), 3)
           << " | " << cell_text(p.at("min").get<double>(), 3) << " / " << cell_text(p.at("avg").get<double>(), 3) << " |\n";
      }
      md << "\n";
    }
    const auto stab = matrix_from_json(sp.at("size_stability"));
    md << "### Per-size stability (Spearman)\n\n| classifier |";
    for (const auto& s : stab.col_labels) md << " " << s << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < stab.col_labels.size(); ++i) md << "---:|";
    md << "\n";
    for (std::size_t r = 0; r < stab.row_labels.size(); ++r) {
      md << "| " << stab.row_labels[r] << " |";
      for (std::size_t c = 0; c < stab.col_labels.size(); ++c) md << " " << cell_text(stab.at(r, c), 3) << " |";
      md << "\n";
    }
    md << "\n### Majority-supported encoder rankings\n\n";
    for (const auto& [t, r] : lj.at("r_max").items()) {
      md << "- " << t << ": " << join(r.at("ranking").get<std::vector<std::string>>(), " > ") << " (support "
         << cell_text(r.at("support").get<double>(), 3) << ")\n";
    }
    md << "\n";
  }

  const auto& profiles = analysis.at("profiles");
  for (const auto name : {"encoder", "task"}) {
    if (profiles.contains(name))
      write(std::string("profile_") + name + ".svg",
            render_heatmap_svg(matrix_from_json(profiles.at(name)), std::string("cross-language profile by ") + name));
  }
  if (profiles.contains("probing_vs_downstream")) {
    for (const auto& [lang, m] : profiles.at("probing_vs_downstream").items())
      write("profile_probing_vs_downstream_" + lang + ".svg",
            render_heatmap_svg(matrix_from_json(m), "probing vs downstream " + lang));
  }

  const auto& skipped = analysis.at("skipped");
  if (!skipped.empty()) {
    md << "## Skipped reports\n\n";
    for (const auto& s : skipped)
      md << "- " << s.at("report").get<std::string>() << ": " << s.at("reason").get<std::string>() << "\n";
    md << "\n";
  }
  write("summary.md", md.str());
  return files;
}

}  // namespace probekit
