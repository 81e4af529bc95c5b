// probekit command-line front end; talks to the library only through probekit.h.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "probekit/probekit.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  long long seed = -1;
  std::size_t jobs = 0;
  bool resume = false;
  bool quiet = false;
};

int run(pk_stage stage, const Options& o) {
  pk_config* cfg = nullptr;
  if (pk_config_load(o.config.c_str(), &cfg) != PK_OK) {
    std::fprintf(stderr, "probekit: %s\n", pk_last_error());
    return 2;
  }
  if (o.seed >= 0) pk_config_set_seed(cfg, static_cast<uint64_t>(o.seed));
  if (!o.out.empty() && pk_config_set_output_dir(cfg, o.out.c_str()) != PK_OK) {
    std::fprintf(stderr, "probekit: %s\n", pk_last_error());
    pk_config_free(cfg);
    return 2;
  }
  const pk_run_options opts{o.jobs, o.resume ? 1 : 0, o.quiet ? 1 : 0};
  pk_summary* summary = nullptr;
  const pk_status st = pk_run(cfg, stage, &opts, &summary);
  pk_config_free(cfg);
  if (st != PK_OK) {
    std::fprintf(stderr, "probekit: %s error: %s\n", pk_status_name(st), pk_last_error());
    return 2;
  }
  size_t total = 0, ran = 0, skipped = 0, failed = 0;
  pk_summary_counts(summary, &total, &ran, &skipped, &failed);
  for (size_t i = 0; i < pk_summary_message_count(summary, PK_MSG_NOTE); ++i)
    std::fprintf(stderr, "note: %s\n", pk_summary_message(summary, PK_MSG_NOTE, i));
  for (size_t i = 0; i < pk_summary_message_count(summary, PK_MSG_FAILURE); ++i)
    std::fprintf(stderr, "failed: %s\n", pk_summary_message(summary, PK_MSG_FAILURE, i));
  if (stage == PK_STAGE_ANALYZE || stage == PK_STAGE_REPORT) {
    std::printf("wrote %zu files\n", pk_summary_message_count(summary, PK_MSG_WRITTEN));
  } else {
    std::printf("%zu total, %zu run, %zu skipped, %zu failed\n", total, ran, skipped, failed);
  }
  pk_summary_free(summary);
  return failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probing-task construction, probe training and stability analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pk_version());

  Options o;
  struct Sub {
    const char* name;
    const char* help;
    pk_stage stage;
  };
  const Sub subs[] = {
      {"generate", "build probing datasets (TSV + metadata)", PK_STAGE_GENERATE},
      {"encode", "write embedding files for built-in encoders", PK_STAGE_ENCODE},
      {"probe", "run the probing experiment matrix", PK_STAGE_PROBE},
      {"downstream", "run downstream tasks", PK_STAGE_DOWNSTREAM},
      {"analyze", "compute stability tables from results", PK_STAGE_ANALYZE},
      {"report", "render heatmaps and summary.md", PK_STAGE_REPORT},
  };
  pk_stage chosen = PK_STAGE_PROBE;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    cmd->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "override the config seed")->check(CLI::NonNegativeNumber);
    cmd->add_option("--jobs", o.jobs, "worker threads (default: logical cores)");
    cmd->add_flag("--resume", o.resume, "skip cells already in the results store");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("-q,--quiet", o.quiet, "no progress lines");
    const pk_stage stage = s.stage;
    cmd->callback([&chosen, stage] { chosen = stage; });
  }
  CLI11_PARSE(app, argc, argv);
  return run(chosen, o);
}
