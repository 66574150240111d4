// Command-line front end: teacher-grid, robust-vs-mse, rl-compare, acceptance, plot.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ildmap/acceptance.hpp"
#include "ildmap/config.hpp"
#include "ildmap/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAcceptance = 2;

struct CommonFlags {
  std::string config_path;
  std::string seeds;
  std::optional<long> episodes;
  std::string teacher;
  std::string out;
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value configuration file");
  cmd->add_option("--seed", f.seeds, "seed or comma-separated seed list");
  cmd->add_option("--episodes", f.episodes, "episode budget for both supervised and RL runs");
  cmd->add_option("--teacher", f.teacher, "teacher preset")->check(CLI::IsMember({"A", "B", "a", "b"}));
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--paper-scale", f.paper_scale, "use the long training budgets");
}

ildmap::RunConfig build_config(const CommonFlags& f, ildmap::RunConfig cfg) {
  if (!f.config_path.empty()) {
    if (!ildmap::fs::is_regular_file(f.config_path)) {
      throw std::invalid_argument("config file '" + f.config_path + "' not found");
    }
    cfg = ildmap::load_config(f.config_path, cfg);
  }
  if (f.paper_scale) cfg.use_paper_scale();
  if (f.episodes) {
    cfg.supervised_episodes = *f.episodes;
    cfg.rl_episodes = *f.episodes;
  }
  if (!f.seeds.empty()) cfg.seeds = ildmap::parse_seed_list(f.seeds);
  if (!f.teacher.empty()) cfg.teacher = ildmap::teacher_choice_from_string(f.teacher);
  if (!f.out.empty()) cfg.output_dir = f.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auditory space map learning lab"};
  app.set_version_flag("--version", ildmap::kVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  std::optional<int> samples_per_point;
  std::string only;
  std::string json_path;
  bool invert_feedback = false;
  std::string plot_dir = "out";

  auto* grid = app.add_subcommand("teacher-grid", "sample the teacher over the angle grid");
  add_common(grid, flags);
  grid->add_option("--samples-per-point", samples_per_point, "teacher samples per grid angle");

  auto* sup = app.add_subcommand("robust-vs-mse", "train robust and MSE learners side by side");
  add_common(sup, flags);

  auto* rl = app.add_subcommand("rl-compare", "run the four RL variants");
  add_common(rl, flags);

  auto* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
  add_common(acc, flags);
  acc->add_option("--only", only, "comma-separated criterion ids");
  acc->add_option("--json", json_path, "report path (default <out>/acceptance.json)");
  acc->add_flag("--invert-feedback", invert_feedback, "negative control: flip the robust learning gradient");

  auto* plot = app.add_subcommand("plot", "re-render SVGs from saved CSVs");
  plot->add_option("dir", plot_dir, "output root to scan");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*plot) {
      const int n = ildmap::render_all_svgs(plot_dir);
      std::cout << "rendered " << n << " chart group(s) under " << plot_dir << "\n";
      return kExitOk;
    }

    ildmap::RunConfig base;
    if (*acc) base.seeds = {1, 2, 3};
    ildmap::RunConfig cfg = build_config(flags, base);
    if (samples_per_point) {
      cfg.samples_per_point = *samples_per_point;
      cfg.validate();
    }

    if (*grid) {
      ildmap::cmd_teacher_grid(cfg, std::cout);
    } else if (*sup) {
      ildmap::cmd_robust_vs_mse(cfg, std::cout);
    } else if (*rl) {
      ildmap::cmd_rl_compare(cfg, std::cout);
    } else if (*acc) {
      ildmap::AcceptanceOptions opts;
      opts.base = cfg;
      opts.invert_robust_feedback = invert_feedback;
      if (!only.empty()) {
        for (const auto id : ildmap::parse_seed_list(only)) opts.only.insert(static_cast<int>(id));
      }
      const ildmap::AcceptanceReport report = ildmap::run_acceptance(opts, std::cerr);
      std::cout << report.table();
      const std::string path = json_path.empty() ? (ildmap::fs::path(cfg.output_dir) / "acceptance.json").string() : json_path;
      ildmap::write_text(path, report.to_json().dump(2) + "\n");
      std::cout << "report written to " << path << "\n";
      return report.overall() ? kExitOk : kExitAcceptance;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return kExitOk;
}
