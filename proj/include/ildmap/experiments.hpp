#pragma once

// Experiment suites: teacher characterization, robust vs. MSE learning, and the
// RL variant comparison. Each suite writes CSVs first and renders its SVGs from
// those CSVs.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ildmap/config.hpp"
#include "ildmap/csv.hpp"
#include "ildmap/rl.hpp"
#include "ildmap/robust.hpp"
#include "ildmap/svg.hpp"
#include "ildmap/teacher.hpp"

namespace ildmap {

namespace fs = std::filesystem;

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// `# ildmap <version> suite=<name> config=<hash> seed=<seed>` line that opens every CSV.
inline std::string provenance_line(const RunConfig& cfg, const std::string& suite, std::uint64_t seed) {
  return "# ildmap " + std::string(kVersion) + " suite=" + suite + " config=" + hex64(config_hash(cfg)) +
         " seed=" + std::to_string(seed) + "\r\n";
}

inline std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto os = open_output(path);
  os << text;
}

inline fs::path seed_dir(const RunConfig& cfg, const std::string& suite, std::uint64_t seed) {
  return fs::path(cfg.output_dir) / suite / ("seed-" + std::to_string(seed));
}

inline void write_manifest(const RunConfig& cfg, const std::string& suite) {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["version"] = kVersion;
  j["config_hash"] = hex64(config_hash(cfg));
  j["config"] = dump_config(cfg);
  j["seeds"] = cfg.seeds;
  write_text(fs::path(cfg.output_dir) / suite / "manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// teacher-grid

struct TeacherGridResult {
  TeacherConfig teacher;
  double flip_location = 0.0;
  std::vector<TeacherSample> samples;
};

inline TeacherGridResult run_teacher_grid(const RunConfig& cfg, std::uint64_t seed) {
  TeacherGridResult r;
  r.teacher = cfg.teacher_config(TeacherChoice::A);
  const TeacherModel teacher(r.teacher);
  r.flip_location = teacher.sign_flip_location().value();
  RngStream rng = RngStream(seed).substream(0);
  r.samples = sample_response_grid(teacher, cfg.samples_per_point, rng);
  return r;
}

inline void render_teacher_grid_svg(const fs::path& dir) {
  const CsvTable grid = read_csv((dir / "teacher_grid.csv").string());
  const CsvTable expected = read_csv((dir / "teacher_expected.csv").string());
  svg::Chart chart{"Teacher estimates", "true azimuth (deg)", "decoded azimuth (deg)", {}};
  chart.series.push_back({"samples", grid.numbers("y_true"), grid.numbers("y_hat"), svg::Mark::scatter, svg::palette()[0]});
  chart.series.push_back(
      {"expected decode", expected.numbers("y_true"), expected.numbers("y_expected"), svg::Mark::line, svg::palette()[1]});
  chart.series.push_back({"true map", expected.numbers("y_true"), expected.numbers("y_true"), svg::Mark::line, "#000000"});
  write_text(dir / "teacher_grid.svg", svg::render(chart));
}

inline std::vector<TeacherGridResult> cmd_teacher_grid(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::vector<TeacherGridResult> results;
  for (const auto seed : cfg.seeds) {
    TeacherGridResult r = run_teacher_grid(cfg, seed);
    const fs::path dir = seed_dir(cfg, "teacher-grid", seed);
    {
      auto os = open_output(dir / "teacher_grid.csv");
      os << provenance_line(cfg, "teacher-grid", seed);
      CsvWriter w(os, {"y_true", "sample_index", "rate", "y_hat", "sign"});
      for (const auto& s : r.samples) {
        w.row({std::to_string(s.y_true), std::to_string(s.sample_index), format_number(s.estimate.rate),
               format_number(s.estimate.location), std::to_string(s.estimate.side)});
      }
    }
    {
      const TeacherModel teacher(r.teacher);
      auto os = open_output(dir / "teacher_expected.csv");
      os << provenance_line(cfg, "teacher-grid", seed);
      CsvWriter w(os, {"y_true", "mean_rate", "y_expected"});
      for (int y = -90; y <= 90; ++y) {
        w.row({std::to_string(y), format_number(teacher.mean_rate(AngleDeg(y))),
               format_number(teacher.expected_estimate(AngleDeg(y)))});
      }
    }
    render_teacher_grid_svg(dir);
    const double shown = std::round(r.flip_location * 100.0) / 100.0 + 0.0;  // no "-0.00"
    log << "seed " << seed << ": sign flip location " << std::fixed << std::setprecision(2) << shown
        << " deg" << std::defaultfloat << "\n";
    results.push_back(std::move(r));
  }
  write_manifest(cfg, "teacher-grid");
  return results;
}

// ---------------------------------------------------------------------------
// robust-vs-mse

struct SupervisedComparison {
  std::uint64_t seed = 0;
  TeacherConfig teacher;
  EvalReport robust;
  EvalReport mse;
  std::vector<LearningCurvePoint> robust_curve;
  std::vector<LearningCurvePoint> mse_curve;
  double teacher_mc_rmse = 0.0;  // Monte-Carlo rmse of teacher estimates vs. true map

  double rmse_vs_teacher_mean(const EvalReport& r) const {
    const TeacherModel t(teacher);
    return r.rmse_against([&](double y) { return t.expected_estimate(AngleDeg(y)); });
  }
};

/// RMSE of raw teacher estimates against the true azimuth over the evaluation grid.
inline double teacher_monte_carlo_rmse(const TeacherModel& teacher, double step, int samples_per_point, RngStream& rng) {
  double ss = 0.0;
  long n = 0;
  for (double y : evaluation_grid(step)) {
    for (int i = 0; i < samples_per_point; ++i) {
      const double d = teacher.estimate(AngleDeg(y), rng).location - y;
      ss += d * d;
      ++n;
    }
  }
  return std::sqrt(ss / static_cast<double>(n));
}

/// Trains one learner with the given rule on a fresh student. Both rules built
/// from the same seed share the initial weights and the episode stream seed.
inline std::pair<Network, std::vector<LearningCurvePoint>> train_student(SupervisedRule rule, const RunConfig& cfg,
                                                                          const TeacherModel& teacher,
                                                                          std::uint64_t seed,
                                                                          bool invert_feedback = false) {
  const RngStream master(seed);
  RngStream init = master.substream(0);
  RngStream data = master.substream(1);
  Network student = student_architecture(init, cfg.input_mode, cfg.weight_decay);
  RobustTrainConfig rc = cfg.robust_config();
  rc.invert_feedback = invert_feedback;
  auto curve = train_supervised(rule, student, teacher, data, rc);
  return {std::move(student), std::move(curve)};
}

inline SupervisedComparison run_robust_vs_mse(const RunConfig& cfg, const TeacherConfig& teacher_cfg,
                                              std::uint64_t seed, bool invert_feedback = false) {
  SupervisedComparison c;
  c.seed = seed;
  c.teacher = teacher_cfg;
  const TeacherModel teacher(teacher_cfg);
  auto [robust_net, robust_curve] = train_student(SupervisedRule::robust, cfg, teacher, seed, invert_feedback);
  auto [mse_net, mse_curve] = train_student(SupervisedRule::mse, cfg, teacher, seed);
  c.robust = evaluate(robust_net, cfg.eval_step, cfg.encoding);
  c.mse = evaluate(mse_net, cfg.eval_step, cfg.encoding);
  c.robust_curve = std::move(robust_curve);
  c.mse_curve = std::move(mse_curve);
  RngStream mc = RngStream(seed).substream(2);
  c.teacher_mc_rmse = teacher_monte_carlo_rmse(teacher, cfg.eval_step, cfg.samples_per_point, mc);
  return c;
}

inline void render_robust_vs_mse_svgs(const fs::path& dir) {
  const CsvTable map = read_csv((dir / "final_map.csv").string());
  const auto y = map.numbers("y_true");
  svg::Chart chart{"Learned auditory space maps", "true azimuth (deg)", "predicted azimuth (deg)", {}};
  chart.series.push_back({"true map", y, y, svg::Mark::line, "#000000"});
  chart.series.push_back({"teacher mean", y, map.numbers("y_teacher_mean"), svg::Mark::line, svg::palette()[4]});
  chart.series.push_back({"robust", y, map.numbers("y_pred_robust"), svg::Mark::line, svg::palette()[0]});
  chart.series.push_back({"mse", y, map.numbers("y_pred_mse"), svg::Mark::line, svg::palette()[1]});
  write_text(dir / "final_map.svg", svg::render(chart));

  const CsvTable curve = read_csv((dir / "learning_curve.csv").string());
  const std::size_t c_ep = curve.column("episode"), c_rule = curve.column("rule"), c_rmse = curve.column("rmse");
  svg::Chart lc{"Learning curves", "episode", "grid rmse (deg)", {}};
  for (const std::string rule : {"robust", "mse"}) {
    svg::Series s{rule, {}, {}, svg::Mark::line, rule == "robust" ? svg::palette()[0] : svg::palette()[1]};
    for (const auto& row : curve.rows) {
      if (row[c_rule] != rule) continue;
      s.x.push_back(std::stod(row[c_ep]));
      s.y.push_back(std::stod(row[c_rmse]));
    }
    lc.series.push_back(std::move(s));
  }
  write_text(dir / "learning_curve.svg", svg::render(lc));
}

inline void write_robust_vs_mse(const RunConfig& cfg, const SupervisedComparison& c) {
  const fs::path dir = seed_dir(cfg, "robust-vs-mse", c.seed);
  const TeacherModel teacher(c.teacher);
  {
    auto os = open_output(dir / "learning_curve.csv");
    os << provenance_line(cfg, "robust-vs-mse", c.seed);
    CsvWriter w(os, {"episode", "rule", "rmse", "zero_crossing"});
    for (const auto& [rule, curve] : {std::pair{"robust", &c.robust_curve}, std::pair{"mse", &c.mse_curve}}) {
      for (const auto& p : *curve) {
        w.row({std::to_string(p.episode), rule, format_number(p.rmse), format_number(p.zero_crossing)});
      }
    }
  }
  {
    auto os = open_output(dir / "final_map.csv");
    os << provenance_line(cfg, "robust-vs-mse", c.seed);
    CsvWriter w(os, {"y_true", "y_teacher_mean", "y_pred_robust", "y_pred_mse"});
    for (std::size_t i = 0; i < c.robust.grid.size(); ++i) {
      const double y = c.robust.grid[i].y_true;
      w.row({format_number(y), format_number(teacher.expected_estimate(AngleDeg(y))),
             format_number(c.robust.grid[i].y_pred), format_number(c.mse.grid[i].y_pred)});
    }
  }
  render_robust_vs_mse_svgs(dir);
}

inline std::vector<SupervisedComparison> cmd_robust_vs_mse(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const TeacherChoice choice = cfg.teacher.value_or(TeacherChoice::A);
  std::vector<SupervisedComparison> results;
  for (const auto seed : cfg.seeds) {
    log << "seed " << seed << ": training robust and mse learners (" << cfg.supervised_episodes
        << " episodes each, teacher " << to_string(choice) << ")\n";
    results.push_back(run_robust_vs_mse(cfg, cfg.teacher_config(choice), seed));
    write_robust_vs_mse(cfg, results.back());
  }
  auto os = open_output(fs::path(cfg.output_dir) / "robust-vs-mse" / "summary.csv");
  os << provenance_line(cfg, "robust-vs-mse", cfg.seeds.front());
  CsvWriter w(os, {"seed", "teacher", "rule", "rmse", "zero_crossing", "mean_signed_error", "rmse_vs_teacher_mean",
                   "teacher_mc_rmse"});
  for (const auto& c : results) {
    for (const auto& [rule, report] : {std::pair{"robust", &c.robust}, std::pair{"mse", &c.mse}}) {
      w.row({std::to_string(c.seed), to_string(choice), rule, format_number(report->rmse),
             format_number(report->zero_crossing), format_number(report->mean_signed_error),
             format_number(c.rmse_vs_teacher_mean(*report)), format_number(c.teacher_mc_rmse)});
      log << "  " << rule << ": rmse " << format_number(report->rmse) << " zero-crossing "
          << format_number(report->zero_crossing) << "\n";
    }
  }
  write_manifest(cfg, "robust-vs-mse");
  return results;
}

// ---------------------------------------------------------------------------
// rl-compare

inline const std::vector<RlVariant>& all_variants() {
  static const std::vector<RlVariant> v = {RlVariant::naive_dpg, RlVariant::dpg_replay, RlVariant::robust_rl,
                                           RlVariant::robust_rl_replay};
  return v;
}

struct RlSummary {
  RlVariant variant = RlVariant::robust_rl;
  double leading_mean = 0.0;
  double trailing_mean = 0.0;
  double trailing_slope = 0.0;
  double trailing_success = 0.0;
  long episodes_to_half_success = -1;
  double trailing_student_fraction = 0.0;
  double final_rmse = 0.0;
  double final_zero_crossing = 0.0;
};

inline constexpr std::size_t kSuccessWindow = 100;

inline RlSummary summarize_run(RlVariant variant, const RunArtifacts& run) {
  RlSummary s;
  s.variant = variant;
  if (run.episodes.empty()) return s;
  s.leading_mean = metrics::leading_mean_reward(run.episodes);
  s.trailing_mean = metrics::trailing_mean_reward(run.episodes);
  s.trailing_slope = metrics::trailing_cumulative_slope(run.episodes);
  s.trailing_success = metrics::trailing_success_rate(run.episodes);
  s.episodes_to_half_success = metrics::episodes_to_success_rate(run.episodes, 0.5, kSuccessWindow);
  s.trailing_student_fraction = metrics::trailing_student_fraction(run.episodes);
  s.final_rmse = run.final_map.rmse;
  s.final_zero_crossing = run.final_map.zero_crossing;
  return s;
}

struct RlComparison {
  std::uint64_t seed = 0;
  TeacherConfig teacher;
  std::vector<std::pair<RlVariant, RunArtifacts>> runs;
  EvalReport robust_learning;  // supervised sign-feedback learner, same teacher

  const RunArtifacts& run(RlVariant v) const {
    for (const auto& [variant, r] : runs) {
      if (variant == v) return r;
    }
    throw std::out_of_range("variant not run");
  }
};

/// Every variant starts from the same seed, hence the same initial networks.
inline RunArtifacts run_variant(const RunConfig& cfg, const TeacherModel& teacher, RlVariant v, std::uint64_t seed) {
  RngStream rng = RngStream(seed).substream(10);
  return run_algorithm1(cfg.rl_config(v), teacher, rng);
}

inline RlComparison run_rl_compare(const RunConfig& cfg, const TeacherConfig& teacher_cfg, std::uint64_t seed,
                                   const std::vector<RlVariant>& variants, std::ostream* log = nullptr) {
  RlComparison c;
  c.seed = seed;
  c.teacher = teacher_cfg;
  const TeacherModel teacher(teacher_cfg);
  for (const auto v : variants) {
    if (log) *log << "seed " << seed << ": " << to_string(v) << " (" << cfg.rl_episodes << " episodes)\n";
    c.runs.emplace_back(v, run_variant(cfg, teacher, v, seed));
  }
  auto [net, curve] = train_student(SupervisedRule::robust, cfg, teacher, seed);
  c.robust_learning = evaluate(net, cfg.eval_step, cfg.encoding);
  return c;
}

inline std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= window) sum -= v[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

inline void render_rl_compare_svgs(const fs::path& dir) {
  svg::Chart rewards{"Accumulated reward", "episode", "cumulative reward", {}};
  svg::Chart selector{"Selector: fraction choosing the student (1000-episode average)", "episode", "fraction", {}};
  std::size_t color = 0;
  for (const auto v : all_variants()) {
    const fs::path rpath = dir / ("rewards_" + std::string(to_string(v)) + ".csv");
    if (fs::exists(rpath)) {
      const CsvTable t = read_csv(rpath.string());
      rewards.series.push_back({to_string(v), t.numbers("episode"), t.numbers("cumulative_reward"), svg::Mark::line,
                                svg::palette()[color % svg::palette().size()]});
    }
    const fs::path spath = dir / ("selector_" + std::string(to_string(v)) + ".csv");
    if (fs::exists(spath)) {
      const CsvTable t = read_csv(spath.string());
      selector.series.push_back({to_string(v), t.numbers("episode"), moving_average(t.numbers("chose_student"), 1000),
                                 svg::Mark::line, svg::palette()[color % svg::palette().size()]});
    }
    ++color;
  }
  write_text(dir / "rewards.svg", svg::render(rewards));
  write_text(dir / "selector.svg", svg::render(selector));

  const CsvTable map = read_csv((dir / "final_map.csv").string());
  const auto y = map.numbers("y_true");
  svg::Chart final_map{"Final maps", "true azimuth (deg)", "predicted azimuth (deg)", {}};
  final_map.series.push_back({"true map", y, y, svg::Mark::line, "#000000"});
  color = 0;
  for (std::size_t c = 1; c < map.header.size(); ++c) {
    final_map.series.push_back({map.header[c].substr(0, 7) == "y_pred_" ? map.header[c].substr(7) : map.header[c].substr(2), y,
                                map.numbers(map.header[c]), svg::Mark::line,
                                svg::palette()[(color++ + 4) % svg::palette().size()]});
  }
  write_text(dir / "final_map.svg", svg::render(final_map));
}

inline void write_rl_compare(const RunConfig& cfg, const RlComparison& c) {
  const fs::path dir = seed_dir(cfg, "rl-compare", c.seed);
  const std::string suite = "rl-compare";
  for (const auto& [v, run] : c.runs) {
    const std::string name = to_string(v);
    {
      auto os = open_output(dir / ("rewards_" + name + ".csv"));
      os << provenance_line(cfg, suite, c.seed);
      CsvWriter w(os, {"episode", "controller", "episode_reward", "cumulative_reward", "steps", "success"});
      for (const auto& e : run.episodes) {
        w.row({std::to_string(e.episode), to_string(e.controller), format_number(e.total_reward),
               format_number(e.cumulative_reward), std::to_string(e.steps), e.success ? "1" : "0"});
      }
    }
    if (uses_teacher(v)) {
      auto os = open_output(dir / ("selector_" + name + ".csv"));
      os << provenance_line(cfg, suite, c.seed);
      CsvWriter w(os, {"episode", "r_teacher", "r_student", "chose_student"});
      for (const auto& e : run.episodes) {
        w.row({std::to_string(e.episode), format_number(e.avg_teacher), format_number(e.avg_student),
               e.controller == Controller::student ? "1" : "0"});
      }
    }
    {
      auto os = open_output(dir / ("actor_eval_" + name + ".csv"));
      os << provenance_line(cfg, suite, c.seed);
      CsvWriter w(os, {"episode", "rmse", "zero_crossing"});
      for (const auto& p : run.actor_evals) {
        w.row({std::to_string(p.episode), format_number(p.rmse), format_number(p.zero_crossing)});
      }
    }
  }
  {
    const TeacherModel teacher(c.teacher);
    auto os = open_output(dir / "final_map.csv");
    os << provenance_line(cfg, suite, c.seed);
    std::vector<std::string> header = {"y_true", "y_teacher_mean", "y_pred_robust_learning"};
    for (const auto& [v, run] : c.runs) {
      std::string name = to_string(v);
      for (auto& ch : name) ch = ch == '-' ? '_' : ch;
      header.push_back("y_pred_" + name);
    }
    CsvWriter w(os, header);
    for (std::size_t i = 0; i < c.robust_learning.grid.size(); ++i) {
      const double y = c.robust_learning.grid[i].y_true;
      std::vector<std::string> row = {format_number(y), format_number(teacher.expected_estimate(AngleDeg(y))),
                                      format_number(c.robust_learning.grid[i].y_pred)};
      for (const auto& [v, run] : c.runs) row.push_back(format_number(run.final_map.grid[i].y_pred));
      w.row(row);
    }
  }
  render_rl_compare_svgs(dir);
}

inline std::vector<RlComparison> cmd_rl_compare(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const TeacherChoice choice = cfg.teacher.value_or(TeacherChoice::B);
  std::vector<RlComparison> results;
  for (const auto seed : cfg.seeds) {
    results.push_back(run_rl_compare(cfg, cfg.teacher_config(choice), seed, all_variants(), &log));
    write_rl_compare(cfg, results.back());
  }
  auto os = open_output(fs::path(cfg.output_dir) / "rl-compare" / "summary.csv");
  os << provenance_line(cfg, "rl-compare", cfg.seeds.front());
  CsvWriter w(os, {"seed", "variant", "leading_mean_reward", "trailing_mean_reward", "trailing_cumulative_slope",
                   "trailing_success_rate", "episodes_to_half_success", "trailing_student_fraction", "final_rmse",
                   "final_zero_crossing"});
  for (const auto& c : results) {
    for (const auto& [v, run] : c.runs) {
      const RlSummary s = summarize_run(v, run);
      w.row({std::to_string(c.seed), to_string(v), format_number(s.leading_mean), format_number(s.trailing_mean),
             format_number(s.trailing_slope), format_number(s.trailing_success),
             std::to_string(s.episodes_to_half_success), format_number(s.trailing_student_fraction),
             format_number(s.final_rmse), format_number(s.final_zero_crossing)});
      log << "  " << to_string(v) << ": trailing success " << format_number(s.trailing_success) << ", final rmse "
          << format_number(s.final_rmse) << "\n";
    }
  }
  write_manifest(cfg, "rl-compare");
  return results;
}

/// Re-renders every SVG under `root` from the CSVs found there.
inline int render_all_svgs(const fs::path& root) {
  int rendered = 0;
  if (!fs::exists(root)) return 0;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path& d = entry.path();
    if (fs::exists(d / "teacher_grid.csv") && fs::exists(d / "teacher_expected.csv")) {
      render_teacher_grid_svg(d);
      ++rendered;
    } else if (fs::exists(d / "final_map.csv") && fs::exists(d / "learning_curve.csv")) {
      render_robust_vs_mse_svgs(d);
      ++rendered;
    } else if (fs::exists(d / "final_map.csv")) {
      render_rl_compare_svgs(d);
      ++rendered;
    }
  }
  return rendered;
}

}  // namespace ildmap
