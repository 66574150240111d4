#pragma once

// Acceptance criteria run end to end at a configurable budget. Each criterion
// reports what it measured, its threshold and a verdict.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ildmap/experiments.hpp"
#include "ildmap/gradcheck.hpp"

namespace ildmap {

inline constexpr int kAcceptanceSchemaVersion = 1;

struct CriterionResult {
  int id = 0;
  std::string name;
  std::string threshold;
  std::string measured;
  std::vector<double> per_seed;  // primary measured value per seed, when meaningful
  bool pass = false;
};

struct AcceptanceReport {
  std::vector<std::uint64_t> seeds;
  std::vector<CriterionResult> criteria;

  bool overall() const {
    if (criteria.empty()) return false;
    for (const auto& c : criteria) {
      if (!c.pass) return false;
    }
    return true;
  }

  const CriterionResult& criterion(int id) const {
    for (const auto& c : criteria) {
      if (c.id == id) return c;
    }
    throw std::out_of_range("criterion " + std::to_string(id) + " not in report");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = kAcceptanceSchemaVersion;
    j["overall"] = overall();
    j["seeds"] = seeds;
    j["criteria"] = nlohmann::ordered_json::array();
    for (const auto& c : criteria) {
      nlohmann::ordered_json cj;
      cj["id"] = c.id;
      cj["name"] = c.name;
      cj["threshold"] = c.threshold;
      cj["measured"] = c.measured;
      cj["per_seed"] = c.per_seed;
      cj["pass"] = c.pass;
      j["criteria"].push_back(cj);
    }
    return j;
  }

  std::string table() const {
    std::ostringstream os;
    for (const auto& c : criteria) {
      os << (c.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << "\n"
         << "        measured:  " << c.measured << "\n"
         << "        threshold: " << c.threshold << "\n";
    }
    os << "overall: " << (overall() ? "PASS" : "FAIL") << "\n";
    return os.str();
  }
};

struct AcceptanceOptions {
  RunConfig base{};                // budgets, hyperparameters and output directory
  std::set<int> only;              // empty: every criterion
  bool invert_robust_feedback = false;  // negative control for the bias criterion
  long determinism_supervised_episodes = 500;
  long determinism_rl_episodes = 300;

  AcceptanceOptions() { base.seeds = {1, 2, 3}; }
};

namespace detail {

/// Seeds that must pass for "at least 2 of 3" style criteria.
inline std::size_t majority(std::size_t n) { return (2 * n + 2) / 3; }

inline std::string join_values(const std::vector<std::uint64_t>& seeds, const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += "seed " + std::to_string(seeds[i]) + ": " + format_number(values[i]);
  }
  return s;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative paths and contents of every CSV below `root`.
inline std::map<std::string, std::string> snapshot_csvs(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    }
  }
  return files;
}

/// Zero crossing of the Monte-Carlo mean teacher sign, scanned on a fine grid around `center`.
inline double monte_carlo_sign_crossing(const TeacherModel& teacher, double center, RngStream& rng,
                                        int samples = 20000, double half_width = 4.0, double step = 0.25) {
  double prev_y = 0.0, prev_m = 0.0;
  bool have_prev = false;
  for (double y = center - half_width; y <= center + half_width + 1e-12; y += step) {
    long sum = 0;
    for (int i = 0; i < samples; ++i) sum += teacher.estimate(AngleDeg(y), rng).side;
    const double m = static_cast<double>(sum) / samples;
    if (have_prev && prev_m < 0.0 && m >= 0.0) {
      return prev_y + (0.0 - prev_m) / (m - prev_m) * (y - prev_y);
    }
    prev_y = y;
    prev_m = m;
    have_prev = true;
  }
  return std::nan("");
}

}  // namespace detail

/**
 * \brief Runs the acceptance criteria.
 *
 * Supervised criteria share one robust/MSE training pair per (preset, seed);
 * RL criteria share one run per (variant, seed). `log` receives progress lines.
 */
inline AcceptanceReport run_acceptance(const AcceptanceOptions& opts, std::ostream& log) {
  const RunConfig& cfg = opts.base;
  cfg.validate();
  const auto& seeds = cfg.seeds;
  const std::size_t need = detail::majority(seeds.size());
  const auto wanted = [&](int id) { return opts.only.empty() || opts.only.count(id) > 0; };
  const auto count_true = [](const std::vector<bool>& v) {
    std::size_t n = 0;
    for (bool b : v) n += b ? 1 : 0;
    return n;
  };

  AcceptanceReport report;
  report.seeds = seeds;
  const TeacherConfig preset_a = TeacherConfig::preset_a();
  const TeacherConfig preset_b = TeacherConfig::preset_b();

  // 1. gradient integrity
  if (wanted(1)) {
    log << "[1] gradient checks\n";
    CriterionResult c{1, "gradient integrity", "every configuration, every seed: max relative error <= 1e-4 on 100 probes",
                      "", {}, true};
    for (const auto seed : seeds) {
      RngStream master(seed);
      RngStream init = master.substream(100);
      RngStream probes = master.substream(101);
      double worst = 0.0;
      const std::vector<std::pair<std::string, Network>> nets = {
          {"student", student_architecture(init, InputMode::dense_then_relu, cfg.weight_decay)},
          {"student-relu-input", student_architecture(init, InputMode::relu_on_input, cfg.weight_decay)},
          {"critic", critic_architecture(init, cfg.weight_decay)}};
      for (const auto& [name, net] : nets) {
        const double range = net.input_width() == 1 ? 10.8 : 90.0;
        const GradCheckResult r = check_gradients(net, probes, 100, range);
        worst = std::max(worst, r.max_relative_error);
        c.pass = c.pass && r.passed() && r.max_relative_error <= 1e-4;
      }
      c.per_seed.push_back(worst);
    }
    c.measured = "max relative error " + detail::join_values(seeds, c.per_seed);
    report.criteria.push_back(c);
  }

  // 2. teacher oracles
  if (wanted(2)) {
    log << "[2] teacher sign-flip oracles\n";
    const TeacherModel ta(preset_a), tb(preset_b);
    const double flip_a = ta.sign_flip_location().value();
    const double flip_b = tb.sign_flip_location().value();
    RngStream mc = RngStream(seeds.front()).substream(200);
    const double mc_a = detail::monte_carlo_sign_crossing(ta, flip_a, mc);
    const double mc_b = detail::monte_carlo_sign_crossing(tb, flip_b, mc);
    CriterionResult c{2, "teacher oracles",
                      "flip(A) = 0 +- 1e-3, flip(B) = 15.06 +- 0.05; Monte-Carlo sign crossing within 0.5 of each", "",
                      {flip_a, flip_b}, false};
    c.pass = std::abs(flip_a) <= 1e-3 && std::abs(flip_b - 15.06) <= 0.05 && std::abs(mc_a - flip_a) <= 0.5 &&
             std::abs(mc_b - flip_b) <= 0.5;
    c.measured = "flip(A) = " + format_number(flip_a) + ", flip(B) = " + format_number(flip_b) +
                 ", MC crossing A = " + format_number(mc_a) + ", B = " + format_number(mc_b);
    report.criteria.push_back(c);
  }

  // Supervised runs shared by 3-6.
  std::vector<SupervisedComparison> sup_a, sup_b;
  if (wanted(3) || wanted(4) || wanted(5) || wanted(6)) {
    for (const auto seed : seeds) {
      log << "    supervised runs, seed " << seed << " (" << cfg.supervised_episodes << " episodes per learner)\n";
      sup_a.push_back(run_robust_vs_mse(cfg, preset_a, seed, opts.invert_robust_feedback));
      sup_b.push_back(run_robust_vs_mse(cfg, preset_b, seed, opts.invert_robust_feedback));
    }
  }

  if (wanted(3)) {
    CriterionResult c{3, "robust learning, unbiased teacher A",
                      "rmse <= 5 deg and |zero crossing| <= 2 deg on >= " + std::to_string(need) + " seeds", "", {}, false};
    std::vector<bool> ok;
    std::vector<double> zc;
    for (const auto& s : sup_a) {
      c.per_seed.push_back(s.robust.rmse);
      zc.push_back(s.robust.zero_crossing);
      ok.push_back(s.robust.rmse <= 5.0 && std::abs(s.robust.zero_crossing) <= 2.0);
    }
    c.pass = count_true(ok) >= need;
    c.measured = "rmse " + detail::join_values(seeds, c.per_seed) + "; zero crossing " + detail::join_values(seeds, zc);
    report.criteria.push_back(c);
  }

  if (wanted(4)) {
    CriterionResult c{4, "MSE baseline inherits the teacher's shape",
                      "rmse(mse, teacher mean) <= rmse(mse, true map) for A and B on >= " + std::to_string(need) +
                          " seeds",
                      "", {}, false};
    std::vector<bool> ok;
    std::string measured;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const double a_t = sup_a[i].rmse_vs_teacher_mean(sup_a[i].mse), a_y = sup_a[i].mse.rmse;
      const double b_t = sup_b[i].rmse_vs_teacher_mean(sup_b[i].mse), b_y = sup_b[i].mse.rmse;
      ok.push_back(a_t <= a_y && b_t <= b_y);
      c.per_seed.push_back(std::max(a_t - a_y, b_t - b_y));
      measured += (i ? "; " : "") + std::string("seed ") + std::to_string(seeds[i]) + ": A " + format_number(a_t) +
                  " vs " + format_number(a_y) + ", B " + format_number(b_t) + " vs " + format_number(b_y);
    }
    c.pass = count_true(ok) >= need;
    c.measured = measured;
    report.criteria.push_back(c);
  }

  if (wanted(5)) {
    const double flip_b = TeacherModel(preset_b).sign_flip_location().value();
    CriterionResult c{5, "bias theorem",
                      "zero crossing within 3 deg of flip(B) = " + format_number(flip_b) +
                          " on B and within 2 deg of 0 on A, >= " + std::to_string(need) + " seeds",
                      "", {}, false};
    std::vector<bool> ok;
    std::vector<double> zc_a;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const double zb = sup_b[i].robust.zero_crossing;
      const double za = sup_a[i].robust.zero_crossing;
      c.per_seed.push_back(zb);
      zc_a.push_back(za);
      ok.push_back(std::abs(zb - flip_b) <= 3.0 && std::abs(za) <= 2.0);
    }
    c.pass = count_true(ok) >= need;
    c.measured = "B crossing " + detail::join_values(seeds, c.per_seed) + "; A crossing " + detail::join_values(seeds, zc_a);
    report.criteria.push_back(c);
  }

  if (wanted(6)) {
    CriterionResult c{6, "robust learner beats teacher B",
                      "learner rmse < Monte-Carlo teacher rmse on >= " + std::to_string(need) + " seeds", "", {}, false};
    std::vector<bool> ok;
    std::vector<double> teacher_rmse;
    for (const auto& s : sup_b) {
      c.per_seed.push_back(s.robust.rmse);
      teacher_rmse.push_back(s.teacher_mc_rmse);
      ok.push_back(s.robust.rmse < s.teacher_mc_rmse);
    }
    c.pass = count_true(ok) >= need;
    c.measured = "learner " + detail::join_values(seeds, c.per_seed) + "; teacher " + detail::join_values(seeds, teacher_rmse);
    report.criteria.push_back(c);
  }

  // RL runs shared by 7-10 and 12.
  std::map<RlVariant, std::vector<RunArtifacts>> rl;
  const auto need_variant = [&](RlVariant v) {
    switch (v) {
      case RlVariant::naive_dpg:
      case RlVariant::dpg_replay:
        return wanted(7);
      case RlVariant::robust_rl:
        return wanted(8) || wanted(9) || wanted(10) || wanted(12);
      case RlVariant::robust_rl_replay:
        return wanted(9);
    }
    return false;
  };
  {
    const TeacherModel tb(preset_b);
    for (const auto seed : seeds) {
      for (const auto v : all_variants()) {
        if (!need_variant(v)) continue;
        log << "    " << to_string(v) << ", seed " << seed << " (" << cfg.rl_episodes << " episodes)\n";
        rl[v].push_back(run_variant(cfg, tb, v, seed));
      }
    }
  }

  if (wanted(7)) {
    CriterionResult c{7, "naive DPG does not converge",
                      "trailing-10% mean reward - leading-10% mean reward <= 0 for naive-dpg and dpg-replay on >= " +
                          std::to_string(need) + " seeds",
                      "", {}, false};
    std::vector<bool> ok_naive, ok_replay;
    std::vector<double> replay_gain;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto& n = rl[RlVariant::naive_dpg][i].episodes;
      const auto& r = rl[RlVariant::dpg_replay][i].episodes;
      const double gn = metrics::trailing_mean_reward(n) - metrics::leading_mean_reward(n);
      const double gr = metrics::trailing_mean_reward(r) - metrics::leading_mean_reward(r);
      c.per_seed.push_back(gn);
      replay_gain.push_back(gr);
      ok_naive.push_back(gn <= 0.0);
      ok_replay.push_back(gr <= 0.0);
    }
    c.pass = count_true(ok_naive) >= need && count_true(ok_replay) >= need;
    c.measured = "naive-dpg gain " + detail::join_values(seeds, c.per_seed) + "; dpg-replay gain " +
                 detail::join_values(seeds, replay_gain);
    report.criteria.push_back(c);
  }

  if (wanted(8)) {
    CriterionResult c{8, "robust RL succeeds",
                      "trailing-10% cumulative-reward slope > 0 and trailing success rate >= 0.6 on >= " +
                          std::to_string(need) + " seeds",
                      "", {}, false};
    std::vector<bool> ok;
    std::vector<double> slopes;
    for (const auto& run : rl[RlVariant::robust_rl]) {
      const double slope = metrics::trailing_cumulative_slope(run.episodes);
      const double success = metrics::trailing_success_rate(run.episodes);
      slopes.push_back(slope);
      c.per_seed.push_back(success);
      ok.push_back(slope > 0.0 && success >= 0.6);
    }
    c.pass = count_true(ok) >= need;
    c.measured = "success rate " + detail::join_values(seeds, c.per_seed) + "; slope " + detail::join_values(seeds, slopes);
    report.criteria.push_back(c);
  }

  if (wanted(9)) {
    CriterionResult c{9, "replay accelerates robust RL",
                      "episodes to 50% success over a trailing " + std::to_string(kSuccessWindow) +
                          "-episode window: robust-rl-replay < robust-rl on >= " + std::to_string(need) + " seeds",
                      "", {}, false};
    std::vector<bool> ok;
    std::vector<double> plain;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const long with_replay =
          metrics::episodes_to_success_rate(rl[RlVariant::robust_rl_replay][i].episodes, 0.5, kSuccessWindow);
      const long without = metrics::episodes_to_success_rate(rl[RlVariant::robust_rl][i].episodes, 0.5, kSuccessWindow);
      c.per_seed.push_back(static_cast<double>(with_replay));
      plain.push_back(static_cast<double>(without));
      ok.push_back(with_replay > 0 && (without < 0 || with_replay < without));
    }
    c.pass = count_true(ok) >= need;
    c.measured = "robust-rl-replay " + detail::join_values(seeds, c.per_seed) + "; robust-rl " +
                 detail::join_values(seeds, plain) + " (-1: never)";
    report.criteria.push_back(c);
  }

  if (wanted(10)) {
    CriterionResult c{10, "selector endgame",
                      "student fraction over the final 5% of episodes >= 0.9 on >= " + std::to_string(need) + " seeds",
                      "", {}, false};
    std::vector<bool> ok;
    for (const auto& run : rl[RlVariant::robust_rl]) {
      c.per_seed.push_back(metrics::trailing_student_fraction(run.episodes));
      ok.push_back(c.per_seed.back() >= 0.9);
    }
    c.pass = count_true(ok) >= need;
    c.measured = "student fraction " + detail::join_values(seeds, c.per_seed);
    report.criteria.push_back(c);
  }

  if (wanted(11)) {
    log << "[11] determinism re-runs\n";
    CriterionResult c{11, "determinism", "every seed: two runs of each suite give byte-identical CSVs", "", {}, true};
    RunConfig small = cfg;
    small.supervised_episodes = opts.determinism_supervised_episodes;
    small.rl_episodes = opts.determinism_rl_episodes;
    small.supervised_eval_every = std::max(1L, small.supervised_episodes / 5);
    small.rl_eval_every = std::max(1L, small.rl_episodes / 5);
    std::ostringstream sink;
    std::size_t compared = 0;
    for (const auto seed : seeds) {
      small.seeds = {seed};
      std::map<std::string, std::string> snapshots[2];
      for (int pass = 0; pass < 2; ++pass) {
        RunConfig run_cfg = small;
        run_cfg.output_dir = (fs::path(cfg.output_dir) / "acceptance-determinism" / ("run-" + std::to_string(pass + 1))).string();
        fs::remove_all(run_cfg.output_dir);
        cmd_teacher_grid(run_cfg, sink);
        cmd_robust_vs_mse(run_cfg, sink);
        cmd_rl_compare(run_cfg, sink);
        snapshots[pass] = detail::snapshot_csvs(run_cfg.output_dir);
      }
      const bool same = !snapshots[0].empty() && snapshots[0] == snapshots[1];
      compared += snapshots[0].size();
      c.per_seed.push_back(same ? 1.0 : 0.0);
      c.pass = c.pass && same;
    }
    c.measured = std::to_string(compared) + " CSV files compared; identical per seed: " +
                 detail::join_values(seeds, c.per_seed);
    report.criteria.push_back(c);
  }

  if (wanted(12)) {
    CriterionResult c{12, "selector recurrence oracle",
                      "every seed: replaying logged rewards reproduces stored averages to 1e-12 relative", "", {}, true};
    for (const auto& run : rl[RlVariant::robust_rl]) {
      double rt = cfg.selector.initial_teacher;
      double rs = cfg.selector.initial_student;
      for (const auto& step : run.selector_log) {
        if (step.was_student) {
          rs = (1.0 - cfg.selector.beta_student) * rs + cfg.selector.beta_student * step.reward;
        } else {
          rt = (1.0 - cfg.selector.beta_teacher) * rt + cfg.selector.beta_teacher * step.reward;
        }
      }
      const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); };
      const double err = std::max(rel(rt, run.selector.avg_teacher) * (rt != run.selector.avg_teacher),
                                  rel(rs, run.selector.avg_student) * (rs != run.selector.avg_student));
      c.per_seed.push_back(err);
      c.pass = c.pass && err <= 1e-12 && !run.selector_log.empty();
    }
    c.measured = "max relative error " + detail::join_values(seeds, c.per_seed);
    report.criteria.push_back(c);
  }

  return report;
}

}  // namespace ildmap
