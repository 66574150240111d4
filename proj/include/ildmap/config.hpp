#pragma once

// Run configuration and its `key = value` file format.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ildmap/neuralnet.hpp"
#include "ildmap/rl.hpp"
#include "ildmap/robust.hpp"
#include "ildmap/teacher.hpp"

namespace ildmap {

inline constexpr const char* kVersion = "0.1.0";

enum class TeacherChoice { A, B, custom };

inline const char* to_string(TeacherChoice t) {
  switch (t) {
    case TeacherChoice::A:
      return "A";
    case TeacherChoice::B:
      return "B";
    case TeacherChoice::custom:
      return "custom";
  }
  return "?";
}

inline TeacherChoice teacher_choice_from_string(const std::string& s) {
  if (s == "A" || s == "a") return TeacherChoice::A;
  if (s == "B" || s == "b") return TeacherChoice::B;
  if (s == "custom") return TeacherChoice::custom;
  throw std::invalid_argument("unknown teacher '" + s + "' (expected A, B or custom)");
}

inline constexpr long kDeskSupervisedEpisodes = 50000;
inline constexpr long kDeskRlEpisodes = 75000;
inline constexpr long kPaperSupervisedEpisodes = 200000;
inline constexpr long kPaperRlEpisodes = 300000;

struct RunConfig {
  std::string experiment = "robust-vs-mse";
  std::vector<std::uint64_t> seeds = {1};
  long supervised_episodes = kDeskSupervisedEpisodes;
  long rl_episodes = kDeskRlEpisodes;
  double eval_step = 1.0;
  std::string output_dir = "out";
  std::optional<TeacherChoice> teacher;  // unset: each experiment picks its own preset
  TeacherConfig custom_teacher = TeacherConfig::preset_a();
  int samples_per_point = 50;

  InputMode input_mode = InputMode::dense_then_relu;
  double weight_decay = kDefaultWeightDecay;
  AdamConfig adam{};
  InputEncoding encoding = InputEncoding::ild;
  std::optional<double> huber_c;
  long supervised_eval_every = 1000;

  EnvConfig env{};
  SelectorConfig selector{};
  std::size_t replay_capacity = 100;
  std::size_t replay_batch = 8;
  long rl_eval_every = 5000;

  void validate() const {
    if (seeds.empty()) throw std::invalid_argument("RunConfig: at least one seed required");
    if (supervised_episodes < 1 || rl_episodes < 1)
      throw std::invalid_argument("RunConfig: episode counts must be >= 1");
    evaluation_grid(eval_step);
    if (samples_per_point < 1) throw std::invalid_argument("RunConfig: samples_per_point must be >= 1");
    custom_teacher.validate();
    adam.validate();
    env.validate();
    selector.validate();
    if (replay_batch == 0 || replay_batch > replay_capacity)
      throw std::invalid_argument("RunConfig: need 0 < replay batch <= replay capacity");
  }

  void use_paper_scale() {
    supervised_episodes = kPaperSupervisedEpisodes;
    rl_episodes = kPaperRlEpisodes;
  }

  TeacherConfig teacher_config(TeacherChoice fallback) const {
    switch (teacher.value_or(fallback)) {
      case TeacherChoice::A:
        return TeacherConfig::preset_a();
      case TeacherChoice::B:
        return TeacherConfig::preset_b();
      case TeacherChoice::custom:
        return custom_teacher;
    }
    return custom_teacher;
  }

  RobustTrainConfig robust_config() const {
    RobustTrainConfig c;
    c.episodes = supervised_episodes;
    c.adam = adam;
    c.huber_c = huber_c;
    c.encoding = encoding;
    c.eval_every = supervised_eval_every;
    c.eval_step = eval_step;
    return c;
  }

  RlConfig rl_config(RlVariant variant) const {
    RlConfig c;
    c.episodes = rl_episodes;
    c.env = env;
    c.actor_adam = adam;
    c.critic_adam = adam;
    c.weight_decay = weight_decay;
    c.selector = selector;
    c.replay_capacity = replay_capacity;
    c.replay_batch = replay_batch;
    c.variant = variant;
    c.actor_input_mode = input_mode;
    c.eval_every = rl_eval_every;
    c.eval_step = eval_step;
    return c;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline long parse_long(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long x = 0;
  try {
    x = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace detail

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') throw std::invalid_argument("invalid seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

/// Key table shared by the parser and the canonical dump.
class ConfigKeys {
 public:
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  using Getter = std::function<std::string(const RunConfig&)>;

  static const std::map<std::string, std::pair<Setter, Getter>>& table() {
    static const std::map<std::string, std::pair<Setter, Getter>> keys = build();
    return keys;
  }

 private:
  static std::map<std::string, std::pair<Setter, Getter>> build() {
    using detail::format_double;
    using detail::parse_double;
    using detail::parse_long;
    std::map<std::string, std::pair<Setter, Getter>> k;
    const auto real = [&k](const std::string& key, double RunConfig::*field) {
      k[key] = {[key, field](RunConfig& c, const std::string& v) { c.*field = parse_double(key, v); },
                [field](const RunConfig& c) { return format_double(c.*field); }};
    };
    const auto integer = [&k](const std::string& key, long RunConfig::*field) {
      k[key] = {[key, field](RunConfig& c, const std::string& v) { c.*field = parse_long(key, v); },
                [field](const RunConfig& c) { return std::to_string(c.*field); }};
    };
    const auto nested = [&k](const std::string& key, auto getter_ref) {
      k[key] = {[key, getter_ref](RunConfig& c, const std::string& v) { getter_ref(c) = parse_double(key, v); },
                [getter_ref](const RunConfig& c) { return format_double(getter_ref(const_cast<RunConfig&>(c))); }};
    };

    k["experiment"] = {[](RunConfig& c, const std::string& v) { c.experiment = v; },
                       [](const RunConfig& c) { return c.experiment; }};
    k["seeds"] = {[](RunConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); },
                  [](const RunConfig& c) {
                    std::string s;
                    for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                    return s;
                  }};
    integer("supervised_episodes", &RunConfig::supervised_episodes);
    integer("rl_episodes", &RunConfig::rl_episodes);
    real("eval_step", &RunConfig::eval_step);
    k["output_dir"] = {[](RunConfig& c, const std::string& v) { c.output_dir = v; },
                       [](const RunConfig& c) { return c.output_dir; }};
    k["teacher"] = {[](RunConfig& c, const std::string& v) { c.teacher = teacher_choice_from_string(v); },
                    [](const RunConfig& c) { return c.teacher ? std::string(to_string(*c.teacher)) : std::string("default"); }};
    nested("teacher.slope", [](RunConfig& c) -> double& { return c.custom_teacher.slope; });
    nested("teacher.midpoint", [](RunConfig& c) -> double& { return c.custom_teacher.midpoint; });
    nested("teacher.noise_std", [](RunConfig& c) -> double& { return c.custom_teacher.noise_std; });
    nested("teacher.max_rate", [](RunConfig& c) -> double& { return c.custom_teacher.max_rate; });
    nested("teacher.gain", [](RunConfig& c) -> double& { return c.custom_teacher.gain; });
    nested("teacher.offset", [](RunConfig& c) -> double& { return c.custom_teacher.offset; });
    k["samples_per_point"] = {
        [](RunConfig& c, const std::string& v) { c.samples_per_point = static_cast<int>(parse_long("samples_per_point", v)); },
        [](const RunConfig& c) { return std::to_string(c.samples_per_point); }};

    k["network.input_mode"] = {[](RunConfig& c, const std::string& v) { c.input_mode = input_mode_from_string(v); },
                               [](const RunConfig& c) { return std::string(to_string(c.input_mode)); }};
    real("network.weight_decay", &RunConfig::weight_decay);
    nested("adam.learning_rate", [](RunConfig& c) -> double& { return c.adam.learning_rate; });
    nested("adam.beta1", [](RunConfig& c) -> double& { return c.adam.beta1; });
    nested("adam.beta2", [](RunConfig& c) -> double& { return c.adam.beta2; });
    nested("adam.epsilon", [](RunConfig& c) -> double& { return c.adam.epsilon; });
    k["robust.encoding"] = {[](RunConfig& c, const std::string& v) {
                              if (v == "ild") c.encoding = InputEncoding::ild;
                              else if (v == "raw-angle") c.encoding = InputEncoding::raw_angle;
                              else throw std::invalid_argument("config: robust.encoding expects ild or raw-angle");
                            },
                            [](const RunConfig& c) { return std::string(c.encoding == InputEncoding::ild ? "ild" : "raw-angle"); }};
    k["robust.huber_c"] = {[](RunConfig& c, const std::string& v) {
                             if (v == "disabled") c.huber_c.reset();
                             else c.huber_c = parse_double("robust.huber_c", v);
                           },
                           [](const RunConfig& c) { return c.huber_c ? format_double(*c.huber_c) : std::string("disabled"); }};
    integer("robust.eval_every", &RunConfig::supervised_eval_every);

    nested("env.reward", [](RunConfig& c) -> double& { return c.env.reward; });
    nested("env.success_window", [](RunConfig& c) -> double& { return c.env.success_window; });
    nested("env.gamma", [](RunConfig& c) -> double& { return c.env.gamma; });
    k["env.max_steps"] = {[](RunConfig& c, const std::string& v) { c.env.max_steps = static_cast<int>(parse_long("env.max_steps", v)); },
                          [](const RunConfig& c) { return std::to_string(c.env.max_steps); }};
    nested("selector.beta_teacher", [](RunConfig& c) -> double& { return c.selector.beta_teacher; });
    nested("selector.beta_student", [](RunConfig& c) -> double& { return c.selector.beta_student; });
    nested("selector.epsilon_student", [](RunConfig& c) -> double& { return c.selector.epsilon_student; });
    nested("selector.initial_teacher", [](RunConfig& c) -> double& { return c.selector.initial_teacher; });
    nested("selector.initial_student", [](RunConfig& c) -> double& { return c.selector.initial_student; });
    k["replay.capacity"] = {[](RunConfig& c, const std::string& v) { c.replay_capacity = static_cast<std::size_t>(parse_long("replay.capacity", v)); },
                            [](const RunConfig& c) { return std::to_string(c.replay_capacity); }};
    k["replay.batch_size"] = {[](RunConfig& c, const std::string& v) { c.replay_batch = static_cast<std::size_t>(parse_long("replay.batch_size", v)); },
                              [](const RunConfig& c) { return std::to_string(c.replay_batch); }};
    integer("rl.eval_every", &RunConfig::rl_eval_every);
    return k;
  }
};

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& keys = ConfigKeys::table();
  const auto it = keys.find(key);
  if (it == keys.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.first(cfg, value);
}

/// Parses `key = value` lines; `#` starts a comment. Unset keys keep their defaults.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path, RunConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in, std::move(cfg));
}

/// Every key in sorted order; parse_config(dump_config(c)) reproduces c.
inline std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, fns] : ConfigKeys::table()) {
    const std::string value = fns.second(cfg);
    if (key == "teacher" && value == "default") continue;
    out += key + " = " + value + "\n";
  }
  return out;
}

/// FNV-1a over the canonical dump. The output directory does not affect results and is left out.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.output_dir = "out";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ildmap
