#include <sstream>

#include <gtest/gtest.h>

#include "ildmap/config.hpp"
#include "ildmap/csv.hpp"
#include "ildmap/svg.hpp"

using namespace ildmap;

TEST(Config, DefaultsMatchDeskScale) {
  const RunConfig c;
  EXPECT_EQ(c.supervised_episodes, 50000);
  EXPECT_EQ(c.rl_episodes, 75000);
  EXPECT_EQ(c.env.reward, 100.0);
  EXPECT_EQ(c.env.success_window, 5.0);
  EXPECT_EQ(c.env.gamma, 0.99);
  EXPECT_EQ(c.env.max_steps, 2);
  EXPECT_EQ(c.selector.beta_teacher, 0.005);
  EXPECT_EQ(c.selector.beta_student, 0.1);
  EXPECT_EQ(c.selector.epsilon_student, 0.5);
  EXPECT_EQ(c.replay_capacity, 100u);
  EXPECT_EQ(c.replay_batch, 8u);
  EXPECT_EQ(c.weight_decay, 0.1);
  EXPECT_EQ(c.adam.learning_rate, 1e-3);
  RunConfig p = c;
  p.use_paper_scale();
  EXPECT_EQ(p.supervised_episodes, 200000);
  EXPECT_EQ(p.rl_episodes, 300000);
}

TEST(Config, ParseOverridesAndComments) {
  std::istringstream in(
      "# desk run\n"
      "seeds = 4, 5,6\n"
      "teacher = B   # biased\n"
      "adam.learning_rate = 0.0005\n"
      "robust.huber_c = 2.5\n"
      "network.input_mode = relu_on_input\n"
      "\n"
      "replay.batch_size = 4\n");
  const RunConfig c = parse_config(in);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5, 6}));
  EXPECT_EQ(c.teacher, TeacherChoice::B);
  EXPECT_EQ(c.adam.learning_rate, 0.0005);
  EXPECT_EQ(c.huber_c, 2.5);
  EXPECT_EQ(c.input_mode, InputMode::relu_on_input);
  EXPECT_EQ(c.replay_batch, 4u);
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.seeds = {9, 18446744073709551615ULL};
  c.custom_teacher.midpoint = 0.1 + 0.2;
  c.teacher = TeacherChoice::custom;
  c.env.gamma = 0.95;
  c.huber_c = 1.0 / 3.0;
  c.encoding = InputEncoding::raw_angle;
  std::istringstream in(dump_config(c));
  const RunConfig back = parse_config(in);
  EXPECT_EQ(dump_config(back), dump_config(c));
  EXPECT_EQ(back.custom_teacher.midpoint, c.custom_teacher.midpoint);
  EXPECT_EQ(*back.huber_c, *c.huber_c);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashIgnoresOutputDirOnly) {
  RunConfig a, b;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.env.gamma = 0.9;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, Errors) {
  std::istringstream unknown("colour = blue\n");
  EXPECT_THROW(parse_config(unknown), std::invalid_argument);
  std::istringstream malformed("seeds\n");
  EXPECT_THROW(parse_config(malformed), std::invalid_argument);
  std::istringstream bad_number("env.gamma = lots\n");
  EXPECT_THROW(parse_config(bad_number), std::invalid_argument);
  std::istringstream invalid("samples_per_point = 0\n");
  EXPECT_THROW(parse_config(invalid), std::invalid_argument);
  EXPECT_THROW(parse_seed_list(""), std::invalid_argument);
  EXPECT_THROW(parse_seed_list("1,-2"), std::invalid_argument);
  EXPECT_THROW(parse_seed_list("x"), std::invalid_argument);
  EXPECT_THROW(load_config("/nonexistent/cfg"), std::runtime_error);
}

TEST(Csv, EscapeAndParse) {
  std::ostringstream os;
  os << "# provenance line\r\n";
  CsvWriter w(os, {"a", "b"});
  w.row({"1.5", "plain"});
  w.row({"2", "with, comma and \"quote\""});
  EXPECT_THROW(w.row({"only one"}), std::logic_error);
  std::istringstream in(os.str());
  const CsvTable t = parse_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "with, comma and \"quote\"");
  EXPECT_EQ(t.numbers("a"), (std::vector<double>{1.5, 2.0}));
  EXPECT_THROW(t.column("c"), std::out_of_range);
}

TEST(Csv, FormatNumber) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-15.05708), "-15.05708");
  EXPECT_EQ(format_number(1e-12), "1e-12");
}

TEST(Svg, RenderContainsSeries) {
  svg::Chart chart{"t <1>", "x", "y", {}};
  chart.series.push_back({"line", {0, 1, 2}, {0, 1, 4}, svg::Mark::line, "#000000"});
  chart.series.push_back({"dots", {0, 1}, {2, 3}, svg::Mark::scatter, "#ff0000"});
  const std::string s = svg::render(chart);
  EXPECT_NE(s.find("<svg"), std::string::npos);
  EXPECT_NE(s.find("<polyline"), std::string::npos);
  EXPECT_NE(s.find("<circle"), std::string::npos);
  EXPECT_NE(s.find("t &lt;1&gt;"), std::string::npos);
  EXPECT_EQ(s.substr(s.size() - 7), "</svg>\n");
}
