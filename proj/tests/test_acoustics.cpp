#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "ildmap/acoustics.hpp"

using namespace ildmap;

TEST(Ild, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(ild(AngleDeg(0.0)), 0.0);
  EXPECT_NEAR(ild(AngleDeg(90.0)), 10.8, 1e-12);
  EXPECT_NEAR(ild(AngleDeg(-30.0)), -5.4, 1e-12);
}

TEST(Ild, RejectsBadInput) {
  EXPECT_THROW(ild(AngleDeg(91.0)), std::out_of_range);
  EXPECT_THROW(ild(AngleDeg(10.0), 0.0), std::invalid_argument);
}

TEST(Reward, Branches) {
  const EnvConfig cfg;
  EXPECT_EQ(reward(AngleDeg(10), AngleDeg(12), cfg), 100.0);
  EXPECT_EQ(reward(AngleDeg(0), AngleDeg(0), cfg), 100.0);
  EXPECT_EQ(reward(AngleDeg(-80), AngleDeg(40), cfg), -200.0);
  EXPECT_EQ(reward(AngleDeg(30), AngleDeg(10), cfg), -100.0);
  EXPECT_EQ(reward(AngleDeg(0), AngleDeg(5), cfg), 100.0);
  EXPECT_EQ(reward(AngleDeg(0), AngleDeg(90), cfg), -100.0);
}

TEST(Step, Transitions) {
  const EnvConfig cfg;
  EXPECT_EQ(step(AngleDeg(30), AngleDeg(10), 1, cfg).next_state.value(), 20.0);
  EXPECT_EQ(step(AngleDeg(80), AngleDeg(-20), 1, cfg).next_state.value(), 90.0);
  EXPECT_EQ(step(AngleDeg(-80), AngleDeg(20), 1, cfg).next_state.value(), -90.0);
  const Transition t = step(AngleDeg(5), AngleDeg(3), 1, cfg);
  EXPECT_TRUE(t.done);
  EXPECT_EQ(t.reward, 100.0);
  EXPECT_FALSE(step(AngleDeg(30), AngleDeg(10), 1, cfg).done);
  EXPECT_TRUE(step(AngleDeg(30), AngleDeg(10), 2, cfg).done);
}

TEST(Step, ClampsActionAndRejectsTerminated) {
  const EnvConfig cfg;
  EXPECT_EQ(step(AngleDeg(0), AngleDeg(150), 1, cfg).action.value(), 90.0);
  EXPECT_THROW(step(AngleDeg(0), AngleDeg(0), 3, cfg), std::logic_error);
  Episode ep{AngleDeg(40), {}};
  step(ep, AngleDeg(40), cfg);
  EXPECT_TRUE(ep.finished());
  EXPECT_TRUE(ep.succeeded(cfg));
  EXPECT_THROW(step(ep, AngleDeg(0), cfg), std::logic_error);
}

TEST(Reset, UniformSupport) {
  RngStream rng(1);
  const RngStream copy = rng;
  RngStream again = copy;
  EXPECT_EQ(reset(rng).value(), reset(again).value());
  double sum = 0.0, lo = 0.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double y = reset(rng).value();
    sum += y;
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  EXPECT_NEAR(sum / 100000, 0.0, 1.0);
  EXPECT_GE(lo, -90.0);
  EXPECT_LE(hi, 90.0);
}

TEST(DiscountedReturn, Sums) {
  Episode one{AngleDeg(0), {Transition{AngleDeg(0), AngleDeg(0), 100.0, AngleDeg(0), true, 1}}};
  EXPECT_DOUBLE_EQ(discounted_return(one, 0.99), 100.0);
  Episode two{AngleDeg(0),
              {Transition{AngleDeg(0), AngleDeg(0), -100.0, AngleDeg(0), false, 1},
               Transition{AngleDeg(0), AngleDeg(0), 100.0, AngleDeg(0), true, 2}}};
  EXPECT_NEAR(discounted_return(two, 0.99), -1.0, 1e-12);
  Episode zeros{AngleDeg(0), {Transition{}, Transition{}}};
  EXPECT_EQ(discounted_return(zeros, 0.99), 0.0);
}

TEST(EpisodeCsv, CrlfRows) {
  std::ostringstream os;
  write_episode_csv_header(os);
  Episode ep{AngleDeg(30), {}};
  step(ep, AngleDeg(10), EnvConfig{});
  write_episode_csv(os, 0, ep);
  EXPECT_EQ(os.str(), "episode,step,s,a,reward,s_next,done\r\n0,1,30,10,-100,20,0\r\n");
}

TEST(EnvConfig, Validation) {
  EnvConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
