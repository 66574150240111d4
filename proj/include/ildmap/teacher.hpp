#pragma once

// Innate teacher: one noisy sigmoidal LSO unit read out by a fixed linear decoder.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ildmap/domain.hpp"

namespace ildmap {

struct TeacherConfig {
  double slope = 0.05;      // k, 1/deg
  double midpoint = 0.0;    // y0, deg
  double noise_std = 3.0;   // sigma_r, firing-rate units
  double max_rate = 100.0;  // r_max
  double gain = 200.0;      // a, deg
  double offset = -100.0;   // b, deg

  void validate() const {
    if (!(slope > 0.0)) throw std::invalid_argument("TeacherConfig: slope must be positive");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("TeacherConfig: noise std must be >= 0");
    if (!(max_rate > 0.0)) throw std::invalid_argument("TeacherConfig: max rate must be positive");
  }

  /// Unbiased at the midline.
  static TeacherConfig preset_a() { return {0.05, 0.0, 3.0, 100.0, 200.0, -100.0}; }
  /// Shifted tuning curve with a mismatched decoder.
  static TeacherConfig preset_b() { return {0.05, 10.0, 3.0, 100.0, 167.0, -94.0}; }

  static TeacherConfig preset(char name) {
    switch (name) {
      case 'A':
      case 'a':
        return preset_a();
      case 'B':
      case 'b':
        return preset_b();
      default:
        throw std::invalid_argument(std::string("unknown teacher preset '") + name + "'");
    }
  }
};

struct TeacherEstimate {
  double location = 0.0;  // unclamped decode
  int side = 1;           // sign(location)
  double rate = 0.0;      // sampled firing rate behind the decode
};

/// Left/right feedback only. Learners that must not see the magnitude of the
/// decode receive this instead of a TeacherEstimate.
struct SideFeedback {
  int side = 1;
};

class TeacherModel {
 public:
  TeacherModel() = default;
  explicit TeacherModel(TeacherConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const TeacherConfig& config() const { return cfg_; }

  /// Logistic mean rate in (0, 1).
  double mean_rate(AngleDeg y) const { return 1.0 / (1.0 + std::exp(-cfg_.slope * (y.value() - cfg_.midpoint))); }

  /// Noisy firing rate; not clipped to [0, r_max].
  double sample_rate(AngleDeg y, RngStream& rng) const {
    const double noise = cfg_.noise_std > 0.0 ? rng.normal(0.0, cfg_.noise_std) : 0.0;
    return mean_rate(y) * cfg_.max_rate + noise;
  }

  double decode(double rate) const { return cfg_.gain * rate / cfg_.max_rate + cfg_.offset; }

  TeacherEstimate estimate(AngleDeg y, RngStream& rng) const {
    TeacherEstimate e;
    e.rate = sample_rate(y, rng);
    e.location = decode(e.rate);
    e.side = sign(e.location);
    return e;
  }

  SideFeedback side(AngleDeg y, RngStream& rng) const { return {estimate(y, rng).side}; }

  double expected_estimate(AngleDeg y) const { return cfg_.gain * mean_rate(y) + cfg_.offset; }

  /// Root of expected_estimate in [-90, 90] by bisection.
  AngleDeg sign_flip_location(double tolerance = 1e-6) const {
    if (!(cfg_.gain > 0.0)) {
      throw std::domain_error("sign_flip_location: decoder gain must be positive");
    }
    double lo = -kMaxAngle;
    double hi = kMaxAngle;
    double f_lo = expected_estimate(AngleDeg(lo));
    const double f_hi = expected_estimate(AngleDeg(hi));
    if (f_lo > 0.0 || f_hi < 0.0) {
      throw std::domain_error("sign_flip_location: degenerate teacher, no zero crossing in [-90, 90]");
    }
    while (hi - lo > tolerance) {
      const double mid = 0.5 * (lo + hi);
      const double f_mid = expected_estimate(AngleDeg(mid));
      if ((f_mid < 0.0) == (f_lo < 0.0)) {
        lo = mid;
        f_lo = f_mid;
      } else {
        hi = mid;
      }
    }
    return AngleDeg(0.5 * (lo + hi));
  }

 private:
  TeacherConfig cfg_{};
};

struct TeacherSample {
  int y_true = 0;
  int sample_index = 0;
  TeacherEstimate estimate;
};

/// `samples_per_point` estimates at every integer azimuth in [-90, 90].
inline std::vector<TeacherSample> sample_response_grid(const TeacherModel& teacher, int samples_per_point,
                                                       RngStream& rng) {
  if (samples_per_point < 1) {
    throw std::invalid_argument("sample_response_grid: samples per point must be >= 1");
  }
  std::vector<TeacherSample> rows;
  rows.reserve(181 * static_cast<std::size_t>(samples_per_point));
  for (int y = -90; y <= 90; ++y) {
    for (int i = 0; i < samples_per_point; ++i) {
      rows.push_back({y, i, teacher.estimate(AngleDeg(y), rng)});
    }
  }
  return rows;
}

}  // namespace ildmap
