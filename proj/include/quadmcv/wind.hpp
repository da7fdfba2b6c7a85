#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "quadmcv/types.hpp"

namespace quadmcv::wind {

/// Mean wind plus the per-sample covariance of its turbulent part.
struct WindModel {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
};

/// Throws InvalidModelError unless the covariance is finite, symmetric and PSD
/// (eigenvalues >= -1e-10 after symmetrization).
void validate(const WindModel& model);

/// Lower-triangular L with L*L^T = covariance. Semidefinite pivots are zeroed
/// rather than rejected, so rank-deficient covariances (including 0) factor.
Mat3 turbulence_factor(const WindModel& model);

using Rng = std::mt19937_64;

/// One draw of mean + L*z, z ~ N(0, I3). Factors the covariance on every call;
/// use WindSampler for repeated draws.
Vec3 sample_gaussian(const WindModel& model, Rng& rng);

/// Owns a generator and the factored covariance. Identical seeds produce
/// bitwise identical sequences.
class WindSampler {
 public:
  WindSampler(const WindModel& model, std::uint64_t seed);

  Vec3 operator()();

 private:
  Vec3 mean_;
  Mat3 factor_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class Interpolation { ZeroOrderHold, Linear };

/// Recorded wind time series. Times strictly increasing, at least two samples.
class WindTrace {
 public:
  WindTrace(std::vector<double> times, std::vector<Vec3> samples);

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<Vec3>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return times_.size(); }
  double start() const noexcept { return times_.front(); }
  double end() const noexcept { return times_.back(); }

 private:
  std::vector<double> times_;
  std::vector<Vec3> samples_;
};

/// Sample at time t. No extrapolation: OutOfRangeError outside [start, end].
Vec3 lookup(const WindTrace& trace, double t, Interpolation mode);

/// Sample mean and unbiased (N-1) covariance, symmetrized.
WindModel estimate_stats(const WindTrace& trace);

/// Parses the `t,wx,wy,wz` CSV format. Errors name the offending line.
WindTrace parse_trace_csv(std::istream& in);
WindTrace read_trace_csv(const std::string& path);
void write_trace_csv(std::ostream& out, const WindTrace& trace);

struct GaussianSource {
  WindModel model;
  /// Turbulence resample interval in seconds; <= 0 means every control step.
  double sample_period = 0.0;
};

struct ReplaySource {
  std::shared_ptr<const WindTrace> trace;
  Interpolation mode = Interpolation::ZeroOrderHold;
  /// Run i replays the trace starting at start + i * stride (wrapping).
  double stride = 0.0;
};

using WindSource = std::variant<GaussianSource, ReplaySource>;

/// Statistics handed to the controller: the model itself, or estimate_stats of
/// the trace.
WindModel statistics(const WindSource& source);

std::string to_string(Interpolation mode);
Interpolation interpolation_from_string(const std::string& name);

}  // namespace quadmcv::wind
