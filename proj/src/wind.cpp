#include "quadmcv/wind.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::wind {

void validate(const WindModel& model) {
  if (!model.mean.allFinite() || !model.covariance.allFinite()) {
    throw InvalidModelError("wind model has non-finite entries");
  }
  const Mat3 sym = 0.5 * (model.covariance + model.covariance.transpose());
  if ((model.covariance - sym).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + sym.norm())) {
    throw InvalidModelError("wind covariance is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw InvalidModelError(
        fmt::format("wind covariance is not positive semidefinite (min eigenvalue {:.3e})",
                    eig.eigenvalues().minCoeff()));
  }
}

Mat3 turbulence_factor(const WindModel& model) {
  validate(model);
  const Mat3 s = 0.5 * (model.covariance + model.covariance.transpose());
  const double tol = 1e-12 * std::max(1.0, s.diagonal().maxCoeff());

  // Cholesky–Banachiewicz with zeroed semidefinite pivots.
  Mat3 l = Mat3::Zero();
  for (int j = 0; j < 3; ++j) {
    double d = s(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= tol) {
      l(j, j) = 0.0;
      continue;
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < 3; ++i) {
      double v = s(i, j);
      for (int k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

Vec3 sample_gaussian(const WindModel& model, Rng& rng) {
  const Mat3 l = turbulence_factor(model);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 z;
  for (int i = 0; i < 3; ++i) z[i] = normal(rng);
  return model.mean + l * z;
}

WindSampler::WindSampler(const WindModel& model, std::uint64_t seed)
    : mean_(model.mean), factor_(turbulence_factor(model)), rng_(seed) {}

Vec3 WindSampler::operator()() {
  Vec3 z;
  for (int i = 0; i < 3; ++i) z[i] = normal_(rng_);
  return mean_ + factor_ * z;
}

WindTrace::WindTrace(std::vector<double> times, std::vector<Vec3> samples)
    : times_(std::move(times)), samples_(std::move(samples)) {
  if (times_.size() != samples_.size()) {
    throw InvalidModelError(fmt::format("wind trace has {} times but {} samples",
                                        times_.size(), samples_.size()));
  }
  if (times_.size() < 2) throw InvalidModelError("wind trace needs at least two samples");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || !samples_[i].allFinite()) {
      throw InvalidModelError(fmt::format("wind trace sample {} is not finite", i));
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw InvalidModelError(fmt::format(
          "wind trace times must be strictly increasing (sample {} at t={})", i, times_[i]));
    }
  }
}

Vec3 lookup(const WindTrace& trace, double t, Interpolation mode) {
  const auto& times = trace.times();
  if (!(t >= times.front() && t <= times.back())) {
    throw OutOfRangeError(fmt::format("wind lookup at t={} outside trace range [{}, {}]", t,
                                      times.front(), times.back()));
  }
  // First knot strictly greater than t; the bracketing interval is [k-1, k].
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto k = static_cast<std::size_t>(it - times.begin());
  if (k == times.size()) return trace.samples().back();
  const std::size_t lo = k - 1;
  if (mode == Interpolation::ZeroOrderHold || t == times[lo]) return trace.samples()[lo];
  const double a = (t - times[lo]) / (times[k] - times[lo]);
  return (1.0 - a) * trace.samples()[lo] + a * trace.samples()[k];
}

WindModel estimate_stats(const WindTrace& trace) {
  const auto& s = trace.samples();
  const double n = static_cast<double>(s.size());
  WindModel model;
  for (const auto& x : s) model.mean += x;
  model.mean /= n;
  for (const auto& x : s) {
    const Vec3 d = x - model.mean;
    model.covariance += d * d.transpose();
  }
  model.covariance /= (n - 1.0);
  model.covariance = 0.5 * (model.covariance + model.covariance.transpose()).eval();
  return model;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_field(const std::string& text, std::size_t line_no) {
  const std::string f = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(f, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (f.empty() || used != f.size()) {
    throw InvalidModelError(fmt::format("wind trace line {}: cannot parse '{}'", line_no, f));
  }
  return v;
}

}  // namespace

WindTrace parse_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> times;
  std::vector<Vec3> samples;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty()) continue;
    if (!header_seen) {
      std::string compact;
      for (char c : body) {
        if (c != ' ' && c != '\t') compact += c;
      }
      if (compact != "t,wx,wy,wz") {
        throw InvalidModelError(
            fmt::format("wind trace line {}: expected header 't,wx,wy,wz'", line_no));
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(body);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) {
      throw InvalidModelError(
          fmt::format("wind trace line {}: expected 4 fields, got {}", line_no, fields.size()));
    }
    const double t = parse_field(fields[0], line_no);
    if (!times.empty() && !(t > times.back())) {
      throw InvalidModelError(
          fmt::format("wind trace line {}: time {} is not after {}", line_no, t, times.back()));
    }
    times.push_back(t);
    samples.emplace_back(parse_field(fields[1], line_no), parse_field(fields[2], line_no),
                         parse_field(fields[3], line_no));
  }
  if (!header_seen) throw InvalidModelError("wind trace is empty");
  return WindTrace(std::move(times), std::move(samples));
}

WindTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open wind trace '{}'", path));
  return parse_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const WindTrace& trace) {
  out << "t,wx,wy,wz\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const Vec3& w = trace.samples()[i];
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", trace.times()[i], w.x(), w.y(),
                       w.z());
  }
}

WindModel statistics(const WindSource& source) {
  return std::visit(
      [](const auto& s) -> WindModel {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSource>) {
          validate(s.model);
          return s.model;
        } else {
          if (!s.trace) throw ConfigError("replay wind source has no trace");
          return estimate_stats(*s.trace);
        }
      },
      source);
}

std::string to_string(Interpolation mode) {
  return mode == Interpolation::Linear ? "linear" : "zoh";
}

Interpolation interpolation_from_string(const std::string& name) {
  if (name == "zoh" || name == "zero-order-hold") return Interpolation::ZeroOrderHold;
  if (name == "linear") return Interpolation::Linear;
  throw ConfigError(fmt::format("unknown interpolation mode '{}'", name));
}

}  // namespace quadmcv::wind
