#include <doctest.h>

#include <cmath>
#include <sstream>

#include "quadmcv/errors.hpp"
#include "quadmcv/wind.hpp"

using namespace quadmcv;
using namespace quadmcv::wind;

namespace {

WindTrace two_sample() { return WindTrace({0.0, 1.0}, {Vec3(1, 0, 0), Vec3(3, 0, 0)}); }

}  // namespace

TEST_CASE("zero covariance returns the mean exactly") {
  WindModel m{Vec3(2.72, 1.752, -0.006), Mat3::Zero()};
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    const Vec3 v = sample_gaussian(m, rng);
    CHECK(v == m.mean);
  }
}

TEST_CASE("standard normal sample mean over 1e6 draws") {
  WindSampler s({Vec3::Zero(), Mat3::Identity()}, 11);
  Vec3 sum = Vec3::Zero();
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += s();
  const Vec3 mean = sum / n;
  for (int a = 0; a < 3; ++a) CHECK(std::abs(mean[a]) < 0.01);
}

TEST_CASE("per-axis sample variance matches a diagonal covariance") {
  const Vec3 diag(0.25, 0.09, 0.01);
  WindSampler s({Vec3::Zero(), diag.asDiagonal()}, 5);
  const int n = 1000000;
  Vec3 sum = Vec3::Zero();
  Vec3 sq = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 v = s();
    sum += v;
    sq += v.cwiseAbs2();
  }
  const Vec3 mean = sum / n;
  const Vec3 var = (sq - n * mean.cwiseAbs2()) / (n - 1);
  for (int a = 0; a < 3; ++a) CHECK(std::abs(var[a] / diag[a] - 1.0) < 0.05);
}

TEST_CASE("correlated covariance is reproduced by the factor") {
  Mat3 c;
  c << 1.0, 0.3, 0.1, 0.3, 0.5, 0.05, 0.1, 0.05, 0.2;
  const Mat3 l = turbulence_factor({Vec3::Zero(), c});
  CHECK((l * l.transpose() - c).norm() < 1e-12);
  CHECK(l(0, 1) == 0.0);
  CHECK(l(0, 2) == 0.0);
  CHECK(l(1, 2) == 0.0);
}

TEST_CASE("rank-deficient covariance factors without error") {
  Mat3 c = Mat3::Zero();
  c(0, 0) = 1.0;
  const Mat3 l = turbulence_factor({Vec3::Zero(), c});
  CHECK((l * l.transpose() - c).norm() < 1e-12);
}

TEST_CASE("non-PSD covariance is rejected") {
  Mat3 c = Mat3::Identity();
  c(2, 2) = -0.1;
  WindModel m{Vec3::Zero(), c};
  CHECK_THROWS_AS(validate(m), InvalidModelError);
  Rng rng(1);
  CHECK_THROWS_AS(sample_gaussian(m, rng), InvalidModelError);
  Mat3 asym = Mat3::Identity();
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(validate({Vec3::Zero(), asym}), InvalidModelError);
}

TEST_CASE("identical seeds give identical sequences") {
  WindModel m{Vec3(1, 2, 3), Vec3(0.5, 0.3, 0.05).asDiagonal()};
  WindSampler a(m, 42);
  WindSampler b(m, 42);
  WindSampler c(m, 43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 va = a();
    CHECK(va == b());
    differs = differs || va != c();
  }
  CHECK(differs);
}

TEST_CASE("lookup interpolation modes") {
  const auto t = two_sample();
  CHECK(lookup(t, 0.5, Interpolation::Linear).isApprox(Vec3(2, 0, 0)));
  CHECK(lookup(t, 0.5, Interpolation::ZeroOrderHold) == Vec3(1, 0, 0));
  CHECK(lookup(t, 1.0, Interpolation::Linear) == Vec3(3, 0, 0));
  CHECK(lookup(t, 1.0, Interpolation::ZeroOrderHold) == Vec3(3, 0, 0));
}

TEST_CASE("lookup is exact at knots and refuses to extrapolate") {
  std::vector<double> times;
  std::vector<Vec3> samples;
  for (int i = 0; i < 10; ++i) {
    times.push_back(0.7 * i);
    samples.emplace_back(std::sin(i), std::cos(i), 0.1 * i);
  }
  const WindTrace t(times, samples);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(lookup(t, times[i], Interpolation::Linear) == samples[i]);
    CHECK(lookup(t, times[i], Interpolation::ZeroOrderHold) == samples[i]);
  }
  CHECK_THROWS_AS(lookup(t, -0.01, Interpolation::Linear), OutOfRangeError);
  CHECK_THROWS_AS(lookup(t, 6.31, Interpolation::ZeroOrderHold), OutOfRangeError);
}

TEST_CASE("trace invariants") {
  CHECK_THROWS_AS(WindTrace({0.0}, {Vec3::Zero()}), InvalidModelError);
  CHECK_THROWS_AS(WindTrace({0.0, 1.0}, {Vec3::Zero()}), InvalidModelError);
  CHECK_THROWS_AS(WindTrace({0.0, 0.0}, {Vec3::Zero(), Vec3::Zero()}), InvalidModelError);
  CHECK_THROWS_AS(WindTrace({1.0, 0.0}, {Vec3::Zero(), Vec3::Zero()}), InvalidModelError);
}

TEST_CASE("estimate_stats hand computations") {
  const auto two = estimate_stats(two_sample());
  CHECK(two.mean.isApprox(Vec3(2, 0, 0)));
  Mat3 expected = Mat3::Zero();
  expected(0, 0) = 2.0;
  CHECK((two.covariance - expected).norm() < 1e-14);

  std::vector<double> times;
  for (int i = 0; i < 10; ++i) times.push_back(i);
  const auto flat = estimate_stats(WindTrace(times, std::vector<Vec3>(10, Vec3(5, 0, 0))));
  CHECK(flat.mean == Vec3(5, 0, 0));
  CHECK(flat.covariance.norm() == 0.0);
}

TEST_CASE("round trip: statistics of synthesized samples") {
  WindModel m{Vec3(2.72, 1.752, -0.006), Mat3::Identity()};
  WindSampler s(m, 99);
  const int n = 100000;
  std::vector<double> times(n);
  std::vector<Vec3> samples(n);
  for (int i = 0; i < n; ++i) {
    times[i] = i;
    samples[i] = s();
  }
  const auto est = estimate_stats(WindTrace(times, samples));
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(est.mean[a] - m.mean[a]) < 3.0 / std::sqrt(double(n)));
    CHECK(std::abs(est.covariance(a, a) - 1.0) < 0.05);
  }
  CHECK((est.covariance - est.covariance.transpose()).norm() == 0.0);
}

TEST_CASE("trace CSV round trip") {
  const WindTrace t({0.0, 0.5, 1.25}, {Vec3(1, 2, 3), Vec3(0.1, -0.2, 1e-9), Vec3(4, 5, 6)});
  std::stringstream buf;
  write_trace_csv(buf, t);
  CHECK(buf.str().rfind("t,wx,wy,wz\n", 0) == 0);
  const WindTrace back = parse_trace_csv(buf);
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.times()[i] == t.times()[i]);
    CHECK(back.samples()[i] == t.samples()[i]);
  }
}

TEST_CASE("trace CSV errors name the line") {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_trace_csv(in);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("time,wx,wy,wz\n0,1,2,3\n1,1,2,3\n").find("header") != std::string::npos);
  CHECK(message("t,wx,wy,wz\n0,1,2,3\n1,1,x,3\n").find("line 3") != std::string::npos);
  CHECK(message("t,wx,wy,wz\n0,1,2,3\n1,1,2\n").find("line 3") != std::string::npos);
  CHECK(message("t,wx,wy,wz\n0,1,2,3\n2,1,2,3\n1,0,0,0\n").find("line 4") != std::string::npos);
  CHECK_THROWS_AS(read_trace_csv("/nonexistent/trace.csv"), IoError);
}

TEST_CASE("source statistics") {
  WindModel m{Vec3(1, 0, 0), Mat3::Identity() * 0.2};
  CHECK(statistics(WindSource{GaussianSource{m}}).covariance == m.covariance);
  auto trace = std::make_shared<const WindTrace>(two_sample());
  const auto est = statistics(WindSource{ReplaySource{trace}});
  CHECK(est.mean.isApprox(Vec3(2, 0, 0)));
}

TEST_CASE("interpolation names") {
  CHECK(interpolation_from_string("zoh") == Interpolation::ZeroOrderHold);
  CHECK(interpolation_from_string("linear") == Interpolation::Linear);
  CHECK(interpolation_from_string(to_string(Interpolation::Linear)) == Interpolation::Linear);
  CHECK_THROWS_AS(interpolation_from_string("cubic"), ConfigError);
}
