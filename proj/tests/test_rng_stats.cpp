#include <doctest.h>

#include <cmath>

#include "seqlim/common.hpp"
#include "seqlim/rng.hpp"
#include "seqlim/stats.hpp"

using namespace seqlim;

TEST_CASE("counter rng is a pure function of (root, name, shard, counter)") {
  CounterRng a = CounterRng::substream(42, "stream", 3);
  CounterRng b = CounterRng::substream(42, "stream", 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CounterRng c = CounterRng::substream(42, "stream", 4);
  CHECK(c.next_u64() != CounterRng::substream(42, "stream", 3).next_u64());
  CHECK(CounterRng::substream(42, "other").next_u64() !=
        CounterRng::substream(42, "stream").next_u64());
}

TEST_CASE("uniform moments and normal moments") {
  CounterRng rng = CounterRng::substream(7, "moments");
  const int N = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < N; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
  }
  CHECK(std::abs(s / N - 0.5) < 0.005);
  CHECK(std::abs(s2 / N - 1.0 / 3.0) < 0.005);
  double g = 0, g2 = 0, g4 = 0;
  for (int i = 0; i < N; ++i) {
    double z = rng.normal();
    g += z;
    g2 += z * z;
    g4 += z * z * z * z;
  }
  CHECK(std::abs(g / N) < 0.01);
  CHECK(std::abs(g2 / N - 1.0) < 0.02);
  CHECK(std::abs(g4 / N - 3.0) < 0.15);
}

TEST_CASE("normal cdf against a high-precision reference table") {
  // Reference values computed with 30-digit arithmetic.
  const double table[][2] = {
      {-8, 6.2209605742717841235e-16},  {-6, 9.865876450376981407e-10},
      {-4, 0.000031671241833119921254}, {-2.5, 0.006209665325776135167},
      {-1, 0.15865525393145705141},     {-0.5, 0.30853753872598689636},
      {0, 0.5},                         {0.3, 0.61791142218895263307},
      {1, 0.84134474606854294859},      {1.5, 0.933192798731141934},
      {2, 0.9772498680518207928},       {3.5, 0.99976737092096447496},
      {5, 0.99999971334842812081},      {7, 0.99999999999872018746},
      {8, 0.9999999999999993779},
  };
  for (const auto& row : table) {
    CHECK(std::abs(normal_cdf(row[0]) - row[1]) < 1e-14);
  }
}

TEST_CASE("normal quantile inverts the cdf to 1e-12") {
  for (double p : {1e-9, 1e-4, 0.01, 0.2, 0.5, 0.7, 0.95, 0.9999, 1 - 1e-9}) {
    double t = normal_quantile(p);
    CHECK(std::abs(normal_cdf(t) - p) < 1e-12 * std::max(1.0, std::abs(t)));
  }
  // Round trips in t are limited by the double resolution of p near 1;
  // inside |t| <= 5 both directions are sharp.
  for (double t : {-5.0, -1.3, 0.0, 0.4, 2.2, 5.0}) {
    CHECK(std::abs(normal_quantile(normal_cdf(t)) - t) < 1e-10);
  }
}

TEST_CASE("cdf shift bound |Phi(x+e) - Phi(x)| <= e/sqrt(2 pi)") {
  const double bound = 1.0 / std::sqrt(2 * kPi);
  for (double x = -6; x <= 6; x += 0.05) {
    for (double eps : {1e-3, 0.05, 0.3}) {
      CHECK(normal_cdf(x + eps) - normal_cdf(x) <= eps * bound + 1e-15);
    }
  }
}

TEST_CASE("rate_fit recovers synthetic power laws") {
  std::vector<double> sigma, d1, d2;
  for (double s = 2; s < 300; s *= 1.7) {
    sigma.push_back(s);
    d1.push_back(3.0 / s);
    d2.push_back(1.0 / (s * s));
  }
  RateFit f1 = rate_fit(sigma, d1);
  CHECK(f1.slope == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(f1.ci_lo <= -1.0 + 1e-6);
  CHECK(f1.ci_hi >= -1.0 - 1e-6);
  RateFit f2 = rate_fit(sigma, d2);
  CHECK(f2.slope == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("geometric fit") {
  std::vector<double> v;
  for (int n = 0; n < 30; ++n) v.push_back(7.0 * std::pow(0.6, n));
  DecayFit fit = fit_geometric(v, 0);
  CHECK(fit.rate == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(fit.prefactor == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(fit.r2 > 0.999999);
}
