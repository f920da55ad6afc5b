#include <doctest.h>

#include <cmath>

#include "seqlim/field.hpp"
#include "seqlim/rng.hpp"

using namespace seqlim;

namespace {

FieldFunction grid_of(int G, double (*f)(double)) {
  return FieldFunction::grid_sample(G, f, 0);
}

FieldFunction random_grid(CounterRng& rng, int G) {
  FieldFunction g = FieldFunction::grid_zero(G);
  for (int i = 0; i < G; ++i) g[i] = rng.uniform(-2.0, 2.0);
  return g;
}

}  // namespace

TEST_CASE("variation of basic grid functions") {
  CHECK(variation(FieldFunction::grid_constant(512, 1.0)) == 0.0);
  CHECK(variation(grid_of(1024, [](double x) { return x; })) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(variation(grid_of(4096, [](double x) { return std::cos(kTwoPi * x); })) ==
        doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("bv norm report") {
  NormReport r = bv_norm(grid_of(4097, [](double x) { return x; }));
  CHECK(r.l1 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.variation == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.sup == doctest::Approx(1.0));
  CHECK(r.bv == r.l1 + r.variation);

  NormReport ones = bv_norm(FieldFunction::grid_constant(64, 1.0));
  CHECK(ones.l1 == doctest::Approx(1.0));
  CHECK(ones.variation == 0.0);
  CHECK(ones.bv == doctest::Approx(1.0));

  NormReport zeros = bv_norm(FieldFunction::grid_zero(64));
  CHECK(zeros.l1 == 0.0);
  CHECK(zeros.variation == 0.0);
  CHECK(zeros.sup == 0.0);
  CHECK(zeros.bv == 0.0);
}

TEST_CASE("cone membership") {
  ConeReport c1 = cone_check(FieldFunction::grid_constant(256, 1.0), 0.5);
  CHECK(c1.member);
  CHECK(c1.ratio == 0.0);

  FieldFunction id = grid_of(1024, [](double x) { return x; });
  ConeReport c2 = cone_check(id, 1.0);
  CHECK_FALSE(c2.member);
  CHECK(c2.ratio == doctest::Approx(2.0).epsilon(1e-9));
  ConeReport c3 = cone_check(id, 3.0);
  CHECK(c3.member);
  CHECK(c3.ratio == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("hilbert metric examples and projective properties") {
  auto vec = [](std::vector<double> v) {
    FieldFunction f = FieldFunction::grid_zero(static_cast<int>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) f[static_cast<int>(i)] = v[i];
    return f;
  };
  CHECK(hilbert_metric(vec({1, 1}), vec({2, 2})) == doctest::Approx(0.0));
  CHECK(hilbert_metric(vec({1, 2}), vec({2, 1})) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(hilbert_metric(vec({1, 1, 1}), vec({1, 2, 4})) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(hilbert_metric(vec({1, -1}), vec({1, 1})), DomainError);

  CounterRng rng = CounterRng::substream(5, "hilbert");
  for (int it = 0; it < 50; ++it) {
    FieldFunction f = FieldFunction::grid_zero(32), g = FieldFunction::grid_zero(32),
                  h = FieldFunction::grid_zero(32);
    for (int i = 0; i < 32; ++i) {
      f[i] = rng.uniform(0.1, 3.0);
      g[i] = rng.uniform(0.1, 3.0);
      h[i] = rng.uniform(0.1, 3.0);
    }
    double dfg = hilbert_metric(f, g), dgf = hilbert_metric(g, f);
    CHECK(dfg == doctest::Approx(dgf).epsilon(1e-12));
    CHECK(dfg <= hilbert_metric(f, h) + hilbert_metric(h, g) + 1e-12);
    FieldFunction cf = f;
    cf *= Complex(3.7, 0.0);
    CHECK(hilbert_metric(cf, g) == doctest::Approx(dfg).epsilon(1e-12));
  }
}

TEST_CASE("split_bv produces two cone members that reassemble") {
  SplitBv z = split_bv(FieldFunction::grid_zero(128), 1.0);
  CHECK(sup_norm(z.positive) == 0.0);
  CHECK(sup_norm(z.shift) == 0.0);

  SplitBv ones = split_bv(FieldFunction::grid_constant(128, 1.0), 2.0);
  CHECK(cone_check(ones.positive, 2.0).member);
  CHECK(cone_check(ones.shift, 2.0).member);

  FieldFunction g = FieldFunction::grid_sample(1024, [](double x) { return x - 0.5; });
  SplitBv s = split_bv(g, 2.0);
  CHECK(cone_check(s.positive, 2.0).member);
  CHECK(cone_check(s.shift, 2.0).member);
  FieldFunction back = s.positive;
  back -= s.shift;
  back -= g;
  CHECK(sup_norm(back) < 1e-12);
}

TEST_CASE("variation axioms on random grids") {
  CounterRng rng = CounterRng::substream(11, "axioms");
  for (int it = 0; it < 40; ++it) {
    FieldFunction g = random_grid(rng, 128), h = random_grid(rng, 128);
    double t = rng.uniform(-3.0, 3.0);
    // homogeneity and subadditivity
    FieldFunction tg = g;
    tg *= Complex(t, 0.0);
    CHECK(variation(tg) == doctest::Approx(std::abs(t) * variation(g)).epsilon(1e-10));
    FieldFunction sum = g;
    sum += h;
    CHECK(variation(sum) <= variation(g) + variation(h) + 1e-10);
    // sup <= l1 + variation (C_var = 1 on the grid)
    NormReport r = bv_norm(g);
    CHECK(r.sup <= r.l1 + r.variation + 1e-10);
    // product rule with C = 1
    CHECK(variation(g.pointwise(h)) <=
          sup_norm(g) * variation(h) + sup_norm(h) * variation(g) + 1e-10);
  }
  // reciprocal bound for positive h bounded below by c
  for (int it = 0; it < 20; ++it) {
    FieldFunction h = FieldFunction::grid_zero(128);
    double c = 0.3;
    for (int i = 0; i < 128; ++i) h[i] = c + rng.uniform(0.0, 2.0);
    FieldFunction inv = h.map([](Complex v) { return 1.0 / v; });
    CHECK(variation(inv) <= variation(h) / (c * c) + 1e-10);
  }
}

TEST_CASE("word basis variation is the Hoelder surrogate") {
  auto wb = std::make_shared<WordBasis>();
  wb->depth = 2;
  wb->words = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  wb->weights = Eigen::VectorXd::Constant(4, 0.25);
  wb->holder_alpha = 1.0;
  FieldFunction f = FieldFunction::word_zero(wb);
  f[0] = 1.0;   // 00
  f[1] = 0.25;  // 01: same prefix length 1 -> weight 2
  f[2] = 0.0;   // 10
  f[3] = 0.0;
  // pairs: (00,01): |0.75| * 2^1 = 1.5 ; (00,10): 1 * 2^0 = 1
  CHECK(variation(f) == doctest::Approx(1.5));
  CHECK(variation(FieldFunction::word_constant(wb, 3.0)) == 0.0);
  CHECK(mean(f).real() == doctest::Approx(0.3125));
}
