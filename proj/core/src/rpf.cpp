#include "seqlim/rpf.hpp"

#include <cmath>
#include <sstream>

#include "seqlim/csv.hpp"
#include "seqlim/stats.hpp"

namespace seqlim {

const FieldFunction& RpfTriplet::h_at(int j) const {
  if (j < j0 || j > j1) throw DomainError("RpfTriplet: time outside window");
  return densities[j - j0];
}

std::string RpfTriplet::to_csv() const {
  std::ostringstream ss;
  ss << "j,re_lambda,im_lambda,min_h,max_h,residual\n";
  for (int j = j0; j <= j1; ++j) {
    const FieldFunction& h = h_at(j);
    double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
    for (int i = 0; i < h.size(); ++i) {
      mn = std::min(mn, h[i].real());
      mx = std::max(mx, h[i].real());
    }
    Complex lam = (j < j1) ? lambdas[j - j0] : Complex(0, 0);
    ss << j << ',' << CsvWriter::num(lam.real()) << ',' << CsvWriter::num(lam.imag())
       << ',' << CsvWriter::num(mn) << ',' << CsvWriter::num(mx) << ','
       << CsvWriter::num(residual) << '\n';
  }
  return ss.str();
}

RpfTriplet forward_density(System& sys, int j0, int j1, int burn_in) {
  if (j1 < j0) throw DomainError("forward_density: empty window");
  if (burn_in <= 0) burn_in = sys.default_burn_in();
  RpfTriplet trip;
  trip.j0 = j0;
  trip.j1 = j1;
  trip.burn_in = burn_in;

  // Each h_j is an independent burn-in of the constant function over K
  // steps; schedules without negative extension clamp the start at zero.
  auto burned = [&](int j) {
    int start = j - burn_in;
    if (!sys.seq().extendable() && start < 0) start = 0;
    FieldFunction v = sys.one(start);
    double m0 = sys.ref_mean(start, v);
    v *= Complex(1.0 / m0, 0.0);
    for (int t = start; t < j; ++t) {
      v = sys.op(t).apply(v);
      double m = sys.ref_mean(t + 1, v);
      if (!(m > 0)) throw NumericError("forward_density: burn-in degenerated");
      v *= Complex(1.0 / m, 0.0);
    }
    return v;
  };
  for (int j = j0; j <= j1; ++j) trip.densities.push_back(burned(j));

  double min_density = std::numeric_limits<double>::infinity();
  for (const FieldFunction& h : trip.densities)
    for (int i = 0; i < h.size(); ++i) min_density = std::min(min_density, h[i].real());
  trip.min_density = min_density;
  if (min_density < 1e-12)
    throw NumericError(
        "forward_density: density minimum below tolerance (covering failure)");

  double resid = 0.0;
  for (int j = j0; j < j1; ++j) {
    FieldFunction img = sys.op(j).apply(trip.densities[j - j0]);
    double lam = sys.ref_mean(j + 1, img);
    if (!(lam > 0)) throw NumericError("forward_density: degenerate normalization");
    trip.lambdas.push_back(lam);
    img *= Complex(1.0 / lam, 0.0);
    FieldFunction diff = img;
    diff -= trip.densities[j + 1 - j0];
    resid = std::max(resid, bv(diff));
  }
  trip.residual = resid;
  return trip;
}

std::vector<double> decay_profile(System& sys, const RpfTriplet& trip,
                                  const FieldFunction& g, int n_max) {
  if (n_max < 2) throw DomainError("decay_profile: n_max >= 2");
  std::vector<double> out;
  out.reserve(n_max);
  Complex mg = sys.ref_mean_c(0, g);
  FieldFunction v = g;
  for (int n = 1; n <= n_max; ++n) {
    v = sys.op(n - 1).apply(v);
    FieldFunction diff = v;
    const FieldFunction& h = trip.h_at(n);
    for (int i = 0; i < diff.size(); ++i) diff[i] -= mg * h[i];
    out.push_back(bv(diff));
  }
  return out;
}

DecayFit fit_decay(std::span<const double> norms, int transient, double floor) {
  std::vector<double> tail;
  for (size_t i = static_cast<size_t>(std::max(transient - 1, 0)); i < norms.size(); ++i)
    tail.push_back(norms[i]);
  return fit_geometric(tail, transient, floor);
}

std::vector<double> uniqueness_gap(System& sys, const RpfTriplet& trip,
                                   const FieldFunction& g0, int n_max) {
  double m = sys.ref_mean(0, g0);
  if (std::abs(m - 1.0) > 1e-8)
    throw DomainError("uniqueness_gap: g0 must be a probability density");
  std::vector<double> out;
  FieldFunction v = g0;
  for (int n = 1; n <= n_max; ++n) {
    v = sys.op(n - 1).apply(v);
    FieldFunction diff = v;
    diff -= trip.h_at(n);
    out.push_back(bv(diff));
  }
  return out;
}

System change_reference(System& sys, const RpfTriplet& trip) {
  if (trip.residual > 1e-6)
    throw NumericError("change_reference: triplet residual above tolerance");
  if (trip.min_density < 1e-12) throw NumericError("change_reference: singular density");
  std::map<int, FieldFunction> w;
  for (int j = trip.j0; j <= trip.j1; ++j) w.emplace(j, trip.h_at(j));
  System derived(sys.seq(), sys.options());
  derived.set_reference_weights(std::move(w));
  return derived;
}

ContractionReport contraction_diagnostic(System& sys, double a, int M, int sample_pairs,
                                         CounterRng& rng, int grid_override) {
  if (M < 1) throw DomainError("contraction_diagnostic: M >= 1");
  ContractionReport rep;

  // Work at a reduced grid so the M-step kernel columns stay cheap to scan.
  System* work = &sys;
  std::optional<System> small;
  if (!sys.is_sft() && sys.grid() > grid_override) {
    SystemOptions o = sys.options();
    o.grid = grid_override;
    small.emplace(sys.seq(), o);
    work = &*small;
  }

  Eigen::MatrixXcd prod = work->op(0).to_matrix();
  for (int k = 1; k < M; ++k) prod = work->op(k).to_matrix() * prod;

  // Projective diameter of the image of the positive cone: attained on
  // extreme rays, i.e. on kernel columns. Columns with zero entries make the
  // diameter infinite and the contraction bound vacuous (factor 1); that
  // happens when M is below the kernel fill-in time.
  int d = static_cast<int>(prod.cols());
  double diam = 0.0;
  bool finite = true;
  for (int i = 0; i < d && finite; ++i) {
    for (int j = i + 1; j < d; ++j) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (int r = 0; r < prod.rows(); ++r) {
        double fi = prod(r, i).real(), fj = prod(r, j).real();
        if (fi <= 0 || fj <= 0) {
          finite = false;
          break;
        }
        double q = fi / fj;
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
      if (!finite) break;
      diam = std::max(diam, std::log(hi / lo));
    }
  }
  rep.diameter_finite = finite;
  rep.birkhoff_bound = finite ? std::tanh(diam / 4.0) : 1.0;

  double worst = 0.0, r_hat = 0.0;
  int used = 0;
  for (int s = 0; s < sample_pairs; ++s) {
    // Cone members: positive with variation/mean <= a.
    auto make_member = [&](int salt) {
      FieldFunction g = work->zero(0);
      CounterRng local = CounterRng::substream(rng.next_u64(), "cone_pair",
                                               static_cast<uint64_t>(salt));
      for (int i = 0; i < g.size(); ++i) g[i] = local.uniform(0.2, 1.0);
      double var = variation(g);
      double m = work->ref_mean(0, g);
      if (var > a * m) {
        double c = var / a - m + 1e-9;
        for (int i = 0; i < g.size(); ++i) g[i] += c;
      }
      return g;
    };
    FieldFunction f = make_member(2 * s);
    FieldFunction g = make_member(2 * s + 1);
    double d0 = hilbert_metric(f, g);
    if (d0 < 1e-9) continue;
    Eigen::VectorXcd fv = prod * f.values();
    Eigen::VectorXcd gv = prod * g.values();
    FieldFunction Ff = work->zero(M), Gg = work->zero(M);
    Ff.values() = fv;
    Gg.values() = gv;
    double d1 = hilbert_metric(Ff, Gg);
    r_hat = std::max(r_hat, d1);
    worst = std::max(worst, d1 / d0);
    ++used;
  }
  rep.r_hat = std::max(r_hat, finite ? diam : r_hat);
  rep.per_m_contraction = worst;
  rep.pairs_used = used;
  rep.pass = worst <= rep.birkhoff_bound + 1e-9;
  return rep;
}

double equivariance_residual(System& sys, const RpfTriplet& trip, int j_count,
                             int test_count, CounterRng& rng) {
  double worst = 0.0;
  for (int t = 0; t < test_count; ++t) {
    TrigObservable phi;
    int modes = 1 + static_cast<int>(rng.uniform_int(3));
    phi.cos_coeff.resize(modes);
    phi.sin_coeff.resize(modes);
    phi.a0 = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < modes; ++k) {
      phi.cos_coeff[k] = rng.uniform(-1.0, 1.0);
      phi.sin_coeff[k] = rng.uniform(-1.0, 1.0);
    }
    for (int j = trip.j0; j < std::min(trip.j0 + j_count, trip.j1); ++j) {
      if (sys.is_sft()) {
        // mu_j(phi o T_j) with phi a symbol function: exact chain sums.
        throw DomainError("equivariance_residual: trig tests are for interval systems");
      }
      double lhs = integrate_pullback(sys, j, phi, trip.h_at(j).real_part());
      double rhs = integrate_against(phi, trip.h_at(j + 1).real_part());
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

}  // namespace seqlim
