#include "seqlim/cumulant.hpp"

#include <cmath>

#include "seqlim/martingale.hpp"

namespace seqlim {

Complex TwistedTriplet::lambda_at(int j) const {
  if (j < j0 || j >= j1) throw DomainError("TwistedTriplet: step outside window");
  return lambda[j - j0];
}
const FieldFunction& TwistedTriplet::h_at(int j) const {
  if (j < j0 || j > j1) throw DomainError("TwistedTriplet: time outside window");
  return h[j - j0];
}
const Eigen::VectorXcd& TwistedTriplet::nu_at(int j) const {
  if (j < j0 || j > j1) throw DomainError("TwistedTriplet: time outside window");
  return nu[j - j0];
}

TwistedTriplet twisted_triplet(System& sys, Complex z, int j0, int j1, int burn_in,
                               double tol) {
  if (j1 < j0) throw DomainError("twisted_triplet: empty window");
  if (burn_in <= 0) burn_in = sys.default_burn_in();
  TwistedTriplet trip;
  trip.z = z;
  trip.j0 = j0;
  trip.j1 = j1;

  // Untwisted dual coefficient vectors: the reference functionals.
  auto ref_nu = [&](int j) -> Eigen::VectorXcd {
    Eigen::VectorXd w = sys.ref_weights_vec(j);
    Eigen::VectorXcd out(w.size());
    for (int i = 0; i < w.size(); ++i) out[i] = w[i];
    return out;
  };

  // The eigenfunctions come from forward burn-in; convergence is certified
  // by running a second stream with a longer burn-in and measuring the gap
  // (the in-stream eigen-residual is zero by construction, so start
  // independence is the meaningful signal). Outside the perturbative radius
  // the streams never merge and the construction is rejected.
  const int extra = 6;
  double resid = 0.0;

  auto forward_stream = [&](int burn) {
    int start = j0 - burn;
    if (!sys.seq().extendable() && start < 0) start = 0;
    std::vector<FieldFunction> out;
    FieldFunction v = sys.one(start);
    Complex m = sys.ref_mean_c(start, v);
    v *= 1.0 / m;
    for (int t = start; t <= j1; ++t) {
      if (t >= j0) out.push_back(v);
      if (t == j1) break;
      v = sys.twisted(t, z).apply(v);
      v.set_time(t + 1);
      Complex nv = sys.ref_mean_c(t + 1, v);
      if (std::abs(nv) < 1e-13)
        throw NumericError("twisted_triplet: degenerate normalization (out of radius)");
      v *= 1.0 / nv;
    }
    return out;
  };
  std::vector<FieldFunction> hs = forward_stream(burn_in);
  {
    std::vector<FieldFunction> hs2 = forward_stream(burn_in + extra);
    for (int j = j0; j <= j1; ++j) {
      FieldFunction diff = hs[j - j0];
      diff -= hs2[j - j0];
      resid = std::max(resid, bv(diff));
    }
  }

  auto backward_stream = [&](int burn) {
    int stop = j1 + burn;
    if (auto len = sys.seq().schedule_length()) stop = std::min(stop, *len - 1);
    std::vector<Eigen::VectorXcd> out(j1 - j0 + 1);
    Eigen::VectorXcd w = ref_nu(stop);
    for (int t = stop; t > j0; --t) {
      if (t <= j1) out[t - j0] = w;
      Eigen::VectorXcd v = sys.twisted(t - 1, z).adjoint_apply(w);
      Complex s = 0.0;
      for (int i = 0; i < v.size(); ++i) s += v[i];
      if (std::abs(s) < 1e-13)
        throw NumericError("twisted_triplet: dual normalization degenerated");
      w = v / s;
    }
    out[0] = w;
    if (j1 == stop) out[j1 - j0] = ref_nu(j1);
    return out;
  };
  std::vector<Eigen::VectorXcd> nus = backward_stream(burn_in);
  {
    std::vector<Eigen::VectorXcd> nus2 = backward_stream(burn_in + extra);
    for (int j = j0; j <= j1; ++j)
      resid = std::max(resid, (nus[j - j0] - nus2[j - j0]).cwiseAbs().maxCoeff());
  }

  // Rescale: nu_j^(z)(h_j^(z)) = 1.
  for (int j = j0; j <= j1; ++j) {
    FieldFunction& hj = hs[j - j0];
    Complex c = 0.0;
    for (int i = 0; i < hj.size(); ++i) c += nus[j - j0][i] * hj[i];
    if (std::abs(c) < 1e-13)
      throw NumericError("twisted_triplet: nu(h) degenerate (out of radius)");
    hj *= 1.0 / c;
  }

  trip.min_abs_lambda = std::numeric_limits<double>::infinity();
  for (int j = j0; j < j1; ++j) {
    FieldFunction img = sys.twisted(j, z).apply(hs[j - j0]);
    Complex lam = 0.0;
    for (int i = 0; i < img.size(); ++i) lam += nus[j + 1 - j0][i] * img[i];
    if (std::abs(lam) < 1e-13)
      throw NumericError("twisted_triplet: vanishing eigenvalue (out of radius)");
    trip.lambda.push_back(lam);
    trip.min_abs_lambda = std::min(trip.min_abs_lambda, std::abs(lam));
  }
  trip.residual = resid;
  trip.h = std::move(hs);
  trip.nu = std::move(nus);
  if (resid > tol)
    throw NumericError("twisted_triplet: residual " + std::to_string(resid) +
                       " above tolerance (z outside the perturbative regime)");
  return trip;
}

double twist_radius(System& sys) {
  if (sys.cached_twist_radius()) return *sys.cached_twist_radius();
  double best = 0.0;
  const int window = 12;
  for (double r = 1e-3; r <= 1.01; r *= 1.4142135623730951) {
    bool ok = true;
    for (Complex dir : {Complex(1, 0), Complex(0, 1)}) {
      try {
        TwistedTriplet t = twisted_triplet(sys, r * dir, 0, window, 0, 1e-8);
        if (t.min_abs_lambda < 0.1) ok = false;
      } catch (const NumericError&) {
        ok = false;
      }
      if (!ok) break;
    }
    if (!ok) break;
    best = r;
  }
  if (best <= 0.0)
    throw NumericError("twist_radius: no admissible radius found");
  sys.cached_twist_radius() = best;
  return best;
}

Complex PiTable::window(int j, int n) const {
  if (j < j0 || j + n > j1) throw DomainError("PiTable: window not covered");
  Complex s = 0.0;
  for (int k = j; k < j + n; ++k) s += log_lambda[k - j0];
  return s;
}

PiTable build_pi_table(System& sys, Complex z, int j0, int j1, int path_steps) {
  PiTable table;
  table.z = z;
  table.j0 = j0;
  table.j1 = j1;
  int n = j1 - j0;
  table.log_lambda.assign(n, 0.0);
  if (n == 0 || z == 0.0) return table;
  // Track log lambda_k continuously along s*z, s in (0, 1]; the argument
  // increment per path step must stay below pi/2, else the path is refined.
  int steps = std::max(1, path_steps);
  for (int attempt = 0; attempt < 3; ++attempt) {
    bool ok = true;
    std::vector<Complex> logs(n, 0.0), prev(n, 1.0);
    for (int s = 1; s <= steps && ok; ++s) {
      Complex zs = z * (static_cast<double>(s) / steps);
      TwistedTriplet t = twisted_triplet(sys, zs, j0, j1);
      for (int k = 0; k < n; ++k) {
        Complex ratio = t.lambda[k] / prev[k];
        double dphi = std::arg(ratio);
        if (std::abs(dphi) > kPi / 2) {
          ok = false;
          break;
        }
        logs[k] += std::log(std::abs(ratio)) + Complex(0, dphi);
        prev[k] = t.lambda[k];
      }
    }
    if (ok) {
      table.log_lambda = std::move(logs);
      return table;
    }
    steps *= 4;
  }
  throw NumericError("pi_window: branch tracking failed (argument jumps too large)");
}

Complex pi_window(System& sys, int j, int n, Complex z, int path_steps) {
  if (n < 0) throw DomainError("pi_window: n >= 0");
  if (n == 0 || z == 0.0) return 0.0;
  return build_pi_table(sys, z, j, j + n, path_steps).window(j, n);
}

Complex window_cgf(System& sys, int j, int n, Complex z) {
  if (n == 0) return 0.0;
  // Accumulate per-step logs of the running mean: keeps the analytic branch
  // (per-step arguments stay small inside the perturbative regime) and never
  // underflows for large windows.
  FieldFunction v = sys.one(j);
  Complex total = 0.0;
  for (int t = j; t < j + n; ++t) {
    v = sys.pulled_twisted(t, z).apply(v);
    Complex s = sys.tilde_mean_c(t + 1, v);
    if (std::abs(s) < 1e-280)
      throw NumericError("window_cgf: expectation underflow at this z");
    total += std::log(s);
    v *= 1.0 / s;
  }
  return total;
}

LllReport lll_gap(System& sys, Complex z, int j_max, int n_max, int j_step, int n_step) {
  LllReport rep;
  PiTable table = build_pi_table(sys, z, 0, j_max + n_max);
  for (int n = n_step; n <= n_max; n += n_step) {
    double worst = 0.0;
    for (int j = 0; j <= j_max; j += std::max(1, j_step)) {
      Complex lhs = window_cgf(sys, j, n, z);
      Complex rhs = table.window(j, n);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    rep.n_grid.push_back(n);
    rep.gap_by_n.push_back(worst);
    rep.max_gap = std::max(rep.max_gap, worst);
  }
  std::vector<double> xs(rep.n_grid.begin(), rep.n_grid.end());
  rep.slope_vs_n = least_squares(xs, rep.gap_by_n).slope;
  return rep;
}

Complex derivative(const std::function<Complex(Complex)>& fn, Complex z0, int k,
                   DerivScheme scheme, double step, int nodes) {
  if (k < 0) throw DomainError("derivative: order >= 0");
  if (k == 0) return fn(z0);
  if (scheme == DerivScheme::Cauchy) {
    // f^(k)(z0) = k!/(Q r^k) sum f(z0 + r e^{i a_q}) e^{-i k a_q}
    Complex acc = 0.0;
    for (int q = 0; q < nodes; ++q) {
      double a = kTwoPi * q / nodes;
      Complex w = std::polar(step, a);
      acc += fn(z0 + w) * std::polar(1.0, -k * a);
    }
    double kfact = 1.0;
    for (int i = 2; i <= k; ++i) kfact *= i;
    return acc * kfact / (static_cast<double>(nodes) * std::pow(step, k));
  }
  // Central differences up to fourth order.
  auto f = [&](double m) { return fn(z0 + m * step); };
  switch (k) {
    case 1:
      return (f(1) - f(-1)) / (2 * step);
    case 2:
      return (f(1) - 2.0 * f(0) + f(-1)) / (step * step);
    case 3:
      return (f(2) - 2.0 * f(1) + 2.0 * f(-1) - f(-2)) / (2 * std::pow(step, 3));
    case 4:
      return (f(2) - 4.0 * f(1) + 6.0 * f(0) - 4.0 * f(-1) + f(-2)) / std::pow(step, 4);
    default:
      throw DomainError("central differences implemented for k <= 4");
  }
}

GrowthReport growth_check(System& sys, std::span<const int> n_list, int k, double delta) {
  if (k < 3) throw DomainError("growth_check: k >= 3");
  GrowthReport rep;
  double r0 = twist_radius(sys);
  double radius = r0 / 4.0;
  std::vector<double> lx, ly;
  {
    int n_hi = 0;
    for (int n : n_list) n_hi = std::max(n_hi, n);
    double v_full = exact_variance(sys, 0, n_hi);
    double v_half = exact_variance(sys, 0, std::max(1, n_hi / 2));
    if (!(v_full > 1e-6) || v_full < 1.3 * v_half)
      throw DomainError(
          "growth_check: variance does not diverge (sigma_n bounded)");
  }
  for (int n : n_list) {
    double var = exact_variance(sys, 0, n);
    double sigma = std::sqrt(var);
    // t in the unnormalized variable: Lambda_n(t) = CGF at i t / sigma.
    auto cgf = [&](Complex z) { return window_cgf(sys, 0, n, z); };
    auto deriv_at = [&](double u) {
      // u = t / sigma in [-delta, delta]
      Complex z0(0.0, u);
      Complex d = derivative(cgf, z0, k, DerivScheme::Cauchy, radius, 64);
      // d^k/dt^k of Lambda_n(t) = (i/sigma)^k * CGF^(k)(i t / sigma)
      return std::abs(d) / std::pow(sigma, k);
    };
    const int pts = 33;
    double worst = 0.0, worst_u = 0.0;
    for (int q = 0; q < pts; ++q) {
      double u = delta * (2.0 * q / (pts - 1) - 1.0);
      double v = deriv_at(u);
      if (v > worst) {
        worst = v;
        worst_u = u;
      }
    }
    // refine x4 around the worst cell
    double cell = 2.0 * delta / (pts - 1);
    for (int q = 1; q <= 4; ++q) {
      double u = worst_u + cell * (q - 2.5) / 4.0;
      if (std::abs(u) <= delta) worst = std::max(worst, deriv_at(u));
    }
    GrowthPoint pt;
    pt.n = n;
    pt.sigma = sigma;
    pt.value = std::pow(sigma, k - 2) * worst;
    rep.points.push_back(pt);
    lx.push_back(std::log(sigma));
    ly.push_back(std::log(std::max(pt.value, 1e-300)));
  }
  rep.plateau_slope = least_squares(lx, ly).slope;
  return rep;
}

TwistedDecay twisted_decay(System& sys, Complex z, int n_max, int j0) {
  TwistedTriplet trip = twisted_triplet(sys, z, j0, j0 + n_max);
  TwistedDecay out;
  CounterRng rng = CounterRng::substream(23, "twisted_decay");
  FieldFunction g = sys.is_sft()
                        ? FieldFunction::word_zero(sys.word_basis(j0, 1), j0)
                        : sys.zero(j0);
  for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
  Complex nug = 0.0;
  for (int i = 0; i < g.size(); ++i) nug += trip.nu_at(j0)[i] * g[i];
  FieldFunction v = g;
  Complex lam_prod = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    v = sys.twisted(j0 + n - 1, z).apply(v);
    lam_prod *= trip.lambda_at(j0 + n - 1);
    FieldFunction diff = v;
    const FieldFunction& hn = trip.h_at(j0 + n);
    for (int i = 0; i < diff.size(); ++i) diff[i] -= lam_prod * nug * hn[i];
    // normalize by |lambda_{j,n}| so the profile reflects the spectral gap
    out.norms.push_back(bv(diff) / std::abs(lam_prod));
  }
  out.fit = fit_geometric(out.norms, 1, 1e-13);
  return out;
}

ThirdDerivReport third_derivative_window(System& sys,
                                         std::span<const std::pair<int, int>> windows,
                                         double t_max, int t_count) {
  ThirdDerivReport rep;
  double r0 = twist_radius(sys);
  double radius = r0 / 4.0;
  for (const auto& [j, n] : windows) {
    double var = exact_variance(sys, j, n);
    double worst = 0.0;
    for (int q = 0; q < t_count; ++q) {
      double t = t_max * (t_count == 1 ? 0.0 : (2.0 * q / (t_count - 1) - 1.0));
      auto piw = [&](Complex z) { return pi_window(sys, j, n, z, 16); };
      Complex d3 = derivative(piw, Complex(0, t), 3, DerivScheme::Cauchy, radius, 32);
      worst = std::max(worst, std::abs(d3));
    }
    rep.ratios.push_back(worst / (1.0 + var));
    rep.max_ratio = std::max(rep.max_ratio, rep.ratios.back());
  }
  return rep;
}

}  // namespace seqlim
