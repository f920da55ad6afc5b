#include "seqlim/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <json.hpp>

#include "seqlim/asip.hpp"
#include "seqlim/csv.hpp"
#include "seqlim/cumulant.hpp"
#include "seqlim/limits.hpp"
#include "seqlim/martingale.hpp"
#include "seqlim/rpf.hpp"

namespace seqlim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double param(const StageSpec& st, const std::string& key, double def) {
  auto it = st.num.find(key);
  return it == st.num.end() ? def : it->second;
}

std::vector<int> int_list(const StageSpec& st, const std::string& key,
                          std::vector<int> def) {
  auto it = st.arr.find(key);
  if (it == st.arr.end()) return def;
  std::vector<int> out;
  for (double v : it->second) out.push_back(static_cast<int>(v));
  return out;
}

struct Ctx {
  const ExperimentConfig* cfg = nullptr;
  System* sys = nullptr;
  fs::path dir;
  int threads = 0;
  std::vector<Verdict>* verdicts = nullptr;
  bool sigma_bounded = false;

  void verdict(const std::string& stage, const std::string& name, bool pass, double value,
               double threshold, const std::string& note = "") {
    verdicts->push_back({stage, name, pass, value, threshold, note});
  }
};

// ---------------------------------------------------------------------------

void stage_hypotheses(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  CounterRng rng = CounterRng::substream(ctx.cfg->seed, "hypotheses");
  int samples = static_cast<int>(param(st, "samples", 64));
  int ly_n = static_cast<int>(param(st, "ly_n", 1));
  double a = param(st, "sc_a", 1.0);
  int horizon = static_cast<int>(param(st, "sc_horizon", 24));
  CsvWriter csv(ctx.dir / "hypotheses.csv");
  csv.header({"check", "value", "pass"});

  if (!sys.is_sft()) {
    for (const Stage& s : sys.seq().family()) {
      ExpansionReport er = verify_expansion(as_interval(s));
      ctx.verdict("hypotheses", "expansion_" + as_interval(s).name, er.pass,
                  er.min_derivative, 1.0);
      csv.row({"expansion_" + as_interval(s).name, CsvWriter::num(er.min_derivative),
               er.pass ? "1" : "0"});
    }
    CoveringResult cov = verify_covering(
        sys.seq(), 0, IntervalRegion{0.0, 0.25},
        static_cast<int>(param(st, "covering_horizon", 24)));
    ctx.verdict("hypotheses", "covering", cov.covered, cov.n, horizon);
    csv.row({"covering_n", CsvWriter::num(cov.n), cov.covered ? "1" : "0"});
  }

  LyReport ly = verify_ly(sys, 0, ly_n, samples, rng);
  ctx.verdict("hypotheses", "lasota_yorke_rho", ly.pass, ly.rho_hat, 1.0);
  csv.row({"ly_rho", CsvWriter::num(ly.rho_hat), ly.pass ? "1" : "0"});
  csv.row({"ly_k", CsvWriter::num(ly.k_hat), "1"});

  ScReport sc = verify_sc(sys, a, horizon, std::max(8, samples / 8), rng);
  ctx.verdict("hypotheses", "sequential_covering", sc.pass, sc.alpha_a, 0.0);
  csv.row({"sc_n", CsvWriter::num(sc.n_a), sc.pass ? "1" : "0"});
  csv.row({"sc_alpha", CsvWriter::num(sc.alpha_a), sc.pass ? "1" : "0"});

  MinScReport ms = verify_min_implies_sc(sys, horizon, a);
  csv.row({"min_delta0", CsvWriter::num(ms.delta0), ms.applicable ? "1" : "0"});
  csv.close();
}

void stage_rpf(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  int n_max = static_cast<int>(param(st, "n_max", 40));
  int samples = static_cast<int>(param(st, "samples", 20));
  int burn = static_cast<int>(param(st, "burn_in", 0));
  double rate_max = param(st, "rate_max", 0.9);
  double r2_min = param(st, "r2_min", 0.98);
  double eq_tol = param(st, "equivariance_tol", 1e-8);
  CounterRng rng = CounterRng::substream(ctx.cfg->seed, "rpf");

  RpfTriplet trip = forward_density(sys, 0, n_max, burn);
  write_file_atomic(ctx.dir / "rpf_triplet.csv", trip.to_csv());

  double worst_rate = 0.0, worst_r2 = 1.0;
  CsvWriter csv(ctx.dir / "rpf_decay.csv");
  csv.header({"sample", "rate", "r2"});
  for (int s = 0; s < samples; ++s) {
    FieldFunction g =
        sys.is_sft() ? FieldFunction::word_zero(sys.word_basis(0, 1), 0) : sys.zero(0);
    if (sys.is_sft()) {
      for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
    } else {
      int modes = 1 + static_cast<int>(rng.uniform_int(4));
      std::vector<double> ac(modes), as(modes);
      for (int k = 0; k < modes; ++k) {
        ac[k] = rng.uniform(-1.0, 1.0);
        as[k] = rng.uniform(-1.0, 1.0);
      }
      double jump_pos = rng.uniform(), jump_amp = rng.uniform(-1.0, 1.0);
      g = sys.sample(0, [&](double x) {
        double v = jump_amp * (x >= jump_pos ? 1.0 : 0.0);
        for (int k = 0; k < modes; ++k)
          v += ac[k] * std::cos(kTwoPi * (k + 1) * x) +
               as[k] * std::sin(kTwoPi * (k + 1) * x);
        return v;
      });
    }
    std::vector<double> prof = decay_profile(sys, trip, g, n_max);
    DecayFit fit = fit_decay(prof, 5);
    if (fit.points >= 4) {
      worst_rate = std::max(worst_rate, fit.rate);
      worst_r2 = std::min(worst_r2, fit.r2);
    }
    csv.row({CsvWriter::num(s), CsvWriter::num(fit.rate), CsvWriter::num(fit.r2)});
  }
  csv.close();
  ctx.verdict("rpf", "decay_rate", worst_rate < rate_max && worst_rate > 0, worst_rate,
              rate_max);
  ctx.verdict("rpf", "decay_r2", worst_r2 > r2_min, worst_r2, r2_min);

  double eq = 0.0;
  if (sys.is_sft()) {
    const GibbsSystem& gs = sys.gibbs_sys(0, n_max + 1);
    for (int j = 0; j < n_max; ++j) {
      const Eigen::VectorXd& pj = gs.pi_at(j);
      const Eigen::MatrixXd& p = gs.trans_at(j);
      Eigen::VectorXd pushed = (pj.transpose() * p).transpose();
      eq = std::max(eq, (pushed - gs.pi_at(j + 1)).cwiseAbs().maxCoeff());
    }
  } else {
    eq = equivariance_residual(sys, trip, std::min(n_max, 8), 50, rng);
  }
  ctx.verdict("rpf", "equivariance", eq < eq_tol, eq, eq_tol);
}

void stage_gibbs(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  if (!sys.is_sft()) throw DomainError("gibbs stage requires an SFT system");
  int depth = static_cast<int>(param(st, "depth_max", 10));
  int window = static_cast<int>(param(st, "window", 24));
  double drift_tol = param(st, "drift_tol", 1e-8);
  const GibbsSystem& gs = sys.gibbs_sys(-2, window + depth + 2);

  ctx.verdict("gibbs", "residual_fwd", gs.residual_fwd < 1e-12, gs.residual_fwd, 1e-12);
  ctx.verdict("gibbs", "residual_bwd", gs.residual_bwd < 1e-12, gs.residual_bwd, 1e-12);

  GibbsRatioReport ratio = gibbs_ratio_check(gs, depth);
  ctx.verdict("gibbs", "ratio_drift", ratio.max_drift < drift_tol, ratio.max_drift,
              drift_tol);
  CsvWriter csv(ctx.dir / "gibbs_ratio.csv");
  csv.header({"depth", "min_ratio", "max_ratio"});
  for (size_t k = 0; k < ratio.per_depth_max.size(); ++k)
    csv.row({CsvWriter::num(static_cast<int>(k) + 2),
             CsvWriter::num(ratio.per_depth_min[k]),
             CsvWriter::num(ratio.per_depth_max[k])});
  csv.close();

  CounterRng rng = CounterRng::substream(ctx.cfg->seed, "gibbs_two_sided");
  TwoSidedReport ts = two_sided_extend(
      gs, 4, std::min(depth, 8), static_cast<int>(param(st, "two_sided_samples", 100)),
      rng);
  ctx.verdict("gibbs", "two_sided_consistency", ts.pass, ts.max_gap, 1e-10);
}

void stage_martingale(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  int n_max = static_cast<int>(param(st, "n_max", 2048));
  double tail_tol = param(st, "tail_tol", 1e-12);
  double rev_tol = param(st, "reverse_tol", 1e-8);
  double rec_tol = param(st, "reconstruction_tol", 1e-10);

  MartingaleDecomposition dec = decompose(sys, 0, std::min(n_max, 512), tail_tol);
  write_file_atomic(ctx.dir / "martingale.csv", dec.to_csv(sys));
  ctx.verdict("martingale", "reverse_residual", dec.max_reverse_residual < rev_tol,
              dec.max_reverse_residual, rev_tol);
  ctx.verdict("martingale", "reconstruction", dec.max_reconstruction < rec_tol,
              dec.max_reconstruction, rec_tol);

  std::vector<double> curve = variance_curve(sys, 0, n_max);
  {
    CsvWriter csv(ctx.dir / "variance_curve.csv");
    csv.header({"n", "variance"});
    for (size_t k = 0; k < curve.size(); ++k)
      csv.row({CsvWriter::num(static_cast<int>(k) + 1), CsvWriter::num(curve[k])});
    csv.close();
  }
  auto expect = st.str.find("expect");
  if (expect != st.str.end()) {
    DichotomyReport dich = variance_dichotomy(sys, std::min(n_max, 4096));
    bool want_bounded = expect->second == "bounded";
    ctx.verdict("martingale", "dichotomy", dich.bounded == want_bounded,
                dich.tail_increment, dich.threshold, expect->second);
    if (want_bounded) ctx.sigma_bounded = true;
  }
  if (st.num.count("variance_coeff")) {
    double coeff = st.num.at("variance_coeff");
    double tol = param(st, "variance_tol", 1e-6);
    double worst = 0.0;
    for (size_t k = 0; k < curve.size(); ++k)
      worst = std::max(worst, std::abs(curve[k] - coeff * static_cast<double>(k + 1)));
    ctx.verdict("martingale", "variance_law", worst < tol, worst, tol);
  }
  if (st.num.count("variance_bound")) {
    double bound = st.num.at("variance_bound");
    double worst = 0.0;
    for (double v : curve) worst = std::max(worst, v);
    ctx.verdict("martingale", "variance_bound", worst <= bound, worst, bound);
    if (worst <= bound) ctx.sigma_bounded = true;
  }
}

void stage_limits(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  std::vector<int> n_list = int_list(st, "n_list", {16, 32, 64, 128, 256, 512, 1024});
  int64_t N = static_cast<int64_t>(param(st, "samples", 1e5));
  double slope_lo = param(st, "slope_lo", -1.35);
  double slope_hi = param(st, "slope_hi", -0.65);
  auto init_it = st.str.find("init");
  InitKind init = (init_it != st.str.end() && init_it->second == "density")
                      ? InitKind::Density
                      : InitKind::Reference;

  if (ctx.sigma_bounded) {
    ctx.verdict("limits", "skipped_sigma_bounded", true, 0.0, 0.0, "sigma bounded");
    return;
  }
  // Guard: the CLT pipeline needs sigma_n to diverge.
  double var_tail = exact_variance(sys, 0, n_list.back());
  if (var_tail < 5.0) {
    ctx.sigma_bounded = true;
    ctx.verdict("limits", "skipped_sigma_bounded", true, var_tail, 5.0, "sigma bounded");
    return;
  }

  std::vector<SampleSet> sets =
      simulate_many(sys, n_list, N, init, ctx.cfg->seed, ctx.threads);

  CsvWriter csv(ctx.dir / "distances.csv");
  csv.header({"n", "sigma_n", "kolm", "d_p1", "d_p3", "l1", "l2", "w1", "w2", "mc_err"});
  std::vector<double> sig, kolm, dp3, l1v, l2v, w1v, w2v;
  for (const SampleSet& s : sets) {
    DistanceReport d = distances(s);
    csv.row({CsvWriter::num(d.n), CsvWriter::num(d.sigma), CsvWriter::num(d.kolm),
             CsvWriter::num(d.d_p1), CsvWriter::num(d.d_p3), CsvWriter::num(d.l1),
             CsvWriter::num(d.l2), CsvWriter::num(d.w1), CsvWriter::num(d.w2),
             CsvWriter::num(d.mc_err)});
    sig.push_back(d.sigma);
    kolm.push_back(d.kolm);
    dp3.push_back(d.d_p3);
    l1v.push_back(d.l1);
    l2v.push_back(d.l2);
    w1v.push_back(d.w1);
    w2v.push_back(d.w2);
    // Sample persistence: binary column plus JSON sidecar.
    std::string base = "samples_n" + std::to_string(s.n);
    std::string blob(reinterpret_cast<const char*>(s.sorted.data()),
                     s.sorted.size() * sizeof(double));
    write_file_atomic(ctx.dir / (base + ".bin"), blob);
    json side = {{"n", s.n},
                 {"count", s.count},
                 {"seed", s.seed},
                 {"sigma_n", s.sigma},
                 {"init", s.init_desc}};
    write_file_atomic(ctx.dir / (base + ".json"), side.dump(2) + "\n");
  }
  csv.close();

  auto check_rate = [&](const std::string& name, std::span<const double> dist) {
    RateFit fit = rate_fit(sig, dist, ctx.cfg->seed);
    bool pass = fit.slope >= slope_lo && fit.slope <= slope_hi && fit.ci_hi < 0.0 &&
                fit.ci_lo > -2.0;
    ctx.verdict("limits", name + "_slope", pass, fit.slope, slope_lo,
                "ci=[" + std::to_string(fit.ci_lo) + "," + std::to_string(fit.ci_hi) + "]");
  };
  check_rate("kolmogorov", kolm);
  check_rate("weighted_p3", dp3);
  check_rate("l1", l1v);
  check_rate("l2", l2v);
  check_rate("w1", w1v);
  check_rate("w2", w2v);

  int p = static_cast<int>(param(st, "moment_p", 4));
  int64_t mn = static_cast<int64_t>(param(st, "moment_samples", static_cast<double>(N)));
  std::vector<MomentRatioPoint> mom =
      (mn == N) ? moment_ratio_from(sets, p)
                : moment_ratio(sys, n_list, p, mn, ctx.cfg->seed + 1, ctx.threads);
  std::vector<double> lx, ly;
  CsvWriter mcsv(ctx.dir / "moment_ratio.csv");
  mcsv.header({"n", "p_norm", "l2", "ratio"});
  for (const auto& m : mom) {
    mcsv.row({CsvWriter::num(m.n), CsvWriter::num(m.p_norm), CsvWriter::num(m.l2),
              CsvWriter::num(m.ratio)});
    lx.push_back(std::log(static_cast<double>(m.n)));
    ly.push_back(std::log(m.ratio));
  }
  mcsv.close();
  double mom_slope = least_squares(lx, ly).slope;
  double mom_tol = param(st, "moment_slope_tol", 0.05);
  ctx.verdict("limits", "moment_ratio_slope", std::abs(mom_slope) <= mom_tol, mom_slope,
              mom_tol);
}

void stage_cumulant(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  if (ctx.sigma_bounded) {
    ctx.verdict("cumulant", "skipped_sigma_bounded", true, 0.0, 0.0, "sigma bounded");
    return;
  }
  int n_max = static_cast<int>(param(st, "n_max", 400));
  int j_max = static_cast<int>(param(st, "j_max", 32));
  double lll_tol = param(st, "lll_slope_tol", 1e-4);
  std::vector<double> zs = st.arr.count("z_list")
                               ? st.arr.at("z_list")
                               : std::vector<double>{0.02, 0.0, 0.05, 0.0, 0.0, 0.05};
  CsvWriter csv(ctx.dir / "cgf_gap.csv");
  csv.header({"re_z", "im_z", "n", "gap"});
  for (size_t k = 0; k + 1 < zs.size(); k += 2) {
    Complex z(zs[k], zs[k + 1]);
    LllReport rep = lll_gap(sys, z, j_max, n_max);
    for (size_t q = 0; q < rep.n_grid.size(); ++q)
      csv.row({CsvWriter::num(z.real()), CsvWriter::num(z.imag()),
               CsvWriter::num(rep.n_grid[q]), CsvWriter::num(rep.gap_by_n[q])});
    ctx.verdict("cumulant",
                "lll_slope_z" + std::to_string(k / 2), std::abs(rep.slope_vs_n) < lll_tol,
                rep.slope_vs_n, lll_tol);
  }
  csv.close();

  std::vector<int> growth_n = int_list(st, "growth_n_list", {16, 32, 64, 128, 256});
  std::vector<int> ks = int_list(st, "growth_k_list", {3, 4});
  double delta = param(st, "growth_delta", 0.0);
  if (delta <= 0) delta = twist_radius(sys) / 2.0;
  double slope_tol = param(st, "growth_slope_tol", 0.1);
  for (int k : ks) {
    GrowthReport rep = growth_check(sys, growth_n, k, delta);
    ctx.verdict("cumulant", "growth_k" + std::to_string(k),
                std::abs(rep.plateau_slope) <= slope_tol, rep.plateau_slope, slope_tol);
  }
}

void stage_asip(Ctx& ctx, const StageSpec& st) {
  System& sys = *ctx.sys;
  if (ctx.sigma_bounded) {
    ctx.verdict("asip", "skipped_sigma_bounded", true, 0.0, 0.0, "sigma bounded");
    return;
  }
  double B = param(st, "block_b", 25.0);
  std::vector<int> n_list = int_list(st, "n_list", {256, 512, 1024, 2048});
  double band_max = param(st, "band_max", 3.0);

  std::vector<BlockPlan> plans;
  std::vector<double> sigma2;
  bool blocks_ok = true;
  for (int n : n_list) {
    BlockPlan plan = plan_blocks(sys, n, B);
    for (int b = 0; b < plan.closed_count(); ++b)
      blocks_ok = blocks_ok && plan.variances[b] >= B && plan.variances[b] <= 2 * B;
    sigma2.push_back(exact_variance(sys, 0, n));
    plans.push_back(std::move(plan));
  }
  write_file_atomic(ctx.dir / "block_plan.csv", plans.back().to_csv());
  ctx.verdict("asip", "blocks_in_band", blocks_ok, blocks_ok ? 1.0 : 0.0, 1.0);

  KnBandReport band = kn_band(plans, sigma2);
  ctx.verdict("asip", "kn_band", band.band < band_max, band.band, band_max);

  int k_max = static_cast<int>(param(st, "cov_k_max", 12));
  CovDecayReport cov = block_cov_decay(sys, plans.back(), k_max);
  double r2_min = param(st, "cov_r2_min", 0.95);
  bool cov_measurable = cov.fit.points >= 4;
  ctx.verdict("asip", "block_cov_decay",
              !cov_measurable || (cov.fit.r2 > r2_min && cov.fit.rate < 1.0), cov.fit.r2,
              r2_min, cov_measurable ? "" : "covariances at numerical zero");

  if (sys.is_sft()) {
    int gk = static_cast<int>(param(st, "gouzel_k_max", 30));
    double gtol = param(st, "gouzel_tol", 1e-12);
    std::vector<int> bidx = {0, 3, 6};
    std::vector<double> ts = {0.05, -0.04};
    std::vector<double> gaps;
    CsvWriter gcsv(ctx.dir / "gouzel.csv");
    gcsv.header({"k", "gap"});
    for (int k = 1; k <= gk; ++k) {
      GouzelReport rep = gouzel_gap(sys, bidx, 1, k, ts);
      gaps.push_back(rep.gap);
      gcsv.row({CsvWriter::num(k), CsvWriter::num(rep.gap)});
    }
    gcsv.close();
    DecayFit fit = fit_geometric(gaps, 1, 1e-14);
    ctx.verdict("asip", "gouzel_rate", fit.points >= 3 && fit.rate < 1.0, fit.rate, 1.0);
    ctx.verdict("asip", "gouzel_far_gap", gaps.back() < gtol, gaps.back(), gtol);
  }

  std::vector<double> tg = st.arr.count("t_grid") ? st.arr.at("t_grid")
                                                  : std::vector<double>{0.02, 0.05, 0.1};
  TwistedNormScan scan =
      twisted_norm_scan(sys, tg, static_cast<int>(param(st, "norm_n_max", 256)));
  ctx.verdict("asip", "twisted_norm_bounded", scan.max_norm < 1e3, scan.max_norm, 1e3);

  int64_t orbits = static_cast<int64_t>(param(st, "match_orbits", 0.0));
  if (orbits > 0) {
    BlockMatchReport match =
        block_gaussian_match(sys, plans.back(), orbits, ctx.cfg->seed + 2, ctx.threads);
    double worst_kurt = 0.0, worst_skew = 0.0;
    for (double k : match.kurtosis) worst_kurt = std::max(worst_kurt, std::abs(k - 3.0));
    for (double s : match.skewness) worst_skew = std::max(worst_skew, std::abs(s));
    ctx.verdict("asip", "block_kurtosis", worst_kurt < 0.2, worst_kurt, 0.2);
    ctx.verdict("asip", "block_corr", match.max_abs_corr < 0.05, match.max_abs_corr,
                0.05);
    CsvWriter mcsv(ctx.dir / "block_match.csv");
    mcsv.header({"block", "skewness", "kurtosis"});
    for (size_t b = 0; b < match.kurtosis.size(); ++b)
      mcsv.row({CsvWriter::num(static_cast<int>(b)), CsvWriter::num(match.skewness[b]),
                CsvWriter::num(match.kurtosis[b])});
    mcsv.close();
  }
}

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

std::filesystem::path default_output_root(const ExperimentConfig& cfg) {
  if (!cfg.output.empty()) return cfg.output;
  if (const char* env = std::getenv("SEQLIMITS_OUT")) return env;
  return "reports";
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const fs::path& out_root,
                                int threads_override) {
  ExperimentReport rep;
  rep.config_hash = cfg.config_hash;
  char hash8[17];
  std::snprintf(hash8, sizeof hash8, "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  rep.dir = out_root / (timestamp_utc() + "_" + std::string(hash8).substr(0, 8));
  fs::create_directories(rep.dir);
  write_file_atomic(rep.dir / "config.json", cfg.source_text);

  System sys = cfg.make_system();
  Ctx ctx;
  ctx.cfg = &cfg;
  ctx.sys = &sys;
  ctx.dir = rep.dir;
  ctx.threads = threads_override >= 0 ? threads_override : cfg.threads;
  ctx.verdicts = &rep.verdicts;

  bool numeric_failed = false;
  for (const StageSpec& st : cfg.pipeline) {
    StageResult sr;
    sr.stage = st.name;
    auto t0 = std::chrono::steady_clock::now();
    try {
      if (st.name == "hypotheses") stage_hypotheses(ctx, st);
      else if (st.name == "rpf") stage_rpf(ctx, st);
      else if (st.name == "gibbs") stage_gibbs(ctx, st);
      else if (st.name == "martingale") stage_martingale(ctx, st);
      else if (st.name == "limits") stage_limits(ctx, st);
      else if (st.name == "cumulant") stage_cumulant(ctx, st);
      else if (st.name == "asip") stage_asip(ctx, st);
      sr.ran = true;
    } catch (const NumericError& e) {
      sr.numeric_failure = true;
      sr.marker = e.what();
      numeric_failed = true;
    }
    sr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.stages.push_back(sr);
  }

  bool verdict_failed = false;
  for (const Verdict& v : rep.verdicts) verdict_failed = verdict_failed || !v.pass;

  json summary;
  summary["version"] = 1;
  summary["config_hash"] = std::string(hash8);
  summary["verdicts"] = json::array();
  for (const Verdict& v : rep.verdicts) {
    summary["verdicts"].push_back({{"stage", v.stage},
                                   {"name", v.name},
                                   {"pass", v.pass},
                                   {"value", v.value},
                                   {"threshold", v.threshold},
                                   {"note", v.note}});
  }
  summary["timings"] = json::array();
  for (const StageResult& s : rep.stages) {
    summary["timings"].push_back({{"stage", s.stage},
                                  {"seconds", s.seconds},
                                  {"ran", s.ran},
                                  {"numeric_failure", s.numeric_failure},
                                  {"marker", s.marker}});
  }
  write_file_atomic(rep.dir / "summary.json", summary.dump(2) + "\n");

  rep.exit_code = numeric_failed ? 3 : (verdict_failed ? 1 : 0);
  return rep;
}

std::string describe_experiment(const ExperimentConfig& cfg) {
  std::ostringstream ss;
  bool sft = cfg.sequence.is_sft();
  ss << "system: " << (sft ? "sft" : "interval");
  if (!sft) {
    ss << ", grid " << cfg.sys_opt.grid << " (collocation kernels, ~"
       << cfg.sys_opt.grid << "x" << cfg.sys_opt.grid << " dense equivalent per step)";
  } else {
    const SftStage& st = as_sft(cfg.sequence.family()[0]);
    ss << ", alphabet " << st.d_in() << " (" << st.d_in() << "x" << st.d_out()
       << " matrices per step)";
  }
  ss << "\nstages: " << cfg.pipeline.size() << "\n";
  for (const StageSpec& st : cfg.pipeline) {
    ss << "  - " << st.name;
    if (st.name == "limits") {
      double N = st.num.count("samples") ? st.num.at("samples") : 1e5;
      auto it = st.arr.find("n_list");
      double n_max = (it != st.arr.end() && !it->second.empty()) ? it->second.back() : 1024;
      ss << " (MC budget ~" << CsvWriter::num(N * n_max) << " map steps)";
    }
    if (st.name == "asip" && st.num.count("match_orbits") && st.num.at("match_orbits") > 0)
      ss << " (block-match orbits " << CsvWriter::num(st.num.at("match_orbits")) << ")";
    ss << "\n";
  }
  return ss.str();
}

CompareResult compare_reports(const fs::path& a, const fs::path& b) {
  CompareResult out;
  json sa, sb;
  try {
    sa = json::parse(read_file(a / "summary.json"));
    sb = json::parse(read_file(b / "summary.json"));
  } catch (const std::exception& e) {
    throw DomainError(std::string("compare: cannot read summaries: ") + e.what());
  }
  std::ostringstream ss;
  if (sa["version"] != sb["version"]) {
    out.schema_mismatch = true;
    ss << "schema version mismatch\n";
    out.text = ss.str();
    return out;
  }
  // Verdict values.
  std::map<std::string, double> va, vb;
  for (const auto& v : sa["verdicts"])
    va[v["stage"].get<std::string>() + "/" + v["name"].get<std::string>()] =
        v["value"].get<double>();
  for (const auto& v : sb["verdicts"])
    vb[v["stage"].get<std::string>() + "/" + v["name"].get<std::string>()] =
        v["value"].get<double>();
  for (const auto& [k, x] : va) {
    if (!vb.count(k)) {
      ss << k << ": only in A\n";
      continue;
    }
    double y = vb[k];
    double rel = (x == 0 && y == 0) ? 0.0
                                    : std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-300});
    ss << k << ": " << x << " vs " << y << " (rel " << rel << ")\n";
  }
  for (const auto& [k, y] : vb)
    if (!va.count(k)) ss << k << ": only in B\n";

  // Distance tables with error bars.
  fs::path da = a / "distances.csv", db = b / "distances.csv";
  if (fs::exists(da) && fs::exists(db)) {
    auto parse_csv = [](const fs::path& p) {
      std::vector<std::vector<double>> rows;
      std::istringstream in(read_file(p));
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
      }
      return rows;
    };
    auto ra = parse_csv(da), rb = parse_csv(db);
    if (ra.size() != rb.size()) {
      out.schema_mismatch = true;
      ss << "distance tables differ in shape\n";
    } else {
      for (size_t i = 0; i < ra.size(); ++i) {
        double err = ra[i].back() + rb[i].back();
        for (size_t c = 2; c + 1 < ra[i].size(); ++c) {
          double diff = std::abs(ra[i][c] - rb[i][c]);
          if (diff > 3.0 * err) {
            ++out.flagged;
            ss << "distances row n=" << ra[i][0] << " col " << c
               << " differs beyond 3x error bars (" << diff << " > " << 3 * err << ")\n";
          }
        }
      }
    }
  }
  out.text = ss.str();
  return out;
}

}  // namespace seqlim
