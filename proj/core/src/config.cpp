#include "seqlim/config.hpp"

#include <json.hpp>
#include <set>

#include "seqlim/csv.hpp"
#include "seqlim/rng.hpp"

namespace seqlim {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config error at " + path + ": " + msg);
}

void require_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed,
                  const std::set<std::string>& required = {}) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) fail(path + "." + k, "unknown key");
  }
  for (const auto& k : required) {
    if (!obj.count(k)) fail(path + "." + k, "missing required key");
  }
}

double num_at(const json& obj, const std::string& path, const std::string& key,
              std::optional<double> def = {}) {
  if (!obj.count(key)) {
    if (def) return *def;
    fail(path + "." + key, "missing number");
  }
  if (!obj[key].is_number()) fail(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

std::vector<double> vec_at(const json& obj, const std::string& path,
                           const std::string& key) {
  if (!obj.count(key) || !obj[key].is_array()) fail(path + "." + key, "expected an array");
  std::vector<double> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number()) fail(path + "." + key, "array entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

TrigObservable parse_trig(const json& o, const std::string& path) {
  require_keys(o, path, {"type", "a0", "cos", "sin"});
  TrigObservable t;
  t.a0 = num_at(o, path, "a0", 0.0);
  if (o.count("cos")) t.cos_coeff = vec_at(o, path, "cos");
  if (o.count("sin")) t.sin_coeff = vec_at(o, path, "sin");
  return t;
}

Stage parse_stage(const json& o, const std::string& path) {
  if (o.count("preset")) {
    require_keys(o, path, {"preset", "log_weight", "symbols", "beta"});
    std::string p = o["preset"].get<std::string>();
    if (p == "doubling") return make_doubling();
    if (p == "tent") return make_tent();
    if (p == "w_markov") return make_w_markov();
    if (p == "triple") return make_triple();
    if (p == "moebius_pair") return make_moebius_pair();
    if (p == "golden_mean") return make_golden_mean();
    if (p == "full_shift")
      return make_full_shift(static_cast<int>(num_at(o, path, "symbols", 2.0)),
                             num_at(o, path, "log_weight", 0.0));
    if (p == "sticky_shift")
      return make_sticky_shift(static_cast<int>(num_at(o, path, "symbols", 2.0)),
                               num_at(o, path, "beta", 0.9));
    fail(path + ".preset", "unknown preset '" + p + "'");
  }
  if (o.count("branches")) {
    require_keys(o, path, {"name", "branches"});
    IntervalStage st;
    if (o.count("name")) st.name = o["name"].get<std::string>();
    int bi = 0;
    for (const auto& b : o["branches"]) {
      std::string bp = path + ".branches[" + std::to_string(bi++) + "]";
      require_keys(b, bp, {"lo", "hi", "affine", "moebius", "poly"}, {"lo", "hi"});
      Branch br;
      br.lo = num_at(b, bp, "lo");
      br.hi = num_at(b, bp, "hi");
      if (b.count("affine")) {
        auto v = vec_at(b, bp, "affine");
        if (v.size() != 2) fail(bp + ".affine", "expected [a, b]");
        br.form = AffineForm{v[0], v[1]};
      } else if (b.count("moebius")) {
        auto v = vec_at(b, bp, "moebius");
        if (v.size() != 4) fail(bp + ".moebius", "expected [a, b, c, d]");
        br.form = MoebiusForm{v[0], v[1], v[2], v[3]};
      } else if (b.count("poly")) {
        br.form = PolyForm{vec_at(b, bp, "poly")};
      } else {
        fail(bp, "branch needs one of affine/moebius/poly");
      }
      st.branches.push_back(br);
    }
    return st;
  }
  if (o.count("adjacency")) {
    require_keys(o, path, {"name", "adjacency", "potential"}, {"adjacency"});
    SftStage st;
    if (o.count("name")) st.name = o["name"].get<std::string>();
    const auto& adj = o["adjacency"];
    int rows = static_cast<int>(adj.size());
    int cols = rows > 0 ? static_cast<int>(adj[0].size()) : 0;
    st.adjacency = Eigen::MatrixXd::Zero(rows, cols);
    for (int a = 0; a < rows; ++a) {
      if (static_cast<int>(adj[a].size()) != cols) fail(path + ".adjacency", "ragged rows");
      for (int b = 0; b < cols; ++b) st.adjacency(a, b) = adj[a][b].get<double>();
    }
    st.potential = Eigen::MatrixXd::Zero(rows, cols);
    if (o.count("potential")) {
      const auto& pot = o["potential"];
      if (static_cast<int>(pot.size()) != rows) fail(path + ".potential", "shape mismatch");
      for (int a = 0; a < rows; ++a)
        for (int b = 0; b < cols; ++b) st.potential(a, b) = pot[a][b].get<double>();
    }
    return st;
  }
  fail(path, "stage needs preset/branches/adjacency");
}

Schedule parse_schedule(const json& o, const std::string& path, size_t family_size) {
  require_keys(o, path, {"type", "order", "indices", "seed"}, {"type"});
  std::string t = o["type"].get<std::string>();
  auto as_ints = [&](const std::string& key) {
    std::vector<int> out;
    for (double v : vec_at(o, path, key)) {
      int i = static_cast<int>(v);
      if (i < 0 || i >= static_cast<int>(family_size))
        fail(path + "." + key, "family index out of range");
      out.push_back(i);
    }
    return out;
  };
  if (t == "periodic") return PeriodicSchedule{as_ints("order")};
  if (t == "explicit") return ExplicitSchedule{as_ints("indices")};
  if (t == "seeded") return SeededSchedule{static_cast<uint64_t>(num_at(o, path, "seed", 0.0))};
  fail(path + ".type", "unknown schedule type '" + t + "'");
}

Observable parse_observable(const json& o, const std::string& path) {
  require_keys(o, path, {"type", "a0", "cos", "sin", "values"}, {"type"});
  std::string t = o["type"].get<std::string>();
  if (t == "trig") return parse_trig(o, path);
  if (t == "coboundary") {
    json inner = o;
    inner["type"] = "trig";
    return CoboundaryObservable{parse_trig(inner, path), {}};
  }
  if (t == "symbol") {
    auto v = vec_at(o, path, "values");
    SymbolObservable s;
    s.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
    return s;
  }
  fail(path + ".type", "unknown observable type '" + t + "'");
}

StageSpec parse_stage_spec(const json& o, const std::string& path) {
  static const std::set<std::string> known_stages = {
      "hypotheses", "rpf", "gibbs", "martingale", "limits", "cumulant", "asip"};
  if (!o.is_object() || !o.count("stage")) fail(path, "pipeline entries need a 'stage'");
  StageSpec spec;
  spec.name = o["stage"].get<std::string>();
  if (!known_stages.count(spec.name)) fail(path + ".stage", "unknown stage '" + spec.name + "'");
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"hypotheses", {"stage", "ly_n", "samples", "sc_a", "sc_horizon", "covering_horizon"}},
      {"rpf",
       {"stage", "window", "n_max", "samples", "burn_in", "rate_max", "r2_min",
        "equivariance_tol"}},
      {"gibbs", {"stage", "depth_max", "window", "drift_tol", "two_sided_samples"}},
      {"martingale",
       {"stage", "n_max", "tail_tol", "expect", "variance_coeff", "variance_tol",
        "variance_bound", "reverse_tol", "reconstruction_tol"}},
      {"limits",
       {"stage", "n_list", "samples", "init", "slope_lo", "slope_hi", "moment_p",
        "moment_slope_tol", "moment_samples"}},
      {"cumulant",
       {"stage", "z_list", "n_max", "j_max", "lll_slope_tol", "growth_n_list",
        "growth_k_list", "growth_delta", "growth_slope_tol"}},
      {"asip",
       {"stage", "block_b", "n_list", "cov_k_max", "cov_r2_min", "band_max",
        "gouzel_k_max", "gouzel_tol", "t_grid", "norm_n_max", "match_orbits"}},
  };
  require_keys(o, path, allowed.at(spec.name), {"stage"});
  for (const auto& [k, v] : o.items()) {
    if (k == "stage") continue;
    if (v.is_number()) {
      spec.num[k] = v.get<double>();
    } else if (v.is_string()) {
      spec.str[k] = v.get<std::string>();
    } else if (v.is_array()) {
      std::vector<double> vals;
      for (const auto& e : v) {
        if (e.is_array()) {
          // flattened complex pair [re, im]
          if (e.size() != 2) fail(path + "." + k, "complex entries are [re, im]");
          vals.push_back(e[0].get<double>());
          vals.push_back(e[1].get<double>());
        } else {
          vals.push_back(e.get<double>());
        }
      }
      spec.arr[k] = std::move(vals);
    } else {
      fail(path + "." + k, "unsupported value type");
    }
  }
  return spec;
}

}  // namespace

System ExperimentConfig::make_system() const {
  System sys(sequence, sys_opt);
  if (initial_density) sys.set_initial_density(*initial_density);
  return sys;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("config parse failure in " + origin + ": " + e.what());
  }
  require_keys(root, "$",
               {"seed", "threads", "output", "system", "observable", "observable_family",
                "observable_schedule", "pipeline"},
               {"seed", "system", "pipeline"});
  ExperimentConfig cfg;
  cfg.source_text = text;
  cfg.config_hash = fnv1a(json(root).dump());
  double seed = num_at(root, "$", "seed");
  if (seed < 0) fail("$.seed", "seed must be nonnegative");
  cfg.seed = static_cast<uint64_t>(seed);
  cfg.threads = static_cast<int>(num_at(root, "$", "threads", 0.0));
  if (root.count("output")) cfg.output = root["output"].get<std::string>();

  const json& sys = root["system"];
  require_keys(sys, "$.system",
               {"type", "grid", "holder_alpha", "mixing_horizon", "family", "schedule",
                "initial_density", "burn_in", "gibbs_burn"},
               {"type", "family", "schedule"});
  std::string type = sys["type"].get<std::string>();
  if (type != "interval" && type != "sft") fail("$.system.type", "interval or sft");
  cfg.sys_opt.grid = static_cast<int>(num_at(sys, "$.system", "grid", 4096.0));
  if (cfg.sys_opt.grid < 2) fail("$.system.grid", "grid size must be at least 2");
  cfg.sys_opt.holder_alpha = num_at(sys, "$.system", "holder_alpha", 1.0);
  cfg.sys_opt.burn_in = static_cast<int>(num_at(sys, "$.system", "burn_in", 0.0));
  cfg.sys_opt.gibbs_burn = static_cast<int>(num_at(sys, "$.system", "gibbs_burn", 256.0));
  int mixing = static_cast<int>(num_at(sys, "$.system", "mixing_horizon", 1.0));

  std::vector<Stage> family;
  int si = 0;
  for (const auto& s : sys["family"])
    family.push_back(parse_stage(s, "$.system.family[" + std::to_string(si++) + "]"));
  if (family.empty()) fail("$.system.family", "at least one stage required");
  bool family_sft = stage_is_sft(family[0]);
  if (family_sft != (type == "sft")) fail("$.system.type", "type does not match the family");
  Schedule sched = parse_schedule(sys["schedule"], "$.system.schedule", family.size());

  std::vector<Observable> obs_family;
  Schedule obs_sched = PeriodicSchedule{{0}};
  if (root.count("observable")) {
    obs_family.push_back(parse_observable(root["observable"], "$.observable"));
  } else if (root.count("observable_family")) {
    int oi = 0;
    for (const auto& o : root["observable_family"])
      obs_family.push_back(
          parse_observable(o, "$.observable_family[" + std::to_string(oi++) + "]"));
    if (!root.count("observable_schedule"))
      fail("$.observable_schedule", "required with observable_family");
    obs_sched = parse_schedule(root["observable_schedule"], "$.observable_schedule",
                               obs_family.size());
  } else {
    fail("$.observable", "an observable is required");
  }

  cfg.sequence = MapSequence(std::move(family), std::move(sched), std::move(obs_family),
                             std::move(obs_sched), mixing);

  if (sys.count("initial_density")) {
    json d = sys["initial_density"];
    d["type"] = "trig";
    cfg.initial_density = parse_trig(d, "$.system.initial_density");
  }

  int pi = 0;
  for (const auto& p : root["pipeline"])
    cfg.pipeline.push_back(parse_stage_spec(p, "$.pipeline[" + std::to_string(pi++) + "]"));
  if (cfg.pipeline.empty()) fail("$.pipeline", "at least one stage required");

  // Cross-field checks.
  for (const auto& st : cfg.pipeline) {
    auto it = st.arr.find("n_list");
    if (it != st.arr.end()) {
      for (size_t k = 0; k + 1 < it->second.size(); ++k)
        if (!(it->second[k] < it->second[k + 1]))
          fail("$.pipeline." + st.name + ".n_list", "must be strictly increasing");
    }
    for (const auto& [k, v] : st.num) {
      if (k.find("tol") != std::string::npos && v <= 0)
        fail("$.pipeline." + st.name + "." + k, "tolerances must be positive");
      if (k == "samples" && v < 0) fail("$.pipeline." + st.name + ".samples", "negative");
    }
    if (st.name == "limits") {
      double N = st.num.count("samples") ? st.num.at("samples") : 0.0;
      if (N < 1e4) fail("$.pipeline.limits.samples", "at least 1e4 samples required");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

}  // namespace seqlim
