#include "reservelab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "reservelab/schedule.hpp"

namespace reservelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "spec" : path, "expected an object");
}

void reject_unknown(const Json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(join(path, key), "unknown field");
  }
}

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(join(path, key), "missing required field");
  return *it;
}

double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(path, "must be finite");
  return d;
}

double number(const Json& j, const std::string& key, const std::string& path) {
  return as_number(require(j, key, path), join(path, key));
}

double number_or(const Json& j, const std::string& key, const std::string& path, double fallback) {
  return j.contains(key) ? number(j, key, path) : fallback;
}

double positive(const Json& j, const std::string& key, const std::string& path) {
  const double v = number(j, key, path);
  if (!(v > 0.0)) throw SchemaError(join(path, key), "must be > 0");
  return v;
}

std::int64_t as_integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t integer(const Json& j, const std::string& key, const std::string& path) {
  return as_integer(require(j, key, path), join(path, key));
}

std::uint64_t as_seed(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw SchemaError(path, "expected a non-negative integer");
}

std::string string_field(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_string()) throw SchemaError(join(path, key), "expected a string");
  return v.get<std::string>();
}

NoiseSpec parse_noise(const Json& j, const std::string& path, bool allow_market_only) {
  expect_object(j, path);
  NoiseSpec n;
  n.kind = string_field(j, "kind", path);
  if (n.kind == "uniform") {
    reject_unknown(j, path, {"kind", "a"});
    n.shape = positive(j, "a", path);
  } else if (n.kind == "truncated_laplace") {
    reject_unknown(j, path, {"kind", "b", "B_n"});
    n.shape = positive(j, "b", path);
    n.bound = positive(j, "B_n", path);
  } else if (n.kind == "truncated_logistic") {
    reject_unknown(j, path, {"kind", "s", "B_n"});
    n.shape = positive(j, "s", path);
    n.bound = positive(j, "B_n", path);
  } else if (n.kind == "truncated_normal") {
    reject_unknown(j, path, {"kind", "sigma", "B_n"});
    n.shape = positive(j, "sigma", path);
    n.bound = positive(j, "B_n", path);
  } else if (allow_market_only && n.kind == "uniform_varying") {
    reject_unknown(j, path, {"kind", "a_lo", "a_hi"});
    n.a_lo = positive(j, "a_lo", path);
    n.a_hi = positive(j, "a_hi", path);
    if (n.a_lo > n.a_hi) throw SchemaError(join(path, "a_lo"), "must not exceed a_hi");
  } else if (allow_market_only && n.kind == "family_member") {
    reject_unknown(j, path, {"kind", "sigma"});
    n.shape = positive(j, "sigma", path);
  } else {
    throw SchemaError(join(path, "kind"), "unknown noise kind '" + n.kind + "'");
  }
  return n;
}

Json noise_json(const NoiseSpec& n) {
  Json j{{"kind", n.kind}};
  if (n.kind == "uniform") {
    j["a"] = n.shape;
  } else if (n.kind == "truncated_laplace") {
    j["b"] = n.shape;
    j["B_n"] = n.bound;
  } else if (n.kind == "truncated_logistic") {
    j["s"] = n.shape;
    j["B_n"] = n.bound;
  } else if (n.kind == "truncated_normal") {
    j["sigma"] = n.shape;
    j["B_n"] = n.bound;
  } else if (n.kind == "uniform_varying") {
    j["a_lo"] = n.a_lo;
    j["a_hi"] = n.a_hi;
  } else {
    j["sigma"] = n.shape;
  }
  return j;
}

NoiseModel plain_model(const NoiseSpec& n) {
  if (n.kind == "uniform") return NoiseModel::uniform(n.shape);
  if (n.kind == "truncated_laplace") return NoiseModel::truncated_laplace(n.shape, n.bound);
  if (n.kind == "truncated_logistic") return NoiseModel::truncated_logistic(n.shape, n.bound);
  if (n.kind == "truncated_normal") return NoiseModel::truncated_normal(n.shape, n.bound);
  throw std::invalid_argument("noise kind '" + n.kind + "' has no fixed model");
}

LocationScaleFamily build_family(const FamilySpec& f) {
  return LocationScaleFamily(standardized(plain_model(f.base)), f.sigma_lo, f.sigma_hi);
}

BidderStrategy parse_strategy(const Json& j, const std::string& path) {
  expect_object(j, path);
  const std::string kind = string_field(j, "kind", path);
  auto episodes = [&](const Json& obj) {
    std::set<int> out;
    const Json& arr = require(obj, "episodes", path);
    if (!arr.is_array()) throw SchemaError(join(path, "episodes"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto k = as_integer(arr[i], index(join(path, "episodes"), i));
      if (k < 1) throw SchemaError(index(join(path, "episodes"), i), "episodes start at 1");
      out.insert(static_cast<int>(k));
    }
    return out;
  };
  BidderStrategy s;
  if (kind == "truthful") {
    reject_unknown(j, path, {"kind"});
    s = Truthful{};
  } else if (kind == "shading") {
    reject_unknown(j, path, {"kind", "delta", "episodes"});
    s = Shading{number(j, "delta", path), episodes(j)};
  } else if (kind == "overbidding") {
    reject_unknown(j, path, {"kind", "delta", "episodes"});
    s = OverBidding{number(j, "delta", path), episodes(j)};
  } else if (kind == "discounted_strategic") {
    reject_unknown(j, path, {"kind", "gamma", "shade_frac", "probe_prob"});
    DiscountedStrategic d;
    d.gamma = number_or(j, "gamma", path, d.gamma);
    d.shade_frac = number_or(j, "shade_frac", path, d.shade_frac);
    d.probe_prob = number_or(j, "probe_prob", path, d.probe_prob);
    s = d;
  } else {
    throw SchemaError(join(path, "kind"), "unknown bidder kind '" + kind + "'");
  }
  try {
    validate_strategy(s);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
  return s;
}

Json strategy_json(const BidderStrategy& s) {
  if (std::holds_alternative<Truthful>(s)) return Json{{"kind", "truthful"}};
  if (const auto* sh = std::get_if<Shading>(&s)) {
    return Json{{"kind", "shading"}, {"delta", sh->delta}, {"episodes", sh->active_episodes}};
  }
  if (const auto* ob = std::get_if<OverBidding>(&s)) {
    return Json{{"kind", "overbidding"}, {"delta", ob->delta}, {"episodes", ob->active_episodes}};
  }
  const auto& d = std::get<DiscountedStrategic>(s);
  return Json{{"kind", "discounted_strategic"},
              {"gamma", d.gamma},
              {"shade_frac", d.shade_frac},
              {"probe_prob", d.probe_prob}};
}

PolicyKind parse_policy(const Json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected a string");
  try {
    return policy_kind_from_string(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string tag(std::int64_t horizon, std::uint64_t seed) {
  return "T" + std::to_string(horizon) + "_s" + std::to_string(seed);
}

std::vector<std::int64_t> grid_for(const ExperimentSpec& spec, std::int64_t horizon) {
  if (spec.t_grid.empty()) return default_t_grid(horizon);
  std::vector<std::int64_t> grid;
  for (auto t : spec.t_grid) {
    if (t <= horizon) grid.push_back(t);
  }
  return grid;
}

struct Job {
  std::int64_t horizon;
  std::uint64_t seed;
};

std::vector<Job> jobs_for(const ExperimentSpec& spec, std::uint64_t offset) {
  std::vector<Job> jobs;
  for (auto h : spec.horizons) {
    for (auto s : spec.seeds) jobs.push_back({h, s + offset});
  }
  return jobs;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers; rethrows the
/// first failure by index.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(n, count); ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct RunOutput {
  SweepRow row;
  std::vector<double> grid_values;
};

RunOutput run_and_write(const ExperimentSpec& spec, const Job& job, const std::string& hash,
                        const std::filesystem::path& out_dir) {
  SimulationConfig config = build_config(spec, job.horizon, job.seed);
  const SimulationResult result = run_simulation(config, job.seed);

  std::ostringstream trace;
  write_trace_csv(trace, result, hash);
  write_file(out_dir / ("trace_" + tag(job.horizon, job.seed) + ".csv"), trace.str());
  write_file(out_dir / ("summary_" + tag(job.horizon, job.seed) + ".json"),
             summarize(result, config, hash).dump(2) + "\n");

  RunOutput out;
  out.row.seed = job.seed;
  out.row.horizon = job.horizon;
  out.row.final_regret = result.final_regret();
  out.row.growth_exponent = result.growth.exponent;
  out.row.exponent_status = result.growth.status;
  out.row.lies_total = result.lies.total_lies();
  double err = 0.0;
  const auto& last = result.records.back().estimation_error;
  for (double e : last) err += e;
  out.row.final_est_err = last.empty() ? kNaN : err / static_cast<double>(last.size());
  for (auto t : result.t_grid) out.grid_values.push_back(result.ledger.cumulative(t));
  return out;
}

std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return kNaN;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": bad number '" + s + "'");
  }
  if (used != s.size()) throw std::runtime_error(where + ": bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": bad integer '" + s + "'");
  }
  if (used != s.size()) throw std::runtime_error(where + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec parsing

ExperimentSpec parse_spec(const Json& j) {
  expect_object(j, "");
  reject_unknown(j, "", {"market", "policy", "benchmark", "ambiguity", "family", "bidders",
                         "horizon", "horizons", "seeds", "solver", "estimator", "analysis"});
  ExperimentSpec spec;

  const Json& m = require(j, "market", "");
  expect_object(m, "market");
  reject_unknown(m, "market",
                 {"N", "d", "B_p", "bid_cap", "context_sampler", "noise", "preferences"});
  const auto n = integer(m, "N", "market");
  if (n < 1) throw SchemaError("market.N", "must be >= 1");
  const auto d = integer(m, "d", "market");
  if (d < 1) throw SchemaError("market.d", "must be >= 1");
  spec.buyers = static_cast<int>(n);
  spec.dimension = static_cast<int>(d);
  spec.preference_bound = positive(m, "B_p", "market");
  spec.bid_cap = number_or(m, "bid_cap", "market", 0.0);
  if (spec.bid_cap < 0.0) throw SchemaError("market.bid_cap", "must be >= 0 (0 selects B + 1)");
  if (m.contains("context_sampler")) {
    const std::string s = string_field(m, "context_sampler", "market");
    if (s == "uniform_ball") {
      spec.sampler = ContextSampler::Kind::kUniformBall;
    } else if (s == "normalized_gaussian") {
      spec.sampler = ContextSampler::Kind::kNormalizedGaussian;
    } else {
      throw SchemaError("market.context_sampler", "unknown sampler '" + s + "'");
    }
  }
  spec.noise = parse_noise(require(m, "noise", "market"), "market.noise", true);

  const Json& prefs = m.contains("preferences") ? m["preferences"] : Json("random");
  if (prefs.is_string()) {
    if (prefs.get<std::string>() != "random") {
      throw SchemaError("market.preferences", "expected \"random\" or a list of vectors");
    }
  } else if (prefs.is_object()) {
    reject_unknown(prefs, "market.preferences", {"kind", "seed"});
    if (string_field(prefs, "kind", "market.preferences") != "random") {
      throw SchemaError("market.preferences.kind", "only \"random\" is supported");
    }
    if (prefs.contains("seed")) {
      spec.preference_seed = as_seed(prefs["seed"], "market.preferences.seed");
    }
  } else if (prefs.is_array()) {
    if (prefs.size() != static_cast<std::size_t>(n)) {
      throw SchemaError("market.preferences", "need exactly N vectors");
    }
    for (std::size_t i = 0; i < prefs.size(); ++i) {
      const std::string p = index("market.preferences", i);
      if (!prefs[i].is_array() || prefs[i].size() != static_cast<std::size_t>(d)) {
        throw SchemaError(p, "expected a vector of length d");
      }
      Vector beta(d);
      for (std::size_t k = 0; k < prefs[i].size(); ++k) {
        beta[static_cast<Eigen::Index>(k)] = as_number(prefs[i][k], index(p, k));
      }
      if (beta.norm() > spec.preference_bound * (1.0 + 1e-12)) {
        throw SchemaError(p, "norm exceeds the preference bound B_p");
      }
      spec.preferences.push_back(beta);
    }
  } else {
    throw SchemaError("market.preferences", "expected \"random\" or a list of vectors");
  }

  const Json& pol = require(j, "policy", "");
  if (pol.is_string()) {
    spec.policy = parse_policy(pol, "policy");
  } else {
    expect_object(pol, "policy");
    reject_unknown(pol, "policy", {"kind"});
    spec.policy = parse_policy(require(pol, "kind", "policy"), "policy.kind");
  }
  const bool robust = spec.policy == PolicyKind::kScorp || spec.policy == PolicyKind::kRobustOracle;
  spec.benchmark = robust ? PolicyKind::kRobustOracle : PolicyKind::kOracle;
  if (j.contains("benchmark")) {
    spec.benchmark = parse_policy(j["benchmark"], "benchmark");
    if (spec.benchmark != PolicyKind::kOracle && spec.benchmark != PolicyKind::kRobustOracle) {
      throw SchemaError("benchmark", "must be oracle or robust_oracle");
    }
  }

  if (j.contains("ambiguity")) {
    const Json& a = j["ambiguity"];
    expect_object(a, "ambiguity");
    AmbiguitySpec amb;
    amb.kind = string_field(a, "kind", "ambiguity");
    if (amb.kind == "uniform_supports") {
      reject_unknown(a, "ambiguity", {"kind", "a_lo", "a_hi"});
      amb.a_lo = positive(a, "a_lo", "ambiguity");
      amb.a_hi = positive(a, "a_hi", "ambiguity");
      if (amb.a_lo > amb.a_hi) throw SchemaError("ambiguity.a_lo", "must not exceed a_hi");
    } else if (amb.kind == "finite") {
      reject_unknown(a, "ambiguity", {"kind", "members"});
      const Json& mem = require(a, "members", "ambiguity");
      if (!mem.is_array() || mem.empty()) {
        throw SchemaError("ambiguity.members", "expected a nonempty array");
      }
      for (std::size_t i = 0; i < mem.size(); ++i) {
        amb.members.push_back(parse_noise(mem[i], index("ambiguity.members", i), false));
      }
    } else {
      throw SchemaError("ambiguity.kind", "unknown ambiguity kind '" + amb.kind + "'");
    }
    spec.ambiguity = amb;
  }

  if (j.contains("family")) {
    const Json& f = j["family"];
    expect_object(f, "family");
    reject_unknown(f, "family", {"base", "sigma_lo", "sigma_hi"});
    FamilySpec fam;
    fam.base = parse_noise(require(f, "base", "family"), "family.base", false);
    fam.sigma_lo = positive(f, "sigma_lo", "family");
    fam.sigma_hi = positive(f, "sigma_hi", "family");
    if (fam.sigma_lo > fam.sigma_hi) throw SchemaError("family.sigma_lo", "must not exceed sigma_hi");
    spec.family = fam;
  }

  if (!j.contains("bidders")) {
    spec.bidders.assign(static_cast<std::size_t>(n), Truthful{});
  } else if (j["bidders"].is_array()) {
    const Json& b = j["bidders"];
    if (b.size() != static_cast<std::size_t>(n)) {
      throw SchemaError("bidders", "need one strategy per buyer or a single strategy");
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      spec.bidders.push_back(parse_strategy(b[i], index("bidders", i)));
    }
  } else {
    spec.bidders.assign(static_cast<std::size_t>(n), parse_strategy(j["bidders"], "bidders"));
  }

  if (j.contains("horizon") == j.contains("horizons")) {
    throw SchemaError("horizons", "give exactly one of horizon or horizons");
  }
  if (j.contains("horizon")) {
    spec.horizons.push_back(as_integer(j["horizon"], "horizon"));
  } else {
    const Json& h = j["horizons"];
    if (!h.is_array() || h.empty()) throw SchemaError("horizons", "expected a nonempty array");
    for (std::size_t i = 0; i < h.size(); ++i) {
      spec.horizons.push_back(as_integer(h[i], index("horizons", i)));
    }
  }
  for (std::size_t i = 0; i < spec.horizons.size(); ++i) {
    if (!is_power_of_two(spec.horizons[i])) {
      throw SchemaError(j.contains("horizon") ? "horizon" : index("horizons", i),
                        "must be a power of two");
    }
  }

  const Json& seeds = require(j, "seeds", "");
  if (seeds.is_array()) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      spec.seeds.push_back(as_seed(seeds[i], index("seeds", i)));
    }
  } else if (seeds.is_object()) {
    reject_unknown(seeds, "seeds", {"start", "count"});
    const std::uint64_t start = as_seed(require(seeds, "start", "seeds"), "seeds.start");
    const std::int64_t count = integer(seeds, "count", "seeds");
    if (count < 0) throw SchemaError("seeds.count", "must be >= 0");
    for (std::int64_t k = 0; k < count; ++k) spec.seeds.push_back(start + static_cast<std::uint64_t>(k));
  } else {
    throw SchemaError("seeds", "expected a list or {start, count}");
  }
  if (spec.seeds.empty()) throw SchemaError("seeds", "must be nonempty");

  if (j.contains("solver")) {
    const Json& s = j["solver"];
    expect_object(s, "solver");
    reject_unknown(s, "solver", {"search_tol", "max_iter", "grid_step"});
    spec.solver.search_tol = number_or(s, "search_tol", "solver", spec.solver.search_tol);
    if (s.contains("max_iter")) {
      spec.solver.max_iter = static_cast<int>(integer(s, "max_iter", "solver"));
    }
    spec.solver.grid_step = number_or(s, "grid_step", "solver", spec.solver.grid_step);
    try {
      spec.solver.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError("solver", e.what());
    }
  }
  if (j.contains("estimator")) {
    const Json& e = j["estimator"];
    expect_object(e, "estimator");
    reject_unknown(e, "estimator", {"grad_tol", "max_iter", "armijo", "clamp_eps"});
    spec.estimator.grad_tol = number_or(e, "grad_tol", "estimator", spec.estimator.grad_tol);
    if (e.contains("max_iter")) {
      spec.estimator.max_iter = static_cast<int>(integer(e, "max_iter", "estimator"));
    }
    spec.estimator.armijo = number_or(e, "armijo", "estimator", spec.estimator.armijo);
    spec.estimator.clamp_eps = number_or(e, "clamp_eps", "estimator", spec.estimator.clamp_eps);
    try {
      spec.estimator.validate();
    } catch (const std::invalid_argument& ex) {
      throw SchemaError("estimator", ex.what());
    }
  }
  if (j.contains("analysis")) {
    const Json& a = j["analysis"];
    expect_object(a, "analysis");
    reject_unknown(a, "analysis", {"t_grid"});
    if (a.contains("t_grid")) {
      const Json& g = a["t_grid"];
      if (!g.is_array()) throw SchemaError("analysis.t_grid", "expected an array");
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto t = as_integer(g[i], index("analysis.t_grid", i));
        if (t < 1) throw SchemaError(index("analysis.t_grid", i), "must be >= 1");
        spec.t_grid.push_back(t);
      }
      std::sort(spec.t_grid.begin(), spec.t_grid.end());
      spec.t_grid.erase(std::unique(spec.t_grid.begin(), spec.t_grid.end()), spec.t_grid.end());
    }
  }

  // Cross-field rules.
  const bool varying = spec.noise.kind == "uniform_varying";
  if (varying && (spec.policy == PolicyKind::kCorp || spec.policy == PolicyKind::kOracle)) {
    throw SchemaError("market.noise", "policy " + to_string(spec.policy) +
                                          " needs a fixed noise model, not uniform_varying");
  }
  if (varying && spec.benchmark == PolicyKind::kOracle) {
    throw SchemaError("benchmark", "the oracle benchmark needs a fixed noise model");
  }
  if ((spec.policy == PolicyKind::kScorp || spec.policy == PolicyKind::kRobustOracle ||
       spec.benchmark == PolicyKind::kRobustOracle) &&
      !spec.ambiguity) {
    throw SchemaError("ambiguity", "policy " + to_string(spec.policy) + " needs an ambiguity set");
  }
  if (spec.policy == PolicyKind::kCorp2 && !spec.family) {
    throw SchemaError("family", "policy corp2 needs a location-scale family");
  }
  if (spec.noise.kind == "family_member" && !spec.family) {
    throw SchemaError("market.noise", "family_member noise needs a family");
  }
  if (spec.bid_cap > 0.0) {
    double bn = 0.0;
    try {
      bn = varying ? spec.noise.a_hi : build_noise_model(spec.noise, spec.family).support_bound();
    } catch (const std::exception& e) {
      throw SchemaError("market.noise", e.what());
    }
    if (spec.bid_cap < spec.preference_bound + bn) {
      throw SchemaError("market.bid_cap", "must be at least B = B_p + B_n");
    }
  }

  // Everything else (family variance, log-concavity of ambiguity members, ...)
  // is checked by building a configuration once.
  try {
    build_config(spec, spec.horizons.front(), spec.seeds.front()).validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError("spec", e.what());
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read spec " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw SchemaError("spec", std::string("invalid JSON: ") + e.what());
  }
  return parse_spec(j);
}

Json to_json(const ExperimentSpec& spec) {
  Json market{{"N", spec.buyers},
              {"d", spec.dimension},
              {"B_p", spec.preference_bound},
              {"bid_cap", spec.bid_cap},
              {"context_sampler", spec.sampler == ContextSampler::Kind::kUniformBall
                                      ? "uniform_ball"
                                      : "normalized_gaussian"},
              {"noise", noise_json(spec.noise)}};
  if (!spec.preferences.empty()) {
    Json prefs = Json::array();
    for (const auto& b : spec.preferences) prefs.push_back(std::vector<double>(b.begin(), b.end()));
    market["preferences"] = prefs;
  } else if (spec.preference_seed) {
    market["preferences"] = Json{{"kind", "random"}, {"seed", *spec.preference_seed}};
  } else {
    market["preferences"] = "random";
  }

  Json j{{"market", market},
         {"policy", Json{{"kind", to_string(spec.policy)}}},
         {"benchmark", to_string(spec.benchmark)},
         {"horizons", spec.horizons},
         {"seeds", spec.seeds},
         {"solver", Json{{"search_tol", spec.solver.search_tol},
                         {"max_iter", spec.solver.max_iter},
                         {"grid_step", spec.solver.grid_step}}},
         {"estimator", Json{{"grad_tol", spec.estimator.grad_tol},
                            {"max_iter", spec.estimator.max_iter},
                            {"armijo", spec.estimator.armijo},
                            {"clamp_eps", spec.estimator.clamp_eps}}},
         {"analysis", Json{{"t_grid", spec.t_grid}}}};
  Json bidders = Json::array();
  for (const auto& b : spec.bidders) bidders.push_back(strategy_json(b));
  j["bidders"] = bidders;
  if (spec.ambiguity) {
    const auto& a = *spec.ambiguity;
    if (a.kind == "uniform_supports") {
      j["ambiguity"] = Json{{"kind", a.kind}, {"a_lo", a.a_lo}, {"a_hi", a.a_hi}};
    } else {
      Json members = Json::array();
      for (const auto& m : a.members) members.push_back(noise_json(m));
      j["ambiguity"] = Json{{"kind", a.kind}, {"members", members}};
    }
  }
  if (spec.family) {
    j["family"] = Json{{"base", noise_json(spec.family->base)},
                       {"sigma_lo", spec.family->sigma_lo},
                       {"sigma_hi", spec.family->sigma_hi}};
  }
  return j;
}

std::string spec_hash(const ExperimentSpec& spec) {
  const std::string text = to_json(spec).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

NoiseModel build_noise_model(const NoiseSpec& spec, const std::optional<FamilySpec>& family) {
  if (spec.kind == "family_member") {
    if (!family) throw std::invalid_argument("family_member noise needs a family");
    return build_family(*family).member(spec.shape);
  }
  return plain_model(spec);
}

SimulationConfig build_config(const ExperimentSpec& spec, std::int64_t horizon, std::uint64_t seed) {
  NoiseProcess noise = spec.noise.kind == "uniform_varying"
                           ? NoiseProcess::varying_uniform(spec.noise.a_lo, spec.noise.a_hi)
                           : NoiseProcess(build_noise_model(spec.noise, spec.family));
  std::vector<Vector> prefs = spec.preferences;
  if (prefs.empty()) {
    Rng rng = make_stream(spec.preference_seed.value_or(seed), Stream::kPreferences);
    prefs = random_preferences(static_cast<std::size_t>(spec.buyers), spec.dimension,
                               spec.preference_bound, rng);
  }
  SimulationConfig config(MarketConfig(spec.preference_bound, std::move(noise), std::move(prefs),
                                       ContextSampler(spec.sampler, spec.dimension)));
  config.policy = spec.policy;
  config.benchmark = spec.benchmark;
  if (spec.family) config.family = build_family(*spec.family);
  if (spec.ambiguity) {
    if (spec.ambiguity->kind == "uniform_supports") {
      config.ambiguity = AmbiguitySet(UniformSupports{spec.ambiguity->a_lo, spec.ambiguity->a_hi});
    } else {
      FiniteSet set;
      for (const auto& m : spec.ambiguity->members) set.members.push_back(plain_model(m));
      config.ambiguity = AmbiguitySet(std::move(set));
    }
  }
  config.bidders = spec.bidders;
  config.horizon = horizon;
  config.bid_cap = spec.bid_cap;
  config.solver = spec.solver;
  config.estimator = spec.estimator;
  config.t_grid = grid_for(spec, horizon);
  return config;
}

Json summarize(const SimulationResult& result, const SimulationConfig& config,
               const std::string& hash) {
  Json j;
  j["spec_hash"] = hash;
  j["seed"] = result.seed;
  j["horizon"] = static_cast<std::int64_t>(result.records.size());
  j["policy"] = to_string(config.policy);
  j["benchmark"] = to_string(config.benchmark);
  j["final_regret"] = result.final_regret();
  j["growth_exponent"] = optional_number(result.growth.exponent);
  j["exponent_status"] = result.growth.status;
  j["t_grid"] = result.t_grid;
  j["lies_total"] = result.lies.total_lies();

  Json episodes = Json::array();
  for (const auto& [k, e] : result.ledger.episodes()) {
    double shading = 0.0, overbid = 0.0;
    for (std::size_t i = 0; i < result.lies.buyers(); ++i) {
      const auto& tallies = result.lies.episodes(i);
      if (auto it = tallies.find(k); it != tallies.end()) {
        shading += it->second.shading_unsold;
        overbid += it->second.overbid_sold;
      }
    }
    episodes.push_back(Json{{"episode", k},
                            {"periods", e.periods},
                            {"policy_revenue", e.policy_revenue},
                            {"benchmark_revenue", e.benchmark_revenue},
                            {"regret", e.regret},
                            {"lies", e.lies},
                            {"shading_unsold", shading},
                            {"overbid_sold", overbid}});
  }
  j["episodes"] = episodes;

  Json fits = Json::array();
  for (const auto& f : result.fits) {
    fits.push_back(Json{{"episode", f.episode},
                        {"buyer", f.buyer},
                        {"samples", f.samples},
                        {"iterations", f.iterations},
                        {"converged", f.converged},
                        {"objective", number_or_null(f.objective)},
                        {"alpha", number_or_null(f.alpha)}});
  }
  j["fits"] = fits;

  Json err = Json::array();
  double alpha = kNaN;
  if (!result.records.empty()) {
    for (double e : result.records.back().estimation_error) err.push_back(number_or_null(e));
    alpha = result.records.back().alpha_mean;
  }
  j["final_est_err"] = err;
  j["final_alpha_mean"] = number_or_null(alpha);
  return j;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_run(const ExperimentSpec& spec, const CommandOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  const std::string hash = spec_hash(spec);
  const auto jobs = jobs_for(spec, options.seed_offset);
  parallel_for(jobs.size(), options.jobs,
               [&](std::size_t i) { run_and_write(spec, jobs[i], hash, options.out_dir); });
}

SweepResult cmd_sweep(const ExperimentSpec& spec, const CommandOptions& options) {
  if (spec.seeds.size() < 2) throw SchemaError("seeds", "a sweep needs at least two seeds");
  std::filesystem::create_directories(options.out_dir);
  const std::string hash = spec_hash(spec);
  const auto jobs = jobs_for(spec, options.seed_offset);
  std::vector<RunOutput> outputs(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
    outputs[i] = run_and_write(spec, jobs[i], hash, options.out_dir);
  });

  SweepResult sweep;
  for (const auto& o : outputs) sweep.rows.push_back(o.row);

  for (auto horizon : spec.horizons) {
    SweepHorizonSummary s;
    s.horizon = horizon;
    std::vector<double> regret, exponents, lies;
    std::vector<std::vector<double>> curves;
    for (const auto& o : outputs) {
      if (o.row.horizon != horizon) continue;
      regret.push_back(o.row.final_regret);
      if (o.row.growth_exponent) exponents.push_back(*o.row.growth_exponent);
      lies.push_back(static_cast<double>(o.row.lies_total));
      curves.push_back(o.grid_values);
    }
    s.median_final_regret = median(regret);
    s.iqr_final_regret = quantile(regret, 0.75) - quantile(regret, 0.25);
    if (!exponents.empty()) s.median_exponent = median(exponents);
    s.median_lies = median(lies);
    const auto grid = grid_for(spec, horizon);
    if (grid.size() >= 2) {
      std::vector<double> dense(static_cast<std::size_t>(grid.back()), 0.0);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> column;
        for (const auto& c : curves) column.push_back(c[g]);
        dense[static_cast<std::size_t>(grid[g] - 1)] = median(column);
      }
      s.median_curve_exponent = fit_growth_exponent(dense, grid).exponent;
    }
    sweep.summary.push_back(s);
  }

  std::ostringstream rows;
  rows << "# spec_hash=" << hash << " seed_offset=" << options.seed_offset << "\n";
  rows << "seed,horizon,final_regret,growth_exponent,exponent_status,lies_total,final_est_err\n";
  for (const auto& r : sweep.rows) {
    rows << r.seed << ',' << r.horizon << ',' << format_double(r.final_regret) << ','
         << fmt(r.growth_exponent) << ',' << r.exponent_status << ',' << r.lies_total << ','
         << format_double(r.final_est_err) << "\n";
  }
  write_file(options.out_dir / "sweep.csv", rows.str());

  std::ostringstream summary;
  summary << "# spec_hash=" << hash << " seed_offset=" << options.seed_offset << "\n";
  summary << "horizon,seeds,median_final_regret,iqr_final_regret,median_exponent,median_lies,"
             "median_curve_exponent\n";
  for (const auto& s : sweep.summary) {
    summary << s.horizon << ',' << spec.seeds.size() << ',' << format_double(s.median_final_regret)
            << ',' << format_double(s.iqr_final_regret) << ',' << fmt(s.median_exponent) << ','
            << format_double(s.median_lies) << ',' << fmt(s.median_curve_exponent) << "\n";
  }
  write_file(options.out_dir / "sweep_summary.csv", summary.str());
  return sweep;
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read trace " + path.string());
  const std::string where = path.filename().string();
  Trace trace;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw std::runtime_error(where + ": missing provenance line");
  }
  bool have_seed = false;
  for (const auto& token : split(line.substr(2), ' ')) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "spec_hash") trace.spec_hash = value;
    if (key == "seed") {
      trace.seed = static_cast<std::uint64_t>(parse_int(value, where));
      have_seed = true;
    }
  }
  if (trace.spec_hash.empty() || !have_seed) {
    throw std::runtime_error(where + ": provenance line lacks spec_hash or seed");
  }

  const std::string prefix = "t,episode,explore,policy_rev,bench_rev,cum_regret,lies_total";
  if (!std::getline(is, line) || line.rfind(prefix, 0) != 0) {
    throw std::runtime_error(where + ": unexpected header");
  }
  const auto header = split(line, ',');
  const std::size_t buyers = header.size() - 7;
  for (std::size_t i = 0; i < buyers; ++i) {
    if (header[7 + i] != "est_err_" + std::to_string(i)) {
      throw std::runtime_error(where + ": unexpected header");
    }
  }
  trace.est_err.resize(buyers);
  std::int64_t expected_t = 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string at = where + " row " + std::to_string(expected_t);
    if (cells.size() != header.size()) throw std::runtime_error(at + ": wrong column count");
    if (parse_int(cells[0], at) != expected_t) throw std::runtime_error(at + ": periods out of order");
    trace.episode.push_back(static_cast<int>(parse_int(cells[1], at)));
    trace.cumulative_regret.push_back(parse_double(cells[5], at));
    trace.lies_total.push_back(parse_int(cells[6], at));
    for (std::size_t i = 0; i < buyers; ++i) trace.est_err[i].push_back(parse_double(cells[7 + i], at));
    ++expected_t;
  }
  if (trace.episode.empty()) throw std::runtime_error(where + ": no rows");
  return trace;
}

Json cmd_analyze(const std::filesystem::path& trace_dir) {
  if (!std::filesystem::is_directory(trace_dir)) {
    throw std::runtime_error("trace directory not found: " + trace_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(trace_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("trace_", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no trace_*.csv files in " + trace_dir.string());

  Json traces = Json::array();
  std::map<std::int64_t, std::vector<const Trace*>> by_horizon;
  std::vector<Trace> parsed;
  parsed.reserve(files.size());
  for (const auto& f : files) parsed.push_back(read_trace(f));

  for (std::size_t n = 0; n < parsed.size(); ++n) {
    const Trace& tr = parsed[n];
    const auto horizon = static_cast<std::int64_t>(tr.cumulative_regret.size());
    by_horizon[horizon].push_back(&tr);
    Json jt{{"file", files[n].filename().string()},
            {"spec_hash", tr.spec_hash},
            {"seed", tr.seed},
            {"horizon", horizon},
            {"final_regret", tr.cumulative_regret.back()}};
    const auto grid = default_t_grid(horizon);
    if (grid.size() >= 2) {
      const GrowthFit g = fit_growth_exponent(tr.cumulative_regret, grid);
      jt["growth_exponent"] = optional_number(g.exponent);
      jt["exponent_status"] = g.status;
    } else {
      jt["growth_exponent"] = nullptr;
      jt["exponent_status"] = "degenerate-grid";
    }

    Json episodes = Json::array();
    std::int64_t lies_before = 0;
    for (std::size_t t = 0; t < tr.episode.size(); ++t) {
      const bool last = t + 1 == tr.episode.size() || tr.episode[t + 1] != tr.episode[t];
      if (!last) continue;
      const int k = tr.episode[t];
      const std::int64_t ell = std::int64_t{1} << (k - 1);
      double err = 0.0;
      for (const auto& col : tr.est_err) err += col[t];
      err = tr.est_err.empty() ? kNaN : err / static_cast<double>(tr.est_err.size());
      const std::int64_t lies = tr.lies_total[t] - lies_before;
      lies_before = tr.lies_total[t];
      episodes.push_back(Json{
          {"episode", k},
          {"ell", ell},
          {"est_err", number_or_null(err)},
          {"lies", lies},
          {"lies_per_log_ell",
           ell > 1 ? Json(static_cast<double>(lies) / std::log(static_cast<double>(ell))) : Json(nullptr)}});
    }
    jt["episodes"] = episodes;
    traces.push_back(jt);
  }

  Json horizons = Json::array();
  for (const auto& [horizon, group] : by_horizon) {
    std::vector<double> finals;
    for (const auto* tr : group) finals.push_back(tr->cumulative_regret.back());
    Json h{{"horizon", horizon},
           {"traces", group.size()},
           {"median_final_regret", median(finals)}};
    const auto grid = default_t_grid(horizon);
    if (grid.size() >= 2) {
      std::vector<double> dense(static_cast<std::size_t>(horizon), 0.0);
      for (auto t : grid) {
        std::vector<double> column;
        for (const auto* tr : group) column.push_back(tr->cumulative_regret[static_cast<std::size_t>(t - 1)]);
        dense[static_cast<std::size_t>(t - 1)] = median(column);
      }
      const GrowthFit g = fit_growth_exponent(dense, grid);
      h["median_curve_exponent"] = optional_number(g.exponent);
      h["median_curve_status"] = g.status;
    } else {
      h["median_curve_exponent"] = nullptr;
      h["median_curve_status"] = "degenerate-grid";
    }
    horizons.push_back(h);
  }

  Json report{{"traces", traces}, {"horizons", horizons}};
  write_file(trace_dir / "report.json", report.dump(2) + "\n");
  return report;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace reservelab
