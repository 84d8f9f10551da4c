#include "moelab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "moelab/csv_io.hpp"
#include "moelab/errors.hpp"
#include "moelab/json_io.hpp"
#include "moelab/rng.hpp"
#include "moelab/sampling.hpp"

namespace moe {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ArgumentError(where + ": unknown key '" + k + "'");
}

double get_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ArgumentError(where + " must be a number");
  return j.get<double>();
}

long long get_integer(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ArgumentError(where + " must be an integer");
  return j.get<long long>();
}

bool get_bool(const nlohmann::json& j, const std::string& where) {
  if (!j.is_boolean()) throw ArgumentError(where + " must be true or false");
  return j.get<bool>();
}

std::uint64_t get_seed(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 0);
    if (!s.empty() && end && *end == '\0') return v;
  }
  throw ArgumentError("seed must be a nonnegative integer or an integer string");
}

void read_fit(const nlohmann::json& j, FitConfig& fit) {
  reject_unknown(j,
                 {"k", "max_em_iters", "em_tol", "irls_iters", "irls_step", "tau_min", "nu_min", "pin_last_atom",
                  "paper_gradient", "irls_grad_tol"},
                 "fit");
  if (j.contains("k")) fit.k = static_cast<std::size_t>(get_integer(j["k"], "fit.k"));
  if (j.contains("max_em_iters")) fit.max_em_iters = static_cast<int>(get_integer(j["max_em_iters"], "fit.max_em_iters"));
  if (j.contains("em_tol")) fit.em_tol = get_number(j["em_tol"], "fit.em_tol");
  if (j.contains("irls_iters")) fit.irls_iters = static_cast<int>(get_integer(j["irls_iters"], "fit.irls_iters"));
  if (j.contains("irls_step")) fit.irls_step = get_number(j["irls_step"], "fit.irls_step");
  if (j.contains("tau_min")) fit.tau_min = get_number(j["tau_min"], "fit.tau_min");
  if (j.contains("nu_min")) fit.nu_min = get_number(j["nu_min"], "fit.nu_min");
  if (j.contains("pin_last_atom")) fit.pin_last_atom = get_bool(j["pin_last_atom"], "fit.pin_last_atom");
  if (j.contains("paper_gradient")) fit.paper_gradient = get_bool(j["paper_gradient"], "fit.paper_gradient");
  if (j.contains("irls_grad_tol")) fit.irls_grad_tol = get_number(j["irls_grad_tol"], "fit.irls_grad_tol");
}

std::string seed_hex(std::uint64_t s) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(s));
  return buf;
}

FitConfig effective_fit(const ExperimentConfig& cfg) {
  FitConfig fit = cfg.fit;
  fit.k = cfg.fitted_k();
  fit.gate = cfg.gate;
  return fit;
}

}  // namespace

MixingMeasure reference_truth(GateSpec gate) {
  std::vector<Atom> atoms{{0.0, {-10.0}, {-1.0}, 2.0, 0.3}, {0.0, {0.0}, {1.0}, 2.0, 0.4}};
  return MixingMeasure(std::move(atoms), 0.5, gate, true);
}

std::vector<std::size_t> log_grid(double lo, double hi, int count) {
  if (!(lo >= 1.0) || !(hi >= lo) || count < 1) throw ArgumentError("log grid needs 1 <= lo <= hi and count >= 1");
  std::vector<std::size_t> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    const auto v = static_cast<std::size_t>(std::llround(lo * std::pow(hi / lo, t)));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw ArgumentError("n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] == 0) throw ArgumentError("n_grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ArgumentError("n_grid must be strictly ascending");
  }
  if (replications < 1) throw ArgumentError("replications must be at least 1");
  if (losses.empty()) throw ArgumentError("at least one loss kind is required");
  if (workers < 0) throw ArgumentError("workers must be nonnegative");
  if (!(jitter_sd >= 0.0)) throw ArgumentError("jitter_sd must be nonnegative");
  if (fit.k != fitted_k() && fit.k != FitConfig{}.k)
    throw ArgumentError("fit.k = " + std::to_string(fit.k) + " contradicts the setting (k = " +
                        std::to_string(fitted_k()) + ")");
  const std::size_t largest_cell = fitted_k() - truth.size() + 1;
  for (const LossKind& l : losses) {
    const bool needs_rbar = l.family == LossKind::Family::D4 || l.family == LossKind::Family::D6;
    if (needs_rbar && largest_cell > 3)
      throw ArgumentError(l.label() + " needs cells of at most 3 atoms; this setting allows " +
                          std::to_string(largest_cell));
  }
  if (n_grid.front() < 10 * fitted_k()) throw ArgumentError("every n must be at least 10 * k");
}

void apply_desk_profile(ExperimentConfig& cfg) {
  cfg.n_grid = log_grid(1e3, 2e4, 10);
  cfg.replications = 10;
  cfg.fit.max_em_iters = 300;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"truth", "setting", "gate", "n_grid", "replications", "losses", "fit", "jitter_sd", "seed", "workers",
                  "profile", "schema"},
                 "experiment config");
  ExperimentConfig cfg;
  if (j.contains("gate")) cfg.gate = gate_from_json(j["gate"]);
  if (j.contains("truth")) cfg.truth = measure_from_json(j["truth"]);
  cfg.truth = cfg.truth.with_gate(cfg.gate);
  {
    const Atom& last = cfg.truth.atoms().back();
    const bool zero = last.beta0 == 0.0 &&
                      std::all_of(last.beta1.begin(), last.beta1.end(), [](double v) { return v == 0.0; });
    cfg.truth = cfg.truth.with_pinned(zero);
  }
  if (j.contains("setting")) {
    const auto& s = j["setting"];
    if (s == "exact") cfg.setting = ExperimentConfig::Setting::Exact;
    else if (s == "over") cfg.setting = ExperimentConfig::Setting::Over;
    else throw ArgumentError("setting must be \"exact\" or \"over\"");
  }
  if (j.contains("n_grid")) {
    if (!j["n_grid"].is_array()) throw ArgumentError("n_grid must be an array of integers");
    cfg.n_grid.clear();
    for (const auto& v : j["n_grid"]) {
      const long long n = get_integer(v, "n_grid entry");
      if (n <= 0) throw ArgumentError("n_grid entries must be positive");
      cfg.n_grid.push_back(static_cast<std::size_t>(n));
    }
  }
  if (j.contains("replications")) cfg.replications = static_cast<int>(get_integer(j["replications"], "replications"));
  if (j.contains("losses")) {
    if (!j["losses"].is_array()) throw ArgumentError("losses must be an array of strings");
    cfg.losses.clear();
    for (const auto& v : j["losses"]) {
      if (!v.is_string()) throw ArgumentError("losses must be an array of strings");
      cfg.losses.push_back(LossKind::parse(v.get<std::string>()));
    }
  }
  if (j.contains("fit")) read_fit(j["fit"], cfg.fit);
  if (j.contains("jitter_sd")) cfg.jitter_sd = get_number(j["jitter_sd"], "jitter_sd");
  if (j.contains("seed")) cfg.seed = get_seed(j["seed"]);
  if (j.contains("workers")) cfg.workers = static_cast<int>(get_integer(j["workers"], "workers"));
  if (j.contains("profile")) {
    if (j["profile"] != "desk") throw ArgumentError("profile must be \"desk\"");
    apply_desk_profile(cfg);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(parse_json(read_text_file(path), path));
}

ReplicationOutcome run_replication(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
  const FitConfig fit = effective_fit(cfg);
  const Dataset data = sample_dataset(cfg.truth, {n, seed, SampleConfig::XDist::StandardNormal, 0});
  Philox init_rng(seed, 1);
  NearTruthInit init{cfg.truth, cfg.jitter_sd, std::nullopt};
  ReplicationOutcome out{em_fit(data, fit, InitSpec{init}, init_rng), {}};
  for (const LossKind& l : cfg.losses) out.losses.push_back(eval_loss(l, out.fit.measure, cfg.truth).value);
  return out;
}

int resolve_workers(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("MOE_LAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw ArgumentError("MOE_LAB_WORKERS must be a positive integer");
  }
  if (cfg.workers > 0) return cfg.workers;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(std::size_t, std::size_t)>& progress) {
  cfg.validate();
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  const std::size_t tasks = cfg.n_grid.size() * reps;

  struct Slot {
    bool ok = false;
    std::string error;
    int iters = 0;
    bool converged = false;
    bool degenerate = false;
    std::vector<double> losses;
  };
  std::vector<Slot> slots(tasks);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t ni = t / reps;
      const std::size_t rep = t % reps;
      Slot& slot = slots[t];
      try {
        const ReplicationOutcome r = run_replication(cfg, cfg.n_grid[ni], derive_seed(cfg.seed, ni, rep));
        slot.iters = r.fit.iters;
        slot.converged = r.fit.converged;
        slot.degenerate = r.fit.weight_capped;
        slot.losses = r.losses;
        slot.ok = std::all_of(r.losses.begin(), r.losses.end(), [](double v) { return std::isfinite(v); });
        if (!slot.ok) slot.error = "non-finite loss";
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mu);
        progress(d, tasks);
      }
    }
  };
  const int n_workers = std::min<int>(resolve_workers(cfg), static_cast<int>(std::max<std::size_t>(tasks, 1)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult res;
  res.tasks = tasks;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t ni = t / reps;
    const std::size_t rep = t % reps;
    const Slot& slot = slots[t];
    const bool usable = slot.ok && !slot.degenerate;
    if (slot.ok && slot.degenerate) ++res.degenerate;
    if (!slot.ok) {
      ++res.failures;
      res.failure_messages.push_back("n=" + std::to_string(cfg.n_grid[ni]) + " rep=" + std::to_string(rep) + ": " +
                                     slot.error);
    }
    for (std::size_t l = 0; l < cfg.losses.size(); ++l) {
      ExperimentRow row;
      row.n = cfg.n_grid[ni];
      row.replication = static_cast<int>(rep);
      row.loss_kind = cfg.losses[l].label();
      row.value = usable ? slot.losses[l] : nan;
      row.em_iters = slot.iters;
      row.converged = slot.ok && slot.converged;
      row.seed = derive_seed(cfg.seed, ni, rep);
      res.rows.push_back(std::move(row));
    }
  }
  res.degraded = 10 * res.failures > tasks;
  res.aggregates = aggregate_rows(res.rows);
  res.slopes = fit_slopes(res.aggregates);
  return res;
}

std::vector<Aggregate> aggregate_rows(const std::vector<ExperimentRow>& rows) {
  std::vector<Aggregate> out;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
  std::vector<std::pair<std::string, std::size_t>> order;
  for (const ExperimentRow& r : rows) {
    const auto key = std::make_pair(r.loss_kind, r.n);
    auto it = groups.find(key);
    if (it == groups.end()) {
      order.push_back(key);
      it = groups.emplace(key, std::vector<double>{}).first;
    }
    if (std::isfinite(r.value)) it->second.push_back(r.value);
  }
  // Loss kinds in first-seen order, n ascending within each.
  std::vector<std::string> kinds;
  for (const auto& k : order)
    if (std::find(kinds.begin(), kinds.end(), k.first) == kinds.end()) kinds.push_back(k.first);
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    const auto ia = std::find(kinds.begin(), kinds.end(), a.first) - kinds.begin();
    const auto ib = std::find(kinds.begin(), kinds.end(), b.first) - kinds.begin();
    return ia != ib ? ia < ib : a.second < b.second;
  });
  for (const auto& key : order) {
    const auto& v = groups[key];
    Aggregate a;
    a.loss_kind = key.first;
    a.n = key.second;
    a.count = v.size();
    if (!v.empty()) {
      double s = 0.0;
      for (double x : v) s += x;
      a.mean = s / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - a.mean) * (x - a.mean);
      a.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    } else {
      a.mean = std::numeric_limits<double>::quiet_NaN();
      a.sd = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(a);
  }
  return out;
}

std::vector<SlopeRow> fit_slopes(const std::vector<Aggregate>& aggregates) {
  std::vector<SlopeRow> out;
  std::vector<std::string> kinds;
  for (const Aggregate& a : aggregates)
    if (std::find(kinds.begin(), kinds.end(), a.loss_kind) == kinds.end()) kinds.push_back(a.loss_kind);
  for (const std::string& k : kinds) {
    std::vector<std::pair<double, double>> pts;
    for (const Aggregate& a : aggregates)
      if (a.loss_kind == k && a.count > 0 && a.mean > 0.0) pts.emplace_back(static_cast<double>(a.n), a.mean);
    if (pts.size() < 2) continue;
    out.push_back({k, loglog_fit(pts)});
  }
  return out;
}

std::string raw_csv(const ExperimentResult& result) {
  std::string out = "n,replication,loss_kind,value,em_iters,converged,seed_hex\n";
  for (const ExperimentRow& r : result.rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.replication) + "," + r.loss_kind + "," +
           (std::isfinite(r.value) ? format_double(r.value) : std::string()) + "," + std::to_string(r.em_iters) + "," +
           (r.converged ? "true" : "false") + "," + seed_hex(r.seed) + "\n";
  }
  return out;
}

std::string summary_csv(const ExperimentResult& result) {
  std::string out = "loss_kind,n,mean,sd,count\n";
  for (const Aggregate& a : result.aggregates) {
    const bool has = a.count > 0;
    out += a.loss_kind + "," + std::to_string(a.n) + "," + (has ? format_double(a.mean) : std::string()) + "," +
           (has ? format_double(a.sd) : std::string()) + "," + std::to_string(a.count) + "\n";
  }
  return out;
}

std::string slopes_csv(const ExperimentResult& result) {
  std::string out = "loss_kind,slope,stderr,n_points\n";
  for (const SlopeRow& s : result.slopes)
    out += s.loss_kind + "," + format_double(s.fit.slope) + "," + format_double(s.fit.stderr_slope) + "," +
           std::to_string(s.fit.points.size()) + "\n";
  return out;
}

std::string summary_json(const ExperimentResult& result) {
  JsonWriter w;
  w.begin_object();
  w.key("tasks").value(result.tasks);
  w.key("failures").value(result.failures);
  w.key("degenerate").value(result.degenerate);
  w.key("degraded").value(result.degraded);
  w.key("slopes").begin_array(true);
  for (const SlopeRow& s : result.slopes) {
    w.begin_object();
    w.key("loss_kind").value(s.loss_kind);
    w.key("slope").value(s.fit.slope);
    w.key("intercept").value(s.fit.intercept);
    w.key("stderr").value(s.fit.stderr_slope);
    w.key("n_points").value(s.fit.points.size());
    w.end_object();
  }
  w.end_array();
  w.key("failure_messages").begin_array(true);
  for (const std::string& m : result.failure_messages) w.value(m);
  w.end_array();
  w.key("schema").value(1);
  w.end_object();
  return w.str();
}

void emit_csv(const ExperimentResult& result, const std::string& path) { write_text_file(path, raw_csv(result)); }

void emit_summary(const ExperimentResult& result, const std::string& path, const std::string& json_path) {
  write_text_file(path, summary_csv(result));
  write_text_file(json_path, summary_json(result));
}

}  // namespace moe
