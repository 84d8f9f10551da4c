// moe-lab: sampling, fitting, losses and rate experiments from the command line.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "moelab/analysis.hpp"
#include "moelab/csv_io.hpp"
#include "moelab/em.hpp"
#include "moelab/errors.hpp"
#include "moelab/harness.hpp"
#include "moelab/json_io.hpp"
#include "moelab/metrics.hpp"
#include "moelab/rng.hpp"
#include "moelab/sampling.hpp"

namespace {

using namespace moe;

constexpr int kExitArgument = 2;
constexpr int kExitDegraded = 3;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
  }
}

Activation parse_activation(const std::string& name, int p) {
  if (name == "sigmoid") return Activation::sigmoid();
  if (name == "gelu") return Activation::gelu();
  if (name == "identity") return Activation::identity();
  if (name == "power") return Activation::power(p);
  if (name.rfind("power:", 0) == 0) return Activation::power(std::stoi(name.substr(6)));
  throw ArgumentError("unknown activation '" + name + "' (sigmoid, gelu, identity, power:<p>)");
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ArgumentError("'" + tok + "' is not a number");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Fit config file: FitConfig fields plus "gate", "init" and "seed".
struct FitJob {
  FitConfig cfg;
  nlohmann::json init = nlohmann::json{{"kind", "random"}};
  std::uint64_t seed = 1;
};

FitJob parse_fit_job(const nlohmann::json& j) {
  FitJob job;
  if (!j.is_object()) throw ArgumentError("fit config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "k") job.cfg.k = v.get<std::size_t>();
    else if (k == "gate") job.cfg.gate = gate_from_json(v);
    else if (k == "max_em_iters") job.cfg.max_em_iters = v.get<int>();
    else if (k == "em_tol") job.cfg.em_tol = v.get<double>();
    else if (k == "irls_iters") job.cfg.irls_iters = v.get<int>();
    else if (k == "irls_step") job.cfg.irls_step = v.get<double>();
    else if (k == "tau_min") job.cfg.tau_min = v.get<double>();
    else if (k == "nu_min") job.cfg.nu_min = v.get<double>();
    else if (k == "pin_last_atom") job.cfg.pin_last_atom = v.get<bool>();
    else if (k == "paper_gradient") job.cfg.paper_gradient = v.get<bool>();
    else if (k == "irls_grad_tol") job.cfg.irls_grad_tol = v.get<double>();
    else if (k == "init") job.init = v;
    else if (k == "seed") job.seed = v.get<std::uint64_t>();
    else if (k != "schema") throw ArgumentError("fit config: unknown key '" + k + "'");
  }
  return job;
}

FitResult run_fit_job(const Dataset& data, const FitJob& job) {
  const nlohmann::json& init = job.init;
  const std::string kind = init.value("kind", std::string("random"));
  Philox rng(job.seed, 1);
  if (kind == "random") {
    return em_fit(data, job.cfg, InitSpec{RandomInit{init.value("scale", 1.0)}}, rng);
  }
  if (kind == "measure" || kind == "near_truth") {
    if (!init.contains("measure")) throw ArgumentError("init of kind '" + kind + "' needs a \"measure\"");
    MixingMeasure m = measure_from_json(init.at("measure")).with_gate(job.cfg.gate);
    if (job.cfg.pin_last_atom) m = m.with_pinned(true);
    if (kind == "measure") return em_fit(data, job.cfg, m);
    NearTruthInit nt{m, init.value("jitter_sd", 0.1), std::nullopt};
    if (init.contains("cell_plan")) nt.cell_plan = init.at("cell_plan").get<std::vector<std::size_t>>();
    return em_fit(data, job.cfg, InitSpec{nt}, rng);
  }
  throw ArgumentError("init.kind must be random, measure or near_truth");
}

std::string pde_report(const MixingMeasure& g, std::size_t points, std::uint64_t seed) {
  Philox rng(seed, 0);
  JsonWriter w;
  w.begin_object();
  w.key("gate").value(g.gate().label());
  w.key("points").value(points);
  w.key("atoms").begin_array(true);
  double worst1 = 0.0, worst2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Atom& a = g.atom(i);
    double m1 = 0.0, m2 = 0.0;
    Vec x(g.dim());
    for (std::size_t t = 0; t < points; ++t) {
      double mean = a.b;
      for (std::size_t u = 0; u < x.size(); ++u) {
        x[u] = rng.normal();
        mean += a.a[u] * x[u];
      }
      const double y = mean + std::sqrt(a.nu) * rng.normal();
      m1 = std::max(m1, std::abs(pde1_residual(a, g.tau(), g.gate(), x, y)));
      m2 = std::max(m2, std::abs(pde2_residual(a, g.tau(), g.gate(), x, y)));
    }
    worst1 = std::max(worst1, m1);
    worst2 = std::max(worst2, m2);
    w.begin_object();
    w.key("atom").value(i);
    w.key("max_abs_pde1").value(m1);
    w.key("max_abs_pde2").value(m2);
    w.end_object();
  }
  w.end_array();
  w.key("max_abs_pde1").value(worst1);
  w.key("max_abs_pde2").value(worst2);
  w.key("schema").value(1);
  w.end_object();
  return w.str();
}

int run(int argc, char** argv) {
  CLI::App app{"moe-lab: mixture-of-experts estimation experiments"};
  app.require_subcommand(1);

  // sample
  std::string measure_path, out_path;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  auto* sample = app.add_subcommand("sample", "Draw a dataset CSV from a measure");
  sample->add_option("--measure", measure_path, "Measure JSON")->required();
  sample->add_option("--n", n, "Sample size")->required();
  sample->add_option("--seed", seed, "Seed");
  sample->add_option("--out", out_path, "Output CSV (stdout if omitted)");

  // fit
  std::string data_path, config_path;
  auto* fit = app.add_subcommand("fit", "Fit a measure to a dataset by EM");
  fit->add_option("--data", data_path, "Dataset CSV")->required();
  fit->add_option("--config", config_path, "Fit config JSON")->required();
  fit->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  // losses
  std::string fitted_path, truth_path;
  std::vector<std::string> kinds;
  auto* losses = app.add_subcommand("losses", "Voronoi losses between a fitted and a true measure");
  losses->add_option("--fitted", fitted_path, "Fitted measure JSON")->required();
  losses->add_option("--truth", truth_path, "True measure JSON")->required();
  losses->add_option("--kind", kinds, "Loss kinds, e.g. D2 or D1(2) (repeatable)");
  losses->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  // tv
  std::string a_path, b_path;
  std::size_t n_mc = 1000;
  auto* tv = app.add_subcommand("tv", "Monte Carlo TV and Hellinger distances");
  tv->add_option("--a", a_path, "First measure JSON")->required();
  tv->add_option("--b", b_path, "Second measure JSON")->required();
  tv->add_option("--n-mc", n_mc, "Monte Carlo draws");
  tv->add_option("--seed", seed, "Seed");
  tv->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  // pde-check
  std::size_t points = 50;
  auto* pde = app.add_subcommand("pde-check", "Evaluate the temperature PDE residuals");
  pde->add_option("--measure", measure_path, "Measure JSON")->required();
  pde->add_option("--points", points, "Random (x, y) points per atom");
  pde->add_option("--seed", seed, "Seed");
  pde->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  // rbar-search
  int m = 2, r = 3, budget = 200;
  auto* rbar = app.add_subcommand("rbar-search", "Search the moment system for nontrivial solutions");
  rbar->add_option("--m", m, "Cell size")->required();
  rbar->add_option("--r", r, "Number of equations")->required();
  rbar->add_option("--budget", budget, "Random restarts");
  rbar->add_option("--seed", seed, "Seed");
  rbar->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  // indep-check
  std::string act_name = "sigmoid", w_text = "1";
  int order = 1, power_p = 1;
  std::size_t probes = 0;
  auto* indep = app.add_subcommand("indep-check", "Numerical rank test of the activation function sets");
  indep->add_option("--activation", act_name, "sigmoid, gelu, identity or power:<p>");
  indep->add_option("--p", power_p, "Exponent for --activation power");
  indep->add_option("--order", order, "1 or 2")->check(CLI::IsMember({1, 2}));
  indep->add_option("--w", w_text, "Comma-separated weight vector");
  indep->add_option("--probes", probes, "Probe count (0 = 64 x features)");
  indep->add_option("--seed", seed, "Seed");
  indep->add_option("--out", out_path, "Output JSON (stdout if omitted)");

  // experiment
  std::string profile, out_dir = ".";
  int workers = 0;
  bool quiet = false;
  auto* exp = app.add_subcommand("experiment", "Replicated fits over a sample-size grid");
  exp->add_option("--config", config_path, "Experiment config JSON")->required();
  exp->add_option("--profile", profile, "Preset overrides (desk)")->check(CLI::IsMember({"desk"}));
  exp->add_option("--out-dir", out_dir, "Directory for raw.csv, summary.csv, slopes.csv, summary.json");
  exp->add_option("--workers", workers, "Worker threads (MOE_LAB_WORKERS wins)");
  exp->add_flag("--quiet", quiet, "No progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitArgument;
  }

  if (*sample) {
    const MixingMeasure g = load_measure(measure_path);
    emit(dataset_to_csv(sample_dataset(g, {n, seed, SampleConfig::XDist::StandardNormal, 0})), out_path);
  } else if (*fit) {
    const Dataset data = load_dataset_csv(data_path);
    const FitJob job = parse_fit_job(parse_json(read_text_file(config_path), config_path));
    emit(fit_result_to_json(run_fit_job(data, job)), out_path);
  } else if (*losses) {
    const MixingMeasure g = load_measure(fitted_path);
    const MixingMeasure gs = load_measure(truth_path);
    if (kinds.empty()) kinds = {"D1(2)", "D2", "D5"};
    JsonWriter w;
    w.begin_object();
    w.key("reports").begin_array(true);
    for (const std::string& k : kinds) write_loss_report(w, eval_loss(LossKind::parse(k), g, gs));
    w.end_array();
    w.key("schema").value(1);
    w.end_object();
    emit(w.str(), out_path);
  } else if (*tv) {
    const MixingMeasure g1 = load_measure(a_path);
    const MixingMeasure g2 = load_measure(b_path);
    const McEstimate t = tv_distance(g1, g2, n_mc, seed);
    const McEstimate h = hellinger_distance(g1, g2, n_mc, seed);
    JsonWriter w;
    w.begin_object();
    w.key("n_mc").value(n_mc);
    w.key("tv").begin_object().key("value").value(t.value).key("stderr").value(t.std_error).end_object();
    w.key("hellinger").begin_object().key("value").value(h.value).key("stderr").value(h.std_error).end_object();
    w.key("schema").value(1);
    w.end_object();
    emit(w.str(), out_path);
  } else if (*pde) {
    emit(pde_report(load_measure(measure_path), points, seed), out_path);
  } else if (*rbar) {
    SearchOptions opts;
    opts.restarts = budget;
    opts.seed = seed;
    const SearchResult res = search_nontrivial({m, r}, opts);
    JsonWriter w;
    w.begin_object();
    w.key("m").value(m);
    w.key("r").value(r);
    w.key("verdict").value(res.found ? "found" : "not_found");
    w.key("best_norm").value(res.best_norm);
    w.key("restarts_used").value(res.restarts_used);
    w.key("values").numbers(res.values);
    w.key("schema").value(1);
    w.end_object();
    emit(w.str(), out_path);
  } else if (*indep) {
    const Activation act = parse_activation(act_name, power_p);
    const IndependenceResult res = independence_check(act, order, parse_vector(w_text), probes, seed);
    JsonWriter w;
    w.begin_object();
    w.key("activation").value(act.label());
    w.key("order").value(order);
    w.key("min_sv_ratio").value(res.min_sv_ratio);
    w.key("independent").value(res.independent);
    w.key("n_features").value(res.n_features);
    w.key("n_probe").value(res.n_probe);
    w.key("schema").value(1);
    w.end_object();
    emit(w.str(), out_path);
  } else if (*exp) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (profile == "desk") apply_desk_profile(cfg);
    if (workers > 0) cfg.workers = workers;
    std::filesystem::create_directories(out_dir);
    const ExperimentResult res = run_experiment(cfg, [&](std::size_t done, std::size_t total) {
      if (!quiet) std::fprintf(stderr, "\r%zu/%zu fits", done, total);
    });
    if (!quiet) std::fprintf(stderr, "\n");
    const std::filesystem::path dir(out_dir);
    emit_csv(res, (dir / "raw.csv").string());
    emit_summary(res, (dir / "summary.csv").string(), (dir / "summary.json").string());
    write_text_file((dir / "slopes.csv").string(), slopes_csv(res));
    std::cout << slopes_csv(res);
    if (res.degraded) {
      std::cerr << "experiment degraded: " << res.failures << " of " << res.tasks << " fits failed\n";
      return kExitDegraded;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const moe::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const moe::UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const moe::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad config value (" << e.what() << ")\n";
    return kExitArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
