#include "latentds/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "latentds/demogen.hpp"
#include "latentds/diffeo_fdm.hpp"
#include "latentds/ds_runtime.hpp"
#include "latentds/evalkit.hpp"
#include "latentds/spectral_latent.hpp"

namespace latentds::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::invalid_argument("write failed for '" + path + "'");
}

std::string resolve_out_dir(const PipelineConfig& cfg) {
  std::string dir = cfg.out_dir;
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  return dir;
}

struct EmbeddingChoice {
  spectral_latent::LatentEmbedding embedding;
  int copies = 0;
};

// K defaults to n+1; only that default is allowed to slide upward when the
// graph comes up short of eigenvalues. An explicit K is taken literally.
EmbeddingChoice embed_demo(const demogen::Demonstration& demo, int copies_override) {
  const int n_points = static_cast<int>(demo.n_points());
  const int n_dims = static_cast<int>(demo.n_dims());
  if (copies_override > 0) {
    return {spectral_latent::build_embedding({n_points, n_dims, copies_override}),
            copies_override};
  }
  int copies = n_dims + 1;
  for (int attempt = 0;; ++attempt, ++copies) {
    try {
      return {spectral_latent::build_embedding({n_points, n_dims, copies}), copies};
    } catch (const spectral_latent::eigenvalue_shortfall&) {
      if (attempt >= 5) throw;
    }
  }
}

int do_generate(const PipelineConfig& cfg, const std::string& kind, double c, int n_samples,
                bool n_given, std::string out_path) {
  demogen::Demonstration demo;
  if (kind == "unstable-spiral") {
    demo = demogen::unstable_spiral(c, n_samples);
  } else if (kind == "stable-spiral") {
    demo = demogen::stable_spiral(c);
    if (n_given) {
      const Eigen::Index native = demo.n_points();
      demo.points = demogen::resample_uniform(demo.points, n_samples);
      if (demo.dt && n_samples > 1) {
        demo.dt = *demo.dt * static_cast<double>(native - 1) / (n_samples - 1);
      }
      demo.velocities.reset();
    }
  } else if (kind == "archimedean") {
    demo = demogen::archimedean_spiral(n_samples);
  } else {
    throw std::invalid_argument("unknown demonstration kind '" + kind + "'");
  }
  if (out_path.empty()) {
    out_path = (fs::path(resolve_out_dir(cfg)) / (demo.label + ".csv")).string();
  } else if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  demogen::save_csv(demo, out_path);
  std::cout << "wrote " << out_path << " N=" << demo.n_points() << " n=" << demo.n_dims()
            << " label=" << demo.label << "\n";
  return kExitOk;
}

int do_fit(const PipelineConfig& cfg, const std::string& demo_path, std::string model_path,
           std::string report_path) {
  const demogen::Demonstration demo = demogen::load_csv(demo_path);
  const EmbeddingChoice choice = embed_demo(demo, cfg.copies);
  const Eigen::MatrixXd aligned = spectral_latent::align_to_demo(choice.embedding, demo.points);
  diffeo_fdm::DiffeoModel model =
      diffeo_fdm::fit(aligned, demo.points, cfg.mu, cfg.beta, cfg.max_layers, cfg.mse_stop);
  model.source_meta.provenance = "chebyshev-embedding-K" + std::to_string(choice.copies);
  model.target_meta.provenance = demo.label;

  const std::string dir = resolve_out_dir(cfg);
  if (model_path.empty()) model_path = (fs::path(dir) / "model.json").string();
  if (report_path.empty()) report_path = (fs::path(dir) / "fit_report.json").string();
  diffeo_fdm::save_model(model, model_path);

  nlohmann::json report;
  report["beta"] = model.beta;
  report["copies"] = choice.copies;
  report["demo"] = demo_path;
  report["layers"] = static_cast<int>(model.layers.size());
  report["model"] = model_path;
  report["mse"] = model.normalized_mse;
  report["mu"] = model.mu;
  report["n_dims"] = static_cast<int>(demo.n_dims());
  report["n_points"] = static_cast<int>(demo.n_points());
  write_text(report_path, report.dump(2) + "\n");

  std::cout << "fit " << demo.label << ": layers=" << model.layers.size()
            << " mse=" << model.normalized_mse << " K=" << choice.copies << "\n"
            << "wrote " << model_path << "\n"
            << "wrote " << report_path << "\n";
  return kExitOk;
}

int do_rollout(const PipelineConfig& cfg, const std::string& model_path,
               const std::vector<double>& start_vals, const std::vector<double>& perturb_vals,
               std::string trace_dir) {
  const diffeo_fdm::DiffeoModel model = diffeo_fdm::load_model(model_path);
  const Eigen::Index n = model.source_meta.attractor.size();
  if (n < 1) throw std::invalid_argument("model carries no attractor metadata");

  ds_runtime::LatentDS ds;
  ds.attractor = model.source_meta.attractor;
  ds.rate = cfg.rate;

  Eigen::VectorXd base = model.target_meta.start;
  if (!start_vals.empty()) {
    if (static_cast<Eigen::Index>(start_vals.size()) != n) {
      throw std::invalid_argument("--start expects " + std::to_string(n) + " values");
    }
    base = Eigen::Map<const Eigen::VectorXd>(start_vals.data(),
                                             static_cast<Eigen::Index>(start_vals.size()));
  }

  std::vector<Eigen::VectorXd> starts;
  if (!perturb_vals.empty()) {
    const double radius = perturb_vals[0];
    const double count_raw = perturb_vals[1];
    const double seed_raw = perturb_vals[2];
    const int count = static_cast<int>(count_raw);
    if (count < 1 || count != count_raw) throw std::invalid_argument("--perturb count must be a positive integer");
    if (seed_raw < 0 || seed_raw != std::floor(seed_raw)) {
      throw std::invalid_argument("--perturb seed must be a nonnegative integer");
    }
    starts = demogen::perturb_starts(base, radius, count, static_cast<std::uint64_t>(seed_raw));
  } else {
    starts.push_back(base);
  }

  if (trace_dir.empty()) trace_dir = resolve_out_dir(cfg);
  fs::create_directories(trace_dir);

  std::vector<ds_runtime::RolloutTrace> traces(starts.size());
  std::vector<std::string> failures(starts.size());
  const size_t workers = std::min<size_t>(std::max(cfg.jobs, 1), starts.size());
  auto run_one = [&](size_t i) {
    try {
      traces[i] = ds_runtime::rollout(model, ds, starts[i], cfg.dt, cfg.t_max, cfg.eps);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };
  if (workers <= 1) {
    for (size_t i = 0; i < starts.size(); ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    auto drain = [&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= starts.size()) break;
        run_one(i);
      }
    };
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
    for (std::thread& t : pool) t.join();
  }
  for (const std::string& failure : failures) {
    if (!failure.empty()) throw std::runtime_error(failure);
  }

  nlohmann::json summary;
  summary["traces"] = nlohmann::json::array();
  bool all_converged = true;
  const bool batch = starts.size() > 1;
  for (size_t i = 0; i < traces.size(); ++i) {
    std::string name = "trace.csv";
    if (batch) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "trace_%03zu.csv", i);
      name = buf;
    }
    const std::string path = (fs::path(trace_dir) / name).string();
    ds_runtime::save_trace(traces[i], path);
    nlohmann::json tj;
    tj["converged"] = traces[i].converged;
    tj["file"] = name;
    tj["final_distance"] = traces[i].final_distance;
    tj["steps"] = traces[i].n_samples();
    summary["traces"].push_back(tj);
    all_converged = all_converged && traces[i].converged;
  }
  summary["all_converged"] = all_converged;
  const std::string summary_path = (fs::path(trace_dir) / "rollout_summary.json").string();
  write_text(summary_path, summary.dump(2) + "\n");

  std::cout << "rolled out " << traces.size() << (traces.size() == 1 ? " trace" : " traces")
            << ", " << (all_converged ? "all converged" : "not all converged") << "\n"
            << "wrote " << summary_path << "\n";
  return kExitOk;
}

int do_eval(const PipelineConfig& cfg, const std::string& demo_path, const std::string& trace_path,
            std::string out_path) {
  const demogen::Demonstration demo = demogen::load_csv(demo_path);
  const demogen::Demonstration trace = demogen::load_csv(trace_path);
  const evalkit::DtwScore score = evalkit::fast_dtw(demo.points, trace.points, cfg.radius);

  nlohmann::json j;
  j["normalized"] = score.normalized;
  j["path_length"] = score.path_length;
  j["radius"] = score.radius;
  j["raw"] = score.raw;
  if (out_path.empty()) out_path = (fs::path(resolve_out_dir(cfg)) / "score.json").string();
  write_text(out_path, j.dump(2) + "\n");

  std::cout << "dtw raw=" << score.raw << " normalized=" << score.normalized
            << " path_length=" << score.path_length << "\n"
            << "wrote " << out_path << "\n";
  return kExitOk;
}

int do_tune(const PipelineConfig& cfg, const std::string& demo_path,
            const std::vector<double>& mus, const std::vector<double>& betas,
            const std::vector<int>& budgets, std::string out_path) {
  const demogen::Demonstration demo = demogen::load_csv(demo_path);
  const EmbeddingChoice choice = embed_demo(demo, cfg.copies);
  const Eigen::MatrixXd aligned = spectral_latent::align_to_demo(choice.embedding, demo.points);
  const evalkit::TuningReport report =
      evalkit::grid_search(demo, aligned, mus, betas, budgets, cfg.threshold, std::max(cfg.jobs, 1));

  const std::string dir = resolve_out_dir(cfg);
  if (out_path.empty()) out_path = (fs::path(dir) / "tuning.json").string();
  write_text(out_path, evalkit::to_json(report));
  const std::vector<std::string> maps = evalkit::write_heatmaps(report, dir);

  const evalkit::TuningCell& cell = report.grid[static_cast<size_t>(report.selected)];
  std::cout << "selected mu=" << cell.mu << " beta=" << cell.beta << " layers=" << cell.layers
            << " mse=" << cell.mse << " rule=" << report.selection_rule << "\n"
            << "wrote " << out_path << " and " << maps.size() << " heat-map files\n";
  return kExitOk;
}

double require_number(const nlohmann::json& j, const char* key) {
  if (!j.at(key).is_number()) throw std::invalid_argument(std::string("config: ") + key + " must be a number");
  return j.at(key).get<double>();
}

int require_int(const nlohmann::json& j, const char* key) {
  if (!j.at(key).is_number_integer()) throw std::invalid_argument(std::string("config: ") + key + " must be an integer");
  return j.at(key).get<int>();
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config parse failure: " + std::string(e.what()));
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "mu") cfg.mu = require_number(j, "mu");
    else if (key == "beta") cfg.beta = require_number(j, "beta");
    else if (key == "max_layers") cfg.max_layers = require_int(j, "max_layers");
    else if (key == "mse_stop") cfg.mse_stop = require_number(j, "mse_stop");
    else if (key == "copies") cfg.copies = require_int(j, "copies");
    else if (key == "dt") cfg.dt = require_number(j, "dt");
    else if (key == "t_max") cfg.t_max = require_number(j, "t_max");
    else if (key == "eps") cfg.eps = require_number(j, "eps");
    else if (key == "rate") cfg.rate = require_number(j, "rate");
    else if (key == "radius") cfg.radius = require_int(j, "radius");
    else if (key == "threshold") cfg.threshold = require_number(j, "threshold");
    else if (key == "jobs") cfg.jobs = require_int(j, "jobs");
    else if (key == "out_dir") {
      if (!value.is_string()) throw std::invalid_argument("config: out_dir must be a string");
      cfg.out_dir = value.get<std::string>();
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

int run(const std::vector<std::string>& args) {
  PipelineConfig cfg;
  try {
    for (size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg = load_config(args[i + 1]);
      else if (args[i].rfind("--config=", 0) == 0) cfg = load_config(args[i].substr(9));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  CLI::App app{"Stable dynamical systems from one demonstration via a Chebyshev latent embedding"};
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of defaults; explicit flags win");
  app.add_option("--out-dir", cfg.out_dir, "directory for outputs")->envname("LATENTDS_OUT_DIR");
  app.require_subcommand(1);

  std::string gen_kind, gen_out;
  double gen_c = 1.0;
  int gen_n = 500;
  CLI::App* gen = app.add_subcommand("generate", "Write a demonstration CSV");
  gen->add_option("kind", gen_kind, "unstable-spiral, stable-spiral, or archimedean")
      ->required()
      ->check(CLI::IsMember({"unstable-spiral", "stable-spiral", "archimedean"}));
  gen->add_option("--c", gen_c, "spiral stiffness parameter");
  CLI::Option* gen_n_opt = gen->add_option("--n", gen_n, "sample count (resamples stable-spiral)");
  gen->add_option("--out", gen_out, "output CSV path");

  std::string fit_demo, fit_model, fit_report;
  CLI::App* fit = app.add_subcommand("fit", "Embed a demonstration and fit the deformation");
  fit->add_option("demo", fit_demo, "demonstration CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--mu", cfg.mu, "layer contraction bound, in (0,1)");
  fit->add_option("--beta", cfg.beta, "residual step fraction, in (0,1]");
  fit->add_option("--layers", cfg.max_layers, "layer budget");
  fit->add_option("--mse-stop", cfg.mse_stop, "early-stop normalized MSE");
  fit->add_option("-K,--copies", cfg.copies, "graph copies (default: dimension + 1)");
  fit->add_option("--out-model", fit_model, "model JSON path");
  fit->add_option("--report", fit_report, "fit report JSON path");

  std::string roll_model, roll_dir;
  std::vector<double> roll_start, roll_perturb;
  CLI::App* roll = app.add_subcommand("rollout", "Integrate the learned system from a start");
  roll->add_option("model", roll_model, "model JSON")->required()->check(CLI::ExistingFile);
  roll->add_option("--start", roll_start, "start point (default: demonstration start)");
  roll->add_option("--perturb", roll_perturb, "RADIUS COUNT SEED batch around the start")
      ->expected(3);
  roll->add_option("--dt", cfg.dt, "integrator step");
  roll->add_option("--t-max", cfg.t_max, "time horizon (<=0: 50/rate)");
  roll->add_option("--eps", cfg.eps, "convergence distance");
  roll->add_option("--rate", cfg.rate, "latent contraction rate");
  roll->add_option("--jobs", cfg.jobs, "parallel rollouts");
  roll->add_option("--traces-dir", roll_dir, "directory for trace CSVs (default: out dir)");

  std::string eval_demo, eval_trace, eval_out;
  CLI::App* eval = app.add_subcommand("eval", "Score a trace against a demonstration");
  eval->add_option("demo", eval_demo, "demonstration CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("trace", eval_trace, "trace CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--radius", cfg.radius, "FastDTW refinement radius");
  eval->add_option("--out", eval_out, "score JSON path");

  std::string tune_demo, tune_out;
  std::vector<double> tune_mus{0.6, 0.7, 0.8, 0.9};
  std::vector<double> tune_betas{0.5, 0.7, 0.9};
  std::vector<int> tune_budgets{25, 50, 75};
  CLI::App* tune = app.add_subcommand("tune", "Grid-search fit hyperparameters");
  tune->add_option("demo", tune_demo, "demonstration CSV")->required()->check(CLI::ExistingFile);
  tune->add_option("--mus", tune_mus, "mu grid values");
  tune->add_option("--betas", tune_betas, "beta grid values");
  tune->add_option("--layers", tune_budgets, "layer budget grid values");
  tune->add_option("--threshold", cfg.threshold, "selection MSE threshold");
  tune->add_option("--jobs", cfg.jobs, "parallel grid cells");
  tune->add_option("-K,--copies", cfg.copies, "graph copies (default: dimension + 1)");
  tune->add_option("--out", tune_out, "report JSON path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (gen->parsed()) {
      return do_generate(cfg, gen_kind, gen_c, gen_n, gen_n_opt->count() > 0, gen_out);
    }
    if (fit->parsed()) return do_fit(cfg, fit_demo, fit_model, fit_report);
    if (roll->parsed()) return do_rollout(cfg, roll_model, roll_start, roll_perturb, roll_dir);
    if (eval->parsed()) return do_eval(cfg, eval_demo, eval_trace, eval_out);
    if (tune->parsed()) return do_tune(cfg, tune_demo, tune_mus, tune_betas, tune_budgets, tune_out);
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace latentds::cli
