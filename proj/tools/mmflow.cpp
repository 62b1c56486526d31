// Copyright 2026 The mmflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mmflow command-line driver.
//
// Exit codes: 0 success, 2 input/config error, 3 numerical failure,
// 4 I/O failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mmflow/disconnector.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/estimator.hpp"
#include "mmflow/eval.hpp"
#include "mmflow/graph_io.hpp"
#include "mmflow/report.hpp"
#include "mmflow/run_io.hpp"

namespace fs = std::filesystem;
using namespace mmflow;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::string default_output_root() {
  const char* env = std::getenv("MMFLOW_OUTPUT_ROOT");
  return env && *env ? env : "mmflow-runs";
}

std::string rel(const fs::path& p, const fs::path& base) { return p.lexically_relative(base).string(); }

// Flags that override fields of the simulation config.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> graphs;
  std::optional<std::size_t> n;
  std::vector<std::string> snr;
  std::optional<double> lambda_sparse;
  std::optional<double> lambda_joint;
  std::optional<double> alpha;
  std::optional<std::string> correction;
  std::optional<double> min_eigenvalue;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "simulation config (JSON)");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--graphs", graphs, "number of graph pairs");
    cmd->add_option("--n", n, "samples per group");
    cmd->add_option("--snr", snr, "SNR points in dB ('clean' for noise-free)");
    cmd->add_option("--lambda-sparse", lambda_sparse, "fixed sparsity penalty (default: eBIC grid)");
    cmd->add_option("--lambda-joint", lambda_joint, "fixed group penalty");
    cmd->add_option("--alpha", alpha, "significance level");
    cmd->add_option("--correction", correction, "none | bonferroni | bh");
    cmd->add_option("--min-eigenvalue", min_eigenvalue, "floor on generated precision eigenvalues");
  }

  SimulationConfig resolve() const {
    SimulationConfig cfg = config_path.empty() ? SimulationConfig{} : load_config(config_path);
    // Round-trip flags through the JSON parser so they get the same checks.
    nlohmann::json patch = nlohmann::json(config_to_json(cfg));
    if (seed) patch["master_seed"] = *seed;
    if (graphs) patch["graphs"] = *graphs;
    if (n) patch["n_per_group"] = *n;
    if (!snr.empty()) {
      auto arr = nlohmann::json::array();
      for (const auto& s : snr) {
        if (s == "clean" || s == "inf") {
          arr.push_back("clean");
          continue;
        }
        try {
          std::size_t used = 0;
          arr.push_back(std::stod(s, &used));
          if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
          throw InputError("config field 'snr_db': cannot parse '" + s + "'");
        }
      }
      patch["snr_db"] = arr;
    }
    if (lambda_sparse) patch["estimator"]["lambda_sparse"] = *lambda_sparse;
    if (lambda_joint) patch["estimator"]["lambda_joint"] = *lambda_joint;
    if (alpha) patch["estimator"]["alpha"] = *alpha;
    if (correction) patch["estimator"]["correction"] = *correction;
    if (min_eigenvalue) patch["min_precision_eigenvalue"] = *min_eigenvalue;
    return config_from_json(patch);
  }

  void record_inputs(RunManifest& m) const {
    if (!config_path.empty()) m.inputs.emplace_back(config_path, sha256_file(config_path));
  }
};

std::string run_dir_for(const std::string& out, const std::string& command,
                        const std::string& digest) {
  const fs::path dir = fs::path(out) / (command + "-" + digest.substr(0, 16));
  ensure_dir(dir.string());
  return dir.string();
}

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

nlohmann::ordered_json edges_1based(const EdgeSet& edges) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : edges) arr.push_back({e.u + 1, e.v + 1});
  return arr;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const ConfigFlags& flags, const std::string& out, std::size_t jobs, bool noisy) {
  const SimulationConfig cfg = flags.resolve();
  RunManifest m;
  m.command = "simulate";
  m.config_digest = config_digest(cfg);
  m.master_seed = cfg.master_seed;
  m.effective_config = config_to_json(cfg);
  flags.record_inputs(m);
  const std::string dir = run_dir_for(out, "simulate", m.config_digest);
  StageTimer timer(m);

  const auto cases = timer.run("generate", [&] { return make_ensemble(cfg, jobs); });
  std::vector<std::string> written;
  timer.run("write", [&] {
    for (const auto& gc : cases) {
      char name[32];
      std::snprintf(name, sizeof name, "graph_%03zu", gc.index + 1);
      const fs::path gdir = fs::path(dir) / name;
      ensure_dir(gdir.string());
      const auto put = [&](const fs::path& p, const std::string& text) {
        detail::write_file(p.string(), text);
        written.push_back(rel(p, dir));
      };
      put(gdir / "healthy.json", serialize_graph(gc.healthy));
      put(gdir / "patient.json", serialize_graph(gc.patient));
      nlohmann::ordered_json truth;
      truth["disconnectors"] = edges_1based(gc.truth);
      PlantConfig plant = gc.plant;
      truth["removed"] = edges_1based(EdgeSet(plant.remove_edges.begin(), plant.remove_edges.end()));
      truth["added"] = edges_1based(EdgeSet(plant.add_edges.begin(), plant.add_edges.end()));
      truth["precision_scale"] = gc.healthy_model.scale;
      truth["graph_seed"] = gc.graph_seed;
      truth["attempts"] = gc.attempts;
      put(gdir / "truth.json", truth.dump(2) + "\n");
      put(gdir / "healthy_precision.csv", matrix_to_csv(gc.healthy_model.precision));
      put(gdir / "patient_precision.csv", matrix_to_csv(gc.patient_model.precision));
      for (const auto* s : {&gc.healthy_samples, &gc.patient_samples}) {
        for (const auto& p : save_samples(*s, (gdir / (s->group + "_samples.csv")).string())) {
          written.push_back(rel(p, dir));
        }
      }
      if (!noisy) continue;
      for (double snr : sorted_snr(cfg.snr_db)) {
        if (std::isinf(snr)) continue;
        const fs::path sdir = gdir / ("snr_" + format_number(snr));
        ensure_dir(sdir.string());
        const auto key = snr_key(snr);
        const SampleSet* groups[] = {&gc.healthy_samples, &gc.patient_samples};
        for (std::uint64_t g = 0; g < 2; ++g) {
          const auto noisy_set = add_noise_for_snr(
              *groups[g], snr, derive_seed(cfg.master_seed, "noise", {gc.index, key, g}));
          for (const auto& p :
               save_samples(noisy_set, (sdir / (noisy_set.group + "_samples.csv")).string())) {
            written.push_back(rel(p, dir));
          }
        }
      }
    }
    const fs::path hist = fs::path(dir) / "histogram.csv";
    detail::write_file(hist.string(), histogram_csv(disconnector_histogram(cases)));
    written.push_back("histogram.csv");
    const fs::path conf = fs::path(dir) / "config.json";
    detail::write_file(conf.string(), m.effective_config.dump(2) + "\n");
    written.push_back("config.json");
    return 0;
  });
  write_manifest(m, dir, written);
  std::cout << dir << "\n";
  return 0;
}

int cmd_estimate(const std::vector<std::string>& sample_files, const std::string& data_dir,
                 const std::string& out, const EstimateOptions& opt) {
  std::vector<std::string> files = sample_files;
  if (!data_dir.empty()) {
    if (!fs::is_directory(data_dir)) throw IoError("not a directory: " + data_dir);
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
      const auto name = entry.path().filename().string();
      if (entry.path().extension() == ".csv" && name.find("_samples") != std::string::npos) {
        found.push_back(entry.path().string());
      }
    }
    std::sort(found.begin(), found.end());
    files.insert(files.end(), found.begin(), found.end());
  }
  if (files.size() < 2) {
    throw InputError("at least two group sample files are required (found " +
                     std::to_string(files.size()) + ")");
  }
  RunManifest m;
  m.command = "estimate";
  StageTimer timer(m);
  std::vector<SampleSet> groups;
  for (const auto& f : files) {
    groups.push_back(load_samples(f));
    m.inputs.emplace_back(f, sha256_file(f));
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (groups[i].group == groups[j].group) {
        groups[i].group += "_" + std::to_string(i + 1);
      }
    }
    if (groups[i].data.cols() != groups[0].data.cols()) {
      throw InputError("groups differ in the number of nodes");
    }
  }
  nlohmann::ordered_json eff;
  if (opt.lambda_sparse) {
    eff["lambda_sparse"] = *opt.lambda_sparse;
  } else {
    eff["lambda_sparse"] = nullptr;
  }
  eff["lambda_joint"] = opt.lambda_joint;
  eff["alpha"] = opt.alpha;
  eff["correction"] = correction_name(opt.correction);
  eff["standardize"] = opt.standardize;
  m.effective_config = eff;
  m.config_digest = sha256_hex(eff.dump());

  GroupGraphs est;
  try {
    est = timer.run("estimate", [&] { return estimate_group_graphs(groups, opt); });
  } catch (const SolverError& e) {
    std::cerr << "mmflow: solver failed: " << e.what() << " (primal residual "
              << e.primal_residual << ", dual residual " << e.dual_residual << ")\n";
    return kExitNumerical;
  }

  ensure_dir(out);
  std::vector<std::string> written;
  const auto put = [&](const std::string& name, const std::string& text) {
    detail::write_file((fs::path(out) / name).string(), text);
    written.push_back(name);
  };
  nlohmann::ordered_json summary;
  summary["lambda_sparse"] = est.precisions.lambda_sparse;
  summary["lambda_joint"] = est.precisions.lambda_joint;
  summary["iterations"] = est.precisions.iterations;
  summary["primal_residual"] = est.precisions.primal_residual;
  summary["dual_residual"] = est.precisions.dual_residual;
  summary["groups"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k].group;
    put(g + "_precision.csv", matrix_to_csv(est.precisions.precision[k]));
    put(g + "_pcorr.csv", matrix_to_csv(est.partial_correlations[k].values));
    put(g + "_graph.json", serialize_graph(est.graphs[k]));
    summary["groups"].push_back({{"group", g},
                                 {"samples", groups[k].data.rows()},
                                 {"edges", est.graphs[k].edge_count()},
                                 {"graph", g + "_graph.json"}});
  }
  put("estimate.json", summary.dump(2) + "\n");
  write_manifest(m, out, written);
  std::cout << out << "\n";
  return 0;
}

int cmd_disconnect(const std::string& healthy_path, const std::string& patient_path,
                   const std::string& out, bool json_stdout) {
  RunManifest m;
  m.command = "disconnect";
  StageTimer timer(m);
  const auto healthy = load_graph(healthy_path);
  const auto patient = load_graph(patient_path);
  m.inputs.emplace_back(healthy_path, sha256_file(healthy_path));
  m.inputs.emplace_back(patient_path, sha256_file(patient_path));
  const auto report = timer.run("disconnect", [&] { return find_disconnectors(healthy, patient); });
  const std::string text = report_to_text(report);
  const std::string json = report_to_json(report).dump(2) + "\n";
  if (!out.empty()) {
    ensure_dir(out);
    detail::write_file((fs::path(out) / "report.json").string(), json);
    detail::write_file((fs::path(out) / "report.txt").string(), text);
    write_manifest(m, out, {"report.json", "report.txt"});
  }
  std::cout << (json_stdout ? json : text);
  return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& out, std::size_t jobs) {
  const SimulationConfig cfg = flags.resolve();
  RunManifest m;
  m.command = "sweep";
  m.config_digest = config_digest(cfg);
  m.master_seed = cfg.master_seed;
  m.effective_config = config_to_json(cfg);
  flags.record_inputs(m);
  const std::string dir = run_dir_for(out, "sweep", m.config_digest);
  StageTimer timer(m);
  const auto cases = timer.run("generate", [&] { return make_ensemble(cfg, jobs); });
  const auto result = timer.run("sweep", [&] { return run_snr_sweep(cfg, jobs, &cases); });
  std::vector<std::string> written;
  timer.run("report", [&] {
    detail::write_file((fs::path(dir) / "records.json").string(), sweep_to_json(result).dump(2) + "\n");
    written.push_back("records.json");
    for (const auto& p : write_report(result, dir)) written.push_back(rel(p, dir));
    detail::write_file((fs::path(dir) / "config.json").string(), m.effective_config.dump(2) + "\n");
    written.push_back("config.json");
    return 0;
  });
  write_manifest(m, dir, written);

  for (const auto& rec : result.records) {
    std::cerr << "snr " << format_number(rec.snr_db) << " dB: median F "
              << format_number(rec.f_measure.median) << " (" << rec.failures() << " failed)\n";
  }
  if (result.partial) warn("every graph failed at one or more SNR points");
  std::cout << dir << "\n";
  if (result.total_failure) {
    std::cerr << "mmflow: every sweep cell failed; first error: "
              << result.records.front().cells.front().error << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_report(const std::string& records_path, std::string out) {
  std::string path = records_path;
  if (fs::is_directory(path)) path = (fs::path(path) / "records.json").string();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  const auto result = sweep_from_json(doc);
  if (out.empty()) out = fs::path(path).parent_path().string();
  if (out.empty()) out = ".";
  ensure_dir(out);
  RunManifest m;
  m.command = "report";
  m.config_digest = result.config_digest;
  m.inputs.emplace_back(path, sha256_file(path));
  std::vector<std::string> written;
  for (const auto& p : write_report(result, out)) written.push_back(rel(p, out));
  // Leave a sweep's own manifest alone when rendering in place.
  if (!fs::exists(fs::path(out) / "manifest.json")) write_manifest(m, out, written);
  std::cout << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmflow: disconnector edges between group graphs"};
  app.set_version_flag("--version", std::string(MMFLOW_VERSION));
  app.require_subcommand(1);

  const std::string root = default_output_root();

  auto* simulate = app.add_subcommand("simulate", "generate graph pairs, truths and samples");
  ConfigFlags sim_flags;
  sim_flags.attach(simulate);
  std::string sim_out = root;
  std::size_t sim_jobs = 1;
  bool sim_noisy = false;
  simulate->add_option("-o,--out", sim_out, "output root (run dir is named by config digest)");
  simulate->add_option("-j,--jobs", sim_jobs, "worker threads (0 = all cores)");
  simulate->add_flag("--noisy", sim_noisy, "also write noisy samples for each SNR point");

  auto* estimate = app.add_subcommand("estimate", "joint estimation and significance graphs");
  std::vector<std::string> est_files;
  std::string est_data;
  std::string est_out = (fs::path(root) / "estimate").string();
  std::optional<double> est_ls;
  double est_lj = 0.0;
  double est_alpha = 0.05;
  std::string est_corr = "bh";
  bool est_raw = false;
  estimate->add_option("samples", est_files, "group sample CSVs, in group order");
  estimate->add_option("-d,--data", est_data, "directory of *_samples.csv files");
  estimate->add_option("-o,--out", est_out, "output directory");
  estimate->add_option("--lambda-sparse", est_ls, "sparsity penalty (default: eBIC grid)");
  estimate->add_option("--lambda-joint", est_lj, "group penalty with --lambda-sparse");
  estimate->add_option("--alpha", est_alpha, "significance level");
  estimate->add_option("--correction", est_corr, "none | bonferroni | bh");
  estimate->add_flag("--no-standardize", est_raw, "fit on raw covariances");

  auto* disconnect = app.add_subcommand("disconnect", "find disconnector edges");
  std::string dis_h, dis_p, dis_out;
  bool dis_json = false;
  disconnect->add_option("healthy", dis_h, "reference graph (.json or edge list)")->required();
  disconnect->add_option("patient", dis_p, "comparison graph")->required();
  disconnect->add_option("-o,--out", dis_out, "write report.json and report.txt here");
  disconnect->add_flag("--json", dis_json, "print the JSON report instead of text");

  auto* sweep = app.add_subcommand("sweep", "SNR sweep of disconnector recovery");
  ConfigFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string sweep_out = root;
  std::size_t sweep_jobs = 1;
  sweep->add_option("-o,--out", sweep_out, "output root (run dir is named by config digest)");
  sweep->add_option("-j,--jobs", sweep_jobs, "worker threads (0 = all cores)");

  auto* report = app.add_subcommand("report", "render sweep tables from records.json");
  std::string rep_in, rep_out;
  report->add_option("records", rep_in, "records.json or a sweep run directory")->required();
  report->add_option("-o,--out", rep_out, "output directory (default: next to the records)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags, sim_out, resolve_jobs(sim_jobs), sim_noisy);
    if (estimate->parsed()) {
      EstimateOptions opt;
      opt.lambda_sparse = est_ls;
      opt.lambda_joint = est_lj;
      if (!(est_alpha > 0 && est_alpha <= 1)) throw InputError("--alpha must be in (0, 1]");
      opt.alpha = est_alpha;
      opt.correction = parse_correction(est_corr);
      opt.standardize = !est_raw;
      return cmd_estimate(est_files, est_data, est_out, opt);
    }
    if (disconnect->parsed()) return cmd_disconnect(dis_h, dis_p, dis_out, dis_json);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, sweep_out, resolve_jobs(sweep_jobs));
    if (report->parsed()) return cmd_report(rep_in, rep_out);
  } catch (const InputError& e) {
    std::cerr << "mmflow: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "mmflow: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "mmflow: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "mmflow: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
