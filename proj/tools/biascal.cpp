#include "biascal/config.hpp"
#include "biascal/io.hpp"
#include "biascal/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace biascal;

namespace {

Points unique_x(const Points& x) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < x.rows(); ++i) seen.insert({x.row(i).data(), x.row(i).data() + x.cols()});
  Points out(static_cast<Eigen::Index>(seen.size()), x.cols());
  Eigen::Index r = 0;
  for (const auto& v : seen) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) out(r, k) = v[static_cast<std::size_t>(k)];
    ++r;
  }
  return out;
}

void execute(const PreparedRun& run) {
  const CalibrationResult result = calibrate(run.calibration, *run.model, run.data);
  const bool extended = run.calibration.residual.extended;
  const PredictiveBand fitted =
      fitted_response(result, *run.model, run.data, extended ? unique_x(run.grid.x) : run.grid.x);
  std::optional<PredictiveBand> corrected;
  if (result.bias_fit) corrected = bias_corrected_response(result, *run.model, run.data, run.grid.x, run.grid.eta);

  // everything is computed before the first file is written
  fs::create_directories(run.output_dir);
  for (std::size_t k = 0; k < result.chains.size(); ++k)
    io::write_text(run.output_dir / ("chain_" + std::to_string(k) + ".csv"), io::chain_csv(result.chains[k]));
  io::write_text(run.output_dir / "summary.json", io::summary_json(result.summary).dump(2) + "\n");
  io::write_text(run.output_dir / "fitted_band.csv", io::band_csv(fitted));
  if (corrected) io::write_text(run.output_dir / "bias_band.csv", io::band_csv(*corrected));

  nlohmann::ordered_json meta;
  meta["config"] = run.config;
  meta["version"] = version;
  meta["seed"] = run.calibration.mcmc.seed;
  meta["wall_seconds"] = result.wall_seconds;
  meta["bias_fits"] = result.bias_fits;
  meta["failed_evaluations"] = result.failed_evaluations;
  meta["theta_map"] = result.theta_map;
  auto& chains = meta["chains"] = nlohmann::ordered_json::array();
  for (const auto& c : result.chains) chains.push_back({{"seed", c.seed}, {"acceptance_rate", c.acceptance_rate}});
  if (result.bias_fit) {
    meta["bias"]["log_likelihood"] = result.bias_fit->log_likelihood;
    meta["bias"]["jitter"] = result.bias_fit->jitter_used;
    meta["bias"]["warnings"] = result.bias_fit->warnings;
    auto& hp = meta["bias"]["hyperparameters"];
    for (const auto& p : free_parameters(result.bias_fit->bias)) hp[p.name] = p.value;
  }
  io::write_text(run.output_dir / "run_meta.json", meta.dump(2) + "\n");

  const auto& s = result.summary;
  for (std::size_t i = 0; i < s.names.size(); ++i)
    std::printf("%-8s mean %.6g  sd %.4g  hdi [%.6g, %.6g]  r_hat %.4f\n", s.names[i].c_str(), s.rows[i].mean,
                s.rows[i].sd, s.rows[i].hdi_3, s.rows[i].hdi_97, s.rows[i].r_hat);
  std::printf("wrote %s (%.1f s)\n", run.output_dir.string().c_str(), result.wall_seconds);
}

int guarded(const std::function<void()>& f) {
  try {
    f();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "biascal: config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "biascal: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "biascal: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "biascal: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian model-bias calibration (no-bias, KOH, orthogonal GP)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version);

  std::string config_path;
  auto* cal = app.add_subcommand("calibrate", "run a calibration described by a JSON config");
  cal->add_option("config", config_path, "config file")->required();

  std::string bench_name;
  std::string method = "nobias";
  std::uint64_t seed = 0;
  bool extended = false;
  std::string out;
  std::optional<std::size_t> steps, burn_in, chains;
  auto* bench = app.add_subcommand("benchmark", "run a shipped benchmark");
  bench->add_option("name", bench_name, "pedagogical, beam or influence")
      ->required()
      ->check(CLI::IsMember({"pedagogical", "beam", "influence"}));
  bench->add_option("--method", method, "nobias, koh or ogp")->check(CLI::IsMember({"nobias", "koh", "ogp"}));
  bench->add_option("--seed", seed, "base seed (dataset and chains)");
  bench->add_flag("--extended", extended, "influence only: temperature as a bias input");
  bench->add_option("--out", out, "output directory (default out/<name>_<method>)");
  bench->add_option("--steps", steps, "retained samples per chain");
  bench->add_option("--burn-in", burn_in, "discarded samples per chain");
  bench->add_option("--chains", chains, "number of chains");

  std::string gen_name;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "write a synthetic benchmark dataset");
  gen->add_option("name", gen_name, "pedagogical, beam or influence")
      ->required()
      ->check(CLI::IsMember({"pedagogical", "beam", "influence"}));
  gen->add_option("--seed", gen_seed, "generator seed")->required();
  gen->add_option("--out", gen_out, "CSV path")->required();

  std::vector<std::string> chain_files;
  std::string summary_out;
  auto* sum = app.add_subcommand("summarize", "posterior summary of chain CSVs");
  sum->add_option("chains", chain_files, "chain_<k>.csv files")->required();
  sum->add_option("--out", summary_out, "write summary JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*cal) return guarded([&] { execute(load_run(config_path)); });

  if (*bench)
    return guarded([&] {
      auto c = benchmark_config(bench_name, parse_method(method), seed, extended);
      if (steps) c["mcmc"]["steps"] = *steps;
      if (burn_in) c["mcmc"]["burn_in"] = *burn_in;
      if (chains) c["mcmc"]["chains"] = *chains;
      if (out.empty()) out = "out/" + bench_name + "_" + method + (extended ? "_extended" : "");
      c["output_dir"] = fs::absolute(out).string();
      execute(prepare_run(c, fs::current_path()));
    });

  if (*gen)
    return guarded([&] {
      const fs::path p(gen_out);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      io::write_dataset(p, generate(gen_name, gen_seed));
    });

  if (*sum)
    return guarded([&] {
      std::vector<Chain> cs;
      for (const auto& f : chain_files) cs.push_back(io::parse_chain_csv(io::read_text(f)));
      const std::string text = io::summary_json(summarize(cs)).dump(2) + "\n";
      if (summary_out.empty())
        std::cout << text;
      else
        io::write_text(summary_out, text);
    });
  return 2;
}
