// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fail.
// Usage: biascal_acceptance [criterion numbers...]

#include "biascal/calibration.hpp"
#include "biascal/config.hpp"
#include "biascal/io.hpp"
#include "biascal/ogp.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace biascal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
};

std::string fmt(double v, int digits = 5) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

struct Run {
  PreparedRun prepared;
  CalibrationResult result;
  double seconds;
};

Run calibrate_benchmark(const std::string& name, Method method, bool extended = false) {
  const auto t0 = Clock::now();
  PreparedRun p = prepare_run(benchmark_config(name, method, 0, extended), ".");
  CalibrationResult r = calibrate(p.calibration, *p.model, p.data);
  return {std::move(p), std::move(r), since(t0)};
}

Points rows_of(const Points& p, const std::vector<Eigen::Index>& idx) {
  Points out(static_cast<Eigen::Index>(idx.size()), p.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p.row(idx[i]);
  return out;
}

// Cached so criterion 4 can reuse the run of criterion 1.
Run& pedagogical_nobias() {
  static Run run = calibrate_benchmark("pedagogical", Method::nobias);
  return run;
}

void ac1(Outcome& o) {
  const Run& r = pedagogical_nobias();
  const auto& s = r.result.summary.at("theta");
  o.require(s.mean >= 3.28 && s.mean <= 3.38, "mean " + fmt(s.mean) + " in [3.28, 3.38]");
  o.require(s.sd <= 0.05, "sd " + fmt(s.sd) + " <= 0.05");
  o.require(r.result.chains.size() == 2 && r.result.chains[0].samples.rows() == 1000 &&
                r.result.chains[0].burn_in == 100,
            "2 chains x 1000 + 100 burn-in");
  o.require(r.seconds < 30.0, "time " + fmt(r.seconds, 3) + " s < 30 s");
}

void ac2(Outcome& o) {
  const Run r = calibrate_benchmark("pedagogical", Method::koh);
  const auto& s = r.result.summary.at("theta");
  o.require(s.mean >= 3.1 && s.mean <= 3.65, "mean " + fmt(s.mean) + " in [3.1, 3.65]");
  o.require(s.sd >= 0.2 && s.sd <= 0.5, "sd " + fmt(s.sd) + " in [0.2, 0.5]");
  o.require(s.r_hat <= 1.15, "r_hat " + fmt(s.r_hat) + " <= 1.15");
  o.require(r.seconds < 600.0, "time " + fmt(r.seconds, 3) + " s < 600 s");
}

void ac3(Outcome& o) {
  const Run r = calibrate_benchmark("pedagogical", Method::ogp);
  const auto& s = r.result.summary.at("theta");
  o.require(s.mean >= 3.42 && s.mean <= 3.62, "mean " + fmt(s.mean) + " in [3.42, 3.62]");
  o.require(s.hdi_3 >= 3.35 && s.hdi_97 <= 3.70,
            "hdi [" + fmt(s.hdi_3) + ", " + fmt(s.hdi_97) + "] within [3.35, 3.70]");
  const double l2 = l2_optimum(PedagogicalModel{}, pedagogical::truth, 0.0, 1.0, 2000, 0.0, 10.0);
  o.require(std::abs(l2 - 3.565) <= 0.005, "L2 optimum " + fmt(l2) + " = 3.565 +- 0.005");
  o.require(r.seconds < 900.0, "time " + fmt(r.seconds, 3) + " s < 900 s");
}

void ac4(Outcome& o) {
  const Run& r = pedagogical_nobias();
  const double mse = mse_optimum(*r.prepared.model, r.prepared.data, 0.0, 10.0);
  const double mean = r.result.summary.at("theta").mean;
  o.require(std::abs(mse - mean) <= 0.05, "mse optimum " + fmt(mse) + " vs posterior mean " + fmt(mean) +
                                              " (|diff| " + fmt(std::abs(mse - mean), 3) + " <= 0.05)");
}

void ac5(Outcome& o) {
  testing::Gen g(505);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    BiasModel b(g.kernel(2, true));
    b.noise_sd = g.uniform(0.05, 0.5);
    b.mean = g.normal();
    const Points x = g.points(5, g.integer(1, 3));
    const Eigen::VectorXd r = g.vector(5, 2.0);
    Eigen::MatrixXd c = serial::gram(b.kernel, x);
    c.diagonal().array() += b.noise_sd * b.noise_sd;
    const double oracle = testing::naive_log_density(c, r.array() - b.mean.value);
    const double v = log_marginal_likelihood(b, x, r);
    worst = std::max(worst, std::abs(v - oracle) / std::max(std::abs(v), std::abs(oracle)));
  }
  o.require(worst <= 1e-10, "50 instances, worst relative error " + fmt(worst, 3) + " <= 1e-10");
}

void ac6(Outcome& o) {
  testing::Gen g(606);
  double worst_identity = 0.0;
  double worst_draw = 0.0;
  int draws = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = static_cast<std::size_t>(g.integer(1, 3));
    std::vector<double> c(t), w(t), p(t);
    for (std::size_t k = 0; k < t; ++k) {
      c[k] = g.uniform(0.5, 2.0);
      w[k] = g.uniform(0.5, 6.0);
      p[k] = g.integer(1, 3);
    }
    std::vector<std::string> names;
    for (std::size_t k = 0; k < t; ++k) names.push_back("t" + std::to_string(k));
    const FunctionModel m{"random", names, [=](std::span<const double> th, std::span<const double> x) {
                            double s = 0.0;
                            for (std::size_t k = 0; k < c.size(); ++k)
                              s += c[k] * std::pow(th[k], p[k]) * std::sin(w[k] * x[0] + static_cast<double>(k));
                            return s;
                          }};
    std::vector<double> theta(t), h(t, 1e-4);
    for (auto& v : theta) v = g.uniform(0.5, 2.0);
    const Points xi = g.points(g.integer(static_cast<int>(t) + 2, 20), 1);
    const Kernel k = Kernel::matern32(g.uniform(0.5, 2.0), g.uniform(0.1, 0.6));
    const Eigen::MatrixXd F = model_gradient_fd(m, theta, xi, h).F;
    const Eigen::MatrixXd K = orthogonal_gram(k, F, xi, xi).matrix;
    const double rel = (F.transpose() * K * F).norm() / (F.squaredNorm() * gram(k, xi).norm());
    worst_identity = std::max(worst_identity, rel);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    const Eigen::MatrixXd root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    for (int d = 0; d < 5; ++d, ++draws) {
      const Eigen::VectorXd b = root * g.vector(root.cols());
      worst_draw = std::max(worst_draw, (F.transpose() * b).norm() / (F.norm() * b.norm()));
    }
  }
  o.require(worst_identity <= 1e-8, "20 instances, worst |F'KF| ratio " + fmt(worst_identity, 3) + " <= 1e-8");
  o.require(draws == 100 && worst_draw <= 1e-6,
            std::to_string(draws) + " draws, worst |F'b|/(|F||b|) " + fmt(worst_draw, 3) + " <= 1e-6");
}

void ac7(Outcome& o) {
  const auto t0 = Clock::now();
  const std::vector<Prior> priors{{"theta", NormalPrior{0.0, 1.0}}};
  const LogTarget target = [&](std::span<const double> t) {
    return log_prior(priors, t) - 0.5 * (1.0 - t[0]) * (1.0 - t[0]) - 0.5 * std::log(2.0 * M_PI);
  };
  const Chain c = metropolis_hastings(target, {0.0}, {1.0}, 20000, 1000, 7);
  const double secs = since(t0);
  const Eigen::VectorXd v = c.samples.col(0);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / (v.size() - 1.0);
  o.require(std::abs(mean - 0.5) <= 0.05, "mean " + fmt(mean) + " = 0.5 +- 0.05");
  o.require(std::abs(var - 0.5) <= 0.1, "variance " + fmt(var) + " = 0.5 +- 0.1");
  o.require(secs < 5.0, "time " + fmt(secs, 3) + " s < 5 s");
}

void ac8(Outcome& o) {
  const auto t0 = Clock::now();
  const Run nb = calibrate_benchmark("beam", Method::nobias);
  const double mse = mse_optimum(*nb.prepared.model, nb.prepared.data, 1e9, 1e11);
  const double mean = nb.result.summary.at("E").mean;
  o.require(std::abs(mean - mse) <= 0.05 * mse,
            "(a) nobias mean " + fmt(mean) + " vs mse optimum " + fmt(mse) + " (" +
                fmt(100.0 * std::abs(mean - mse) / mse, 3) + "% <= 5%)");

  const Run koh = calibrate_benchmark("beam", Method::koh);
  const PreparedRun& p = koh.prepared;
  const BiasModel& bias = koh.result.bias_fit->bias;
  const Points sensors = p.calibration.residual.scaling.apply(testing::column({10.0, 50.0}));
  const Eigen::VectorXd nv = noise_variance(bias, sensors);
  const double s = p.calibration.residual.residual_scale;
  const double ratio = std::sqrt(nv[1]) / std::sqrt(nv[0]);
  const double shape = (50.0 * 50.0 * (3.0 * beam::length - 50.0)) / (10.0 * 10.0 * (3.0 * beam::length - 10.0));
  o.require(nv[1] > nv[0] && std::abs(ratio / shape - 1.0) <= 0.3,
            "(b) noise sd x=50 " + fmt(std::sqrt(nv[1]) / s, 3) + " / x=10 " + fmt(std::sqrt(nv[0]) / s, 3) +
                " = " + fmt(ratio, 4) + " vs shape ratio " + fmt(shape, 4) + " (within 30%)");

  const PredictiveBand band = bias_corrected_response(koh.result, *p.model, p.data, p.data.x);
  int covered = 0;
  for (Eigen::Index i = 0; i < p.data.size(); ++i)
    if (std::abs(p.data.y[i] - band.mean[i]) <= 2.0 * band.sd[i]) ++covered;
  o.require(covered >= 90, "(c) 2-sd band covers " + std::to_string(covered) + "/100 >= 90");
  const double secs = since(t0);
  o.require(secs < 1800.0, "time " + fmt(secs, 3) + " s < 1800 s");
}

void ac9(Outcome& o) {
  const auto t0 = Clock::now();
  const Run plain = calibrate_benchmark("influence", Method::koh, false);
  const Run ext = calibrate_benchmark("influence", Method::koh, true);
  const Dataset& d = plain.prepared.data;
  const InfluenceModel& m = static_cast<const InfluenceModel&>(*plain.prepared.model);

  const PredictiveBand bp = bias_corrected_response(plain.result, m, d, d.x);
  const PredictiveBand be = bias_corrected_response(ext.result, m, d, d.x, d.eta);
  const double dist_plain = (bp.mean - d.y).norm();
  const double dist_ext = (be.mean - d.y).norm();
  o.require(dist_ext <= 0.01 * dist_plain, "distance with temperature " + fmt(dist_ext, 3) + " <= 0.01 x " +
                                               fmt(dist_plain, 3) + " (ratio " + fmt(dist_ext / dist_plain, 3) + ")");

  // rows of each series, in track order
  std::map<int, std::vector<Eigen::Index>> series;
  for (Eigen::Index i = 0; i < d.size(); ++i) series[d.series[static_cast<std::size_t>(i)]].push_back(i);
  bool identical = series.size() == 6;
  const auto& first = series.begin()->second;
  const Eigen::VectorXd reference = bp.mean(first);
  for (const auto& [id, idx] : series) {
    const PredictiveBand b = bias_corrected_response(plain.result, m, d, rows_of(d.x, idx));
    identical = identical && b.mean == reference && rows_of(d.x, idx) == rows_of(d.x, first);
  }
  o.require(identical, "without temperature: 6 series coincide");

  // query every track position at each end temperature
  Points xq(104, 1);
  for (Eigen::Index i = 0; i < 104; ++i) xq(i, 0) = static_cast<double>(i + 1);
  std::vector<Eigen::VectorXd> by_dt;
  for (double dt : influence::end_temperatures)
    by_dt.push_back(bias_corrected_response(ext.result, m, d, xq, Points::Constant(104, 1, dt)).mean);
  int violations = 0;
  for (std::size_t k = 1; k < by_dt.size(); ++k)
    violations += static_cast<int>((by_dt[k].array() <= by_dt[k - 1].array()).count());
  o.require(violations == 0, "with temperature: increasing in end dT at all 104 positions (" +
                                 std::to_string(violations) + " violations)");
  const double secs = since(t0);
  o.require(secs < 2700.0, "time " + fmt(secs, 3) + " s < 2700 s");
}

void ac10(Outcome& o) {
  testing::Gen g(1010);
  const Eigen::VectorXd a = g.vector(1000);
  const double r = gelman_rubin({a, a});
  o.require(r == std::sqrt(999.0 / 1000.0), "identical-chain r_hat " + fmt(r, 17) + " == sqrt(999/1000)");

  const Eigen::Index n = 10000;
  const double ess = effective_sample_size({g.vector(n)});
  o.require(ess >= 0.8 * n && ess <= 1.2 * n, "iid ess " + fmt(ess) + " in [8000, 12000]");

  // stratified standard-normal draws: one per probability cell, shuffled
  std::vector<double> z(100000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = (static_cast<double>(i) + g.uniform(0.0, 1.0)) / static_cast<double>(z.size());
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    z[i] = 0.5 * (lo + hi);
  }
  std::shuffle(z.begin(), z.end(), g.engine());
  const auto [lo, hi] = hdi(z);
  o.require(std::abs(lo + 1.88) <= 0.05 && std::abs(hi - 1.88) <= 0.05,
            "normal hdi (" + fmt(lo, 4) + ", " + fmt(hi, 4) + ") = (-1.88, 1.88) +- 0.05");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BIASCAL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void ac11(Outcome& o) {
  // Shortened chains (60 + 20 burn-in); byte identity does not depend on length.
  const fs::path root = fs::temp_directory_path() / "biascal_acceptance_determinism";
  fs::remove_all(root);
  struct Case {
    std::string name, method;
    bool extended;
  };
  const std::vector<Case> cases{{"pedagogical", "nobias", false}, {"pedagogical", "koh", false},
                                {"pedagogical", "ogp", false},    {"beam", "nobias", false},
                                {"beam", "koh", false},           {"beam", "ogp", false},
                                {"influence", "nobias", false},   {"influence", "koh", false},
                                {"influence", "ogp", false},      {"influence", "koh", true},
                                {"influence", "ogp", true}};
  int identical = 0;
  for (const auto& c : cases) {
    const std::string tag = c.name + "_" + c.method + (c.extended ? "_ext" : "");
    bool same = true;
    for (const char* rep : {"a", "b"}) {
      const std::string args = "benchmark " + c.name + " --method " + c.method + (c.extended ? " --extended" : "") +
                               " --seed 5 --steps 60 --burn-in 20 --out " + (root / tag / rep).string();
      same = same && run_cli(args) == 0;
    }
    for (const char* f : {"chain_0.csv", "chain_1.csv", "summary.json"}) {
      const fs::path a = root / tag / "a" / f;
      const fs::path b = root / tag / "b" / f;
      same = same && fs::exists(a) && fs::exists(b) && io::read_text(a) == io::read_text(b);
    }
    if (same) ++identical;
    else o.require(false, tag + " differs");
  }
  o.require(identical == static_cast<int>(cases.size()),
            std::to_string(identical) + "/" + std::to_string(cases.size()) + " benchmark configurations byte-identical");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<void(Outcome&)>>> criteria{
      {1, ac1}, {2, ac2}, {3, ac3}, {4, ac4}, {5, ac5}, {6, ac6}, {7, ac7}, {8, ac8}, {9, ac9}, {10, ac10}, {11, ac11}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::printf("AC%-2d %s  %s  (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.str().c_str(), since(t0));
    std::fflush(stdout);
  }
  std::printf("%s\n", failed == 0 ? "all criteria passed" : (std::to_string(failed) + " criteria failed").c_str());
  return failed == 0 ? 0 : 1;
}
