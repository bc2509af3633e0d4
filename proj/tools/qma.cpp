// Batch CLI for the quaternionic Monge-Ampere solver: solve / verify /
// volume subcommands over flat key = value configs.  See README.md for the
// configuration grammar, file formats, and exit codes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qma/config.hpp"
#include "qma/qmaf_io.hpp"
#include "qma/solver.hpp"
#include "qma/verification.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitVerifyFailure = 3;

struct CsvWriter {
  std::ofstream out;

  CsvWriter(const fs::path& path, const std::string& header) {
    out.open(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << header << "\n";
    out.flush();
  }

  template <class... Args>
  void row(Args&&... args) {
    bool first = true;
    ((out << (first ? "" : ","), first = false, out << args), ...);
    out << "\n";
    out.flush();  // killed runs keep a parseable prefix
  }
};

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

fs::path prepare_out_dir(const qma::RunConfig& cfg, const std::string& override_dir) {
  const fs::path dir = override_dir.empty() ? fs::path(cfg.out_dir) : fs::path(override_dir);
  fs::create_directories(dir);
  return dir;
}

int run_solve(const qma::RunConfig& cfg, const std::string& out_override) {
  const fs::path dir = prepare_out_dir(cfg, out_override);
  const qma::GridSpec grid = cfg.grid();
  if (cfg.f.empty()) throw qma::config_error("config: solve needs f.term.* or f.file");
  const qma::RealField f = qma::realize_field_spec(cfg.f, grid, "f");

  CsvWriter csv(dir / "continuity.csv",
                "t,newton_iters,residual,beta_sup,eta_sup,theta_sup,positivity_margin,mean_Pf");
  const qma::SolveReport report =
      qma::solve(f, cfg.solver, nullptr, [&](const qma::ContinuityState& s) {
        csv.row(s.t, s.newton_iters, format_sci(s.residual_norm),
                format_sci(s.monitor.beta_sup), format_sci(s.monitor.eta_sup),
                format_sci(s.monitor.theta_sup), format_sci(s.positivity_margin),
                format_sci(s.mean_pf));
      });

  if (cfg.snapshot_fields && !report.path.empty()) {
    qma::qmaf::write((dir / "solution.qmaf").string(), report.phi_mean_zero);
    qma::qmaf::write((dir / "solution_supzero.qmaf").string(), report.phi_sup_zero);
  }

  std::ofstream summary(dir / "summary.txt");
  summary << "converged = " << (report.converged ? "true" : "false") << "\n"
          << "final_residual = " << format_sci(report.final_residual) << "\n"
          << "rhs_log_constant = " << format_sci(report.rhs_log_constant) << "\n"
          << "rhs_was_rescaled = " << (report.rhs_was_rescaled ? "true" : "false") << "\n"
          << "continuity_steps = " << report.path.size() << "\n"
          << "beta_definition_discrepancy = "
          << format_sci(report.beta_definition_discrepancy) << "\n"
          << "max_discarded_mean = " << format_sci(report.max_discarded_mean) << "\n";
  if (!report.failure_reason.empty()) summary << "failure = " << report.failure_reason << "\n";

  if (!cfg.reference_phi_file.empty() && report.converged) {
    const qma::RealField reference = qma::qmaf::read_real(cfg.reference_phi_file);
    if (!(reference.grid() == grid))
      throw qma::config_error("config: reference_phi grid does not match n/N");
    const double err =
        qma::max_abs(report.phi_mean_zero - qma::mean_zero(reference));
    summary << "recovery_error = " << format_sci(err) << "\n";
    std::printf("recovery_error %s\n", format_sci(err).c_str());
  }

  std::printf("%s (steps: %zu, final residual %s)\n",
              report.converged ? "converged" : "not converged", report.path.size(),
              format_sci(report.final_residual).c_str());
  if (!report.converged) std::printf("failure: %s\n", report.failure_reason.c_str());
  return report.converged ? kExitOk : kExitNoConvergence;
}

int run_verify(const qma::RunConfig& cfg, const std::string& out_override,
               const std::string& inject) {
  const fs::path dir = prepare_out_dir(cfg, out_override);
  const qma::GridSpec grid = cfg.grid();

  qma::SuiteOptions opts;
  opts.trials = cfg.verify_trials;
  opts.amplitude = cfg.verify_amplitude;
  opts.seed = cfg.seed == 0 ? qma::SuiteOptions{}.seed : cfg.seed;
  if (inject == "jinv-sign")
    opts.defect = qma::Defect::flip_jinv_barred_sign;
  else if (inject == "assembly-sign")
    opts.defect = qma::Defect::flip_assembly_sign;
  else if (!inject.empty())
    throw qma::config_error("unknown defect injection '" + inject + "'");

  struct Check {
    std::string name;
    double violation;
    double threshold;
  };
  std::vector<Check> checks;

  for (const auto& r : qma::run_identity_suite(grid, opts))
    checks.push_back({r.name, r.max_violation, cfg.verify_threshold});

  std::mt19937_64 rng(opts.seed);
  checks.push_back({"det = Pf^2", qma::det_pf_battery({2, 4, 6, 8}, cfg.verify_det_pf_count, rng),
                    1e-10});
  const auto derivatives = qma::pf_derivative_battery(6, cfg.verify_derivative_count, rng);
  checks.push_back({"log Pf first derivative", derivatives.max_first, 1e-7});
  checks.push_back({"log Pf second derivative", derivatives.max_second, 1e-5});

  {
    std::vector<qma::ManufacturedCase> cases;
    const double amplitude = grid.n == 1 ? 0.04 : 0.02;
    for (int i = 0; i < 3; ++i) {
      const int terms = 1 + i % 2;
      cases.push_back(qma::make_case(grid.n, grid.points_per_axis, amplitude / terms,
                                     qma::random_mode_set(grid, terms, rng)));
    }
    checks.push_back({"moore route = pfaffian route",
                      qma::route_equivalence_battery(cases), 1e-9});
  }

  CsvWriter csv(dir / "verify.csv", "check,max_violation,threshold,status");
  bool all_ok = true;
  std::string first_failure;
  for (const Check& c : checks) {
    const bool ok = c.violation <= c.threshold;
    if (!ok && all_ok) first_failure = c.name;
    all_ok = all_ok && ok;
    csv.row('"' + c.name + '"', format_sci(c.violation), format_sci(c.threshold),
            ok ? "pass" : "FAIL");
    std::printf("%-34s %s (max %.3e, threshold %.1e)\n", c.name.c_str(),
                ok ? "pass" : "FAIL", c.violation, c.threshold);
  }
  if (!all_ok) {
    std::printf("verification failed: %s\n", first_failure.c_str());
    return kExitVerifyFailure;
  }
  return kExitOk;
}

int run_volume(const qma::RunConfig& cfg, const std::string& out_override) {
  const fs::path dir = prepare_out_dir(cfg, out_override);
  const qma::GridSpec grid = cfg.grid();
  if (cfg.sigma.empty()) throw qma::config_error("config: volume needs sigma.term.* or sigma.file");

  // target volume density: 1 + terms (or file), positive, normalized to mean 1
  qma::RealField sigma = qma::realize_field_spec(cfg.sigma, grid, "sigma");
  if (cfg.sigma.file.empty())
    for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] += 1.0;
  for (std::size_t i = 0; i < sigma.size(); ++i)
    if (!(sigma[i] > 0.0))
      throw qma::config_error("config: sigma must be positive everywhere");
  const double sigma_mean = qma::mean(sigma);
  sigma *= 1.0 / sigma_mean;

  // the density prescription in terms of the data: f = log(sigma) / 2
  qma::RealField f(grid);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.5 * std::log(sigma[i]);

  CsvWriter csv(dir / "continuity.csv",
                "t,newton_iters,residual,beta_sup,eta_sup,theta_sup,positivity_margin,mean_Pf");
  const qma::SolveReport report =
      qma::solve(f, cfg.solver, nullptr, [&](const qma::ContinuityState& s) {
        csv.row(s.t, s.newton_iters, format_sci(s.residual_norm),
                format_sci(s.monitor.beta_sup), format_sci(s.monitor.eta_sup),
                format_sci(s.monitor.theta_sup), format_sci(s.positivity_margin),
                format_sci(s.mean_pf));
      });

  std::ofstream summary(dir / "summary.txt");
  summary << "converged = " << (report.converged ? "true" : "false") << "\n"
          << "sigma_normalization = " << format_sci(sigma_mean) << "\n"
          << "volume_ratio_constant_c_n = "
          << format_sci(qma::canonical_volume_constant(grid.n)) << "\n";

  if (!report.converged) {
    summary << "failure = " << report.failure_reason << "\n";
    std::printf("not converged: %s\n", report.failure_reason.c_str());
    return kExitNoConvergence;
  }

  // achieved density: Pf^2 rescaled by the normalization applied to e^f
  const qma::StandardModel model(grid.n);
  const qma::RealField pf = qma::qma_pfaffian_route(report.phi_mean_zero, model);
  const double scale = std::exp(-2.0 * report.rhs_log_constant);
  double deviation = 0.0;
  qma::RealField achieved(grid);
  for (std::size_t i = 0; i < pf.size(); ++i) {
    achieved[i] = pf[i] * pf[i] * scale;
    deviation = std::max(deviation, std::abs(achieved[i] - sigma[i]));
  }
  const double form_scale = std::exp(-report.rhs_log_constant / grid.n);

  if (cfg.snapshot_fields) {
    qma::qmaf::write((dir / "solution.qmaf").string(), report.phi_mean_zero);
    qma::qmaf::write((dir / "achieved_density.qmaf").string(), achieved);
  }
  summary << "form_scale_a = " << format_sci(form_scale) << "\n"
          << "max_density_deviation = " << format_sci(deviation) << "\n";
  std::printf("converged (max density deviation %s, form scale %s)\n",
              format_sci(deviation).c_str(), format_sci(form_scale).c_str());
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"quaternionic Monge-Ampere operator toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, inject;

  CLI::App* solve = app.add_subcommand("solve", "solve (Omega + ddJ phi)^n = e^f Omega^n");
  solve->add_option("--config", config_path, "configuration file")->required();
  solve->add_option("--out", out_dir, "output directory (overrides config)");

  CLI::App* verify = app.add_subcommand("verify", "run the verification batteries");
  verify->add_option("--config", config_path, "configuration file")->required();
  verify->add_option("--out", out_dir, "output directory (overrides config)");
  verify->add_option("--inject", inject,
                     "test hook: inject a deliberate defect (jinv-sign, assembly-sign)");

  CLI::App* volume = app.add_subcommand("volume", "prescribe the hermitian volume density");
  volume->add_option("--config", config_path, "configuration file")->required();
  volume->add_option("--out", out_dir, "output directory (overrides config)");

  CLI11_PARSE(app, argc, argv);

  try {
    const qma::RunConfig cfg = qma::parse_config_file(config_path);
    if (solve->parsed()) return run_solve(cfg, out_dir);
    if (verify->parsed()) return run_verify(cfg, out_dir, inject);
    if (volume->parsed()) return run_volume(cfg, out_dir);
  } catch (const qma::config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
