// msk — replica-symmetric analysis and finite-N simulation for the
// multi-species SK spin glass.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msk/covariance.hpp"
#include "msk/json_io.hpp"
#include "msk/parallel.hpp"
#include "msk/parisi.hpp"
#include "msk/rs_solver.hpp"
#include "msk/simulator.hpp"
#include "msk/spectral_phase.hpp"
#include "msk/verify.hpp"

namespace {

struct Range {
  double lo = 0.0, hi = 0.0;
  int n = 1;
};

Range parse_range(const std::string& text) {
  Range r;
  char colon1 = 0, colon2 = 0;
  std::istringstream is(text);
  if (!(is >> r.lo >> colon1 >> r.hi >> colon2 >> r.n) || colon1 != ':' || colon2 != ':')
    throw CLI::ValidationError("range must be lo:hi:count, got '" + text + "'");
  if (r.n < 1 || r.hi < r.lo) throw CLI::ValidationError("range must satisfy lo <= hi, count >= 1");
  return r;
}

double range_at(const Range& r, int i) {
  if (r.n == 1) return r.lo;
  return r.lo + (r.hi - r.lo) * i / (r.n - 1);
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content << "\n";
  else
    msk::atomic_write(out_path, content);
}

msk::json wrap(const msk::json& config, msk::json result) {
  return msk::json{{"schema_version", msk::kSchemaVersion},
                   {"config", config},
                   {"result", std::move(result)}};
}

msk::SpeciesStructure load_model_checked(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    std::cerr << "model file not found: " << path << "\n";
    std::exit(2);
  }
  return msk::load_model(path);
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-species SK model: RS solver, phase diagram, overlap covariance, "
               "Parisi functional, finite-N simulation"};
  app.set_help_flag("--help", "print help");  // frees -h / --h for the field strength
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: MSK_THREADS or all cores)");

  std::string model_path, out_path;
  double beta = 0.5, h = 0.0, tol = 1e-12;

  auto add_common = [&](CLI::App* cmd, bool need_model = true) {
    cmd->set_help_flag("--help", "print help");
    auto* opt = cmd->add_option("--model", model_path, "model spec JSON file");
    if (need_model) opt->required();
    cmd->add_option("--out", out_path, "output file (atomic write); stdout when absent");
  };

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "solve the RS fixed-point system");
  add_common(solve);
  std::string method = "auto";
  bool scan = false;
  solve->add_option("--beta", beta, "inverse temperature")->required();
  solve->add_option("--h", h, "external field");
  solve->add_option("--method", method, "picard|newton|auto")
      ->check(CLI::IsMember({"picard", "newton", "auto"}));
  solve->add_option("--tol", tol, "fixed-point residual tolerance");
  solve->add_flag("--scan", scan, "append a grid-scan root census (m <= 3)");

  // ---- phase ----
  auto* phase = app.add_subcommand("phase", "phase classification over a (beta,h) grid");
  add_common(phase);
  std::string beta_range = "0.1:2:20", h_range = "0:1:11";
  phase->add_option("--beta-range", beta_range, "lo:hi:count");
  phase->add_option("--h-range", h_range, "lo:hi:count");

  // ---- covariance ----
  auto* cov = app.add_subcommand("covariance", "asymptotic overlap covariance Sigma(0..2)");
  add_common(cov);
  cov->add_option("--beta", beta, "inverse temperature")->required();
  cov->add_option("--h", h, "external field");

  // ---- parisi ----
  auto* parisi = app.add_subcommand("parisi", "Parisi functional and free-energy CLT parameters");
  add_common(parisi);
  int kLevels = -1;
  std::string zeta_list, q_list;
  parisi->add_option("--beta", beta, "inverse temperature")->required();
  parisi->add_option("--h", h, "external field");
  parisi->add_option("--k", kLevels, "RSB levels; omit for the RS point evaluation");
  parisi->add_option("--zeta", zeta_list, "k interior zeta values, comma separated");
  parisi->add_option("--q", q_list,
                     "m*(k+1) q values for levels 1..k+1, species-major, comma separated");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "finite-N Gibbs simulation and overlap moments");
  add_common(sim);
  int N = 12, samples = 100;
  uint64_t seed = 1;
  bool use_mcmc = false;
  int sweeps = 2000, replicas = 8;
  sim->add_option("--beta", beta, "inverse temperature")->required();
  sim->add_option("--h", h, "external field");
  sim->add_option("--N", N, "system size")->required();
  sim->add_option("--samples", samples, "disorder samples");
  sim->add_option("--seed", seed, "base seed");
  sim->add_flag("--mcmc", use_mcmc, "Metropolis + replica exchange instead of enumeration");
  sim->add_option("--sweeps", sweeps, "MCMC sweeps");
  sim->add_option("--replicas", replicas, "temperature-ladder size");

  // ---- verify ----
  auto* verify = app.add_subcommand("verify", "theory-vs-simulation acceptance battery");
  add_common(verify, /*need_model=*/false);
  bool quick = false;
  verify->add_flag("--quick", quick, "reduced simulation sizes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const msk::SpeciesStructure s = load_model_checked(model_path);
      const msk::ModelParams p{beta, h};
      msk::SolverOptions opt;
      opt.tol = tol;
      msk::RsSolution sol = method == "picard"  ? msk::solve_picard(s, p, opt)
                            : method == "newton" ? msk::solve_newton(s, p, opt)
                                                 : msk::solve_auto(s, p, opt);
      msk::json result = msk::to_json(sol);
      result["beta_c"] = msk::beta_c(s);
      result["beta_at"] = msk::beta_at(s, sol);
      if (scan) {
        msk::json roots = msk::json::array();
        for (const auto& r : msk::grid_scan_roots(s, p, 15, opt)) roots.push_back(msk::to_json(r));
        result["scan_roots"] = roots;
      }
      const msk::json config{{"command", "solve"}, {"model", msk::model_to_json(s)},
                             {"beta", beta},       {"h", h},
                             {"method", method},   {"tol", tol}};
      emit(out_path, wrap(config, result).dump(2));
    } else if (*phase) {
      const msk::SpeciesStructure s = load_model_checked(model_path);
      const Range br = parse_range(beta_range), hr = parse_range(h_range);
      std::vector<msk::PhasePoint> points(br.n * hr.n);
      msk::parallel_for(br.n * hr.n, threads, [&](int idx) {
        const double b = range_at(br, idx / hr.n);
        const double hh = range_at(hr, idx % hr.n);
        points[idx] = msk::classify_phase(s, msk::ModelParams{b, hh});
      });
      std::ostringstream csv;
      csv << "beta,h,beta_c,beta_0,beta_at,region,conjectural\n";
      for (const auto& pt : points) {
        csv << msk::format_float(pt.beta) << ',' << msk::format_float(pt.h) << ','
            << msk::format_float(pt.beta_c) << ',' << msk::format_float(pt.beta_0) << ','
            << msk::format_float(pt.beta_at) << ',' << to_string(pt.region) << ','
            << (pt.conjectural ? 1 : 0) << '\n';
      }
      emit(out_path, csv.str());
    } else if (*cov) {
      const msk::SpeciesStructure s = load_model_checked(model_path);
      const msk::ModelParams p{beta, h};
      const msk::RsSolution sol = msk::solve_auto(s, p);
      const msk::OverlapCovariance c = msk::sigma_closed_form(s, sol, beta);
      msk::json result = msk::to_json(c);
      result["solution"] = msk::to_json(sol);
      result["stable"] = true;
      const msk::json config{{"command", "covariance"},
                             {"model", msk::model_to_json(s)},
                             {"beta", beta},
                             {"h", h}};
      emit(out_path, wrap(config, result).dump(2));
    } else if (*parisi) {
      const msk::SpeciesStructure s = load_model_checked(model_path);
      const msk::ModelParams p{beta, h};
      const msk::RsSolution sol = msk::solve_auto(s, p);
      msk::json result;
      if (kLevels < 0) {
        msk::Vector zeta(2);
        zeta << 0.0, 1.0;
        msk::Matrix q(s.m, 3);
        q.col(0).setZero();
        q.col(1) = sol.q;
        q.col(2).setOnes();
        result["parisi_value"] =
            msk::evaluate_parisi(s, p, msk::ParisiSequences::make(0, zeta, q), 32);
        result["k"] = 0;
      } else {
        const auto zs = parse_csv_doubles(zeta_list);
        const auto qs = parse_csv_doubles(q_list);
        if (static_cast<int>(zs.size()) != kLevels)
          throw msk::InvalidSequence("--zeta must list k values");
        if (static_cast<int>(qs.size()) != s.m * (kLevels + 1))
          throw msk::InvalidSequence("--q must list m*(k+1) values");
        msk::Vector zeta(kLevels + 2);
        zeta(0) = 0.0;
        for (int i = 0; i < kLevels; ++i) zeta(i + 1) = zs[i];
        zeta(kLevels + 1) = 1.0;
        msk::Matrix q(s.m, kLevels + 3);
        q.col(0).setZero();
        q.col(kLevels + 2).setOnes();
        for (int lvl = 0; lvl < kLevels + 1; ++lvl)
          for (int sp = 0; sp < s.m; ++sp) q(sp, lvl + 1) = qs[sp * (kLevels + 1) + lvl];
        result["parisi_value"] = msk::evaluate_parisi(
            s, p, msk::ParisiSequences::make(kLevels, zeta, q), kLevels >= 3 ? 16 : 32);
        result["k"] = kLevels;
      }
      result["rs_functional_at_fixed_point"] = msk::evaluate_rs_functional(s, p, sol.q);
      result["clt"] = msk::to_json(msk::rs_value(s, p, sol));
      result["solution"] = msk::to_json(sol);
      const msk::json config{{"command", "parisi"}, {"model", msk::model_to_json(s)},
                             {"beta", beta},        {"h", h},
                             {"k", kLevels}};
      emit(out_path, wrap(config, result).dump(2));
    } else if (*sim) {
      const msk::SpeciesStructure s = load_model_checked(model_path);
      const msk::ModelParams p{beta, h};
      const msk::RsSolution sol = msk::solve_auto(s, p);
      msk::json result;
      const msk::OverlapMoments om =
          msk::overlap_moments(s, p, sol.q, N, samples, seed, threads);
      result["overlap_moments"] = msk::to_json(om);
      const msk::DisorderSample d0 = msk::sample_disorder(s, N, msk::splitmix64(seed));
      const msk::GibbsEstimate g = use_mcmc
                                       ? msk::mcmc_gibbs(d0, p, sweeps, replicas)
                                       : msk::exact_gibbs(d0, p);
      result["first_sample_gibbs"] = msk::summary_json(g);
      result["q_theory"] = msk::to_json(sol.q);
      const msk::json config{{"command", "simulate"},
                             {"model", msk::model_to_json(s)},
                             {"beta", beta},
                             {"h", h},
                             {"N", N},
                             {"samples", samples},
                             {"seed", seed},
                             {"mcmc", use_mcmc}};
      emit(out_path, wrap(config, result).dump(2));
    } else if (*verify) {
      if (!model_path.empty()) load_model_checked(model_path);  // validate if given
      const auto rows = msk::run_acceptance(quick, threads);
      std::ostringstream csv;
      csv << "criterion,description,measured,threshold,pass,detail\n";
      bool all_pass = true;
      for (const auto& r : rows) {
        csv << r.id << ",\"" << r.description << "\"," << msk::format_float(r.measured) << ','
            << msk::format_float(r.threshold) << ',' << (r.pass ? 1 : 0) << ",\"" << r.detail
            << "\"\n";
        std::cerr << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ": " << r.description << "\n";
        all_pass = all_pass && r.pass;
      }
      emit(out_path, csv.str());
      return all_pass ? 0 : 1;
    }
  } catch (const msk::Error& e) {
    std::cerr << e.name() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
