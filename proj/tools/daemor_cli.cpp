// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: generate | offline | online | sigma | simulate |
// compare | oracle. Every subcommand reads one experiment config (JSON) and
// writes CSV tables, JSON reports, and system bundles under the output
// directory. Outputs are deterministic given config + seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daemor/harness.hpp"
#include "daemor/oracles.hpp"

namespace fs = std::filesystem;
using namespace daemor;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string mu_csv;
  std::string out_override;
  double tol = -1.0;
  long long seed = -1;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonFlags& f, bool config_required = true) {
  auto* c = sub->add_option("--config", f.config_path,
                            "experiment config (JSON)");
  if (config_required) c->required();
  sub->add_option("--mu", f.mu_csv,
                  "parameter values, comma list; multiple points are "
                  "concatenated (box dimension splits them)");
  sub->add_option("--out", f.out_override, "output directory override");
  sub->add_option("--tol", f.tol, "tolerance override");
  sub->add_option("--seed", f.seed, "seed override");
  sub->add_option("--threads", f.threads, "worker thread override");
}

ExperimentConfig load_config(const CommonFlags& f) {
  std::ifstream in(f.config_path);
  if (!in)
    throw InvalidInput("cli: cannot read config " + f.config_path);
  nlohmann::json j;
  in >> j;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  if (!f.out_override.empty()) cfg.out_dir = f.out_override;
  if (f.tol > 0) cfg.rb.tol = f.tol;
  if (f.seed >= 0) cfg.seed = static_cast<unsigned>(f.seed);
  if (f.threads > 0) cfg.threads = f.threads;
  return cfg;
}

std::vector<std::vector<double>> parse_mu(const std::string& csv,
                                          const ParamBox& box) {
  const int d = box.dim();
  if (csv.empty()) {
    std::vector<double> mid(d);
    for (int k = 0; k < d; ++k)
      mid[k] = 0.5 * (box.bounds[k][0] + box.bounds[k][1]);
    return {mid};
  }
  std::vector<double> flat;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) flat.push_back(std::stod(tok));
  if (flat.empty() || flat.size() % d != 0)
    throw InvalidInput("cli: --mu length must be a multiple of the box "
                       "dimension " +
                       std::to_string(d));
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < flat.size(); i += d)
    pts.emplace_back(flat.begin() + i, flat.begin() + i + d);
  return pts;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out)
    throw SerializationError("cli: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

fs::path ensure_out(const ExperimentConfig& cfg) {
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  write_json(out / "config_used.json", cfg.to_json());
  return out;
}

// True when every parametric E/A term of the assembled system declares a
// low-rank factorization, i.e. the SMW route is admissible.
bool smw_available(const ParametricDaeSystem& sys) {
  bool any = false;
  for (const auto* op : {&sys.E, &sys.A})
    for (std::size_t k = 1; k < op->terms().size(); ++k) {
      if (!op->terms()[k].lowrank) return false;
      any = true;
    }
  return any;
}

int cmd_generate(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  save_system(out / "system", model.system, model.metadata);
  std::printf("generate: wrote bundle %s (order %lld, %lld inputs, %lld "
              "outputs, index %d)\n",
              (out / "system").c_str(), (long long)model.system.order(),
              (long long)model.system.inputs(),
              (long long)model.system.outputs(), model.system.info.index);
  return 0;
}

OfflineArtifacts offline_phase(const LoadedModel& model,
                               const ExperimentConfig& cfg,
                               const fs::path& out) {
  OfflineArtifacts art = run_offline(model.st, cfg);
  save_basis(out / "basis_reach", art.reach);
  save_basis(out / "basis_obs", art.obs);
  write_json(out / "offline_report.json", art.report);
  return art;
}

int cmd_offline(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  OfflineArtifacts art = offline_phase(model, cfg, out);
  std::printf(
      "offline: reach %lld cols (%d full solves), obs %lld cols (%d full "
      "solves), converged=%d/%d, %.2fs\n",
      (long long)art.reach.V_glob.cols(), art.reach.full_solves,
      (long long)art.obs.V_glob.cols(), art.obs.full_solves,
      (int)art.reach.converged, (int)art.obs.converged, art.wall_seconds);
  return 0;
}

struct OnlineSetup {
  AlphaCache alpha;
  std::optional<SmwPrecomputation> smw;
};

OnlineSetup online_setup(const LoadedModel& model,
                         const ExperimentConfig& cfg) {
  OnlineSetup s;
  std::vector<double> mid(model.st.box.dim());
  for (int k = 0; k < model.st.box.dim(); ++k)
    mid[k] =
        0.5 * (model.st.box.bounds[k][0] + model.st.box.bounds[k][1]);
  s.alpha = build_alpha_cache(model.st, mid);
  if (cfg.treatment == AlgebraicTreatment::kMarkovTf &&
      smw_available(model.system)) {
    const double omega = resolve_markov_omega(model.st, cfg);
    s.smw = precompute_smw(model.system, markov_sample_omegas(omega));
  }
  return s;
}

nlohmann::json online_row(const OnlineRun& run) {
  return {{"mu", run.mu},
          {"order", run.rom.order()},
          {"r_p", run.rom.r_p},
          {"r_i", run.rom.r_i},
          {"error_bound", run.rom.error_bound},
          {"coupling_defect", run.rom.coupling_defect},
          {"wall_seconds", run.wall_seconds},
          {"full_factorizations", run.full_factorizations},
          {"estimator", run.estimator_value},
          {"estimator_warning", run.estimator_warning},
          {"smw_fallbacks", run.smw_fallbacks}};
}

int cmd_online(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  ReducedBasis reach = load_basis(out / "basis_reach");
  ReducedBasis obs = load_basis(out / "basis_obs");
  const auto pts = parse_mu(f.mu_csv, model.st.box);
  OnlineSetup setup = online_setup(model, cfg);

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    OnlineRun run = run_online(model, reach, obs, pts[k], cfg,
                               setup.smw ? &*setup.smw : nullptr,
                               &setup.alpha);
    save_rom(out / ("rom_" + std::to_string(k)), run.rom);
    rows.push_back(online_row(run));
    std::printf("online mu[%zu]: order %lld (proper %lld, improper %lld), "
                "bound %.3e, %.4fs, %lld full solves%s\n",
                k, (long long)run.rom.order(), (long long)run.rom.r_p,
                (long long)run.rom.r_i, run.rom.error_bound,
                run.wall_seconds, (long long)run.full_factorizations,
                run.estimator_warning ? " [estimator above tol]" : "");
  }
  write_json(out / "online_report.json",
             {{"schema", "daemor-online-report-v1"}, {"runs", rows}});
  return 0;
}

int cmd_sigma(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  const auto pts = parse_mu(f.mu_csv, model.st.box);
  const auto fom = model.st.assemble();
  const auto omegas = cfg.freq.omegas();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const fs::path rom_dir = out / ("rom_" + std::to_string(k));
    SigmaTable tab;
    if (fs::exists(rom_dir / "system.json")) {
      const Rom rom = load_rom(rom_dir);
      tab = sigma_plot(fom, rom, pts[k], omegas, cfg.threads);
      std::printf("sigma mu[%zu]: max error %.3e over %zu frequencies\n", k,
                  tab.max_error(), omegas.size());
    } else {
      tab = sigma_plot(fom, pts[k], omegas, cfg.threads);
      std::printf("sigma mu[%zu]: full model only (%zu frequencies)\n", k,
                  omegas.size());
    }
    write_sigma_csv(out / ("sigma_" + std::to_string(k) + ".csv"), tab);
  }
  return 0;
}

int cmd_simulate(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  if (cfg.input.empty())
    throw InvalidInput("cli: simulate needs evaluate.time.input in the config");
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  const auto pts = parse_mu(f.mu_csv, model.st.box);
  const auto fom = model.st.assemble();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Trajectory ft =
        simulate(fom, pts[k], cfg.input, cfg.horizon, cfg.step);
    const fs::path rom_dir = out / ("rom_" + std::to_string(k));
    Trajectory rt;
    Vec err = Vec::Zero(ft.t.size());
    if (fs::exists(rom_dir / "system.json")) {
      rt = simulate(load_rom(rom_dir), cfg.input, cfg.horizon, cfg.step);
      err = (ft.y - rt.y).rowwise().norm();
      std::printf("simulate mu[%zu]: error l2 %.3e over [0, %g]\n", k,
                  std::sqrt(cfg.step) * err.norm(), cfg.horizon);
    } else {
      rt.t = ft.t;
      rt.u = ft.u;
      rt.y = Mat::Zero(ft.y.rows(), 0);
      std::printf("simulate mu[%zu]: full model only\n", k);
    }
    write_time_csv(out / ("time_" + std::to_string(k) + ".csv"), ft, rt, err);
  }
  return 0;
}

int cmd_compare(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  const auto pts = parse_mu(f.mu_csv, model.st.box);

  // Missing phases are run on demand so one invocation can evaluate a fresh
  // config end to end.
  ReducedBasis reach, obs;
  double offline_seconds = 0;
  if (fs::exists(out / "basis_reach.json") &&
      fs::exists(out / "basis_obs.json")) {
    reach = load_basis(out / "basis_reach");
    obs = load_basis(out / "basis_obs");
  } else {
    OfflineArtifacts art = offline_phase(model, cfg, out);
    offline_seconds = art.wall_seconds;
    reach = std::move(art.reach);
    obs = std::move(art.obs);
  }
  OnlineSetup setup = online_setup(model, cfg);
  const auto fom = model.st.assemble();

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const fs::path rom_dir = out / ("rom_" + std::to_string(k));
    Rom rom;
    double online_seconds = 0;
    if (fs::exists(rom_dir / "system.json")) {
      rom = load_rom(rom_dir);
    } else {
      OnlineRun run = run_online(model, reach, obs, pts[k], cfg,
                                 setup.smw ? &*setup.smw : nullptr,
                                 &setup.alpha);
      online_seconds = run.wall_seconds;
      save_rom(rom_dir, run.rom);
      rom = std::move(run.rom);
    }
    EvaluationReport rep = compare(fom, rom, pts[k], cfg);
    rep.offline_seconds = offline_seconds;
    rep.online_seconds = online_seconds;
    write_sigma_csv(out / ("sigma_" + std::to_string(k) + ".csv"), rep.sigma);
    if (!cfg.input.empty())
      write_time_csv(out / ("time_" + std::to_string(k) + ".csv"),
                     rep.fom_traj, rep.rom_traj, rep.time_error);
    write_json(out / ("evaluation_" + std::to_string(k) + ".json"),
               rep.to_json());
    rows.push_back(rep.to_json());
    std::printf("compare mu[%zu]: sigma error %.3e, time error %.3e, rom "
                "order %lld\n",
                k, rep.sigma.max_error(), rep.time_error_l2,
                (long long)rom.order());
  }
  write_json(out / "compare_report.json",
             {{"schema", "daemor-compare-report-v1"}, {"runs", rows}});
  return 0;
}

int cmd_oracle(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  LoadedModel model = load_model(cfg);
  const fs::path out = ensure_out(cfg);
  const double tol = f.tol > 0 ? f.tol : 1e-6;
  const auto pts = parse_mu(f.mu_csv, model.st.box);
  const auto& st = model.st;
  const auto sys = st.assemble();

  bool all_ok = true;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& mu : pts) {
    const Mat E(sys.E.evaluate(mu));
    const Mat A(sys.A.evaluate(mu));
    const Mat B = sys.B.dense(mu);
    const Mat C = sys.C.dense(mu);
    const auto qwf = oracle::quasi_weierstrass(E, A);
    const ProjectorContext ctx(st, mu);

    // spectral projector, both constructions
    const Mat Pr_qwf = qwf.spectral_projector_right();
    const Mat Pr_ctx = ctx.apply_pi_right(Mat::Identity(E.rows(), E.cols()));
    const double proj_err = (Pr_qwf - Pr_ctx).norm() / Pr_qwf.norm();

    // proper reachability Gramian: low-rank iteration vs dense oracle
    const auto sh = compute_shifts(st, ctx, cfg.rb.shifts);
    LradiOptions lopt = cfg.rb.lradi;
    const auto lr = lradi_projected(ctx, sh.shifts,
                                    EquationSide::kControllability, B, lopt);
    const Mat P_or = qwf.proper_gramian(B);
    const double gram_err =
        (lr.Z * lr.Z.transpose() - P_or).norm() / std::max(P_or.norm(), 1.0);

    // improper reachability Gramian: Smith vs dense oracle
    const auto sm = smith_improper(ctx, EquationSide::kControllability, B);
    const Mat Pi_or = qwf.improper_gramian(B);
    const double smith_err = (sm.Y * sm.Y.transpose() - Pi_or).norm() /
                             std::max(Pi_or.norm(), 1.0);

    // polynomial coefficients: frequency sampling vs QWF formula
    const auto Mtrue = qwf.polynomial_coefficients(B, C);
    auto G = [&](Complex s) { return transfer_function(sys, mu, s); };
    const double omega = resolve_markov_omega(st, cfg);
    const auto est =
        estimate_markov(G, std::max(1, model.system.info.index), omega);
    double markov_err = 0;
    for (std::size_t k2 = 0; k2 < est.M.size(); ++k2) {
      const Mat& tr = k2 < Mtrue.size()
                          ? Mtrue[k2]
                          : Mat::Zero(est.M[k2].rows(), est.M[k2].cols());
      markov_err = std::max(
          markov_err, (est.M[k2] - tr).norm() / std::max(1.0, tr.norm()));
    }

    const bool ok = proj_err <= tol && gram_err <= tol && smith_err <= tol &&
                    markov_err <= tol;
    all_ok = all_ok && ok;
    std::ostringstream ms;
    ms.precision(3);
    for (double v : mu) ms << " " << v;
    std::printf("oracle mu[%s ]: projector %.2e, proper gramian %.2e, "
                "improper gramian %.2e, markov %.2e -> %s\n",
                ms.str().c_str(), proj_err, gram_err, smith_err, markov_err,
                ok ? "PASS" : "FAIL");
    rows.push_back({{"mu", mu},
                    {"projector", proj_err},
                    {"proper_gramian", gram_err},
                    {"improper_gramian", smith_err},
                    {"markov", markov_err},
                    {"pass", ok}});
  }
  write_json(out / "oracle_report.json",
             {{"schema", "daemor-oracle-report-v1"},
              {"tol", tol},
              {"checks", rows}});
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balanced-truncation model reduction for parametric DAE "
               "systems"};
  app.require_subcommand(1);

  CommonFlags fg, fo, fn, fs_, fm, fc, fr;
  auto* generate =
      app.add_subcommand("generate", "write the configured model as a bundle");
  add_common(generate, fg);
  auto* offline =
      app.add_subcommand("offline", "greedy reduced-basis construction");
  add_common(offline, fo);
  auto* online = app.add_subcommand(
      "online", "projected solves and truncation at given parameters");
  add_common(online, fn);
  auto* sigma =
      app.add_subcommand("sigma", "transfer-function sweep (CSV per point)");
  add_common(sigma, fs_);
  auto* simulate_ =
      app.add_subcommand("simulate", "time-domain response (CSV per point)");
  add_common(simulate_, fm);
  auto* compare_ = app.add_subcommand(
      "compare", "full evaluation; runs missing phases on demand");
  add_common(compare_, fc);
  auto* oracle_ = app.add_subcommand(
      "oracle", "desk-scale dense cross-checks of the core solvers");
  add_common(oracle_, fr);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(fg);
    if (offline->parsed()) return cmd_offline(fo);
    if (online->parsed()) return cmd_online(fn);
    if (sigma->parsed()) return cmd_sigma(fs_);
    if (simulate_->parsed()) return cmd_simulate(fm);
    if (compare_->parsed()) return cmd_compare(fc);
    if (oracle_->parsed()) return cmd_oracle(fr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
