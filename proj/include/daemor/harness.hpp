// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_HARNESS_HPP
#define DAEMOR_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "daemor/bundle.hpp"
#include "daemor/counters.hpp"
#include "daemor/markov.hpp"
#include "daemor/models.hpp"
#include "daemor/simulate.hpp"
#include "daemor/smith.hpp"
#include "daemor/smw.hpp"

namespace daemor {

enum class AlgebraicTreatment { kNone, kImproperBt, kMarkovTf };

/// Parameter test set: full tensor grid, explicit list, or seeded uniform
/// draws. Enumeration order is fixed so that downstream CSV output is
/// deterministic.
struct TestSetSpec {
  std::string kind = "grid";  // grid | list | random
  int per_dim = 10;
  std::vector<std::vector<double>> points;
  int count = 0;
};

struct FrequencyGrid {
  double log10_lo = -4.0;
  double log10_hi = 4.0;
  int count = 200;
  std::vector<double> explicit_omegas;  // overrides the log grid when set

  std::vector<double> omegas() const {
    if (!explicit_omegas.empty()) return explicit_omegas;
    if (count < 1) throw InvalidInput("frequency grid: need count >= 1");
    std::vector<double> w(count);
    for (int i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      w[i] = std::pow(10.0, log10_lo + t * (log10_hi - log10_lo));
    }
    return w;
  }
};

struct ExperimentConfig {
  nlohmann::json generator;  // model config; null when loading a bundle
  std::string bundle_path;
  std::string out_dir = "out";

  TestSetSpec test_set;
  RbOptions rb;
  BtOptions truncation;
  AlgebraicTreatment treatment = AlgebraicTreatment::kImproperBt;
  double markov_omega = 0;  // 0: resolved at the box midpoint

  FrequencyGrid freq;
  std::vector<TimeExpr> input;
  double horizon = 10.0;
  double step = 1e-2;

  SdRealizationOptions sd;
  unsigned seed = 0;
  int threads = 1;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline std::vector<std::vector<double>> make_test_set(const ParamBox& box,
                                                      const TestSetSpec& spec,
                                                      unsigned seed) {
  const int d = box.dim();
  std::vector<std::vector<double>> out;
  if (spec.kind == "list") {
    for (const auto& p : spec.points) {
      if (static_cast<int>(p.size()) != d)
        throw InvalidInput("test set: point dimension mismatch");
      out.push_back(p);
    }
  } else if (spec.kind == "grid") {
    if (spec.per_dim < 1) throw InvalidInput("test set: per_dim < 1");
    std::vector<int> idx(d, 0);
    while (true) {
      std::vector<double> p(d);
      for (int k = 0; k < d; ++k) {
        const auto& b = box.bounds[k];
        p[k] = spec.per_dim == 1
                   ? 0.5 * (b[0] + b[1])
                   : b[0] + (b[1] - b[0]) * idx[k] / (spec.per_dim - 1);
      }
      out.push_back(std::move(p));
      int k = d - 1;
      while (k >= 0 && ++idx[k] == spec.per_dim) idx[k--] = 0;
      if (k < 0) break;
    }
  } else if (spec.kind == "random") {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < spec.count; ++i) {
      std::vector<double> p(d);
      for (int k = 0; k < d; ++k) {
        const auto& b = box.bounds[k];
        p[k] = b[0] + (b[1] - b[0]) * u(gen);
      }
      out.push_back(std::move(p));
    }
  } else {
    throw InvalidInput("test set: unknown kind '" + spec.kind + "'");
  }
  if (out.empty()) throw InvalidInput("test set: empty");
  return out;
}

/// Model resolved to the saddle structure every phase operates on. For
/// index-3 mechanical sources this is the strictly-dissipative first-order
/// companion form; sd_gamma records the transform coefficient.
struct LoadedModel {
  ParametricDaeSystem system;  // as generated or loaded (pre-transform)
  StokesStructure st;          // post-transform working structure
  double sd_gamma = 0;
  nlohmann::json metadata;
};

namespace detail {

inline StokesConfig stokes_config_from_json(const nlohmann::json& j) {
  StokesConfig cfg;
  cfg.resolution = j.value("resolution", cfg.resolution);
  if (j.contains("viscosity_box"))
    cfg.viscosity_box = box_from_json(j.at("viscosity_box"));
  const std::string variant = j.value("variant", "proper_only");
  if (variant == "proper_only")
    cfg.variant = StokesVariant::kProperOnly;
  else if (variant == "improper")
    cfg.variant = StokesVariant::kImproperVariant;
  else
    throw InvalidInput("generator: unknown stokes variant '" + variant + "'");
  cfg.parametric_input = j.value("parametric_input", cfg.parametric_input);
  return cfg;
}

inline TripleChainConfig chain_config_from_json(const nlohmann::json& j) {
  TripleChainConfig cfg;
  cfg.ell = j.value("ell", cfg.ell);
  cfg.m1 = j.value("m1", cfg.m1);
  cfg.m2 = j.value("m2", cfg.m2);
  cfg.m3 = j.value("m3", cfg.m3);
  cfg.m0 = j.value("m0", cfg.m0);
  cfg.k1 = j.value("k1", cfg.k1);
  cfg.k2 = j.value("k2", cfg.k2);
  cfg.k3 = j.value("k3", cfg.k3);
  cfg.k0 = j.value("k0", cfg.k0);
  cfg.rayleigh_alpha = j.value("rayleigh_alpha", cfg.rayleigh_alpha);
  cfg.rayleigh_beta = j.value("rayleigh_beta", cfg.rayleigh_beta);
  if (j.contains("box")) cfg.box = box_from_json(j.at("box"));
  return cfg;
}

}  // namespace detail

inline LoadedModel load_model(const ExperimentConfig& cfg) {
  LoadedModel out;
  ParametricDaeSystem sys;
  if (!cfg.bundle_path.empty()) {
    sys = load_system(cfg.bundle_path, &out.metadata);
  } else if (!cfg.generator.is_null()) {
    const std::string model = cfg.generator.value("model", "");
    if (model == "stokes") {
      auto m = make_stokes(detail::stokes_config_from_json(cfg.generator));
      out.system = m.system;
      out.st = std::move(m.structure);
      out.metadata = {{"model", "stokes"},
                      {"resolution", m.resolution},
                      {"b2_row", m.b2_row}};
      return out;
    }
    if (model == "triple_chain") {
      auto m = make_triple_chain(detail::chain_config_from_json(cfg.generator));
      sys = std::move(m.system);
      out.metadata = {{"model", "triple_chain"}, {"input_row", m.input_row}};
    } else {
      throw InvalidInput("generator: unknown model '" + model + "'");
    }
  } else {
    throw InvalidInput("config: need a generator or a bundle path");
  }
  out.system = sys;
  if (sys.info.kind == SystemKind::kStokesLike) {
    out.st = stokes_structure_from_system(sys);
  } else if (sys.info.kind == SystemKind::kMechanical) {
    auto mech = mechanical_structure_from_system(sys);
    auto sd = first_order_sd_realization(mech, cfg.sd);
    out.st = std::move(sd.stokes);
    out.sd_gamma = sd.gamma;
    out.metadata["sd_gamma"] = sd.gamma;
  } else {
    throw InvalidInput(
        "config: general systems carry no projector structure; tag the "
        "bundle stokes_like or mechanical");
  }
  return out;
}

struct OfflineArtifacts {
  ReducedBasis reach;
  ReducedBasis obs;
  double wall_seconds = 0;
  nlohmann::json report;
};

inline OfflineArtifacts run_offline(const StokesStructure& st,
                                    const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto D_test = make_test_set(st.box, cfg.test_set, cfg.seed);
  RbOptions opt = cfg.rb;
  opt.threads = cfg.threads;
  OfflineArtifacts art;
  art.reach = offline_build(st, EquationSide::kControllability, D_test, opt);
  art.obs = offline_build(st, EquationSide::kObservability, D_test, opt);
  art.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  auto side_report = [](const ReducedBasis& rb) {
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& h : rb.history)
      iters.push_back({{"iteration", h.iteration},
                       {"mu", h.chosen_mu},
                       {"max_estimator", h.max_estimator},
                       {"basis_cols", h.basis_cols}});
    return nlohmann::json{{"basis_cols", rb.V_glob.cols()},
                          {"full_solves", rb.full_solves},
                          {"converged", rb.converged},
                          {"final_max_estimator", rb.final_max_estimator},
                          {"iterations", iters}};
  };
  art.report = {{"schema", "daemor-offline-report-v1"},
                {"test_points", D_test.size()},
                {"controllability", side_report(art.reach)},
                {"observability", side_report(art.obs)},
                {"wall_seconds", art.wall_seconds}};
  return art;
}

struct OnlineRun {
  std::vector<double> mu;
  Rom rom;
  OnlineSolution reach;
  OnlineSolution obs;
  double wall_seconds = 0;
  std::int64_t full_factorizations = 0;  // shifted full-order LU during run
  bool estimator_warning = false;
  double estimator_value = 0;  // max over both sides when computed
  std::optional<MarkovEstimate> markov;
  int smw_fallbacks = 0;
};

/// Resolves the polynomial-extraction base frequency once per model so the
/// low-rank precomputation (built offline) and the online evaluations agree.
inline double resolve_markov_omega(const StokesStructure& st,
                                   const ExperimentConfig& cfg) {
  if (cfg.markov_omega > 0) return cfg.markov_omega;
  std::vector<double> mid(st.box.dim());
  for (int k = 0; k < st.box.dim(); ++k)
    mid[k] = 0.5 * (st.box.bounds[k][0] + st.box.bounds[k][1]);
  return suggest_markov_frequency(st.E.evaluate(mid), st.A.evaluate(mid));
}

/// Frequencies the polynomial extraction samples: base, 2x, 4x, 8x (the
/// consistency pass reuses the doubled set).
inline std::vector<double> markov_sample_omegas(double omega) {
  return {omega, 2 * omega, 4 * omega, 8 * omega};
}

inline OnlineRun run_online(const LoadedModel& model,
                            const ReducedBasis& reach_basis,
                            const ReducedBasis& obs_basis, ParamView mu,
                            const ExperimentConfig& cfg,
                            const SmwPrecomputation* smw = nullptr,
                            const AlphaCache* alpha_cache = nullptr) {
  const StokesStructure& st = model.st;
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t c0 = solve_counters().shifted_full.load();
  OnlineRun run;
  run.mu.assign(mu.begin(), mu.end());

  const ProjectorContext ctx(st, mu);
  const Mat rhs_b = st.big_B(mu);
  const Mat rhs_c = st.big_C().transpose();

  const Mat Vr = local_basis(reach_basis.V_glob, ctx,
                             EquationSide::kControllability,
                             cfg.rb.orth_drop_tol);
  const Mat Vo = local_basis(obs_basis.V_glob, ctx,
                             EquationSide::kObservability,
                             cfg.rb.orth_drop_tol);
  run.reach = online_solve(ctx, EquationSide::kControllability, Vr, rhs_b);
  run.obs = online_solve(ctx, EquationSide::kObservability, Vo, rhs_c);

  if (alpha_cache) {
    for (EquationSide side : {EquationSide::kControllability,
                              EquationSide::kObservability}) {
      const bool ctrl = side == EquationSide::kControllability;
      const auto rep = evaluate_estimator(
          st, mu, ctrl ? reach_basis.V_glob : obs_basis.V_glob, side,
          ctrl ? rhs_b : rhs_c, *alpha_cache, cfg.rb.estimator,
          cfg.rb.orth_drop_tol);
      const double val = rep.delta2 ? *rep.delta2 : rep.delta1;
      run.estimator_value = std::max(run.estimator_value, val);
    }
    run.estimator_warning = run.estimator_value > cfg.rb.tol;
  }

  SmithResult yobs, yreach;
  if (cfg.treatment == AlgebraicTreatment::kImproperBt) {
    yreach = smith_improper(ctx, EquationSide::kControllability, rhs_b);
    yobs = smith_improper(ctx, EquationSide::kObservability, rhs_c);
  }
  run.rom = balanced_truncation(ctx, run.obs.Z, run.reach.Z, yobs, yreach,
                                rhs_b, st.big_C(), cfg.truncation);

  if (cfg.treatment == AlgebraicTreatment::kMarkovTf) {
    const double omega = resolve_markov_omega(st, cfg);
    std::optional<ParametricDaeSystem> full;  // assembled on first fallback
    auto G = [&](Complex s) -> CMat {
      if (smw) {
        const auto& ws = smw->omegas;
        for (std::size_t i = 0; i < ws.size(); ++i) {
          if (std::abs(s.imag() - ws[i]) <= 1e-9 * ws[i] && s.real() == 0.0) {
            auto ev = transfer_function_smw(*smw, mu, i);
            if (ev.ok) return ev.G;
            ++run.smw_fallbacks;
            break;
          }
        }
      }
      if (!full) full = st.assemble();
      return transfer_function(*full, mu, s);
    };
    // Extraction order follows the source system: the polynomial degree of
    // the transfer function is a realization invariant, so an index-3
    // mechanical model keeps its quadratic part through the first-order
    // companion transform.
    const int index = std::max(1, model.system.info.index);
    MarkovEstimate est = estimate_markov(G, index, omega);
    const Rom poly = realize_polynomial(est.M);
    run.rom = combine_rom(run.rom, poly);
    run.markov = std::move(est);
  }

  run.full_factorizations = solve_counters().shifted_full.load() - c0;
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return run;
}

/// sigma-plot table: per frequency the largest singular value of each
/// transfer function and of their difference. Rows where an evaluation
/// failed (singular pencil) are flagged instead of aborting the sweep.
struct SigmaTable {
  std::vector<double> omega;
  Vec first;
  Vec second;  // empty when only one model was swept
  Vec error;
  std::vector<std::uint8_t> ok;

  double max_error() const {
    double m = 0;
    for (Eigen::Index i = 0; i < error.size(); ++i)
      if (ok[i]) m = std::max(m, error(i));
    return m;
  }
};

namespace detail {

inline double sigma_max(const CMat& G) {
  if (G.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(G);
  return svd.singularValues()(0);
}

inline SigmaTable sigma_sweep(
    const std::function<CMat(double)>& first,
    const std::function<CMat(double)>* second,
    const std::vector<double>& omegas, int threads) {
  if (omegas.empty()) throw InvalidInput("sigma: empty frequency grid");
  SigmaTable tab;
  tab.omega = omegas;
  const Eigen::Index n = static_cast<Eigen::Index>(omegas.size());
  tab.first = Vec::Zero(n);
  tab.second = second ? Vec::Zero(n) : Vec();
  tab.error = Vec::Zero(n);
  tab.ok.assign(omegas.size(), 1);
  run_indexed(static_cast<int>(n), threads, [&](int i) {
    try {
      const CMat Ga = first(omegas[i]);
      tab.first(i) = sigma_max(Ga);
      if (second) {
        const CMat Gb = (*second)(omegas[i]);
        tab.second(i) = sigma_max(Gb);
        tab.error(i) = sigma_max(Ga - Gb);
      }
    } catch (const Error&) {
      tab.ok[i] = 0;
    }
  });
  return tab;
}

}  // namespace detail

inline SigmaTable sigma_plot(const ParametricDaeSystem& sys, ParamView mu,
                             const std::vector<double>& omegas,
                             int threads = 1) {
  std::function<CMat(double)> f = [&](double w) {
    return transfer_function(sys, mu, Complex(0, w));
  };
  return detail::sigma_sweep(f, nullptr, omegas, threads);
}

inline SigmaTable sigma_plot(const ParametricDaeSystem& sys, const Rom& rom,
                             ParamView mu, const std::vector<double>& omegas,
                             int threads = 1) {
  std::function<CMat(double)> f = [&](double w) {
    return transfer_function(sys, mu, Complex(0, w));
  };
  std::function<CMat(double)> g = [&](double w) {
    return rom_transfer(rom, Complex(0, w));
  };
  return detail::sigma_sweep(f, &g, omegas, threads);
}

inline SigmaTable sigma_plot(const Rom& a, const Rom& b,
                             const std::vector<double>& omegas,
                             int threads = 1) {
  std::function<CMat(double)> f = [&](double w) {
    return rom_transfer(a, Complex(0, w));
  };
  std::function<CMat(double)> g = [&](double w) {
    return rom_transfer(b, Complex(0, w));
  };
  return detail::sigma_sweep(f, &g, omegas, threads);
}

struct EvaluationReport {
  std::vector<double> mu;
  SigmaTable sigma;
  Trajectory fom_traj;
  Trajectory rom_traj;
  Vec time_error;          // pointwise l2 across outputs
  double time_error_l2 = 0;  // sqrt(dt * sum of squares)
  Vec hankel_proper;
  Vec hankel_improper;
  double offline_seconds = 0;
  double online_seconds = 0;
  double evaluate_seconds = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema"] = "daemor-evaluation-report-v1";
    j["mu"] = mu;
    j["sigma_max_error"] = sigma.max_error();
    j["time_error_l2"] = time_error_l2;
    j["hankel_proper"] = std::vector<double>(
        hankel_proper.data(), hankel_proper.data() + hankel_proper.size());
    j["hankel_improper"] =
        std::vector<double>(hankel_improper.data(),
                            hankel_improper.data() + hankel_improper.size());
    j["wall_seconds"] = {{"offline", offline_seconds},
                         {"online", online_seconds},
                         {"evaluate", evaluate_seconds}};
    return j;
  }
};

/// Runs the frequency sweep and the time-domain comparison for one
/// parameter. The FOM trajectory dominates the cost; both integrations use
/// the same grid so the error column is a plain row difference.
inline EvaluationReport compare(const ParametricDaeSystem& fom, const Rom& rom,
                                ParamView mu, const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  EvaluationReport rep;
  rep.mu.assign(mu.begin(), mu.end());
  rep.sigma = sigma_plot(fom, rom, mu, cfg.freq.omegas(), cfg.threads);
  if (!cfg.input.empty()) {
    rep.fom_traj = simulate(fom, mu, cfg.input, cfg.horizon, cfg.step);
    rep.rom_traj = simulate(rom, cfg.input, cfg.horizon, cfg.step);
    const Mat diff = rep.fom_traj.y - rep.rom_traj.y;
    rep.time_error = diff.rowwise().norm();
    rep.time_error_l2 = std::sqrt(cfg.step) * rep.time_error.norm();
  }
  rep.hankel_proper = rom.sigma_proper;
  rep.hankel_improper = rom.sigma_improper;
  rep.evaluate_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

// CSV emission. Columns are fixed per table kind; values print with 17
// significant digits so re-runs diff clean.

namespace detail {

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::function<double(Eigen::Index, std::size_t)>&
                          cell,
                      Eigen::Index rows) {
  std::ofstream out(path);
  if (!out)
    throw SerializationError("csv: cannot open " + path.string());
  out.precision(17);
  for (std::size_t c = 0; c < header.size(); ++c)
    out << (c ? "," : "") << header[c];
  out << "\n";
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < header.size(); ++c)
      out << (c ? "," : "") << cell(i, c);
    out << "\n";
  }
  if (!out)
    throw SerializationError("csv: write failed for " + path.string());
}

}  // namespace detail

inline void write_sigma_csv(const std::filesystem::path& path,
                            const SigmaTable& tab) {
  const bool two = tab.second.size() > 0;
  std::vector<std::string> header{"omega", "sigma_first"};
  if (two) {
    header.push_back("sigma_second");
    header.push_back("sigma_error");
  }
  header.push_back("ok");
  detail::write_csv(
      path, header,
      [&](Eigen::Index i, std::size_t c) -> double {
        if (c == 0) return tab.omega[i];
        if (c == 1) return tab.first(i);
        if (two && c == 2) return tab.second(i);
        if (two && c == 3) return tab.error(i);
        return tab.ok[i];
      },
      static_cast<Eigen::Index>(tab.omega.size()));
}

inline void write_time_csv(const std::filesystem::path& path,
                           const Trajectory& fom, const Trajectory& rom,
                           const Vec& err) {
  std::vector<std::string> header{"t"};
  for (Eigen::Index j = 0; j < fom.u.cols(); ++j)
    header.push_back("u" + std::to_string(j));
  for (Eigen::Index j = 0; j < fom.y.cols(); ++j)
    header.push_back("y" + std::to_string(j));
  for (Eigen::Index j = 0; j < rom.y.cols(); ++j)
    header.push_back("yr" + std::to_string(j));
  header.push_back("err_l2");
  const Eigen::Index mu_cols = fom.u.cols(), y_cols = fom.y.cols();
  detail::write_csv(
      path, header,
      [&](Eigen::Index i, std::size_t c) -> double {
        Eigen::Index k = static_cast<Eigen::Index>(c);
        if (k == 0) return fom.t(i);
        k -= 1;
        if (k < mu_cols) return fom.u(i, k);
        k -= mu_cols;
        if (k < y_cols) return fom.y(i, k);
        k -= y_cols;
        if (k < rom.y.cols()) return rom.y(i, k);
        return err(i);
      },
      fom.t.size());
}

inline void write_estimator_csv(const std::filesystem::path& path,
                                const ReducedBasis& rb) {
  const Eigen::Index rows =
      static_cast<Eigen::Index>(rb.final_reports.size());
  const std::size_t d =
      rb.final_reports.empty() ? 0 : rb.final_reports.front().mu.size();
  std::vector<std::string> header;
  for (std::size_t k = 0; k < d; ++k)
    header.push_back("mu" + std::to_string(k));
  header.push_back("delta1");
  header.push_back("delta2");
  header.push_back("residual_fro");
  header.push_back("alpha");
  detail::write_csv(
      path, header,
      [&](Eigen::Index i, std::size_t c) -> double {
        const EstimatorReport& r = rb.final_reports[i];
        if (c < d) return r.mu[c];
        const std::size_t f = c - d;
        if (f == 0) return r.delta1;
        if (f == 1) return r.delta2 ? *r.delta2 : 0.0;
        if (f == 2) return r.residual_fro;
        return r.alpha;
      },
      rows);
}

// Config (de)serialization.

namespace detail {

inline AlgebraicTreatment treatment_from_name(const std::string& s) {
  if (s == "none") return AlgebraicTreatment::kNone;
  if (s == "improper_bt") return AlgebraicTreatment::kImproperBt;
  if (s == "markov_tf") return AlgebraicTreatment::kMarkovTf;
  throw InvalidInput("config: unknown algebraic treatment '" + s + "'");
}

inline std::string treatment_name(AlgebraicTreatment t) {
  switch (t) {
    case AlgebraicTreatment::kNone:
      return "none";
    case AlgebraicTreatment::kImproperBt:
      return "improper_bt";
    case AlgebraicTreatment::kMarkovTf:
      break;
  }
  return "markov_tf";
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("system")) {
    const auto& s = j.at("system");
    if (s.contains("generator")) cfg.generator = s.at("generator");
    if (s.contains("bundle")) cfg.bundle_path = s.at("bundle").get<std::string>();
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);

  if (j.contains("offline")) {
    const auto& o = j.at("offline");
    cfg.rb.tol = o.value("tol", cfg.rb.tol);
    const std::string est = o.value("estimator", "delta2");
    if (est == "delta1")
      cfg.rb.estimator = EstimatorKind::kDelta1;
    else if (est == "delta2")
      cfg.rb.estimator = EstimatorKind::kDelta2;
    else
      throw InvalidInput("config: unknown estimator '" + est + "'");
    cfg.rb.max_samples = o.value("max_samples", cfg.rb.max_samples);
    if (o.contains("lradi")) {
      const auto& l = o.at("lradi");
      cfg.rb.lradi.tol = l.value("tol", cfg.rb.lradi.tol);
      cfg.rb.lradi.max_iter = l.value("max_iter", cfg.rb.lradi.max_iter);
      cfg.rb.lradi.defect_tol = l.value("defect_tol", cfg.rb.lradi.defect_tol);
      cfg.rb.lradi.compress_tol =
          l.value("compress_tol", cfg.rb.lradi.compress_tol);
    }
    if (o.contains("shifts")) {
      const auto& s = o.at("shifts");
      cfg.rb.shifts.num = s.value("num", cfg.rb.shifts.num);
      cfg.rb.shifts.tol = s.value("tol", cfg.rb.shifts.tol);
      cfg.rb.shifts.arnoldi_forward =
          s.value("arnoldi_forward", cfg.rb.shifts.arnoldi_forward);
      cfg.rb.shifts.arnoldi_inverse =
          s.value("arnoldi_inverse", cfg.rb.shifts.arnoldi_inverse);
      cfg.rb.shifts.seed = s.value("seed", cfg.rb.shifts.seed);
    }
    if (o.contains("test_set")) {
      const auto& t = o.at("test_set");
      cfg.test_set.kind = t.value("kind", cfg.test_set.kind);
      cfg.test_set.per_dim = t.value("per_dim", cfg.test_set.per_dim);
      cfg.test_set.count = t.value("count", cfg.test_set.count);
      if (t.contains("points"))
        cfg.test_set.points =
            t.at("points").get<std::vector<std::vector<double>>>();
    }
  }
  if (j.contains("online")) {
    const auto& o = j.at("online");
    cfg.treatment =
        detail::treatment_from_name(o.value("treatment", "improper_bt"));
    cfg.markov_omega = o.value("markov_omega", cfg.markov_omega);
    if (o.contains("truncation")) {
      const auto& t = o.at("truncation");
      cfg.truncation.sigma_rel_tol =
          t.value("sigma_rel_tol", cfg.truncation.sigma_rel_tol);
      cfg.truncation.max_order =
          t.value("max_order", cfg.truncation.max_order);
      cfg.truncation.improper_rel_tol =
          t.value("improper_rel_tol", cfg.truncation.improper_rel_tol);
    }
  }
  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    if (e.contains("freq")) {
      const auto& f = e.at("freq");
      cfg.freq.log10_lo = f.value("log10_lo", cfg.freq.log10_lo);
      cfg.freq.log10_hi = f.value("log10_hi", cfg.freq.log10_hi);
      cfg.freq.count = f.value("count", cfg.freq.count);
      if (f.contains("omegas"))
        cfg.freq.explicit_omegas = f.at("omegas").get<std::vector<double>>();
    }
    if (e.contains("time")) {
      const auto& t = e.at("time");
      for (const auto& expr : t.at("input"))
        cfg.input.push_back(TimeExpr::from_json(expr));
      cfg.horizon = t.value("horizon", cfg.horizon);
      cfg.step = t.value("step", cfg.step);
    }
  }
  if (j.contains("sd")) {
    const auto& s = j.at("sd");
    cfg.sd.constant_gamma = s.value("constant_gamma", cfg.sd.constant_gamma);
    cfg.sd.safety = s.value("safety", cfg.sd.safety);
    cfg.sd.grid_per_dim = s.value("grid_per_dim", cfg.sd.grid_per_dim);
    const std::string est = s.value("estimate", "termwise");
    if (est == "termwise")
      cfg.sd.estimate = GammaEstimate::kThetaTermwise;
    else if (est == "exact")
      cfg.sd.estimate = GammaEstimate::kEigenvalueExact;
    else
      throw InvalidInput("config: unknown gamma estimate '" + est + "'");
    if (s.contains("explicit_gamma") && !s.at("explicit_gamma").is_null())
      cfg.sd.explicit_gamma = s.at("explicit_gamma").get<double>();
  }
  return cfg;
}

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  if (!generator.is_null()) j["system"]["generator"] = generator;
  if (!bundle_path.empty()) j["system"]["bundle"] = bundle_path;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["threads"] = threads;
  j["offline"] = {
      {"tol", rb.tol},
      {"estimator",
       rb.estimator == EstimatorKind::kDelta1 ? "delta1" : "delta2"},
      {"max_samples", rb.max_samples},
      {"lradi",
       {{"tol", rb.lradi.tol},
        {"max_iter", rb.lradi.max_iter},
        {"defect_tol", rb.lradi.defect_tol},
        {"compress_tol", rb.lradi.compress_tol}}},
      {"shifts",
       {{"num", rb.shifts.num},
        {"tol", rb.shifts.tol},
        {"arnoldi_forward", rb.shifts.arnoldi_forward},
        {"arnoldi_inverse", rb.shifts.arnoldi_inverse},
        {"seed", rb.shifts.seed}}}};
  nlohmann::json ts{{"kind", test_set.kind}};
  if (test_set.kind == "grid") ts["per_dim"] = test_set.per_dim;
  if (test_set.kind == "random") ts["count"] = test_set.count;
  if (test_set.kind == "list") ts["points"] = test_set.points;
  j["offline"]["test_set"] = ts;
  j["online"] = {{"treatment", detail::treatment_name(treatment)},
                 {"markov_omega", markov_omega},
                 {"truncation",
                  {{"sigma_rel_tol", truncation.sigma_rel_tol},
                   {"max_order", truncation.max_order},
                   {"improper_rel_tol", truncation.improper_rel_tol}}}};
  j["evaluate"]["freq"] = {{"log10_lo", freq.log10_lo},
                           {"log10_hi", freq.log10_hi},
                           {"count", freq.count}};
  if (!freq.explicit_omegas.empty())
    j["evaluate"]["freq"]["omegas"] = freq.explicit_omegas;
  if (!input.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : input) arr.push_back(e.to_json());
    j["evaluate"]["time"] = {{"input", arr},
                             {"horizon", horizon},
                             {"step", step}};
  }
  j["sd"] = {{"constant_gamma", sd.constant_gamma},
             {"safety", sd.safety},
             {"grid_per_dim", sd.grid_per_dim},
             {"estimate", sd.estimate == GammaEstimate::kThetaTermwise
                              ? "termwise"
                              : "exact"}};
  if (sd.explicit_gamma) j["sd"]["explicit_gamma"] = *sd.explicit_gamma;
  return j;
}

}  // namespace daemor

#endif  // DAEMOR_HARNESS_HPP
