// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_BUNDLE_HPP
#define DAEMOR_BUNDLE_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "daemor/balanced_truncation.hpp"
#include "daemor/mm_io.hpp"
#include "daemor/reduced_basis.hpp"
#include "daemor/system.hpp"

namespace daemor {

// On-disk layout of a system bundle: one Matrix Market file per affine term
// (E_0.mtx, E_1.mtx, ..., A_0.mtx, ...), optional dense factor files
// (A_1_U.mtx / A_1_V.mtx) for low-rank terms, optional feedthrough files
// (P_0.mtx, ...), and system.json tying everything together. Reduced models
// reuse the same layout; their truncation data rides in the sidecar's
// "rom" object.

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw SerializationError("bundle: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out)
    throw SerializationError("bundle: cannot open " + path.string());
  out << j.dump(2) << "\n";
  if (!out)
    throw SerializationError("bundle: write failed for " + path.string());
}

inline nlohmann::json box_to_json(const ParamBox& box) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& b : box.bounds) a.push_back({b[0], b[1]});
  return a;
}

inline ParamBox box_from_json(const nlohmann::json& j) {
  ParamBox box;
  for (const auto& b : j)
    box.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  return box;
}

inline std::string kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::kStokesLike:
      return "stokes_like";
    case SystemKind::kMechanical:
      return "mechanical";
    case SystemKind::kGeneral:
      break;
  }
  return "general";
}

inline SystemKind kind_from_name(const std::string& s) {
  if (s == "stokes_like") return SystemKind::kStokesLike;
  if (s == "mechanical") return SystemKind::kMechanical;
  if (s == "general") return SystemKind::kGeneral;
  throw SerializationError("bundle: unknown system kind '" + s + "'");
}

inline nlohmann::json save_operator(const std::filesystem::path& dir,
                                    const std::string& name,
                                    const AffineMatrixOperator& op) {
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t k = 0; k < op.terms().size(); ++k) {
    const AffineTerm& t = op.terms()[k];
    const std::string base = name + "_" + std::to_string(k);
    write_matrix_market(dir / (base + ".mtx"), t.matrix);
    nlohmann::json jt{{"theta", t.theta.to_json()}, {"file", base + ".mtx"}};
    if (t.lowrank) {
      write_matrix_market(dir / (base + "_U.mtx"), t.lowrank->U);
      write_matrix_market(dir / (base + "_V.mtx"), t.lowrank->V);
      jt["lowrank"] = {{"U", base + "_U.mtx"}, {"V", base + "_V.mtx"}};
    }
    terms.push_back(std::move(jt));
  }
  return terms;
}

inline AffineMatrixOperator load_operator(const std::filesystem::path& dir,
                                          const nlohmann::json& jterms,
                                          Eigen::Index rows,
                                          Eigen::Index cols) {
  std::vector<AffineTerm> terms;
  for (const auto& jt : jterms) {
    AffineTerm t;
    t.theta = ThetaExpr::from_json(jt.at("theta"));
    t.matrix = read_matrix_market_sparse(dir / jt.at("file").get<std::string>());
    if (jt.contains("lowrank")) {
      LowRankPair lr;
      lr.U = read_matrix_market_dense(
          dir / jt.at("lowrank").at("U").get<std::string>());
      lr.V = read_matrix_market_dense(
          dir / jt.at("lowrank").at("V").get<std::string>());
      t.lowrank = std::move(lr);
    }
    terms.push_back(std::move(t));
  }
  return AffineMatrixOperator(rows, cols, std::move(terms));
}

}  // namespace detail

inline void save_system(const std::filesystem::path& dir,
                        const ParametricDaeSystem& sys,
                        const nlohmann::json& extra = nlohmann::json()) {
  sys.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "daemor-system-bundle";
  j["version"] = 1;
  j["order"] = sys.order();
  j["inputs"] = sys.inputs();
  j["outputs"] = sys.outputs();
  j["kind"] = detail::kind_name(sys.info.kind);
  j["saddle_n"] = sys.info.n;
  j["saddle_q"] = sys.info.q;
  j["index"] = sys.info.index;
  j["param_box"] = detail::box_to_json(sys.box);
  j["operators"]["E"] = detail::save_operator(dir, "E", sys.E);
  j["operators"]["A"] = detail::save_operator(dir, "A", sys.A);
  j["operators"]["B"] = detail::save_operator(dir, "B", sys.B);
  j["operators"]["C"] = detail::save_operator(dir, "C", sys.C);
  nlohmann::json poly = nlohmann::json::array();
  for (std::size_t k = 0; k < sys.feedthrough_poly.size(); ++k) {
    const std::string file = "P_" + std::to_string(k) + ".mtx";
    write_matrix_market(dir / file, sys.feedthrough_poly[k]);
    poly.push_back(file);
  }
  j["feedthrough_poly"] = poly;
  if (!extra.is_null()) j["extra"] = extra;
  detail::write_json_file(dir / "system.json", j);
}

inline ParametricDaeSystem load_system(const std::filesystem::path& dir,
                                       nlohmann::json* extra = nullptr) {
  const nlohmann::json j = detail::read_json_file(dir / "system.json");
  if (j.value("format", "") != "daemor-system-bundle")
    throw SerializationError("bundle: " + (dir / "system.json").string() +
                             " is not a system bundle");
  const auto N = j.at("order").get<Eigen::Index>();
  const auto m = j.at("inputs").get<Eigen::Index>();
  const auto p = j.at("outputs").get<Eigen::Index>();
  ParametricDaeSystem sys;
  sys.E = detail::load_operator(dir, j.at("operators").at("E"), N, N);
  sys.A = detail::load_operator(dir, j.at("operators").at("A"), N, N);
  sys.B = detail::load_operator(dir, j.at("operators").at("B"), N, m);
  sys.C = detail::load_operator(dir, j.at("operators").at("C"), p, N);
  sys.box = detail::box_from_json(j.at("param_box"));
  sys.info.kind = detail::kind_from_name(j.at("kind").get<std::string>());
  sys.info.n = j.value("saddle_n", Eigen::Index(0));
  sys.info.q = j.value("saddle_q", Eigen::Index(0));
  sys.info.index = j.value("index", 0);
  for (const auto& file : j.at("feedthrough_poly"))
    sys.feedthrough_poly.push_back(
        read_matrix_market_dense(dir / file.get<std::string>()));
  if (extra) *extra = j.value("extra", nlohmann::json());
  sys.validate();
  return sys;
}

/// A reduced model is itself a parameter-independent descriptor system; the
/// bundle carries its matrices as single constant terms.
inline ParametricDaeSystem rom_to_system(const Rom& rom) {
  auto constant_op = [](const Mat& M) {
    std::vector<AffineTerm> terms;
    terms.push_back({ThetaExpr::one(), M.sparseView(), std::nullopt});
    return AffineMatrixOperator(M.rows(), M.cols(), std::move(terms));
  };
  ParametricDaeSystem sys;
  sys.E = constant_op(rom.E);
  sys.A = constant_op(rom.A);
  sys.B = constant_op(rom.B);
  sys.C = constant_op(rom.C);
  sys.feedthrough_poly = rom.feedthrough_poly;
  return sys;
}

inline void save_rom(const std::filesystem::path& dir, const Rom& rom) {
  nlohmann::json extra;
  nlohmann::json& r = extra["rom"];
  r["r_p"] = rom.r_p;
  r["r_i"] = rom.r_i;
  r["sigma_proper"] =
      std::vector<double>(rom.sigma_proper.data(),
                          rom.sigma_proper.data() + rom.sigma_proper.size());
  r["sigma_improper"] = std::vector<double>(
      rom.sigma_improper.data(),
      rom.sigma_improper.data() + rom.sigma_improper.size());
  r["error_bound"] = rom.error_bound;
  r["coupling_defect"] = rom.coupling_defect;
  save_system(dir, rom_to_system(rom), extra);
}

inline Rom load_rom(const std::filesystem::path& dir) {
  nlohmann::json extra;
  const ParametricDaeSystem sys = load_system(dir, &extra);
  if (!extra.contains("rom"))
    throw SerializationError("bundle: " + dir.string() +
                             " has no reduced-model sidecar");
  const nlohmann::json& r = extra.at("rom");
  Rom rom;
  rom.E = sys.E.dense({});
  rom.A = sys.A.dense({});
  rom.B = sys.B.dense({});
  rom.C = sys.C.dense({});
  rom.feedthrough_poly = sys.feedthrough_poly;
  rom.r_p = r.at("r_p").get<Eigen::Index>();
  rom.r_i = r.at("r_i").get<Eigen::Index>();
  const auto sp = r.at("sigma_proper").get<std::vector<double>>();
  const auto si = r.at("sigma_improper").get<std::vector<double>>();
  rom.sigma_proper = Eigen::Map<const Vec>(sp.data(), sp.size());
  rom.sigma_improper = Eigen::Map<const Vec>(si.data(), si.size());
  rom.error_bound = r.at("error_bound").get<double>();
  rom.coupling_defect = r.at("coupling_defect").get<double>();
  return rom;
}

/// Reduced basis: dense factor in <prefix>.mtx, run record in <prefix>.json.
inline void save_basis(const std::filesystem::path& prefix,
                       const ReducedBasis& rb) {
  const std::filesystem::path dir = prefix.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_matrix_market(prefix.string() + ".mtx", rb.V_glob);
  nlohmann::json j;
  j["format"] = "daemor-reduced-basis";
  j["side"] = rb.side == EquationSide::kControllability ? "controllability"
                                                        : "observability";
  j["tol"] = rb.tol;
  j["sampled_params"] = rb.sampled_params;
  j["full_solves"] = rb.full_solves;
  j["final_max_estimator"] = rb.final_max_estimator;
  j["converged"] = rb.converged;
  j["abort_reason"] = rb.abort_reason;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : rb.history)
    hist.push_back({{"iteration", h.iteration},
                    {"chosen_mu", h.chosen_mu},
                    {"max_estimator", h.max_estimator},
                    {"basis_cols", h.basis_cols}});
  j["history"] = hist;
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : rb.final_reports) {
    nlohmann::json jr{{"mu", rep.mu},
                      {"delta1", rep.delta1},
                      {"residual_fro", rep.residual_fro},
                      {"alpha", rep.alpha},
                      {"online_rank", rep.online_rank}};
    if (rep.delta2) jr["delta2"] = *rep.delta2;
    reps.push_back(std::move(jr));
  }
  j["final_reports"] = reps;
  detail::write_json_file(prefix.string() + ".json", j);
}

inline ReducedBasis load_basis(const std::filesystem::path& prefix) {
  const nlohmann::json j =
      detail::read_json_file(prefix.string() + ".json");
  if (j.value("format", "") != "daemor-reduced-basis")
    throw SerializationError("bundle: " + prefix.string() +
                             ".json is not a reduced-basis sidecar");
  ReducedBasis rb;
  rb.V_glob = read_matrix_market_dense(prefix.string() + ".mtx");
  rb.side = j.at("side").get<std::string>() == "controllability"
                ? EquationSide::kControllability
                : EquationSide::kObservability;
  rb.tol = j.at("tol").get<double>();
  rb.sampled_params =
      j.at("sampled_params").get<std::vector<std::vector<double>>>();
  rb.full_solves = j.at("full_solves").get<int>();
  rb.final_max_estimator = j.at("final_max_estimator").get<double>();
  rb.converged = j.at("converged").get<bool>();
  rb.abort_reason = j.at("abort_reason").get<std::string>();
  for (const auto& h : j.at("history")) {
    GreedyIterationRecord rec;
    rec.iteration = h.at("iteration").get<int>();
    rec.chosen_mu = h.at("chosen_mu").get<std::vector<double>>();
    rec.max_estimator = h.at("max_estimator").get<double>();
    rec.basis_cols = h.at("basis_cols").get<Eigen::Index>();
    rb.history.push_back(std::move(rec));
  }
  for (const auto& jr : j.at("final_reports")) {
    EstimatorReport rep;
    rep.mu = jr.at("mu").get<std::vector<double>>();
    rep.delta1 = jr.at("delta1").get<double>();
    if (jr.contains("delta2")) rep.delta2 = jr.at("delta2").get<double>();
    rep.residual_fro = jr.at("residual_fro").get<double>();
    rep.alpha = jr.at("alpha").get<double>();
    rep.online_rank = jr.at("online_rank").get<Eigen::Index>();
    rb.final_reports.push_back(std::move(rep));
  }
  return rb;
}

/// Low-rank solution factor with a free-form sidecar (side, parameter,
/// residual history, shifts).
inline void save_factor(const std::filesystem::path& prefix, const Mat& Z,
                        const nlohmann::json& sidecar) {
  const std::filesystem::path dir = prefix.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_matrix_market(prefix.string() + ".mtx", Z);
  nlohmann::json j = sidecar;
  j["format"] = "daemor-lowrank-factor";
  detail::write_json_file(prefix.string() + ".json", j);
}

inline Mat load_factor(const std::filesystem::path& prefix,
                       nlohmann::json* sidecar = nullptr) {
  if (sidecar) {
    *sidecar = detail::read_json_file(prefix.string() + ".json");
    if (sidecar->value("format", "") != "daemor-lowrank-factor")
      throw SerializationError("bundle: " + prefix.string() +
                               ".json is not a factor sidecar");
  }
  return read_matrix_market_dense(prefix.string() + ".mtx");
}

}  // namespace daemor

#endif  // DAEMOR_BUNDLE_HPP
