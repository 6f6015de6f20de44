#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gaugeflow/cascades.hpp"
#include "gaugeflow/config.hpp"
#include "gaugeflow/geodesics.hpp"
#include "gaugeflow/io.hpp"
#include "gaugeflow/loop_flow.hpp"
#include "gaugeflow/sphere.hpp"

namespace gaugeflow {

struct OutputFile {
  std::string name;
  std::string content;
};

struct Report {
  std::string kind;
  bool pass = true;
  std::vector<std::pair<std::string, std::string>> summary;
  std::vector<OutputFile> files;

  void put(const std::string& k, const std::string& v) { summary.emplace_back(k, v); }
  void put(const std::string& k, double v) { summary.emplace_back(k, fmt(v)); }
  void put(const std::string& k, int v) { summary.emplace_back(k, fmt(v)); }

  std::string summary_csv(const ExperimentConfig& cfg) const {
    CsvWriter w({"key", "value"});
    w.meta("experiment", kind).conventions();
    if (cfg.seed) w.meta("seed", std::to_string(*cfg.seed));
    for (const auto& [k, v] : summary) w.row({k, v});
    w.row({"pass", pass ? "1" : "0"});
    return w.str();
  }
};

inline constexpr double kEnergyConstant = 0.5;

namespace detail {

inline std::uint64_t need_seed(const ExperimentConfig& c) {
  if (!c.seed) throw InvalidInput(c.kind + ": a seed is required (config 'seed' or --seed)");
  return *c.seed;
}

inline RadialGaugeField initial_field(const ExperimentConfig& c) {
  if (!c.init.empty()) {
    RadialGaugeField u = read_field_checkpoint(read_file(c.init));
    if (u.group != c.group) throw InvalidInput("checkpoint group differs from config");
    return u;
  }
  return random_connection(SphereGrid(c.n_r, c.n_t), c.group, need_seed(c), c.class_label, c.smoothness,
                           c.amplitude);
}

inline double loop_step(const ExperimentConfig& c, int n) {
  const double dt = 2.0 * std::numbers::pi / n;
  const double limit = 0.2 * dt * dt;
  if (c.ds_loop > 0.0) {
    if (c.ds_loop > limit) throw InvalidInput("ds_loop exceeds the heat-flow stability limit " + fmt(limit));
    return c.ds_loop;
  }
  return 0.5 * limit;
}

inline std::string ym_trajectory_csv(const YmTrajectory& tr, const ExperimentConfig& c, double s_offset) {
  CsvWriter w({"s", "ym", "gradient_norm"});
  w.meta("group", group_name(c.group)).meta("N_r", fmt(c.n_r)).meta("N_t", fmt(c.n_t)).conventions();
  for (size_t q = 0; q < tr.s.size(); ++q) w.row({fmt(tr.s[q] + s_offset), fmt(tr.energies[q]), fmt(tr.gradient_norms[q])});
  return w.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline Report run_flow_ym(const ExperimentConfig& c) {
  Report r{"flow-ym"};
  const RadialGaugeField u0 = detail::initial_field(c);
  YmFlowOptions opt;
  opt.stop_gradient = c.stop_gradient;
  opt.record_every = c.record_every;
  const YmTrajectory tr = ym_flow_run(u0, c.s_total, c.ds, opt);
  const GroupLoop x = tr.holonomies.back();
  const double resid = derivative(loop_derivative(x), Spectral(x.size())).max_abs();
  r.put("ym_initial", tr.energies.front());
  r.put("ym_final", tr.energies.back());
  r.put("gradient_final", tr.gradient_norms.back());
  r.put("accepted_steps", tr.accepted);
  r.put("rejected_steps", tr.rejected);
  r.put("max_step_increase", tr.accepted ? tr.max_increase : 0.0);
  r.put("max_closure_gap", tr.max_closure_gap);
  r.put("holonomy_geodesic_residual", resid);
  r.put("class_label_final", class_label(x));
  r.pass = tr.accepted == 0 || tr.max_increase <= 1e-9;
  if (c.stop_gradient > 0.0) r.pass = r.pass && tr.converged;
  r.files.push_back({"trajectory.csv", detail::ym_trajectory_csv(tr, c, 0.0)});
  r.files.push_back({"final_field.csv", field_checkpoint(tr.final_field, tr.s.back(), c.seed.value_or(0))});
  r.files.push_back({"final_holonomy.csv", loop_checkpoint(x, tr.s.back(), c.seed.value_or(0))});
  return r;
}

inline Report run_flow_loop(const ExperimentConfig& c) {
  Report r{"flow-loop"};
  GroupLoop x0;
  if (!c.init.empty()) {
    x0 = read_loop_checkpoint(read_file(c.init));
  } else {
    x0 = holonomy(detail::initial_field(c));
  }
  const double ds = detail::loop_step(c, x0.size());
  HeatFlowOptions opt;
  opt.record_every = std::max(c.record_every, 1);
  opt.stop_gradient = c.stop_gradient;
  const LoopTrajectory tr = heat_flow_run(x0, c.s_total, ds, opt);
  CsvWriter w({"s", "energy", "gradient_l2", "gradient_max"});
  w.meta("group", group_name(x0.group)).meta("N_t", fmt(x0.size())).meta("ds", fmt(ds)).conventions();
  for (size_t q = 0; q < tr.s.size(); ++q)
    w.row({fmt(tr.s[q]), fmt(tr.energies[q]), fmt(tr.gradient_norms[q]), fmt(tr.gradient_max[q])});
  r.put("ds", ds);
  r.put("steps", tr.steps);
  r.put("energy_initial", tr.energies.front());
  r.put("energy_final", tr.energies.back());
  r.put("gradient_max_final", tr.gradient_max.back());
  r.put("max_step_increase", tr.max_increase);
  r.put("monotonicity_violations", tr.violations);
  r.pass = tr.violations == 0;
  r.files.push_back({"trajectory.csv", w.str()});
  r.files.push_back({"final_loop.csv", loop_checkpoint(tr.loops.back(), tr.s.back(), c.seed.value_or(0))});
  return r;
}

/// YM flow on [-S, 0], x(0) = Phi(A(0)), heat flow on [0, S].
inline Report run_hybrid(const ExperimentConfig& c) {
  Report r{"hybrid"};
  const RadialGaugeField u0 = detail::initial_field(c);
  YmFlowOptions opt;
  opt.stop_gradient = c.stop_gradient;
  opt.record_every = c.record_every;
  const YmTrajectory ym = ym_flow_run(u0, c.s_total, c.ds, opt);
  const GroupLoop x0 = basepoint_normalize(ym.holonomies.back());
  const double ds = detail::loop_step(c, x0.size());
  HeatFlowOptions hopt;
  hopt.record_every = std::max(1, c.record_every);
  hopt.stop_gradient = c.stop_gradient;
  const LoopTrajectory lt = heat_flow_run(x0, c.s_total, ds, hopt);

  const double S = ym.s.back();
  CsvWriter w({"s", "side", "value", "scaled_value"});
  w.meta("group", group_name(c.group)).meta("N_r", fmt(c.n_r)).meta("N_t", fmt(c.n_t)).meta("ds_loop", fmt(ds)).conventions();
  for (size_t q = 0; q < ym.s.size(); ++q) w.row({fmt(ym.s[q] - S), "ym", fmt(ym.energies[q]), fmt(ym.energies[q])});
  for (size_t q = 0; q < lt.s.size(); ++q)
    w.row({fmt(lt.s[q]), "loop", fmt(lt.energies[q]), fmt(kEnergyConstant * lt.energies[q])});

  const double ym0 = ym.energies.back(), e0 = lt.energies.front();
  const double gap = ym0 - kEnergyConstant * e0;
  bool mono = ym.accepted == 0 || ym.max_increase <= 1e-9;
  mono = mono && lt.violations == 0;
  const double slack = c.tol * std::max(ym0, 1.0);
  r.put("ym_start", ym.energies.front());
  r.put("ym_junction", ym0);
  r.put("loop_energy_junction", e0);
  r.put("junction_gap", gap);
  r.put("ym_gradient_end", ym.gradient_norms.back());
  r.put("loop_geodesic_residual_end", lt.gradient_max.back());
  r.put("loop_steps", lt.steps);
  r.put("ym_steps", ym.accepted);
  r.put("monotone", mono ? 1 : 0);
  r.pass = mono && gap >= -slack;
  r.files.push_back({"staircase.csv", w.str()});
  return r;
}

inline Report run_energy_identity(const ExperimentConfig& c) {
  Report r{"energy-identity"};
  const std::uint64_t seed = detail::need_seed(c);
  const std::vector<int> labels = c.group == Group::U1 ? std::vector<int>{0, 1, 2} : std::vector<int>{0, 1};
  const SphereGrid grid(c.n_r, c.n_t);
  CsvWriter w({"sample", "class", "seed", "ym", "loop_energy", "ym_m", "relative_residual", "inequality_slack"});
  w.meta("group", group_name(c.group)).meta("N_r", fmt(c.n_r)).meta("N_t", fmt(c.n_t)).conventions();
  double worst = 0.0, worst_slack = HUGE_VAL;
  for (int q = 0; q < c.samples; ++q) {
    const int label = labels[q % labels.size()];
    const std::uint64_t s = seed + static_cast<std::uint64_t>(q);
    const RadialGaugeField u = random_connection(grid, c.group, s, label, c.smoothness, c.amplitude);
    const double ym = ym_energy(u);
    const double e = loop_energy(holonomy(u));
    const double ym_m = ym_energy(decompose(u).m);
    const double res = std::abs(ym - (kEnergyConstant * e + ym_m)) / std::max(ym, 1e-6);
    const double slack = ym - kEnergyConstant * e + 1e-3 * std::max(ym, 1.0);
    worst = std::max(worst, res);
    worst_slack = std::min(worst_slack, slack);
    w.row({fmt(q), fmt(label), std::to_string(s), fmt(ym), fmt(e), fmt(ym_m), fmt(res), fmt(slack)});
  }
  r.put("max_relative_residual", worst);
  r.put("min_inequality_slack", worst_slack);
  r.pass = worst <= c.tol && worst_slack >= 0.0;
  r.files.push_back({"samples.csv", w.str()});
  return r;
}

inline Report run_geodesics(const ExperimentConfig& c) {
  Report r{"geodesics"};
  const auto recs = enumerate_geodesics(c.group, c.max_energy, c.n_t);
  CsvWriter w({"class_label", "energy", "orbit_dim", "index", "nullity"});
  w.meta("group", group_name(c.group)).meta("max_energy", fmt(c.max_energy)).meta("N_t", fmt(c.n_t)).conventions();
  bool sorted = true;
  for (size_t q = 0; q < recs.size(); ++q) {
    w.row({fmt(recs[q].class_label), fmt(recs[q].energy), fmt(recs[q].orbit_dim), fmt(recs[q].index), fmt(recs[q].nullity)});
    if (q && recs[q].energy < recs[q - 1].energy) sorted = false;
  }
  r.put("records", static_cast<int>(recs.size()));
  r.pass = sorted;
  r.files.push_back({"geodesics.csv", w.str()});
  return r;
}

inline Report run_index_match(const ExperimentConfig& c) {
  Report r{"index-match"};
  const SphereGrid grid(c.n_r, c.n_t);
  const Coords eta = class_generator(c.group, c.class_label);
  const RadialGaugeField u = ym_connection_from_geodesic(grid, c.group, eta);
  const ReducedHessian h = ym_hessian_reduced(u, c.n_modes);
  const IndexNullity ym = spectrum_counts(h.matrix);
  const IndexNullity lp = index_nullity(GroupLoop::one_parameter(c.group, c.n_t, eta));
  CsvWriter w({"side", "index", "nullity", "tol_zero", "lowest_eigenvalue"});
  w.meta("group", group_name(c.group)).meta("class", fmt(c.class_label)).meta("n_modes", fmt(c.n_modes))
      .meta("N_r", fmt(c.n_r)).meta("N_t", fmt(c.n_t)).conventions();
  w.row({"ym_reduced", fmt(ym.index), fmt(ym.nullity), fmt(ym.tol_zero), fmt(ym.eigenvalues[0])});
  w.row({"loop", fmt(lp.index), fmt(lp.nullity), fmt(lp.tol_zero), fmt(lp.eigenvalues[0])});
  r.put("ym_index", ym.index);
  r.put("loop_index", lp.index);
  r.pass = ym.index == lp.index;
  r.files.push_back({"index.csv", w.str()});
  return r;
}

// ---------------------------------------------------------------------------
// Fixtures by name.

inline SurfaceFixture fixture_by_name(const std::string& name) {
  if (name == "sphere-height") return sphere_height_fixture();
  if (name == "sphere-z2") return sphere_z2_fixture();
  if (name == "torus-flat") return flat_torus_fixture();
  if (name == "torus-tilted") return tilted_torus_fixture();
  if (name == "sphere-perturbed") return perturbed_sphere_fixture();
  throw InvalidInput("unknown fixture '" + name + "'");
}

inline std::vector<int> expected_betti(const std::string& name) {
  if (name.rfind("torus", 0) == 0) return {1, 2, 1};
  return {1, 0, 1};
}

inline std::string counts_csv(const std::vector<Generator>& gens, const CascadeCountTable& a,
                              const CascadeCountTable& b, const std::string& name) {
  CsvWriter w({"from", "to", "count", "count_refined", "method"});
  w.meta("fixture", name).conventions();
  for (size_t q = 0; q < a.size(); ++q)
    w.row({gens[a[q].from].name, gens[a[q].to].name, fmt(a[q].count), fmt(b[q].count), a[q].provenance});
  return w.str();
}

inline Report run_morse(const ExperimentConfig& c) {
  Report r{"morse"};
  const SurfaceFixture fx = fixture_by_name(c.fixture);
  const FixtureComplex base = fixture_complex(fx, c.shooting);
  const FixtureComplex fine = fixture_complex(fx, c.shooting.refined());
  bool stable = base.counts.size() == fine.counts.size();
  for (size_t q = 0; stable && q < base.counts.size(); ++q)
    stable = (base.counts[q].count & 1) == (fine.counts[q].count & 1);
  const std::vector<int> betti = homology_mod2(base.complex);
  std::string bs;
  for (size_t k = 0; k < betti.size(); ++k) bs += (k ? " " : "") + fmt(betti[k]);
  r.put("fixture", c.fixture);
  r.put("betti", bs);
  r.put("parity_stable", stable ? 1 : 0);
  r.put("flagged", base.flagged + fine.flagged);
  r.pass = betti == expected_betti(c.fixture) && stable && base.flagged + fine.flagged == 0;
  r.files.push_back({"counts.csv", counts_csv(fx.generators(), base.counts, fine.counts, c.fixture)});
  r.files.push_back({"homology.csv", homology_csv(base.complex, betti, c.fixture)});
  r.files.push_back({"complex.json", complex_json(base.complex).dump(2) + "\n"});
  return r;
}

inline Report run_theta(const ExperimentConfig& c) {
  Report r{"theta"};
  const SurfaceFixture fp = fixture_by_name(c.fixture);
  const SurfaceFixture fm = raised_fixture(fp, c.raise);
  const FixtureComplex cm = fixture_complex(fm, c.shooting);
  const FixtureComplex cp = fixture_complex(fp, c.shooting);
  const FixtureTheta th = fixture_theta(fm, fp, cm.complex, cp.complex, c.shooting);
  const ChainMapReport chain = verify_chain_map(th.theta, cm.complex, cp.complex);
  r.put("fixture", c.fixture);
  r.put("raise", c.raise);
  r.put("chain_map", chain.ok ? 1 : 0);
  r.put("flagged", cm.flagged + cp.flagged + th.flagged);
  nlohmann::json j = {{"complex_minus", complex_json(cm.complex)},
                      {"complex_plus", complex_json(cp.complex)},
                      {"theta", theta_json(th.theta)}};
  bool tri = false, iso = false;
  try {
    const InversionResult inv = action_order_and_invert(th.theta, cm.complex, cp.complex, 1.0);
    tri = true;
    iso = inv.all_iso;
    nlohmann::json invj = nlohmann::json::object();
    for (const auto& [k, m] : inv.inverse) invj[std::to_string(k)] = sparse_json(m);
    j["theta_ordered"] = theta_json(inv.ordered);
    j["theta_inverse"] = invj;
  } catch (const TriangularityViolation& e) {
    r.put("triangularity_witness", std::string(e.what()));
  }
  r.put("unit_upper_triangular", tri ? 1 : 0);
  r.put("homology_iso", iso ? 1 : 0);
  r.pass = chain.ok && tri && iso && cm.flagged + cp.flagged + th.flagged == 0;
  CsvWriter w({"from", "to", "count", "method"});
  w.meta("fixture", c.fixture).conventions();
  const auto gm = fm.generators(), gp = fp.generators();
  for (const auto& n : th.counts) w.row({gm[n.from].name, gp[n.to].name, fmt(n.count), n.provenance});
  r.files.push_back({"hybrid_counts.csv", w.str()});
  r.files.push_back({"theta.json", j.dump(2) + "\n"});
  return r;
}

inline Report run_experiment(const ExperimentConfig& c) {
  validate(c);
  if (c.kind == "flow-ym") return run_flow_ym(c);
  if (c.kind == "flow-loop") return run_flow_loop(c);
  if (c.kind == "hybrid") return run_hybrid(c);
  if (c.kind == "energy-identity") return run_energy_identity(c);
  if (c.kind == "geodesics") return run_geodesics(c);
  if (c.kind == "index-match") return run_index_match(c);
  if (c.kind == "morse") return run_morse(c);
  if (c.kind == "theta") return run_theta(c);
  throw InvalidInput("unknown experiment kind '" + c.kind + "'");
}

}  // namespace gaugeflow
