// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gaugeflow/experiments.hpp"

using namespace gaugeflow;
namespace fs = std::filesystem;

namespace {

struct Seeded {
  Group group;
  int label;
};

const std::vector<Seeded> kClasses = {
    {Group::U1, 0}, {Group::U1, 1}, {Group::U1, 2}, {Group::SU2, 0}, {Group::SU2, 1}};

std::string tag(const Seeded& s) { return group_name(s.group) + "/" + std::to_string(s.label); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d  %-28s %s  (%.1f s)\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class F>
void criterion(int id, const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, name, ok, detail, s);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------

bool energy_identity(std::string& detail) {
  const int n = 256, per_group = 100;
  double worst = 0.0;
  for (Group g : {Group::U1, Group::SU2}) {
    const std::vector<int> labels = g == Group::U1 ? std::vector<int>{0, 1, 2} : std::vector<int>{0, 1};
    const SphereGrid grid(n, n);
    for (int q = 0; q < per_group; ++q) {
      const RadialGaugeField u = random_connection(grid, g, 1000 + q, labels[q % labels.size()], 2.0, 0.1);
      const double ym = ym_energy(u);
      const double rhs = 0.5 * loop_energy(holonomy(u)) + ym_energy(decompose(u).m);
      worst = std::max(worst, std::abs(ym - rhs) / std::max(ym, 1e-6));
    }
  }
  // Discretization order: successive differences of YM_h over N = 64, 128, 256.
  double min_ratio = HUGE_VAL;
  for (Group g : {Group::U1, Group::SU2})
    for (int q = 0; q < 5; ++q) {
      double y[3];
      for (int p = 0; p < 3; ++p) {
        const int m = 64 << p;
        y[p] = ym_energy(random_connection(SphereGrid(m, m), g, 2000 + q, q % 2, 2.0, 0.1));
      }
      min_ratio = std::min(min_ratio, (y[0] - y[1]) / (y[1] - y[2]));
    }
  detail = "max residual " + num(worst) + ", min doubling ratio " + num(min_ratio);
  return worst <= 1e-3 && min_ratio >= 3.5;
}

bool energy_inequality(std::string& detail) {
  const int n = 256;
  const SphereGrid grid(n, n);
  double min_slack = HUGE_VAL;
  for (Group g : {Group::U1, Group::SU2})
    for (int q = 0; q < 100; ++q) {
      const RadialGaugeField u = random_connection(grid, g, 3000 + q, g == Group::U1 ? q % 3 : q % 2, 2.0, 0.1);
      const double ym = ym_energy(u);
      min_slack = std::min(min_slack, ym - 0.5 * loop_energy(holonomy(u)) + 1e-3 * std::max(ym, 1.0));
    }
  double max_gap = 0.0;
  for (const Seeded& s : kClasses) {
    const RadialGaugeField u = geodesic_connection(grid, s.group, class_generator(s.group, s.label));
    max_gap = std::max(max_gap, std::abs(ym_energy(u) - 0.5 * loop_energy(holonomy(u))));
  }
  detail = "min slack " + num(min_slack) + ", max gap at geodesics " + num(max_gap);
  return min_slack >= 0.0 && max_gap <= 1e-8;
}

// Shared by criteria 3 and 5.
struct FlowRun {
  Seeded cls;
  int seed;
  YmTrajectory tr;
};
std::vector<FlowRun> flow_runs;

bool critical_correspondence(std::string& detail) {
  const SphereGrid grid(32, 64);
  YmFlowOptions opt;
  opt.stop_gradient = 1e-6;
  opt.record_every = 1;
  std::ostringstream miss;
  int ok_count = 0, total = 0;
  for (const Seeded& s : kClasses) {
    int bad = 0, wrong_class = 0;
    for (int q = 0; q < 20; ++q) {
      const int seed = 4000 + 1000 * static_cast<int>(s.group) + 100 * s.label + q;
      const RadialGaugeField u0 = random_connection(grid, s.group, seed, s.label, 2.0, 0.1);
      YmTrajectory tr;
      try {
        tr = ym_flow_run(u0, 50.0, 0.1, opt);
      } catch (const Error& e) {
        ++total;
        ++bad;
        miss << " " << tag(s) << " seed " << seed << ": " << e.what() << ";";
        continue;
      }
      const GroupLoop x = tr.holonomies.back();
      const Spectral sp(x.size());
      const double resid = derivative(loop_derivative(x, sp), sp).max_abs();
      const bool conv = tr.gradient_norms.back() < 1e-6;
      const bool same = class_label(x) == s.label;
      ++total;
      if (conv && resid < 1e-5 && same) ++ok_count;
      else ++bad;
      if (!same) ++wrong_class;
      flow_runs.push_back({s, seed, std::move(tr)});
    }
    if (bad) miss << " " << tag(s) << ": " << bad << " failed (" << wrong_class << " changed class);";
  }
  detail = std::to_string(ok_count) + "/" + std::to_string(total) + " converged in class." + miss.str();
  return ok_count == total;
}

bool index_match(std::string& detail) {
  struct Setting {
    int n_t, n_modes;
  };
  const std::vector<Setting> settings = {{128, 16}, {256, 16}, {128, 32}};
  std::ostringstream out;
  bool ok = true;
  for (const Seeded& s : kClasses) {
    const Coords eta = class_generator(s.group, s.label);
    std::vector<int> ym_idx;
    int loop_ref = -1;
    for (const Setting& st : settings) {
      const RadialGaugeField u = ym_connection_from_geodesic(SphereGrid(24, st.n_t), s.group, eta);
      const int ym = spectrum_counts(ym_hessian_reduced(u, st.n_modes).matrix).index;
      const int lp = index_nullity(GroupLoop::one_parameter(s.group, st.n_t, eta)).index;
      if (loop_ref < 0) loop_ref = lp;
      ok = ok && ym == lp && lp == loop_ref;
      ym_idx.push_back(ym);
    }
    out << " " << tag(s) << " " << loop_ref << "=" << ym_idx[0];
    if (ym_idx[1] != ym_idx[0] || ym_idx[2] != ym_idx[0]) out << "(unstable)";
    ok = ok && ym_idx[1] == ym_idx[0] && ym_idx[2] == ym_idx[0];
  }
  detail = "loop=ym:" + out.str();
  return ok;
}

bool monotonicity(std::string& detail) {
  double worst_ym = -HUGE_VAL, worst_loop = -HUGE_VAL;
  int heat_runs = 0;
  for (const FlowRun& r : flow_runs) {
    for (size_t q = 1; q < r.tr.energies.size(); ++q)
      worst_ym = std::max(worst_ym, r.tr.energies[q] - r.tr.energies[q - 1]);
  }
  // heat flow from the initial holonomy of every fifth run
  for (size_t q = 0; q < flow_runs.size(); q += 5) {
    const FlowRun& r = flow_runs[q];
    const GroupLoop x0 = holonomy(random_connection(SphereGrid(32, 64), r.cls.group, r.seed, r.cls.label, 2.0, 0.1));
    const double dt = x0.dt();
    const LoopTrajectory lt = heat_flow_run(x0, 2.0, 0.1 * dt * dt, {});
    for (size_t p = 1; p < lt.energies.size(); ++p)
      worst_loop = std::max(worst_loop, lt.energies[p] - lt.energies[p - 1]);
    ++heat_runs;
  }
  detail = "max YM step increase " + num(worst_ym) + " over " + std::to_string(flow_runs.size()) +
           " runs, max E step increase " + num(worst_loop) + " over " + std::to_string(heat_runs) + " runs";
  return !flow_runs.empty() && worst_ym <= 1e-9 && worst_loop <= 1e-9;
}

// Hessian restricted to trigonometric directions of degree <= K; the full
// nodal basis is not a fair comparison because spectral differentiation of
// x exp(xi) aliases for grid-scale xi.
bool hessian_consistency(std::string& detail) {
  const int n = 64, K = 8;
  const double h = 1e-4;
  double worst_rel = 0.0, worst_sym = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Group g = rep % 2 ? Group::SU2 : Group::U1;
    const int d = algebra_dim(g), m = n * d, nb = (2 * K + 1) * d;
    std::mt19937_64 rng(5000 + rep);
    std::normal_distribution<double> nd(0.0, 1.0);
    AlgebraLoop z(g, n);
    for (int k = 1; k <= 3; ++k)
      for (int a = 0; a < d; ++a) {
        const double ca = 0.3 * nd(rng) / k, sa = 0.3 * nd(rng) / k;
        for (int j = 0; j < n; ++j) {
          const double t = 2.0 * std::numbers::pi * j / n;
          z.at(j)[a] += ca * (1.0 - std::cos(k * t)) + sa * std::sin(k * t);
        }
      }
    const GroupLoop x = right_exp(GroupLoop::one_parameter(g, n, class_generator(g, rep % 3 == 0 ? 0 : 1)), z);
    const Eigen::MatrixXd H = loop_hessian_matrix(x).matrix;
    worst_sym = std::max(worst_sym, (H - H.transpose()).cwiseAbs().maxCoeff());
    const double dt = x.dt();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, nb);
    int c = 0;
    for (int k = 0; k <= K; ++k)
      for (int s = 0; s < (k ? 2 : 1); ++s)
        for (int a = 0; a < d; ++a, ++c)
          for (int j = 0; j < n; ++j) P(j * d + a, c) = s ? std::sin(k * j * dt) : std::cos(k * j * dt);
    const Eigen::MatrixXd HP = P.transpose() * H * P * dt;
    auto E = [&](int i, double si, int j, double sj) {
      AlgebraLoop v(g, n);
      for (int q = 0; q < m; ++q) v.c[q] = si * P(q, i) + sj * P(q, j);
      return loop_energy(right_exp(x, v));
    };
    Eigen::MatrixXd F(nb, nb);
    for (int i = 0; i < nb; ++i)
      for (int j = i; j < nb; ++j)
        F(i, j) = F(j, i) = (E(i, h, j, h) - E(i, h, j, -h) - E(i, -h, j, h) + E(i, -h, j, -h)) / (4 * h * h);
    worst_rel = std::max(worst_rel, (HP - F).norm() / HP.norm());
  }
  detail = "max relative error " + num(worst_rel) + ", max asymmetry " + num(worst_sym);
  return worst_rel <= 1e-5 && worst_sym <= 1e-10;
}

bool morse_engine(std::string& detail) {
  std::ostringstream out;
  bool ok = true;
  for (const std::string name : {"sphere-height", "sphere-z2", "sphere-perturbed", "torus-flat", "torus-tilted"}) {
    const SurfaceFixture fx = fixture_by_name(name);
    const FixtureComplex a = fixture_complex(fx);
    const FixtureComplex b = fixture_complex(fx, ShootingOptions{}.refined());
    bool dd = true;
    for (const auto& [k, dk] : a.complex.boundary)
      if (a.complex.boundary.count(k - 1)) dd = dd && (a.complex.boundary.at(k - 1) * dk).is_zero();
    bool stable = a.counts.size() == b.counts.size();
    for (size_t q = 0; stable && q < a.counts.size(); ++q) stable = ((a.counts[q].count ^ b.counts[q].count) & 1) == 0;
    const std::vector<int> betti = homology_mod2(a.complex);
    const bool good = dd && stable && betti == expected_betti(name) && a.flagged + b.flagged == 0;
    out << " " << name << "(" << betti[0] << betti[1] << betti[2] << (good ? "" : "!") << ")";
    ok = ok && good;
  }
  detail = "betti:" + out.str();
  return ok;
}

bool theta_inverse(std::string& detail) {
  std::ostringstream out;
  bool ok = true;
  for (const std::string name : {"sphere-height", "sphere-perturbed", "torus-tilted"}) {
    const SurfaceFixture fp = fixture_by_name(name);
    const SurfaceFixture fm = raised_fixture(fp, 0.2);
    const FixtureComplex cm = fixture_complex(fm), cp = fixture_complex(fp);
    const FixtureTheta th = fixture_theta(fm, fp, cm.complex, cp.complex);
    const bool chain = verify_chain_map(th.theta, cm.complex, cp.complex).ok;
    bool tri = false, iso = false;
    try {
      const InversionResult inv = action_order_and_invert(th.theta, cm.complex, cp.complex);
      tri = true;
      iso = inv.all_iso;
    } catch (const TriangularityViolation&) {
    }
    out << " " << name << "(chain " << chain << ", triangular " << tri << ", iso " << iso << ")";
    ok = ok && chain && tri && iso && th.flagged == 0;
  }
  detail = out.str();
  return ok;
}

bool determinism(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / ("gaugeflow_acceptance_" + std::to_string(::getpid()));
  int compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(GAUGEFLOW_CONFIGS)) {
    if (entry.path().extension() != ".cfg") continue;
    const ExperimentConfig cfg = parse_config(read_file(entry.path().string()));
    std::string dirs[2];
    for (int run = 0; run < 2; ++run) {
      dirs[run] = (root / (entry.path().stem().string() + "_" + std::to_string(run))).string();
      const std::string cmd = std::string("\"") + GAUGEFLOW_CLI + "\" " + cfg.kind + " --config \"" +
                              entry.path().string() + "\" --out \"" + dirs[run] + "\" > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      if (rc == -1 || !WIFEXITED(rc) || WEXITSTATUS(rc) > 1) throw NumericalFailure("CLI failed on " + entry.path().string());
    }
    for (const auto& f : fs::directory_iterator(dirs[0])) {
      ++compared;
      const fs::path other = fs::path(dirs[1]) / f.path().filename();
      if (!fs::exists(other) || read_file(f.path().string()) != read_file(other.string())) ++differing;
    }
  }
  fs::remove_all(root);
  detail = std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ";
  return compared > 0 && differing == 0;
}

}  // namespace

int main() {
  criterion(1, "energy identity", energy_identity);
  criterion(2, "energy inequality", energy_inequality);
  criterion(3, "critical correspondence", critical_correspondence);
  criterion(4, "index/nullity match", index_match);
  criterion(5, "flow monotonicity", monotonicity);
  criterion(6, "Hessian consistency", hessian_consistency);
  criterion(7, "Morse engine", morse_engine);
  criterion(8, "Theta chain map + inverse", theta_inverse);
  criterion(9, "determinism", determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures ? 1 : 0;
}
