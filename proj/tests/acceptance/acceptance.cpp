// One line per acceptance criterion: number, PASS/FAIL, wall time, summary.
// Exit status is the number of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "experiment.hpp"
#include "loopsoup/graph_io.hpp"
#include "loopsoup/green.hpp"
#include "loopsoup/stats.hpp"
#include "loopsoup/verify.hpp"

using namespace loopsoup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      summary += " [failed: " + what + "]";
    }
  }
};

int threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Domain core(const std::string& spec, int g, int killing) {
  auto b = make_builtin(spec, g, killing);
  return Domain(b.graph, b.core);
}

VerifyParams exact(int L_max, int max_pieces = 2) {
  VerifyParams p;
  p.L_max = L_max;
  p.max_pieces = max_pieces;
  p.seed = 2024;
  return p;
}

VerifyParams monte_carlo(int L_max, long samples) {
  auto p = exact(L_max);
  p.mode = VerifyMode::MonteCarlo;
  p.samples = samples;
  p.threads = threads();
  return p;
}

const TestReport* find(const std::vector<TestReport>& reports, const std::string& prop) {
  for (const auto& r : reports) {
    if (r.prop == prop) return &r;
  }
  return nullptr;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Every report behaves as expected and every control fails by a margin.
void judge(Outcome& o, const std::vector<TestReport>& reports, double control_margin = 0.0) {
  for (const auto& r : reports) {
    o.require(r.as_expected(), r.prop + " " + r.statistic_name + "=" + fmt(r.statistic));
    if (r.positive_control && control_margin > 0) {
      o.require(r.statistic > control_margin, r.prop + " below " + fmt(control_margin));
    }
  }
}

std::string brief(const std::vector<TestReport>& reports) {
  std::string s;
  for (const auto& r : reports) {
    s += " " + r.prop + "=" + fmt(r.statistic);
  }
  return s;
}

// Σ over classes of length <= L of μ equals Σ_{n<=L} trace(P^n)/n.
Outcome measure_consistency() {
  Outcome o;
  const Domain d = core("complete:3", 2, 0);
  const auto P = killed_transition_exact(d);
  const int n = d.size();
  std::vector<Rational> power = P;
  Rational traces = 0;
  int next = 1;
  for (int L : {4, 6, 8}) {
    for (; next <= L; ++next) {
      if (next > 1) {
        std::vector<Rational> product(static_cast<std::size_t>(n * n), Rational(0));
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) product[i * n + j] += power[i * n + k] * P[k * n + j];
        power = std::move(product);
      }
      Rational trace = 0;
      for (int i = 0; i < n; ++i) trace += power[i * n + i];
      traces += trace / next;
    }
    const auto catalog = enumerate_loops(d, L, Orientation::Oriented);
    const Rational total = catalog.total_mass();
    o.require(total == traces, "L_max=" + std::to_string(L));
    // P = (J - I)/2 has eigenvalues 1, -1/2, -1/2.
    Rational spectral = 0;
    for (int k = 1; k <= L; ++k) spectral += (1 + 2 * Rational(k % 2 ? -1 : 1, 1 << k)) / k;
    o.require(total == spectral, "spectral oracle at L_max=" + std::to_string(L));
    o.summary += " L" + std::to_string(L) + ":" + to_string(total);
  }
  return o;
}

Outcome prop1_exact() {
  Outcome o;
  const auto reports = verify_prop1(core("cycle:3", 3, 1), std::vector<VertexId>{0}, std::vector<VertexId>{1}, exact(6));
  judge(o, reports, 10 * 1e-9);
  o.require(find(reports, "prop1.control") != nullptr, "control present");
  o.summary += brief(reports) + " eta=" + std::to_string(find(reports, "prop1")->details["conditioning_values"].get<int>());
  return o;
}

Outcome prop2_prop5_exact() {
  Outcome o;
  const Domain d = core("cycle:3", 3, 1);
  const auto two = verify_prop2(d, std::vector<VertexId>{0}, std::vector<VertexId>{1}, exact(6));
  judge(o, two, 10 * 1e-9);
  const auto five = verify_prop5(d, std::vector<EdgeIndex>{d.usable_edges().front()}, exact(6));
  judge(o, five, 10 * 1e-9);
  const auto* all = find(five, "prop5.all-removed");
  o.require(all && all->details["uniform_same_site_pairings"].get<bool>(), "all-removed uniform exchange");
  o.require(find(two, "prop2.control") && find(five, "prop5.control"), "controls present");
  o.summary += brief(two) + brief(five);
  return o;
}

Outcome crossings_independence() {
  Outcome o;
  const Domain d = core("cycle:4", 3, 1);
  const std::vector<std::vector<VertexId>> sets{{0}, {2}};
  for (auto orientation : {Orientation::Oriented, Orientation::Unoriented}) {
    const auto ex = verify_prop1bis_3bis(d, sets, orientation, exact(8));
    judge(o, ex);
    o.summary += brief(ex);
    const auto mc = verify_prop1bis_3bis(d, sets, orientation, monte_carlo(8, 1'000'000));
    judge(o, mc);
    for (const auto& r : mc) {
      if (r.prop.ends_with(".independence")) {
        o.require(r.details["bins_tested"].get<int>() > 0, r.prop + " tested no bin");
        o.summary += " " + r.prop + ":p=" + fmt(r.statistic);
      }
    }
  }
  return o;
}

Outcome occupation_markov() {
  Outcome o;
  const Domain d = core("cycle:4", 3, 1);
  for (auto orientation : {Orientation::Unoriented, Orientation::Oriented}) {
    const auto reports = verify_occupation_markov(d, std::vector<VertexId>{0, 1}, orientation, exact(8));
    judge(o, reports);
    for (const auto& r : reports) {
      if (!r.positive_control) o.require(r.statistic <= 1e-12, r.prop + " cmi");
    }
    o.require(find(reports, reports.front().prop + ".tilted") != nullptr, "tilted check present");
    o.summary += brief(reports);
  }
  return o;
}

Outcome lejan() {
  Outcome o;
  const auto reports = verify_lejan(core("path:3", 3, 1), monte_carlo(6, 100'000));
  judge(o, reports);
  const auto* ks = find(reports, "lejan");
  o.require(ks && ks->statistic < 0.01, "ks < 0.01");
  const auto* control = find(reports, "lejan.control");
  o.require(control && control->positive_control && !control->pass, "alpha=1 control fails");
  o.summary += brief(reports);
  return o;
}

Outcome random_currents() {
  Outcome o;
  const Domain d = core("cycle:3", 3, 1);
  for (auto orientation : {Orientation::Unoriented, Orientation::Oriented}) {
    const auto reports = verify_random_currents(d, orientation, monte_carlo(6, 100'000));
    judge(o, reports);
    for (const auto& r : reports) {
      if (r.prop.ends_with(".parity") || r.prop.ends_with(".balance")) {
        o.require(r.statistic == 0.0, r.prop + " violated on some sample");
      }
    }
    o.summary += brief(reports);
  }
  return o;
}

Outcome wilson() {
  Outcome o;
  const auto b = make_builtin("cycle:4", 2, 0);
  const Domain d(b.graph, {1, 2, 3});  // vertex 0 is the absorbing root
  const auto reports = verify_wilson(d, monte_carlo(4, 1'000'000));
  judge(o, reports);
  o.summary += brief(reports) + " trees=" + fmt(spanning_tree_count(d));
  return o;
}

double length_law_p(const Domain& d, VertexId x, VertexId y, int max_length, int samples, std::uint64_t seed) {
  const auto green = green_function(d);
  std::vector<double> expected(static_cast<std::size_t>(max_length) + 2, 0.0);
  for (const auto& b : enumerate_bridges(d, x, y, max_length)) {
    expected[static_cast<std::size_t>(b.length())] += bridge_probability(d, green, b);
  }
  double below = 0;
  for (double p : expected) below += p;
  expected.back() = 1.0 - below;
  for (double& e : expected) e *= samples;
  std::vector<double> observed(expected.size(), 0.0);
  BridgeSampler sampler(d);
  Rng rng(seed, "bridge-lengths");
  for (int i = 0; i < samples; ++i) {
    observed[static_cast<std::size_t>(std::min(sampler.sample(x, y, rng).length(), max_length + 1))] += 1;
  }
  return chi_square_gof(observed, expected).p_value;
}

Outcome bridge_laws() {
  Outcome o;
  struct Fixture {
    const char* spec;
    int g;
    VertexId x, y;
    int max_length;
  };
  // Three length tests at 1e-3 each, Bonferroni-corrected.
  std::uint64_t seed = 1;
  for (const auto& f : {Fixture{"path:3", 3, 0, 2, 14}, Fixture{"cycle:4", 3, 0, 0, 14}, Fixture{"grid:2x3", 4, 0, 5, 10}}) {
    const double p = length_law_p(core(f.spec, f.g, 1), f.x, f.y, f.max_length, 100'000, seed++);
    o.require(p > 1e-3 / 3, std::string(f.spec) + " length law");
    o.summary += std::string(" ") + f.spec + ":p=" + fmt(p);
  }

  const int n = 100'000;
  double worst = 0;
  {
    BridgeSampler sampler(core("path:4", 3, 1));
    const std::vector<VertexId> X{0, 3}, Y{1, 2};
    const auto perms = all_permutations(2);
    double total = 0;
    std::vector<double> w;
    for (const auto& s : perms) total += w.emplace_back(permutation_weight<double>(sampler.green(), X, Y, s));
    std::map<std::vector<int>, int> counts;
    Rng rng(seed++, "permutations");
    for (int i = 0; i < n; ++i) ++counts[sample_unordered_bridge(sampler, X, Y, rng).permutation];
    for (std::size_t k = 0; k < perms.size(); ++k) {
      const double p = w[k] / total;
      worst = std::max(worst, std::abs(counts[perms[k]] - n * p) / std::sqrt(n * p * (1 - p)));
    }
  }
  {
    BridgeSampler sampler(core("cycle:4", 3, 1));
    const std::vector<VertexId> Z{0, 1, 2, 3};
    const auto pairings = all_pairings(4);
    double total = 0;
    std::vector<double> w;
    for (const auto& t : pairings) total += w.emplace_back(pairing_weight<double>(sampler.green(), Z, t));
    std::map<std::vector<std::pair<int, int>>, int> counts;
    Rng rng(seed++, "pairings");
    for (int i = 0; i < n; ++i) ++counts[sample_z_bridge(sampler, Z, rng).pairing];
    for (std::size_t k = 0; k < pairings.size(); ++k) {
      const double p = w[k] / total;
      worst = std::max(worst, std::abs(counts[pairings[k]] - n * p) / std::sqrt(n * p * (1 - p)));
    }
  }
  o.require(worst <= 3, "permutation/pairing frequencies within 3 sigma");
  o.summary += " max_z=" + fmt(worst);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome o;
  const std::string text =
      "graph = cycle:4\nseed = 77\nL_max = 8\n"
      "jobs = prop1, prop2, prop1bis, prop5, occupation-markov, lejan, random-currents, wilson, sample-soup, enumerate\n"
      "F1 = 0\nF2 = 1\nsets = 0 | 2\nremoved = 0\nsites = 0 1\n"
      "prop1.mode = monte-carlo\nprop1.samples = 20000\n"
      "prop1bis.mode = monte-carlo\nprop1bis.samples = 20000\n"
      "lejan.samples = 100000\nrandom-currents.samples = 10000\noccupation-markov.F1 = 0 1\n"
      "wilson.graph = cycle:4\nwilson.g = 2\nwilson.killing = 0\nwilson.domain = 1 2 3\nwilson.samples = 20000\n"
      "sample-soup.samples = 500\nenumerate.L_max = 6\n";
  const fs::path base = fs::temp_directory_path() / "loopsoup_acceptance";
  fs::remove_all(base);
  std::istringstream in(text);
  auto config = loopsoup::cli::Config::parse(in, "determinism.cfg");
  config.set("threads=" + std::to_string(threads()));
  const auto a = loopsoup::cli::run(config, {base / "a", false, true});
  const auto b = loopsoup::cli::run(config, {base / "b", true, true});
  // Replaying the resolved config written by the first run.
  auto replay = loopsoup::cli::Config::load(base / "a" / "config.resolved");
  loopsoup::cli::run(replay, {base / "c", false, true});

  int files = 0;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    const auto name = entry.path().filename();
    const auto bytes = slurp(entry.path());
    o.require(bytes == slurp(base / "b" / name), name.string() + " differs under --parallel");
    o.require(bytes == slurp(base / "c" / name), name.string() + " differs on replay");
    ++files;
  }
  o.require(files > 5, "outputs written");
  o.require(!a.failed && !b.failed, "run verdict");
  o.summary += " files=" + std::to_string(files) + " verdict=" + a.report["verdict"].get<std::string>();
  fs::remove_all(base);
  return o;
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "measure consistency", 10, measure_consistency},
      {2, "prop1 exact", 300, prop1_exact},
      {3, "prop2 and prop5 exact", 600, prop2_prop5_exact},
      {4, "crossing independence", 600, crossings_independence},
      {5, "occupation field markov", 300, occupation_markov},
      {6, "le jan isomorphism", 120, lejan},
      {7, "random currents", 300, random_currents},
      {8, "wilson", 600, wilson},
      {9, "bridge laws", 120, bridge_laws},
      {10, "determinism", 600, determinism},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string(" [error: ") + e.what() + "]";
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(seconds <= c.budget_seconds, "over the " + fmt(c.budget_seconds) + " s budget");
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d %s %8.2fs  %s:%s\n", c.number, o.pass ? "PASS" : "FAIL", seconds, c.name, o.summary.c_str());
    std::fflush(stdout);
  }
  return failed;
}
