#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "loopsoup/graph_io.hpp"
#include "loopsoup/loops.hpp"
#include "loopsoup/soup.hpp"
#include "loopsoup/verify.hpp"

namespace loopsoup::cli {

namespace {

struct KeySpec {
  const char* name;
  std::optional<const char*> fallback;
};

// Keys and their defaults; keys without a default are required by the jobs
// that read them.
const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      {"graph", std::nullopt},      {"g", "3"},
      {"killing", "1"},             {"domain", "core"},
      {"domain.removed", ""},       {"F1", std::nullopt},
      {"F2", std::nullopt},         {"sets", std::nullopt},
      {"sites", std::nullopt},      {"removed", std::nullopt},
      {"orientation", "both"},      {"intensity", "1"},
      {"L_max", "6"},               {"seed", std::nullopt},
      {"samples", "100000"},        {"mode", "exact"},
      {"max_pieces", "2"},          {"tolerance", "1e-9"},
      {"significance", "1e-3"},     {"min_bin", "200"},
      {"max_bins", "20"},           {"controls", "true"},
      {"theta", "0.5"},             {"threads", "1"},
      {"dump", "10"},               {"jobs", std::nullopt},
  };
  return specs;
}

const KeySpec* spec_of(const std::string& key) {
  for (const auto& s : key_specs()) {
    if (key == s.name) return &s;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, const std::string& separators) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (separators.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

ConfigError::ConfigError(std::string source, int line, std::string field, const std::string& message)
    : std::runtime_error(source + (line > 0    ? ":" + std::to_string(line)
                                        : line == 0 ? " (command line)"
                                        : line == -1 ? " (default)"
                                                     : "") +
                         (field.empty() ? std::string() : ": field '" + field + "'") + ": " + message),
      line_(line),
      field_(std::move(field)) {}

const std::vector<std::string>& job_names() {
  static const std::vector<std::string> names{"prop1",           "prop1bis",   "prop2",        "prop3bis",
                                              "prop5",           "occupation-markov", "lejan", "ct-excursions",
                                              "random-currents", "wilson",     "sample-soup",  "enumerate"};
  return names;
}

Config Config::parse(std::istream& in, std::string source) {
  Config c;
  c.source_ = std::move(source);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(c.source_, n, "", "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError(c.source_, n, "", "missing key before '='");
    if (c.entries_.count(key)) throw ConfigError(c.source_, n, key, "set twice");
    c.assign(key, trim(std::string_view(body).substr(eq + 1)), n);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "", "cannot open the file");
  return parse(in, path.string());
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(source_, 0, "", "override '" + assignment + "' is not key=value");
  entries_.erase(trim(std::string_view(assignment).substr(0, eq)));
  assign(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)), 0);
}

void Config::assign(const std::string& key, std::string value, int line) {
  std::string base = key;
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const std::string prefix = key.substr(0, dot);
    const auto& jobs = job_names();
    if (std::find(jobs.begin(), jobs.end(), prefix) != jobs.end()) base = key.substr(dot + 1);
  }
  if (!spec_of(base)) throw ConfigError(source_, line, key, "unknown key");
  entries_[key] = Entry{std::move(value), line};
}

const Config::Entry* Config::find(const std::string& job, const std::string& key) const {
  if (!job.empty()) {
    const auto it = entries_.find(job + "." + key);
    if (it != entries_.end()) return &it->second;
  }
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

Config::Entry Config::require(const std::string& job, const std::string& key) const {
  if (const auto* e = find(job, key)) return *e;
  const auto* s = spec_of(key);
  if (s && s->fallback) return Entry{*s->fallback, -1};
  throw ConfigError(source_, -2, key, job.empty() ? "required" : "required by job '" + job + "'");
}

void Config::fail(const Entry* e, const std::string& field, const std::string& message) const {
  throw ConfigError(source_, e ? e->line : -1, field, message);
}

void Config::reject(const std::string& job, const std::string& key, const std::string& message) const {
  fail(find(job, key), key, message);
}

bool Config::has(const std::string& job, const std::string& key) const { return find(job, key) != nullptr; }

std::string Config::text(const std::string& job, const std::string& key) const { return require(job, key).value; }

long Config::integer(const std::string& job, const std::string& key) const {
  const auto e = require(job, key);
  long v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto [p, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || p != end) fail(&e, key, "expected an integer, got '" + e.value + "'");
  return v;
}

double Config::real(const std::string& job, const std::string& key) const {
  const auto e = require(job, key);
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used == e.value.size()) return v;
  } catch (const std::exception&) {
  }
  fail(&e, key, "expected a number, got '" + e.value + "'");
}

bool Config::flag(const std::string& job, const std::string& key) const {
  const auto e = require(job, key);
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  fail(&e, key, "expected true or false, got '" + e.value + "'");
}

std::vector<int> Config::integers(const std::string& job, const std::string& key) const {
  const auto e = require(job, key);
  std::vector<int> out;
  for (const auto& item : split(e.value, " ,\t")) {
    int v = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) fail(&e, key, "expected integers, got '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::vector<int>> Config::groups(const std::string& job, const std::string& key) const {
  const auto e = require(job, key);
  std::vector<std::vector<int>> out;
  for (const auto& part : split(e.value, "|")) {
    Config one;
    one.source_ = source_;
    one.entries_[key] = Entry{part, e.line};
    out.push_back(one.integers("", key));
    if (out.back().empty()) fail(&e, key, "empty group");
  }
  return out;
}

std::vector<std::string> Config::jobs() const {
  const auto e = require("", "jobs");
  std::vector<std::string> out;
  for (const auto& j : split(e.value, " ,\t")) {
    const auto& names = job_names();
    if (std::find(names.begin(), names.end(), j) == names.end()) fail(&e, "jobs", "unknown job '" + j + "'");
    out.push_back(j);
  }
  if (out.empty()) fail(&e, "jobs", "no job listed");
  return out;
}

std::map<std::string, std::string> Config::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& s : key_specs()) {
    if (s.fallback) out[s.name] = *s.fallback;
  }
  for (const auto& [k, e] : entries_) out[k] = e.value;
  return out;
}

std::string Config::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : resolved()) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Setup {
  GraphPtr graph;
  std::shared_ptr<const Domain> domain;
};

struct JobOutput {
  nlohmann::ordered_json entry;
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<TestReport> reports;
};

class Job {
 public:
  Job(const Config& config, std::string name) : config_(config), name_(std::move(name)) {}

  JobOutput run();

 private:
  std::string text(const std::string& key) const { return config_.text(name_, key); }

  Setup setup() const;
  std::vector<VertexId> vertices(const Domain& d, const std::string& key) const;
  std::vector<EdgeIndex> edges(const OrientedMultigraph& g, const std::string& key) const;
  VerifyParams params() const;
  std::vector<Orientation> orientations(std::vector<Orientation> fallback) const;

  void verify(JobOutput& out, const Setup& s);
  void enumerate(JobOutput& out, const Setup& s);
  void sample_soup(JobOutput& out, const Setup& s);
  void bridge_lengths(JobOutput& out, const Domain& d, std::span<const VertexId> F1);

  const Config& config_;
  std::string name_;
};

Setup Job::setup() const {
  const std::string spec = text("graph");
  Setup s;
  std::vector<VertexId> core;
  if (std::filesystem::exists(spec)) {
    s.graph = std::make_shared<const OrientedMultigraph>(load_graph(spec));
    for (VertexId v = 0; v < s.graph->vertex_count(); ++v) core.push_back(v);
  } else {
    try {
      auto b = make_builtin(spec, static_cast<int>(config_.integer(name_, "g")),
                            static_cast<int>(config_.integer(name_, "killing")));
      s.graph = b.graph;
      core = b.core;
    } catch (const GraphError& e) {
      config_.reject(name_, "graph", std::string("not a file and not a builtin shape: ") + e.what());
    }
  }
  std::vector<VertexId> vs;
  const std::string domain = text("domain");
  if (domain == "core") {
    vs = core;
  } else if (domain == "all") {
    for (VertexId v = 0; v < s.graph->vertex_count(); ++v) vs.push_back(v);
  } else {
    vs = config_.integers(name_, "domain");
    for (VertexId v : vs) {
      if (v < 0 || v >= s.graph->vertex_count()) {
        config_.reject(name_, "domain", "vertex " + std::to_string(v) + " is not in the graph");
      }
    }
  }
  s.domain = std::make_shared<const Domain>(s.graph, vs, edges(*s.graph, "domain.removed"));
  return s;
}

std::vector<VertexId> Job::vertices(const Domain& d, const std::string& key) const {
  auto vs = config_.integers(name_, key);
  if (vs.empty()) config_.reject(name_, key, "empty vertex set");
  for (VertexId v : vs) {
    if (!d.contains(v)) config_.reject(name_, key, "vertex " + std::to_string(v) + " is not in the domain");
  }
  return vs;
}

std::vector<EdgeIndex> Job::edges(const OrientedMultigraph& g, const std::string& key) const {
  std::vector<EdgeIndex> out;
  for (int id : config_.integers(name_, key)) {
    try {
      out.push_back(g.index_of_id(id));
    } catch (const std::exception&) {
      config_.reject(name_, key, "no edge with id " + std::to_string(id));
    }
  }
  return out;
}

VerifyParams Job::params() const {
  VerifyParams p;
  const std::string mode = text("mode");
  if (mode == "exact") {
    p.mode = VerifyMode::Exact;
  } else if (mode == "monte-carlo" || mode == "mc") {
    p.mode = VerifyMode::MonteCarlo;
  } else {
    config_.reject(name_, "mode", "expected exact or monte-carlo, got '" + mode + "'");
  }
  p.intensity = config_.real(name_, "intensity");
  p.L_max = static_cast<int>(config_.integer(name_, "L_max"));
  p.samples = config_.integer(name_, "samples");
  p.seed = static_cast<std::uint64_t>(config_.integer(name_, "seed"));
  p.max_pieces = static_cast<int>(config_.integer(name_, "max_pieces"));
  p.tolerance = config_.real(name_, "tolerance");
  p.significance = config_.real(name_, "significance");
  p.min_bin = static_cast<int>(config_.integer(name_, "min_bin"));
  p.max_bins = static_cast<int>(config_.integer(name_, "max_bins"));
  p.controls = config_.flag(name_, "controls");
  p.theta = config_.real(name_, "theta");
  p.threads = static_cast<int>(config_.integer(name_, "threads"));
  if (p.L_max < 1) config_.reject(name_, "L_max", "must be positive");
  if (p.samples < 1) config_.reject(name_, "samples", "must be positive");
  if (p.intensity <= 0) config_.reject(name_, "intensity", "must be positive");
  return p;
}

std::vector<Orientation> Job::orientations(std::vector<Orientation> fallback) const {
  const std::string o = text("orientation");
  if (o == "both") return fallback;
  if (o == "oriented") return {Orientation::Oriented};
  if (o == "unoriented") return {Orientation::Unoriented};
  config_.reject(name_, "orientation", "expected oriented, unoriented or both, got '" + o + "'");
}

JobOutput Job::run() {
  JobOutput out;
  out.entry["job"] = name_;
  const Setup s = setup();
  out.entry["graph"] = text("graph");
  out.entry["domain"] = s.domain->vertices();
  if (name_ == "enumerate") {
    enumerate(out, s);
  } else if (name_ == "sample-soup") {
    sample_soup(out, s);
  } else {
    verify(out, s);
  }
  auto reports = nlohmann::ordered_json::array();
  for (const auto& r : out.reports) reports.push_back(to_json(r));
  if (!out.reports.empty()) out.entry["reports"] = reports;
  auto files = nlohmann::ordered_json::array();
  for (const auto& [name, body] : out.files) files.push_back(name);
  if (!out.files.empty()) out.entry["outputs"] = files;
  return out;
}

void Job::verify(JobOutput& out, const Setup& s) {
  const Domain& d = *s.domain;
  const auto p = params();
  const auto add = [&](std::vector<TestReport> reports) {
    for (auto& r : reports) out.reports.push_back(std::move(r));
  };
  if (name_ == "prop1" || name_ == "prop2") {
    const auto F1 = vertices(d, "F1"), F2 = vertices(d, "F2");
    add(name_ == "prop1" ? verify_prop1(d, F1, F2, p) : verify_prop2(d, F1, F2, p));
    bridge_lengths(out, d, F1);
  } else if (name_ == "prop1bis" || name_ == "prop3bis") {
    std::vector<std::vector<VertexId>> sets;
    if (config_.has(name_, "sets")) {
      sets = config_.groups(name_, "sets");
      for (const auto& set : sets) {
        for (VertexId v : set) {
          if (!d.contains(v)) config_.reject(name_, "sets", "vertex " + std::to_string(v) + " is not in the domain");
        }
      }
    } else {
      sets = {vertices(d, "F1"), vertices(d, "F2")};
    }
    add(verify_prop1bis_3bis(d, sets, name_ == "prop1bis" ? Orientation::Oriented : Orientation::Unoriented, p));
  } else if (name_ == "prop5") {
    add(verify_prop5(d, edges(d.graph(), "removed"), p));
  } else if (name_ == "occupation-markov") {
    const auto F1 = vertices(d, "F1");
    for (auto o : orientations({Orientation::Unoriented, Orientation::Oriented})) add(verify_occupation_markov(d, F1, o, p));
  } else if (name_ == "lejan") {
    add(verify_lejan(d, p));
  } else if (name_ == "ct-excursions") {
    add(verify_ct_excursion_proposition(d, vertices(d, "sites"), p));
  } else if (name_ == "random-currents") {
    for (auto o : orientations({Orientation::Unoriented, Orientation::Oriented})) add(verify_random_currents(d, o, p));
  } else if (name_ == "wilson") {
    add(verify_wilson(d, p));
  }
}

std::string csv_number(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

void Job::bridge_lengths(JobOutput& out, const Domain& d, std::span<const VertexId> F1) {
  const Domain rest = d.without(F1);
  if (rest.size() > kMaxExactDomain) return;
  const int L = static_cast<int>(config_.integer(name_, "L_max"));
  const auto green = green_function(rest);
  std::string csv = "x,y,length,probability\n";
  for (VertexId x : rest.vertices()) {
    for (VertexId y : rest.vertices()) {
      if (green(x, y) <= 0) continue;
      std::map<int, double> mass;
      for (const auto& b : enumerate_bridges(rest, x, y, L)) {
        mass[b.length()] += std::pow(static_cast<double>(d.g()), -b.length()) / green(x, y);
      }
      for (const auto& [n, q] : mass) {
        csv += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(n) + "," + csv_number(q) + "\n";
      }
    }
  }
  out.files.emplace_back(name_ + "_bridge_lengths.csv", std::move(csv));
}

void Job::enumerate(JobOutput& out, const Setup& s) {
  const int L = static_cast<int>(config_.integer(name_, "L_max"));
  auto summaries = nlohmann::ordered_json::array();
  for (auto o : orientations({Orientation::Oriented, Orientation::Unoriented})) {
    const auto catalog = enumerate_loops(*s.domain, L, o);
    const std::string tag = o == Orientation::Oriented ? "oriented" : "unoriented";
    std::ostringstream jsonl;
    write_catalog_jsonl(jsonl, catalog);
    std::map<int, std::pair<int, Rational>> by_length;
    for (const auto& c : catalog.classes) {
      auto& [count, mass] = by_length[c.n()];
      ++count;
      mass += c.mass;
    }
    std::string csv = "length,classes,mass,mass_exact\n";
    for (const auto& [n, cm] : by_length) {
      csv += std::to_string(n) + "," + std::to_string(cm.first) + "," + csv_number(to_double(cm.second)) + "," +
             to_string(cm.second) + "\n";
    }
    out.files.emplace_back(name_ + "_" + tag + "_catalog.jsonl", jsonl.str());
    out.files.emplace_back(name_ + "_" + tag + "_loop_lengths.csv", std::move(csv));
    summaries.push_back({{"orientation", tag},
                         {"classes", catalog.classes.size()},
                         {"total_mass", to_string(catalog.total_mass())},
                         {"tail_bound", catalog.tail_bound}});
  }
  out.entry["catalogs"] = summaries;
}

void Job::sample_soup(JobOutput& out, const Setup& s) {
  const auto p = params();
  const long dump = config_.integer(name_, "dump");
  const Domain& d = *s.domain;
  const auto& g = d.graph();
  auto summaries = nlohmann::ordered_json::array();
  for (auto o : orientations({Orientation::Oriented, Orientation::Unoriented})) {
    const std::string tag = o == Orientation::Oriented ? "oriented" : "unoriented";
    const ExactSoupSampler sampler(d, o, p.intensity);
    const Rng base(p.seed, name_ + "." + tag);
    std::vector<double> site_time(static_cast<std::size_t>(d.size()), 0.0);
    std::map<EdgeIndex, double> jumps;
    std::map<int, double> lengths;
    double loops = 0;
    std::string soups;
    for (long i = 0; i < p.samples; ++i) {
      Rng rng = base.substream(static_cast<std::uint64_t>(i));
      Rng times = rng.substream("holding");
      const auto ct = attach_holding_times(sampler.sample(rng), times);
      const auto field = occupation_field(ct);
      for (std::size_t x = 0; x < site_time.size(); ++x) site_time[x] += field.site_times[x];
      for (const auto& [e, n] : field.oriented) jumps[e] += n;
      for (const auto& l : ct.jump_soup.loops) lengths[static_cast<int>(l.size())] += 1;
      loops += static_cast<double>(ct.jump_soup.loops.size());
      if (i < dump) {
        nlohmann::ordered_json j;
        j["sample"] = i;
        auto ls = nlohmann::ordered_json::array();
        for (const auto& l : ct.jump_soup.loops) ls.push_back(edge_ids(g, l));
        j["loops"] = ls;
        soups += j.dump() + "\n";
      }
    }
    const double n = static_cast<double>(p.samples);
    std::string sites = "vertex,mean_time\n";
    for (std::size_t x = 0; x < site_time.size(); ++x) {
      sites += std::to_string(d.vertices()[x]) + "," + csv_number(site_time[x] / n) + "\n";
    }
    std::string edge_csv = "edge,tail,head,mean_jumps\n";
    for (const auto& [e, c] : jumps) {
      edge_csv += std::to_string(g.edge(e).id) + "," + std::to_string(g.tail(e)) + "," + std::to_string(g.head(e)) + "," +
                  csv_number(c / n) + "\n";
    }
    // Expected loop counts per length from the catalog, where enumerable.
    std::map<int, double> expected;
    try {
      for (const auto& c : enumerate_loops(d, p.L_max, o).classes) expected[c.n()] += p.intensity * c.mass_d;
    } catch (const BudgetExceeded&) {
    }
    std::string length_csv = "length,mean_count,expected\n";
    std::map<int, double> all = lengths;
    for (const auto& [k, v] : expected) all.emplace(k, 0.0);
    for (const auto& [k, v] : all) {
      length_csv += std::to_string(k) + "," + csv_number(v / n) + "," +
                    (expected.count(k) ? csv_number(expected[k]) : std::string()) + "\n";
    }
    out.files.emplace_back(name_ + "_" + tag + "_soups.jsonl", std::move(soups));
    out.files.emplace_back(name_ + "_" + tag + "_occupation_sites.csv", std::move(sites));
    out.files.emplace_back(name_ + "_" + tag + "_occupation_edges.csv", std::move(edge_csv));
    out.files.emplace_back(name_ + "_" + tag + "_loop_lengths.csv", std::move(length_csv));
    summaries.push_back({{"orientation", tag}, {"samples", p.samples}, {"mean_loops", loops / n}, {"intensity", p.intensity}});
  }
  out.entry["soups"] = summaries;
}

}  // namespace

RunResult run(const Config& config, const RunOptions& options) {
  const auto jobs = config.jobs();
  config.integer("", "seed");  // no silent nondeterminism
  std::vector<JobOutput> outputs(jobs.size());
  const auto one = [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    outputs[i] = Job(config, jobs[i]).run();
    if (!options.quiet) {
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      std::cerr << "[" << jobs[i] << "] " << outputs[i].reports.size() << " checks, " << took.count() << " s\n";
    }
  };
  if (options.parallel) {
    std::vector<std::future<void>> running;
    for (std::size_t i = 0; i < jobs.size(); ++i) running.push_back(std::async(std::launch::async, one, i));
    for (auto& f : running) f.get();
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) one(i);
  }

  RunResult result;
  auto& report = result.report;
  report["config"] = config.resolved();
  report["jobs"] = nlohmann::ordered_json::array();
  auto failed = nlohmann::ordered_json::array();
  auto controls = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    report["jobs"].push_back(outputs[i].entry);
    for (const auto& r : outputs[i].reports) {
      if (!r.positive_control && !r.pass) failed.push_back(r.prop);
      if (r.positive_control && r.pass) controls.push_back(r.prop);
    }
  }
  result.failed = !failed.empty();
  report["verdict"] = result.failed ? "fail" : "pass";
  report["failed_checks"] = failed;
  report["controls_without_power"] = controls;

  std::filesystem::create_directories(options.out);
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(options.out / name, std::ios::binary);
    f << body;
    if (!f) throw std::runtime_error("cannot write " + (options.out / name).string());
  };
  write("report.json", report.dump(2) + "\n");
  write("config.resolved", config.resolved_text());
  for (const auto& o : outputs) {
    for (const auto& [name, body] : o.files) write(name, body);
  }
  return result;
}

}  // namespace loopsoup::cli
