#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ductsr/expr.hpp"
#include "ductsr/filter.hpp"
#include "ductsr/flow.hpp"
#include "ductsr/metrics.hpp"
#include "ductsr/sr.hpp"

namespace fs = std::filesystem;
using namespace ductsr;

namespace {

// ---------------------------------------------------------------------------
// key = value run configuration; flags always win over the file

struct KeyValues {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& at(const std::string& key) const { return values.at(key); }
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path, "cannot open config file");
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (const auto hash = line.find_first_of("#%"); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(path + ":" + std::to_string(lineno) + ": empty key");
    kv.values[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw Error("invalid number for " + what + ": '" + text + "'");
  return v;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(parse_double(item, what));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw Error(what + " needs at least one value");
  return out;
}

// deferred config-file fallbacks for options the user did not pass
struct ConfigBindings {
  std::vector<std::function<void(const KeyValues&)>> appliers;

  void number(CLI::Option* opt, const std::string& key, double* var) {
    appliers.push_back([opt, key, var](const KeyValues& kv) {
      if (opt->count() == 0 && kv.has(key)) *var = parse_double(kv.at(key), key);
    });
  }
  void integer(CLI::Option* opt, const std::string& key, int* var) {
    appliers.push_back([opt, key, var](const KeyValues& kv) {
      if (opt->count() == 0 && kv.has(key))
        *var = static_cast<int>(parse_double(kv.at(key), key));
    });
  }
  void text(CLI::Option* opt, const std::string& key, std::string* var) {
    appliers.push_back([opt, key, var](const KeyValues& kv) {
      if (opt->count() == 0 && kv.has(key)) *var = kv.at(key);
    });
  }
  void list(CLI::Option* opt, const std::string& key, std::vector<double>* var) {
    appliers.push_back([opt, key, var](const KeyValues& kv) {
      if (opt->count() == 0 && kv.has(key)) *var = parse_double_list(kv.at(key), key);
    });
  }
  void apply(const KeyValues& kv) const {
    for (const auto& f : appliers) f(kv);
  }
};

std::string resolve_out(CLI::Option* out_opt, const std::string& flag_value, const KeyValues& kv) {
  if (out_opt->count() > 0) return flag_value;
  if (kv.has("out")) return kv.at("out");
  if (const char* env = std::getenv("DUCTSR_OUT")) return env;
  return ".";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError(path, "write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(dir, "cannot create output directory");
}

Target parse_target(const std::string& text) {
  if (text == "u") return Target::U;
  if (text == "p") return Target::P;
  throw Error("target must be 'u' or 'p', got '" + text + "'");
}

void print_frontier_table(const ParetoFrontier& frontier) {
  std::printf("%4s  %10s  %14s  %s\n", "ID", "Complexity", "Loss", "Equation");
  for (const ParetoEntry& e : frontier.entries())
    std::printf("%4d  %10d  %14.6g  %s\n", e.id, e.complexity, e.loss,
                format_expression(e.expression).c_str());
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string out;
  std::string config;
  int ny = 101, nz = 101, nx = 11;
  double tol = 1e-10;
  double length = 5.0, height = 1.0, width = 1.0;
  std::vector<double> c_train = default_train_gradients();
  std::vector<double> c_test = default_test_gradients();
};

int run_generate(const GenerateArgs& a) {
  const DuctGeometry geometry{a.length, a.height, a.width};
  const FlowDataset ds = assemble_dataset(geometry, a.c_train, a.c_test, a.nx, a.ny, a.nz, a.tol);

  ensure_directory(a.out);
  write_dataset_csv(ds, a.out);

  std::printf("%10s  %12s  %12s  %10s\n", "c", "Re", "u_max", "u_max/Re");
  for (const FlowCase& c : ds.cases)
    std::printf("%10.0f  %12.4f  %12.4f  %10.4f\n", c.c, c.re, c.u_max, c.u_max / c.re);
  std::printf("wrote %zu train and %zu test records to %s\n", ds.train.size(), ds.test.size(),
              a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string target_text;
  std::string data;
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  int max_points = 2048;
  SrConfig sr;
};

int run_fit(const FitArgs& a) {
  const Target target = parse_target(a.target_text);
  const std::string train_path = (fs::path(a.data) / "train.csv").string();
  const std::vector<FlowRecord> records = read_records_csv(train_path);
  if (records.empty()) throw Error(train_path + ": no training records");
  if (a.max_points < 1) throw Error("max_points must be at least 1");

  SrConfig config = a.sr;
  config.rng_seed = a.seed;
  config.validate();

  const RegressionData data =
      RegressionData::from_records(records, target).subsample(a.max_points);
  std::printf("fitting %s on %zu points (of %zu records), seed %llu\n", a.target_text.c_str(),
              data.size(), records.size(), static_cast<unsigned long long>(a.seed));

  const ParetoFrontier frontier = evolve(config, data);

  ensure_directory(a.out);
  const std::string json_path =
      (fs::path(a.out) / ("frontier_" + a.target_text + ".json")).string();
  const std::string facts_path =
      (fs::path(a.out) / ("frontier_" + a.target_text + ".facts")).string();
  write_text_file(json_path, frontier_to_json(frontier));
  write_text_file(facts_path, render_facts(facts_from_frontier(frontier)));

  print_frontier_table(frontier);
  std::printf("wrote %s and %s\n", json_path.c_str(), facts_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// filter

struct FilterArgs {
  std::string facts;
  std::string constraints;
  std::string out;
  std::string config;
  bool print_explain = false;
};

int run_filter(const FilterArgs& a) {
  const std::vector<EquationFact> facts = read_facts_file(a.facts);
  const ConstraintProgram program = read_constraints_file(a.constraints);

  const Selection selection = solve(facts, program);
  const std::vector<Verdict> verdicts = explain(facts, program);

  ensure_directory(a.out);
  const std::string report_path = (fs::path(a.out) / "filter_report.json").string();
  write_text_file(report_path, selection_report_json(selection, verdicts));

  std::fputs(render_selection(selection).c_str(), stdout);
  if (a.print_explain) {
    std::printf("\n%4s  %-8s  %s\n", "ID", "eligible", "notes");
    for (const Verdict& v : verdicts) {
      std::string notes;
      for (std::size_t i = 0; i < v.reasons.size(); ++i) {
        if (i) notes += "; ";
        notes += v.reasons[i];
      }
      std::printf("%4lld  %-8s  %s\n", v.id, v.eligible ? "yes" : "no", notes.c_str());
    }
  }
  std::printf("\nwrote %s\n", report_path.c_str());
  return selection.sat ? 0 : 3;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string frontier;
  std::string data;
  std::string out;
  std::string config;
  std::string target_text = "u";
  long long id = -1;
  double station = 1.5;
  double re_choice = std::numeric_limits<double>::quiet_NaN();
};

struct SplitEval {
  std::vector<double> actual;
  std::vector<double> predicted;
};

SplitEval evaluate_split(const Expr& expr, const std::vector<FlowRecord>& records, Target target) {
  SplitEval s;
  s.actual.reserve(records.size());
  s.predicted.reserve(records.size());
  for (const FlowRecord& r : records) {
    s.actual.push_back(target == Target::U ? r.u : r.p);
    s.predicted.push_back(evaluate(expr, EvalPoint{r.x, r.y, r.z, r.re}));
  }
  return s;
}

nlohmann::ordered_json metrics_json(const SplitEval& s) {
  nlohmann::ordered_json j;
  const double m2 = mse(s.actual, s.predicted);
  const double m1 = mae(s.actual, s.predicted);
  j["mse"] = std::isfinite(m2) ? nlohmann::ordered_json(m2) : nlohmann::ordered_json(nullptr);
  j["mae"] = std::isfinite(m1) ? nlohmann::ordered_json(m1) : nlohmann::ordered_json(nullptr);
  const auto [lo, hi] = std::minmax_element(s.actual.begin(), s.actual.end());
  const double range = *hi - *lo;
  // a constant reference field leaves the normalization undefined; a perfect
  // fit still reports zero
  double nm = std::numeric_limits<double>::infinity();
  if (range > 0.0)
    nm = nmae_percent(s.actual, s.predicted);
  else if (m1 == 0.0)
    nm = 0.0;
  j["nmae_percent"] =
      std::isfinite(nm) ? nlohmann::ordered_json(nm) : nlohmann::ordered_json(nullptr);
  j["n"] = s.actual.size();
  j["y_range"] = range;
  return j;
}

void print_metrics_row(const char* split, const nlohmann::ordered_json& j) {
  const auto cell = [&](const char* key) {
    return j[key].is_null() ? std::string("inf") : j[key].dump();
  };
  std::printf("%-6s  %13s  %13s  %13s  %8llu\n", split, cell("mse").c_str(), cell("mae").c_str(),
              cell("nmae_percent").c_str(),
              static_cast<unsigned long long>(j["n"].get<std::size_t>()));
}

std::string identity_csv(const SplitEval& s) {
  std::string out = "predicted,actual\n";
  char buf[64];
  for (std::size_t i = 0; i < s.actual.size(); ++i) {
    auto [e1, ec1] = std::to_chars(buf, buf + sizeof buf, s.predicted[i]);
    (void)ec1;
    out.append(buf, e1);
    out.push_back(',');
    auto [e2, ec2] = std::to_chars(buf, buf + sizeof buf, s.actual[i]);
    (void)ec2;
    out.append(buf, e2);
    out.push_back('\n');
  }
  return out;
}

int run_report(const ReportArgs& a) {
  const Target target = parse_target(a.target_text);
  const ParetoFrontier frontier = frontier_from_json(read_text_file(a.frontier));
  const ParetoEntry* entry = nullptr;
  for (const ParetoEntry& e : frontier.entries())
    if (e.id == a.id) entry = &e;
  if (!entry) throw Error(a.frontier + ": no frontier entry with id " + std::to_string(a.id));

  const std::vector<FlowRecord> train = read_records_csv((fs::path(a.data) / "train.csv").string());
  const std::vector<FlowRecord> test = read_records_csv((fs::path(a.data) / "test.csv").string());
  if (train.empty() || test.empty()) throw Error(a.data + ": empty dataset");

  const SplitEval train_eval = evaluate_split(entry->expression, train, target);
  const SplitEval test_eval = evaluate_split(entry->expression, test, target);

  // showcased case: the test Reynolds number nearest to --re, else the first
  std::vector<double> res;
  for (const FlowRecord& r : test)
    if (std::find(res.begin(), res.end(), r.re) == res.end()) res.push_back(r.re);
  double target_re = res.front();
  if (std::isfinite(a.re_choice)) {
    for (double re : res)
      if (std::fabs(re - a.re_choice) < std::fabs(target_re - a.re_choice)) target_re = re;
  }
  // nearest axial station for the cross-section cuts
  std::vector<double> xs;
  for (const FlowRecord& r : test)
    if (r.re == target_re && std::find(xs.begin(), xs.end(), r.x) == xs.end()) xs.push_back(r.x);
  double x0 = xs.front();
  for (double x : xs)
    if (std::fabs(x - a.station) < std::fabs(x0 - a.station)) x0 = x;
  // profile line: nearest z to the midplane
  double z0 = std::numeric_limits<double>::infinity();
  for (const FlowRecord& r : test)
    if (r.re == target_re && r.x == x0 && std::fabs(r.z) < std::fabs(z0)) z0 = r.z;

  std::string section = "y,z,actual,predicted\n";
  std::string profile = "y,actual,predicted\n";
  char buf[64];
  const auto append_num = [&](std::string& out, double v) {
    auto [e, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, e);
  };
  for (const FlowRecord& r : test) {
    if (r.re != target_re || r.x != x0) continue;
    const double actual = target == Target::U ? r.u : r.p;
    const double predicted = evaluate(entry->expression, EvalPoint{r.x, r.y, r.z, r.re});
    append_num(section, r.y);
    section.push_back(',');
    append_num(section, r.z);
    section.push_back(',');
    append_num(section, actual);
    section.push_back(',');
    append_num(section, predicted);
    section.push_back('\n');
    if (r.z == z0) {
      append_num(profile, r.y);
      profile.push_back(',');
      append_num(profile, actual);
      profile.push_back(',');
      append_num(profile, predicted);
      profile.push_back('\n');
    }
  }

  nlohmann::ordered_json doc;
  doc["target"] = a.target_text;
  doc["id"] = entry->id;
  doc["complexity"] = entry->complexity;
  doc["expression"] = format_expression(entry->expression);
  doc["train"] = metrics_json(train_eval);
  doc["test"] = metrics_json(test_eval);
  doc["section_re"] = target_re;
  doc["section_x"] = x0;

  ensure_directory(a.out);
  const fs::path out(a.out);
  write_text_file((out / "metrics.json").string(), doc.dump(2) + "\n");
  write_text_file((out / "identity_train.csv").string(), identity_csv(train_eval));
  write_text_file((out / "identity_test.csv").string(), identity_csv(test_eval));
  write_text_file((out / "profile.csv").string(), profile);
  write_text_file((out / "section.csv").string(), section);

  std::printf("equation %d: %s\n", entry->id, format_expression(entry->expression).c_str());
  std::printf("%-6s  %13s  %13s  %13s  %8s\n", "split", "MSE", "MAE", "NMAE%", "n");
  print_metrics_row("train", doc["train"]);
  print_metrics_row("test", doc["test"]);
  std::printf("cross-section cut at Re=%g, x=%g\n", target_re, x0);
  std::printf("wrote metrics.json, identity_{train,test}.csv, profile.csv, section.csv to %s\n",
              a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"laminar duct flow data generation, symbolic regression and constraint filtering"};
  app.require_subcommand(1);

  GenerateArgs gen;
  FitArgs fit;
  FilterArgs filt;
  ReportArgs rep;
  ConfigBindings gen_bind, fit_bind, rep_bind;

  CLI::App* cgen = app.add_subcommand("generate", "solve the duct flow sweep and export CSVs");
  CLI::Option* gen_out = cgen->add_option("--out", gen.out, "output directory");
  cgen->add_option("--config", gen.config, "key = value configuration file");
  gen_bind.integer(cgen->add_option("--ny", gen.ny, "cross-section nodes along y"), "ny", &gen.ny);
  gen_bind.integer(cgen->add_option("--nz", gen.nz, "cross-section nodes along z"), "nz", &gen.nz);
  gen_bind.integer(cgen->add_option("--nx", gen.nx, "axial stations"), "nx", &gen.nx);
  gen_bind.number(cgen->add_option("--tol", gen.tol, "solver residual tolerance (times |c|)"),
                  "tol", &gen.tol);
  gen_bind.number(cgen->add_option("--length", gen.length, "duct length L"), "length",
                  &gen.length);
  gen_bind.number(cgen->add_option("--height", gen.height, "duct height H"), "height",
                  &gen.height);
  gen_bind.number(cgen->add_option("--width", gen.width, "duct width W"), "width", &gen.width);
  gen_bind.list(
      cgen->add_option("--c-train", gen.c_train, "training pressure gradients")->delimiter(','),
      "c_train", &gen.c_train);
  gen_bind.list(
      cgen->add_option("--c-test", gen.c_test, "testing pressure gradients")->delimiter(','),
      "c_test", &gen.c_test);

  CLI::App* cfit = app.add_subcommand("fit", "evolve a Pareto frontier of candidate equations");
  cfit->add_option("--target", fit.target_text, "target field: u or p")->required();
  cfit->add_option("--seed", fit.seed, "random seed")->required();
  CLI::Option* fit_data = cfit->add_option("--data", fit.data, "dataset directory");
  CLI::Option* fit_out = cfit->add_option("--out", fit.out, "output directory");
  cfit->add_option("--config", fit.config, "key = value configuration file");
  fit_bind.integer(cfit->add_option("--iterations", fit.sr.n_iterations, "generations"),
                   "iterations", &fit.sr.n_iterations);
  fit_bind.integer(cfit->add_option("--max-size", fit.sr.max_size, "complexity cap"), "max_size",
                   &fit.sr.max_size);
  fit_bind.integer(cfit->add_option("--population", fit.sr.population_size, "population size"),
                   "population", &fit.sr.population_size);
  fit_bind.integer(cfit->add_option("--tournament", fit.sr.tournament_size, "tournament size"),
                   "tournament", &fit.sr.tournament_size);
  fit_bind.number(cfit->add_option("--p-crossover", fit.sr.p_crossover, "crossover probability"),
                  "p_crossover", &fit.sr.p_crossover);
  fit_bind.number(cfit->add_option("--p-mutation", fit.sr.p_mutation, "mutation probability"),
                  "p_mutation", &fit.sr.p_mutation);
  fit_bind.integer(
      cfit->add_option("--cycles", fit.sr.cycles_per_iteration, "breeding cycles per iteration"),
      "cycles", &fit.sr.cycles_per_iteration);
  fit_bind.integer(cfit->add_option("--opt-steps", fit.sr.constant_optimizer_steps,
                                    "constant optimizer steps per admitted candidate"),
                   "opt_steps", &fit.sr.constant_optimizer_steps);
  fit_bind.number(cfit->add_option("--p-optimize", fit.sr.p_optimize,
                                   "chance of tuning constants of other children"),
                  "p_optimize", &fit.sr.p_optimize);
  fit_bind.integer(cfit->add_option("--polish-steps", fit.sr.frontier_polish_steps,
                                    "final polish steps per frontier entry"),
                   "polish_steps", &fit.sr.frontier_polish_steps);
  fit_bind.number(cfit->add_option("--const-min", fit.sr.constant_min, "constant sampling low"),
                  "const_min", &fit.sr.constant_min);
  fit_bind.number(cfit->add_option("--const-max", fit.sr.constant_max, "constant sampling high"),
                  "const_max", &fit.sr.constant_max);
  fit_bind.integer(cfit->add_option("--max-points", fit.max_points,
                                    "deterministic subsample cap on training points"),
                   "max_points", &fit.max_points);

  CLI::App* cfilt = app.add_subcommand("filter", "select physically admissible equations");
  cfilt->add_option("--facts", filt.facts, "equation facts file")->required();
  cfilt->add_option("--constraints", filt.constraints, "constraint program file")->required();
  CLI::Option* filt_out = cfilt->add_option("--out", filt.out, "output directory");
  cfilt->add_option("--config", filt.config, "key = value configuration file");
  cfilt->add_flag("--explain", filt.print_explain, "print the per-equation verdict table");

  CLI::App* crep = app.add_subcommand("report", "evaluate one frontier equation against data");
  crep->add_option("--frontier", rep.frontier, "frontier JSON file")->required();
  crep->add_option("--id", rep.id, "frontier entry id")->required();
  CLI::Option* rep_data = crep->add_option("--data", rep.data, "dataset directory");
  CLI::Option* rep_out = crep->add_option("--out", rep.out, "output directory");
  crep->add_option("--config", rep.config, "key = value configuration file");
  rep_bind.text(crep->add_option("--target", rep.target_text, "target field: u or p"), "target",
                &rep.target_text);
  rep_bind.number(crep->add_option("--station", rep.station, "axial station for the profile cut"),
                  "station", &rep.station);
  rep_bind.number(crep->add_option("--re", rep.re_choice, "Reynolds number of the showcased case"),
                  "re", &rep.re_choice);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cgen->parsed()) {
      KeyValues kv;
      if (!gen.config.empty()) kv = load_key_values(gen.config);
      gen_bind.apply(kv);
      gen.out = resolve_out(gen_out, gen.out, kv);
      return run_generate(gen);
    }
    if (cfit->parsed()) {
      KeyValues kv;
      if (!fit.config.empty()) kv = load_key_values(fit.config);
      fit_bind.apply(kv);
      fit.out = resolve_out(fit_out, fit.out, kv);
      if (fit_data->count() == 0) fit.data = kv.has("data") ? kv.at("data") : fit.out;
      return run_fit(fit);
    }
    if (cfilt->parsed()) {
      KeyValues kv;
      if (!filt.config.empty()) kv = load_key_values(filt.config);
      filt.out = resolve_out(filt_out, filt.out, kv);
      return run_filter(filt);
    }
    if (crep->parsed()) {
      KeyValues kv;
      if (!rep.config.empty()) kv = load_key_values(rep.config);
      rep_bind.apply(kv);
      rep.out = resolve_out(rep_out, rep.out, kv);
      if (rep_data->count() == 0) rep.data = kv.has("data") ? kv.at("data") : rep.out;
      return run_report(rep);
    }
  } catch (const SolverError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
