// Command-line experiment runner over the fcirk C interface.
//
//   fcirk integrate --model ic.json --integrator fcirk:6 --h 10 --T 1e4 --out traj.csv
//   fcirk sweep     --integrator fcirk:6,fcirk:8,irk:8 --h-list 5,10,20 --T 1e4
//   fcirk ensemble  --integrator fcirk:8 --h-list 10,20 --T 1e5 --P 100 --out ens
//   fcirk tableau   --stages 8
//   fcirk compare   --stages 8 --h 10 --T 1e4
//
// Settings come from an optional JSON file (--config) whose keys are the
// long flag names; flags given on the command line take precedence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcirk/fcirk.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string model = FCIRK_DEFAULT_MODEL;
  std::vector<std::string> integrator{"fcirk"};
  int stages = 8;
  std::string base = "leapfrog";
  double h = 10.0;
  double T = 1e4;
  long long m = 1;
  std::string precision = "mixed";
  std::string init = "previous";
  int fp_max_iters = 100;
  double fp_tol = 1e-8;
  int threads = 1;
  std::uint64_t seed = 12345;
  std::string out;
  int P = 100;
  double perturb_scale = 1e-6;
  std::string quantity = "angular-momentum";
  std::vector<double> h_list;
  bool lax = false;
};

[[noreturn]] void raise(fcirk_status status, const std::string& context) {
  std::string message = context + ": " + fcirk_status_name(status);
  if (*fcirk_last_error() != '\0') message += ": " + std::string(fcirk_last_error());
  switch (status) {
    case FCIRK_E_PARSE:
    case FCIRK_E_UNIT:
    case FCIRK_E_NORMALIZATION:
    case FCIRK_E_INVALID_ARGUMENT:
    case FCIRK_E_IO:
      throw ConfigError(message);
    default:
      throw NumericError(message);
  }
}

void check(fcirk_status status, const std::string& context) {
  if (status != FCIRK_OK) raise(status, context);
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_dd(double hi, double lo) {
  char buf[64];
  check(fcirk_format_dd(hi, lo, 34, buf, sizeof buf, nullptr), "format");
  return buf;
}

// ---- settings ------------------------------------------------------------

template <class T>
T json_get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::string> json_strings(const nlohmann::json& j,
                                      const std::string& key) {
  if (j.is_string()) return {j.get<std::string>()};
  return json_get<std::vector<std::string>>(j, key);
}

void apply_json(Settings& s, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "model") s.model = json_get<std::string>(v, key);
    else if (key == "integrator") s.integrator = json_strings(v, key);
    else if (key == "stages") s.stages = json_get<int>(v, key);
    else if (key == "base") s.base = json_get<std::string>(v, key);
    else if (key == "h") s.h = json_get<double>(v, key);
    else if (key == "T") s.T = json_get<double>(v, key);
    else if (key == "m") s.m = json_get<long long>(v, key);
    else if (key == "precision") s.precision = json_get<std::string>(v, key);
    else if (key == "init") s.init = json_get<std::string>(v, key);
    else if (key == "fp-max-iters") s.fp_max_iters = json_get<int>(v, key);
    else if (key == "fp-tol") s.fp_tol = json_get<double>(v, key);
    else if (key == "threads") s.threads = json_get<int>(v, key);
    else if (key == "seed") s.seed = json_get<std::uint64_t>(v, key);
    else if (key == "out") s.out = json_get<std::string>(v, key);
    else if (key == "P") s.P = json_get<int>(v, key);
    else if (key == "perturb-scale") s.perturb_scale = json_get<double>(v, key);
    else if (key == "quantity") s.quantity = json_get<std::string>(v, key);
    else if (key == "h-list") s.h_list = json_get<std::vector<double>>(v, key);
    else if (key == "lax") s.lax = json_get<bool>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

Settings load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  Settings s;
  apply_json(s, j);
  return s;
}

// Flags bind to a scratch Settings; after parsing, the ones actually given
// are copied over the config-file values.
class Flags {
 public:
  explicit Flags(CLI::App& app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T Settings::*field,
                   const std::string& help) {
    CLI::Option* opt = app_.add_option("--" + name, given_.*field, help);
    overrides_.push_back({opt, [field](Settings& dst, const Settings& src) {
                            dst.*field = src.*field;
                          }});
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool Settings::*field,
                    const std::string& help) {
    CLI::Option* opt = app_.add_flag("--" + name, given_.*field, help);
    overrides_.push_back({opt, [field](Settings& dst, const Settings& src) {
                            dst.*field = src.*field;
                          }});
    return opt;
  }

  Settings resolve(const std::string& config_path) const {
    Settings s = config_path.empty() ? Settings{} : load_config(config_path);
    for (const auto& [opt, copy] : overrides_) {
      if (opt->count() > 0) copy(s, given_);
    }
    return s;
  }

 private:
  CLI::App& app_;
  Settings given_;
  std::vector<std::pair<CLI::Option*,
                        std::function<void(Settings&, const Settings&)>>>
      overrides_;
};

// ---- integrator specs ----------------------------------------------------

struct IntegratorSpec {
  std::string label;
  fcirk_config cfg;
  std::string coefficients;  // owns the path cfg.coefficients points to
};

std::unique_ptr<IntegratorSpec> parse_spec(const std::string& text,
                                           const Settings& s) {
  static const std::map<std::string, fcirk_family> families{
      {"fcirk", FCIRK_FAMILY_FCIRK},
      {"irk", FCIRK_FAMILY_IRK},
      {"irk-partitioned", FCIRK_FAMILY_IRK_PARTITIONED},
      {"lawson", FCIRK_FAMILY_LAWSON},
      {"leapfrog", FCIRK_FAMILY_LEAPFROG},
      {"wh", FCIRK_FAMILY_WH},
      {"composition", FCIRK_FAMILY_COMPOSED},
  };
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  const auto it = families.find(name);
  if (it == families.end()) throw ConfigError("unknown integrator '" + name + "'");

  auto spec = std::make_unique<IntegratorSpec>();
  fcirk_config_default(&spec->cfg);
  fcirk_config& c = spec->cfg;
  c.family = it->second;
  c.stages = s.stages;
  c.m = s.m;
  c.fp_max_iters = s.fp_max_iters;
  c.fp_tol = s.fp_tol;
  c.threads = s.threads;

  if (s.precision == "mixed") c.precision = FCIRK_PRECISION_MIXED;
  else if (s.precision == "working") c.precision = FCIRK_PRECISION_WORKING;
  else throw ConfigError("precision must be 'working' or 'mixed'");

  if (s.init == "previous") c.init_mode = FCIRK_INIT_PREVIOUS;
  else if (s.init == "zero") c.init_mode = FCIRK_INIT_ZERO;
  else throw ConfigError("init must be 'previous' or 'zero'");

  if (s.base == "leapfrog") c.composed_base = 0;
  else if (s.base == "wh") c.composed_base = 1;
  else throw ConfigError("base must be 'leapfrog' or 'wh'");

  switch (c.family) {
    case FCIRK_FAMILY_FCIRK:
    case FCIRK_FAMILY_IRK:
    case FCIRK_FAMILY_IRK_PARTITIONED:
    case FCIRK_FAMILY_LAWSON:
      if (!arg.empty()) {
        try {
          std::size_t used = 0;
          c.stages = std::stoi(arg, &used);
          if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
          throw ConfigError("bad stage count in '" + text + "'");
        }
      }
      if (c.stages < 1 || c.stages > 32) {
        throw ConfigError("stage count must be in 1..32");
      }
      spec->label = name + ":" + std::to_string(c.stages);
      break;
    case FCIRK_FAMILY_COMPOSED:
      if (arg.empty()) {
        throw ConfigError("composition needs a coefficient file: composition:<path>");
      }
      spec->coefficients = arg;
      c.coefficients = spec->coefficients.c_str();
      spec->label = name + ":" + arg + "/" + s.base;
      break;
    default:
      if (!arg.empty()) throw ConfigError("'" + name + "' takes no argument");
      spec->label = name;
  }
  return spec;
}

long long whole_steps(double T, double h) {
  if (!(h > 0.0)) throw ConfigError("h must be positive");
  if (!(T >= 0.0)) throw ConfigError("T must be non-negative");
  const long long n = std::llround(T / h);
  if (std::abs(static_cast<double>(n) * h - T) > 1e-9 * std::max(T, h)) {
    throw ConfigError("T = " + fmt17(T) + " is not a whole number of steps of h = " +
                      fmt17(h));
  }
  return n;
}

struct ModelHandle {
  fcirk_model* ptr = nullptr;
  ~ModelHandle() { fcirk_model_free(ptr); }
};

void load_model(const Settings& s, ModelHandle& model) {
  check(fcirk_model_load(s.model.c_str(), s.lax ? 1 : 0, &model.ptr),
        "loading " + s.model);
}

// Writes to --out, or stdout when no path is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ConfigError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  // Human-readable notes go to stdout unless stdout carries the data.
  std::ostream& notes() { return file_.is_open() ? std::cout : std::cerr; }

 private:
  std::ofstream file_;
};

// ---- commands ------------------------------------------------------------

struct TrajectoryWriter {
  std::ostream* out;
  bool double_word;
};

int write_sample(const fcirk_sample* s, void* user) {
  auto* w = static_cast<TrajectoryWriter*>(user);
  std::ostream& out = *w->out;
  out << fmt17(s->t);
  for (int i = 0; i < s->dim; ++i) {
    out << ',' << (w->double_word ? fmt_dd(s->hi[i], s->lo[i]) : fmt17(s->hi[i]));
  }
  out << ',' << fmt17(s->rel_energy_error) << ','
      << fmt17(s->rel_angular_momentum_error) << '\n';
  return out.good() ? 0 : 1;
}

std::string summary_line(const std::string& label, double h,
                         const fcirk_summary& r) {
  std::ostringstream line;
  line << "summary integrator=" << label << " h=" << fmt17(h)
       << " steps=" << r.steps
       << " perturbation_evals=" << r.counters.perturbation_evals
       << " flow_evals=" << r.counters.flow_evals
       << " rhs_flow_evals=" << r.counters.rhs_flow_evals
       << " jacT_evals=" << r.counters.jacT_evals
       << " sweeps=" << r.counters.fixed_point_sweeps
       << " max_rel_energy_error=" << fmt17(r.max_rel_energy_error)
       << " max_rel_angular_momentum_error=" << fmt17(r.max_rel_angular_momentum_error)
       << " cpu_seconds=" << fmt17(r.cpu_seconds)
       << " wall_seconds=" << fmt17(r.wall_seconds);
  return line.str();
}

int cmd_integrate(const Settings& s) {
  ModelHandle model;
  load_model(s, model);
  if (s.integrator.size() != 1) throw ConfigError("integrate takes one integrator");
  auto spec = parse_spec(s.integrator.front(), s);
  spec->cfg.h = s.h;
  spec->cfg.n_steps = whole_steps(s.T, s.h);
  if (s.m < 1) throw ConfigError("m must be >= 1");

  Output out(s.out);
  std::ostream& csv = out.stream();
  csv << "t";
  static const char* const kComponents[] = {"Qx", "Qy", "Qz", "Vx", "Vy", "Vz"};
  for (int b = 1; b <= fcirk_model_bodies(model.ptr); ++b) {
    for (const char* c : kComponents) {
      csv << ',' << fcirk_model_body_name(model.ptr, b) << '.' << c;
    }
  }
  csv << ",rel_energy_error,rel_angular_momentum_error\n";

  TrajectoryWriter writer{&csv, spec->cfg.precision == FCIRK_PRECISION_MIXED};
  fcirk_summary summary{};
  const fcirk_status status =
      fcirk_integrate(model.ptr, &spec->cfg, 0.0, nullptr, nullptr, write_sample,
                      &writer, &summary, nullptr, nullptr);
  csv.flush();
  if (status != FCIRK_OK) {
    out.notes() << "failed after step " << summary.last_good_step
                << " (t = " << fmt17(summary.last_good_time) << ")\n";
    raise(status, "integrate");
  }
  out.notes() << summary_line(spec->label, s.h, summary) << '\n';
  return 0;
}

const char* kSweepHeader =
    "integrator,h,perturbation_evals,cpu_seconds,wall_seconds,"
    "max_rel_energy_error,max_rel_angular_momentum_error,fixed_point_sweeps,"
    "steps,status\n";

// Runs every (integrator, h) pair; failures are recorded as rows and reported
// through the exit status once all pairs ran.
int run_pairs(const Settings& s, const std::vector<std::string>& integrators,
              const std::vector<double>& hs) {
  ModelHandle model;
  load_model(s, model);
  std::vector<std::unique_ptr<IntegratorSpec>> specs;
  for (const std::string& text : integrators) specs.push_back(parse_spec(text, s));
  std::vector<long long> steps;
  for (double h : hs) steps.push_back(whole_steps(s.T, h));

  Output out(s.out);
  std::ostream& csv = out.stream();
  csv << kSweepHeader;
  std::string first_error;
  fcirk_status first_status = FCIRK_OK;
  for (const auto& spec : specs) {
    for (std::size_t k = 0; k < hs.size(); ++k) {
      fcirk_config cfg = spec->cfg;
      cfg.h = hs[k];
      cfg.n_steps = steps[k];
      fcirk_summary r{};
      const fcirk_status status = fcirk_integrate(
          model.ptr, &cfg, 0.0, nullptr, nullptr, nullptr, nullptr, &r, nullptr, nullptr);
      if (status != FCIRK_OK && first_status == FCIRK_OK) {
        first_status = status;
        first_error = spec->label + " h=" + fmt17(hs[k]) + ": " + fcirk_last_error();
      }
      csv << spec->label << ',' << fmt17(hs[k]) << ',' << r.counters.perturbation_evals
          << ',' << fmt17(r.cpu_seconds) << ',' << fmt17(r.wall_seconds) << ','
          << fmt17(r.max_rel_energy_error) << ','
          << fmt17(r.max_rel_angular_momentum_error) << ','
          << r.counters.fixed_point_sweeps << ',' << r.counters.steps << ','
          << (status == FCIRK_OK ? "ok" : fcirk_status_name(status)) << '\n';
      csv.flush();
    }
  }
  if (first_status != FCIRK_OK) raise(first_status, first_error);
  return 0;
}

std::vector<double> step_sizes(const Settings& s) {
  return s.h_list.empty() ? std::vector<double>{s.h} : s.h_list;
}

int cmd_sweep(const Settings& s) {
  return run_pairs(s, s.integrator, step_sizes(s));
}

int cmd_compare(const Settings& s) {
  const std::string st = std::to_string(s.stages);
  return run_pairs(s, {"fcirk:" + st, "irk:" + st}, step_sizes(s));
}

struct ReportHandle {
  fcirk_ensemble_report* ptr = nullptr;
  ~ReportHandle() { fcirk_report_free(ptr); }
};

int cmd_ensemble(const Settings& s) {
  ModelHandle model;
  load_model(s, model);
  if (s.integrator.size() != 1) throw ConfigError("ensemble takes one integrator");
  auto spec = parse_spec(s.integrator.front(), s);
  const std::vector<double> hs = step_sizes(s);
  for (double h : hs) whole_steps(s.T, h);

  fcirk_ensemble_config ec{};
  ec.P = s.P;
  ec.perturb_scale = s.perturb_scale;
  ec.h_list = hs.data();
  ec.h_count = hs.size();
  ec.T = s.T;
  ec.m = s.m;
  ec.seed = s.seed;
  if (s.quantity == "energy") ec.quantity = FCIRK_QUANTITY_ENERGY;
  else if (s.quantity == "angular-momentum") ec.quantity = FCIRK_QUANTITY_ANGULAR_MOMENTUM;
  else throw ConfigError("quantity must be 'energy' or 'angular-momentum'");

  ReportHandle report;
  check(fcirk_ensemble(model.ptr, &spec->cfg, &ec, &report.ptr), "ensemble");

  const std::string prefix = s.out.empty() ? "ensemble" : s.out;
  std::size_t failures = 0;
  for (std::size_t k = 0; k < fcirk_report_count(report.ptr); ++k) {
    double h = 0.0;
    check(fcirk_report_series(report.ptr, k, &h, nullptr, nullptr, nullptr, nullptr),
          "report");
    std::size_t needed = 0;
    check(fcirk_report_csv(report.ptr, k, nullptr, 0, &needed), "report");
    std::string text(needed, '\0');
    check(fcirk_report_csv(report.ptr, k, text.data(), needed, nullptr), "report");
    text.resize(needed - 1);

    const std::string path = prefix + "_" + s.quantity + "_h" + fmt17(h) + ".csv";
    std::ofstream file(path);
    if (!file) throw ConfigError("cannot write " + path);
    file << text;

    std::cout << path << ": h=" << fmt17(h);
    double exponent = 0.0, amplitude = 0.0;
    if (fcirk_report_fit(report.ptr, k, &exponent, &amplitude) == FCIRK_OK) {
      std::cout << " exponent=" << fmt17(exponent) << " amplitude=" << fmt17(amplitude);
    } else {
      std::cout << " (no fit: " << fcirk_last_error() << ")";
    }
    const std::size_t failed = fcirk_report_failures(report.ptr, k);
    if (failed > 0) std::cout << " failed_members=" << failed;
    failures += failed;
    std::cout << '\n';
  }
  if (failures > 0) throw NumericError(std::to_string(failures) + " ensemble members failed");
  return 0;
}

int cmd_tableau(const Settings& s) {
  if (s.stages < 1 || s.stages > 32) throw ConfigError("stage count must be in 1..32");
  fcirk_tableau* tab = nullptr;
  check(fcirk_tableau_gauss(s.stages, &tab), "tableau");
  std::unique_ptr<fcirk_tableau, void (*)(fcirk_tableau*)> guard(tab, fcirk_tableau_free);
  std::size_t needed = 0;
  check(fcirk_tableau_csv(tab, nullptr, 0, &needed), "tableau");
  std::string text(needed, '\0');
  check(fcirk_tableau_csv(tab, text.data(), needed, nullptr), "tableau");
  text.resize(needed - 1);
  double symplecticity = 0.0, symmetry = 0.0;
  check(fcirk_tableau_residuals(tab, &symplecticity, &symmetry), "tableau");

  Output out(s.out);
  out.stream() << text;
  out.notes() << "stages=" << s.stages << " symplecticity_residual="
              << fmt17(symplecticity) << " symmetry_residual=" << fmt17(symmetry)
              << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-composed implicit Runge-Kutta experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(fcirk_version()));

  std::string config_path;
  app.add_option("--config", config_path, "JSON settings file")->check(CLI::ExistingFile);
  Flags flags(app);
  flags.add("model", &Settings::model, "initial-condition JSON file");
  flags.add("integrator", &Settings::integrator,
            "fcirk[:s] | irk[:s] | irk-partitioned[:s] | lawson[:s] | leapfrog | wh"
            " | composition:<file>; comma-separated for sweep")
      ->delimiter(',');
  flags.add("stages", &Settings::stages, "Gauss stages");
  flags.add("base", &Settings::base, "base step for compositions: leapfrog | wh");
  flags.add("h", &Settings::h, "step size");
  flags.add("T", &Settings::T, "integration length");
  flags.add("m", &Settings::m, "output every m steps");
  flags.add("precision", &Settings::precision, "working | mixed")
      ->check(CLI::IsMember({"working", "mixed"}));
  flags.add("init", &Settings::init, "stage initialization: previous | zero")
      ->check(CLI::IsMember({"previous", "zero"}));
  flags.add("fp-max-iters", &Settings::fp_max_iters, "fixed-point sweep cap");
  flags.add("fp-tol", &Settings::fp_tol, "fixed-point stall tolerance");
  flags.add("threads", &Settings::threads, "worker threads (0: all cores)");
  flags.add("seed", &Settings::seed, "ensemble seed");
  flags.add("out", &Settings::out, "output file (ensemble: file prefix)");
  flags.add("P", &Settings::P, "ensemble size");
  flags.add("perturb-scale", &Settings::perturb_scale, "relative perturbation size");
  flags.add("quantity", &Settings::quantity, "energy | angular-momentum")
      ->check(CLI::IsMember({"energy", "angular-momentum"}));
  flags.add("h-list", &Settings::h_list, "step sizes, comma-separated")->delimiter(',');
  flags.flag("lax", &Settings::lax, "ignore unknown fields in the model file");

  std::map<std::string, std::function<int(const Settings&)>> commands{
      {"integrate", cmd_integrate}, {"sweep", cmd_sweep},
      {"ensemble", cmd_ensemble},   {"tableau", cmd_tableau},
      {"compare", cmd_compare},
  };
  const std::map<std::string, std::string> help{
      {"integrate", "write a trajectory CSV with invariant errors"},
      {"sweep", "efficiency table over integrators and step sizes"},
      {"ensemble", "round-off statistics over perturbed initial states"},
      {"tableau", "print a Gauss-Legendre tableau"},
      {"compare", "FCIRK against plain IRK at equal stages and step"},
  };
  for (const auto& [name, text] : help) app.add_subcommand(name, text);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const Settings settings = flags.resolve(config_path);
    return commands.at(app.get_subcommands().front()->get_name())(settings);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
