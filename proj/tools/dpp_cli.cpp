// Command-line front end: simulate, fit and diagnose stationary DPP models.
//
// Exit codes: 0 ok, 2 parse, 3 model, 4 io, 5 convergence.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpp/dpp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kParse = 2, kModel = 3, kIo = 4, kConvergence = 5 };

int exit_code(dpp::ErrorKind k) {
  switch (k) {
    case dpp::ErrorKind::Parse: return kParse;
    case dpp::ErrorKind::Io: return kIo;
    case dpp::ErrorKind::NoConvergence: return kConvergence;
    default: return kModel;
  }
}

struct Config {
  std::string command;
  std::string model_spec;
  std::string window = "0,1,0,1";
  std::optional<std::uint64_t> seed;
  int N = 0;
  std::size_t n_sim = 0;
  std::string input;
  std::string out;
  std::string method = "periodic";
  std::string fit_method = "mle";  // fit: mle, mce-k or mce-g
  std::string family;
  std::string alt_family;
  std::string statistic = "K";
  std::optional<double> nu;
  bool fit_rho = false;
  bool convolution = false;
  int N_max = 1024;
  double q = 0.5, p = 2.0;
  std::optional<double> r_lower, r_upper;
  double bandwidth = 0.0;
  int bins = 10;
  int homogeneous_axis = 0;
  std::string dump_lattice;
  int threads = dpp::default_threads();
  bool dry_run = false;
};

json resolved(const Config& c) {
  json j;
  j["command"] = c.command;
  if (!c.model_spec.empty()) j["model"] = c.model_spec;
  j["window"] = c.window;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["N"] = c.N;
  j["N_max"] = c.N_max;
  j["n_sim"] = c.n_sim;
  j["input"] = c.input;
  j["out"] = c.out;
  j["method"] = c.command == "fit" ? c.fit_method : c.method;
  if (!c.family.empty()) j["family"] = c.family;
  if (!c.alt_family.empty()) j["alt_family"] = c.alt_family;
  j["statistic"] = c.statistic;
  j["nu"] = c.nu ? json(*c.nu) : json(nullptr);
  j["fit_rho"] = c.fit_rho;
  j["convolution"] = c.convolution;
  j["q"] = c.q;
  j["p"] = c.p;
  j["r_lower"] = c.r_lower ? json(*c.r_lower) : json(nullptr);
  j["r_upper"] = c.r_upper ? json(*c.r_upper) : json(nullptr);
  j["bandwidth"] = c.bandwidth;
  j["bins"] = c.bins;
  j["homogeneous_axis"] = c.homogeneous_axis;
  j["threads"] = c.threads;
  j["version"] = DPP_VERSION;
  return j;
}

std::string read_text(const std::string& spec) {
  // a spec that names an existing file is read from it
  if (spec.find('=') == std::string::npos && spec.find('{') == std::string::npos) {
    std::ifstream in(spec);
    if (!in) dpp::fail(dpp::ErrorKind::Io, "cannot open model file " + spec);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  return spec;
}

dpp::Family family_arg(const std::string& s) {
  const auto f = dpp::family_from_name(s);
  if (!f) dpp::fail(dpp::ErrorKind::Parse, "unknown family '" + s + "'");
  return *f;
}

dpp::WindowMethod method_arg(const std::string& s) {
  if (s == "periodic") return dpp::WindowMethod::Periodic;
  if (s == "border") return dpp::WindowMethod::Border;
  dpp::fail(dpp::ErrorKind::Parse, "method must be periodic or border");
}

dpp::CurveKind statistic_arg(const std::string& s) {
  const auto k = dpp::curve_kind_from_name(s);
  if (!k) dpp::fail(dpp::ErrorKind::Parse, "unknown statistic '" + s + "'");
  return *k;
}

std::uint64_t need_seed(const Config& c) {
  if (!c.seed) dpp::fail(dpp::ErrorKind::Parse, "--seed is required for " + c.command);
  return *c.seed;
}

void emit(const Config& c, const json& j) {
  const std::string text = j.dump(2) + "\n";
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(c.out);
  if (!out) dpp::fail(dpp::ErrorKind::Io, "cannot write " + c.out);
  out << text;
}

dpp::PointPattern load_input(const Config& c) {
  if (c.input.empty()) dpp::fail(dpp::ErrorKind::Parse, "--input is required");
  if (!fs::exists(c.input)) dpp::fail(dpp::ErrorKind::Io, "no such file: " + c.input);
  return dpp::read_pattern_csv(c.input, dpp::parse_window(c.window));
}

dpp::FitOptions fit_options(const Config& c) {
  dpp::FitOptions o;
  o.fit_rho = c.fit_rho;
  o.nu_fixed = c.nu;
  o.use_convolution = c.convolution;
  if (c.N > 0) o.N_start = c.N;
  o.N_max = std::max(c.N_max, o.N_start);
  return o;
}

int cmd_info(const Config& c) {
  const dpp::KernelModel m = dpp::parse_model(read_text(c.model_spec));
  const auto v = dpp::validate(m);
  json j;
  j["model"] = dpp::model_to_json(m);
  j["valid"] = v.ok;
  if (!v.ok) j["violation"] = v.message;
  j["rho_max"] = dpp::rho_max(m);
  // quantities without a finite value (e.g. alpha_max at rho = 0) become null
  auto optional_value = [&](const char* key, auto f) {
    try {
      j[key] = f();
    } catch (const dpp::Error& e) {
      j[key] = nullptr;
      j[std::string(key) + "_note"] = e.what();
    }
  };
  if (dpp::uses_alpha(m.family)) optional_value("alpha_max", [&] { return dpp::alpha_max(m); });
  if (m.family == dpp::Family::Circular) optional_value("delta_max", [&] { return dpp::delta_max(m.rho); });
  optional_value("r0", [&] { return dpp::range_of_correlation(m); });
  optional_value("mu", [&] { return v.ok ? dpp::repulsiveness_mu(m) : std::nan(""); });
  std::cerr << std::setprecision(6) << dpp::describe(m) << "\n"
            << "  valid      " << (v.ok ? "yes" : "no") << "\n"
            << "  rho_max    " << j["rho_max"].get<double>() << "\n";
  if (j.contains("alpha_max") && j["alpha_max"].is_number()) std::cerr << "  alpha_max  " << j["alpha_max"].get<double>() << "\n";
  if (j["r0"].is_number()) std::cerr << "  r0         " << j["r0"].get<double>() << "\n";
  if (j["mu"].is_number()) std::cerr << "  mu         " << j["mu"].get<double>() << "\n";
  emit(c, j);
  return v.ok ? kOk : kModel;
}

int cmd_simulate(const Config& c) {
  const std::uint64_t seed = need_seed(c);
  const dpp::KernelModel m = dpp::parse_model(read_text(c.model_spec));
  const dpp::Window w = dpp::parse_window(c.window);
  dpp::require_valid(m);
  if (c.out.empty()) dpp::fail(dpp::ErrorKind::Parse, "--out DIR is required");
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) dpp::fail(dpp::ErrorKind::Io, "cannot create " + c.out);
  dpp::SimulationOptions so;
  so.method = method_arg(c.method);
  so.N = c.N;
  so.N_max = c.N_max;
  const dpp::Simulator sim(m, w, so);
  if (!c.dump_lattice.empty()) dpp::write_lattice_csv(sim.lattice(), c.dump_lattice);
  const dpp::RngStream rng(seed);
  std::vector<std::string> files(c.n_sim);
  std::vector<std::size_t> counts(c.n_sim);
  dpp::parallel_for(c.n_sim, c.threads, [&](std::size_t i) {
    dpp::RngStream s = rng.substream(i);
    const dpp::PointPattern x = sim(s);
    std::ostringstream name;
    name << "sim_" << std::setw(5) << std::setfill('0') << i << ".csv";
    files[i] = name.str();
    counts[i] = x.size();
    dpp::write_pattern_csv((fs::path(c.out) / files[i]).string(), x);
  });
  json j;
  j["config"] = resolved(c);
  j["model"] = dpp::model_to_json(m);
  j["method"] = dpp::method_name(so.method);
  j["N"] = sim.lattice().N;
  j["files"] = files;
  j["counts"] = counts;
  std::ofstream out(fs::path(c.out) / "manifest.json");
  if (!out) dpp::fail(dpp::ErrorKind::Io, "cannot write manifest");
  out << j.dump(2) << "\n";
  return kOk;
}

int cmd_mce(const Config& c);

int cmd_fit(const Config& c) {
  if (c.fit_method == "mce-k" || c.fit_method == "mce-g") {
    Config m = c;
    m.statistic = c.fit_method == "mce-k" ? "K" : "g";
    return cmd_mce(m);
  }
  if (c.fit_method != "mle") dpp::fail(dpp::ErrorKind::Parse, "fit method must be mle, mce-k or mce-g");
  const auto x = load_input(c);
  const auto r = dpp::fit_mle(family_arg(c.family), x, fit_options(c));
  json j = dpp::fit_to_json(r);
  j["config"] = resolved(c);
  emit(c, j);
  return kOk;
}

int cmd_mce(const Config& c) {
  const auto x = load_input(c);
  dpp::McOptions o;
  o.statistic = statistic_arg(c.statistic);
  o.q = c.q;
  o.p = c.p;
  o.r_lower = c.r_lower;
  o.r_upper = c.r_upper;
  o.bandwidth = c.bandwidth;
  o.nu_fixed = c.nu;
  const auto r = dpp::fit_minimum_contrast(family_arg(c.family), x, o);
  json j = dpp::fit_to_json(r);
  j["config"] = resolved(c);
  emit(c, j);
  return kOk;
}

int cmd_envelope(const Config& c) {
  const std::uint64_t seed = need_seed(c);
  const dpp::KernelModel m = dpp::parse_model(read_text(c.model_spec));
  const dpp::Window w = dpp::parse_window(c.window);
  dpp::EnvelopeOptions o;
  o.method = method_arg(c.method);
  o.threads = c.threads;
  o.bandwidth = c.bandwidth;
  const auto kind = statistic_arg(c.statistic);
  const auto band = dpp::envelopes(m, kind, w, c.n_sim, dpp::RngStream(seed), o);
  std::optional<std::vector<double>> observed;
  if (!c.input.empty()) observed = dpp::statistic_values(load_input(c), kind, band.r, c.bandwidth);
  if (c.out.empty() || c.out == "-") {
    dpp::write_band_csv(std::cout, band, observed ? &*observed : nullptr);
  } else {
    std::ofstream out(c.out);
    if (!out) dpp::fail(dpp::ErrorKind::Io, "cannot write " + c.out);
    dpp::write_band_csv(out, band, observed ? &*observed : nullptr);
  }
  json j;
  j["statistic"] = dpp::curve_kind_name(kind);
  j["n_sim"] = band.n_sim + band.n_dropped;
  j["n_dropped"] = band.n_dropped;
  j["seed"] = seed;
  j["config"] = resolved(c);
  std::cerr << j.dump(2) << "\n";
  return kOk;
}

int cmd_lrt(const Config& c) {
  const std::uint64_t seed = need_seed(c);
  const auto x = load_input(c);
  dpp::LrtOptions o;
  o.null_fit = fit_options(c);
  o.alt_fit = fit_options(c);
  o.null_fit.nu_fixed.reset();
  o.threads = c.threads;
  const auto t = dpp::lr_test(family_arg(c.family.empty() ? "gaussian" : c.family), family_arg(c.alt_family), x,
                              c.n_sim, dpp::RngStream(seed), o);
  json j = dpp::test_to_json(t);
  j["config"] = resolved(c);
  emit(c, j);
  return kOk;
}

int cmd_rlt(const Config& c) {
  const std::uint64_t seed = need_seed(c);
  const auto x = load_input(c);
  dpp::RltOptions o;
  o.fit = fit_options(c);
  o.threads = c.threads;
  const auto t = dpp::random_labelling_test(x, family_arg(c.family), c.n_sim, dpp::RngStream(seed), o);
  json j = dpp::test_to_json(t);
  j["config"] = resolved(c);
  emit(c, j);
  return kOk;
}

int cmd_inhom(const Config& c) {
  const auto x = load_input(c);
  const auto r = dpp::fit_inhomogeneous_separable(x, c.bins, family_arg(c.family), c.homogeneous_axis, fit_options(c));
  json j;
  j["rho1"] = r.rho1;
  j["bin_edges"] = r.bin_edges;
  j["counts"] = r.counts;
  j["rho2"] = r.rho2;
  j["transformed_side"] = r.scale;
  j["fit"] = dpp::fit_to_json(r.fit);
  j["kernel"] = r.describe();
  j["warnings"] = r.warnings;
  j["config"] = resolved(c);
  emit(c, j);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and inference for stationary determinantal point processes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(DPP_VERSION) + " (" + DPP_BUILD_HASH + ")");
  Config c;
  app.add_option("--threads", c.threads, "Worker threads for replicate loops")->check(CLI::PositiveNumber);
  app.add_flag("--dry-run", c.dry_run, "Print the resolved configuration and exit");

  auto model_opt = [&](CLI::App* s) { s->add_option("--model", c.model_spec, "Model spec text, JSON or file")->required(); };
  auto window_opt = [&](CLI::App* s) { s->add_option("--window", c.window, "x0,x1,y0,y1 (or x0,x1)"); };
  auto seed_opt = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Random seed"); };
  auto nsim_opt = [&](CLI::App* s, std::size_t def) {
    c.n_sim = def;
    s->add_option("--n-sims", c.n_sim, "Number of simulations");
  };
  auto input_opt = [&](CLI::App* s, bool required) {
    auto o = s->add_option("--input", c.input, "Pattern CSV with header x,y[,mark]");
    if (required) o->required();
  };
  auto fit_opts = [&](CLI::App* s) {
    s->add_option("--nu", c.nu, "Fix the shape parameter");
    s->add_flag("--fit-rho", c.fit_rho, "Estimate rho by likelihood too");
    s->add_flag("--convolution", c.convolution, "Use the convolution approximation");
    s->add_option("--N", c.N, "Starting lattice half-width");
    s->add_option("--N-max", c.N_max, "Largest lattice half-width");
  };
  auto out_opt = [&](CLI::App* s, const char* what) { s->add_option("--out", c.out, what); };

  auto* info = app.add_subcommand("info", "Model summary: rho_max, alpha_max, r0, mu, validity");
  model_opt(info);
  out_opt(info, "JSON output file (stdout by default)");

  auto* sim = app.add_subcommand("simulate", "Simulate patterns into a directory");
  model_opt(sim);
  window_opt(sim);
  seed_opt(sim);
  nsim_opt(sim, 1);
  sim->add_option("--method", c.method, "periodic or border");
  sim->add_option("--N", c.N, "Lattice half-width (0 = automatic)");
  sim->add_option("--N-max", c.N_max, "Largest automatic lattice half-width");
  sim->add_option("--dump-lattice", c.dump_lattice, "Write the truncated spectral lattice as CSV");
  out_opt(sim, "Output directory");

  auto* fit = app.add_subcommand("fit", "Maximum likelihood or minimum contrast fit");
  fit->add_option("--input,--pattern", c.input, "Pattern CSV with header x,y[,mark]")->required();
  window_opt(fit);
  fit->add_option("--family,--model-family", c.family, "Model family")->required();
  fit->add_option("--method", c.fit_method, "mle, mce-k or mce-g");
  fit_opts(fit);
  out_opt(fit, "JSON output file");

  auto* mce = app.add_subcommand("mce", "Minimum contrast fit");
  input_opt(mce, true);
  window_opt(mce);
  mce->add_option("--family", c.family, "Model family")->required();
  mce->add_option("--statistic", c.statistic, "K or g");
  mce->add_option("--q", c.q, "Contrast power q");
  mce->add_option("--p", c.p, "Contrast exponent p");
  mce->add_option("--r-lower", c.r_lower, "Lower integration limit");
  mce->add_option("--r-upper", c.r_upper, "Upper integration limit");
  mce->add_option("--bandwidth", c.bandwidth, "pcf bandwidth (default 0.15/sqrt(intensity))");
  mce->add_option("--nu", c.nu, "Fix the shape parameter");
  out_opt(mce, "JSON output file");

  auto* env = app.add_subcommand("envelope", "Simulation envelopes of a summary statistic");
  model_opt(env);
  window_opt(env);
  seed_opt(env);
  nsim_opt(env, 400);
  input_opt(env, false);
  env->add_option("--statistic", c.statistic, "K, L, L-r, g, F, G or J");
  env->add_option("--method", c.method, "periodic or border");
  env->add_option("--bandwidth", c.bandwidth, "pcf bandwidth");
  out_opt(env, "CSV output file r,value,lower,upper,mean");

  auto* lrt = app.add_subcommand("lrt", "Likelihood ratio test of a gaussian null");
  input_opt(lrt, true);
  window_opt(lrt);
  seed_opt(lrt);
  nsim_opt(lrt, 400);
  lrt->add_option("--null", c.family, "Null family (gaussian)");
  lrt->add_option("--alt", c.alt_family, "Alternative family")->required();
  fit_opts(lrt);
  out_opt(lrt, "JSON output file");

  auto* rlt = app.add_subcommand("rlt", "Random labelling test for a two-type pattern");
  input_opt(rlt, true);
  window_opt(rlt);
  seed_opt(rlt);
  nsim_opt(rlt, 400);
  rlt->add_option("--family", c.family, "Model family")->required();
  fit_opts(rlt);
  out_opt(rlt, "JSON output file");

  auto* inh = app.add_subcommand("inhom", "Separable inhomogeneous fit");
  input_opt(inh, true);
  window_opt(inh);
  inh->add_option("--family", c.family, "Model family")->required();
  inh->add_option("--bins", c.bins, "Bins along the inhomogeneous axis");
  inh->add_option("--homogeneous-axis", c.homogeneous_axis, "0 for x, 1 for y");
  fit_opts(inh);
  out_opt(inh, "JSON output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }
  c.command = app.get_subcommands().front()->get_name();
  if (c.dry_run) {
    std::cout << resolved(c).dump(2) << "\n";
    return kOk;
  }
  try {
    if (c.command == "info") return cmd_info(c);
    if (c.command == "simulate") return cmd_simulate(c);
    if (c.command == "fit") return cmd_fit(c);
    if (c.command == "mce") return cmd_mce(c);
    if (c.command == "envelope") return cmd_envelope(c);
    if (c.command == "lrt") return cmd_lrt(c);
    if (c.command == "rlt") return cmd_rlt(c);
    if (c.command == "inhom") return cmd_inhom(c);
  } catch (const dpp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModel;
  }
  return kOk;
}
