// entrisk: batch driver for the entropic model-risk library.
//
// Every subcommand reads its parameters from an optional JSON config file
// (--config) and from flags; flags win. --dump-config prints the merged
// parameter set as JSON and exits, and that output is itself a valid config.
//
// Exit codes: 0 success, 2 input/validation error, 3 numerical failure.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entrisk/entrisk.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace entrisk;

namespace {

enum class Kind { Number, Integer, Unsigned, String, NumberList };

struct Param {
  std::string key;
  Kind kind;
  std::string help;
  json fallback;  // null = no default
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
};

const std::vector<Param> kGlobal = {
    {"out", Kind::String, "output CSV path", nullptr},
    {"seed", Kind::Unsigned, "64-bit RNG seed recorded with the run", 42},
};

std::vector<Command> commands() {
  return {
      {"tilt",
       "worst-case measure at a fixed multiplier theta",
       {{"losses", Kind::String, "loss sample CSV (loss,prob)", nullptr},
        {"theta", Kind::Number, "Lagrange multiplier", nullptr},
        {"weights_out", Kind::String, "optional CSV for the Radon-Nikodym weights m*", ""}}},
      {"sweep",
       "tilted statistics over an increasing theta grid",
       {{"losses", Kind::String, "loss sample CSV (loss,prob)", nullptr},
        {"theta_min", Kind::Number, "first grid point", 0.0},
        {"theta_max", Kind::Number, "last grid point", nullptr},
        {"grid", Kind::Integer, "number of evenly spaced grid points", 101},
        {"thetas", Kind::NumberList, "explicit grid (overrides theta_min/theta_max/grid)",
         json::array()}}},
      {"quasistatic",
       "entropy budget integrated along the quasi-static path vs the direct value",
       {{"losses", Kind::String, "loss sample CSV (loss,prob)", nullptr},
        {"theta_max", Kind::Number, "end of the theta grid (grid starts at 0)", nullptr},
        {"grid", Kind::Integer, "number of grid points", 10000}}},
      {"idealgas",
       "truncated power-law spectrum by quadrature",
       {{"n", Kind::Integer, "dimension (density l^{n/2-1})", 2},
        {"l_max", Kind::Number, "truncation of the loss spectrum", 50.0},
        {"quadrature_points", Kind::Integer, "Gauss-Legendre nodes", 2048},
        {"theta_min", Kind::Number, "first theta (negative)", -60.0},
        {"theta_max", Kind::Number, "last theta", -5.0},
        {"grid", Kind::Integer, "number of grid points", 56}}},
      {"thermalize",
       "simulated thermalization for the multiplier at a target risk",
       {{"losses", Kind::String, "loss sample CSV (loss,prob), losses >= 0", nullptr},
        {"v_target", Kind::Number, "target risk V (total energy -V)", nullptr},
        {"n_levels", Kind::Integer, "number of energy levels", 50},
        {"learning_rate", Kind::Number, "adjustment rate in (0, 1]", 0.1},
        {"max_iters", Kind::Unsigned, "iteration cap", 200000000},
        {"tol", Kind::Number, "relative change of mean particle energy per window", 1e-7},
        {"window", Kind::Unsigned, "convergence window in iterations", 1000},
        {"trace_every", Kind::Unsigned, "trace interval (0 = 10 windows)", 0},
        {"trace", Kind::String, "trace CSV path (default <out>.trace.csv)", ""}}},
      {"pde",
       "worst-case risk PDE for l = int h dx + g(x_T)",
       {{"sigma", Kind::Number, "nominal diffusion", 0.2},
        {"theta", Kind::Number, "Lagrange multiplier (>= 0)", 0.0},
        {"horizon", Kind::Number, "horizon T", 1.0},
        {"h_knots", Kind::NumberList, "breakpoints of h, 0 .. T", json::array({0.0, 1.0})},
        {"h_values", Kind::NumberList, "value of h on each segment", json::array({0.0})},
        {"g_type", Kind::String, "terminal payoff: zero|linear|quadratic|gaussian|call|table",
         "zero"},
        {"g_slope", Kind::Number, "linear: slope; quadratic: x^2 coefficient", 1.0},
        {"g_intercept", Kind::Number, "linear/quadratic: constant term", 0.0},
        {"g_amplitude", Kind::Number, "gaussian: height", 1.0},
        {"g_center", Kind::Number, "gaussian: centre", 0.0},
        {"g_width", Kind::Number, "gaussian: standard deviation", 0.3},
        {"g_strike", Kind::Number, "call: strike", 0.0},
        {"g_table_x", Kind::NumberList, "table: abscissae (increasing)", json::array()},
        {"g_table_v", Kind::NumberList, "table: values (linear interpolation)", json::array()},
        {"x_min", Kind::Number, "left edge of the x domain", -2.0},
        {"x_max", Kind::Number, "right edge of the x domain", 2.0},
        {"nx", Kind::Integer, "spatial nodes", 401},
        {"nt", Kind::Integer, "time steps", 400},
        {"x0", Kind::Number, "point at which V(0, x0) is reported", 0.0},
        {"mc_paths", Kind::Integer, "Monte Carlo check paths (0 = skip)", 0},
        {"mc_steps", Kind::Integer, "Monte Carlo time steps", 100}}},
      {"infoflow",
       "entropy chain rule and horizon-dependent budget/risk",
       {{"joint", Kind::String, "joint pmf CSV (x,y1,...,yn,prob)", ""},
        {"chain_out", Kind::String, "chain-rule CSV (default: stdout)", ""},
        {"losses", Kind::String, "loss sample CSV for the horizon curve", ""},
        {"rate_knots", Kind::NumberList, "breakpoints of the information rate", json::array()},
        {"rates", Kind::NumberList, "information rate per segment (nats/time)", json::array()},
        {"horizons", Kind::NumberList, "horizons at which to report", json::array()}}},
  };
}

std::string flag_of(const std::string& key) {
  std::string f = key;
  for (char& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

template <typename T>
T parse_integer(const std::string& text, const std::string& where) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(where + ": cannot parse '" + text + "' as an integer");
  }
  return v;
}

json parse_value(const Param& p, const std::string& text) {
  const std::string where = flag_of(p.key);
  switch (p.kind) {
    case Kind::Number:
      return io::detail::parse_double(text, where);
    case Kind::Integer:
      return parse_integer<std::int64_t>(text, where);
    case Kind::Unsigned:
      return parse_integer<std::uint64_t>(text, where);
    case Kind::String:
      return text;
    case Kind::NumberList: {
      json arr = json::array();
      for (const auto& cell : io::detail::split(text)) {
        if (!cell.empty()) arr.push_back(io::detail::parse_double(cell, where));
      }
      return arr;
    }
  }
  throw ValidationError(where + ": unsupported parameter kind");
}

bool kind_matches(const Param& p, const json& v) {
  switch (p.kind) {
    case Kind::Number:
      return v.is_number();
    case Kind::Integer:
      return v.is_number_integer();
    case Kind::Unsigned:
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::String:
      return v.is_string();
    case Kind::NumberList:
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (!e.is_number()) return false;
      }
      return true;
  }
  return false;
}

/// Defaults, then the config file, then flags.
json merge_config(const Command& cmd, const std::vector<Param>& all, const std::string& config_path,
                  const std::map<std::string, std::string>& given) {
  json merged = json::object();
  merged["command"] = cmd.name;
  for (const auto& p : all) merged[p.key] = p.fallback;

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot open config '" + config_path + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError("config '" + config_path + "': " + e.what());
    }
    if (!file.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key == "command") {
        if (value != cmd.name) {
          throw ValidationError("config is for command '" + value.dump() + "', not '" + cmd.name +
                                "'");
        }
        continue;
      }
      const auto it = std::find_if(all.begin(), all.end(), [&](const Param& p) { return p.key == key; });
      if (it == all.end()) throw ValidationError("config: unknown key '" + key + "'");
      if (!value.is_null() && !kind_matches(*it, value)) {
        throw ValidationError("config: key '" + key + "' has the wrong type");
      }
      merged[key] = value;
    }
  }
  for (const auto& p : all) {
    const auto it = given.find(p.key);
    if (it != given.end()) merged[p.key] = parse_value(p, it->second);
  }
  return merged;
}

template <typename T>
T require(const json& cfg, const std::string& key) {
  const auto& v = cfg.at(key);
  if (v.is_null()) throw ValidationError("missing required parameter '" + key + "'");
  return v.get<T>();
}

std::vector<double> numbers(const json& cfg, const std::string& key) {
  return cfg.at(key).get<std::vector<double>>();
}

std::string out_path(const json& cfg) {
  if (cfg.at("out").is_null()) return cfg.at("command").get<std::string>() + ".csv";
  return cfg.at("out").get<std::string>();
}

int positive_int(const json& cfg, const std::string& key) {
  const auto v = require<std::int64_t>(cfg, key);
  if (v < 1 || v > std::numeric_limits<int>::max()) {
    throw ValidationError("'" + key + "' must be a positive integer");
  }
  return static_cast<int>(v);
}

// -- subcommands -------------------------------------------------------------

int cmd_tilt(const json& cfg) {
  const auto s = io::load_loss_sample(require<std::string>(cfg, "losses"));
  const auto r = tilt_at(s, require<double>(cfg, "theta"));
  io::write_atomic(out_path(cfg), io::tilt_result_csv(r));
  const auto weights = cfg.at("weights_out").get<std::string>();
  if (!weights.empty()) io::write_atomic(weights, io::measure_change_csv(s, r.m_star));
  std::cout << "theta=" << io::fmt(r.theta) << " v_star=" << io::fmt(r.v_star)
            << " w_star=" << io::fmt(r.w_star) << " eta_star=" << io::fmt(r.eta_star) << "\n";
  return 0;
}

int cmd_sweep(const json& cfg) {
  const auto s = io::load_loss_sample(require<std::string>(cfg, "losses"));
  std::vector<double> grid = numbers(cfg, "thetas");
  if (grid.empty()) {
    grid = linear_grid(require<double>(cfg, "theta_min"), require<double>(cfg, "theta_max"),
                       static_cast<std::size_t>(positive_int(cfg, "grid")));
  }
  io::write_atomic(out_path(cfg), io::tilt_curve_csv(sweep(s, grid)));
  return 0;
}

int cmd_quasistatic(const json& cfg) {
  const auto s = io::load_loss_sample(require<std::string>(cfg, "losses"));
  const double theta_max = require<double>(cfg, "theta_max");
  if (!(theta_max > 0.0)) throw ValidationError("'theta_max' must be positive");
  const auto grid = linear_grid(0.0, theta_max, static_cast<std::size_t>(positive_int(cfg, "grid")));
  const auto report = integrate_entropy(sweep(s, grid));
  io::write_atomic(out_path(cfg), io::quasistatic_csv(report));
  std::cout << "eta_star=" << io::fmt(report.curve.back().eta_star)
            << " eta_integrated=" << io::fmt(report.eta_integrated.back())
            << " final_rel_error=" << io::fmt(rel_error_at(report, report.curve.size() - 1))
            << " max_rel_error=" << io::fmt(report.max_rel_error) << "\n";
  return 0;
}

int cmd_idealgas(const json& cfg) {
  IdealGasSpec spec;
  spec.n = positive_int(cfg, "n");
  spec.l_max = require<double>(cfg, "l_max");
  spec.quadrature_points = positive_int(cfg, "quadrature_points");
  const auto grid = linear_grid(require<double>(cfg, "theta_min"), require<double>(cfg, "theta_max"),
                                static_cast<std::size_t>(positive_int(cfg, "grid")));
  const auto curve = ideal_gas_curve(spec, grid);
  io::write_atomic(out_path(cfg), io::ideal_gas_csv(curve));
  const auto fit = ideal_gas_slope(curve);
  std::cout << "slope(eta vs ln|V|)=" << io::fmt(fit.slope) << " expected_magnitude="
            << io::fmt(0.5 * spec.n) << " clean_points=" << fit.points << "\n";
  return 0;
}

int cmd_thermalize(const json& cfg) {
  const auto s = io::load_loss_sample(require<std::string>(cfg, "losses"));
  const double v = require<double>(cfg, "v_target");
  const auto seed = require<std::uint64_t>(cfg, "seed");
  auto st = init_state(s, v, positive_int(cfg, "n_levels"), seed);
  ThermalizationOptions opt;
  opt.learning_rate = require<double>(cfg, "learning_rate");
  opt.max_iters = require<std::uint64_t>(cfg, "max_iters");
  opt.tol = require<double>(cfg, "tol");
  opt.window = require<std::uint64_t>(cfg, "window");
  opt.trace_every = require<std::uint64_t>(cfg, "trace_every");
  const auto r = run(st, opt);

  const std::string out = out_path(cfg);
  std::string trace = cfg.at("trace").get<std::string>();
  if (trace.empty()) trace = fs::path(out).replace_extension(".trace.csv").string();
  io::write_atomic(out, io::thermalization_result_csv(r));
  io::write_atomic(trace, io::thermalization_trace_csv(r));

  std::cout << "beta=" << io::fmt(r.beta) << " r_squared=" << io::fmt(r.r_squared)
            << " iterations=" << r.iterations_used << " converged=" << r.converged
            << " energy_drift=" << io::fmt(r.energy_drift) << "\n";
  try {
    std::cout << "tilt theta with V*(theta)=" << io::fmt(v) << ": "
              << io::fmt(solve_theta_for_risk(s, v)) << "\n";
  } catch (const ValidationError& e) {
    std::cout << "tilt theta unavailable: " << e.what() << "\n";
  }
  if (!r.converged) {
    std::cerr << "entrisk thermalize: did not converge within " << r.iterations_used
              << " iterations\n";
    return 3;
  }
  return 0;
}

std::function<double(double)> terminal_payoff(const json& cfg) {
  const auto type = cfg.at("g_type").get<std::string>();
  if (type == "zero") return [](double) { return 0.0; };
  if (type == "linear" || type == "quadratic") {
    const double a = require<double>(cfg, "g_slope");
    const double b = require<double>(cfg, "g_intercept");
    if (type == "linear") return [a, b](double x) { return a * x + b; };
    return [a, b](double x) { return a * x * x + b; };
  }
  if (type == "gaussian") {
    const double amp = require<double>(cfg, "g_amplitude");
    const double c = require<double>(cfg, "g_center");
    const double w = require<double>(cfg, "g_width");
    if (!(w > 0.0)) throw ValidationError("'g_width' must be positive");
    return [=](double x) { return amp * std::exp(-(x - c) * (x - c) / (2.0 * w * w)); };
  }
  if (type == "call") {
    const double k = require<double>(cfg, "g_strike");
    return [k](double x) { return std::max(x - k, 0.0); };
  }
  if (type == "table") {
    auto xs = numbers(cfg, "g_table_x");
    auto vs = numbers(cfg, "g_table_v");
    if (xs.size() < 2 || xs.size() != vs.size()) {
      throw ValidationError("table payoff needs matching g_table_x/g_table_v with >= 2 points");
    }
    if (!std::is_sorted(xs.begin(), xs.end()) ||
        std::adjacent_find(xs.begin(), xs.end()) != xs.end()) {
      throw ValidationError("'g_table_x' must be strictly increasing");
    }
    return [xs, vs](double x) {
      if (x <= xs.front()) return vs.front();
      if (x >= xs.back()) return vs.back();
      const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
      const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
      return (1.0 - w) * vs[hi - 1] + w * vs[hi];
    };
  }
  throw ValidationError("unknown g_type '" + type + "'");
}

int cmd_pde(const json& cfg) {
  PdeProblem p;
  p.sigma = require<double>(cfg, "sigma");
  p.theta = require<double>(cfg, "theta");
  p.horizon = require<double>(cfg, "horizon");
  p.h = PiecewiseConstant{numbers(cfg, "h_knots"), numbers(cfg, "h_values")};
  p.g = terminal_payoff(cfg);
  p.x_min = require<double>(cfg, "x_min");
  p.x_max = require<double>(cfg, "x_max");
  p.nx = positive_int(cfg, "nx");
  p.nt = positive_int(cfg, "nt");
  const auto sol = solve(p);
  io::write_atomic(out_path(cfg), io::pde_surface_csv(sol));
  for (const auto& w : sol.warnings()) std::cerr << "warning: " << w << "\n";

  const double x0 = require<double>(cfg, "x0");
  std::cout << "V(0," << io::fmt(x0) << ")=" << io::fmt(sol.value_at(0.0, x0)) << "\n";
  const auto paths = require<std::int64_t>(cfg, "mc_paths");
  if (paths > 0) {
    const auto mc = mc_oracle(p, x0, static_cast<int>(paths), positive_int(cfg, "mc_steps"),
                              require<std::uint64_t>(cfg, "seed"));
    std::cout << "mc_estimate=" << io::fmt(mc.estimate) << " std_error=" << io::fmt(mc.std_error)
              << "\n";
  }
  return 0;
}

int cmd_infoflow(const json& cfg) {
  const auto joint = cfg.at("joint").get<std::string>();
  const auto losses = cfg.at("losses").get<std::string>();
  if (joint.empty() && losses.empty()) {
    throw ValidationError("infoflow needs --joint and/or --losses");
  }
  if (!joint.empty()) {
    const auto chain = conditional_entropy_chain(io::load_joint_pmf(joint));
    const auto csv = io::entropy_chain_csv(chain);
    const auto chain_out = cfg.at("chain_out").get<std::string>();
    if (chain_out.empty()) {
      std::cout << csv;
    } else {
      io::write_atomic(chain_out, csv);
    }
  }
  if (!losses.empty()) {
    const auto s = io::load_loss_sample(losses);
    const InfoSchedule sched{numbers(cfg, "rate_knots"), numbers(cfg, "rates")};
    const auto horizons = numbers(cfg, "horizons");
    if (horizons.empty()) throw ValidationError("'horizons' must not be empty");
    io::write_atomic(out_path(cfg), io::horizon_curve_csv(risk_horizon_curve(s, sched, horizons)));
  }
  return 0;
}

int dispatch(const json& cfg) {
  const auto name = cfg.at("command").get<std::string>();
  if (name == "tilt") return cmd_tilt(cfg);
  if (name == "sweep") return cmd_sweep(cfg);
  if (name == "quasistatic") return cmd_quasistatic(cfg);
  if (name == "idealgas") return cmd_idealgas(cfg);
  if (name == "thermalize") return cmd_thermalize(cfg);
  if (name == "pde") return cmd_pde(cfg);
  if (name == "infoflow") return cmd_infoflow(cfg);
  throw ValidationError("unknown command '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entrisk: worst-case model risk under a relative-entropy budget"};
  app.require_subcommand(1);

  const auto cmds = commands();
  struct Bound {
    const Command* cmd = nullptr;
    CLI::App* sub = nullptr;
    std::vector<Param> all;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> opts;
    std::string config;
    bool dump = false;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t c = 0; c < cmds.size(); ++c) {
    auto& b = bound[c];
    b.cmd = &cmds[c];
    b.sub = app.add_subcommand(cmds[c].name, cmds[c].help);
    b.all = kGlobal;
    b.all.insert(b.all.end(), cmds[c].params.begin(), cmds[c].params.end());
    for (const auto& p : b.all) {
      std::string help = p.help;
      if (!p.fallback.is_null()) help += " [default: " + p.fallback.dump() + "]";
      b.opts[p.key] = b.sub->add_option(flag_of(p.key), b.raw[p.key], help);
    }
    b.sub->add_option("--config", b.config, "JSON config file; flags override its values");
    b.sub->add_flag("--dump-config", b.dump, "print the merged config as JSON and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (auto& b : bound) {
    if (!b.sub->parsed()) continue;
    try {
      std::map<std::string, std::string> given;
      for (const auto& p : b.all) {
        if (b.opts[p.key]->count() > 0) given[p.key] = b.raw[p.key];
      }
      const json cfg = merge_config(*b.cmd, b.all, b.config, given);
      if (b.dump) {
        std::cout << cfg.dump(2) << "\n";
        return 0;
      }
      return dispatch(cfg);
    } catch (const ValidationError& e) {
      std::cerr << "entrisk " << b.cmd->name << ": " << e.what() << "\n";
      return 2;
    } catch (const json::exception& e) {
      std::cerr << "entrisk " << b.cmd->name << ": bad parameter: " << e.what() << "\n";
      return 2;
    } catch (const NumericalError& e) {
      std::cerr << "entrisk " << b.cmd->name << ": numerical failure: " << e.what() << "\n";
      return 3;
    } catch (const std::exception& e) {
      std::cerr << "entrisk " << b.cmd->name << ": " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
