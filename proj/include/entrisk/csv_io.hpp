#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "entrisk/core_ensemble.hpp"
#include "entrisk/error.hpp"
#include "entrisk/infoflow.hpp"
#include "entrisk/pathrisk.hpp"
#include "entrisk/quasistatic.hpp"
#include "entrisk/thermalize.hpp"
#include "entrisk/tilt.hpp"

namespace entrisk::io {

/// Shortest round-trip-safe rendering with 17 significant digits.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError(where + ": cannot parse '" + s + "' as a number");
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw ValidationError(where + ": cannot parse '" + s + "' as a finite number");
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (first) {
      t.header = split(line);
      first = false;
    } else {
      t.rows.push_back(split(line));
    }
  }
  if (first) throw ValidationError("'" + path.string() + "' is empty");
  return t;
}

}  // namespace detail

/// Loads a `loss,prob` CSV. Probabilities must sum to 1 within 1e-9; the
/// remaining discrepancy is scaled away.
inline LossSample load_loss_sample(const std::filesystem::path& path) {
  const auto t = detail::read_table(path);
  if (t.header != std::vector<std::string>{"loss", "prob"}) {
    throw ValidationError("'" + path.string() + "': expected header 'loss,prob'");
  }
  std::vector<double> losses, probs;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path.string() + " row " + std::to_string(r + 2);
    if (t.rows[r].size() != 2) throw ValidationError(where + ": expected 2 columns");
    losses.push_back(detail::parse_double(t.rows[r][0], where));
    probs.push_back(detail::parse_double(t.rows[r][1], where));
  }
  if (losses.empty()) throw ValidationError("'" + path.string() + "' has no data rows");
  const double total = entrisk::detail::sum(probs);
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("'" + path.string() + "': probabilities sum to " + fmt(total) +
                          ", expected 1 within 1e-9");
  }
  return LossSample::normalized(std::move(losses), std::move(probs));
}

/// Loads `x,y1,...,yn,prob` rows of nonnegative integer symbols. Alphabet
/// sizes are the largest symbol + 1; cells not listed have probability 0.
inline JointPmf load_joint_pmf(const std::filesystem::path& path) {
  const auto t = detail::read_table(path);
  const std::size_t cols = t.header.size();
  if (cols < 3 || t.header.front() != "x" || t.header.back() != "prob") {
    throw ValidationError("'" + path.string() + "': expected header 'x,y1,...,yn,prob'");
  }
  for (std::size_t c = 1; c + 1 < cols; ++c) {
    if (t.header[c] != "y" + std::to_string(c)) {
      throw ValidationError("'" + path.string() + "': column " + std::to_string(c + 1) +
                            " must be 'y" + std::to_string(c) + "'");
    }
  }
  const std::size_t nv = cols - 1;
  std::vector<std::vector<std::size_t>> symbols;
  std::vector<double> probs;
  std::vector<std::size_t> dims(nv, 1);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path.string() + " row " + std::to_string(r + 2);
    if (t.rows[r].size() != cols) throw ValidationError(where + ": wrong column count");
    std::vector<std::size_t> sym(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      const double d = detail::parse_double(t.rows[r][v], where);
      if (d < 0.0 || d != std::floor(d) || d > 1e7) {
        throw ValidationError(where + ": symbols must be nonnegative integers");
      }
      sym[v] = static_cast<std::size_t>(d);
      dims[v] = std::max(dims[v], sym[v] + 1);
    }
    symbols.push_back(std::move(sym));
    probs.push_back(detail::parse_double(t.rows[r].back(), where));
  }
  std::size_t cells = 1;
  for (std::size_t d : dims) {
    if (cells > kMaxJointCells / d) throw DimensionError("JointPmf: too many cells");
    cells *= d;
  }
  std::vector<double> flat(cells, 0.0);
  for (std::size_t r = 0; r < symbols.size(); ++r) {
    std::size_t o = 0;
    for (std::size_t v = 0; v < nv; ++v) o = o * dims[v] + symbols[r][v];
    flat[o] += probs[r];
  }
  const double total = entrisk::detail::sum(flat);
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("'" + path.string() + "': probabilities sum to " + fmt(total));
  }
  for (double& p : flat) p /= total;
  return JointPmf(std::move(dims), std::move(flat));
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ValidationError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot move output into '" + path.string() + "': " + ec.message());
  }
}

inline std::string tilt_result_csv(const TiltResult& r) {
  return "theta,v_star,w_star,eta_star,log_partition\n" + fmt(r.theta) + "," + fmt(r.v_star) +
         "," + fmt(r.w_star) + "," + fmt(r.eta_star) + "," + fmt(r.log_partition) + "\n";
}

inline std::string measure_change_csv(const LossSample& s, const MeasureChange& m) {
  std::string out = "loss,prob,m_star\n";
  for (std::size_t j = 0; j < s.size(); ++j) {
    out += fmt(s.losses()[j]) + "," + fmt(s.probs()[j]) + "," + fmt(m.weights()[j]) + "\n";
  }
  return out;
}

inline std::string tilt_curve_csv(const TiltCurve& c) {
  std::string out = "theta,v_star,w_star,eta_star\n";
  for (const auto& r : c) {
    out += fmt(r.theta) + "," + fmt(r.v_star) + "," + fmt(r.w_star) + "," + fmt(r.eta_star) + "\n";
  }
  return out;
}

inline std::string ideal_gas_csv(const IdealGasCurve& c) {
  std::string out = "theta,v_star,w_star,eta_star,truncated\n";
  for (std::size_t k = 0; k < c.curve.size(); ++k) {
    const auto& r = c.curve[k];
    out += fmt(r.theta) + "," + fmt(r.v_star) + "," + fmt(r.w_star) + "," + fmt(r.eta_star) + "," +
           (c.truncated[k] ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string quasistatic_csv(const QuasistaticReport& r) {
  std::string out = "theta,v_star,eta_star,eta_integrated,rel_error\n";
  for (std::size_t k = 0; k < r.curve.size(); ++k) {
    out += fmt(r.curve[k].theta) + "," + fmt(r.curve[k].v_star) + "," +
           fmt(r.curve[k].eta_star) + "," + fmt(r.eta_integrated[k]) + "," +
           fmt(rel_error_at(r, k)) + "\n";
  }
  return out;
}

inline std::string thermalization_trace_csv(const ThermalizationResult& r) {
  std::string out = "iteration,mean_particle_energy,total_energy,particle_number,kl_to_boltzmann\n";
  for (const auto& t : r.trace) {
    out += std::to_string(t.iteration) + "," + fmt(t.mean_particle_energy) + "," +
           fmt(t.total_energy) + "," + fmt(t.particle_number) + "," + fmt(t.kl_to_boltzmann) + "\n";
  }
  return out;
}

inline std::string thermalization_result_csv(const ThermalizationResult& r) {
  return "beta,r_squared,iterations,converged,seed\n" + fmt(r.beta) + "," + fmt(r.r_squared) + "," +
         std::to_string(r.iterations_used) + "," + (r.converged ? "1" : "0") + "," +
         std::to_string(r.seed) + "\n";
}

inline std::string pde_surface_csv(const PdeSolution& s) {
  std::string out = "t,x,value\n";
  out.reserve(out.size() + s.times().size() * s.xs().size() * 60);
  for (std::size_t k = 0; k < s.times().size(); ++k) {
    for (std::size_t i = 0; i < s.xs().size(); ++i) {
      out += fmt(s.times()[k]) + "," + fmt(s.xs()[i]) + "," + fmt(s.at(k, i)) + "\n";
    }
  }
  return out;
}

inline std::string horizon_curve_csv(const std::vector<HorizonRow>& rows) {
  std::string out = "horizon,eta,theta,v_star\n";
  for (const auto& r : rows) {
    out += fmt(r.horizon) + "," + fmt(r.eta) + "," + fmt(r.theta) + "," + fmt(r.v_star) + "\n";
  }
  return out;
}

inline std::string entropy_chain_csv(const EntropyChain& c) {
  std::string out = "quantity,value\nh_x," + fmt(c.h_x) + "\n";
  for (std::size_t i = 0; i < c.terms.size(); ++i) {
    out += "term" + std::to_string(i + 1) + "," + fmt(c.terms[i]) + "\n";
  }
  out += "h_x_given_all," + fmt(c.h_x_given_all) + "\n";
  return out;
}

inline std::string loss_sample_csv(const LossSample& s) {
  std::string out = "loss,prob\n";
  for (std::size_t j = 0; j < s.size(); ++j) {
    out += fmt(s.losses()[j]) + "," + fmt(s.probs()[j]) + "\n";
  }
  return out;
}

}  // namespace entrisk::io
