#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qma/field.hpp"
#include "qma/qmaf_io.hpp"
#include "qma/solver.hpp"
#include "qma/verification.hpp"

namespace qma {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One additive plane-wave term of a field specification:
///   amplitude * sin_or_cos(2 pi k . x), k an integer vector over the axes.
struct TermSpec {
  double amplitude = 0.0;
  bool is_sin = true;
  std::vector<int> wave;
};

/// A field given either by a QMAF file or by additive terms, optionally
/// wrapped as log(1 + sum) so data of the form log(1 + trig) stays exact.
struct FieldSpec {
  std::vector<TermSpec> terms;
  std::string file;
  enum class Wrap { none, log1p } wrap = Wrap::none;

  bool empty() const { return terms.empty() && file.empty(); }
};

struct RunConfig {
  int n = 1;
  int N = 16;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  FieldSpec f;
  FieldSpec sigma;
  std::string reference_phi_file;
  bool snapshot_fields = true;
  SolverConfig solver;

  int verify_trials = 20;
  double verify_threshold = 1e-10;
  int verify_det_pf_count = 200;
  int verify_derivative_count = 100;
  double verify_amplitude = 0.1;

  GridSpec grid() const { return GridSpec(n, N); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw config_error("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

inline long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw config_error("config: bad integer value for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw config_error("config: bad boolean value for " + key + " (use true/false)");
}

/// Grammar: <amplitude> * <sin|cos>(<k0>,<k1>,...,<k_{4n-1}>)
inline TermSpec parse_term(const std::string& key, const std::string& v) {
  TermSpec t;
  const std::size_t star = v.find('*');
  if (star == std::string::npos)
    throw config_error("config: term " + key + " must look like 'amp * sin(k,...)'");
  t.amplitude = parse_double(key, trim(v.substr(0, star)));
  std::string rest = trim(v.substr(star + 1));
  if (rest.rfind("sin(", 0) == 0)
    t.is_sin = true;
  else if (rest.rfind("cos(", 0) == 0)
    t.is_sin = false;
  else
    throw config_error("config: term " + key + " needs sin(...) or cos(...)");
  if (rest.back() != ')') throw config_error("config: term " + key + " missing ')'");
  const std::string inner = rest.substr(4, rest.size() - 5);
  std::stringstream ss(inner);
  std::string piece;
  while (std::getline(ss, piece, ','))
    t.wave.push_back(static_cast<int>(parse_int(key, trim(piece))));
  if (t.wave.empty()) throw config_error("config: term " + key + " has empty wave vector");
  return t;
}

} // namespace detail

/// Parse the flat key = value configuration format ('#' starts a comment,
/// unknown keys are rejected).
inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  auto term_index = [](const std::string& key, const std::string& prefix) {
    return static_cast<int>(detail::parse_int(key, key.substr(prefix.size())));
  };
  std::vector<std::pair<int, TermSpec>> f_terms, sigma_terms;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: line " + std::to_string(line_no) + " is not key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "n") cfg.n = static_cast<int>(detail::parse_int(key, value));
    else if (key == "grid_points_per_axis") cfg.N = static_cast<int>(detail::parse_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "f.file") cfg.f.file = value;
    else if (key == "f.wrap") {
      if (value == "none") cfg.f.wrap = FieldSpec::Wrap::none;
      else if (value == "log1p") cfg.f.wrap = FieldSpec::Wrap::log1p;
      else throw config_error("config: f.wrap must be none or log1p");
    } else if (key.rfind("f.term.", 0) == 0)
      f_terms.emplace_back(term_index(key, "f.term."), detail::parse_term(key, value));
    else if (key == "sigma.file") cfg.sigma.file = value;
    else if (key.rfind("sigma.term.", 0) == 0)
      sigma_terms.emplace_back(term_index(key, "sigma.term."), detail::parse_term(key, value));
    else if (key == "reference_phi.file") cfg.reference_phi_file = value;
    else if (key == "snapshot_fields") cfg.snapshot_fields = detail::parse_bool(key, value);
    else if (key == "solver.newton_tol") cfg.solver.newton_tol = detail::parse_double(key, value);
    else if (key == "solver.max_newton")
      cfg.solver.max_newton = static_cast<int>(detail::parse_int(key, value));
    else if (key == "solver.t_step_init") cfg.solver.t_step_init = detail::parse_double(key, value);
    else if (key == "solver.t_step_min") cfg.solver.t_step_min = detail::parse_double(key, value);
    else if (key == "solver.damping") cfg.solver.damping = detail::parse_double(key, value);
    else if (key == "solver.krylov_tol") cfg.solver.krylov_tol = detail::parse_double(key, value);
    else if (key == "solver.krylov_max_iter")
      cfg.solver.krylov_max_iter = static_cast<int>(detail::parse_int(key, value));
    else if (key == "solver.positivity_margin")
      cfg.solver.positivity_margin = detail::parse_double(key, value);
    else if (key == "verify.trials")
      cfg.verify_trials = static_cast<int>(detail::parse_int(key, value));
    else if (key == "verify.threshold") cfg.verify_threshold = detail::parse_double(key, value);
    else if (key == "verify.det_pf_count")
      cfg.verify_det_pf_count = static_cast<int>(detail::parse_int(key, value));
    else if (key == "verify.derivative_count")
      cfg.verify_derivative_count = static_cast<int>(detail::parse_int(key, value));
    else if (key == "verify.amplitude") cfg.verify_amplitude = detail::parse_double(key, value);
    else
      throw config_error("config: unknown key '" + key + "' (line " +
                         std::to_string(line_no) + ")");
  }
  auto sort_terms = [](std::vector<std::pair<int, TermSpec>>& terms, FieldSpec& spec) {
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [idx, term] : terms) spec.terms.push_back(std::move(term));
  };
  sort_terms(f_terms, cfg.f);
  sort_terms(sigma_terms, cfg.sigma);

  if (cfg.n < 1) throw config_error("config: n must be >= 1");
  if (cfg.N < 4 || cfg.N % 2 != 0) throw config_error("config: grid_points_per_axis must be even and >= 4");
  cfg.solver.grid = cfg.grid();
  try {
    cfg.solver.validate();
  } catch (const std::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  return parse_config(in);
}

/// Evaluate a field specification on the grid (from file or terms, with the
/// optional log(1 + .) wrap).
inline RealField realize_field_spec(const FieldSpec& spec, const GridSpec& grid,
                                    const std::string& what) {
  if (!spec.file.empty()) {
    if (!spec.terms.empty())
      throw config_error("config: " + what + " cannot combine file and terms");
    RealField f = qmaf::read_real(spec.file);
    if (!(f.grid() == grid))
      throw config_error("config: " + what + " file grid does not match n/N");
    return f;
  }
  RealField raw(grid);
  for (const TermSpec& t : spec.terms) {
    if (static_cast<int>(t.wave.size()) != grid.axes())
      throw config_error("config: " + what + " term wave vector must have " +
                         std::to_string(grid.axes()) + " entries");
    detail::for_each_slot(grid, [&](std::size_t flat, const int* idx) {
      double phase = 0.0;
      for (int a = 0; a < grid.axes(); ++a) phase += t.wave[a] * grid.coordinate(idx[a]);
      phase *= 2.0 * std::numbers::pi;
      raw[flat] += t.amplitude * (t.is_sin ? std::sin(phase) : std::cos(phase));
    });
  }
  if (spec.wrap == FieldSpec::Wrap::log1p) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] <= -1.0)
        throw config_error("config: " + what + " log1p wrap needs 1 + sum > 0");
      raw[i] = std::log1p(raw[i]);
    }
  }
  return raw;
}

} // namespace qma
