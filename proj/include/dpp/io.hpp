#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpp/error.hpp"
#include "dpp/likelihood.hpp"
#include "dpp/model.hpp"
#include "dpp/stats.hpp"
#include "dpp/window.hpp"

namespace dpp {

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] inline void parse_fail(std::size_t line, std::size_t col, const std::string& msg) {
  fail(ErrorKind::Parse, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e && std::isfinite(out);
}

// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void set_model_key(KernelModel& m, bool& has_family, bool& has_rho, const std::string& key, double v,
                          std::size_t line, std::size_t col) {
  if (key == "rho") {
    m.rho = v;
    has_rho = true;
  } else if (key == "alpha") {
    m.alpha = v;
  } else if (key == "nu") {
    m.nu = v;
  } else if (key == "delta") {
    m.delta = v;
  } else if (key == "gamma") {
    m.gamma = v;
  } else if (key == "dim" || key == "d") {
    if (v != 1.0 && v != 2.0) parse_fail(line, col, "dim must be 1 or 2");
    m.dim = static_cast<int>(v);
  } else {
    parse_fail(line, col, "unknown key '" + key + "'");
  }
  (void)has_family;
}

inline void check_model_keys(const KernelModel& m, bool has_family, bool has_rho) {
  if (!has_family) parse_fail(1, 1, "missing family");
  if (!has_rho) parse_fail(1, 1, "missing rho");
  auto need = [&](bool want, bool have, const char* key) {
    if (want && !have) parse_fail(1, 1, std::string("missing ") + key + " for " + family_name(m.family));
    if (!want && have) parse_fail(1, 1, std::string(key) + " is not a parameter of " + family_name(m.family));
  };
  need(uses_alpha(m.family), m.alpha.has_value(), "alpha");
  need(uses_nu(m.family), m.nu.has_value(), "nu");
  need(uses_delta(m.family), m.delta.has_value(), "delta");
  need(uses_gamma(m.family), m.gamma.has_value(), "gamma");
  if (m.family == Family::Circular && m.dim != 2) parse_fail(1, 1, "the circular family is planar");
}

}  // namespace detail

// `family=gaussian rho=100 alpha=0.05 dim=2`; pairs separated by white space,
// commas or newlines. Family names are case-insensitive.
inline KernelModel parse_model_text(const std::string& text) {
  KernelModel m;
  bool has_family = false, has_rho = false;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&] {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };
  auto is_sep = [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == ','; };
  while (i < text.size()) {
    if (is_sep(text[i])) {
      advance();
      continue;
    }
    if (text[i] == '#') {
      while (i < text.size() && text[i] != '\n') advance();
      continue;
    }
    const std::size_t tok_line = line, tok_col = col;
    std::string tok;
    while (i < text.size() && !is_sep(text[i])) {
      tok.push_back(text[i]);
      advance();
    }
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
      detail::parse_fail(tok_line, tok_col, "expected key=value, got '" + tok + "'");
    const std::string key = detail::lower(tok.substr(0, eq));
    const std::string val = tok.substr(eq + 1);
    const std::size_t val_col = tok_col + eq + 1;
    if (key == "family") {
      const auto f = family_from_name(val);
      if (!f) detail::parse_fail(tok_line, val_col, "unknown family '" + val + "'");
      m.family = *f;
      has_family = true;
      continue;
    }
    double v;
    if (!detail::parse_double(val, v)) detail::parse_fail(tok_line, val_col, "not a number: '" + val + "'");
    detail::set_model_key(m, has_family, has_rho, key, v, tok_line, tok_col);
  }
  detail::check_model_keys(m, has_family, has_rho);
  return m;
}

inline nlohmann::json model_to_json(const KernelModel& m) {
  nlohmann::json j;
  j["family"] = family_name(m.family);
  j["rho"] = m.rho;
  if (m.alpha) j["alpha"] = *m.alpha;
  if (m.nu) j["nu"] = *m.nu;
  if (m.delta) j["delta"] = *m.delta;
  if (m.gamma) j["gamma"] = *m.gamma;
  j["dim"] = m.dim;
  return j;
}

inline KernelModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) detail::parse_fail(1, 1, "model JSON must be an object");
  KernelModel m;
  bool has_family = false, has_rho = false;
  for (const auto& [k, v] : j.items()) {
    const std::string key = detail::lower(k);
    if (key == "family") {
      if (!v.is_string()) detail::parse_fail(1, 1, "family must be a string");
      const auto f = family_from_name(v.get<std::string>());
      if (!f) detail::parse_fail(1, 1, "unknown family '" + v.get<std::string>() + "'");
      m.family = *f;
      has_family = true;
      continue;
    }
    if (!v.is_number()) detail::parse_fail(1, 1, "'" + k + "' must be a number");
    detail::set_model_key(m, has_family, has_rho, key, v.get<double>(), 1, 1);
  }
  detail::check_model_keys(m, has_family, has_rho);
  return m;
}

// Text or JSON, decided by the first non-blank character.
inline KernelModel parse_model(const std::string& text) {
  const auto p = text.find_first_not_of(" \t\r\n");
  if (p != std::string::npos && text[p] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      // byte offset -> line and column
      std::size_t line = 1, col = 1;
      for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      detail::parse_fail(line, col, "malformed JSON");
    }
    return model_from_json(j);
  }
  return parse_model_text(text);
}

// `x0,x1,y0,y1`, or `x0,x1` for an interval.
inline Window parse_window(const std::string& text) {
  std::vector<double> v;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    part.erase(0, part.find_first_not_of(" \t"));
    part.erase(part.find_last_not_of(" \t") + 1);
    double x;
    if (!detail::parse_double(part, x)) detail::parse_fail(1, start + 1, "bad window coordinate '" + part + "'");
    v.push_back(x);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  Window w;
  if (v.size() == 4) {
    w = Window::rect(v[0], v[1], v[2], v[3]);
  } else if (v.size() == 2) {
    w = Window::interval(v[0], v[1]);
  } else {
    detail::parse_fail(1, 1, "window needs 2 or 4 comma-separated numbers");
  }
  try {
    w.check();
  } catch (const Error& e) {
    detail::parse_fail(1, 1, e.what());
  }
  return w;
}

inline std::string window_to_string(const Window& w) {
  std::string s = detail::fmt(w.lo[0]) + "," + detail::fmt(w.hi[0]);
  if (w.dim == 2) s += "," + detail::fmt(w.lo[1]) + "," + detail::fmt(w.hi[1]);
  return s;
}

// Pattern CSV with header `x,y[,mark]` (or `x[,mark]` on an interval).
inline PointPattern read_pattern_csv(std::istream& in, const Window& window) {
  PointPattern p{window, {}, {}};
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    for (auto& t : out) {
      t.erase(0, t.find_first_not_of(" \t"));
      t.erase(t.find_last_not_of(" \t") + 1);
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (header.empty()) {
      if (lineno == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
      header = split(line);
      for (auto& h : header) h = detail::lower(h);
      const std::vector<std::string> want2{"x", "y"}, want1{"x"};
      const auto& want = window.dim == 2 ? want2 : want1;
      const bool ok = (header.size() == want.size() || (header.size() == want.size() + 1 && header.back() == "mark")) &&
                      std::equal(want.begin(), want.end(), header.begin());
      if (!ok)
        detail::parse_fail(lineno, 1, window.dim == 2 ? "header must be x,y or x,y,mark" : "header must be x or x,mark");
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != header.size())
      detail::parse_fail(lineno, 1, "expected " + std::to_string(header.size()) + " fields");
    Vec x{0.0, 0.0};
    std::size_t col = 1;
    for (int q = 0; q < window.dim; ++q) {
      if (!detail::parse_double(cells[static_cast<std::size_t>(q)], x[static_cast<std::size_t>(q)]))
        detail::parse_fail(lineno, col, "not a number: '" + cells[static_cast<std::size_t>(q)] + "'");
      col += cells[static_cast<std::size_t>(q)].size() + 1;
    }
    if (!window.contains(x)) detail::parse_fail(lineno, 1, "point outside the window");
    p.points.push_back(x);
    if (header.back() == "mark") {
      int mk = 0;
      const std::string& s = cells.back();
      const auto r = std::from_chars(s.data(), s.data() + s.size(), mk);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) detail::parse_fail(lineno, col, "mark must be an integer");
      p.marks.push_back(mk);
    }
  }
  if (header.empty()) detail::parse_fail(1, 1, "missing header");
  return p;
}

inline PointPattern read_pattern_csv(const std::string& path, const Window& window) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return read_pattern_csv(in, window);
}

inline void write_pattern_csv(std::ostream& out, const PointPattern& p) {
  out << (p.dim() == 2 ? "x,y" : "x") << (p.marked() ? ",mark" : "") << "\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    out << detail::fmt(p.points[i][0]);
    if (p.dim() == 2) out << "," << detail::fmt(p.points[i][1]);
    if (p.marked()) out << "," << p.marks[i];
    out << "\n";
  }
}

inline void write_pattern_csv(const std::string& path, const PointPattern& p) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  write_pattern_csv(out, p);
}

inline void write_curve_csv(std::ostream& out, const SummaryCurve& c) {
  out << "r,value\n";
  for (std::size_t k = 0; k < c.r.size(); ++k) out << detail::fmt(c.r[k]) << "," << detail::fmt(c.value[k]) << "\n";
}

inline void write_band_csv(std::ostream& out, const EnvelopeBand& b, const std::vector<double>* observed = nullptr) {
  out << "r,value,lower,upper,mean\n";
  for (std::size_t k = 0; k < b.r.size(); ++k) {
    out << detail::fmt(b.r[k]) << ",";
    if (observed) out << detail::fmt((*observed)[k]);
    out << "," << detail::fmt(b.lower[k]) << "," << detail::fmt(b.upper[k]) << "," << detail::fmt(b.mean[k]) << "\n";
  }
}

inline nlohmann::json window_to_json(const Window& w) {
  nlohmann::json j;
  j["dim"] = w.dim;
  j["lo"] = w.dim == 2 ? nlohmann::json::array({w.lo[0], w.lo[1]}) : nlohmann::json::array({w.lo[0]});
  j["hi"] = w.dim == 2 ? nlohmann::json::array({w.hi[0], w.hi[1]}) : nlohmann::json::array({w.hi[0]});
  return j;
}

inline nlohmann::json fit_to_json(const FitResult& f) {
  nlohmann::json j;
  j["model"] = model_to_json(f.model);
  j["objective"] = f.objective;
  j["method"] = fit_method_name(f.method);
  j["N_used"] = f.N_used;
  j["iterations"] = f.iterations;
  j["evaluations"] = f.evaluations;
  j["converged"] = f.converged;
  j["rho_source"] = f.rho_source == RhoSource::Mle ? "mle" : "empirical";
  j["free_parameters"] = f.free_parameters;
  j["n_points"] = f.n_points;
  j["window"] = window_to_json(f.window);
  j["warnings"] = f.warnings;
  return j;
}

inline nlohmann::json test_to_json(const TestResult& t) {
  nlohmann::json j;
  j["statistic"] = t.statistic;
  j["observed"] = t.observed;
  j["p_value"] = t.p_value;
  j["n_sim"] = t.n_sim;
  j["n_dropped"] = t.n_dropped;
  j["seed"] = t.seed;
  j["warnings"] = t.warnings;
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : t.fits) fits.push_back(fit_to_json(f));
  j["fits"] = fits;
  return j;
}

}  // namespace dpp
