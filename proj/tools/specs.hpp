#pragma once

// Command-line spellings for states, measures and numeric sweeps.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqlab/freqlab.hpp"

namespace freqlab::cli {

// Bad flag values; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(x)) {
    throw UsageError(what + ": '" + text + "' is not a real number");
  }
  return x;
}

// "q=<real>"          qubit (sqrt q, sqrt(1-q))
// "uniform:<D>"       equal amplitudes
// "a0,a1,..."         amplitudes, each "re" or "re:im"; normalized on input
inline PureState parse_state(const std::string& spec) {
  const std::string s = trim(spec);
  if (s.rfind("q=", 0) == 0) {
    const double q = parse_real(s.substr(2), "state");
    if (q < 0.0 || q > 1.0) throw UsageError("state: q must lie in [0,1], got " + s.substr(2));
    return PureState::from_born_weight(q);
  }
  if (s.rfind("uniform:", 0) == 0) {
    const double d = parse_real(s.substr(8), "state");
    if (d < 2.0 || d != std::floor(d) || d > 4096.0) throw UsageError("state: bad dimension in " + s);
    return PureState::uniform(static_cast<std::size_t>(d));
  }
  const auto parts = split(s, ',');
  if (parts.size() < 2) throw UsageError("state: need q=<real>, uniform:<D> or at least two amplitudes");
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto colon = parts[k].find(':');
    const double re = parse_real(parts[k].substr(0, colon), "state amplitude");
    const double im = colon == std::string::npos ? 0.0 : parse_real(parts[k].substr(colon + 1), "state amplitude");
    v(static_cast<Eigen::Index>(k)) = Complex(re, im);
  }
  if (v.norm() == 0.0) throw UsageError("state: amplitudes are all zero");
  return PureState::normalized(std::move(v));
}

// States separated by ';' (empty string gives no states).
inline std::vector<PureState> parse_state_list(const std::string& spec) {
  std::vector<PureState> out;
  if (trim(spec).empty()) return out;
  for (const auto& item : split(spec, ';')) out.push_back(parse_state(item));
  return out;
}

// "power:<p>" or "table:<path>". Table files hold two columns (x y) per line,
// separated by whitespace or a comma; '#' starts a comment.
inline GMeasure parse_g(const std::string& spec) {
  const std::string s = trim(spec);
  if (s.rfind("power:", 0) == 0) {
    const double p = parse_real(s.substr(6), "g");
    if (p < 1.0) throw UsageError("g: power must be at least 1");
    return GMeasure::power(p);
  }
  if (s.rfind("table:", 0) == 0) {
    const std::string path = s.substr(6);
    std::ifstream in(path);
    if (!in) throw UsageError("g: cannot read table file " + path);
    std::vector<double> xs, ys;
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      for (char& c : line) c = c == ',' ? ' ' : c;
      std::istringstream cols(line);
      std::string a, b, extra;
      if (!(cols >> a >> b) || (cols >> extra)) throw UsageError("g: table line needs two columns: " + line);
      xs.push_back(parse_real(a, "g table"));
      ys.push_back(parse_real(b, "g table"));
    }
    try {
      return GMeasure::table(xs, ys);
    } catch (const PreconditionError& e) {
      throw UsageError(std::string("g: ") + e.what());
    }
  }
  throw UsageError("g: expected power:<p> or table:<path>, got '" + spec + "'");
}

// Comma-separated positive integers, written plainly or as 1e6. Returned
// sorted; repeats are rejected.
inline std::vector<std::size_t> parse_sweep(const std::string& spec, const std::string& what,
                                            std::size_t minimum = 1) {
  std::vector<std::size_t> out;
  for (const auto& item : split(spec, ',')) {
    const double x = parse_real(item, what);
    if (x < static_cast<double>(minimum) || x != std::floor(x) || x > 9.0e15) {
      throw UsageError(what + ": '" + item + "' is not an integer >= " + std::to_string(minimum));
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  if (out.empty()) throw UsageError(what + ": empty sweep");
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw UsageError(what + ": repeated value");
  return out;
}

}  // namespace freqlab::cli
