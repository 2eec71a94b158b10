#include "horolab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace horolab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec == std::errc() && p == v.data() + v.size()) return out;
  throw ConfigError("config key '" + key + "': cannot parse value '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (key == "group.preset") {
    if (value.empty()) throw ConfigError("config key 'group.preset': empty value");
    group_preset = value;
  } else if (key == "metric.ode_steps") {
    ode_steps = parse_number<int>(key, value);
  } else if (key == "metric.shoot_restarts") {
    shoot_restarts = parse_number<int>(key, value);
  } else if (key == "enum.max_ball_size") {
    max_ball_size = parse_number<std::size_t>(key, value);
  } else if (key == "tol.tol_eq") {
    tol_eq = parse_number<double>(key, value);
  } else if (key == "tol.tol_det") {
    tol_det = parse_number<double>(key, value);
  } else if (key == "tol.ode_tol") {
    ode_tol = parse_number<double>(key, value);
  } else if (key == "tol.xcheck_tol") {
    xcheck_tol = parse_number<double>(key, value);
  } else if (key == "seeds.default") {
    seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void Config::validate() const {
  auto pos = [](const char* key, double v) {
    if (!(v > 0)) throw ConfigError(std::string("config key '") + key + "' must be positive");
  };
  pos("tol.tol_eq", tol_eq);
  pos("tol.tol_det", tol_det);
  pos("tol.ode_tol", ode_tol);
  pos("tol.xcheck_tol", xcheck_tol);
  pos("metric.ode_steps", ode_steps);
  pos("metric.shoot_restarts", shoot_restarts);
  pos("enum.max_ball_size", static_cast<double>(max_ball_size));
}

MetricOptions Config::metric_options() const {
  MetricOptions m;
  m.ode_steps = ode_steps;
  m.shoot_restarts = shoot_restarts;
  m.newton_tol = ode_tol;
  m.xcheck_tol = xcheck_tol;
  m.seed = seed;
  return m;
}

FuchsianOptions Config::fuchsian_options() const { return {max_ball_size, tol_eq}; }

Tolerances Config::tolerances() const {
  Tolerances t;
  t.det = tol_det;
  t.eq = tol_eq;
  return t;
}

FuchsianGroup Config::make_group() const {
  if (group_preset.rfind("file:", 0) == 0) {
    const std::string path = group_preset.substr(5);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open group file '" + path + "'");
    return load_group(in, fuchsian_options());
  }
  return preset(group_preset, fuchsian_options());
}

std::string Config::dump() const {
  std::ostringstream os;
  os << "group.preset = " << group_preset << '\n'
     << "metric.ode_steps = " << ode_steps << '\n'
     << "metric.shoot_restarts = " << shoot_restarts << '\n'
     << "enum.max_ball_size = " << max_ball_size << '\n'
     << "tol.tol_eq = " << shortest(tol_eq) << '\n'
     << "tol.tol_det = " << shortest(tol_det) << '\n'
     << "tol.ode_tol = " << shortest(ode_tol) << '\n'
     << "tol.xcheck_tol = " << shortest(xcheck_tol) << '\n'
     << "seeds.default = " << seed << '\n';
  return os.str();
}

Config Config::parse(std::istream& is, const std::string& source) {
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

Config Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

}  // namespace horolab
