#include "dhgmpc/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace dhgmpc {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(std::string_view text, int line) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE ||
      !std::isfinite(v)) {
    throw ScenarioError(line, "expected a finite number, got '" + s + "'");
  }
  return v;
}

long long parse_int(std::string_view text, int line) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ScenarioError(line, "expected an integer, got '" + s + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(std::string_view, int)>;

Setter real(double* target) {
  return [target](std::string_view v, int line) {
    *target = parse_double(v, line);
  };
}

Setter integer(int* target) {
  return [target](std::string_view v, int line) {
    const long long x = parse_int(v, line);
    if (x < -2147483647LL || x > 2147483647LL) {
      throw ScenarioError(line, "integer out of range");
    }
    *target = static_cast<int>(x);
  };
}

std::map<std::string, Setter> param_setters(PhysicalSettings& p) {
  return {
      {"density", real(&p.density)},
      {"heat_capacity", real(&p.heat_capacity)},
      {"friction", real(&p.friction)},
      {"kappa_vertex", real(&p.kappa_vertex)},
      {"kappa_edge", real(&p.kappa_edge)},
      {"junction_mass", real(&p.junction_mass)},
      {"edge_length", real(&p.edge_length)},
      {"pressure_gradient", real(&p.pressure_gradient)},
      {"hx_volume", real(&p.hx_volume)},
      {"velocity_cap", real(&p.velocity_cap)},
      {"kappa_units",
       [&p](std::string_view v, int line) {
         if (v == "mass_flow") {
           p.kappa_units = KappaUnits::kMassFlow;
         } else if (v == "power") {
           p.kappa_units = KappaUnits::kPower;
         } else {
           throw ScenarioError(line, "kappa_units must be mass_flow or power");
         }
       }},
  };
}

std::map<std::string, Setter> mpc_setters(MpcSettings& m) {
  return {
      {"dt", real(&m.dt)},
      {"horizon", integer(&m.horizon)},
      {"n_sim", integer(&m.n_sim)},
      {"k_step", integer(&m.k_step)},
      {"mass_scale", real(&m.mass_scale)},
      {"temperature_scale", real(&m.temperature_scale)},
      {"flow_scale", real(&m.flow_scale)},
      {"power_scale", real(&m.power_scale)},
      {"qstar_factor", real(&m.qstar_factor)},
      {"alpha_starts", integer(&m.alpha_starts)},
      {"temperature_min", real(&m.temperature_min)},
      {"temperature_max", real(&m.temperature_max)},
      {"producer_bound_factor", real(&m.producer_bound_factor)},
      {"init_temperature_offset", real(&m.init_temperature_offset)},
      {"init_mass_factor", real(&m.init_mass_factor)},
      {"convergence_threshold", real(&m.convergence_threshold)},
      {"sqp_max_iterations", integer(&m.sqp_max_iterations)},
      {"kkt_tolerance", real(&m.kkt_tolerance)},
  };
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

void set_setpoint_key(SteadyStateSpec& sp, std::string_view key,
                      std::string_view value, int line) {
  auto suffix = [&](std::string_view prefix) {
    std::string id(key.substr(prefix.size()));
    if (id.empty()) throw ScenarioError(line, "missing id after '" +
                                                  std::string(prefix) + "'");
    return id;
  };
  if (key == "ambient") {
    sp.ambient = parse_double(value, line);
  } else if (starts_with(key, "demand.")) {
    sp.demands.push_back({suffix("demand."), parse_double(value, line)});
  } else if (starts_with(key, "pin.vertex.")) {
    sp.pins.push_back({TemperaturePin::Target::kVertex, suffix("pin.vertex."),
                       parse_double(value, line)});
  } else if (starts_with(key, "pin.edge.")) {
    sp.pins.push_back({TemperaturePin::Target::kEdge, suffix("pin.edge."),
                       parse_double(value, line)});
  } else if (starts_with(key, "fill.")) {
    sp.fills.push_back({suffix("fill."), parse_double(value, line)});
  } else {
    throw ScenarioError(line, "unknown setpoint key '" + std::string(key) + "'");
  }
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  sc.setpoints[0] = {};
  sc.setpoints[1] = {};
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  auto params = param_setters(sc.physics);
  auto mpc = mpc_setters(sc.mpc);
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;  // "<section>/<key>"
  std::string section;
  int graph_line = 0;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError(line_no, "unterminated section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known = {
          "graph", "params", "setpoint.I", "setpoint.II", "mpc", "seed"};
      if (!known.count(section)) {
        throw ScenarioError(line_no, "unknown section [" + section + "]");
      }
      if (!seen_sections.insert(section).second) {
        throw ScenarioError(line_no, "section [" + section + "] repeated");
      }
      if (section == "graph") graph_line = line_no;
      continue;
    }
    if (section.empty()) {
      throw ScenarioError(line_no, "content before the first section");
    }

    if (section == "graph") {
      const auto tok = split_ws(line);
      try {
        if (tok.size() >= 3 && tok[0] == "vertex" && tok.size() <= 4) {
          Vertex v{tok[1], parse_vertex_class(tok[2]),
                   tok.size() == 4 ? tok[3] : std::string()};
          vertices.push_back(std::move(v));
        } else if (tok.size() == 5 && tok[0] == "edge") {
          edges.push_back({tok[1], parse_edge_class(tok[2]), tok[3], tok[4]});
        } else {
          throw ScenarioError(line_no,
                              "expected 'vertex <id> <class> [<storage>]' or "
                              "'edge <id> <class> <source> <target>'");
        }
      } catch (const TopologyError& e) {
        throw ScenarioError(line_no, e.what());
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ScenarioError(line_no, "expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ScenarioError(line_no, "expected 'key = value'");
    }
    if (!seen_keys.insert(section + "/" + key).second) {
      throw ScenarioError(line_no, "key '" + key + "' repeated");
    }

    if (section == "params") {
      if (starts_with(key, "tes_mass.")) {
        const std::string id = key.substr(9);
        if (id.empty()) throw ScenarioError(line_no, "missing storage id");
        sc.physics.tes_mass[id] = parse_double(value, line_no);
      } else if (auto it = params.find(key); it != params.end()) {
        it->second(value, line_no);
      } else {
        throw ScenarioError(line_no, "unknown params key '" + key + "'");
      }
    } else if (section == "mpc") {
      auto it = mpc.find(key);
      if (it == mpc.end()) {
        throw ScenarioError(line_no, "unknown mpc key '" + key + "'");
      }
      it->second(value, line_no);
    } else if (section == "seed") {
      if (key != "seed") throw ScenarioError(line_no, "unknown seed key '" + key + "'");
      const long long s = parse_int(value, line_no);
      if (s < 0) throw ScenarioError(line_no, "seed must be non-negative");
      sc.seed = static_cast<std::uint64_t>(s);
    } else {
      set_setpoint_key(sc.setpoints[section == "setpoint.I" ? 0 : 1], key,
                       value, line_no);
    }
  }

  for (const char* required : {"graph", "setpoint.I", "setpoint.II"}) {
    if (!seen_sections.count(required)) {
      throw ScenarioError(0, std::string("missing section [") + required + "]");
    }
  }
  try {
    sc.graph = DhgGraph(std::move(vertices), std::move(edges));
  } catch (const TopologyError& e) {
    throw ScenarioError(graph_line, std::string("[graph]: ") + e.what());
  }
  try {
    validate_scenario(sc);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(0, e.what());
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(0, "cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void validate_scenario(const Scenario& sc) {
  const MpcSettings& m = sc.mpc;
  const PhysicalSettings& p = sc.physics;
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(m.dt > 0.0, "dt must be positive");
  require(m.horizon >= 1, "horizon must be at least 1");
  require(m.k_step > m.horizon, "k_step must exceed the horizon");
  require(m.n_sim > m.k_step, "n_sim must exceed k_step");
  require(m.mass_scale > 0.0 && m.temperature_scale > 0.0 &&
              m.flow_scale > 0.0 && m.power_scale > 0.0,
          "weight scales must be positive");
  require(m.qstar_factor >= 1.0, "qstar_factor must be at least 1");
  require(m.alpha_starts >= 1, "alpha_starts must be at least 1");
  require(m.producer_bound_factor > 1.0, "producer_bound_factor must exceed 1");
  require(m.init_mass_factor > 0.0, "init_mass_factor must be positive");
  require(m.convergence_threshold > 0.0, "convergence_threshold must be > 0");
  require(m.sqp_max_iterations >= 1, "sqp_max_iterations must be at least 1");
  require(m.kkt_tolerance > 0.0, "kkt_tolerance must be positive");
  require(p.density > 0.0 && p.heat_capacity > 0.0 && p.friction > 0.0,
          "density, heat_capacity and friction must be positive");
  require(p.kappa_vertex >= 0.0 && p.kappa_edge >= 0.0,
          "kappa values must be non-negative");
  require(p.junction_mass > 0.0 && p.edge_length > 0.0,
          "junction_mass and edge_length must be positive");
  require(p.pressure_gradient > 0.0 && p.velocity_cap > 0.0,
          "pressure_gradient and velocity_cap must be positive");
  require(p.hx_volume >= 0.0, "hx_volume must be non-negative");
  for (const auto& id : sc.graph.tes_ids()) {
    auto it = p.tes_mass.find(id);
    require(it != p.tes_mass.end(), "missing tes_mass." + id);
    require(it->second > 0.0, "tes_mass." + id + " must be positive");
  }
  for (const auto& [id, mass] : p.tes_mass) {
    const auto& ids = sc.graph.tes_ids();
    require(std::find(ids.begin(), ids.end(), id) != ids.end(),
            "tes_mass for unknown storage '" + id + "'");
  }
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "[graph]\n";
  for (const auto& v : sc.graph.vertices()) {
    os << "vertex " << v.id << ' ' << to_string(v.cls);
    if (!v.tes.empty()) os << ' ' << v.tes;
    os << '\n';
  }
  for (const auto& e : sc.graph.edges()) {
    os << "edge " << e.id << ' ' << to_string(e.cls) << ' ' << e.source << ' '
       << e.target << '\n';
  }

  const PhysicalSettings& p = sc.physics;
  os << "\n[params]\n"
     << "density = " << fmt(p.density) << '\n'
     << "heat_capacity = " << fmt(p.heat_capacity) << '\n'
     << "friction = " << fmt(p.friction) << '\n'
     << "kappa_units = "
     << (p.kappa_units == KappaUnits::kMassFlow ? "mass_flow" : "power") << '\n'
     << "kappa_vertex = " << fmt(p.kappa_vertex) << '\n'
     << "kappa_edge = " << fmt(p.kappa_edge) << '\n'
     << "junction_mass = " << fmt(p.junction_mass) << '\n'
     << "edge_length = " << fmt(p.edge_length) << '\n'
     << "pressure_gradient = " << fmt(p.pressure_gradient) << '\n'
     << "hx_volume = " << fmt(p.hx_volume) << '\n'
     << "velocity_cap = " << fmt(p.velocity_cap) << '\n';
  for (const auto& [id, mass] : p.tes_mass) {
    os << "tes_mass." << id << " = " << fmt(mass) << '\n';
  }

  const char* names[2] = {"I", "II"};
  for (int s = 0; s < 2; ++s) {
    const SteadyStateSpec& sp = sc.setpoints[s];
    os << "\n[setpoint." << names[s] << "]\n";
    os << "ambient = " << fmt(sp.ambient) << '\n';
    for (const auto& d : sp.demands) {
      os << "demand." << d.edge << " = " << fmt(d.power) << '\n';
    }
    for (const auto& pin : sp.pins) {
      os << (pin.target == TemperaturePin::Target::kVertex ? "pin.vertex."
                                                           : "pin.edge.")
         << pin.id << " = " << fmt(pin.value) << '\n';
    }
    for (const auto& f : sp.fills) {
      os << "fill." << f.tes << " = " << fmt(f.fraction) << '\n';
    }
  }

  const MpcSettings& m = sc.mpc;
  os << "\n[mpc]\n"
     << "dt = " << fmt(m.dt) << '\n'
     << "horizon = " << m.horizon << '\n'
     << "n_sim = " << m.n_sim << '\n'
     << "k_step = " << m.k_step << '\n'
     << "mass_scale = " << fmt(m.mass_scale) << '\n'
     << "temperature_scale = " << fmt(m.temperature_scale) << '\n'
     << "flow_scale = " << fmt(m.flow_scale) << '\n'
     << "power_scale = " << fmt(m.power_scale) << '\n'
     << "qstar_factor = " << fmt(m.qstar_factor) << '\n'
     << "alpha_starts = " << m.alpha_starts << '\n'
     << "temperature_min = " << fmt(m.temperature_min) << '\n'
     << "temperature_max = " << fmt(m.temperature_max) << '\n'
     << "producer_bound_factor = " << fmt(m.producer_bound_factor) << '\n'
     << "init_temperature_offset = " << fmt(m.init_temperature_offset) << '\n'
     << "init_mass_factor = " << fmt(m.init_mass_factor) << '\n'
     << "convergence_threshold = " << fmt(m.convergence_threshold) << '\n'
     << "sqp_max_iterations = " << m.sqp_max_iterations << '\n'
     << "kkt_tolerance = " << fmt(m.kkt_tolerance) << '\n';
  os << "\n[seed]\nseed = " << sc.seed << '\n';
  return os.str();
}

}  // namespace dhgmpc
