#include "microtopt/io/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "microtopt/error.hpp"
#include "microtopt/io/export.hpp"

namespace microtopt::io {

namespace pt = boost::property_tree;

void RunConfig::validate() const {
  require(nx >= 1 && ny >= 1, "config: mesh resolution must be positive");
  require(l1 > 0.0 && l2 > 0.0 && thickness > 0.0, "config: cell dimensions must be positive");
  material.validate();
  simp.validate();
  problem.validate();
  require(target_volume_fraction > 0.0 && target_volume_fraction < 1.0,
          "config: target volume fraction must lie in (0, 1)");
  require(target_beta > 0.0, "config: target beta must be positive");
  require(snapshot_every >= 0, "config: snapshot_every must be >= 0");
  require(threads >= 0, "config: threads must be >= 0");
  require(gradcheck_samples >= 1, "config: gradcheck samples must be >= 1");
  require(gradcheck_step > 0.0 && gradcheck_tolerance > 0.0,
          "config: gradcheck step and tolerance must be positive");
}

namespace {

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end)
    throw_error(ErrorKind::InvalidArgument, "config: '" + key + "' expects a number, got '" + text + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end)
    throw_error(ErrorKind::InvalidArgument, "config: '" + key + "' expects an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw_error(ErrorKind::InvalidArgument, "config: '" + key + "' expects a boolean, got '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text, std::size_t n) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(key, tok));
  if (out.size() != n)
    throw_error(ErrorKind::InvalidArgument,
                "config: '" + key + "' expects " + std::to_string(n) + " numbers");
  return out;
}

std::string join(const double* v, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

// One entry per accepted key: a reader into RunConfig and a writer out of it.
struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <class T>
Field real(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

template <class Ref>
Field real_at(Ref ref) {
  return {[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_double(k, v); },
          [ref](const RunConfig& c) { return format_double(ref(c)); }};
}

template <class Ref>
Field int_at(Ref ref) {
  return {[ref](RunConfig& c, const std::string& k, const std::string& v) {
            ref(c) = static_cast<int>(parse_int(k, v));
          },
          [ref](const RunConfig& c) { return std::to_string(ref(c)); }};
}

template <class Ref>
Field bool_at(Ref ref) {
  return {[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_bool(k, v); },
          [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); }};
}

using Schema = std::map<std::string, std::map<std::string, Field>>;

const Schema& schema() {
  static const Schema s = [] {
    Schema m;
    m["mesh"]["nx"] = int_at([](auto& c) -> auto& { return c.nx; });
    m["mesh"]["ny"] = int_at([](auto& c) -> auto& { return c.ny; });
    m["mesh"]["l1"] = real(&RunConfig::l1);
    m["mesh"]["l2"] = real(&RunConfig::l2);
    m["mesh"]["thickness"] = real(&RunConfig::thickness);

    m["material"]["youngs_modulus"] = real_at([](auto& c) -> auto& { return c.material.youngs_modulus; });
    m["material"]["poisson_ratio"] = real_at([](auto& c) -> auto& { return c.material.poisson_ratio; });

    m["simp"]["penalty"] = real_at([](auto& c) -> auto& { return c.simp.penalty; });
    m["simp"]["rho_min"] = real_at([](auto& c) -> auto& { return c.simp.rho_min; });
    m["simp"]["rho_void"] = real_at([](auto& c) -> auto& { return c.simp.rho_void; });

    m["load"]["strain"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto e = parse_list(k, v, 3);
          c.problem.E_applied = VoigtStrain(e[0], e[1], e[2]);
        },
        [](const RunConfig& c) { return join(c.problem.E_applied.data(), 3); }};
    m["load"]["steps"] = int_at([](auto& c) -> auto& { return c.problem.path_steps; });

    m["target"]["mode"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "seed") c.target_mode = TargetMode::Seed;
          else if (v == "explicit") c.target_mode = TargetMode::Explicit;
          else throw_error(ErrorKind::InvalidArgument, "config: '" + k + "' must be seed or explicit");
        },
        [](const RunConfig& c) { return std::string(c.target_mode == TargetMode::Seed ? "seed" : "explicit"); }};
    m["target"]["tensor"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto t = parse_list(k, v, 9);
          for (int i = 0; i < 9; ++i) c.problem.C_target(i / 3, i % 3) = t[i];
        },
        [](const RunConfig& c) {
          double t[9];
          for (int i = 0; i < 9; ++i) t[i] = c.problem.C_target(i / 3, i % 3);
          return join(t, 9);
        }};
    m["target"]["seed_volume_fraction"] = real(&RunConfig::target_volume_fraction);
    m["target"]["seed_beta"] = real(&RunConfig::target_beta);

    auto& o = m["optimizer"];
    o["v_max"] = real_at([](auto& c) -> auto& { return c.problem.v_max; });
    o["r_min"] = real_at([](auto& c) -> auto& { return c.problem.r_min; });
    o["periodic_filter"] = bool_at([](auto& c) -> auto& { return c.problem.periodic_filter; });
    o["eta"] = real_at([](auto& c) -> auto& { return c.problem.eta; });
    o["beta_initial"] = real_at([](auto& c) -> auto& { return c.problem.beta.initial; });
    o["beta_factor"] = real_at([](auto& c) -> auto& { return c.problem.beta.factor; });
    o["beta_max"] = real_at([](auto& c) -> auto& { return c.problem.beta.max; });
    o["beta_interval"] = int_at([](auto& c) -> auto& { return c.problem.beta.interval; });
    o["stagnation_tol"] = real_at([](auto& c) -> auto& { return c.problem.beta.stagnation_tol; });
    o["stagnation_window"] = int_at([](auto& c) -> auto& { return c.problem.beta.stagnation_window; });
    o["symmetry"] = bool_at([](auto& c) -> auto& { return c.problem.enforce_symmetry; });
    o["max_iterations"] = int_at([](auto& c) -> auto& { return c.problem.max_iterations; });
    o["objective_tol"] = real_at([](auto& c) -> auto& { return c.problem.objective_tol; });
    o["volume_tol"] = real_at([](auto& c) -> auto& { return c.problem.volume_tol; });
    o["max_move_retries"] = int_at([](auto& c) -> auto& { return c.problem.max_move_retries; });
    o["move"] = real_at([](auto& c) -> auto& { return c.problem.mma.move; });
    o["asyinit"] = real_at([](auto& c) -> auto& { return c.problem.mma.asyinit; });
    o["asydecr"] = real_at([](auto& c) -> auto& { return c.problem.mma.asydecr; });
    o["asymin"] = real_at([](auto& c) -> auto& { return c.problem.mma.asymin; });
    o["asyincr"] = real_at([](auto& c) -> auto& { return c.problem.mma.asyincr; });
    o["constraint_penalty"] = real_at([](auto& c) -> auto& { return c.problem.mma.c; });
    o["initial_guess"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.initial_guess = parse_seed_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.initial_guess)); }};
    o["snapshot_every"] = int_at([](auto& c) -> auto& { return c.snapshot_every; });

    auto& sv = m["solver"];
    sv["residual_tol"] = real_at([](auto& c) -> auto& { return c.problem.solver.residual_tol; });
    sv["residual_floor"] = real_at([](auto& c) -> auto& { return c.problem.solver.residual_floor; });
    sv["max_newton_iters"] = int_at([](auto& c) -> auto& { return c.problem.solver.max_newton_iters; });
    sv["max_step_cuts"] = int_at([](auto& c) -> auto& { return c.problem.solver.max_step_cuts; });
    sv["arc_length"] = bool_at([](auto& c) -> auto& { return c.problem.solver.arc_length_enabled; });
    sv["reuse_threshold"] = real_at([](auto& c) -> auto& { return c.problem.solver.reuse_update_threshold; });
    sv["polish_iterations"] = int_at([](auto& c) -> auto& { return c.problem.solver.polish_iterations; });

    m["output"]["directory"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const RunConfig& c) { return c.output_dir; }};

    m["run"]["seed"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const long long s = parse_int(k, v);
          require(s >= 0, "config: seed must be non-negative");
          c.seed = static_cast<unsigned long long>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }};
    m["run"]["threads"] = int_at([](auto& c) -> auto& { return c.threads; });

    m["gradcheck"]["samples"] = int_at([](auto& c) -> auto& { return c.gradcheck_samples; });
    m["gradcheck"]["step"] = real(&RunConfig::gradcheck_step);
    m["gradcheck"]["tolerance"] = real(&RunConfig::gradcheck_tolerance);
    return m;
  }();
  return s;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw_error(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
  RunConfig c;
  bool target_fraction_set = false;
  const Schema& s = schema();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty())
      throw_error(ErrorKind::InvalidArgument, "config: key '" + section + "' outside any section");
    const auto sec = s.find(section);
    if (sec == s.end()) throw_error(ErrorKind::InvalidArgument, "config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto f = sec->second.find(key);
      if (f == sec->second.end())
        throw_error(ErrorKind::InvalidArgument, "config: unknown key '" + key + "' in [" + section + "]");
      f->second.read(c, section + "." + key, value.get_value<std::string>());
      if (section == "target" && key == "seed_volume_fraction") target_fraction_set = true;
    }
  }
  if (!target_fraction_set) c.target_volume_fraction = c.problem.v_max;
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [section, fields] : schema()) {
    out += "[" + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.write(config) + "\n";
    out += "\n";
  }
  return out;
}

}  // namespace microtopt::io
