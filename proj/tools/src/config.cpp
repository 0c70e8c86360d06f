#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <koopid/error.hpp>
#include <koopid/random.hpp>

namespace koopid::cli {
namespace {

using boost::property_tree::ptree;

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"system",
       {"kind", "duration", "dt", "substeps", "x0", "alpha", "beta", "delta", "reynolds", "grid_points",
        "observable", "mu", "omega", "input_scale", "path"}},
      {"input", {"kind", "lo", "hi", "hold", "value"}},
      {"dictionary",
       {"z", "pre_lift", "pre_min_degree", "pre_max_degree", "pre_scope", "lift", "min_degree",
        "max_degree", "scope", "rbf_count", "rbf_lo", "rbf_hi"}},
      {"fit", {"family", "rank", "pod_rho", "lifted_state"}},
      {"predict", {"start", "steps", "dx", "reduced"}},
      {"analysis",
       {"task", "x1_lo", "x1_hi", "x1_count", "x2_lo", "x2_hi", "x2_count", "u_const", "horizon",
        "settle_tol", "settle_window", "observable", "threshold", "transient", "max_steps", "init_value",
        "start", "magnitude", "pulse_duration", "phases", "settle_cycles", "guess", "tol"}},
      {"output", {"directory"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw FormatError("config: " + where + ": " + what);
}

class Section {
public:
  Section(std::string name, const ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? trim(tree_->get<std::string>(key)) : fallback;
  }

  double real(const std::string& key, double fallback) const {
    return has(key) ? parse_real(key, str(key, "")) : fallback;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key, "");
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') bad(where(key), "expected an integer, got '" + v + "'");
    return x;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad(where(key), "expected true or false, got '" + v + "'");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    std::stringstream ss(str(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
    return out;
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

private:
  double parse_real(const std::string& key, const std::string& v) const {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') bad(where(key), "expected a number, got '" + v + "'");
    return x;
  }

  std::string name_;
  const ptree* tree_;
};

PolynomialScope parse_scope(const Section& s, const std::string& key) {
  const std::string v = s.str(key, "latest");
  if (v == "latest") return PolynomialScope::LatestFrame;
  if (v == "all") return PolynomialScope::AllFrames;
  bad(s.where(key), "expected latest or all, got '" + v + "'");
}

LiftSection parse_lift(const Section& s, const std::string& kind_key, const std::string& prefix) {
  LiftSection l;
  l.kind = s.str(kind_key, "none");
  if (l.kind != "none" && l.kind != "polynomial" && l.kind != "rbf" && l.kind != "composed") {
    bad(s.where(kind_key), "unknown lifting '" + l.kind + "'");
  }
  l.min_degree = static_cast<int>(s.integer(prefix + "min_degree", 2));
  l.max_degree = static_cast<int>(s.integer(prefix + "max_degree", l.min_degree));
  l.scope = parse_scope(s, prefix + "scope");
  return l;
}

Matrix rbf_centers(const RunConfig& c, Index m, const std::string& stream) {
  const DictionarySection& d = c.dictionary;
  if (d.rbf_count < 1) throw FormatError("config: [dictionary] rbf_count must be >= 1 for radial liftings");
  auto box = [&](const std::vector<double>& v, double fallback, const char* key) {
    if (v.empty()) return Vector::Constant(m, fallback).eval();
    if (v.size() == 1) return Vector::Constant(m, v[0]).eval();
    if (static_cast<Index>(v.size()) != m) {
      throw FormatError(std::string("config: [dictionary] ") + key + " needs 1 or " + std::to_string(m) + " values");
    }
    return Eigen::Map<const Vector>(v.data(), m).eval();
  };
  return sample_rbf_centers(box(d.rbf_lo, -1.0, "rbf_lo"), box(d.rbf_hi, 1.0, "rbf_hi"), d.rbf_count,
                            substream_seed(c.seed, stream));
}

LiftingSpec build_lifting(const RunConfig& c, const LiftSection& l, Index m, const std::string& stream) {
  if (l.kind == "polynomial") return PolynomialLifting{l.min_degree, l.max_degree, l.scope};
  if (l.kind == "rbf") return RbfLifting{rbf_centers(c, m, stream)};
  if (l.kind == "composed") return ComposedLifting{rbf_centers(c, m, stream), l.min_degree, l.max_degree};
  return NoLifting{};
}

} // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::Duffing: return "duffing";
    case SystemKind::Burgers: return "burgers";
    case SystemKind::Hopf: return "hopf";
    case SystemKind::ExternalCsv: return "external-csv";
  }
  return "unknown";
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  ptree root;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }

  const auto& known = allowed_keys();
  for (const auto& [name, child] : root) {
    if (name == "seed") continue;
    const auto it = known.find(name);
    if (it == known.end()) {
      if (child.empty()) bad("top level", "unknown key '" + name + "'");
      bad("[" + name + "]", "unknown section");
    }
    for (const auto& [key, value] : child) {
      (void)value;
      if (!it->second.count(key)) bad("[" + name + "]", "unknown key '" + key + "'");
    }
  }
  auto section = [&](const std::string& name) {
    const auto it = root.find(name);
    return Section(name, it == root.not_found() ? nullptr : &it->second);
  };

  RunConfig c;
  {
    const Section top("top level", &root);
    const std::int64_t seed = top.integer("seed", 0);
    if (seed < 0) bad("top level", "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
  }

  {
    const Section s = section("system");
    const std::string kind = s.str("kind", "duffing");
    if (kind == "duffing") {
      c.system.kind = SystemKind::Duffing;
    } else if (kind == "burgers") {
      c.system.kind = SystemKind::Burgers;
    } else if (kind == "hopf") {
      c.system.kind = SystemKind::Hopf;
    } else if (kind == "external-csv") {
      c.system.kind = SystemKind::ExternalCsv;
    } else {
      bad(s.where("kind"), "unknown system '" + kind + "'");
    }
    c.system.duration = s.real("duration", c.system.duration);
    if (s.has("dt")) c.system.dt = s.real("dt", 0.0);
    if (s.has("substeps")) c.system.substeps = static_cast<int>(s.integer("substeps", 1));
    c.system.x0 = s.list("x0");

    DuffingParams& d = c.system.duffing;
    d.alpha = s.real("alpha", d.alpha);
    d.beta = s.real("beta", d.beta);
    d.delta = s.real("delta", d.delta);

    BurgersParams& b = c.system.burgers;
    b.reynolds = s.real("reynolds", b.reynolds);
    b.grid_points = static_cast<int>(s.integer("grid_points", b.grid_points));

    HopfParams& h = c.system.hopf;
    h.mu = s.real("mu", h.mu);
    h.omega = s.real("omega", h.omega);
    h.input_scale = s.real("input_scale", h.input_scale);

    const std::string obs = s.str("observable", "");
    if (c.system.kind == SystemKind::Burgers) {
      if (obs == "grid") {
        c.system.burgers_observable = BurgersObservable::AllGrid;
      } else if (!obs.empty() && obs != "stations") {
        bad(s.where("observable"), "expected stations or grid");
      }
    } else if (c.system.kind == SystemKind::Hopf) {
      if (obs == "xy") {
        c.system.hopf_observable = HopfObservable::XY;
      } else if (!obs.empty() && obs != "x") {
        bad(s.where("observable"), "expected x or xy");
      }
    } else if (!obs.empty()) {
      bad(s.where("observable"), "not used by system '" + kind + "'");
    }

    if (c.system.dt) {
      d.dt_sample = b.dt_sample = h.dt_sample = *c.system.dt;
    }
    if (c.system.substeps) {
      d.substeps = b.substeps = h.substeps = *c.system.substeps;
    }
    if (c.system.kind == SystemKind::ExternalCsv) {
      if (!s.has("path")) bad("[system]", "external-csv needs a path");
      c.system.path = base / s.str("path", "");
      if (!std::filesystem::exists(c.system.path)) {
        bad(s.where("path"), "file '" + c.system.path.string() + "' does not exist");
      }
    }
  }

  {
    const Section s = section("input");
    const std::string kind = s.str("kind", "random");
    if (kind == "random") {
      c.input.kind = InputKind::Random;
    } else if (kind == "constant") {
      c.input.kind = InputKind::Constant;
    } else if (kind == "none") {
      c.input.kind = InputKind::None;
    } else {
      bad(s.where("kind"), "expected random, constant or none");
    }
    c.input.lo = s.real("lo", c.input.lo);
    c.input.hi = s.real("hi", c.input.hi);
    c.input.hold = s.real("hold", c.input.hold);
    c.input.value = s.real("value", c.input.value);
  }

  {
    const Section s = section("dictionary");
    c.dictionary.z = s.integer("z", 0);
    if (c.dictionary.z < 0) bad(s.where("z"), "must be >= 0");
    c.dictionary.lift = parse_lift(s, "lift", "");
    c.dictionary.pre_lift = parse_lift(s, "pre_lift", "pre_");
    c.dictionary.rbf_count = s.integer("rbf_count", 0);
    c.dictionary.rbf_lo = s.list("rbf_lo");
    c.dictionary.rbf_hi = s.list("rbf_hi");
  }

  {
    const Section s = section("fit");
    try {
      c.fit.family = family_tag_from_string(s.str("family", "nonlinear_controlled"));
    } catch (const std::invalid_argument& e) {
      bad(s.where("family"), e.what());
    }
    const std::string rank = s.str("rank", "full");
    if (rank != "full") {
      const std::int64_t r = s.integer("rank", 0);
      if (r < 1) bad(s.where("rank"), "must be 'full' or a positive integer");
      c.fit.rank = r;
    }
    c.fit.pod_rho = s.integer("pod_rho", 0);
    if (c.fit.pod_rho < 0) bad(s.where("pod_rho"), "must be >= 0");
    c.fit.lifted_state = s.boolean("lifted_state", false);
  }

  {
    const Section s = section("predict");
    if (s.has("start")) c.predict.start = s.integer("start", 0);
    c.predict.steps = s.integer("steps", c.predict.steps);
    if (c.predict.steps < 0) bad(s.where("steps"), "must be >= 0");
    if (s.has("dx")) c.predict.dx = s.real("dx", 1.0);
    c.predict.reduced = s.boolean("reduced", false);
  }

  {
    const Section s = section("analysis");
    AnalysisSection& a = c.analysis;
    a.task = s.str("task", "");
    a.x1_lo = s.real("x1_lo", a.x1_lo);
    a.x1_hi = s.real("x1_hi", a.x1_hi);
    a.x2_lo = s.real("x2_lo", a.x2_lo);
    a.x2_hi = s.real("x2_hi", a.x2_hi);
    a.x1_count = s.integer("x1_count", a.x1_count);
    a.x2_count = s.integer("x2_count", a.x2_count);
    a.u_const = s.real("u_const", a.u_const);
    a.horizon = s.integer("horizon", a.horizon);
    a.settle_tol = s.real("settle_tol", a.settle_tol);
    a.settle_window = s.integer("settle_window", a.settle_window);
    a.observable = s.integer("observable", a.observable);
    a.threshold = s.real("threshold", a.threshold);
    a.transient = s.integer("transient", a.transient);
    a.max_steps = s.integer("max_steps", a.max_steps);
    a.init_value = s.real("init_value", a.init_value);
    if (s.has("start")) a.start = s.integer("start", 0);
    a.magnitude = s.real("magnitude", a.magnitude);
    a.pulse_duration = s.real("pulse_duration", a.pulse_duration);
    a.phases = s.integer("phases", a.phases);
    a.settle_cycles = s.integer("settle_cycles", a.settle_cycles);
    a.guess = s.list("guess");
    a.tol = s.real("tol", a.tol);
  }

  {
    const Section s = section("output");
    if (s.has("directory")) c.output_dir = base / s.str("directory", ".");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

double system_dt(const RunConfig& config) {
  switch (config.system.kind) {
    case SystemKind::Duffing: return config.system.duffing.dt_sample;
    case SystemKind::Burgers: return config.system.burgers.dt_sample;
    case SystemKind::Hopf: return config.system.hopf.dt_sample;
    case SystemKind::ExternalCsv: break;
  }
  throw FormatError("config: external-csv systems take dt from the dataset");
}

DictionarySpec make_dictionary_spec(const RunConfig& config, Index m, Index q) {
  DictionarySpec spec;
  spec.m = m;
  spec.q = q;
  spec.z = config.dictionary.z;
  try {
    spec.pre_lift = build_lifting(config, config.dictionary.pre_lift, m, "rbf_centers.pre_lift");
    spec.lift = build_lifting(config, config.dictionary.lift, m, "rbf_centers");
    Dictionary check(spec);  // validates degrees and dimensions
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: [dictionary] ") + e.what());
  }
  return spec;
}

} // namespace koopid::cli
