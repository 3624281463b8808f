#include "mgmc/experiment.hpp"

#include "mgmc/blr.hpp"
#include "mgmc/dataset.hpp"
#include "mgmc/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#ifndef MGMC_VERSION
#define MGMC_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace mgmc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw SpecError(what + ": '" + t + "' is not a number");
  }
  if (used != t.size() || !std::isfinite(v)) throw SpecError(what + ": '" + t + "' is not a finite number");
  return v;
}

long parse_long(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(t, &used);
  } catch (const std::exception&) {
    throw SpecError(what + ": '" + t + "' is not an integer");
  }
  if (used != t.size()) throw SpecError(what + ": '" + t + "' is not an integer");
  return v;
}

bool parse_bool(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw SpecError(what + ": expected true or false, got '" + t + "'");
}

std::optional<bool> parse_reflection(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "auto") return std::nullopt;
  return parse_bool(t, what);
}

std::string a_tag(double a) {
  if (std::isnan(a)) return "";
  return format_number(a);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment_id", "target", "target.theta", "target.r", "target.difference_term",
      "dataset.path", "dataset.delimiter", "dataset.label_column", "dataset.skip_header",
      "dataset.synthetic_instances", "dataset.synthetic_dim", "dataset.synthetic_seed",
      "prior_variance", "samplers", "a", "mass", "step_size", "step_jitter",
      "leapfrog_center", "leapfrog_halfwidth", "reflection", "decay_init", "decay_rate",
      "iterations", "burn_in", "replications", "seed", "initial_position", "slice_width",
      "max_doublings", "confine_to_component", "max_lag", "output_dir", "workers"};
  return keys;
}

const std::set<std::string>& per_a_keys() {
  static const std::set<std::string> keys = {"mass", "step_size", "step_jitter", "leapfrog_center",
                                             "leapfrog_halfwidth", "reflection"};
  return keys;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& field : split(text, ',')) {
    if (trim(field).empty()) throw SpecError(what + ": empty entry in list '" + text + "'");
    out.push_back(parse_double(field, what));
  }
  if (out.empty()) throw SpecError(what + ": empty list");
  return out;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw SpecError(origin + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw SpecError(origin + ":" + std::to_string(line) + ": empty key");
    if (kv.entries_.count(key)) {
      throw SpecError(origin + ":" + std::to_string(line) + ": duplicate key '" + key + "' (first on line " +
                      std::to_string(kv.lines_[key]) + ")");
    }
    kv.entries_[key] = value;
    kv.lines_[key] = line;
  }
  return kv;
}

KeyValueFile KeyValueFile::read(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw SpecError(e.what());
  }
  return parse(text, path.string());
}

const std::string& KeyValueFile::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw SpecError(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

std::optional<std::string> KeyValueFile::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

int KeyValueFile::line_of(const std::string& key) const {
  const auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

std::string Cell::label() const {
  std::string out = to_string(sampler);
  if (!std::isnan(a)) out += "_a" + format_number(a);
  out += "_rep" + std::to_string(replication);
  return out;
}

Target<double> builtin_target(const std::string& name, const std::map<std::string, double>& params,
                              DifferenceTerm term) {
  auto param = [&](const std::string& key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "exponential") return exponential_target<double>(param("theta", 1));
  if (name == "truncated_gaussian") return truncated_gaussian_target<double>(param("theta", 1));
  if (name == "gamma") return gamma_target<double>(param("r", 2), param("theta", 1));
  if (name == "bimodal_1d") return bimodal_1d_target<double>();
  if (name == "bimodal_2d") return bimodal_2d_target<double>(term);
  throw SpecError("unknown target '" + name + "'");
}

ExperimentSpec ExperimentSpec::from_file(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw SpecError(e.what());
  }
  return from_text(text, fs::absolute(path).parent_path(), path.string());
}

ExperimentSpec ExperimentSpec::from_text(const std::string& text, const fs::path& base_dir,
                                         const std::string& origin) {
  const KeyValueFile kv = KeyValueFile::parse(text, origin);
  auto where = [&](const std::string& key) {
    return origin + ":" + std::to_string(kv.line_of(key)) + ": " + key;
  };

  ExperimentSpec spec;
  std::map<std::string, std::map<double, std::string>> overrides;
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("manifest.", 0) == 0) continue;  // run metadata, ignored on replay
    const auto at = key.find('@');
    if (at != std::string::npos) {
      const std::string base = key.substr(0, at);
      if (!per_a_keys().count(base)) throw SpecError(where(key) + ": '" + base + "' cannot be set per a");
      overrides[base][parse_double(key.substr(at + 1), where(key))] = value;
      continue;
    }
    if (!known_keys().count(key)) throw SpecError(where(key) + ": unknown key");
  }

  spec.experiment_id = kv.get("experiment_id");
  if (spec.experiment_id.empty() ||
      spec.experiment_id.find_first_of(",/\\ \t") != std::string::npos) {
    throw SpecError(where("experiment_id") + ": must be non-empty without commas, slashes or spaces");
  }
  spec.target = kv.get("target");
  for (const char* p : {"theta", "r"}) {
    if (auto v = kv.find(std::string("target.") + p)) {
      spec.target_params[p] = parse_double(*v, where(std::string("target.") + p));
    }
  }
  if (auto v = kv.find("target.difference_term")) {
    if (*v == "integrable") {
      spec.difference_term = DifferenceTerm::integrable;
    } else if (*v == "as_printed") {
      spec.difference_term = DifferenceTerm::as_printed;
    } else {
      throw SpecError(where("target.difference_term") + ": expected integrable or as_printed");
    }
  }

  if (auto v = kv.find("dataset.path")) {
    fs::path p = *v;
    if (p.is_relative()) p = base_dir / p;
    spec.dataset.path = p.lexically_normal();
  }
  if (auto v = kv.find("dataset.delimiter")) {
    if (*v != "comma" && *v != "whitespace" && *v != "auto") {
      throw SpecError(where("dataset.delimiter") + ": expected comma, whitespace or auto");
    }
    spec.dataset.delimiter = *v;
  }
  if (auto v = kv.find("dataset.label_column")) {
    spec.dataset.label_column = static_cast<int>(parse_long(*v, where("dataset.label_column")));
  }
  if (auto v = kv.find("dataset.skip_header")) spec.dataset.skip_header = parse_bool(*v, where("dataset.skip_header"));
  if (auto v = kv.find("dataset.synthetic_instances")) {
    spec.dataset.synthetic_instances = static_cast<int>(parse_long(*v, where("dataset.synthetic_instances")));
  }
  if (auto v = kv.find("dataset.synthetic_dim")) {
    spec.dataset.synthetic_dim = static_cast<int>(parse_long(*v, where("dataset.synthetic_dim")));
  }
  if (auto v = kv.find("dataset.synthetic_seed")) {
    spec.dataset.synthetic_seed = static_cast<std::uint64_t>(parse_long(*v, where("dataset.synthetic_seed")));
  }
  if (auto v = kv.find("prior_variance")) spec.dataset.prior_variance = parse_double(*v, where("prior_variance"));

  for (const auto& name : split(kv.get("samplers"), ',')) {
    try {
      spec.samplers.push_back(parse_sampler_kind(trim(name)));
    } catch (const std::invalid_argument& e) {
      throw SpecError(where("samplers") + ": " + e.what());
    }
  }
  if (spec.samplers.empty()) throw SpecError(where("samplers") + ": no samplers listed");
  const bool needs_a = std::any_of(spec.samplers.begin(), spec.samplers.end(),
                                   [](SamplerKind k) { return k != SamplerKind::std_slice; });
  const bool needs_step = std::count(spec.samplers.begin(), spec.samplers.end(), SamplerKind::mg_hmc) > 0;
  if (needs_a) {
    spec.a_grid = parse_number_list(kv.get("a"), where("a"));
    for (double a : spec.a_grid) {
      if (!(a > 0)) throw SpecError(where("a") + ": every a must be positive");
    }
  }

  // mass and step size have no defaults: the right values are target specific
  for (const auto& [key, by_a] : overrides) {
    for (const auto& [a, value] : by_a) {
      if (std::find(spec.a_grid.begin(), spec.a_grid.end(), a) == spec.a_grid.end()) {
        throw SpecError(origin + ": " + key + "@" + format_number(a) + ": a=" + format_number(a) +
                        " is not in the a grid");
      }
    }
  }
  auto setting = [&](const std::string& key, double a) -> std::optional<std::pair<std::string, std::string>> {
    const auto it = overrides.find(key);
    if (it != overrides.end()) {
      const auto jt = it->second.find(a);
      if (jt != it->second.end()) return std::make_pair(key + "@" + format_number(a), jt->second);
    }
    if (auto v = kv.find(key)) return std::make_pair(key, *v);
    return std::nullopt;
  };
  for (double a : spec.a_grid) {
    PerA p;
    const auto mass = setting("mass", a);
    if (!mass) throw SpecError(origin + ": missing required key 'mass' (or 'mass@" + format_number(a) + "')");
    p.mass = parse_double(mass->second, origin + ": " + mass->first);
    if (!(p.mass > 0)) throw SpecError(origin + ": " + mass->first + " must be positive");
    if (needs_step) {
      const auto step = setting("step_size", a);
      if (!step) {
        throw SpecError(origin + ": missing required key 'step_size' (or 'step_size@" + format_number(a) + "')");
      }
      p.step_size = parse_double(step->second, origin + ": " + step->first);
      if (!(p.step_size > 0)) throw SpecError(origin + ": " + step->first + " must be positive");
    }
    if (const auto j = setting("step_jitter", a)) {
      const auto pair = parse_number_list(j->second, origin + ": " + j->first);
      if (pair.size() != 2 || !(pair[0] > 0) || !(pair[1] >= pair[0])) {
        throw SpecError(origin + ": " + j->first + " must be 'r1, r2' with 0 < r1 <= r2");
      }
      p.step_jitter = std::make_pair(pair[0], pair[1]);
    }
    if (const auto c = setting("leapfrog_center", a)) {
      p.leapfrog_center = static_cast<int>(parse_long(c->second, origin + ": " + c->first));
    }
    if (const auto h = setting("leapfrog_halfwidth", a)) {
      p.leapfrog_halfwidth = static_cast<int>(parse_long(h->second, origin + ": " + h->first));
    }
    if (p.leapfrog_halfwidth < 0 || p.leapfrog_halfwidth >= p.leapfrog_center) {
      throw SpecError(origin + ": need 0 <= leapfrog_halfwidth < leapfrog_center at a=" + format_number(a));
    }
    if (const auto r = setting("reflection", a)) p.reflection = parse_reflection(r->second, origin + ": " + r->first);
    spec.per_a[a] = p;
  }

  spec.iterations = parse_long(kv.get("iterations"), where("iterations"));
  spec.burn_in = parse_long(kv.get("burn_in"), where("burn_in"));
  if (spec.iterations < 1) throw SpecError(where("iterations") + ": must be >= 1");
  if (spec.burn_in < 0 || spec.burn_in >= spec.iterations) {
    throw SpecError(where("burn_in") + ": need 0 <= burn_in < iterations");
  }
  if (auto v = kv.find("replications")) spec.replications = static_cast<int>(parse_long(*v, where("replications")));
  if (spec.replications < 1) throw SpecError(where("replications") + ": must be >= 1");
  spec.seed = static_cast<std::uint64_t>(parse_long(kv.get("seed"), where("seed")));
  spec.initial_position = parse_number_list(kv.get("initial_position"), where("initial_position"));
  if (auto v = kv.find("slice_width")) spec.slice_width = parse_double(*v, where("slice_width"));
  if (auto v = kv.find("max_doublings")) spec.max_doublings = static_cast<int>(parse_long(*v, where("max_doublings")));
  if (auto v = kv.find("decay_init")) spec.decay_init = parse_double(*v, where("decay_init"));
  if (auto v = kv.find("decay_rate")) spec.decay_rate = parse_double(*v, where("decay_rate"));
  if (auto v = kv.find("confine_to_component")) {
    spec.confine_to_component = parse_bool(*v, where("confine_to_component"));
  }
  if (auto v = kv.find("max_lag")) {
    const long lag = parse_long(*v, where("max_lag"));
    if (lag < 1) throw SpecError(where("max_lag") + ": must be >= 1");
    spec.max_lag = static_cast<std::size_t>(lag);
  }
  fs::path out = kv.get("output_dir");
  if (out.is_relative()) out = base_dir / out;
  spec.output_dir = out.lexically_normal();
  if (auto v = kv.find("workers")) {
    spec.workers = static_cast<int>(parse_long(*v, where("workers")));
    if (*spec.workers < 1) throw SpecError(where("workers") + ": must be >= 1");
  }

  // Semantic checks: build the target and every cell configuration.
  Target<double> target = [&] {
    try {
      return spec.make_target();
    } catch (const SpecError&) {
      throw;
    } catch (const std::exception& e) {
      throw SpecError(origin + ": target: " + e.what());
    }
  }();
  for (const Cell& cell : spec.cells()) {
    try {
      cell.config.validate(target);
    } catch (const std::exception& e) {
      throw SpecError(origin + ": cell " + cell.label() + ": " + e.what());
    }
  }
  return spec;
}

Target<double> ExperimentSpec::make_target() const {
  if (target != "blr") return builtin_target(target, target_params, difference_term);
  LabeledDataset data;
  if (dataset.path.empty()) {
    if (dataset.synthetic_instances < 1 || dataset.synthetic_dim < 2) {
      throw SpecError("synthetic dataset needs at least one instance and dimension >= 2");
    }
    data = synthetic_logistic_dataset(dataset.synthetic_instances, dataset.synthetic_dim, dataset.synthetic_seed);
  } else {
    if (!fs::exists(dataset.path)) throw SpecError("dataset.path '" + dataset.path.string() + "' does not exist");
    DatasetFormat format;
    format.delimiter = dataset.delimiter == "comma"        ? Delimiter::comma
                       : dataset.delimiter == "whitespace" ? Delimiter::whitespace
                                                           : Delimiter::automatic;
    format.label_column = dataset.label_column;
    format.skip_header = dataset.skip_header;
    try {
      data = load_dataset(dataset.path, format);
    } catch (const std::exception& e) {
      throw SpecError(e.what());
    }
  }
  return blr_target<double>(data, dataset.prior_variance);
}

std::vector<Cell> ExperimentSpec::cells() const {
  std::vector<Cell> out;
  Vector<double> x0 = Eigen::Map<const Vector<double>>(initial_position.data(),
                                                       static_cast<Eigen::Index>(initial_position.size()));
  auto base = [&](SamplerKind kind) {
    SamplerConfig<double> c;
    c.kind = kind;
    c.iterations = iterations;
    c.burn_in = burn_in;
    c.initial_position = x0;
    c.slice.width = slice_width;
    c.slice.max_doublings = max_doublings;
    c.confine_to_component = confine_to_component;
    return c;
  };
  for (SamplerKind kind : samplers) {
    const std::vector<double> grid =
        kind == SamplerKind::std_slice ? std::vector<double>{std::numeric_limits<double>::quiet_NaN()} : a_grid;
    for (double a : grid) {
      for (int rep = 0; rep < replications; ++rep) {
        Cell cell;
        cell.index = out.size();
        cell.sampler = kind;
        cell.a = a;
        cell.replication = rep;
        cell.config = base(kind);
        if (!std::isnan(a)) {
          const PerA& p = per_a.at(a);
          cell.config.kinetic = KineticParams<double>(a, p.mass);
          auto& ic = cell.config.integrator;
          ic.base_step = p.step_size > 0 ? p.step_size : 0.1;
          ic.step_jitter_range = p.step_jitter;
          ic.leapfrog_center = p.leapfrog_center;
          ic.leapfrog_halfwidth = p.leapfrog_halfwidth;
          ic.reflection_enabled = p.reflection;
          ic.decay_init = decay_init;
          ic.decay_rate = decay_rate;
        }
        cell.config.seed = derive_seed(seed, cell.index);
        out.push_back(std::move(cell));
      }
    }
  }
  return out;
}

std::string ExperimentSpec::to_spec_text() const {
  std::ostringstream out;
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + exact(v[i]);
    return s;
  };
  out << "experiment_id = " << experiment_id << '\n';
  out << "target = " << target << '\n';
  for (const auto& [k, v] : target_params) out << "target." << k << " = " << exact(v) << '\n';
  if (target == "bimodal_2d") out << "target.difference_term = " << to_string(difference_term) << '\n';
  if (target == "blr") {
    if (!dataset.path.empty()) {
      out << "dataset.path = " << fs::absolute(dataset.path).string() << '\n';
      out << "dataset.delimiter = " << dataset.delimiter << '\n';
      out << "dataset.label_column = " << dataset.label_column << '\n';
      out << "dataset.skip_header = " << (dataset.skip_header ? "true" : "false") << '\n';
    } else {
      out << "dataset.synthetic_instances = " << dataset.synthetic_instances << '\n';
      out << "dataset.synthetic_dim = " << dataset.synthetic_dim << '\n';
      out << "dataset.synthetic_seed = " << dataset.synthetic_seed << '\n';
    }
    out << "prior_variance = " << exact(dataset.prior_variance) << '\n';
  }
  out << "samplers = ";
  for (std::size_t i = 0; i < samplers.size(); ++i) out << (i ? ", " : "") << to_string(samplers[i]);
  out << '\n';
  if (!a_grid.empty()) out << "a = " << list(a_grid) << '\n';
  const bool has_hmc = std::count(samplers.begin(), samplers.end(), SamplerKind::mg_hmc) > 0;
  for (double a : a_grid) {
    const PerA& p = per_a.at(a);
    const std::string tag = "@" + format_number(a);
    out << "mass" << tag << " = " << exact(p.mass) << '\n';
    if (has_hmc) {
      out << "step_size" << tag << " = " << exact(p.step_size) << '\n';
      if (p.step_jitter) {
        out << "step_jitter" << tag << " = " << exact(p.step_jitter->first) << ", " << exact(p.step_jitter->second)
            << '\n';
      }
      out << "leapfrog_center" << tag << " = " << p.leapfrog_center << '\n';
      out << "leapfrog_halfwidth" << tag << " = " << p.leapfrog_halfwidth << '\n';
      out << "reflection" << tag << " = " << (p.reflection ? (*p.reflection ? "on" : "off") : "auto") << '\n';
    }
  }
  if (has_hmc) {
    out << "decay_init = " << exact(decay_init) << '\n';
    out << "decay_rate = " << exact(decay_rate) << '\n';
  }
  out << "iterations = " << iterations << '\n';
  out << "burn_in = " << burn_in << '\n';
  out << "replications = " << replications << '\n';
  out << "seed = " << seed << '\n';
  out << "initial_position = " << list(initial_position) << '\n';
  out << "slice_width = " << exact(slice_width) << '\n';
  out << "max_doublings = " << max_doublings << '\n';
  out << "confine_to_component = " << (confine_to_component ? "true" : "false") << '\n';
  out << "max_lag = " << max_lag << '\n';
  out << "output_dir = " << fs::absolute(output_dir).string() << '\n';
  return out.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id();
  const fs::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string diagnostics_header() {
  return "experiment_id,sampler,a,replication,seed," + csv_header();
}

std::string summary_header() {
  return "experiment_id,sampler,a,replications,min_ess,median_ess,ess_fraction,rho1,acceptance_rate,divergence_count";
}

int resolve_workers(std::optional<int> explicit_workers, const ExperimentSpec& spec) {
  if (explicit_workers && *explicit_workers > 0) return *explicit_workers;
  if (const char* env = std::getenv("MGMC_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  if (spec.workers) return *spec.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string trace_csv(const Trace<double>& trace) {
  std::ostringstream out;
  for (Eigen::Index d = 0; d < trace.samples.cols(); ++d) out << 'x' << d << ',';
  out << "H,accepted\n";
  char buf[64];
  for (Eigen::Index i = 0; i < trace.samples.rows(); ++i) {
    const auto it = static_cast<std::size_t>(trace.burn_in + i);
    for (Eigen::Index d = 0; d < trace.samples.cols(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g,", trace.samples(i, d));
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,", trace.hamiltonians[it]);
    out << buf << static_cast<int>(trace.accepted[it]) << '\n';
  }
  return out.str();
}

std::string summary_csv(const ExperimentSpec& spec, const std::vector<CellResult>& results) {
  struct Acc {
    int n = 0;
    double min_ess = 0, median_ess = 0, fraction = 0, rho1 = 0, acceptance = 0;
    long divergences = 0;
  };
  // keyed by sampler position then a, so rows follow the spec order
  std::map<std::pair<std::size_t, double>, Acc> acc;
  for (const auto& r : results) {
    if (!r.report) continue;
    const std::size_t pos = static_cast<std::size_t>(
        std::find(spec.samplers.begin(), spec.samplers.end(), r.cell.sampler) - spec.samplers.begin());
    auto& a = acc[{pos, std::isnan(r.cell.a) ? -1.0 : r.cell.a}];
    const auto& rep = *r.report;
    ++a.n;
    a.min_ess += rep.min_ess;
    a.median_ess += rep.median_ess;
    a.fraction += rep.min_ess / static_cast<double>(rep.samples);
    a.rho1 += rep.acf.front().empty() ? 0.0 : rep.acf.front().front();
    a.acceptance += rep.acceptance_rate;
    a.divergences += rep.divergence_count;
  }
  std::ostringstream out;
  out << summary_header() << '\n';
  for (const auto& [key, a] : acc) {
    const double n = a.n;
    out << spec.experiment_id << ',' << to_string(spec.samplers[key.first]) << ','
        << (key.second < 0 ? std::string() : format_number(key.second)) << ',' << a.n << ','
        << format_number(a.min_ess / n) << ',' << format_number(a.median_ess / n) << ','
        << format_number(a.fraction / n) << ',' << format_number(a.rho1 / n) << ','
        << format_number(a.acceptance / n) << ',' << a.divergences << '\n';
  }
  return out.str();
}

void check_run_dir(const ExperimentSpec& spec) {
  const fs::path manifest = spec.output_dir / "manifest.txt";
  if (!fs::exists(manifest)) return;
  const auto kv = KeyValueFile::read(manifest);
  if (auto id = kv.find("experiment_id"); id && *id != spec.experiment_id) {
    throw SpecError("output directory '" + spec.output_dir.string() + "' already holds experiment '" + *id +
                    "'; experiment ids are unique per run directory");
  }
}

}  // namespace

int run_experiment(const ExperimentSpec& spec, int workers, std::ostream& log) {
  check_run_dir(spec);
  const auto start = std::chrono::steady_clock::now();
  const Target<double> target = spec.make_target();
  const std::vector<Cell> cells = spec.cells();
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  fs::create_directories(spec.output_dir / "traces");

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      CellResult& r = results[i];
      r.cell = cells[i];
      try {
        const Trace<double> trace = run_sampler(target, r.cell.config);
        r.report = summarize(trace, target, spec.max_lag);
        write_atomic(spec.output_dir / "traces" / (r.cell.label() + ".csv"), trace_csv(trace));
      } catch (const std::exception& e) {
        r.report.reset();
        r.error = e.what();
      }
      std::lock_guard lock(log_mutex);
      log << (r.report ? "done   " : "FAILED ") << r.cell.label();
      if (!r.report) log << ": " << r.error;
      log << '\n';
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream diag;
  std::ostringstream errors;
  diag << diagnostics_header() << '\n';
  long failures = 0;
  for (const auto& r : results) {
    if (!r.report) {
      ++failures;
      errors << r.cell.label() << ": " << r.error << '\n';
      continue;
    }
    diag << spec.experiment_id << ',' << to_string(r.cell.sampler) << ',' << a_tag(r.cell.a) << ','
         << r.cell.replication << ',' << r.cell.config.seed << ',' << to_csv_row(*r.report) << '\n';
  }
  write_atomic(spec.output_dir / "diagnostics.csv", diag.str());
  write_atomic(spec.output_dir / "summary.csv", summary_csv(spec, results));
  write_atomic(spec.output_dir / "errors.log", errors.str());

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream manifest;
  manifest << spec.to_spec_text();
  manifest << "manifest.code_version = " << MGMC_VERSION << '\n';
  manifest << "manifest.master_seed = " << spec.seed << '\n';
  manifest << "manifest.cells = " << cells.size() << '\n';
  manifest << "manifest.failed_cells = " << failures << '\n';
  manifest << "manifest.workers = " << n_threads << '\n';
  manifest << "manifest.wall_time_seconds = " << format_number(wall) << '\n';
  manifest << "manifest.ess_method = geyer_initial_positive\n";
  if (spec.target == "bimodal_2d") {
    manifest << "manifest.bimodal_2d_difference_term = "
             << (spec.difference_term == DifferenceTerm::integrable ? "+0.4 (x1 - x2)^2" : "-0.4 (x1 - x2)^2")
             << '\n';
  }
  write_atomic(spec.output_dir / "manifest.txt", manifest.str());
  log << cells.size() - static_cast<std::size_t>(failures) << '/' << cells.size() << " cells ok, output in "
      << spec.output_dir.string() << '\n';
  return failures > 0 ? exit_cell_failures : exit_ok;
}

int run_experiment(const fs::path& spec_path, std::optional<int> workers, std::ostream& log) {
  const ExperimentSpec spec = ExperimentSpec::from_file(spec_path);
  return run_experiment(spec, resolve_workers(workers, spec), log);
}

std::vector<ReportRow> compare_report(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ReportError("report needs at least one run directory");
  std::vector<ReportRow> rows;
  std::string experiment;
  for (const auto& dir : run_dirs) {
    if (!fs::is_directory(dir)) throw ReportError("'" + dir.string() + "' is not a directory");
    const fs::path file = dir / "diagnostics.csv";
    if (!fs::exists(file)) throw ReportError("run directory '" + dir.string() + "' has no diagnostics.csv");
    std::istringstream in(read_file(file));
    std::string line;
    if (!std::getline(in, line) || line != diagnostics_header()) {
      throw ReportError("'" + file.string() + "' does not have the expected column header");
    }
    const auto header = split(diagnostics_header(), ',');
    auto col = [&](const std::string& name) {
      return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    std::size_t count = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != header.size()) {
        throw ReportError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
      }
      ReportRow row;
      row.run_dir = dir.string();
      row.experiment_id = f[col("experiment_id")];
      if (experiment.empty()) experiment = row.experiment_id;
      if (row.experiment_id != experiment) {
        throw ReportError("mismatched experiment ids: '" + experiment + "' and '" + row.experiment_id + "' (in " +
                          dir.string() + ")");
      }
      try {
        row.sampler = f[col("sampler")];
        row.a = f[col("a")];
        row.replication = std::stoi(f[col("replication")]);
        row.seed = std::stoull(f[col("seed")]);
        row.min_ess = std::stod(f[col("min_ess")]);
        row.median_ess = std::stod(f[col("median_ess")]);
        row.ess_fraction = std::stod(f[col("ess_fraction")]);
        row.rho1 = std::stod(f[col("rho1")]);
        row.acceptance_rate = std::stod(f[col("acceptance_rate")]);
      } catch (const std::exception&) {
        throw ReportError(file.string() + ":" + std::to_string(line_no) + ": malformed numeric field");
      }
      rows.push_back(std::move(row));
      ++count;
    }
    if (count == 0) throw ReportError("run directory '" + dir.string() + "' has no completed cells");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& l, const ReportRow& r) {
    if (l.sampler != r.sampler) return l.sampler < r.sampler;
    const double la = l.a.empty() ? -1 : std::stod(l.a);
    const double ra = r.a.empty() ? -1 : std::stod(r.a);
    return la < ra;
  });
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "experiment_id,sampler,a,run_dir,replication,seed,min_ess,median_ess,ess_fraction,rho1,acceptance_rate\n";
  for (const auto& r : rows) {
    out << r.experiment_id << ',' << r.sampler << ',' << r.a << ',' << r.run_dir << ',' << r.replication << ','
        << r.seed << ',' << format_number(r.min_ess) << ',' << format_number(r.median_ess) << ','
        << format_number(r.ess_fraction) << ',' << format_number(r.rho1) << ','
        << format_number(r.acceptance_rate) << '\n';
  }
  return out.str();
}

std::vector<OracleRow> oracle_table(const std::string& target_name, const std::map<std::string, double>& params,
                                    const std::vector<double>& a_grid) {
  const Target<double> target = builtin_target(target_name, params);
  if (target.dim() != 1 || !target.has_slice_interval()) {
    throw SpecError("oracle needs a 1D target with an analytic slice; '" + target_name + "' has none");
  }
  std::vector<OracleRow> rows;
  for (double a : a_grid) {
    if (!(a > 0)) throw SpecError("oracle: every a must be positive");
    if (target_name == "exponential") {
      const auto cs = oracle::exponential_case_study(a, params.count("theta") ? params.at("theta") : 1.0, 1);
      rows.push_back({target_name, a, "rho1_closed_form", cs.rho1, 0});
      rows.push_back({target_name, a, "ess_fraction_closed_form", cs.ess_fraction, 0});
    }
    rows.push_back({target_name, a, "rho1_numeric", oracle::numeric_rho1(target, a), 1e-4});
  }
  return rows;
}

std::string oracle_csv(const std::vector<OracleRow>& rows) {
  std::ostringstream out;
  out << "target,a,quantity,value,tolerance\n";
  for (const auto& r : rows) {
    out << r.target << ',' << format_number(r.a) << ',' << r.quantity << ',' << exact(r.value) << ','
        << format_number(r.tolerance) << '\n';
  }
  return out.str();
}

}  // namespace mgmc::cli
