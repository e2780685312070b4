// simlab: command-line front end for the simulation library.
//
// Exit status: 0 success, 2 usage or configuration error, 3 model error
// (an invariant of the model was violated), 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "simlab/scenarios.hpp"
#include "simlab/simlab.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace simlab;
namespace fs = std::filesystem;

constexpr int kExitUsage = 2;
constexpr int kExitModel = 3;
constexpr int kExitNumerical = 4;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  std::size_t reps = 0;  // 0 leaves the command's own default
  bool quiet = false;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

/// Everything one command produces: identity, resolved parameters, the
/// summary printed to stdout and the table written to --out.
struct Output {
  std::string scenario;
  json params = json::object();
  json summary = json::object();
  Table table;
};

// ---------------------------------------------------------------------------
// Formatting

std::string full(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string brief(const json& v) {
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string csv_cell(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return full(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_null()) return "";
  return v.dump();
}

/// JSON cannot hold NaN or infinities; they become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Integral values print without a fractional part.
json compact(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
  return num(v);
}

Table from_scenario_table(const ScenarioTable& t) {
  Table out;
  out.columns = t.columns;
  for (const auto& row : t.rows) {
    std::vector<json> r;
    for (double v : row) r.push_back(compact(v));
    out.rows.push_back(std::move(r));
  }
  return out;
}

json meta(const Globals& g, const Output& o) {
  return {{"tool", "simlab"}, {"version", kVersion}, {"scenario", o.scenario}, {"seed", g.seed}, {"params", o.params}};
}

void write_csv(std::ostream& os, const Globals& g, const Output& o) {
  os << "# simlab version=" << kVersion << " scenario=" << o.scenario << " seed=" << g.seed << "\n";
  os << "# params " << o.params.dump() << "\n";
  os << "# summary " << o.summary.dump() << "\n";
  for (std::size_t i = 0; i < o.table.columns.size(); ++i) os << (i ? "," : "") << csv_cell(o.table.columns[i]);
  os << "\n";
  for (const auto& row : o.table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << "\n";
  }
}

void write_json(std::ostream& os, const Globals& g, const Output& o) {
  json doc;
  doc["meta"] = meta(g, o);
  doc["summary"] = o.summary;
  doc["columns"] = o.table.columns;
  doc["rows"] = json::array();
  for (const auto& row : o.table.rows) doc["rows"].push_back(row);
  os << doc.dump(2) << "\n";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open output file '" + path + "'");
  return f;
}

json normalized(const json& j) {
  if (j.is_number_float()) return compact(j.get<double>());
  if (!j.is_structured()) return j;
  json out = j;
  for (auto it = out.begin(); it != out.end(); ++it) *it = normalized(*it);
  return out;
}

void emit(const Globals& g, Output o) {
  o.params = normalized(o.params);
  if (!g.out.empty()) {
    auto f = open_out(g.out);
    if (g.format == "json")
      write_json(f, g, o);
    else
      write_csv(f, g, o);
  }
  std::string line = "scenario=" + o.scenario;
  for (const char* key : {"estimate", "half_width", "n"})
    if (o.summary.contains(key)) line += std::string(" ") + key + "=" + brief(o.summary[key]);
  line += " seed=" + std::to_string(g.seed);
  std::cout << line << "\n";
  if (g.quiet) return;
  for (const auto& [k, v] : o.summary.items()) {
    if (k == "estimate" || k == "half_width" || k == "n") continue;
    if (v.is_array() && k == "notes") {
      for (const auto& n : v) std::cout << "  # " << n.get<std::string>() << "\n";
      continue;
    }
    std::cout << "  " << k << ": " << (v.is_array() || v.is_object() ? v.dump() : brief(v)) << "\n";
  }
}

void warn(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << "warning: " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Input helpers

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw std::invalid_argument(what + ": '" + text + "' is not a number");
  return v;
}

/// Accepts "k=v" items, each possibly a comma-separated list.
ParamMap parse_kv(const std::vector<std::string>& items) {
  ParamMap out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      const auto eq = part.find('=');
      if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("parameter '" + part + "' must look like key=value");
      out[part.substr(0, eq)] = parse_number(part.substr(eq + 1), "parameter " + part.substr(0, eq));
    }
  }
  return out;
}

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
}

json params_json(const ParamMap& p) {
  json j = json::object();
  for (const auto& [k, v] : p) j[k] = compact(v);
  return j;
}

/// Reads "name" from a JSON object with a fallback; type errors become usage errors.
template <class T>
T field(const json& j, const char* name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + name + "' has the wrong type");
  }
}

template <class T>
T required(const json& j, const char* name) {
  if (!j.contains(name)) throw std::invalid_argument(std::string("missing field '") + name + "'");
  return field<T>(j, name, T{});
}

// ---------------------------------------------------------------------------
// run / list

SnakesBoard load_board(const std::string& path) {
  const json j = load_json(path);
  SnakesBoard b;
  b.size = field<int>(j, "size", 100);
  b.start = field<int>(j, "start", 1);
  b.jumps.clear();
  for (const char* key : {"jumps", "ladders", "snakes"}) {
    if (!j.contains(key)) continue;
    for (const auto& [from, to] : j.at(key).items()) {
      const int f = static_cast<int>(parse_number(from, std::string("board ") + key));
      if (b.jumps.count(f)) throw std::invalid_argument("board: square " + from + " has two jumps");
      b.jumps[f] = to.get<int>();
    }
  }
  b.validate();
  return b;
}

Output scenario_output(const std::string& label, const std::string& name, const ParamMap& given, const Globals& g,
                       const ScenarioContext& ctx = {}) {
  const auto& info = find_scenario(name);
  const auto params = resolve_params(info, given);
  const auto res = info.run(params, ctx, RandomStream(g.seed));
  Output o;
  o.scenario = label;
  o.params = params_json(params.values());
  o.summary["quantity"] = res.quantity;
  o.summary["estimate"] = num(res.estimate.mean);
  o.summary["half_width"] = num(res.estimate.half_width);
  o.summary["n"] = res.estimate.n;
  o.summary["sample_std"] = num(res.estimate.sample_std);
  o.summary["level"] = res.estimate.level;
  for (const auto& [k, v] : res.extras) o.summary[k] = num(v);
  if (!res.notes.empty()) o.summary["notes"] = res.notes;
  o.table = from_scenario_table(res.table);
  return o;
}

void add_count_flag(ParamMap& p, const char* key, std::optional<double> v) {
  if (v) p[key] = *v;
}

// ---------------------------------------------------------------------------
// sample

struct DistInfo {
  ParamMap defaults;
  std::function<std::function<double(RandomStream&)>(const ScenarioParams&)> make;
};

const std::map<std::string, DistInfo>& distributions() {
  using Fn = std::function<double(RandomStream&)>;
  static const std::map<std::string, DistInfo> d{
      {"uniform", {{{"a", 0.0}, {"b", 1.0}}, [](const ScenarioParams& p) -> Fn {
                     return [f = inverse::uniform(p["a"], p["b"])](RandomStream& s) { return sample_inverse_transform(f, s); };
                   }}},
      {"exponential", {{{"rate", 1.0}}, [](const ScenarioParams& p) -> Fn {
                         const double r = p["rate"];
                         if (!(r > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
                         return [r](RandomStream& s) { return sample_exponential(r, s); };
                       }}},
      {"normal", {{{"mean", 0.0}, {"sd", 1.0}}, [](const ScenarioParams& p) -> Fn {
                    const double m = p["mean"], sd = p["sd"];
                    if (!(sd > 0.0)) throw std::invalid_argument("normal: sd must be positive");
                    return [m, sd](RandomStream& s) { return sample_normal(m, sd, s); };
                  }}},
      {"normal_ar", {{}, [](const ScenarioParams&) -> Fn {
                       return [](RandomStream& s) { return sample_normal_ar(s).value; };
                     }}},
      {"bernoulli", {{{"p", 0.5}}, [](const ScenarioParams& p) -> Fn {
                       const double q = p["p"];
                       if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("bernoulli: p must be in [0,1]");
                       return [q](RandomStream& s) { return static_cast<double>(sample_bernoulli(q, s)); };
                     }}},
      {"binomial", {{{"n", 10}, {"p", 0.5}}, [](const ScenarioParams& p) -> Fn {
                      const long n = p.integer("n");
                      const double q = p["p"];
                      return [n, q](RandomStream& s) { return static_cast<double>(sample_binomial_bernoulli_sum(n, q, s)); };
                    }}},
      {"binomial_normal", {{{"n", 100}, {"p", 0.5}}, [](const ScenarioParams& p) -> Fn {
                             const long n = p.integer("n");
                             const double q = p["p"];
                             return [n, q](RandomStream& s) { return static_cast<double>(sample_binomial_normal_approx(n, q, s)); };
                           }}},
      {"poisson", {{{"mean", 1.0}}, [](const ScenarioParams& p) -> Fn {
                     const double m = p["mean"];
                     return [m](RandomStream& s) { return static_cast<double>(sample_poisson(m, s)); };
                   }}},
      {"weibull", {{{"shape", 2.0}, {"scale", 1.0}}, [](const ScenarioParams& p) -> Fn {
                     if (!(p["shape"] > 0.0 && p["scale"] > 0.0))
                       throw std::invalid_argument("weibull: shape and scale must be positive");
                     return [f = inverse::weibull(p["shape"], p["scale"])](RandomStream& s) { return sample_inverse_transform(f, s); };
                   }}},
      {"sine", {{}, [](const ScenarioParams&) -> Fn {
                  return [f = inverse::sine()](RandomStream& s) { return sample_inverse_transform(f, s); };
                }}},
      {"linear", {{}, [](const ScenarioParams&) -> Fn {
                    return [f = inverse::linear_pdf()](RandomStream& s) { return sample_inverse_transform(f, s); };
                  }}},
      {"linear_ar", {{}, [](const ScenarioParams&) -> Fn {
                       return [env = linear_pdf_envelope()](RandomStream& s) { return sample_accept_reject(env, s).value; };
                     }}},
      {"beta_a1", {{{"alpha", 2.0}}, [](const ScenarioParams& p) -> Fn {
                     return [f = inverse::beta_alpha_one(p["alpha"])](RandomStream& s) { return sample_inverse_transform(f, s); };
                   }}},
      {"beta_1b", {{{"beta", 2.0}}, [](const ScenarioParams& p) -> Fn {
                     return [f = inverse::beta_one_beta(p["beta"])](RandomStream& s) { return sample_inverse_transform(f, s); };
                   }}},
      {"semicircle", {{{"radius", 1.0}}, [](const ScenarioParams& p) -> Fn {
                        return [env = semicircle_envelope(p["radius"])](RandomStream& s) { return sample_accept_reject(env, s).value; };
                      }}},
      {"die", {{}, [](const ScenarioParams&) -> Fn {
                 return [d = fair_die()](RandomStream& s) { return static_cast<double>(sample_discrete(d, s)); };
               }}},
      {"uniform_min", {{{"n", 5}}, [](const ScenarioParams& p) -> Fn {
                         const long n = p.integer("n");
                         return [n, f = inverse::uniform(0.0, 1.0)](RandomStream& s) {
                           return sample_ordered_statistic(f, n, OrderStatistic::min, s);
                         };
                       }}},
      {"uniform_max", {{{"n", 5}}, [](const ScenarioParams& p) -> Fn {
                         const long n = p.integer("n");
                         return [n, f = inverse::uniform(0.0, 1.0)](RandomStream& s) {
                           return sample_ordered_statistic(f, n, OrderStatistic::max, s);
                         };
                       }}},
  };
  return d;
}

Output cmd_sample(const Globals& g, const std::string& dist, const ParamMap& given, std::size_t n, std::size_t bins,
                  const std::string& hist_out) {
  const auto& all = distributions();
  const auto it = all.find(dist);
  if (it == all.end()) {
    std::string known;
    for (const auto& [k, v] : all) known += (known.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown distribution '" + dist + "'; known: " + known);
  }
  ScenarioInfo info{dist, "", it->second.defaults, {}};
  const auto params = resolve_params(info, given);
  const auto draw = it->second.make(params);
  RandomStream stream(g.seed);
  std::vector<double> xs;
  xs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) xs.push_back(draw(stream));

  Output o;
  o.scenario = "sample " + dist;
  o.params = params_json(params.values());
  o.params["n"] = n;
  RunningStats s;
  for (double x : xs) s.push(x);
  const auto rep = make_report(s, 0.95);
  o.summary["estimate"] = num(rep.mean);
  o.summary["half_width"] = num(rep.half_width);
  o.summary["n"] = n;
  o.summary["sample_std"] = num(rep.sample_std);
  o.table.columns = {"x"};
  for (double x : xs) o.table.rows.push_back({num(x)});

  if (bins > 0) {
    const auto h = make_histogram(xs, bins);
    Output ho = o;
    ho.params["bins"] = bins;
    ho.table.columns = {"bin", "lower", "upper", "count"};
    ho.table.rows.clear();
    for (std::size_t b = 0; b < bins; ++b)
      ho.table.rows.push_back({b, num(h.edges[b]), num(h.edges[b + 1]), h.counts[b]});
    std::string path = hist_out;
    if (path.empty() && !g.out.empty()) path = g.out + ".hist.csv";
    if (path.empty()) {
      write_csv(std::cout, g, ho);
    } else {
      auto f = open_out(path);
      write_csv(f, g, ho);
    }
    o.summary["histogram_bins"] = bins;
  }
  return o;
}

// ---------------------------------------------------------------------------
// markov

struct ChainSpec {
  TransitionMatrix p;
  std::optional<ProbabilityVector> pi0;
  std::string source;
};

ChainSpec load_chain(const std::string& path, const std::string& builtin) {
  if (!builtin.empty()) {
    static const std::map<std::string, std::function<TransitionMatrix()>> named{
        {"weather", chains::weather},
        {"two_state_weather", chains::two_state_weather},
        {"four_state", chains::four_state},
        {"purchase_funnel", chains::purchase_funnel}};
    const auto it = named.find(builtin);
    if (it == named.end())
      throw std::invalid_argument("unknown built-in chain '" + builtin +
                                  "'; known: four_state, purchase_funnel, two_state_weather, weather");
    return {it->second(), std::nullopt, "builtin:" + builtin};
  }
  if (path.empty()) throw std::invalid_argument("give --chain <file> or --builtin <name>");
  const json j = load_json(path);
  const auto rows = required<std::vector<std::vector<double>>>(j, "P");
  const std::size_t m = rows.size();
  Matrix mat(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    if (rows[i].size() != m) throw std::invalid_argument("chain: P must be square");
    for (std::size_t k = 0; k < m; ++k) mat(i, k) = rows[i][k];
  }
  ChainSpec spec{TransitionMatrix(std::move(mat), field<std::vector<std::string>>(j, "labels", {})), std::nullopt,
                 path};
  if (j.contains("pi0")) {
    auto pi0 = field<std::vector<double>>(j, "pi0", {});
    validate_probability_vector(pi0, m);
    spec.pi0 = std::move(pi0);
  }
  return spec;
}

std::size_t state_index(const TransitionMatrix& p, const std::string& label) {
  const auto& ls = p.labels();
  for (std::size_t i = 0; i < ls.size(); ++i)
    if (ls[i] == label) return i;
  std::string known;
  for (const auto& l : ls) known += (known.empty() ? "" : ", ") + l;
  throw std::invalid_argument("unknown state '" + label + "'; states: " + known);
}

ProbabilityVector initial_distribution(const ChainSpec& c, const std::string& from) {
  if (!from.empty()) return point_mass(c.p.size(), state_index(c.p, from));
  if (c.pi0) return *c.pi0;
  throw std::invalid_argument("no initial distribution: give --from <state> or pi0 in the chain file");
}

void warn_repairs(const Globals& g, const ChainSpec& c) {
  if (c.p.repaired_rows())
    warn(g, std::to_string(c.p.repaired_rows()) + " row(s) of P were renormalized (sum off by < 1e-9)");
}

std::string describe(const TransitionMatrix& p, const ChainClassification& c) {
  std::string out;
  for (std::size_t k = 0; k < c.classes.size(); ++k) {
    out += k ? " {" : "{";
    for (std::size_t i = 0; i < c.classes[k].size(); ++i) out += (i ? "," : "") + p.labels()[c.classes[k][i]];
    out += "}";
  }
  return out;
}

Output markov_base(const std::string& sub, const ChainSpec& c) {
  Output o;
  o.scenario = "markov " + sub;
  o.params["chain"] = c.source;
  o.params["states"] = c.p.labels();
  return o;
}

Output cmd_markov_stationary(const Globals& g, const ChainSpec& c, double tol, long max_iter) {
  warn_repairs(g, c);
  Output o = markov_base("stationary", c);
  o.params["tol"] = tol;
  o.params["max_iter"] = max_iter;
  const auto cls = classify(c.p);
  if (!cls.ergodic)
    throw model_error("chain is not ergodic (classes " + describe(c.p, cls) + (cls.irreducible ? "" : "; reducible") +
                      (cls.aperiodic ? "" : "; periodic") + "); the stationary distribution is not a unique limit");
  StationaryOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  const auto pi = stationary_distribution(c.p, opt);
  const auto next = step_distribution(pi, c.p);
  double residual = 0.0;
  for (std::size_t j = 0; j < pi.size(); ++j) residual = std::max(residual, std::abs(next[j] - pi[j]));
  o.table.columns = {"state", "label", "pi"};
  json dist = json::object();
  for (std::size_t j = 0; j < pi.size(); ++j) {
    o.table.rows.push_back({j, c.p.labels()[j], num(pi[j])});
    dist[c.p.labels()[j]] = num(pi[j]);
  }
  o.summary["stationary"] = dist;
  o.summary["residual"] = num(residual);
  return o;
}

Output cmd_markov_classify(const Globals& g, const ChainSpec& c) {
  warn_repairs(g, c);
  Output o = markov_base("classify", c);
  const auto cls = classify(c.p);
  o.table.columns = {"class", "state", "label", "closed", "period"};
  for (std::size_t k = 0; k < cls.classes.size(); ++k)
    for (std::size_t s : cls.classes[k])
      o.table.rows.push_back({k, s, c.p.labels()[s], cls.closed[k] ? 1 : 0, cls.periods[k]});
  o.summary["classes"] = describe(c.p, cls);
  o.summary["irreducible"] = cls.irreducible;
  o.summary["aperiodic"] = cls.aperiodic;
  o.summary["ergodic"] = cls.ergodic;
  return o;
}

Output cmd_markov_simulate(const Globals& g, const ChainSpec& c, std::size_t steps, const std::string& from) {
  warn_repairs(g, c);
  Output o = markov_base("simulate", c);
  const auto pi0 = initial_distribution(c, from);
  const std::size_t reps = g.reps ? g.reps : 1;
  o.params["steps"] = steps;
  o.params["reps"] = reps;
  if (!from.empty()) o.params["from"] = from;
  o.table.columns = {"rep", "t", "state", "label"};
  std::vector<std::size_t> visits(c.p.size(), 0);
  const RandomStream root(g.seed);
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream local = root.spawn_substream(r);
    const auto xs = generate_chain(pi0, c.p, steps + 1, local);
    for (std::size_t t = 0; t < xs.size(); ++t) {
      o.table.rows.push_back({r, t, xs[t], c.p.labels()[xs[t]]});
      ++visits[xs[t]];
    }
  }
  json occ = json::object();
  const double total = static_cast<double>((steps + 1) * reps);
  for (std::size_t j = 0; j < visits.size(); ++j) occ[c.p.labels()[j]] = num(static_cast<double>(visits[j]) / total);
  o.summary["occupancy"] = occ;
  return o;
}

Output cmd_markov_event(const Globals& g, const ChainSpec& c, std::size_t horizon, const std::string& predicate,
                        std::size_t n, const std::string& from) {
  warn_repairs(g, c);
  Output o = markov_base("event", c);
  const auto pi0 = initial_distribution(c, from);
  const auto colon = predicate.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("predicate must be at:<state>, visit:<state> or avoid:<state>");
  const std::string kind = predicate.substr(0, colon);
  const std::size_t target = state_index(c.p, predicate.substr(colon + 1));
  PathPredicate pred;
  double exact = 0.0;
  if (kind == "at") {
    pred = [target, horizon](std::span<const std::size_t> xs) { return xs[horizon] == target; };
    const auto m = n_step_matrix(c.p, static_cast<long>(horizon));
    for (std::size_t i = 0; i < pi0.size(); ++i) exact += pi0[i] * m(i, target);
  } else if (kind == "visit" || kind == "avoid") {
    // Exact value: make the target absorbing and read its mass at the horizon.
    Matrix a(c.p.size(), c.p.size());
    for (std::size_t i = 0; i < c.p.size(); ++i)
      for (std::size_t k = 0; k < c.p.size(); ++k) a(i, k) = i == target ? (k == target ? 1.0 : 0.0) : c.p(i, k);
    const auto m = n_step_matrix(TransitionMatrix(std::move(a)), static_cast<long>(horizon));
    for (std::size_t i = 0; i < pi0.size(); ++i) exact += pi0[i] * m(i, target);
    const bool visit = kind == "visit";
    if (!visit) exact = 1.0 - exact;
    pred = [target, visit](std::span<const std::size_t> xs) {
      const bool seen = std::find(xs.begin(), xs.end(), target) != xs.end();
      return visit ? seen : !seen;
    };
  } else {
    throw std::invalid_argument("unknown predicate kind '" + kind + "'; use at, visit or avoid");
  }
  o.params["horizon"] = horizon;
  o.params["predicate"] = predicate;
  o.params["n"] = n;
  if (!from.empty()) o.params["from"] = from;
  const auto rep = estimate_chain_event(pi0, c.p, horizon, pred, n, RandomStream(g.seed));
  o.summary["estimate"] = num(rep.mean);
  o.summary["half_width"] = num(rep.half_width);
  o.summary["n"] = n;
  o.summary["exact"] = num(exact);
  o.table.columns = {"estimate", "half_width", "n", "exact"};
  o.table.rows.push_back({num(rep.mean), num(rep.half_width), n, num(exact)});
  return o;
}

// ---------------------------------------------------------------------------
// process

void trajectory_rows(Table& t, const Trajectory<double>& tr) {
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::vector<json> row{num(tr.times[k])};
    for (double v : tr.states[k]) row.push_back(num(v));
    t.rows.push_back(std::move(row));
  }
}

void aggregate(Output& o, const std::vector<double>& values, const std::string& label) {
  RunningStats s;
  for (double v : values) s.push(v);
  o.summary["quantity"] = label;
  o.summary["estimate"] = num(s.mean());
  if (s.count() > 1) {
    const auto rep = make_report(s, 0.95);
    o.summary["half_width"] = num(rep.half_width);
    o.summary["sample_variance"] = num(s.variance());
  }
  o.summary["n"] = s.count();
}

Output cmd_process_walk(const Globals& g, std::size_t dim, double p, std::size_t steps, long x0) {
  Output o;
  o.scenario = "process walk";
  const std::size_t reps = g.reps ? g.reps : 1;
  o.params = {{"dim", dim}, {"p", p}, {"steps", steps}, {"x0", x0}, {"reps", reps}};
  if (dim == 0) throw std::invalid_argument("walk: dim must be positive");
  if (dim > 1 && p != 0.5) throw std::invalid_argument("walk: --p applies to the one-dimensional walk only");
  const RandomStream root(g.seed);
  const auto dirs = symmetric_directions(dim);
  auto one = [&](RandomStream& s) {
    if (dim == 1) return random_walk({p, x0, steps}, s);
    return random_walk_dd(dirs, std::vector<long>(dim, x0), steps, s);
  };
  std::vector<std::string> coords;
  for (std::size_t i = 0; i < dim; ++i) coords.push_back("x" + std::to_string(i + 1));
  if (reps == 1) {
    RandomStream s = root.spawn_substream(0);
    const auto tr = one(s);
    o.table.columns = {"t"};
    o.table.columns.insert(o.table.columns.end(), coords.begin(), coords.end());
    for (std::size_t k = 0; k < tr.size(); ++k) {
      std::vector<json> row{static_cast<std::int64_t>(tr.times[k])};
      for (long v : tr.states[k]) row.push_back(v);
      o.table.rows.push_back(std::move(row));
    }
    o.summary["final"] = tr.states.back();
    return o;
  }
  o.table.columns = {"rep"};
  o.table.columns.insert(o.table.columns.end(), coords.begin(), coords.end());
  o.table.columns.push_back("sq_dist");
  std::vector<double> first, sq;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream s = root.spawn_substream(r);
    const auto fin = one(s).states.back();
    std::vector<json> row{r};
    double d2 = 0.0;
    for (long v : fin) {
      row.push_back(v);
      d2 += static_cast<double>(v - x0) * static_cast<double>(v - x0);
    }
    row.push_back(num(d2));
    o.table.rows.push_back(std::move(row));
    first.push_back(static_cast<double>(fin[0]));
    sq.push_back(d2);
  }
  if (dim == 1) {
    aggregate(o, first, "mean of X_t");
    o.summary["exact_mean"] = num(static_cast<double>(x0) + static_cast<double>(steps) * (2.0 * p - 1.0));
    o.summary["exact_variance"] = num(4.0 * static_cast<double>(steps) * p * (1.0 - p));
  } else {
    aggregate(o, sq, "mean squared distance");
    o.summary["exact"] = num(static_cast<double>(steps));
  }
  return o;
}

Output cmd_process_wiener(const Globals& g, std::size_t dim, double dt, double t_end) {
  Output o;
  o.scenario = "process wiener";
  const std::size_t reps = g.reps ? g.reps : 1;
  o.params = {{"dim", dim}, {"dt", dt}, {"t_end", t_end}, {"reps", reps}};
  const auto grid = uniform_grid(0.0, t_end, dt);
  const RandomStream root(g.seed);
  std::vector<std::string> coords;
  for (std::size_t i = 0; i < dim; ++i) coords.push_back("w" + std::to_string(i + 1));
  if (reps == 1) {
    RandomStream s = root.spawn_substream(0);
    const auto tr = wiener_path(grid, dim, s);
    o.table.columns = {"t"};
    o.table.columns.insert(o.table.columns.end(), coords.begin(), coords.end());
    trajectory_rows(o.table, tr);
    o.summary["final"] = tr.states.back();
    return o;
  }
  o.table.columns = {"rep"};
  o.table.columns.insert(o.table.columns.end(), coords.begin(), coords.end());
  std::vector<double> first;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream s = root.spawn_substream(r);
    const auto fin = wiener_path(grid, dim, s).states.back();
    std::vector<json> row{r};
    for (double v : fin) row.push_back(num(v));
    o.table.rows.push_back(std::move(row));
    first.push_back(fin[0]);
  }
  aggregate(o, first, "mean of W_1(t_end)");
  o.summary["exact_variance"] = num(t_end);
  return o;
}

DiffusionSpec diffusion_model(const std::string& model, const ScenarioParams& p) {
  DiffusionSpec spec;
  if (model == "gbm") {
    const double mu = p["mu"], sigma = p["sigma"];
    spec.drift = [mu](double, double x) { return mu * x; };
    spec.diffusion = [sigma](double, double x) { return sigma * x; };
  } else if (model == "ou") {
    const double theta = p["theta"], mean = p["mean"], sigma = p["sigma"];
    spec.drift = [theta, mean](double, double x) { return theta * (mean - x); };
    spec.diffusion = [sigma](double, double) { return sigma; };
  } else if (model == "bm") {
    const double drift = p["drift"], sigma = p["sigma"];
    spec.drift = [drift](double, double) { return drift; };
    spec.diffusion = [sigma](double, double) { return sigma; };
  } else {
    const double lambda = p["lambda"];
    spec.drift = [lambda](double, double x) { return -lambda * x; };
  }
  return spec;
}

Output cmd_process_diffusion(const Globals& g, const std::string& model, const ParamMap& given, double x0, double t0,
                             double t_end, double dt) {
  static const std::map<std::string, ParamMap> models{{"gbm", {{"mu", 0.05}, {"sigma", 0.2}}},
                                                      {"ou", {{"theta", 1.0}, {"mean", 0.0}, {"sigma", 0.3}}},
                                                      {"bm", {{"drift", 0.0}, {"sigma", 1.0}}},
                                                      {"decay", {{"lambda", 0.5}}}};
  const auto it = models.find(model);
  if (it == models.end()) throw std::invalid_argument("unknown diffusion model '" + model + "'; known: bm, decay, gbm, ou");
  const auto params = resolve_params(ScenarioInfo{model, "", it->second, {}}, given);
  DiffusionSpec spec = diffusion_model(model, params);
  spec.x0 = x0;
  spec.t0 = t0;
  spec.t_end = t_end;
  spec.dt = dt;
  Output o;
  o.scenario = "process diffusion " + model;
  const std::size_t reps = g.reps ? g.reps : 1;
  o.params = params_json(params.values());
  o.params["x0"] = x0;
  o.params["t0"] = t0;
  o.params["t_end"] = t_end;
  o.params["dt"] = dt;
  o.params["reps"] = reps;
  const RandomStream root(g.seed);
  if (reps == 1) {
    RandomStream s = root.spawn_substream(0);
    const auto tr = euler_maruyama(spec, s);
    o.table.columns = {"t", "x"};
    trajectory_rows(o.table, tr);
    o.summary["final"] = num(tr.states.back()[0]);
    return o;
  }
  o.table.columns = {"rep", "x_t"};
  std::vector<double> fin;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream s = root.spawn_substream(r);
    fin.push_back(euler_maruyama_terminal(spec, s));
    o.table.rows.push_back({r, num(fin.back())});
  }
  aggregate(o, fin, "mean of X(t_end)");
  return o;
}

// ---------------------------------------------------------------------------
// ssa

struct LoadedModel {
  std::string name;
  ReactionSystem system;
  OdeRhs ode;
  State initial;
  double t_final = 1.0;
  ParamMap rates;
};

LoadedModel builtin_model(const std::string& name, const ParamMap& given) {
  static const std::map<std::string, ParamMap> defaults{
      {"sir", {{"mu", 1e-4}, {"beta", 0.25}, {"gamma", 0.05}}},
      {"michaelis_menten", {{"c1", 0.002}, {"c2", 0.1}, {"c3", 0.75}}},
      {"lotka_volterra", {{"alpha", 1.0}, {"beta", 0.005}, {"gamma", 0.6}}},
      {"decay", {{"lambda", 0.5}}}};
  const auto it = defaults.find(name);
  if (it == defaults.end())
    throw std::invalid_argument("unknown model '" + name +
                                "'; built-in models: decay, lotka_volterra, michaelis_menten, sir (or a JSON file)");
  const auto p = resolve_params(ScenarioInfo{name, "", it->second, {}}, given);
  KineticModel m;
  if (name == "sir") m = models::sir(p["mu"], p["beta"], p["gamma"]);
  else if (name == "michaelis_menten") m = models::michaelis_menten(p["c1"], p["c2"], p["c3"]);
  else if (name == "lotka_volterra") m = models::lotka_volterra(p["alpha"], p["beta"], p["gamma"]);
  else m = models::decay(p["lambda"]);
  if (name == "sir") m.t_final = 60.0;
  return {name, m.system, m.ode, m.initial, m.t_final, p.values()};
}

/// Model file: species, rates, initial counts and mass-action reactions with
/// reactant orders and state changes keyed by species name.
LoadedModel file_model(const std::string& path, const ParamMap& given) {
  const json j = load_json(path);
  LoadedModel m;
  m.name = field<std::string>(j, "name", fs::path(path).stem().string());
  const auto species = required<std::vector<std::string>>(j, "species");
  if (species.empty()) throw std::invalid_argument("model: species list is empty");
  auto index = [&species](const std::string& s) {
    for (std::size_t i = 0; i < species.size(); ++i)
      if (species[i] == s) return i;
    throw std::invalid_argument("model: unknown species '" + s + "'");
  };
  ParamMap rates = field<ParamMap>(j, "rates", {});
  for (const auto& [k, v] : given) {
    if (!rates.count(k)) throw std::invalid_argument("model has no rate constant '" + k + "'");
    rates[k] = v;
  }
  std::vector<MassActionReaction> rx;
  for (const auto& r : required<json>(j, "reactions")) {
    MassActionReaction mr;
    const json& rate = r.at("rate");
    if (rate.is_string()) {
      const auto name = rate.get<std::string>();
      if (!rates.count(name)) throw std::invalid_argument("model: reaction uses undefined rate '" + name + "'");
      mr.rate = rates[name];
    } else {
      mr.rate = rate.get<double>();
    }
    mr.reactant_orders.assign(species.size(), 0);
    mr.state_change.assign(species.size(), 0);
    const json reactants = field<json>(r, "reactants", json::object());
    const json change = field<json>(r, "change", json::object());
    for (const auto& [s, k] : reactants.items()) mr.reactant_orders[index(s)] = k.get<long>();
    for (const auto& [s, v] : change.items()) mr.state_change[index(s)] = v.get<long>();
    rx.push_back(std::move(mr));
  }
  m.system = mass_action_system(species, rx, rates);
  m.ode = mass_action_ode(rx, species.size());
  m.initial.assign(species.size(), 0);
  const json initial = field<json>(j, "initial", json::object());
  for (const auto& [s, v] : initial.items()) m.initial[index(s)] = v.get<long>();
  m.t_final = field<double>(j, "t_final", 1.0);
  m.rates = rates;
  return m;
}

LoadedModel load_model(const std::string& spec, const ParamMap& rates, const ParamMap& init) {
  const bool is_file = spec.ends_with(".json") || fs::exists(spec);
  LoadedModel m = is_file ? file_model(spec, rates) : builtin_model(spec, rates);
  for (const auto& [k, v] : init) {
    std::size_t i = 0;
    while (i < m.system.species.size() && m.system.species[i] != k) ++i;
    if (i == m.system.species.size()) throw std::invalid_argument("--init: model has no species '" + k + "'");
    if (v < 0 || v != std::floor(v)) throw std::invalid_argument("--init: counts must be non-negative integers");
    m.initial[i] = static_cast<long>(v);
  }
  return m;
}

Output ssa_base(const std::string& sub, const LoadedModel& m, double t_final) {
  Output o;
  o.scenario = "ssa " + sub + " " + m.name;
  o.params = params_json(m.rates);
  json init = json::object();
  for (std::size_t i = 0; i < m.initial.size(); ++i) init[m.system.species[i]] = m.initial[i];
  o.params["initial"] = init;
  o.params["t_final"] = t_final;
  return o;
}

/// Stochastic ensemble (exact SSA, or tau-leaping when tau > 0).
Output cmd_ssa_stochastic(const Globals& g, const LoadedModel& m, double t_final, double grid_dt, double tau) {
  const bool leap = tau > 0.0;
  Output o = ssa_base(leap ? "tau-leap" : "run", m, t_final);
  const std::size_t reps = g.reps ? g.reps : 1;
  o.params["reps"] = reps;
  if (leap) o.params["tau"] = tau;
  if (grid_dt > 0.0) o.params["grid"] = grid_dt;
  const auto& sp = m.system.species;
  const RandomStream root(g.seed);
  auto simulate = [&](RandomStream& s, std::size_t& clamps) {
    if (!leap) return run_ssa(m.system, m.initial, t_final, s);
    auto r = run_tau_leap(m.system, m.initial, t_final, tau, s);
    clamps += r.clamps;
    return r.trajectory;
  };
  std::size_t clamps = 0;
  if (reps == 1 && grid_dt <= 0.0) {
    RandomStream s = root.spawn_substream(0);
    const auto tr = simulate(s, clamps);
    o.table.columns = {"t"};
    o.table.columns.insert(o.table.columns.end(), sp.begin(), sp.end());
    for (std::size_t k = 0; k < tr.size(); ++k) {
      std::vector<json> row{num(tr.times[k])};
      for (long v : tr.states[k]) row.push_back(v);
      o.table.rows.push_back(std::move(row));
    }
    o.summary["events"] = tr.size() - 1;
    o.summary["final"] = tr.states.back();
    if (leap) o.summary["clamps"] = clamps;
    return o;
  }
  const double dt = grid_dt > 0.0 ? grid_dt : t_final / 100.0;
  const auto grid = uniform_grid(0.0, t_final, dt);
  std::vector<std::vector<RunningStats>> acc(grid.size(), std::vector<RunningStats>(sp.size()));
  std::vector<RunningStats> finals(sp.size());
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream s = root.spawn_substream(r);
    const auto tr = simulate(s, clamps);
    const auto vals = resample_on_grid(tr, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (std::size_t i = 0; i < sp.size(); ++i) acc[k][i].push(static_cast<double>(vals[k][i]));
    for (std::size_t i = 0; i < sp.size(); ++i) finals[i].push(static_cast<double>(tr.states.back()[i]));
  }
  o.table.columns = {"t"};
  for (const auto& s : sp) o.table.columns.push_back("mean_" + s);
  for (const auto& s : sp) o.table.columns.push_back("sd_" + s);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<json> row{num(grid[k])};
    for (const auto& a : acc[k]) row.push_back(num(a.mean()));
    for (const auto& a : acc[k]) row.push_back(num(a.stddev()));
    o.table.rows.push_back(std::move(row));
  }
  json fm = json::object();
  for (std::size_t i = 0; i < sp.size(); ++i) fm[sp[i]] = num(finals[i].mean());
  o.summary["n"] = reps;
  o.summary["final_mean"] = fm;
  if (leap) o.summary["clamps"] = clamps;
  return o;
}

Output cmd_ssa_ode(const LoadedModel& m, double t_final, double dt, double grid_dt) {
  Output o = ssa_base("ode", m, t_final);
  if (dt <= 0.0) dt = 1e-3 * t_final;
  o.params["dt"] = dt;
  if (grid_dt > 0.0) o.params["grid"] = grid_dt;
  std::vector<double> y0(m.initial.begin(), m.initial.end());
  const auto tr = run_deterministic(m.ode, y0, 0.0, t_final, dt);
  const auto& sp = m.system.species;
  o.table.columns = {"t"};
  o.table.columns.insert(o.table.columns.end(), sp.begin(), sp.end());
  if (grid_dt > 0.0) {
    const auto grid = uniform_grid(0.0, t_final, grid_dt);
    std::size_t k = 0;
    for (double t : grid) {
      while (k + 1 < tr.size() && tr.times[k + 1] <= t + 1e-9 * dt) ++k;
      std::vector<json> row{num(t)};
      for (double v : tr.states[k]) row.push_back(num(v));
      o.table.rows.push_back(std::move(row));
    }
  } else {
    trajectory_rows(o.table, tr);
  }
  json fin = json::object();
  for (std::size_t i = 0; i < sp.size(); ++i) fin[sp[i]] = num(tr.states.back()[i]);
  o.summary["final"] = fin;
  o.summary["steps"] = tr.size() - 1;
  return o;
}

// ---------------------------------------------------------------------------
// mcmc

std::vector<double> load_data(const json& term, const fs::path& base) {
  if (term.contains("data")) return term.at("data").get<std::vector<double>>();
  if (!term.contains("data_path")) throw std::invalid_argument("likelihood term needs 'data' or 'data_path'");
  fs::path p = term.at("data_path").get<std::string>();
  if (p.is_relative()) p = base / p;
  std::ifstream f(p);
  if (!f) throw std::invalid_argument("cannot open data file '" + p.string() + "'");
  std::vector<double> out;
  std::string tok;
  while (f >> tok) {
    for (char& c : tok)
      if (c == ',') c = ' ';
    std::stringstream ss(tok);
    std::string piece;
    while (ss >> piece) out.push_back(parse_number(piece, "data file " + p.string()));
  }
  return out;
}

std::vector<std::size_t> term_indices(const json& term, std::size_t need, std::size_t dim) {
  std::vector<std::size_t> idx;
  if (term.contains("params"))
    idx = term.at("params").get<std::vector<std::size_t>>();
  else if (term.contains("param"))
    idx = {term.at("param").get<std::size_t>()};
  else
    for (std::size_t i = 0; i < need; ++i) idx.push_back(i);
  if (idx.size() != need) throw std::invalid_argument("term '" + term.value("name", std::string()) + "' needs " +
                                                      std::to_string(need) + " parameter index(es)");
  for (auto i : idx)
    if (i >= dim) throw std::invalid_argument("parameter index " + std::to_string(i) + " is out of range");
  return idx;
}

LogDensityFn likelihood_term(const json& term, const fs::path& base, std::size_t dim) {
  const auto name = required<std::string>(term, "name");
  const auto data = load_data(term, base);
  if (name == "exponential") {
    const auto i = term_indices(term, 1, dim)[0];
    return [data, i](std::span<const double> th) { return logpdf::exponential_sample(data, th[i]); };
  }
  if (name == "normal") {
    const auto idx = term_indices(term, 2, dim);
    return [data, idx](std::span<const double> th) {
      const double mu = th[idx[0]], sigma = th[idx[1]];
      if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
      double s = 0.0;
      for (double x : data) s += logpdf::normal(x, mu, sigma);
      return s;
    };
  }
  throw std::invalid_argument("unknown likelihood '" + name + "'; known: exponential, normal");
}

LogDensityFn prior_term(const json& term, std::size_t dim) {
  const auto name = required<std::string>(term, "name");
  const auto i = term_indices(term, 1, dim)[0];
  const bool square = field<std::string>(term, "of", "value") == "square";
  auto arg = [i, square](std::span<const double> th) { return square ? th[i] * th[i] : th[i]; };
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (name == "gamma") {
    const double a = required<double>(term, "shape"), b = required<double>(term, "rate");
    return [=](std::span<const double> th) { return logpdf::gamma(arg(th), a, b); };
  }
  if (name == "inverse_gamma") {
    const double a = required<double>(term, "shape"), b = required<double>(term, "scale");
    return [=](std::span<const double> th) {
      // a squared coordinate still needs the coordinate itself positive
      if (square && !(th[i] > 0.0)) return kNegInf;
      return logpdf::inverse_gamma(arg(th), a, b);
    };
  }
  if (name == "normal") {
    const double m = required<double>(term, "mean"), sd = required<double>(term, "sd");
    return [=](std::span<const double> th) { return logpdf::normal(arg(th), m, sd); };
  }
  if (name == "exponential") {
    const double r = required<double>(term, "rate");
    return [=](std::span<const double> th) {
      const double x = arg(th);
      return x >= 0.0 ? std::log(r) - r * x : kNegInf;
    };
  }
  if (name == "uniform") {
    const double lo = required<double>(term, "lower"), hi = required<double>(term, "upper");
    return [=](std::span<const double> th) {
      const double x = arg(th);
      return x >= lo && x <= hi ? -std::log(hi - lo) : kNegInf;
    };
  }
  if (name == "positive") {
    return [i](std::span<const double> th) { return th[i] > 0.0 ? 0.0 : kNegInf; };
  }
  throw std::invalid_argument("unknown prior '" + name + "'; known: exponential, gamma, inverse_gamma, normal, positive, uniform");
}

Output cmd_mcmc_run(const Globals& g, const std::string& study_path, const std::string& summary_path) {
  const json st = load_json(study_path);
  const fs::path base = fs::path(study_path).parent_path();
  const auto theta0 = required<std::vector<double>>(st, "theta0");
  const std::size_t dim = theta0.size();
  if (dim == 0) throw std::invalid_argument("study: theta0 is empty");
  const auto n = field<std::size_t>(st, "n", 10000);
  const auto burn_in = field<std::size_t>(st, "burn_in", n / 10);
  const auto thin = field<std::size_t>(st, "thin", 1);
  const auto chains = g.reps ? g.reps : field<std::size_t>(st, "chains", 1);
  if (thin == 0) throw std::invalid_argument("study: thin must be positive");
  const auto cov = required<std::vector<std::vector<double>>>(st, "proposal_cov");
  if (cov.size() != dim) throw std::invalid_argument("study: proposal_cov must be d x d");
  Matrix sigma(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (cov[i].size() != dim) throw std::invalid_argument("study: proposal_cov must be d x d");
    for (std::size_t k = 0; k < dim; ++k) sigma(i, k) = cov[i][k];
  }
  std::vector<std::string> names = field<std::vector<std::string>>(st, "parameters", {});
  if (names.empty())
    for (std::size_t i = 0; i < dim; ++i) names.push_back("theta" + std::to_string(i + 1));
  if (names.size() != dim) throw std::invalid_argument("study: one parameter name per coordinate");

  TargetDensity target;
  target.dim = dim;
  const auto builtin = field<std::string>(st, "target", "");
  if (builtin == "bivariate_example") {
    if (dim != 2) throw std::invalid_argument("study: bivariate_example is two-dimensional");
    target.log_density = bivariate_example_log_density;
  } else if (!builtin.empty()) {
    throw std::invalid_argument("unknown built-in target '" + builtin + "'; known: bivariate_example");
  } else {
    std::vector<LogDensityFn> lik, pri;
    for (const auto& t : field<json>(st, "likelihood", json::array())) lik.push_back(likelihood_term(t, base, dim));
    for (const auto& t : field<json>(st, "prior", json::array())) pri.push_back(prior_term(t, dim));
    if (lik.empty() && pri.empty()) throw std::invalid_argument("study: needs a target, likelihood or prior");
    target.log_density = [lik, pri](std::span<const double> th) {
      double s = 0.0;
      for (const auto& f : pri) {
        s += f(th);
        if (s == -std::numeric_limits<double>::infinity()) return s;
      }
      for (const auto& f : lik) s += f(th);
      return s;
    };
  }

  Output o;
  o.scenario = "mcmc run " + field<std::string>(st, "name", fs::path(study_path).stem().string());
  o.params = {{"study", study_path}, {"n", n}, {"burn_in", burn_in}, {"thin", thin}, {"chains", chains},
              {"theta0", theta0}, {"proposal_cov", cov}};
  o.table.columns = {"chain", "draw"};
  o.table.columns.insert(o.table.columns.end(), names.begin(), names.end());
  std::vector<RunningStats> pooled(dim);
  std::size_t accepted = 0, proposals = 0;
  json per_chain = json::array();
  const RandomStream root(g.seed);
  for (std::size_t c = 0; c < chains; ++c) {
    RandomStream s = root.spawn_substream(c);
    const auto run = mh_chain(target, ProposalKernel::random_walk(sigma), theta0, n, s, burn_in);
    accepted += run.accepted;
    proposals += run.proposals;
    for (std::size_t i = run.burn_in; i < run.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) pooled[j].push(run(i, j));
      if ((i - run.burn_in) % thin) continue;
      std::vector<json> row{c, i};
      for (std::size_t j = 0; j < dim; ++j) row.push_back(num(run(i, j)));
      o.table.rows.push_back(std::move(row));
    }
    per_chain.push_back({{"chain", c}, {"acceptance_ratio", num(run.acceptance_ratio())}});
  }
  json coords = json::object();
  for (std::size_t j = 0; j < dim; ++j) {
    const auto rep = make_report(pooled[j], 0.95);
    coords[names[j]] = {{"mean", num(rep.mean)}, {"std", num(rep.sample_std)}, {"half_width", num(rep.half_width)}};
  }
  const auto first = make_report(pooled[0], 0.95);
  o.summary["quantity"] = "posterior mean of " + names[0];
  o.summary["estimate"] = num(first.mean);
  o.summary["half_width"] = num(first.half_width);
  o.summary["n"] = first.n;
  o.summary["acceptance_ratio"] = num(proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0);
  o.summary["posterior"] = coords;
  o.summary["notes"] = std::vector<std::string>{"half_width treats post-burn-in draws as independent"};
  if (chains > 1) o.summary["chains"] = per_chain;

  if (!summary_path.empty()) {
    auto f = open_out(summary_path);
    json doc{{"meta", meta(g, o)}, {"summary", o.summary}};
    f << doc.dump(2) << "\n";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simlab: seeded stochastic simulation toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "root seed (default 0)");
  app.add_option("--out", g.out, "output file for the result table");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--reps", g.reps, "replications / independent runs")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "print only the summary line");

  std::function<Output()> action;

  // run / list
  auto* run = app.add_subcommand("run", "run a named scenario");
  std::string scenario, board;
  std::optional<double> run_n;
  std::vector<std::string> run_params;
  run->add_option("--scenario", scenario, "scenario name (see `simlab list`)")->required();
  run->add_option("--n", run_n, "sample size (sets parameter n)");
  run->add_option("--params", run_params, "scenario parameters key=value")->take_all();
  run->add_option("--board", board, "snakes-and-ladders board file");
  run->callback([&] {
    action = [&] {
      ParamMap p = parse_kv(run_params);
      add_count_flag(p, "n", run_n);
      if (g.reps) p["reps"] = static_cast<double>(g.reps);
      ScenarioContext ctx;
      if (!board.empty()) ctx.board = load_board(board);
      return scenario_output(scenario, scenario, p, g, ctx);
    };
  });

  auto* list = app.add_subcommand("list", "list scenarios and their default parameters");
  list->callback([&] {
    action = [&] {
      for (const auto& s : scenario_registry()) {
        std::cout << s.name << "  " << s.summary << "\n   ";
        for (const auto& [k, v] : s.defaults) std::cout << " " << k << "=" << full(v);
        std::cout << "\n";
      }
      return Output{};
    };
  });

  // sample
  auto* sample = app.add_subcommand("sample", "draw variates from a distribution");
  std::string dist;
  std::vector<std::string> dist_params;
  std::size_t sample_n = 10000, bins = 0;
  std::string hist_out;
  sample->add_option("--dist", dist, "distribution name")->required();
  sample->add_option("--params", dist_params, "distribution parameters key=value")->take_all();
  sample->add_option("--n", sample_n, "number of variates")->check(CLI::PositiveNumber);
  sample->add_option("--hist", bins, "also write a histogram with this many bins");
  sample->add_option("--hist-out", hist_out, "histogram file (default <out>.hist.csv)");
  sample->callback([&] { action = [&] { return cmd_sample(g, dist, parse_kv(dist_params), sample_n, bins, hist_out); }; });

  // integrate
  auto* integrate = app.add_subcommand("integrate", "Monte Carlo integration scenarios");
  std::string integrand;
  std::optional<double> int_n, int_level;
  std::vector<std::string> int_params;
  integrate->add_option("--scenario", integrand, "mc_sin, mc_pi, mc_expquad, normal_cdf_naive, normal_cdf_importance, normal_cauchy_delta")
      ->required()
      ->check(CLI::IsMember({"mc_sin", "mc_pi", "mc_expquad", "normal_cdf_naive", "normal_cdf_importance",
                             "normal_cauchy_delta"}));
  integrate->add_option("--n", int_n, "sample size");
  integrate->add_option("--level", int_level, "confidence level");
  integrate->add_option("--params", int_params, "extra parameters key=value")->take_all();
  integrate->callback([&] {
    action = [&] {
      ParamMap p = parse_kv(int_params);
      add_count_flag(p, "n", int_n);
      add_count_flag(p, "level", int_level);
      if (g.reps) p["reps"] = static_cast<double>(g.reps);
      return scenario_output("integrate " + integrand, integrand, p, g);
    };
  });

  // markov
  auto* markov = app.add_subcommand("markov", "finite Markov chains");
  markov->require_subcommand(1);
  std::string chain_file, builtin_chain, from;
  auto add_chain_opts = [&](CLI::App* sub) {
    sub->add_option("--chain", chain_file, "chain file {labels, P, pi0}");
    sub->add_option("--builtin", builtin_chain, "built-in chain: weather, two_state_weather, four_state, purchase_funnel");
  };
  double tol = 1e-10;
  long max_iter = 1'000'000;
  auto* stationary = markov->add_subcommand("stationary", "stationary distribution by power iteration");
  add_chain_opts(stationary);
  stationary->add_option("--tol", tol, "residual tolerance");
  stationary->add_option("--max-iter", max_iter, "iteration limit");
  stationary->callback([&] {
    action = [&] { return cmd_markov_stationary(g, load_chain(chain_file, builtin_chain), tol, max_iter); };
  });
  auto* classify_cmd = markov->add_subcommand("classify", "communicating classes, periods and ergodicity");
  add_chain_opts(classify_cmd);
  classify_cmd->callback([&] { action = [&] { return cmd_markov_classify(g, load_chain(chain_file, builtin_chain)); }; });
  std::size_t steps = 100;
  auto* simulate = markov->add_subcommand("simulate", "generate chain realizations");
  add_chain_opts(simulate);
  simulate->add_option("--steps", steps, "number of transitions");
  simulate->add_option("--from", from, "start state (overrides pi0)");
  simulate->callback([&] {
    action = [&] { return cmd_markov_simulate(g, load_chain(chain_file, builtin_chain), steps, from); };
  });
  std::size_t horizon = 5, event_n = 10000;
  std::string predicate;
  auto* event = markov->add_subcommand("event", "Monte Carlo probability of a path event");
  add_chain_opts(event);
  event->add_option("--horizon", horizon, "path length in steps")->check(CLI::PositiveNumber);
  event->add_option("--predicate", predicate, "at:<state>, visit:<state> or avoid:<state>")->required();
  event->add_option("--n", event_n, "number of simulated paths")->check(CLI::Range(2ul, 1ul << 40));
  event->add_option("--from", from, "start state (overrides pi0)");
  event->callback([&] {
    action = [&] { return cmd_markov_event(g, load_chain(chain_file, builtin_chain), horizon, predicate, event_n, from); };
  });

  // process
  auto* process = app.add_subcommand("process", "random walks, Wiener paths and diffusions");
  process->require_subcommand(1);
  std::size_t dim = 1, walk_steps = 100;
  double walk_p = 0.5;
  long x0_int = 0;
  auto* walk = process->add_subcommand("walk", "random walk on Z^d");
  walk->add_option("--dim", dim, "dimension");
  walk->add_option("--p", walk_p, "probability of a +1 step (d = 1)");
  walk->add_option("--steps", walk_steps, "number of steps");
  walk->add_option("--x0", x0_int, "start coordinate");
  walk->callback([&] { action = [&] { return cmd_process_walk(g, dim, walk_p, walk_steps, x0_int); }; });

  double dt = 0.01, t0 = 0.0, t_end = 1.0, x0 = 1.0;
  auto* wiener = process->add_subcommand("wiener", "Wiener process paths");
  wiener->add_option("--dim", dim, "dimension");
  wiener->add_option("--dt", dt, "time step");
  wiener->add_option("--t-end", t_end, "final time");
  wiener->callback([&] { action = [&] { return cmd_process_wiener(g, dim, dt, t_end); }; });

  std::string diff_model = "gbm";
  std::vector<std::string> diff_params;
  auto* diffusion = process->add_subcommand("diffusion", "Euler-Maruyama integration of an SDE");
  diffusion->add_option("--model", diff_model, "gbm, ou, bm or decay (no noise)");
  diffusion->add_option("--params", diff_params, "model parameters key=value")->take_all();
  diffusion->add_option("--x0", x0, "initial value");
  diffusion->add_option("--t0", t0, "start time");
  diffusion->add_option("--t-end", t_end, "final time");
  diffusion->add_option("--dt", dt, "time step");
  diffusion->callback([&] {
    action = [&] { return cmd_process_diffusion(g, diff_model, parse_kv(diff_params), x0, t0, t_end, dt); };
  });

  std::vector<std::string> proc_params;
  std::optional<double> proc_n;
  auto scenario_sub = [&](const char* name, const char* help, const char* target) {
    auto* sub = process->add_subcommand(name, help);
    sub->add_option("--n", proc_n, "number of simulated paths");
    sub->add_option("--params", proc_params, "parameters key=value")->take_all();
    sub->callback([&, name, target] {
      action = [&, name, target] {
        ParamMap p = parse_kv(proc_params);
        add_count_flag(p, "n", proc_n);
        return scenario_output(std::string("process ") + name, target, p, g);
      };
    });
  };
  scenario_sub("ruin", "gambler's ruin probability (k, target, p)", "gamblers_ruin");
  scenario_sub("hitting", "Brownian exit time from a box (dim, half_width, dt)", "brownian_hitting");
  scenario_sub("option", "European call by Monte Carlo (s0, strike, rate, sigma, maturity, dt)", "european_call");

  // ssa
  auto* ssa = app.add_subcommand("ssa", "Gillespie simulation, tau-leaping and rate equations");
  ssa->require_subcommand(1);
  std::string model = "sir";
  std::vector<std::string> rate_params, init_params;
  std::optional<double> tfinal;
  double grid_dt = 0.0, tau = 0.0, ode_dt = 0.0;
  auto add_model_opts = [&](CLI::App* sub) {
    sub->add_option("--model", model, "sir, michaelis_menten, lotka_volterra, decay or a model JSON file");
    sub->add_option("--params", rate_params, "rate constants key=value")->take_all();
    sub->add_option("--init", init_params, "initial counts species=value")->take_all();
    sub->add_option("--tfinal", tfinal, "final time");
    sub->add_option("--grid", grid_dt, "report on a grid with this spacing");
  };
  auto model_and_time = [&] {
    auto m = load_model(model, parse_kv(rate_params), parse_kv(init_params));
    const double tf = tfinal ? *tfinal : m.t_final;
    if (!(tf > 0.0)) throw std::invalid_argument("--tfinal must be positive");
    return std::pair{m, tf};
  };
  auto* ssa_run = ssa->add_subcommand("run", "exact stochastic simulation");
  add_model_opts(ssa_run);
  ssa_run->callback([&] {
    action = [&] {
      auto [m, tf] = model_and_time();
      return cmd_ssa_stochastic(g, m, tf, grid_dt, 0.0);
    };
  });
  auto* ssa_leap = ssa->add_subcommand("tau-leap", "fixed-step tau-leaping");
  add_model_opts(ssa_leap);
  ssa_leap->add_option("--tau", tau, "leap size")->required()->check(CLI::PositiveNumber);
  ssa_leap->callback([&] {
    action = [&] {
      auto [m, tf] = model_and_time();
      return cmd_ssa_stochastic(g, m, tf, grid_dt, tau);
    };
  });
  auto* ssa_ode = ssa->add_subcommand("ode", "RK4 on the rate equations");
  add_model_opts(ssa_ode);
  ssa_ode->add_option("--dt", ode_dt, "RK4 step (default 1e-3 * tfinal)");
  ssa_ode->callback([&] {
    action = [&] {
      auto [m, tf] = model_and_time();
      return cmd_ssa_ode(m, tf, ode_dt, grid_dt);
    };
  });

  // mcmc
  auto* mcmc = app.add_subcommand("mcmc", "Metropolis-Hastings studies");
  mcmc->require_subcommand(1);
  std::string study, summary_path;
  auto* mcmc_run = mcmc->add_subcommand("run", "run a study file");
  mcmc_run->add_option("--study", study, "study JSON file")->required();
  mcmc_run->add_option("--summary", summary_path, "write posterior summary JSON here");
  mcmc_run->callback([&] { action = [&] { return cmd_mcmc_run(g, study, summary_path); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    Output o = action();
    if (!list->parsed()) emit(g, o);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const model_error& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "error: bad configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
