// entrograph: entropy profiles, coding counts, growth-order utilities and
// the acceptance suites from the command line.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "entrograph/acceptance.hpp"
#include "entrograph/coding.hpp"
#include "entrograph/config.hpp"
#include "entrograph/entropy.hpp"
#include "entrograph/expression.hpp"
#include "entrograph/format.hpp"
#include "json.hpp"

using namespace entrograph;
using nlohmann::json;

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kUnstable = 2, kUnknownSystem = 3, kInvalidConfig = 4, kFamilyFailure = 5 };

// Shortest double that prints as the nine-digit form, null when not finite.
json real9(double x) {
  if (!std::isfinite(x)) return nullptr;
  return std::stod(format_real(x));
}

std::string seconds_since(std::chrono::steady_clock::time_point t0) {
  return format_real(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

json class_json(const std::optional<GrowthClass>& c) {
  if (!c) return nullptr;
  return {{"label", to_string(c->label)},
          {"degree", real9(c->degree)},
          {"rate", real9(c->rate)},
          {"residual", real9(c->fit_residual)}};
}

std::string count_text(long double v) { return std::to_string(static_cast<unsigned long long>(v)); }

void emit(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfig("cannot write " + path);
  out << content;
}

// Options of a subcommand that may also come from --config.
struct Command {
  CLI::App* app = nullptr;
  std::set<std::string> keys;
  Settings flags;
  std::string config_path;

  void option(const std::string& key, const std::string& help) {
    keys.insert(key);
    app->add_option("--" + key, flags[key], help);
  }

  void flag(const std::string& key, const std::string& help) {
    keys.insert(key);
    app->add_flag("--" + key, flag_values[key], help);
  }

  // config file values, then flags given on the command line
  Settings resolve() {
    Settings s;
    if (!config_path.empty()) {
      s = load_settings(config_path);
      reject_unknown(s, keys);
    }
    for (const auto& key : keys) {
      auto* opt = app->get_option("--" + key);
      if (opt->count() == 0) continue;
      s[key] = flag_values.count(key) ? "true" : flags[key];
    }
    return s;
  }

  std::map<std::string, bool> flag_values;
};

std::string get(const Settings& s, const std::string& key, const std::string& dflt) {
  const auto it = s.find(key);
  return it == s.end() ? dflt : it->second;
}

SystemOptions system_options(const Settings& s) {
  SystemOptions o;
  o.grid = parse_count("grid", get(s, "grid", "0"));
  o.span = parse_real("span", get(s, "span", "0"));
  o.eps0 = parse_real("eps0", get(s, "eps0", "0"));
  if (s.count("alpha")) o.alpha = parse_real("alpha", s.at("alpha"));
  if (o.span < 0 || o.eps0 < 0) throw InvalidConfig("span and eps0 must be non-negative");
  return o;
}

json system_config(const Settings& s, const std::string& system) {
  const auto o = system_options(s);
  return {{"system", system},
          {"compact", get(s, "compact", "default")},
          {"grid", o.grid},
          {"span", real9(o.span)},
          {"eps0", real9(o.eps0)},
          {"alpha", real9(o.alpha)}};
}

std::size_t horizon_of(const Settings& s, const std::string& dflt) {
  const auto h = parse_count("horizon", get(s, "horizon", dflt));
  if (h < 16) throw InvalidConfig("horizon must be at least 16");
  return h;
}

void add_system_options(Command& c) {
  c.option("system", "catalog system name");
  c.option("compact", "compact selector, e.g. default, core, core+infinity-ball");
  c.option("grid", "grid size override (0 keeps the system default)");
  c.option("span", "grid half width override in the natural coordinate");
  c.option("eps0", "base radius override");
  c.option("alpha", "rotation angle");
  c.option("horizon", "largest n");
}

// ---------------------------------------------------------------- entropy

int cmd_entropy(Command& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Settings s = c.resolve();
  if (!s.count("system")) throw InvalidConfig("missing system");
  const std::string name = s.at("system");
  const auto levels = parse_levels(get(s, "levels", "4..8"));
  const std::size_t horizon = horizon_of(s, "128");
  CountOptions opt;
  opt.generators = parse_bool("generators", get(s, "generators", "false"));
  opt.generator_limit = parse_count("generator_limit", get(s, "generator_limit", "4096"));
  if (s.count("seed")) opt.shuffle_seed = parse_count("seed", s.at("seed"));
  opt.bands.tail_fraction = parse_real("tail_fraction", get(s, "tail_fraction", "0.5"));
  opt.bands.linear_low = parse_real("linear_low", get(s, "linear_low", "0.75"));
  opt.bands.linear_high = parse_real("linear_high", get(s, "linear_high", "1.25"));
  opt.bands.bounded_degree = parse_real("bounded_degree", get(s, "bounded_degree", "0.25"));
  opt.bands.exp_threshold = parse_real("exp_threshold", get(s, "exp_threshold", "0.1"));
  if (!(opt.bands.tail_fraction > 0 && opt.bands.tail_fraction <= 1))
    throw InvalidConfig("tail_fraction must lie in (0, 1]");

  json config = system_config(s, name);
  config["levels"] = levels;
  config["horizon"] = horizon;
  config["generators"] = opt.generators;
  config["generator_limit"] = opt.generator_limit;
  config["seed"] = opt.shuffle_seed ? json(*opt.shuffle_seed) : json(nullptr);
  config["bands"] = {{"tail_fraction", real9(opt.bands.tail_fraction)},
                     {"linear_low", real9(opt.bands.linear_low)},
                     {"linear_high", real9(opt.bands.linear_high)},
                     {"bounded_degree", real9(opt.bands.bounded_degree)},
                     {"exp_threshold", real9(opt.bands.exp_threshold)}};

  const auto sys = make_system(name, system_options(s));
  const auto compact = select_compact(sys, get(s, "compact", "default"));
  const auto p = entropy_profile(sys, compact, levels, horizon, opt);

  std::ostringstream csv;
  csv << "level,n,s,g,sandwich_ok\n";
  json level_rows = json::array();
  for (const auto& l : p.levels) {
    for (std::size_t n = 1; n <= horizon; ++n) {
      csv << l.k << ',' << n << ',' << count_text(l.s_series(n)) << ',';
      if (l.g_series) csv << count_text((*l.g_series)(n));
      csv << ',';
      if (l.sandwich_ok) csv << (*l.sandwich_ok ? "true" : "false");
      csv << '\n';
    }
    json row = {{"k", l.k},
                {"radius", real9(sys.family.radius(l.k))},
                {"class", class_json(l.growth)},
                {"s_final", static_cast<unsigned long long>(l.s_series(horizon))},
                {"g_final", l.g_series ? json(static_cast<unsigned long long>((*l.g_series)(horizon))) : json(nullptr)},
                {"sandwich_ok", l.sandwich_ok ? json(*l.sandwich_ok) : json(nullptr)},
                {"shuffled_s_final",
                 l.shuffled_s ? json(static_cast<unsigned long long>((*l.shuffled_s)(horizon))) : json(nullptr)}};
    level_rows.push_back(row);
  }
  json report = {{"command", "entropy"},
                 {"config", config},
                 {"config_hash", config_hash(config)},
                 {"system", p.system},
                 {"compact", p.compact},
                 {"grid_size", p.grid_size},
                 {"horizon", p.horizon},
                 {"levels", level_rows},
                 {"aggregate", class_json(p.aggregate)},
                 {"status", p.status},
                 {"unstable_levels", p.unstable_levels},
                 {"metadata", p.metadata},
                 {"timing", {{"wall_seconds", real9(std::stod(seconds_since(t0)))}}}};

  if (s.count("csv")) emit(s.at("csv"), csv.str());
  if (s.count("json")) emit(s.at("json"), report.dump(2) + "\n");
  if (get(s, "json", "") != "-") {
    std::cout << p.system << " on " << p.compact << " (" << p.grid_size << " points, horizon " << horizon << ")\n";
    for (const auto& l : p.levels)
      std::cout << "  level " << l.k << ": " << (l.growth ? to_string(l.growth->label) : "unclassified")
                << (l.growth ? " degree " + format_real(l.growth->degree) : "") << "\n";
    std::cout << "aggregate: " << (p.aggregate ? to_string(p.aggregate->label) : "none");
    if (p.aggregate && p.aggregate->label == GrowthLabel::polynomial)
      std::cout << " degree " << format_real(p.aggregate->degree);
    std::cout << " (" << p.status << ")\n";
  }
  return p.status == "stable" ? kOk : kUnstable;
}

// ---------------------------------------------------------------- coding

int cmd_coding(Command& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Settings s = c.resolve();
  if (!s.count("family")) throw InvalidConfig("missing family");
  const auto family = load_family(s.at("family"));
  std::string name = get(s, "system", family.system);
  if (name.empty()) throw InvalidConfig("missing system");
  if (!family.system.empty() && family.system != name)
    throw FamilyError("family is declared for " + family.system + ", not " + name);
  const std::size_t horizon = horizon_of(s, "64");
  const long n0_max = static_cast<long>(parse_count("n0", get(s, "n0", "64")));
  const long search = static_cast<long>(parse_count("search_bound", get(s, "search_bound", "512")));
  CodingOptions opt;
  opt.shape_resolution = parse_real("shape_resolution", get(s, "shape_resolution", "0"));
  opt.max_words_per_orbit = parse_count("max_words", get(s, "max_words", "4096"));
  if (opt.max_words_per_orbit == 0) throw InvalidConfig("max_words must be positive");

  json config = system_config(s, name);
  config["family"] = family_to_json(family);
  config["horizon"] = horizon;
  config["n0"] = n0_max;
  config["search_bound"] = search;
  config["shape_resolution"] = real9(opt.shape_resolution);
  config["max_words"] = opt.max_words_per_orbit;
  std::optional<std::vector<int>> levels;
  if (s.count("levels")) levels = parse_levels(s.at("levels"));
  config["levels"] = levels ? json(*levels) : json(nullptr);

  const auto sys = make_system(name, system_options(s));
  const auto compact = select_compact(sys, get(s, "compact", "default"));
  validate_family(sys, family, &compact, opt);

  CodingOptions count_opt = opt;
  SampledCompact universe = compact;
  if (!(opt.prefer_exact && ::entrograph::detail::exact_path(sys, family))) {
    count_opt.lead = horizon - 1;
    universe = member_universe(sys, family, &compact, count_opt);
  }
  const auto counts = codings_count(sys, family, horizon, universe, count_opt);

  std::optional<std::vector<std::uint64_t>> d;
  json hitting = nullptr;
  if (family.members.size() == 2) {
    const auto h = hitting_sets(sys, family, static_cast<long>(horizon), &compact, opt);
    d = d_lower_bound_counts(h[0], horizon);
    hitting = json::array();
    for (const auto& x : h)
      hitting.push_back({{"from", family.members[x.from].label}, {"to", family.members[x.to].label}, {"hits", x.hits}});
  }

  std::ostringstream csv;
  csv << "n,c,d_lower\n";
  for (std::size_t n = 1; n <= horizon; ++n) {
    csv << n << ',' << counts.counts[n - 1] << ',';
    if (d) csv << (*d)[n - 1];
    csv << '\n';
  }

  json wandering = json::array();
  for (const auto& m : family.members) {
    const auto w = wandering_check(sys, m, static_cast<long>(horizon), &compact, opt);
    wandering.push_back({{"label", m.label},
                         {"wandering", w.wandering},
                         {"first_return", w.first_return ? json(*w.first_return) : json(nullptr)},
                         {"witness", w.witness ? json(describe(*w.witness)) : json(nullptr)},
                         {"exact", w.exact}});
  }

  json singularity = nullptr;
  bool singular = false;
  if (family.members.size() == 2 && family.disjoint) {
    const auto r = mutually_singular_probe(sys, family, n0_max, search, &compact, opt);
    singular = r.singular;
    json witnesses = json::array();
    for (const auto& w : r.witnesses)
      witnesses.push_back({{"n0", w.n0}, {"start", describe(w.start)}, {"times", w.times}});
    singularity = {{"singular", r.singular},
                   {"n0_max", n0_max},
                   {"search_bound", search},
                   {"first_failure", r.first_failure ? json(*r.first_failure) : json(nullptr)},
                   {"largest_gap", r.largest_gap},
                   {"certified_bound", r.certified_bound ? json(*r.certified_bound) : json(nullptr)},
                   {"exact", r.exact},
                   {"witnesses", witnesses}};
  }

  json bound = nullptr;
  if (levels) {
    const auto b = coding_entropy_bound_check(sys, family, *levels, horizon, compact, opt);
    bound = {{"ok", b.ok},
             {"level", b.level},
             {"radius", real9(b.radius)},
             {"margin", real9(b.margin)},
             {"factor", b.factor},
             {"first_violation", b.first_violation ? json(*b.first_violation) : json(nullptr)},
             {"c_final", b.c.back()},
             {"s_final", b.s.back()}};
  }

  std::vector<long double> identity(horizon);
  for (std::size_t n = 1; n <= horizon; ++n) identity[n - 1] = static_cast<long double>(n);
  const auto versus_n = compare(counts.series, GrowthSeries(identity)).relation;
  json report = {{"command", "coding"},
                 {"config", config},
                 {"config_hash", config_hash(config)},
                 {"system", sys.name},
                 {"universe", {{"label", universe.label}, {"size", universe.points.size()}}},
                 {"horizon", horizon},
                 {"exact", counts.exact},
                 {"overflow_orbits", counts.overflow_orbits},
                 {"c_final", counts.counts.back()},
                 {"d_lower_final", d ? json(d->back()) : json(nullptr)},
                 {"c_class", class_json(classify(counts.series))},
                 {"compare_c_n", to_string(versus_n)},
                 {"hitting", hitting},
                 {"wandering", wandering},
                 {"singularity", singularity},
                 {"bound", bound},
                 {"timing", {{"wall_seconds", real9(std::stod(seconds_since(t0)))}}}};

  if (s.count("csv")) emit(s.at("csv"), csv.str());
  if (s.count("json")) emit(s.at("json"), report.dump(2) + "\n");
  if (get(s, "json", "") != "-") {
    std::cout << sys.name << ": c(" << horizon << ") = " << counts.counts.back() << ", compare(c, n) = "
              << to_string(versus_n) << ", class " << to_string(classify(counts.series).label) << "\n";
    if (!singularity.is_null()) {
      std::cout << "singular: " << (singular ? "true" : "false");
      if (!singularity["certified_bound"].is_null()) std::cout << " (bound " << singularity["certified_bound"] << ")";
      std::cout << "\n";
    }
    if (!bound.is_null()) std::cout << "coding bound: " << (bound["ok"].get<bool>() ? "ok" : "violated") << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- orders

GrowthSeries parse_or_report(const std::string& text, std::size_t horizon) {
  try {
    return parse_sequence(text, horizon);
  } catch (const ParseError& e) {
    std::cerr << caret_diagnostic(text, e) << "\n";
    throw;
  }
}

// "2" prints as "2.0" so projections read as reals.
std::string real_text(double x) {
  auto t = format_real(x);
  if (t.find_first_of(".eEn") == std::string::npos) t += ".0";
  return t;
}

struct OrdersArgs {
  std::string a, b, p;
  std::vector<std::string> list;
  std::size_t horizon = 128;
  std::size_t m = 2;
  bool as_json = false;
  bool exponential = false;
};

int cmd_compare(const OrdersArgs& o) {
  const auto v = compare(parse_or_report(o.a, o.horizon), parse_or_report(o.b, o.horizon));
  if (o.as_json) {
    std::cout << json{{"command", "orders compare"},
                      {"a", o.a},
                      {"b", o.b},
                      {"horizon", o.horizon},
                      {"relation", to_string(v.relation)},
                      {"witness_constant", v.witness_constant ? real9(*v.witness_constant) : json(nullptr)},
                      {"reverse_witness", v.reverse_witness ? real9(*v.reverse_witness) : json(nullptr)}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << to_string(v.relation) << "\n";
  }
  return kOk;
}

int cmd_project(const OrdersArgs& o) {
  const auto a = parse_or_report(o.p, o.horizon);
  const double poly = project_poly(a), rate = project_exp(a);
  if (o.as_json)
    std::cout << json{{"command", "orders project"}, {"p", o.p}, {"horizon", o.horizon}, {"poly", real9(poly)},
                      {"exp", real9(rate)}}
                     .dump(2)
              << "\n";
  else
    std::cout << real_text(o.exponential ? rate : poly) << "\n";
  return kOk;
}

int cmd_sup(const OrdersArgs& o) {
  if (o.list.empty()) throw InvalidConfig("sup needs at least one --a expression");
  std::vector<GrowthSeries> parts;
  for (const auto& e : o.list) parts.push_back(parse_or_report(e, o.horizon));
  const auto s = sup(parts);
  const auto cls = classify(s);
  std::vector<std::string> dominant;
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (compare(parts[i], s).relation == Relation::equivalent) dominant.push_back(o.list[i]);
  if (o.as_json) {
    json values = json::array();
    for (auto v : s.values()) values.push_back(real9(static_cast<double>(v)));
    std::cout << json{{"command", "orders sup"}, {"expressions", o.list}, {"horizon", o.horizon},
                      {"class", class_json(cls)}, {"equivalent_terms", dominant}, {"values", values}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << to_string(cls.label);
    if (cls.label == GrowthLabel::polynomial || cls.label == GrowthLabel::linear)
      std::cout << " degree " << format_real(cls.degree);
    if (cls.label == GrowthLabel::exponential) std::cout << " rate " << format_real(cls.rate);
    std::cout << "\n";
  }
  return kOk;
}

int cmd_invariance(const OrdersArgs& o) {
  const auto r = is_linearly_invariant(parse_or_report(o.a, o.horizon), o.m);
  if (o.as_json)
    std::cout << json{{"command", "orders invariance"}, {"a", o.a}, {"m", o.m}, {"horizon", o.horizon},
                      {"invariant", r.invariant}, {"relation", to_string(r.verdict.relation)}}
                     .dump(2)
              << "\n";
  else
    std::cout << (r.invariant ? "true" : "false") << "\n";
  return kOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, const std::string& json_path) {
  const auto ids = acceptance::suite_criteria(suite);
  acceptance::Context ctx;
  std::vector<acceptance::Outcome> outcomes;
  bool all = true;
  for (int id : ids) {
    outcomes.push_back(acceptance::run_criterion(id, ctx));
    std::cout << acceptance::outcome_line(outcomes.back()) << std::endl;
    all = all && outcomes.back().pass;
  }
  if (!json_path.empty()) {
    json rows = json::array();
    for (const auto& o : outcomes)
      rows.push_back({{"id", o.id}, {"title", o.title}, {"pass", o.pass}, {"detail", o.detail}});
    emit(json_path, json{{"command", "verify"}, {"suite", suite}, {"pass", all}, {"criteria", rows}}.dump(2) + "\n");
  }
  std::cout << (all ? "all criteria pass" : "some criteria fail") << "\n";
  return all ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entrograph: growth classes of separated-set and coding counts"};
  app.require_subcommand(1);

  Command entropy;
  entropy.app = app.add_subcommand("entropy", "separated and generator counts over a compact, classified per level");
  entropy.app->add_option("--config", entropy.config_path, "key=value or .json settings file");
  add_system_options(entropy);
  entropy.option("levels", "levels as a..b or a,b,c (ascending)");
  entropy.option("seed", "extra pass in a shuffled scan order with this seed");
  entropy.flag("generators", "also compute greedy generator counts and the sandwich check");
  entropy.option("generator_limit", "largest grid for generator counts");
  entropy.option("tail_fraction", "fraction of the horizon used by the growth fits");
  entropy.option("linear_low", "lowest degree classified linear");
  entropy.option("linear_high", "highest degree classified linear");
  entropy.option("bounded_degree", "largest degree classified bounded");
  entropy.option("exp_threshold", "smallest exponential rate classified exponential");
  entropy.option("csv", "CSV output path (- for stdout)");
  entropy.option("json", "JSON report path (- for stdout)");

  Command coding;
  coding.app = app.add_subcommand("coding", "coding counts, hitting sets, wandering and singularity verdicts");
  coding.app->add_option("--config", coding.config_path, "key=value or .json settings file");
  add_system_options(coding);
  coding.option("family", "family file (JSON)");
  coding.option("n0", "largest n0 for the singularity probe");
  coding.option("search_bound", "time window for the singularity probe");
  coding.option("levels", "levels for the coding bound check");
  coding.option("shape_resolution", "sample spacing inside family members");
  coding.option("max_words", "codings enumerated per orbit when members overlap");
  coding.option("csv", "CSV output path (- for stdout)");
  coding.option("json", "JSON report path (- for stdout)");

  OrdersArgs orders_args;
  auto* orders = app.add_subcommand("orders", "compare, project and combine sequences given as expressions in n");
  orders->require_subcommand(1);
  auto* compare_cmd = orders->add_subcommand("compare", "relation between [a] and [b]");
  compare_cmd->add_option("--a", orders_args.a)->required();
  compare_cmd->add_option("--b", orders_args.b)->required();
  auto* project_cmd = orders->add_subcommand("project", "polynomial (or exponential) projection");
  project_cmd->add_option("--p", orders_args.p)->required();
  project_cmd->add_flag("--exp", orders_args.exponential, "print the exponential projection");
  auto* sup_cmd = orders->add_subcommand("sup", "class of the pointwise supremum");
  sup_cmd->add_option("--a", orders_args.list, "expression, repeatable")->required();
  auto* inv_cmd = orders->add_subcommand("invariance", "whether [a(n)] = [a(mn)]");
  inv_cmd->add_option("--a", orders_args.a)->required();
  inv_cmd->add_option("--m", orders_args.m);
  for (auto* sub : {compare_cmd, project_cmd, sup_cmd, inv_cmd}) {
    sub->add_option("--horizon", orders_args.horizon, "number of terms");
    sub->add_flag("--json", orders_args.as_json, "print JSON");
  }
  project_cmd->get_option("--horizon")->default_val(256);
  inv_cmd->get_option("--horizon")->default_val(256);

  std::string suite, verify_json;
  auto* verify = app.add_subcommand("verify", "run an acceptance suite");
  verify->add_option("suite", suite, "parabolic, brouwer, properties, coding, double-arrow or all")->required();
  verify->add_option("--json", verify_json, "JSON report path (- for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (*entropy.app) return cmd_entropy(entropy);
    if (*coding.app) return cmd_coding(coding);
    if (*compare_cmd) return cmd_compare(orders_args);
    if (*project_cmd) return cmd_project(orders_args);
    if (*sup_cmd) return cmd_sup(orders_args);
    if (*inv_cmd) return cmd_invariance(orders_args);
    if (*verify) return cmd_verify(suite, verify_json);
  } catch (const UnknownSystem& e) {
    std::cerr << "error: " << e.what() << " (known: ";
    for (std::size_t i = 0; i < system_names().size(); ++i) std::cerr << (i ? ", " : "") << system_names()[i];
    std::cerr << ")\n";
    return kUnknownSystem;
  } catch (const FamilyError& e) {
    std::cerr << "family error: " << e.what() << "\n";
    return kFamilyFailure;
  } catch (const ParseError&) {
    return kInvalidConfig;
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kFailed;
}
