#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "cellpp/counts.hpp"
#include "cellpp/envelopes.hpp"
#include "cellpp/error.hpp"
#include "cellpp/groupstats.hpp"
#include "cellpp/intensity.hpp"
#include "cellpp/nullmodels.hpp"
#include "cellpp/parallel.hpp"
#include "cellpp/pattern.hpp"
#include "cellpp/random.hpp"
#include "cellpp/secondorder.hpp"
#include "cellpp/svg.hpp"

namespace cellpp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runs a parser of an option value, turning library errors into usage errors.
template <class F>
auto usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Options. Every analysis parameter is declared once with its default; the
// resolved values form the run configuration that the manifest records.

enum class Kind { Text, Count, Number, Flag };

struct Param {
  std::string key;
  Kind kind;
  json fallback;
  std::string text;
  bool set = false;
  CLI::Option* option = nullptr;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& help) : app_(parent.add_subcommand(name, help)) {
    app_->add_option("--config", config_path_, "JSON file whose values override the flags (a manifest works too)");
  }

  CLI::App* app() const { return app_; }
  std::string name() const { return app_->get_name(); }

  void text(const std::string& key, const std::string& fallback, const std::string& help) { add(key, Kind::Text, fallback, help); }
  void count(const std::string& key, std::uint64_t fallback, const std::string& help) { add(key, Kind::Count, fallback, help); }
  void number(const std::string& key, double fallback, const std::string& help) { add(key, Kind::Number, fallback, help); }
  void flag(const std::string& key, const std::string& help) {
    auto& p = params_.emplace_back(Param{key, Kind::Flag, false, "", false, nullptr});
    p.option = app_->add_flag("--" + key, p.set, help);
  }

  /// Defaults, then flags, then the config file.
  json resolve() const {
    json cfg = json::object();
    for (const auto& p : params_) {
      cfg[p.key] = p.fallback;
      if (p.kind == Kind::Flag) {
        if (p.set) cfg[p.key] = true;
      } else if (p.option->count() > 0) {
        cfg[p.key] = convert(p, p.text);
      }
    }
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw UsageError("cannot read config file " + config_path_);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw UsageError("config file " + config_path_ + " is not valid JSON: " + e.what());
      }
      if (file.contains("command") && file.contains("config")) {
        if (file["command"] != name()) {
          throw UsageError("config file " + config_path_ + " belongs to '" + file["command"].get<std::string>() + "'");
        }
        file = file["config"];
      }
      if (!file.is_object()) throw UsageError("config file " + config_path_ + " must hold a JSON object");
      for (const auto& [key, value] : file.items()) {
        auto it = std::find_if(params_.begin(), params_.end(), [&](const Param& p) { return p.key == key; });
        if (it == params_.end()) throw UsageError("unknown key '" + key + "' in " + config_path_);
        cfg[key] = value.is_string() && it->kind != Kind::Text ? convert(*it, value.get<std::string>()) : value;
        check_type(*it, cfg[key]);
      }
    }
    return cfg;
  }

 private:
  template <class T>
  void add(const std::string& key, Kind kind, T fallback, const std::string& help) {
    auto& p = params_.emplace_back(Param{key, kind, json(fallback), "", false, nullptr});
    std::ostringstream h;
    h << help << " [" << p.fallback.dump() << "]";
    p.option = app_->add_option("--" + key, p.text, h.str());
  }

  static json convert(const Param& p, const std::string& text) {
    switch (p.kind) {
      case Kind::Text: return text;
      case Kind::Count: {
        std::uint64_t v = 0;
        auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || end != text.data() + text.size()) {
          throw UsageError("--" + p.key + " expects a non-negative integer, got '" + text + "'");
        }
        return v;
      }
      case Kind::Number: {
        try {
          std::size_t used = 0;
          const double v = std::stod(text, &used);
          if (used == text.size()) return v;
        } catch (const std::exception&) {
        }
        throw UsageError("--" + p.key + " expects a number, got '" + text + "'");
      }
      case Kind::Flag: return lower(text) == "true" || text == "1";
    }
    return nullptr;
  }

  static void check_type(const Param& p, const json& v) {
    const bool ok = (p.kind == Kind::Text && v.is_string()) || (p.kind == Kind::Count && v.is_number_unsigned()) ||
                    (p.kind == Kind::Number && v.is_number()) || (p.kind == Kind::Flag && v.is_boolean());
    if (!ok) throw UsageError("config value for '" + p.key + "' has the wrong type");
  }

  CLI::App* app_;
  std::deque<Param> params_;
  std::string config_path_;
};

// ---------------------------------------------------------------------------
// Run context: resolved configuration, output directory, emitted files.

struct Context {
  std::string command;
  json cfg;
  fs::path out_dir;
  std::vector<std::string> outputs;
  json extra = json::object();

  std::string str(const std::string& k) const { return cfg.at(k).get<std::string>(); }
  int integer(const std::string& k) const {
    const auto v = cfg.at(k).get<std::uint64_t>();
    if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) throw UsageError("--" + k + " is too large");
    return static_cast<int>(v);
  }
  std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }
  double num(const std::string& k) const { return cfg.at(k).get<double>(); }
  bool flag(const std::string& k) const { return cfg.at(k).get<bool>(); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + (out_dir / name).string());
    out << content;
    outputs.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  template <class F>
  void write_with(const std::string& name, F&& f) {
    std::ostringstream s;
    f(s);
    write(name, s.str());
  }
};

void add_input_options(Command& c, bool single) {
  c.text("patterns", "", "Pattern JSON written by 'ingest'");
  c.text("cells", "", "Cell table CSV");
  c.text("clinical", "", "Clinical table CSV");
  c.text("schema", "", "Schema JSON mapping column names");
  if (single) {
    c.text("patient", "", "Patient to analyse (default: the first)");
    c.text("sample", "", "Sample to analyse when samples are not pooled");
    c.text("tissue", "", "Restrict to one tissue compartment");
  }
}

struct Inputs {
  std::vector<MultitypePattern> patterns;
  std::vector<PatientRecord> records;
};

Inputs load_inputs(const Context& ctx) {
  Inputs in;
  const std::string patterns = ctx.str("patterns");
  const std::string cells = ctx.str("cells");
  if (!patterns.empty()) {
    std::ifstream f(patterns);
    require(static_cast<bool>(f), ErrorCode::Io, "cannot read " + patterns);
    try {
      const json j = json::parse(f);
      if (j.contains("patterns")) {
        for (const auto& p : j["patterns"]) in.patterns.push_back(pattern_from_json(p));
        if (j.contains("records")) {
          for (const auto& r : j["records"]) in.records.push_back(record_from_json(r));
        }
      } else {
        in.patterns.push_back(pattern_from_json(j));
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::UnparsableRow, patterns + ": " + e.what());
    } catch (const Error& e) {
      fail(e.code(), patterns + ": " + e.what());
    }
  } else if (!cells.empty()) {
    Schema schema;
    const std::string schema_path = ctx.str("schema");
    if (!schema_path.empty()) {
      std::ifstream f(schema_path);
      require(static_cast<bool>(f), ErrorCode::Io, "cannot read " + schema_path);
      try {
        schema = schema_from_json(json::parse(f));
      } catch (const json::exception& e) {
        fail(ErrorCode::UnparsableRow, schema_path + ": " + e.what());
      }
    }
    std::ifstream cf(cells);
    require(static_cast<bool>(cf), ErrorCode::Io, "cannot read " + cells);
    const std::string clinical = ctx.str("clinical");
    std::ifstream kf;
    if (!clinical.empty()) {
      kf.open(clinical);
      require(static_cast<bool>(kf), ErrorCode::Io, "cannot read " + clinical);
    }
    try {
      ParseReport report = parse_pattern_csv(cf, clinical.empty() ? nullptr : &kf, schema);
      in.patterns = std::move(report.patterns);
      in.records = std::move(report.records);
    } catch (const Error& e) {
      fail(e.code(), cells + (clinical.empty() ? "" : " / " + clinical) + ": " + e.what());
    }
  } else {
    throw UsageError("no input: give --patterns or --cells");
  }
  require(!in.patterns.empty(), ErrorCode::NoPointsForPatient, "input holds no patterns");
  return in;
}

MultitypePattern select_pattern(Context& ctx, const Inputs& in) {
  const std::string patient = ctx.str("patient");
  const std::string sample = ctx.str("sample");
  const MultitypePattern* chosen = nullptr;
  for (const auto& p : in.patterns) {
    if ((patient.empty() || p.patient_id == patient) && (sample.empty() || p.sample_id == sample)) {
      chosen = &p;
      break;
    }
  }
  require(chosen != nullptr, ErrorCode::NoPointsForPatient,
          "no pattern for patient '" + patient + "'" + (sample.empty() ? "" : " sample '" + sample + "'"));
  ctx.extra["patient_id"] = chosen->patient_id;
  if (!chosen->sample_id.empty()) ctx.extra["sample_id"] = chosen->sample_id;
  const std::string tissue = ctx.str("tissue");
  if (tissue.empty()) return *chosen;
  return restrict(*chosen, TissueSelector{tissue});
}

/// Exact level, else a case-insensitive match, else a unique case-insensitive prefix.
std::string resolve_level(const MultitypePattern& p, const std::string& name) {
  if (name.empty() || name == kAnyType) return name;
  for (const auto& l : p.type_levels) {
    if (l == name) return l;
  }
  const std::string want = lower(name);
  for (const auto& l : p.type_levels) {
    if (lower(l) == want) return l;
  }
  std::vector<std::string> hits;
  for (const auto& l : p.type_levels) {
    if (lower(l).rfind(want, 0) == 0) hits.push_back(l);
  }
  if (hits.size() == 1) return hits.front();
  throw UsageError("type '" + name + "' matches " + std::to_string(hits.size()) + " levels of the pattern");
}

void add_bandwidth_options(Command& c) {
  c.text("bandwidth", "scott", "Global bandwidth: scott, terrell, or a number");
  c.count("nx", 128, "Grid columns");
  c.count("ny", 128, "Grid rows");
}

struct BandwidthChoice {
  std::optional<double> value;
  BandwidthRule rule = BandwidthRule::Scott;
};

BandwidthChoice bandwidth_choice(const Context& ctx) {
  const std::string text = lower(ctx.str("bandwidth"));
  if (text == "scott") return {std::nullopt, BandwidthRule::Scott};
  if (text == "terrell") return {std::nullopt, BandwidthRule::Terrell};
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && v > 0) return {v, BandwidthRule::Scott};
  } catch (const std::exception&) {
  }
  throw UsageError("--bandwidth must be scott, terrell or a positive number");
}

IntensityConfig intensity_config(const Context& ctx) {
  IntensityConfig c;
  const auto b = bandwidth_choice(ctx);
  c.bandwidth = b.value;
  c.rule = b.rule;
  c.adaptive = !ctx.flag("fixed");
  c.nx = ctx.integer("nx");
  c.ny = ctx.integer("ny");
  if (c.nx < 2 || c.ny < 2) throw UsageError("grid needs at least 2 x 2 cells");
  return c;
}

void require_nsim(int nsim, const std::string& key) {
  if (nsim < 19) throw UsageError("--" + key + " must be at least 19 for a Monte Carlo test");
}

json field_summary(const ScalarField& f) {
  return {{"integral", f.integral()}, {"max", f.max_value()}, {"defined_cells", f.defined_count()}};
}

// ---------------------------------------------------------------------------
// Subcommands.

void run_ingest(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  json j;
  j["patterns"] = json::array();
  json summary = json::array();
  for (const auto& p : in.patterns) {
    j["patterns"].push_back(to_json(p));
    json counts = json::object();
    const auto n = p.type_counts();
    for (std::size_t k = 0; k < n.size(); ++k) counts[p.type_levels[k]] = n[k];
    summary.push_back({{"patient_id", p.patient_id}, {"sample_id", p.sample_id}, {"points", p.size()},
                       {"window_area", p.window.area()}, {"type_counts", counts}});
  }
  j["records"] = json::array();
  for (const auto& r : in.records) j["records"].push_back(to_json(r));
  ctx.write_json("patterns.json", j);
  ctx.write_json("ingest_summary.json", summary);
  for (const auto& p : in.patterns) {
    const std::string id = p.patient_id + (p.sample_id.empty() ? "" : "_" + p.sample_id);
    ctx.write("pattern_" + slug(id) + ".svg", svg::pattern_map(p, "Patient " + id));
  }
}

void run_intensity(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const MultitypePattern p = select_pattern(ctx, in);
  const IntensityConfig config = intensity_config(ctx);
  const TypeProbabilities tp = type_probability_surfaces(p, config);
  json j;
  j["bandwidth"] = tp.bandwidth;
  j["adaptive"] = config.adaptive;
  j["types"] = json::array();
  for (std::size_t k = 0; k < tp.levels.size(); ++k) {
    const std::string s = slug(tp.levels[k]);
    ctx.write_with("intensity_" + s + ".csv", [&](std::ostream& o) { tp.intensities[k].write_csv(o); });
    ctx.write_with("probability_" + s + ".csv", [&](std::ostream& o) { tp.probabilities[k].write_csv(o); });
    ctx.write("intensity_" + s + ".svg", svg::heatmap(tp.intensities[k], "Intensity: " + tp.levels[k]));
    ctx.write("probability_" + s + ".svg", svg::heatmap(tp.probabilities[k], "Type probability: " + tp.levels[k]));
    json t = field_summary(tp.intensities[k]);
    t["type"] = tp.levels[k];
    t["count"] = p.count_of(static_cast<int>(k));
    j["types"].push_back(std::move(t));
  }
  ctx.write("argmax.svg", svg::argmax_map(tp, "Most probable type"));
  ctx.write_json("intensity.json", j);
}

void run_segregation(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const MultitypePattern p = select_pattern(ctx, in);
  const int nsim = ctx.integer("nsim");
  require_nsim(nsim, "nsim");
  const auto b = bandwidth_choice(ctx);
  std::optional<double> eps = b.value;
  if (!eps) eps = global_bandwidth(p.points, b.rule);
  const SegregationResult r = segregation_test(p, nsim, ctx.seed(), ctx.integer("group-size"), eps);
  ctx.write_json("segregation.json", {{"statistic", r.statistic},
                                      {"p_value", r.p_value},
                                      {"p_bonferroni", r.p_bonferroni},
                                      {"group_size", ctx.integer("group-size")},
                                      {"bandwidth", r.bandwidth},
                                      {"nsim", nsim},
                                      {"seed", r.seed},
                                      {"null_statistics", r.null_statistics}});
}

void run_risk(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const MultitypePattern p = select_pattern(ctx, in);
  const std::string i = resolve_level(p, ctx.str("i"));
  const std::string jl = resolve_level(p, ctx.str("j"));
  if (i.empty() || jl.empty()) throw UsageError("risk needs --i and --j");
  const int nsim = ctx.integer("nsim");
  if (nsim != 0) require_nsim(nsim, "nsim");
  const RiskSurface r =
      relative_risk(restrict(p, TypeSelector{i}), restrict(p, TypeSelector{jl}), intensity_config(ctx), nsim, ctx.seed());
  ctx.write_with("risk.csv", [&](std::ostream& o) { r.log_risk.write_csv(o); });
  json j = field_summary(r.log_risk);
  j["i"] = i;
  j["j"] = jl;
  j["bandwidth"] = r.bandwidth;
  j["nsim"] = r.nsim;
  j["contour_level"] = r.contour_level;
  if (nsim > 0) {
    ctx.write_with("tolerance.csv", [&](std::ostream& o) { r.tolerance.write_csv(o); });
    ctx.write("risk.svg", svg::heatmap(r.log_risk, "log relative risk " + i + " / " + jl, &r.tolerance, r.contour_level, true));
  } else {
    ctx.write("risk.svg", svg::heatmap(r.log_risk, "log relative risk " + i + " / " + jl, nullptr, 0.05, true));
  }
  ctx.write_json("risk.json", j);
}

void run_smooth(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const MultitypePattern p = select_pattern(ctx, in);
  const std::string mark = ctx.str("mark");
  if (mark.empty()) throw UsageError("smooth needs --mark");
  const auto b = bandwidth_choice(ctx);
  const double eps = b.value ? *b.value : global_bandwidth(p.points, b.rule);
  const int nx = ctx.integer("nx");
  const int ny = ctx.integer("ny");
  const SmoothedMark s = nadaraya_watson(p, mark, eps, GridSpec::over(p.window, nx, ny));
  ctx.write_with("smooth.csv", [&](std::ostream& o) { s.field.write_csv(o); });
  ctx.write("smooth.svg", svg::heatmap(s.field, "Smoothed mark: " + mark));
  ctx.write_json("smooth.json", {{"mark", mark},
                                 {"bandwidth", eps},
                                 {"used_points", s.used_points},
                                 {"absent_marks", s.absent_marks},
                                 {"max", s.field.max_value()}});
}

void add_statistic_options(Command& c, const std::string& stat) {
  c.text("stat", stat, "Statistic: K, Lcentred, pcf, G, F, J, Jdot");
  c.text("i", "", "First type ('.' for any type)");
  c.text("j", "", "Second type (defaults to --i)");
  c.number("r0", 350.0, "Upper limit of the distance grid (capped at a quarter of the window side)");
  c.count("nr", 513, "Number of distances");
  c.text("edge", "translation", "Edge correction for K and pcf: translation, border, none");
  c.text("intensity", "adaptive", "Intensity at points: adaptive, constant");
  c.text("distance", "inhomogeneous", "G and F estimator: inhomogeneous, homogeneous");
  c.text("bandwidth", "scott", "Global bandwidth for adaptive intensities: scott, terrell, or a number");
  c.count("nx", 128, "Grid columns for intensity fields and F queries");
  c.count("ny", 128, "Grid rows");
}

StatisticConfig statistic_config(const Context& ctx, const MultitypePattern& p) {
  StatisticConfig c;
  c.statistic = usage([&] { return parse_statistic(ctx.str("stat")); });
  c.i = resolve_level(p, ctx.str("i"));
  c.j = resolve_level(p, ctx.str("j"));
  if (c.i.empty()) c.i = std::string(kAnyType);
  if (c.j.empty()) c.j = c.i;
  c.r0_cap = ctx.num("r0");
  if (!(c.r0_cap > 0)) throw UsageError("--r0 must be positive");
  const int nr = ctx.integer("nr");
  if (nr < 2) throw UsageError("--nr must be at least 2");
  const std::string edge = lower(ctx.str("edge"));
  if (edge == "translation") c.edge = EdgeCorrection::Translation;
  else if (edge == "border") c.edge = EdgeCorrection::Border;
  else if (edge == "none") c.edge = EdgeCorrection::None;
  else throw UsageError("unknown edge correction '" + edge + "'");
  const std::string mode = lower(ctx.str("intensity"));
  if (mode == "adaptive") c.intensity.mode = IntensityMode::Adaptive;
  else if (mode == "constant") c.intensity.mode = IntensityMode::Constant;
  else throw UsageError("unknown intensity mode '" + mode + "'");
  const std::string dist = lower(ctx.str("distance"));
  if (dist == "inhomogeneous") c.distance_mode = DistanceMode::Inhomogeneous;
  else if (dist == "homogeneous") c.distance_mode = DistanceMode::Homogeneous;
  else throw UsageError("unknown distance mode '" + dist + "'");
  const auto b = bandwidth_choice(ctx);
  c.intensity.bandwidth = b.value;
  c.intensity.rule = b.rule;
  c.nx = ctx.integer("nx");
  c.ny = ctx.integer("ny");
  if (nr != 513) {
    const Eigen::VectorXd full = resolve_r(c, p);
    const double r0 = full(full.size() - 1);
    c.r = c.statistic == Statistic::Pcf ? Eigen::VectorXd::LinSpaced(nr, full(0), r0) : r_grid(r0, nr);
  }
  return c;
}

void run_summary(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const MultitypePattern p = select_pattern(ctx, in);
  const StatisticConfig c = statistic_config(ctx, p);
  const SummaryFunction f = evaluate_statistic(p, c, resolve_r(c, p));
  ctx.write_with("summary.csv", [&](std::ostream& o) { f.write_csv(o); });
  ctx.write_json("summary.json", f.to_json());
  ctx.write("summary.svg", svg::line_plot({f}, f.name + " " + f.type_i + (f.type_j.empty() ? "" : ", " + f.type_j)));
}

void add_null_options(Command& c, const std::string& fallback) {
  c.text("null", fallback, "Null model: csr, inhomPoisson, randomLabel, randomShift, thomas");
  c.number("shift-radius", 0.0, "Random shifts: maximal displacement (0: the r0 in use)");
  c.text("moving", "", "Random shifts: the translated type (default --j)");
  c.number("kappa", 0.0, "Thomas: parent intensity");
  c.number("mu", 0.0, "Thomas: mean offspring per parent");
  c.number("sigma", 0.0, "Thomas: offspring spread");
}

NullSpec null_spec(const Context& ctx, const std::string& moving_fallback) {
  NullSpec n;
  n.kind = usage([&] { return parse_null_kind(ctx.str("null")); });
  n.seed = ctx.seed();
  const double radius = ctx.num("shift-radius");
  if (radius < 0) throw UsageError("--shift-radius must be non-negative");
  if (radius > 0) n.shift_radius = radius;
  n.moving = ctx.str("moving").empty() ? moving_fallback : ctx.str("moving");
  n.kappa = ctx.num("kappa");
  n.mu = ctx.num("mu");
  n.sigma = ctx.num("sigma");
  return n;
}

void run_envelope(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const MultitypePattern p = select_pattern(ctx, in);
  const StatisticConfig c = statistic_config(ctx, p);
  NullSpec n = null_spec(ctx, c.j);
  if (!n.moving.empty()) n.moving = resolve_level(p, n.moving);
  const int nsim = ctx.integer("nsim");
  require_nsim(nsim, "nsim");
  const double alpha = ctx.num("alpha");
  if (!(alpha > 0 && alpha < 1)) throw UsageError("--alpha must lie in (0, 1)");
  const Side side = usage([&] { return parse_side(ctx.str("side")); });
  const EnvelopeResult r = envelope_from_generator(p, c, n, nsim, alpha, side);
  json j = r.to_json();
  j["i"] = c.i;
  j["j"] = c.j;
  ctx.write_json("envelope.json", j);
  ctx.write("envelope.svg", svg::envelope_plot(r, r.statistic + " " + c.i + ", " + c.j + " under " + to_string(n.kind)));
}

void run_anova(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const std::string group = ctx.str("group");
  const int nperm = ctx.integer("nperm");
  require_nsim(nperm, "nperm");
  const double alpha = ctx.num("alpha");
  if (!(alpha > 0 && alpha < 1)) throw UsageError("--alpha must lie in (0, 1)");
  const std::string test = lower(ctx.str("test"));
  if (test != "anova" && test != "levene") throw UsageError("--test must be anova or levene");
  const std::string tissue = ctx.str("tissue");
  std::vector<MultitypePattern> patterns;
  for (const auto& p : in.patterns) patterns.push_back(tissue.empty() ? p : restrict(p, TissueSelector{tissue}));
  StatisticConfig c = statistic_config(ctx, patterns.front());
  if (ctx.str("i").empty()) c.statistic = Statistic::Lcentred;
  const GroupedCurves g = patient_curves(patterns, in.records, group, c);
  const EnvelopeResult r = test == "anova" ? functional_anova_permutation(g, nperm, ctx.seed(), alpha)
                                           : functional_levene_test(g, nperm, ctx.seed(), alpha);
  ctx.write_with("grouped_curves.csv", [&](std::ostream& o) { g.write_csv(o); });
  json j = r.to_json();
  j["group"] = group;
  j["test"] = test;
  j["levels"] = g.levels();
  j["patients"] = g.patient_ids;
  ctx.write_json("anova.json", j);
  ctx.write("anova.svg", svg::group_panels(g, r, (test == "anova" ? "Functional ANOVA by " : "Levene test by ") + group));
}

void run_counts(Context& ctx) {
  const Inputs in = load_inputs(ctx);
  const CountsTable table = build_counts_table(in.patterns, in.records);
  ModelSpec spec;
  const std::string terms = ctx.str("terms");
  if (!terms.empty()) spec.terms = split_list(terms);
  GeeOptions opts;
  const std::string working = lower(ctx.str("working"));
  if (working == "independence") opts.working = WorkingCorrelation::Independence;
  else if (working == "exchangeable") opts.working = WorkingCorrelation::Exchangeable;
  else throw UsageError("--working must be independence or exchangeable");
  const Design design = build_design(table, spec);
  const GeeFit fit = fit_gee_quasipoisson(design, opts);
  const auto rows = wald_table(fit);
  ctx.write_with("counts.csv", [&](std::ostream& o) { table.write_csv(o); });
  ctx.write_with("gee.csv", [&](std::ostream& o) { write_wald_csv(o, rows); });
  ctx.write("gee.txt", format_wald_table(rows, fit));
  json j = to_json(fit);
  j["dropped_rows"] = design.dropped_rows;
  ctx.write_json("gee.json", j);
}

std::optional<Window> parse_window_arg(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 4) return std::nullopt;
  double v[4];
  for (int k = 0; k < 4; ++k) {
    try {
      v[k] = std::stod(parts[static_cast<std::size_t>(k)]);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (!(v[2] > v[0] && v[3] > v[1])) return std::nullopt;
  return Window::rectangle(v[0], v[1], v[2], v[3]);
}

void run_simulate(Context& ctx) {
  NullSpec n = null_spec(ctx, "");
  std::optional<MultitypePattern> out;
  const bool from_input = !ctx.str("patterns").empty() || !ctx.str("cells").empty();
  if (n.kind == NullKind::Csr || n.kind == NullKind::Thomas) {
    Window w = Window::unit_square();
    if (from_input) {
      Context& c = ctx;
      w = select_pattern(c, load_inputs(c)).window;
    } else {
      const auto parsed = parse_window_arg(ctx.str("window"));
      if (!parsed) throw UsageError("--window must be x0,y0,x1,y1 with x1 > x0 and y1 > y0");
      w = *parsed;
    }
    if (n.kind == NullKind::Thomas) {
      out = simulate_thomas(w, n.kappa, n.mu, n.sigma, n.seed);
    } else {
      const auto types = split_list(ctx.str("types"));
      const double lambda = ctx.num("lambda");
      if (!(lambda > 0)) throw UsageError("--lambda must be positive");
      std::vector<std::pair<std::string, double>> rates;
      for (const auto& t : types.empty() ? std::vector<std::string>{"points"} : types) rates.emplace_back(t, lambda);
      out = simulate_csri(w, rates, n.seed);
    }
  } else {
    if (!from_input) throw UsageError("null '" + to_string(n.kind) + "' simulates from an input pattern");
    const Inputs in = load_inputs(ctx);
    const MultitypePattern p = select_pattern(ctx, in);
    if (n.kind == NullKind::RandomLabel) {
      out = permute_labels(p, n.seed);
    } else if (n.kind == NullKind::RandomShift) {
      if (n.moving.empty()) throw UsageError("random shifts need --moving");
      n.moving = resolve_level(p, n.moving);
      const double radius = n.shift_radius ? *n.shift_radius : default_r0(p.window);
      out = random_shift(p, n.moving, radius, n.seed).pattern;
    } else {
      IntensityConfig config = intensity_config(ctx);
      const TypeProbabilities tp = type_probability_surfaces(p, config);
      std::vector<MultitypePattern> parts;
      for (std::size_t k = 0; k < tp.levels.size(); ++k) {
        parts.push_back(simulate_poisson(tp.intensities[k], Rng::for_replicate(n.seed, k)(), tp.levels[k]));
      }
      out = superpose(parts);
    }
    out->patient_id = p.patient_id;
    out->sample_id = p.sample_id;
  }
  if (out->patient_id.empty()) out->patient_id = "simulated";
  json j;
  j["patterns"] = json::array({to_json(*out)});
  j["records"] = json::array();
  ctx.write_json("simulated.json", j);
  ctx.write("simulated.svg", svg::pattern_map(*out, "Simulated under " + to_string(n.kind)));
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Spatial statistics for multitype cell patterns", "cellpp"};
  app.set_version_flag("--version", CELLPP_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir;
  unsigned threads = 0;
  const char* env_out = std::getenv("CELLPP_OUTPUT_DIR");
  app.add_option("--out,-o", out_dir, "Output directory (default: $CELLPP_OUTPUT_DIR or ./cellpp_out)");
  app.add_option("--threads", threads, "Worker threads (0: all cores); results do not depend on it");

  std::map<std::string, std::function<void(Context&)>> handlers;
  std::deque<Command> commands;
  auto command = [&](const std::string& name, const std::string& help, std::function<void(Context&)> handler) -> Command& {
    handlers[name] = std::move(handler);
    return commands.emplace_back(app, name, help);
  };

  {
    auto& c = command("ingest", "Read cell and clinical tables into canonical pattern JSON", run_ingest);
    add_input_options(c, false);
  }
  {
    auto& c = command("intensity", "Kernel intensity and type probability surfaces", run_intensity);
    add_input_options(c, true);
    add_bandwidth_options(c);
    c.flag("fixed", "Fixed instead of adaptive bandwidth");
  }
  {
    auto& c = command("segregation", "Monte Carlo test of spatial segregation", run_segregation);
    add_input_options(c, true);
    c.text("bandwidth", "scott", "Global bandwidth: scott, terrell, or a number");
    c.count("nsim", 999, "Random labellings");
    c.count("seed", 1, "Master seed");
    c.count("group-size", 1, "Number of tests in the Bonferroni family");
  }
  {
    auto& c = command("risk", "Log relative risk surface of two types", run_risk);
    add_input_options(c, true);
    add_bandwidth_options(c);
    c.flag("fixed", "Fixed instead of adaptive bandwidth");
    c.text("i", "", "Numerator type");
    c.text("j", "", "Denominator type");
    c.count("nsim", 99, "Random labellings for tolerance contours (0: none)");
    c.count("seed", 1, "Master seed");
  }
  {
    auto& c = command("smooth", "Kernel-smoothed continuous mark", run_smooth);
    add_input_options(c, true);
    add_bandwidth_options(c);
    c.text("mark", "", "Mark column to smooth");
  }
  {
    auto& c = command("summary", "Second-order or distance summary function", run_summary);
    add_input_options(c, true);
    add_statistic_options(c, "Lcentred");
  }
  {
    auto& c = command("envelope", "Global envelope test of a summary function", run_envelope);
    add_input_options(c, true);
    add_statistic_options(c, "Jdot");
    add_null_options(c, "randomLabel");
    c.count("nsim", 2999, "Simulations");
    c.count("seed", 1, "Master seed");
    c.number("alpha", 0.05, "Level of the global test");
    c.text("side", "two-sided", "two-sided, upper or lower");
  }
  {
    auto& c = command("anova", "Permutation test of descriptor curves across patient groups", run_anova);
    add_input_options(c, false);
    add_statistic_options(c, "Lcentred");
    c.text("tissue", "", "Restrict every pattern to one tissue compartment");
    c.text("group", "stage", "Grouping field: stage, primary, prior_chemo, brca, parpi, death");
    c.text("test", "anova", "anova (group means) or levene (spread)");
    c.count("nperm", 50000, "Permutations");
    c.count("seed", 1, "Master seed");
    c.number("alpha", 0.05, "Level of the global test");
  }
  {
    auto& c = command("counts", "Cell counts per type and tissue with a quasi-Poisson GEE fit", run_counts);
    add_input_options(c, false);
    c.text("terms", "", "Comma-separated model terms (default: all)");
    c.text("working", "exchangeable", "Working correlation: exchangeable or independence");
  }
  {
    auto& c = command("simulate", "Draw one pattern from a null model", run_simulate);
    add_input_options(c, true);
    add_null_options(c, "csr");
    add_bandwidth_options(c);
    c.flag("fixed", "Fixed bandwidth for inhomPoisson intensities");
    c.text("window", "0,0,1,1", "Rectangle x0,y0,x1,y1 when no input pattern is given");
    c.text("types", "", "Comma-separated type names for csr");
    c.number("lambda", 100.0, "csr: intensity of each type");
    c.count("seed", 1, "Master seed");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  Command* chosen = nullptr;
  for (auto& c : commands) {
    if (c.app()->parsed()) chosen = &c;
  }
  try {
    Context ctx;
    ctx.command = chosen->name();
    ctx.cfg = chosen->resolve();
    ctx.out_dir = !out_dir.empty() ? fs::path(out_dir) : env_out && *env_out ? fs::path(env_out) : fs::path("cellpp_out");
    set_thread_count(threads);
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    require(!ec, ErrorCode::Io, "cannot create output directory " + ctx.out_dir.string());
    handlers.at(ctx.command)(ctx);
    json manifest;
    manifest["command"] = ctx.command;
    manifest["config"] = ctx.cfg;
    if (ctx.cfg.contains("seed")) manifest["seed"] = ctx.cfg["seed"];
    manifest["version"] = CELLPP_VERSION;
    manifest["resolved"] = ctx.extra;
    manifest["outputs"] = ctx.outputs;
    std::ofstream mf(ctx.out_dir / "manifest.json");
    require(static_cast<bool>(mf), ErrorCode::Io, "cannot write manifest");
    mf << manifest.dump(2) << "\n";
    std::cout << "wrote " << ctx.outputs.size() << " files to " << ctx.out_dir.string() << "\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << chosen->app()->help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace cellpp::cli
