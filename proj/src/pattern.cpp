#include "cellpp/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iostream>
#include <set>

#include "cellpp/csv.hpp"
#include "cellpp/error.hpp"

namespace cellpp {

namespace {

std::string lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_missing(std::string_view raw) {
  const std::string s = lower(trim(raw));
  return s.empty() || s == "na" || s == "nan" || s == "null" || s == "none";
}

std::optional<double> parse_double(std::string_view raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_flag(std::string_view raw) {
  const std::string s = lower(trim(raw));
  static const std::set<std::string> yes = {"1", "true", "t", "yes", "y", "+", "pos", "positive"};
  static const std::set<std::string> no = {"0", "false", "f", "no", "n", "-", "neg", "negative"};
  if (yes.count(s)) return true;
  if (no.count(s)) return false;
  if (auto v = parse_double(s)) return *v > 0.0;
  return std::nullopt;
}

std::string normalise_tissue(std::string_view raw) {
  std::string s = lower(trim(raw));
  if (s == "tumor") s = "tumour";
  return s;
}

std::size_t need_column(const csv::Reader& reader, const std::string& name, const char* role) {
  auto c = reader.column(name);
  require(c.has_value(), ErrorCode::MissingColumn, std::string("column '") + name + "' (" + role + ") not found");
  return *c;
}

[[noreturn]] void bad_row(std::size_t line, const std::string& what) {
  fail(ErrorCode::UnparsableRow, "row " + std::to_string(line) + ": " + what);
}

}  // namespace

int MultitypePattern::type_index(std::string_view level) const {
  for (int k = 0; k < type_count(); ++k) {
    if (type_levels[static_cast<std::size_t>(k)] == level) return k;
  }
  fail(ErrorCode::UnknownLevel, "type level '" + std::string(level) + "' not in pattern " + patient_id);
}

int MultitypePattern::tissue_index(std::string_view level) const {
  for (std::size_t k = 0; k < tissue_levels.size(); ++k) {
    if (tissue_levels[k] == level) return static_cast<int>(k);
  }
  fail(ErrorCode::UnknownLevel, "tissue level '" + std::string(level) + "' not in pattern " + patient_id);
}

std::vector<Eigen::Index> MultitypePattern::type_counts() const {
  std::vector<Eigen::Index> counts(type_levels.size(), 0);
  for (int t : types) ++counts[static_cast<std::size_t>(t)];
  return counts;
}

Eigen::Index MultitypePattern::count_of(int type) const {
  return static_cast<Eigen::Index>(std::count(types.begin(), types.end(), type));
}

std::vector<Eigen::Index> MultitypePattern::indices_of(std::string_view level) const {
  std::vector<Eigen::Index> out;
  if (level == kAnyType) {
    out.resize(static_cast<std::size_t>(size()));
    for (Eigen::Index k = 0; k < size(); ++k) out[static_cast<std::size_t>(k)] = k;
    return out;
  }
  const int t = type_index(level);
  for (Eigen::Index k = 0; k < size(); ++k) {
    if (types[static_cast<std::size_t>(k)] == t) out.push_back(k);
  }
  return out;
}

void MultitypePattern::validate() const {
  const auto n = static_cast<std::size_t>(size());
  require(types.size() == n, ErrorCode::InvalidArgument, "type labels do not match point count");
  require(tissue.empty() || tissue.size() == n, ErrorCode::InvalidArgument, "tissue labels do not match point count");
  require(!type_levels.empty(), ErrorCode::InvalidArgument, "pattern needs at least one type level");
  require(points.allFinite(), ErrorCode::InvalidArgument, "non-finite coordinates");
  for (int t : types) {
    require(t >= 0 && t < type_count(), ErrorCode::InvalidArgument, "type label out of range");
  }
  for (int t : tissue) {
    require(t >= 0 && t < static_cast<int>(tissue_levels.size()), ErrorCode::InvalidArgument, "tissue label out of range");
  }
  for (const auto& [name, values] : marks) {
    require(static_cast<std::size_t>(values.size()) == n, ErrorCode::InvalidArgument, "mark '" + name + "' has wrong length");
    for (double v : values) {
      require(std::isnan(v) || std::isfinite(v), ErrorCode::InvalidArgument, "mark '" + name + "' is infinite");
    }
  }
  for (Eigen::Index k = 0; k < size(); ++k) {
    require(window.contains(points.col(k)), ErrorCode::InvalidArgument,
            "point " + std::to_string(k) + " lies outside the window of pattern " + patient_id);
  }
}

MultitypePattern make_pattern(Points points, Window window, std::string level) {
  std::vector<int> types(static_cast<std::size_t>(points.cols()), 0);
  return make_pattern(std::move(points), std::move(types), {std::move(level)}, std::move(window));
}

MultitypePattern make_pattern(Points points, std::vector<int> types, std::vector<std::string> levels, Window window) {
  MultitypePattern p{std::move(points), std::move(types), std::move(levels), {}, {}, {}, std::move(window), "", ""};
  require(p.types.size() == static_cast<std::size_t>(p.size()), ErrorCode::InvalidArgument,
          "type labels do not match point count");
  return p;
}

MultitypePattern subset(const MultitypePattern& pattern, const std::vector<Eigen::Index>& indices) {
  MultitypePattern out = pattern;
  const auto m = static_cast<Eigen::Index>(indices.size());
  out.points.resize(2, m);
  out.types.resize(indices.size());
  if (pattern.has_tissue()) out.tissue.resize(indices.size());
  for (auto& [name, values] : out.marks) values.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index src = indices[static_cast<std::size_t>(k)];
    out.points.col(k) = pattern.points.col(src);
    out.types[static_cast<std::size_t>(k)] = pattern.types[static_cast<std::size_t>(src)];
    if (pattern.has_tissue()) out.tissue[static_cast<std::size_t>(k)] = pattern.tissue[static_cast<std::size_t>(src)];
    for (auto& [name, values] : out.marks) values(k) = pattern.marks.at(name)(src);
  }
  return out;
}

MultitypePattern restrict(const MultitypePattern& pattern, const Selector& selector) {
  return std::visit(
      [&](const auto& sel) -> MultitypePattern {
        using S = std::decay_t<decltype(sel)>;
        if constexpr (std::is_same_v<S, TypeSelector>) {
          MultitypePattern out = subset(pattern, pattern.indices_of(sel.level));
          std::fill(out.types.begin(), out.types.end(), 0);
          out.type_levels = {sel.level};
          return out;
        } else if constexpr (std::is_same_v<S, TissueSelector>) {
          require(pattern.has_tissue(), ErrorCode::UnknownLevel, "pattern has no tissue labels");
          const int t = pattern.tissue_index(sel.level);
          std::vector<Eigen::Index> idx;
          for (Eigen::Index k = 0; k < pattern.size(); ++k) {
            if (pattern.tissue[static_cast<std::size_t>(k)] == t) idx.push_back(k);
          }
          return subset(pattern, idx);
        } else if constexpr (std::is_same_v<S, UnmarkedSelector>) {
          MultitypePattern out = pattern;
          std::fill(out.types.begin(), out.types.end(), 0);
          out.type_levels = {"unmarked"};
          return out;
        } else {
          std::vector<Eigen::Index> idx;
          for (Eigen::Index k = 0; k < pattern.size(); ++k) {
            if (sel.window.contains(pattern.points.col(k))) idx.push_back(k);
          }
          MultitypePattern out = subset(pattern, idx);
          out.window = sel.window;
          return out;
        }
      },
      selector);
}

MultitypePattern superpose(const std::vector<MultitypePattern>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "nothing to superpose");
  MultitypePattern out = parts.front();
  out.marks.clear();
  out.tissue.clear();
  out.tissue_levels.clear();
  out.type_levels.clear();
  out.types.clear();
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  out.points.resize(2, total);
  Eigen::Index pos = 0;
  for (const auto& p : parts) {
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const std::string& level = p.type_levels[static_cast<std::size_t>(p.types[static_cast<std::size_t>(k)])];
      auto it = std::find(out.type_levels.begin(), out.type_levels.end(), level);
      if (it == out.type_levels.end()) {
        out.type_levels.push_back(level);
        it = std::prev(out.type_levels.end());
      }
      out.types.push_back(static_cast<int>(it - out.type_levels.begin()));
      out.points.col(pos++) = p.points.col(k);
    }
    // levels of empty parts are still declared
    for (const auto& level : p.type_levels) {
      if (std::find(out.type_levels.begin(), out.type_levels.end(), level) == out.type_levels.end()) {
        out.type_levels.push_back(level);
      }
    }
  }
  return out;
}

std::vector<MultitypePattern> filter_min_type_count(const std::vector<MultitypePattern>& patterns, Eigen::Index k,
                                                    const std::vector<std::string>& levels) {
  require(k >= 0, ErrorCode::InvalidArgument, "minimum count must be non-negative");
  std::vector<MultitypePattern> out;
  for (const auto& p : patterns) {
    bool keep = true;
    for (const auto& level : levels) {
      auto it = std::find(p.type_levels.begin(), p.type_levels.end(), level);
      const Eigen::Index c = it == p.type_levels.end() ? 0 : p.count_of(static_cast<int>(it - p.type_levels.begin()));
      if (c < k) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(p);
  }
  return out;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
    case Stage::IV: return "IV";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view text) {
  std::string s = lower(trim(text));
  if (s.rfind("stage", 0) == 0) s = trim(s.substr(5));
  // sub-stages such as IIIc collapse onto their main stage
  while (!s.empty() && std::isalpha(static_cast<unsigned char>(s.back())) && s.back() != 'i' && s.back() != 'v') {
    s.pop_back();
  }
  if (s == "i" || s == "1") return Stage::I;
  if (s == "ii" || s == "2") return Stage::II;
  if (s == "iii" || s == "3") return Stage::III;
  if (s == "iv" || s == "4") return Stage::IV;
  return std::nullopt;
}

Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  auto get = [&](const nlohmann::json& obj, const char* key, std::string& field) {
    if (obj.contains(key) && obj[key].is_string()) field = obj[key].get<std::string>();
  };
  const nlohmann::json cells = j.value("cells", nlohmann::json::object());
  get(cells, "x", s.x);
  get(cells, "y", s.y);
  get(cells, "patient", s.patient);
  get(cells, "sample", s.sample);
  get(cells, "tissue", s.tissue);
  if (cells.contains("phenotypes")) {
    const auto& ph = cells["phenotypes"];
    get(ph, "CD19", s.cd19);
    get(ph, "CD68", s.cd68);
    get(ph, "CD3", s.cd3);
    get(ph, "CD8", s.cd8);
  }
  if (cells.contains("type") && cells["type"].is_string()) s.type_column = cells["type"].get<std::string>();
  if (cells.contains("marks")) s.marks = cells["marks"].get<std::vector<std::string>>();
  if (cells.contains("coordinate_scale")) s.coordinate_scale = cells["coordinate_scale"].get<double>();
  const nlohmann::json clin = j.value("clinical", nlohmann::json::object());
  get(clin, "patient", s.clinical_patient);
  get(clin, "primary", s.primary);
  get(clin, "prior_chemo", s.prior_chemo);
  get(clin, "brca", s.brca);
  get(clin, "parpi", s.parpi);
  get(clin, "stage", s.stage);
  get(clin, "age", s.age);
  get(clin, "death", s.death);
  get(clin, "survival_time", s.survival_time);
  s.pool_samples = j.value("pool_samples", true);
  if (j.contains("window") && !j["window"].is_null()) s.window = window_from_json(j["window"]);
  return s;
}

nlohmann::json to_json(const Schema& s) {
  nlohmann::json j;
  j["cells"] = {{"x", s.x},
                {"y", s.y},
                {"patient", s.patient},
                {"sample", s.sample},
                {"tissue", s.tissue},
                {"phenotypes", {{"CD19", s.cd19}, {"CD68", s.cd68}, {"CD3", s.cd3}, {"CD8", s.cd8}}},
                {"marks", s.marks},
                {"coordinate_scale", s.coordinate_scale}};
  if (s.type_column) j["cells"]["type"] = *s.type_column;
  j["clinical"] = {{"patient", s.clinical_patient}, {"primary", s.primary},   {"prior_chemo", s.prior_chemo},
                   {"brca", s.brca},                {"parpi", s.parpi},       {"stage", s.stage},
                   {"age", s.age},                  {"death", s.death},       {"survival_time", s.survival_time}};
  j["pool_samples"] = s.pool_samples;
  if (s.window) j["window"] = *s.window;
  return j;
}

std::vector<PatientRecord> parse_clinical_csv(std::istream& clinical, const Schema& schema) {
  csv::Reader reader(clinical);
  const std::size_t id_col = need_column(reader, schema.clinical_patient, "clinical patient");
  auto optional_col = [&](const std::string& name) { return reader.column(name); };
  const auto c_primary = optional_col(schema.primary);
  const auto c_chemo = optional_col(schema.prior_chemo);
  const auto c_brca = optional_col(schema.brca);
  const auto c_parpi = optional_col(schema.parpi);
  const auto c_stage = optional_col(schema.stage);
  const auto c_age = optional_col(schema.age);
  const auto c_death = optional_col(schema.death);
  const auto c_surv = optional_col(schema.survival_time);

  std::vector<PatientRecord> records;
  std::set<std::string> seen;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const std::size_t line = reader.line();
    require(f.size() >= reader.header().size(), ErrorCode::UnparsableRow,
            "clinical row " + std::to_string(line) + ": expected " + std::to_string(reader.header().size()) + " fields");
    PatientRecord r;
    r.patient_id = trim(f[id_col]);
    if (r.patient_id.empty()) bad_row(line, "empty patient id");
    if (!seen.insert(r.patient_id).second) continue;
    auto flag = [&](const std::optional<std::size_t>& c, const char* what) -> std::optional<bool> {
      if (!c || is_missing(f[*c])) return std::nullopt;
      auto v = parse_flag(f[*c]);
      if (!v) bad_row(line, std::string("cannot read ") + what + " '" + f[*c] + "'");
      return v;
    };
    r.primary_tumour = flag(c_primary, "primary");
    r.prior_chemo = flag(c_chemo, "prior chemo");
    r.brca = flag(c_brca, "BRCA");
    r.parpi = flag(c_parpi, "PARPi");
    r.death = flag(c_death, "death");
    if (c_stage && !is_missing(f[*c_stage])) {
      r.stage = parse_stage(f[*c_stage]);
      if (!r.stage) bad_row(line, "unknown stage '" + f[*c_stage] + "'");
    }
    if (c_age && !is_missing(f[*c_age])) {
      r.age = parse_double(f[*c_age]);
      if (!r.age || *r.age <= 0.0) bad_row(line, "age must be a positive number");
    }
    if (c_surv && !is_missing(f[*c_surv])) {
      r.survival_time = parse_double(f[*c_surv]);
      if (!r.survival_time) bad_row(line, "cannot read survival time");
    }
    records.push_back(std::move(r));
  }
  return records;
}

ParseReport parse_pattern_csv(std::istream& cells, std::istream* clinical, const Schema& schema) {
  csv::Reader reader(cells);
  const std::size_t cx = need_column(reader, schema.x, "x");
  const std::size_t cy = need_column(reader, schema.y, "y");
  const std::size_t cpat = need_column(reader, schema.patient, "patient");
  std::optional<std::size_t> csample = reader.column(schema.sample);
  if (!schema.pool_samples) {
    require(csample.has_value(), ErrorCode::MissingColumn, "column '" + schema.sample + "' (sample) not found");
  }
  const std::optional<std::size_t> ctissue = reader.column(schema.tissue);
  std::optional<std::size_t> ctype;
  std::size_t c19 = 0, c68 = 0, c3 = 0, c8 = 0;
  if (schema.type_column) {
    ctype = need_column(reader, *schema.type_column, "type");
  } else {
    c19 = need_column(reader, schema.cd19, "CD19");
    c68 = need_column(reader, schema.cd68, "CD68");
    c3 = need_column(reader, schema.cd3, "CD3");
    c8 = need_column(reader, schema.cd8, "CD8");
  }
  std::vector<std::size_t> cmarks;
  for (const auto& m : schema.marks) cmarks.push_back(need_column(reader, m, "mark"));

  struct Accum {
    std::string patient, sample;
    std::vector<Point2> points;
    std::vector<std::string> types;
    std::vector<std::string> tissue;
    std::vector<std::vector<double>> marks;
  };
  std::vector<Accum> groups;
  std::map<std::string, std::size_t> group_index;
  std::set<std::string> all_types;
  std::set<std::string> all_tissue;
  ParseReport report;

  std::vector<std::string> f;
  while (reader.next(f)) {
    const std::size_t line = reader.line();
    if (f.size() < reader.header().size()) {
      bad_row(line, "expected " + std::to_string(reader.header().size()) + " fields, found " + std::to_string(f.size()));
    }
    ++report.cells_read;
    const auto x = parse_double(f[cx]);
    const auto y = parse_double(f[cy]);
    if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) bad_row(line, "unreadable coordinates");
    const std::string patient = trim(f[cpat]);
    if (patient.empty()) bad_row(line, "empty patient id");
    const std::string sample = csample ? trim(f[*csample]) : std::string();

    std::string type;
    if (ctype) {
      type = trim(f[*ctype]);
      if (is_missing(type)) type.clear();
    } else {
      auto flag = [&](std::size_t c, const char* what) {
        auto v = parse_flag(f[c]);
        if (!v) {
          if (is_missing(f[c])) return false;
          bad_row(line, std::string("cannot read ") + what + " indicator '" + f[c] + "'");
        }
        return *v;
      };
      const bool b = flag(c19, "CD19");
      const bool mac = flag(c68, "CD68");
      const bool t3 = flag(c3, "CD3");
      const bool t8 = flag(c8, "CD8");
      const int rules = int(b) + int(mac) + int(t3);
      if (rules > 1) ++report.phenotype_conflicts;
      if (b) {
        type = immune::kBCell;
      } else if (mac) {
        type = immune::kMacrophage;
      } else if (t3 && t8) {
        type = immune::kCD8;
      } else if (t3) {
        type = immune::kCD4;
      }
    }
    if (type.empty()) {
      ++report.cells_without_type;
      continue;
    }
    const std::string key = schema.pool_samples ? patient : patient + "\x1f" + sample;
    auto [it, inserted] = group_index.emplace(key, groups.size());
    if (inserted) {
      groups.push_back(Accum{patient, schema.pool_samples ? std::string() : sample, {}, {}, {}, {}});
      groups.back().marks.resize(cmarks.size());
    }
    Accum& g = groups[it->second];
    g.points.emplace_back(*x * schema.coordinate_scale, *y * schema.coordinate_scale);
    g.types.push_back(type);
    all_types.insert(type);
    if (ctissue) {
      const std::string t = normalise_tissue(f[*ctissue]);
      if (t.empty()) bad_row(line, "empty tissue label");
      g.tissue.push_back(t);
      all_tissue.insert(t);
    }
    for (std::size_t m = 0; m < cmarks.size(); ++m) {
      const std::string& raw = f[cmarks[m]];
      double v = std::numeric_limits<double>::quiet_NaN();
      if (is_missing(raw)) {
        ++report.missing_marks[schema.marks[m]];
      } else {
        auto parsed = parse_double(raw);
        if (!parsed || !std::isfinite(*parsed)) bad_row(line, "unreadable mark '" + schema.marks[m] + "'");
        v = *parsed;
      }
      g.marks[m].push_back(v);
    }
  }

  const std::vector<std::string> levels =
      schema.type_column ? std::vector<std::string>(all_types.begin(), all_types.end()) : immune::kTypes;
  const std::vector<std::string> tissue_levels(all_tissue.begin(), all_tissue.end());
  for (auto& g : groups) {
    const auto n = static_cast<Eigen::Index>(g.points.size());
    require(n > 0, ErrorCode::NoPointsForPatient, "patient " + g.patient + " has no typed cells");
    Points pts(2, n);
    for (Eigen::Index k = 0; k < n; ++k) pts.col(k) = g.points[static_cast<std::size_t>(k)];
    std::optional<Window> w = schema.window;
    if (!w) {
      try {
        w = ripley_rasson_window(pts);
      } catch (const Error& e) {
        fail(e.code(), "patient " + g.patient + ": " + e.what());
      }
    }
    std::vector<int> codes(g.types.size());
    for (std::size_t k = 0; k < g.types.size(); ++k) {
      codes[k] = static_cast<int>(std::find(levels.begin(), levels.end(), g.types[k]) - levels.begin());
    }
    MultitypePattern p = make_pattern(std::move(pts), std::move(codes), levels, *w);
    p.patient_id = g.patient;
    p.sample_id = g.sample;
    if (ctissue) {
      p.tissue_levels = tissue_levels;
      p.tissue.resize(g.tissue.size());
      for (std::size_t k = 0; k < g.tissue.size(); ++k) {
        p.tissue[k] =
            static_cast<int>(std::find(tissue_levels.begin(), tissue_levels.end(), g.tissue[k]) - tissue_levels.begin());
      }
    }
    for (std::size_t m = 0; m < cmarks.size(); ++m) {
      p.marks[schema.marks[m]] = Eigen::Map<const Eigen::VectorXd>(g.marks[m].data(), n);
    }
    report.patterns.push_back(std::move(p));
  }
  for (const auto& [mark, count] : report.missing_marks) {
    std::clog << "cellpp: " << count << " cells without a value for mark '" << mark << "' kept as absent\n";
  }
  if (report.phenotype_conflicts > 0) {
    std::clog << "cellpp: " << report.phenotype_conflicts
              << " cells with conflicting phenotypes resolved by priority B > Macrophage > CD8 > CD4\n";
  }
  if (clinical) report.records = parse_clinical_csv(*clinical, schema);
  return report;
}

nlohmann::json to_json(const MultitypePattern& p) {
  nlohmann::json j;
  j["patient_id"] = p.patient_id;
  j["sample_id"] = p.sample_id;
  j["window"] = p.window;
  j["type_levels"] = p.type_levels;
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index k = 0; k < p.size(); ++k) pts.push_back({p.points(0, k), p.points(1, k)});
  j["points"] = std::move(pts);
  j["types"] = p.types;
  if (p.has_tissue()) {
    j["tissue_levels"] = p.tissue_levels;
    j["tissue"] = p.tissue;
  }
  nlohmann::json marks = nlohmann::json::object();
  for (const auto& [name, values] : p.marks) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : values) arr.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    marks[name] = std::move(arr);
  }
  j["marks"] = std::move(marks);
  return j;
}

MultitypePattern pattern_from_json(const nlohmann::json& j) {
  try {
    const auto& pts = j.at("points");
    Points points(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
      points(0, static_cast<Eigen::Index>(k)) = pts[k].at(0).get<double>();
      points(1, static_cast<Eigen::Index>(k)) = pts[k].at(1).get<double>();
    }
    MultitypePattern p = make_pattern(std::move(points), j.at("types").get<std::vector<int>>(),
                                      j.at("type_levels").get<std::vector<std::string>>(), window_from_json(j.at("window")));
    p.patient_id = j.value("patient_id", "");
    p.sample_id = j.value("sample_id", "");
    if (j.contains("tissue")) {
      p.tissue = j["tissue"].get<std::vector<int>>();
      p.tissue_levels = j.at("tissue_levels").get<std::vector<std::string>>();
    }
    if (j.contains("marks")) {
      for (const auto& [name, arr] : j["marks"].items()) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
        for (std::size_t k = 0; k < arr.size(); ++k) {
          v(static_cast<Eigen::Index>(k)) = arr[k].is_null() ? std::numeric_limits<double>::quiet_NaN() : arr[k].get<double>();
        }
        p.marks[name] = std::move(v);
      }
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed pattern JSON: ") + e.what());
  }
}

nlohmann::json to_json(const PatientRecord& r) {
  nlohmann::json j;
  j["patient_id"] = r.patient_id;
  auto put = [&](const char* key, const auto& opt) {
    if (opt) {
      j[key] = *opt;
    } else {
      j[key] = nullptr;
    }
  };
  put("primary_tumour", r.primary_tumour);
  put("prior_chemo", r.prior_chemo);
  put("brca", r.brca);
  put("parpi", r.parpi);
  j["stage"] = r.stage ? nlohmann::json(to_string(*r.stage)) : nlohmann::json(nullptr);
  put("age", r.age);
  put("death", r.death);
  put("survival_time", r.survival_time);
  return j;
}

PatientRecord record_from_json(const nlohmann::json& j) {
  PatientRecord r;
  r.patient_id = j.at("patient_id").get<std::string>();
  auto get_bool = [&](const char* key) -> std::optional<bool> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<bool>();
  };
  auto get_double = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  r.primary_tumour = get_bool("primary_tumour");
  r.prior_chemo = get_bool("prior_chemo");
  r.brca = get_bool("brca");
  r.parpi = get_bool("parpi");
  r.death = get_bool("death");
  r.age = get_double("age");
  r.survival_time = get_double("survival_time");
  if (j.contains("stage") && !j["stage"].is_null()) r.stage = parse_stage(j["stage"].get<std::string>());
  return r;
}

}  // namespace cellpp
