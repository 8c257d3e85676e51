#include <doctest.h>

#include <sstream>

#include "cellpp/csv.hpp"
#include "cellpp/error.hpp"
#include "cellpp/pattern.hpp"
#include "support.hpp"

using namespace cellpp;
using namespace testing;

namespace {

const char* kCells =
    "patient_id,sample_id,x,y,cd19,cd68,cd3,cd8,tissue,pstat3\n"
    "P1,S1,0,0,1,0,0,0,Tumor,0.5\n"
    "P1,S1,10,0,0,1,0,0,stroma,NA\n"
    "P1,S2,10,10,0,0,1,1,stroma,1.5\n"
    "P1,S2,0,10,0,0,1,0,tumour,2\n"
    "P1,S2,5,5,yes,yes,no,no,Tumour,\n"
    "P1,S2,3,3,0,0,0,0,stroma,1\n"
    "P1,S1,7,2,0,0,pos,neg,stroma,3\n"
    "P2,S9,1,1,0,1,0,0,stroma,0\n"
    "P2,S9,2,8,0,0,1,1,stroma,0\n"
    "P2,S9,9,9,0,0,1,0,tumour,0\n";

const char* kClinical =
    "patient_id,primary,prior_chemo,brca,parpi,stage,age,death\n"
    "P1,yes,no,1,0,IIIC,61,0\n"
    "P2,no,,0,1,Stage IV,55.5,1\n";

Schema cells_schema() {
  Schema s;
  s.marks = {"pstat3"};
  s.window = Window::rectangle(-1, -1, 11, 11);
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("CSV reader handles quotes and CRLF") {
  std::istringstream in("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n2,3\n");
  csv::Reader r(in);
  CHECK(r.header() == std::vector<std::string>{"a", "b"});
  std::vector<std::string> f;
  REQUIRE(r.next(f));
  CHECK(f == std::vector<std::string>{"x,1", "say \"hi\""});
  CHECK(r.line() == 2);
  REQUIRE(r.next(f));
  CHECK(f == std::vector<std::string>{"2", "3"});
  CHECK_FALSE(r.next(f));
  CHECK(csv::quote("a,b") == "\"a,b\"");
  CHECK(csv::quote("plain") == "plain");
}

TEST_CASE("phenotype rules, conflicts, tissue and marks") {
  std::istringstream cells(kCells);
  std::istringstream clinical(kClinical);
  const ParseReport rep = parse_pattern_csv(cells, &clinical, cells_schema());
  CHECK(rep.cells_read == 10);
  CHECK(rep.cells_without_type == 1);
  CHECK(rep.phenotype_conflicts == 1);
  CHECK(rep.missing_marks.at("pstat3") == 2);
  REQUIRE(rep.patterns.size() == 2);
  const MultitypePattern& p1 = rep.patterns[0];
  CHECK(p1.patient_id == "P1");
  CHECK(p1.size() == 6);
  CHECK(p1.type_levels == immune::kTypes);
  auto type_at = [&](Eigen::Index k) { return p1.type_levels[static_cast<std::size_t>(p1.types[static_cast<std::size_t>(k)])]; };
  CHECK(type_at(0) == immune::kBCell);
  CHECK(type_at(1) == immune::kMacrophage);
  CHECK(type_at(2) == immune::kCD8);
  CHECK(type_at(3) == immune::kCD4);
  CHECK(type_at(4) == immune::kBCell);  // CD19 wins over CD68
  CHECK(type_at(5) == immune::kCD4);
  CHECK(p1.tissue_levels == std::vector<std::string>{"stroma", "tumour"});
  CHECK(p1.tissue[0] == 1);
  CHECK(p1.tissue[3] == 1);
  CHECK(std::isnan(p1.marks.at("pstat3")(1)));
  CHECK(std::isnan(p1.marks.at("pstat3")(4)));
  CHECK(p1.marks.at("pstat3")(2) == 1.5);

  REQUIRE(rep.records.size() == 2);
  CHECK(rep.records[0].stage == Stage::III);
  CHECK(rep.records[0].primary_tumour == true);
  CHECK(rep.records[0].brca == true);
  CHECK(rep.records[1].stage == Stage::IV);
  CHECK_FALSE(rep.records[1].prior_chemo.has_value());
  CHECK(rep.records[1].age == doctest::Approx(55.5));
}

TEST_CASE("samples can be kept apart") {
  Schema s = cells_schema();
  s.pool_samples = false;
  std::istringstream cells(kCells);
  const ParseReport rep = parse_pattern_csv(cells, nullptr, s);
  REQUIRE(rep.patterns.size() == 3);
  CHECK(rep.patterns[0].sample_id == "S1");
  CHECK(rep.patterns[0].size() == 3);
  CHECK(rep.patterns[1].sample_id == "S2");
  CHECK(rep.patterns[1].size() == 3);
}

TEST_CASE("type column and coordinate scale") {
  Schema s;
  s.type_column = "celltype";
  s.coordinate_scale = 0.5;
  std::istringstream cells(
      "patient_id,x,y,celltype\nA,0,0,T\nA,4,0,B\nA,4,4,T\nA,0,4,B\nA,2,2,T\nA,1,3,NA\n");
  const ParseReport rep = parse_pattern_csv(cells, nullptr, s);
  REQUIRE(rep.patterns.size() == 1);
  const auto& p = rep.patterns[0];
  CHECK(p.type_levels == std::vector<std::string>{"B", "T"});
  CHECK(p.size() == 5);
  CHECK(p.points(0, 1) == doctest::Approx(2.0));
  CHECK_FALSE(p.has_tissue());
  // Ripley-Rasson window: hull [0,2]^2 with 4 of 5 points on it
  CHECK(p.window.area() == doctest::Approx(4.0 / (1.0 - 4.0 / 5.0)));
}

TEST_CASE("ingestion errors name the problem") {
  Schema s = cells_schema();
  std::istringstream missing("patient_id,x,y\nA,1,1\n");
  CHECK(code_of([&] { parse_pattern_csv(missing, nullptr, s); }) == ErrorCode::MissingColumn);
  std::istringstream bad("patient_id,sample_id,x,y,cd19,cd68,cd3,cd8,tissue,pstat3\nA,S,abc,1,1,0,0,0,stroma,1\n");
  try {
    parse_pattern_csv(bad, nullptr, s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnparsableRow);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  std::istringstream clinical("patient_id,stage\nA,V\n");
  CHECK(code_of([&] { parse_clinical_csv(clinical, s); }) == ErrorCode::UnparsableRow);
}

TEST_CASE("stage parsing collapses sub-stages") {
  CHECK(parse_stage("IIIc") == Stage::III);
  CHECK(parse_stage("IIa") == Stage::II);
  CHECK(parse_stage("stage IV") == Stage::IV);
  CHECK(parse_stage("1") == Stage::I);
  CHECK_FALSE(parse_stage("X").has_value());
}

TEST_CASE("pattern and record JSON round trip, NaN marks as null") {
  std::istringstream cells(kCells);
  std::istringstream clinical(kClinical);
  const ParseReport rep = parse_pattern_csv(cells, &clinical, cells_schema());
  const auto& p = rep.patterns[0];
  const nlohmann::json j = to_json(p);
  CHECK(j["marks"]["pstat3"][1].is_null());
  const MultitypePattern back = pattern_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.points == p.points);
  CHECK(back.types == p.types);
  CHECK(back.tissue == p.tissue);
  CHECK(back.window == p.window);
  CHECK(std::isnan(back.marks.at("pstat3")(1)));
  CHECK(back.marks.at("pstat3")(0) == p.marks.at("pstat3")(0));
  const PatientRecord r = record_from_json(to_json(rep.records[1]));
  CHECK(r.stage == Stage::IV);
  CHECK(r.parpi == true);
  CHECK_FALSE(r.prior_chemo.has_value());

  const Schema s = schema_from_json(to_json(cells_schema()));
  CHECK(s.marks == cells_schema().marks);
  CHECK(*s.window == *cells_schema().window);
}

TEST_CASE("restriction, subsets and superposition") {
  Rng rng(9);
  const Window w = Window::rectangle(0, 0, 10, 10);
  MultitypePattern p = random_multitype(rng, w, 300, 3);
  p.tissue.assign(300, 0);
  for (std::size_t k = 0; k < 300; k += 2) p.tissue[k] = 1;
  p.tissue_levels = {"stroma", "tumour"};
  p.marks["m"] = Eigen::VectorXd::LinSpaced(300, 0, 299);
  p.validate();

  const auto counts = p.type_counts();
  CHECK(counts[0] + counts[1] + counts[2] == 300);
  const MultitypePattern t1 = restrict(p, TypeSelector{"t1"});
  CHECK(t1.size() == counts[1]);
  CHECK(t1.type_levels == std::vector<std::string>{"t1"});
  const MultitypePattern tum = restrict(p, TissueSelector{"tumour"});
  CHECK(tum.size() == 150);
  CHECK(tum.marks.at("m")(1) == 2.0);
  const MultitypePattern un = restrict(p, UnmarkedSelector{});
  CHECK(un.type_levels == std::vector<std::string>{"unmarked"});
  const Window half = Window::rectangle(0, 0, 5, 10);
  const MultitypePattern left = restrict(p, WindowSelector{half});
  CHECK(left.window == half);
  for (Eigen::Index k = 0; k < left.size(); ++k) CHECK(left.points(0, k) <= 5.0);

  const MultitypePattern merged =
      superpose({restrict(p, TypeSelector{"t0"}), restrict(p, TypeSelector{"t1"}), restrict(p, TypeSelector{"t2"})});
  CHECK(merged.size() == 300);
  CHECK(merged.type_counts() == counts);
  CHECK(p.indices_of(".").size() == 300);
  CHECK(code_of([&] { p.type_index("zzz"); }) == ErrorCode::UnknownLevel);

  const auto kept = filter_min_type_count({p, t1}, 8, {"t0", "t1"});
  CHECK(kept.size() == 1);
}

TEST_CASE("validation catches points outside the window") {
  Points pts(2, 1);
  pts << 5, 5;
  MultitypePattern p = make_pattern(pts, Window::unit_square());
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::InvalidArgument);
}
