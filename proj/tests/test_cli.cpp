#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "../tools/cli.hpp"
#include "support.hpp"

using namespace testing;
namespace fs = std::filesystem;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cellpp_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

/// Silences the tool's console output for the duration of a call.
struct Quiet {
  std::ostringstream sink;
  std::streambuf* out;
  std::streambuf* err;
  std::streambuf* log;
  Quiet() : out(std::cout.rdbuf(sink.rdbuf())), err(std::cerr.rdbuf(sink.rdbuf())), log(std::clog.rdbuf(sink.rdbuf())) {}
  ~Quiet() {
    std::cout.rdbuf(out);
    std::cerr.rdbuf(err);
    std::clog.rdbuf(log);
  }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "cellpp");
  Quiet q;
  return cellpp::cli::run(args);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

std::size_t line_count(const std::string& path) {
  const std::string s = slurp(path);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

/// Four patients on 600 x 600 windows; B-cells and macrophages lean left.
void write_inputs(const TempDir& dir) {
  Rng rng(2024);
  std::ofstream cells(dir / "cells.csv");
  cells << "patient_id,sample_id,x,y,cd19,cd68,cd3,cd8,tissue,pstat3\n";
  for (int p = 0; p < 4; ++p) {
    for (int k = 0; k < 260; ++k) {
      const double x = uniform(rng, 0, 600);
      const double y = uniform(rng, 0, 600);
      const int t = rng.uniform() < (x < 300 ? 0.7 : 0.2) ? static_cast<int>(rng.below(2)) : 2 + static_cast<int>(rng.below(2));
      const int cd19 = t == 0;
      const int cd68 = t == 1;
      const int cd3 = t >= 2;
      const int cd8 = t == 3;
      cells << "P" << p << ",S" << p << ',' << x << ',' << y << ',' << cd19 << ',' << cd68 << ',' << cd3 << ',' << cd8
            << ',' << (y < 300 ? "stroma" : "tumour") << ',' << x / 100.0 + rng.uniform() << '\n';
    }
  }
  std::ofstream clinical(dir / "clinical.csv");
  clinical << "patient_id,primary,prior_chemo,brca,parpi,stage,age,death\n"
           << "P0,yes,no,1,0,I,51,0\nP1,yes,yes,0,0,IIb,64,1\nP2,no,no,0,1,III,58,0\nP3,yes,no,1,1,IV,70,1\n";
  std::ofstream schema(dir / "schema.json");
  schema << R"({"cells": {"marks": ["pstat3"]}})";
}

}  // namespace

TEST_CASE("cli: usage errors exit with 1, runtime errors with 2") {
  TempDir dir("exit");
  CHECK(run({}) == 1);
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({"simulate", "--no-such-flag", "-o", dir.path.string()}) == 1);
  CHECK(run({"summary", "--cells", dir / "missing.csv", "-o", dir.path.string()}) == 2);
  std::ofstream(dir / "bad.json") << R"({"lambda": 5, "colour": "red"})";
  CHECK(run({"simulate", "--config", dir / "bad.json", "-o", dir.path.string()}) == 1);
  std::ofstream(dir / "typed.json") << R"({"lambda": "many"})";
  CHECK(run({"simulate", "--config", dir / "typed.json", "-o", dir.path.string()}) == 1);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("cli: simulate writes a manifest that replays byte-identically") {
  TempDir a("sim_a");
  TempDir b("sim_b");
  REQUIRE(run({"simulate", "--types", "B,T", "--lambda", "50", "--window", "0,0,2,1", "--seed", "7", "-o",
               a.path.string()}) == 0);
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["config"]["lambda"] == 50.0);
  CHECK(manifest.contains("version"));
  CHECK(manifest["outputs"].size() == 2);
  REQUIRE(run({"simulate", "--config", a / "manifest.json", "-o", b.path.string()}) == 0);
  CHECK(slurp(a / "simulated.json") == slurp(b / "simulated.json"));
  const auto sim = nlohmann::json::parse(slurp(a / "simulated.json"));
  CHECK(sim["patterns"][0]["type_levels"] == nlohmann::json({"B", "T"}));
}

TEST_CASE("cli: ingest, then analyse the stored patterns") {
  TempDir dir("pipeline");
  write_inputs(dir);
  const std::string out = dir.path.string();
  REQUIRE(run({"ingest", "--cells", dir / "cells.csv", "--clinical", dir / "clinical.csv", "--schema",
               dir / "schema.json", "-o", out}) == 0);
  const auto stored = nlohmann::json::parse(slurp(dir / "patterns.json"));
  CHECK(stored["patterns"].size() == 4);
  CHECK(stored["records"].size() == 4);
  const std::string patterns = dir / "patterns.json";

  TempDir s("summary");
  REQUIRE(run({"summary", "--patterns", patterns, "--stat", "L", "--i", "B", "--j", "Macro", "--nr", "64", "-o",
               s.path.string()}) == 0);
  CHECK(first_line(s / "summary.csv") == "r,value,theoretical");
  CHECK(line_count(s / "summary.csv") == 65);
  const auto man = nlohmann::json::parse(slurp(s / "manifest.json"));
  CHECK(man["resolved"]["patient_id"] == "P0");

  TempDir p("patient");
  REQUIRE(run({"summary", "--patterns", patterns, "--patient", "P2", "--stat", "G", "--i", ".", "--distance",
               "homogeneous", "-o", p.path.string()}) == 0);
  CHECK(line_count(p / "summary.csv") == 514);
  CHECK(run({"summary", "--patterns", patterns, "--patient", "P9", "-o", p.path.string()}) == 2);
  CHECK(run({"summary", "--patterns", patterns, "--i", "Neutrophil", "-o", p.path.string()}) == 1);

  TempDir i("intensity");
  REQUIRE(run({"intensity", "--patterns", patterns, "--nx", "24", "--ny", "24", "-o", i.path.string()}) == 0);
  CHECK(first_line(i / "probability_b_cell.csv") == "x,y,value,inside");
  CHECK(fs::exists(i / "argmax.svg"));

  TempDir r("risk");
  REQUIRE(run({"risk", "--patterns", patterns, "--i", "B", "--j", "CD4", "--nsim", "0", "--nx", "20", "--ny", "20", "-o",
               r.path.string()}) == 0);
  CHECK(fs::exists(r / "risk.svg"));

  TempDir m("smooth");
  REQUIRE(run({"smooth", "--patterns", patterns, "--mark", "pstat3", "--nx", "16", "--ny", "16", "-o", m.path.string()}) == 0);
  CHECK(first_line(m / "smooth.csv") == "x,y,value,inside");

  TempDir g("seg");
  REQUIRE(run({"segregation", "--patterns", patterns, "--nsim", "19", "--group-size", "4", "-o", g.path.string()}) == 0);
  const auto seg = nlohmann::json::parse(slurp(g / "segregation.json"));
  CHECK(seg["p_bonferroni"].get<double>() == doctest::Approx(std::min(1.0, 4 * seg["p_value"].get<double>())));

  TempDir c("counts");
  REQUIRE(run({"counts", "--patterns", patterns, "--terms", "type,tissue,age", "--working", "independence", "-o",
               c.path.string()}) == 0);
  CHECK(first_line(c / "gee.csv") == "term,estimate,naive_se,robust_se,z,p_value,signif");
  CHECK(line_count(c / "counts.csv") == 1 + 4 * 4 * 2);

  TempDir v("anova");
  REQUIRE(run({"anova", "--patterns", patterns, "--group", "primary", "--nperm", "19", "--nr", "32", "--intensity",
               "constant", "-o", v.path.string()}) == 2);  // the 'no' group holds a single patient
  REQUIRE(run({"anova", "--patterns", patterns, "--group", "brca", "--nperm", "19", "--nr", "32", "--intensity",
               "constant", "-o", v.path.string()}) == 0);
  CHECK(first_line(v / "grouped_curves.csv") == "patient,group,r,value");
}

TEST_CASE("cli: envelope results do not depend on the thread count") {
  TempDir dir("env");
  write_inputs(dir);
  REQUIRE(run({"ingest", "--cells", dir / "cells.csv", "-o", dir.path.string()}) == 0);
  const std::string patterns = dir / "patterns.json";
  TempDir one("env1");
  TempDir two("env2");
  const std::vector<std::string> common = {"envelope", "--patterns", patterns, "--stat", "Jdot", "--i", "B", "--nsim",
                                           "19", "--nr", "24", "--nx", "32", "--ny", "32", "--seed", "3"};
  std::vector<std::string> a = common;
  a.insert(a.end(), {"--threads", "1", "-o", one.path.string()});
  std::vector<std::string> b = common;
  b.insert(b.end(), {"--threads", "2", "-o", two.path.string()});
  REQUIRE(run(a) == 0);
  REQUIRE(run(b) == 0);
  CHECK(slurp(one / "envelope.json") == slurp(two / "envelope.json"));
  const auto env = nlohmann::json::parse(slurp(one / "envelope.json"));
  CHECK(env["nsim"] == 19);
  CHECK(env["null"]["kind"] == "randomLabel");

  std::vector<std::string> few = common;
  few[8] = "5";
  few.insert(few.end(), {"-o", one.path.string()});
  CHECK(run(few) == 1);
}
