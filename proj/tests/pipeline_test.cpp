#include <cctype>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dualfact/error.hpp"
#include "dualfact/pipeline.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace dualfact;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::filesystem::path kGolden = std::filesystem::path(DUALFACT_DATA_DIR) / ".." / "tests" / "golden" / "demo";

PipelineConfig demo() { return PipelineConfig::load(testutil::data("demo/run.json")); }

PipelineConfig config(json j) { return PipelineConfig::from_json(j.dump(), DUALFACT_DATA_DIR); }

json gold_echo(const std::string& fixture) {
  return {{"dataset", "fixtures/" + fixture + ".jsonl"},
          {"seed", 3},
          {"workers", 3},
          {"object_label", fixture == "youcook3_10" ? "Ingredient" : "Object"},
          {"extraction", {{"backend", {{"kind", "gold-echo"}}}}},
          {"verification", {{"backend", {{"kind", "gold-echo"}}}, {"modes", {"textual", "multimodal"}}}}};
}

bool numeric(const std::string& s) { return !s.empty() && std::isdigit(static_cast<unsigned char>(s[0])); }

}  // namespace

TEST_CASE("demo run matches the golden report") {
  auto r = run_pipeline(demo());
  CHECK(r.exit_code() == 0);
  CHECK(render_text(r) == slurp(kGolden / "report.txt"));
  CHECK(render_records(r) == slurp(kGolden / "report.json"));
}

TEST_CASE("runs are deterministic across repeats and worker counts") {
  auto c = demo();
  auto a = render_records(run_pipeline(c));
  CHECK(render_records(run_pipeline(c)) == a);
  c.workers = 1;
  auto one = json::parse(render_records(run_pipeline(c)));
  c.workers = 8;
  auto eight = json::parse(render_records(run_pipeline(c)));
  CHECK(one == eight);
  CHECK(one == json::parse(a));
}

TEST_CASE("gold echo gives 100 everywhere on both fixtures") {
  for (auto name : {"youcook3_10", "craftbench_10"}) {
    CAPTURE(name);
    auto r = run_pipeline(config(gold_echo(name)));
    CHECK(r.exit_code() == 0);
    int checked = 0;
    for (const auto& t : r.tables) {
      if (t.id.rfind("extraction_", 0) && t.id.rfind("verification_", 0) && t.id.rfind("multifactscore_", 0) &&
          t.id.rfind("per_video_accuracy_", 0))
        continue;
      for (const auto& row : t.rows)
        for (const auto& cell : row)
          if (auto* s = std::get_if<std::string>(&cell); s && numeric(*s)) {
            CHECK(*s == "100.00");
            ++checked;
          }
    }
    CHECK(checked > 100);
    auto ext = r.find("extraction_conceptual");
    REQUIRE(ext);
    CHECK(cell_text(ext->rows.back().back()) == "100.00");  // macro F1
  }
}

TEST_CASE("structural problems are caught before any backend call") {
  auto j = gold_echo("youcook3_10");
  j["verification"]["backend"] = {{"kind", "lookup"}, {"file", "textual_only.json"}};
  auto dir = testutil::scratch_dir("pipeline_modes");
  std::ofstream(dir / "textual_only.json") << R"({"modes": ["textual"], "responses": {}, "default": "REFUTED"})";
  j["dataset"] = (testutil::data("fixtures/youcook3_10.jsonl")).string();
  auto c = PipelineConfig::from_json(j.dump(), dir);
  CHECK_THROWS_AS(run_pipeline(c), PreconditionError);

  auto mm = gold_echo("youcook3_10");
  mm["decomposition"] = {{"modes", {"mm_grounded"}}};
  CHECK_THROWS_AS(config(mm).check(), PreconditionError);

  auto neg = gold_echo("youcook3_10");
  neg.erase("seed");
  neg["negatives"] = {{"backend", {{"kind", "lookup"}, {"file", "demo/extractor.json"}}}, {"lexicon", "lexicons/cooking.json"}};
  CHECK_THROWS_AS(config(neg).check(), PreconditionError);
  neg["seed"] = 5;
  CHECK_NOTHROW(config(neg).check());

  auto secret = gold_echo("youcook3_10");
  secret["verification"]["backend"]["token"] = "abc";
  CHECK_THROWS_AS(config(secret), FormatError);
  auto unknown = gold_echo("youcook3_10");
  unknown["extra"] = 1;
  CHECK_THROWS_AS(config(unknown), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid dataset is a structural error with exit 1") {
  auto j = gold_echo("youcook3_10");
  j["dataset"] = "fixtures/validation_seeded.jsonl";
  auto r = run_pipeline(config(j));
  CHECK(r.structural_error);
  CHECK(r.exit_code() == 1);
  CHECK(r.notices.size() == 5);
  CHECK(r.find("validation"));
  CHECK_FALSE(r.find("stats"));
}

TEST_CASE("a missing extraction response is a partial run with exit 2") {
  auto dir = testutil::scratch_dir("pipeline_partial");
  auto script = json::parse(slurp(testutil::data("demo/extractor.json")));
  script.erase("yc3_v001_c03#conceptual");
  std::ofstream(dir / "extractor.json") << script.dump();
  auto j = gold_echo("youcook3_10");
  j["dataset"] = testutil::data("fixtures/youcook3_10.jsonl").string();
  j["extraction"]["backend"] = {{"kind", "lookup"}, {"file", "extractor.json"}};
  j["layers"] = {"conceptual"};
  auto r = run_pipeline(PipelineConfig::from_json(j.dump(), dir));
  CHECK_FALSE(r.structural_error);
  CHECK(r.exit_code() == 2);
  CHECK(r.exclusions.at("extraction/conceptual") == 1);
  REQUIRE_FALSE(r.notices.empty());
  CHECK(r.notices[0].find("yc3_v001_c03") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config hash follows the hashed fields only") {
  auto a = demo(), b = demo();
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.seed = 18;
  CHECK(a.hash() != b.hash());
  b = demo();
  b.base_dir = "/elsewhere";
  b.output_dir = "/tmp/other";
  b.workers = 16;
  CHECK(a.hash() == b.hash());
}

TEST_CASE("records and text renderings agree cell by cell") {
  auto r = run_pipeline(demo());
  auto records = json::parse(render_records(r));
  auto text = render_text(r);
  REQUIRE(records["tables"].size() == r.tables.size());
  for (std::size_t i = 0; i < r.tables.size(); ++i) {
    const auto& t = r.tables[i];
    const auto& jt = records["tables"][i];
    CHECK(jt["id"] == t.id);
    CHECK(text.find(t.title) != std::string::npos);
    REQUIRE(jt["rows"].size() == t.rows.size());
    for (std::size_t k = 0; k < t.rows.size(); ++k)
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const auto& v = jt["rows"][k][t.columns[c]];
        auto s = v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::int64_t>());
        CHECK(s == cell_text(t.rows[k][c]));
      }
  }
  CHECK(records["exit_code"] == 0);
}

TEST_CASE("emit_tables writes what was asked for") {
  auto dir = testutil::scratch_dir("emit");
  Report empty;
  empty.set_meta("tool", "dualfact");
  auto written = emit_tables(empty, dir / "empty");
  CHECK(written.size() == 2);
  for (const auto& p : written) CHECK(p.extension() != ".csv");

  Report r;
  Table t{"ratios", "Ratios", {"Name", "n", "Percent"}, {}};
  t.add({std::string("five of six"), std::int64_t{6}, Ratio{5, 6}.percent()});
  t.add({std::string("a, \"quoted\" name"), std::int64_t{0}, Ratio{0, 0}.percent()});
  CHECK_THROWS_AS(t.add({std::string("short")}), PreconditionError);
  r.tables.push_back(t);
  r.exclusions["verification"] = 2;
  CHECK(r.exit_code() == 2);
  auto files = emit_tables(r, dir / "full", {ReportFormat::Csv});
  REQUIRE(files.size() == 1);
  CHECK(slurp(files[0]) == "Name,n,Percent\nfive of six,6,83.33\n\"a, \"\"quoted\"\" name\",0,--\n");

  std::ofstream(dir / "plain") << "x";
  CHECK_THROWS_AS(emit_tables(r, dir / "plain" / "sub"), PreconditionError);
  std::filesystem::remove_all(dir);
}
