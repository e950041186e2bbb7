#include <gtest/gtest.h>

#include <filesystem>

#include "kcmp/calibration.hpp"
#include "kcmp/config.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/report.hpp"

using namespace kcmp;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("kcmp_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

ScoreSet sample_scores(const std::string& method) {
  ScoreSet s{method, {}};
  for (int i = 0; i < 40; ++i)
    s.entries.push_back({"m" + std::to_string(i), 0.5 + 0.01 * (i % 17), 1});
  for (int i = 0; i < 40; ++i)
    s.entries.push_back({"n" + std::to_string(i), 0.3 + 0.01 * (i % 23), 0});
  return s;
}

}  // namespace

TEST(Toml, Subset) {
  const auto j = parse_toml(R"(
# top
title = "run"   # trailing
count = 1_000
ratio = 0.25
on = true
list = [1, 2, 3]
lit = 'C:\path'
esc = "a\tb\"c"

[attack]
k = 3
n = "all"

[endpoints.target]
model = "m1"

[[rows]]
x = 1
[[rows]]
x = 2
)");
  EXPECT_EQ(j["title"], "run");
  EXPECT_EQ(j["count"], 1000);
  EXPECT_EQ(j["ratio"], 0.25);
  EXPECT_EQ(j["on"], true);
  EXPECT_EQ(j["list"], json::array({1, 2, 3}));
  EXPECT_EQ(j["lit"], "C:\\path");
  EXPECT_EQ(j["esc"], "a\tb\"c");
  EXPECT_EQ(j["attack"]["n"], "all");
  EXPECT_EQ(j["endpoints"]["target"]["model"], "m1");
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][1]["x"], 2);
}

TEST(Toml, Errors) {
  EXPECT_THROW(parse_toml("a = 1\na = 2\n"), InvalidInput);
  EXPECT_THROW(parse_toml("a = \n"), InvalidInput);
  EXPECT_THROW(parse_toml("[unterminated\n"), InvalidInput);
  EXPECT_THROW(parse_toml("just words\n"), InvalidInput);
  EXPECT_THROW(parse_toml("s = \"open\n"), InvalidInput);
}

TEST(RunConfig, DefaultsAndValidation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.attack.num_alternatives, 3);
  EXPECT_EQ(c.attack.top_n, 5u);
  EXPECT_EQ(c.attack.repeats, 4);
  EXPECT_EQ(c.attack.temperature, 0.3);
  EXPECT_EQ(c.cache_path(), std::filesystem::path("kcmp-work") / "cache");
  c.attack.repeats = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  RunConfig t;
  t.attack.temperature = 2.5;
  EXPECT_THROW(t.validate(), InvalidInput);
  RunConfig e;
  e.endpoints["oracle"] = {};
  EXPECT_THROW(e.validate(), InvalidInput);
}

TEST(RunConfig, JsonRoundTripAndApply) {
  RunConfig c;
  c.attack.top_n = kSelectAll;
  c.attack.seed = 99;
  c.endpoints["target"] = {"http://localhost:1", "m", 30, 5};
  RunConfig d;
  d.apply(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
  EXPECT_THROW(d.apply(json{{"attack", {{"n", "some"}}}}), InvalidInput);
  EXPECT_THROW(d.apply(json{{"attack", {{"n", 0}}}}), InvalidInput);
}

TEST(RunConfig, LoadTomlOverridesBase) {
  const auto dir = temp_dir("config");
  write_file_atomic(dir / "run.toml", R"(
[paths]
manifest = "bench.jsonl"
[attack]
r = 2
temperature = 0.7
[eval]
set_sizes = [1, 5]
)");
  RunConfig base;
  base.attack.seed = 5;
  const auto c = load_run_config(dir / "run.toml", base);
  EXPECT_EQ(c.manifest, "bench.jsonl");
  EXPECT_EQ(c.attack.repeats, 2);
  EXPECT_EQ(c.attack.temperature, 0.7);
  EXPECT_EQ(c.attack.seed, 5u);
  EXPECT_EQ(c.set_sizes, (std::vector<int>{1, 5}));
  write_file_atomic(dir / "bad.toml", "[attack]\nk = 0\n");
  EXPECT_THROW(load_run_config(dir / "bad.toml"), InvalidInput);
  std::filesystem::remove_all(dir);
}

TEST(Report, DeterministicWithConfigAndHashes) {
  ReportInputs in;
  in.config.attack.seed = 4;
  in.config.set_trials = 300;
  in.input_hashes = {{"scores.jsonl", sha256_hex("abc")}};
  in.methods = {sample_scores("kcmp"), sample_scores("min_k")};
  const auto a = build_report(in);
  const auto b = build_report(in);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["config"], in.config.to_json());
  EXPECT_EQ(a["inputs"]["scores.jsonl"], sha256_hex("abc"));
  ASSERT_EQ(a["methods"].size(), 2u);
  const auto& row = a["methods"][0];
  EXPECT_EQ(row["members"], 40);
  EXPECT_EQ(row["auc"].get<double>(), auc(in.methods[0].scores_with_label(1), in.methods[0].scores_with_label(0)));
  EXPECT_EQ(row["set_level"]["10"]["trials"], 300);
  EXPECT_TRUE(row["set_level"]["30"].is_object());
  EXPECT_EQ(a.dump().find("time"), std::string::npos);
}

TEST(Report, SetSizeLargerThanClassIsNull) {
  ReportInputs in;
  in.config.set_sizes = {1, 100};
  in.methods = {sample_scores("kcmp")};
  const auto r = build_report(in);
  EXPECT_TRUE(r["methods"][0]["set_level"]["100"].is_null());
}

TEST(Report, WritesFiles) {
  const auto dir = temp_dir("report");
  ReportInputs in;
  in.config.set_trials = 50;
  in.methods = {sample_scores("kcmp")};
  write_report(dir, in);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "roc_kcmp.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "roc_kcmp.svg"));
  const auto first = read_file(dir / "report.json");
  write_report(dir, in);
  EXPECT_EQ(read_file(dir / "report.json"), first);
  std::filesystem::remove_all(dir);
}

TEST(ScoreFiles, RoundTripAndLabels) {
  const auto dir = temp_dir("scores");
  ScoreSet s{"kcmp", {{"a", 0.5, std::nullopt}, {"b", 0.25, 1}}};
  write_file_atomic(dir / "s.jsonl", score_set_to_jsonl(s));
  auto back = read_score_set(dir / "s.jsonl");
  EXPECT_EQ(back.method, "kcmp");
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_FALSE(back.entries[0].label.has_value());
  attach_labels(back, {{"a", 0}, {"b", 0}});
  EXPECT_EQ(back.entries[0].label, 0);
  EXPECT_EQ(back.entries[1].label, 1);  // existing label kept
  write_file_atomic(dir / "bad.jsonl", "{\"sample_id\":\"a\"}\n");
  EXPECT_THROW(read_score_set(dir / "bad.jsonl"), InvalidInput);
  const auto hashes = hash_inputs({dir / "s.jsonl"});
  EXPECT_EQ(hashes.begin()->second, sha256_hex(read_file(dir / "s.jsonl")));
  std::filesystem::remove_all(dir);
}
