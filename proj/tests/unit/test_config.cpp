#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

using namespace lfsel;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("lfsel_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Config, DefaultsFromMinimalFile) {
  const auto cfg = parse_config("[model]\nfamily = \"FREE\"\n");
  EXPECT_EQ(cfg.model.family, "FREE");
  EXPECT_EQ(cfg.lambda, 0.5);
  EXPECT_EQ(cfg.Ns, (std::vector<double>{32, 64, 128, 256}));
  EXPECT_EQ(cfg.delta, 0.15);
  EXPECT_EQ(cfg.peierls_velocities, 129);
  EXPECT_TRUE(std::isnan(cfg.h_ref));
  EXPECT_EQ(cfg.out_dir, "out");
}

TEST(Config, LambdaOutsideRangeRejected) {
  EXPECT_THROW(parse_config("[model]\nfamily = \"FREE\"\n[numerics]\nlambda = 1.5\n"), RangeError);
  EXPECT_THROW(parse_config("[model]\nfamily = \"FREE\"\n[experiment]\nlambdas = [0.2, 1.0]\n"), RangeError);
  EXPECT_THROW(parse_config("[model]\nfamily = \"FREE\"\n[experiment]\nnus = [0.0]\n"), RangeError);
}

TEST(Config, UnknownKeyNamesThePath) {
  try {
    parse_config("[model]\nfamily = \"FREE\"\n[numerics]\nlamda = 0.3\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("numerics.lamda"), std::string::npos);
  }
  EXPECT_THROW(parse_config("[model]\nfamily = \"QUARTIC\"\n"), SchemaError);
  EXPECT_THROW(parse_config("[model]\nfamily = \"FREE\"\nfamily = \"MECH\"\n"), SchemaError);
  EXPECT_THROW(parse_config("[model]\nfamily = \"FREE\"\n[numerics]\nc = abc\n"), SchemaError);
}

TEST(Config, ManifestRoundTrip) {
  for (const char* f : {"configs/free.toml", "configs/mech_two_well.toml", "configs/flip_sweep.toml",
                        "configs/flip_compare.toml", "configs/mech_one_well.toml"}) {
    const auto cfg = parse_config(slurp(source_path(f)));
    const auto again = parse_config(emit_manifest(cfg));
    EXPECT_TRUE(cfg == again) << f;
    EXPECT_EQ(emit_manifest(again), emit_manifest(cfg)) << f;
  }
}

TEST(Config, PresetMatchesBuiltModel) {
  const auto m = build_model(preset_model("MECH_T"));
  const auto f = flip_model();
  for (int i = 0; i < 20; ++i) {
    const double x = uniform(0, 1), t = uniform(0, 1), p = uniform(-2, 2);
    EXPECT_EQ(m.H(x, t, p), f.H(x, t, p));
  }
  EXPECT_THROW(preset_model("NOPE"), SchemaError);
}

TEST(Report, JsonNumbersKeepAllDigits) {
  json j{{"a", 0.1}, {"b", nan_value}, {"c", 3}};
  j["d"] = num(std::numeric_limits<double>::infinity());
  j["b"] = num(nan_value);
  const auto s = dump(j);
  EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(s.find("\"b\": null"), std::string::npos);
  EXPECT_NE(s.find("\"d\": \"inf\""), std::string::npos);
  EXPECT_NE(s.find("\"c\": 3"), std::string::npos);
}

TEST(Golden, FreeRunIsReproduced) {
  const auto cfg = parse_config(slurp(source_path("configs/free.toml")));
  const auto dir = scratch("golden");
  const auto res = run_selection(cfg, "run", dir);
  EXPECT_EQ(res.code, ExitCode::ok);
  for (const char* f : {"report.json", "ladder.dat", "v_N32_K64.csv", "u_N32_K64.csv"})
    EXPECT_EQ(slurp(dir / f), slurp(source_path(std::string("tests/golden/free/") + f))) << f;
  const auto manifest = slurp(dir / "manifest.toml");
  EXPECT_TRUE(parse_config(manifest) == cfg);
  fs::remove_all(dir);
}

TEST(Golden, UnwritableDirectoryIsAnError) {
  const auto cfg = parse_config(slurp(source_path("configs/free.toml")));
  const auto blocker = scratch("blocker");
  { std::ofstream(blocker) << "x"; }
  EXPECT_THROW(run_selection(cfg, "run", blocker / "sub"), std::runtime_error);
  fs::remove_all(blocker);
}
