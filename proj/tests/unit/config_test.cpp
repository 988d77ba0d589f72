#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "phantomqa/config.hpp"
#include "phantomqa/errors.hpp"

using namespace phantomqa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "phantomqa_config_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("the default run config is valid desk scale") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.acquisition.resolution_px == 128);
  CHECK(cfg.working_px == 64);
  CHECK(cfg.model.input_px == 64);
  CHECK(cfg.init_mode == "proxy");
  CHECK(cfg.train.epochs == 60);
  REQUIRE(cfg.scenarios.size() == 13);
  CHECK(cfg.scenarios.front() == "baseline");
  CHECK(cfg.scenarios.back() == "noaug");
}

TEST_CASE("run config json round-trips exactly") {
  RunConfig cfg;
  cfg.working_px = 32;
  cfg.model.input_px = 32;
  cfg.model.blocks = {{1, 4}, {2, 8}};
  cfg.train.epochs = 3;
  cfg.train.stack = StackMode::kTriplicate;
  cfg.master_seed = 77;
  cfg.acquisition.noise_sigma_hu = 12.5;

  const nlohmann::json j = cfg;
  const RunConfig back = j.get<RunConfig>();
  CHECK(nlohmann::json(back).dump() == j.dump());
  CHECK(back.model.blocks == cfg.model.blocks);
  CHECK(back.train.stack == StackMode::kTriplicate);
  CHECK(back.acquisition.noise_sigma_hu == 12.5);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("partial json keeps defaults for absent keys") {
  const nlohmann::json j = {{"working_px", 32}, {"model", {{"input_px", 32}}}};
  const RunConfig cfg = j.get<RunConfig>();
  CHECK(cfg.working_px == 32);
  CHECK(cfg.model.input_px == 32);
  CHECK(cfg.model.blocks == ModelConfig().blocks);
  CHECK(cfg.train.epochs == 60);
  CHECK(cfg.master_seed == RunConfig().master_seed);
  CHECK(cfg.phantom.sections.size() == multi_diameter_default().sections.size());
}

TEST_CASE("config hash is stable and sensitive") {
  const RunConfig a;
  const std::string h = config_hash(a);
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(config_hash(RunConfig()) == h);

  RunConfig b;
  b.master_seed += 1;
  CHECK(config_hash(b) != h);
  RunConfig c;
  c.train.seed += 1;
  CHECK(config_hash(c) != h);
}

TEST_CASE("validation names the offending field") {
  RunConfig cfg;

  SUBCASE("working size unreachable by halving") {
    cfg.working_px = 60;
    cfg.model.input_px = 60;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("by halving"), ConfigError);
  }
  SUBCASE("model input must match the working size") {
    cfg.working_px = 32;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("input_px"), ConfigError);
  }
  SUBCASE("unknown init mode") {
    cfg.init_mode = "xavier";
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("init_mode"), ConfigError);
  }
  SUBCASE("negative freeze count") {
    cfg.freeze_layers = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("broken augmentation range") {
    cfg.train.augmentation.scale_lo = 2.0;
    cfg.train.augmentation.scale_hi = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("empty phantom") {
    cfg.phantom.sections.clear();
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("sections"), ConfigError);
  }
  SUBCASE("invalid acquisition") {
    cfg.acquisition.fov_mm = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("load_run_config separates io, format and semantic errors") {
  TempDir tmp;

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_run_config(tmp.path / "absent.json"),
                         doctest::Contains("cannot open"), IoError);
  }
  SUBCASE("unparsable json") {
    const fs::path p = tmp.path / "broken.json";
    write_text(p, "{\"working_px\": ");
    CHECK_THROWS_WITH_AS(load_run_config(p), doctest::Contains("broken.json"), FormatError);
  }
  SUBCASE("wrong value type") {
    const fs::path p = tmp.path / "typed.json";
    write_text(p, "{\"working_px\": \"lots\"}");
    CHECK_THROWS_AS(load_run_config(p), FormatError);
  }
  SUBCASE("valid file with overrides") {
    const fs::path p = tmp.path / "ok.json";
    write_text(p, R"({"working_px": 32, "model": {"input_px": 32}, "train": {"epochs": 2}})");
    const RunConfig cfg = load_run_config(p);
    CHECK(cfg.working_px == 32);
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.train.batch_size == 32);
  }
  SUBCASE("semantic problems still throw ConfigError") {
    const fs::path p = tmp.path / "bad.json";
    write_text(p, "{\"working_px\": -4}");
    CHECK_THROWS_AS(load_run_config(p), ConfigError);
  }
  SUBCASE("bad enum strings are rejected") {
    const fs::path p = tmp.path / "enum.json";
    write_text(p, R"({"train": {"stack": "coronal"}})");
    CHECK_THROWS_AS(load_run_config(p), ConfigError);
  }
}

TEST_CASE("section and gap json round-trip") {
  Section s;
  s.kind = SectionKind::kTaper;
  s.z0 = 100.0;
  s.z1 = 120.0;
  s.r0 = 80.0;
  s.r1 = 105.0;
  const nlohmann::json js = s;
  CHECK(js.at("kind") == "taper");
  const Section sb = js.get<Section>();
  CHECK(sb.kind == s.kind);
  CHECK(sb.z1 == s.z1);

  nlohmann::json bad = js;
  bad["kind"] = "cone";
  CHECK_THROWS_AS(bad.get<Section>(), ConfigError);

  AirGap g;
  g.interface_index = 7;
  g.extent_mm = 3.5;
  g.severity_hu_drop = 950.0;
  const AirGap gb = nlohmann::json(g).get<AirGap>();
  CHECK(gb.interface_index == 7);
  CHECK(gb.extent_mm == 3.5);
  CHECK(gb.severity_hu_drop == 950.0);
}

TEST_CASE("init mode strings map onto initializers") {
  CHECK(init_mode_from_string("he") == InitMode::kHe);
  CHECK(init_mode_from_string("proxy") == InitMode::kHe);
  CHECK(init_mode_from_string("normal") == InitMode::kUnitNormalConv);
  CHECK_THROWS_AS(init_mode_from_string("uniform"), ConfigError);
}

TEST_CASE("evaluation reports round-trip through json") {
  ConfusionMatrix cm;
  cm.add(SliceLabel::kTTF, SliceLabel::kTTF, 12);
  cm.add(SliceLabel::kTTF, SliceLabel::kNPS, 3);
  cm.add(SliceLabel::kOoP, SliceLabel::kOoP, 40);
  const EvalReport report = metrics_from_confusion(cm);

  const nlohmann::json j = report;
  const EvalReport back = j.get<EvalReport>();
  CHECK(back.cm.m == report.cm.m);
  CHECK(back.accuracy.num == report.accuracy.num);
  CHECK(back.accuracy.den == report.accuracy.den);
  const int ttf = static_cast<int>(SliceLabel::kTTF);
  CHECK(back.per_class[ttf].recall.num == report.per_class[ttf].recall.num);
  CHECK(back.per_class[ttf].f1.den == report.per_class[ttf].f1.den);
  // AGP never occurs: the undefined flag must survive the trip.
  CHECK(back.per_class[0].recall.undefined);

  EpochLog log;
  log.epoch = 4;
  log.train_loss = 0.125;
  log.val_acc = 0.9375;
  const EpochLog lb = nlohmann::json(log).get<EpochLog>();
  CHECK(lb.epoch == 4);
  CHECK(lb.train_loss == 0.125);
  CHECK(lb.val_acc == 0.9375);
}
