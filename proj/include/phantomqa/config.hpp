#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phantomqa/model.hpp"
#include "phantomqa/proxy.hpp"
#include "phantomqa/simulate.hpp"
#include "phantomqa/train.hpp"

namespace phantomqa {

// JSON round-trips for every configurable type. Absent keys keep the
// struct's defaults, so config files state only what they change.

void to_json(nlohmann::json& j, const Section& s);
void from_json(const nlohmann::json& j, Section& s);
void to_json(nlohmann::json& j, const BedSpec& b);
void from_json(const nlohmann::json& j, BedSpec& b);
void to_json(nlohmann::json& j, const PhantomSpec& p);
void from_json(const nlohmann::json& j, PhantomSpec& p);
void to_json(nlohmann::json& j, const AcquisitionSpec& a);
void from_json(const nlohmann::json& j, AcquisitionSpec& a);
void to_json(nlohmann::json& j, const AirGap& g);
void from_json(const nlohmann::json& j, AirGap& g);
void to_json(nlohmann::json& j, const ArtifactSpec& a);
void from_json(const nlohmann::json& j, ArtifactSpec& a);
void to_json(nlohmann::json& j, const SeriesJitter& s);
void from_json(const nlohmann::json& j, SeriesJitter& s);
void to_json(nlohmann::json& j, const AugmentConfig& a);
void from_json(const nlohmann::json& j, AugmentConfig& a);
void to_json(nlohmann::json& j, const AdamConfig& a);
void from_json(const nlohmann::json& j, AdamConfig& a);
void to_json(nlohmann::json& j, const ModelConfig& m);
void from_json(const nlohmann::json& j, ModelConfig& m);
void to_json(nlohmann::json& j, const TrainConfig& t);
void from_json(const nlohmann::json& j, TrainConfig& t);
void to_json(nlohmann::json& j, const ProxyConfig& p);
void from_json(const nlohmann::json& j, ProxyConfig& p);

// Result serialization (evaluation reports, epoch logs); integer-exact for
// the confusion counts and rationals.
void to_json(nlohmann::json& j, const Rational& r);
void from_json(const nlohmann::json& j, Rational& r);
void to_json(nlohmann::json& j, const ConfusionMatrix& cm);
void from_json(const nlohmann::json& j, ConfusionMatrix& cm);
void to_json(nlohmann::json& j, const ClassMetrics& m);
void from_json(const nlohmann::json& j, ClassMetrics& m);
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);
void to_json(nlohmann::json& j, const EpochLog& e);
void from_json(const nlohmann::json& j, EpochLog& e);

// Everything one invocation needs: dataset synthesis, preprocessing, model,
// training recipe and the ablation scenario list. Defaults describe the
// desk-scale setup; a config file overrides what it names.
struct RunConfig {
  PhantomSpec phantom = multi_diameter_default();
  AcquisitionSpec acquisition = desk_acquisition();
  int working_px = 64;
  ModelConfig model;  // desk-size architecture by default
  TrainConfig train;
  std::string init_mode = "proxy";  // proxy | he | normal
  int freeze_layers = 0;
  ProxyConfig proxy;
  std::vector<std::string> scenarios = default_scenarios();
  std::uint64_t master_seed = 20260819;

  static AcquisitionSpec desk_acquisition();
  static std::vector<std::string> default_scenarios();
  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Parse errors surface as FormatError, missing files as IoError, and
// semantic problems as ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);

// Fingerprint of the canonical serialized form (sorted keys); stable across
// runs and processes. Hex, 16 digits.
std::string config_hash(const RunConfig& cfg);

InitMode init_mode_from_string(const std::string& s);  // he | normal (proxy handled above)

}  // namespace phantomqa
