#include "phantomqa/config.hpp"

#include <cstdio>
#include <fstream>

#include "phantomqa/errors.hpp"

namespace phantomqa {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const Section& s) {
  static const char* kKindNames[] = {"ttf", "nps", "taper"};
  j = {{"kind", kKindNames[static_cast<int>(s.kind)]},
       {"z0", s.z0},
       {"z1", s.z1},
       {"r0", s.r0},
       {"r1", s.r1}};
}

void from_json(const nlohmann::json& j, Section& s) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ttf") {
    s.kind = SectionKind::kTTF;
  } else if (kind == "nps") {
    s.kind = SectionKind::kNPS;
  } else if (kind == "taper") {
    s.kind = SectionKind::kTaper;
  } else {
    throw ConfigError("unknown section kind '" + kind + "'");
  }
  s.z0 = j.at("z0").get<double>();
  s.z1 = j.at("z1").get<double>();
  s.r0 = j.at("r0").get<double>();
  s.r1 = j.at("r1").get<double>();
}

void to_json(nlohmann::json& j, const BedSpec& b) {
  j = {{"enabled", b.enabled},     {"y0_mm", b.y0_mm},
       {"y1_mm", b.y1_mm},         {"halfwidth_mm", b.halfwidth_mm},
       {"x_offset_mm", b.x_offset_mm}, {"hu", b.hu}};
}

void from_json(const nlohmann::json& j, BedSpec& b) {
  maybe(j, "enabled", b.enabled);
  maybe(j, "y0_mm", b.y0_mm);
  maybe(j, "y1_mm", b.y1_mm);
  maybe(j, "halfwidth_mm", b.halfwidth_mm);
  maybe(j, "x_offset_mm", b.x_offset_mm);
  maybe(j, "hu", b.hu);
}

void to_json(nlohmann::json& j, const PhantomSpec& p) {
  j = {{"sections", p.sections},
       {"body_hu", p.body_hu},
       {"insert_hu", p.insert_hu},
       {"insert_count", p.insert_count},
       {"insert_radius_mm", p.insert_radius_mm},
       {"insert_ring_frac", p.insert_ring_frac},
       {"support", p.support}};
}

void from_json(const nlohmann::json& j, PhantomSpec& p) {
  p = multi_diameter_default();  // partial phantom configs start from the default build
  maybe(j, "sections", p.sections);
  maybe(j, "body_hu", p.body_hu);
  maybe(j, "insert_hu", p.insert_hu);
  maybe(j, "insert_count", p.insert_count);
  maybe(j, "insert_radius_mm", p.insert_radius_mm);
  maybe(j, "insert_ring_frac", p.insert_ring_frac);
  maybe(j, "support", p.support);
}

void to_json(nlohmann::json& j, const AcquisitionSpec& a) {
  j = {{"fov_mm", a.fov_mm},
       {"resolution_px", a.resolution_px},
       {"slice_thickness_mm", a.slice_thickness_mm},
       {"tilt_x_deg", a.tilt_x_deg},
       {"tilt_y_deg", a.tilt_y_deg},
       {"offset_x_mm", a.offset_x_mm},
       {"offset_y_mm", a.offset_y_mm},
       {"z_offset_mm", a.z_offset_mm},
       {"z_margin_mm", a.z_margin_mm},
       {"sub_slabs", a.sub_slabs},
       {"noise_sigma_hu", a.noise_sigma_hu},
       {"noise_correlation_px", a.noise_correlation_px},
       {"bed", a.bed},
       {"seed", a.seed}};
}

void from_json(const nlohmann::json& j, AcquisitionSpec& a) {
  maybe(j, "fov_mm", a.fov_mm);
  maybe(j, "resolution_px", a.resolution_px);
  maybe(j, "slice_thickness_mm", a.slice_thickness_mm);
  maybe(j, "tilt_x_deg", a.tilt_x_deg);
  maybe(j, "tilt_y_deg", a.tilt_y_deg);
  maybe(j, "offset_x_mm", a.offset_x_mm);
  maybe(j, "offset_y_mm", a.offset_y_mm);
  maybe(j, "z_offset_mm", a.z_offset_mm);
  maybe(j, "z_margin_mm", a.z_margin_mm);
  maybe(j, "sub_slabs", a.sub_slabs);
  maybe(j, "noise_sigma_hu", a.noise_sigma_hu);
  maybe(j, "noise_correlation_px", a.noise_correlation_px);
  maybe(j, "bed", a.bed);
  maybe(j, "seed", a.seed);
}

void to_json(nlohmann::json& j, const AirGap& g) {
  j = {{"interface_index", g.interface_index},
       {"extent_mm", g.extent_mm},
       {"severity_hu_drop", g.severity_hu_drop}};
}

void from_json(const nlohmann::json& j, AirGap& g) {
  g.interface_index = j.at("interface_index").get<int>();
  maybe(j, "extent_mm", g.extent_mm);
  maybe(j, "severity_hu_drop", g.severity_hu_drop);
}

void to_json(nlohmann::json& j, const ArtifactSpec& a) { j = {{"air_gaps", a.air_gaps}}; }

void from_json(const nlohmann::json& j, ArtifactSpec& a) { maybe(j, "air_gaps", a.air_gaps); }

void to_json(nlohmann::json& j, const SeriesJitter& s) {
  j = {{"tilt_max_deg", s.tilt_max_deg},
       {"tilt_min_deg", s.tilt_min_deg},
       {"offset_min_frac", s.offset_min_frac},
       {"offset_max_frac", s.offset_max_frac},
       {"z_phase_jitter", s.z_phase_jitter},
       {"noise_min_hu", s.noise_min_hu},
       {"noise_max_hu", s.noise_max_hu},
       {"noise_correlation_px", s.noise_correlation_px},
       {"gap_prob", s.gap_prob},
       {"gap_min_mm", s.gap_min_mm},
       {"gap_max_mm", s.gap_max_mm},
       {"severity_min_hu", s.severity_min_hu},
       {"severity_max_hu", s.severity_max_hu},
       {"bed_shift_max_mm", s.bed_shift_max_mm}};
}

void from_json(const nlohmann::json& j, SeriesJitter& s) {
  maybe(j, "tilt_max_deg", s.tilt_max_deg);
  maybe(j, "tilt_min_deg", s.tilt_min_deg);
  maybe(j, "offset_min_frac", s.offset_min_frac);
  maybe(j, "offset_max_frac", s.offset_max_frac);
  maybe(j, "z_phase_jitter", s.z_phase_jitter);
  maybe(j, "noise_min_hu", s.noise_min_hu);
  maybe(j, "noise_max_hu", s.noise_max_hu);
  maybe(j, "noise_correlation_px", s.noise_correlation_px);
  maybe(j, "gap_prob", s.gap_prob);
  maybe(j, "gap_min_mm", s.gap_min_mm);
  maybe(j, "gap_max_mm", s.gap_max_mm);
  maybe(j, "severity_min_hu", s.severity_min_hu);
  maybe(j, "severity_max_hu", s.severity_max_hu);
  maybe(j, "bed_shift_max_mm", s.bed_shift_max_mm);
}

void to_json(nlohmann::json& j, const AugmentConfig& a) {
  j = {{"enabled", a.enabled},
       {"p_hflip", a.p_hflip},
       {"p_vflip", a.p_vflip},
       {"p_rotate", a.p_rotate},
       {"p_scale", a.p_scale},
       {"p_translate_h", a.p_translate_h},
       {"p_translate_v", a.p_translate_v},
       {"p_brightness", a.p_brightness},
       {"p_blur", a.p_blur},
       {"rotation_range_deg", a.rotation_range_deg},
       {"scale_lo", a.scale_lo},
       {"scale_hi", a.scale_hi},
       {"translate_frac", a.translate_frac},
       {"brightness_frac", a.brightness_frac},
       {"blur_kernels", a.blur_kernels}};
}

void from_json(const nlohmann::json& j, AugmentConfig& a) {
  maybe(j, "enabled", a.enabled);
  maybe(j, "p_hflip", a.p_hflip);
  maybe(j, "p_vflip", a.p_vflip);
  maybe(j, "p_rotate", a.p_rotate);
  maybe(j, "p_scale", a.p_scale);
  maybe(j, "p_translate_h", a.p_translate_h);
  maybe(j, "p_translate_v", a.p_translate_v);
  maybe(j, "p_brightness", a.p_brightness);
  maybe(j, "p_blur", a.p_blur);
  maybe(j, "rotation_range_deg", a.rotation_range_deg);
  maybe(j, "scale_lo", a.scale_lo);
  maybe(j, "scale_hi", a.scale_hi);
  maybe(j, "translate_frac", a.translate_frac);
  maybe(j, "brightness_frac", a.brightness_frac);
  maybe(j, "blur_kernels", a.blur_kernels);
}

void to_json(nlohmann::json& j, const AdamConfig& a) {
  j = {{"lr", a.lr},           {"beta1", a.beta1}, {"beta2", a.beta2},
       {"eps", a.eps},         {"decay", a.decay}, {"weight_decay", a.weight_decay}};
}

void from_json(const nlohmann::json& j, AdamConfig& a) {
  maybe(j, "lr", a.lr);
  maybe(j, "beta1", a.beta1);
  maybe(j, "beta2", a.beta2);
  maybe(j, "eps", a.eps);
  maybe(j, "decay", a.decay);
  maybe(j, "weight_decay", a.weight_decay);
}

void to_json(nlohmann::json& j, const ModelConfig& m) {
  j = {{"input_px", m.input_px},     {"in_channels", m.in_channels},
       {"blocks", m.blocks},         {"head_width", m.head_width},
       {"num_classes", m.num_classes}, {"bn_momentum", m.bn_momentum},
       {"bn_eps", m.bn_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& m) {
  maybe(j, "input_px", m.input_px);
  maybe(j, "in_channels", m.in_channels);
  maybe(j, "blocks", m.blocks);
  maybe(j, "head_width", m.head_width);
  maybe(j, "num_classes", m.num_classes);
  maybe(j, "bn_momentum", m.bn_momentum);
  maybe(j, "bn_eps", m.bn_eps);
}

void to_json(nlohmann::json& j, const TrainConfig& t) {
  j = {{"epochs", t.epochs},
       {"batch_size", t.batch_size},
       {"adam", t.adam},
       {"augment", t.augment},
       {"augmentation", t.augmentation},
       {"stack", to_string(t.stack)},
       {"seed", t.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& t) {
  maybe(j, "epochs", t.epochs);
  maybe(j, "batch_size", t.batch_size);
  maybe(j, "adam", t.adam);
  maybe(j, "augment", t.augment);
  maybe(j, "augmentation", t.augmentation);
  if (j.contains("stack")) t.stack = stack_mode_from_string(j.at("stack").get<std::string>());
  maybe(j, "seed", t.seed);
}

void to_json(nlohmann::json& j, const ProxyConfig& p) {
  j = {{"train_scenes", p.train_scenes}, {"val_scenes", p.val_scenes},
       {"max_shapes", p.max_shapes},     {"epochs", p.epochs},
       {"seed", p.seed},                 {"adam", p.adam}};
}

void from_json(const nlohmann::json& j, ProxyConfig& p) {
  maybe(j, "train_scenes", p.train_scenes);
  maybe(j, "val_scenes", p.val_scenes);
  maybe(j, "max_shapes", p.max_shapes);
  maybe(j, "epochs", p.epochs);
  maybe(j, "seed", p.seed);
  maybe(j, "adam", p.adam);
}

void to_json(nlohmann::json& j, const Rational& r) {
  j = {{"num", r.num}, {"den", r.den}, {"undefined", r.undefined}};
}

void from_json(const nlohmann::json& j, Rational& r) {
  r.num = j.at("num").get<std::int64_t>();
  r.den = j.at("den").get<std::int64_t>();
  r.undefined = j.at("undefined").get<bool>();
}

void to_json(nlohmann::json& j, const ConfusionMatrix& cm) { j = cm.m; }

void from_json(const nlohmann::json& j, ConfusionMatrix& cm) {
  cm.m = j.get<decltype(cm.m)>();
}

void to_json(nlohmann::json& j, const ClassMetrics& m) {
  j = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

void from_json(const nlohmann::json& j, ClassMetrics& m) {
  m.precision = j.at("precision").get<Rational>();
  m.recall = j.at("recall").get<Rational>();
  m.f1 = j.at("f1").get<Rational>();
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"confusion", r.cm},
       {"per_class", r.per_class},
       {"accuracy", r.accuracy},
       {"weighted_accuracy", r.weighted_accuracy}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.cm = j.at("confusion").get<ConfusionMatrix>();
  r.per_class = j.at("per_class").get<decltype(r.per_class)>();
  r.accuracy = j.at("accuracy").get<Rational>();
  r.weighted_accuracy = j.at("weighted_accuracy").get<Rational>();
}

void to_json(nlohmann::json& j, const EpochLog& e) {
  j = {{"epoch", e.epoch},
       {"train_loss", e.train_loss},
       {"train_acc", e.train_acc},
       {"val_loss", e.val_loss},
       {"val_acc", e.val_acc}};
}

void from_json(const nlohmann::json& j, EpochLog& e) {
  e.epoch = j.at("epoch").get<int>();
  e.train_loss = j.at("train_loss").get<double>();
  e.train_acc = j.at("train_acc").get<double>();
  e.val_loss = j.at("val_loss").get<double>();
  e.val_acc = j.at("val_acc").get<double>();
}

AcquisitionSpec RunConfig::desk_acquisition() {
  AcquisitionSpec acq;
  acq.resolution_px = 128;
  return acq;
}

std::vector<std::string> RunConfig::default_scenarios() {
  return {"baseline", "np256", "np512", "np1024", "np2048", "np4096", "ri",
          "f1",       "f2",    "f3",    "f4",     "triplicate", "noaug"};
}

void RunConfig::validate() const {
  acquisition.validate();
  if (phantom.sections.empty()) throw ConfigError("config: phantom has no sections");
  if (working_px <= 0) throw ConfigError("config: working_px must be positive");
  int size = acquisition.resolution_px;
  while (size > working_px && size % 2 == 0) size /= 2;
  if (size != working_px) {
    throw ConfigError("config: cannot reach working_px " + std::to_string(working_px) +
                      " from resolution " + std::to_string(acquisition.resolution_px) +
                      " by halving");
  }
  if (model.input_px != working_px) {
    throw ConfigError("config: model input_px " + std::to_string(model.input_px) +
                      " must equal working_px " + std::to_string(working_px));
  }
  if (init_mode != "proxy" && init_mode != "he" && init_mode != "normal") {
    throw ConfigError("config: init_mode must be proxy, he or normal, got '" + init_mode + "'");
  }
  if (freeze_layers < 0) throw ConfigError("config: freeze_layers must be >= 0");
  if (train.augment) train.augmentation.validate();
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"phantom", c.phantom},
       {"acquisition", c.acquisition},
       {"working_px", c.working_px},
       {"model", c.model},
       {"train", c.train},
       {"init_mode", c.init_mode},
       {"freeze_layers", c.freeze_layers},
       {"proxy", c.proxy},
       {"scenarios", c.scenarios},
       {"master_seed", c.master_seed}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  maybe(j, "phantom", c.phantom);
  maybe(j, "acquisition", c.acquisition);
  maybe(j, "working_px", c.working_px);
  maybe(j, "model", c.model);
  maybe(j, "train", c.train);
  maybe(j, "init_mode", c.init_mode);
  maybe(j, "freeze_layers", c.freeze_layers);
  maybe(j, "proxy", c.proxy);
  maybe(j, "scenarios", c.scenarios);
  maybe(j, "master_seed", c.master_seed);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  try {
    cfg = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string dump = nlohmann::json(cfg).dump();  // object keys are sorted
  std::uint64_t h = 0xCBF29CE484222325ull;              // FNV-1a, stable across builds
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "he" || s == "proxy") return InitMode::kHe;  // proxy starts from He, then transfers
  if (s == "normal") return InitMode::kUnitNormalConv;
  throw ConfigError("unknown init mode '" + s + "'");
}

}  // namespace phantomqa
