#include "s4al/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "s4al/errors.hpp"

namespace s4al {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid type for '" + std::string(key) + "' in " + where);
  }
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::active: return "active";
    case Mode::ssl: return "ssl";
    case Mode::supervised: return "supervised";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "active") return Mode::active;
  if (s == "ssl") return Mode::ssl;
  if (s == "supervised") return Mode::supervised;
  throw ConfigError("mode must be one of active, ssl, supervised (got '" + s + "')");
}

ArchConfig ExperimentConfig::arch() const {
  ArchConfig a = model;
  a.num_classes = dataset.params.num_classes;
  return a;
}

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("name must be a non-empty path component");
  dataset.params.validate();
  if (dataset.n_train < 1 || dataset.n_val < 1) throw ConfigError("dataset n_train and n_val must be >= 1");
  arch().validate();
  optimizer.validate();
  reco.validate();
  const auto& s = schedule;
  if (s.epochs < 1 || s.iters_per_epoch < 1) throw ConfigError("schedule epochs and iters_per_epoch must be >= 1");
  if (!(s.final_epoch_multiplier >= 1.0)) throw ConfigError("final_epoch_multiplier must be >= 1");
  if (s.batch_labeled < 1) throw ConfigError("batch_labeled must be >= 1");
  if (s.batch_unlabeled < 0) throw ConfigError("batch_unlabeled must be >= 0");
  const auto& a = active;
  if (!(a.labeled_fraction > 0.0 && a.labeled_fraction <= 1.0)) throw ConfigError("labeled_fraction must be in (0, 1]");
  if (a.labeled_fraction == 1.0 && mode != Mode::supervised)
    throw ConfigError("labeled_fraction 1 is only meaningful in supervised mode");
  if (!(a.pseudo_threshold > 0.0 && a.pseudo_threshold < 1.0)) throw ConfigError("pseudo_threshold must be in (0, 1)");
  if (a.region_size < 1 || dataset.params.height % a.region_size || dataset.params.width % a.region_size)
    throw ConfigError("region_size must divide the image height and width");
  if (dataset.params.height % 8 || dataset.params.width % 8)
    throw ConfigError("image height and width must be multiples of 8");
  if (a.per_image_budget < 1) throw ConfigError("per_image_budget must be >= 1");
  if (a.cycles < 0) throw ConfigError("cycles must be >= 0");
  if (a.ssl_retrain_count < 0) throw ConfigError("ssl_retrain_count must be >= 0");
}

std::string ExperimentConfig::to_json(int indent) const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["mode"] = to_string(mode);
  j["output_dir"] = output_dir;
  j["write_snapshots"] = write_snapshots;
  j["write_checkpoints"] = write_checkpoints;
  const auto& p = dataset.params;
  j["dataset"] = {{"seed", dataset.seed},
                  {"n_train", dataset.n_train},
                  {"n_val", dataset.n_val},
                  {"height", p.height},
                  {"width", p.width},
                  {"num_classes", p.num_classes},
                  {"shape_density", p.shape_density},
                  {"color_noise", p.color_noise},
                  {"dir", dataset.dir}};
  j["model"] = {{"enc_channels", model.enc_channels},
                {"dec_channels", model.dec_channels},
                {"embed_dim", model.embed_dim},
                {"dropout", model.dropout}};
  j["optimizer"] = {{"learning_rate", optimizer.learning_rate},
                    {"momentum", optimizer.momentum},
                    {"weight_decay", optimizer.weight_decay},
                    {"poly_power", optimizer.poly_power}};
  j["schedule"] = {{"epochs", schedule.epochs},
                   {"iters_per_epoch", schedule.iters_per_epoch},
                   {"final_epoch_multiplier", schedule.final_epoch_multiplier},
                   {"batch_labeled", schedule.batch_labeled},
                   {"batch_unlabeled", schedule.batch_unlabeled},
                   {"reinit_each_cycle", schedule.reinit_each_cycle}};
  j["reco"] = {{"temperature", reco.temperature},
               {"confidence_threshold", reco.confidence_threshold},
               {"queries_per_class", reco.queries_per_class},
               {"negatives_per_query", reco.negatives_per_query},
               {"weight", reco.weight}};
  j["active"] = {{"labeled_fraction", active.labeled_fraction},
                 {"pseudo_threshold", active.pseudo_threshold},
                 {"region_size", active.region_size},
                 {"per_image_budget", active.per_image_budget},
                 {"cycles", active.cycles},
                 {"ssl_retrain_count", active.ssl_retrain_count}};
  return j.dump(indent);
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  reject_unknown(j,
                 {"name", "seed", "mode", "output_dir", "write_snapshots", "write_checkpoints", "dataset", "model",
                  "optimizer", "schedule", "reco", "active"},
                 "config");
  read(j, "name", c.name, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m, "config");
    c.mode = mode_from_string(m);
  }
  read(j, "output_dir", c.output_dir, "config");
  read(j, "write_snapshots", c.write_snapshots, "config");
  read(j, "write_checkpoints", c.write_checkpoints, "config");

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d, {"seed", "n_train", "n_val", "height", "width", "num_classes", "shape_density", "color_noise", "dir"},
                   "dataset");
    read(d, "seed", c.dataset.seed, "dataset");
    read(d, "n_train", c.dataset.n_train, "dataset");
    read(d, "n_val", c.dataset.n_val, "dataset");
    read(d, "height", c.dataset.params.height, "dataset");
    read(d, "width", c.dataset.params.width, "dataset");
    read(d, "num_classes", c.dataset.params.num_classes, "dataset");
    read(d, "shape_density", c.dataset.params.shape_density, "dataset");
    read(d, "color_noise", c.dataset.params.color_noise, "dataset");
    read(d, "dir", c.dataset.dir, "dataset");
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, {"enc_channels", "dec_channels", "embed_dim", "dropout"}, "model");
    read(m, "enc_channels", c.model.enc_channels, "model");
    read(m, "dec_channels", c.model.dec_channels, "model");
    read(m, "embed_dim", c.model.embed_dim, "model");
    read(m, "dropout", c.model.dropout, "model");
  }
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    reject_unknown(o, {"learning_rate", "momentum", "weight_decay", "poly_power"}, "optimizer");
    read(o, "learning_rate", c.optimizer.learning_rate, "optimizer");
    read(o, "momentum", c.optimizer.momentum, "optimizer");
    read(o, "weight_decay", c.optimizer.weight_decay, "optimizer");
    read(o, "poly_power", c.optimizer.poly_power, "optimizer");
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    reject_unknown(s, {"epochs", "iters_per_epoch", "final_epoch_multiplier", "batch_labeled", "batch_unlabeled",
                       "reinit_each_cycle"},
                   "schedule");
    read(s, "epochs", c.schedule.epochs, "schedule");
    read(s, "iters_per_epoch", c.schedule.iters_per_epoch, "schedule");
    read(s, "final_epoch_multiplier", c.schedule.final_epoch_multiplier, "schedule");
    read(s, "batch_labeled", c.schedule.batch_labeled, "schedule");
    read(s, "batch_unlabeled", c.schedule.batch_unlabeled, "schedule");
    read(s, "reinit_each_cycle", c.schedule.reinit_each_cycle, "schedule");
  }
  if (j.contains("reco")) {
    const auto& r = j["reco"];
    reject_unknown(r, {"temperature", "confidence_threshold", "queries_per_class", "negatives_per_query", "weight"},
                   "reco");
    read(r, "temperature", c.reco.temperature, "reco");
    read(r, "confidence_threshold", c.reco.confidence_threshold, "reco");
    read(r, "queries_per_class", c.reco.queries_per_class, "reco");
    read(r, "negatives_per_query", c.reco.negatives_per_query, "reco");
    read(r, "weight", c.reco.weight, "reco");
  }
  if (j.contains("active")) {
    const auto& a = j["active"];
    reject_unknown(a, {"labeled_fraction", "pseudo_threshold", "region_size", "per_image_budget", "cycles",
                       "ssl_retrain_count"},
                   "active");
    read(a, "labeled_fraction", c.active.labeled_fraction, "active");
    read(a, "pseudo_threshold", c.active.pseudo_threshold, "active");
    read(a, "region_size", c.active.region_size, "active");
    read(a, "per_image_budget", c.active.per_image_budget, "active");
    read(a, "cycles", c.active.cycles, "active");
    read(a, "ssl_retrain_count", c.active.ssl_retrain_count, "active");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::content_hash() const { return git_blob_hash(to_json()); }

std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr))
    throw std::runtime_error("SHA-1 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

}  // namespace s4al
