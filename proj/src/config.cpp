#include "uem/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "uem/error.hpp"
#include "uem/textio.hpp"

namespace uem::config {

namespace {

using Json = nlohmann::ordered_json;

std::string bad(std::string_view key, std::string_view value, const char* want) {
  return "config key '" + std::string(key) + "': expected " + want + ", got '" + std::string(value) + "'";
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(bad(key, v, "a non-negative integer"));
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_real(std::string_view key, std::string_view v) {
  const auto d = textio::parse_double(v);
  if (!d || !std::isfinite(*d)) throw ConfigError(bad(key, v, "a finite number"));
  return *d;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(bad(key, v, "true or false"));
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const std::string_view item = v.substr(start, comma == std::string_view::npos ? v.npos : comma - start);
    out.push_back(to_size(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct Entry {
  KeyDoc doc;
  std::function<void(RunConfig&, std::string_view key, std::string_view)> set;
  std::function<Json(const RunConfig&)> get;
};

#define SIZE_KEY(name, field, help)                                                                   \
  Entry {                                                                                             \
    {name, help}, [](RunConfig& c, std::string_view k, std::string_view v) { c.field = to_size(k, v); }, \
        [](const RunConfig& c) { return Json(c.field); }                                              \
  }
#define REAL_KEY(name, field, help)                                                                   \
  Entry {                                                                                             \
    {name, help}, [](RunConfig& c, std::string_view k, std::string_view v) { c.field = to_real(k, v); }, \
        [](const RunConfig& c) { return Json(c.field); }                                              \
  }
#define BOOL_KEY(name, field, help)                                                                   \
  Entry {                                                                                             \
    {name, help}, [](RunConfig& c, std::string_view k, std::string_view v) { c.field = to_bool(k, v); }, \
        [](const RunConfig& c) { return Json(c.field); }                                              \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"seed", "root seed for data, init, shuffling and clustering"},
            [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = to_u64(k, v); },
            [](const RunConfig& c) { return Json(c.seed); }},
      Entry{{"data.setting", "closet | partial | openset"},
            [](RunConfig& c, std::string_view, std::string_view v) { c.data.setting = datagen::parse_setting(v); },
            [](const RunConfig& c) { return Json(std::string(datagen::to_string(c.data.setting))); }},
      SIZE_KEY("data.d_in", data.d_in, "input feature dimension"),
      SIZE_KEY("data.classes", data.classes, "size of the larger label space"),
      SIZE_KEY("data.samples_per_domain", data.samples_per_domain, "instances per domain"),
      REAL_KEY("data.separation", data.separation, "distance between class means"),
      REAL_KEY("data.noise", data.noise, "per-axis standard deviation around a class mean"),
      REAL_KEY("data.rotation_deg", data.shift.rotation_deg, "domain shift: rotation angle in a random plane"),
      REAL_KEY("data.scale_lo", data.shift.scale_lo, "domain shift: lower per-axis scale"),
      REAL_KEY("data.scale_hi", data.shift.scale_hi, "domain shift: upper per-axis scale"),
      REAL_KEY("data.translation_norm", data.shift.translation_norm,
               "domain shift: translation length (negative: separation / 2)"),
      REAL_KEY("data.private_distance", data.private_distance,
               "minimum private-to-shared mean distance in separations (0: off)"),
      SIZE_KEY("train.batch_size", train.batch_size, "instances per domain per step"),
      REAL_KEY("train.lr0", train.lr0, "initial learning rate of the cosine schedule"),
      REAL_KEY("train.momentum", train.momentum, "SGD momentum"),
      SIZE_KEY("stage1.epochs", train.epochs1, "instance/prototype epochs"),
      REAL_KEY("stage1.temperature", train.temperature, "contrastive temperature"),
      REAL_KEY("stage1.bank_momentum", train.bank_momentum, "memory bank momentum"),
      BOOL_KEY("stage1.sel_weight_gradient", train.sel_weight_gradient,
               "let gradients flow through the semantic-enhanced loss weights"),
      BOOL_KEY("stage1.normalize_dot", train.normalize_dot, "L2-normalize operands of similarity logits"),
      SIZE_KEY("stage2.epochs", train.epochs2, "adversarial matching epochs"),
      REAL_KEY("stage2.adv_weight", train.adv_weight, "weight of -L_DAL in the encoder step"),
      REAL_KEY("stage2.classifier_lr_scale", train.classifier_lr_scale, "domain classifier learning-rate factor"),
      Entry{{"model.hidden", "comma-separated ReLU layer widths (empty: linear encoder)"},
            [](RunConfig& c, std::string_view k, std::string_view v) { c.train.hidden = to_sizes(k, v); },
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.train.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(c.train.hidden[i]);
              return Json(s);
            }},
      SIZE_KEY("model.d_out", train.d_out, "feature dimension"),
      SIZE_KEY("model.classifier_hidden", train.classifier_hidden, "domain classifier hidden width"),
      Entry{{"model.init", "he_uniform | orthogonal"},
            [](RunConfig& c, std::string_view, std::string_view v) { c.train.init = encoder::parse_init(v); },
            [](const RunConfig& c) { return Json(std::string(encoder::to_string(c.train.init))); }},
      SIZE_KEY("cluster.k_min", train.k_min, "smallest k tried by the elbow search (0: 2)"),
      SIZE_KEY("cluster.k_max", train.k_max, "largest k tried (0: min(20, N/10))"),
      SIZE_KEY("cluster.restarts", train.kmeans_restarts, "k-means restarts per k"),
      BOOL_KEY("ablation.disable_prototype_merging", train.ablation.disable_prototype_merging,
               "unified structure = own + translated prototypes"),
      BOOL_KEY("ablation.disable_sel", train.ablation.disable_sel, "drop the semantic-enhanced loss"),
      BOOL_KEY("ablation.plain_adversarial", train.ablation.plain_adversarial, "drop the structure regulation"),
      BOOL_KEY("ablation.cosine_only_matcher", train.ablation.cosine_only_matcher,
               "cosine-nearest instance matching, always trusted"),
      BOOL_KEY("ablation.instance_only", train.ablation.instance_only,
               "instance discrimination only, for stage1.epochs + stage2.epochs epochs"),
      REAL_KEY("eval.percentile", eval.percentile, "detector threshold percentile"),
      Entry{{"eval.metric", "euclidean | cosine"},
            [](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "euclidean") c.eval.metric = retrieval::DistanceMetric::euclidean;
              else if (v == "cosine") c.eval.metric = retrieval::DistanceMetric::cosine;
              else throw ConfigError(bad(k, v, "euclidean or cosine"));
            },
            [](const RunConfig& c) {
              return Json(c.eval.metric == retrieval::DistanceMetric::cosine ? "cosine" : "euclidean");
            }},
      SIZE_KEY("eval.k_min", eval.k_min, "elbow range for the detector prototypes (0: default)"),
      SIZE_KEY("eval.k_max", eval.k_max, "elbow range upper end (0: default)"),
      SIZE_KEY("eval.restarts", eval.restarts, "k-means restarts for the detector prototypes"),
      BOOL_KEY("eval.merge", eval.merge, "merge prototypes when building the detector structure"),
  };
  return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef BOOL_KEY

std::string scalar_text(std::string_view key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return textio::format_double(v.get<double>());
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + scalar_text(key, v[i]);
    return s;
  }
  throw ConfigError("config key '" + std::string(key) + "': unsupported value " + v.dump());
}

void flatten(RunConfig& cfg, const std::string& prefix, const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(cfg, key, *it);
    else set(cfg, key, scalar_text(key, *it));
  }
}

}  // namespace

void RunConfig::finalize() {
  data.seed = seed;
  train.seed = seed;
  eval.seed = seed;
  data.validate();
  train.validate();
  if (!(eval.percentile >= 0.0 && eval.percentile <= 100.0)) throw ConfigError("eval.percentile must lie in [0, 100]");
  if (eval.restarts < 1) throw ConfigError("eval.restarts must be at least 1");
}

const std::vector<KeyDoc>& documented_keys() {
  static const std::vector<KeyDoc> docs = [] {
    std::vector<KeyDoc> d;
    for (const Entry& e : entries()) d.push_back(e.doc);
    return d;
  }();
  return docs;
}

void set(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const Entry& e : entries()) {
    if (e.doc.key == key) {
      e.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  flatten(cfg, "", j);
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  set(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void load_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::string text;
  try {
    text = textio::read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  apply_json(cfg, j);
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const Entry& e : entries()) j[e.doc.key] = e.get(cfg);
  return j;
}

RunConfig from_json(const nlohmann::json& j) {
  RunConfig cfg;
  apply_json(cfg, j);
  cfg.finalize();
  return cfg;
}

}  // namespace uem::config
