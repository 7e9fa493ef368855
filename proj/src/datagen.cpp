#include "uem/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "uem/error.hpp"
#include "uem/rng.hpp"
#include "uem/textio.hpp"

namespace uem::datagen {

namespace {

using Vec = std::vector<double>;

double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Vec random_normal(Rng& rng, std::size_t d) {
  Vec v(d);
  for (double& x : v) x = rng.normal();
  return v;
}

// n orthonormal vectors of dimension d (n <= d), Gram-Schmidt on Gaussian draws
std::vector<Vec> orthonormal(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<Vec> basis;
  while (basis.size() < n) {
    Vec v = random_normal(rng, d);
    for (const Vec& b : basis) {
      const double p = dot(v, b);
      for (std::size_t i = 0; i < d; ++i) v[i] -= p * b[i];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<int> iota_labels(std::size_t n) {
  std::vector<int> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>(i);
  return v;
}

std::vector<int> random_half(Rng& rng, std::size_t n) {
  std::vector<int> all = iota_labels(n);
  rng.shuffle(all);
  all.resize((n + 1) / 2);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<int> minus(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<Vec> class_means(const ScenarioConfig& cfg, const std::vector<int>& private_labels, Rng& rng) {
  const std::size_t c = cfg.classes, d = cfg.d_in;
  std::vector<Vec> means;
  if (c <= d) {
    // orthonormal directions scaled so every pair sits exactly `separation` apart
    const std::vector<Vec> basis = orthonormal(rng, c, d);
    const std::set<int> priv(private_labels.begin(), private_labels.end());
    for (std::size_t k = 0; k < c; ++k) {
      double r = cfg.separation / std::numbers::sqrt2;
      if (cfg.private_distance > 0.0 && priv.contains(static_cast<int>(k)))
        r = std::max(r, cfg.private_distance * cfg.separation);
      Vec m = basis[k];
      for (double& x : m) x *= r;
      means.push_back(std::move(m));
    }
    return means;
  }
  if (cfg.private_distance > 0.0) throw ConfigError("data.private_distance needs data.classes <= data.d_in");
  // more classes than dimensions: rejection sampling on a sphere
  const double radius = cfg.separation * std::sqrt(static_cast<double>(c)) / 2.0;
  std::size_t attempts = 0;
  while (means.size() < c) {
    if (++attempts > 200000) {
      throw ConfigError("data.separation too small for " + std::to_string(c) + " classes in " + std::to_string(d) +
                        " dimensions");
    }
    Vec v = random_normal(rng, d);
    const double n = std::sqrt(dot(v, v));
    if (n < 1e-12) continue;
    for (double& x : v) x *= radius / n;
    bool ok = true;
    for (const Vec& m : means) ok = ok && dist(m, v) >= cfg.separation;
    if (ok) means.push_back(std::move(v));
  }
  return means;
}

// rotate in a random 2-plane, scale per axis, translate
std::vector<Vec> shift_means(const ScenarioConfig& cfg, const std::vector<Vec>& src, Rng& rng) {
  const std::size_t d = cfg.d_in;
  const double theta = cfg.shift.rotation_deg * std::numbers::pi / 180.0;
  std::vector<Vec> plane;
  if (d >= 2) plane = orthonormal(rng, 2, d);
  Vec scale(d);
  for (double& s : scale) s = rng.uniform(cfg.shift.scale_lo, cfg.shift.scale_hi);
  Vec t = random_normal(rng, d);
  const double tn = std::sqrt(dot(t, t));
  const double norm = cfg.shift.translation_norm < 0.0 ? cfg.separation / 2.0 : cfg.shift.translation_norm;
  for (double& x : t) x = tn > 0.0 ? x * norm / tn : 0.0;

  std::vector<Vec> out;
  for (Vec x : src) {
    if (!plane.empty()) {
      const Vec& u = plane[0];
      const Vec& v = plane[1];
      const double xu = dot(x, u), xv = dot(x, v);
      for (std::size_t i = 0; i < d; ++i)
        x[i] += (std::cos(theta) - 1.0) * (xu * u[i] + xv * v[i]) + std::sin(theta) * (xu * v[i] - xv * u[i]);
    }
    for (std::size_t i = 0; i < d; ++i) x[i] = x[i] * scale[i] + t[i];
    out.push_back(std::move(x));
  }
  return out;
}

DomainDataset sample_domain(const ScenarioConfig& cfg, const std::vector<Vec>& means, const std::vector<int>& space,
                            std::vector<std::size_t>& counts, Rng& rng) {
  counts = class_counts(cfg.samples_per_domain, space.size());
  std::vector<std::pair<Vec, int>> rows;
  rows.reserve(cfg.samples_per_domain);
  for (std::size_t k = 0; k < space.size(); ++k) {
    const Vec& m = means[static_cast<std::size_t>(space[k])];
    for (std::size_t n = 0; n < counts[k]; ++n) {
      Vec x = m;
      for (double& v : x) v += cfg.noise * rng.normal();
      rows.emplace_back(std::move(x), space[k]);
    }
  }
  rng.shuffle(rows);
  DomainDataset ds;
  ds.features = Tensor(diffkit::Shape{rows.size(), cfg.d_in});
  std::vector<int> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].first.begin(), rows[i].first.end(), ds.features.row(i).begin());
    labels.push_back(rows[i].second);
  }
  ds.labels = std::move(labels);
  return ds;
}

Tensor to_tensor(const std::vector<Vec>& v) {
  Tensor t(diffkit::Shape{v.size(), v.front().size()});
  for (std::size_t i = 0; i < v.size(); ++i) std::copy(v[i].begin(), v[i].end(), t.row(i).begin());
  return t;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::closet: return "closet";
    case Setting::partial: return "partial";
    case Setting::openset: return "openset";
  }
  return "closet";
}

Setting parse_setting(std::string_view s) {
  if (s == "closet") return Setting::closet;
  if (s == "partial") return Setting::partial;
  if (s == "openset") return Setting::openset;
  throw ConfigError("data.setting: expected closet, partial or openset, got '" + std::string(s) + "'");
}

void ScenarioConfig::validate() const {
  if (d_in < 1) throw ConfigError("data.d_in must be at least 1");
  if (classes < 1) throw ConfigError("data.classes must be at least 1");
  if (samples_per_domain < classes) throw ConfigError("data.samples_per_domain must be at least data.classes");
  if (!(separation > 0.0) || !std::isfinite(separation)) throw ConfigError("data.separation must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("data.noise must be non-negative");
  if (!(shift.scale_lo > 0.0) || !(shift.scale_hi >= shift.scale_lo))
    throw ConfigError("data.scale_lo and data.scale_hi must satisfy 0 < lo <= hi");
  if (!std::isfinite(shift.rotation_deg)) throw ConfigError("data.rotation_deg must be finite");
  if (!(private_distance >= 0.0)) throw ConfigError("data.private_distance must be non-negative");
}

const std::vector<int>& DomainDataset::require_labels(std::string_view what) const {
  if (!labels) throw DataError(std::string(what) + ": dataset has no label column; evaluation needs labels");
  return *labels;
}

std::vector<std::size_t> class_counts(std::size_t samples, std::size_t n) {
  std::vector<std::size_t> c(n, samples / n);
  for (std::size_t k = 0; k < samples % n; ++k) ++c[k];
  return c;
}

Scenario gen_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng label_rng = Rng::stream(cfg.seed, "data.labels");
  Rng mean_rng = Rng::stream(cfg.seed, "data.means");
  Rng shift_rng = Rng::stream(cfg.seed, "data.shift");
  Rng sample_a = Rng::stream(cfg.seed, "data.samples.a");
  Rng sample_b = Rng::stream(cfg.seed, "data.samples.b");

  Scenario s;
  LabelSpaces& sp = s.spaces;
  switch (cfg.setting) {
    case Setting::closet:
      sp.a = sp.b = iota_labels(cfg.classes);
      break;
    case Setting::partial:
      sp.b = iota_labels(cfg.classes);
      sp.a = random_half(label_rng, cfg.classes);
      break;
    case Setting::openset:
      sp.a = iota_labels(cfg.classes);
      sp.b = random_half(label_rng, cfg.classes);
      break;
  }
  std::set_intersection(sp.a.begin(), sp.a.end(), sp.b.begin(), sp.b.end(), std::back_inserter(sp.shared));
  sp.private_a = minus(sp.a, sp.b);
  sp.private_b = minus(sp.b, sp.a);

  std::vector<int> priv = sp.private_a;
  priv.insert(priv.end(), sp.private_b.begin(), sp.private_b.end());
  std::vector<Vec> ma = class_means(cfg, priv, mean_rng);
  Rng shift_draw = shift_rng;
  std::vector<Vec> mb = shift_means(cfg, ma, shift_draw);
  if (cfg.private_distance > 0.0) {
    // the shift can pull a private mean toward the other domain's classes;
    // push it outward until the gap holds across domains too
    const double gap = cfg.private_distance * cfg.separation;
    auto too_close = [&](const Vec& m, const std::vector<Vec>& others, const std::vector<int>& labels) {
      for (int l : labels)
        if (std::sqrt(sq_dist(m, others[static_cast<std::size_t>(l)])) < gap) return true;
      return false;
    };
    for (int round = 0; round < 200; ++round) {
      bool moved = false;
      for (int p : sp.private_a) {
        if (!too_close(ma[static_cast<std::size_t>(p)], mb, sp.b)) continue;
        for (double& x : ma[static_cast<std::size_t>(p)]) x *= 1.05;
        moved = true;
      }
      for (int p : sp.private_b) {
        if (!too_close(mb[static_cast<std::size_t>(p)], ma, sp.a)) continue;
        for (double& x : ma[static_cast<std::size_t>(p)]) x *= 1.05;
        moved = true;
      }
      if (!moved) break;
      shift_draw = shift_rng;
      mb = shift_means(cfg, ma, shift_draw);
    }
  }
  s.means_a = to_tensor(ma);
  s.means_b = to_tensor(mb);
  s.a = sample_domain(cfg, ma, sp.a, s.counts_a, sample_a);
  s.b = sample_domain(cfg, mb, sp.b, s.counts_b, sample_b);
  return s;
}

nlohmann::ordered_json config_json(const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["setting"] = to_string(cfg.setting);
  j["d_in"] = cfg.d_in;
  j["classes"] = cfg.classes;
  j["samples_per_domain"] = cfg.samples_per_domain;
  j["separation"] = cfg.separation;
  j["noise"] = cfg.noise;
  j["shift"] = {{"rotation_deg", cfg.shift.rotation_deg},
                {"scale_lo", cfg.shift.scale_lo},
                {"scale_hi", cfg.shift.scale_hi},
                {"translation_norm", cfg.shift.translation_norm < 0.0 ? cfg.separation / 2.0
                                                                      : cfg.shift.translation_norm}};
  j["private_distance"] = cfg.private_distance;
  j["seed"] = cfg.seed;
  return j;
}

nlohmann::ordered_json manifest_json(const ScenarioConfig& cfg, const Scenario& s, const std::string& file_a,
                                     const std::string& file_b) {
  nlohmann::ordered_json j;
  j["files"] = {{"A", file_a}, {"B", file_b}};
  j["num_instances"] = {{"A", s.a.size()}, {"B", s.b.size()}};
  j["label_space"] = {{"A", s.spaces.a}, {"B", s.spaces.b}};
  j["shared"] = s.spaces.shared;
  j["private"] = {{"A", s.spaces.private_a}, {"B", s.spaces.private_b}};
  j["seed"] = cfg.seed;
  j["config"] = config_json(cfg);
  return j;
}

std::string domain_csv(const DomainDataset& ds) {
  std::string out;
  const std::size_t d = ds.dim();
  for (std::size_t k = 0; k < d; ++k) {
    if (k) out += ',';
    out += 'f' + std::to_string(k);
  }
  if (ds.labels) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      if (k) out += ',';
      textio::append_double(out, ds.features.at(i, k));
    }
    if (ds.labels) out += ',' + std::to_string((*ds.labels)[i]);
    out += '\n';
  }
  return out;
}

void save_domain(const std::filesystem::path& path, const DomainDataset& ds) {
  textio::write_file(path, domain_csv(ds));
}

DomainDataset parse_domain(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines = split(text, '\n');
  while (!lines.empty() && (lines.back().empty() || lines.back() == "\r")) lines.pop_back();
  if (lines.empty()) throw DataError(source + ": empty file");

  auto strip = [](std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
  };
  const std::vector<std::string_view> header = split(strip(lines[0]), ',');
  const bool labeled = header.back() == "label";
  const std::size_t d = header.size() - (labeled ? 1 : 0);
  std::string expected;
  for (std::size_t k = 0; k < d; ++k) expected += (k ? ",f" : "f") + std::to_string(k);
  expected += "[,label]";
  if (d == 0) throw DataError(source + ": header has no feature columns; expected " + expected);
  for (std::size_t k = 0; k < d; ++k) {
    if (header[k] != "f" + std::to_string(k)) {
      throw DataError(source + ": header mismatch at column " + std::to_string(k + 1) + " ('" +
                      std::string(header[k]) + "'); expected columns " + expected);
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t rows = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string where = source + " line " + std::to_string(ln + 1);
    const std::string_view line = strip(lines[ln]);
    if (line.empty()) throw DataError(where + ": empty row");
    const std::vector<std::string_view> fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < d; ++k) {
      const auto v = textio::parse_double(fields[k]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(where + ": column f" + std::to_string(k) + " is not a finite number ('" +
                        std::string(fields[k]) + "')");
      }
      values.push_back(*v);
    }
    if (labeled) {
      const auto l = textio::parse_int(fields[d]);
      if (!l) throw DataError(where + ": label is not an integer ('" + std::string(fields[d]) + "')");
      labels.push_back(static_cast<int>(*l));
    }
    ++rows;
  }
  if (rows == 0) throw DataError(source + ": no data rows");
  DomainDataset ds;
  ds.features = Tensor(diffkit::Shape{rows, d}, std::move(values));
  if (labeled) ds.labels = std::move(labels);
  return ds;
}

DomainDataset load_domain(const std::filesystem::path& path) {
  return parse_domain(textio::read_file(path), path.string());
}

}  // namespace uem::datagen
