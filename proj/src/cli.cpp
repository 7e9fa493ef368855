#include "uem/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "uem/checkpoint.hpp"
#include "uem/config.hpp"
#include "uem/datagen.hpp"
#include "uem/error.hpp"
#include "uem/hashing.hpp"
#include "uem/log.hpp"
#include "uem/textio.hpp"
#include "uem/trainer.hpp"

namespace uem::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using diffkit::Tensor;

namespace {

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file (flat dotted keys or nested sections)")
        ->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one config key, KEY=VALUE (repeatable)");
    seed_opt = app->add_option("--seed", seed, "root seed (overrides the config)");
  }

  // base: config recorded in a checkpoint, if any
  config::RunConfig resolve(const nlohmann::json* base = nullptr) const {
    config::RunConfig cfg;
    if (base != nullptr) config::apply_json(cfg, *base);
    if (!config_file.empty()) config::load_file(cfg, config_file);
    for (const std::string& o : overrides) config::apply_override(cfg, o);
    if (seed_opt != nullptr && seed_opt->count() > 0) cfg.seed = seed;
    cfg.finalize();
    return cfg;
  }
};

// manifest.json: command, config, seed, hashed inputs and outputs
class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir) : command_(std::move(command)), out_(std::move(out_dir)) {}

  void input(const std::string& name, const fs::path& path) { inputs_.emplace_back(name, path); }
  void output(const std::string& name, const fs::path& relative) { outputs_.emplace_back(name, relative); }
  void extra(const std::string& key, Json value) { extra_[key] = std::move(value); }

  void write(const config::RunConfig& cfg) const {
    Json j;
    j["tool"] = "uem";
    j["version"] = kVersion;
    j["command"] = command_;
    j["seed"] = cfg.seed;
    j["config"] = config::to_json(cfg);
    Json in = Json::object();
    for (const auto& [name, p] : inputs_) in[name] = {{"path", p.string()}, {"sha256", hashing::sha256_file(p)}};
    j["inputs"] = in;
    Json outs = Json::object();
    for (const auto& [name, p] : outputs_)
      outs[name] = {{"path", p.generic_string()}, {"sha256", hashing::sha256_file(out_ / p)}};
    j["outputs"] = outs;
    for (auto it = extra_.begin(); it != extra_.end(); ++it) j[it.key()] = it.value();
    textio::write_file(out_ / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_;
  std::vector<std::pair<std::string, fs::path>> inputs_;
  std::vector<std::pair<std::string, fs::path>> outputs_;
  Json extra_ = Json::object();
};

void write_output(Manifest& m, const fs::path& out_dir, const std::string& name, const fs::path& rel,
                  std::string_view contents) {
  textio::write_file(out_dir / rel, contents);
  m.output(name, rel);
}

struct TrainOutputs {
  trainer::TrainState state;
  trainer::TrainLogs logs;
};

void write_logs(Manifest& m, const fs::path& out, const fs::path& dir, const trainer::TrainLogs& logs) {
  if (!logs.stage1.empty()) write_output(m, out, (dir / "stage1.csv").string(), dir / "stage1.csv", logs.stage1);
  if (!logs.stage2.empty()) write_output(m, out, (dir / "stage2.csv").string(), dir / "stage2.csv", logs.stage2);
  if (!logs.lr.empty()) write_output(m, out, (dir / "lr.csv").string(), dir / "lr.csv", logs.lr);
  if (!logs.match_audit.empty())
    write_output(m, out, (dir / "match_audit.csv").string(), dir / "match_audit.csv", logs.match_audit);
}

std::string variant_slug(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!s.empty() && s.back() != '_') s += '_';
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? textio::format_double(*v) : "NA"; }

retrieval::Evaluation run_eval(const encoder::EncoderParams& enc, const datagen::DomainDataset& q,
                               const datagen::DomainDataset& r, const config::RunConfig& cfg) {
  const auto& ql = q.require_labels("eval (query)");
  const auto& rl = r.require_labels("eval (retrieval)");
  return retrieval::evaluate(enc, q.features, ql, r.features, rl, cfg.eval);
}

void require_dim(const encoder::EncoderParams& enc, const datagen::DomainDataset& d, const std::string& what) {
  if (d.dim() != enc.input_dim()) {
    throw DataError(what + " has " + std::to_string(d.dim()) + " feature columns; the checkpoint expects " +
                    std::to_string(enc.input_dim()));
  }
}

std::string config_key_help() {
  std::string s = "\nConfig keys (for --config files and --set KEY=VALUE):\n";
  for (const auto& k : config::documented_keys()) s += "  " + k.key + std::string(k.key.size() < 36 ? 36 - k.key.size() : 1, ' ') + k.help + "\n";
  s += "\nEnvironment: UEM_LOG=error|info|debug controls log verbosity.\nExit codes: 0 ok, 2 usage/config, 3 data, 4 numeric failure.\n";
  return s;
}

int run(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  app.description("Universal unsupervised cross-domain retrieval: data generation, two-stage training, retrieval and evaluation.");
  app.require_subcommand(1);
  app.footer(config_key_help());
  app.set_version_flag("--version", kVersion);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic two-domain scenario");
  std::string gen_out;
  ConfigFlags gen_cfg;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen_cfg.attach(gen);

  // train
  auto* train = app.add_subcommand("train", "train the encoder (stage 1, stage 2, or both)");
  std::string tr_a, tr_b, tr_out, tr_from, tr_stage = "all";
  ConfigFlags tr_cfg;
  train->add_option("--data-a", tr_a, "domain A feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--data-b", tr_b, "domain B feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "output directory")->required();
  train->add_option("--stage", tr_stage, "1, 2 or all")->check(CLI::IsMember({"1", "2", "all"}));
  train->add_option("--from", tr_from, "resume from a checkpoint (required for --stage 2)")->check(CLI::ExistingFile);
  tr_cfg.attach(train);

  // embed
  auto* embed = app.add_subcommand("embed", "dump encoder features of a dataset");
  std::string em_ckpt, em_data, em_out;
  bool em_pca = false;
  ConfigFlags em_cfg;
  embed->add_option("--checkpoint", em_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  embed->add_option("--data", em_data, "feature CSV")->required()->check(CLI::ExistingFile);
  embed->add_option("--out", em_out, "output directory")->required();
  embed->add_flag("--pca", em_pca, "also write a 2-D PCA projection of the features");
  em_cfg.attach(embed);

  // retrieve
  auto* retr = app.add_subcommand("retrieve", "rank the retrieval domain for every query");
  std::string re_ckpt, re_q, re_r, re_out;
  std::size_t re_k = 10;
  bool re_no_detector = false;
  ConfigFlags re_cfg;
  retr->add_option("--checkpoint", re_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  retr->add_option("--query", re_q, "query-domain feature CSV")->required()->check(CLI::ExistingFile);
  retr->add_option("--retrieval", re_r, "retrieval-domain feature CSV")->required()->check(CLI::ExistingFile);
  retr->add_option("--out", re_out, "output directory")->required();
  retr->add_option("--k", re_k, "items returned per query")->check(CLI::PositiveNumber);
  retr->add_flag("--no-detector", re_no_detector, "never answer null");
  re_cfg.attach(retr);

  // eval
  auto* ev = app.add_subcommand("eval", "mAP@All and open-set accuracy on labeled datasets");
  std::string ev_ckpt, ev_q, ev_r, ev_out, ev_setting;
  bool ev_dump = false;
  ConfigFlags ev_cfg;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--query", ev_q, "labeled query-domain CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--retrieval", ev_r, "labeled retrieval-domain CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "output directory")->required();
  ev->add_option("--setting", ev_setting, "setting name recorded in the metrics (default: inferred from labels)");
  ev->add_flag("--dump-outcomes", ev_dump, "also write per-query outcomes CSV");
  ev_cfg.attach(ev);

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and evaluate the full model and four ablations");
  std::string ab_a, ab_b, ab_out;
  ConfigFlags ab_cfg;
  ab->add_option("--data-a", ab_a, "labeled domain A (query) CSV")->required()->check(CLI::ExistingFile);
  ab->add_option("--data-b", ab_b, "labeled domain B (retrieval) CSV")->required()->check(CLI::ExistingFile);
  ab->add_option("--out", ab_out, "output directory")->required();
  ab_cfg.attach(ab);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    const config::RunConfig cfg = gen_cfg.resolve();
    const fs::path out_dir(gen_out);
    const datagen::Scenario s = datagen::gen_scenario(cfg.data);
    Manifest m("gen", out_dir);
    write_output(m, out_dir, "data_a", "data/A.csv", datagen::domain_csv(s.a));
    write_output(m, out_dir, "data_b", "data/B.csv", datagen::domain_csv(s.b));
    m.extra("scenario", datagen::manifest_json(cfg.data, s, "data/A.csv", "data/B.csv"));
    m.write(cfg);
    out << "wrote " << (out_dir / "data/A.csv").string() << " (" << s.a.size() << " rows) and "
        << (out_dir / "data/B.csv").string() << " (" << s.b.size() << " rows)\n";
    return 0;
  }

  if (train->parsed()) {
    const fs::path out_dir(tr_out);
    const datagen::DomainDataset a = datagen::load_domain(tr_a);
    const datagen::DomainDataset b = datagen::load_domain(tr_b);
    std::optional<checkpoint::Loaded> resumed;
    if (!tr_from.empty()) resumed = checkpoint::load(tr_from);
    if (tr_stage == "2" && !resumed) throw ConfigError("--stage 2 needs --from <stage-1 checkpoint>");
    const config::RunConfig cfg = tr_cfg.resolve(resumed ? &resumed->run_config : nullptr);

    trainer::TrainState state;
    if (resumed) {
      state = std::move(resumed->state);
      state.config = cfg.train;
      require_dim(state.encoder, a, tr_a);
      require_dim(state.encoder, b, tr_b);
      if (state.bank_a.size() != a.size() || state.bank_b.size() != b.size())
        throw DataError("datasets do not match the checkpoint's memory banks");
    } else {
      state = trainer::init_state(cfg.train, a.features, b.features);
    }
    trainer::TrainLogs logs;
    Manifest m("train", out_dir);
    m.input("data_a", tr_a);
    m.input("data_b", tr_b);
    if (!tr_from.empty()) m.input("from", tr_from);
    const Json cfg_json = config::to_json(cfg);
    if (tr_stage == "1" || tr_stage == "all") {
      trainer::run_stage1(state, a.features, b.features, logs);
      write_output(m, out_dir, "checkpoint_stage1", "checkpoints/stage1.json", checkpoint::serialize(state, cfg_json));
    }
    if (tr_stage == "2" || tr_stage == "all") {
      trainer::run_stage2(state, a.features, b.features, logs);
      write_output(m, out_dir, "checkpoint_final", "checkpoints/final.json", checkpoint::serialize(state, cfg_json));
    }
    write_logs(m, out_dir, "logs", logs);
    if (state.frozen) m.extra("frozen_encoder_sha256", trainer::encoder_hash(*state.frozen));
    m.extra("encoder_sha256", trainer::encoder_hash(state.encoder));
    m.write(cfg);
    out << "trained " << state.stage1_epochs_done << " + " << state.stage2_epochs_done << " epochs; "
        << "checkpoints under " << (out_dir / "checkpoints").string() << "\n";
    return 0;
  }

  if (embed->parsed()) {
    const fs::path out_dir(em_out);
    checkpoint::Loaded ck = checkpoint::load(em_ckpt);
    const config::RunConfig cfg = em_cfg.resolve(&ck.run_config);
    const datagen::DomainDataset d = datagen::load_domain(em_data);
    require_dim(ck.state.encoder, d, em_data);
    datagen::DomainDataset f{encoder::encode(ck.state.encoder, d.features), d.labels};
    Manifest m("embed", out_dir);
    m.input("checkpoint", em_ckpt);
    m.input("data", em_data);
    const std::string stem = fs::path(em_data).stem().string();
    write_output(m, out_dir, "features", "embeddings/" + stem + ".csv", datagen::domain_csv(f));
    if (em_pca) {
      const Tensor p = pca2(f.features);
      std::string csv = "pc0,pc1";
      csv += f.labels ? ",label\n" : "\n";
      for (std::size_t i = 0; i < p.rows(); ++i) {
        csv += textio::format_double(p.at(i, 0)) + "," + textio::format_double(p.at(i, 1));
        if (f.labels) csv += "," + std::to_string((*f.labels)[i]);
        csv += "\n";
      }
      write_output(m, out_dir, "pca2", "embeddings/" + stem + "_pca2.csv", csv);
    }
    m.write(cfg);
    out << "embedded " << d.size() << " rows\n";
    return 0;
  }

  if (retr->parsed()) {
    const fs::path out_dir(re_out);
    checkpoint::Loaded ck = checkpoint::load(re_ckpt);
    const config::RunConfig cfg = re_cfg.resolve(&ck.run_config);
    const datagen::DomainDataset q = datagen::load_domain(re_q);
    const datagen::DomainDataset r = datagen::load_domain(re_r);
    require_dim(ck.state.encoder, q, re_q);
    require_dim(ck.state.encoder, r, re_r);
    const Tensor qf = encoder::encode(ck.state.encoder, q.features);
    const Tensor rf = encoder::encode(ck.state.encoder, r.features);
    std::optional<retrieval::Detector> det;
    if (!re_no_detector) det = retrieval::build_detector(qf, rf, cfg.eval);
    std::vector<retrieval::RetrievalOutcome> outcomes;
    for (std::size_t i = 0; i < qf.rows(); ++i)
      outcomes.push_back(retrieval::retrieve(i, qf.row(i), rf, re_k, det ? &*det : nullptr, cfg.eval.metric));
    Manifest m("retrieve", out_dir);
    m.input("checkpoint", re_ckpt);
    m.input("query", re_q);
    m.input("retrieval", re_r);
    write_output(m, out_dir, "outcomes", "metrics/outcomes.csv", retrieval::outcomes_csv(outcomes));
    if (det) m.extra("eta", det->eta);
    m.write(cfg);
    const auto nulls = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.is_null; });
    out << "retrieved " << outcomes.size() << " queries, " << nulls << " null\n";
    return 0;
  }

  if (ev->parsed()) {
    const fs::path out_dir(ev_out);
    checkpoint::Loaded ck = checkpoint::load(ev_ckpt);
    const config::RunConfig cfg = ev_cfg.resolve(&ck.run_config);
    const datagen::DomainDataset q = datagen::load_domain(ev_q);
    const datagen::DomainDataset r = datagen::load_domain(ev_r);
    require_dim(ck.state.encoder, q, ev_q);
    require_dim(ck.state.encoder, r, ev_r);
    const retrieval::Evaluation e = run_eval(ck.state.encoder, q, r, cfg);
    const std::string setting = ev_setting.empty() ? infer_setting(*q.labels, *r.labels) : ev_setting;
    const Json metrics = metrics_json(setting, e, cfg.eval.percentile, cfg.seed, hashing::sha256_file(ev_ckpt));
    Manifest m("eval", out_dir);
    m.input("checkpoint", ev_ckpt);
    m.input("query", ev_q);
    m.input("retrieval", ev_r);
    write_output(m, out_dir, "metrics", "metrics/metrics.json", metrics.dump(2) + "\n");
    if (ev_dump) write_output(m, out_dir, "outcomes", "metrics/outcomes.csv", retrieval::outcomes_csv(e.outcomes));
    m.write(cfg);
    out << metrics.dump(2) << "\n";
    return 0;
  }

  if (ab->parsed()) {
    const fs::path out_dir(ab_out);
    const config::RunConfig base = ab_cfg.resolve();
    const datagen::DomainDataset a = datagen::load_domain(ab_a);
    const datagen::DomainDataset b = datagen::load_domain(ab_b);
    a.require_labels("ablate (domain A)");
    b.require_labels("ablate (domain B)");
    struct Variant {
      std::string name;
      trainer::Ablation flags;
    };
    std::vector<Variant> variants(5);
    variants[0].name = "full";
    variants[1].name = "w/o P.M.";
    variants[1].flags.disable_prototype_merging = true;
    variants[2].name = "w/o SEL";
    variants[2].flags.disable_sel = true;
    variants[3].name = "w/o SPDA";
    variants[3].flags.plain_adversarial = true;
    variants[4].name = "alt-matcher";
    variants[4].flags.cosine_only_matcher = true;

    Manifest m("ablate", out_dir);
    m.input("data_a", ab_a);
    m.input("data_b", ab_b);
    std::string csv = "variant,map_all,openset_accuracy\n";
    Json rows = Json::array();
    const std::string setting = infer_setting(*a.labels, *b.labels);
    for (const Variant& v : variants) {
      config::RunConfig cfg = base;
      cfg.train.ablation = v.flags;
      cfg.finalize();
      trainer::TrainLogs logs;
      const trainer::TrainState st = trainer::train(cfg.train, a.features, b.features, logs);
      const std::string slug = variant_slug(v.name);
      write_output(m, out_dir, "checkpoint_" + slug, "checkpoints/" + slug + ".json",
                   checkpoint::serialize(st, config::to_json(cfg)));
      write_logs(m, out_dir, fs::path("logs") / slug, logs);
      const retrieval::Evaluation e = run_eval(st.encoder, a, b, cfg);
      csv += v.name + "," + fmt_opt(e.metrics.map_all) + "," + fmt_opt(e.metrics.openset_accuracy) + "\n";
      Json row;
      row["variant"] = v.name;
      row["map_all"] = e.metrics.map_all ? Json(*e.metrics.map_all) : Json(nullptr);
      row["openset_accuracy"] = e.metrics.openset_accuracy ? Json(*e.metrics.openset_accuracy) : Json(nullptr);
      row["eta"] = e.detector.eta;
      rows.push_back(row);
      out << v.name << ": map_all " << fmt_opt(e.metrics.map_all) << ", openset_accuracy "
          << fmt_opt(e.metrics.openset_accuracy) << "\n";
    }
    Json doc;
    doc["setting"] = setting;
    doc["seed"] = base.seed;
    doc["rows"] = rows;
    write_output(m, out_dir, "ablation_csv", "metrics/ablation.csv", csv);
    write_output(m, out_dir, "ablation_json", "metrics/ablation.json", doc.dump(2) + "\n");
    m.write(base);
    return 0;
  }
  return 2;
}

}  // namespace

std::string infer_setting(std::span<const int> query_labels, std::span<const int> retrieval_labels) {
  const std::set<int> q(query_labels.begin(), query_labels.end());
  const std::set<int> r(retrieval_labels.begin(), retrieval_labels.end());
  if (q == r) return "closet";
  if (std::includes(r.begin(), r.end(), q.begin(), q.end())) return "partial";
  if (std::includes(q.begin(), q.end(), r.begin(), r.end())) return "openset";
  return "mixed";
}

nlohmann::ordered_json metrics_json(const std::string& setting, const retrieval::Evaluation& ev, double percentile,
                                    std::uint64_t seed, const std::string& checkpoint_hash) {
  Json j;
  j["setting"] = setting;
  j["map_all"] = ev.metrics.map_all ? Json(*ev.metrics.map_all) : Json(nullptr);
  j["openset_accuracy"] = ev.metrics.openset_accuracy ? Json(*ev.metrics.openset_accuracy) : Json(nullptr);
  j["num_queries"] = ev.metrics.num_queries;
  j["num_private"] = ev.metrics.num_private;
  j["eta"] = ev.detector.eta;
  j["seed"] = seed;
  j["checkpoint_hash"] = checkpoint_hash;
  j["num_shared"] = ev.metrics.num_shared;
  j["num_null"] = ev.metrics.num_null;
  j["num_skipped"] = ev.metrics.skipped;
  j["percentile"] = percentile;
  return j;
}

Tensor pca2(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0 || x.size() == 0) throw DataError("pca2: empty input");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += x.at(i, k);
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += (x.at(i, a) - mean[a]) * (x.at(i, b) - mean[b]);
  double trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += cov[k * d + k];

  Tensor out(diffkit::Shape{n, 2});
  std::vector<std::vector<double>> axes;
  auto orthogonalize = [&](std::vector<double>& v) {
    for (const auto& a : axes) {
      double p = 0.0;
      for (std::size_t k = 0; k < d; ++k) p += v[k] * a[k];
      for (std::size_t k = 0; k < d; ++k) v[k] -= p * a[k];
    }
    double norm = 0.0;
    for (double z : v) norm += z * z;
    return std::sqrt(norm);
  };
  for (std::size_t axis = 0; axis < 2 && axis < d; ++axis) {
    // power iteration from a fixed start, kept orthogonal to earlier axes
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = 1.0 / static_cast<double>(k + 1) + (k == axis ? 1.0 : 0.0);
    double norm = orthogonalize(v);
    if (norm == 0.0) break;
    for (double& z : v) z /= norm;
    for (int it = 0; it < 1000; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) w[a] += cov[a * d + b] * v[b];
      norm = orthogonalize(w);
      // remaining variance is rounding noise
      if (norm <= 1e-12 * trace) break;
      for (std::size_t k = 0; k < d; ++k) v[k] = w[k] / norm;
    }
    std::size_t big = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(v[k]) > std::abs(v[big])) big = k;
    if (v[big] < 0.0)
      for (double& z : v) z = -z;
    for (std::size_t i = 0; i < n; ++i) {
      double p = 0.0;
      for (std::size_t k = 0; k < d; ++k) p += (x.at(i, k) - mean[k]) * v[k];
      out.at(i, axis) = p;
    }
    axes.push_back(std::move(v));
  }
  return out;
}

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"uem", "uem"};
  try {
    return run(app, args, out, err);
  } catch (const ConfigError& e) {
    err << "uem: config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "uem: data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    err << "uem: numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "uem: error: " << e.what() << "\n";
    return 1;
  }
}

int execute(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return execute(args, std::cout, std::cerr);
}

}  // namespace uem::cli
