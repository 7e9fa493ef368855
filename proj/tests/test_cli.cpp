#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "uem/cli.hpp"
#include "uem/config.hpp"
#include "uem/datagen.hpp"
#include "uem/textio.hpp"

using namespace uem;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::execute(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uem_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<std::string> kSmall = {
    "--set", "data.samples_per_domain=60", "--set", "data.d_in=4",        "--set", "data.classes=4",
    "--set", "stage1.epochs=1",            "--set", "stage2.epochs=1",    "--set", "model.d_out=6",
    "--set", "train.batch_size=20",        "--set", "cluster.k_max=4",    "--set", "train.lr0=1e-4"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

}  // namespace

TEST_CASE("usage and config errors exit 2") {
  const auto dir = fresh_dir("usage");
  auto r = run({"gen", "--out", dir.string(), "--set", "stage9.epochs=3"});
  CHECK(r.code == 2);
  CHECK(r.err.find("stage9.epochs") != std::string::npos);
  CHECK(run({"gen", "--out", dir.string(), "--set", "train.lr0=abc"}).code == 2);
  CHECK(run({"gen", "--out", dir.string(), "--bogus-flag"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);

  r = run({"--help"});
  CHECK(r.code == 0);
  for (const auto& k : config::documented_keys()) CHECK(r.out.find(k.key) != std::string::npos);
  r = run({"train", "--help"});
  CHECK(r.code == 0);
  for (const char* flag : {"--data-a", "--data-b", "--out", "--stage", "--from", "--config", "--set", "--seed"})
    CHECK(r.out.find(flag) != std::string::npos);
  CHECK(run({"--version"}).out.find(cli::kVersion) != std::string::npos);
}

TEST_CASE("gen, train, embed, retrieve, eval") {
  const auto dir = fresh_dir("pipeline");
  REQUIRE(run(with_small({"gen", "--out", dir.string(), "--seed", "5", "--set", "data.setting=openset"})).code == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  const std::string a = (dir / "data/A.csv").string(), b = (dir / "data/B.csv").string();

  const auto train_dir = dir / "run";
  auto r = run(with_small({"train", "--data-a", a, "--data-b", b, "--out", train_dir.string(), "--seed", "5"}));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto ckpt = (train_dir / "checkpoints/final.json").string();
  CHECK(fs::exists(train_dir / "checkpoints/stage1.json"));
  CHECK(fs::exists(train_dir / "logs/stage1.csv"));
  CHECK(fs::exists(train_dir / "logs/match_audit.csv"));
  const auto manifest = nlohmann::json::parse(textio::read_file(train_dir / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["inputs"]["data_a"]["sha256"].get<std::string>().size() == 64);
  CHECK(manifest["outputs"]["checkpoint_final"]["path"] == "checkpoints/final.json");

  // resume stage 2 from the stage-1 checkpoint reproduces the full run
  const auto split = dir / "split";
  REQUIRE(run(with_small({"train", "--data-a", a, "--data-b", b, "--out", split.string(), "--seed", "5", "--stage",
                          "1"})).code == 0);
  REQUIRE(run({"train", "--data-a", a, "--data-b", b, "--out", split.string(), "--stage", "2", "--from",
               (split / "checkpoints/stage1.json").string()}).code == 0);
  CHECK(textio::read_file(split / "checkpoints/final.json") == textio::read_file(ckpt));
  CHECK(run({"train", "--data-a", a, "--data-b", b, "--out", split.string(), "--stage", "2"}).code == 2);

  const auto emb = dir / "emb";
  REQUIRE(run({"embed", "--checkpoint", ckpt, "--data", a, "--out", emb.string(), "--pca"}).code == 0);
  const auto pca = textio::read_file(emb / "embeddings/A_pca2.csv");
  CHECK(pca.rfind("pc0,pc1,label\n", 0) == 0);

  const auto ret = dir / "ret";
  REQUIRE(run({"retrieve", "--checkpoint", ckpt, "--query", a, "--retrieval", b, "--out", ret.string(), "--k", "5"})
              .code == 0);
  CHECK(textio::read_file(ret / "metrics/outcomes.csv").rfind("query_id,is_null", 0) == 0);

  const auto ev1 = dir / "ev1", ev2 = dir / "ev2";
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--query", a, "--retrieval", b, "--out", ev1.string()}).code == 0);
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--query", a, "--retrieval", b, "--out", ev2.string()}).code == 0);
  const std::string m1 = textio::read_file(ev1 / "metrics/metrics.json");
  CHECK(m1 == textio::read_file(ev2 / "metrics/metrics.json"));
  const auto mj = nlohmann::ordered_json::parse(m1);
  std::vector<std::string> keys;
  for (auto it = mj.begin(); it != mj.end(); ++it) keys.push_back(it.key());
  const std::vector<std::string> head{"setting", "map_all", "openset_accuracy", "num_queries",
                                      "num_private", "eta",   "seed",             "checkpoint_hash"};
  REQUIRE(keys.size() >= head.size());
  CHECK(std::vector<std::string>(keys.begin(), keys.begin() + 8) == head);
  CHECK(mj["setting"] == "openset");

  // a second training run with the same seed gives identical bytes
  const auto again = dir / "again";
  REQUIRE(run(with_small({"train", "--data-a", a, "--data-b", b, "--out", again.string(), "--seed", "5"})).code == 0);
  CHECK(textio::read_file(again / "checkpoints/final.json") == textio::read_file(ckpt));

  // unlabeled data: eval refuses with a data error
  auto unl = datagen::load_domain(a);
  unl.labels.reset();
  datagen::save_domain(dir / "unlabeled.csv", unl);
  r = run({"eval", "--checkpoint", ckpt, "--query", (dir / "unlabeled.csv").string(), "--retrieval", b, "--out",
           (dir / "ev3").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("label") != std::string::npos);

  textio::write_file(dir / "ragged.csv", "f0,f1,f2,f3\n1,2,3,4\n1,2\n");
  r = run({"embed", "--checkpoint", ckpt, "--data", (dir / "ragged.csv").string(), "--out", (dir / "x").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("line 3") != std::string::npos);
  textio::write_file(dir / "bad.json", "{not json");
  CHECK(run({"eval", "--checkpoint", (dir / "bad.json").string(), "--query", a, "--retrieval", b, "--out",
             (dir / "x").string()})
            .code == 3);
  // numeric failure
  auto boom = with_small({"train", "--data-a", a, "--data-b", b, "--out", (dir / "boom").string()});
  for (const char* o : {"--set", "train.lr0=1e30", "--set", "stage2.epochs=2"}) boom.push_back(o);
  r = run(boom);
  CHECK(r.code == 4);
  fs::remove_all(dir);
}

TEST_CASE("ablate emits five rows with both metrics") {
  const auto dir = fresh_dir("ablate");
  REQUIRE(run(with_small({"gen", "--out", dir.string(), "--seed", "2", "--set", "data.setting=openset"})).code == 0);
  const auto out = dir / "abl";
  const auto r = run(with_small({"ablate", "--data-a", (dir / "data/A.csv").string(), "--data-b",
                                 (dir / "data/B.csv").string(), "--out", out.string(), "--seed", "2"}));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(textio::read_file(out / "metrics/ablation.json"));
  REQUIRE(doc["rows"].size() == 5);
  const std::vector<std::string> names{"full", "w/o P.M.", "w/o SEL", "w/o SPDA", "alt-matcher"};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(doc["rows"][i]["variant"] == names[i]);
    CHECK(doc["rows"][i]["map_all"].is_number());
    CHECK(doc["rows"][i]["openset_accuracy"].is_number());
  }
  const auto csv = textio::read_file(out / "metrics/ablation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  fs::remove_all(dir);
}

TEST_CASE("helpers") {
  const int q[] = {0, 1, 2}, r[] = {0, 1};
  CHECK(cli::infer_setting(q, r) == "openset");
  CHECK(cli::infer_setting(r, q) == "partial");
  CHECK(cli::infer_setting(q, q) == "closet");

  // points on a line: first axis carries all the variance
  diffkit::Tensor x(diffkit::Shape{5, 3});
  for (std::size_t i = 0; i < 5; ++i) {
    x.at(i, 0) = static_cast<double>(i);
    x.at(i, 1) = 2.0 * static_cast<double>(i);
    x.at(i, 2) = 1.0;
  }
  const auto p = cli::pca2(x);
  CHECK(p.rows() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(p.at(i, 1)) < 1e-9);
  CHECK(p.at(4, 0) - p.at(0, 0) == doctest::Approx(4.0 * std::sqrt(5.0)).epsilon(1e-9));
}
