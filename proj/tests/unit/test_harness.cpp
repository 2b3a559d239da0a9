#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "phasecast/error.hpp"
#include "phasecast/harness/config.hpp"
#include "phasecast/harness/experiment.hpp"
#include "test_util.hpp"

namespace phasecast::harness {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.seed = 11;
  c.out_dir = out;
  c.data.n_videos = 8;
  c.data.feature_dim = 8;
  c.model.hidden = 4;
  c.model.noise_dim = 2;
  c.model.t_past = 5;
  c.model.t_future = 5;
  c.train.n_samples = 3;
  c.train.pretrain_epochs = 2;
  c.train.gan_epochs = 3;
  c.train.epoch_size = 8;
  c.train.batch_size = 4;
  c.train.lr = 1e-3;
  c.train.checkpoint_every = 2;
  c.train.validate_every = 1;
  c.hmm_iterations = 5;
  c.metrics.eval_stride = 20;
  c.plots = 1;
  return c;
}

TEST(Config, DefaultsAndRoundTrip) {
  const ExperimentConfig c = parse_config(R"({"schema_version": 1})");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.horizons.size(), 4u);
  EXPECT_EQ(c.horizons[1], (Horizon{15, 45}));
  EXPECT_DOUBLE_EQ(c.metrics.delta, 15.0);
  const ExperimentConfig back = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, RelativePathsResolveAgainstBase) {
  testing::TempDir dir("cfg");
  std::ofstream(dir.path() / "cfg.json") << R"({"schema_version": 1, "out_dir": "runs/x", "seed": 3})";
  const ExperimentConfig c = load_config(dir.path() / "cfg.json");
  EXPECT_EQ(c.out_dir, dir.path() / "runs/x");
  EXPECT_EQ(c.seed, 3u);
}

TEST(Config, UnknownKeysAndBadVersionRejected) {
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "sed": 4})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "model": {"hiden": 4}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"seed": 4})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"schema_version": 2})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1,)"), ParseError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "seed": "x"})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "horizons": [[15, 0]]})"), ValidationError);
}

TEST(Config, AllViolationsListedTogether) {
  try {
    parse_config(R"({"schema_version": 1, "bogus": 1, "data": {"graph": "/no/such/graph.json"},
                     "model": {"gumbel_tau": 0}, "metrics": {"delta": -1}})");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const char* needle : {"bogus", "data.graph", "gumbel_tau", "metrics.delta"}) {
      EXPECT_NE(msg.find(needle), std::string::npos) << needle << " missing from:\n" << msg;
    }
    EXPECT_NE(msg.find("4 problems"), std::string::npos) << msg;
  }
}

TEST(RunExperiment, MissingGraphFailsBeforeWritingAnything) {
  testing::TempDir dir("preflight");
  ExperimentConfig c = tiny_config(dir.path() / "out");
  c.data.graph = (dir.path() / "missing.json").string();
  c.train.lr = -1;
  try {
    run_experiment(c);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("data.graph"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir.path() / "out"));
}

TEST(RunExperiment, TinyRunIsDeterministicAndHasFourColumns) {
  testing::TempDir dir("run");
  const ExperimentResult a = run_experiment(tiny_config(dir.path() / "a"));
  run_experiment(tiny_config(dir.path() / "b"));
  EXPECT_TRUE(a.failures.empty());
  for (const char* f : {"report/accuracy.csv", "report/ld.csv", "report/summary.json"}) {
    const std::string fa = read_file(dir.path() / "a" / f);
    ASSERT_FALSE(fa.empty()) << f;
    EXPECT_EQ(fa, read_file(dir.path() / "b" / f)) << f;
  }
  const std::string acc = read_file(dir.path() / "a/report/accuracy.csv");
  EXPECT_EQ(acc.substr(0, acc.find('\n')), "to_phase,n_transitions,Constant Model,HMM,GAN w/o Dis.,GAN");
  EXPECT_EQ(a.evaluation.model_names,
            (std::vector<std::string>{kConstantModel, kHmmModel, kGanNoDisModel, kGanModel}));
  for (const char* f : {"config.json", "run.json", "pretrain/encoder.ckpt", "gan/gan_best.ckpt",
                        "gan_nodis/gan_nodis_best.ckpt", "hmm/hmm.txt", "plots/timeline_00.svg", "data/split.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "a" / f)) << f;
  }
}

TEST(Sweep, OverlongHorizonMarkedInvalidAndRunContinues) {
  testing::TempDir dir("sweep");
  ExperimentConfig c = tiny_config(dir.path());
  c.horizons = {{5000, 5}, {5, 5}};
  const SweepTable t = sweep_horizons(c, RunOptions{false, false});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_FALSE(t.rows[0].valid);
  EXPECT_FALSE(t.rows[0].note.empty());
  EXPECT_TRUE(t.rows[1].valid);
  EXPECT_EQ(t.rows[1].normalized_ld.size(), t.models.size());
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str().rfind("t_past,t_future,status", 0), 0u);
  EXPECT_NE(os.str().find("5000,5,invalid"), std::string::npos) << os.str();
}

synth::Window sample_window() {
  synth::Window w;
  w.past_labels = {0, 0, 0, 1, 1, 1, 1};
  w.future_labels = {1, 1, 2, 2, 2};
  w.past_features = diff::Tensor::zeros(7, 2);
  w.video_id = "v";
  w.t0 = 6;
  return w;
}

double attr(const std::string& element, const std::string& name) {
  const std::regex re(" " + name + "=\"([-0-9.]+)\"");
  std::smatch m;
  if (!std::regex_search(element, m, re)) return std::nan("");
  return std::stod(m[1]);
}

std::vector<std::string> elements_with_class(const std::string& svg, const std::string& cls) {
  std::vector<std::string> out;
  const std::regex re("<(rect|line) class=\"" + cls + "\"[^>]*/>");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back(it->str());
  return out;
}

TEST(Timeline, SvgStructureAndSpans) {
  testing::TempDir dir("svg");
  const metrics::SampleSet samples{{1, 1, 1, 1, 1}, {1, 2, 2, 2, 2}, {2, 2, 2, 2, 2}, {0, 1, 2, 0, 1}, {1, 1, 2, 2, 0}};
  const std::vector<std::string> names{"A", "B & C", "D"};
  Rng rng(1);
  const fs::path path = dir.path() / "sub/t.svg";
  emit_timeline(sample_window(), samples, names, rng, path, "video <v>");
  const std::string svg = read_file(path);
  ASSERT_FALSE(svg.empty());
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg.find("B & C"), std::string::npos);
  EXPECT_NE(svg.find("B &amp; C"), std::string::npos);

  const auto gt = elements_with_class(svg, "gt");
  const auto smp = elements_with_class(svg, "sample");
  const auto now = elements_with_class(svg, "now");
  ASSERT_EQ(gt.size(), 12u);
  ASSERT_EQ(smp.size(), 15u);
  ASSERT_EQ(now.size(), 1u);
  auto span = [](const std::vector<std::string>& els, std::size_t from, std::size_t to) {
    return attr(els[to - 1], "x") + attr(els[to - 1], "width") - attr(els[from], "x");
  };
  const double unit = attr(gt[0], "width");
  EXPECT_NEAR(span(gt, 0, 12), 12 * unit, 0.05);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(span(smp, 5 * s, 5 * s + 5), 5 * unit, 0.05);
  // Samples and marker start where the future starts.
  EXPECT_NEAR(attr(smp[0], "x"), attr(gt[7], "x"), 1e-9);
  EXPECT_NEAR(attr(now[0], "x1"), attr(gt[7], "x"), 1e-9);
}

TEST(Timeline, FewerSamplesThanThreeAndErrors) {
  testing::TempDir dir("svg2");
  Rng rng(2);
  emit_timeline(sample_window(), metrics::SampleSet{{1, 1, 1, 1, 1}}, std::vector<std::string>{"a", "b", "c"}, rng,
                dir.path() / "one.svg");
  EXPECT_EQ(elements_with_class(read_file(dir.path() / "one.svg"), "sample").size(), 5u);
  EXPECT_THROW(emit_timeline(sample_window(), metrics::SampleSet{{1, 1}}, std::vector<std::string>{"a", "b", "c"}, rng,
                             dir.path() / "bad.svg"),
               ShapeError);
  std::ofstream(dir.path() / "file") << "x";
  EXPECT_THROW(emit_timeline(sample_window(), metrics::SampleSet{{1, 1, 1, 1, 1}},
                             std::vector<std::string>{"a", "b", "c"}, rng, dir.path() / "file" / "x.svg"),
               IoError);
}

TEST(Timeline, SampleChoiceDependsOnRng) {
  testing::TempDir dir("svg3");
  metrics::SampleSet samples;
  for (int s = 0; s < 10; ++s) samples.push_back(std::vector<int>(5, s % 3));
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    emit_timeline(sample_window(), samples, std::vector<std::string>{"a", "b", "c"}, rng, dir.path() / "t.svg");
    const std::string svg = read_file(dir.path() / "t.svg");
    const std::regex re("Sample [0-9]+");
    std::string labels;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
      labels += it->str() + ";";
    seen.insert(labels);
  }
  EXPECT_GT(seen.size(), 3u);
}

}  // namespace
}  // namespace phasecast::harness
