#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdnet/config.hpp"
#include "tdnet/experiments.hpp"

using namespace tdnet;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "tdnet_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_exp1(const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.experiment = "exp1";
  cfg.runs = 3;
  cfg.lengths = {50};
  cfg.horizons = {1, 2, 5};
  cfg.seed = 11;
  cfg.out = out.string();
  resolve_config(cfg);
  return cfg;
}

}  // namespace

TEST_CASE("exp1 artifacts carry metadata and reproduce byte for byte") {
  const auto out_a = temp_dir("exp1_a");
  const auto out_b = temp_dir("exp1_b");
  ExperimentConfig cfg = tiny_exp1(out_a);
  const Exp1Result first = run_exp1(cfg);
  REQUIRE(first.all_converged);
  CHECK(first.max_one_step_diff < 1e-9);

  cfg.out = out_b.string();
  run_exp1(cfg);
  const std::string text_a = slurp((out_a / "exp1_rmse.csv").string());
  const std::string text_b = slurp((out_b / "exp1_rmse.csv").string());
  CHECK(text_a == text_b);
  CHECK_THAT(text_a, Catch::Matchers::ContainsSubstring("# config_hash="));
  CHECK_THAT(text_a, Catch::Matchers::ContainsSubstring("# seed=11"));
  CHECK_THAT(text_a, Catch::Matchers::ContainsSubstring("# boundary=stay"));
  CHECK_THAT(text_a, Catch::Matchers::ContainsSubstring("steps,h1,h1_se"));
}

TEST_CASE("exp1 single-horizon run keeps MC and TD identical") {
  const auto out = temp_dir("exp1_h1");
  ExperimentConfig cfg;
  cfg.experiment = "exp1";
  cfg.runs = 4;
  cfg.lengths = {50, 100};
  cfg.horizons = {1};
  cfg.seed = 3;
  cfg.out = out.string();
  resolve_config(cfg);
  const Exp1Result r = run_exp1(cfg);
  CHECK(r.max_one_step_diff < 1e-9);
  for (const auto& row : r.cells)
    for (const auto& cell : row)
      CHECK_THAT(cell.mc, Catch::Matchers::WithinAbs(cell.td, 1e-9));
}

TEST_CASE("boundary rule changes the exp1 numbers") {
  ExperimentConfig stay = tiny_exp1(temp_dir("exp1_stay"));
  ExperimentConfig reflect = tiny_exp1(temp_dir("exp1_reflect"));
  reflect.boundary = BoundaryRule::kReflect;
  const Exp1Result a = run_exp1(stay);
  const Exp1Result b = run_exp1(reflect);
  bool any_differs = false;
  for (size_t li = 0; li < a.cells.size(); ++li)
    for (size_t hi = 0; hi < a.cells[li].size(); ++hi)
      any_differs = any_differs ||
                    std::abs(a.cells[li][hi].td - b.cells[li][hi].td) > 1e-6;
  CHECK(any_differs);
}

TEST_CASE("exp2 emits both tables and keeps the shared column shared") {
  const auto out = temp_dir("exp2");
  ExperimentConfig cfg;
  cfg.experiment = "exp2";
  cfg.runs = 2;
  cfg.lengths = {50};
  cfg.checkpoints = {100, 200};
  cfg.seed = 5;
  cfg.out = out.string();
  resolve_config(cfg);
  const Exp2Result r = run_exp2(cfg);
  CHECK(std::filesystem::exists(out / "exp2_online_rmse.csv"));
  CHECK(std::filesystem::exists(out / "exp2_batch_incorrect.csv"));
  CHECK(r.max_one_step_diff < 1e-12);
  REQUIRE(r.online_td.size() == 2);
  REQUIRE(r.online_td[0].size() == 4);
  REQUIRE(r.batch_mc_incorrect.size() == 1);
  CHECK(r.all_converged);
  // with little data the Monte Carlo learner is far behind
  CHECK(r.batch_td_incorrect[0] < r.batch_mc_incorrect[0]);
}

TEST_CASE("exp3 with zero step size stays at the initial error") {
  const auto out = temp_dir("exp3_zero");
  ExperimentConfig cfg;
  cfg.experiment = "exp3";
  cfg.runs = 1;
  cfg.depths = {2};
  cfg.alphas = {0.0};
  cfg.steps = 3000;
  cfg.bin_size = 1000;
  cfg.seed = 9;
  cfg.out = out.string();
  resolve_config(cfg);
  const Exp3Result r = run_exp3(cfg);
  REQUIRE(r.curves.size() == 1);
  REQUIRE(r.curves[0].true_rmse.size() == 3);
  for (double v : r.curves[0].true_rmse)
    CHECK_THAT(v, Catch::Matchers::WithinAbs(0.5, 1e-12));
  for (double v : r.curves[0].empirical_rmse)
    CHECK_THAT(v, Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("exp3 learns within a short stream at a sensible step size") {
  const auto out = temp_dir("exp3_small");
  ExperimentConfig cfg;
  cfg.experiment = "exp3";
  cfg.runs = 2;
  cfg.depths = {2};
  cfg.alphas = {0.5};
  cfg.steps = 20000;
  cfg.bin_size = 1000;
  cfg.seed = 13;
  cfg.out = out.string();
  resolve_config(cfg);
  const Exp3Result r = run_exp3(cfg);
  REQUIRE(r.curves.size() == 1);
  CHECK(r.curves[0].true_rmse.back() < r.curves[0].true_rmse.front());
  CHECK(r.curves[0].empirical_rmse.back() <
        r.curves[0].empirical_rmse.front());
}

TEST_CASE("custom runs accept a question-network file") {
  const auto out = temp_dir("custom_fig1a");
  ExperimentConfig cfg;
  cfg.experiment = "custom";
  cfg.qnet_file = std::string(TDNET_SOURCE_DIR) + "/data/fig1a.qnet.json";
  cfg.mode = "batch";
  cfg.steps = 120;
  cfg.runs = 2;
  cfg.seed = 21;
  cfg.out = out.string();
  resolve_config(cfg);
  const CustomResult r = run_custom(cfg);
  CHECK(r.all_converged);
  CHECK(std::filesystem::exists(out / "oracle.csv"));
  CHECK(std::filesystem::exists(out / "summary.csv"));
  CHECK(std::filesystem::exists(out / "weights_run0.csv"));
  CHECK(std::filesystem::exists(out / "predictions.csv"));

  // identical rerun is byte-identical
  const std::string first = slurp((out / "summary.csv").string());
  const auto out2 = temp_dir("custom_fig1a_b");
  cfg.out = out2.string();
  run_custom(cfg);
  CHECK(first == slurp((out2 / "summary.csv").string()));
}

TEST_CASE("custom online mode emits a learning curve") {
  const auto out = temp_dir("custom_online");
  ExperimentConfig cfg;
  cfg.experiment = "custom";
  cfg.qnet_builder = "action_tree";
  cfg.qnet_depth = 2;
  cfg.obs_mode = "bit_only";
  cfg.features = "bias_pair_prev";
  cfg.activation = "logistic";
  cfg.mode = "online";
  cfg.alphas = {0.5};
  cfg.steps = 5000;
  cfg.bin_size = 1000;
  cfg.runs = 1;
  cfg.seed = 2;
  cfg.out = out.string();
  resolve_config(cfg);
  const CustomResult r = run_custom(cfg);
  CHECK(std::filesystem::exists(out / "curve.csv"));
  REQUIRE(r.mean_curve.size() == 5);
  CHECK(r.mean_curve.back() < r.mean_curve.front());
}

TEST_CASE("trace export rides along when requested") {
  const auto out = temp_dir("custom_traces");
  ExperimentConfig cfg;
  cfg.experiment = "custom";
  cfg.qnet_builder = "chain";
  cfg.qnet_depth = 2;
  cfg.mode = "batch";
  cfg.steps = 60;
  cfg.runs = 2;
  cfg.export_traces = true;
  cfg.seed = 4;
  cfg.out = out.string();
  resolve_config(cfg);
  run_custom(cfg);
  REQUIRE(std::filesystem::exists(out / "trace_run0.csv"));
  std::ifstream in(out / "trace_run0.csv");
  const Trace back = import_trace_csv(in, walk_action_labels());
  CHECK(back.length() == 60);
  CHECK(back.hidden_states()[0] == 4);
}

TEST_CASE("config validation fails fast") {
  ExperimentConfig cfg;
  cfg.experiment = "nope";
  CHECK_THROWS_AS(resolve_config(cfg), ConfigError);

  ExperimentConfig missing;
  missing.experiment = "custom";
  CHECK_THROWS_AS(resolve_config(missing), ConfigError);  // no qnet source

  ExperimentConfig both;
  both.experiment = "custom";
  both.qnet_builder = "chain";
  both.qnet_file = "x.json";
  CHECK_THROWS_AS(resolve_config(both), ConfigError);

  ExperimentConfig bad_alpha;
  bad_alpha.experiment = "exp2";
  bad_alpha.alphas = {-1.0};
  CHECK_THROWS_AS(resolve_config(bad_alpha), ConfigError);

  ExperimentConfig bad_cp;
  bad_cp.experiment = "exp2";
  bad_cp.checkpoints = {200, 100};
  CHECK_THROWS_AS(resolve_config(bad_cp), ConfigError);

  CHECK_THROWS_AS(load_config_file("/definitely/not/here.json"), ConfigError);
}

TEST_CASE("config files merge with defaults") {
  const auto dir = temp_dir("config");
  const auto path = dir / "cfg.json";
  {
    std::ofstream out(path);
    out << R"({"experiment": "exp1", "runs": 7, "seed": 42,
               "boundary": "reflect", "weighting": "visitation",
               "batch": {"alpha": 0.02}})";
  }
  ExperimentConfig cfg = load_config_file(path.string());
  resolve_config(cfg);
  CHECK(cfg.experiment == "exp1");
  CHECK(cfg.runs == 7);
  CHECK(cfg.seed == 42);
  CHECK(cfg.boundary == BoundaryRule::kReflect);
  CHECK(cfg.weighting == Weighting::kEmpiricalVisitation);
  CHECK(cfg.batch.alpha == 0.02);
  CHECK(cfg.batch.max_sweeps == 100000);  // untouched default
}
