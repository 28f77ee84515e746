#include <gtest/gtest.h>

#include "mulo/config.hpp"
#include "mulo/harness.hpp"
#include "mulo/meta_train.hpp"

using namespace mulo;

namespace {

std::string field_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

}  // namespace

TEST(Config, PartialObjectsKeepDefaults) {
    const auto pes = read_pes_config(json{{"num_pairs", 4}}, {}, "pes");
    EXPECT_EQ(pes.num_pairs, 4u);
    EXPECT_EQ(pes.sigma, 0.01);
    EXPECT_EQ(pes.truncation, 50u);
    const auto s = read_schedule(json::object(), {}, "schedule");
    EXPECT_EQ(s.max_lr, 3e-3);
    EXPECT_EQ(s.total_steps, 5000u);
}

TEST(Config, TypeErrorNamesField) {
    EXPECT_EQ(field_of([] { read_pes_config(json{{"sigma", "big"}}, {}, "pes"); }), "pes.sigma");
    EXPECT_EQ(field_of([] { read_task_spec(json{{"width", -3}}, "tasks[1]"); }), "tasks[1].width");
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_EQ(field_of([] { read_pes_config(json{{"truncation", 0}}, {}, "pes"); }), "pes.truncation");
    EXPECT_EQ(field_of([] { read_adam_hyper(json{{"lr", 0.0}}, {}, "opt"); }), "opt.lr");
    EXPECT_EQ(field_of([] { read_mode(json{{"param_mode", "ntk"}}, "param_mode", ParamMode::SP, "x"); }),
              "x.param_mode");
    EXPECT_EQ(field_of([] { read_task_spec(json{{"depth", 1}}, "t"); }), "t.depth");
}

TEST(Config, MetaTrainRoundTrip) {
    MetaTrainConfig c;
    c.seed = 17;
    c.mode = ParamMode::SP;
    c.pes.num_pairs = 3;
    c.tasks[0].width = 48;
    c.truncation_schedule = TruncationSchedule::Linear;
    const auto back = read_meta_train_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, MetaTrainRejectsEmptyTasks) {
    EXPECT_EQ(field_of([] { read_meta_train_config(json{{"tasks", json::array()}}); }), "tasks");
    EXPECT_EQ(field_of([] { read_meta_train_config(json{{"truncation_schedule", "cubic"}}); }), "truncation_schedule");
}

TEST(Config, EvalTaskValidation) {
    EXPECT_EQ(field_of([] { read_eval_task(json{{"steps", 0}}, {}, "task"); }), "task.steps");
    EXPECT_EQ(field_of([] { read_eval_task(json{{"seeds", json::array()}}, {}, "task"); }), "task.seeds");
    const auto t = read_eval_task(json{{"init_seed", 5}, {"width", 32}}, {}, "task");
    EXPECT_EQ(t.width, 32u);
    ASSERT_TRUE(t.init_seed.has_value());
    EXPECT_EQ(*t.init_seed, 5u);
}

TEST(Config, SweepSpecRequiresOptimizers) {
    EXPECT_EQ(field_of([] { read_sweep_spec(json{{"widths", {8}}}); }), "optimizers");
    EXPECT_EQ(field_of([] { read_sweep_spec(json{{"widths", json::array()}, {"optimizers", {{{"type", "sgd"}}}}}); }),
              "widths");
    EXPECT_EQ(field_of([] { read_sweep_spec(json{{"optimizers", {{{"type", "rmsprop"}}}}}); }), "optimizers[0].type");
}

TEST(Config, DatasetRef) {
    const auto d = read_dataset_ref(json{{"synthetic", {{"n", 10}, {"input_dim", 3}}}}, {}, "dataset");
    EXPECT_TRUE(d.path.empty());
    EXPECT_EQ(d.synthetic.n, 10u);
    const Dataset ds = d.load();
    EXPECT_EQ(ds.size(), 10u);
    EXPECT_EQ(ds.input_dim, 3u);
}

TEST(Config, MissingFileAndBadJson) {
    EXPECT_THROW(load_json_file("/nonexistent/x.json"), std::runtime_error);
    const auto p = std::filesystem::temp_directory_path() / "mulo_bad.json";
    std::ofstream(p) << "{ not json";
    EXPECT_THROW(load_json_file(p), ValidationError);
    std::filesystem::remove(p);
}
