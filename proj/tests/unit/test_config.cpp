#include <doctest.h>

#include "asm2tv/config.hpp"
#include "asm2tv/data.hpp"
#include "test_util.hpp"

using namespace asm2tv;

TEST_CASE("defaults round trip through the typed config") {
    const KeyValues kv = default_key_values();
    CHECK(kv.size() == config_keys().size());
    const ExperimentConfig cfg = experiment_config(kv);
    CHECK(cfg.hidden == 64);
    CHECK(cfg.train.lambda == 1.0);
    CHECK(cfg.train.adam.lr == 3e-4);
    CHECK(cfg.architecture == Architecture::Asm);
    const KeyValues canonical = to_key_values(cfg);
    CHECK(canonical.size() == kv.size());
    for (const auto& [k, v] : kv) CHECK(canonical.count(k) == 1);
    CHECK(to_key_values(experiment_config(canonical)) == canonical);
    CHECK(experiment_config(canonical).train.adam.lr == 3e-4);
}

TEST_CASE("config text parsing") {
    const KeyValues kv = parse_config("# comment\nhidden = 16\n\n  lambda=0.5   # trailing\narchitecture = share-all\n");
    const ExperimentConfig cfg = experiment_config(kv);
    CHECK(cfg.hidden == 16);
    CHECK(cfg.train.lambda == 0.5);
    CHECK(cfg.architecture == Architecture::ShareAll);
    CHECK(parse_config(config_text(kv)) == kv);
}

TEST_CASE("unknown and malformed keys name the key") {
    try {
        parse_config("hiden = 3\n");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "hiden");
    }
    CHECK_THROWS_AS(parse_config("hidden 3\n"), ConfigError);
    KeyValues kv = default_key_values();
    kv["blocks"] = "many";
    try {
        experiment_config(kv);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "blocks");
    }
    kv = default_key_values();
    kv["unit_mode"] = "per-block";
    CHECK_THROWS_AS(experiment_config(kv), ConfigError);
    kv = default_key_values();
    kv["dropout"] = "1.5";
    CHECK_THROWS_AS(experiment_config(kv), ConfigError);
}

TEST_CASE("file values override defaults and relative manifests resolve") {
    asm2tv::testing::TempDir dir("cfg");
    asm2tv::testing::write_file(dir / "run.cfg", "manifest = data/manifest.json\nseed = 9\n");
    const KeyValues kv = read_config_file(dir / "run.cfg");
    CHECK(kv.at("seed") == "9");
    CHECK(kv.at("manifest") == (dir.path() / "data" / "manifest.json").string());
    CHECK(kv.at("hidden") == "64");
    KeyValues over = kv;
    set_config_value(over, "seed", "4");
    CHECK(experiment_config(over).train.seed == 4);
    CHECK_THROWS_AS(read_config_file(dir / "missing.cfg"), ArtifactError);
}

TEST_CASE("model shape follows the architecture") {
    WindowedDataset d;
    d.input_dims = {12, 12, 6};
    d.classes = {3, 3};
    d.tasks.resize(2);
    ExperimentConfig cfg = experiment_config(default_key_values());
    cfg.blocks = 3;
    ModelConfig m = model_config_for(cfg, d);
    CHECK(m.tasks == 2);
    CHECK(m.views == 3);
    CHECK(m.blocks == 3);
    CHECK(m.input_dims == d.input_dims);
    cfg.architecture = Architecture::ShareAll;
    CHECK(model_config_for(cfg, d).blocks == 1);
    cfg.architecture = Architecture::SingleTask;
    m = model_config_for(cfg, d);
    CHECK(m.blocks == 6);
    CHECK(m.routing == Routing::Private);
}
