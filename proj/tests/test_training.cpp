#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "soma/checkpoint.hpp"
#include "soma/training.hpp"

using namespace soma;

namespace {

LabeledSet random_set(const NetworkConfig& cfg, int n, int num_classes, std::uint64_t seed) {
    LabeledSet set;
    SeededRng rng(seed);
    for (int i = 0; i < n; ++i) {
        Image img;
        img.width = cfg.in_w;
        img.height = cfg.in_h;
        img.rgb.resize(static_cast<std::size_t>(3) * cfg.in_w * cfg.in_h);
        for (auto& p : img.rgb) p = static_cast<unsigned char>(rng.uniform() * 256.0);
        set.images.push_back(std::move(img));
        set.labels.push_back(i % num_classes);
    }
    return set;
}

}  // namespace

TEST_CASE("sgd with momentum matches the hand iteration") {
    // lr 0.1, momentum 0.9, constant gradient 1, start at 0:
    // v1 = -0.1, w1 = -0.1; v2 = -0.19, w2 = -0.29
    std::vector<double> w{0.0}, g{1.0};
    std::vector<ParamRef<double>> params{{"w", &w, &g, {1}, false, false}};
    OptimizerState<double> state;
    state.momentum = {{0.0}};
    state.lr = 0.1;
    TrainConfig cfg;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    sgd_momentum_step(params, state, cfg);
    CHECK(state.momentum[0][0] == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(-0.1).epsilon(1e-12));
    sgd_momentum_step(params, state, cfg);
    CHECK(state.momentum[0][0] == doctest::Approx(-0.19).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("zero momentum degenerates to plain sgd") {
    std::vector<double> w{2.0}, g{0.5};
    std::vector<ParamRef<double>> params{{"w", &w, &g, {1}, false, false}};
    OptimizerState<double> state;
    state.momentum = {{0.0}};
    state.lr = 0.2;
    TrainConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    for (int i = 0; i < 3; ++i) sgd_momentum_step(params, state, cfg);
    CHECK(w[0] == doctest::Approx(2.0 - 3 * 0.2 * 0.5).epsilon(1e-12));
}

TEST_CASE("weight decay only touches decay-flagged parameters") {
    std::vector<double> w1{1.0}, w2{1.0}, g1{0.0}, g2{0.0};
    std::vector<ParamRef<double>> params{
        {"conv.w", &w1, &g1, {1}, true, false},
        {"bn.gamma", &w2, &g2, {1}, false, false},
    };
    OptimizerState<double> state;
    state.momentum = {{0.0}, {0.0}};
    state.lr = 1.0;
    TrainConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 1e-4;
    sgd_momentum_step(params, state, cfg);
    CHECK(w1[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
    CHECK(w2[0] == 1.0);
}

TEST_CASE("network exposes decay flags only on conv and fc weights") {
    Network<float> net;
    SeededRng rng(3);
    net.build(NetworkConfig::tiny(), rng);
    for (auto& p : net.params()) {
        const bool is_weight = p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".w") == 0;
        CHECK(p.decay == is_weight);
    }
}

TEST_CASE("plateau scheduler") {
    TrainConfig cfg;
    cfg.plateau_patience = 5;
    cfg.plateau_epsilon = 1e-3;
    cfg.lr_factor = 10.0;
    OptimizerState<double> state;
    state.lr = 0.1;

    SUBCASE("five stalls in a row divide the lr by ten") {
        plateau_scheduler(1.0, state, cfg);
        for (int i = 0; i < 4; ++i) {
            plateau_scheduler(1.0, state, cfg);
            CHECK(state.lr == 0.1);
        }
        plateau_scheduler(1.0, state, cfg);
        CHECK(state.lr == doctest::Approx(0.01));
        CHECK(state.plateau_counter == 0);
    }
    SUBCASE("a real improvement resets the counter") {
        plateau_scheduler(1.0, state, cfg);
        for (int i = 0; i < 4; ++i) plateau_scheduler(1.0, state, cfg);
        plateau_scheduler(0.5, state, cfg);  // improvement
        for (int i = 0; i < 4; ++i) plateau_scheduler(0.5, state, cfg);
        CHECK(state.lr == 0.1);
    }
    SUBCASE("sub-epsilon improvement counts as a stall") {
        plateau_scheduler(1.0, state, cfg);
        for (int i = 0; i < 5; ++i) plateau_scheduler(1.0 - 0.5e-3, state, cfg);
        CHECK(state.lr == doctest::Approx(0.01));
    }
}

TEST_CASE("initial loss sits near ln K") {
    auto cfg = NetworkConfig::tiny(4);
    Network<double> net;
    SeededRng rng(11);
    net.build(cfg, rng);
    auto set = random_set(cfg, 16, 4, 12);
    auto stats = evaluate_classifier(net, set);
    CHECK(stats.loss == doctest::Approx(std::log(4.0)).epsilon(0.10));
}

TEST_CASE("a small step on one batch decreases its loss") {
    auto cfg = NetworkConfig::tiny(4);
    Network<double> net;
    SeededRng rng(13);
    net.build(cfg, rng);
    auto set = random_set(cfg, 8, 4, 14);
    std::vector<const Image*> ptrs;
    for (auto& img : set.images) ptrs.push_back(&img);
    auto batch = images_to_batch<double>(ptrs);
    auto targets = one_hot<double>(set.labels, 4);

    auto loss_of = [&](bool train) {
        auto out = net.forward(batch, train);
        return static_cast<double>(ops::softmax_cross_entropy(out.logits, targets).loss);
    };
    net.zero_grads();
    auto out = net.forward(batch, true);
    auto r = ops::softmax_cross_entropy(out.logits, targets);
    const double before = r.loss;
    net.backward(r.grad_logits);

    TrainConfig tc;
    tc.momentum = 0.0;
    tc.weight_decay = 0.0;
    auto params = net.params();
    OptimizerState<double> state;
    state.init(net, tc);
    state.lr = 1e-4;
    sgd_momentum_step(params, state, tc);
    CHECK(loss_of(true) < before);
}

TEST_CASE("body lr ratio zero freezes the body bitwise") {
    auto cfg = NetworkConfig::tiny(4);
    Network<double> net;
    SeededRng rng(17);
    net.build(cfg, rng);
    auto set = random_set(cfg, 8, 4, 18);
    std::vector<const Image*> ptrs;
    for (auto& img : set.images) ptrs.push_back(&img);
    auto batch = images_to_batch<double>(ptrs);
    auto targets = one_hot<double>(set.labels, 4);

    std::vector<std::vector<double>> before;
    for (auto& p : net.params()) before.push_back(*p.value);

    net.zero_grads();
    auto out = net.forward(batch, true);
    auto r = ops::softmax_cross_entropy(out.logits, targets);
    net.backward(r.grad_logits);
    TrainConfig tc;
    tc.body_lr_ratio = 0.0;
    tc.weight_decay = 0.0;
    auto params = net.params();
    OptimizerState<double> state;
    state.init(net, tc);
    state.lr = 0.1;
    sgd_momentum_step(params, state, tc);

    bool head_changed = false;
    auto after = net.params();
    for (std::size_t i = 0; i < after.size(); ++i) {
        if (after[i].head) {
            if (*after[i].value != before[i]) head_changed = true;
        } else if (after[i].grad) {  // running stats move in forward, skip them
            CHECK(*after[i].value == before[i]);
        }
    }
    CHECK(head_changed);
}

TEST_CASE("training run is deterministic and records history") {
    auto cfg = NetworkConfig::tiny(3);
    auto tset = random_set(cfg, 12, 3, 21);
    auto vset = random_set(cfg, 6, 3, 22);
    TrainConfig tc;
    tc.initial_lr = 0.01;
    tc.batch_size = 4;
    tc.max_epochs = 3;
    tc.seed = 7;

    auto run = [&] {
        Network<float> net;
        SeededRng rng(5);
        net.build(cfg, rng);
        auto hist = train(net, tset, vset, tc);
        std::vector<std::vector<float>> ws;
        for (auto& p : net.params()) ws.push_back(*p.value);
        return std::make_pair(hist, ws);
    };
    auto [h1, w1] = run();
    auto [h2, w2] = run();
    REQUIRE(h1.size() == 3);
    for (std::size_t i = 0; i < h1.size(); ++i) {
        CHECK(h1[i].epoch == static_cast<int>(i));
        CHECK(h1[i].train_loss == h2[i].train_loss);
        CHECK(h1[i].val_loss == h2[i].val_loss);
        CHECK(h1[i].lr == 0.01);
    }
    CHECK(w1 == w2);
}

TEST_CASE("train rejects out-of-range labels") {
    auto cfg = NetworkConfig::tiny(3);
    auto tset = random_set(cfg, 6, 3, 31);
    auto vset = random_set(cfg, 3, 3, 32);
    tset.labels[0] = 3;
    Network<float> net;
    SeededRng rng(5);
    net.build(cfg, rng);
    TrainConfig tc;
    CHECK_THROWS_AS(train(net, tset, vset, tc), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is byte identical") {
    auto cfg = NetworkConfig::tiny(4);
    Network<float> net;
    SeededRng rng(41);
    net.build(cfg, rng);
    auto ck = snapshot(net, 41, {{0, 1.5, 1.2, 0.25, 0.1}});
    auto bytes = serialize_checkpoint(ck);
    REQUIRE(bytes.size() > 12);
    CHECK(bytes[0] == 'S');
    CHECK(bytes[1] == 'O');
    CHECK(bytes[2] == 'M');
    CHECK(bytes[3] == 'F');
    auto ck2 = deserialize_checkpoint(bytes);
    CHECK(serialize_checkpoint(ck2) == bytes);
    CHECK(ck2.seed == 41);
    REQUIRE(ck2.history.size() == 1);
    CHECK(ck2.history[0].train_loss == 1.5);
    CHECK(ck2.history[0].val_accuracy == 0.25);

    // restored network reproduces outputs exactly
    auto net2 = build_from_checkpoint<float>(ck2);
    SeededRng xr(42);
    Tensor<float> x({1, 3, cfg.in_h, cfg.in_w});
    for (auto& v : x.v) v = static_cast<float>(xr.normal(0.0, 0.5));
    CHECK(net.forward(x, false).logits.v == net2.forward(x, false).logits.v);
}

TEST_CASE("f64 checkpoints preserve doubles exactly") {
    auto cfg = NetworkConfig::tiny(4);
    Network<double> net;
    SeededRng rng(43);
    net.build(cfg, rng);
    auto ck = snapshot(net, 43);
    CHECK(ck.dtype == "f64");
    auto ck2 = deserialize_checkpoint(serialize_checkpoint(ck));
    REQUIRE(ck2.params.size() == ck.params.size());
    for (std::size_t i = 0; i < ck.params.size(); ++i)
        CHECK(ck2.params[i].values == ck.params[i].values);
}

TEST_CASE("checkpoint file io and corruption rejection") {
    auto cfg = NetworkConfig::tiny(4);
    Network<float> net;
    SeededRng rng(45);
    net.build(cfg, rng);
    auto ck = snapshot(net, 45);
    const std::string path = (std::filesystem::temp_directory_path() / "soma_ck_test.somf").string();
    save_checkpoint(path, ck);
    auto ck2 = load_checkpoint(path);
    CHECK(serialize_checkpoint(ck2) == serialize_checkpoint(ck));

    auto bytes = serialize_checkpoint(ck);
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), std::runtime_error);
    auto trunc = serialize_checkpoint(ck);
    trunc.resize(trunc.size() / 2);
    CHECK_THROWS_AS(deserialize_checkpoint(trunc), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("restore rejects mismatched checkpoints") {
    Network<float> a, b;
    SeededRng r1(1), r2(2);
    a.build(NetworkConfig::tiny(4), r1);
    auto cfg = NetworkConfig::tiny(4);
    cfg.embed_dim = 16;
    b.build(cfg, r2);
    auto ck = snapshot(a, 1);
    CHECK_THROWS_AS(restore(ck, b), std::runtime_error);
}

TEST_CASE("finetune replaces the head and keeps the body") {
    auto cfg = NetworkConfig::tiny(4);
    Network<float> net;
    SeededRng rng(51);
    net.build(cfg, rng);
    auto pretrained = snapshot(net, 51);

    auto tset = random_set(cfg, 6, 6, 52);
    auto vset = random_set(cfg, 6, 6, 53);
    TrainConfig tc;
    tc.max_epochs = 0;  // transfer only, no updates
    tc.body_lr_ratio = 0.1;
    tc.seed = 99;
    auto tuned = finetune<float>(pretrained, tset, vset, 6, tc);
    CHECK(tuned.config.num_classes == 6);
    CHECK(tuned.history.empty());
    for (const auto& blob : tuned.params) {
        if (blob.name.rfind("fc_head", 0) == 0) {
            if (blob.name == "fc_head.w") CHECK(blob.shape == std::vector<int>{6, 8});
            continue;
        }
        const NamedBlob* orig = nullptr;
        for (const auto& p : pretrained.params)
            if (p.name == blob.name) { orig = &p; break; }
        REQUIRE(orig != nullptr);
        CHECK(blob.values == orig->values);
    }
}
