#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stv/io.hpp"
#include "stv/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace stv;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.vocab_size = 12;
    cfg.max_seq_len = 16;
    return cfg;
}

Parameters tiny_params(std::uint64_t seed = 1) {
    RngState rng(seed);
    return Parameters::init(tiny_config(), rng);
}

std::vector<int> tiny_tokens() { return {0, 5, 3, 7, 1, 9, 2, 4}; }

}  // namespace

TEST_CASE("forward rejects bad inputs") {
    Parameters p = tiny_params();
    CHECK_THROWS_AS(forward(p, {0, 12}), dim_error);        // token id >= V
    CHECK_THROWS_AS(forward(p, {}), dim_error);             // empty
    CHECK_THROWS_AS(forward(p, std::vector<int>(17, 1)), dim_error);  // too long
}

TEST_CASE("forward is pure and capture does not perturb logits") {
    Parameters p = tiny_params();
    const auto toks = tiny_tokens();
    ForwardTrace a = forward(p, toks);
    ForwardTrace b = forward(p, toks);
    CHECK(a.logits.data == b.logits.data);

    TapSet taps;
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t h = 0; h < 2; ++h) taps.capture.push_back({l, h});
    ForwardTrace c = forward(p, toks, taps);
    CHECK(c.logits.data == a.logits.data);
    CHECK(c.captured.size() == 4);
}

TEST_CASE("empty patch set is a bit-level no-op") {
    Parameters p = tiny_params();
    TapSet taps;  // nothing captured, nothing patched
    ForwardTrace a = forward(p, tiny_tokens(), taps);
    ForwardTrace b = forward(p, tiny_tokens());
    CHECK(a.logits.data == b.logits.data);
}

TEST_CASE("patching a head with its own activation reproduces logits") {
    Parameters p = tiny_params();
    const auto toks = tiny_tokens();
    ForwardTrace base = forward(p, toks);

    TapSet cap;
    cap.capture.push_back({1, 0});
    ForwardTrace traced = forward(p, toks, cap);
    const Tensor own = traced.captured.at({1, 0});

    TapSet patch;
    patch.patches.push_back({{1, 0}, own, toks.size() - 1});
    ForwardTrace patched = forward(p, toks, patch);
    CHECK(patched.logits.rows() == toks.size());
    for (std::size_t i = 0; i < base.logits.data.size(); ++i)
        CHECK(std::abs(patched.logits.data[i] - base.logits.data[i]) < 1e-10);
}

TEST_CASE("capture and patch sets must be disjoint") {
    Parameters p = tiny_params();
    TapSet taps;
    taps.capture.push_back({0, 1});
    taps.patches.push_back({{0, 1}, Tensor({8}), 0});
    CHECK_THROWS_AS(forward(p, tiny_tokens(), taps), dim_error);
}

TEST_CASE("causal masking: appending a token leaves earlier logits unchanged") {
    Parameters p = tiny_params();
    std::vector<int> shorter = {3, 1, 4, 1, 5};
    std::vector<int> longer = shorter;
    longer.push_back(9);
    ForwardTrace a = forward(p, shorter);
    ForwardTrace b = forward(p, longer);
    for (std::size_t t = 0; t < shorter.size(); ++t)
        for (std::size_t v = 0; v < 12; ++v)
            CHECK(b.logits.at(t, v) == doctest::Approx(a.logits.at(t, v)).epsilon(1e-14));
}

TEST_CASE("patch affects only downstream layers") {
    Parameters p = tiny_params();
    const auto toks = tiny_tokens();

    TapSet cap_only;
    cap_only.capture.push_back({0, 0});
    cap_only.capture.push_back({0, 1});
    ForwardTrace before = forward(p, toks, cap_only);

    TapSet both = cap_only;
    Tensor junk({8});
    for (std::size_t i = 0; i < 8; ++i) junk.data[i] = 3.5 - static_cast<double>(i);
    both.patches.push_back({{1, 1}, junk, 0});
    ForwardTrace after = forward(p, toks, both);

    // layer-0 captures are bit-identical with and without the layer-1 patch
    CHECK(after.captured.at({0, 0}).data == before.captured.at({0, 0}).data);
    CHECK(after.captured.at({0, 1}).data == before.captured.at({0, 1}).data);
    // but logits must differ
    CHECK(after.logits.data != before.logits.data);
}

TEST_CASE("loss closed forms") {
    ForwardTrace trace;
    const std::size_t V = 12;
    trace.logits = Tensor({4, V});  // uniform rows
    const double lv = loss(trace, {1, 3}, {5, 7});
    CHECK(lv == doctest::Approx(std::log(static_cast<double>(V))).epsilon(1e-12));

    Tensor big({2, V});
    big.at(1, 4) = 1e3;  // one-hot with a huge margin
    ForwardTrace t2;
    t2.logits = big;
    CHECK(loss(t2, {1}, {4}) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(loss(trace, {}, {}), dim_error);
}

TEST_CASE("loss matches a direct scalar oracle") {
    RngState rng(3);
    ForwardTrace trace;
    trace.logits = Tensor({6, 12});
    for (double& v : trace.logits.data) v = rng.normal() * 2.0;
    std::vector<std::size_t> pos = {0, 2, 5};
    std::vector<int> tgt = {3, 11, 0};
    double expect = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        double denom = 0.0;
        for (std::size_t v = 0; v < 12; ++v) denom += std::exp(trace.logits.at(pos[i], v));
        expect += -std::log(std::exp(trace.logits.at(pos[i], static_cast<std::size_t>(tgt[i]))) / denom);
    }
    expect /= 3.0;
    CHECK(loss(trace, pos, tgt) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("training determinism and degenerate runs") {
    Parameters p0 = tiny_params(7);
    BatchProvider provider = [](std::size_t, RngState& rng) {
        std::vector<TrainSequence> batch;
        for (int b = 0; b < 2; ++b) {
            TrainSequence s;
            s.tokens = {1, 2, 3, 4, 5};
            for (int i = 0; i < 5; ++i) s.tokens[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(12));
            s.emit_positions = {3};
            s.targets = {static_cast<int>(rng.below(12))};
            batch.push_back(std::move(s));
        }
        return batch;
    };

    TrainConfig cfg;
    cfg.steps = 0;
    TrainResult r0 = train(p0, provider, cfg, RngState(1));
    bool identical = true;
    std::size_t idx = 0;
    std::vector<const Tensor*> orig;
    p0.visit([&](const std::string&, const Tensor& t) { orig.push_back(&t); });
    r0.params.visit([&](const std::string&, const Tensor& t) {
        identical = identical && (t.data == orig[idx++]->data);
    });
    CHECK(identical);  // 0 steps returns initialization unchanged

    cfg.steps = 5;
    TrainResult a = train(p0, provider, cfg, RngState(1));
    TrainResult b = train(p0, provider, cfg, RngState(1));
    CHECK(a.loss_curve == b.loss_curve);
    bool same = true;
    std::vector<const Tensor*> ta;
    a.params.visit([&](const std::string&, const Tensor& t) { ta.push_back(&t); });
    idx = 0;
    b.params.visit([&](const std::string&, const Tensor& t) {
        same = same && (t.data == ta[idx++]->data);
    });
    CHECK(same);  // bit-identical checkpoints for the same seed

    // zero learning rate leaves parameters (and thus the loss) unchanged
    cfg.steps = 1;
    cfg.adam.lr = 0.0;
    TrainResult z = train(p0, provider, cfg, RngState(2));
    idx = 0;
    bool untouched = true;
    z.params.visit([&](const std::string&, const Tensor& t) {
        untouched = untouched && (t.data == orig[idx++]->data);
    });
    CHECK(untouched);
}

TEST_CASE("checkpoint round-trip and shape rejection") {
    Parameters p = tiny_params(11);
    const auto path = std::filesystem::temp_directory_path() / "stv_test_ckpt.bin";
    save_checkpoint(p, path);
    Parameters q = load_checkpoint(path);
    CHECK(q.config == p.config);
    bool same = true;
    std::vector<const Tensor*> ta;
    p.visit([&](const std::string&, const Tensor& t) { ta.push_back(&t); });
    std::size_t idx = 0;
    q.visit([&](const std::string&, const Tensor& t) {
        same = same && (t.data == ta[idx++]->data);
    });
    CHECK(same);

    // reload after a second save of the loaded params: still identical
    const auto path2 = std::filesystem::temp_directory_path() / "stv_test_ckpt2.bin";
    save_checkpoint(q, path2);
    Parameters q2 = load_checkpoint(path2);
    CHECK(q2.tok_emb.data == p.tok_emb.data);

    // corrupt the declared shape: must be rejected
    PayloadFile f = read_payload_file(path);
    f.manifest["tensors"][0]["shape"] = {3, 3};
    const auto bad = std::filesystem::temp_directory_path() / "stv_test_ckpt_bad.bin";
    write_payload_file(bad, f.manifest, f.payload);
    CHECK_THROWS_AS(load_checkpoint(bad), io_error);

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
    std::filesystem::remove(bad);
}

TEST_CASE("forward pass counter increments once per call") {
    Parameters p = tiny_params();
    reset_forward_pass_count();
    forward(p, tiny_tokens());
    forward(p, tiny_tokens());
    CHECK(forward_pass_count() == 2);
}
