#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stv/rng.hpp"
#include "stv/tensor.hpp"

namespace stv {

struct ModelConfig {
    std::size_t n_layers = 4;
    std::size_t n_heads = 8;
    std::size_t d_model = 128;
    std::size_t vocab_size = 96;
    std::size_t max_seq_len = 256;

    std::size_t d_head() const { return d_model / n_heads; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct HeadLocation {
    std::size_t layer = 0;
    std::size_t head = 0;
    auto operator<=>(const HeadLocation&) const = default;
};

struct LayerParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv;
    Tensor wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1;  // d -> 4d
    Tensor w2, b2;  // 4d -> d
};

struct Parameters {
    ModelConfig config;
    Tensor tok_emb;  // [V x d]
    Tensor pos_emb;  // [max_seq x d]
    std::vector<LayerParams> layers;
    Tensor lnf_g, lnf_b;
    Tensor unembed;  // [d x V]

    static Parameters init(const ModelConfig& cfg, RngState& rng);
    static Parameters zeros_like(const Parameters& p);

    // Visits every parameter tensor as (group name, tensor). Order is fixed.
    template <typename F>
    void visit(F&& fn) {
        visit_impl(*this, fn);
    }
    template <typename F>
    void visit(F&& fn) const {
        visit_impl(*this, fn);
    }
    bool all_finite() const;

  private:
    template <typename Self, typename F>
    static void visit_impl(Self& self, F& fn) {
        fn("tok_emb", self.tok_emb);
        fn("pos_emb", self.pos_emb);
        for (std::size_t l = 0; l < self.layers.size(); ++l) {
            auto& lp = self.layers[l];
            const std::string pre = "layer" + std::to_string(l) + ".";
            fn(pre + "ln1_g", lp.ln1_g);
            fn(pre + "ln1_b", lp.ln1_b);
            fn(pre + "wq", lp.wq);
            fn(pre + "bq", lp.bq);
            fn(pre + "wk", lp.wk);
            fn(pre + "bk", lp.bk);
            fn(pre + "wv", lp.wv);
            fn(pre + "bv", lp.bv);
            fn(pre + "wo", lp.wo);
            fn(pre + "bo", lp.bo);
            fn(pre + "ln2_g", lp.ln2_g);
            fn(pre + "ln2_b", lp.ln2_b);
            fn(pre + "w1", lp.w1);
            fn(pre + "b1", lp.b1);
            fn(pre + "w2", lp.w2);
            fn(pre + "b2", lp.b2);
        }
        fn("lnf_g", self.lnf_g);
        fn("lnf_b", self.lnf_b);
        fn("unembed", self.unembed);
    }
};

// Per-head capture/patch instructions for one forward pass.
// Captured quantity: the head's attention-weighted value vector at the read
// position, before the layer's output projection. Patches replace that same
// quantity at every position >= from_pos, so a patch installed at the last
// prompt position persists through subsequent decode steps.
struct TapSet {
    std::vector<HeadLocation> capture;
    std::ptrdiff_t capture_pos = -1;  // -1 = last position
    struct Patch {
        HeadLocation loc;
        Tensor vec;  // [d_head]
        std::size_t from_pos = 0;
    };
    std::vector<Patch> patches;

    bool empty() const { return capture.empty() && patches.empty(); }
};

struct ForwardTrace {
    Tensor logits;  // [T x V]
    std::map<HeadLocation, Tensor> captured;
};

ForwardTrace forward(const Parameters& params, const std::vector<int>& tokens,
                     const TapSet& taps = {});

// Process-wide forward pass accounting, used by efficiency reports and tests.
std::uint64_t forward_pass_count();
void reset_forward_pass_count();

// Mean token-level cross-entropy over the answer span only. emit_positions[i]
// is the logits row that predicts targets[i].
double loss(const ForwardTrace& trace, const std::vector<std::size_t>& emit_positions,
            const std::vector<int>& targets);

struct BackwardResult {
    double loss = 0.0;
    Parameters grads;
};

// Analytic gradients of the answer-span loss w.r.t. every parameter.
BackwardResult backward(const Parameters& params, const std::vector<int>& tokens,
                        const std::vector<std::size_t>& emit_positions,
                        const std::vector<int>& targets);

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t warmup_steps = 200;
};

struct AdamState {
    Parameters m, v;
    std::size_t step = 0;
    static AdamState init(const Parameters& p);
};

void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const AdamConfig& cfg);

// One training sequence: tokens plus the supervised span.
struct TrainSequence {
    std::vector<int> tokens;
    std::vector<std::size_t> emit_positions;
    std::vector<int> targets;
};

using BatchProvider = std::function<std::vector<TrainSequence>(std::size_t step, RngState& rng)>;

struct TrainConfig {
    std::size_t steps = 4000;
    AdamConfig adam;
    std::size_t log_every = 100;
};

struct TrainResult {
    Parameters params;
    std::vector<double> loss_curve;  // one entry per step
};

// Deterministic given (init params, provider, seed). Aborts with
// numeric_error if the loss stops being finite.
TrainResult train(Parameters params, const BatchProvider& provider, const TrainConfig& cfg,
                  RngState rng,
                  const std::function<void(std::size_t, double)>& on_log = nullptr);

void save_checkpoint(const Parameters& params, const std::filesystem::path& path);
Parameters load_checkpoint(const std::filesystem::path& path);

}  // namespace stv
