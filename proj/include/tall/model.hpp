#pragma once

// Toy hierarchical window-attention network over thumbnails:
// patch embedding -> temporal position encoding -> stages of (shifted)
// window attention blocks with patch merging -> graph reasoning block ->
// mean pool -> linear head.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tall/error.hpp"
#include "tall/ops.hpp"
#include "tall/rng.hpp"
#include "tall/tensor.hpp"
#include "tall/transform.hpp"

namespace tall {

struct ModelConfig {
    std::size_t image_h = 64;
    std::size_t image_w = 64;
    std::size_t in_channels = 3;
    std::size_t patch = 4;
    std::size_t embed_dim = 32;
    std::vector<std::size_t> depths{2, 2};
    std::vector<std::size_t> heads{2, 4};
    /// Per-stage window side; 0 means the whole feature map.
    std::vector<std::size_t> windows{8, 0};
    bool shifted_windows = true;
    std::size_t mlp_ratio = 4;
    /// Slot grid of the thumbnail; one temporal position vector per cell.
    std::size_t grid_rows = 2;
    std::size_t grid_cols = 2;
    bool grb = true;
    std::size_t grb_dk = 32;
    std::size_t num_classes = 2;
    double init_std = 0.02;
    /// Pixels enter the patch embedding as (x - input_mean) / input_std.
    double input_mean = 0.5;
    double input_std = 0.25;

    std::size_t num_stages() const { return depths.size(); }
    std::size_t stage_dim(std::size_t s) const { return embed_dim << s; }
    std::size_t feature_dim() const { return stage_dim(num_stages() - 1); }
    std::size_t tpe_count() const { return grid_rows * grid_cols; }

    std::pair<std::size_t, std::size_t> stage_grid(std::size_t s) const {
        return {(image_h / patch) >> s, (image_w / patch) >> s};
    }

    /// Effective (rows, cols) window of a stage, clamped to the feature map.
    std::pair<std::size_t, std::size_t> stage_window(std::size_t s) const {
        const auto [gh, gw] = stage_grid(s);
        const std::size_t w = windows.at(s);
        if (w == 0) return {gh, gw};
        return {std::min(w, gh), std::min(w, gw)};
    }

    /// Cyclic shift of a block: half a window on odd blocks, none when the
    /// window already spans the feature map.
    std::pair<std::size_t, std::size_t> block_shift(std::size_t s, std::size_t block) const {
        if (!shifted_windows || block % 2 == 0) return {0, 0};
        const auto [gh, gw] = stage_grid(s);
        const auto [wh, ww] = stage_window(s);
        return {wh < gh ? wh / 2 : 0, ww < gw ? ww / 2 : 0};
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
        if (depths.empty() || heads.size() != depths.size() || windows.size() != depths.size())
            fail("depths, heads and windows need one entry per stage");
        if (patch == 0 || image_h % patch || image_w % patch) fail("thumbnail extent not divisible by patch size");
        if (grid_rows == 0 || grid_cols == 0 || image_h % (grid_rows * patch) || image_w % (grid_cols * patch))
            fail("patches would straddle sub-frame slots (patch size must divide the sub-frame extent)");
        const std::size_t shrink = std::size_t{1} << (num_stages() - 1);
        if ((image_h / patch) % shrink || (image_w / patch) % shrink)
            fail("patch grid not divisible by the patch-merging factor " + std::to_string(shrink));
        for (std::size_t s = 0; s < num_stages(); ++s) {
            const auto [gh, gw] = stage_grid(s);
            const auto [wh, ww] = stage_window(s);
            if (gh % wh || gw % ww)
                fail("stage " + std::to_string(s) + " grid " + std::to_string(gh) + "x" + std::to_string(gw) +
                     " not divisible by window " + std::to_string(wh) + "x" + std::to_string(ww));
            if (heads[s] == 0 || stage_dim(s) % heads[s]) fail("stage dim not divisible by heads");
        }
        const std::size_t last = num_stages() - 1;
        if (stage_window(last) != stage_grid(last)) fail("last-stage window must equal the last-stage feature map");
        if (num_classes < 2) fail("need at least two classes");
        if (grb && grb_dk == 0) fail("grb_dk must be positive");
        if (!(input_std > 0.0)) fail("input_std must be positive");
    }
};

template <Scalar T>
using ParamSet = std::map<std::string, Tensor<T>>;

template <Scalar T>
using BoundParams = std::map<std::string, Var<T>>;

namespace detail {

inline std::string block_prefix(std::size_t s, std::size_t b) {
    return "s" + std::to_string(s) + ".b" + std::to_string(b) + ".";
}

}  // namespace detail

/// Shapes of every parameter, by name.
inline std::map<std::string, Shape> param_shapes(const ModelConfig& cfg) {
    cfg.validate();
    std::map<std::string, Shape> s;
    const std::size_t c0 = cfg.embed_dim, pin = cfg.in_channels * cfg.patch * cfg.patch;
    s["patch.w"] = {pin, c0};
    s["patch.b"] = {c0};
    s["tpe"] = {cfg.tpe_count(), c0};
    for (std::size_t st = 0; st < cfg.num_stages(); ++st) {
        const std::size_t c = cfg.stage_dim(st), hidden = c * cfg.mlp_ratio;
        const auto [wh, ww] = cfg.stage_window(st);
        for (std::size_t b = 0; b < cfg.depths[st]; ++b) {
            const auto p = detail::block_prefix(st, b);
            s[p + "ln1.g"] = {c};
            s[p + "ln1.b"] = {c};
            s[p + "attn.q.w"] = {c, c};
            s[p + "attn.q.b"] = {c};
            s[p + "attn.k.w"] = {c, c};
            s[p + "attn.v.w"] = {c, c};
            s[p + "attn.v.b"] = {c};
            s[p + "attn.rel"] = {(2 * wh - 1) * (2 * ww - 1), cfg.heads[st]};
            s[p + "attn.proj.w"] = {c, c};
            s[p + "attn.proj.b"] = {c};
            s[p + "ln2.g"] = {c};
            s[p + "ln2.b"] = {c};
            s[p + "mlp.fc1.w"] = {c, hidden};
            s[p + "mlp.fc1.b"] = {hidden};
            s[p + "mlp.fc2.w"] = {hidden, c};
            s[p + "mlp.fc2.b"] = {c};
        }
        if (st + 1 < cfg.num_stages()) {
            const auto p = "merge" + std::to_string(st) + ".";
            s[p + "ln.g"] = {4 * c};
            s[p + "ln.b"] = {4 * c};
            s[p + "w"] = {4 * c, 2 * c};
        }
    }
    const std::size_t d = cfg.feature_dim();
    s["norm.g"] = {d};
    s["norm.b"] = {d};
    if (cfg.grb) {
        s["grb.theta"] = {d, cfg.grb_dk};
        s["grb.phi"] = {d, cfg.grb_dk};
        s["grb.w1"] = {d, d};
        s["grb.w2"] = {d, d};
    }
    s["head.w"] = {d, cfg.num_classes};
    s["head.b"] = {cfg.num_classes};
    return s;
}

inline std::size_t count_params(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& [name, shape] : param_shapes(cfg)) n += numel(shape);
    return n;
}

/// Deterministic initialisation: Glorot-normal weight matrices, Gaussian
/// (0, init_std) position tables, zero biases, unit LayerNorm gains, and a
/// zero GRB output projection so the block starts as the identity.
template <Scalar T>
ParamSet<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParamSet<T> params;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        Rng rng(derive_seed(seed, {fnv1a(name)}));
        const auto ends_with = [&](std::string_view suffix) {
            return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        if (ends_with(".g"))
            params.emplace(name, Tensor<T>(shape, T{1}));
        else if (name == "grb.w2" || name == "head.w" || (ends_with(".b") && name != "tpe"))
            params.emplace(name, Tensor<T>(shape));
        else if (name == "tpe" || ends_with(".rel"))
            params.emplace(name, Tensor<T>::randn(shape, rng, cfg.init_std));
        else
            params.emplace(name, Tensor<T>::randn(shape, rng, std::sqrt(2.0 / static_cast<double>(shape[0] + shape[1]))));
    }
    return params;
}

template <Scalar T>
BoundParams<T> bind_params(Tape<T>& tape, const ParamSet<T>& params) {
    BoundParams<T> out;
    for (const auto& [name, value] : params) out.emplace(name, tape.param(name, value));
    return out;
}

/// Precomputed index maps for one window-attention geometry.
struct AttentionGeometry {
    std::size_t gh, gw, wh, ww, sh, sw, heads, dim;
    std::size_t windows() const { return (gh / wh) * (gw / ww); }
    std::size_t window_len() const { return wh * ww; }

    IndexMapPtr split_heads;    // [N, C] -> [heads*nW, L, hd]
    IndexMapPtr merge_heads;    // [heads*nW, L, hd] -> [N, C]
    IndexMapPtr bias;           // rel table [R, heads] -> [heads*nW, L, L]
    std::shared_ptr<const std::vector<double>> mask;  // additive, empty when unshifted
    std::vector<std::size_t> token_of;  // (window*L + pos) -> original token id
};

namespace detail {

inline std::shared_ptr<const AttentionGeometry> build_geometry(std::size_t gh, std::size_t gw, std::size_t wh,
                                                               std::size_t ww, std::size_t sh, std::size_t sw,
                                                               std::size_t heads, std::size_t dim) {
    auto g = std::make_shared<AttentionGeometry>();
    *g = AttentionGeometry{gh, gw, wh, ww, sh, sw, heads, dim, {}, {}, {}, {}, {}};
    const std::size_t n = gh * gw, nw = g->windows(), len = g->window_len(), hd = dim / heads;
    const std::size_t bh = heads * nw;

    IndexMap split(bh * len * hd), merge(n * dim);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t w = 0; w < nw; ++w)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t e = 0; e < hd; ++e) {
                    const std::size_t dst = ((h * nw + w) * len + l) * hd + e;
                    const std::size_t row = w * len + l, col = h * hd + e;
                    split[dst] = static_cast<std::uint32_t>(row * dim + col);
                    merge[row * dim + col] = static_cast<std::uint32_t>(dst);
                }
    g->split_heads = std::make_shared<const IndexMap>(std::move(split));
    g->merge_heads = std::make_shared<const IndexMap>(std::move(merge));

    IndexMap bias(bh * len * len);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t w = 0; w < nw; ++w)
            for (std::size_t i = 0; i < len; ++i)
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t dr = i / ww + wh - 1 - j / ww;
                    const std::size_t dc = i % ww + ww - 1 - j % ww;
                    const std::size_t rel = dr * (2 * ww - 1) + dc;
                    bias[((h * nw + w) * len + i) * len + j] = static_cast<std::uint32_t>(rel * heads + h);
                }
    g->bias = std::make_shared<const IndexMap>(std::move(bias));

    const auto part = window_partition_map(gh, gw, wh, ww);
    const auto shift = cyclic_shift_map(gh, gw, static_cast<std::ptrdiff_t>(sh), static_cast<std::ptrdiff_t>(sw));
    g->token_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) g->token_of[i] = shift[part[i]];

    if (sh > 0 || sw > 0) {
        // Region labels on the shifted grid; tokens that were not neighbours
        // before the roll must not attend to each other.
        auto band = [](std::size_t p, std::size_t extent, std::size_t win, std::size_t s) -> std::size_t {
            if (s == 0) return 0;
            return p < extent - win ? 0 : (p < extent - s ? 1 : 2);
        };
        std::vector<std::size_t> label(n);
        for (std::size_t r = 0; r < gh; ++r)
            for (std::size_t c = 0; c < gw; ++c) label[r * gw + c] = band(r, gh, wh, sh) * 3 + band(c, gw, ww, sw);
        std::vector<double> mask(bh * len * len, 0.0);
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t w = 0; w < nw; ++w)
                for (std::size_t i = 0; i < len; ++i)
                    for (std::size_t j = 0; j < len; ++j)
                        if (label[part[w * len + i]] != label[part[w * len + j]])
                            mask[((h * nw + w) * len + i) * len + j] = -1e4;
        g->mask = std::make_shared<const std::vector<double>>(std::move(mask));
    }
    return g;
}

}  // namespace detail

/// Cached geometry lookup; safe to call from several threads.
inline std::shared_ptr<const AttentionGeometry> attention_geometry(std::size_t gh, std::size_t gw, std::size_t wh,
                                                                   std::size_t ww, std::size_t sh, std::size_t sw,
                                                                   std::size_t heads, std::size_t dim) {
    using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,
                           std::size_t>;
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<const AttentionGeometry>> cache;
    const Key key{gh, gw, wh, ww, sh, sw, heads, dim};
    std::lock_guard lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto g = detail::build_geometry(gh, gw, wh, ww, sh, sw, heads, dim);
    cache.emplace(key, g);
    return g;
}

/// Attention probabilities recorded for one block.
template <Scalar T>
struct BlockTrace {
    std::size_t stage = 0, block = 0;
    std::shared_ptr<const AttentionGeometry> geometry;
    Var<T> attn;  // [heads*nW, L, L]
};

/// Dense [N, N] attention matrix of one head, scattered back to original
/// token positions. Token pairs that never share a window are 0.
template <Scalar T>
Tensor<T> dense_attention(const BlockTrace<T>& trace, std::size_t head) {
    const auto& g = *trace.geometry;
    const std::size_t n = g.gh * g.gw, nw = g.windows(), len = g.window_len();
    if (head >= g.heads) throw ConfigError("head index out of range");
    Tensor<T> out(Shape{n, n});
    const auto& a = trace.attn.value();
    for (std::size_t w = 0; w < nw; ++w)
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j < len; ++j)
                out[g.token_of[w * len + i] * n + g.token_of[w * len + j]] += a[((head * nw + w) * len + i) * len + j];
    return out;
}

/// Pre-norm window attention block followed by an MLP, both residual.
template <Scalar T>
Var<T> window_attention_block(Var<T> x, const AttentionGeometry& g, const BoundParams<T>& p, const std::string& prefix,
                              Var<T>* attn_out = nullptr) {
    Tape<T>& tape = *x.tape;
    const std::size_t n = g.gh * g.gw, c = g.dim, nw = g.windows(), len = g.window_len(), hd = c / g.heads;
    if (x.shape() != Shape{n, c}) throw ShapeError("window_attention_block", x.shape(), Shape{n, c});
    const auto P = [&](const char* k) { return p.at(prefix + k); };

    auto h = layernorm(x, P("ln1.g"), P("ln1.b"));
    const bool shifted = g.sh > 0 || g.sw > 0;
    if (shifted)
        h = cyclic_shift(h, g.gh, g.gw, static_cast<std::ptrdiff_t>(g.sh), static_cast<std::ptrdiff_t>(g.sw));
    h = window_partition(h, g.gh, g.gw, g.wh, g.ww);
    // No key bias: it shifts every score in a row equally and cancels in the softmax.
    const Shape hs{g.heads * nw, len, hd};
    auto q = gather(linear(h, P("attn.q.w"), P("attn.q.b")), g.split_heads, hs);
    auto k = gather(matmul(h, P("attn.k.w")), g.split_heads, hs);
    auto v = gather(linear(h, P("attn.v.w"), P("attn.v.b")), g.split_heads, hs);
    auto scores = scale(matmul(q, k, false, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd))));
    scores = add(scores, gather(P("attn.rel"), g.bias, Shape{g.heads * nw, len, len}));
    if (shifted) {
        Tensor<T> mask(Shape{g.heads * nw, len, len});
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<T>((*g.mask)[i]);
        scores = add(scores, tape.constant(std::move(mask)));
    }
    auto attn = softmax(scores);
    if (attn_out) *attn_out = attn;
    auto o = gather(matmul(attn, v), g.merge_heads, Shape{n, c});
    o = linear(o, P("attn.proj.w"), P("attn.proj.b"));
    o = window_unpartition(o, g.gh, g.gw, g.wh, g.ww);
    if (shifted)
        o = cyclic_shift(o, g.gh, g.gw, -static_cast<std::ptrdiff_t>(g.sh), -static_cast<std::ptrdiff_t>(g.sw));
    x = add(x, o);

    auto m = layernorm(x, P("ln2.g"), P("ln2.b"));
    m = linear(gelu(linear(m, P("mlp.fc1.w"), P("mlp.fc1.b"))), P("mlp.fc2.w"), P("mlp.fc2.b"));
    return add(x, m);
}

/// Flattens [C,H,W] into non-overlapping PxP patches [N, C*P*P] (row-major
/// patch order; features ordered channel, row, column) and projects to dim c.
template <Scalar T>
Var<T> patch_embed(Var<T> image, std::size_t patch, Var<T> weight, Var<T> bias) {
    const Shape& s = image.shape();
    if (s.size() != 3 || patch == 0 || s[1] % patch || s[2] % patch)
        throw ConfigError("patch_embed: image " + shape_str(s) + " not divisible by patch " + std::to_string(patch));
    const std::size_t ch = s[0], h = s[1], w = s[2], gh = h / patch, gw = w / patch, f = ch * patch * patch;
    auto map = std::make_shared<IndexMap>(gh * gw * f);
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px)
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t x = 0; x < patch; ++x)
                        (*map)[((py * gw + px) * ch + c) * patch * patch + y * patch + x] =
                            static_cast<std::uint32_t>((c * h + py * patch + y) * w + px * patch + x);
    auto patches = gather(image, std::shared_ptr<const IndexMap>(std::move(map)), Shape{gh * gw, f});
    return linear(patches, weight, bias);
}

/// Slot-grid cell containing the centre of each token of a gh x gw token grid.
inline std::vector<std::size_t> token_cells(std::size_t gh, std::size_t gw, std::size_t grid_rows, std::size_t grid_cols) {
    std::vector<std::size_t> cells(gh * gw);
    for (std::size_t r = 0; r < gh; ++r)
        for (std::size_t c = 0; c < gw; ++c) {
            // centre (r+0.5)/gh of the image height, in units of slot rows
            const std::size_t sr = ((2 * r + 1) * grid_rows) / (2 * gh);
            const std::size_t sc = ((2 * c + 1) * grid_cols) / (2 * gw);
            cells[r * gw + c] = sr * grid_cols + sc;
        }
    return cells;
}

/// out[i] = patches[i] + tpe[cell(i)].
template <Scalar T>
Var<T> add_tpe(Var<T> patches, Var<T> tpe, std::size_t gh, std::size_t gw, std::size_t grid_rows, std::size_t grid_cols) {
    const std::size_t c = patches.shape().back();
    if (tpe.shape() != Shape{grid_rows * grid_cols, c}) throw ShapeError("add_tpe", tpe.shape(), Shape{grid_rows * grid_cols, c});
    if (gh % grid_rows || gw % grid_cols)
        throw ConfigError("add_tpe: token grid " + std::to_string(gh) + "x" + std::to_string(gw) +
                          " straddles the slot grid");
    const auto cells = token_cells(gh, gw, grid_rows, grid_cols);
    auto map = std::make_shared<const IndexMap>(cells.begin(), cells.end());
    return add(patches, gather_rows(tpe, map, c, Shape{gh * gw, c}));
}

/// 2x2 neighbour concatenation ([x00, x10, x01, x11]) -> LayerNorm -> linear.
template <Scalar T>
Var<T> patch_merge(Var<T> x, std::size_t gh, std::size_t gw, const BoundParams<T>& p, const std::string& prefix) {
    const std::size_t c = x.shape().back();
    auto map = std::make_shared<IndexMap>();
    map->reserve(gh * gw);
    for (std::size_t r = 0; r < gh / 2; ++r)
        for (std::size_t q = 0; q < gw / 2; ++q)
            for (auto [dr, dc] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}})
                map->push_back(static_cast<std::uint32_t>((2 * r + static_cast<std::size_t>(dr)) * gw + 2 * q +
                                                          static_cast<std::size_t>(dc)));
    auto cat = gather_rows(x, std::shared_ptr<const IndexMap>(std::move(map)), c, Shape{gh * gw / 4, 4 * c});
    return matmul(layernorm(cat, p.at(prefix + "ln.g"), p.at(prefix + "ln.b")), p.at(prefix + "w"));
}

template <Scalar T>
struct GrbOutput {
    Var<T> fy;
    Var<T> weights;  // row-stochastic [N', N']
};

/// Graph reasoning over N' token nodes: affinity G = (f θ)(f φ)^T / sqrt(dk),
/// row-softmax to G_w, one graph convolution G_w (f W1) W2, added back to f.
template <Scalar T>
GrbOutput<T> grb_forward(Var<T> fx, Var<T> theta, Var<T> phi, Var<T> w1, Var<T> w2) {
    const std::size_t dk = theta.shape().back();
    auto g = scale(matmul(matmul(fx, theta), matmul(fx, phi), false, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk))));
    auto gw = softmax(g);
    auto fy = add(fx, matmul(matmul(gw, matmul(fx, w1)), w2));
    return {fy, gw};
}

template <Scalar T>
struct ModelOutput {
    Var<T> logits;          // [1, K]
    Var<T> tokens;          // f_x, last-stage tokens before the GRB [N', d]
    Var<T> fy;              // post-GRB tokens [N', d]
    std::optional<Var<T>> grb_weights;
    std::optional<Var<T>> frame_features;  // [F', d], one row per placed frame
    std::vector<std::size_t> feature_frames;   // source frame of each row
    Var<T> embeddings;      // patch embeddings after TPE [N, c]
    std::vector<BlockTrace<T>> blocks;
    std::size_t final_gh = 0, final_gw = 0;
};

struct ForwardOptions {
    /// Slot-grid cell of each source frame (-1 if the frame was dropped).
    std::vector<int> frame_cells;
    bool bypass_grb = false;
    bool record_attention = false;
};

/// Grid cell (row*cols + col) of each frame of a thumbnail.
inline std::vector<int> frame_cells(const Thumbnail& th) {
    std::vector<int> cells;
    for (int slot : th.frame_slot) {
        if (slot < 0) {
            cells.push_back(-1);
            continue;
        }
        const auto [r, c] = th.layout.coords[static_cast<std::size_t>(slot)];
        cells.push_back(static_cast<int>(r * th.layout.cols + c));
    }
    return cells;
}

template <Scalar T>
ModelOutput<T> model_forward(Tape<T>& tape, const ModelConfig& cfg, const BoundParams<T>& p, const Tensor<T>& image,
                             const ForwardOptions& opt = {}) {
    if (image.shape() != Shape{cfg.in_channels, cfg.image_h, cfg.image_w})
        throw ShapeError("model_forward", image.shape(), Shape{cfg.in_channels, cfg.image_h, cfg.image_w});
    ModelOutput<T> out;
    auto [gh, gw] = cfg.stage_grid(0);
    Tensor<T> normed(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i)
        normed[i] = static_cast<T>((static_cast<double>(image[i]) - cfg.input_mean) / cfg.input_std);
    auto x = patch_embed(tape.constant(std::move(normed)), cfg.patch, p.at("patch.w"), p.at("patch.b"));
    x = add_tpe(x, p.at("tpe"), gh, gw, cfg.grid_rows, cfg.grid_cols);
    out.embeddings = x;

    for (std::size_t s = 0; s < cfg.num_stages(); ++s) {
        std::tie(gh, gw) = cfg.stage_grid(s);
        const auto [wh, ww] = cfg.stage_window(s);
        for (std::size_t b = 0; b < cfg.depths[s]; ++b) {
            const auto [sh, sw] = cfg.block_shift(s, b);
            auto geo = attention_geometry(gh, gw, wh, ww, sh, sw, cfg.heads[s], cfg.stage_dim(s));
            Var<T> attn;
            x = window_attention_block(x, *geo, p, detail::block_prefix(s, b), &attn);
            if (opt.record_attention) out.blocks.push_back(BlockTrace<T>{s, b, geo, attn});
        }
        if (s + 1 < cfg.num_stages()) x = patch_merge(x, gh, gw, p, "merge" + std::to_string(s) + ".");
    }
    out.final_gh = gh;
    out.final_gw = gw;
    out.tokens = layernorm(x, p.at("norm.g"), p.at("norm.b"));
    out.fy = out.tokens;
    if (cfg.grb && !opt.bypass_grb) {
        auto g = grb_forward(out.tokens, p.at("grb.theta"), p.at("grb.phi"), p.at("grb.w1"), p.at("grb.w2"));
        out.fy = g.fy;
        out.grb_weights = g.weights;
    }
    const std::size_t n = gh * gw;
    auto pooled = segment_mean(out.fy, std::vector<int>(n, 0), 1);
    out.logits = linear(pooled, p.at("head.w"), p.at("head.b"));

    if (!opt.frame_cells.empty()) {
        const auto cells = token_cells(gh, gw, cfg.grid_rows, cfg.grid_cols);
        std::vector<int> cell_segment(cfg.tpe_count(), -1);
        for (std::size_t f = 0; f < opt.frame_cells.size(); ++f) {
            const int cell = opt.frame_cells[f];
            if (cell < 0) continue;
            if (static_cast<std::size_t>(cell) >= cell_segment.size()) throw ConfigError("frame cell outside slot grid");
            cell_segment[static_cast<std::size_t>(cell)] = static_cast<int>(out.feature_frames.size());
            out.feature_frames.push_back(f);
        }
        if (!out.feature_frames.empty()) {
            std::vector<int> segs(n);
            for (std::size_t i = 0; i < n; ++i) segs[i] = cell_segment[cells[i]];
            out.frame_features = segment_mean(out.fy, std::move(segs), out.feature_frames.size());
        }
    }
    return out;
}

/// Convenience for float thumbnails feeding a model of another precision.
template <Scalar T>
ModelOutput<T> model_forward(Tape<T>& tape, const ModelConfig& cfg, const BoundParams<T>& p, const Thumbnail& th,
                             ForwardOptions opt = {}) {
    opt.frame_cells = frame_cells(th);
    return model_forward(tape, cfg, p, th.image.template cast<T>(), opt);
}

}  // namespace tall
