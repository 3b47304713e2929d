#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tall/gradcheck.hpp"
#include "tall/losses.hpp"
#include "tall/model.hpp"
#include "tall/transform.hpp"

using namespace tall;

namespace {

Tensor<double> random_image(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    return Tensor<double>::uniform(Shape{cfg.in_channels, cfg.image_h, cfg.image_w}, rng, 0.0, 1.0);
}

/// Small geometry that keeps every mechanism: two stages, shifted windows
/// in stage 0, full attention in stage 1.
ModelConfig tiny_config() {
    ModelConfig c;
    c.image_h = c.image_w = 16;
    c.patch = 2;
    c.embed_dim = 8;
    c.depths = {2, 1};
    c.heads = {2, 2};
    c.windows = {4, 0};
    c.grb_dk = 4;
    return c;
}

/// Parameter count written out per tensor, independently of param_shapes.
std::size_t expected_params(const ModelConfig& c) {
    std::size_t n = 0;
    const std::size_t pin = c.in_channels * c.patch * c.patch;
    n += pin * c.embed_dim + c.embed_dim;           // patch embedding
    n += c.grid_rows * c.grid_cols * c.embed_dim;  // temporal position vectors
    for (std::size_t s = 0; s < c.depths.size(); ++s) {
        const std::size_t d = c.embed_dim << s;
        const auto [wh, ww] = c.stage_window(s);
        const std::size_t block = 2 * d                         // ln1
                                  + (d * d + d) + d * d + (d * d + d)  // q, k, v
                                  + (2 * wh - 1) * (2 * ww - 1) * c.heads[s]
                                  + (d * d + d)                  // proj
                                  + 2 * d                        // ln2
                                  + (d * 4 * d + 4 * d) + (4 * d * d + d);
        n += c.depths[s] * block;
        if (s + 1 < c.depths.size()) n += 2 * 4 * d + 4 * d * 2 * d;
    }
    const std::size_t f = c.feature_dim();
    n += 2 * f;                                    // final norm
    n += 2 * f * c.grb_dk + 2 * f * f;             // theta, phi, w1, w2
    n += f * c.num_classes + c.num_classes;        // head
    return n;
}

int quadrant(std::size_t token, std::size_t gw, std::size_t sub) {
    const std::size_t r = token / gw, c = token % gw;
    return static_cast<int>((r / sub) * 2 + c / sub);
}

}  // namespace

TEST(ModelConfig, ToyDefaultGeometry) {
    const ModelConfig c;
    EXPECT_EQ(c.stage_grid(0), (std::pair<std::size_t, std::size_t>{16, 16}));
    EXPECT_EQ(c.stage_grid(1), (std::pair<std::size_t, std::size_t>{8, 8}));
    EXPECT_EQ(c.stage_window(1), (std::pair<std::size_t, std::size_t>{8, 8}));
    EXPECT_EQ(c.block_shift(0, 0), (std::pair<std::size_t, std::size_t>{0, 0}));
    EXPECT_EQ(c.block_shift(0, 1), (std::pair<std::size_t, std::size_t>{4, 4}));
    EXPECT_EQ(c.block_shift(1, 1), (std::pair<std::size_t, std::size_t>{0, 0}));
    EXPECT_EQ(c.feature_dim(), 64u);
}

TEST(ModelConfig, ParameterCountMatchesHandCount) {
    const ModelConfig toy;
    EXPECT_EQ(count_params(toy), expected_params(toy));
    EXPECT_EQ(count_params(toy), 150574u);
    EXPECT_EQ(count_params(tiny_config()), expected_params(tiny_config()));
}

TEST(ModelConfig, ValidateRejectsBadGeometry) {
    ModelConfig c;
    c.windows = {6, 0};
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig{};
    c.windows = {8, 4};
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig{};
    c.heads = {3, 4};
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig{};
    c.patch = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig{};
    c.input_std = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelInit, DeterministicAndStructured) {
    const ModelConfig c;
    const auto a = init_params<float>(c, 1), b = init_params<float>(c, 1), d = init_params<float>(c, 2);
    for (const auto& [name, t] : a) EXPECT_TRUE(bit_equal(t, b.at(name))) << name;
    EXPECT_FALSE(bit_equal(a.at("patch.w"), d.at("patch.w")));
    for (float v : a.at("norm.g").data()) EXPECT_EQ(v, 1.0f);
    for (float v : a.at("s0.b0.attn.q.b").data()) EXPECT_EQ(v, 0.0f);
    for (float v : a.at("grb.w2").data()) EXPECT_EQ(v, 0.0f);
    for (float v : a.at("head.w").data()) EXPECT_EQ(v, 0.0f);
    double ss = 0;
    for (float v : a.at("tpe").data()) ss += v * v;
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(a.at("tpe").size())), c.init_std, 0.01);
}

TEST(TokenCells, QuadrantAssignment) {
    const auto cells = token_cells(4, 4, 2, 2);
    EXPECT_EQ(cells[0], 0u);
    EXPECT_EQ(cells[3], 1u);
    EXPECT_EQ(cells[8], 2u);
    EXPECT_EQ(cells[15], 3u);
}

TEST(Tpe, AddsOneVectorPerSlot) {
    Tape<double> t;
    auto x = t.constant(Tensor<double>(Shape{16, 2}));
    Tensor<double> tpe(Shape{4, 2}, std::vector<double>{1, 10, 2, 20, 3, 30, 4, 40});
    auto y = add_tpe(x, t.constant(tpe), 4, 4, 2, 2).value();
    EXPECT_EQ(y.at(0, 0), 1.0);
    EXPECT_EQ(y.at(2, 1), 20.0);
    EXPECT_EQ(y.at(13, 0), 3.0);
    EXPECT_EQ(y.at(15, 1), 40.0);
}

TEST(PatchMerge, ConcatenationOrder) {
    Tape<double> t;
    Tensor<double> x(Shape{4, 1}, std::vector<double>{1, 2, 3, 4});  // 2x2 grid: 1 2 / 3 4
    BoundParams<double> p;
    p.emplace("m.ln.g", t.constant(Tensor<double>(Shape{4}, 1.0)));
    p.emplace("m.ln.b", t.constant(Tensor<double>(Shape{4}, 0.0)));
    Tensor<double> w(Shape{4, 4});
    for (std::size_t i = 0; i < 4; ++i) w.at(i, i) = 1.0;
    p.emplace("m.w", t.constant(w));
    auto y = patch_merge(t.constant(x), 2, 2, p, "m.").value();
    // order x00, x10, x01, x11 -> 1, 3, 2, 4 before normalisation
    EXPECT_LT(y[0], y[2]);
    EXPECT_LT(y[2], y[1]);
    EXPECT_LT(y[1], y[3]);
}

TEST(Attention, UnshiftedQuadrantWindowsAreBlockDiagonal) {
    const ModelConfig c;
    const auto params = init_params<double>(c, 3);
    Tape<double> t;
    const auto bound = bind_params(t, params);
    ForwardOptions opt;
    opt.record_attention = true;
    const auto out = model_forward(t, c, bound, random_image(c, 1), opt);
    const auto& b0 = out.blocks.at(0);
    ASSERT_EQ(b0.geometry->sh, 0u);
    for (std::size_t h = 0; h < c.heads[0]; ++h) {
        const auto dense = dense_attention(b0, h);
        const std::size_t n = dense.dim(0);
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0;
            for (std::size_t j = 0; j < n; ++j) {
                row += dense.at(i, j);
                if (quadrant(i, 16, 8) != quadrant(j, 16, 8)) {
                    EXPECT_EQ(dense.at(i, j), 0.0);
                }
            }
            EXPECT_NEAR(row, 1.0, 1e-12);
        }
    }
}

TEST(Attention, ShiftedWindowsCrossSubFrames) {
    const auto g = attention_geometry(16, 16, 8, 8, 4, 4, 2, 32);
    bool crosses = false;
    for (std::size_t w = 0; w < g->windows(); ++w) {
        std::set<int> q;
        for (std::size_t l = 0; l < g->window_len(); ++l) q.insert(quadrant(g->token_of[w * g->window_len() + l], 16, 8));
        crosses = crosses || q.size() >= 2;
    }
    EXPECT_TRUE(crosses);
}

TEST(Attention, ShiftMaskSeparatesWrappedRegions) {
    const ModelConfig c;
    const auto params = init_params<double>(c, 4);
    Tape<double> t;
    const auto bound = bind_params(t, params);
    ForwardOptions opt;
    opt.record_attention = true;
    const auto out = model_forward(t, c, bound, random_image(c, 2), opt);
    const auto& b1 = out.blocks.at(1);
    ASSERT_EQ(b1.geometry->sh, 4u);
    const auto dense = dense_attention(b1, 0);
    // token (0,0) and token (15,15) share the wrapped corner window but were
    // never neighbours, so the mask removes their interaction
    EXPECT_LT(dense.at(0, 255), 1e-30);
    EXPECT_GT(dense.at(0, 1), 0.0);
}

TEST(Grb, IdentityAtInitAndRowStochastic) {
    const ModelConfig c;
    const auto params = init_params<float>(c, 5);
    Tape<float> t;
    const auto bound = bind_params(t, params);
    const auto img = random_image(c, 3).cast<float>();
    ForwardOptions bypass;
    bypass.bypass_grb = true;
    const auto with = model_forward(t, c, bound, img);
    const auto without = model_forward(t, c, bound, img, bypass);
    EXPECT_TRUE(bit_equal(with.fy.value(), with.tokens.value()));
    EXPECT_TRUE(bit_equal(with.logits.value(), without.logits.value()));
    const auto& w = with.grb_weights->value();
    for (std::size_t i = 0; i < w.dim(0); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < w.dim(1); ++j) s += w.at(i, j);
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Grb, TrainedOutputProjectionChangesTokens) {
    const ModelConfig c;
    auto params = init_params<double>(c, 6);
    Rng rng(1);
    params.at("grb.w2") = Tensor<double>::randn(params.at("grb.w2").shape(), rng, 0.1);
    Tape<double> t;
    const auto out = model_forward(t, c, bind_params(t, params), random_image(c, 4));
    EXPECT_FALSE(bit_equal(out.fy.value(), out.tokens.value()));
}

TEST(ModelForward, OutputShapesAndFrameFeatures) {
    const ModelConfig c;
    const auto params = init_params<float>(c, 7);
    Rng rng(1);
    Clip clip{Tensor<float>::uniform(Shape{4, 3, 128, 128}, rng, 0, 1), 0, 0, 0, 0};
    const auto th = tall_transform(clip, 0, LayoutSpec::grid(2, 2, 4), OrderSpec::drop_last(1), rng);
    Tape<float> t;
    const auto out = model_forward(t, c, bind_params(t, params), th);
    EXPECT_EQ(out.logits.shape(), (Shape{1, 2}));
    EXPECT_EQ(out.tokens.shape(), (Shape{64, 64}));
    ASSERT_TRUE(out.frame_features);
    EXPECT_EQ(out.frame_features->shape(), (Shape{3, 64}));
    EXPECT_EQ(out.feature_frames, (std::vector<std::size_t>{0, 1, 2}));
    // row 0 is the mean of the 16 top-left tokens
    double s = 0;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t col = 0; col < 4; ++col) s += out.fy.value().at(r * 8 + col, 5);
    EXPECT_NEAR(out.frame_features->value().at(0, 5), s / 16, 1e-5);
}

TEST(ModelForward, WrongImageShapeIsShapeError) {
    const ModelConfig c;
    const auto params = init_params<double>(c, 1);
    Tape<double> t;
    EXPECT_THROW(model_forward(t, c, bind_params(t, params), Tensor<double>(Shape{3, 32, 32})), ShapeError);
}

TEST(ModelForward, SlotPermutationEquivarianceWithoutPositionalTerms) {
    // With no shift, zero relative bias and zero position vectors, nothing in
    // the network sees where a sub-frame sits, so reordering the slots
    // permutes the frame features and leaves the logits unchanged.
    ModelConfig c;
    c.shifted_windows = false;
    auto params = init_params<double>(c, 8);
    for (auto& [name, t] : params)
        if (name == "tpe" || name.ends_with(".rel")) t.fill(0.0);
    Rng rng(2);
    params.at("grb.w2") = Tensor<double>::randn(params.at("grb.w2").shape(), rng, 0.1);
    params.at("head.w") = Tensor<double>::randn(params.at("head.w").shape(), rng, 0.5);
    Clip clip{Tensor<float>::uniform(Shape{4, 3, 32, 32}, rng, 0, 1), 0, 0, 0, 0};
    const auto layout = LayoutSpec::grid(2, 2, 1);
    Rng r1(0), r2(0);
    const auto fwd = tall_transform(clip, 0, layout, OrderSpec::forward(), r1);
    const auto rev = tall_transform(clip, 0, layout, OrderSpec::reverse(), r2);
    Tape<double> t;
    const auto bound = bind_params(t, params);
    const auto a = model_forward(t, c, bound, fwd), b = model_forward(t, c, bound, rev);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(a.logits.value()[k], b.logits.value()[k], 1e-10);
    const auto& fa = a.frame_features->value();
    const auto& fb = b.frame_features->value();
    for (std::size_t f = 0; f < 4; ++f)
        for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(fa.at(f, j), fb.at(f, j), 1e-10);
}

TEST(ModelForward, PositionalTermsBreakSlotSymmetry) {
    const ModelConfig c;
    auto params = init_params<double>(c, 9);
    Rng rng(3);
    params.at("head.w") = Tensor<double>::randn(params.at("head.w").shape(), rng, 0.5);
    Clip clip{Tensor<float>::uniform(Shape{4, 3, 32, 32}, rng, 0, 1), 0, 0, 0, 0};
    const auto layout = LayoutSpec::grid(2, 2, 1);
    Rng r1(0), r2(0);
    Tape<double> t;
    const auto bound = bind_params(t, params);
    const auto a = model_forward(t, c, bound, tall_transform(clip, 0, layout, OrderSpec::forward(), r1));
    const auto b = model_forward(t, c, bound, tall_transform(clip, 0, layout, OrderSpec::reverse(), r2));
    EXPECT_GT(std::abs(a.logits.value()[0] - b.logits.value()[0]), 1e-9);
}

TEST(ModelGradients, TinyModelMatchesFiniteDifferences) {
    const auto c = tiny_config();
    auto params = init_params<double>(c, 10);
    Rng rng(4);
    // move off the special initial point so every parameter has a gradient
    for (auto& [name, t] : params)
        for (auto& v : t.data()) v += rng.normal() * 0.05;
    const auto img = random_image(c, 5);
    LossFn loss = [&](Tape<double>& t, const ParamVars& p) {
        ForwardOptions opt;
        opt.frame_cells = {0, 1, 2, 3};
        const auto out = model_forward(t, c, p, img, opt);
        return total_loss(ce_loss(out.logits, 1), sc_loss(*out.frame_features), 0.5);
    };
    const auto report = grad_check(loss, params, 1e-6, 20);
    for (const auto& p : report.params) EXPECT_LT(p.max_rel_error, 1e-4) << p.name;
}
