#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "tall/clipgen.hpp"

namespace fs = std::filesystem;
using namespace tall;

namespace {

CorpusSpec small_spec(double magnitude = 0.5, ArtifactKind kind = ArtifactKind::flicker) {
    CorpusSpec s;
    s.videos_per_class = 6;
    s.frames = 16;
    s.height = 64;
    s.width = 64;
    s.kinds = {kind};
    s.magnitude = magnitude;
    s.seed = 3;
    return s;
}

struct RegionDiff {
    double inside = 0.0, outside = 0.0;
};

RegionDiff region_diff(const CorpusSpec& spec, std::size_t scene) {
    const auto real = render_frames(spec, scene, 0, spec.frames);
    const auto fake = render_frames(spec, scene + spec.videos_per_class, 0, spec.frames);
    const auto reg = artifact_region(spec, scene);
    RegionDiff d;
    std::size_t n_in = 0, n_out = 0;
    const std::size_t h = spec.height, w = spec.width;
    for (std::size_t i = 0; i < real.size(); ++i) {
        const std::size_t y = (i / w) % h, x = i % w;
        const double diff = std::abs(real[i] - fake[i]);
        if (reg.contains(y, x)) {
            d.inside += diff;
            ++n_in;
        } else {
            d.outside += diff;
            ++n_out;
        }
    }
    d.inside /= static_cast<double>(n_in);
    d.outside /= static_cast<double>(n_out);
    return d;
}

}  // namespace

TEST(Clipgen, RenderingIsDeterministic) {
    const auto spec = small_spec();
    EXPECT_TRUE(bit_equal(render_frames(spec, 7, 0, 4), render_frames(spec, 7, 0, 4)));
    auto other = spec;
    other.seed = 4;
    EXPECT_FALSE(bit_equal(render_frames(spec, 7, 0, 4), render_frames(other, 7, 0, 4)));
}

TEST(Clipgen, PartialRenderMatchesFullVideo) {
    const auto spec = small_spec();
    const auto video = generate_video(spec, 8);
    const auto clip = extract_clip(video, 5, 4);
    EXPECT_TRUE(bit_equal(clip.frames, render_clip(spec, 8, 5, 4).frames));
    EXPECT_EQ(clip.label, 1);
}

TEST(Clipgen, PixelValuesStayInUnitRange) {
    const auto spec = small_spec(1.0);
    const auto v = render_frames(spec, 9, 0, spec.frames);
    for (float p : v.data()) {
        EXPECT_GE(p, 0.0f);
        EXPECT_LE(p, 1.0f);
    }
}

TEST(Clipgen, ClassMajorIndexingPairsTwins) {
    const auto spec = small_spec();
    for (std::size_t i = 0; i < spec.videos_per_class; ++i) {
        const auto real = describe_video(spec, i), fake = describe_video(spec, i + spec.videos_per_class);
        EXPECT_EQ(real.label, 0);
        EXPECT_EQ(fake.label, 1);
        EXPECT_EQ(real.scene, fake.scene);
        EXPECT_FALSE(real.kind.has_value());
    }
    EXPECT_THROW(describe_video(spec, spec.num_videos()), ConfigError);
}

TEST(Clipgen, FakeDiffersOnlyInsideArtifactRegion) {
    for (auto kind : {ArtifactKind::flicker, ArtifactKind::seam, ArtifactKind::texture}) {
        SCOPED_TRACE(to_string(kind));
        const auto spec = small_spec(0.5, kind);
        for (std::size_t scene = 0; scene < spec.videos_per_class; ++scene) {
            const auto d = region_diff(spec, scene);
            EXPECT_GT(d.inside, 0.0);
            EXPECT_EQ(d.outside, 0.0);
        }
    }
}

TEST(Clipgen, MagnitudeZeroFakeIsPixelIdenticalToReal) {
    for (auto kind : {ArtifactKind::flicker, ArtifactKind::seam, ArtifactKind::texture}) {
        const auto spec = small_spec(0.0, kind);
        EXPECT_TRUE(bit_equal(render_frames(spec, 2, 0, spec.frames),
                              render_frames(spec, 2 + spec.videos_per_class, 0, spec.frames)));
    }
}

TEST(Clipgen, ArtifactIsRedrawnEveryFrame) {
    const auto spec = small_spec();
    const auto fake = render_frames(spec, 1 + spec.videos_per_class, 0, 2);
    const auto real = render_frames(spec, 1, 0, 2);
    const std::size_t fsize = fake.size() / 2;
    double d0 = 0, d1 = 0, cross = 0;
    for (std::size_t i = 0; i < fsize; ++i) {
        const double a = fake[i] - real[i], b = fake[fsize + i] - real[fsize + i];
        d0 += a * a;
        d1 += b * b;
        cross += (a - b) * (a - b);
    }
    EXPECT_GT(d0, 0.0);
    EXPECT_GT(d1, 0.0);
    EXPECT_GT(cross, 0.0);
}

TEST(Clipgen, RealVideosAreTemporallySmooth) {
    const auto spec = small_spec();
    const auto v = render_frames(spec, 0, 0, 2);
    const std::size_t fsize = v.size() / 2;
    double step = 0;
    for (std::size_t i = 0; i < fsize; ++i) step = std::max(step, static_cast<double>(std::abs(v[i] - v[fsize + i])));
    EXPECT_LT(step, 0.15);
}

TEST(Clipgen, MulticlassUsesOneClassPerKind) {
    auto spec = small_spec();
    spec.kinds = {ArtifactKind::flicker, ArtifactKind::seam, ArtifactKind::texture};
    spec.multiclass = true;
    EXPECT_EQ(spec.num_classes(), 4u);
    EXPECT_EQ(describe_video(spec, 2 * spec.videos_per_class).label, 2);
    EXPECT_EQ(*describe_video(spec, 2 * spec.videos_per_class).kind, ArtifactKind::seam);
}

TEST(Clipgen, ValidateRejectsBadSpecs) {
    auto s = small_spec();
    s.magnitude = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
    s = small_spec();
    s.height = 8;
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_THROW(parse_artifact_kind("blur"), ConfigError);
    EXPECT_EQ(parse_artifact_kind("boundary-seam"), ArtifactKind::seam);
}

TEST(DenseSampling, OneClipPerSegmentInsideBounds) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto starts = dense_sample_starts(48, 8, 4, rng);
        ASSERT_EQ(starts.size(), 8u);
        for (std::size_t k = 0; k < starts.size(); ++k) {
            EXPECT_GE(starts[k], k * 6);
            EXPECT_LE(starts[k] + 4, (k + 1) * 6);
        }
    }
}

TEST(DenseSampling, TooShortVideoIsConfigError) {
    Rng rng(1);
    EXPECT_THROW(dense_sample_starts(10, 3, 4, rng), ConfigError);
    EXPECT_NO_THROW(dense_sample_starts(12, 3, 4, rng));
}

TEST(DenseSampling, ClipsHoldConsecutiveFrames) {
    const auto spec = small_spec();
    const auto video = generate_video(spec, 3);
    Rng rng(2);
    for (const auto& clip : dense_sample(video, 4, 4, rng)) {
        EXPECT_EQ(clip.num_frames(), 4u);
        EXPECT_TRUE(bit_equal(clip.frames, render_clip(spec, 3, clip.start, 4).frames));
    }
}

TEST(Splits, SceneLevelSeventyFifteenFifteen) {
    const auto splits = assign_scene_splits(100, 0);
    std::size_t n[3] = {0, 0, 0};
    for (auto s : splits) ++n[static_cast<int>(s)];
    EXPECT_EQ(n[0], 70u);
    EXPECT_EQ(n[1], 15u);
    EXPECT_EQ(n[2], 15u);
}

TEST(Splits, TwinsShareASplitAndSplitsPartitionTheCorpus) {
    CorpusSpec spec;
    spec.videos_per_class = 40;
    std::set<std::size_t> all;
    for (auto which : {Split::train, Split::val, Split::test}) {
        std::set<std::size_t> scenes;
        for (auto v : videos_in_split(spec, which)) {
            EXPECT_TRUE(all.insert(v).second);
            scenes.insert(v % spec.videos_per_class);
        }
        for (auto s : scenes) {
            const auto vids = videos_in_split(spec, which);
            EXPECT_TRUE(std::count(vids.begin(), vids.end(), s) == 1);
            EXPECT_TRUE(std::count(vids.begin(), vids.end(), s + spec.videos_per_class) == 1);
        }
    }
    EXPECT_EQ(all.size(), spec.num_videos());
}

TEST(ClipFiles, RoundTripWithSidecar) {
    const auto dir = fs::temp_directory_path() / "tall_clip_test";
    fs::create_directories(dir);
    const auto clip = render_clip(small_spec(), 4, 2, 4);
    write_clip(clip, dir / "c.tten");
    const auto back = read_clip(dir / "c.tten");
    EXPECT_TRUE(bit_equal(back.frames, clip.frames));
    EXPECT_EQ(back.start, 2u);
    EXPECT_EQ(back.video, 4u);
    fs::remove(dir / "c.json");
    EXPECT_THROW(read_clip(dir / "c.tten"), IoError);
    fs::remove_all(dir);
}
