#include <reltrack/error.hpp>
#include <reltrack/features.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <random>

#include "test_util.hpp"

using namespace reltrack;

namespace {

std::string p2if_bytes(std::uint32_t h, std::uint32_t w, std::uint32_t d, const std::vector<float>& payload) {
    std::string b = "P2IF";
    for (std::uint32_t x : {1u, h, w, d}) b.append(reinterpret_cast<const char*>(&x), 4);
    b.append(reinterpret_cast<const char*>(payload.data()), payload.size() * 4);
    return b;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an exception";
    return ErrorKind::Io;
}

GrayImage random_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0, 1);
    GrayImage img(h, w);
    for (auto& p : img.px) p = u(rng);
    return img;
}

}  // namespace

TEST(P2IF, LoadsHeaderAndPayload) {
    TempDir dir;
    write_text(dir / "a.p2if", p2if_bytes(2, 2, 1, {1, 2, 3, 4}));
    const FeatureMap fm = load_features(dir / "a.p2if");
    EXPECT_EQ(fm.h, 2);
    EXPECT_EQ(fm.w, 2);
    EXPECT_EQ(fm.d, 1);
    EXPECT_EQ(fm.at(0, 0, 0), 1.0f);
    EXPECT_EQ(fm.at(0, 1, 0), 2.0f);
    EXPECT_EQ(fm.at(1, 0, 0), 3.0f);
    EXPECT_EQ(fm.at(1, 1, 0), 4.0f);
}

TEST(P2IF, RejectsTruncatedPayload) {
    TempDir dir;
    write_text(dir / "a.p2if", p2if_bytes(2, 2, 1, {1, 2, 3}));
    EXPECT_EQ(kind_of([&] { load_features(dir / "a.p2if"); }), ErrorKind::DimMismatch);
}

TEST(P2IF, RejectsBadMagicAndNonFinite) {
    TempDir dir;
    std::string bytes = p2if_bytes(1, 1, 1, {1});
    bytes[3] = 'W';
    write_text(dir / "m.p2if", bytes);
    EXPECT_EQ(kind_of([&] { load_features(dir / "m.p2if"); }), ErrorKind::BadMagic);
    write_text(dir / "n.p2if", p2if_bytes(1, 2, 1, {0.5f, std::numeric_limits<float>::quiet_NaN()}));
    EXPECT_EQ(kind_of([&] { load_features(dir / "n.p2if"); }), ErrorKind::NonFiniteValue);
}

TEST(P2IF, SaveLoadRoundTripIsBitExact) {
    TempDir dir;
    FeatureMap fm(3, 5, 7);
    std::mt19937 rng(1);
    std::normal_distribution<float> n(0, 3);
    for (auto& x : fm.data) x = n(rng);
    fm.data[4] = -0.0f;
    fm.data[9] = std::numeric_limits<float>::denorm_min();
    save_features(dir / "f.p2if", fm);
    const FeatureMap back = load_features(dir / "f.p2if");
    ASSERT_EQ(back.data.size(), fm.data.size());
    EXPECT_EQ(std::memcmp(back.data.data(), fm.data.data(), fm.data.size() * 4), 0);
    EXPECT_EQ(back.h, 3);
    EXPECT_EQ(back.w, 5);
    EXPECT_EQ(back.d, 7);
    // Header layout: magic, version, h, w, d, then payload.
    EXPECT_EQ(slurp(dir / "f.p2if").size(), 20 + fm.data.size() * 4);
}

TEST(Handcrafted, ConstantImageGivesUnitMeanChannel) {
    const FeatureMap fm = handcrafted_features(GrayImage(16, 24, 0.3f));
    EXPECT_EQ(fm.h, 2);
    EXPECT_EQ(fm.w, 3);
    EXPECT_EQ(fm.d, kHandcraftedDim);
    for (int i = 0; i < fm.h; ++i)
        for (int j = 0; j < fm.w; ++j) {
            EXPECT_FLOAT_EQ(fm.at(i, j, 0), 1.0f);
            for (int c = 1; c < fm.d; ++c) EXPECT_EQ(fm.at(i, j, c), 0.0f);
        }
    // The all-black fallback is the same unit vector.
    const FeatureMap black = handcrafted_features(GrayImage(8, 8, 0.0f));
    EXPECT_EQ(black.at(0, 0, 0), 1.0f);
}

TEST(Handcrafted, ShapeFollowsStride) {
    const FeatureMap fm = handcrafted_features(GrayImage(16, 8, 0.5f));
    EXPECT_EQ(fm.h, 2);
    EXPECT_EQ(fm.w, 1);
    EXPECT_EQ(fm.d, 10);
    // Non-multiples of 8 are padded up.
    const FeatureMap padded = handcrafted_features(random_image(10, 17, 3));
    EXPECT_EQ(padded.h, 2);
    EXPECT_EQ(padded.w, 3);
}

TEST(Handcrafted, HorizontalRampPutsEnergyInHorizontalBins) {
    GrayImage img(16, 32);
    for (int r = 0; r < img.h; ++r)
        for (int c = 0; c < img.w; ++c) img.at(r, c) = static_cast<float>(c) / 64.0f;
    const FeatureMap fm = handcrafted_features(img);
    for (int i = 0; i < fm.h; ++i)
        for (int j = 0; j < fm.w; ++j) {
            const float horizontal = fm.at(i, j, 2) + fm.at(i, j, 6);
            float other = 0;
            for (int b : {1, 2, 3, 5, 6, 7}) other += fm.at(i, j, 2 + b);
            EXPECT_GT(horizontal, 0.0f);
            EXPECT_NEAR(other, 0.0f, 1e-7f);
        }
}

TEST(Handcrafted, DescriptorsHaveUnitNorm) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const FeatureMap fm = handcrafted_features(random_image(40, 56, seed));
        for (int i = 0; i < fm.h; ++i)
            for (int j = 0; j < fm.w; ++j) {
                double n = 0;
                for (int c = 0; c < fm.d; ++c) n += static_cast<double>(fm.at(i, j, c)) * fm.at(i, j, c);
                EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
            }
    }
}

TEST(Handcrafted, EmptyImageIsRejected) {
    EXPECT_EQ(kind_of([] { handcrafted_features(GrayImage()); }), ErrorKind::EmptyImage);
}

TEST(Pgm, RoundTripOfQuantizedImage) {
    TempDir dir;
    GrayImage img(5, 7);
    for (std::size_t k = 0; k < img.px.size(); ++k) img.px[k] = static_cast<float>((k * 37) % 256) / 255.0f;
    save_pgm(dir / "x.pgm", img);
    EXPECT_EQ(load_pgm(dir / "x.pgm"), img);
}

TEST(FeatureProvider, FileBackedAndFrameStep) {
    TempDir dir;
    for (int f = 1; f <= 5; ++f) {
        FeatureMap fm(1, 1, 1);
        fm.data[0] = static_cast<float>(f);
        char name[32];
        std::snprintf(name, sizeof name, "%06d.p2if", f);
        save_features(dir / name, fm);
    }
    const auto p = FeatureProvider::file_backed(dir.path());
    EXPECT_EQ(p.at(4).data[0], 4.0f);
    const auto every2 = p.with_frame_step(2);
    EXPECT_EQ(every2.at(1).data[0], 1.0f);
    EXPECT_EQ(every2.at(3).data[0], 5.0f);
}

TEST(FeatureProvider, HandcraftedIsDeterministic) {
    std::vector<GrayImage> frames{random_image(16, 16, 1), random_image(16, 16, 2)};
    const auto p = FeatureProvider::handcrafted(frames);
    EXPECT_EQ(p.at(2), p.at(2));
    EXPECT_EQ(p.at(1), handcrafted_features(frames[0]));
    EXPECT_EQ(kind_of([&] { p.at(3); }), ErrorKind::OutOfGrid);
}
