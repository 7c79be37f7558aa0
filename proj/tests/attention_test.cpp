#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "air/attention.hpp"
#include "air/map_io.hpp"
#include "air/png_io.hpp"
#include "air/random.hpp"
#include "oracles.hpp"

using namespace air;

namespace {

FixationRecord fx(double x, double y, double t = 0.0, std::string subject = "s")
{
    return {x, y, t, std::move(subject), std::nullopt};
}

std::size_t argmax(const AttentionMap& m)
{
    const auto v = m.values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

AttentionMap random_map(Rng& rng, std::size_t rows, std::size_t cols)
{
    AttentionMap m(rows, cols, {static_cast<double>(cols), static_cast<double>(rows)});
    for (double& v : m.values()) {
        v = rng.uniform();
    }
    return m;
}

} // namespace

TEST(FixationMap, SingleCentralFixation)
{
    const Frame frame{512, 512};
    const std::vector<FixationRecord> f = {fx(256, 256)};
    const auto m = build_fixation_map(f, frame);
    EXPECT_EQ(m.rows(), 256u);
    EXPECT_EQ(m.max(), 1.0);
    EXPECT_EQ(argmax(m), 128u * 256u + 128u);
    int peaks = 0;
    for (double v : m.values()) {
        peaks += v == 1.0;
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(peaks, 1);
}

TEST(FixationMap, CoincidentFixationsNormaliseAway)
{
    const Frame frame{300, 200};
    const std::vector<FixationRecord> one = {fx(40, 70)};
    const std::vector<FixationRecord> two = {fx(40, 70), fx(40, 70)};
    const auto a = build_fixation_map(one, frame);
    const auto b = build_fixation_map(two, frame);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a.values()[i], b.values()[i], 1e-15);
    }
}

TEST(FixationMap, TwoFarFixationsGiveEqualPeaks)
{
    const Frame frame{256, 256};
    const std::vector<FixationRecord> f = {fx(60.5, 128.5), fx(195.5, 128.5)};
    const auto m = build_fixation_map(f, frame);
    EXPECT_NEAR(m.at(128, 60), 1.0, 1e-12);
    EXPECT_NEAR(m.at(128, 195), 1.0, 1e-12);
    EXPECT_LT(m.at(128, 128), 0.01);
}

TEST(FixationMap, EmptyInputThrows)
{
    try {
        build_fixation_map({}, Frame{10, 10});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoFixations);
    }
}

TEST(GaussianKernel, TruncatedAndNormalised)
{
    const auto k = gaussian_kernel(9.0);
    EXPECT_EQ(k.size(), 73u);
    double total = 0.0;
    for (double v : k) {
        total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(k[36 + 9] / k[36], std::exp(-0.5), 1e-12);
}

TEST(TemporalBins, OneFixationPerBin)
{
    FixationSequence seq{"q", {fx(0, 0, 0.5), fx(0, 0, 1.5), fx(0, 0, 2.5)}};
    const auto b = temporal_bins(seq);
    ASSERT_EQ(b.bins.size(), 3u);
    for (std::size_t j = 0; j < 3; ++j) {
        ASSERT_EQ(b.bins[j].size(), 1u);
        EXPECT_EQ(b.bins[j][0].t_onset, 0.5 + static_cast<double>(j));
    }
    EXPECT_EQ(b.dropped, 0u);
}

TEST(TemporalBins, HalfOpenAndDrops)
{
    FixationSequence seq{"q", {fx(0, 0, 1.0), fx(0, 0, 3.2), fx(0, 0, 3.0)}};
    const auto b = temporal_bins(seq);
    EXPECT_EQ(b.bins[1].size(), 1u);
    EXPECT_EQ(b.bins[0].size() + b.bins[2].size(), 0u);
    EXPECT_EQ(b.dropped, 2u);
}

TEST(TemporalBins, BadEdges)
{
    const double edges[] = {0.0, 2.0, 1.0};
    EXPECT_THROW(temporal_bins(FixationSequence{}, edges), Error);
    const double single[] = {0.0};
    EXPECT_THROW(temporal_bins(FixationSequence{}, single), Error);
}

TEST(TemporalBins, PartitionProperty)
{
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        FixationSequence seq{"q", {}};
        double t = 0.0;
        const std::size_t n = rng.index(30);
        for (std::size_t i = 0; i < n; ++i) {
            t += rng.uniform(0.0, 0.4);
            seq.fixations.push_back(fx(0, 0, t));
        }
        const auto b = temporal_bins(seq);
        std::size_t total = b.dropped;
        for (const auto& bin : b.bins) {
            total += bin.size();
        }
        EXPECT_EQ(total, n);
    }
}

TEST(Resample, IdentityIsBitwiseEqual)
{
    Rng rng(1);
    const auto m = random_map(rng, 7, 5);
    EXPECT_EQ(resample_map(m, 7, 5), m);
}

TEST(Resample, ConstantStaysConstant)
{
    const AttentionMap m(3, 5, Frame{5, 3}, 2.0);
    const auto out = resample_map(m, 8, 11);
    for (double v : out.values()) {
        EXPECT_NEAR(v, 30.0 / 88.0, 1e-12);
    }
    EXPECT_NEAR(out.sum(), m.sum(), 1e-9);
}

TEST(Resample, RampMatchesDirectBilinear)
{
    const AttentionMap ramp(2, 2, Frame{2, 2}, std::vector<double>{0, 1, 2, 3});
    const auto out = resample_map(ramp, 4, 4);
    // Symmetric ramp keeps its mean, so mass preservation is a factor of 4/16.
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            const double expected = oracle::bilinear_at(ramp, (r + 0.5) * 0.5 - 0.5, (c + 0.5) * 0.5 - 0.5) * 0.25;
            EXPECT_NEAR(out.at(r, c), expected, 1e-9);
        }
    }
}

TEST(Resample, MassPreservedOnRandomMaps)
{
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_map(rng, 1 + rng.index(20), 1 + rng.index(20));
        const auto out = resample_map(m, 1 + rng.index(40), 1 + rng.index(40));
        EXPECT_NEAR(out.sum(), m.sum(), 1e-6 * m.sum());
    }
}

TEST(ProposalsToMap, WholeImageBoxIsConstant)
{
    const std::vector<double> w = {1.0};
    const std::vector<BoundingBox> b = {{0, 0, 100, 50}};
    const auto m = proposals_to_map(w, b, {100, 50}, 16);
    for (double v : m.values()) {
        EXPECT_DOUBLE_EQ(v, 1.0 / 256.0);
    }
}

TEST(ProposalsToMap, ZeroWeightLeavesNoMass)
{
    const std::vector<double> w = {1.0, 0.0};
    const std::vector<BoundingBox> b = {{0, 0, 8, 8}, {8, 8, 8, 8}};
    const auto m = proposals_to_map(w, b, {16, 16}, 16);
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 16; ++c) {
            EXPECT_EQ(m.at(r, c), (r < 8 && c < 8) ? 1.0 / 64.0 : 0.0);
        }
    }
}

TEST(ProposalsToMap, OverlapMatchesPerPixelAccumulation)
{
    const std::vector<double> w = {0.5, 0.5};
    const std::vector<BoundingBox> b = {{0, 0, 6, 4}, {3, 2, 5, 5}};
    const auto m = proposals_to_map(w, b, {10, 10}, 10);
    // Per-pixel oracle: pixel (x, y) is in a box when its centre is.
    for (std::size_t y = 0; y < 10; ++y) {
        for (std::size_t x = 0; x < 10; ++x) {
            double expected = 0.0;
            for (std::size_t i = 0; i < b.size(); ++i) {
                const double cx = x + 0.5, cy = y + 0.5;
                if (cx >= b[i].x && cx < b[i].x + b[i].w && cy >= b[i].y && cy < b[i].y + b[i].h) {
                    expected += w[i] / (b[i].w * b[i].h);
                }
            }
            EXPECT_NEAR(m.at(y, x), expected, 1e-15);
        }
    }
    EXPECT_NEAR(m.at(3, 4), 0.5 / 24 + 0.5 / 25, 1e-15);
}

TEST(ProposalsToMap, LinearInWeights)
{
    Rng rng(4);
    std::vector<BoundingBox> boxes;
    std::vector<double> w1, w2, w12;
    for (int i = 0; i < 6; ++i) {
        boxes.push_back({rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(1, 40), rng.uniform(1, 40)});
        w1.push_back(rng.uniform());
        w2.push_back(rng.uniform());
        w12.push_back(w1.back() + w2.back());
    }
    const Frame f{100, 100};
    const auto a = proposals_to_map(w1, boxes, f, 32);
    const auto b = proposals_to_map(w2, boxes, f, 32);
    const auto ab = proposals_to_map(w12, boxes, f, 32);
    for (std::size_t i = 0; i < ab.size(); ++i) {
        EXPECT_NEAR(ab.values()[i], a.values()[i] + b.values()[i], 1e-14);
    }
}

TEST(ProposalsToMap, LengthMismatch)
{
    const std::vector<double> w = {1.0};
    try {
        proposals_to_map(w, {}, {10, 10});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
    }
}

TEST(CenterPrior, PeakSymmetryAndSigma)
{
    const auto m = center_prior(257, 15.0);
    EXPECT_EQ(argmax(m), 128u * 257u + 128u);
    EXPECT_EQ(m.at(128, 128), 1.0);
    for (std::size_t r = 0; r < 257; r += 13) {
        for (std::size_t c = 0; c < 257; c += 7) {
            EXPECT_DOUBLE_EQ(m.at(r, c), m.at(256 - r, c));
            EXPECT_DOUBLE_EQ(m.at(r, c), m.at(r, 256 - c));
            EXPECT_DOUBLE_EQ(m.at(r, c), m.at(c, r));
        }
    }
    EXPECT_NEAR(m.at(128, 143) / m.at(128, 128), std::exp(-0.5), 1e-9);
}

TEST(AirmFormat, RoundTripAndHeader)
{
    Rng rng(6);
    const auto m = random_map(rng, 3, 4);
    std::stringstream ss;
    write_airm(ss, m);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 8u + 8u + 12u * 4u);
    EXPECT_EQ(bytes.substr(0, 8), "AIRMAP01");
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 4u);
    const auto back = read_airm(ss);
    ASSERT_EQ(back.rows(), 3u);
    ASSERT_EQ(back.cols(), 4u);
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(back.values()[i], static_cast<double>(static_cast<float>(m.values()[i])));
    }
}

TEST(AirmFormat, RejectsBadMagicAndTruncation)
{
    std::stringstream bad("NOTAMAP!xxxxxxxx");
    EXPECT_THROW(read_airm(bad), Error);
    Rng rng(6);
    std::stringstream ss;
    write_airm(ss, random_map(rng, 3, 4));
    std::stringstream cut(ss.str().substr(0, 30));
    EXPECT_THROW(read_airm(cut), Error);
}

TEST(PngExport, ScaledByMax)
{
    const auto dir = std::filesystem::temp_directory_path() / "air_png_test";
    std::filesystem::create_directories(dir);
    const AttentionMap m(2, 2, Frame{2, 2}, std::vector<double>{0.0, 1.0, 2.0, 4.0});
    save_png(dir / "m.png", m);
    const auto back = load_png(dir / "m.png");
    ASSERT_EQ(back.rows(), 2u);
    EXPECT_NEAR(back.at(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(back.at(1, 0), 128.0 / 255.0, 1e-12);
    EXPECT_EQ(back.at(0, 0), 0.0);
    std::filesystem::remove_all(dir);
}

TEST(DispersionDetector, FindsStableClusters)
{
    std::vector<GazeSample> samples;
    for (int i = 0; i < 30; ++i) {
        samples.push_back({100.0 + (i % 3), 100.0, i * 0.01});
    }
    for (int i = 0; i < 30; ++i) {
        samples.push_back({300.0, 200.0 + (i % 2), 0.3 + i * 0.01});
    }
    const auto f = detect_fixations(samples, "s1");
    ASSERT_EQ(f.size(), 2u);
    EXPECT_NEAR(f[0].x, 101.0, 0.1);
    EXPECT_NEAR(f[1].y, 200.5, 0.1);
    EXPECT_NEAR(f[1].t_onset, 0.3, 1e-12);
    EXPECT_EQ(f[0].subject_id, "s1");
}
