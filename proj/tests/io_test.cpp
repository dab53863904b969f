// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "tokcorr/harness/synthetic.hpp"
#include "tokcorr/io/config.hpp"
#include "tokcorr/io/manifest.hpp"
#include "tokcorr/io/masks.hpp"
#include "tokcorr/io/results.hpp"
#include "tokcorr/io/tensor_file.hpp"
#include "tokcorr/random.hpp"

namespace tokcorr {
namespace {

namespace fs = std::filesystem;
using io::json;

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        m_path = fs::temp_directory_path() / (std::string("tokcorr_io_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(m_path);
        fs::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(m_path, ec);
    }
    const fs::path& path() const {
        return m_path;
    }

private:
    fs::path m_path;
};

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::ParseError;
}

std::string message_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

SubImageBundle small_bundle(const std::string& id) {
    SubImageBundle b;
    b.source = {id, "unit", "img", 0, 1};
    b.grid = {2, 2};
    b.y_last = TokenMatrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {0.5, 0.25, 0.125}});
    b.keys_low = KeyMatrix::from_rows({{1, 0}, {0, 1}, {1, 1}, {1, -1}});
    b.keys_deep = KeyMatrix::from_rows({{0, 1}, {1, 0}, {1, 1}, {-1, 1}});
    b.attn_low = AttentionVector({0.25, 0.25, 0.25, 0.25});
    b.attn_deep = AttentionVector({0.5, 0.25, 0.125, 0.125});
    return b;
}

TEST(TensorFile, RoundTripIsBitwise) {
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
        io::Tensor x;
        const std::size_t rank = uniform_below(rng, 4);
        for (std::size_t d = 0; d < rank; ++d) {
            x.dims.push_back(static_cast<std::uint32_t>(uniform_below(rng, 6)));
        }
        x.data.resize(x.element_count());
        for (float& v : x.data) {
            v = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
            if (!std::isfinite(v)) {
                v = -0.0f;
            }
        }
        const auto bytes = io::encode_tensor(x);
        const io::Tensor y = io::decode_tensor(bytes);
        ASSERT_EQ(x.dims, y.dims);
        ASSERT_EQ(x.data.size(), y.data.size());
        ASSERT_EQ(std::memcmp(x.data.data(), y.data.data(), 4 * x.data.size()), 0);
        ASSERT_EQ(io::encode_tensor(y), bytes);
    }
}

TEST(TensorFile, LittleEndianLayout) {
    io::Tensor x{{2}, {1.0f, -2.0f}};
    const auto b = io::encode_tensor(x);
    const std::vector<std::uint8_t> want{'T', 'K', 'Z', 'T', 1, 0, 1, 1, 2, 0, 0, 0,
                                         0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    EXPECT_EQ(b, want);
}

TEST(TensorFile, CorruptHeadersNameTheFault) {
    const auto good = io::encode_tensor(io::Tensor{{2, 2}, {1, 2, 3, 4}});
    auto bad = good;
    bad[0] = 'X';
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::BadMagic);
    bad = good;
    bad[4] = 2;
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::UnsupportedVersion);
    bad = good;
    bad[6] = 7;
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::UnsupportedDtype);
    bad = good;
    bad.resize(bad.size() - 1);
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::TruncatedFile);
    bad = std::vector<std::uint8_t>(good.begin(), good.begin() + 5);
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::TruncatedFile);
    bad = good;
    bad.push_back(0);
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::ParseError);
    bad = good;
    bad[8] = 0xff;
    bad[9] = 0xff;
    bad[10] = 0xff;
    bad[11] = 0xff;
    EXPECT_EQ(code_of([&] { io::decode_tensor(bad); }), ErrorCode::TruncatedFile);
}

TEST(TensorFile, MissingFileIsIoError) {
    EXPECT_EQ(code_of([] { io::read_tensor_file("/nonexistent/tokcorr/x.tkzt"); }), ErrorCode::IoError);
}

TEST(Manifest, LoadsASmallBundle) {
    TempDir dir;
    io::write_bundle(dir.path() / "manifest.json", {small_bundle("a")});
    const auto doc = io::load_bundle(dir.path() / "manifest.json");
    ASSERT_EQ(doc.bundles.size(), 1u);
    EXPECT_EQ(doc.bundles[0].grid, (GridShape{2, 2}));
    EXPECT_EQ(doc.bundles[0].n_tokens(), 4u);
    EXPECT_EQ(doc.bundles[0].source, small_bundle("a").source);
    EXPECT_TRUE(doc.warnings.empty());
}

TEST(Manifest, WriteThenLoadIsBitwise) {
    TempDir dir;
    auto g = harness::generate([] {
                 harness::SyntheticSpec s;
                 s.redundancy_fraction = 0.5;
                 s.n_clusters = 2;
                 s.seed = 4;
                 return s;
             }())
                 .bundle;
    g.source.id = "g";
    io::write_bundle(dir.path() / "m.json", {g});
    const auto loaded = io::load_bundle(dir.path() / "m.json").bundles.at(0);
    const auto same_f32 = [](auto a, auto b) {
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            const float fa = static_cast<float>(a[i]);
            ASSERT_EQ(std::bit_cast<std::uint32_t>(fa), std::bit_cast<std::uint32_t>(static_cast<float>(b[i])));
            ASSERT_EQ(static_cast<double>(fa), b[i]);
        }
    };
    same_f32(g.y_last.data(), loaded.y_last.data());
    same_f32(g.keys_low.data(), loaded.keys_low.data());
    same_f32(g.keys_deep.data(), loaded.keys_deep.data());
    same_f32(g.attn_low.scores(), loaded.attn_low.scores());
    same_f32(g.attn_deep.scores(), loaded.attn_deep.scores());

    // A second write of the loaded bundle reproduces the files byte for byte.
    io::write_bundle(dir.path() / "again" / "m.json", {loaded});
    for (const char* key : {"y_last", "keys_low", "attn_low", "keys_deep", "attn_deep"}) {
        const std::string file = std::string("g.") + key + ".tkzt";
        EXPECT_EQ(io::read_file_bytes(dir.path() / file), io::read_file_bytes(dir.path() / "again" / file));
    }
}

TEST(Manifest, LengthMismatchNamesBothFiles) {
    TempDir dir;
    io::write_bundle(dir.path() / "manifest.json", {small_bundle("a")});
    io::write_tensor_file(dir.path() / "a.attn_low.tkzt", io::Tensor{{5}, {0.2f, 0.2f, 0.2f, 0.2f, 0.2f}});
    std::string msg;
    EXPECT_EQ(code_of([&] {
                  try {
                      io::load_bundle(dir.path() / "manifest.json");
                  } catch (const Error& e) {
                      msg = e.what();
                      throw;
                  }
              }),
              ErrorCode::DimensionMismatch);
    EXPECT_NE(msg.find("a.attn_low.tkzt"), std::string::npos) << msg;
    EXPECT_NE(msg.find("a.keys_low.tkzt"), std::string::npos) << msg;
}

TEST(Manifest, RejectsBadContent) {
    TempDir dir;
    const fs::path m = dir.path() / "manifest.json";
    io::write_bundle(m, {small_bundle("a")});

    io::write_tensor_file(dir.path() / "a.keys_low.tkzt", io::Tensor{{4, 2}, {1, 0, 0, 0, 1, 1, 1, -1}});
    EXPECT_NE(message_of([&] { io::load_bundle(m); }).find("ZeroKeyRow"), std::string::npos);
    EXPECT_NE(message_of([&] { io::load_bundle(m); }).find("a.keys_low.tkzt"), std::string::npos);

    io::write_bundle(m, {small_bundle("a")});
    io::write_tensor_file(dir.path() / "a.y_last.tkzt",
                          io::Tensor{{4, 1}, {1.0f, std::numeric_limits<float>::quiet_NaN(), 1.0f, 1.0f}});
    EXPECT_EQ(code_of([&] { io::load_bundle(m); }), ErrorCode::NonFiniteValue);

    io::write_bundle(m, {small_bundle("a")});
    io::write_tensor_file(dir.path() / "a.attn_deep.tkzt", io::Tensor{{4}, {0.5f, -0.5f, 0.5f, 0.5f}});
    EXPECT_EQ(code_of([&] { io::load_bundle(m); }), ErrorCode::InvalidAttention);

    auto wrong_grid = small_bundle("a");
    wrong_grid.grid = {3, 1};
    io::write_bundle(m, {wrong_grid});
    EXPECT_EQ(code_of([&] { io::load_bundle(m); }), ErrorCode::GridMismatch);

    io::write_bundle(m, {small_bundle("a"), small_bundle("a")});
    EXPECT_EQ(code_of([&] { io::load_bundle(m); }), ErrorCode::ParseError);

    std::ofstream(m) << "{ not json";
    EXPECT_EQ(code_of([&] { io::load_bundle(m); }), ErrorCode::ParseError);
}

TEST(Manifest, WarnsWhenAttentionDoesNotSumToOne) {
    TempDir dir;
    auto b = small_bundle("a");
    b.attn_low = AttentionVector({1, 1, 1, 1});
    io::write_bundle(dir.path() / "m.json", {b});
    const auto doc = io::load_bundle(dir.path() / "m.json");
    ASSERT_EQ(doc.warnings.size(), 1u);
    EXPECT_NE(doc.warnings[0].find("a.attn_low.tkzt"), std::string::npos);
}

TEST(Manifest, GlobalBundleNeedsOnlyTokens) {
    TempDir dir;
    SubImageBundle g;
    g.is_global = true;
    g.source.id = "global";
    g.grid = {1, 2};
    g.y_last = TokenMatrix::from_rows({{1}, {2}});
    io::write_bundle(dir.path() / "m.json", {g, small_bundle("s")}, json{{"head_reduction", "mean"}});
    EXPECT_FALSE(fs::exists(dir.path() / "global.keys_low.tkzt"));
    const auto doc = io::load_bundle(dir.path() / "m.json");
    ASSERT_EQ(doc.bundles.size(), 2u);
    EXPECT_TRUE(doc.bundles[0].is_global);
    EXPECT_EQ(doc.export_notes["head_reduction"], "mean");
}

TEST(Masks, AllRedundantIsUniformlyBright) {
    const auto m = io::render_masks(GridShape{2, 3}, std::vector<bool>(6, true), {0}, {Provenance::Local});
    for (auto p : m.redundancy.pixels) {
        EXPECT_EQ(p, io::kMaskBright);
    }
}

TEST(Masks, FullRetentionHasNoDroppedLevel) {
    const IndexSet all{0, 1, 2, 3};
    const auto m = io::render_masks(GridShape{2, 2}, std::vector<bool>(4, false), all,
                                    {Provenance::Global, Provenance::Local, Provenance::Both, Provenance::Fallback});
    for (auto p : m.selection.pixels) {
        EXPECT_NE(p, io::kMaskDark);
    }
    EXPECT_EQ(m.selection.pixels, (std::vector<std::uint8_t>{255, 128, 255, 128}));
}

TEST(Masks, CloneBundleMaskMatchesDensityReport) {
    const auto bundle = harness::hand_trace_bundle();
    const auto result = compress_subimage(bundle, harness::hand_trace_options());
    const auto m = io::render_masks(bundle, result);
    ASSERT_EQ(m.redundancy.pixels.size(), 16u);
    std::size_t bright = 0;
    for (std::size_t i = 0; i < 16; ++i) {
        const bool on = m.redundancy.pixels[i] == io::kMaskBright;
        EXPECT_EQ(on, static_cast<bool>(result.density_report.redundant_mask[i]));
        bright += on ? 1 : 0;
    }
    EXPECT_EQ(bright, 12u);
}

TEST(Masks, ScaleAndPlainFormat) {
    const auto m = io::render_masks(GridShape{1, 2}, {true, false}, {1}, {Provenance::Local}, 2);
    EXPECT_EQ(m.redundancy.to_plain_pgm(), "P2\n4 2\n255\n255 255 0 0\n255 255 0 0\n");
    EXPECT_EQ(m.selection.to_plain_pgm(), "P2\n4 2\n255\n0 0 128 128\n0 0 128 128\n");
}

TEST(Masks, GridMismatch) {
    EXPECT_EQ(code_of([] { io::render_masks(GridShape{2, 2}, std::vector<bool>(5, false), {}, {}); }),
              ErrorCode::GridMismatch);
}

TEST(Config, OverlayKeepsAbsentFields) {
    CompressOptions opts;
    io::apply_options_json(json::parse(R"({"density": {"limit_k": 3}, "selection": {"seed": 9}})"), opts);
    EXPECT_EQ(opts.density.limit_k, 3u);
    EXPECT_DOUBLE_EQ(opts.density.alpha, 0.7);
    EXPECT_EQ(opts.selection.seed, 9u);
    EXPECT_EQ(opts.aggregation.knn_k, 3u);
}

TEST(Config, RoundTripsThroughJson) {
    CompressOptions opts;
    opts.density.alpha = 0.5;
    opts.selection.min_retained = 2;
    opts.aggregation.include_self = false;
    opts.aggregation.key_source = KeySource::Low;
    CompressOptions back;
    io::apply_options_json(io::options_to_json(opts), back);
    EXPECT_EQ(io::options_to_json(back), io::options_to_json(opts));
}

TEST(Config, RejectsBadValues) {
    CompressOptions opts;
    EXPECT_EQ(code_of([&] { io::apply_options_json(json::parse(R"({"density": {"alpha": 1.5}})"), opts); }),
              ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([&] { io::apply_options_json(json::parse(R"({"density": {"alpha": "x"}})"), opts); }),
              ErrorCode::ParseError);
}

TEST(Results, WriteThenLoad) {
    TempDir dir;
    const auto bundle = harness::hand_trace_bundle();
    const CompressOptions opts = harness::hand_trace_options();
    SubImageBundle g;
    g.is_global = true;
    g.source.id = "global";
    g.grid = {1, 1};
    g.y_last = TokenMatrix::from_rows({{3}});
    const std::vector<SubImageBundle> bundles{g, bundle};
    const auto entries = compress_document(bundles, opts);
    io::write_results(dir.path(), bundles, entries, opts, json{{"method", "adaptive"}});

    const auto records = io::load_results(dir.path());
    ASSERT_EQ(records.size(), 2u);
    EXPECT_TRUE(records[0].is_global);
    EXPECT_EQ(records[0].ratio, 1.0);
    const auto& r = std::get<CompressionResult>(entries[1]);
    EXPECT_EQ(records[1].retained_indices, r.retained_indices);
    EXPECT_EQ(records[1].provenance, r.branch_provenance);
    EXPECT_EQ(records[1].redundant_mask, r.density_report.redundant_mask);
    EXPECT_EQ(records[1].ratio, 0.25);

    const auto tokens = io::read_tensor_file(dir.path() / "hand_trace.tokens.tkzt");
    EXPECT_EQ(tokens.dims, (std::vector<std::uint32_t>{4, 4}));
    const json meta = io::read_json_file(dir.path() / "hand_trace.meta.json");
    EXPECT_EQ(meta["config"]["density"]["limit_k"], 3);
    EXPECT_EQ(meta["branch_counts"]["both"], 4);
    EXPECT_EQ(meta["stream_seed"], derive_stream_seed(0, 1));
}

TEST(Results, StatsDocuments) {
    const auto stats = corpus_stats(std::vector<double>{0.25, 0.5}, {"x", "x"});
    const json j = io::stats_to_json(stats);
    EXPECT_DOUBLE_EQ(j["datasets"]["x"]["median"].get<double>(), 0.375);
    const std::string hist = io::histogram_csv(stats);
    EXPECT_EQ(hist.rfind("dataset,bin_lo,bin_hi,count\n", 0), 0u);
    EXPECT_NE(hist.find("x,0.25,0.3,1\n"), std::string::npos) << hist;
    EXPECT_EQ(io::boxplot_csv(stats), "dataset,count,min,q1,median,q3,max,mean\nx,2,0.25,0.3125,0.375,0.4375,0.5,0.375\n");
}

}  // namespace
}  // namespace tokcorr
