#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mln/io/png_io.hpp"
#include "mln/phantom/dataset.hpp"
#include "mln/phantom/phantom.hpp"

using namespace mln;
using phantom::PhantomConfig;

namespace {

PhantomConfig basic_config(uint64_t seed = 7) {
    PhantomConfig cfg;
    cfg.seed = seed;
    cfg.canvas_height = cfg.canvas_width = 128;
    cfg.n_clusters = 1;
    cfg.spots_per_cluster_min = 5;
    cfg.spots_per_cluster_max = 5;
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mln_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace

TEST_CASE("phantom is deterministic and within range") {
    const auto [img1, mask1] = phantom::generate_phantom(basic_config());
    const auto [img2, mask2] = phantom::generate_phantom(basic_config());
    CHECK(img1.pixels == img2.pixels);
    CHECK(mask1.pixels == mask2.pixels);
    img1.validate("phantom");
    for (uint8_t v : mask1.pixels) CHECK((v == 0 || v == 1));
}

TEST_CASE("mask foreground fraction is small but nonzero") {
    const auto [img, mask] = phantom::generate_phantom(basic_config(7));
    const double frac = static_cast<double>(mask.foreground_count()) / mask.size();
    CHECK(frac > 0.0);
    CHECK(frac <= 0.05);
}

TEST_CASE("invalid configs name the offending field") {
    PhantomConfig cfg = basic_config();
    cfg.spots_per_cluster_min = 0;
    CHECK_THROWS_WITH_AS(phantom::generate_phantom(cfg),
                         doctest::Contains("spots_per_cluster"), mln::ConfigError);
    cfg = basic_config();
    cfg.canvas_height = 8;
    CHECK_THROWS_WITH_AS(phantom::generate_phantom(cfg), doctest::Contains("canvas"),
                         mln::ConfigError);
    cfg = basic_config();
    cfg.spot_sigma_min_px = -1.0;
    CHECK_THROWS_WITH_AS(phantom::generate_phantom(cfg), doctest::Contains("spot_sigma"),
                         mln::ConfigError);
}

TEST_CASE("lesion pixels are brighter than background under the identity mapping") {
    const auto [img, mask] = phantom::generate_phantom(basic_config(3));
    double fg = 0.0, bg = 0.0;
    int64_t nfg = 0, nbg = 0;
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        if (mask.pixels[i]) {
            fg += img.pixels[i];
            ++nfg;
        } else {
            bg += img.pixels[i];
            ++nbg;
        }
    }
    REQUIRE(nfg > 0);
    CHECK(fg / nfg > bg / nbg);
}

TEST_CASE("modality mappings transform intensities") {
    PhantomConfig cfg = basic_config(11);
    const auto [id_img, id_mask] = phantom::generate_phantom(cfg);
    cfg.modality_mapping = phantom::ModalityMapping::invert();
    const auto [inv_img, inv_mask] = phantom::generate_phantom(cfg);
    CHECK(id_mask.pixels == inv_mask.pixels);  // mask computed pre-mapping
    for (size_t i = 0; i < id_img.pixels.size(); ++i)
        CHECK(inv_img.pixels[i] == doctest::Approx(1.0f - id_img.pixels[i]).epsilon(1e-4));
    cfg.modality_mapping = phantom::ModalityMapping::gamma_map(1.8);
    const auto [gamma_img, gamma_mask] = phantom::generate_phantom(cfg);
    CHECK(id_mask.pixels == gamma_mask.pixels);
    double diff = 0.0;
    for (size_t i = 0; i < id_img.pixels.size(); ++i)
        diff += std::abs(gamma_img.pixels[i] - id_img.pixels[i]);
    CHECK(diff / id_img.size() > 0.01);
}

TEST_CASE("tiling: uniform-zero image yields no tiles at threshold 0.1") {
    core::Image img(64, 64, 0.0f);
    core::Mask mask(64, 64, 0);
    const auto tiles = phantom::preprocess_tile(img, mask, 0.1, 32);
    CHECK(tiles.empty());
}

TEST_CASE("tiling: threshold 0 keeps all four quadrants") {
    const auto [img, mask] = phantom::generate_phantom(basic_config(5));
    const auto tiles = phantom::preprocess_tile(img, mask, 0.0, 64);
    CHECK(tiles.size() == 4);
    for (const auto& [timg, tmask] : tiles) {
        CHECK(timg.height == 64);
        CHECK(timg.width == 64);
    }
}

TEST_CASE("tiling partition is exact at matching resolution") {
    const auto [img, mask] = phantom::generate_phantom([] {
        PhantomConfig c = basic_config(9);
        c.canvas_height = c.canvas_width = 256;
        return c;
    }());
    const auto tiles = phantom::preprocess_tile(img, mask, 0.0, 128);
    REQUIRE(tiles.size() == 4);
    // resampling 128 -> 128 is the identity, so tiles partition the input
    for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
            const auto& [timg, tmask] = tiles[static_cast<size_t>(qy * 2 + qx)];
            for (int y = 0; y < 128; ++y)
                for (int x = 0; x < 128; ++x) {
                    CHECK(timg.at(y, x) == img.at(qy * 128 + y, qx * 128 + x));
                    CHECK(tmask.at(y, x) == mask.at(qy * 128 + y, qx * 128 + x));
                }
        }
}

TEST_CASE("odd dimensions are reflect-padded, masks stay binary after resampling") {
    core::Image img(101, 99, 0.25f);
    core::Mask mask(101, 99, 0);
    for (int y = 40; y < 60; ++y)
        for (int x = 40; x < 60; ++x) {
            img.at(y, x) = 0.9f;
            mask.at(y, x) = 1;
        }
    const auto tiles = phantom::preprocess_tile(img, mask, 0.0, 128);
    CHECK(tiles.size() == 4);
    for (const auto& [timg, tmask] : tiles)
        for (uint8_t v : tmask.pixels) CHECK((v == 0 || v == 1));
}

TEST_CASE("png round trip within 8-bit quantization") {
    TempDir tmp;
    const auto [img, mask] = phantom::generate_phantom(basic_config(13));
    const auto path = (tmp.path / "img.png").string();
    io::write_png_gray(path, img, 8);
    const core::Image back = io::read_png_gray(path);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1.0f / 255.0f + 1e-6f);
}

TEST_CASE("16-bit png maps 65535 to exactly 1.0") {
    TempDir tmp;
    core::Image img(16, 16, 1.0f);
    const auto path = (tmp.path / "one.png").string();
    io::write_png_gray(path, img, 16);
    const core::Image back = io::read_png_gray(path);
    for (float v : back.pixels) CHECK(v == 1.0f);
}

TEST_CASE("dataset loader pairs by stem and reports problems") {
    TempDir tmp;
    const std::string root = tmp.path.string();
    for (int i = 0; i < 3; ++i) {
        PhantomConfig cfg = basic_config(static_cast<uint64_t>(20 + i));
        const auto [img, mask] = phantom::generate_phantom(cfg);
        phantom::save_pair(root, "train", "case_" + std::to_string(i), img, mask);
    }
    const auto pairs = phantom::load_dataset(root, "train");
    CHECK(pairs.size() == 3);

    // image without a mask
    core::Image orphan(32, 32, 0.5f);
    io::write_png_gray((tmp.path / "train" / "images" / "orphan.png").string(), orphan);
    CHECK_THROWS_WITH_AS(phantom::load_dataset(root, "train"), doctest::Contains("orphan"),
                         mln::DataError);
}

TEST_CASE("non-grayscale png is a format error") {
    TempDir tmp;
    io::RgbCanvas canvas(8, 8);
    const auto path = (tmp.path / "rgb.png").string();
    io::write_png_rgb(path, canvas);
    CHECK_THROWS_AS(io::read_png_gray(path), mln::DataError);
}
