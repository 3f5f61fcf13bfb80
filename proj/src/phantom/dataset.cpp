#include "mln/phantom/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "mln/io/png_io.hpp"

namespace mln::phantom {

namespace fs = std::filesystem;

std::vector<std::string> dataset_stems(const std::string& root, const std::string& split) {
    const fs::path images = fs::path(root) / split / "images";
    if (!fs::is_directory(images))
        throw DataError("load_dataset: missing directory " + images.string());
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(images)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        stems.push_back(entry.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());
    return stems;
}

std::vector<std::pair<core::Image, core::Mask>> load_dataset(const std::string& root,
                                                             const std::string& split) {
    const fs::path base = fs::path(root) / split;
    const std::vector<std::string> stems = dataset_stems(root, split);
    std::vector<std::pair<core::Image, core::Mask>> out;
    out.reserve(stems.size());
    for (const std::string& stem : stems) {
        const fs::path img_path = base / "images" / (stem + ".png");
        const fs::path mask_path = base / "masks" / (stem + ".png");
        if (!fs::exists(mask_path))
            throw DataError("load_dataset: missing mask for image stem \"" + stem + "\"");
        core::Image img = io::read_png_gray(img_path.string());
        core::Mask mask = io::read_png_mask(mask_path.string());
        if (img.height != mask.height || img.width != mask.width)
            throw DataError("load_dataset: shape mismatch for stem \"" + stem + "\"");
        out.emplace_back(std::move(img), std::move(mask));
    }
    return out;
}

void save_pair(const std::string& root, const std::string& split, const std::string& stem,
               const core::Image& image, const core::Mask& mask, int bit_depth) {
    const fs::path base = fs::path(root) / split;
    fs::create_directories(base / "images");
    fs::create_directories(base / "masks");
    io::write_png_gray((base / "images" / (stem + ".png")).string(), image, bit_depth);
    io::write_png_mask((base / "masks" / (stem + ".png")).string(), mask);
}

}  // namespace mln::phantom
