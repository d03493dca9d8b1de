#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "pastiche/grouping.hpp"
#include "pastiche/io/image.hpp"

namespace pastiche::io {

namespace fs = std::filesystem;

enum class CorpusLayout { Flat, PerArtistSubdir };

// Where a dataset lives and how it is organized. The per-artist layout
// (one subdirectory per artist) is required for classifier training.
struct CorpusDescriptor {
    std::string root;
    CorpusLayout layout = CorpusLayout::Flat;
    double holdout_fraction = 0.2;
    uint64_t seed = 0;
};

inline bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline std::vector<std::string> list_image_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

inline std::vector<ImageBatch> load_image_dir(const std::string& dir) {
    std::vector<ImageBatch> out;
    for (const std::string& f : list_image_files(dir)) out.push_back(load_image(f));
    return out;
}

// Loads a per-artist corpus: one class per subdirectory, sorted by name.
inline grouping::LabeledImageSet load_labeled_corpus(const CorpusDescriptor& desc) {
    if (desc.layout != CorpusLayout::PerArtistSubdir)
        throw ValueError("classifier training requires the per-artist-subdir corpus layout");
    if (!fs::is_directory(desc.root)) throw IoError("not a directory: " + desc.root);
    std::vector<std::string> artists;
    for (const auto& e : fs::directory_iterator(desc.root))
        if (e.is_directory()) artists.push_back(e.path().filename().string());
    std::sort(artists.begin(), artists.end());

    grouping::LabeledImageSet set;
    set.class_names = artists;
    for (size_t c = 0; c < artists.size(); ++c) {
        const auto files = list_image_files((fs::path(desc.root) / artists[c]).string());
        for (const std::string& f : files) {
            set.images.push_back(load_image(f));
            set.labels.push_back(static_cast<int64_t>(c));
        }
    }
    set.validate();
    return set;
}

// (id, image) pairs for embedding-index construction; ids are file paths.
inline std::vector<std::pair<std::string, ImageBatch>> load_corpus_entries(
    const std::string& dir) {
    std::vector<std::pair<std::string, ImageBatch>> out;
    for (const std::string& f : list_image_files(dir)) out.emplace_back(f, load_image(f));
    return out;
}

} // namespace pastiche::io
