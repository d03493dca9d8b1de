#pragma once

#include <filesystem>
#include <string>

#include "pastiche/io/corpus.hpp"
#include "pastiche/io/image.hpp"
#include "pastiche/nn/networks.hpp"

namespace pastiche::io {

// Stylizes a directory of numbered frames. Every frame is processed
// independently (no temporal smoothing), so stylizing frame k in isolation
// gives a bit-identical result. Container (de)muxing is left to external
// tooling; only image sequences are handled here. Returns the frame count.
inline int64_t stylize_video(const std::string& frames_dir, const nn::StylizerModel& model,
                             const std::string& output_dir) {
    const std::vector<std::string> frames = list_image_files(frames_dir);
    if (!frames.empty()) std::filesystem::create_directories(output_dir);
    int64_t count = 0;
    for (const std::string& frame_path : frames) {
        try {
            ImageBatch frame = load_image(frame_path);
            auto [padded, crop] = pad_for_model(frame, nn::kEncoderFactor);
            ImageBatch styled = unpad(model.stylize(padded), crop);
            const auto name = std::filesystem::path(frame_path).filename();
            save_image((std::filesystem::path(output_dir) / name).string(), styled);
        } catch (const Error& e) {
            throw IoError("frame " + std::to_string(count) + " (" + frame_path + "): " + e.what());
        }
        ++count;
    }
    return count;
}

// Single-image convenience used by the CLI and by the video path above.
inline ImageBatch stylize_padded(const nn::StylizerModel& model, const ImageBatch& img) {
    auto [padded, crop] = pad_for_model(img, nn::kEncoderFactor);
    return unpad(model.stylize(padded), crop);
}

} // namespace pastiche::io
