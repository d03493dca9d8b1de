#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pastiche/core/rng.hpp"
#include "pastiche/core/types.hpp"
#include "pastiche/grouping.hpp"

namespace pastiche::evaluation {

// Fraction of stylized images the artist classifier attributes to the
// artist the stylization targets; the automatic quality metric.
inline double deception_rate(const std::vector<ImageBatch>& stylized,
                             const std::string& target_artist,
                             const grouping::ArtistClassifier& classifier) {
    if (stylized.empty()) throw ValueError("deception_rate: empty input");
    const int64_t target = classifier.class_index(target_artist);
    int64_t hits = 0;
    for (const ImageBatch& img : stylized)
        if (classifier.predict(img) == target) ++hits;
    return static_cast<double>(hits) / static_cast<double>(stylized.size());
}

struct DeceptionReport {
    std::map<std::string, double> per_style;
    double mean_rate = 0.0;
    int64_t n_images_per_style = 0;
    double classifier_holdout_accuracy = 0.0;
};

using StylizeFn = std::function<ImageBatch(const ImageBatch&)>;

struct StyleCase {
    std::string style_id;      // label used in the report
    std::string target_artist; // classifier class the stylization aims for
};

// Runs the metric over a set of styles: for each style, n_per_style
// content images are drawn (seeded), stylized and classified. Writes a
// line-delimited report (one JSON record per prediction plus a summary)
// when report_path is non-empty.
inline DeceptionReport evaluate_suite(const StylizeFn& stylize,
                                      const std::vector<ImageBatch>& content,
                                      const std::vector<StyleCase>& styles,
                                      const grouping::ArtistClassifier& classifier,
                                      int64_t n_per_style, uint64_t seed,
                                      const std::string& report_path = {}) {
    if (styles.empty()) throw ValueError("evaluate_suite: no styles given");
    if (content.empty()) throw ValueError("evaluate_suite: empty content corpus");
    if (n_per_style < 1) throw ValueError("evaluate_suite: n_per_style must be >= 1");

    std::ofstream report;
    if (!report_path.empty()) {
        report.open(report_path);
        if (!report) throw IoError("cannot write report: " + report_path);
    }

    DeceptionReport out;
    out.n_images_per_style = n_per_style;
    out.classifier_holdout_accuracy = classifier.holdout_accuracy;

    double rate_sum = 0.0;
    for (size_t si = 0; si < styles.size(); ++si) {
        const StyleCase& sc = styles[si];
        const int64_t target = classifier.class_index(sc.target_artist);
        Rng rng = Rng::for_step(seed, static_cast<uint64_t>(si));
        int64_t hits = 0;
        for (int64_t k = 0; k < n_per_style; ++k) {
            const int64_t idx = rng.below(static_cast<int64_t>(content.size()));
            ImageBatch styled;
            try {
                styled = stylize(content[static_cast<size_t>(idx)]);
            } catch (const Error& e) {
                throw ValueError("evaluate_suite: style '" + sc.style_id + "' image " +
                                 std::to_string(idx) + ": " + e.what());
            }
            const int64_t pred = classifier.predict(styled);
            if (pred == target) ++hits;
            if (report) {
                nlohmann::json rec{{"record", "prediction"},
                                   {"style", sc.style_id},
                                   {"image", idx},
                                   {"predicted", classifier.class_names[static_cast<size_t>(pred)]},
                                   {"target", sc.target_artist},
                                   {"deceived", pred == target}};
                report << rec.dump() << "\n";
            }
        }
        const double rate = static_cast<double>(hits) / static_cast<double>(n_per_style);
        out.per_style[sc.style_id] = rate;
        rate_sum += rate;
    }
    out.mean_rate = rate_sum / static_cast<double>(styles.size());

    if (report) {
        nlohmann::json summary{{"record", "summary"},
                               {"mean_rate", out.mean_rate},
                               {"per_style", out.per_style},
                               {"n_images_per_style", out.n_images_per_style},
                               {"classifier_holdout_accuracy", out.classifier_holdout_accuracy}};
        report << summary.dump() << "\n";
        if (!report) throw IoError("report write failed: " + report_path);
    }
    return out;
}

} // namespace pastiche::evaluation
