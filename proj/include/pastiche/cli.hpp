#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pastiche/evaluation.hpp"
#include "pastiche/grouping.hpp"
#include "pastiche/io/corpus.hpp"
#include "pastiche/io/video.hpp"
#include "pastiche/training.hpp"

namespace pastiche::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// One machine-parsable line on stderr per failure.
inline void emit_error(const std::string& category, const std::string& message) {
    nlohmann::json j{{"error", category}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

inline std::string error_category(const Error& e) {
    if (dynamic_cast<const ShapeError*>(&e)) return "shape";
    if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
    if (dynamic_cast<const NonFiniteError*>(&e)) return "non-finite";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    if (dynamic_cast<const ValueError*>(&e)) return "value";
    return "runtime";
}

// Only the CPU backend exists; the env var is honored as an interface.
inline bool check_device_env() {
    const char* dev = std::getenv("PASTICHE_DEVICE");
    if (!dev || std::string(dev).empty() || std::string(dev) == "cpu") return true;
    emit_error("usage", std::string("PASTICHE_DEVICE=") + dev + " is not supported (only 'cpu')");
    return false;
}

namespace detail {

// Manifest member ids are file paths; relative ones resolve against the
// manifest's directory.
inline std::vector<ImageBatch> load_style_from_manifest(const std::string& manifest_path) {
    const grouping::StyleSet set = grouping::load_style_set(manifest_path);
    const auto base = std::filesystem::path(manifest_path).parent_path();
    std::vector<ImageBatch> images;
    for (const std::string& id : set.member_ids) {
        std::filesystem::path p(id);
        if (!p.is_absolute() && !std::filesystem::exists(p) && std::filesystem::exists(base / p))
            p = base / p;
        images.push_back(io::load_image(p.string()));
    }
    if (images.empty()) throw ValueError("style manifest lists no images: " + manifest_path);
    return images;
}

struct TrainCli {
    std::string content_dir, style_dir, style_manifest, out_dir, resume_path, config_path;
    int64_t log_every = 50;
    training::TrainConfig cfg;
    std::string pixel_loss = "transformed";
};

inline int run_train(TrainCli& args) {
    if (args.style_dir.empty() == args.style_manifest.empty())
        throw ValueError("pass exactly one of --style / --style-manifest");
    args.cfg.pixel_loss = training::pixel_loss_from_string(args.pixel_loss);
    if (!args.config_path.empty())
        args.cfg = training::TrainConfig::from_key_values(io::load_key_values(args.config_path),
                                                          args.cfg);
    args.cfg.validate();

    std::vector<ImageBatch> content = io::load_image_dir(args.content_dir);
    std::vector<ImageBatch> style = args.style_manifest.empty()
                                        ? io::load_image_dir(args.style_dir)
                                        : load_style_from_manifest(args.style_manifest);
    if (content.empty()) throw ValueError("content corpus is empty: " + args.content_dir);
    if (style.empty()) throw ValueError("style set is empty");

    std::filesystem::create_directories(args.out_dir);
    auto warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };

    std::optional<training::Trainer> trainer;
    if (!args.resume_path.empty())
        trainer.emplace(training::Trainer::from_checkpoint(args.resume_path, std::move(content),
                                                           std::move(style), warn));
    else
        trainer.emplace(args.cfg, std::move(content), std::move(style), warn);

    const int64_t log_every = std::max<int64_t>(1, args.log_every);
    trainer->run(args.out_dir, [&](const training::StepLog& log) {
        if ((log.iter + 1) % log_every == 0 || log.iter + 1 == trainer->config().total_iters) {
            std::cout << "iter " << (log.iter + 1) << "/" << trainer->config().total_iters
                      << (log.updated_discriminator ? " [D]" : " [EG]") << " lr " << log.lr
                      << " l_content " << log.report.l_content << " l_transformed "
                      << log.report.l_transformed << " l_adv_d " << log.report.l_adv_d
                      << " d_acc " << log.report.d_accuracy_batch << " ema " << log.ema_after
                      << "\n";
        }
    });
    std::cout << "final checkpoint: " << training::Trainer::final_checkpoint_path(args.out_dir)
              << "\n";
    return kExitOk;
}

inline int run_stylize(const std::string& ckpt, const std::string& input,
                       const std::string& output) {
    training::LoadedStylizer loaded = training::load_stylizer(ckpt);
    ImageBatch img = io::load_image(input);
    io::save_image(output, io::stylize_padded(loaded.model, img));
    std::cout << "stylized " << input << " -> " << output << " (" << img.w() << "x" << img.h()
              << ")\n";
    return kExitOk;
}

inline int run_stylize_video(const std::string& ckpt, const std::string& input_dir,
                             const std::string& output_dir) {
    training::LoadedStylizer loaded = training::load_stylizer(ckpt);
    const int64_t frames = io::stylize_video(input_dir, loaded.model, output_dir);
    std::cout << "stylized " << frames << " frames -> " << output_dir << "\n";
    return kExitOk;
}

struct GroupCli {
    std::string query, corpus_dir, classifier_path, index_path, save_index_path, output;
    double quantile = 0.10;
    int64_t pair_cap = 1'000'000;
    uint64_t seed = 0;
};

inline int run_group(const GroupCli& args) {
    grouping::EmbeddingIndex index;
    if (!args.index_path.empty()) {
        index = grouping::EmbeddingIndex::load(args.index_path);
        if (index.find(args.query) < 0)
            throw ValueError("query '" + args.query +
                             "' is not in the index; rebuild with --corpus");
    } else {
        if (args.corpus_dir.empty())
            throw ValueError("pass --corpus (or a prebuilt --index)");
        if (args.classifier_path.empty())
            throw ValueError("pass --classifier to embed the corpus");
        grouping::ArtistClassifier clf = grouping::ArtistClassifier::load(args.classifier_path);
        auto entries = io::load_corpus_entries(args.corpus_dir);
        bool query_present = false;
        for (const auto& [id, img] : entries)
            if (id == args.query) query_present = true;
        if (!query_present) entries.emplace_back(args.query, io::load_image(args.query));
        index = grouping::build_embedding_index(clf, entries);
    }
    if (!args.save_index_path.empty()) index.save(args.save_index_path);

    grouping::StyleSet set =
        grouping::build_style_set(args.query, index, args.quantile, args.pair_cap, args.seed);
    grouping::save_style_set(args.output, set, args.quantile);
    std::cout << "style set: " << set.member_ids.size() << " members, threshold "
              << set.threshold << " -> " << args.output << "\n";
    return kExitOk;
}

struct EvaluateCli {
    std::string checkpoint, classifier_path, content_dir, report_path;
    std::vector<std::string> artists;
    bool identity = false;
    int64_t n_per_style = 10;
    uint64_t seed = 0;
};

inline int run_evaluate(const EvaluateCli& args) {
    if (args.identity == !args.checkpoint.empty())
        throw ValueError("pass exactly one of --checkpoint / --identity");
    grouping::ArtistClassifier clf = grouping::ArtistClassifier::load(args.classifier_path);
    std::vector<ImageBatch> content = io::load_image_dir(args.content_dir);

    evaluation::StylizeFn stylize;
    std::optional<training::LoadedStylizer> loaded;
    if (args.identity) {
        stylize = [](const ImageBatch& x) { return x; };
    } else {
        loaded = training::load_stylizer(args.checkpoint);
        stylize = [&](const ImageBatch& x) { return io::stylize_padded(loaded->model, x); };
    }

    std::vector<evaluation::StyleCase> cases;
    for (const std::string& artist : args.artists) cases.push_back({artist, artist});
    evaluation::DeceptionReport rep = evaluation::evaluate_suite(
        stylize, content, cases, clf, args.n_per_style, args.seed, args.report_path);
    for (const auto& [style, rate] : rep.per_style)
        std::cout << "style " << style << ": deception rate " << rate << "\n";
    std::cout << "mean deception rate: " << rep.mean_rate << " (classifier holdout accuracy "
              << rep.classifier_holdout_accuracy << ")\n";
    return kExitOk;
}

struct ClassifierTrainCli {
    std::string corpus_dir, out_path;
    grouping::ClassifierSpec spec;
};

inline int run_classifier_train(const ClassifierTrainCli& args) {
    io::CorpusDescriptor desc;
    desc.root = args.corpus_dir;
    desc.layout = io::CorpusLayout::PerArtistSubdir;
    grouping::LabeledImageSet data = io::load_labeled_corpus(desc);
    grouping::ArtistClassifier clf = grouping::train_artist_classifier(data, args.spec);
    clf.save(args.out_path);
    std::cout << "trained on " << data.images.size() << " images across "
              << data.class_names.size() << " artists; holdout accuracy "
              << clf.holdout_accuracy << " -> " << args.out_path << "\n";
    return kExitOk;
}

} // namespace detail

inline int cli_main(int argc, const char* const* argv) {
    if (!check_device_env()) return kExitUsage;

    CLI::App app{"pastiche: learned single-style image and video stylization"};
    app.require_subcommand(1);

    // ---- train ----
    detail::TrainCli train_args;
    auto* train = app.add_subcommand("train", "Train a stylizer on a content corpus + style set");
    train->add_option("--content", train_args.content_dir, "Directory of content images")
        ->required();
    train->add_option("--style", train_args.style_dir, "Directory of style images");
    train->add_option("--style-manifest", train_args.style_manifest,
                      "Style-set manifest produced by `group`");
    train->add_option("--out", train_args.out_dir, "Checkpoint output directory")->required();
    train->add_option("--resume", train_args.resume_path, "Resume from this checkpoint");
    train->add_option("--config", train_args.config_path,
                      "key=value config file; its values override individual flags");
    train->add_option("--patch-size", train_args.cfg.patch_size);
    train->add_option("--batch-size", train_args.cfg.batch_size);
    train->add_option("--lr", train_args.cfg.lr);
    train->add_option("--total-iters", train_args.cfg.total_iters);
    train->add_option("--lr-drop-iter", train_args.cfg.lr_drop_iter);
    train->add_option("--lr-drop-factor", train_args.cfg.lr_drop_factor);
    train->add_option("--lambda", train_args.cfg.lambda);
    train->add_option("--acc-gate", train_args.cfg.acc_gate);
    train->add_option("--ema-coeff", train_args.cfg.ema_coeff);
    train->add_option("--seed", train_args.cfg.seed);
    train->add_option("--width-scale", train_args.cfg.width_scale);
    train->add_option("--n-residual-blocks", train_args.cfg.n_residual_blocks);
    train->add_option("--checkpoint-every", train_args.cfg.checkpoint_every);
    train->add_flag("--no-content-loss{false}", train_args.cfg.content_loss,
                    "Ablation: drop the latent content loss");
    train->add_option("--pixel-loss", train_args.pixel_loss,
                      "Pixel loss kind: transformed|conv1|rgb|none");
    train->add_flag("--saturating-g", train_args.cfg.saturating_g,
                    "Use the literal min-max generator loss instead of the non-saturating form");
    train->add_option("--log-every", train_args.log_every, "Print a log line every N iterations");

    // ---- stylize ----
    std::string st_ckpt, st_in, st_out;
    auto* stylize = app.add_subcommand("stylize", "Stylize one image with a trained checkpoint");
    stylize->add_option("--checkpoint", st_ckpt)->required();
    stylize->add_option("--input", st_in)->required();
    stylize->add_option("--output", st_out)->required();

    // ---- stylize-video ----
    std::string sv_ckpt, sv_in, sv_out;
    auto* svideo = app.add_subcommand(
        "stylize-video", "Stylize a directory of numbered frames, each frame independently");
    svideo->add_option("--checkpoint", sv_ckpt)->required();
    svideo->add_option("--input-dir", sv_in)->required();
    svideo->add_option("--output-dir", sv_out)->required();

    // ---- group ----
    detail::GroupCli group_args;
    auto* group = app.add_subcommand(
        "group", "Retrieve the images stylistically related to a query (a style set)");
    group->add_option("--query", group_args.query, "Query style image path")->required();
    group->add_option("--corpus", group_args.corpus_dir, "Directory of candidate style images");
    group->add_option("--classifier", group_args.classifier_path,
                      "Trained artist classifier (embedding source)");
    group->add_option("--index", group_args.index_path, "Reuse a saved embedding index");
    group->add_option("--save-index", group_args.save_index_path,
                      "Write the embedding index for reuse");
    group->add_option("--quantile", group_args.quantile,
                      "Distance quantile for the retrieval threshold");
    group->add_option("--pair-cap", group_args.pair_cap,
                      "Max enumerated pairs before seeded sampling kicks in");
    group->add_option("--seed", group_args.seed);
    group->add_option("--output", group_args.output, "Style-set manifest path")->required();

    // ---- evaluate ----
    detail::EvaluateCli eval_args;
    auto* evaluate =
        app.add_subcommand("evaluate", "Deception-rate evaluation of a stylizer checkpoint");
    evaluate->add_option("--checkpoint", eval_args.checkpoint);
    evaluate->add_flag("--identity", eval_args.identity,
                       "Evaluate the identity stylizer (content baseline)");
    evaluate->add_option("--classifier", eval_args.classifier_path)->required();
    evaluate->add_option("--content", eval_args.content_dir)->required();
    evaluate->add_option("--artist", eval_args.artists, "Target artist (repeatable)")->required();
    evaluate->add_option("--n-per-style", eval_args.n_per_style);
    evaluate->add_option("--seed", eval_args.seed);
    evaluate->add_option("--report", eval_args.report_path, "Line-delimited JSON report path")
        ->required();

    // ---- classifier-train ----
    detail::ClassifierTrainCli clf_args;
    auto* clf_train = app.add_subcommand(
        "classifier-train", "Train the artist classifier used for grouping and evaluation");
    clf_train->add_option("--corpus", clf_args.corpus_dir, "Per-artist-subdir corpus")->required();
    clf_train->add_option("--out", clf_args.out_path, "Classifier output file")->required();
    clf_train->add_option("--width-scale", clf_args.spec.width_scale);
    clf_train->add_option("--input-size", clf_args.spec.input_size);
    clf_train->add_option("--epochs", clf_args.spec.epochs);
    clf_train->add_option("--batch-size", clf_args.spec.batch_size);
    clf_train->add_option("--lr", clf_args.spec.lr);
    clf_train->add_option("--holdout-fraction", clf_args.spec.holdout_fraction);
    clf_train->add_option("--seed", clf_args.spec.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return kExitUsage;
    }

    try {
        if (train->parsed()) return detail::run_train(train_args);
        if (stylize->parsed()) return detail::run_stylize(st_ckpt, st_in, st_out);
        if (svideo->parsed()) return detail::run_stylize_video(sv_ckpt, sv_in, sv_out);
        if (group->parsed()) return detail::run_group(group_args);
        if (evaluate->parsed()) return detail::run_evaluate(eval_args);
        if (clf_train->parsed()) return detail::run_classifier_train(clf_args);
        emit_error("usage", "no subcommand given");
        return kExitUsage;
    } catch (const Error& e) {
        emit_error(error_category(e), e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return kExitRuntime;
    }
}

} // namespace pastiche::cli
