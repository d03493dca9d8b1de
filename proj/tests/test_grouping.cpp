#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "pastiche/grouping.hpp"
#include "testutil.hpp"

using namespace pastiche;
using grouping::EmbeddingIndex;

namespace {

EmbeddingIndex random_index(int64_t m, int64_t f, uint64_t seed) {
    Rng rng(Rng::mix(seed));
    std::vector<std::string> ids;
    std::vector<float> vecs;
    for (int64_t i = 0; i < m; ++i) {
        ids.push_back("img_" + std::to_string(i));
        for (int64_t j = 0; j < f; ++j) vecs.push_back(static_cast<float>(rng.uniform(0.05, 1.0)));
    }
    return EmbeddingIndex(std::move(ids), std::move(vecs), f);
}

// Full-enumeration order-statistic quantile, straight from the definition.
double oracle_quantile(const EmbeddingIndex& index, double q) {
    std::vector<double> d;
    for (int64_t i = 0; i < index.size(); ++i)
        for (int64_t j = i + 1; j < index.size(); ++j)
            d.push_back(grouping::index_distance(index, i, j));
    std::sort(d.begin(), d.end());
    const auto n = static_cast<double>(d.size());
    auto k = static_cast<int64_t>(std::ceil(q * n)) - 1;
    if (k < 0) k = 0;
    if (k >= static_cast<int64_t>(d.size())) k = static_cast<int64_t>(d.size()) - 1;
    return d[static_cast<size_t>(k)];
}

std::set<std::string> oracle_members(const EmbeddingIndex& index, const std::string& query,
                                     double threshold) {
    const int64_t qi = index.find(query);
    std::set<std::string> out{query};
    for (int64_t i = 0; i < index.size(); ++i)
        if (i != qi && grouping::index_distance(index, qi, i) < threshold)
            out.insert(index.ids()[static_cast<size_t>(i)]);
    return out;
}

} // namespace

TEST_CASE("cosine distance basics") {
    std::vector<double> a{1.0, 2.0, 3.0};
    std::vector<double> b{2.0, 4.0, 6.0};
    CHECK(grouping::cosine_distance(a, a) == 0.0);
    CHECK(grouping::cosine_distance(a, b) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, neg{-1.0, 0.0};
    CHECK(grouping::cosine_distance(e1, e2) == doctest::Approx(1.0));
    CHECK(grouping::cosine_distance(e1, neg) == doctest::Approx(2.0));

    std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(grouping::cosine_distance(e1, zero), ValueError);
    CHECK_THROWS_AS(grouping::cosine_distance(a, e1), ShapeError);

    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> u(8), v(8);
        for (auto& x : u) x = rng.normal();
        for (auto& x : v) x = rng.normal();
        const double d = grouping::cosine_distance(u, v);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
        CHECK(d == grouping::cosine_distance(v, u));
    }
}

TEST_CASE("quantile threshold: order statistics and edge cases") {
    {
        // five points, ten pairwise distances; the 10% quantile is the smallest
        EmbeddingIndex index = random_index(5, 6, 1);
        std::vector<double> d;
        for (int64_t i = 0; i < 5; ++i)
            for (int64_t j = i + 1; j < 5; ++j) d.push_back(grouping::index_distance(index, i, j));
        std::sort(d.begin(), d.end());
        CHECK(d.size() == 10);
        CHECK(grouping::quantile_threshold(index, 0.10) == d[0]);
    }
    {
        // all identical points: threshold 0
        std::vector<std::string> ids{"a", "b", "c"};
        std::vector<float> vecs;
        for (int i = 0; i < 3; ++i)
            for (float v : {0.5f, 0.25f, 0.125f}) vecs.push_back(v);
        EmbeddingIndex index(std::move(ids), std::move(vecs), 3);
        CHECK(grouping::quantile_threshold(index, 0.10) == 0.0);
    }
    {
        // exact equality with the full-enumeration oracle
        EmbeddingIndex index = random_index(100, 8, 2);
        for (double q : {0.05, 0.10, 0.20, 0.5, 0.9})
            CHECK(grouping::quantile_threshold(index, q) == oracle_quantile(index, q));
    }
    EmbeddingIndex index = random_index(4, 3, 3);
    CHECK_THROWS_AS(grouping::quantile_threshold(index, 0.0), ValueError);
    CHECK_THROWS_AS(grouping::quantile_threshold(index, 1.0), ValueError);
}

TEST_CASE("sampled quantile path stays within the distance range") {
    EmbeddingIndex index = random_index(80, 4, 9);
    // force the sampling path with a tiny pair cap
    const double t = grouping::quantile_threshold(index, 0.10, /*pair_cap=*/100, /*seed=*/7);
    CHECK(t >= 0.0);
    CHECK(t <= 2.0);
    // deterministic for a fixed seed
    CHECK(t == grouping::quantile_threshold(index, 0.10, 100, 7));
}

TEST_CASE("style set retrieval equals brute force exactly") {
    for (uint64_t seed : {11ull, 12ull, 13ull}) {
        EmbeddingIndex index = random_index(200, 6, seed);
        const std::string query = index.ids()[17];
        for (double q : {0.05, 0.10, 0.20}) {
            grouping::StyleSet set = grouping::build_style_set(query, index, q);
            CHECK(set.threshold == oracle_quantile(index, q));
            std::set<std::string> got(set.member_ids.begin(), set.member_ids.end());
            CHECK(got == oracle_members(index, query, set.threshold));
            CHECK(set.contains(query));
        }
    }
}

TEST_CASE("style sets nest monotonically in the quantile") {
    EmbeddingIndex index = random_index(120, 5, 21);
    const std::string query = index.ids()[3];
    grouping::StyleSet s05 = grouping::build_style_set(query, index, 0.05);
    grouping::StyleSet s10 = grouping::build_style_set(query, index, 0.10);
    grouping::StyleSet s20 = grouping::build_style_set(query, index, 0.20);
    CHECK(s05.threshold <= s10.threshold);
    CHECK(s10.threshold <= s20.threshold);
    for (const auto& id : s05.member_ids) CHECK(s10.contains(id));
    for (const auto& id : s10.member_ids) CHECK(s20.contains(id));
}

TEST_CASE("three separated clusters retrieve exactly the query's cluster") {
    // clusters around three orthogonal directions, small within-cluster noise
    std::vector<std::string> ids;
    std::vector<float> vecs;
    Rng rng(31);
    const int per = 6;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per; ++i) {
            ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
            for (int j = 0; j < 3; ++j) {
                double v = (j == c) ? 1.0 : 0.0;
                v += 0.01 * rng.uniform();
                vecs.push_back(static_cast<float>(v));
            }
        }
    EmbeddingIndex index(std::move(ids), std::move(vecs), 3);
    // 45 within-cluster pairs out of 153; q = 0.2 lands inside the
    // within-cluster distance band
    grouping::StyleSet set = grouping::build_style_set("c1_0", index, 0.20);
    CHECK(set.member_ids.size() == per);
    for (const auto& id : set.member_ids) CHECK(id.substr(0, 2) == "c1");
}

TEST_CASE("style set of size one when nothing else is near") {
    std::vector<std::string> ids{"far_a", "far_b", "far_c", "query"};
    // three mutually close vectors and one far-off query
    std::vector<float> vecs{1.0f, 0.0f, 0.01f, //
                            1.0f, 0.01f, 0.0f, //
                            0.99f, 0.0f, 0.0f, //
                            0.0f, 1.0f, 0.0f};
    EmbeddingIndex index(std::move(ids), std::move(vecs), 3);
    grouping::StyleSet set = grouping::build_style_set("query", index, 0.4);
    CHECK(set.member_ids == std::vector<std::string>{"query"});
}

TEST_CASE("unknown query and degenerate index errors") {
    EmbeddingIndex index = random_index(5, 3, 41);
    CHECK_THROWS_AS(grouping::build_style_set("nope", index, 0.1), ValueError);
    CHECK_THROWS_AS(EmbeddingIndex({"one"}, {1.0f, 2.0f}, 2), ValueError);
    CHECK_THROWS_AS(EmbeddingIndex({"a", "a"}, {1.0f, 2.0f}, 1), ValueError);
    CHECK_THROWS_AS(EmbeddingIndex({"a", "b"}, {1.0f, 0.0f}, 1), ValueError); // zero vector
}

TEST_CASE("embedding index file round trip") {
    const std::string dir = testutil::scratch_dir("index_io");
    EmbeddingIndex index = random_index(23, 7, 55);
    const std::string path = dir + "/style.idx";
    index.save(path);
    EmbeddingIndex loaded = EmbeddingIndex::load(path);
    CHECK(loaded.size() == index.size());
    CHECK(loaded.feature_dim() == index.feature_dim());
    CHECK(loaded.ids() == index.ids());
    for (int64_t i = 0; i < index.size(); ++i)
        for (int64_t j = 0; j < index.feature_dim(); ++j)
            CHECK(loaded.row(i)[j] == index.row(i)[j]);

    // corrupt magic
    {
        std::ofstream f(dir + "/bad.idx", std::ios::binary);
        f << "NOTANIDX0000";
    }
    CHECK_THROWS_AS(EmbeddingIndex::load(dir + "/bad.idx"), IoError);
}

TEST_CASE("style set manifest round trip") {
    const std::string dir = testutil::scratch_dir("manifest_io");
    grouping::StyleSet set;
    set.query_id = "paintings/query.png";
    set.member_ids = {"paintings/query.png", "paintings/a.png", "paintings/b.png"};
    set.threshold = 0.123456789;
    const std::string path = dir + "/set.txt";
    grouping::save_style_set(path, set, 0.10);
    grouping::StyleSet loaded = grouping::load_style_set(path);
    CHECK(loaded.query_id == set.query_id);
    CHECK(loaded.member_ids == set.member_ids);
    CHECK(loaded.threshold == doctest::Approx(set.threshold).epsilon(1e-12));
    CHECK(loaded.distance_metric == "cosine");
}

TEST_CASE("classifier training on a separable synthetic corpus") {
    auto corpus = testutil::make_synthetic_corpus(30, 0, 32, 77);
    grouping::ClassifierSpec spec;
    spec.width_scale = 0.125;
    spec.input_size = 32;
    spec.epochs = 12;
    spec.batch_size = 12;
    spec.seed = 5;
    grouping::ArtistClassifier clf = grouping::train_artist_classifier(corpus.labeled, spec);
    CHECK(clf.trained());
    CHECK(clf.holdout_accuracy >= 0.95);

    // determinism: identical run gives identical embeddings
    grouping::ArtistClassifier clf2 = grouping::train_artist_classifier(corpus.labeled, spec);
    const ImageBatch& probe = corpus.labeled.images.front();
    CHECK(clf.embed(probe) == clf2.embed(probe));

    // embeddings are finite for degenerate inputs too
    ImageBatch black(Tensor({1, 3, 32, 32}));
    ImageBatch white(Tensor::full({1, 3, 32, 32}, 1.0));
    for (double v : clf.embed(black)) CHECK(std::isfinite(v));
    for (double v : clf.embed(white)) CHECK(std::isfinite(v));

    // classifier file round trip preserves behavior
    const std::string dir = testutil::scratch_dir("clf_io");
    clf.save(dir + "/artists.clf");
    grouping::ArtistClassifier loaded = grouping::ArtistClassifier::load(dir + "/artists.clf");
    CHECK(loaded.class_names == clf.class_names);
    CHECK(loaded.holdout_accuracy == clf.holdout_accuracy);
    CHECK(loaded.embed(probe) == clf.embed(probe));
}

TEST_CASE("classifier input validation") {
    grouping::ClassifierSpec spec;
    spec.epochs = 1;

    grouping::LabeledImageSet one_class;
    one_class.class_names = {"only"};
    Rng rng(9);
    one_class.images.push_back(testutil::random_image(1, 32, 32, rng));
    one_class.labels.push_back(0);
    CHECK_THROWS_AS(grouping::train_artist_classifier(one_class, spec), ValueError);

    grouping::LabeledImageSet empty_class;
    empty_class.class_names = {"a", "b", "c"};
    empty_class.images.push_back(testutil::random_image(1, 32, 32, rng));
    empty_class.labels.push_back(0);
    empty_class.images.push_back(testutil::random_image(1, 32, 32, rng));
    empty_class.labels.push_back(1);
    CHECK_THROWS_AS(grouping::train_artist_classifier(empty_class, spec), ValueError);

    // untrained classifier refuses to embed
    grouping::ArtistClassifier raw = grouping::ArtistClassifier::create(spec, 2);
    CHECK_THROWS_AS(raw.embed(testutil::random_image(1, 32, 32, rng)), ValueError);
    CHECK_THROWS_AS(raw.class_index("missing"), ValueError);
}

TEST_CASE("feature width follows the scale knob") {
    grouping::ClassifierSpec desk;
    desk.width_scale = 0.125;
    CHECK(desk.feature_dim() == 512);
    grouping::ClassifierSpec full;
    full.width_scale = 1.0;
    CHECK(full.feature_dim() == 4096);
}
