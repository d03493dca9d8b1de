#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pastiche/core/resample.hpp"
#include "pastiche/core/rng.hpp"
#include "pastiche/core/types.hpp"
#include "pastiche/io/config.hpp"
#include "pastiche/io/serialize.hpp"
#include "pastiche/nn/adam.hpp"
#include "pastiche/nn/layers.hpp"

namespace pastiche::grouping {

using ad::Var;

// --------------------------------------------------------------------------
// Artist classifier. Predicting the artist is only a surrogate task: the
// point is the feature layer, whose activations embed artworks for
// retrieval. A width scale shrinks the full-size network (feature width
// 4096 at scale 1.0) down to desk size.
struct ClassifierSpec {
    double width_scale = 0.125;
    int64_t input_size = 32; // images are resized to this square extent
    int64_t epochs = 30;
    int64_t batch_size = 16;
    double lr = 1e-3;
    double holdout_fraction = 0.2;
    uint64_t seed = 7;

    void validate() const {
        if (!(width_scale > 0.0)) throw ValueError("classifier width_scale must be positive");
        if (input_size < 16 || input_size % 16 != 0)
            throw ValueError("classifier input_size must be a positive multiple of 16");
        if (epochs < 1) throw ValueError("classifier epochs must be >= 1");
        if (batch_size < 1) throw ValueError("classifier batch_size must be >= 1");
        if (!(lr > 0.0)) throw ValueError("classifier lr must be positive");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
            throw ValueError("holdout_fraction must be in [0,1)");
    }

    int64_t scaled(int64_t base) const {
        return std::max<int64_t>(1, std::llround(static_cast<double>(base) * width_scale));
    }

    int64_t feature_dim() const { return scaled(4096); }

    io::KeyValues to_key_values() const {
        io::KeyValues kv;
        std::ostringstream ws, lrs, hf;
        ws.precision(17); ws << width_scale;
        lrs.precision(17); lrs << lr;
        hf.precision(17); hf << holdout_fraction;
        kv["width_scale"] = ws.str();
        kv["input_size"] = std::to_string(input_size);
        kv["epochs"] = std::to_string(epochs);
        kv["batch_size"] = std::to_string(batch_size);
        kv["lr"] = lrs.str();
        kv["holdout_fraction"] = hf.str();
        kv["seed"] = std::to_string(seed);
        return kv;
    }

    static ClassifierSpec from_key_values(const io::KeyValues& kv) {
        ClassifierSpec s;
        s.width_scale = io::kv_double(kv, "width_scale", s.width_scale);
        s.input_size = io::kv_int(kv, "input_size", s.input_size);
        s.epochs = io::kv_int(kv, "epochs", s.epochs);
        s.batch_size = io::kv_int(kv, "batch_size", s.batch_size);
        s.lr = io::kv_double(kv, "lr", s.lr);
        s.holdout_fraction = io::kv_double(kv, "holdout_fraction", s.holdout_fraction);
        s.seed = static_cast<uint64_t>(io::kv_int(kv, "seed", static_cast<int64_t>(s.seed)));
        return s;
    }
};

// Labeled images ready for classifier training; label i indexes
// class_names.
struct LabeledImageSet {
    std::vector<ImageBatch> images;
    std::vector<int64_t> labels;
    std::vector<std::string> class_names;

    void validate() const {
        if (images.size() != labels.size()) throw ValueError("labels/images size mismatch");
        if (class_names.size() < 2)
            throw ValueError("insufficient classes: classifier training needs >= 2 artists");
        std::vector<int64_t> counts(class_names.size(), 0);
        for (int64_t l : labels) {
            if (l < 0 || l >= static_cast<int64_t>(class_names.size()))
                throw ValueError("label out of range");
            ++counts[static_cast<size_t>(l)];
        }
        for (size_t c = 0; c < counts.size(); ++c)
            if (counts[c] == 0)
                throw ValueError("empty class: artist '" + class_names[c] + "' has no images");
    }
};

class ArtistClassifier {
public:
    ClassifierSpec spec;
    std::vector<std::string> class_names;
    double holdout_accuracy = 0.0;

    static ArtistClassifier create(const ClassifierSpec& spec, int64_t n_classes) {
        spec.validate();
        if (n_classes < 2) throw ValueError("insufficient classes: need >= 2 artists");
        ArtistClassifier c;
        c.spec = spec;
        Rng rng(Rng::mix(spec.seed ^ 0x636c6173736966ull));
        const int64_t c64 = spec.scaled(64), c128 = spec.scaled(128), c256 = spec.scaled(256),
                      c512 = spec.scaled(512);
        c.conv_.push_back(nn::Conv2d::create(3, c64, 3, 1, nn::InitScheme::HeNormal, rng));
        c.conv_.push_back(nn::Conv2d::create(c64, c64, 3, 2, nn::InitScheme::HeNormal, rng));
        c.conv_.push_back(nn::Conv2d::create(c64, c128, 3, 1, nn::InitScheme::HeNormal, rng));
        c.conv_.push_back(nn::Conv2d::create(c128, c128, 3, 2, nn::InitScheme::HeNormal, rng));
        c.conv_.push_back(nn::Conv2d::create(c128, c256, 3, 1, nn::InitScheme::HeNormal, rng));
        c.conv_.push_back(nn::Conv2d::create(c256, c256, 3, 2, nn::InitScheme::HeNormal, rng));
        c.conv_.push_back(nn::Conv2d::create(c256, c512, 3, 2, nn::InitScheme::HeNormal, rng));
        const int64_t spatial = spec.input_size / 16;
        c.flat_dim_ = c512 * spatial * spatial;
        c.feature_fc_ = nn::Linear::create(c.flat_dim_, spec.feature_dim(), rng);
        c.logits_fc_ = nn::Linear::create(spec.feature_dim(), n_classes, rng);
        return c;
    }

    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

    int64_t n_classes() const { return logits_fc_.weight->value.dim(0); }

    int64_t class_index(const std::string& name) const {
        for (size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == name) return static_cast<int64_t>(i);
        throw ValueError("unknown artist: " + name);
    }

    // Feature-layer activations (post-ReLU), the embedding phi.
    Var forward_features(const Var& x) const {
        Var h = x;
        for (const auto& conv : conv_) h = ops::relu(conv(h));
        h = ops::reshape(h, {h->value.dim(0), flat_dim_});
        return ops::relu(feature_fc_(h));
    }

    Var forward_logits(const Var& x) const { return logits_fc_(forward_features(x)); }

    // Resizes to the training resolution and returns phi(image).
    std::vector<double> embed(const ImageBatch& image) const {
        if (!trained_) throw ValueError("classifier is untrained; train or load it first");
        ad::NoGradGuard ng;
        Tensor in = resize_bilinear(image.data, spec.input_size, spec.input_size);
        Tensor f = forward_features(ad::constant(in))->value;
        if (!f.all_finite()) throw NonFiniteError("embedding is non-finite");
        std::vector<double> out(static_cast<size_t>(f.numel()));
        std::copy(f.data(), f.data() + f.numel(), out.begin());
        return out;
    }

    int64_t predict(const ImageBatch& image) const {
        if (!trained_) throw ValueError("classifier is untrained; train or load it first");
        ad::NoGradGuard ng;
        Tensor in = resize_bilinear(image.data, spec.input_size, spec.input_size);
        Tensor l = forward_logits(ad::constant(in))->value;
        int64_t best = 0;
        for (int64_t k = 1; k < l.dim(1); ++k)
            if (l(int64_t(0), k) > l(int64_t(0), best)) best = k;
        return best;
    }

    nn::ParamList params() const {
        nn::ParamList out;
        for (size_t i = 0; i < conv_.size(); ++i)
            conv_[i].collect(out, "conv" + std::to_string(i + 1));
        feature_fc_.collect(out, "feature_fc");
        logits_fc_.collect(out, "logits_fc");
        return out;
    }

    // ---------------- persistence ----------------

    static constexpr char kMagic[9] = "PSTACLF1";

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write classifier: " + path);
        io::write_magic(f, kMagic);
        io::write_pod<uint32_t>(f, 1);
        io::write_string(f, io::format_key_values(spec.to_key_values()));
        io::write_pod<uint64_t>(f, class_names.size());
        for (const auto& n : class_names) io::write_string(f, n);
        io::write_pod<double>(f, holdout_accuracy);
        io::write_pod<uint8_t>(f, trained_ ? 1 : 0);
        nn::ParamList ps = params();
        io::write_pod<uint64_t>(f, ps.size());
        for (const auto& [name, p] : ps) {
            io::write_string(f, name);
            io::write_tensor(f, p->value);
        }
        if (!f) throw IoError("classifier write failed: " + path);
    }

    static ArtistClassifier load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open classifier: " + path);
        io::expect_magic(f, kMagic, "classifier");
        if (io::read_pod<uint32_t>(f) != 1) throw IoError("unsupported classifier version");
        std::istringstream spec_stream(io::read_string(f));
        ClassifierSpec spec = ClassifierSpec::from_key_values(io::parse_key_values(spec_stream));
        const uint64_t n_names = io::read_pod<uint64_t>(f);
        std::vector<std::string> names;
        for (uint64_t i = 0; i < n_names; ++i) names.push_back(io::read_string(f));
        ArtistClassifier c = create(spec, static_cast<int64_t>(n_names));
        c.class_names = std::move(names);
        c.holdout_accuracy = io::read_pod<double>(f);
        c.trained_ = io::read_pod<uint8_t>(f) != 0;
        const uint64_t count = io::read_pod<uint64_t>(f);
        nn::ParamList ps = c.params();
        if (count != ps.size()) throw IoError("classifier corrupt: parameter count");
        for (auto& [name, p] : ps) {
            if (io::read_string(f) != name) throw IoError("classifier corrupt: tensor order");
            Tensor t = io::read_tensor(f);
            if (!t.same_shape(p->value)) throw IoError("classifier corrupt: tensor shape");
            p->value = std::move(t);
        }
        return c;
    }

private:
    std::vector<nn::Conv2d> conv_;
    nn::Linear feature_fc_, logits_fc_;
    int64_t flat_dim_ = 0;
    bool trained_ = false;
};

// --------------------------------------------------------------------------
// Classifier training: stratified holdout split, shuffled minibatches,
// cross-entropy, Adam. Deterministic for a fixed spec seed.
inline ArtistClassifier train_artist_classifier(const LabeledImageSet& data,
                                                const ClassifierSpec& spec) {
    data.validate();
    spec.validate();
    ArtistClassifier clf =
        ArtistClassifier::create(spec, static_cast<int64_t>(data.class_names.size()));
    clf.class_names = data.class_names;

    const int64_t n = static_cast<int64_t>(data.images.size());
    std::vector<Tensor> resized(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        resized[static_cast<size_t>(i)] =
            resize_bilinear(data.images[static_cast<size_t>(i)].data, spec.input_size,
                            spec.input_size);

    // Per-class shuffle, first slice held out.
    std::vector<int64_t> train_idx, holdout_idx;
    for (size_t c = 0; c < data.class_names.size(); ++c) {
        std::vector<int64_t> members;
        for (int64_t i = 0; i < n; ++i)
            if (data.labels[static_cast<size_t>(i)] == static_cast<int64_t>(c)) members.push_back(i);
        Rng shuffle_rng(Rng::mix(spec.seed ^ Rng::mix(static_cast<uint64_t>(c))));
        for (size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[static_cast<size_t>(shuffle_rng.below(
                                          static_cast<int64_t>(i)))]);
        const int64_t hold =
            std::llround(spec.holdout_fraction * static_cast<double>(members.size()));
        for (size_t i = 0; i < members.size(); ++i)
            (static_cast<int64_t>(i) < hold ? holdout_idx : train_idx).push_back(members[i]);
    }
    if (train_idx.empty()) throw ValueError("holdout fraction left no training images");

    nn::ParamList params = clf.params();
    nn::Adam opt(0.9, 0.999, 1e-8);
    opt.allocate(params);

    auto make_batch = [&](const std::vector<int64_t>& idx, size_t from, size_t count) {
        Tensor batch({static_cast<int64_t>(count), 3, spec.input_size, spec.input_size});
        std::vector<int64_t> labels(count);
        const int64_t per = 3 * spec.input_size * spec.input_size;
        for (size_t b = 0; b < count; ++b) {
            const int64_t i = idx[from + b];
            std::copy(resized[static_cast<size_t>(i)].data(),
                      resized[static_cast<size_t>(i)].data() + per,
                      batch.data() + static_cast<int64_t>(b) * per);
            labels[b] = data.labels[static_cast<size_t>(i)];
        }
        return std::make_pair(std::move(batch), std::move(labels));
    };

    std::vector<int64_t> order = train_idx;
    for (int64_t epoch = 0; epoch < spec.epochs; ++epoch) {
        Rng epoch_rng = Rng::for_step(spec.seed, static_cast<uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<size_t>(epoch_rng.below(static_cast<int64_t>(i)))]);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(spec.batch_size)) {
            const size_t count =
                std::min<size_t>(static_cast<size_t>(spec.batch_size), order.size() - start);
            auto [batch, labels] = make_batch(order, start, count);
            Var loss = ops::softmax_cross_entropy(clf.forward_logits(ad::constant(batch)),
                                                  labels);
            if (!std::isfinite(ad::scalar(loss)))
                throw NonFiniteError("classifier training diverged (non-finite loss)");
            nn::zero_grads(params);
            ad::backward(loss);
            opt.step(params, spec.lr);
        }
    }
    clf.mark_trained();

    // Holdout accuracy; falls back to the training set when the split is
    // empty (tiny corpora).
    const std::vector<int64_t>& eval_idx = holdout_idx.empty() ? train_idx : holdout_idx;
    int64_t correct = 0;
    for (int64_t i : eval_idx) {
        ad::NoGradGuard ng;
        Tensor l =
            clf.forward_logits(ad::constant(resized[static_cast<size_t>(i)]))->value;
        int64_t best = 0;
        for (int64_t k = 1; k < l.dim(1); ++k)
            if (l(int64_t(0), k) > l(int64_t(0), best)) best = k;
        if (best == data.labels[static_cast<size_t>(i)]) ++correct;
    }
    clf.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
    return clf;
}

// --------------------------------------------------------------------------
// Embedding index: ids plus a row-major float32 matrix, persisted as a
// versioned binary file.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;

    EmbeddingIndex(std::vector<std::string> ids, std::vector<float> vectors, int64_t feature_dim)
        : ids_(std::move(ids)), vectors_(std::move(vectors)), f_(feature_dim) {
        validate();
    }

    int64_t size() const { return static_cast<int64_t>(ids_.size()); }
    int64_t feature_dim() const { return f_; }
    const std::vector<std::string>& ids() const { return ids_; }

    const float* row(int64_t i) const { return vectors_.data() + i * f_; }

    int64_t find(const std::string& id) const {
        for (size_t i = 0; i < ids_.size(); ++i)
            if (ids_[i] == id) return static_cast<int64_t>(i);
        return -1;
    }

    void validate() const {
        if (ids_.size() < 2) throw ValueError("degenerate index: need at least 2 entries");
        if (f_ < 1) throw ValueError("index feature dimension must be positive");
        if (vectors_.size() != ids_.size() * static_cast<size_t>(f_))
            throw ShapeError("index vector storage size mismatch");
        std::set<std::string> seen;
        for (const auto& id : ids_)
            if (!seen.insert(id).second) throw ValueError("duplicate id in index: " + id);
        for (int64_t i = 0; i < size(); ++i) {
            double norm2 = 0.0;
            for (int64_t j = 0; j < f_; ++j) {
                const float v = row(i)[j];
                if (!std::isfinite(v)) throw NonFiniteError("non-finite embedding: " + ids_[i]);
                norm2 += static_cast<double>(v) * static_cast<double>(v);
            }
            if (!(norm2 > 0.0)) throw ValueError("zero embedding vector: " + ids_[i]);
        }
    }

    static constexpr char kMagic[9] = "PSTEIDX1";

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write index: " + path);
        io::write_magic(f, kMagic);
        io::write_pod<uint32_t>(f, 1);
        io::write_pod<uint64_t>(f, ids_.size());
        io::write_pod<uint64_t>(f, static_cast<uint64_t>(f_));
        for (const auto& id : ids_) io::write_string(f, id);
        io::write_bytes(f, vectors_.data(), vectors_.size() * sizeof(float));
        if (!f) throw IoError("index write failed: " + path);
    }

    static EmbeddingIndex load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open index: " + path);
        io::expect_magic(f, kMagic, "embedding index");
        if (io::read_pod<uint32_t>(f) != 1) throw IoError("unsupported index version");
        const uint64_t m = io::read_pod<uint64_t>(f);
        const uint64_t dim = io::read_pod<uint64_t>(f);
        if (m < 2 || dim < 1 || m > (1ull << 32) || dim > (1ull << 32))
            throw IoError("index corrupt: header");
        std::vector<std::string> ids;
        ids.reserve(m);
        for (uint64_t i = 0; i < m; ++i) ids.push_back(io::read_string(f));
        std::vector<float> vectors(m * dim);
        io::read_bytes(f, vectors.data(), vectors.size() * sizeof(float));
        return EmbeddingIndex(std::move(ids), std::move(vectors), static_cast<int64_t>(dim));
    }

private:
    std::vector<std::string> ids_;
    std::vector<float> vectors_; // row-major [M, F]
    int64_t f_ = 0;
};

// Embed a list of (id, image) pairs with a trained classifier.
inline EmbeddingIndex build_embedding_index(
    const ArtistClassifier& clf, const std::vector<std::pair<std::string, ImageBatch>>& entries) {
    if (entries.size() < 2) throw ValueError("degenerate index: need at least 2 entries");
    const int64_t dim = clf.spec.feature_dim();
    std::vector<std::string> ids;
    std::vector<float> vectors;
    ids.reserve(entries.size());
    vectors.reserve(entries.size() * static_cast<size_t>(dim));
    for (const auto& [id, image] : entries) {
        ids.push_back(id);
        for (double v : clf.embed(image)) vectors.push_back(static_cast<float>(v));
    }
    return EmbeddingIndex(std::move(ids), std::move(vectors), dim);
}

// --------------------------------------------------------------------------
// Cosine distance: 1 - cos(a,b), in [0,2], zero iff parallel.
inline double cosine_distance(const double* a, const double* b, int64_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) throw ValueError("cosine_distance: zero vector");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("cosine_distance: dimension mismatch");
    return cosine_distance(a.data(), b.data(), static_cast<int64_t>(a.size()));
}

inline double index_distance(const EmbeddingIndex& index, int64_t i, int64_t j) {
    const int64_t f = index.feature_dim();
    double dot = 0.0, na = 0.0, nb = 0.0;
    const float* a = index.row(i);
    const float* b = index.row(j);
    for (int64_t k = 0; k < f; ++k) {
        dot += static_cast<double>(a[k]) * static_cast<double>(b[k]);
        na += static_cast<double>(a[k]) * static_cast<double>(a[k]);
        nb += static_cast<double>(b[k]) * static_cast<double>(b[k]);
    }
    if (!(na > 0.0) || !(nb > 0.0)) throw ValueError("cosine_distance: zero vector");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

// Lower empirical quantile (order statistic, no interpolation) of the
// pairwise distances over distinct unordered pairs. Above `pair_cap`
// pairs, a seeded uniform sample of pairs is used instead of full
// enumeration.
inline double quantile_threshold(const EmbeddingIndex& index, double q,
                                 int64_t pair_cap = 1'000'000, uint64_t sample_seed = 0) {
    if (index.size() < 2) throw ValueError("degenerate index: need at least 2 entries");
    if (!(q > 0.0 && q < 1.0)) throw ValueError("quantile must be in (0,1)");
    const int64_t m = index.size();
    const int64_t total_pairs = m * (m - 1) / 2;
    std::vector<double> dists;
    if (total_pairs <= pair_cap) {
        dists.reserve(static_cast<size_t>(total_pairs));
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = i + 1; j < m; ++j) dists.push_back(index_distance(index, i, j));
    } else {
        Rng rng(Rng::mix(sample_seed ^ 0x7175616e74696c65ull));
        dists.reserve(static_cast<size_t>(pair_cap));
        for (int64_t k = 0; k < pair_cap; ++k) {
            const int64_t i = rng.below(m);
            int64_t j = rng.below(m - 1);
            if (j >= i) ++j;
            dists.push_back(index_distance(index, i, j));
        }
    }
    std::sort(dists.begin(), dists.end());
    const int64_t count = static_cast<int64_t>(dists.size());
    int64_t k = static_cast<int64_t>(std::ceil(q * static_cast<double>(count))) - 1;
    k = std::clamp<int64_t>(k, 0, count - 1);
    return dists[static_cast<size_t>(k)];
}

// The related-style group: every index entry closer to the query than the
// threshold. The query belongs to its own group by definition.
struct StyleSet {
    std::string query_id;
    std::vector<std::string> member_ids;
    double threshold = 0.0;
    std::string distance_metric = "cosine";

    bool contains(const std::string& id) const {
        return std::find(member_ids.begin(), member_ids.end(), id) != member_ids.end();
    }
};

// Exact linear scan retrieval of { y : distance(y, query) < t } with t the
// q-quantile of pairwise distances.
inline StyleSet build_style_set(const std::string& query_id, const EmbeddingIndex& index,
                                double q, int64_t pair_cap = 1'000'000,
                                uint64_t sample_seed = 0) {
    const int64_t query = index.find(query_id);
    if (query < 0) throw ValueError("unknown query id: " + query_id);
    StyleSet set;
    set.query_id = query_id;
    set.threshold = quantile_threshold(index, q, pair_cap, sample_seed);
    for (int64_t i = 0; i < index.size(); ++i) {
        if (i == query) {
            set.member_ids.push_back(index.ids()[static_cast<size_t>(i)]);
            continue;
        }
        if (index_distance(index, query, i) < set.threshold)
            set.member_ids.push_back(index.ids()[static_cast<size_t>(i)]);
    }
    return set;
}

// --------------------------------------------------------------------------
// Style-set manifest: a diffable text file, header plus one member id per
// line.
inline void save_style_set(const std::string& path, const StyleSet& set, double quantile) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write style set manifest: " + path);
    f.precision(17);
    f << "# pastiche-style-set v1\n";
    f << "# query: " << set.query_id << "\n";
    f << "# quantile: " << quantile << "\n";
    f << "# threshold: " << set.threshold << "\n";
    f << "# metric: " << set.distance_metric << "\n";
    for (const auto& id : set.member_ids) f << id << "\n";
    if (!f) throw IoError("style set manifest write failed: " + path);
}

inline StyleSet load_style_set(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open style set manifest: " + path);
    StyleSet set;
    std::string line;
    bool got_query = false, got_threshold = false;
    while (std::getline(f, line)) {
        const std::string t = io::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const auto colon = t.find(':');
            if (colon == std::string::npos) continue;
            const std::string key = io::trim(t.substr(1, colon - 1));
            const std::string value = io::trim(t.substr(colon + 1));
            if (key == "query") {
                set.query_id = value;
                got_query = true;
            } else if (key == "threshold") {
                set.threshold = std::stod(value);
                got_threshold = true;
            } else if (key == "metric") {
                set.distance_metric = value;
            }
            continue;
        }
        set.member_ids.push_back(t);
    }
    if (!got_query || !got_threshold)
        throw IoError("style set manifest missing query/threshold header: " + path);
    return set;
}

} // namespace pastiche::grouping
