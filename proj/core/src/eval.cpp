#include "tabdit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "tabdit/errors.hpp"

namespace tabdit::eval {

using nlohmann::json;

// ---- featurization ----------------------------------------------------------

namespace {

void append_parent_features(std::vector<double>& out, const Row& parent,
                            const Schema& parent_schema) {
    for (std::size_t f = 0; f < parent_schema.fields().size(); ++f) {
        const FieldSpec& spec = parent_schema.fields()[f];
        if (spec.kind == FieldKind::Numerical) {
            out.push_back(std::get<double>(parent.values[f]));
            continue;
        }
        const auto& value = std::get<std::string>(parent.values[f]);
        for (const auto& entry : spec.vocabulary) {
            if (entry == kEosToken) continue;
            out.push_back(entry == value ? 1.0 : 0.0);
        }
    }
}

double percent(double fraction) { return 100.0 * fraction; }

std::vector<int> shuffled_indices(int count, Rng& rng) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.begin(), idx.end());
    return idx;
}

}  // namespace

std::vector<double> featurize_series(const TimeSeries& series, const Schema& schema,
                                     const Row* parent, const Schema* parent_schema) {
    if (series.rows.empty()) fail(ErrorCode::EmptySeries, "cannot featurize an empty series");
    std::vector<double> out;
    const std::size_t tau = series.rows.size();
    for (std::size_t f = 0; f < schema.fields().size(); ++f) {
        const FieldSpec& spec = schema.fields()[f];
        if (spec.kind == FieldKind::Numerical) {
            std::vector<double> values(tau);
            for (std::size_t r = 0; r < tau; ++r)
                values[r] = std::get<double>(series.rows[r].values[f]);
            const double mean = std::accumulate(values.begin(), values.end(), 0.0) / tau;
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            var /= tau;
            std::vector<double> sorted = values;
            std::sort(sorted.begin(), sorted.end());
            const double median = tau % 2 ? sorted[tau / 2]
                                          : 0.5 * (sorted[tau / 2 - 1] + sorted[tau / 2]);
            out.push_back(mean);
            out.push_back(std::sqrt(var));
            out.push_back(sorted.front());
            out.push_back(sorted.back());
            out.push_back(median);
            out.push_back(values.front());
            out.push_back(values.back());
        } else {
            for (const auto& entry : spec.vocabulary) {
                if (entry == kEosToken) continue;
                int count = 0;
                for (const auto& row : series.rows)
                    count += std::get<std::string>(row.values[f]) == entry;
                out.push_back(static_cast<double>(count) / static_cast<double>(tau));
            }
        }
    }
    out.push_back(static_cast<double>(tau));
    if (parent && parent_schema) append_parent_features(out, *parent, *parent_schema);
    for (double v : out)
        if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "feature vector has a non-finite entry");
    return out;
}

std::vector<std::string> series_feature_names(const Schema& schema, const Schema* parent_schema) {
    std::vector<std::string> names;
    for (const auto& spec : schema.fields()) {
        if (spec.kind == FieldKind::Numerical) {
            for (const char* stat : {"mean", "std", "min", "max", "median", "first", "last"})
                names.push_back(spec.name + "." + stat);
        } else {
            for (const auto& entry : spec.vocabulary)
                if (entry != kEosToken) names.push_back(spec.name + ".freq." + entry);
        }
    }
    names.push_back("length");
    if (parent_schema)
        for (const auto& spec : parent_schema->fields()) {
            if (spec.kind == FieldKind::Numerical) {
                names.push_back("parent." + spec.name);
            } else {
                for (const auto& entry : spec.vocabulary)
                    if (entry != kEosToken) names.push_back("parent." + spec.name + ".is." + entry);
            }
        }
    return names;
}

std::vector<double> featurize_row(const Row& row, const Schema& schema) {
    std::vector<double> out;
    for (std::size_t f = 0; f < schema.fields().size(); ++f) {
        const FieldSpec& spec = schema.fields()[f];
        if (spec.kind == FieldKind::Numerical) {
            out.push_back(std::get<double>(row.values[f]));
        } else {
            const auto& value = std::get<std::string>(row.values[f]);
            for (const auto& entry : spec.vocabulary) {
                if (entry == kEosToken) continue;
                out.push_back(entry == value ? 1.0 : 0.0);
            }
        }
    }
    return out;
}

// ---- boosted stumps ---------------------------------------------------------

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class BoostedStumps final : public Discriminator {
  public:
    explicit BoostedStumps(const BoostedStumpsConfig& cfg) : cfg_(cfg) {}

    void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y, Rng&) override {
        const int n = static_cast<int>(x.size());
        const int dims = static_cast<int>(x[0].size());
        // Presorted sample indices per feature.
        std::vector<std::vector<int>> order(dims);
        for (int j = 0; j < dims; ++j) {
            order[j].resize(n);
            std::iota(order[j].begin(), order[j].end(), 0);
            std::sort(order[j].begin(), order[j].end(),
                      [&](int a, int b) { return x[a][j] < x[b][j]; });
        }

        std::vector<double> margin(n, 0.0);
        stumps_.clear();
        for (int round = 0; round < cfg_.rounds; ++round) {
            double total_g = 0.0, total_h = 0.0;
            std::vector<double> g(n), h(n);
            for (int i = 0; i < n; ++i) {
                const double p = sigmoid(margin[i]);
                g[i] = p - y[i];
                h[i] = std::max(p * (1.0 - p), 1e-12);
                total_g += g[i];
                total_h += h[i];
            }
            const double base_score = total_g * total_g / (total_h + cfg_.l2);

            Stump best;
            double best_gain = 1e-12;
            for (int j = 0; j < dims; ++j) {
                double gl = 0.0, hl = 0.0;
                for (int k = 0; k + 1 < n; ++k) {
                    const int i = order[j][k];
                    gl += g[i];
                    hl += h[i];
                    const double left_value = x[i][j];
                    const double right_value = x[order[j][k + 1]][j];
                    if (left_value == right_value) continue;
                    const double gr = total_g - gl;
                    const double hr = total_h - hl;
                    const double gain = gl * gl / (hl + cfg_.l2) + gr * gr / (hr + cfg_.l2) -
                                        base_score;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best.feature = j;
                        best.threshold = 0.5 * (left_value + right_value);
                        best.left = -gl / (hl + cfg_.l2);
                        best.right = -gr / (hr + cfg_.l2);
                    }
                }
            }
            if (best.feature < 0) break;  // no informative split remains
            best.left *= cfg_.learning_rate;
            best.right *= cfg_.learning_rate;
            for (int i = 0; i < n; ++i)
                margin[i] += x[i][best.feature] <= best.threshold ? best.left : best.right;
            stumps_.push_back(best);
        }
    }

    double predict_proba(const std::vector<double>& x) const override {
        double margin = 0.0;
        for (const auto& s : stumps_) margin += x[s.feature] <= s.threshold ? s.left : s.right;
        return sigmoid(margin);
    }

  private:
    struct Stump {
        int feature = -1;
        double threshold = 0.0;
        double left = 0.0;
        double right = 0.0;
    };
    BoostedStumpsConfig cfg_;
    std::vector<Stump> stumps_;
};

// ---- bagged randomized trees --------------------------------------------------

class BaggedTrees final : public Discriminator {
  public:
    explicit BaggedTrees(const BaggedTreesConfig& cfg) : cfg_(cfg) {}

    void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
             Rng& rng) override {
        data_ = &x;
        const int n = static_cast<int>(x.size());
        dims_ = static_cast<int>(x[0].size());
        forest_.clear();
        forest_.resize(cfg_.trees);
        for (auto& tree : forest_) {
            std::vector<int> sample(n);
            for (int i = 0; i < n; ++i) sample[i] = static_cast<int>(rng.uniform_int(0, n - 1));
            build(tree, x, y, std::move(sample), 0, rng);
        }
        data_ = nullptr;
    }

    double predict_proba(const std::vector<double>& x) const override {
        double total = 0.0;
        for (const auto& tree : forest_) {
            int node = 0;
            while (tree[node].feature >= 0)
                node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                                     : tree[node].right;
            total += tree[node].prob;
        }
        return total / static_cast<double>(forest_.size());
    }

  private:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double prob = 0.5;
    };
    using Tree = std::vector<Node>;

    int build(Tree& tree, const std::vector<std::vector<double>>& x, const std::vector<int>& y,
              std::vector<int> sample, int depth, Rng& rng) {
        const int node_index = static_cast<int>(tree.size());
        tree.push_back(Node{});
        const int n = static_cast<int>(sample.size());
        int positives = 0;
        for (int i : sample) positives += y[i];
        tree[node_index].prob = (positives + 1.0) / (n + 2.0);  // Laplace smoothing
        if (depth >= cfg_.max_depth || n < 2 * cfg_.min_leaf || positives == 0 || positives == n)
            return node_index;

        // Random feature subset.
        std::vector<int> features(dims_);
        std::iota(features.begin(), features.end(), 0);
        rng.shuffle(features.begin(), features.end());
        const int keep = std::max(1, static_cast<int>(std::ceil(cfg_.feature_fraction * dims_)));
        features.resize(keep);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = gini(positives, n);
        for (int j : features) {
            std::vector<int> order = sample;
            std::sort(order.begin(), order.end(),
                      [&](int a, int b) { return x[a][j] < x[b][j]; });
            int left_pos = 0;
            for (int k = 0; k + 1 < n; ++k) {
                left_pos += y[order[k]];
                if (x[order[k]][j] == x[order[k + 1]][j]) continue;
                const int left_n = k + 1;
                const int right_n = n - left_n;
                if (left_n < cfg_.min_leaf || right_n < cfg_.min_leaf) continue;
                const double score =
                    (left_n * gini(left_pos, left_n) + right_n * gini(positives - left_pos, right_n)) /
                    n;
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = j;
                    best_threshold = 0.5 * (x[order[k]][j] + x[order[k + 1]][j]);
                }
            }
        }
        if (best_feature < 0) return node_index;

        std::vector<int> left_sample, right_sample;
        for (int i : sample)
            (x[i][best_feature] <= best_threshold ? left_sample : right_sample).push_back(i);
        tree[node_index].feature = best_feature;
        tree[node_index].threshold = best_threshold;
        tree[node_index].left = build(tree, x, y, std::move(left_sample), depth + 1, rng);
        tree[node_index].right = build(tree, x, y, std::move(right_sample), depth + 1, rng);
        return node_index;
    }

    static double gini(int positives, int n) {
        const double p = static_cast<double>(positives) / n;
        return 2.0 * p * (1.0 - p);
    }

    BaggedTreesConfig cfg_;
    std::vector<Tree> forest_;
    const std::vector<std::vector<double>>* data_ = nullptr;
    int dims_ = 0;
};

}  // namespace

std::unique_ptr<Discriminator> make_boosted_stumps(const BoostedStumpsConfig& cfg) {
    return std::make_unique<BoostedStumps>(cfg);
}

std::unique_ptr<Discriminator> make_bagged_trees(const BaggedTreesConfig& cfg) {
    return std::make_unique<BaggedTrees>(cfg);
}

// ---- auc / split ----------------------------------------------------------

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        fail(ErrorCode::InsufficientData, "roc_auc inputs");
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });

    std::size_t positives = 0, negatives = 0;
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (i + j) + 1.0;  // 1-based, ties averaged
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) {
                ++positives;
                positive_rank_sum += avg_rank;
            } else {
                ++negatives;
            }
        }
        i = j + 1;
    }
    if (positives == 0 || negatives == 0)
        fail(ErrorCode::InsufficientData, "roc_auc needs both classes");
    return (positive_rank_sum - positives * (positives + 1.0) / 2.0) /
           (static_cast<double>(positives) * negatives);
}

SplitPlan make_split(int count, double generator_fraction, double discriminator_fraction,
                     std::uint64_t seed) {
    if (generator_fraction < 0 || discriminator_fraction < 0 ||
        generator_fraction + discriminator_fraction > 1.0)
        fail(ErrorCode::InvalidConfig, "split fractions");
    SplitPlan plan;
    plan.seed = seed;
    Rng rng(seed);
    auto idx = shuffled_indices(count, rng);
    const int gen = static_cast<int>(std::llround(generator_fraction * count));
    const int disc = static_cast<int>(std::llround(discriminator_fraction * count));
    plan.generator_train.assign(idx.begin(), idx.begin() + gen);
    plan.discriminator_train.assign(idx.begin() + gen, idx.begin() + std::min(count, gen + disc));
    plan.test.assign(idx.begin() + std::min(count, gen + disc), idx.end());
    return plan;
}

// ---- metrics ----------------------------------------------------------------

double mld_ts(const std::vector<std::vector<double>>& real_features,
              const std::vector<std::vector<double>>& synthetic_features, std::uint64_t seed) {
    const int per_class =
        static_cast<int>(std::min(real_features.size(), synthetic_features.size()));
    if (per_class < 10) fail(ErrorCode::InsufficientData, "mld_ts needs >= 10 per class");

    Rng rng(Rng::stream(seed, 101).next_u64());
    auto real_idx = shuffled_indices(static_cast<int>(real_features.size()), rng);
    auto synth_idx = shuffled_indices(static_cast<int>(synthetic_features.size()), rng);

    const int train_n = per_class / 2;
    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
    for (int i = 0; i < train_n; ++i) {
        train_x.push_back(real_features[real_idx[i]]);
        train_y.push_back(0);
        train_x.push_back(synthetic_features[synth_idx[i]]);
        train_y.push_back(1);
    }
    auto model = make_boosted_stumps();
    model->fit(train_x, train_y, rng);

    int correct = 0, total = 0;
    for (int i = train_n; i < per_class; ++i) {
        correct += model->predict_proba(real_features[real_idx[i]]) <= 0.5;
        correct += model->predict_proba(synthetic_features[synth_idx[i]]) > 0.5;
        total += 2;
    }
    return percent(static_cast<double>(correct) / total);
}

double ld_sr_from_aucs(const std::vector<double>& fold_aucs) {
    if (fold_aucs.empty()) fail(ErrorCode::InsufficientData, "no folds");
    double total = 0.0;
    for (double auc : fold_aucs) total += std::max(0.5, auc) * 2.0 - 1.0;
    const double mu = total / static_cast<double>(fold_aucs.size());
    return 100.0 * (1.0 - mu);
}

double ld_sr(const std::vector<std::vector<double>>& real_rows,
             const std::vector<std::vector<double>>& synthetic_rows, int folds,
             std::uint64_t seed) {
    const int per_class = static_cast<int>(std::min(real_rows.size(), synthetic_rows.size()));
    if (folds < 2) fail(ErrorCode::InvalidConfig, "ld_sr needs >= 2 folds");
    if (per_class < 2 * folds) fail(ErrorCode::InsufficientData, "ld_sr needs 2F rows per class");

    Rng rng(Rng::stream(seed, 202).next_u64());
    auto real_idx = shuffled_indices(static_cast<int>(real_rows.size()), rng);
    auto synth_idx = shuffled_indices(static_cast<int>(synthetic_rows.size()), rng);

    std::vector<double> aucs;
    for (int fold = 0; fold < folds; ++fold) {
        std::vector<std::vector<double>> train_x, test_x;
        std::vector<int> train_y, test_y;
        for (int i = 0; i < per_class; ++i) {
            const bool in_test = i % folds == fold;
            auto& x = in_test ? test_x : train_x;
            auto& y = in_test ? test_y : train_y;
            x.push_back(real_rows[real_idx[i]]);
            y.push_back(0);
            x.push_back(synthetic_rows[synth_idx[i]]);
            y.push_back(1);
        }
        auto model = make_bagged_trees();
        Rng fit_rng(Rng::stream(seed, 300 + fold).next_u64());
        model->fit(train_x, train_y, fit_rng);
        std::vector<double> scores;
        scores.reserve(test_x.size());
        for (const auto& x : test_x) scores.push_back(model->predict_proba(x));
        aucs.push_back(roc_auc(scores, test_y));
    }
    return ld_sr_from_aucs(aucs);
}

MleResult mle_ts(const std::vector<std::vector<double>>& synthetic_x,
                 const std::vector<int>& synthetic_y,
                 const std::vector<std::vector<double>>& real_train_x,
                 const std::vector<int>& real_train_y,
                 const std::vector<std::vector<double>>& real_test_x,
                 const std::vector<int>& real_test_y, std::uint64_t seed) {
    if (synthetic_x.size() < 10 || real_train_x.size() < 10 || real_test_x.size() < 10)
        fail(ErrorCode::InsufficientData, "mle_ts needs >= 10 samples per set");

    auto accuracy = [&](const std::vector<std::vector<double>>& train_x,
                        const std::vector<int>& train_y) {
        auto model = make_boosted_stumps();
        Rng rng(Rng::stream(seed, 404).next_u64());
        model->fit(train_x, train_y, rng);
        int correct = 0;
        for (std::size_t i = 0; i < real_test_x.size(); ++i)
            correct += (model->predict_proba(real_test_x[i]) > 0.5 ? 1 : 0) == real_test_y[i];
        return percent(static_cast<double>(correct) / static_cast<double>(real_test_x.size()));
    };

    MleResult out;
    out.synthetic_trained = accuracy(synthetic_x, synthetic_y);
    out.original = accuracy(real_train_x, real_train_y);
    return out;
}

// ---- orchestration ----------------------------------------------------------

int label_of(const Row& parent, const Schema& parent_schema, const LabelRule& rule) {
    for (std::size_t f = 0; f < parent_schema.fields().size(); ++f) {
        const FieldSpec& spec = parent_schema.fields()[f];
        if (spec.name != rule.attribute) continue;
        if (spec.kind == FieldKind::Numerical)
            return std::get<double>(parent.values[f]) > rule.threshold ? 1 : 0;
        return std::get<std::string>(parent.values[f]) == rule.positive_category ? 1 : 0;
    }
    fail(ErrorCode::MissingLabelAttribute,
         "parent schema has no attribute '" + rule.attribute + "'");
}

std::string EvalReport::to_json() const {
    json doc;
    doc["task"] = task;
    doc["runs"] = runs;
    doc["folds"] = folds;
    doc["mld_ts"] = json{{"mean", mld_ts_mean}, {"std", mld_ts_std}};
    doc["ld_sr"] = json{{"mean", ld_sr_mean}, {"std", ld_sr_std}};
    if (has_mle) {
        doc["mle_ts"] = json{{"mean", mle_ts_mean}, {"std", mle_ts_std}};
        doc["original"] = json{{"mean", original_mean}, {"std", original_std}};
    }
    doc["feature_names"] = feature_names;
    return doc.dump(2);
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(var / values.size());
    return out;
}

}  // namespace

EvalReport evaluate_corpora(const TrainingCorpus& real, const TrainingCorpus& synthetic,
                            const EvalOptions& options) {
    if (real.schema.hash() != synthetic.schema.hash())
        fail(ErrorCode::SchemaMismatch, "real and synthetic schemas differ");
    const bool merged = options.task == "merged";
    if (options.task != "uncond" && options.task != "child" && options.task != "child-gt-cond" &&
        !merged)
        fail(ErrorCode::InvalidConfig, "unknown task '" + options.task + "'");

    const Schema* parent_schema = nullptr;
    if (merged) {
        if (!real.parent_schema || !synthetic.parent_schema ||
            real.parents.size() != real.series.size() ||
            synthetic.parents.size() != synthetic.series.size())
            fail(ErrorCode::SchemaMismatch, "merged task needs parent rows on both sides");
        if (real.parent_schema->hash() != synthetic.parent_schema->hash())
            fail(ErrorCode::SchemaMismatch, "parent schemas differ");
        parent_schema = &*real.parent_schema;
    }

    // Series-level features (with parents appended for the merged task).
    auto featurize_all = [&](const TrainingCorpus& corpus) {
        std::vector<std::vector<double>> features;
        features.reserve(corpus.series.size());
        for (std::size_t i = 0; i < corpus.series.size(); ++i)
            features.push_back(featurize_series(corpus.series[i], corpus.schema,
                                                merged ? &corpus.parents[i] : nullptr,
                                                parent_schema));
        return features;
    };
    const auto real_features = featurize_all(real);
    const auto synth_features = featurize_all(synthetic);

    // Row-level features for LD-SR (parent values appended when merged).
    auto rows_of = [&](const TrainingCorpus& corpus) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < corpus.series.size(); ++i)
            for (const auto& row : corpus.series[i].rows) {
                auto features = featurize_row(row, corpus.schema);
                if (merged) {
                    append_parent_features(features, corpus.parents[i], *parent_schema);
                }
                rows.push_back(std::move(features));
            }
        return rows;
    };
    const auto real_rows = rows_of(real);
    const auto synth_rows = rows_of(synthetic);

    const bool wants_mle = options.label.has_value() && !merged;
    if (wants_mle) {
        if (!real.parent_schema || real.parents.size() != real.series.size() ||
            !synthetic.parent_schema || synthetic.parents.size() != synthetic.series.size())
            fail(ErrorCode::MissingLabelAttribute, "MLE-TS needs parents on both sides");
    }

    EvalReport report;
    report.task = options.task;
    report.runs = options.runs;
    report.folds = options.folds;
    report.feature_names = series_feature_names(real.schema, parent_schema);

    std::vector<double> mld_runs, ld_runs, mle_runs, original_runs;
    for (int run = 0; run < options.runs; ++run) {
        const std::uint64_t run_seed = Rng::stream(options.seed, 1000 + run).next_u64();
        mld_runs.push_back(mld_ts(real_features, synth_features, run_seed));
        ld_runs.push_back(ld_sr(real_rows, synth_rows, options.folds, run_seed));

        if (wants_mle) {
            Rng rng(Rng::stream(run_seed, 7).next_u64());
            auto idx = shuffled_indices(static_cast<int>(real.series.size()), rng);
            const int train_n = static_cast<int>(idx.size()) / 2;
            std::vector<std::vector<double>> real_train_x, real_test_x, synth_x;
            std::vector<int> real_train_y, real_test_y, synth_y;
            for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
                auto features =
                    featurize_series(real.series[idx[i]], real.schema, nullptr, nullptr);
                const int label =
                    label_of(real.parents[idx[i]], *real.parent_schema, *options.label);
                if (i < train_n) {
                    real_train_x.push_back(std::move(features));
                    real_train_y.push_back(label);
                } else {
                    real_test_x.push_back(std::move(features));
                    real_test_y.push_back(label);
                }
            }
            for (std::size_t i = 0; i < synthetic.series.size(); ++i) {
                synth_x.push_back(
                    featurize_series(synthetic.series[i], synthetic.schema, nullptr, nullptr));
                synth_y.push_back(
                    label_of(synthetic.parents[i], *synthetic.parent_schema, *options.label));
            }
            MleResult mle = mle_ts(synth_x, synth_y, real_train_x, real_train_y, real_test_x,
                                   real_test_y, run_seed);
            mle_runs.push_back(mle.synthetic_trained);
            original_runs.push_back(mle.original);
        }
    }

    const MeanStd mld = mean_std(mld_runs);
    report.mld_ts_mean = mld.mean;
    report.mld_ts_std = mld.stddev;
    const MeanStd ld = mean_std(ld_runs);
    report.ld_sr_mean = ld.mean;
    report.ld_sr_std = ld.stddev;
    if (wants_mle) {
        report.has_mle = true;
        const MeanStd mle = mean_std(mle_runs);
        report.mle_ts_mean = mle.mean;
        report.mle_ts_std = mle.stddev;
        const MeanStd original = mean_std(original_runs);
        report.original_mean = original.mean;
        report.original_std = original.stddev;
    }
    return report;
}

}  // namespace tabdit::eval
