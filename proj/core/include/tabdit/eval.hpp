#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tabdit/ingest.hpp"
#include "tabdit/rng.hpp"
#include "tabdit/schema.hpp"

namespace tabdit::eval {

// ---- featurization ----------------------------------------------------------

// Fixed deterministic per-series feature vector: for every numerical field
// {mean, std, min, max, median, first, last}, for every categorical field
// the normalized frequency of each (non-EoS) vocabulary entry, plus the
// series length. The merged task appends the encoded parent row: raw value
// for numerical fields, a one-hot block for categorical fields.
std::vector<double> featurize_series(const TimeSeries& series, const Schema& schema,
                                     const Row* parent = nullptr,
                                     const Schema* parent_schema = nullptr);
std::vector<std::string> series_feature_names(const Schema& schema,
                                              const Schema* parent_schema = nullptr);

// Single-row features: raw numerical values plus categorical one-hots.
std::vector<double> featurize_row(const Row& row, const Schema& schema);

// ---- discriminators ---------------------------------------------------------

class Discriminator {
  public:
    virtual ~Discriminator() = default;
    virtual void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                     Rng& rng) = 0;
    virtual double predict_proba(const std::vector<double>& x) const = 0;
};

struct BoostedStumpsConfig {
    int rounds = 150;
    double learning_rate = 0.1;
    double l2 = 1.0;
    int max_thresholds = 32;
};

// Gradient boosted depth-1 trees with logistic loss (deterministic).
std::unique_ptr<Discriminator> make_boosted_stumps(const BoostedStumpsConfig& cfg = {});

struct BaggedTreesConfig {
    int trees = 40;
    int max_depth = 6;
    int min_leaf = 4;
    double feature_fraction = 0.6;
};

// Bootstrap-aggregated randomized decision trees.
std::unique_ptr<Discriminator> make_bagged_trees(const BaggedTreesConfig& cfg = {});

// Tie-aware rank ROC-AUC of scores against binary labels.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// ---- split plan -------------------------------------------------------------

struct SplitPlan {
    std::vector<int> generator_train;
    std::vector<int> discriminator_train;
    std::vector<int> test;
    std::uint64_t seed = 0;
};

// Disjoint, exhaustive shuffle split of [0, count).
SplitPlan make_split(int count, double generator_fraction, double discriminator_fraction,
                     std::uint64_t seed);

// ---- metrics ----------------------------------------------------------------

// Discriminator accuracy (percent) separating real from synthetic feature
// vectors; balanced classes, internal half/half train-test split.
double mld_ts(const std::vector<std::vector<double>>& real_features,
              const std::vector<std::vector<double>>& synthetic_features, std::uint64_t seed);

// Fold-averaged single-row detection score: 100 x (1 - mean over folds of
// max(0.5, AUC) * 2 - 1). 100 is ideal (indistinguishable rows).
double ld_sr(const std::vector<std::vector<double>>& real_rows,
             const std::vector<std::vector<double>>& synthetic_rows, int folds, std::uint64_t seed);
// Pure aggregation step of the score from per-fold AUCs.
double ld_sr_from_aucs(const std::vector<double>& fold_aucs);

struct MleResult {
    double synthetic_trained = 0.0;  // accuracy %, trained on synthetic
    double original = 0.0;           // accuracy %, trained on real
};

// Classifier accuracy on real test data when trained on synthetic
// features versus the real-trained reference.
MleResult mle_ts(const std::vector<std::vector<double>>& synthetic_x,
                 const std::vector<int>& synthetic_y,
                 const std::vector<std::vector<double>>& real_train_x,
                 const std::vector<int>& real_train_y,
                 const std::vector<std::vector<double>>& real_test_x,
                 const std::vector<int>& real_test_y, std::uint64_t seed);

// ---- orchestration ----------------------------------------------------------

struct LabelRule {
    std::string attribute;          // parent attribute name
    double threshold = 0.0;         // numeric: label = value > threshold
    std::string positive_category;  // categorical: label = value == category
};

struct EvalOptions {
    std::string task = "uncond";  // uncond | child | child-gt-cond | merged
    int runs = 3;
    int folds = 3;
    std::uint64_t seed = 0;
    std::optional<LabelRule> label;  // enables MLE-TS
};

struct EvalReport {
    std::string task;
    int runs = 0;
    int folds = 0;
    double mld_ts_mean = 0.0, mld_ts_std = 0.0;
    double ld_sr_mean = 0.0, ld_sr_std = 0.0;
    bool has_mle = false;
    double mle_ts_mean = 0.0, mle_ts_std = 0.0;
    double original_mean = 0.0, original_std = 0.0;
    std::vector<std::string> feature_names;  // versions the feature set

    std::string to_json() const;
};

// Real and synthetic corpora must share the schema. For "merged" both need
// aligned parents; for MLE both need parents and a label rule.
EvalReport evaluate_corpora(const TrainingCorpus& real, const TrainingCorpus& synthetic,
                            const EvalOptions& options);

// Binary label from a parent row under the rule.
int label_of(const Row& parent, const Schema& parent_schema, const LabelRule& rule);

}  // namespace tabdit::eval
