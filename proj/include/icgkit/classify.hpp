#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icgkit/features.hpp"
#include "icgkit/image.hpp"
#include "icgkit/json_util.hpp"

namespace icgkit {

enum class ModelKind { knn, naive_bayes, tree };

const char* to_string(ModelKind kind);        // knn, nb, tree
ModelKind parse_model_kind(std::string_view);  // throws ConfigError

struct Hyperparams {
    int k = 3;  // odd
    int max_depth = 3;
    int min_leaf = 2;
};

Json hyperparams_to_json(const Hyperparams& h);
Hyperparams hyperparams_from_json(const Json& j);

struct TreeNode {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    std::array<std::size_t, 2> counts{};
    int left = -1;
    int right = -1;
};

struct ClassifierModel {
    ModelKind kind = ModelKind::knn;
    std::vector<std::string> feature_names;
    // class_labels[1] is the positive class.
    std::array<std::string, 2> class_labels;

    // knn: z-scored training rows
    int k = 3;
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<std::vector<double>> train_z;
    std::vector<int> train_y;

    // naive bayes, indexed [class][feature]
    std::array<double, 2> prior{};
    std::array<std::vector<double>, 2> class_mean;
    std::array<std::vector<double>, 2> class_var;

    // tree, node 0 is the root
    int max_depth = 3;
    int min_leaf = 2;
    std::vector<TreeNode> nodes;
};

// "cancer" when present, otherwise the lexicographically last label.
std::array<std::string, 2> class_order(const FeatureTable& table);

// Throws DomainError unless the table is labeled with exactly two classes
// and every feature is finite.
ClassifierModel train(const FeatureTable& table, ModelKind kind, const Hyperparams& hp = {});
ClassifierModel train(const FeatureTable& table, ModelKind kind, const Hyperparams& hp,
                      const std::array<std::string, 2>& classes);

struct Prediction {
    int class_index = 0;
    std::string label;
    double score = 0.0;  // positive-class posterior or vote fraction
};

Prediction predict(const ClassifierModel& model, std::span<const double> row);
// Maps the table's columns onto the model's features by name.
std::vector<Prediction> predict(const ClassifierModel& model, const FeatureTable& table);

Json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const Json& j);

struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::array<std::array<std::size_t, 2>, 2> confusion{};  // [[TN, FP], [FN, TP]]
    std::string positive_label;
};

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                        const std::string& positive_label);
Json metrics_to_json(const Metrics& m);

struct CvPrediction {
    CurveKey key;
    std::string truth;
    Prediction predicted;
};

struct CvResult {
    Metrics metrics;
    std::vector<CvPrediction> predictions;  // table order
    std::vector<std::string> skipped_patients;
};

// Called once per fold with the held-out patient and the training rows; may
// run concurrently.
using FoldHook = std::function<void(const std::string& held_out, const FeatureTable& training)>;

// Leave-one-patient-out. Folds whose training rows miss a class are skipped.
CvResult cross_validate(const FeatureTable& table, ModelKind kind, const Hyperparams& hp = {},
                        const FoldHook& hook = {});
Json cv_to_json(const CvResult& r);

struct EliminationStep {
    std::string removed;
    std::vector<std::string> remaining;
    Metrics metrics;
};

struct EliminationResult {
    Metrics initial;
    std::vector<EliminationStep> steps;
    ClassifierModel final_model;
};

// Removes, one at a time, the feature whose removal gives the best
// leave-one-patient-out accuracy (ties remove the lowest index).
EliminationResult eliminate_features(const FeatureTable& table, ModelKind kind,
                                     const Hyperparams& hp = {}, std::size_t target = 2);
Json elimination_to_json(const EliminationResult& r);

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    int n = 50;

    double at(int i) const { return n == 1 ? lo : lo + (hi - lo) * i / (n - 1); }
};

struct BoundaryGrid {
    GridAxis x, y;
    std::vector<Prediction> nodes;  // y-major: nodes[j * x.n + i]
};

// Throws DomainError unless the model has exactly two features.
BoundaryGrid decision_boundary(const ClassifierModel& model, const GridAxis& x, const GridAxis& y);
// f1,f2,label,score
void save_boundary_csv(const std::filesystem::path& path, const BoundaryGrid& grid);
// One pixel per node with f2 increasing upward; table rows are drawn as dots.
RgbImage render_boundary(const BoundaryGrid& grid, const ClassifierModel& model,
                         const FeatureTable* points = nullptr);

}  // namespace icgkit
