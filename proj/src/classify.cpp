#include "icgkit/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "icgkit/common.hpp"
#include "icgkit/error.hpp"
#include "text_util.hpp"

namespace icgkit {

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::knn: return "knn";
        case ModelKind::naive_bayes: return "nb";
        case ModelKind::tree: return "tree";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view s) {
    if (s == "knn") return ModelKind::knn;
    if (s == "nb") return ModelKind::naive_bayes;
    if (s == "tree") return ModelKind::tree;
    throw ConfigError("unknown model kind '" + std::string(s) + "' (expected knn, nb or tree)");
}

Json hyperparams_to_json(const Hyperparams& h) {
    return Json{{"k", h.k}, {"max_depth", h.max_depth}, {"min_leaf", h.min_leaf}};
}

Hyperparams hyperparams_from_json(const Json& j) {
    reject_unknown_keys(j, {"k", "max_depth", "min_leaf"}, "hyperparameters");
    Hyperparams h;
    try {
        read_key(j, "k", h.k);
        read_key(j, "max_depth", h.max_depth);
        read_key(j, "min_leaf", h.min_leaf);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("hyperparameters: ") + e.what());
    }
    if (h.k < 1 || h.k % 2 == 0) throw ConfigError("k must be odd and at least 1");
    if (h.max_depth < 0) throw ConfigError("max_depth must be non-negative");
    if (h.min_leaf < 1) throw ConfigError("min_leaf must be at least 1");
    return h;
}

std::array<std::string, 2> class_order(const FeatureTable& table) {
    std::set<std::string> labels;
    for (const auto& r : table.rows) {
        if (!r.label) {
            throw DomainError("row " + r.key.patient_id + "/" + r.key.roi_id + " has no label");
        }
        labels.insert(*r.label);
    }
    if (labels.size() < 2) throw DomainError("training needs two classes, found " + std::to_string(labels.size()));
    if (labels.size() > 2) throw DomainError("only two-class problems are supported, found " + std::to_string(labels.size()));
    const std::string a = *labels.begin();
    const std::string b = *labels.rbegin();
    if (a == "cancer") return {b, a};
    return {a, b};
}

namespace {

struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
};

Dataset to_dataset(const FeatureTable& table, const std::array<std::string, 2>& classes) {
    Dataset d;
    for (const auto& r : table.rows) {
        if (!r.label) throw DomainError("row " + r.key.patient_id + "/" + r.key.roi_id + " has no label");
        int c = -1;
        if (*r.label == classes[0]) c = 0;
        if (*r.label == classes[1]) c = 1;
        if (c < 0) throw DomainError("row " + r.key.patient_id + "/" + r.key.roi_id + " has unknown label '" + *r.label + "'");
        for (std::size_t f = 0; f < r.values.size(); ++f) {
            if (!std::isfinite(r.values[f])) {
                throw DomainError("row " + r.key.patient_id + "/" + r.key.roi_id + ": feature '" +
                                  table.columns[f] + "' is not finite");
            }
        }
        d.x.push_back(r.values);
        d.y.push_back(c);
    }
    return d;
}

double column_mean(const Dataset& d, std::size_t f, int cls = -1) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        if (cls >= 0 && d.y[i] != cls) continue;
        s += d.x[i][f];
        ++n;
    }
    return s / static_cast<double>(n);
}

double column_var(const Dataset& d, std::size_t f, double mean, int cls = -1) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        if (cls >= 0 && d.y[i] != cls) continue;
        s += (d.x[i][f] - mean) * (d.x[i][f] - mean);
        ++n;
    }
    return s / static_cast<double>(n);
}

void train_knn(ClassifierModel& m, const Dataset& d, const Hyperparams& hp) {
    if (hp.k < 1 || hp.k % 2 == 0) throw ConfigError("k must be odd and at least 1");
    const std::size_t nf = m.feature_names.size();
    m.k = hp.k;
    m.mean.resize(nf);
    m.scale.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        m.mean[f] = column_mean(d, f);
        const double sd = std::sqrt(column_var(d, f, m.mean[f]));
        m.scale[f] = sd > 0.0 ? sd : 1.0;
    }
    for (const auto& row : d.x) {
        std::vector<double> z(nf);
        for (std::size_t f = 0; f < nf; ++f) z[f] = (row[f] - m.mean[f]) / m.scale[f];
        m.train_z.push_back(std::move(z));
    }
    m.train_y = d.y;
}

void train_nb(ClassifierModel& m, const Dataset& d) {
    const std::size_t nf = m.feature_names.size();
    const double n = static_cast<double>(d.y.size());
    for (int c = 0; c < 2; ++c) {
        const auto nc = std::count(d.y.begin(), d.y.end(), c);
        m.prior[c] = static_cast<double>(nc) / n;
        m.class_mean[c].resize(nf);
        m.class_var[c].resize(nf);
    }
    for (std::size_t f = 0; f < nf; ++f) {
        const double all_var = column_var(d, f, column_mean(d, f));
        const double floor = all_var > 0.0 ? 1e-9 * all_var : 1e-9;
        for (int c = 0; c < 2; ++c) {
            m.class_mean[c][f] = column_mean(d, f, c);
            m.class_var[c][f] = std::max(column_var(d, f, m.class_mean[c][f], c), floor);
        }
    }
}

double gini(std::size_t n0, std::size_t n1) {
    const double n = static_cast<double>(n0 + n1);
    if (n == 0.0) return 0.0;
    const double p0 = n0 / n;
    const double p1 = n1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

int grow(ClassifierModel& m, const Dataset& d, const std::vector<std::size_t>& idx, int depth) {
    TreeNode node;
    for (auto i : idx) ++node.counts[d.y[i]];
    const int id = static_cast<int>(m.nodes.size());
    m.nodes.push_back(node);
    const std::size_t n = idx.size();
    const double parent = gini(node.counts[0], node.counts[1]);
    if (depth >= m.max_depth || parent == 0.0 || n < 2 * static_cast<std::size_t>(m.min_leaf)) return id;

    constexpr double eps = 1e-12;
    double best = parent - eps;
    int best_f = -1;
    double best_t = 0.0;
    const std::size_t nf = m.feature_names.size();
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < nf; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.x[a][f] < d.x[b][f]; });
        std::array<std::size_t, 2> left{};
        for (std::size_t k = 0; k + 1 < n; ++k) {
            ++left[d.y[order[k]]];
            const double a = d.x[order[k]][f];
            const double b = d.x[order[k + 1]][f];
            if (!(a < b)) continue;
            const std::size_t nl = k + 1;
            const std::size_t nr = n - nl;
            if (nl < static_cast<std::size_t>(m.min_leaf) || nr < static_cast<std::size_t>(m.min_leaf)) continue;
            const double g = (nl * gini(left[0], left[1]) +
                              nr * gini(node.counts[0] - left[0], node.counts[1] - left[1])) /
                             static_cast<double>(n);
            if (g < best - eps) {
                best = g;
                best_f = static_cast<int>(f);
                best_t = (a + b) / 2.0;
                if (!(best_t < b)) best_t = a;
            }
        }
    }
    if (best_f < 0) return id;
    std::vector<std::size_t> li, ri;
    for (auto i : idx) (d.x[i][best_f] <= best_t ? li : ri).push_back(i);
    m.nodes[id].feature = best_f;
    m.nodes[id].threshold = best_t;
    const int l = grow(m, d, li, depth + 1);
    const int r = grow(m, d, ri, depth + 1);
    m.nodes[id].left = l;
    m.nodes[id].right = r;
    return id;
}

Prediction make_prediction(const ClassifierModel& m, int c, double score) {
    return {c, m.class_labels[c], score};
}

}  // namespace

ClassifierModel train(const FeatureTable& table, ModelKind kind, const Hyperparams& hp) {
    return train(table, kind, hp, class_order(table));
}

ClassifierModel train(const FeatureTable& table, ModelKind kind, const Hyperparams& hp,
                      const std::array<std::string, 2>& classes) {
    if (table.columns.empty()) throw DomainError("training needs at least one feature");
    const Dataset d = to_dataset(table, classes);
    for (int c = 0; c < 2; ++c) {
        if (std::find(d.y.begin(), d.y.end(), c) == d.y.end()) {
            throw DomainError("training rows contain no '" + classes[c] + "' examples");
        }
    }
    ClassifierModel m;
    m.kind = kind;
    m.feature_names = table.columns;
    m.class_labels = classes;
    switch (kind) {
        case ModelKind::knn:
            train_knn(m, d, hp);
            break;
        case ModelKind::naive_bayes:
            train_nb(m, d);
            break;
        case ModelKind::tree: {
            if (hp.max_depth < 0 || hp.min_leaf < 1) throw ConfigError("bad tree hyperparameters");
            m.max_depth = hp.max_depth;
            m.min_leaf = hp.min_leaf;
            std::vector<std::size_t> idx(d.y.size());
            std::iota(idx.begin(), idx.end(), 0);
            grow(m, d, idx, 0);
            break;
        }
    }
    return m;
}

Prediction predict(const ClassifierModel& m, std::span<const double> row) {
    const std::size_t nf = m.feature_names.size();
    if (row.size() != nf) {
        throw DomainError("feature row has " + std::to_string(row.size()) + " values, model expects " +
                          std::to_string(nf));
    }
    switch (m.kind) {
        case ModelKind::knn: {
            std::vector<std::pair<double, std::size_t>> dist;
            dist.reserve(m.train_z.size());
            for (std::size_t i = 0; i < m.train_z.size(); ++i) {
                double s = 0.0;
                for (std::size_t f = 0; f < nf; ++f) {
                    const double z = (row[f] - m.mean[f]) / m.scale[f];
                    s += (z - m.train_z[i][f]) * (z - m.train_z[i][f]);
                }
                dist.emplace_back(s, i);
            }
            // An even or oversized k falls back to the largest odd count available.
            std::size_t k = std::min<std::size_t>(m.k, dist.size());
            if (k % 2 == 0) --k;
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            std::size_t votes = 0;
            for (std::size_t i = 0; i < k; ++i) votes += m.train_y[dist[i].second];
            const double score = static_cast<double>(votes) / static_cast<double>(k);
            return make_prediction(m, 2 * votes > k ? 1 : 0, score);
        }
        case ModelKind::naive_bayes: {
            std::array<double, 2> lp{};
            for (int c = 0; c < 2; ++c) {
                lp[c] = std::log(m.prior[c]);
                for (std::size_t f = 0; f < nf; ++f) {
                    const double v = m.class_var[c][f];
                    const double r = row[f] - m.class_mean[c][f];
                    lp[c] -= 0.5 * (std::log(2.0 * std::numbers::pi * v) + r * r / v);
                }
            }
            const double score = 1.0 / (1.0 + std::exp(lp[0] - lp[1]));
            int c = lp[1] > lp[0] ? 1 : 0;
            if (lp[1] == lp[0]) c = m.prior[1] > m.prior[0] ? 1 : 0;
            return make_prediction(m, c, score);
        }
        case ModelKind::tree: {
            if (m.nodes.empty()) throw DomainError("decision tree has no nodes");
            int id = 0;
            while (m.nodes[id].feature >= 0) {
                const TreeNode& nd = m.nodes[id];
                id = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
            }
            const auto& c = m.nodes[id].counts;
            const double score = static_cast<double>(c[1]) / static_cast<double>(c[0] + c[1]);
            return make_prediction(m, c[1] > c[0] ? 1 : 0, score);
        }
    }
    throw DomainError("unknown model kind");
}

std::vector<Prediction> predict(const ClassifierModel& model, const FeatureTable& table) {
    std::vector<std::size_t> cols;
    for (const auto& name : model.feature_names) {
        auto it = std::find(table.columns.begin(), table.columns.end(), name);
        if (it == table.columns.end()) throw DomainError("feature table lacks model feature '" + name + "'");
        cols.push_back(static_cast<std::size_t>(it - table.columns.begin()));
    }
    std::vector<Prediction> out;
    std::vector<double> row(cols.size());
    for (const auto& r : table.rows) {
        for (std::size_t f = 0; f < cols.size(); ++f) {
            row[f] = r.values[cols[f]];
            if (!std::isfinite(row[f])) {
                throw DomainError("row " + r.key.patient_id + "/" + r.key.roi_id + ": feature '" +
                                  model.feature_names[f] + "' is not finite");
            }
        }
        out.push_back(predict(model, row));
    }
    return out;
}

Json model_to_json(const ClassifierModel& m) {
    Json j{{"kind", to_string(m.kind)},
           {"feature_names", m.feature_names},
           {"class_labels", m.class_labels}};
    switch (m.kind) {
        case ModelKind::knn:
            j["k"] = m.k;
            j["mean"] = m.mean;
            j["scale"] = m.scale;
            j["train_z"] = m.train_z;
            j["train_y"] = m.train_y;
            break;
        case ModelKind::naive_bayes:
            j["prior"] = m.prior;
            j["class_mean"] = m.class_mean;
            j["class_var"] = m.class_var;
            break;
        case ModelKind::tree: {
            j["max_depth"] = m.max_depth;
            j["min_leaf"] = m.min_leaf;
            Json nodes = Json::array();
            for (const auto& n : m.nodes) {
                nodes.push_back({{"feature", n.feature},
                                 {"threshold", n.threshold},
                                 {"counts", n.counts},
                                 {"left", n.left},
                                 {"right", n.right}});
            }
            j["nodes"] = nodes;
            break;
        }
    }
    return j;
}

ClassifierModel model_from_json(const Json& j) {
    ClassifierModel m;
    try {
        m.kind = parse_model_kind(j.at("kind").get<std::string>());
        switch (m.kind) {
            case ModelKind::knn:
                reject_unknown_keys(j, {"kind", "feature_names", "class_labels", "k", "mean", "scale",
                                        "train_z", "train_y"}, "knn model");
                break;
            case ModelKind::naive_bayes:
                reject_unknown_keys(j, {"kind", "feature_names", "class_labels", "prior", "class_mean",
                                        "class_var"}, "naive Bayes model");
                break;
            case ModelKind::tree:
                reject_unknown_keys(j, {"kind", "feature_names", "class_labels", "max_depth", "min_leaf",
                                        "nodes"}, "tree model");
                break;
        }
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.class_labels = j.at("class_labels").get<std::array<std::string, 2>>();
        const std::size_t nf = m.feature_names.size();
        auto need = [&](bool ok, const std::string& what) {
            if (!ok) throw FormatError("classifier model: " + what);
        };
        switch (m.kind) {
            case ModelKind::knn:
                m.k = j.at("k").get<int>();
                m.mean = j.at("mean").get<std::vector<double>>();
                m.scale = j.at("scale").get<std::vector<double>>();
                m.train_z = j.at("train_z").get<std::vector<std::vector<double>>>();
                m.train_y = j.at("train_y").get<std::vector<int>>();
                need(m.k >= 1 && m.k % 2 == 1, "k must be odd");
                need(m.mean.size() == nf && m.scale.size() == nf, "mean/scale size");
                need(!m.train_z.empty() && m.train_z.size() == m.train_y.size(), "training rows");
                for (const auto& z : m.train_z) need(z.size() == nf, "training row size");
                for (int y : m.train_y) need(y == 0 || y == 1, "training labels");
                for (double s : m.scale) need(s > 0, "scale must be positive");
                break;
            case ModelKind::naive_bayes:
                m.prior = j.at("prior").get<std::array<double, 2>>();
                m.class_mean = j.at("class_mean").get<std::array<std::vector<double>, 2>>();
                m.class_var = j.at("class_var").get<std::array<std::vector<double>, 2>>();
                for (int c = 0; c < 2; ++c) {
                    need(m.prior[c] > 0, "priors must be positive");
                    need(m.class_mean[c].size() == nf && m.class_var[c].size() == nf, "moment sizes");
                    for (double v : m.class_var[c]) need(v > 0, "variances must be positive");
                }
                break;
            case ModelKind::tree:
                m.max_depth = j.at("max_depth").get<int>();
                m.min_leaf = j.at("min_leaf").get<int>();
                for (const auto& n : j.at("nodes")) {
                    reject_unknown_keys(n, {"feature", "threshold", "counts", "left", "right"}, "tree node");
                    TreeNode t;
                    t.feature = n.at("feature").get<int>();
                    t.threshold = n.at("threshold").get<double>();
                    t.counts = n.at("counts").get<std::array<std::size_t, 2>>();
                    t.left = n.at("left").get<int>();
                    t.right = n.at("right").get<int>();
                    m.nodes.push_back(t);
                }
                need(!m.nodes.empty(), "tree has no nodes");
                for (std::size_t i = 0; i < m.nodes.size(); ++i) {
                    const auto& t = m.nodes[i];
                    if (t.feature < 0) {
                        need(t.counts[0] + t.counts[1] > 0, "empty leaf");
                        continue;
                    }
                    const int n = static_cast<int>(m.nodes.size());
                    need(t.feature < static_cast<int>(nf) && std::isfinite(t.threshold), "bad split");
                    need(t.left > static_cast<int>(i) && t.left < n && t.right > static_cast<int>(i) && t.right < n,
                         "bad child links");
                }
                break;
        }
    } catch (const Json::exception& e) {
        throw FormatError(std::string("classifier model: ") + e.what());
    }
    return m;
}

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                        const std::string& positive_label) {
    if (truth.size() != predicted.size()) throw DomainError("truth and prediction counts differ");
    Metrics m;
    m.positive_label = positive_label;
    for (std::size_t i = 0; i < truth.size(); ++i) ++m.confusion[truth[i]][predicted[i]];
    const auto tn = m.confusion[0][0], fp = m.confusion[0][1];
    const auto fn = m.confusion[1][0], tp = m.confusion[1][1];
    auto ratio = [](std::size_t a, std::size_t b) -> std::optional<double> {
        if (b == 0) return std::nullopt;
        return static_cast<double>(a) / static_cast<double>(b);
    };
    m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    return m;
}

Json metrics_to_json(const Metrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); };
    return Json{{"accuracy", opt(m.accuracy)},
                {"sensitivity", opt(m.sensitivity)},
                {"specificity", opt(m.specificity)},
                {"confusion", {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}},
                {"positive_label", m.positive_label}};
}

CvResult cross_validate(const FeatureTable& table, ModelKind kind, const Hyperparams& hp,
                        const FoldHook& hook) {
    const auto classes = class_order(table);
    std::set<std::string> patient_set;
    for (const auto& r : table.rows) patient_set.insert(r.key.patient_id);
    const std::vector<std::string> patients(patient_set.begin(), patient_set.end());
    if (patients.size() < 2) throw DomainError("leave-one-patient-out needs at least two patients");

    std::vector<std::optional<std::vector<std::pair<std::size_t, Prediction>>>> folds(patients.size());
    parallel_for(patients.size(), [&](std::size_t p) {
        FeatureTable train_t, test_t;
        train_t.columns = test_t.columns = table.columns;
        std::vector<std::size_t> test_idx;
        std::array<bool, 2> seen{};
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const auto& r = table.rows[i];
            if (r.key.patient_id == patients[p]) {
                test_t.rows.push_back(r);
                test_idx.push_back(i);
            } else {
                train_t.rows.push_back(r);
                seen[*r.label == classes[1]] = true;
            }
        }
        if (!seen[0] || !seen[1]) return;
        if (hook) hook(patients[p], train_t);
        const ClassifierModel model = train(train_t, kind, hp, classes);
        const auto preds = predict(model, test_t);
        std::vector<std::pair<std::size_t, Prediction>> out;
        for (std::size_t k = 0; k < preds.size(); ++k) out.emplace_back(test_idx[k], preds[k]);
        folds[p] = std::move(out);
    });

    CvResult res;
    std::vector<std::optional<Prediction>> by_row(table.rows.size());
    for (std::size_t p = 0; p < patients.size(); ++p) {
        if (!folds[p]) {
            res.skipped_patients.push_back(patients[p]);
            continue;
        }
        for (auto& [i, pred] : *folds[p]) by_row[i] = pred;
    }
    if (res.skipped_patients.size() == patients.size()) {
        throw DomainError("every cross-validation fold lacks a class in its training rows");
    }
    std::vector<int> truth, predicted;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (!by_row[i]) continue;
        const auto& r = table.rows[i];
        res.predictions.push_back({r.key, *r.label, *by_row[i]});
        truth.push_back(*r.label == classes[1] ? 1 : 0);
        predicted.push_back(by_row[i]->class_index);
    }
    res.metrics = compute_metrics(truth, predicted, classes[1]);
    return res;
}

Json cv_to_json(const CvResult& r) {
    Json j = metrics_to_json(r.metrics);
    Json preds = Json::array();
    for (const auto& p : r.predictions) {
        preds.push_back({{"patient_id", p.key.patient_id},
                         {"roi_id", p.key.roi_id},
                         {"truth", p.truth},
                         {"predicted", p.predicted.label},
                         {"score", json_number(p.predicted.score)}});
    }
    j["predictions"] = preds;
    j["skipped_patients"] = r.skipped_patients;
    return j;
}

EliminationResult eliminate_features(const FeatureTable& table, ModelKind kind, const Hyperparams& hp,
                                     std::size_t target) {
    if (target < 1) throw ConfigError("elimination target must be at least 1");
    if (table.columns.size() < target) {
        throw DomainError("table has " + std::to_string(table.columns.size()) + " features, fewer than the target " +
                          std::to_string(target));
    }
    EliminationResult res;
    std::vector<std::string> current = table.columns;
    res.initial = cross_validate(table, kind, hp).metrics;
    while (current.size() > target) {
        std::optional<std::size_t> best;
        Metrics best_m;
        for (std::size_t i = 0; i < current.size(); ++i) {
            std::vector<std::string> keep = current;
            keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(i));
            const Metrics m = cross_validate(table.select(keep), kind, hp).metrics;
            const double acc = m.accuracy.value_or(-1.0);
            if (!best || acc > best_m.accuracy.value_or(-1.0)) {
                best = i;
                best_m = m;
            }
        }
        EliminationStep step;
        step.removed = current[*best];
        current.erase(current.begin() + static_cast<std::ptrdiff_t>(*best));
        step.remaining = current;
        step.metrics = best_m;
        res.steps.push_back(std::move(step));
    }
    res.final_model = train(table.select(current), kind, hp);
    return res;
}

Json elimination_to_json(const EliminationResult& r) {
    Json steps = Json::array();
    for (const auto& s : r.steps) {
        steps.push_back({{"removed", s.removed}, {"remaining", s.remaining}, {"metrics", metrics_to_json(s.metrics)}});
    }
    return Json{{"initial", metrics_to_json(r.initial)},
                {"steps", steps},
                {"final_features", r.final_model.feature_names},
                {"final_model", model_to_json(r.final_model)}};
}

BoundaryGrid decision_boundary(const ClassifierModel& model, const GridAxis& x, const GridAxis& y) {
    if (model.feature_names.size() != 2) {
        throw DomainError("decision boundary needs a 2-feature model, this one has " +
                          std::to_string(model.feature_names.size()));
    }
    if (x.n < 1 || y.n < 1) throw ConfigError("grid axes need at least one node");
    if (!std::isfinite(x.lo) || !std::isfinite(x.hi) || !std::isfinite(y.lo) || !std::isfinite(y.hi)) {
        throw ConfigError("grid bounds must be finite");
    }
    BoundaryGrid g{x, y, std::vector<Prediction>(static_cast<std::size_t>(x.n) * y.n)};
    parallel_for(static_cast<std::size_t>(y.n), [&](std::size_t j) {
        for (int i = 0; i < x.n; ++i) {
            const double row[2] = {x.at(i), y.at(static_cast<int>(j))};
            g.nodes[j * x.n + i] = predict(model, row);
        }
    });
    return g;
}

void save_boundary_csv(const std::filesystem::path& path, const BoundaryGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write boundary file '" + path.string() + "'");
    out << "f1,f2,label,score\n";
    for (int j = 0; j < grid.y.n; ++j) {
        for (int i = 0; i < grid.x.n; ++i) {
            const auto& p = grid.nodes[static_cast<std::size_t>(j) * grid.x.n + i];
            out << format_sig9(grid.x.at(i)) << ',' << format_sig9(grid.y.at(j)) << ',' << p.label << ','
                << format_sig9(p.score) << '\n';
        }
    }
}

RgbImage render_boundary(const BoundaryGrid& grid, const ClassifierModel& model, const FeatureTable* points) {
    static constexpr std::array<std::array<std::uint8_t, 3>, 2> region{{{158, 202, 225}, {252, 174, 145}}};
    static constexpr std::array<std::array<std::uint8_t, 3>, 2> dot{{{8, 81, 156}, {203, 24, 29}}};
    RgbImage img(grid.x.n, grid.y.n);
    for (int j = 0; j < grid.y.n; ++j) {
        for (int i = 0; i < grid.x.n; ++i) {
            const auto& c = region[grid.nodes[static_cast<std::size_t>(j) * grid.x.n + i].class_index];
            std::copy(c.begin(), c.end(), img.px(i, grid.y.n - 1 - j));
        }
    }
    if (!points) return img;
    const std::size_t f1 = points->column_index(model.feature_names[0]);
    const std::size_t f2 = points->column_index(model.feature_names[1]);
    auto to_px = [](double v, const GridAxis& a) {
        if (a.n == 1 || a.hi == a.lo) return 0L;
        return std::lround((v - a.lo) / (a.hi - a.lo) * (a.n - 1));
    };
    for (const auto& r : points->rows) {
        if (!r.label) continue;
        const int c = *r.label == model.class_labels[1] ? 1 : 0;
        const long cx = to_px(r.values[f1], grid.x);
        const long cy = grid.y.n - 1 - to_px(r.values[f2], grid.y);
        for (long dy = -1; dy <= 1; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) {
                const long x = cx + dx, y = cy + dy;
                if (x < 0 || y < 0 || x >= grid.x.n || y >= grid.y.n) continue;
                std::copy(dot[c].begin(), dot[c].end(), img.px(static_cast<int>(x), static_cast<int>(y)));
            }
        }
    }
    return img;
}

}  // namespace icgkit
