#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "icgkit/classify.hpp"
#include "icgkit/error.hpp"
#include "image_fixtures.hpp"

using namespace icgkit;

namespace {

FeatureRow row(std::string patient, std::string roi, std::vector<double> v, std::string label) {
    return {{std::move(patient), std::move(roi)}, std::move(v), std::move(label)};
}

// Two Gaussian blobs; the first `informative` columns shift by `sep` for
// cancer rows, the rest are pure noise.
FeatureTable blobs(int n_per_class, int n_features, int informative, double sep, std::uint64_t seed,
                   int n_patients = 10) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    FeatureTable t;
    for (int f = 0; f < n_features; ++f) t.columns.push_back("f" + std::to_string(f));
    int id = 0;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++id) {
            std::vector<double> v;
            for (int f = 0; f < n_features; ++f) v.push_back(g(rng) + (c && f < informative ? sep : 0.0));
            t.rows.push_back(row("P" + std::to_string(id % n_patients), "R" + std::to_string(id), v,
                                 c ? "cancer" : "benign"));
        }
    }
    return t;
}

int oracle_knn(const FeatureTable& train, const std::vector<double>& x, int k) {
    const std::size_t nf = train.columns.size();
    const double n = static_cast<double>(train.rows.size());
    std::vector<double> mean(nf, 0.0), sd(nf, 0.0);
    for (const auto& r : train.rows) {
        for (std::size_t f = 0; f < nf; ++f) mean[f] += r.values[f] / n;
    }
    for (const auto& r : train.rows) {
        for (std::size_t f = 0; f < nf; ++f) sd[f] += (r.values[f] - mean[f]) * (r.values[f] - mean[f]) / n;
    }
    for (auto& s : sd) s = std::sqrt(s);
    std::vector<std::pair<double, int>> d;
    for (const auto& r : train.rows) {
        double s = 0.0;
        for (std::size_t f = 0; f < nf; ++f) s += std::pow((x[f] - r.values[f]) / sd[f], 2);
        d.emplace_back(s, *r.label == "cancer");
    }
    std::stable_sort(d.begin(), d.end(), [](auto& a, auto& b) { return a.first < b.first; });
    int votes = 0;
    for (int i = 0; i < k; ++i) votes += d[i].second;
    return 2 * votes > k;
}

int oracle_nb(const FeatureTable& train, const std::vector<double>& x) {
    double best = -1.0;
    int arg = 0;
    for (int c = 0; c < 2; ++c) {
        std::vector<const FeatureRow*> rows;
        for (const auto& r : train.rows) {
            if ((*r.label == "cancer") == (c == 1)) rows.push_back(&r);
        }
        double density = static_cast<double>(rows.size()) / static_cast<double>(train.rows.size());
        for (std::size_t f = 0; f < train.columns.size(); ++f) {
            double m = 0.0, v = 0.0;
            for (auto* r : rows) m += r->values[f];
            m /= static_cast<double>(rows.size());
            for (auto* r : rows) v += (r->values[f] - m) * (r->values[f] - m);
            v /= static_cast<double>(rows.size());
            density *= std::exp(-(x[f] - m) * (x[f] - m) / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
        }
        if (density > best) {
            best = density;
            arg = c;
        }
    }
    return arg;
}

struct Stump {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

// Exhaustive scan of every midpoint of every feature.
Stump oracle_stump(const FeatureTable& t, std::size_t min_leaf) {
    Stump best;
    best.impurity = 1e300;
    auto g = [](double a, double b) {
        const double n = a + b;
        return n == 0 ? 0.0 : 1.0 - (a / n) * (a / n) - (b / n) * (b / n);
    };
    for (std::size_t f = 0; f < t.columns.size(); ++f) {
        std::set<double> vals;
        for (const auto& r : t.rows) vals.insert(r.values[f]);
        for (auto it = vals.begin(); std::next(it) != vals.end(); ++it) {
            const double thr = (*it + *std::next(it)) / 2.0;
            double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
            for (const auto& r : t.rows) {
                const bool pos = *r.label == "cancer";
                if (r.values[f] <= thr) (pos ? l1 : l0) += 1;
                else (pos ? r1 : r0) += 1;
            }
            if (l0 + l1 < min_leaf || r0 + r1 < min_leaf) continue;
            const double imp = ((l0 + l1) * g(l0, l1) + (r0 + r1) * g(r0, r1)) / t.rows.size();
            if (imp < best.impurity - 1e-12) best = {static_cast<int>(f), thr, imp};
        }
    }
    return best;
}

std::vector<int> labels_of(const std::vector<Prediction>& p) {
    std::vector<int> out;
    for (const auto& x : p) out.push_back(x.class_index);
    return out;
}

}  // namespace

TEST_CASE("class order puts cancer last") {
    FeatureTable t{{"a"}, {row("P1", "R1", {0}, "cancer"), row("P1", "R2", {1}, "benign")}};
    CHECK(class_order(t) == std::array<std::string, 2>{"benign", "cancer"});
    FeatureTable u{{"a"}, {row("P1", "R1", {0}, "cancer"), row("P1", "R2", {1}, "zebra")}};
    CHECK(class_order(u) == std::array<std::string, 2>{"zebra", "cancer"});
    FeatureTable v{{"a"}, {row("P1", "R1", {0}, "x"), row("P1", "R2", {1}, "y")}};
    CHECK(class_order(v) == std::array<std::string, 2>{"x", "y"});
}

TEST_CASE("training input checks") {
    FeatureTable one{{"a"}, {row("P1", "R1", {0}, "benign"), row("P1", "R2", {1}, "benign")}};
    CHECK_THROWS_AS(train(one, ModelKind::knn), DomainError);
    FeatureTable nan{{"a"}, {row("P1", "R1", {std::nan("")}, "benign"), row("P1", "R2", {1}, "cancer")}};
    CHECK_THROWS_AS(train(nan, ModelKind::naive_bayes), DomainError);
    FeatureTable three{{"a"},
                       {row("P1", "R1", {0}, "a"), row("P1", "R2", {1}, "b"), row("P1", "R3", {2}, "c")}};
    CHECK_THROWS_AS(train(three, ModelKind::tree), DomainError);
    FeatureTable ok{{"a"}, {row("P1", "R1", {0}, "benign"), row("P1", "R2", {1}, "cancer")}};
    Hyperparams even;
    even.k = 2;
    CHECK_THROWS_AS(train(ok, ModelKind::knn, even), ConfigError);
    CHECK_THROWS_AS(parse_model_kind("svm"), ConfigError);
}

TEST_CASE("1-NN memorizes two points") {
    FeatureTable t{{"a", "b"}, {row("P1", "R1", {0, 0}, "benign"), row("P2", "R2", {1, 3}, "cancer")}};
    Hyperparams hp;
    hp.k = 1;
    const auto m = train(t, ModelKind::knn, hp);
    CHECK(predict(m, std::vector<double>{0, 0}).label == "benign");
    CHECK(predict(m, std::vector<double>{1, 3}).label == "cancer");
    CHECK(predict(m, std::vector<double>{1, 3}).score == 1.0);
}

TEST_CASE("naive Bayes symmetric classes split at zero") {
    FeatureTable t{{"a"},
                   {row("P1", "R1", {-2}, "benign"), row("P1", "R2", {0}, "benign"),
                    row("P2", "R3", {0}, "cancer"), row("P2", "R4", {2}, "cancer")}};
    const auto m = train(t, ModelKind::naive_bayes);
    CHECK(m.class_mean[0][0] == -1.0);
    CHECK(m.class_mean[1][0] == 1.0);
    CHECK(predict(m, std::vector<double>{-1e-6}).class_index == 0);
    CHECK(predict(m, std::vector<double>{1e-6}).class_index == 1);
    CHECK(predict(m, std::vector<double>{0.0}).score == doctest::Approx(0.5));
}

TEST_CASE("naive Bayes tie goes to the higher prior") {
    FeatureTable t{{"a"},
                   {row("P1", "R1", {-1}, "benign"), row("P1", "R2", {1}, "benign"),
                    row("P2", "R3", {-1}, "cancer"), row("P2", "R4", {1}, "cancer"),
                    row("P2", "R5", {-1}, "cancer"), row("P2", "R6", {1}, "cancer")}};
    const auto m = train(t, ModelKind::naive_bayes);
    CHECK(predict(m, std::vector<double>{0.3}).label == "cancer");
    CHECK(predict(m, std::vector<double>{0.3}).score == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("naive Bayes variance floor") {
    FeatureTable t{{"a", "b"},
                   {row("P1", "R1", {1, 0}, "benign"), row("P1", "R2", {1, 1}, "benign"),
                    row("P2", "R3", {3, 5}, "cancer"), row("P2", "R4", {3, 6}, "cancer")}};
    const auto m = train(t, ModelKind::naive_bayes);
    CHECK(m.class_var[0][0] == doctest::Approx(1e-9 * 1.0));
    CHECK(m.class_var[0][1] == doctest::Approx(0.25));
    CHECK(predict(m, std::vector<double>{1, 0.5}).label == "benign");
}

TEST_CASE("decision tree root split matches an exhaustive search") {
    FeatureTable t{{"a"},
                   {row("P1", "R1", {0.1}, "benign"), row("P1", "R2", {0.3}, "benign"),
                    row("P2", "R3", {0.45}, "benign"), row("P2", "R4", {0.7}, "cancer"),
                    row("P3", "R5", {0.9}, "cancer"), row("P3", "R6", {1.2}, "cancer")}};
    const auto m = train(t, ModelKind::tree);
    REQUIRE(m.nodes.size() == 3);
    CHECK(m.nodes[0].feature == 0);
    CHECK(m.nodes[0].threshold == (0.45 + 0.7) / 2.0);
    const Stump s = oracle_stump(t, 2);
    CHECK(s.threshold == m.nodes[0].threshold);
    CHECK(m.nodes[1].feature == -1);
    CHECK(m.nodes[1].counts == std::array<std::size_t, 2>{3, 0});
}

TEST_CASE("decision tree stumps agree with the oracle on random tables") {
    Hyperparams hp;
    hp.max_depth = 1;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FeatureTable t = blobs(15, 4, 2, 1.0, seed);
        const auto m = train(t, ModelKind::tree, hp);
        const Stump s = oracle_stump(t, 2);
        CAPTURE(seed);
        REQUIRE(m.nodes.size() == 3);
        CHECK(m.nodes[0].feature == s.feature);
        CHECK(m.nodes[0].threshold == s.threshold);
    }
}

TEST_CASE("tree respects depth and leaf size") {
    const FeatureTable t = blobs(30, 3, 3, 0.8, 5);
    Hyperparams hp;
    for (int depth = 0; depth <= 4; ++depth) {
        hp.max_depth = depth;
        const auto m = train(t, ModelKind::tree, hp);
        std::function<int(int)> height = [&](int id) -> int {
            const auto& n = m.nodes[id];
            if (n.feature < 0) {
                CHECK(n.counts[0] + n.counts[1] >= 2);
                return 0;
            }
            CHECK(n.counts[0] + n.counts[1] == m.nodes[n.left].counts[0] + m.nodes[n.left].counts[1] +
                                                   m.nodes[n.right].counts[0] + m.nodes[n.right].counts[1]);
            return 1 + std::max(height(n.left), height(n.right));
        };
        CHECK(height(0) <= depth);
    }
}

TEST_CASE("predictions agree with re-implemented oracles on random rows") {
    const FeatureTable t = blobs(25, 3, 2, 1.5, 11);
    const auto knn = train(t, ModelKind::knn);
    const auto nb = train(t, ModelKind::naive_bayes);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-3.0, 4.5);
    int knn_diff = 0, nb_diff = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> x{u(rng), u(rng), u(rng)};
        knn_diff += predict(knn, x).class_index != oracle_knn(t, x, 3);
        nb_diff += predict(nb, x).class_index != oracle_nb(t, x);
    }
    CHECK(knn_diff == 0);
    CHECK(nb_diff == 0);
}

TEST_CASE("kNN is invariant to positive column scaling") {
    const FeatureTable t = blobs(20, 3, 2, 1.2, 3);
    FeatureTable s = t;
    const double factors[] = {1000.0, 0.001, 7.5};
    for (auto& r : s.rows) {
        for (int f = 0; f < 3; ++f) r.values[f] *= factors[f];
    }
    const auto a = train(t, ModelKind::knn);
    const auto b = train(s, ModelKind::knn);
    const FeatureTable probe = blobs(50, 3, 2, 1.2, 4);
    FeatureTable probe_s = probe;
    for (auto& r : probe_s.rows) {
        for (int f = 0; f < 3; ++f) r.values[f] *= factors[f];
    }
    CHECK(labels_of(predict(a, probe)) == labels_of(predict(b, probe_s)));
}

TEST_CASE("tree is invariant to increasing transforms") {
    const FeatureTable t = blobs(20, 2, 2, 1.0, 8);
    FeatureTable s = t;
    for (auto& r : s.rows) {
        r.values[0] = std::exp(r.values[0]);
        r.values[1] = std::pow(r.values[1] + 10.0, 3);
    }
    const auto a = train(t, ModelKind::tree);
    const auto b = train(s, ModelKind::tree);
    CHECK(labels_of(predict(a, t)) == labels_of(predict(b, s)));
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) CHECK(a.nodes[i].feature == b.nodes[i].feature);
}

TEST_CASE("predict maps columns by name") {
    const FeatureTable t = blobs(10, 2, 2, 2.0, 1);
    const auto m = train(t, ModelKind::naive_bayes);
    FeatureTable swapped{{"f1", "f0"}, {}};
    for (const auto& r : t.rows) swapped.rows.push_back(row(r.key.patient_id, r.key.roi_id, {r.values[1], r.values[0]}, *r.label));
    CHECK(labels_of(predict(m, swapped)) == labels_of(predict(m, t)));
    FeatureTable missing{{"f0"}, {row("P", "R", {1.0}, "benign")}};
    CHECK_THROWS_AS(predict(m, missing), DomainError);
    CHECK_THROWS_AS(predict(m, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("model JSON round trip preserves predictions") {
    const FeatureTable t = blobs(20, 3, 2, 1.0, 21);
    const FeatureTable probe = blobs(40, 3, 2, 1.0, 22);
    for (auto kind : {ModelKind::knn, ModelKind::naive_bayes, ModelKind::tree}) {
        CAPTURE(to_string(kind));
        const auto m = train(t, kind);
        const Json j = model_to_json(m);
        const auto back = model_from_json(Json::parse(j.dump()));
        CHECK(model_to_json(back) == j);
        const auto p1 = predict(m, probe);
        const auto p2 = predict(back, probe);
        for (std::size_t i = 0; i < p1.size(); ++i) {
            CHECK(p1[i].class_index == p2[i].class_index);
            CHECK(p1[i].score == p2[i].score);
        }
        Json bad = j;
        bad["extra"] = 1;
        CHECK_THROWS_AS(model_from_json(bad), ConfigError);
    }
    Json broken = model_to_json(train(t, ModelKind::tree));
    broken["nodes"][0]["left"] = 0;
    CHECK_THROWS_AS(model_from_json(broken), FormatError);
}

TEST_CASE("metrics with undefined denominators") {
    const std::vector<int> truth{1, 1, 0, 0, 0};
    const std::vector<int> pred{1, 0, 0, 1, 0};
    const Metrics m = compute_metrics(truth, pred, "cancer");
    CHECK(*m.accuracy == doctest::Approx(3.0 / 5.0));
    CHECK(*m.sensitivity == doctest::Approx(0.5));
    CHECK(*m.specificity == doctest::Approx(2.0 / 3.0));
    CHECK(m.confusion[0] == std::array<std::size_t, 2>{2, 1});
    CHECK(m.confusion[1] == std::array<std::size_t, 2>{1, 1});
    const Metrics neg = compute_metrics(std::vector<int>{0, 0}, std::vector<int>{0, 1}, "cancer");
    CHECK_FALSE(neg.sensitivity.has_value());
    CHECK(*neg.specificity == 0.5);
    const Json j = metrics_to_json(neg);
    CHECK(j.at("sensitivity").is_null());
    CHECK(j.at("confusion") == Json::parse("[[1,1],[0,0]]"));
    CHECK(j.at("positive_label") == "cancer");
    const Metrics empty = compute_metrics(std::vector<int>{}, std::vector<int>{}, "cancer");
    CHECK_FALSE(empty.accuracy.has_value());
}

TEST_CASE("separable corpus cross-validates perfectly") {
    const FeatureTable t = blobs(20, 2, 2, 20.0, 6);
    for (auto kind : {ModelKind::knn, ModelKind::naive_bayes, ModelKind::tree}) {
        const CvResult r = cross_validate(t, kind);
        CHECK(*r.metrics.accuracy == 1.0);
        CHECK(r.predictions.size() == t.rows.size());
        CHECK(r.skipped_patients.empty());
    }
}

TEST_CASE("cross-validation never trains on the held-out patient") {
    const FeatureTable t = blobs(20, 3, 2, 1.0, 7);
    std::mutex mu;
    std::set<std::string> seen;
    const CvResult r = cross_validate(t, ModelKind::knn, {}, [&](const std::string& held, const FeatureTable& train_t) {
        std::lock_guard lock(mu);
        seen.insert(held);
        for (const auto& row : train_t.rows) CHECK(row.key.patient_id != held);
        std::size_t expected = 0;
        for (const auto& row : t.rows) expected += row.key.patient_id != held;
        CHECK(train_t.rows.size() == expected);
    });
    CHECK(seen.size() == 10);
}

TEST_CASE("matches a manual leave-one-patient-out loop") {
    const FeatureTable t = blobs(15, 2, 2, 1.0, 17, 6);
    const CvResult r = cross_validate(t, ModelKind::naive_bayes);
    std::size_t i = 0;
    for (const auto& p : r.predictions) {
        FeatureTable train_t{t.columns, {}};
        for (const auto& row : t.rows) {
            if (row.key.patient_id != p.key.patient_id) train_t.rows.push_back(row);
        }
        const auto m = train(train_t, ModelKind::naive_bayes);
        CHECK(p.key == t.rows[i].key);
        CHECK(predict(m, t.rows[i].values).class_index == p.predicted.class_index);
        ++i;
    }
}

TEST_CASE("shuffled labels give chance accuracy") {
    FeatureTable t = blobs(40, 3, 3, 3.0, 31, 20);
    std::vector<std::string> labels;
    for (const auto& r : t.rows) labels.push_back(*r.label);
    std::mt19937_64 rng(5);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < labels.size(); ++i) t.rows[i].label = labels[i];
    for (auto kind : {ModelKind::knn, ModelKind::naive_bayes, ModelKind::tree}) {
        const double acc = *cross_validate(t, kind).metrics.accuracy;
        CAPTURE(to_string(kind));
        // 80 predictions: 0.5 +- 4 binomial standard deviations
        CHECK(acc > 0.5 - 4 * std::sqrt(0.25 / 80));
        CHECK(acc < 0.5 + 4 * std::sqrt(0.25 / 80));
    }
}

TEST_CASE("degenerate folds are skipped or fatal") {
    FeatureTable t{{"a"},
                   {row("P1", "R1", {0}, "benign"), row("P2", "R2", {5}, "cancer"),
                    row("P2", "R3", {4.5}, "cancer"), row("P3", "R4", {0.5}, "benign")}};
    Hyperparams hp;
    hp.k = 1;
    const CvResult r = cross_validate(t, ModelKind::knn, hp);
    CHECK(r.skipped_patients == std::vector<std::string>{"P2"});
    CHECK(r.predictions.size() == 2);
    CHECK(r.metrics.confusion[0][0] == 2);
    CHECK(r.metrics.confusion[0][1] == 0);
    FeatureTable bad{{"a"}, {row("P1", "R1", {0}, "benign"), row("P2", "R2", {5}, "cancer")}};
    CHECK_THROWS_AS(cross_validate(bad, ModelKind::knn, hp), DomainError);
    FeatureTable single{{"a"}, {row("P1", "R1", {0}, "benign"), row("P1", "R2", {5}, "cancer")}};
    CHECK_THROWS_AS(cross_validate(single, ModelKind::knn, hp), DomainError);
}

TEST_CASE("elimination removes the noise feature first") {
    FeatureTable t = blobs(30, 3, 3, 2.0, 41, 10);
    // column 1 becomes pure noise
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& r : t.rows) r.values[1] = g(rng);
    const EliminationResult e = eliminate_features(t, ModelKind::knn);
    REQUIRE(e.steps.size() == 1);
    CHECK(e.steps[0].removed == "f1");
    CHECK(e.steps[0].remaining == std::vector<std::string>{"f0", "f2"});
    CHECK(e.final_model.feature_names == std::vector<std::string>{"f0", "f2"});

    // the chosen removal maximizes accuracy among all candidates
    double best = -1.0;
    for (const auto& keep : std::vector<std::vector<std::string>>{{"f1", "f2"}, {"f0", "f2"}, {"f0", "f1"}}) {
        best = std::max(best, *cross_validate(t.select(keep), ModelKind::knn).metrics.accuracy);
    }
    CHECK(*e.steps[0].metrics.accuracy == best);
}

TEST_CASE("elimination path is deterministic and stops at two") {
    const FeatureTable t = blobs(20, 6, 3, 1.0, 51);
    const EliminationResult a = eliminate_features(t, ModelKind::tree);
    const EliminationResult b = eliminate_features(t, ModelKind::tree);
    CHECK(a.steps.size() == 4);
    CHECK(a.final_model.feature_names.size() == 2);
    CHECK(elimination_to_json(a) == elimination_to_json(b));
    const EliminationResult two = eliminate_features(t.select(std::vector<std::string>{"f0", "f3"}), ModelKind::naive_bayes);
    CHECK(two.steps.empty());
    CHECK_THROWS_AS(eliminate_features(t.select(std::vector<std::string>{"f0"}), ModelKind::knn), DomainError);
}

TEST_CASE("elimination ties remove the lowest index") {
    // duplicated columns tie exactly
    FeatureTable t = blobs(20, 1, 1, 3.0, 61);
    t.columns = {"a", "b", "c"};
    for (auto& r : t.rows) r.values = {r.values[0], r.values[0], r.values[0]};
    const EliminationResult e = eliminate_features(t, ModelKind::naive_bayes);
    REQUIRE(e.steps.size() == 1);
    CHECK(e.steps[0].removed == "a");
}

TEST_CASE("boundary grid equals pointwise predictions") {
    const FeatureTable t = blobs(20, 2, 2, 1.5, 71);
    for (auto kind : {ModelKind::knn, ModelKind::naive_bayes, ModelKind::tree}) {
        const auto m = train(t, kind);
        const GridAxis x{-3, 4, 23}, y{-2.5, 3.5, 17};
        const BoundaryGrid g = decision_boundary(m, x, y);
        REQUIRE(g.nodes.size() == 23u * 17u);
        for (int j = 0; j < y.n; ++j) {
            for (int i = 0; i < x.n; ++i) {
                const Prediction p = predict(m, std::vector<double>{x.at(i), y.at(j)});
                CHECK(g.nodes[j * x.n + i].class_index == p.class_index);
                CHECK(g.nodes[j * x.n + i].score == p.score);
            }
        }
    }
    const auto three = train(blobs(10, 3, 2, 1.0, 1), ModelKind::knn);
    CHECK_THROWS_AS(decision_boundary(three, {}, {}), DomainError);
}

TEST_CASE("symmetric naive Bayes boundary sits at zero") {
    FeatureTable t{{"a", "b"},
                   {row("P1", "R1", {-2, -1}, "benign"), row("P1", "R2", {0, 1}, "benign"),
                    row("P2", "R3", {0, -1}, "cancer"), row("P2", "R4", {2, 1}, "cancer")}};
    const auto m = train(t, ModelKind::naive_bayes);
    const BoundaryGrid g = decision_boundary(m, {-1, 1, 21}, {-1, 1, 5});
    for (int j = 0; j < 5; ++j) {
        for (int i = 0; i < 21; ++i) {
            const auto& p = g.nodes[j * 21 + i];
            if (i < 10) CHECK(p.class_index == 0);
            if (i > 10) CHECK(p.class_index == 1);
            if (i == 10) CHECK(p.score == doctest::Approx(0.5));
        }
    }
}

TEST_CASE("1-NN boundary labels nodes by the nearest training point") {
    const FeatureTable t = blobs(12, 2, 2, 1.0, 81);
    Hyperparams hp;
    hp.k = 1;
    const auto m = train(t, ModelKind::knn, hp);
    const GridAxis x{-2, 3, 30}, y{-2, 3, 30};
    const BoundaryGrid g = decision_boundary(m, x, y);
    for (int j = 0; j < y.n; ++j) {
        for (int i = 0; i < x.n; ++i) {
            CHECK(g.nodes[j * x.n + i].class_index == oracle_knn(t, {x.at(i), y.at(j)}, 1));
        }
    }
}

TEST_CASE("boundary CSV and image") {
    FeatureTable t{{"a", "b"},
                   {row("P1", "R1", {0, 0}, "benign"), row("P1", "R2", {0, 1}, "benign"),
                    row("P2", "R3", {1, 0}, "cancer"), row("P2", "R4", {1, 1}, "cancer")}};
    const auto m = train(t, ModelKind::tree);
    const BoundaryGrid g = decision_boundary(m, {0, 1, 3}, {0, 1, 2});
    const auto path = fixtures::temp_path("boundary.csv");
    save_boundary_csv(path, g);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text ==
          "f1,f2,label,score\n0,0,benign,0\n0.5,0,benign,0\n1,0,cancer,1\n"
          "0,1,benign,0\n0.5,1,benign,0\n1,1,cancer,1\n");
    const RgbImage img = render_boundary(g, m);
    CHECK(img.width == 3);
    CHECK(img.height == 2);
    CHECK(img.px(0, 0)[0] != img.px(2, 0)[0]);
    const RgbImage dots = render_boundary(g, m, &t);
    CHECK_FALSE(dots == img);
}
