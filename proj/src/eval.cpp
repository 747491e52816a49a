#include "stitchdiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stitchdiff {

namespace {

void check_coverage(const std::vector<int>& labels, int num_classes, const char* where) {
    std::set<int> seen(labels.begin(), labels.end());
    for (int c = 0; c < num_classes; ++c)
        require(seen.count(c) == 1, Errc::coverage,
                std::string(where) + ": class " + std::to_string(c) + " absent from train set");
}

/// Feature standardization fitted on the training set.
struct Standardizer {
    Vec<double> mean, inv_sd;

    void fit(const Mat<double>& x) {
        mean = x.rowwise().mean();
        Vec<double> var = (x.colwise() - mean).array().square().matrix().rowwise().mean();
        inv_sd = (var.array() + 1e-8).sqrt().inverse().matrix();
    }

    Mat<double> apply(const Mat<double>& x) const {
        return ((x.colwise() - mean).array().colwise() * inv_sd.array()).matrix();
    }
};

}  // namespace

double least_squares_separability(const Mat<double>& features, const std::vector<int>& labels,
                                  int num_classes) {
    require(features.cols() == static_cast<long>(labels.size()), Errc::shape_mismatch,
            "separability: feature/label count mismatch");
    check_coverage(labels, num_classes, "separability");

    const long n = features.cols();
    // Design matrix with a bias row; one-hot targets; minimum-norm LS fit.
    Mat<double> x(features.rows() + 1, n);
    x.topRows(features.rows()) = features;
    x.bottomRows(1).setOnes();
    Mat<double> y = Mat<double>::Constant(num_classes, n, -1.0);
    for (long i = 0; i < n; ++i) y(labels[static_cast<std::size_t>(i)], i) = 1.0;

    // W x ~= y  ->  W = y x^T (x x^T + eps I)^-1
    Mat<double> xxt = x * x.transpose();
    xxt.diagonal().array() += 1e-8;
    Mat<double> w = y * x.transpose() * xxt.ldlt().solve(Mat<double>::Identity(x.rows(), x.rows()));

    Mat<double> scores = w * x;
    long correct = 0;
    for (long i = 0; i < n; ++i) {
        int arg = 0;
        scores.col(i).maxCoeff(&arg);
        if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

ClassifierMetrics downstream_classify(const Mat<double>& train_features,
                                      const std::vector<int>& train_labels,
                                      const Mat<double>& test_features,
                                      const std::vector<int>& test_labels, int num_classes) {
    require(train_features.cols() == static_cast<long>(train_labels.size()), Errc::shape_mismatch,
            "classify: train feature/label count mismatch");
    require(test_features.cols() == static_cast<long>(test_labels.size()), Errc::shape_mismatch,
            "classify: test feature/label count mismatch");
    require(train_features.rows() == test_features.rows(), Errc::shape_mismatch,
            "classify: feature dims differ");
    check_coverage(train_labels, num_classes, "classify");

    Standardizer std_fit;
    std_fit.fit(train_features);
    Mat<double> xtr(train_features.rows() + 1, train_features.cols());
    xtr.topRows(train_features.rows()) = std_fit.apply(train_features);
    xtr.bottomRows(1).setOnes();
    Mat<double> xte(test_features.rows() + 1, test_features.cols());
    xte.topRows(test_features.rows()) = std_fit.apply(test_features);
    xte.bottomRows(1).setOnes();

    const long n = xtr.cols();
    Mat<double> onehot = Mat<double>::Zero(num_classes, n);
    for (long i = 0; i < n; ++i) onehot(train_labels[static_cast<std::size_t>(i)], i) = 1.0;

    // Full-batch softmax regression, plain gradient descent with a fixed
    // schedule; deterministic and convex.
    Mat<double> w = Mat<double>::Zero(num_classes, xtr.rows());
    const int iters = 800;
    const double lr = 0.5;
    for (int it = 0; it < iters; ++it) {
        Mat<double> scores = w * xtr;
        Mat<double> probs(scores.rows(), scores.cols());
        for (long i = 0; i < scores.cols(); ++i) {
            Vec<double> col = scores.col(i);
            const double m = col.maxCoeff();
            Vec<double> e = (col.array() - m).exp();
            probs.col(i) = e / e.sum();
        }
        Mat<double> grad = (probs - onehot) * xtr.transpose() / static_cast<double>(n);
        w -= lr * grad;
    }

    auto predict = [&](const Mat<double>& x) {
        Mat<double> scores = w * x;
        std::vector<int> pred(static_cast<std::size_t>(x.cols()));
        for (long i = 0; i < x.cols(); ++i) {
            int arg = 0;
            scores.col(i).maxCoeff(&arg);
            pred[static_cast<std::size_t>(i)] = arg;
        }
        return pred;
    };

    const std::vector<int> pred = predict(xte);
    ClassifierMetrics m;
    std::vector<long> tp(static_cast<std::size_t>(num_classes), 0),
        fp(static_cast<std::size_t>(num_classes), 0), fn(static_cast<std::size_t>(num_classes), 0);
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == test_labels[i]) {
            ++correct;
            ++tp[static_cast<std::size_t>(pred[i])];
        } else {
            ++fp[static_cast<std::size_t>(pred[i])];
            ++fn[static_cast<std::size_t>(test_labels[i])];
        }
    }
    m.accuracy = pred.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pred.size());
    for (int c = 0; c < num_classes; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const double p = tp[ci] + fp[ci] ? static_cast<double>(tp[ci]) / (tp[ci] + fp[ci]) : 0.0;
        const double r = tp[ci] + fn[ci] ? static_cast<double>(tp[ci]) / (tp[ci] + fn[ci]) : 0.0;
        const double f1 = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
        m.per_class_precision.push_back(p);
        m.per_class_recall.push_back(r);
        m.per_class_f1.push_back(f1);
        m.precision += p / num_classes;
        m.recall += r / num_classes;
        m.f1 += f1 / num_classes;
    }
    return m;
}

}  // namespace stitchdiff
