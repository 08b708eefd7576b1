#include "asm2tv/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace asm2tv {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int truth, int predicted) {
    const auto in_range = [this](int c) { return c >= 0 && static_cast<std::size_t>(c) < classes_; };
    if (!in_range(truth) || !in_range(predicted))
        throw std::out_of_range("class index out of range: " + std::to_string(truth) + "/" + std::to_string(predicted));
    ++counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)];
    ++total_;
}

std::size_t ConfusionMatrix::support(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t p = 0; p < classes_; ++p) n += at(c, p);
    return n;
}

std::size_t ConfusionMatrix::predicted_count(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t t = 0; t < classes_; ++t) n += at(t, c);
    return n;
}

double ConfusionMatrix::f1(std::size_t c) const {
    const double tp = static_cast<double>(at(c, c));
    const double pred = static_cast<double>(predicted_count(c));
    const double sup = static_cast<double>(support(c));
    const double precision = pred > 0 ? tp / pred : 0.0;
    const double recall = sup > 0 ? tp / sup : 0.0;
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("metrics of an empty sample");
    Metrics m;
    std::size_t correct = 0, present = 0;
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        correct += cm.at(c, c);
        const std::size_t sup = cm.support(c);
        if (sup == 0) continue;
        const double f = cm.f1(c);
        ++present;
        m.macro_f1 += f;
        m.weighted_f1 += f * static_cast<double>(sup);
    }
    const double n = static_cast<double>(cm.total());
    m.acc = static_cast<double>(correct) / n;
    m.macro_f1 /= static_cast<double>(present);
    m.weighted_f1 /= n;
    return m;
}

Metrics metrics(std::span<const int> predictions, std::span<const int> labels, std::size_t classes) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("predictions and labels differ in length");
    if (labels.empty()) throw std::invalid_argument("metrics of an empty sample");
    if (classes == 0) {
        int top = 0;
        for (int x : labels) top = std::max(top, x);
        for (int x : predictions) top = std::max(top, x);
        classes = static_cast<std::size_t>(top) + 1;
    }
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
    return metrics(cm);
}

}  // namespace asm2tv
