#pragma once

#include <span>
#include <vector>

namespace asm2tv {

/// Row = true class, column = predicted class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes);

    void add(int truth, int predicted);
    std::size_t classes() const { return classes_; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
    std::size_t total() const { return total_; }
    std::size_t support(std::size_t c) const;
    std::size_t predicted_count(std::size_t c) const;
    /// 2PR / (P + R), 0 when P + R = 0.
    double f1(std::size_t c) const;

private:
    std::size_t classes_;
    std::size_t total_ = 0;
    std::vector<std::size_t> counts_;
};

struct Metrics {
    double acc = 0.0;
    double macro_f1 = 0.0;     ///< mean over classes present in the labels
    double weighted_f1 = 0.0;  ///< weighted by true support
};

/// `classes` 0 means one more than the largest label or prediction.
Metrics metrics(std::span<const int> predictions, std::span<const int> labels, std::size_t classes = 0);
Metrics metrics(const ConfusionMatrix& cm);

}  // namespace asm2tv
