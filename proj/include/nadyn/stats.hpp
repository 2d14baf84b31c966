#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace nadyn {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }
    CompensatedSum& operator+=(const CompensatedSum& other) {
        add(other.sum_);
        add(other.comp_);
        return *this;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Mean and standard error from per-batch means. Returns zero error for
/// fewer than two batches.
struct BatchStatistics {
    double mean = 0.0;
    double std_error = 0.0;
};

inline BatchStatistics batch_statistics(std::span<const double> batch_means) {
    BatchStatistics out;
    const auto n = batch_means.size();
    if (n == 0) return out;
    CompensatedSum s;
    for (double m : batch_means) s += m;
    out.mean = s.value() / static_cast<double>(n);
    if (n < 2) return out;
    CompensatedSum ss;
    for (double m : batch_means) ss += (m - out.mean) * (m - out.mean);
    out.std_error = std::sqrt(ss.value() / static_cast<double>(n * (n - 1)));
    return out;
}

/// Index of the batch that sample `i` of `n` belongs to when the samples are
/// split into `n_batches` contiguous blocks [b n / n_batches, (b + 1) n / n_batches).
inline std::size_t batch_of(std::size_t i, std::size_t n, std::size_t n_batches) {
    return ((i + 1) * n_batches - 1) / n;
}

} // namespace nadyn
