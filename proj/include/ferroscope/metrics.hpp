// Confusion matrix, accuracy, per-class precision/recall, and key-class
// aggregates, with CSV and aligned-table rendering.

#pragma once

#include <iomanip>
#include <sstream>

#include "ferroscope/core.hpp"

namespace ferroscope::metrics {

struct ConfusionMatrix {
    int k = 0;
    std::vector<std::int64_t> counts;  // rows = true class, columns = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes) : k(classes), counts(std::size_t(classes) * std::size_t(classes), 0) {
        if (classes < 1) throw InvalidArgument("confusion matrix needs >= 1 class");
    }

    std::int64_t& at(int t, int p) { return counts[std::size_t(t) * std::size_t(k) + std::size_t(p)]; }
    std::int64_t at(int t, int p) const { return counts[std::size_t(t) * std::size_t(k) + std::size_t(p)]; }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    std::int64_t trace() const {
        std::int64_t s = 0;
        for (int i = 0; i < k; ++i) s += at(i, i);
        return s;
    }
    std::int64_t row_sum(int t) const {
        std::int64_t s = 0;
        for (int p = 0; p < k; ++p) s += at(t, p);
        return s;
    }
    std::int64_t col_sum(int p) const {
        std::int64_t s = 0;
        for (int t = 0; t < k; ++t) s += at(t, p);
        return s;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, int k) {
    if (truth.size() != predicted.size())
        throw InvalidArgument("confusion: label vectors differ in length");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || t >= k || p < 0 || p >= k)
            throw InvalidArgument("confusion: label out of range at index " + std::to_string(i));
        ++cm.at(t, p);
    }
    return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw UndefinedStatError("accuracy undefined for an empty matrix");
    return double(cm.trace()) / double(total);
}

inline double recall(const ConfusionMatrix& cm, int cls) {
    if (cls < 0 || cls >= cm.k) throw InvalidArgument("recall: class out of range");
    const std::int64_t denom = cm.row_sum(cls);
    if (denom == 0) throw UndefinedStatError("recall undefined for class " + std::to_string(cls));
    return double(cm.at(cls, cls)) / double(denom);
}

inline double precision(const ConfusionMatrix& cm, int cls) {
    if (cls < 0 || cls >= cm.k) throw InvalidArgument("precision: class out of range");
    const std::int64_t denom = cm.col_sum(cls);
    if (denom == 0) throw UndefinedStatError("precision undefined for class " + std::to_string(cls));
    return double(cm.at(cls, cls)) / double(denom);
}

enum class Stat { Precision, Recall };
enum class Reduce { Mean, Min };

inline double key_class_aggregate(const ConfusionMatrix& cm, const std::vector<int>& subset, Stat stat,
                                  Reduce reduce) {
    if (subset.empty()) throw InvalidArgument("key_class_aggregate: empty subset");
    double acc = reduce == Reduce::Mean ? 0.0 : 1.0;
    for (int cls : subset) {
        const double v = stat == Stat::Precision ? precision(cm, cls) : recall(cm, cls);
        if (reduce == Reduce::Mean)
            acc += v;
        else
            acc = std::min(acc, v);
    }
    return reduce == Reduce::Mean ? acc / double(subset.size()) : acc;
}

// One decimal place, round half up: 0.72312 -> "72.3"
inline std::string format_percent(double fraction) {
    const double tenths = std::floor(fraction * 1000.0 + 0.5);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
    return buf;
}

inline std::string to_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names = {}) {
    std::ostringstream os;
    os << "true\\pred";
    for (int p = 0; p < cm.k; ++p)
        os << "," << (int(names.size()) == cm.k ? names[std::size_t(p)] : "c" + std::to_string(p));
    os << "\n";
    for (int t = 0; t < cm.k; ++t) {
        os << (int(names.size()) == cm.k ? names[std::size_t(t)] : "c" + std::to_string(t));
        for (int p = 0; p < cm.k; ++p) os << "," << cm.at(t, p);
        os << "\n";
    }
    return os.str();
}

// Aligned text: counts with per-row recall column and per-column precision
// footer. Undefined cells print "-".
inline std::string to_table(const ConfusionMatrix& cm, const std::vector<std::string>& names = {}) {
    auto name_of = [&](int i) {
        return int(names.size()) == cm.k ? names[std::size_t(i)] : "c" + std::to_string(i);
    };
    std::size_t label_w = 8;
    for (int i = 0; i < cm.k; ++i) label_w = std::max(label_w, name_of(i).size());

    std::ostringstream os;
    os << std::left << std::setw(int(label_w) + 2) << "";
    for (int p = 0; p < cm.k; ++p) os << std::right << std::setw(12) << name_of(p);
    os << std::right << std::setw(12) << "recall%" << "\n";

    for (int t = 0; t < cm.k; ++t) {
        os << std::left << std::setw(int(label_w) + 2) << name_of(t);
        for (int p = 0; p < cm.k; ++p) os << std::right << std::setw(12) << cm.at(t, p);
        if (cm.row_sum(t) > 0)
            os << std::right << std::setw(12) << format_percent(recall(cm, t));
        else
            os << std::right << std::setw(12) << "-";
        os << "\n";
    }

    os << std::left << std::setw(int(label_w) + 2) << "precision%";
    for (int p = 0; p < cm.k; ++p) {
        if (cm.col_sum(p) > 0)
            os << std::right << std::setw(12) << format_percent(precision(cm, p));
        else
            os << std::right << std::setw(12) << "-";
    }
    os << "\n";
    return os.str();
}

}  // namespace ferroscope::metrics
