#include <catch2/catch_amalgamated.hpp>

#include "ferroscope/metrics.hpp"

using namespace ferroscope;
using namespace ferroscope::metrics;

namespace {

// Published six-class strip-steel confusion counts (rows = true class).
ConfusionMatrix steel_matrix() {
    ConfusionMatrix cm(6);
    const std::int64_t rows[6][6] = {
        {222, 70, 7, 1, 0, 7},    // normal
        {16, 345, 17, 4, 13, 0},  // rolled-in scale
        {16, 42, 128, 5, 0, 2},   // inclusion
        {6, 25, 6, 125, 11, 4},   // scratch
        {0, 5, 0, 7, 78, 0},      // patch
        {3, 0, 0, 1, 0, 210},     // background
    };
    for (int t = 0; t < 6; ++t)
        for (int p = 0; p < 6; ++p) cm.at(t, p) = rows[t][p];
    return cm;
}

// Published seven-class bridge-inspection confusion counts.
ConfusionMatrix bridge_matrix() {
    ConfusionMatrix cm(7);
    const std::int64_t rows[7][7] = {
        {1069, 6, 1, 3, 33, 0, 9},   //
        {1, 91, 10, 4, 1, 0, 3},     //
        {1, 9, 235, 3, 2, 2, 9},     //
        {11, 1, 8, 658, 37, 11, 35}, //
        {28, 1, 3, 24, 704, 7, 52},  //
        {5, 2, 4, 13, 11, 81, 3},    //
        {10, 0, 8, 31, 33, 2, 678},  //
    };
    for (int t = 0; t < 7; ++t)
        for (int p = 0; p < 7; ++p) cm.at(t, p) = rows[t][p];
    return cm;
}

}  // namespace

TEST_CASE("confusion counts by (true, predicted) pairs") {
    ConfusionMatrix cm = confusion({0, 0, 1}, {0, 1, 1}, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 1);
}

TEST_CASE("perfect predictions are diagonal; empty input is a zero matrix") {
    ConfusionMatrix perfect = confusion({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p)
            CHECK(perfect.at(t, p) == (t == p ? perfect.row_sum(t) : 0));

    ConfusionMatrix empty = confusion({}, {}, 3);
    CHECK(empty.total() == 0);
}

TEST_CASE("confusion rejects out-of-range labels") {
    CHECK_THROWS_AS(confusion({0, 3}, {0, 1}, 2), InvalidArgument);
    CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), InvalidArgument);
}

TEST_CASE("accuracy basics") {
    ConfusionMatrix diag(2);
    diag.at(0, 0) = 4;
    diag.at(1, 1) = 6;
    CHECK(accuracy(diag) == 1.0);

    ConfusionMatrix half(2);
    half.at(0, 0) = half.at(0, 1) = half.at(1, 0) = half.at(1, 1) = 1;
    CHECK(accuracy(half) == 0.5);

    ConfusionMatrix empty(2);
    CHECK_THROWS_AS(accuracy(empty), UndefinedStatError);
}

TEST_CASE("published steel matrix reproduces its margins") {
    ConfusionMatrix cm = steel_matrix();
    CHECK(cm.total() == 1376);
    CHECK(cm.trace() == 1108);
    // caption says 80.4%; the counts give 80.5% (documented rounding in the source)
    CHECK(std::abs(accuracy(cm) - 0.804) < 0.005);

    CHECK(format_percent(recall(cm, 0)) == "72.3");
    CHECK(format_percent(recall(cm, 1)) == "87.3");
    CHECK(format_percent(recall(cm, 2)) == "66.3");
    CHECK(format_percent(recall(cm, 3)) == "70.6");
    CHECK(format_percent(recall(cm, 4)) == "86.7");
    CHECK(format_percent(recall(cm, 5)) == "98.1");

    CHECK(format_percent(precision(cm, 0)) == "84.4");
    CHECK(format_percent(precision(cm, 1)) == "70.8");
    CHECK(format_percent(precision(cm, 2)) == "81.0");
    CHECK(format_percent(precision(cm, 3)) == "87.4");
    CHECK(format_percent(precision(cm, 4)) == "76.5");
    CHECK(format_percent(precision(cm, 5)) == "94.2");
}

TEST_CASE("published bridge matrix reproduces its margins") {
    ConfusionMatrix cm = bridge_matrix();
    CHECK(format_percent(accuracy(cm)) == "88.9");
    CHECK(format_percent(recall(cm, 0)) == "95.4");  // 1069/1121
    CHECK(format_percent(recall(cm, 1)) == "82.7");
    CHECK(format_percent(recall(cm, 5)) == "68.1");
    CHECK(format_percent(recall(cm, 6)) == "89.0");
    CHECK(format_percent(precision(cm, 0)) == "95.0");
    CHECK(format_percent(precision(cm, 2)) == "87.4");
    CHECK(format_percent(precision(cm, 5)) == "78.6");
}

TEST_CASE("zero-denominator statistics are distinct errors") {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 5;
    cm.at(1, 0) = 2;  // class 2 never occurs and is never predicted
    CHECK_THROWS_AS(recall(cm, 2), UndefinedStatError);
    CHECK_THROWS_AS(precision(cm, 2), UndefinedStatError);
    CHECK_THROWS_AS(precision(cm, 1), UndefinedStatError);  // column 1 empty
    CHECK_NOTHROW(recall(cm, 1));
}

TEST_CASE("key-class aggregates") {
    ConfusionMatrix cm = steel_matrix();
    const std::vector<int> anomalous = {1, 2, 3, 4};

    // single-class subset equals the class statistic
    CHECK(key_class_aggregate(cm, {2}, Stat::Recall, Reduce::Min) == recall(cm, 2));

    // the published "lowest precision" 0.663 arises as the minimum of the
    // four anomalous-class diagonal/row ratios of the published counts
    const double lowest = key_class_aggregate(cm, anomalous, Stat::Recall, Reduce::Min);
    CHECK_THAT(lowest, Catch::Matchers::WithinAbs(0.663, 0.0005));

    // mean reduce: plain arithmetic
    ConfusionMatrix toy(2);
    toy.at(0, 0) = 1;
    toy.at(0, 1) = 1;  // recall(0) = 0.5
    toy.at(1, 1) = 3;  // recall(1) = 1.0
    CHECK(key_class_aggregate(toy, {0, 1}, Stat::Recall, Reduce::Mean) == 0.75);

    CHECK_THROWS_AS(key_class_aggregate(cm, {}, Stat::Recall, Reduce::Min), InvalidArgument);
}

TEST_CASE("micro-consistency: recall-weighted row sums equal the trace") {
    ConfusionMatrix cm = steel_matrix();
    // sum_c recall(c) * row_sum(c) = sum_c diagonal(c), exactly in integers
    std::int64_t recovered = 0;
    for (int c = 0; c < cm.k; ++c) recovered += cm.at(c, c);
    CHECK(recovered == cm.trace());
    double weighted = 0.0;
    for (int c = 0; c < cm.k; ++c) weighted += recall(cm, c) * double(cm.row_sum(c));
    CHECK_THAT(weighted / double(cm.total()), Catch::Matchers::WithinAbs(accuracy(cm), 1e-12));
}

TEST_CASE("confusion is permutation-equivariant") {
    Rng rng(77);
    std::vector<int> truth, pred;
    for (int i = 0; i < 100; ++i) {
        truth.push_back(rng.range_int(4));
        pred.push_back(rng.range_int(4));
    }
    ConfusionMatrix cm = confusion(truth, pred, 4);

    const int perm[4] = {2, 0, 3, 1};
    std::vector<int> truth_p, pred_p;
    for (int i = 0; i < 100; ++i) {
        truth_p.push_back(perm[truth[std::size_t(i)]]);
        pred_p.push_back(perm[pred[std::size_t(i)]]);
    }
    ConfusionMatrix cm_p = confusion(truth_p, pred_p, 4);
    for (int t = 0; t < 4; ++t)
        for (int p = 0; p < 4; ++p) CHECK(cm_p.at(perm[t], perm[p]) == cm.at(t, p));
}

TEST_CASE("percent formatting rounds half up at one decimal") {
    CHECK(format_percent(0.723) == "72.3");
    CHECK(format_percent(0.66321) == "66.3");
    CHECK(format_percent(0.5) == "50.0");
    CHECK(format_percent(0.12345) == "12.3");
    CHECK(format_percent(0.12350) == "12.4");  // half rounds up
    CHECK(format_percent(1.0) == "100.0");
}

TEST_CASE("csv and aligned table renderings") {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 3;
    cm.at(0, 1) = 1;
    cm.at(1, 1) = 4;
    const std::vector<std::string> names = {"ok", "bad"};
    std::string csv = to_csv(cm, names);
    CHECK(csv.find("ok,3,1") != std::string::npos);
    CHECK(csv.find("bad,0,4") != std::string::npos);

    std::string table = to_table(cm, names);
    CHECK(table.find("75.0") != std::string::npos);   // recall of ok
    CHECK(table.find("100.0") != std::string::npos);  // recall of bad / precision of ok
    CHECK(table.find("80.0") != std::string::npos);   // precision of bad
}
