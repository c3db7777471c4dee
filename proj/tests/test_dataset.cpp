#include <algorithm>
#include <cmath>
#include <set>

#include "avqe/dataset.hpp"
#include "avqe/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace avqe;

namespace {

std::string nine_feature_csv(int rows) {
    const FeatureSchema schema = inrs_default_schema();
    std::string csv;
    for (std::size_t i = 0; i < schema.names.size(); ++i) csv += schema.names[i] + ",";
    csv += "mos\n";
    for (int r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < schema.names.size(); ++i) {
            csv += std::to_string(r + 1) + "." + std::to_string(i) + ",";
        }
        csv += std::to_string(1 + (r % 5)) + "\n";
    }
    return csv;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("schema validation") {
    FeatureSchema empty;
    CHECK_THROWS_AS(empty.validate(), DataError);
    FeatureSchema dup;
    dup.names = {"a", "A "};  // same after canonicalization
    CHECK_THROWS_AS(dup.validate(), DataError);
    FeatureSchema bad_target;
    bad_target.names = {"a", "b"};
    bad_target.target = "B";
    CHECK_THROWS_AS(bad_target.validate(), DataError);
}

TEST_CASE("load_csv three rows") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"), nine_feature_csv(3));
    const auto records = load_csv(dir.file("d.csv"), inrs_default_schema());
    REQUIRE(records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(records[i].ordinal == i);
        CHECK(records[i].features.size() == 9);
        REQUIRE(records[i].mos.has_value());
    }
    CHECK(records[0].features[0] == doctest::Approx(1.0));
    CHECK(*records[1].mos == 2.0);
}

TEST_CASE("load_csv header matching is case- and space-insensitive") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"),
                     "A Frame Count, MOS\n1,3\n2,4\n");
    FeatureSchema schema;
    schema.names = {"aFrameCount"};
    const auto records = load_csv(dir.file("d.csv"), schema);
    REQUIRE(records.size() == 2);
    CHECK(records[1].features[0] == 2.0);
    CHECK(*records[1].mos == 4.0);
}

TEST_CASE("load_csv missing column is named") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"), "a,mos\n1,3\n");
    FeatureSchema schema;
    schema.names = {"a", "missingCol"};
    CHECK_THROWS_WITH_AS(load_csv(dir.file("d.csv"), schema), doctest::Contains("missingCol"),
                         DataError);
}

TEST_CASE("load_csv bad cell cites the row") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"), "a,mos\n1,3\nxyz,3\n");
    FeatureSchema schema;
    schema.names = {"a"};
    CHECK_THROWS_WITH_AS(load_csv(dir.file("d.csv"), schema), doctest::Contains("row 2"),
                         DataError);
}

TEST_CASE("load_csv MOS out of range cites row 5") {
    test::TempDir dir("csv");
    std::string csv = "a,mos\n";
    for (int r = 1; r <= 6; ++r) csv += std::to_string(r) + (r == 5 ? ",7\n" : ",3\n");
    test::write_file(dir.file("d.csv"), csv);
    FeatureSchema schema;
    schema.names = {"a"};
    CHECK_THROWS_WITH_AS(load_csv(dir.file("d.csv"), schema), doctest::Contains("row 5"),
                         DataError);
}

TEST_CASE("load_csv order_by sorts stably and reassigns ordinals") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"), "a,t,mos\n10,3,1\n20,1,2\n30,3,3\n40,2,4\n");
    FeatureSchema schema;
    schema.names = {"a"};
    const auto records = load_csv(dir.file("d.csv"), schema, std::string("t"));
    REQUIRE(records.size() == 4);
    CHECK(records[0].features[0] == 20.0);  // t=1
    CHECK(records[1].features[0] == 40.0);  // t=2
    CHECK(records[2].features[0] == 10.0);  // t=3, file order kept
    CHECK(records[3].features[0] == 30.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(records[i].ordinal == i);
}

TEST_CASE("load_csv target column may be absent") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"), "a,b\n1,2\n3,4\n");
    FeatureSchema schema;
    schema.names = {"a", "b"};
    const auto records = load_csv(dir.file("d.csv"), schema);
    CHECK_FALSE(records[0].mos.has_value());
    CHECK_FALSE(records[1].mos.has_value());
}

TEST_CASE("load_csv_all picks up every non-target column") {
    test::TempDir dir("csv");
    test::write_file(dir.file("d.csv"), "c1,c2,mos,c3\n1,2,3,4\n5,6,2,8\n");
    auto [schema, records] = load_csv_all(dir.file("d.csv"), "mos");
    CHECK(schema.names == std::vector<std::string>{"c1", "c2", "c3"});
    REQUIRE(records.size() == 2);
    CHECK(records[1].features == std::vector<double>{5, 6, 8});
    CHECK(*records[1].mos == 2.0);

    test::write_file(dir.file("bad.csv"), "c1,mos\nhello,3\n");
    CHECK_THROWS_AS(load_csv_all(dir.file("bad.csv"), "mos"), DataError);
}

TEST_CASE("fit_normalizer single row maps to zero") {
    std::vector<QosRecord> records{{0, {3.0, -1.0}, 2.0}};
    const Normalizer norm = fit_normalizer(records, {0});
    const auto scaled = norm.transform_features(records[0].features);
    CHECK(scaled == std::vector<double>{0.0, 0.0});
    CHECK(norm.normalize_target(2.0) == 0.0);
}

TEST_CASE("fit_normalizer affine endpoints and midpoint") {
    std::vector<QosRecord> records{{0, {10.0}, 1.0}, {1, {20.0}, 3.0}, {2, {30.0}, 5.0}};
    const Normalizer norm = fit_normalizer(records, {0, 1, 2});
    CHECK(norm.transform_features({10.0})[0] == -1.0);
    CHECK(norm.transform_features({20.0})[0] == 0.0);
    CHECK(norm.transform_features({30.0})[0] == 1.0);
    CHECK(norm.normalize_target(1.0) == -1.0);
    CHECK(norm.denormalize_target(1.0) == 5.0);
}

TEST_CASE("fit_normalizer rejects empty index set") {
    std::vector<QosRecord> records{{0, {1.0}, 3.0}};
    CHECK_THROWS_AS(fit_normalizer(records, {}), DataError);
}

TEST_CASE("normalizer round-trip on random rows") {
    Rng rng(7);
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 100; ++i) {
        records.push_back({i, {rng.uniform(-50, 50), rng.uniform(0, 1), rng.uniform(100, 900)},
                           1.0 + 4.0 * rng.next_unit()});
    }
    std::vector<std::size_t> rows(records.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const Normalizer norm = fit_normalizer(records, rows);
    for (const auto& rec : records) {
        const auto back = norm.inverse_features(norm.transform_features(rec.features));
        for (std::size_t i = 0; i < back.size(); ++i) {
            CHECK(std::abs(back[i] - rec.features[i]) <= 1e-12 * std::max(1.0, std::abs(rec.features[i])));
        }
        CHECK(std::abs(norm.denormalize_target(norm.normalize_target(*rec.mos)) - *rec.mos) <= 1e-12);
    }
}

TEST_CASE("make_lagged window counting") {
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 5; ++i) records.push_back({i, {double(i), double(i) * 2}, 2.0 + 0.1 * i});
    const auto samples = make_lagged(records, 3, 3, LoopMode::open);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].origin == 3);
    CHECK(samples[1].origin == 4);
    CHECK(samples[0].input.size() == 2 * 4 + 3);
}

TEST_CASE("make_lagged degenerate MLP case") {
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 7; ++i) records.push_back({i, {1.0 * i}, 3.0});
    const auto samples = make_lagged(records, 0, 0, LoopMode::open);
    REQUIRE(samples.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(samples[i].input == records[i].features);
        CHECK(samples[i].target == 3.0);
    }
}

TEST_CASE("make_lagged count on 160 records matches enumeration") {
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 160; ++i) records.push_back({i, {0.5}, 3.0});
    const auto samples = make_lagged(records, 3, 3, LoopMode::open);
    // enumeration oracle: count n in [max(d_u,d_y), 160)
    std::size_t expected = 0;
    for (std::size_t n = 3; n < 160; ++n) ++expected;
    CHECK(expected == 157);
    CHECK(samples.size() == expected);
}

TEST_CASE("make_lagged slot layout reads back the source records") {
    Rng rng(17);
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 12; ++i) {
        records.push_back({i, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)},
                           1.0 + 4.0 * rng.next_unit()});
    }
    const std::size_t d_u = 2, d_y = 3, p = 3;
    const auto samples = make_lagged(records, d_u, d_y, LoopMode::open);
    for (const auto& s : samples) {
        const std::size_t n = s.origin;
        std::size_t pos = 0;
        for (std::size_t lag = 0; lag <= d_u; ++lag) {
            for (std::size_t f = 0; f < p; ++f) {
                CHECK(s.input[pos++] == records[n - lag].features[f]);
            }
        }
        for (std::size_t j = 1; j <= d_y; ++j) {
            CHECK(s.input[pos++] == *records[n - j].mos);
        }
        CHECK(pos == s.input.size());
        CHECK(s.target == *records[n].mos);
    }
}

TEST_CASE("make_lagged closed mode leaves zero placeholders") {
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 6; ++i) records.push_back({i, {double(i)}, std::nullopt});
    const auto samples = make_lagged(records, 1, 2, LoopMode::closed);
    REQUIRE(samples.size() == 4);
    for (const auto& s : samples) {
        CHECK(s.input[s.input.size() - 1] == 0.0);
        CHECK(s.input[s.input.size() - 2] == 0.0);
        CHECK(std::isnan(s.target));
    }
}

TEST_CASE("make_lagged errors") {
    std::vector<QosRecord> records;
    for (std::size_t i = 0; i < 3; ++i) records.push_back({i, {1.0}, 3.0});
    CHECK_THROWS_WITH_AS(make_lagged(records, 3, 3, LoopMode::open), doctest::Contains("max(d_u,d_y)=3"),
                         DataError);
    records.push_back({3, {1.0}, std::nullopt});
    records.push_back({4, {1.0}, 3.0});
    CHECK_THROWS_AS(make_lagged(records, 0, 2, LoopMode::open), DataError);
}

TEST_CASE("make_folds 160 by 5 gives five folds of 32") {
    const FoldPlan plan = make_folds(160, 5, 99);
    for (std::size_t f = 0; f < 5; ++f) CHECK(plan.test_ordinals(f).size() == 32);
}

TEST_CASE("make_folds 10 by 3 gives sizes 4,3,3") {
    const FoldPlan plan = make_folds(10, 3, 99);
    std::vector<std::size_t> sizes;
    for (std::size_t f = 0; f < 3; ++f) sizes.push_back(plan.test_ordinals(f).size());
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    CHECK(sizes == std::vector<std::size_t>{4, 3, 3});
}

TEST_CASE("make_folds determinism and disjoint cover") {
    const FoldPlan a = make_folds(53, 4, 7);
    const FoldPlan b = make_folds(53, 4, 7);
    CHECK(a.assignment == b.assignment);
    CHECK(make_folds(53, 4, 8).assignment != a.assignment);

    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < 4; ++f) {
        for (std::size_t o : a.test_ordinals(f)) CHECK(seen.insert(o).second);
    }
    CHECK(seen.size() == 53);
    // train set is exactly the complement
    const auto train0 = a.train_ordinals(0);
    const auto test0 = a.test_ordinals(0);
    CHECK(train0.size() + test0.size() == 53);
}

TEST_CASE("make_folds range errors") {
    CHECK_THROWS_AS(make_folds(10, 1, 0), DataError);
    CHECK_THROWS_AS(make_folds(10, 11, 0), DataError);
}

TEST_CASE("split_train_val is a deterministic 70/30 partition") {
    std::vector<std::size_t> pool(10);
    for (std::size_t i = 0; i < 10; ++i) pool[i] = i * 2;
    auto [train, val] = split_train_val(pool, 5);
    CHECK(train.size() == 7);
    CHECK(val.size() == 3);
    auto [train2, val2] = split_train_val(pool, 5);
    CHECK(train == train2);
    CHECK(val == val2);
    std::set<std::size_t> all(train.begin(), train.end());
    all.insert(val.begin(), val.end());
    CHECK(all.size() == 10);
    CHECK_THROWS_AS(split_train_val({1}, 5), DataError);
}

TEST_CASE("synth recursion fixed point at 2.5") {
    CHECK(synth_recursion_step(2.5, 2.5, 0.0, 0.0) == 2.5);
    // and it moves away from the fixed point when inputs are non-zero
    CHECK(synth_recursion_step(2.5, 2.5, 1.0, 0.0) > 2.5);
}

TEST_CASE("synth series determinism and bounds") {
    const auto a = synth_narx_series(50, 4242, 0.05);
    const auto b = synth_narx_series(50, 4242, 0.05);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(a[i].features == b[i].features);
        CHECK(*a[i].mos == *b[i].mos);
        CHECK(a[i].features.size() == 2);
        CHECK(*a[i].mos >= 1.0);
        CHECK(*a[i].mos <= 5.0);
        CHECK(a[i].features[0] >= -1.0);
        CHECK(a[i].features[0] <= 1.0);
    }
    CHECK(*synth_narx_series(50, 1, 0.05)[0].mos != *synth_narx_series(50, 2, 0.05)[0].mos);
}

TEST_CASE("synth noiseless series follows the recursion exactly") {
    const auto series = synth_narx_series(20, 9, 0.0);
    double y1 = 2.5, y2 = 2.5, u2_prev = 0.0;
    for (const auto& rec : series) {
        const double want = clip(synth_recursion_step(y1, y2, rec.features[0], u2_prev), 1.0, 5.0);
        CHECK(*rec.mos == want);
        y2 = y1;
        y1 = want;
        u2_prev = rec.features[1];
    }
}

TEST_CASE("synth parameter validation") {
    CHECK_THROWS_AS(synth_narx_series(9, 1, 0.0), DataError);
    CHECK_THROWS_AS(synth_narx_series(20, 1, -0.1), DataError);
}

TEST_CASE("fold plan export and hash") {
    test::TempDir dir("plan");
    const FoldPlan plan = make_folds(6, 3, 1);
    write_fold_plan(plan, dir.file("plan.csv"));
    const std::string text = test::read_file(dir.file("plan.csv"));
    CHECK(text.rfind("ordinal,fold\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    CHECK(fold_plan_hash(plan) == fold_plan_hash(make_folds(6, 3, 1)));
    CHECK(fold_plan_hash(plan) != fold_plan_hash(make_folds(6, 3, 2)));
}

}  // TEST_SUITE
