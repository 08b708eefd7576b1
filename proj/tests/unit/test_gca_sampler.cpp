#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "asm2tv/gca_sampler.hpp"

using namespace asm2tv;

namespace {

std::vector<std::size_t> starts(std::size_t n, std::size_t stride, std::size_t first = 0) {
    std::vector<std::size_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = first + i * stride;
    return s;
}

WindowSet window_set(const std::vector<std::size_t>& start_rows) {
    WindowSet w;
    w.input_dims = {1};
    w.views.resize(1);
    for (auto s : start_rows) {
        w.views[0].push_back(static_cast<double>(s));
        w.labels.push_back(0);
        w.start_rows.push_back(s);
        w.start_ts.push_back(static_cast<std::int64_t>(s) * 20);
    }
    return w;
}

WindowedDataset dataset(std::size_t tasks, std::size_t unlabeled, std::size_t labeled) {
    WindowedDataset d;
    d.window_length = 4;
    d.stride = 4;
    d.input_dims = {1};
    d.classes.assign(tasks, 2);
    for (std::size_t t = 0; t < tasks; ++t) {
        TaskWindows tw;
        tw.labeled = window_set(starts(labeled, 4));
        tw.unlabeled = window_set(starts(unlabeled, 4, 1000));
        d.tasks.push_back(tw);
    }
    return d;
}

}  // namespace

TEST_CASE("fragment counts drop the trailing partial fragment") {
    CHECK(group_fragments(starts(100, 20), 20, 10).size() == 10);
    CHECK(group_fragments(starts(95, 20), 20, 10).size() == 9);
    CHECK(group_fragments(starts(9, 20), 20, 10).empty());
}

TEST_CASE("fragments hold consecutive windows in order") {
    const auto frags = group_fragments(starts(30, 5), 5, 7);
    REQUIRE(frags.size() == 4);
    std::size_t next = 0;
    for (const auto& f : frags) {
        CHECK(f.size() == 7);
        for (auto i : f) CHECK(i == next++);
    }
}

TEST_CASE("gaps between runs start new fragments") {
    auto s = starts(6, 10);
    for (auto x : starts(6, 10, 500)) s.push_back(x);
    const auto frags = group_fragments(s, 10, 4);
    REQUIRE(frags.size() == 2);
    CHECK(frags[0] == Fragment{0, 1, 2, 3});
    CHECK(frags[1] == Fragment{6, 7, 8, 9});
}

TEST_CASE("fragment argument errors") {
    const auto s = starts(10, 1);
    CHECK_THROWS(group_fragments(s, 1, 1));
    CHECK_THROWS(group_fragments(s, 0, 4));
}

TEST_CASE("three fragments force the middle one as internal") {
    const auto d = dataset(1, 30, 10);
    const auto store = build_fragments(d, 10);
    REQUIRE(store.fragment_count(0) == 3);
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto s = draw_gca_sample(store, 3, rng).tasks[0];
        CHECK(s.internal_fragment == 1);
        CHECK(s.external_fragment[0] == 0);
        CHECK(s.external_fragment[1] == 2);
    }
}

TEST_CASE("sample invariants hold over many draws") {
    const auto d = dataset(2, 100, 10);
    const auto store = build_fragments(d, 10);
    const std::size_t F = store.fragment_count(0);
    Rng rng(7);
    std::vector<std::size_t> seen(F, 0);
    for (int i = 0; i < 10000; ++i) {
        const auto sample = draw_gca_sample(store, 3, rng);
        REQUIRE(sample.tasks.size() == 2);
        for (std::size_t t = 0; t < 2; ++t) {
            const auto& s = sample.tasks[t];
            const auto& frags = store.tasks[t].fragments;
            REQUIRE(s.internal_fragment >= 1);
            REQUIRE(s.internal_fragment <= F - 2);
            ++seen[s.internal_fragment];
            const auto& inner = frags[s.internal_fragment];
            const auto in_inner = [&](std::size_t w) { return std::find(inner.begin(), inner.end(), w) != inner.end(); };
            CHECK(in_inner(s.reference));
            REQUIRE(s.internal.size() == 3);
            for (auto k : s.internal) CHECK(in_inner(k));
            CHECK(s.external_fragment[0] < s.internal_fragment);
            CHECK(s.external_fragment[1] > s.internal_fragment);
            for (std::size_t e = 0; e < 2; ++e) {
                const auto& ef = frags[s.external_fragment[e]];
                CHECK(std::find(ef.begin(), ef.end(), s.external[e]) != ef.end());
                CHECK(!in_inner(s.external[e]));
            }
        }
    }
    CHECK(seen[0] == 0);
    CHECK(seen[F - 1] == 0);
    for (std::size_t f = 1; f + 1 < F; ++f) CHECK(seen[f] > 0);
}

TEST_CASE("internal fragment is uniform over the interior") {
    const auto d = dataset(1, 50, 10);
    const auto store = build_fragments(d, 10);
    REQUIRE(store.fragment_count(0) == 5);
    Rng rng(11);
    std::vector<double> freq(5, 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) freq[draw_gca_sample(store, 1, rng).tasks[0].internal_fragment] += 1.0 / n;
    for (std::size_t f = 1; f <= 3; ++f) CHECK(std::abs(freq[f] - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("same seed gives the same stream") {
    const auto d = dataset(2, 60, 10);
    const auto store = build_fragments(d, 6);
    Rng a(42), b(42);
    const auto x = draw_gca_batch(store, 2, 16, a);
    const auto y = draw_gca_batch(store, 2, 16, b);
    REQUIRE(x.size() == 16);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t t = 0; t < 2; ++t) {
            CHECK(x[i].tasks[t].reference == y[i].tasks[t].reference);
            CHECK(x[i].tasks[t].internal == y[i].tasks[t].internal);
            CHECK(x[i].tasks[t].external == y[i].tasks[t].external);
        }
    const auto s1 = draw_gca_sample(store, 2, std::uint64_t{5});
    const auto s2 = draw_gca_sample(store, 2, std::uint64_t{5});
    CHECK(s1.tasks[1].internal == s2.tasks[1].internal);
}

TEST_CASE("sampler errors") {
    const auto d = dataset(1, 20, 10);
    const auto store = build_fragments(d, 10);
    CHECK_THROWS_AS(draw_gca_sample(store, 3, std::uint64_t{1}), std::invalid_argument);
    const auto d3 = dataset(1, 30, 10);
    CHECK_THROWS_AS(draw_gca_sample(build_fragments(d3, 10), 0, std::uint64_t{1}), std::invalid_argument);
}

TEST_CASE("limit_unlabeled keeps whole fragments") {
    auto d = dataset(2, 200, 20);
    Rng rng(3);
    limit_unlabeled(d, 1.0, 8, rng);
    for (const auto& t : d.tasks) {
        CHECK(t.unlabeled.size() == 24);
        const auto frags = group_fragments(t.unlabeled.start_rows, d.stride, 8);
        CHECK(frags.size() == 3);
        CHECK(std::is_sorted(t.unlabeled.start_rows.begin(), t.unlabeled.start_rows.end()));
    }

    auto small = dataset(1, 200, 2);
    limit_unlabeled(small, 0.5, 8, rng);
    CHECK(small.tasks[0].unlabeled.size() == 24);

    auto too_few = dataset(1, 40, 20);
    CHECK_THROWS_AS(limit_unlabeled(too_few, 4.0, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(limit_unlabeled(too_few, 0.0, 8, rng), std::invalid_argument);
}
