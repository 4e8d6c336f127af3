#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "greenhouse/dataset.hpp"
#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"

using namespace greenhouse;

namespace {

Dataset tiny(std::size_t rows) {
    Dataset ds;
    ds.soil_label = "T";
    Timestamp t{2021, 1, 1, 0, 0, 0};
    for (std::size_t i = 0; i < rows; ++i) {
        const double v = 0.1 + 0.01 * static_cast<double>(i);
        ds.samples.push_back({t, {v, v + 0.1, v + 0.2, v + 0.3}});
        t = t.plus_seconds(kStepSeconds);
    }
    return ds;
}

double total(const Moisture& m) { return std::accumulate(m.begin(), m.end(), 0.0); }

}  // namespace

TEST_CASE("timestamps roll over days, months and leap years") {
    CHECK(Timestamp{2020, 2, 28, 23, 59, 0}.plus_seconds(120) == Timestamp{2020, 2, 29, 0, 1, 0});
    CHECK(Timestamp{2021, 2, 28, 23, 59, 0}.plus_seconds(120) == Timestamp{2021, 3, 1, 0, 1, 0});
    CHECK(Timestamp{2020, 12, 31, 23, 58, 0}.plus_seconds(150) == Timestamp{2021, 1, 1, 0, 0, 30});
    CHECK(Timestamp{1900, 2, 28, 12, 0, 0}.plus_seconds(86400) == Timestamp{1900, 3, 1, 12, 0, 0});
}

TEST_CASE("csv round-trip is exact") {
    Dataset ds = tiny(5);
    ds.samples[2].moisture = {0.1 + 0.2, 1.0 / 3.0, 0.0, 1.0};
    const Dataset back = parse_csv_text(to_csv(ds), "T");
    CHECK(back.samples == ds.samples);
    CHECK(to_csv(back) == to_csv(ds));
}

TEST_CASE("csv errors carry the row number") {
    const std::string header(kCsvHeader);
    SUBCASE("wrong arity") {
        try {
            parse_csv_text(header + "\n2020,1,1,0,0,0,0.1,0.2,0.3\n");
            FAIL("accepted");
        } catch (const ParseError& e) {
            CHECK(e.row() == 2);
        }
    }
    SUBCASE("non-numeric field") {
        CHECK_THROWS_AS(parse_csv_text(header + "\n2020,1,1,0,0,0,0.1,x,0.3,0.4\n"), ParseError);
    }
    SUBCASE("out of range moisture") {
        try {
            parse_csv_text(header + "\n2020,1,1,0,0,0,0.1,0.2,0.3,0.4\n2020,1,1,0,2,30,0.1,0.2,1.5,0.4\n");
            FAIL("accepted");
        } catch (const RangeError& e) {
            CHECK(e.row() == 3);
            CHECK(e.column() == "moisture2");
        }
    }
    SUBCASE("bad header") { CHECK_THROWS_AS(parse_csv_text("a,b,c\n"), ParseError); }
}

TEST_CASE("windows pair row i with the deepest layer of row i + horizon") {
    const Dataset ds = tiny(10);
    const auto pairs = make_windows(ds, 3);
    REQUIRE(pairs.size() == 7);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].features == ds.samples[i].moisture);
        CHECK(pairs[i].target == ds.samples[i + 3].moisture[3]);
        CHECK(pairs[i].origin_index == i);
    }
    CHECK(make_windows(tiny(3), 3).empty());
}

TEST_CASE("chronological split") {
    const auto pairs = make_windows(tiny(20), 3);
    const Split s = chronological_split(pairs, 10, 5);
    REQUIRE(s.train.size() == 10);
    REQUIRE(s.test.size() == 5);
    CHECK(s.train.back().origin_index == 9);
    CHECK(s.test.front().origin_index == 10);
    try {
        chronological_split(pairs, 10, 8);
        FAIL("accepted");
    } catch (const SizingError& e) {
        CHECK(e.requested() == 18);
        CHECK(e.available() == 17);
    }
}

TEST_CASE("soil step follows the bucket rule") {
    SoilParams p;
    p.evaporation_rate = 0.01;
    p.downward_coupling = {0.1, 0.2, 0.3};
    p.drainage_rate = 0.05;
    const Moisture m{0.6, 0.5, 0.55, 0.2};
    Rng rng(1);
    const Moisture next = soil_step(p, m, 0.04, rng);
    // flows: 0.1*0.1, 0.2*0 (m1 < m2), 0.3*0.35
    CHECK(next[0] == doctest::Approx(0.6 + 0.04 - 0.006 - 0.01).epsilon(1e-15));
    CHECK(next[1] == doctest::Approx(0.5 + 0.01).epsilon(1e-15));
    CHECK(next[2] == doctest::Approx(0.55 - 0.105).epsilon(1e-15));
    CHECK(next[3] == doctest::Approx(0.2 + 0.105 - 0.01).epsilon(1e-15));
}

TEST_CASE("a soil with nothing switched on stays at its initial moisture") {
    SoilParams p;
    p.initial_moisture = {0.3, 0.4, 0.5, 0.6};
    const Dataset ds = generate_soil(p, 50, {}, 3);
    REQUIRE(ds.samples.size() == 50);
    for (const auto& s : ds.samples) CHECK(s.moisture == p.initial_moisture);
}

TEST_CASE("without irrigation or noise the total water never increases") {
    for (const char* name : {"soil1", "soil2", "bed"}) {
        SoilParams p = soil_preset(name);
        p.noise_std = 0.0;
        const Dataset ds = generate_soil(p, 2000, {}, 1);
        for (std::size_t i = 1; i < ds.samples.size(); ++i) {
            CHECK(total(ds.samples[i].moisture) <= total(ds.samples[i - 1].moisture) + 1e-15);
        }
    }
}

TEST_CASE("irrigation enters the top layer during the scheduled transition") {
    SoilParams p;
    p.initial_moisture = {0.2, 0.2, 0.2, 0.2};
    const std::vector<IrrigationEvent> schedule{{4, 0.1}};
    const Dataset ds = generate_soil(p, 8, schedule, 1);
    CHECK(ds.samples[4].moisture[0] == 0.2);
    CHECK(ds.samples[5].moisture[0] == doctest::Approx(0.3));
}

TEST_CASE("generator output is bounded, spaced and deterministic") {
    for (const char* name : {"soil1", "soil2", "bed"}) {
        const auto schedule = preset_schedule(name, 3000, 9);
        const Dataset a = generate_soil(soil_preset(name), 3000, schedule, 9, preset_label(name));
        const Dataset b = generate_soil(soil_preset(name), 3000, schedule, 9, preset_label(name));
        CHECK(a.samples == b.samples);
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            for (double v : a.samples[i].moisture) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            if (i > 0) CHECK(a.samples[i - 1].time.plus_seconds(kStepSeconds) == a.samples[i].time);
        }
        const Dataset c = generate_soil(soil_preset(name), 3000, schedule, 10);
        CHECK_FALSE(c.samples == a.samples);
    }
}

TEST_CASE("presets") {
    CHECK(soil_preset("soil1").downward_coupling != soil_preset("soil2").downward_coupling);
    CHECK(preset_label("soil1") == "Soil1");
    CHECK(preset_label("soil2") == "Soil2");
    CHECK_THROWS_AS(soil_preset("clay"), UsageError);
    CHECK_THROWS_AS(preset_schedule("clay", 10, 1), UsageError);

    SoilParams bad = soil_preset("soil1");
    bad.noise_std = -1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("periodic schedule") {
    const auto s = periodic_schedule(5000, 4);
    REQUIRE(s.size() > 100);
    CHECK(s.front().step == 10);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].step < 5000);
        CHECK(s[i].amount >= 0.10);
        CHECK(s[i].amount < 0.25);
        if (i > 0) {
            CHECK(s[i].step - s[i - 1].step >= 30);
            CHECK(s[i].step - s[i - 1].step <= 60);
        }
    }
    CHECK(periodic_schedule(5000, 4).size() == s.size());
}

TEST_CASE("metrics match a brute-force sum") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(200);
        std::vector<double> t(n), p(n);
        double sae = 0.0, sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.uniform();
            p[i] = rng.uniform(-1, 2);
            sae += std::fabs(t[i] - p[i]);
            sse += (t[i] - p[i]) * (t[i] - p[i]);
        }
        const MetricsReport m = evaluate_metrics(t, p);
        CHECK(m.n == n);
        CHECK(m.sum_abs_error == doctest::Approx(sae).epsilon(1e-12));
        CHECK(m.mse == doctest::Approx(sse / static_cast<double>(n)).epsilon(1e-12));
    }
    const std::vector<double> one{1.0}, two{1.0, 2.0};
    CHECK_THROWS_AS(evaluate_metrics(one, two), UsageError);
    CHECK_THROWS_AS(evaluate_metrics({}, {}), UsageError);
}

TEST_CASE("rng helpers") {
    Rng a(3), b(3);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));

    Rng r(4);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::fabs(sum / n) < 0.03);
    CHECK(std::fabs(sq / n - 1.0) < 0.04);
}
