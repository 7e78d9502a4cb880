#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sunny/features.hpp"
#include "sunny/problem.hpp"

using namespace sunny;
using Catch::Approx;

TEST_CASE("feature vector of a mixed optimization problem, by hand") {
    ProblemDescriptor p = parse_problem(
        "PROBLEM toy\n"
        "VAR x INT 0 3\n"
        "VAR y INT 0 3\n"
        "CON LIN 1*x + 1*y <= 4\n"
        "CON ALLDIFF x y\n"
        "OBJ MIN 2*x + -1*y\n");
    FeatureVector fv = extract_features(p);
    CHECK(fv.schema == kBuiltinFeatureSchema);
    REQUIRE(fv.values.size() == kBuiltinFeatureCount);
    CHECK(fv.values[0] == 2.0);   // variables
    CHECK(fv.values[1] == 2.0);   // constraints
    CHECK(fv.values[2] == 1.0);   // constraints per variable
    CHECK(fv.values[3] == 4.0);   // min domain
    CHECK(fv.values[4] == 4.0);   // max domain
    CHECK(fv.values[5] == 4.0);   // mean domain
    CHECK(fv.values[6] == Approx(4.0));  // log2(4*4)
    CHECK(fv.values[7] == 1.0);   // linear constraints
    CHECK(fv.values[8] == 1.0);   // alldifferent constraints
    CHECK(fv.values[9] == 0.0);   // equality fraction
    CHECK(fv.values[10] == 2.0);  // mean arity
    CHECK(fv.values[11] == 2.0);  // max degree
    CHECK(fv.values[12] == 2.0);  // mean degree
    CHECK(fv.values[13] == 1.0);  // minimize
    CHECK(fv.values[14] == 2.0);  // objective arity
    CHECK(fv.values[15] == 3.0);  // |2| + |-1|
}

TEST_CASE("feature vector of a satisfaction problem, by hand") {
    ProblemDescriptor p = parse_problem(
        "PROBLEM q\n"
        "VAR a INT 1 1\n"
        "VAR b INT -2 5\n"
        "VAR c INT 0 9\n"
        "CON LIN 2*a + -3*b = 4\n"
        "CON LIN 1*b != 0\n"
        "CON LIN 1*b + 1*c >= 1\n"
        "OBJ SAT\n");
    FeatureVector fv = extract_features(p);
    CHECK(fv.values[0] == 3.0);
    CHECK(fv.values[1] == 3.0);
    CHECK(fv.values[2] == 1.0);
    CHECK(fv.values[3] == 1.0);
    CHECK(fv.values[4] == 10.0);
    CHECK(fv.values[5] == 19.0 / 3.0);
    CHECK(fv.values[6] == Approx(std::log2(80.0)));
    CHECK(fv.values[7] == 3.0);
    CHECK(fv.values[8] == 0.0);
    CHECK(fv.values[9] == Approx(1.0 / 3.0));
    CHECK(fv.values[10] == 5.0 / 3.0);       // arities 2, 1, 2
    CHECK(fv.values[11] == 3.0);             // b sits in all three constraints
    CHECK(fv.values[12] == 5.0 / 3.0);       // degrees 1, 3, 1 over 3 variables
    CHECK(fv.values[13] == 0.0);
    CHECK(fv.values[14] == 0.0);
    CHECK(fv.values[15] == 0.0);
}

TEST_CASE("domain product feature is capped") {
    ProblemDescriptor p = parse_problem(
        "PROBLEM big\n"
        "VAR x INT 0 999999\n"
        "VAR y INT 0 999999\n"
        "OBJ SAT\n");
    CHECK(extract_features(p).values[6] == Approx(std::log2(1e6)));
}

TEST_CASE("extraction is deterministic") {
    std::mt19937 rng(55);
    for (int i = 0; i < 50; ++i) {
        ProblemDescriptor p = oracle::random_problem(rng);
        CHECK(extract_features(p).values == extract_features(p).values);
    }
}

TEST_CASE("degree features agree with an independent recount") {
    std::mt19937 rng(808);
    for (int iter = 0; iter < 200; ++iter) {
        ProblemDescriptor p = oracle::random_problem(rng);
        // Count, per variable, the constraints whose variable set contains it.
        double max_deg = 0, sum_deg = 0;
        for (const auto& v : p.variables) {
            double d = 0;
            for (const auto& c : p.constraints) {
                bool uses = false;
                if (const auto* lin = std::get_if<LinearConstraint>(&c)) {
                    for (const auto& t : lin->expr.terms) uses |= t.var == v.id;
                } else {
                    for (const auto& id : std::get<AllDifferentConstraint>(c).vars)
                        uses |= id == v.id;
                }
                if (uses) d += 1;
            }
            max_deg = std::max(max_deg, d);
            sum_deg += d;
        }
        FeatureVector fv = extract_features(p);
        CHECK(fv.values[11] == max_deg);
        CHECK(fv.values[12] == Approx(sum_deg / static_cast<double>(p.variables.size())));
    }
}

TEST_CASE("fit_normalization finds the exact per-dimension extrema") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<FeatureVector> vecs;
        std::vector<std::vector<double>> rows;
        const int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            FeatureVector fv;
            for (int j = 0; j < 6; ++j) fv.values.push_back(u(rng));
            rows.push_back(fv.values);
            vecs.push_back(std::move(fv));
        }
        NormalizationBounds nb = fit_normalization(vecs);
        auto expect = oracle::scan_bounds(rows);
        REQUIRE(nb.bounds.size() == expect.size());
        for (std::size_t j = 0; j < expect.size(); ++j) {
            CHECK(nb.bounds[j].first == expect[j].first);
            CHECK(nb.bounds[j].second == expect[j].second);
        }
    }
}

TEST_CASE("normalize maps into [-1,1], zeroes constant dims, clamps strays") {
    NormalizationBounds nb;
    nb.bounds = {{0.0, 10.0}, {5.0, 5.0}, {-2.0, 2.0}};
    FeatureVector v;
    v.values = {5.0, 123.0, 4.0};
    FeatureVector out = normalize(v, nb);
    CHECK(out.values[0] == Approx(0.0));
    CHECK(out.values[1] == 0.0);  // constant dimension
    CHECK(out.values[2] == 1.0);  // clamped from above
    v.values = {0.0, 0.0, -2.0};
    out = normalize(v, nb);
    CHECK(out.values[0] == -1.0);
    CHECK(out.values[2] == -1.0);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-9, 9);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < 8; ++i) {
            std::vector<double> r;
            for (int j = 0; j < 4; ++j) r.push_back(u(rng));
            rows.push_back(r);
        }
        std::vector<FeatureVector> vecs;
        for (const auto& r : rows) vecs.push_back({r, ""});
        NormalizationBounds bounds = fit_normalization(vecs);
        auto oracle_bounds = oracle::scan_bounds(rows);
        for (const auto& r : rows) {
            auto lib = normalize({r, ""}, bounds).values;
            auto ref = oracle::scale(r, oracle_bounds);
            for (std::size_t j = 0; j < r.size(); ++j) {
                CHECK(lib[j] == Approx(ref[j]).margin(1e-12));
                CHECK(lib[j] >= -1.0);
                CHECK(lib[j] <= 1.0);
            }
        }
    }
}

TEST_CASE("distance is a Euclidean metric") {
    FeatureVector a{{0.0, 3.0}, ""}, b{{4.0, 0.0}, ""};
    CHECK(distance(a, b) == Approx(5.0));
    CHECK(distance(a, a) == 0.0);
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int iter = 0; iter < 100; ++iter) {
        FeatureVector x, y, z;
        for (int j = 0; j < 5; ++j) {
            x.values.push_back(u(rng));
            y.values.push_back(u(rng));
            z.values.push_back(u(rng));
        }
        CHECK(distance(x, y) == Approx(distance(y, x)));
        CHECK(distance(x, z) <= distance(x, y) + distance(y, z) + 1e-12);
    }
    FeatureVector short_one{{1.0}, ""};
    CHECK_THROWS_AS(distance(a, short_one), Error);
    CHECK_THROWS_AS(normalize(short_one, fit_normalization({a})), Error);
}
