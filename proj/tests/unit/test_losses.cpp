#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mvgeo/error.hpp"
#include "mvgeo/losses.hpp"

using namespace mvgeo;

namespace {

GroundTruthBox gt(BoundingBox b, std::optional<std::string> id)
{
    GroundTruthBox g;
    g.box = b;
    g.instance_id = std::move(id);
    return g;
}

template <typename F>
std::vector<double> numeric_gradient(F f, std::vector<double> x, double h = 1e-6)
{
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b)
{
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-3});
        CHECK(std::abs(a[i] - b[i]) / scale < 1e-5);
    }
}

}  // namespace

TEST_SUITE("losses")
{
    TEST_CASE("softmax log loss")
    {
        CHECK(softmax_log_loss(std::vector<double>{1000.0, 0.0}, 0) == doctest::Approx(0.0));
        CHECK(softmax_log_loss(std::vector<double>{0.0, 0.0}, 0) == doctest::Approx(std::log(2.0)));
        CHECK(softmax_log_loss(std::vector<double>{0, 0, 0, 0}, 2) == doctest::Approx(std::log(4.0)));
        CHECK(std::isfinite(softmax_log_loss(std::vector<double>{0.0, 1000.0}, 0)));
        CHECK_THROWS_AS(softmax_log_loss(std::vector<double>{0.0, 1.0}, 2), Error);
        CHECK_THROWS_AS(softmax_log_loss(std::vector<double>{0.0}, 0), Error);
    }

    TEST_CASE("smooth l1 values")
    {
        CHECK(smooth_l1(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
        CHECK(smooth_l1(std::vector<double>{0.5}, std::vector<double>{0.0}) == 0.125);
        CHECK(smooth_l1(std::vector<double>{2.0}, std::vector<double>{0.0}) == 1.5);
        CHECK(smooth_l1(BoundingBox{1, 1, 2, 2}, BoundingBox{0, 0, 1, 1}) == 2.0);
        CHECK_THROWS_AS(smooth_l1(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
    }

    TEST_CASE("smooth l1 is C1 at |d| = 1")
    {
        const auto f = [](double d) { return smooth_l1(std::vector<double>{d}, std::vector<double>{0.0}); };
        const double h = 1e-7;
        for (double s : {1.0, -1.0}) {
            CHECK(std::abs(f(s + h) - f(s - h)) < 1e-6);
            const double left = (f(s) - f(s - h)) / h;
            const double right = (f(s + h) - f(s)) / h;
            CHECK(std::abs(left - right) < 1e-6);
            CHECK(smooth_l1_gradient(std::vector<double>{s}, std::vector<double>{0.0})[0] == doctest::Approx(s));
        }
    }

    TEST_CASE("analytic gradients agree with finite differences")
    {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> n(0.0, 1.5);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> z(5), f1(6), f2(6);
            for (auto& v : z) v = n(rng);
            for (auto& v : f1) v = n(rng) * 0.3;
            for (auto& v : f2) v = n(rng) * 0.3;
            const std::size_t k = trial % 5;
            check_close(softmax_log_loss_gradient(z, k),
                        numeric_gradient([&](const std::vector<double>& x) { return softmax_log_loss(x, k); }, z));
            for (bool same : {true, false}) {
                check_close(contrastive_loss_gradient(f1, f2, same, 2.0),
                            numeric_gradient(
                                [&](const std::vector<double>& x) { return contrastive_loss(x, f2, same, 2.0); }, f1));
            }
            std::vector<double> t(5);
            for (auto& v : t) v = n(rng);
            check_close(smooth_l1_gradient(z, t),
                        numeric_gradient([&](const std::vector<double>& x) { return smooth_l1(x, t); }, z));
        }
    }

    TEST_CASE("contrastive loss")
    {
        const std::vector<double> a{0.2, 0.4}, b{1.2, 0.4};
        CHECK(contrastive_loss(a, a, true, 1.0) == 0.0);
        CHECK(contrastive_loss(a, b, false, 1.0) == 0.0);
        CHECK(contrastive_loss(a, a, false, 1.0) == 0.5);
        CHECK(contrastive_loss(a, b, true, 1.0) == doctest::Approx(0.5));
        CHECK(contrastive_loss(a, b, false, 3.0) == contrastive_loss(b, a, false, 3.0));
    }

    TEST_CASE("projected localization loss")
    {
        const std::vector<GroundTruthBox> g{gt({0, 0, 10, 10}, "t1"), gt({50, 0, 60, 10}, std::nullopt)};
        const std::vector<GroundTruthBox> g_other{gt({100, 100, 110, 110}, "t1")};
        const std::vector<BoundingBox> pred{{0, 0, 10, 10}};
        CHECK(projected_loc_loss(pred, std::vector<BoundingBox>{{100, 100, 110, 110}}, g, g_other) == 0.0);
        CHECK(projected_loc_loss(pred, std::vector<BoundingBox>{{101, 101, 111, 111}}, g, g_other) == 2.0);
        const std::vector<GroundTruthBox> anonymous{gt({0, 0, 10, 10}, std::nullopt)};
        CHECK(projected_loc_loss(pred, std::vector<BoundingBox>{{101, 101, 111, 111}}, anonymous, g_other) == 0.0);
    }

    TEST_CASE("rmse loss")
    {
        const GeoCoordinate o = make_geo(0.0, 0.0);
        CHECK(rmse_loss(std::vector<GeoCoordinate>{o}, std::vector<GeoCoordinate>{o}) == 0.0);
        CHECK(rmse_loss(std::vector<GeoCoordinate>{o}, std::vector<GeoCoordinate>{make_geo(0.0001, 0.0)}) ==
              doctest::Approx(11.12263425710946406).epsilon(1e-12));
        const GeoCoordinate base = make_geo(34.0, -118.0);
        const std::vector<GeoCoordinate> pred{base, base};
        const std::vector<GeoCoordinate> truth{geo_from_enu(base, 3.0, 0.0), geo_from_enu(base, 0.0, 4.0)};
        CHECK(rmse_loss(pred, truth) == doctest::Approx(3.5355339059327376).epsilon(1e-9));
        CHECK_THROWS_AS(rmse_loss(pred, std::vector<GeoCoordinate>{base}), Error);
        CHECK_THROWS_AS(rmse_loss(std::vector<GeoCoordinate>{}, std::vector<GeoCoordinate>{}), Error);
    }

    TEST_CASE("combined loss")
    {
        LossInputs perfect;
        perfect.classification = {{{1000.0, 0.0}, 0}};
        perfect.localization = {{{0, 0, 10, 10}, {0, 0, 10, 10}}};
        perfect.feature_pairs = {{{0.1, 0.2}, {0.1, 0.2}, true}};
        perfect.pred_geo = {make_geo(1, 1)};
        perfect.gt_geo = {make_geo(1, 1)};
        perfect.n_matched = 1;
        const LossBreakdown zero = combined_loss(perfect, {});
        CHECK(zero.total == doctest::Approx(0.0));

        LossInputs conf_only;
        conf_only.classification = {{{0.0, 0.0}, 1}};
        conf_only.n_matched = 1;
        CHECK(combined_loss(conf_only, {}).total == doctest::Approx(std::log(2.0)));

        LossInputs none;
        const LossBreakdown empty = combined_loss(none, {});
        CHECK(empty.total == 0.0);
        CHECK(empty.degenerate);
    }

    TEST_CASE("combined loss is linear in alpha")
    {
        LossInputs in;
        in.classification = {{{0.3, -0.2}, 0}};
        in.localization = {{{0, 0, 10, 10}, {1.5, 0.25, 10, 12}}};
        in.pred_boxes = {{0, 0, 10, 10}};
        in.projected_boxes = {{103, 99, 111, 110}};
        in.gt = {gt({0, 0, 10, 10}, "t")};
        in.gt_other = {gt({100, 100, 110, 110}, "t")};
        in.feature_pairs = {{{0.0, 1.0}, {0.5, 0.5}, false}};
        in.n_matched = 2;
        LossConfig one;
        one.alpha = 1.0;
        LossConfig two;
        two.alpha = 2.0;
        const LossBreakdown a = combined_loss(in, one);
        const LossBreakdown b = combined_loss(in, two);
        REQUIRE(a.loc > 0.0);
        REQUIRE(a.loc_proj > 0.0);
        const double loc_part = (a.loc + a.loc_proj) / in.n_matched;
        CHECK(b.total - a.total == doctest::Approx(loc_part).epsilon(1e-15));
        CHECK(b.loc == a.loc);
        CHECK(b.loc_proj == a.loc_proj);
    }
}
