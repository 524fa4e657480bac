#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qhealth/common.hpp"
#include "qhealth/fitkit.hpp"
#include "qhealth/synthdev.hpp"

using namespace qhealth;

namespace {

std::vector<double> grid(double from, double step, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = from + step * i;
    return xs;
}

Vec params(std::initializer_list<double> v) {
    Vec p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) p(i++) = x;
    return p;
}

}  // namespace

TEST_SUITE("fitkit") {

TEST_CASE("closed forms") {
    CHECK(fidelity_1q(0.9966) == doctest::Approx(0.9983).epsilon(1e-14));
    CHECK(fidelity_2q(0.986) == doctest::Approx(0.9895).epsilon(1e-14));
    CHECK(readout_fidelity(0.98, 0.964) == doctest::Approx(0.972).epsilon(1e-14));
    CHECK(fidelity_1q(1.0) == 1.0);
    CHECK(fidelity_2q(1.0) == 1.0);

    CHECK(fidelity_1q(0.0) == 0.5);
    CHECK(fidelity_2q(0.0) == 0.25);
    CHECK(readout_fidelity(0.5, 0.5) == 0.5);

    // 1/T2 = 1/(2 T1) + 1/Tphi.
    CHECK(*pure_dephasing_time(40.0, 20.0) == doctest::Approx(80.0 / 3.0));
    CHECK(*pure_dephasing_time(40.0, 40.0) == doctest::Approx(80.0));
    CHECK(*pure_dephasing_time(40.0, 17.7) == doctest::Approx(1.0 / (1.0 / 17.7 - 1.0 / 80.0)));
    CHECK(*pure_dephasing_time(40.0, 17.7) == doctest::Approx(22.73).epsilon(1e-3));
    CHECK_FALSE(pure_dephasing_time(40.0, 80.0).has_value());
    CHECK_FALSE(pure_dephasing_time(40.0, 100.0).has_value());
    CHECK(*t2_over_t1(40.0, 17.6) == doctest::Approx(0.44));
    CHECK(*t2_over_t1(40.0, 80.0) == 2.0);
    CHECK_FALSE(t2_over_t1(40.0, 96.0).has_value());
}

TEST_CASE("analytic gradients match central differences") {
    const std::pair<CurveModel, Vec> cases[] = {
        {CurveModel::ExpDecay, params({0.8, 0.1, 35.0})},
        {CurveModel::Ramsey, params({0.45, 0.5, 4.0, 1.7, 0.3})},
        {CurveModel::RBDecay, params({0.5, 0.5, 0.993})},
    };
    for (const auto& [model, p] : cases) {
        for (double x : {0.0, 0.7, 3.0, 12.5, 60.0}) {
            const Vec g = model_gradient(model, p, x);
            for (Eigen::Index i = 0; i < p.size(); ++i) {
                const double h = 1e-6 * std::max(1.0, std::abs(p(i)));
                Vec up = p, dn = p;
                up(i) += h;
                dn(i) -= h;
                const double fd = (model_value(model, up, x) - model_value(model, dn, x)) / (2 * h);
                CHECK(std::abs(fd - g(i)) <= 1e-6 * std::max(1.0, std::abs(g(i))));
            }
        }
    }
}

TEST_CASE("noise-free curves are recovered") {
    SUBCASE("exponential") {
        const auto ts = grid(0.0, 120.0 / 19, 20);
        const Vec truth = params({0.9, 0.1, 40.0});
        const Vec ys = model_curve(CurveModel::ExpDecay, truth, ts);
        const auto r = fit_exp_decay(ts, std::vector<double>(ys.data(), ys.data() + ys.size()));
        CHECK(r.converged);
        CHECK(r.param("T") == doctest::Approx(40.0).epsilon(1e-6));
        CHECK(r.param("A") == doctest::Approx(0.9).epsilon(1e-6));
        CHECK(r.param("B") == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(r.residual_rms < 1e-8);
        CHECK(r.residual_rms <= r.initial_rms);
    }
    SUBCASE("ramsey") {
        const auto ts = grid(0.0, 16.0 / 63, 64);
        const Vec truth = params({0.5, 0.5, 4.0, 2 * std::numbers::pi * 0.25, 0.0});
        const Vec ys = model_curve(CurveModel::Ramsey, truth, ts);
        const auto r = fit_ramsey(ts, std::vector<double>(ys.data(), ys.data() + ys.size()));
        CHECK(r.converged);
        CHECK(r.param("A") == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(r.param("B") == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(r.param("T") == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(r.param("omega") == doctest::Approx(truth(3)).epsilon(1e-6));
        CHECK(std::abs(r.param("phi")) < 1e-6);
    }
    SUBCASE("randomized benchmarking") {
        const std::vector<double> ms = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
        const Vec truth = params({0.5, 0.5, 0.9966});
        const Vec ys = model_curve(CurveModel::RBDecay, truth, ms);
        const auto r = fit_rb_decay(ms, std::vector<double>(ys.data(), ys.data() + ys.size()));
        CHECK(r.converged);
        CHECK(std::abs(r.param("p") - 0.9966) < 1e-6);
    }
}

TEST_CASE("covariance is symmetric positive semidefinite") {
    const auto ts = grid(0.0, 3.0, 30);
    const auto ys = generate_decay_curve(CurveModel::ExpDecay, params({0.9, 0.05, 30.0}), ts, 1000, 4);
    const auto r = fit_exp_decay(ts, ys);
    CHECK((r.covariance - r.covariance.transpose()).norm() < 1e-12 * r.covariance.norm());
    Eigen::SelfAdjointEigenSolver<Mat> es(r.covariance);
    CHECK(es.eigenvalues().minCoeff() >= -1e-15);
}

TEST_CASE("rejects unusable input") {
    const std::vector<double> three = {0, 1, 2};
    CHECK_THROWS_AS(fit_exp_decay(three, three), DataError);
    const std::vector<double> ts = {0, 1, 2, 3, 4};
    CHECK_THROWS_AS(fit_exp_decay(ts, std::vector<double>{0.9, 0.8, 0.7, 0.6, 1.3}), DataError);
    CHECK_THROWS_AS(fit_exp_decay(std::vector<double>{0, 2, 1, 3, 4}, std::vector<double>{0.9, 0.8, 0.7, 0.6, 0.5}),
                    DataError);
    CHECK_THROWS_AS(fit_exp_decay(ts, std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.5}), DataError);
    CHECK_THROWS_AS(parse_curve_model("gauss"), UsageError);
}

TEST_CASE("flat RB curve gives the identity fit") {
    const std::vector<double> ms = {1, 2, 4, 8, 16};
    const auto r = fit_rb_decay(ms, std::vector<double>(5, 0.98));
    CHECK(r.converged);
    CHECK(r.param("p") == doctest::Approx(1.0));
}

TEST_CASE("Ramsey without an oscillation reports non-convergence") {
    const auto ts = grid(0.0, 0.25, 64);
    std::vector<double> ps;
    for (double t : ts) ps.push_back(0.5 + 0.45 * std::exp(-t / 6.0) * std::cos(1e-4 * t));
    FitResult r;
    CHECK_NOTHROW(r = fit_ramsey(ts, ps));
    CHECK_FALSE(r.converged);
}

TEST_CASE("model tokens") {
    for (auto m : {CurveModel::ExpDecay, CurveModel::Ramsey, CurveModel::RBDecay}) {
        CHECK(parse_curve_model(to_string(m)) == m);
        CHECK(static_cast<Eigen::Index>(parameter_names(m).size()) == parameter_count(m));
    }
}

}
