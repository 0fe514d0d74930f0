#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sch/errors.hpp"
#include "sch/fem.hpp"
#include "sch/noise.hpp"
#include "sch/rng.hpp"

namespace {

const double pi = std::numbers::pi;

sch::Mesh square(int res) { return sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, res); }

// Three-mode model with a partial truncation and a hand-set tail, so every
// "beyond" branch of the spectral sums is exercised.
sch::NoiseModel toy_model() {
    sch::NoiseModel m;
    m.modes = {{1, 1, 0.5}, {1, 2, 0.3}, {2, 1, 0.2}};
    m.truncation_r = 2;
    m.gamma = 1.0;
    m.sigma.amplitude = 1.25;
    m.tail = {0.7, 0.11};
    m.validate();
    return m;
}

} // namespace

TEST_CASE("cosine model layout and spectral sums") {
    sch::NoiseModel m = sch::make_cosine_noise(4, 2.5, 1.0);
    CHECK(m.modes.size() == 16);
    CHECK(m.truncation_r == 16);
    CHECK(m.sigma.amplitude == 2.5);
    for (const auto& mode : m.modes) {
        CHECK(mode.nu == 0.5);
        CHECK(mode.lambda() ==
              doctest::Approx(pi * pi * (mode.l1 * mode.l1 + mode.l2 * mode.l2)));
    }
    // Fully retained: nothing beyond the truncation.
    CHECK(m.grad_sq_beyond(m.truncation_r) == 0.0);
    CHECK(m.hminus1_sq_beyond(m.truncation_r) == 0.0);
    double grad = 0.0;
    for (const auto& mode : m.modes) grad += 0.25 * mode.lambda();
    CHECK(m.grad_sq_total() == doctest::Approx(grad).epsilon(1e-14));
}

TEST_CASE("partial truncation splits the spectral sums") {
    sch::NoiseModel m = toy_model();
    double lam3 = m.modes[2].lambda();
    CHECK(m.grad_sq_beyond(2) == doctest::Approx(0.04 * lam3 + 0.7).epsilon(1e-14));
    CHECK(m.hminus1_sq_beyond(2) == doctest::Approx(0.04 / lam3 + 0.11).epsilon(1e-14));
}

TEST_CASE("mode loads satisfy the eigenrelation and partition of unity") {
    sch::Mesh mesh = square(6);
    for (sch::CosMode mode : {sch::CosMode{1, 1, 1.0}, sch::CosMode{2, 3, 1.0}}) {
        Eigen::VectorXd mass = sch::mode_mass_load(mesh, mode);
        Eigen::VectorXd stiff = sch::mode_stiffness_load(mesh, mode);
        // Sum of the mass load is the integral of the (mean-zero) mode.
        CHECK(std::abs(mass.sum()) < 1e-13);
        // The normal derivative vanishes on the square boundary, so the
        // assembled loads are linked by the eigenrelation exactly.
        CHECK((stiff - mode.lambda() * mass).lpNorm<Eigen::Infinity>() <
              1e-11 * (1.0 + stiff.lpNorm<Eigen::Infinity>()));
    }
}

TEST_CASE("increments are N(0, tau) and reject bad step sizes") {
    sch::NoiseModel m = sch::make_cosine_noise(4, 1.0, 1.0);
    sch::Rng rng(123);
    const double tau = 3e-4;
    const int draws = 2000;
    double sum = 0.0, sum_sq = 0.0;
    for (int d = 0; d < draws; ++d) {
        Eigen::VectorXd inc = sch::sample_increments(m, rng, tau);
        REQUIRE(inc.size() == 16);
        sum += inc.sum();
        sum_sq += inc.squaredNorm();
    }
    const double n = 16.0 * draws;
    double mean = sum / n;
    double var = sum_sq / n;
    // 32000 samples: the sample variance concentrates to about 0.8% of tau.
    CHECK(std::abs(mean) < 4.0 * std::sqrt(tau / n));
    CHECK(var == doctest::Approx(tau).epsilon(0.05));
    CHECK_THROWS_AS(sch::sample_increments(m, rng, 0.0), sch::ConfigError);
}

TEST_CASE("increment field has an exactly vanishing mass-mean") {
    sch::NoiseModel m = sch::make_cosine_noise(3, 2.0, 1.0);
    sch::Mesh mesh = square(5);
    sch::FemCache cache(mesh);
    sch::Rng rng(9);
    Eigen::VectorXd inc = sch::sample_increments(m, rng, 1e-4);
    sch::FeFunction f = sch::increment_field(m, inc, mesh, 0.0);
    CHECK(std::abs(cache.integral(f.v)) < 1e-14 * (1.0 + f.v.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("increment load sums to zero and matches the per-mode assembly") {
    sch::NoiseModel m = toy_model();
    sch::Mesh mesh = square(4);
    Eigen::VectorXd inc(2);
    inc << 0.01, -0.02;
    Eigen::VectorXd load = sch::increment_load(m, inc, mesh, 0.3);
    CHECK(std::abs(load.sum()) < 1e-14);
    double sig = m.sigma(0.3);
    Eigen::VectorXd expect = sig * (0.5 * 0.01 * sch::mode_mass_load(mesh, m.modes[0]) -
                                    0.3 * 0.02 * sch::mode_mass_load(mesh, m.modes[1]));
    CHECK((load - expect).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("mode accumulator and the derived closed-form fields") {
    sch::NoiseModel m = toy_model();
    sch::ModeAccumulator acc(m);
    REQUIRE(acc.b.size() == 3);
    Eigen::VectorXd i1(2), i2(2);
    i1 << 0.4, -0.1;
    i2 << 0.05, 0.2;
    acc.advance(m, i1, 0.0);
    acc.advance(m, i2, 0.7);
    double s0 = m.sigma(0.0), s1 = m.sigma(0.7);
    CHECK(acc.b[0] == doctest::Approx(s0 * 0.4 + s1 * 0.05).epsilon(1e-15));
    CHECK(acc.b[1] == doctest::Approx(-s0 * 0.1 + s1 * 0.2).epsilon(1e-15));
    CHECK(acc.b[2] == 0.0); // beyond the truncation

    const double eps = 0.25;
    sch::Vec2 p{0.31, -0.44};
    double noise = 0.0, g = 0.0, lap_g = 0.0;
    for (int l = 0; l < m.truncation_r; ++l) {
        double c = m.modes[l].nu * acc.b[l] * m.modes[l].eval(p);
        noise += c;
        g += -eps * m.modes[l].lambda() * c;
        lap_g += eps * m.modes[l].lambda() * m.modes[l].lambda() * c;
    }
    CHECK(sch::accumulated_noise_eval(m, acc)(p) == doctest::Approx(noise).epsilon(1e-13));
    CHECK(sch::g_eval(m, acc, eps)(p) == doctest::Approx(g).epsilon(1e-13));
    CHECK(sch::g_laplacian_eval(m, acc, eps)(p) == doctest::Approx(lap_g).epsilon(1e-13));
}

TEST_CASE("streaming noise indicators match scripted arithmetic for linear sigma") {
    // sigma(t) = c (1 + t) makes every time integral a polynomial moment with
    // a closed form, so the oracle below is exact.
    sch::NoiseModel m = toy_model();
    const double c = 0.8;
    m.sigma.amplitude = c;
    m.sigma.profile = [](double t) { return 1.0 + t; };

    const double eps = 1.0 / 16.0;
    sch::ProjectionDefects defects;
    defects.energy_sum = 0.013;
    defects.hminus1_sum = 0.0027;

    struct Step {
        double t0, tau;
    };
    std::vector<Step> steps = {{0.0, 0.2}, {0.2, 0.35}};

    auto sig = [&](double t) { return c * (1.0 + t); };
    auto incr_int = [&](double t0, double tau) { return c * c * tau * tau * tau / 3.0; };
    auto sq_int = [&](double t0, double tau) {
        double a = 1.0 + t0, b = 1.0 + t0 + tau;
        return c * c * (b * b * b - a * a * a) / 3.0;
    };
    auto tri_int = [&](double t0, double tau) {
        double a = 1.0 + t0, b = 1.0 + t0 + tau;
        return c * c * (tau * b * b * b / 3.0 - (b * b * b * b - a * a * a * a) / 12.0);
    };

    double grad_total = m.grad_sq_total();
    double grad_beyond = m.grad_sq_beyond(m.truncation_r);
    double hm1_total = m.hminus1_sq_total();
    double hm1_beyond = m.hminus1_sq_beyond(m.truncation_r);

    sch::NoiseIndicators stream(m, eps);
    double s2 = 0.0, sd = 0.0;
    for (const Step& s : steps) {
        double s0 = sig(s.t0);
        s2 += s.tau * s0 * s0;
        sd += incr_int(s.t0, s.tau);
        double e1 = s.tau * s2 * grad_beyond + s.tau * sd * grad_total +
                    grad_total * tri_int(s.t0, s.tau);
        double e2 = s.tau * s0 * s0 * hm1_beyond + incr_int(s.t0, s.tau) * hm1_total +
                    s.tau * s0 * s0 * defects.hminus1_sum + eps * s.tau * s2 * defects.energy_sum;
        double e3 = sq_int(s.t0, s.tau) * hm1_total;

        sch::NoiseIndicators::Values v = stream.advance({s.t0, s.tau}, defects);
        CHECK(v.eta1 == doctest::Approx(e1).epsilon(1e-13));
        CHECK(v.eta2 == doctest::Approx(e2).epsilon(1e-13));
        CHECK(v.eta3 == doctest::Approx(e3).epsilon(1e-13));
    }
}

TEST_CASE("batch indicator forms agree with the streaming class") {
    sch::NoiseModel m = toy_model();
    sch::Mesh mesh = square(4);
    sch::FemCache cache(mesh);
    const double eps = 0.125;
    std::vector<sch::NoiseStep> steps = {{0.0, 1e-3}, {1e-3, 2e-3}, {3e-3, 1e-3}};

    sch::ProjectionDefects defects = sch::projection_defects(mesh, cache, m);
    sch::NoiseIndicators stream(m, eps);
    std::vector<double> e1, e2, e3;
    for (const auto& s : steps) {
        auto v = stream.advance(s, defects);
        e1.push_back(v.eta1);
        e2.push_back(v.eta2);
        e3.push_back(v.eta3);
    }
    std::vector<double> b1 = sch::noise_indicator_1(m, steps);
    sch::NoiseInd23 b23 = sch::noise_indicators_2_3(m, mesh, cache, eps, steps);
    REQUIRE(b1.size() == 3);
    REQUIRE(b23.eta2.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(b1[i] == doctest::Approx(e1[i]).epsilon(1e-13));
        CHECK(b23.eta2[i] == doctest::Approx(e2[i]).epsilon(1e-13));
        CHECK(b23.eta3[i] == doctest::Approx(e3[i]).epsilon(1e-13));
    }
}

TEST_CASE("projection defects are positive and shrink under refinement") {
    sch::NoiseModel m = sch::make_cosine_noise(2, 1.0, 1.0);
    sch::Mesh coarse = square(4);
    sch::FemCache cc(coarse);
    sch::ProjectionDefects dc = sch::projection_defects(coarse, cc, m);
    CHECK(dc.energy_sum > 0.0);
    CHECK(dc.hminus1_sum > 0.0);

    sch::Mesh fine = square(8);
    sch::FemCache fc(fine);
    sch::ProjectionDefects df = sch::projection_defects(fine, fc, m);
    CHECK(df.energy_sum < dc.energy_sum);
    CHECK(df.hminus1_sum < dc.hminus1_sum);

    // Independent evaluation of the energy defect from its expansion.
    double expect = 0.0;
    for (const auto& mode : m.modes) {
        Eigen::VectorXd c = cc.mass_solve(sch::mode_mass_load(coarse, mode));
        double e = c.dot(cc.K() * c) - 2.0 * c.dot(sch::mode_stiffness_load(coarse, mode)) +
                   mode.lambda();
        expect += mode.nu * mode.nu * std::max(e, 0.0);
    }
    CHECK(dc.energy_sum == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("power-law tail sums converge to the analytic shell limits") {
    // s = 4: nu^2 lambda = c^2 pi^2 (l1^2+l2^2)^-3 summed over the lattice
    // outside the box; compare against a long direct summation.
    double c = 2.0, s = 4.0;
    int box = 3;
    sch::TailSpec tail = sch::TailSpec::power_lattice(c, s, box);
    double grad = 0.0, hm1 = 0.0;
    for (int l1 = 1; l1 <= 800; ++l1)
        for (int l2 = 1; l2 <= 800; ++l2) {
            if (l1 <= box && l2 <= box) continue;
            double r2 = static_cast<double>(l1) * l1 + static_cast<double>(l2) * l2;
            double nu2 = c * c * std::pow(r2, -s);
            grad += nu2 * pi * pi * r2;
            hm1 += nu2 / (pi * pi * r2);
        }
    CHECK(tail.grad_sq == doctest::Approx(grad).epsilon(1e-6));
    CHECK(tail.hminus1_sq == doctest::Approx(hm1).epsilon(1e-6));
    CHECK_THROWS_AS(sch::TailSpec::power_lattice(1.0, 2.0, 1), sch::ConfigError);
}

TEST_CASE("hoelder integral closed form for constant sigma") {
    sch::NoiseModel m = toy_model();
    const double a = 16.0, t_end = 0.012;
    double spectral = 0.0;
    for (const auto& mode : m.modes)
        spectral += mode.nu * mode.nu * std::pow(mode.lambda(), -0.5 * a);
    double expect = spectral * std::pow(1.25, a) * t_end;
    CHECK(sch::hoelder_noise_integral(m, t_end, a) == doctest::Approx(expect).epsilon(1e-13));
    CHECK_THROWS_AS(sch::hoelder_noise_integral(m, t_end, 1.0), sch::ConfigError);
}

TEST_CASE("model validation rejects inconsistent data") {
    sch::NoiseModel m = toy_model();
    m.truncation_r = 5;
    CHECK_THROWS_AS(m.validate(), sch::ConfigError);
    m = toy_model();
    m.modes[0].l1 = 0;
    CHECK_THROWS_AS(m.validate(), sch::ConfigError);
    m = toy_model();
    m.modes[1].nu = -0.5;
    CHECK_THROWS_AS(m.validate(), sch::ConfigError);
}
