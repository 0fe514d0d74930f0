#include <cmath>
#include <vector>

#include <doctest.h>

#include "sch/adaptivity.hpp"
#include "sch/errors.hpp"
#include "sch/mesh.hpp"

namespace {

sch::Mesh square(int res) { return sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, res); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

} // namespace

TEST_CASE("bulk marking picks the smallest prefix of the sorted indicators") {
    Eigen::VectorXd eta = vec({4.0, 1.0, 9.0, 0.5, 2.25});
    double total = eta.sum();

    std::vector<int> m1 = sch::doerfler_mark(eta, 0.5);
    REQUIRE(m1.size() == 1);
    CHECK(m1[0] == 2); // 9 >= 0.5 * 16.75 alone

    std::vector<int> m2 = sch::doerfler_mark(eta, 0.6);
    REQUIRE(m2.size() == 2);
    CHECK(m2[0] == 2);
    CHECK(m2[1] == 0); // 9 + 4 >= 0.6 * 16.75

    // Minimality: dropping the last mark falls short of the bulk target.
    for (double theta : {0.2, 0.35, 0.5, 0.8, 0.95}) {
        std::vector<int> m = sch::doerfler_mark(eta, theta);
        REQUIRE(!m.empty());
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < m.size(); ++i) acc += eta[m[i]];
        CHECK(acc < theta * total);
        acc += eta[m.back()];
        CHECK(acc >= theta * total);
    }

    CHECK(sch::doerfler_mark(Eigen::VectorXd::Zero(6), 0.5).empty());
    CHECK(sch::doerfler_mark(Eigen::VectorXd(), 0.5).empty());
}

TEST_CASE("coarsen marking keeps elements at or above the share cutoff") {
    // share = f sqrt(tol / N); every number here is a power of two, so the
    // cutoff (0.5 sqrt(1/4))^2 = 1/16 is exact and the strict comparison at
    // the boundary is well defined.
    Eigen::VectorXd eta = vec({0.01, 0.0625, 0.07, 0.0});
    std::vector<int> m = sch::coarsen_mark(eta, 1.0, 0.5);
    REQUIRE(m.size() == 2);
    CHECK(m[0] == 0);
    CHECK(m[1] == 3);

    CHECK(sch::coarsen_mark(eta, 1.0, 0.0).empty());
    CHECK(sch::coarsen_mark(Eigen::VectorXd(), 1.0, 0.5).empty());
}

TEST_CASE("adapt step refines until the callback indicator satisfies tol") {
    sch::Mesh mesh = square(2);
    int n0 = mesh.num_triangles();
    sch::AdaptConfig cfg;
    cfg.tol = 0.01;
    cfg.doerfler_theta = 0.5;
    // Keep the quiet cutoff f^2 tol = 1e-6 well under the per-element level
    // (tol/2)^2 = 2.5e-5 so the coarsening pass stays idle.
    cfg.coarsen_fraction = 0.01;

    // Loud initial indicator; one refinement round quiets everything to
    // eta = tol/2, below tol but above the coarsening cutoff.
    Eigen::VectorXd loud = Eigen::VectorXd::Constant(n0, 1.0);
    int refine_calls = 0, coarsen_calls = 0;
    sch::AdaptCallbacks cb;
    cb.after_refine = [&](const sch::Mesh& m) {
        ++refine_calls;
        double target = 0.5 * cfg.tol;
        return Eigen::VectorXd::Constant(m.num_triangles(),
                                         target * target / m.num_triangles());
    };
    cb.after_coarsen = [&](const sch::Mesh& m, const std::vector<int>& kept) {
        ++coarsen_calls;
        REQUIRE(static_cast<int>(kept.size()) == m.num_vertices());
        double target = 0.5 * cfg.tol;
        return Eigen::VectorXd::Constant(m.num_triangles(),
                                         target * target / m.num_triangles());
    };

    sch::AdaptOutcome out = sch::adapt_step(mesh, loud, cfg, cb);
    CHECK(out.rounds == 1);
    CHECK(refine_calls == 1);
    CHECK(coarsen_calls == 0); // eta per element sits above the quiet cutoff
    CHECK(out.refined > 0);
    CHECK(out.coarsened == 0);
    CHECK(out.tolerance_met);
    CHECK(out.eta_initial == doctest::Approx(std::sqrt(double(n0))).epsilon(1e-13));
    CHECK(out.eta_final == doctest::Approx(0.5 * cfg.tol).epsilon(1e-12));
    CHECK(out.dof_final == mesh.num_vertices());
    CHECK(out.dof_final > out.dof_initial);
}

TEST_CASE("adapt step coarsens quiet elements and reports the handed count") {
    sch::Mesh base = square(2);
    sch::Mesh mesh = sch::refine(base, [&] {
        sch::MarkSet all;
        for (int i = 0; i < base.num_triangles(); ++i) all.refine.push_back(i);
        return all;
    }());
    int n = mesh.num_triangles();
    sch::AdaptConfig cfg;
    cfg.tol = 1.0; // already met: no refinement rounds at all
    cfg.coarsen_fraction = 0.9;

    // Indicator far below the generous cutoff everywhere.
    Eigen::VectorXd quiet = Eigen::VectorXd::Constant(n, 1e-12);
    bool saw_coarsen = false;
    sch::AdaptCallbacks cb;
    cb.after_refine = [&](const sch::Mesh& m) {
        return Eigen::VectorXd::Zero(m.num_triangles());
    };
    cb.after_coarsen = [&](const sch::Mesh& m, const std::vector<int>& kept) {
        saw_coarsen = true;
        REQUIRE(static_cast<int>(kept.size()) == m.num_vertices());
        return Eigen::VectorXd::Constant(m.num_triangles(), 1e-12);
    };
    sch::AdaptOutcome out = sch::adapt_step(mesh, quiet, cfg, cb);
    CHECK(out.rounds == 0);
    CHECK(out.refined == 0);
    CHECK(out.coarsened == n); // every element was handed to the merge pass
    CHECK(saw_coarsen);
    CHECK(out.tolerance_met);
    CHECK(mesh.num_triangles() < n); // sibling merges actually fired
}

TEST_CASE("round budget exhaustion leaves the tolerance unmet") {
    sch::Mesh mesh = square(2);
    sch::AdaptConfig cfg;
    cfg.tol = 1e-3;
    cfg.max_rounds = 3;
    cfg.coarsen_fraction = 0.0;
    sch::AdaptCallbacks cb;
    cb.after_refine = [&](const sch::Mesh& m) {
        return Eigen::VectorXd::Constant(m.num_triangles(), 1.0);
    };
    cb.after_coarsen = [&](const sch::Mesh&, const std::vector<int>&) {
        return Eigen::VectorXd();
    };
    Eigen::VectorXd loud = Eigen::VectorXd::Constant(mesh.num_triangles(), 1.0);
    sch::AdaptOutcome out = sch::adapt_step(mesh, loud, cfg, cb);
    CHECK(out.rounds == 3);
    CHECK(!out.tolerance_met);
    CHECK(out.eta_final > cfg.tol);
}

TEST_CASE("size gates filter refinement and coarsening marks") {
    sch::Mesh mesh = square(2);
    int n = mesh.num_triangles();
    sch::AdaptConfig cfg;
    cfg.tol = 1e-3;
    cfg.h_min = 10.0; // every element is already "too small" to refine
    sch::AdaptCallbacks cb;
    cb.after_refine = [&](const sch::Mesh& m) {
        return Eigen::VectorXd::Zero(m.num_triangles());
    };
    cb.after_coarsen = [&](const sch::Mesh& m, const std::vector<int>&) {
        return Eigen::VectorXd::Zero(m.num_triangles());
    };
    Eigen::VectorXd loud = Eigen::VectorXd::Constant(n, 1.0);

    SUBCASE("h_min blocks all refinement") {
        sch::AdaptConfig c = cfg;
        c.coarsen_fraction = 0.0;
        sch::AdaptOutcome out = sch::adapt_step(mesh, loud, c, cb);
        CHECK(out.rounds == 0);
        CHECK(out.refined == 0);
        CHECK(!out.tolerance_met);
        CHECK(out.eta_final == out.eta_initial);
        CHECK(mesh.num_triangles() == n);
    }
    SUBCASE("h_max blocks all coarsening") {
        sch::AdaptConfig c = cfg;
        c.tol = 1e3;          // met immediately
        c.coarsen_fraction = 1e6; // everything is quiet...
        c.h_max = 1e-12;          // ...but nothing may grow
        Eigen::VectorXd quiet = Eigen::VectorXd::Constant(n, 1e-20);
        sch::AdaptOutcome out = sch::adapt_step(mesh, quiet, c, cb);
        CHECK(out.coarsened == 0);
        CHECK(mesh.num_triangles() == n);
    }
}

TEST_CASE("config validation and input checks") {
    sch::AdaptConfig cfg;
    cfg.validate();
    sch::AdaptConfig bad = cfg;
    bad.tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), sch::ConfigError);
    bad = cfg;
    bad.doerfler_theta = 1.0;
    CHECK_THROWS_AS(bad.validate(), sch::ConfigError);
    bad = cfg;
    bad.coarsen_fraction = -0.1;
    CHECK_THROWS_AS(bad.validate(), sch::ConfigError);
    bad = cfg;
    bad.max_rounds = -1;
    CHECK_THROWS_AS(bad.validate(), sch::ConfigError);
    bad = cfg;
    bad.h_max = 0.0;
    CHECK_THROWS_AS(bad.validate(), sch::ConfigError);

    sch::Mesh mesh = square(2);
    sch::AdaptCallbacks cb;
    cb.after_refine = [&](const sch::Mesh& m) {
        return Eigen::VectorXd::Zero(m.num_triangles());
    };
    cb.after_coarsen = [&](const sch::Mesh& m, const std::vector<int>&) {
        return Eigen::VectorXd::Zero(m.num_triangles());
    };
    Eigen::VectorXd wrong = Eigen::VectorXd::Zero(mesh.num_triangles() + 1);
    CHECK_THROWS_AS(sch::adapt_step(mesh, wrong, cfg, cb), sch::NumericalError);
}

TEST_CASE("mismatched callback indicators are rejected") {
    sch::Mesh mesh = square(2);
    sch::AdaptConfig cfg;
    cfg.tol = 1e-3;
    sch::AdaptCallbacks cb;
    cb.after_refine = [&](const sch::Mesh&) { return Eigen::VectorXd::Zero(3); };
    cb.after_coarsen = [&](const sch::Mesh&, const std::vector<int>&) {
        return Eigen::VectorXd();
    };
    Eigen::VectorXd loud = Eigen::VectorXd::Constant(mesh.num_triangles(), 1.0);
    CHECK_THROWS_AS(sch::adapt_step(mesh, loud, cfg, cb), sch::NumericalError);
}
