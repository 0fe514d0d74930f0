#include <benchmark/benchmark.h>

#include "sch/driver.hpp"
#include "sch/fem.hpp"
#include "sch/mesh.hpp"
#include "sch/noise.hpp"
#include "sch/rng.hpp"
#include "sch/schemes.hpp"
#include "sch/spectral.hpp"

namespace {

constexpr double kEps = 1.0 / 32.0;

void bm_assemble(benchmark::State& state) {
    sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        sch::FemCache cache(mesh);
        benchmark::DoNotOptimize(cache.M().nonZeros());
    }
    state.SetLabel(std::to_string(mesh.num_vertices()) + " dof");
}
BENCHMARK(bm_assemble)->Arg(16)->Arg(32)->Arg(64);

void bm_poisson_zero_mean(benchmark::State& state) {
    sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, static_cast<int>(state.range(0)));
    sch::FemCache cache(mesh);
    sch::Rng rng(7);
    Eigen::VectorXd b(mesh.num_vertices());
    for (int i = 0; i < b.size(); ++i) b[i] = rng.gaussian();
    b.array() -= b.mean();
    for (auto _ : state) {
        Eigen::VectorXd x = cache.poisson_zero_mean(b);
        benchmark::DoNotOptimize(x.sum());
    }
}
BENCHMARK(bm_poisson_zero_mean)->Arg(32)->Arg(64);

void bm_refine_band(benchmark::State& state) {
    sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, static_cast<int>(state.range(0)));
    // Mark the annulus the initial interface lives on.
    sch::MarkSet marks;
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& v = mesh.tri(i);
        sch::Vec2 c = (1.0 / 3.0) * (mesh.point(v[0]) + mesh.point(v[1]) + mesh.point(v[2]));
        double r = sch::norm(c);
        if (r > 0.15 && r < 0.6) marks.refine.push_back(i);
    }
    for (auto _ : state) {
        sch::Mesh fine = sch::refine(mesh, marks);
        benchmark::DoNotOptimize(fine.num_triangles());
    }
}
BENCHMARK(bm_refine_band)->Arg(32)->Arg(64);

void bm_principal_eigenvalue(benchmark::State& state) {
    sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, static_cast<int>(state.range(0)));
    sch::FemCache cache(mesh);
    sch::FeFunction u = sch::initial_condition(mesh, 0.2, 0.55, kEps);
    for (auto _ : state) {
        sch::EigenResult r = sch::principal_eigenvalue(cache, u, kEps);
        benchmark::DoNotOptimize(r.lambda);
    }
}
BENCHMARK(bm_principal_eigenvalue)->Arg(16)->Arg(32);

void bm_coupled_step(benchmark::State& state) {
    sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, static_cast<int>(state.range(0)));
    sch::FemCache cache(mesh);
    sch::NoiseModel model = sch::make_cosine_noise(4, 1.0, 1.0);
    sch::TimeState begin = sch::initial_state(cache, sch::initial_profile(0.2, 0.55, kEps), model, kEps);
    sch::Rng rng(11);
    double tau = 1e-6;
    Eigen::VectorXd inc = sch::sample_increments(model, rng, tau);
    sch::StepNoise noise = sch::make_step_noise(model, inc, cache, 0.0);
    for (auto _ : state) {
        sch::TimeState s = begin;
        sch::NewtonReport rep = sch::step_coupled(s, cache, kEps, 1.0, noise, tau);
        benchmark::DoNotOptimize(rep.final_residual);
    }
}
BENCHMARK(bm_coupled_step)->Arg(16)->Arg(32);

} // namespace

BENCHMARK_MAIN();
