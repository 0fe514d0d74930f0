#include "sch/noise.hpp"

#include <cmath>

#include "sch/errors.hpp"

namespace sch {
namespace {

// 8-point Gauss-Legendre rule on [0,1]; exact to degree 15, used for the
// time integrals of non-constant sigma profiles.
constexpr int kGauss = 8;
constexpr double kGx[kGauss] = {0.5 - 0.4801449282487619 , 0.5 - 0.3983332387068134,
                                0.5 - 0.26276620495816450, 0.5 - 0.0917173212478249,
                                0.5 + 0.0917173212478249 , 0.5 + 0.2627662049581645,
                                0.5 + 0.3983332387068134 , 0.5 + 0.4801449282487619};
constexpr double kGw[kGauss] = {0.0506142681451881, 0.1111905172266872,
                                0.1568533229389436, 0.1813418916891810,
                                0.1813418916891810, 0.1568533229389436,
                                0.1111905172266872, 0.0506142681451881};

// int_{t0}^{t0+tau} (sigma(s) - sigma(t0))^2 ds; zero for constant sigma.
double sigma_increment_integral(const SigmaProcess& sigma, double t0, double tau) {
    if (sigma.constant()) return 0.0;
    double s0 = sigma(t0), acc = 0.0;
    for (int q = 0; q < kGauss; ++q) {
        double d = sigma(t0 + tau * kGx[q]) - s0;
        acc += kGw[q] * d * d;
    }
    return acc * tau;
}

// int_{t0}^{t0+tau} sigma(s)^2 ds.
double sigma_sq_integral(const SigmaProcess& sigma, double t0, double tau) {
    if (sigma.constant()) return sigma.amplitude * sigma.amplitude * tau;
    double acc = 0.0;
    for (int q = 0; q < kGauss; ++q) {
        double s = sigma(t0 + tau * kGx[q]);
        acc += kGw[q] * s * s;
    }
    return acc * tau;
}

// int_{t0}^{t0+tau} int_t^{t0+tau} sigma(s)^2 ds dt; sigma^2 tau^2 / 2 for
// constant sigma.
double sigma_sq_triangle_integral(const SigmaProcess& sigma, double t0, double tau) {
    if (sigma.constant()) return 0.5 * sigma.amplitude * sigma.amplitude * tau * tau;
    double acc = 0.0;
    for (int q = 0; q < kGauss; ++q) {
        double t = t0 + tau * kGx[q];
        acc += kGw[q] * sigma_sq_integral(sigma, t, t0 + tau - t);
    }
    return acc * tau;
}

} // namespace

TailSpec TailSpec::power_lattice(double c, double s, int box) {
    if (!(s > 2.0)) throw ConfigError("tail power lattice needs decay exponent s > 2");
    if (box < 0) throw ConfigError("tail power lattice box must be nonnegative");
    double pi2 = CosMode::pi * CosMode::pi;
    TailSpec t;
    // Shells max(l1,l2) = m; the gradient sum decays like m^{3-2s}, so the
    // loop terminates quickly for any admissible s.
    for (int m = box + 1; m <= 2000000; ++m) {
        double shell_grad = 0.0, shell_hm1 = 0.0;
        auto add = [&](int l1, int l2) {
            double r2 = static_cast<double>(l1) * l1 + static_cast<double>(l2) * l2;
            double nu2 = c * c * std::pow(r2, -s);
            shell_grad += nu2 * pi2 * r2;
            shell_hm1 += nu2 / (pi2 * r2);
        };
        for (int l = 1; l < m; ++l) {
            add(l, m);
            add(m, l);
        }
        add(m, m);
        t.grad_sq += shell_grad;
        t.hminus1_sq += shell_hm1;
        if (shell_grad <= 1e-15 * t.grad_sq) return t;
    }
    throw ConfigError("tail power lattice sum did not converge");
}

void NoiseModel::validate() const {
    if (truncation_r < 0 || truncation_r > static_cast<int>(modes.size()))
        throw ConfigError("noise truncation outside the listed modes");
    for (const CosMode& m : modes) {
        if (m.l1 < 1 || m.l2 < 1) throw ConfigError("noise mode indices must be positive");
        if (!(m.nu >= 0.0)) throw ConfigError("noise amplitudes must be nonnegative");
    }
    if (!(sigma.amplitude >= 0.0)) throw ConfigError("sigma amplitude must be nonnegative");
    if (!std::isfinite(gamma)) throw ConfigError("gamma must be finite");
    if (!(tail.grad_sq >= 0.0) || !(tail.hminus1_sq >= 0.0))
        throw ConfigError("tail sums must be nonnegative");
}

double NoiseModel::grad_sq_beyond(int r) const {
    double acc = tail.grad_sq;
    for (int l = r; l < static_cast<int>(modes.size()); ++l)
        acc += modes[l].nu * modes[l].nu * modes[l].lambda();
    return acc;
}

double NoiseModel::hminus1_sq_beyond(int r) const {
    double acc = tail.hminus1_sq;
    for (int l = r; l < static_cast<int>(modes.size()); ++l)
        acc += modes[l].nu * modes[l].nu / modes[l].lambda();
    return acc;
}

NoiseModel make_cosine_noise(int lmax, double sigma_amplitude, double gamma) {
    if (lmax < 0) throw ConfigError("mode range must be nonnegative");
    NoiseModel model;
    for (int l1 = 1; l1 <= lmax; ++l1)
        for (int l2 = 1; l2 <= lmax; ++l2) model.modes.push_back({l1, l2, 0.5});
    model.truncation_r = static_cast<int>(model.modes.size());
    model.gamma = gamma;
    model.sigma.amplitude = sigma_amplitude;
    model.validate();
    return model;
}

Eigen::VectorXd sample_increments(const NoiseModel& model, Rng& rng, double tau) {
    if (!(tau > 0.0)) throw ConfigError("noise increments need a positive step size");
    double sd = std::sqrt(tau);
    Eigen::VectorXd d(model.truncation_r);
    for (int l = 0; l < model.truncation_r; ++l) d[l] = sd * rng.gaussian();
    return d;
}

FeFunction increment_field(const NoiseModel& model, const Eigen::VectorXd& increments,
                           const Mesh& mesh, double t_prev) {
    double sig = model.sigma(t_prev);
    FeFunction f;
    f.generation = mesh.generation;
    f.v = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        double val = 0.0;
        for (int l = 0; l < model.truncation_r; ++l)
            val += model.modes[l].nu * increments[l] * model.modes[l].eval(mesh.point(i));
        f.v[i] = sig * val;
    }
    // Interpolation does not preserve the zero mean of the modes; remove the
    // interpolant's exact mean (int_T of a P1 function is |T| times its
    // vertex average).
    double mass = 0.0, area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri(t);
        double a = mesh.area(t);
        mass += a * (f.v[v[0]] + f.v[v[1]] + f.v[v[2]]) / 3.0;
        area += a;
    }
    f.v.array() -= mass / area;
    return f;
}

Eigen::VectorXd increment_load(const NoiseModel& model, const Eigen::VectorXd& increments,
                               const Mesh& mesh, double t_prev) {
    double sig = model.sigma(t_prev);
    Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int l = 0; l < model.truncation_r; ++l) {
        double c = sig * model.modes[l].nu * increments[l];
        if (c != 0.0) load += c * mode_mass_load(mesh, model.modes[l]);
    }
    return load;
}

ModeAccumulator::ModeAccumulator(const NoiseModel& model)
    : b(Eigen::VectorXd::Zero(static_cast<int>(model.modes.size()))) {}

void ModeAccumulator::advance(const NoiseModel& model, const Eigen::VectorXd& increments,
                              double t_prev) {
    double sig = model.sigma(t_prev);
    for (int l = 0; l < model.truncation_r; ++l) b[l] += sig * increments[l];
}

namespace {

std::function<double(Vec2)> mode_sum_eval(const NoiseModel& model, const ModeAccumulator& acc,
                                          double coeff_scale, int lambda_power) {
    std::vector<CosMode> modes(model.modes.begin(), model.modes.begin() + model.truncation_r);
    Eigen::VectorXd c(model.truncation_r);
    for (int l = 0; l < model.truncation_r; ++l) {
        c[l] = coeff_scale * modes[l].nu * acc.b[l];
        for (int p = 0; p < lambda_power; ++p) c[l] *= modes[l].lambda();
    }
    return [modes = std::move(modes), c = std::move(c)](Vec2 p) {
        double val = 0.0;
        for (int l = 0; l < static_cast<int>(modes.size()); ++l) val += c[l] * modes[l].eval(p);
        return val;
    };
}

} // namespace

std::function<double(Vec2)> accumulated_noise_eval(const NoiseModel& model,
                                                   const ModeAccumulator& acc) {
    return mode_sum_eval(model, acc, 1.0, 0);
}

std::function<double(Vec2)> g_eval(const NoiseModel& model, const ModeAccumulator& acc,
                                   double eps) {
    return mode_sum_eval(model, acc, -eps, 1);
}

std::function<double(Vec2)> g_laplacian_eval(const NoiseModel& model, const ModeAccumulator& acc,
                                             double eps) {
    return mode_sum_eval(model, acc, eps, 2);
}

ProjectionDefects projection_defects(const Mesh& mesh, const FemCache& cache,
                                     const NoiseModel& model) {
    ProjectionDefects d;
    if (model.truncation_r == 0) return d;

    // Companion mesh for the negative-norm defect: bisect every triangle
    // once, applying closure.  The coarse space is nested in the fine one, so
    // coarse functions transfer exactly by nodal prolongation.
    MarkSet all;
    all.refine.resize(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) all.refine[t] = t;
    Mesh fine = refine(mesh, all);
    FemCache fine_cache(fine);

    for (int l = 0; l < model.truncation_r; ++l) {
        const CosMode& mode = model.modes[l];
        double nu2 = mode.nu * mode.nu;
        if (nu2 == 0.0) continue;

        Eigen::VectorXd load = mode_mass_load(mesh, mode);
        Eigen::VectorXd c = cache.mass_solve(load); // coefficients of P_h e

        // ||grad(P_h e - e)||^2 = c'Kc - 2 c'(stiffness load) + lambda, every
        // term exact; clamp the roundoff negatives.
        double energy = c.dot(cache.K() * c) - 2.0 * c.dot(mode_stiffness_load(mesh, mode)) +
                        mode.lambda();
        d.energy_sum += nu2 * std::max(energy, 0.0);

        // Defect load on the fine mesh: (P_h e - e, phi^fine).  Its entries
        // sum to int(P_h e) - int(e) = 0 at roundoff, as the negative-norm
        // solve requires.
        FeFunction coarse{mesh.generation, c};
        Eigen::VectorXd cf = prolongate(fine, coarse).v;
        Eigen::VectorXd defect_load = fine_cache.M() * cf - mode_mass_load(fine, mode);
        double hm1 = fine_cache.hminus1_norm_of_load(defect_load);
        d.hminus1_sum += nu2 * hm1 * hm1;
    }
    return d;
}

NoiseIndicators::NoiseIndicators(const NoiseModel& model, double eps)
    : model_(&model), eps_(eps) {}

NoiseIndicators::Values NoiseIndicators::advance(const NoiseStep& step,
                                                 const ProjectionDefects& defects) {
    const NoiseModel& m = *model_;
    double tau = step.tau, t0 = step.t_prev;
    double sig0 = m.sigma(t0);

    sig2_time_ += tau * sig0 * sig0;
    sigdiff_time_ += sigma_increment_integral(m.sigma, t0, tau);

    Values v;
    v.eta1 = tau * sig2_time_ * m.grad_sq_beyond(m.truncation_r) +
             tau * sigdiff_time_ * m.grad_sq_total() +
             m.grad_sq_total() * sigma_sq_triangle_integral(m.sigma, t0, tau);

    v.eta2 = tau * sig0 * sig0 * m.hminus1_sq_beyond(m.truncation_r) +
             sigma_increment_integral(m.sigma, t0, tau) * m.hminus1_sq_total() +
             tau * sig0 * sig0 * defects.hminus1_sum + eps_ * tau * sig2_time_ * defects.energy_sum;

    v.eta3 = sigma_sq_integral(m.sigma, t0, tau) * m.hminus1_sq_total();
    return v;
}

double hoelder_noise_integral(const NoiseModel& model, double t_end, double a) {
    if (!(t_end >= 0.0)) throw ConfigError("hoelder integral needs t_end >= 0");
    if (!(a > 2.0)) throw ConfigError("hoelder integral needs exponent a > 2");
    double spectral = 0.0;
    for (const CosMode& m : model.modes)
        spectral += m.nu * m.nu * std::pow(m.lambda(), -0.5 * a);
    double time = 0.0;
    if (model.sigma.constant()) {
        time = std::pow(std::abs(model.sigma.amplitude), a) * t_end;
    } else {
        // Panelized Gauss rule; profiles are smooth in the supported models.
        const int panels = 64;
        double h = t_end / panels;
        for (int p = 0; p < panels; ++p)
            for (int q = 0; q < kGauss; ++q)
                time += h * kGw[q] * std::pow(std::abs(model.sigma(p * h + h * kGx[q])), a);
    }
    return spectral * time;
}

std::vector<double> noise_indicator_1(const NoiseModel& model,
                                      const std::vector<NoiseStep>& steps) {
    NoiseIndicators stream(model, 0.0);
    std::vector<double> out;
    out.reserve(steps.size());
    for (const NoiseStep& s : steps) out.push_back(stream.advance(s, {}).eta1);
    return out;
}

NoiseInd23 noise_indicators_2_3(const NoiseModel& model, const Mesh& mesh, const FemCache& cache,
                                double eps, const std::vector<NoiseStep>& steps) {
    ProjectionDefects defects = projection_defects(mesh, cache, model);
    NoiseIndicators stream(model, eps);
    NoiseInd23 out;
    out.eta2.reserve(steps.size());
    out.eta3.reserve(steps.size());
    for (const NoiseStep& s : steps) {
        auto v = stream.advance(s, defects);
        out.eta2.push_back(v.eta2);
        out.eta3.push_back(v.eta3);
    }
    return out;
}

} // namespace sch
