#include "sch/adaptivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "sch/errors.hpp"

namespace sch {

void AdaptConfig::validate() const {
    if (!(tol > 0.0)) throw ConfigError("adapt tolerance must be positive");
    if (!(doerfler_theta > 0.0 && doerfler_theta < 1.0))
        throw ConfigError("bulk marking fraction must lie in (0, 1)");
    if (!(coarsen_fraction >= 0.0)) throw ConfigError("coarsen fraction must be nonnegative");
    if (max_rounds < 0) throw ConfigError("adapt round budget must be nonnegative");
    if (!(h_min >= 0.0)) throw ConfigError("h_min must be nonnegative");
    if (!(h_max > 0.0)) throw ConfigError("h_max must be positive");
}

std::vector<int> doerfler_mark(const Eigen::VectorXd& eta_sq, double theta) {
    double total = eta_sq.sum();
    std::vector<int> order(eta_sq.size());
    std::iota(order.begin(), order.end(), 0);
    if (!(total > 0.0)) return {};
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return eta_sq[a] > eta_sq[b]; });
    std::vector<int> marks;
    double acc = 0.0;
    for (int i : order) {
        marks.push_back(i);
        acc += eta_sq[i];
        if (acc >= theta * total) break;
    }
    return marks;
}

std::vector<int> coarsen_mark(const Eigen::VectorXd& eta_sq, double tol,
                              double coarsen_fraction) {
    if (eta_sq.size() == 0) return {};
    double share = coarsen_fraction * std::sqrt(tol / static_cast<double>(eta_sq.size()));
    double cutoff = share * share;
    std::vector<int> marks;
    for (Eigen::Index i = 0; i < eta_sq.size(); ++i)
        if (eta_sq[i] < cutoff) marks.push_back(static_cast<int>(i));
    return marks;
}

AdaptOutcome adapt_step(Mesh& mesh, Eigen::VectorXd eta_sq, const AdaptConfig& cfg,
                        const AdaptCallbacks& callbacks) {
    cfg.validate();
    if (eta_sq.size() != mesh.num_triangles())
        throw NumericalError("adapt indicator does not match the mesh");

    AdaptOutcome out;
    out.dof_initial = mesh.num_vertices();
    out.eta_initial = std::sqrt(eta_sq.sum());

    double eta = out.eta_initial;
    while (eta > cfg.tol && out.rounds < cfg.max_rounds) {
        std::vector<int> marks = doerfler_mark(eta_sq, cfg.doerfler_theta);
        // Elements already at the size floor cannot be driven further.
        marks.erase(std::remove_if(marks.begin(), marks.end(),
                                   [&](int i) { return mesh.diameter(i) <= cfg.h_min; }),
                    marks.end());
        if (marks.empty()) break;

        out.refined += static_cast<int>(marks.size());
        MarkSet set;
        set.refine = std::move(marks);
        mesh = refine(mesh, set);
        eta_sq = callbacks.after_refine(mesh);
        if (eta_sq.size() != mesh.num_triangles())
            throw NumericalError("adapt callback returned a mismatched indicator");
        eta = std::sqrt(eta_sq.sum());
        ++out.rounds;
    }

    std::vector<int> quiet = coarsen_mark(eta_sq, cfg.tol, cfg.coarsen_fraction);
    quiet.erase(std::remove_if(quiet.begin(), quiet.end(),
                               [&](int i) { return mesh.diameter(i) >= cfg.h_max; }),
                quiet.end());
    if (!quiet.empty()) {
        out.coarsened = static_cast<int>(quiet.size());
        MarkSet set;
        set.coarsen = std::move(quiet);
        CoarsenResult result = coarsen(mesh, set);
        std::vector<int> kept_old = std::move(result.kept_old);
        mesh = std::move(result.mesh);
        eta_sq = callbacks.after_coarsen(mesh, kept_old);
        if (eta_sq.size() != mesh.num_triangles())
            throw NumericalError("adapt callback returned a mismatched indicator");
        eta = std::sqrt(eta_sq.sum());
    }

    out.eta_final = eta;
    out.tolerance_met = eta <= cfg.tol;
    out.dof_final = mesh.num_vertices();
    return out;
}

} // namespace sch
