#include "sch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sch/config.hpp"
#include "sch/errors.hpp"

namespace sch {

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string pad3(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", i);
    return buf;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > b) out.push_back(line.substr(b, i - b));
    }
    return out;
}

class SnapshotReader {
public:
    SnapshotReader(const std::string& path, std::string text)
        : path_(path), in_(std::move(text)) {}

    std::vector<std::string> next_tokens() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            std::vector<std::string> toks = split_tokens(line);
            if (!toks.empty()) return toks;
        }
        fail("unexpected end of file");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw IoError(path_ + ": line " + std::to_string(line_) + ": " + what);
    }

    double number(const std::string& tok) const {
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            fail("expected a number, got '" + tok + "'");
        return v;
    }

    long long integer(const std::string& tok) const {
        long long v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            fail("expected an integer, got '" + tok + "'");
        return v;
    }

private:
    std::string path_;
    std::istringstream in_;
    int line_ = 0;
};

// CSV assembly: one row at a time, all numbers through format_number.
class Csv {
public:
    explicit Csv(std::initializer_list<const char*> columns) {
        bool first = true;
        for (const char* c : columns) {
            if (!first) out_ += ',';
            out_ += c;
            first = false;
        }
        out_ += '\n';
    }

    Csv& cell(double v) { return raw(format_number(v)); }
    Csv& cell(int v) { return raw(std::to_string(v)); }
    Csv& cell(bool v) { return raw(v ? "1" : "0"); }
    Csv& cell(const std::string& s) {
        std::string clean = s;
        for (char& c : clean)
            if (c == ',' || c == '\n') c = ';';
        return raw(clean);
    }
    Csv& endrow() {
        fresh_row_ = true;
        out_ += '\n';
        return *this;
    }

    const std::string& str() const { return out_; }

private:
    Csv& raw(const std::string& s) {
        if (!fresh_row_) out_ += ',';
        out_ += s;
        fresh_row_ = false;
        return *this;
    }

    std::string out_;
    bool fresh_row_ = true;
};

std::string series_csv(const PathResult& path) {
    Csv csv{"t",
            "tau",
            "dof",
            "elements",
            "newton_iterations",
            "newton_residual",
            "rejections",
            "mass",
            "mass_drift",
            "energy",
            "u_center",
            "u_min",
            "u_max",
            "lambda_ch",
            "eig_iterations",
            "eig_residual",
            "splitting_error",
            "identity_u",
            "identity_w",
            "adapt_rounds",
            "adapt_refined",
            "adapt_coarsened",
            "eta_space3_u"};
    for (const StepRecord& r : path.steps) {
        csv.cell(r.t)
            .cell(r.tau)
            .cell(r.dof)
            .cell(r.elements)
            .cell(r.newton_iterations)
            .cell(r.newton_residual)
            .cell(r.rejections)
            .cell(r.mass)
            .cell(r.audits.mass_drift)
            .cell(r.energy)
            .cell(r.u_center)
            .cell(r.u_min)
            .cell(r.u_max)
            .cell(r.indicators.lambda_ch)
            .cell(r.eig_iterations)
            .cell(r.eig_residual)
            .cell(r.audits.splitting_error)
            .cell(r.audits.identity_u)
            .cell(r.audits.identity_w)
            .cell(r.adapt.rounds)
            .cell(r.adapt.refined)
            .cell(r.adapt.coarsened)
            .cell(r.adapt.eta_final)
            .endrow();
    }
    return csv.str();
}

std::string indicators_csv(const PathResult& path) {
    Csv csv{"t",          "tau",        "eta_space1",     "eta_space2",     "eta_space3",
            "eta_space1_hat", "eta_space2_hat", "eta_space3_hat", "eta_time1",  "eta_time2",
            "eta_time3",  "eta_time1_hat",  "eta_time2_hat",  "eta_time3_hat",  "eta_noise1",
            "eta_noise2", "eta_noise3", "mu_m1",          "mu_0",           "mu_1",
            "mu_hat_m1",  "mu_hat_0",   "mu_hat_1",       "lambda_ch"};
    for (const StepRecord& r : path.steps) {
        const StepIndicators& s = r.indicators;
        csv.cell(s.t)
            .cell(s.tau)
            .cell(s.space.eta1)
            .cell(s.space.eta2)
            .cell(s.space.eta3)
            .cell(s.space_hat.eta1)
            .cell(s.space_hat.eta2)
            .cell(s.space_hat.eta3)
            .cell(s.time.eta1)
            .cell(s.time.eta2)
            .cell(s.time.eta3)
            .cell(s.time_hat.eta1)
            .cell(s.time_hat.eta2)
            .cell(s.time_hat.eta3)
            .cell(s.noise.eta1)
            .cell(s.noise.eta2)
            .cell(s.noise.eta3)
            .cell(s.mu.mu_m1)
            .cell(s.mu.mu_0)
            .cell(s.mu.mu_1)
            .cell(s.mu_hat.mu_m1)
            .cell(s.mu_hat.mu_0)
            .cell(s.mu_hat.mu_1)
            .cell(s.lambda_ch)
            .endrow();
    }
    return csv.str();
}

std::string eigtrace_csv(const PathResult& path) {
    Csv csv{"t", "lambda", "iterations", "residual"};
    for (const StepRecord& r : path.steps)
        csv.cell(r.t)
            .cell(r.indicators.lambda_ch)
            .cell(r.eig_iterations)
            .cell(r.eig_residual)
            .endrow();
    return csv.str();
}

std::string path_summary_csv(const PathResult& p) {
    Csv csv{"path",        "completed",   "steps",
            "center_fired", "closing_center", "closing_lambda",
            "lambda_peak", "gap",         "r_tilde",
            "r_hat",       "certified",   "gronwall_lhs",
            "gronwall_rhs", "prefactor",  "hoelder_integral",
            "initial_defect_hm1_sq",      "failure"};
    csv.cell(p.path_index)
        .cell(p.completed)
        .cell(static_cast<int>(p.steps.size()))
        .cell(p.closing.center_fired)
        .cell(p.closing.center_time)
        .cell(p.closing.lambda_time)
        .cell(p.closing.lambda_peak)
        .cell(p.closing.gap)
        .cell(p.r_tilde)
        .cell(p.nonlinear.r_hat)
        .cell(p.nonlinear.certified)
        .cell(p.nonlinear.gronwall.lhs)
        .cell(p.nonlinear.gronwall.rhs)
        .cell(p.nonlinear.prefactor)
        .cell(p.hoelder_integral)
        .cell(p.initial_defect_hm1_sq)
        .cell(p.failure)
        .endrow();
    return csv.str();
}

std::string histogram_csv(const std::vector<double>& values) {
    Csv csv{"bin_left", "bin_right", "count"};
    if (!values.empty()) {
        double lo = values.front(), hi = values.front();
        for (double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi <= lo) hi = lo + 1e-12 + 1e-12 * std::abs(lo);
        const int bins = 10;
        std::vector<int> count(bins, 0);
        for (double v : values) {
            int b = static_cast<int>((v - lo) / (hi - lo) * bins);
            if (b >= bins) b = bins - 1;
            if (b < 0) b = 0;
            ++count[b];
        }
        for (int b = 0; b < bins; ++b) {
            double w = (hi - lo) / bins;
            csv.cell(lo + b * w).cell(lo + (b + 1) * w).cell(count[b]).endrow();
        }
    }
    return csv.str();
}

} // namespace

std::string format_number(double v) {
    char buf[64];
    // Shortest representation that parses back to the same double.
    for (int prec = 1; prec <= 16; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_snapshot_file(const std::string& path, const Snapshot& snap) {
    const Mesh& mesh = snap.mesh;
    std::string out;
    out.reserve(64u * static_cast<size_t>(mesh.num_vertices()));
    out += "sch-snapshot 1\n";
    out += "requested_t " + format_number(snap.requested_t) + "\n";
    out += "t " + format_number(snap.t) + "\n";
    out += "vertices " + std::to_string(mesh.num_vertices()) + "\n";
    for (const Vec2& p : mesh.vertices)
        out += format_number(p.x) + " " + format_number(p.y) + "\n";
    out += "triangles " + std::to_string(mesh.num_triangles()) + "\n";
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        out += std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) +
               "\n";
    }
    for (const auto& [name, f] : {std::pair<const char*, const FeFunction*>{"u", &snap.u},
                                  std::pair<const char*, const FeFunction*>{"w", &snap.w}}) {
        out += std::string("field ") + name + "\n";
        for (int i = 0; i < f->v.size(); ++i) out += format_number(f->v[i]) + "\n";
    }
    out += "end\n";
    write_text_file(path, out);
}

const FeFunction& SnapshotData::field(const std::string& name) const {
    for (const auto& [n, f] : fields)
        if (n == name) return f;
    throw IoError("snapshot has no field '" + name + "'");
}

SnapshotData read_snapshot_file(const std::string& path) {
    SnapshotReader r(path, read_text_file(path));
    SnapshotData out;

    auto head = r.next_tokens();
    if (head.size() != 2 || head[0] != "sch-snapshot" || head[1] != "1")
        r.fail("not a version-1 snapshot file");

    auto req = r.next_tokens();
    if (req.size() != 2 || req[0] != "requested_t") r.fail("expected 'requested_t <value>'");
    out.requested_t = r.number(req[1]);
    auto tt = r.next_tokens();
    if (tt.size() != 2 || tt[0] != "t") r.fail("expected 't <value>'");
    out.t = r.number(tt[1]);

    auto nv_line = r.next_tokens();
    if (nv_line.size() != 2 || nv_line[0] != "vertices") r.fail("expected 'vertices <count>'");
    long long nv = r.integer(nv_line[1]);
    if (nv <= 0) r.fail("vertex count must be positive");
    Mesh& mesh = out.mesh;
    mesh.vertices.reserve(static_cast<size_t>(nv));
    for (long long i = 0; i < nv; ++i) {
        auto p = r.next_tokens();
        if (p.size() != 2) r.fail("expected 'x y'");
        mesh.vertices.push_back(Vec2{r.number(p[0]), r.number(p[1])});
        mesh.vertex_parents.push_back({static_cast<int>(i), static_cast<int>(i)});
    }

    auto nt_line = r.next_tokens();
    if (nt_line.size() != 2 || nt_line[0] != "triangles") r.fail("expected 'triangles <count>'");
    long long nt = r.integer(nt_line[1]);
    if (nt <= 0) r.fail("triangle count must be positive");
    for (long long i = 0; i < nt; ++i) {
        auto t = r.next_tokens();
        if (t.size() != 3) r.fail("expected three vertex indices");
        Mesh::Tri tri;
        for (int k = 0; k < 3; ++k) {
            long long v = r.integer(t[static_cast<size_t>(k)]);
            if (v < 0 || v >= nv) r.fail("vertex index out of range");
            tri.v[static_cast<size_t>(k)] = static_cast<int>(v);
        }
        mesh.forest.push_back(tri);
        mesh.active.push_back(static_cast<int>(i));
    }
    mesh.generation = 0;
    mesh.rebuild_topology();

    for (;;) {
        auto tok = r.next_tokens();
        if (tok.size() == 1 && tok[0] == "end") break;
        if (tok.size() != 2 || tok[0] != "field") r.fail("expected 'field <name>' or 'end'");
        FeFunction f;
        f.generation = mesh.generation;
        f.v.resize(nv);
        for (long long i = 0; i < nv; ++i) {
            auto val = r.next_tokens();
            if (val.size() != 1) r.fail("expected one nodal value per line");
            f.v[i] = r.number(val[0]);
        }
        out.fields.emplace_back(tok[1], std::move(f));
    }
    return out;
}

void write_vtk_file(const std::string& path, const Mesh& mesh, const FeFunction& u) {
    if (u.generation != mesh.generation || u.size() != mesh.num_vertices())
        throw IoError("vtk export: field does not live on this mesh");
    std::string out;
    out += "# vtk DataFile Version 3.0\n";
    out += "phase field snapshot\n";
    out += "ASCII\n";
    out += "DATASET UNSTRUCTURED_GRID\n";
    out += "POINTS " + std::to_string(mesh.num_vertices()) + " double\n";
    for (const Vec2& p : mesh.vertices)
        out += format_number(p.x) + " " + format_number(p.y) + " 0\n";
    out += "CELLS " + std::to_string(mesh.num_triangles()) + " " +
           std::to_string(4 * mesh.num_triangles()) + "\n";
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " +
               std::to_string(t[2]) + "\n";
    }
    out += "CELL_TYPES " + std::to_string(mesh.num_triangles()) + "\n";
    for (int i = 0; i < mesh.num_triangles(); ++i) out += "5\n";
    out += "POINT_DATA " + std::to_string(mesh.num_vertices()) + "\n";
    out += "SCALARS u double 1\n";
    out += "LOOKUP_TABLE default\n";
    for (int i = 0; i < u.v.size(); ++i) out += format_number(u.v[i]) + "\n";
    write_text_file(path, out);
}

std::vector<std::string> write_path_outputs(const std::string& dir, const RunConfig& cfg,
                                            const PathResult& path) {
    ensure_directory(dir);
    std::vector<std::string> files;
    std::string manifest;
    auto emit = [&](const std::string& name, const std::string& content,
                    const std::string& doc) {
        write_text_file(join_path(dir, name), content);
        files.push_back(name);
        manifest += name + ": " + doc + "\n";
    };

    emit("config.ini", serialize_config(cfg), "resolved configuration (reparses to itself)");
    emit("series.csv", series_csv(path),
         "per accepted step: t, tau, dof, elements, newton_iterations, newton_residual, "
         "rejections, mass, mass_drift, energy, u_center, u_min, u_max, lambda_ch, "
         "eig_iterations, eig_residual, splitting_error, identity_u, identity_w, "
         "adapt_rounds, adapt_refined, adapt_coarsened, eta_space3_u");
    emit("indicators.csv", indicators_csv(path),
         "per accepted step: t, tau, space/time/noise indicator families for the "
         "linear (plain) and nonlinear (hat) branches, mu bounds, lambda_ch");
    emit("eigtrace.csv", eigtrace_csv(path),
         "principal eigenvalue trace: t, lambda, iterations, residual");
    emit("summary.csv", path_summary_csv(path),
         "one row: closing detectors, error bounds and certification");

    for (size_t i = 0; i < path.snapshots.size(); ++i) {
        const Snapshot& s = path.snapshots[i];
        std::string base = "snapshot_" + pad3(static_cast<int>(i));
        write_snapshot_file(join_path(dir, base + ".dat"), s);
        files.push_back(base + ".dat");
        manifest += base + ".dat: fields u, w at t = " + format_number(s.t) +
                    " (requested " + format_number(s.requested_t) + ")\n";
        if (cfg.write_vtk) {
            write_vtk_file(join_path(dir, base + ".vtk"), s.mesh, s.u);
            files.push_back(base + ".vtk");
            manifest += base + ".vtk: legacy VTK ASCII of (mesh, u)\n";
        }
    }

    write_text_file(join_path(dir, "MANIFEST"), manifest);
    files.push_back("MANIFEST");
    return files;
}

std::vector<std::string> write_ensemble_outputs(const std::string& dir, const RunConfig& cfg,
                                                const EnsembleResult& ens) {
    ensure_directory(dir);
    std::vector<std::string> files;
    std::string manifest;

    for (size_t i = 0; i < ens.paths.size(); ++i) {
        std::string sub = "path_" + pad3(static_cast<int>(i));
        write_path_outputs(join_path(dir, sub), cfg, ens.paths[i]);
        files.push_back(sub);
        manifest += sub + "/: per-path outputs (see its MANIFEST)\n";
    }

    auto emit = [&](const std::string& name, const std::string& content,
                    const std::string& doc) {
        write_text_file(join_path(dir, name), content);
        files.push_back(name);
        manifest += name + ": " + doc + "\n";
    };

    emit("config.ini", serialize_config(cfg), "resolved configuration (reparses to itself)");
    emit("histogram.csv", histogram_csv(ens.closing_times),
         "closing-time histogram: bin_left, bin_right, count");
    {
        Csv csv{"path",        "completed",   "steps",
                "center_fired", "closing_center", "closing_lambda",
                "gap",         "r_tilde",     "r_hat",
                "certified",   "failure"};
        for (const PathResult& p : ens.paths)
            csv.cell(p.path_index)
                .cell(p.completed)
                .cell(static_cast<int>(p.steps.size()))
                .cell(p.closing.center_fired)
                .cell(p.closing.center_time)
                .cell(p.closing.lambda_time)
                .cell(p.closing.gap)
                .cell(p.r_tilde)
                .cell(p.nonlinear.r_hat)
                .cell(p.nonlinear.certified)
                .cell(p.failure)
                .endrow();
        emit("summary.csv", csv.str(), "one row per path: closing detectors and bounds");
    }
    {
        Csv csv{"completed",  "failed",          "closing_mean", "closing_stddev",
                "mean_linear", "mean_nonlinear", "eps_tilde_used", "fluctuation",
                "total"};
        csv.cell(ens.completed)
            .cell(ens.failed)
            .cell(ens.closing_mean)
            .cell(ens.closing_stddev)
            .cell(ens.mean_linear)
            .cell(ens.total.mean_nonlinear)
            .cell(ens.total.eps_tilde_used)
            .cell(ens.total.fluctuation)
            .cell(ens.total.total)
            .endrow();
        emit("bounds.csv", csv.str(), "ensemble aggregates and the combined error bound");
    }

    write_text_file(join_path(dir, "MANIFEST"), manifest);
    files.push_back("MANIFEST");
    return files;
}

} // namespace sch
