#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "sch/config.hpp"
#include "sch/driver.hpp"
#include "sch/errors.hpp"
#include "sch/fem.hpp"
#include "sch/io.hpp"
#include "sch/mesh.hpp"

namespace {

namespace fs = std::filesystem;

// Fresh directory under the build tree; wiped on construction so reruns
// start clean.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("io_test_tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    std::string str() const { return path.string(); }
};

std::string io_message(const std::function<void()>& op) {
    try {
        op();
    } catch (const sch::IoError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

sch::Snapshot make_snapshot(int res) {
    sch::Snapshot snap;
    snap.requested_t = 0.003;
    snap.t = 0.0031415926535897931;
    snap.mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, res);
    int n = snap.mesh.num_vertices();
    snap.u.generation = snap.mesh.generation;
    snap.w.generation = snap.mesh.generation;
    snap.u.v.resize(n);
    snap.w.v.resize(n);
    for (int i = 0; i < n; ++i) {
        sch::Vec2 p = snap.mesh.vertices[static_cast<size_t>(i)];
        snap.u.v[i] = std::sin(3.0 * p.x + p.y);
        snap.w.v[i] = p.y * std::cos(p.x) + 1.0 / 3.0;
    }
    return snap;
}

// A recognizable two-step result with one snapshot; values are arbitrary but
// distinct so cells can be traced to fields.
sch::PathResult make_path_result() {
    sch::PathResult p;
    p.path_index = 0;
    p.completed = true;
    p.steps.resize(2);
    for (int i = 0; i < 2; ++i) {
        sch::StepRecord& r = p.steps[static_cast<size_t>(i)];
        r.t = 0.1 * (i + 1);
        r.tau = 0.1;
        r.dof = 25 + i;
        r.elements = 32;
        r.newton_iterations = 3 + i;
        r.newton_residual = 1e-12;
        r.mass = 0.125;
        r.energy = 2.5 - i;
        r.u_center = -0.5 + i;
        r.u_min = -1.01;
        r.u_max = 1.01;
        r.eig_iterations = 7;
        r.eig_residual = 1e-9;
        r.indicators.t = r.t;
        r.indicators.tau = r.tau;
        r.indicators.lambda_ch = 10.0 + i;
        r.adapt.eta_final = 0.25;
    }
    p.closing.center_fired = true;
    p.closing.center_time = 0.15;
    p.closing.lambda_fired = true;
    p.closing.lambda_time = 0.2;
    p.closing.lambda_peak = 11.0;
    p.closing.gap = 0.05;
    p.r_tilde = 0.03;
    p.nonlinear.r_hat = 0.7;
    p.nonlinear.certified = true;
    p.hoelder_integral = 1.5;
    p.initial_defect_hm1_sq = 1e-7;
    p.snapshots.push_back(make_snapshot(2));
    return p;
}

} // namespace

TEST_CASE("format_number is round-trip exact and shortest") {
    // Values with short decimal forms come back verbatim.
    CHECK(sch::format_number(0.0) == "0");
    CHECK(sch::format_number(1.0) == "1");
    CHECK(sch::format_number(-1.0) == "-1");
    CHECK(sch::format_number(0.5) == "0.5");
    CHECK(sch::format_number(0.012) == "0.012");
    CHECK(sch::format_number(100.0) == "100");
    CHECK(sch::format_number(1e300) == "1e+300");
    CHECK(sch::format_number(3.5e-5) == "3.5e-05");

    // Exact round trip on awkward values and on random bit patterns.
    std::vector<double> vals = {1.0 / 3.0,
                                M_PI,
                                std::nextafter(1.0, 2.0),
                                std::numeric_limits<double>::epsilon(),
                                std::numeric_limits<double>::min(),
                                std::numeric_limits<double>::denorm_min(),
                                std::numeric_limits<double>::max(),
                                6.02214076e23,
                                -0.1,
                                1.0 / 1024.0};
    std::mt19937_64 rng(7);
    for (int i = 0; i < 5000; ++i) {
        uint64_t bits = rng();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        if (std::isfinite(v)) vals.push_back(v);
    }
    for (double v : vals) {
        std::string s = sch::format_number(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("text files and directories") {
    TempDir dir("text");

    SUBCASE("round trip preserves bytes") {
        std::string content = "line1\nline2\r\n\ttabbed no trailing newline";
        sch::write_text_file(dir.file("a.txt"), content);
        CHECK(sch::read_text_file(dir.file("a.txt")) == content);
    }

    SUBCASE("ensure_directory nests and is idempotent") {
        std::string nested = (dir.path / "x" / "y" / "z").string();
        sch::ensure_directory(nested);
        sch::ensure_directory(nested);
        CHECK(fs::is_directory(nested));
    }

    SUBCASE("missing paths raise IoError naming the path") {
        std::string missing = dir.file("nope.txt");
        std::string msg = io_message([&] { (void)sch::read_text_file(missing); });
        CHECK(contains(msg, missing));
        std::string bad_dir = dir.file("no_such_dir/out.txt");
        msg = io_message([&] { sch::write_text_file(bad_dir, "x"); });
        CHECK(contains(msg, bad_dir));
    }
}

TEST_CASE("snapshot files round trip exactly") {
    TempDir dir("snap");
    sch::Snapshot snap = make_snapshot(3);
    std::string path = dir.file("s.dat");
    sch::write_snapshot_file(path, snap);

    sch::SnapshotData back = sch::read_snapshot_file(path);
    CHECK(back.requested_t == snap.requested_t);
    CHECK(back.t == snap.t);
    REQUIRE(back.mesh.num_vertices() == snap.mesh.num_vertices());
    REQUIRE(back.mesh.num_triangles() == snap.mesh.num_triangles());
    CHECK(back.mesh.generation == 0);
    for (int i = 0; i < snap.mesh.num_vertices(); ++i) {
        CHECK(back.mesh.vertices[static_cast<size_t>(i)].x ==
              snap.mesh.vertices[static_cast<size_t>(i)].x);
        CHECK(back.mesh.vertices[static_cast<size_t>(i)].y ==
              snap.mesh.vertices[static_cast<size_t>(i)].y);
    }
    REQUIRE(back.fields.size() == 2);
    const sch::FeFunction& u = back.field("u");
    const sch::FeFunction& w = back.field("w");
    for (int i = 0; i < snap.mesh.num_vertices(); ++i) {
        CHECK(u.v[i] == snap.u.v[i]);
        CHECK(w.v[i] == snap.w.v[i]);
    }
    CHECK_THROWS_AS((void)back.field("v"), sch::IoError);

    // The reconstructed topology is evaluable: point evaluation agrees with
    // the source mesh and the total area is intact.
    sch::FemCache cache(back.mesh);
    CHECK(cache.area() == doctest::Approx(4.0).epsilon(1e-14));
    for (sch::Vec2 p : {sch::Vec2{0.1, -0.4}, sch::Vec2{-0.9, 0.9}, sch::Vec2{0.0, 0.0}}) {
        CHECK(sch::evaluate_at(back.mesh, u, p) ==
              doctest::Approx(sch::evaluate_at(snap.mesh, snap.u, p)).epsilon(1e-14));
    }
}

TEST_CASE("snapshot reader rejects malformed files with line numbers") {
    TempDir dir("corrupt");
    sch::Snapshot snap = make_snapshot(2);
    std::string good_path = dir.file("good.dat");
    sch::write_snapshot_file(good_path, snap);
    std::string good = sch::read_text_file(good_path);
    std::vector<std::string> lines = split_lines(good);

    auto write_lines = [&](const std::vector<std::string>& ls, const std::string& name) {
        std::string text;
        for (const std::string& l : ls) text += l + "\n";
        std::string p = dir.file(name);
        sch::write_text_file(p, text);
        return p;
    };

    SUBCASE("wrong header") {
        std::vector<std::string> bad = lines;
        bad[0] = "sch-snapshot 2";
        std::string p = write_lines(bad, "header.dat");
        std::string msg = io_message([&] { (void)sch::read_snapshot_file(p); });
        CHECK(contains(msg, "not a version-1 snapshot file"));
        CHECK(contains(msg, "line 1"));
    }

    SUBCASE("truncation reports end of file") {
        std::vector<std::string> bad(lines.begin(), lines.begin() + 6);
        std::string p = write_lines(bad, "trunc.dat");
        std::string msg = io_message([&] { (void)sch::read_snapshot_file(p); });
        CHECK(contains(msg, "unexpected end of file"));
        CHECK(contains(msg, p));
    }

    SUBCASE("corrupt coordinate names its line") {
        // Line 5 is the first vertex coordinate pair (header, times, count).
        std::vector<std::string> bad = lines;
        bad[4] = "abc 0.5";
        std::string p = write_lines(bad, "coord.dat");
        std::string msg = io_message([&] { (void)sch::read_snapshot_file(p); });
        CHECK(contains(msg, "expected a number"));
        CHECK(contains(msg, "line 5"));
    }

    SUBCASE("triangle vertex index out of range") {
        size_t tri_header = 0;
        for (size_t i = 0; i < lines.size(); ++i)
            if (lines[i].rfind("triangles ", 0) == 0) tri_header = i;
        REQUIRE(tri_header > 0);
        std::vector<std::string> bad = lines;
        bad[tri_header + 1] = "0 1 999";
        std::string p = write_lines(bad, "tri.dat");
        std::string msg = io_message([&] { (void)sch::read_snapshot_file(p); });
        CHECK(contains(msg, "vertex index out of range"));
    }

    SUBCASE("zero vertices rejected") {
        std::vector<std::string> bad = {lines[0], lines[1], lines[2], "vertices 0"};
        std::string p = write_lines(bad, "empty.dat");
        std::string msg = io_message([&] { (void)sch::read_snapshot_file(p); });
        CHECK(contains(msg, "vertex count must be positive"));
    }
}

TEST_CASE("vtk export structure") {
    TempDir dir("vtk");
    sch::Snapshot snap = make_snapshot(2);
    std::string path = dir.file("u.vtk");
    sch::write_vtk_file(path, snap.mesh, snap.u);
    std::string text = sch::read_text_file(path);
    std::vector<std::string> lines = split_lines(text);

    REQUIRE(lines.size() > 6);
    CHECK(lines[0] == "# vtk DataFile Version 3.0");
    CHECK(lines[2] == "ASCII");
    CHECK(lines[3] == "DATASET UNSTRUCTURED_GRID");
    CHECK(contains(text, "POINTS " + std::to_string(snap.mesh.num_vertices()) + " double"));
    CHECK(contains(text, "CELL_TYPES " + std::to_string(snap.mesh.num_triangles())));
    CHECK(contains(text, "SCALARS u double 1"));
    int type_lines = 0;
    for (const std::string& l : lines)
        if (l == "5") ++type_lines;
    CHECK(type_lines == snap.mesh.num_triangles());

    // A field living on a different mesh is rejected.
    sch::FeFunction stale = snap.u;
    stale.v.conservativeResize(snap.mesh.num_vertices() - 1);
    CHECK_THROWS_AS(sch::write_vtk_file(dir.file("bad.vtk"), snap.mesh, stale), sch::IoError);
}

TEST_CASE("per-path output set") {
    sch::RunConfig cfg = sch::default_config();
    cfg.resolve();
    sch::PathResult path = make_path_result();

    SUBCASE("file list, manifest and reparse fixpoint") {
        TempDir dir("path");
        std::vector<std::string> files = sch::write_path_outputs(dir.str(), cfg, path);
        std::vector<std::string> expected = {"config.ini",   "series.csv",
                                             "indicators.csv", "eigtrace.csv",
                                             "summary.csv",  "snapshot_000.dat",
                                             "MANIFEST"};
        REQUIRE(files == expected);
        for (const std::string& f : files) CHECK(fs::is_regular_file(dir.path / f));

        // Every file except the manifest itself is documented in it.
        std::string manifest = sch::read_text_file(dir.file("MANIFEST"));
        for (const std::string& f : files)
            if (f != "MANIFEST") CHECK(contains(manifest, f + ":"));

        // The written configuration is a serialization fixpoint.
        std::string ini = sch::read_text_file(dir.file("config.ini"));
        CHECK(sch::serialize_config(sch::parse_config(ini)) == ini);

        // series.csv: header plus one row per step, numbers in column order.
        std::vector<std::string> series = split_lines(sch::read_text_file(dir.file("series.csv")));
        REQUIRE(series.size() == 3);
        CHECK(series[0].rfind("t,tau,dof", 0) == 0);
        CHECK(series[1].rfind("0.1,0.1,25,32,3,", 0) == 0);
        CHECK(series[2].rfind("0.2,0.1,26,32,4,", 0) == 0);

        std::vector<std::string> ind =
            split_lines(sch::read_text_file(dir.file("indicators.csv")));
        REQUIRE(ind.size() == 3);
        std::vector<std::string> eig = split_lines(sch::read_text_file(dir.file("eigtrace.csv")));
        REQUIRE(eig.size() == 3);
        CHECK(eig[1] == "0.1,10,7,1e-09");

        // Path summary carries the closing detectors and bounds.
        std::vector<std::string> summary =
            split_lines(sch::read_text_file(dir.file("summary.csv")));
        REQUIRE(summary.size() == 2);
        CHECK(contains(summary[1], "0.15"));
        CHECK(contains(summary[1], "0.7"));

        // The stored snapshot is re-readable and intact.
        sch::SnapshotData snap = sch::read_snapshot_file(dir.file("snapshot_000.dat"));
        CHECK(snap.field("u").v[0] == path.snapshots[0].u.v[0]);
    }

    SUBCASE("vtk toggle adds one file per snapshot") {
        TempDir dir("path_vtk");
        cfg.write_vtk = true;
        std::vector<std::string> files = sch::write_path_outputs(dir.str(), cfg, path);
        CHECK(std::count(files.begin(), files.end(), "snapshot_000.vtk") == 1);
        CHECK(fs::is_regular_file(dir.path / "snapshot_000.vtk"));
    }
}

TEST_CASE("ensemble output layout") {
    sch::RunConfig cfg = sch::default_config();
    cfg.resolve();

    sch::EnsembleResult ens;
    ens.paths.push_back(make_path_result());
    ens.paths.push_back(make_path_result());
    ens.paths[1].path_index = 1;
    ens.paths[1].completed = false;
    ens.paths[1].failure = "newton stalled, tau at floor\nsecond line";
    ens.completed = 1;
    ens.failed = 1;
    ens.closing_times = {0.010, 0.013, 0.020};
    ens.closing_mean = 0.01433;
    ens.closing_stddev = 0.0042;
    ens.mean_linear = 0.04;
    ens.total.mean_nonlinear = 0.35;
    ens.total.eps_tilde_used = 0.09;
    ens.total.fluctuation = 0.8;
    ens.total.total = 1.19;

    TempDir dir("ens");
    std::vector<std::string> files = sch::write_ensemble_outputs(dir.str(), cfg, ens);

    std::vector<std::string> expected = {"path_000",      "path_001",    "config.ini",
                                         "histogram.csv", "summary.csv", "bounds.csv",
                                         "MANIFEST"};
    REQUIRE(files == expected);
    CHECK(fs::is_directory(dir.path / "path_000"));
    CHECK(fs::is_directory(dir.path / "path_001"));
    CHECK(fs::is_regular_file(dir.path / "path_001" / "MANIFEST"));
    CHECK(fs::is_regular_file(dir.path / "path_000" / "series.csv"));

    // Histogram: ten bins covering [min, max], counts adding up to the
    // sample count.
    std::vector<std::string> hist = split_lines(sch::read_text_file(dir.file("histogram.csv")));
    REQUIRE(hist.size() == 11);
    int total_count = 0;
    for (size_t i = 1; i < hist.size(); ++i) {
        size_t last = hist[i].rfind(',');
        total_count += std::stoi(hist[i].substr(last + 1));
    }
    CHECK(total_count == 3);
    CHECK(hist[1].rfind("0.01,", 0) == 0);

    // Per-path summary: embedded commas and newlines in the failure string
    // are sanitized so the CSV stays rectangular.
    std::vector<std::string> summary = split_lines(sch::read_text_file(dir.file("summary.csv")));
    REQUIRE(summary.size() == 3);
    CHECK(contains(summary[2], "newton stalled; tau at floor;second line"));

    std::vector<std::string> bounds = split_lines(sch::read_text_file(dir.file("bounds.csv")));
    REQUIRE(bounds.size() == 2);
    CHECK(bounds[1] == "1,1,0.01433,0.0042,0.04,0.35,0.09,0.8,1.19");

    std::string manifest = sch::read_text_file(dir.file("MANIFEST"));
    CHECK(contains(manifest, "path_000/"));
    CHECK(contains(manifest, "bounds.csv:"));

    // No closing samples: the histogram degenerates to its header.
    sch::EnsembleResult empty_ens;
    TempDir dir2("ens_empty");
    empty_ens.paths.push_back(make_path_result());
    sch::write_ensemble_outputs(dir2.str(), cfg, empty_ens);
    CHECK(sch::read_text_file(dir2.file("histogram.csv")) == "bin_left,bin_right,count\n");
}
