// nls: command-line front end for subspace / motion segmentation.
//
//   nls synth union|motion [flags] -o DIR
//   nls segment INPUT [flags] -o labels.txt --report report.json
//   nls eval --pred labels.txt --truth truth.txt
//   nls bench DATASET_DIR [--motions 2|3|all] --report out.json [--sweep-threshold] [--sweep-k]
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate input.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nls/nls.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;

int exit_code_for(nls::ErrorKind kind) {
    switch (kind) {
        case nls::ErrorKind::parameter:
            return kExitUsage;
        case nls::ErrorKind::input:
        case nls::ErrorKind::dimension:
            return kExitData;
        case nls::ErrorKind::degenerate:
        case nls::ErrorKind::configuration:
        case nls::ErrorKind::internal:
            return kExitDegenerate;
    }
    return kExitDegenerate;
}

// Reference error rates for the full 155-sequence benchmark (fractions).
struct ReferenceTarget {
    const char* key;
    double average;
    std::size_t sequences;
};
constexpr ReferenceTarget kReferenceTargets[] = {
    {"two_motion", 0.0057, 120},
    {"three_motion", 0.0131, 35},
    {"all", 0.0076, 155},
};
constexpr double kReferenceTolerance = 0.003;  // absolute, i.e. 0.3 percentage points

struct PipelineFlags {
    int dim = 4;
    int clusters = 2;
    int neighbors = 3;
    std::string rank = "auto";
    double kappa = 0.1;
    double norm = 2.0;
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 100;
    double threshold_factor = 1.0;
    int segment_rank = 0;

    void add_to(CLI::App* app, bool with_clusters, const std::string& rank_help) {
        app->add_option("--dim", dim, "Subspace dimension d")->capture_default_str();
        if (with_clusters) app->add_option("--clusters", clusters, "Number of clusters n")->capture_default_str();
        app->add_option("--neighbors", neighbors, "Neighbors k per local subspace (k >= d-1)")->capture_default_str();
        app->add_option("--rank", rank, rank_help)->capture_default_str();
        app->add_option("--kappa", kappa, "Rank penalty for --rank auto")->capture_default_str();
        app->add_option("--norm", norm, "Norm p used for normalization and distances")->capture_default_str();
        app->add_option("--seed", seed, "Seed for k-means")->capture_default_str();
        app->add_option("--restarts", restarts, "k-means restarts")->capture_default_str();
        app->add_option("--max-iter", max_iter, "k-means iteration cap")->capture_default_str();
        app->add_option("--threshold-factor", threshold_factor, "Scale the data-driven threshold index")
            ->capture_default_str();
        app->add_option("--segment-rank", segment_rank, "Singular triplets kept before k-means (0 = clusters)")
            ->capture_default_str();
    }

    // `motions` fills in the default rank 4n when rank == "default".
    nls::NlsConfig config(int motions) const {
        nls::NlsConfig c;
        c.subspace_dim = dim;
        c.num_clusters = motions;
        c.neighbors = neighbors;
        if (rank == "auto") {
            c.rank_mode = nls::EstimatedRank{kappa};
        } else if (rank == "default") {
            c.rank_mode = nls::KnownRank{4 * motions};
        } else {
            try {
                std::size_t pos = 0;
                const int r = std::stoi(rank, &pos);
                if (pos != rank.size()) throw std::invalid_argument(rank);
                c.rank_mode = nls::KnownRank{r};
            } catch (const std::exception&) {
                throw nls::ParameterError("--rank must be 'auto' or a positive integer, got '" + rank + "'");
            }
        }
        c.norm_p = norm;
        c.seed = seed;
        c.kmeans_restarts = restarts;
        c.kmeans_max_iter = max_iter;
        c.threshold_factor = threshold_factor;
        c.segment_rank = segment_rank;
        c.validate();
        return c;
    }

    json describe() const {
        return {{"dim", dim},       {"neighbors", neighbors}, {"rank", rank},
                {"kappa", kappa},   {"norm", norm},           {"seed", seed},
                {"restarts", restarts}, {"max_iter", max_iter}, {"threshold_factor", threshold_factor}};
    }
};

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw nls::InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json stats_json(const nls::GroupStats& g) {
    return {{"group", g.group},
            {"count", g.count},
            {"average", g.average},
            {"median", g.median},
            {"average_percent", nls::format_percent(g.average)},
            {"median_percent", nls::format_percent(g.median)}};
}

json aggregate_json(const nls::AggregateReport& rep) {
    json groups = json::array();
    for (const auto& g : rep.groups) groups.push_back(stats_json(g));
    return {{"groups", groups}, {"overall", stats_json(rep.overall)}};
}

// ---------------------------------------------------------------------------

struct SynthUnionFlags {
    int ambient = 30, dim = 4, subspaces = 2, points = 40;
    double noise = 0.0;
    std::optional<double> min_angle_deg;
    std::uint64_t seed = 0;
    std::string out;
};

int run_synth_union(const SynthUnionFlags& f) {
    nls::UnionSpec spec;
    spec.ambient_dim = f.ambient;
    spec.subspace_dim = f.dim;
    spec.num_subspaces = f.subspaces;
    spec.points_per_subspace.assign(static_cast<std::size_t>(std::max(f.subspaces, 0)), f.points);
    spec.noise_sigma = f.noise;
    if (f.min_angle_deg) spec.min_principal_angle = *f.min_angle_deg * std::numbers::pi / 180.0;
    spec.seed = f.seed;
    const auto sample = nls::sample_union(spec);
    nls::io::save_matrix(fs::path(f.out) / "data.csv", sample.points);
    nls::io::save_labels(fs::path(f.out) / "truth.txt", sample.labels);
    std::cout << "wrote " << sample.points.cols() << " points in R^" << sample.points.rows() << " to " << f.out
              << '\n';
    return 0;
}

struct SynthMotionFlags {
    int frames = 30, objects = 2, points = 50;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int run_synth_motion(const SynthMotionFlags& f) {
    const auto ts = nls::random_motion_scene({f.frames, f.objects, f.points, f.noise, f.seed});
    const fs::path dir(f.out);
    nls::io::save_tracks(dir / "tracks.txt", ts);
    nls::io::save_labels(dir / "truth.txt", *ts.labels);
    std::ofstream(dir / "group.txt") << "synthetic\n";
    std::cout << "wrote " << ts.tracks.size() << " tracks over " << ts.frames << " frames to " << f.out << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct SegmentFlags {
    std::string input;
    std::string labels_out;
    std::string report;
    std::string truth;
    std::string group = "synthetic";
    bool timings = false;
    PipelineFlags pipeline;
};

int run_segment(const SegmentFlags& f) {
    // Parameters are checked before any data is read so usage errors win.
    const nls::NlsConfig cfg = f.pipeline.config(f.pipeline.clusters);

    const auto t0 = std::chrono::steady_clock::now();
    nls::Matrix w;
    std::optional<nls::Labeling> truth;
    if (nls::io::is_tracks_file(f.input)) {
        auto ts = nls::io::load_tracks(f.input);
        w = nls::trajectory_matrix(ts);
        truth = ts.labels;
    } else {
        w = nls::io::load_matrix(f.input);
        fs::path guess = fs::path(f.input).parent_path() / "truth.txt";
        if (fs::exists(guess)) truth = nls::io::load_labels(guess);
    }
    if (!f.truth.empty()) truth = nls::io::load_labels(f.truth);
    const auto t1 = std::chrono::steady_clock::now();

    const nls::Segmentation seg = nls::nls_segment(w, cfg);
    const auto t2 = std::chrono::steady_clock::now();

    if (!f.labels_out.empty()) nls::io::save_labels(f.labels_out, seg.labels);

    json error = nullptr;
    if (truth) {
        const double e = nls::misclassification_rate(seg.labels, *truth);
        error = e;
        std::cout << "misclassification: " << nls::format_percent(e) << '\n';
    }
    std::cout << "r=" << seg.diagnostics.rank << " T_d=" << seg.diagnostics.threshold_index
              << " eta=" << seg.diagnostics.eta << '\n';

    if (!f.report.empty()) {
        json rep = {{"sequence", fs::path(f.input).stem().string()},
                    {"group", f.group},
                    {"motions", cfg.num_clusters},
                    {"error", error},
                    {"r", seg.diagnostics.rank},
                    {"T_d", seg.diagnostics.threshold_index},
                    {"eta", seg.diagnostics.eta},
                    {"seed", cfg.seed},
                    {"data_driven_T_d", seg.diagnostics.data_driven_index},
                    {"points", w.cols()},
                    {"config", f.pipeline.describe()}};
        if (f.timings) {
            using ms = std::chrono::duration<double, std::milli>;
            rep["timings_ms"] = {{"load", ms(t1 - t0).count()}, {"segment", ms(t2 - t1).count()}};
        }
        write_json(f.report, rep);
    }
    return 0;
}

// ---------------------------------------------------------------------------

int run_eval(const std::string& pred_path, const std::string& truth_path) {
    const auto pred = nls::io::load_labels(pred_path);
    const auto truth = nls::io::load_labels(truth_path);
    const double e = nls::misclassification_rate(pred, truth);
    std::cout << "misclassification: " << nls::io::format_real(e) << " (" << nls::format_percent(e) << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchFlags {
    std::string dataset;
    std::string motions = "all";
    std::string report;
    bool sweep_threshold = false;
    bool sweep_k = false;
    std::vector<double> factors = nls::kDefaultThresholdFactors;
    std::vector<int> ks = nls::kDefaultNeighborCounts;
    PipelineFlags pipeline;
};

struct BenchRow {
    nls::io::SequenceEntry entry;
    int motions = 0;
    bool selected = true;
    bool ok = false;
    std::string failure;
    double error = 0.0;
    int rank = 0;
    std::int64_t threshold_index = 0;
    double eta = 0.0;
    std::vector<nls::ThresholdSweepPoint> threshold_sweep;
    std::vector<nls::NeighborSweepPoint> neighbor_sweep;
};

int run_bench(const BenchFlags& f) {
    if (f.motions != "2" && f.motions != "3" && f.motions != "all")
        throw nls::ParameterError("--motions must be 2, 3 or all");
    f.pipeline.config(2);  // parameter validation only

    std::vector<BenchRow> rows;
    for (auto& e : nls::io::list_sequences(f.dataset)) {
        if (!fs::exists(e.dir / "truth.txt")) {
            std::cerr << "skipping " << e.name << ": no truth.txt\n";
            continue;
        }
        BenchRow row;
        row.entry = e;
        rows.push_back(std::move(row));
    }

    nls::parallel_for(rows.size(), [&](std::size_t i) {
        BenchRow& row = rows[i];
        try {
            const auto ts = nls::io::load_tracks(row.entry.dir / "tracks.txt", row.entry.dir / "truth.txt");
            const nls::Labeling& truth = *ts.labels;
            std::vector<int> distinct(truth.begin(), truth.end());
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            row.motions = static_cast<int>(distinct.size());
            if (f.motions != "all" && std::to_string(row.motions) != f.motions) {
                row.selected = false;
                return;
            }

            const nls::Matrix w = nls::trajectory_matrix(ts);
            const nls::NlsConfig cfg = f.pipeline.config(row.motions);
            const auto seg = nls::nls_segment(w, cfg);
            row.error = nls::misclassification_rate(seg.labels, truth);
            row.rank = seg.diagnostics.rank;
            row.threshold_index = seg.diagnostics.threshold_index;
            row.eta = seg.diagnostics.eta;
            if (f.sweep_threshold) row.threshold_sweep = nls::sweep_threshold(w, cfg, f.factors, truth);
            if (f.sweep_k) row.neighbor_sweep = nls::sweep_neighbors(w, cfg, f.ks, truth);
            row.ok = true;
        } catch (const std::exception& ex) {
            row.failure = ex.what();
        }
    });

    json sequences = json::array();
    std::map<std::string, std::vector<nls::SequenceResult>> buckets;
    std::map<std::string, std::map<double, std::vector<nls::SequenceResult>>> tsweep;
    std::map<std::string, std::map<int, std::vector<nls::SequenceResult>>> ksweep;
    std::size_t failures = 0;
    for (const auto& row : rows) {
        if (!row.selected) continue;
        json s = {{"sequence", row.entry.name},
                  {"group", row.entry.group},
                  {"motions", row.motions},
                  {"error", row.ok ? json(row.error) : json(nullptr)},
                  {"r", row.ok ? json(row.rank) : json(nullptr)},
                  {"T_d", row.ok ? json(row.threshold_index) : json(nullptr)},
                  {"eta", row.ok ? json(row.eta) : json(nullptr)},
                  {"seed", f.pipeline.seed}};
        if (!row.ok) {
            ++failures;
            s["failure"] = row.failure;
            std::cerr << "sequence " << row.entry.name << " failed: " << row.failure << '\n';
        }
        if (row.ok) {
            const nls::SequenceResult res{row.entry.name, row.entry.group, row.motions, row.error};
            const std::string bucket = row.motions == 2 ? "two_motion" : row.motions == 3 ? "three_motion" : "";
            if (!bucket.empty()) buckets[bucket].push_back(res);
            buckets["all"].push_back(res);
            if (!row.threshold_sweep.empty()) {
                json js = json::array();
                for (const auto& p : row.threshold_sweep) {
                    js.push_back({{"factor", p.factor}, {"T", p.threshold_index}, {"error", p.error}});
                    auto r2 = res;
                    r2.error_rate = p.error;
                    if (!bucket.empty()) tsweep[bucket][p.factor].push_back(r2);
                    tsweep["all"][p.factor].push_back(r2);
                }
                s["threshold_sweep"] = js;
            }
            if (!row.neighbor_sweep.empty()) {
                json js = json::array();
                for (const auto& p : row.neighbor_sweep) {
                    js.push_back({{"k", p.neighbors}, {"error", p.error}});
                    auto r2 = res;
                    r2.error_rate = p.error;
                    if (!bucket.empty()) ksweep[bucket][p.neighbors].push_back(r2);
                    ksweep["all"][p.neighbors].push_back(r2);
                }
                s["neighbor_sweep"] = js;
            }
        }
        sequences.push_back(std::move(s));
    }

    json agg = json::object();
    for (const char* key : {"two_motion", "three_motion", "all"}) {
        auto it = buckets.find(key);
        if (it == buckets.end()) continue;
        const auto rep = nls::aggregate(it->second);
        agg[key] = aggregate_json(rep);
        std::cout << key << " (" << rep.overall.count << " seq)\n";
        for (const auto& g : rep.groups)
            std::cout << "  " << g.group << " (" << g.count << "): average " << nls::format_percent(g.average)
                      << ", median " << nls::format_percent(g.median) << '\n';
        std::cout << "  all: average " << nls::format_percent(rep.overall.average) << ", median "
                  << nls::format_percent(rep.overall.median) << '\n';
    }

    json targets = json::object();
    bool full = true;
    bool pass = true;
    for (const auto& t : kReferenceTargets) {
        targets[t.key] = {{"average", t.average}, {"average_percent", nls::format_percent(t.average)},
                          {"sequences", t.sequences}};
        auto it = buckets.find(t.key);
        if (it == buckets.end() || it->second.size() != t.sequences) {
            full = false;
            continue;
        }
        const double got = nls::aggregate(it->second).overall.average;
        targets[t.key]["observed"] = got;
        targets[t.key]["within_tolerance"] = std::abs(got - t.average) <= kReferenceTolerance;
        pass = pass && std::abs(got - t.average) <= kReferenceTolerance;
    }

    json report = {{"dataset", fs::path(f.dataset).filename().string()},
                   {"motions", f.motions},
                   {"config", f.pipeline.describe()},
                   {"sequences", sequences},
                   {"failures", failures},
                   {"aggregate", agg},
                   {"reference",
                    {{"targets", targets},
                     {"tolerance", kReferenceTolerance},
                     {"checked", full},
                     {"pass", full ? json(pass) : json(nullptr)}}}};

    auto sweep_json = [](const auto& sweep, const char* key_name) {
        json out = json::object();
        for (const auto& [bucket, byval] : sweep) {
            json arr = json::array();
            for (const auto& [val, results] : byval) {
                const auto rep = nls::aggregate(results);
                arr.push_back({{key_name, val},
                               {"average", rep.overall.average},
                               {"median", rep.overall.median},
                               {"average_percent", nls::format_percent(rep.overall.average)},
                               {"median_percent", nls::format_percent(rep.overall.median)}});
            }
            out[bucket] = arr;
        }
        return out;
    };
    if (f.sweep_threshold) report["threshold_sweep"] = sweep_json(tsweep, "factor");
    if (f.sweep_k) report["neighbor_sweep"] = sweep_json(ksweep, "k");

    if (full)
        std::cout << "reference check: " << (pass ? "PASS" : "FAIL") << " (tolerance "
                  << nls::format_percent(kReferenceTolerance) << ")\n";
    if (!f.report.empty()) write_json(f.report, report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nearness-to-local-subspace segmentation"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate synthetic ground-truthed data");
    synth->require_subcommand(1);
    SynthUnionFlags uf;
    auto* su = synth->add_subcommand("union", "Points from a union of random subspaces");
    su->add_option("--ambient", uf.ambient, "Ambient dimension")->capture_default_str();
    su->add_option("--dim", uf.dim, "Subspace dimension")->capture_default_str();
    su->add_option("--subspaces", uf.subspaces, "Number of subspaces")->capture_default_str();
    su->add_option("--points", uf.points, "Points per subspace")->capture_default_str();
    su->add_option("--noise", uf.noise, "Gaussian noise std per coordinate")->capture_default_str();
    su->add_option("--min-angle", uf.min_angle_deg, "Minimum principal angle between subspaces, degrees");
    su->add_option("--seed", uf.seed, "Random seed")->capture_default_str();
    su->add_option("-o,--out", uf.out, "Output directory")->required();

    SynthMotionFlags mf;
    auto* sm = synth->add_subcommand("motion", "Feature tracks of rigid objects under an affine camera");
    sm->add_option("--frames", mf.frames, "Number of frames")->capture_default_str();
    sm->add_option("--objects", mf.objects, "Independently moving objects")->capture_default_str();
    sm->add_option("--points", mf.points, "Tracked points per object")->capture_default_str();
    sm->add_option("--noise", mf.noise, "Tracking noise std (image units)")->capture_default_str();
    sm->add_option("--seed", mf.seed, "Random seed")->capture_default_str();
    sm->add_option("-o,--out", mf.out, "Output directory")->required();

    SegmentFlags sf;
    auto* seg = app.add_subcommand("segment", "Segment a data matrix or a tracks file");
    seg->add_option("input", sf.input, "Matrix (.csv) or tracks file")->required()->check(CLI::ExistingFile);
    sf.pipeline.add_to(seg, true, "'auto' or a fixed rank R");
    seg->add_option("-o,--out", sf.labels_out, "Write predicted labels here");
    seg->add_option("--report", sf.report, "Write a JSON report here");
    seg->add_option("--truth", sf.truth, "Ground-truth labels (default: companion file if present)");
    seg->add_option("--group", sf.group, "Group name recorded in the report")->capture_default_str();
    seg->add_flag("--timings", sf.timings, "Include wall-clock timings in the report");

    std::string pred_path, truth_path;
    auto* ev = app.add_subcommand("eval", "Misclassification rate of predicted labels");
    ev->add_option("--pred", pred_path, "Predicted labels")->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", truth_path, "True labels")->required()->check(CLI::ExistingFile);

    BenchFlags bf;
    bf.pipeline.rank = "default";
    auto* bench = app.add_subcommand("bench", "Batch over sequence directories");
    bench->add_option("dataset", bf.dataset, "Directory of sequence directories")
        ->required()
        ->check(CLI::ExistingDirectory);
    bench->add_option("--motions", bf.motions, "2, 3 or all")->capture_default_str();
    bench->add_option("--report", bf.report, "Write a JSON report here");
    bf.pipeline.add_to(bench, false, "'default' (4 x motions), 'auto', or a fixed rank R");
    bench->add_flag("--sweep-threshold", bf.sweep_threshold, "Also rerun with scaled threshold indices");
    bench->add_option("--factors", bf.factors, "Threshold factors for --sweep-threshold");
    bench->add_flag("--sweep-k", bf.sweep_k, "Also rerun with several neighbor counts");
    bench->add_option("--ks", bf.ks, "Neighbor counts for --sweep-k");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (su->parsed()) return run_synth_union(uf);
        if (sm->parsed()) return run_synth_motion(mf);
        if (seg->parsed()) return run_segment(sf);
        if (ev->parsed()) return run_eval(pred_path, truth_path);
        if (bench->parsed()) return run_bench(bf);
    } catch (const nls::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
