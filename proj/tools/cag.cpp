// Copyright 2026 The CAG Surrogate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// cag: generate / train / predict / bench front end.

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cag/bench.hpp"
#include "cag/config.hpp"
#include "cag/dataset.hpp"
#include "cag/error.hpp"
#include "cag/pipeline.hpp"
#include "cag/sampling.hpp"
#include "cag/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_failure = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::uint64_t parse_seed(const std::string& text, const char* where) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw UsageError(std::string(where) + ": '" + text + "' is not a non-negative integer");
    }
    return v;
}

/// --seed beats CAG_SEED; neither gives 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("CAG_SEED"); env && *env) return parse_seed(env, "CAG_SEED");
    return 0;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    cag::detail::write_file(path, text);
}

/// Split "a,b,c" into numbers.
template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    for (auto tok : cag::detail::split_commas(text)) {
        tok = cag::detail::trim(tok);
        if (tok.empty()) continue;
        double v = 0.0;
        if (!cag::detail::parse_double(tok, v) || v < 0.0 || v != static_cast<double>(static_cast<T>(v))) {
            throw UsageError(std::string(what) + ": bad entry '" + std::string(tok) + "'");
        }
        out.push_back(static_cast<T>(v));
    }
    if (out.empty()) throw UsageError(std::string(what) + ": empty list");
    return out;
}

/// Queries from a CSV file (first column, optional header) or inline "lo:hi:n" / "a,b,c".
cag::ParameterGrid parse_queries(const std::string& spec) {
    cag::ParameterGrid xs;
    std::error_code ec;
    if (fs::is_regular_file(spec, ec)) {
        std::istringstream in(cag::detail::read_file(spec));
        std::string line;
        bool first = true;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto t = cag::detail::trim(line);
            if (t.empty() || t.front() == '#') continue;
            auto cell = cag::detail::trim(cag::detail::split_commas(t).front());
            double v = 0.0;
            if (!cag::detail::parse_double(cell, v)) {
                if (first) {
                    first = false;
                    continue;
                }
                throw cag::ParseError(spec + ":" + std::to_string(lineno) + ": bad query value");
            }
            first = false;
            xs.push_back(v);
        }
        return xs;
    }
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        double lo = 0.0, hi = 0.0, n = 0.0;
        if (parts.size() != 3 || !cag::detail::parse_double(parts[0], lo) || !cag::detail::parse_double(parts[1], hi) ||
            !cag::detail::parse_double(parts[2], n) || n < 1.0 || n != static_cast<double>(static_cast<std::size_t>(n))) {
            throw UsageError("--queries: range must be lo:hi:n");
        }
        const auto count = static_cast<std::size_t>(n);
        if (count == 1) return {lo};
        for (std::size_t i = 0; i < count; ++i) {
            xs.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
        }
        return xs;
    }
    for (auto tok : cag::detail::split_commas(spec)) {
        double v = 0.0;
        if (!cag::detail::parse_double(cag::detail::trim(tok), v)) {
            throw UsageError("--queries: '" + spec + "' is neither a file, a lo:hi:n range, nor a list");
        }
        xs.push_back(v);
    }
    return xs;
}

json range_report(const cag::ClusteredDataset& cd) {
    json out = json::array();
    for (const auto& r : cag::cluster_ranges(cd)) {
        json iv = json::array();
        for (const auto& i : r.intervals) iv.push_back({{"lo", i.lo}, {"hi", i.hi}, {"count", i.count}});
        out.push_back({{"cluster", r.cluster}, {"intervals", std::move(iv)}});
    }
    return out;
}

/// Flags shared by generate, train and bench.
struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> chi_min, chi_max;
    std::optional<std::size_t> m0, k, q_min, outer_max_iter, k_knn, rank;
    std::optional<double> mass, stiffness, d0, horizon;
    std::optional<Eigen::Index> time_samples;
    int verbosity = 0;
};

void add_common(CLI::App* app, CommonOptions& o, bool sampling_flags) {
    app->add_option("--config", o.config_path, "JSON configuration; flags override its values")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Random seed (default: $CAG_SEED, else 0)");
    if (sampling_flags) {
        app->add_option("--chi-min", o.chi_min, "Lower bound of the control parameter (default: solver preset)");
        app->add_option("--chi-max", o.chi_max, "Upper bound of the control parameter (default: solver preset)");
        app->add_option("--m0", o.m0, "Initial uniform samples M0 (default 5)");
        app->add_option("--k", o.k, "Number of clusters K (default 3)");
        app->add_option("--q-min", o.q_min, "Minimum samples per cluster (default: 5 wavelet, 4 spring)");
        app->add_option("--outer-max-iter", o.outer_max_iter, "Maximum insertion rounds (default 50)");
    }
    app->add_option("--mass", o.mass, "Spring mass in kg (default 0.1)");
    app->add_option("--stiffness", o.stiffness, "Spring stiffness in N/m (default 200)");
    app->add_option("--d0", o.d0, "Initial displacement in m (default 0.1)");
    app->add_option("--horizon", o.horizon, "Simulated time in s (default 1)");
    app->add_option("--time-samples", o.time_samples, "Time points per field (default 200)");
    app->add_flag("-v,--verbose", o.verbosity, "Progress messages on standard error");
}

void add_model_flags(CLI::App* app, CommonOptions& o) {
    app->add_option("--k-knn", o.k_knn, "Neighbors for cluster routing (default 3)");
    app->add_option("--rank", o.rank, "Requested reduced rank R (default: 1 wavelet, 50 spring)");
}

cag::CagConfig preset_for(const std::string& solver) {
    return solver == "wavelet" ? cag::wavelet_defaults() : cag::spring_defaults();
}

struct Resolved {
    cag::CagConfig cfg;
    cag::SolverSpec solver;
    bool solver_given = false;
};

/// Preset, then config file, then flags.
Resolved resolve(const CommonOptions& o, const std::string& solver_flag) {
    json file;
    if (!o.config_path.empty()) file = cag::read_json_file(o.config_path);
    Resolved r;
    if (file.is_object() && file.contains("solver")) {
        cag::update_from_json(r.solver, file.at("solver"));
        r.solver_given = true;
    }
    if (!solver_flag.empty()) {
        r.solver.name = solver_flag;
        r.solver_given = true;
    }
    r.cfg = preset_for(r.solver.name);
    if (file.is_object()) {
        json rest = file;
        rest.erase("solver");
        cag::update_from_json(r.cfg, rest);
    } else if (!file.is_null()) {
        throw cag::InvalidParameter("config: expected a JSON object");
    }
    auto& s = r.cfg.sampling;
    if (o.chi_min) s.chi_min = *o.chi_min;
    if (o.chi_max) s.chi_max = *o.chi_max;
    if (o.m0) s.initial_samples = *o.m0;
    if (o.k) s.clusters = *o.k;
    if (o.q_min) s.min_cluster_size = *o.q_min;
    if (o.outer_max_iter) s.outer_max_iter = *o.outer_max_iter;
    if (o.k_knn) r.cfg.k_knn = *o.k_knn;
    if (o.rank) r.cfg.reduced_rank = *o.rank;
    const bool seed_in_file = file.is_object() && file.contains("sampling") && file["sampling"].contains("seed");
    if (o.seed || !seed_in_file) {
        const std::uint64_t seed = resolve_seed(o.seed);
        s.seed = seed;
        r.cfg.optimizer.seed = seed;
    }
    auto& sp = r.solver.spring;
    if (o.mass) sp.mass = *o.mass;
    if (o.stiffness) sp.stiffness = *o.stiffness;
    if (o.d0) sp.initial_displacement = *o.d0;
    if (o.horizon) sp.horizon = *o.horizon;
    if (o.time_samples) sp.time_samples = *o.time_samples;
    r.solver.validate();
    r.cfg.validate();
    return r;
}

void log(const CommonOptions& o, const std::string& msg) {
    if (o.verbosity > 0) std::cerr << "cag: " << msg << '\n';
}

int run_generate(const CommonOptions& o, const std::string& solver_name, const std::string& out,
                 const std::string& report) {
    const Resolved r = resolve(o, solver_name);
    const cag::Solver solver = cag::make_solver(r.solver);
    log(o, "sampling " + r.solver.name + " on [" + cag::detail::format_double(r.cfg.sampling.chi_min) + ", " +
               cag::detail::format_double(r.cfg.sampling.chi_max) + "]");
    const auto res = cag::adaptive_generate(solver, r.cfg.sampling);
    const auto fmt = cag::format_from_path(out);
    if (fmt == cag::DatasetFormat::json) {
        cag::detail::write_file(out, cag::clustered_to_json(res.dataset).dump(2) + "\n");
    } else {
        cag::save_dataset(res.dataset.base(), out, fmt);
    }
    json rep = {{"format", "cag-generate-report"},
                {"version", CAG_VERSION_STRING},
                {"solver", cag::to_json(r.solver)},
                {"sampling", cag::to_json(r.cfg.sampling)},
                {"samples", res.dataset.size()},
                {"cluster_sizes", res.dataset.cluster_sizes()},
                {"labels", res.dataset.labels()},
                {"cluster_ranges", range_report(res.dataset)},
                {"history", cag::history_to_json(res.history)}};
    write_text(report, rep.dump(2) + "\n");
    log(o, "wrote " + std::to_string(res.dataset.size()) + " samples to " + out);
    return exit_ok;
}

int run_train(const CommonOptions& o, const std::string& solver_name, const std::string& dataset,
              const std::string& out, const std::string& report) {
    Resolved r = resolve(o, solver_name);
    cag::TrainedModel model;
    if (!dataset.empty()) {
        std::optional<cag::ClusteredDataset> labeled;
        cag::LabeledDataset plain;
        if (cag::format_from_path(dataset) == cag::DatasetFormat::json) {
            const json j = cag::read_json_file(dataset);
            labeled = cag::clustered_from_json(j);
            if (!labeled) plain = cag::dataset_from_json(j);
        } else {
            plain = cag::load_dataset(dataset);
        }
        if (!labeled) {
            log(o, "clustering unlabeled dataset into K = " + std::to_string(r.cfg.sampling.clusters));
            labeled = cag::cluster_dataset(plain, r.cfg.sampling);
        } else {
            r.cfg.sampling.clusters = labeled->clusters();
        }
        model = cag::offline_train(*labeled, r.cfg);
    } else {
        if (!r.solver_given) throw UsageError("train: one of --solver, --dataset, or a config 'solver' is required");
        log(o, "offline training with the " + r.solver.name + " solver");
        model = cag::offline_train(cag::make_solver(r.solver), r.cfg);
    }
    cag::save_model(model, out);
    json training = json::array();
    for (const auto& t : model.training) training.push_back(cag::detail::to_json(t));
    json rep = {{"format", "cag-train-report"},
                {"version", CAG_VERSION_STRING},
                {"config", cag::to_json(model.config)},
                {"samples", model.samples()},
                {"cluster_sizes", model.cluster_sizes()},
                {"training", std::move(training)},
                {"history", cag::history_to_json(model.history)}};
    if (!dataset.empty()) {
        rep["dataset"] = dataset;
    } else {
        rep["solver"] = cag::to_json(r.solver);
    }
    if (!report.empty()) write_text(report, rep.dump(2) + "\n");
    log(o, "model written to " + out);
    return exit_ok;
}

int run_predict(const std::string& model_path, const std::string& queries, const std::string& out,
                std::optional<std::size_t> k_knn, bool field_variance) {
    cag::TrainedModel model = cag::load_model(model_path);
    if (k_knn) {
        if (*k_knn < 1) throw UsageError("--k-knn must be at least 1");
        model.classifier.k_knn = std::min(*k_knn, model.samples());
    }
    const cag::ParameterGrid xs = parse_queries(queries);
    const auto pred = cag::online_predict(model, xs);
    cag::FieldMatrix fvar;
    if (field_variance) fvar = cag::field_variance(model, pred);

    std::string text = "chi,cluster,variance";
    for (Eigen::Index r = 0; r < model.field_size; ++r) text += ",eta_" + std::to_string(r + 1);
    if (field_variance) {
        for (Eigen::Index r = 0; r < model.field_size; ++r) text += ",var_" + std::to_string(r + 1);
    }
    text += '\n';
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        text += cag::detail::format_double(xs[j]) + ',' + std::to_string(pred.clusters[j]) + ',' +
                cag::detail::format_double(pred.variance[c]);
        for (Eigen::Index r = 0; r < model.field_size; ++r) text += ',' + cag::detail::format_double(pred.fields(r, c));
        if (field_variance) {
            for (Eigen::Index r = 0; r < model.field_size; ++r) text += ',' + cag::detail::format_double(fvar(r, c));
        }
        text += '\n';
    }
    write_text(out, text);
    return exit_ok;
}

struct BenchOptions {
    std::string problem;
    std::string sizes;
    std::string seeds;
    std::string out;
    std::string csv;
    std::optional<std::size_t> test_points;
    double initial_fraction = 0.5;
    bool parallel = false;
    bool reproducible = false;
    bool no_timestamp = false;
};

int run_bench(const CommonOptions& o, const BenchOptions& b) {
    const Resolved r = resolve(o, b.problem);
    cag::ComparisonConfig cc;
    cc.problem = b.problem;
    cc.base = r.cfg;
    const bool wavelet = b.problem == "wavelet";
    cc.sizes = b.sizes.empty() ? (wavelet ? std::vector<std::size_t>{54, 71, 89, 250}
                                          : std::vector<std::size_t>{16, 23, 63})
                               : parse_list<std::size_t>(b.sizes, "--sizes");
    cc.seeds = b.seeds.empty() ? std::vector<std::uint64_t>{r.cfg.sampling.seed}
                               : parse_list<std::uint64_t>(b.seeds, "--seeds");
    cc.grid = {r.cfg.sampling.chi_min, r.cfg.sampling.chi_max, b.test_points.value_or(wavelet ? 1000 : 50)};
    cc.initial_fraction = b.initial_fraction;
    cc.parallel = b.parallel;
    cc.reproducible = b.reproducible;

    const cag::Solver solver = cag::make_solver(r.solver);
    log(o, "bench " + b.problem + ": " + std::to_string(cc.sizes.size() * cc.seeds.size()) + " rows");
    const auto rows = cag::run_comparison(solver, cc);
    json rep = cag::report_to_json(cc, rows, (b.no_timestamp || b.reproducible) ? std::string{} : utc_timestamp());
    rep["solver"] = cag::to_json(r.solver);
    write_text(b.out, rep.dump(2) + "\n");
    std::string csv_path = b.csv;
    if (csv_path.empty() && b.out != "-") csv_path = fs::path(b.out).replace_extension(".csv").string();
    if (!csv_path.empty()) cag::detail::write_file(csv_path, cag::report_to_csv(rows));

    int code = exit_ok;
    for (const auto& row : rows) {
        if (!row.error.empty()) {
            std::cerr << "cag: bench row M=" << row.target << " seed=" << row.seed << " failed: " << row.error << '\n';
            code = exit_failure;
        }
    }
    return code;
}

void print_deficits(const cag::ConvergenceFailure& e) {
    for (const auto& d : e.deficits()) {
        std::cerr << "cag:   cluster " << d.cluster << " has " << d.count << " samples\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustering adaptive Gaussian process regression surrogates", "cag"};
    app.set_version_flag("--version", std::string("cag ") + CAG_VERSION_STRING);
    app.require_subcommand(1);

    CommonOptions common;

    auto* gen = app.add_subcommand("generate", "Adaptive sample generation with a built-in solver");
    std::string gen_solver, gen_out, gen_report;
    gen->add_option("--solver", gen_solver, "Solver")->required()->check(CLI::IsMember({"wavelet", "spring"}));
    gen->add_option("--out", gen_out, "Dataset file (.csv or .json; JSON carries cluster labels)")->required();
    gen->add_option("--report", gen_report, "Report JSON path (default: standard output)");
    add_common(gen, common, true);

    auto* train = app.add_subcommand("train", "Offline stage: sample, reduce and fit per-cluster GPs");
    std::string train_solver, train_dataset, train_out, train_report;
    auto* ts = train->add_option("--solver", train_solver, "Built-in solver")->check(CLI::IsMember({"wavelet", "spring"}));
    auto* td = train->add_option("--dataset", train_dataset, "Field dataset (.csv or .json)")->check(CLI::ExistingFile);
    ts->excludes(td);
    train->add_option("--out", train_out, "Model JSON path")->required();
    train->add_option("--report", train_report, "Training report JSON path");
    add_common(train, common, true);
    add_model_flags(train, common);

    auto* pred = app.add_subcommand("predict", "Online stage: route queries and predict fields");
    std::string pred_model, pred_queries, pred_out;
    std::optional<std::size_t> pred_knn;
    bool pred_fvar = false;
    pred->add_option("--model", pred_model, "Model JSON from train")->required()->check(CLI::ExistingFile);
    pred->add_option("--queries", pred_queries, "CSV file of chi values, a lo:hi:n range, or a comma list")->required();
    pred->add_option("--out", pred_out, "Output CSV (default: standard output)");
    pred->add_option("--k-knn", pred_knn, "Override the model's routing neighbor count");
    pred->add_flag("--field-variance", pred_fvar, "Append per-entry field variance columns");

    auto* bench = app.add_subcommand("bench", "CAG versus size-matched uniform GPR");
    BenchOptions bo;
    bench->add_option("--problem", bo.problem, "Benchmark problem")->required()->check(CLI::IsMember({"wavelet", "spring"}));
    bench->add_option("--sizes", bo.sizes, "Target sample sizes (default: 16,23,63 spring; 54,71,89,250 wavelet)");
    bench->add_option("--seeds", bo.seeds, "Seed list (default: the single resolved seed)");
    bench->add_option("--out", bo.out, "Report JSON path")->required();
    bench->add_option("--csv", bo.csv, "Table CSV path (default: report path with .csv)");
    bench->add_option("--test-points", bo.test_points, "Test cases (default: 50 spring, 1000 wavelet)");
    bench->add_option("--initial-fraction", bo.initial_fraction, "Largest M0 tried, as a fraction of the target (default 0.5)")
        ->check(CLI::Range(1e-9, 1.0));
    bench->add_flag("--parallel", bo.parallel, "Run rows concurrently; disables timings");
    bench->add_flag("--no-timestamp", bo.no_timestamp, "Omit the report timestamp");
    bench->add_flag("--reproducible", bo.reproducible, "Omit timestamp and timings so reports are byte-identical");
    add_common(bench, common, true);
    add_model_flags(bench, common);

    for (auto* sub : {gen, train, pred, bench}) sub->set_version_flag("--version", std::string("cag ") + CAG_VERSION_STRING);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "cag: " << e.what() << "\n\n";
        const CLI::App* shown = &app;
        for (auto* sub : {gen, train, pred, bench}) {
            if (sub->parsed()) shown = sub;
        }
        std::cerr << shown->help();
        return exit_usage;
    }

    try {
        if (gen->parsed()) return run_generate(common, gen_solver, gen_out, gen_report);
        if (train->parsed()) return run_train(common, train_solver, train_dataset, train_out, train_report);
        if (pred->parsed()) return run_predict(pred_model, pred_queries, pred_out, pred_knn, pred_fvar);
        if (bench->parsed()) return run_bench(common, bo);
    } catch (const UsageError& e) {
        std::cerr << "cag: " << e.what() << '\n';
        return exit_usage;
    } catch (const cag::ConvergenceFailure& e) {
        std::cerr << "cag: convergence failure: " << e.what() << '\n';
        print_deficits(e);
        return exit_failure;
    } catch (const cag::NumericalFailure& e) {
        std::cerr << "cag: numerical failure: " << e.what() << '\n';
        return exit_failure;
    } catch (const cag::Error& e) {
        std::cerr << "cag: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "cag: unexpected error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_usage;
}
