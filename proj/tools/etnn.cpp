#include "etnn/bench.hpp"
#include "etnn/config.hpp"
#include "etnn/error.hpp"
#include "etnn/io.hpp"
#include "etnn/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace etnn;

namespace {

constexpr const char* kVersion = "etnn 0.1.0";

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Explicit flag, then ETNN_SEED, then the fallback.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("ETNN_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw error(errc::parse_error, "ETNN_SEED must be a non-negative integer");
    }
    return fallback;
}

struct Manifest {
    json j;
    fs::path path;

    Manifest(const std::string& command, int argc, char** argv, fs::path where) : path(std::move(where)) {
        j["command"] = command;
        j["args"] = std::vector<std::string>(argv, argv + argc);
        j["software_version"] = kVersion;
        j["started_at"] = utc_now();
        j["config_paths"] = json::array();
        j["outputs"] = json::array();
    }
    void write() const { write_file_atomic(path, j.dump(2) + "\n"); }
    void finish() {
        j["finished_at"] = utc_now();
        write();
    }
};

std::string sci(double v) {
    std::ostringstream out;
    out << std::scientific << std::setprecision(3) << v;
    return out.str();
}

std::string rank_summary(const CombinatorialComplex& cc) {
    std::string out;
    const auto counts = rank_counts(cc);
    for (std::size_t r = 0; r < counts.size(); ++r)
        out += (r ? " " : "") + std::string("rank") + std::to_string(r) + ":" + std::to_string(counts[r]);
    return out;
}

// ---- datasets ---------------------------------------------------------------

struct Dataset {
    std::deque<CombinatorialComplex> complexes;
    std::vector<Matrix> targets;
    std::vector<int> groups;
    bool single = false;  ///< one transductive complex
};

Matrix shape_target(const std::vector<double>& values, const CombinatorialComplex& cc, ReadoutLevel level,
                    const std::string& where) {
    if (level == ReadoutLevel::complex) {
        Matrix t(1, static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i) t(0, static_cast<Eigen::Index>(i)) = values[i];
        return t;
    }
    const auto n = cc.num_nodes();
    if (n == 0 || values.size() % n != 0)
        throw error(errc::target_mismatch, where + ": node-level target length " + std::to_string(values.size()) +
                                               " is not a multiple of " + std::to_string(n) + " nodes");
    const auto cols = static_cast<Eigen::Index>(values.size() / n);
    Matrix t(static_cast<Eigen::Index>(n), cols);
    for (std::size_t i = 0; i < values.size(); ++i) t.data()[i] = values[i];
    return t;
}

Dataset load_dataset(const fs::path& path, ReadoutLevel level) {
    Dataset d;
    if (fs::is_directory(path)) {
        const auto index_path = path / "index.json";
        const auto index = parse_json_text(read_text_file(index_path), index_path.string());
        if (!index.is_object() || !index.contains("items") || !index["items"].is_array())
            throw error(errc::parse_error, index_path.string() + ": expected {\"items\": [...]}");
        for (const auto& item : index["items"]) {
            if (!item.is_object() || !item.contains("file") || !item["file"].is_string())
                throw error(errc::parse_error, index_path.string() + ": every item needs a \"file\"");
            const auto file = path / item["file"].get<std::string>();
            auto doc = parse_complex(parse_json_text(read_text_file(file), file.string()));
            std::vector<double> values;
            if (item.contains("target")) {
                if (!item["target"].is_array()) throw error(errc::parse_error, file.string() + ": target must be an array");
                values = item["target"].get<std::vector<double>>();
            } else if (doc.target) {
                values = doc.target->values;
            } else {
                throw error(errc::target_mismatch, file.string() + ": no target");
            }
            d.complexes.push_back(std::move(doc.complex));
            d.targets.push_back(shape_target(values, d.complexes.back(), level, file.string()));
            d.groups.push_back(item.value("group", static_cast<int>(d.groups.size())));
        }
        if (d.complexes.empty()) throw error(errc::empty_dataset, index_path.string() + " lists no items");
    } else {
        auto doc = parse_complex(parse_json_text(read_text_file(path), path.string()));
        if (!doc.target) throw error(errc::target_mismatch, path.string() + ": no target");
        d.complexes.push_back(std::move(doc.complex));
        d.targets.push_back(shape_target(doc.target->values, d.complexes.back(), level, path.string()));
        d.single = true;
    }
    return d;
}

std::vector<DataItem> make_items(const Dataset& d, const EtnnConfig& config) {
    if (config.neighborhoods.empty())
        throw error(errc::config_mismatch, "model.neighborhoods must list at least one neighborhood");
    std::vector<DataItem> items;
    for (std::size_t i = 0; i < d.complexes.size(); ++i)
        items.push_back(DataItem{&d.complexes[i], assemble(d.complexes[i], config.neighborhoods), d.targets[i]});
    return items;
}

/// {"train": [...], "val": [...], "test": [...]} index lists.
json splits_json(const Splits& s) { return json{{"train", s.train}, {"val", s.val}, {"test", s.test}}; }

std::vector<std::size_t> split_indices(const json& masks, const std::string& name, std::size_t limit,
                                       const std::string& origin) {
    if (!masks.contains(name)) return {};
    std::vector<std::size_t> out;
    for (const auto& v : masks[name]) {
        if (!v.is_number_unsigned()) throw error(errc::parse_error, origin + ": '" + name + "' must list indices");
        const auto i = v.get<std::size_t>();
        if (i >= limit) throw error(errc::index_out_of_range, origin + ": index " + std::to_string(i) + " in '" + name + "'");
        out.push_back(i);
    }
    return out;
}

std::vector<bool> to_mask(const std::vector<std::size_t>& idx, std::size_t n) {
    std::vector<bool> m(n, false);
    for (auto i : idx) m[i] = true;
    return m;
}

// ---- commands ---------------------------------------------------------------

struct LiftArgs {
    std::string input, recipe, output;
};

int cmd_lift(const LiftArgs& a, int argc, char** argv) {
    Manifest manifest("lift", argc, argv, a.output + ".manifest.json");
    manifest.j["config_paths"].push_back(a.input);
    manifest.j["recipe"] = a.recipe;
    manifest.j["outputs"].push_back(a.output);
    manifest.write();
    const auto recipe = parse_recipe(a.recipe);
    const auto doc = parse_graph(parse_json_text(read_text_file(a.input), a.input));
    LiftAnnotations ann{doc.edge_features, doc.hyperedges, doc.rings, doc.functional_groups};
    const auto cc = apply_recipe(doc.graph, ann, recipe);
    write_file_atomic(a.output, to_json(cc, doc.target).dump(2) + "\n");
    std::cout << rank_summary(cc) << "\n";
    manifest.finish();
    return 0;
}

struct TrainArgs {
    std::string config, data, out, masks, resume, mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};

int cmd_train(const TrainArgs& a, int threads, int argc, char** argv) {
    RunConfig rc = run_config(parse_config(read_text_file(a.config), a.config));
    if (!a.mode.empty()) rc.model.mode = parse_mode(a.mode);
    if (a.epochs) rc.train.epochs = *a.epochs;
    const auto seed = resolve_seed(a.seed, rc.train.seed);
    rc.train.seed = seed;
    if (a.seed || std::getenv("ETNN_SEED")) rc.model.seed = seed;

    fs::create_directories(a.out);
    const fs::path out(a.out);
    Manifest manifest("train", argc, argv, out / "manifest.json");
    manifest.j["config_paths"] = {a.config};
    manifest.j["data"] = a.data;
    if (!a.masks.empty()) manifest.j["masks"] = a.masks;
    if (!a.resume.empty()) manifest.j["resume"] = a.resume;
    manifest.j["seed"] = seed;
    manifest.j["mode"] = std::string(to_string(rc.model.mode));
    manifest.j["threads"] = threads;
    manifest.j["effective_config"] = to_config_text(rc);
    manifest.j["outputs"] = {(out / "model.ckpt").string(), (out / "best.ckpt").string(),
                             (out / "history.csv").string(), (out / "splits.json").string()};
    manifest.write();

    const Dataset data = load_dataset(a.data, rc.model.readout);
    auto items = make_items(data, rc.model);

    EtnnModel model;
    if (!a.resume.empty()) {
        auto loaded = load_model(a.resume);
        model = std::move(loaded.model);
        if (model.config.mode != rc.model.mode || model.config.readout != rc.model.readout)
            throw error(errc::config_mismatch, "resume checkpoint was trained with a different mode or readout");
    } else {
        std::vector<Sample> samples;
        for (const auto& it : items) samples.push_back(Sample{it.complex, &it.collection});
        model = init_model(rc.model, infer_schema(rc.model, samples));
    }

    TrainSplit split;
    json splits;
    if (data.single) {
        const auto n = data.complexes[0].num_nodes();
        split.train = split.val = {0};
        if (!a.masks.empty()) {
            splits = parse_json_text(read_text_file(a.masks), a.masks);
        } else {
            splits = splits_json(make_splits(n, rc.split.train, rc.split.val, rc.split.test, seed));
        }
        split.train_nodes = to_mask(split_indices(splits, "train", n, "masks"), n);
        split.val_nodes = to_mask(split_indices(splits, "val", n, "masks"), n);
        if (std::none_of(split.val_nodes.begin(), split.val_nodes.end(), [](bool b) { return b; }))
            split.val_nodes = split.train_nodes;
    } else {
        const auto n = items.size();
        if (!a.masks.empty()) splits = parse_json_text(read_text_file(a.masks), a.masks);
        else splits = splits_json(make_splits(n, rc.split.train, rc.split.val, rc.split.test, seed, data.groups));
        split.train = split_indices(splits, "train", n, "masks");
        split.val = split_indices(splits, "val", n, "masks");
    }
    write_file_atomic(out / "splits.json", splits.dump() + "\n");

    rc.train.checkpoint = out / "best.ckpt";
    const auto history = train(model, items, split, rc.train);
    save_model(out / "model.ckpt", model, history.scaler, {{"best_epoch", history.best_epoch}});
    write_file_atomic(out / "history.csv", history.to_csv());
    std::cout << "epochs " << history.epochs.size() << ", best epoch " << history.best_epoch << ", best val "
              << to_string(rc.train.metric) << " " << history.best_val << ", optimizer step " << model.store.step
              << "\n";
    manifest.finish();
    return 0;
}

struct EvalArgs {
    std::string checkpoint, data, masks, split = "all", metric;
};

int cmd_eval(const EvalArgs& a) {
    auto loaded = load_model(a.checkpoint);
    auto& model = loaded.model;
    const Dataset data = load_dataset(a.data, model.config.readout);
    auto items = make_items(data, model.config);
    const Metric metric = a.metric.empty() ? Metric::mae : parse_metric(a.metric);
    std::vector<std::size_t> which;
    std::vector<bool> node_mask;
    json masks;
    if (!a.masks.empty()) masks = parse_json_text(read_text_file(a.masks), a.masks);
    if (a.split != "all" && a.masks.empty()) throw error(errc::invalid_argument, "--split needs --masks");
    if (data.single) {
        which = {0};
        if (a.split != "all") {
            const auto n = data.complexes[0].num_nodes();
            node_mask = to_mask(split_indices(masks, a.split, n, a.masks), n);
            if (std::none_of(node_mask.begin(), node_mask.end(), [](bool b) { return b; }))
                throw error(errc::empty_mask, "split '" + a.split + "' selects no nodes");
        }
    } else if (a.split == "all") {
        which.resize(items.size());
        for (std::size_t i = 0; i < which.size(); ++i) which[i] = i;
    } else {
        which = split_indices(masks, a.split, items.size(), a.masks);
        if (which.empty()) throw error(errc::empty_mask, "split '" + a.split + "' selects no items");
    }
    const double v = evaluate(model, items, which, metric, node_mask, loaded.scaler);
    std::cout << to_string(metric) << " " << v << "\n";
    return 0;
}

struct KchainArgs {
    int k = 4, seeds = 5, epochs = 500;
    std::vector<int> widths{32, 64}, layers{1, 2};
    std::vector<std::string> variants{"graph", "1a", "2a", "3a", "3a-up"};
    double lr = 1e-3;
    std::optional<std::uint64_t> seed;
    std::string output = "kchain.csv";
};

int cmd_bench_kchain(const KchainArgs& a, int argc, char** argv) {
    bench::KchainOptions o;
    o.k = a.k;
    o.seeds = a.seeds;
    o.epochs = a.epochs;
    o.widths = a.widths;
    o.layer_counts = a.layers;
    o.variants = a.variants;
    o.lr = a.lr;
    o.base_seed = resolve_seed(a.seed, 0);
    Manifest manifest("bench kchain", argc, argv, a.output + ".manifest.json");
    manifest.j["seed"] = o.base_seed;
    manifest.j["outputs"] = {a.output};
    manifest.write();
    const auto report = bench::kchain_experiment(o);
    write_file_atomic(a.output, report.to_csv());
    std::cout << report.to_table();
    manifest.finish();
    int failures = 0;
    for (const auto& c : report.cells)
        if (c.variant == "3a-up" && c.mean() > 0.65) {
            std::cerr << "property failure: 3a-up at " << c.layers << " layers reached " << c.mean() << "\n";
            ++failures;
        }
    return failures ? 1 : 0;
}

struct ScalingArgs {
    std::string family = "sparse";
    std::vector<std::size_t> sizes;
    std::string output = "scaling.csv";
};

int cmd_bench_scaling(ScalingArgs a, int argc, char** argv) {
    if (a.sizes.empty()) a.sizes = a.family == "dense" ? std::vector<std::size_t>{100, 200, 400, 800}
                                                        : std::vector<std::size_t>{100, 300, 1000, 3000, 10000};
    Manifest manifest("bench scaling", argc, argv, a.output + ".manifest.json");
    manifest.j["outputs"] = {a.output};
    manifest.write();
    const auto report = bench::runtime_scaling(a.family, a.sizes);
    write_file_atomic(a.output, report.to_csv());
    std::cout << report.to_csv() << "slope " << report.slope() << "\n";
    manifest.finish();
    const double s = report.slope();
    const bool ok = a.family == "dense" ? (s >= 1.7 && s <= 2.3) : (s >= 0.8 && s <= 1.3);
    if (report.rows.size() >= 2 && !ok) {
        std::cerr << "property failure: slope " << s << " outside the expected band\n";
        return 1;
    }
    return 0;
}

int cmd_check(int trials, std::optional<std::uint64_t> flag_seed) {
    const auto seed = resolve_seed(flag_seed, 0);
    bool ok = true;
    auto line = [&](const std::string& name, bool pass, const std::string& detail) {
        std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
        ok = ok && pass;
    };
    bench::EquivarianceOptions eo;
    eo.trials = trials;
    eo.seed = seed;
    const auto eq = bench::equivariance_suite(eo);
    line("equivariance", eq.ok(), std::to_string(eq.passed) + "/" + std::to_string(eq.trials) + " trials");
    eo.negative_control = true;
    eo.trials = std::min(trials, 20);
    const auto neg = bench::equivariance_suite(eo);
    line("equivariance negative control", neg.passed < neg.trials,
         std::to_string(neg.trials - neg.passed) + "/" + std::to_string(neg.trials) + " violations detected");
    bench::HasseOptions ho;
    ho.trials = trials;
    ho.seed = seed;
    const auto hs = bench::hasse_equivalence(ho);
    line("hasse equivalence", hs.ok(ho.tol), "max deviation " + sci(hs.max_deviation));
    ho.negative_control = true;
    const auto hn = bench::hasse_equivalence(ho);
    line("hasse negative control", hn.max_deviation > ho.tol, "max deviation " + sci(hn.max_deviation));
    bench::GradientOptions go;
    go.seed = seed;
    const auto gr = bench::gradient_suite(go);
    line("gradients", gr.max_rel_error <= 1e-4, "max relative error " + sci(gr.max_rel_error));
    return ok ? 0 : 1;
}

struct InspectArgs {
    std::string input;
    std::string neighborhoods = "adj_up,adj_down,inc_up,inc_down,adj_max";
};

int cmd_inspect(const InspectArgs& a) {
    const auto specs = parse_neighborhood_list(a.neighborhoods);
    if (fs::is_directory(a.input)) {
        const auto d = load_dataset(a.input, ReadoutLevel::complex);
        std::map<Rank, double> per_rank;
        double cells = 0;
        for (const auto& cc : d.complexes) {
            cells += static_cast<double>(cc.num_cells());
            const auto counts = rank_counts(cc);
            for (std::size_t r = 0; r < counts.size(); ++r) per_rank[static_cast<Rank>(r)] += static_cast<double>(counts[r]);
        }
        const double n = static_cast<double>(d.complexes.size());
        std::cout << "complexes " << d.complexes.size() << ", " << cells / n << " cells per complex on average\n";
        for (const auto& [r, c] : per_rank) std::cout << "rank" << r << ": " << c / n << " per complex\n";
        return 0;
    }
    const auto doc = parse_complex(parse_json_text(read_text_file(a.input), a.input));
    const auto& cc = doc.complex;
    std::cout << rank_summary(cc) << "\n";
    std::cout << "nodes " << cc.num_nodes() << ", cells " << cc.num_cells() << ", dimension " << dimension(cc) << "\n";
    const auto coll = assemble(cc, specs);
    for (const auto& e : coll.entries) {
        std::map<CellId, std::size_t> degree;
        for (CellId id : cells_of_rank(cc, e.receiver_rank)) degree[id] = 0;
        for (const auto& [x, y] : e.pairs) ++degree[x];
        std::map<std::size_t, std::size_t> hist;
        for (const auto& [id, d] : degree) ++hist[d];
        std::cout << e.label << " " << e.receiver_rank << "<-" << e.sender_rank << ": pairs " << e.pairs.size()
                  << ", degree histogram";
        for (const auto& [d, c] : hist) std::cout << " " << d << ":" << c;
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"E(n)-equivariant topological neural networks: lifting, training, evaluation, benchmarks"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "Worker cap (computation is single-threaded)")->check(CLI::PositiveNumber);

    LiftArgs lift;
    auto* lift_cmd = app.add_subcommand("lift", "Lift a geometric graph to a combinatorial complex");
    lift_cmd->add_option("--input", lift.input, "Graph JSON")->required()->check(CLI::ExistingFile);
    lift_cmd->add_option("--recipe", lift.recipe, "Lift recipe, e.g. graph+edges")->required();
    lift_cmd->add_option("--output", lift.output, "Output CC JSON")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    train_cmd->add_option("--config", tr.config, "Model and training config file")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--data", tr.data, "Dataset directory or single CC file")->required()->check(CLI::ExistingPath);
    train_cmd->add_option("--out", tr.out, "Output directory")->required();
    train_cmd->add_option("--masks", tr.masks, "Split JSON with train/val/test index lists")->check(CLI::ExistingFile);
    train_cmd->add_option("--resume", tr.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
    train_cmd->add_option("--mode", tr.mode, "Override model.mode");
    train_cmd->add_option("--seed", tr.seed, "Seed (falls back to ETNN_SEED, then the config)");
    train_cmd->add_option("--epochs", tr.epochs, "Override train.epochs");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", ev.data, "Dataset directory or single CC file")->required()->check(CLI::ExistingPath);
    eval_cmd->add_option("--masks", ev.masks, "Split JSON")->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", ev.split, "train, val, test or all");
    eval_cmd->add_option("--metric", ev.metric, "mae, mse, rmse, r2 or accuracy");

    auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
    bench_cmd->require_subcommand(1);
    KchainArgs kc;
    auto* kchain_cmd = bench_cmd->add_subcommand("kchain", "k-chain expressivity grid");
    kchain_cmd->add_option("--k", kc.k)->check(CLI::PositiveNumber);
    kchain_cmd->add_option("--seeds", kc.seeds)->check(CLI::PositiveNumber);
    kchain_cmd->add_option("--epochs", kc.epochs)->check(CLI::NonNegativeNumber);
    kchain_cmd->add_option("--widths", kc.widths)->delimiter(',');
    kchain_cmd->add_option("--layers", kc.layers)->delimiter(',');
    kchain_cmd->add_option("--variants", kc.variants)->delimiter(',');
    kchain_cmd->add_option("--lr", kc.lr);
    kchain_cmd->add_option("--seed", kc.seed);
    kchain_cmd->add_option("--output", kc.output);
    ScalingArgs sc;
    auto* scaling_cmd = bench_cmd->add_subcommand("scaling", "Forward time against complex size");
    scaling_cmd->add_option("--family", sc.family)->check(CLI::IsMember({"sparse", "dense"}));
    scaling_cmd->add_option("--sizes", sc.sizes)->delimiter(',');
    scaling_cmd->add_option("--output", sc.output);

    int trials = 100;
    std::optional<std::uint64_t> check_seed;
    auto* check_cmd = app.add_subcommand("check", "Equivariance, Hasse-equivalence and gradient suites");
    check_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);
    check_cmd->add_option("--seed", check_seed);

    InspectArgs in;
    auto* inspect_cmd = app.add_subcommand("inspect", "Cell counts and neighborhood degree histograms");
    inspect_cmd->add_option("--input", in.input, "CC JSON or dataset directory")->required()->check(CLI::ExistingPath);
    inspect_cmd->add_option("--neighborhoods", in.neighborhoods);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*lift_cmd) return cmd_lift(lift, argc, argv);
        if (*train_cmd) return cmd_train(tr, threads, argc, argv);
        if (*eval_cmd) return cmd_eval(ev);
        if (*kchain_cmd) return cmd_bench_kchain(kc, argc, argv);
        if (*scaling_cmd) return cmd_bench_scaling(sc, argc, argv);
        if (*check_cmd) return cmd_check(trials, check_seed);
        if (*inspect_cmd) return cmd_inspect(in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
