#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "skelbench/datagen.hpp"
#include "skelbench/metrics.hpp"
#include "skelbench/pipeline.hpp"
#include "skelbench/png_io.hpp"
#include "skelbench/thinning.hpp"

namespace fs = std::filesystem;
using namespace skelbench;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string config_scalar(const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

// CLI11 only consults config files registered on the root app, so the file is
// merged here instead: each key becomes a long flag appended to the argument
// list unless that flag was given explicitly.
std::vector<std::string> merge_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
    }
    if (path.empty()) return args;

    std::ifstream f(path);
    if (!f) throw CLI::FileError(path + " was not readable (config)");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw CLI::ConfigError(path + " is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw CLI::ConfigError(path + " must hold a JSON object");

    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (given) continue;
        args.push_back(flag);
        if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ',';
                joined += config_scalar(v);
            }
            args.push_back(joined);
        } else {
            args.push_back(config_scalar(value));
        }
    }
    return args;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ThinningVariant parse_variant(const std::string& name) {
    if (name == "zhang-suen") return ThinningVariant::ZhangSuen;
    if (name == "medial-axis") return ThinningVariant::MedialAxis;
    throw CLI::ValidationError("--algo must be zhang-suen or medial-axis");
}

struct Aggregate {
    double precision = 0, recall = 0, f1 = 0, max_zncc = 0, center_distance = 0,
           m_ccorr = 0;
    std::size_t count = 0;
};

Aggregate aggregate_reports(const std::vector<MetricReport>& reports) {
    Aggregate a;
    a.count = reports.size();
    for (const MetricReport& r : reports) {
        a.precision += r.precision;
        a.recall += r.recall;
        a.f1 += r.f1;
        a.max_zncc += r.max_zncc;
        a.center_distance += r.center_distance;
        a.m_ccorr += r.m_ccorr;
    }
    if (a.count > 0) {
        const double n = static_cast<double>(a.count);
        a.precision /= n;
        a.recall /= n;
        a.f1 /= n;
        a.max_zncc /= n;
        a.center_distance /= n;
        a.m_ccorr /= n;
    }
    return a;
}

struct GenArgs {
    std::string out;
    std::uint32_t count = 100;
    std::uint32_t size = 64;
    std::uint64_t seed = 0;
    std::string algo = "zhang-suen";
    std::uint32_t prune = 8;
};

int run_gen(const GenArgs& a) {
    DatasetSpec spec;
    spec.count = a.count;
    spec.size = a.size;
    spec.seed = a.seed;
    spec.gt = {parse_variant(a.algo), a.prune};
    const auto start = std::chrono::steady_clock::now();
    const DatasetManifest manifest = gen_dataset(spec, a.out);
    std::printf("generated %zu pairs at %ux%u (seed %llu, gt %s prune %u) in %.2fs\n",
                manifest.stems.size(), a.size, a.size,
                static_cast<unsigned long long>(a.seed), a.algo.c_str(), a.prune,
                seconds_since(start));
    std::printf("wrote %s\n", (fs::path(a.out) / "manifest.json").string().c_str());
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::uint32_t stages = 1;
    std::uint32_t epochs = 20;
    std::uint32_t batch = 32;
    double lr = 0.001;
    std::string loss = "wcce";
    std::vector<double> weights{1.0, 25.0};
    std::uint32_t depth = 4;
    std::uint32_t base_channels = 64;
    std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
    if (a.weights.size() != 2) {
        throw CLI::ValidationError("--weights takes exactly two values: w0,w1");
    }
    if (a.loss != "wcce" && a.loss != "literal") {
        throw CLI::ValidationError("--loss must be wcce or literal");
    }
    const fs::path data(a.data);
    const std::vector<SamplePair> pairs = ingest_dir(data / "img", data / "gt");
    const std::uint32_t size = pairs[0].shape.width;
    std::vector<BinaryMask> shapes, skeletons;
    for (const SamplePair& p : pairs) {
        if (p.shape.width != size || p.shape.height != size) {
            throw DimensionMismatch("train: dataset images must share one square size");
        }
        shapes.push_back(p.shape);
        skeletons.push_back(p.skeleton);
    }

    const UNetConfig ucfg{a.depth, a.base_channels, size};
    PipelineConfig cfg;
    cfg.n_stages = a.stages;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.adam.lr = a.lr;
    cfg.loss.w0 = a.weights[0];
    cfg.loss.w1 = a.weights[1];
    cfg.loss.mode = a.loss == "literal" ? LossMode::Literal : LossMode::StandardWCCE;
    cfg.seed = a.seed;

    std::printf("dataset %zu pairs at %ux%u from %s\n", pairs.size(), size, size,
                a.data.c_str());
    std::printf("stages %u  epochs %u  batch %u\n", cfg.n_stages, cfg.epochs,
                cfg.batch_size);
    std::printf("lr %g  beta1 %g  beta2 %g  eps %g\n", cfg.adam.lr, cfg.adam.beta1,
                cfg.adam.beta2, cfg.adam.eps);
    std::printf("loss %s  weights [%g, %g]\n",
                cfg.loss.mode == LossMode::Literal ? "literal" : "standard_wcce",
                cfg.loss.w0, cfg.loss.w1);
    std::printf("depth %u  base channels %u  seed %llu\n", a.depth, a.base_channels,
                static_cast<unsigned long long>(a.seed));

    const auto start = std::chrono::steady_clock::now();
    TrainLog log;
    const ModelBundle bundle = train_pipeline(shapes, skeletons, ucfg, cfg, &log);
    const double train_seconds = seconds_since(start);
    for (std::size_t k = 0; k < log.epoch_loss.size(); ++k) {
        const auto& h = log.epoch_loss[k];
        std::printf("stage %zu: %zu epochs, final loss %.6f\n", k + 1, h.size(),
                    h.empty() ? 0.0 : h.back());
    }
    std::printf("trained in %.2fs\n", train_seconds);

    save_model(bundle, a.out);
    fs::path history_path(a.out);
    history_path.replace_extension(".history.json");
    const nlohmann::json hj = {{"version", kVersion},
                               {"train_seconds", train_seconds},
                               {"stages", log.epoch_loss}};
    std::ofstream hf(history_path, std::ios::trunc);
    if (!hf) throw IoError("train: cannot write " + history_path.string());
    hf << hj.dump(2) << '\n';
    std::printf("wrote %s and %s\n", a.out.c_str(), history_path.string().c_str());
    return 0;
}

struct InferArgs {
    std::string model;
    std::string input;
    std::string out;
};

int run_infer(const InferArgs& a) {
    const ModelBundle bundle = load_model(a.model);
    const std::uint32_t size = bundle.unet.input_size;
    const std::vector<std::string> stems = list_png_stems(a.input);
    if (stems.empty()) throw EmptyDirectory("infer: no PNG files in " + a.input);
    fs::create_directories(a.out);

    std::vector<std::string> valid;
    std::vector<BinaryMask> shapes;
    int failures = 0;
    for (const std::string& stem : stems) {
        BinaryMask shape = load_png(fs::path(a.input) / (stem + ".png"));
        if (shape.width != size || shape.height != size) {
            std::fprintf(stderr, "error: %s.png is %ux%u, model expects %ux%u\n",
                         stem.c_str(), shape.width, shape.height, size, size);
            ++failures;
            continue;
        }
        valid.push_back(stem);
        shapes.push_back(std::move(shape));
    }
    if (!shapes.empty()) {
        const std::vector<BinaryMask> skeletons = infer_batch(bundle, shapes);
        for (std::size_t i = 0; i < valid.size(); ++i) {
            save_png(skeletons[i], fs::path(a.out) / (valid[i] + ".png"));
        }
    }
    std::printf("inferred %zu of %zu inputs into %s\n", valid.size(), stems.size(),
                a.out.c_str());
    return failures == 0 ? 0 : 1;
}

struct EvalArgs {
    std::string pred;
    std::string truth;
    std::string report;
    int radius = -1; // <0 picks MatchConfig::for_size
    double min_overlap = 0.25;
};

int run_eval(const EvalArgs& a) {
    const auto load_start = std::chrono::steady_clock::now();
    const std::vector<std::string> stems = list_png_stems(a.pred);
    const std::vector<SamplePair> pairs = ingest_dir(a.pred, a.truth);
    std::vector<BinaryMask> preds, truths;
    for (const SamplePair& p : pairs) {
        preds.push_back(p.shape);
        truths.push_back(p.skeleton);
    }
    const double load_seconds = seconds_since(load_start);

    MatchConfig cfg = MatchConfig::for_size(truths[0].width, truths[0].height);
    if (a.radius >= 0) cfg.search_radius = a.radius;
    cfg.min_overlap_fraction = a.min_overlap;

    const auto eval_start = std::chrono::steady_clock::now();
    const std::vector<MetricReport> reports = evaluate_batch(truths, preds, cfg);
    const double eval_seconds = seconds_since(eval_start);
    const Aggregate agg = aggregate_reports(reports);

    std::printf("pairs %zu  f1 %.4f  m_ccorr %.4f\n", agg.count, agg.f1, agg.m_ccorr);

    if (!a.report.empty()) {
        nlohmann::json images = nlohmann::json::array();
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const MetricReport& r = reports[i];
            images.push_back({{"stem", stems[i]},
                              {"precision", r.precision},
                              {"recall", r.recall},
                              {"f1", r.f1},
                              {"max_zncc", r.max_zncc},
                              {"center_distance", r.center_distance},
                              {"m_ccorr", r.m_ccorr},
                              {"degenerate", r.degenerate}});
        }
        const nlohmann::json j = {
            {"version", kVersion},
            {"config",
             {{"pred", a.pred},
              {"truth", a.truth},
              {"search_radius", cfg.search_radius},
              {"min_overlap_fraction", cfg.min_overlap_fraction}}},
            {"timings", {{"load_seconds", load_seconds}, {"eval_seconds", eval_seconds}}},
            {"aggregate",
             {{"count", agg.count},
              {"precision", agg.precision},
              {"recall", agg.recall},
              {"f1", agg.f1},
              {"max_zncc", agg.max_zncc},
              {"center_distance", agg.center_distance},
              {"m_ccorr", agg.m_ccorr}}},
            {"images", images},
        };
        std::ofstream f(a.report, std::ios::trunc);
        if (!f) throw IoError("eval: cannot write " + a.report);
        f << j.dump(2) << '\n';
        std::printf("wrote %s\n", a.report.c_str());
    }
    return 0;
}

struct ShiftDemoArgs {
    std::string truth;
    std::string out;
    int dx = 0;
    int dy = 0;
};

int run_shift_demo(const ShiftDemoArgs& a) {
    const BinaryMask truth = load_png(a.truth);
    const BinaryMask pred = shift_mask(truth, a.dx, a.dy);
    const std::size_t lost = truth.foreground_count() - pred.foreground_count();
    if (lost > 0) {
        std::fprintf(stderr, "warning: %zu pixels clipped at the frame\n", lost);
    }
    const MatchConfig cfg = MatchConfig::for_size(truth.width, truth.height);
    std::printf("shift (%d, %d): f1 %.4f  m_ccorr %.4f\n", a.dx, a.dy,
                f1_score(truth, pred), m_ccorr(truth, pred, cfg));

    if (!a.out.empty()) {
        // truth on the left, shifted copy on the right, 4-column gap
        BinaryMask composite(2 * truth.width + 4, truth.height);
        for (std::uint32_t r = 0; r < truth.height; ++r) {
            for (std::uint32_t c = 0; c < truth.width; ++c) {
                composite.set(r, c, truth.at(r, c));
                composite.set(r, truth.width + 4 + c, pred.at(r, c));
            }
        }
        save_png(composite, a.out);
        std::printf("wrote %s\n", a.out.c_str());
    }
    return 0;
}

struct ThinArgs {
    std::string input;
    std::string out;
    std::string algo = "zhang-suen";
    std::uint32_t prune = 0;
};

int run_thin(const ThinArgs& a) {
    const ThinningAlgo algo{parse_variant(a.algo), a.prune};
    if (fs::is_directory(a.input)) {
        const std::vector<std::string> stems = list_png_stems(a.input);
        if (stems.empty()) throw EmptyDirectory("thin: no PNG files in " + a.input);
        fs::create_directories(a.out);
        for (const std::string& stem : stems) {
            const BinaryMask skel = skeletonize(load_png(fs::path(a.input) / (stem + ".png")), algo);
            save_png(skel, fs::path(a.out) / (stem + ".png"));
        }
        std::printf("thinned %zu images into %s\n", stems.size(), a.out.c_str());
    } else {
        save_png(skeletonize(load_png(a.input), algo), a.out);
        std::printf("wrote %s\n", a.out.c_str());
    }
    return 0;
}

void add_config_flag(CLI::App* cmd, std::string& sink) {
    cmd->add_option("--config", sink, "JSON file of long-flag defaults; explicit flags win");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage skeletonization benchmark toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    int rc = 0;
    std::string config_sink;

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic shape/skeleton dataset");
    gen->add_option("--out", gen_args.out, "output directory")->required();
    gen->add_option("--count", gen_args.count, "number of pairs");
    gen->add_option("--size", gen_args.size, "image side in pixels");
    gen->add_option("--seed", gen_args.seed, "generation seed");
    gen->add_option("--gt", gen_args.algo, "ground-truth thinning: zhang-suen|medial-axis");
    gen->add_option("--prune", gen_args.prune, "spur-pruning threshold");
    add_config_flag(gen, config_sink);
    gen->callback([&]() { rc = run_gen(gen_args); });

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train an n-stage pipeline");
    train->add_option("--data", train_args.data, "dataset directory (img/ + gt/)")->required();
    train->add_option("--out", train_args.out, "model file to write")->required();
    train->add_option("--stages", train_args.stages, "pipeline stages")
        ->check(CLI::Range(1u, 3u));
    train->add_option("--epochs", train_args.epochs, "epochs per stage");
    train->add_option("--batch", train_args.batch, "batch size");
    train->add_option("--lr", train_args.lr, "Adam learning rate");
    train->add_option("--loss", train_args.loss, "loss mode: wcce|literal");
    train->add_option("--weights", train_args.weights, "class weights w0,w1")
        ->delimiter(',')
        ->expected(1, 2);
    train->add_option("--depth", train_args.depth, "U-Net depth");
    train->add_option("--base-channels", train_args.base_channels, "first-level filters");
    train->add_option("--seed", train_args.seed, "training seed");
    add_config_flag(train, config_sink);
    train->callback([&]() { rc = run_train(train_args); });

    InferArgs infer_args;
    CLI::App* infer = app.add_subcommand("infer", "run a trained model over a directory");
    infer->add_option("--model", infer_args.model, "model file")->required();
    infer->add_option("--input", infer_args.input, "directory of shape PNGs")->required();
    infer->add_option("--out", infer_args.out, "output directory")->required();
    add_config_flag(infer, config_sink);
    infer->callback([&]() { rc = run_infer(infer_args); });

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--pred", eval_args.pred, "prediction directory")->required();
    eval->add_option("--truth", eval_args.truth, "ground-truth directory")->required();
    eval->add_option("--report", eval_args.report, "write a JSON run report here");
    eval->add_option("--radius", eval_args.radius, "correlation search radius");
    eval->add_option("--min-overlap", eval_args.min_overlap, "minimum overlap fraction");
    add_config_flag(eval, config_sink);
    eval->callback([&]() { rc = run_eval(eval_args); });

    ShiftDemoArgs shift_args;
    CLI::App* shift =
        app.add_subcommand("shift-demo", "score a skeleton against a shifted copy of itself");
    shift->add_option("--truth", shift_args.truth, "skeleton PNG")->required();
    shift->add_option("--dx", shift_args.dx, "column shift");
    shift->add_option("--dy", shift_args.dy, "row shift");
    shift->add_option("--out", shift_args.out, "write a side-by-side composite PNG");
    add_config_flag(shift, config_sink);
    shift->callback([&]() { rc = run_shift_demo(shift_args); });

    ThinArgs thin_args;
    CLI::App* thin = app.add_subcommand("thin", "classical skeletonization baseline");
    thin->add_option("--input", thin_args.input, "PNG file or directory")->required();
    thin->add_option("--out", thin_args.out, "output file or directory")->required();
    thin->add_option("--algo", thin_args.algo, "zhang-suen|medial-axis");
    thin->add_option("--prune", thin_args.prune, "spur-pruning threshold");
    add_config_flag(thin, config_sink);
    thin->callback([&]() { rc = run_thin(thin_args); });

    try {
        std::vector<std::string> args = merge_config_args(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}
