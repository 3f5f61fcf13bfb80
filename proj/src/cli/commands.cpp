#include "mln/cli/commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "mln/augment/augment.hpp"
#include "mln/core/parallel.hpp"
#include "mln/core/rng.hpp"
#include "mln/io/plot.hpp"
#include "mln/io/png_io.hpp"
#include "mln/metrics/metrics.hpp"
#include "mln/net/infer.hpp"
#include "mln/phantom/dataset.hpp"
#include "mln/phantom/phantom.hpp"
#include "mln/select/branch_select.hpp"
#include "mln/train/checkpoint.hpp"
#include "mln/train/trainer.hpp"

namespace mln::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Config-file defaults with flag overrides: the JSON object supplies values
// for any flag the user did not pass on the command line. Unknown keys are
// rejected before any work starts.
struct ConfigFile {
    json data = json::object();

    static ConfigFile load(const std::string& path, const std::vector<std::string>& known) {
        ConfigFile cf;
        if (path.empty()) return cf;
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config file: " + path);
        try {
            in >> cf.data;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!cf.data.is_object()) throw ConfigError("config file must hold a JSON object");
        for (const auto& [key, _] : cf.data.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("config file: unknown key \"" + key + "\"");
        }
        return cf;
    }

    template <typename T>
    void fill(const CLI::Option* opt, const std::string& key, T& value) const {
        if (opt->count() > 0) return;  // flags win
        if (!data.contains(key)) return;
        try {
            value = data.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config file: bad type for \"" + key + "\": " + e.what());
        }
    }
};

void ensure_out_dir(const std::string& dir, bool force) {
    const fs::path p(dir);
    if (fs::exists(p) && !fs::is_directory(p)) throw DataError("not a directory: " + dir);
    if (fs::is_directory(p) && !fs::is_empty(p) && !force)
        throw ConfigError("output directory " + dir + " is not empty (use --force)");
    fs::create_directories(p);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

void write_config_echo(const std::string& path, const json& resolved) {
    write_text(path, resolved.dump(2) + "\n");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

phantom::ModalityMapping parse_modality(const std::string& text) {
    if (text == "identity") return phantom::ModalityMapping::identity();
    if (text == "invert") return phantom::ModalityMapping::invert();
    if (text.rfind("gamma:", 0) == 0)
        return phantom::ModalityMapping::gamma_map(std::stod(text.substr(6)));
    if (text.rfind("bezier:", 0) == 0) {
        const std::string rest = text.substr(7);
        double a, b, c, d;
        if (std::sscanf(rest.c_str(), "%lf,%lf,%lf,%lf", &a, &b, &c, &d) != 4)
            throw ConfigError("modality bezier expects four comma-separated coordinates");
        return phantom::ModalityMapping::bezier(a, b, c, d);
    }
    throw ConfigError("unknown modality mapping \"" + text +
                      "\" (expected identity | gamma:G | invert | bezier:ax,ay,bx,by)");
}

augment::DomainSpec spec_from_flags(const std::string& spec_file, const std::string& strategy,
                                    uint64_t seed) {
    if (!spec_file.empty())
        return augment::parse_domain_spec_json(read_file(spec_file));
    if (strategy == "default") return augment::default_domain_spec();
    if (strategy.rfind("mean:", 0) == 0)
        return augment::mean_strategy_spec(std::stoi(strategy.substr(5)));
    if (strategy.rfind("random:", 0) == 0)
        return augment::random_strategy_spec(std::stoi(strategy.substr(7)), seed);
    throw ConfigError("unknown spec strategy \"" + strategy +
                      "\" (expected default | mean:N | random:N)");
}

std::string double_str(const std::optional<double>& v) {
    if (!v) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

// ---- synth ----

struct SynthOpts {
    std::string out, split = "train", modality = "identity", config;
    int n = 50, canvas = 256, tile_to = 128;
    uint64_t seed = 1;
    double threshold = 0.05;
    bool force = false, no_tile = false;
};

void register_synth(CLI::App* app) {
    auto o = std::make_shared<SynthOpts>();
    auto* o_out = app->add_option("--out", o->out, "Output dataset root")->required();
    auto* o_split = app->add_option("--split", o->split, "Split name");
    auto* o_n = app->add_option("--n", o->n, "Number of image/mask pairs to emit");
    auto* o_canvas = app->add_option("--canvas", o->canvas, "Phantom canvas side in px");
    auto* o_tile = app->add_option("--tile-to", o->tile_to, "Working tile resolution");
    auto* o_thresh = app->add_option("--threshold", o->threshold, "Background-rejection threshold");
    auto* o_seed = app->add_option("--seed", o->seed, "Root seed");
    auto* o_modality =
        app->add_option("--modality", o->modality, "identity | gamma:G | invert | bezier:ax,ay,bx,by");
    auto* o_notile = app->add_flag("--no-tile", o->no_tile, "Save whole canvases without tiling");
    app->add_flag("--force", o->force, "Overwrite non-empty output directory");
    app->add_option("--config", o->config, "JSON config file (flags win)");

    app->callback([=]() {
        const ConfigFile cf = ConfigFile::load(
            o->config, {"out", "split", "n", "canvas", "tile_to", "threshold", "seed", "modality",
                        "no_tile"});
        cf.fill(o_out, "out", o->out);
        cf.fill(o_split, "split", o->split);
        cf.fill(o_n, "n", o->n);
        cf.fill(o_canvas, "canvas", o->canvas);
        cf.fill(o_tile, "tile_to", o->tile_to);
        cf.fill(o_thresh, "threshold", o->threshold);
        cf.fill(o_seed, "seed", o->seed);
        cf.fill(o_modality, "modality", o->modality);
        cf.fill(o_notile, "no_tile", o->no_tile);

        if (o->n < 1) throw ConfigError("synth: --n must be >= 1");
        ensure_out_dir(o->out, o->force);

        int written = 0;
        uint64_t phantom_idx = 0;
        while (written < o->n) {
            phantom::PhantomConfig pc;
            pc.seed = core::derive_seed(o->seed, phantom_idx);
            pc.canvas_height = pc.canvas_width = o->canvas;
            pc.n_clusters = 1 + static_cast<int>(phantom_idx % 3);
            pc.modality_mapping = parse_modality(o->modality);
            ++phantom_idx;
            auto [img, mask] = phantom::generate_phantom(pc);
            char stem[32];
            if (o->no_tile) {
                std::snprintf(stem, sizeof(stem), "case_%04d", written);
                phantom::save_pair(o->out, o->split, stem, img, mask);
                ++written;
                continue;
            }
            for (auto& [timg, tmask] : phantom::preprocess_tile(img, mask, o->threshold, o->tile_to)) {
                if (written >= o->n) break;
                if (tmask.foreground_count() == 0) continue;  // keep tiles with lesions
                std::snprintf(stem, sizeof(stem), "case_%04d", written);
                phantom::save_pair(o->out, o->split, stem, timg, tmask);
                ++written;
            }
        }
        json echo;
        echo["command"] = "synth";
        echo["out"] = o->out;
        echo["split"] = o->split;
        echo["n"] = o->n;
        echo["canvas"] = o->canvas;
        echo["tile_to"] = o->tile_to;
        echo["threshold"] = o->threshold;
        echo["seed"] = o->seed;
        echo["modality"] = o->modality;
        echo["no_tile"] = o->no_tile;
        write_config_echo((fs::path(o->out) / "config.echo.json").string(), echo);
        std::cout << "synth: wrote " << written << " pairs to " << o->out << "/" << o->split << "\n";
    });
}

// ---- augment ----

struct AugmentOpts {
    std::string in, split = "train", out, spec, strategy = "default", config;
    uint64_t seed = 1;
    int bins = 64;
    bool force = false;
};

void register_augment(CLI::App* app) {
    auto o = std::make_shared<AugmentOpts>();
    auto* o_in = app->add_option("--in", o->in, "Input dataset root")->required();
    auto* o_split = app->add_option("--split", o->split, "Split name");
    auto* o_out = app->add_option("--out", o->out, "Output root")->required();
    auto* o_spec = app->add_option("--spec", o->spec, "Domain spec JSON file");
    auto* o_strategy = app->add_option("--strategy", o->strategy, "default | mean:N | random:N");
    auto* o_seed = app->add_option("--seed", o->seed, "Seed for random strategy");
    auto* o_bins = app->add_option("--bins", o->bins, "Histogram bins");
    app->add_flag("--force", o->force, "Overwrite non-empty output directory");
    app->add_option("--config", o->config, "JSON config file (flags win)");

    app->callback([=]() {
        const ConfigFile cf = ConfigFile::load(
            o->config, {"in", "split", "out", "spec", "strategy", "seed", "bins"});
        cf.fill(o_in, "in", o->in);
        cf.fill(o_split, "split", o->split);
        cf.fill(o_out, "out", o->out);
        cf.fill(o_spec, "spec", o->spec);
        cf.fill(o_strategy, "strategy", o->strategy);
        cf.fill(o_seed, "seed", o->seed);
        cf.fill(o_bins, "bins", o->bins);

        const auto spec = spec_from_flags(o->spec, o->strategy, o->seed);
        const auto stems = phantom::dataset_stems(o->in, o->split);
        const auto dataset = phantom::load_dataset(o->in, o->split);
        ensure_out_dir(o->out, o->force);

        std::vector<std::vector<core::Image>> per_domain(spec.size());
        std::vector<core::Image> preview;
        for (size_t i = 0; i < dataset.size(); ++i) {
            const auto samples = augment::expand_domains(dataset[i].first, dataset[i].second, spec);
            for (const auto& ds : samples) {
                const std::string droot =
                    (fs::path(o->out) / ("domain_" + std::to_string(ds.domain))).string();
                phantom::save_pair(droot, o->split, stems[i], ds.image, ds.mask);
                per_domain[static_cast<size_t>(ds.domain)].push_back(ds.image);
                if (i < 2) preview.push_back(ds.image);
            }
        }
        for (size_t d = 0; d < per_domain.size(); ++d) {
            const auto counts = intensity_histogram(per_domain[d], o->bins);
            io::histogram_plot(
                (fs::path(o->out) / ("hist_domain_" + std::to_string(d) + ".png")).string(), counts);
        }
        io::montage((fs::path(o->out) / "preview.png").string(), preview,
                    static_cast<int>(spec.size()));
        json echo;
        echo["command"] = "augment";
        echo["in"] = o->in;
        echo["split"] = o->split;
        echo["out"] = o->out;
        echo["spec"] = json::parse(augment::domain_spec_to_json(spec));
        echo["seed"] = o->seed;
        echo["bins"] = o->bins;
        write_config_echo((fs::path(o->out) / "config.echo.json").string(), echo);
        std::cout << "augment: " << dataset.size() << " inputs -> "
                  << dataset.size() * spec.size() << " outputs in " << spec.size() << " domains\n";
    });
}

// ---- train ----

struct TrainOpts {
    std::string data, split = "train", out, net, train, spec, strategy = "default", resume, config;
    int workers = 0;
    uint64_t seed = 0;
};

void register_train(CLI::App* app) {
    auto o = std::make_shared<TrainOpts>();
    auto* o_data = app->add_option("--data", o->data, "Training dataset root")->required();
    auto* o_split = app->add_option("--split", o->split, "Split name");
    auto* o_out = app->add_option("--out", o->out, "Output prefix (<prefix>.mln etc.)")->required();
    auto* o_net = app->add_option("--net", o->net, "NetConfig JSON file");
    auto* o_train = app->add_option("--train", o->train, "TrainConfig JSON file");
    auto* o_spec = app->add_option("--spec", o->spec, "Domain spec JSON file");
    auto* o_strategy = app->add_option("--strategy", o->strategy, "default | mean:N | random:N");
    auto* o_resume = app->add_option("--resume", o->resume, "Checkpoint to resume from");
    auto* o_workers = app->add_option("--workers", o->workers, "Worker threads (0 = machine)");
    auto* o_seed = app->add_option("--seed", o->seed, "Override training seed");
    app->add_option("--config", o->config, "JSON config file (flags win)");

    app->callback([=]() {
        const ConfigFile cf = ConfigFile::load(
            o->config, {"data", "split", "out", "net", "train", "spec", "strategy", "resume",
                        "workers", "seed"});
        cf.fill(o_data, "data", o->data);
        cf.fill(o_split, "split", o->split);
        cf.fill(o_out, "out", o->out);
        cf.fill(o_net, "net", o->net);
        cf.fill(o_train, "train", o->train);
        cf.fill(o_spec, "spec", o->spec);
        cf.fill(o_strategy, "strategy", o->strategy);
        cf.fill(o_resume, "resume", o->resume);
        cf.fill(o_workers, "workers", o->workers);
        cf.fill(o_seed, "seed", o->seed);

        train::TrainConfig tc;
        if (!o->train.empty()) tc = train::TrainConfig::from_json(read_file(o->train));
        if (o_seed->count() > 0 || cf.data.contains("seed")) tc.seed = o->seed;
        if (o_workers->count() > 0 || cf.data.contains("workers"))
            tc.workers = o->workers == 0 ? core::default_workers() : o->workers;

        std::optional<train::Checkpoint> resume;
        if (!o->resume.empty()) resume = train::Checkpoint::load(o->resume);

        net::NetConfig nc;
        augment::DomainSpec spec;
        if (resume) {
            nc = resume->net_config;
            spec = augment::parse_domain_spec_json(resume->domain_spec_json);
        } else {
            if (!o->net.empty()) nc = net::NetConfig::from_json(read_file(o->net));
            spec = spec_from_flags(o->spec, o->strategy, tc.seed);
            nc.num_domains = static_cast<int>(spec.size());
        }

        const auto dataset = phantom::load_dataset(o->data, o->split);
        const auto result = train::train(tc, nc, spec, dataset, resume ? &*resume : nullptr);
        result.checkpoint.save(o->out + ".mln");

        // JSON-lines log, one record per epoch
        std::ofstream log(o->out + ".log.jsonl", std::ios::trunc);
        io::Series total_series{"total", {}};
        std::vector<io::Series> branch_series(spec.size());
        for (size_t d = 0; d < spec.size(); ++d)
            branch_series[d].label = "branch" + std::to_string(d);
        for (const auto& e : result.log) {
            json rec;
            rec["epoch"] = e.epoch;
            rec["branch_losses"] = e.branch_losses;
            rec["total"] = e.total;
            log << rec.dump() << "\n";
            total_series.values.push_back(e.total);
            for (size_t d = 0; d < spec.size(); ++d)
                branch_series[d].values.push_back(e.branch_losses[d]);
        }
        std::vector<io::Series> curves = {total_series};
        curves.insert(curves.end(), branch_series.begin(), branch_series.end());
        io::line_plot(o->out + ".loss.png", curves);

        json echo;
        echo["command"] = "train";
        echo["data"] = o->data;
        echo["split"] = o->split;
        echo["out"] = o->out;
        echo["net_config"] = json::parse(nc.to_json());
        echo["train_config"] = json::parse(tc.to_json());
        echo["domain_spec"] = json::parse(augment::domain_spec_to_json(spec));
        if (!o->resume.empty()) echo["resume"] = o->resume;
        write_config_echo(o->out + ".config.json", echo);
        std::cout << "train: " << result.log.size() << " epochs, final total loss "
                  << result.log.back().total << ", checkpoint " << o->out << ".mln\n";
    });
}

// ---- infer ----

struct InferOpts {
    std::string ckpt, images, out, branch = "auto", metric = "cosine", sense = "best", config;
    int workers = 0;
    bool force = false;
};

void register_infer(CLI::App* app) {
    auto o = std::make_shared<InferOpts>();
    auto* o_ckpt = app->add_option("--ckpt", o->ckpt, "Checkpoint file")->required();
    auto* o_images = app->add_option("--images", o->images, "Directory of input PNGs")->required();
    auto* o_out = app->add_option("--out", o->out, "Output directory")->required();
    auto* o_branch = app->add_option("--branch", o->branch, "auto | fixed:B | sum");
    auto* o_metric = app->add_option("--metric", o->metric, "cosine | euclidean");
    auto* o_sense = app->add_option("--sense", o->sense, "best | literal");
    auto* o_workers = app->add_option("--workers", o->workers, "Worker threads (0 = machine)");
    app->add_flag("--force", o->force, "Overwrite non-empty output directory");
    app->add_option("--config", o->config, "JSON config file (flags win)");

    app->callback([=]() {
        const ConfigFile cf = ConfigFile::load(
            o->config, {"ckpt", "images", "out", "branch", "metric", "sense", "workers"});
        cf.fill(o_ckpt, "ckpt", o->ckpt);
        cf.fill(o_images, "images", o->images);
        cf.fill(o_out, "out", o->out);
        cf.fill(o_branch, "branch", o->branch);
        cf.fill(o_metric, "metric", o->metric);
        cf.fill(o_sense, "sense", o->sense);
        cf.fill(o_workers, "workers", o->workers);

        const auto ckpt = train::Checkpoint::load(o->ckpt);
        net::SwinUnet<float> model(ckpt.net_config, 1);
        ckpt.load_into(&model);

        select::SelectOptions opts;
        if (o->metric == "euclidean")
            opts.metric = select::Metric::Euclidean;
        else if (o->metric != "cosine")
            throw ConfigError("infer: unknown metric \"" + o->metric + "\"");
        if (o->sense == "literal")
            opts.sense = select::SelectionSense::LiteralMinSimilarity;
        else if (o->sense != "best")
            throw ConfigError("infer: unknown sense \"" + o->sense + "\"");

        int fixed_branch = -1;
        bool sum_mode = false;
        if (o->branch == "sum") {
            sum_mode = true;
        } else if (o->branch.rfind("fixed:", 0) == 0) {
            fixed_branch = std::stoi(o->branch.substr(6));
            if (fixed_branch < 0 || fixed_branch >= ckpt.net_config.num_domains)
                throw ConfigError("infer: fixed branch out of range");
        } else if (o->branch != "auto") {
            throw ConfigError("infer: unknown branch mode \"" + o->branch + "\"");
        }

        std::vector<std::string> stems;
        for (const auto& entry : fs::directory_iterator(o->images)) {
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                stems.push_back(entry.path().stem().string());
        }
        std::sort(stems.begin(), stems.end());
        if (stems.empty()) throw DataError("infer: no PNG images in " + o->images);
        ensure_out_dir(o->out, o->force);

        const int nworkers = o->workers == 0 ? core::default_workers() : o->workers;
        std::vector<std::string> reports(stems.size());
        core::parallel_for(stems.size(), nworkers, [&](size_t i) {
            const core::Image img =
                io::read_png_gray((fs::path(o->images) / (stems[i] + ".png")).string());
            core::Mask mask;
            if (sum_mode) {
                mask = select::sum_branches_mask(model, img);
            } else if (fixed_branch >= 0) {
                const auto probs = net::segment_forward<float>(model, img, fixed_branch);
                mask = net::argmax_mask(probs, img.height, img.width, img.spacing);
            } else {
                auto res = select::select_branch(model, ckpt, img, opts);
                mask = std::move(res.mask);
                reports[i] = res.report.to_json();
            }
            io::write_png_mask((fs::path(o->out) / (stems[i] + ".png")).string(), mask);
        });
        for (size_t i = 0; i < stems.size(); ++i) {
            if (!reports[i].empty())
                write_text((fs::path(o->out) / (stems[i] + ".report.json")).string(), reports[i]);
        }

        json echo;
        echo["command"] = "infer";
        echo["ckpt"] = o->ckpt;
        echo["images"] = o->images;
        echo["out"] = o->out;
        echo["branch"] = o->branch;
        echo["metric"] = o->metric;
        echo["sense"] = o->sense;
        write_config_echo((fs::path(o->out) / "config.echo.json").string(), echo);
        std::cout << "infer: wrote " << stems.size() << " masks to " << o->out << "\n";
    });
}

// ---- eval ----

struct EvalOpts {
    std::string pred, gt, out, config;
    double spacing = 1.0;
};

void register_eval(CLI::App* app) {
    auto o = std::make_shared<EvalOpts>();
    auto* o_pred = app->add_option("--pred", o->pred, "Predicted masks directory")->required();
    auto* o_gt = app->add_option("--gt", o->gt, "Ground-truth masks directory")->required();
    auto* o_out = app->add_option("--out", o->out, "Output CSV path")->required();
    auto* o_spacing = app->add_option("--spacing", o->spacing, "Pixel spacing in mm");
    app->add_option("--config", o->config, "JSON config file (flags win)");

    app->callback([=]() {
        const ConfigFile cf = ConfigFile::load(o->config, {"pred", "gt", "out", "spacing"});
        cf.fill(o_pred, "pred", o->pred);
        cf.fill(o_gt, "gt", o->gt);
        cf.fill(o_out, "out", o->out);
        cf.fill(o_spacing, "spacing", o->spacing);

        std::vector<std::string> gt_stems;
        for (const auto& entry : fs::directory_iterator(o->gt)) {
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                gt_stems.push_back(entry.path().stem().string());
        }
        std::sort(gt_stems.begin(), gt_stems.end());
        if (gt_stems.empty()) throw DataError("eval: no ground-truth masks in " + o->gt);

        std::vector<std::string> missing;
        for (const auto& stem : gt_stems)
            if (!fs::exists(fs::path(o->pred) / (stem + ".png"))) missing.push_back(stem);
        if (!missing.empty()) {
            std::string names;
            for (const auto& s : missing) names += (names.empty() ? "" : ", ") + s;
            throw DataError("eval: missing predictions for: " + names);
        }

        std::ofstream csv(o->out, std::ios::trunc);
        if (!csv) throw DataError("cannot write " + o->out);
        csv << "case_id,tpr,pr,dsc,hd_mm,asd_mm,selected_branch\n";
        double sum_tpr = 0, sum_pr = 0, sum_dsc = 0, sum_hd = 0, sum_asd = 0;
        int64_t n_tpr = 0, n_pr = 0, n_dsc = 0, n_hd = 0, n_asd = 0;
        for (const auto& stem : gt_stems) {
            const core::Mask pm = io::read_png_mask((fs::path(o->pred) / (stem + ".png")).string());
            const core::Mask gm = io::read_png_mask((fs::path(o->gt) / (stem + ".png")).string());
            const auto m = metrics::evaluate_case(pm, gm, o->spacing);
            std::string selected;
            const fs::path report = fs::path(o->pred) / (stem + ".report.json");
            if (fs::exists(report)) {
                json rj = json::parse(read_file(report.string()));
                if (rj.contains("selected")) selected = std::to_string(rj["selected"].get<int>());
            }
            csv << stem << "," << double_str(m.tpr) << "," << double_str(m.precision) << ","
                << double_str(m.dsc) << "," << double_str(m.hd_mm) << "," << double_str(m.asd_mm)
                << "," << selected << "\n";
            if (m.tpr) sum_tpr += *m.tpr, ++n_tpr;
            if (m.precision) sum_pr += *m.precision, ++n_pr;
            if (m.dsc) sum_dsc += *m.dsc, ++n_dsc;
            if (m.hd_mm) sum_hd += *m.hd_mm, ++n_hd;
            if (m.asd_mm) sum_asd += *m.asd_mm, ++n_asd;
        }
        auto mean_str = [](double sum, int64_t n) -> std::string {
            if (n == 0) return "nan";
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f", sum / static_cast<double>(n));
            return buf;
        };
        csv << "mean," << mean_str(sum_tpr, n_tpr) << "," << mean_str(sum_pr, n_pr) << ","
            << mean_str(sum_dsc, n_dsc) << "," << mean_str(sum_hd, n_hd) << ","
            << mean_str(sum_asd, n_asd) << ",\n";
        std::cout << "eval: " << gt_stems.size() << " cases -> " << o->out << " (mean DSC "
                  << mean_str(sum_dsc, n_dsc) << ")\n";
    });
}

// ---- stats ----

struct StatsOpts {
    std::string ckpt;
    bool as_json = false;
};

void register_stats(CLI::App* app) {
    auto o = std::make_shared<StatsOpts>();
    app->add_option("--ckpt", o->ckpt, "Checkpoint file")->required();
    app->add_flag("--json", o->as_json, "Emit machine-readable JSON");

    app->callback([=]() {
        const auto ckpt = train::Checkpoint::load(o->ckpt);
        net::SwinUnet<float> model(ckpt.net_config, 1);
        ckpt.load_into(&model);
        const auto breakdown = model.count_parameters();

        json out;
        out["trained_epochs"] = ckpt.trained_epochs;
        out["num_domains"] = ckpt.net_config.num_domains;
        out["parameters"] = {{"total", breakdown.total},
                             {"backbone", breakdown.backbone},
                             {"ln_bank", breakdown.ln_bank},
                             {"ln_per_branch", model.ln_params_per_branch()}};
        json sigs = json::array();
        for (const auto& sig : ckpt.signatures) {
            json js;
            js["domain"] = sig.domain;
            json entries = json::array();
            for (const auto& e : sig.entries) {
                json je;
                je["site_id"] = e.site_id;
                je["u"] = e.u;
                je["sigma"] = e.sigma;
                if (e.has_m) je["m"] = e.m;
                entries.push_back(je);
            }
            js["entries"] = entries;
            sigs.push_back(js);
        }
        out["signatures"] = sigs;
        if (o->as_json) {
            std::cout << out.dump(2) << "\n";
        } else {
            std::cout << "checkpoint: " << o->ckpt << "\n"
                      << "  trained epochs: " << ckpt.trained_epochs << "\n"
                      << "  domains: " << ckpt.net_config.num_domains << "\n"
                      << "  parameters: total " << breakdown.total << ", backbone "
                      << breakdown.backbone << ", normalization bank " << breakdown.ln_bank << " ("
                      << model.ln_params_per_branch() << " per branch)\n";
            for (const auto& sig : ckpt.signatures) {
                std::cout << "  signature domain " << sig.domain << ": " << sig.entries.size()
                          << " sites\n";
                for (const auto& e : sig.entries) {
                    std::cout << "    " << e.site_id << ": u=" << e.u << " sigma=" << e.sigma;
                    if (e.has_m) std::cout << " m=" << e.m;
                    std::cout << "\n";
                }
            }
        }
    });
}

// ---- select-branch ----

struct SelectOpts {
    std::string ckpt, image, metric = "cosine", sense = "best", out;
};

void register_select_branch(CLI::App* app) {
    auto o = std::make_shared<SelectOpts>();
    app->add_option("--ckpt", o->ckpt, "Checkpoint file")->required();
    app->add_option("--image", o->image, "Input PNG image")->required();
    app->add_option("--metric", o->metric, "cosine | euclidean");
    app->add_option("--sense", o->sense, "best | literal");
    app->add_option("--out", o->out, "Write the report JSON here (default: stdout)");

    app->callback([=]() {
        const auto ckpt = train::Checkpoint::load(o->ckpt);
        net::SwinUnet<float> model(ckpt.net_config, 1);
        ckpt.load_into(&model);
        select::SelectOptions opts;
        if (o->metric == "euclidean")
            opts.metric = select::Metric::Euclidean;
        else if (o->metric != "cosine")
            throw ConfigError("select-branch: unknown metric \"" + o->metric + "\"");
        if (o->sense == "literal")
            opts.sense = select::SelectionSense::LiteralMinSimilarity;
        else if (o->sense != "best")
            throw ConfigError("select-branch: unknown sense \"" + o->sense + "\"");
        const core::Image img = io::read_png_gray(o->image);
        const auto res = select::select_branch(model, ckpt, img, opts);
        if (o->out.empty())
            std::cout << res.report.to_json() << "\n";
        else
            write_text(o->out, res.report.to_json() + "\n");
    });
}

}  // namespace

std::vector<uint64_t> intensity_histogram(const std::vector<core::Image>& images, int bins) {
    if (bins < 2) throw ConfigError("intensity_histogram: bins must be >= 2");
    std::vector<uint64_t> counts(static_cast<size_t>(bins), 0);
    for (const auto& img : images) {
        for (float v : img.pixels) {
            if (v <= 0.0f || v >= 1.0f) continue;  // 0 and 1 are excluded by convention
            const int b = std::min(bins - 1, static_cast<int>(v * bins));
            ++counts[static_cast<size_t>(b)];
        }
    }
    return counts;
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"Domain-generalizing bright-spot lesion segmentation pipeline"};
    app.require_subcommand(1);

    register_synth(app.add_subcommand("synth", "Generate a synthetic phantom dataset"));
    register_augment(app.add_subcommand("augment", "Expand a dataset into labeled intensity domains"));
    register_train(app.add_subcommand("train", "Train the multi-branch segmentation model"));
    register_infer(app.add_subcommand("infer", "Segment images with a trained checkpoint"));
    register_eval(app.add_subcommand("eval", "Score predictions against ground truth"));
    register_stats(app.add_subcommand("stats", "Dump checkpoint signatures and parameter counts"));
    register_select_branch(app.add_subcommand("select-branch", "Emit the branch-selection report"));

    std::vector<std::string> argv_store = args;
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>("mlnseg"));
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}

}  // namespace mln::cli
