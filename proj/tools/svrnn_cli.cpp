// svrnn: threat-field data synthesis, training and evaluation of S-VAE, VRNN and S-VRNN models.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "svrnn/eval.hpp"
#include "svrnn/experiment.hpp"
#include "svrnn/persistence.hpp"
#include "svrnn/threat_field.hpp"
#include "svrnn/training.hpp"

namespace fs = std::filesystem;
using namespace svrnn;

namespace {

enum Exit : int { ok = 0, internal = 1, usage = 2, io = 3, geometry = 4, format = 5 };

const char* kExitHelp =
    "Exit codes: 0 success, 1 internal error, 2 usage or config error, 3 missing or unreadable file,\n"
    "4 geometry mismatch, 5 malformed or corrupted file.\n"
    "Errors print one line: error: code=<usage|config|io|geometry|format|internal> message=\"...\"";

/// Options every subcommand accepts. Flags are applied after the config file, so they win.
struct Common {
    std::string preset = "paper-full";
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flag_values;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--preset", c.preset, "paper-full (100x100 grid) or paper-desk (20x20 grid)");
    app->add_option("--config", c.config_file, "flat key=value config file");
    app->add_option("--set", c.sets, "override one config key, KEY=VALUE (repeatable)");
}

/// Registers --flag as an alias of a config key.
void flag(CLI::App* app, Common& c, const std::string& name, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        name, [&c, key](const std::string& v) { c.flag_values[key] = v; }, help + " [" + key + "]");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = ExperimentConfig::preset(c.preset);
    if (const char* env = std::getenv("SVRNN_OUT_DIR"); env && *env) cfg.out_dir = env;
    if (cfg.out_dir.empty()) cfg.out_dir = "svrnn-out";
    if (!c.config_file.empty()) cfg.apply_file(c.config_file);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : c.flag_values) cfg.set(k, v);
    cfg.validate();
    return cfg;
}

fs::path path_or(const std::string& p, const fs::path& fallback) { return p.empty() ? fallback : fs::path(p); }

const std::string& require_path(const std::string& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string(what) + " is required");
    return p;
}

void say(const std::string& s) { std::cout << s << '\n'; }

int cmd_gen_pool(const ExperimentConfig& cfg) {
    const Dataset pool = generate_pool(cfg.pool_config(cfg.seed));
    const fs::path out = path_or(cfg.output_path, fs::path(cfg.out_dir) / "pool.svtf");
    write_dataset(pool, out);
    say("wrote " + std::to_string(pool.size()) + " data to " + out.string());
    return ok;
}

int cmd_make_dataset(const ExperimentConfig& cfg) {
    const Dataset pool = read_dataset(require_path(cfg.pool_path, "--pool"));
    const Dataset x = subsample(pool, cfg.n_d, cfg.seed);
    const fs::path out = path_or(cfg.output_path, fs::path(cfg.out_dir) / "train.svtf");
    write_dataset(x, out);
    say("wrote " + std::to_string(x.size()) + " data to " + out.string());
    return ok;
}

int cmd_gen_support(const ExperimentConfig& cfg) {
    const Dataset pool = read_dataset(require_path(cfg.pool_path, "--pool"));
    PoolConfig pc = cfg.pool_config(support_seed(cfg.seed));
    pc.grid_side = pool.grid_side;
    pc.horizon = pool.horizon;
    pc.count = cfg.n_s;
    const Dataset s = generate_support(pc, dataset_dynamics(pool));
    const fs::path out = path_or(cfg.output_path, fs::path(cfg.out_dir) / "support.svtf");
    write_dataset(s, out);
    say("wrote " + std::to_string(s.size()) + " support data to " + out.string());
    return ok;
}

fs::path with_suffix(const fs::path& p, const std::string& tag) {
    fs::path q = p;
    q.replace_filename(p.stem().string() + tag + p.extension().string());
    return q;
}

int cmd_train(const ExperimentConfig& cfg) {
    const ModelKind kind = parse_model_kind(cfg.model);
    const Dataset x = read_dataset(require_path(cfg.data_path, "--data"));
    std::optional<Dataset> support;
    if (!cfg.support_path.empty()) support = read_dataset(cfg.support_path);
    if (kind == ModelKind::vrnn && support) throw ConfigError("the VRNN takes no support set");
    if (uses_support(kind) && !support) throw ConfigError(std::string(to_string(kind)) + " needs --support");

    ExperimentConfig geo = cfg;
    geo.grid_side = x.grid_side;
    geo.horizon = x.horizon;
    auto model = GenerativeModel::create(geo.architecture(kind), cfg.seed);
    TrainResult r = train(*model, x, support ? &*support : nullptr, cfg.train_config(cfg.seed),
                          [](std::size_t epoch, const LossBreakdown& l) {
                              if (epoch == 1 || epoch % 50 == 0) {
                                  std::cerr << "epoch " << epoch << " total " << l.total << '\n';
                              }
                          });
    const fs::path ckpt =
        path_or(cfg.checkpoint_path, fs::path(cfg.out_dir) / (std::string(to_string(kind)) + ".svck"));
    write_checkpoint(*model, ckpt);
    write_checkpoint(model->arch(), r.best_params, with_suffix(ckpt, "_best"));
    const fs::path hist = with_suffix(ckpt, "_history").replace_extension(".csv");
    write_text_atomic(hist, history_csv(r.history));
    say("wrote " + ckpt.string() + ", " + with_suffix(ckpt, "_best").string() + " and " + hist.string());
    return ok;
}

int cmd_sample(const ExperimentConfig& cfg) {
    auto model = load_model(require_path(cfg.checkpoint_path, "--checkpoint"));
    const Dataset g = model->generate(cfg.count, generation_seed(cfg.seed));
    const fs::path out = path_or(cfg.output_path, fs::path(cfg.out_dir) / "generated.svtf");
    write_dataset(g, out);
    say("wrote " + std::to_string(g.size()) + " samples to " + out.string());
    return ok;
}

int cmd_eval(const ExperimentConfig& cfg) {
    const Dataset pool = read_dataset(require_path(cfg.pool_path, "--pool"));
    const Dataset x = read_dataset(require_path(cfg.data_path, "--data"));
    std::vector<std::pair<std::string, Dataset>> loaded;
    std::stringstream ss(cfg.generated_paths);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--generated expects LABEL=PATH entries, got '" + item + "'");
        loaded.emplace_back(item.substr(0, eq), read_dataset(item.substr(eq + 1)));
    }
    std::vector<std::pair<std::string, const Dataset*>> gens;
    for (const auto& [label, ds] : loaded) gens.emplace_back(label, &ds);
    const SimilarityReport rep = similarity_report(pool, x, gens, cfg.pca_components);
    std::cout << rep.to_text();
    if (!cfg.output_path.empty()) {
        write_text_atomic(cfg.output_path, rep.to_csv());
        std::vector<std::pair<std::string, Tensor>> coords{{"pool", project(rep.basis, pool)},
                                                           {"train", project(rep.basis, x)}};
        for (const auto& [label, ds] : loaded) coords.emplace_back(label, project(rep.basis, ds));
        write_text_atomic(with_suffix(cfg.output_path, "_coordinates"), coordinates_csv(coords));
    }
    return ok;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    const auto bytes = read_file(p);
    std::stringstream in(std::string(bytes.begin(), bytes.end()));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

// Summarizes every seed directory below out_dir holding a report.csv.
int cmd_report(const ExperimentConfig& cfg) {
    const fs::path root = cfg.out_dir;
    if (!fs::is_directory(root)) throw IoError("no experiment directory at " + root.string());
    std::vector<fs::path> reports;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.path().filename() == "report.csv") reports.push_back(e.path());
    }
    std::sort(reports.begin(), reports.end());
    if (reports.empty()) throw IoError("no report.csv below " + root.string());
    std::map<std::string, std::vector<double>> dist;
    std::size_t svrnn_best = 0, complete = 0;
    for (const auto& p : reports) {
        const auto rows = read_csv(p);
        std::map<std::string, double> d;
        for (std::size_t i = 2; i < rows.size(); ++i) {
            if (rows[i].empty()) continue;
            d[rows[i].front()] = std::stod(rows[i].back());
            dist[rows[i].front()].push_back(d[rows[i].front()]);
        }
        std::cout << fs::relative(p.parent_path(), root).string() << ":";
        for (const auto& [label, v] : d) std::cout << "  " << label << " " << v;
        std::cout << '\n';
        const char* s = report_label(ModelKind::svrnn);
        if (d.count(s) && d.count(report_label(ModelKind::vrnn)) && d.count(report_label(ModelKind::svae))) {
            ++complete;
            if (d[s] <= d[report_label(ModelKind::vrnn)] && d[s] <= d[report_label(ModelKind::svae)]) ++svrnn_best;
        }
    }
    std::cout << "mean distance over " << reports.size() << " runs:\n";
    for (const auto& [label, v] : dist) {
        double m = 0.0;
        for (double x : v) m += x;
        std::cout << "  " << label << " " << m / static_cast<double>(v.size()) << '\n';
    }
    if (complete) std::cout << "S-VRNN closest to the pool in " << svrnn_best << " of " << complete << " runs\n";
    return ok;
}

int cmd_run_experiment(const ExperimentConfig& cfg) {
    const fs::path root = fs::path(cfg.out_dir) / ("nd" + std::to_string(cfg.n_d));
    std::size_t best = 0;
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path dir = root / ("seed" + std::to_string(seed));
        const ExperimentOutcome o = run_experiment(cfg, seed, dir, &std::cerr);
        bool svrnn_best = true;
        bool has_svrnn = false;
        for (const auto& m : o.models) has_svrnn |= m.kind == ModelKind::svrnn;
        if (has_svrnn) {
            const double d = o.model(ModelKind::svrnn).distance;
            for (const auto& m : o.models) svrnn_best &= d <= m.distance;
            best += svrnn_best ? 1 : 0;
        }
        std::cout << "seed " << seed << " (" << dir.string() << ")\n" << o.report.to_text();
        for (const auto& m : o.models) {
            const double ratio = m.history.empty() ? 1.0 : m.history.back().total / m.history.front().total;
            std::cout << "  " << to_string(m.kind) << ": final/first epoch loss " << ratio
                      << ", last-step peak below first-step peak in " << 100.0 * m.decay << "% of samples\n";
        }
    }
    std::cout << "S-VRNN closest to the pool in " << best << " of " << cfg.seeds.size() << " seeds\n";
    return ok;
}

struct Failure {
    int code;
    const char* name;
};

int fail(const Failure& f, const std::string& message) {
    std::string m;
    for (char c : message) {
        if (c == '"' || c == '\\') m += '\\';
        m += c == '\n' ? ' ' : c;
    }
    std::cerr << "error: code=" << f.name << " message=\"" << m << "\"\n";
    return f.code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threat-field data synthesis with S-VAE, VRNN and S-VRNN generative models"};
    app.footer(kExitHelp);
    app.require_subcommand(1);

    std::string keys_help = "Config keys (flags override the config file, which overrides the preset):\n";
    for (const auto& k : ExperimentConfig::keys()) keys_help += "  " + std::string(k.key) + ": " + k.doc + "\n";

    Common common;
    using Handler = int (*)(const ExperimentConfig&);
    std::vector<std::pair<CLI::App*, Handler>> handlers;
    auto sub = [&](const char* name, const char* help, Handler h) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common(s, common);
        flag(s, common, "--seed", "seed", "random seed");
        flag(s, common, "--out", "out_dir", "output directory");
        flag(s, common, "--output", "output_path", "output file");
        s->footer(keys_help + kExitHelp);
        handlers.emplace_back(s, h);
        return s;
    };

    auto* gp = sub("gen-pool", "simulate the data pool", cmd_gen_pool);
    flag(gp, common, "--count", "pool_size", "pool size");
    flag(gp, common, "--grid-side", "grid_side", "grid side");
    flag(gp, common, "--horizon", "horizon", "sequence length");
    flag(gp, common, "--sigma1", "sigma1", "process noise std");
    flag(gp, common, "--sigma2", "sigma2", "measurement noise std");

    auto* md = sub("make-dataset", "draw the training subset from a pool", cmd_make_dataset);
    flag(md, common, "--pool", "pool_path", "pool dataset");
    flag(md, common, "--nd", "n_d", "subset size");

    auto* gs = sub("gen-support", "simulate a noiseless support set with the pool's dynamics", cmd_gen_support);
    flag(gs, common, "--pool", "pool_path", "pool dataset");
    flag(gs, common, "--count", "n_s", "support set size");

    auto* tr = sub("train", "train one model", cmd_train);
    flag(tr, common, "--model", "model", "svae, vrnn or svrnn");
    flag(tr, common, "--data", "data_path", "training dataset");
    flag(tr, common, "--support", "support_path", "support dataset (split models only)");
    flag(tr, common, "--checkpoint", "checkpoint_path", "checkpoint to write");
    flag(tr, common, "--epochs", "epochs", "training epochs");
    flag(tr, common, "--batch-size", "batch_size", "mini-batch size");
    flag(tr, common, "--lr", "learning_rate", "learning rate");
    flag(tr, common, "--threads", "threads", "gradient worker threads");

    auto* sa = sub("sample", "generate data from a checkpoint", cmd_sample);
    flag(sa, common, "--checkpoint", "checkpoint_path", "checkpoint to load");
    flag(sa, common, "--count", "count", "number of samples");

    auto* ev = sub("eval", "moment report of generated sets against the pool", cmd_eval);
    flag(ev, common, "--pool", "pool_path", "pool dataset");
    flag(ev, common, "--data", "data_path", "training dataset");
    flag(ev, common, "--generated", "generated_paths", "LABEL=PATH list");
    flag(ev, common, "--components", "pca_components", "principal components");

    sub("report", "summarize the run-experiment results below --out", cmd_report);

    auto* re = sub("run-experiment", "full protocol: data, all models, generation, report", cmd_run_experiment);
    flag(re, common, "--nd", "n_d", "training subset size");
    flag(re, common, "--seeds", "seeds", "comma-separated seeds");
    flag(re, common, "--epochs", "epochs", "training epochs");
    flag(re, common, "--models", "models", "models to train");
    flag(re, common, "--threads", "threads", "gradient worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail({usage, "usage"}, e.what());
    }

    try {
        // A lone --seed on run-experiment narrows the seed list to that seed.
        for (auto& [s, h] : handlers) {
            if (!s->parsed()) continue;
            if (h == cmd_run_experiment && common.flag_values.count("seed") && !common.flag_values.count("seeds")) {
                common.flag_values["seeds"] = common.flag_values["seed"];
            }
            return h(resolve(common));
        }
    } catch (const ConfigError& e) {
        return fail({usage, "config"}, e.what());
    } catch (const IoError& e) {
        return fail({io, "io"}, e.what());
    } catch (const GeometryError& e) {
        return fail({geometry, "geometry"}, e.what());
    } catch (const PersistenceError& e) {
        return fail({format, "format"}, e.what());
    } catch (const std::invalid_argument& e) {
        return fail({usage, "usage"}, e.what());
    } catch (const std::exception& e) {
        return fail({internal, "internal"}, e.what());
    }
    return internal;
}
