#include "svrnn/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "svrnn/persistence.hpp"

namespace svrnn {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        const auto x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field size_field(T ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = to_u64(k, v); },
            [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field real_field(double ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
            [m](const ExperimentConfig& c) { return num(c.*m); }};
}

Field text_field(std::string ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string&, const std::string& v) { c.*m = v; },
            [m](const ExperimentConfig& c) { return c.*m; }};
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> f = {
        {"grid_side", size_field(&ExperimentConfig::grid_side)},
        {"horizon", size_field(&ExperimentConfig::horizon)},
        {"n_p", size_field(&ExperimentConfig::n_p)},
        {"pool_size", size_field(&ExperimentConfig::pool_size)},
        {"n_d", size_field(&ExperimentConfig::n_d)},
        {"n_s", size_field(&ExperimentConfig::n_s)},
        {"sigma1", real_field(&ExperimentConfig::sigma1)},
        {"sigma2", real_field(&ExperimentConfig::sigma2)},
        {"dt", real_field(&ExperimentConfig::dt)},
        {"theta0_range", real_field(&ExperimentConfig::theta0_range)},
        {"width_min", real_field(&ExperimentConfig::width_min)},
        {"width_max", real_field(&ExperimentConfig::width_max)},
        {"models",
         {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.models.clear();
              for (const auto& s : split(v, ',')) {
                  try {
                      c.models.push_back(parse_model_kind(s));
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError("config key '" + k + "': " + e.what());
                  }
              }
          },
          [](const ExperimentConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.models.size(); ++i) s += (i ? "," : "") + std::string(to_string(c.models[i]));
              return s;
          }}},
        {"svae_channels",
         {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.svae_channels.clear();
              for (const auto& s : split(v, ',')) c.svae_channels.push_back(to_u64(k, s));
          },
          [](const ExperimentConfig& c) { return join(c.svae_channels); }}},
        {"reconstruction",
         {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
              try {
                  c.reconstruction = parse_reconstruction(v);
              } catch (const std::invalid_argument& e) {
                  throw ConfigError("config key '" + k + "': " + e.what());
              }
          },
          [](const ExperimentConfig& c) { return std::string(to_string(c.reconstruction)); }}},
        {"epochs", size_field(&ExperimentConfig::epochs)},
        {"batch_size", size_field(&ExperimentConfig::batch_size)},
        {"learning_rate", real_field(&ExperimentConfig::learning_rate)},
        {"clip_norm", real_field(&ExperimentConfig::clip_norm)},
        {"support_fraction", real_field(&ExperimentConfig::support_fraction)},
        {"threads", size_field(&ExperimentConfig::threads)},
        {"n_generated", size_field(&ExperimentConfig::n_generated)},
        {"pca_components", size_field(&ExperimentConfig::pca_components)},
        {"export_images",
         {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.export_images = to_bool(k, v); },
          [](const ExperimentConfig& c) { return std::string(c.export_images ? "true" : "false"); }}},
        {"seed", size_field(&ExperimentConfig::seed)},
        {"seeds",
         {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.seeds.clear();
              for (const auto& s : split(v, ',')) c.seeds.push_back(to_u64(k, s));
          },
          [](const ExperimentConfig& c) { return join(c.seeds); }}},
        {"out_dir", text_field(&ExperimentConfig::out_dir)},
        {"pool_path", text_field(&ExperimentConfig::pool_path)},
        {"data_path", text_field(&ExperimentConfig::data_path)},
        {"support_path", text_field(&ExperimentConfig::support_path)},
        {"checkpoint_path", text_field(&ExperimentConfig::checkpoint_path)},
        {"output_path", text_field(&ExperimentConfig::output_path)},
        {"generated_paths", text_field(&ExperimentConfig::generated_paths)},
        {"model", text_field(&ExperimentConfig::model)},
        {"count", size_field(&ExperimentConfig::count)},
    };
    return f;
}

}  // namespace

const std::vector<ExperimentConfig::KeyDoc>& ExperimentConfig::keys() {
    static const std::vector<KeyDoc> k = {
        {"grid_side", "observation grid side; N_G = side^2 (100)"},
        {"horizon", "sequence length T (4)"},
        {"n_p", "number of spatial basis functions (4)"},
        {"pool_size", "size of the simulated data pool (500)"},
        {"n_d", "training subset size drawn from the pool (50)"},
        {"n_s", "support set size (500)"},
        {"sigma1", "process noise std (0.25)"},
        {"sigma2", "measurement noise std (0)"},
        {"dt", "integration step; 1/dt substeps per observation (0.01)"},
        {"theta0_range", "Theta(0) ~ U[-r, r] (5)"},
        {"width_min", "smallest basis width (0.02)"},
        {"width_max", "largest basis width (0.2)"},
        {"models", "models to train in run-experiment (svae,vrnn,svrnn)"},
        {"svae_channels", "S-VAE encoder channels (16,32,64,128)"},
        {"reconstruction", "per-step reconstruction term: mean or sum of squared errors (sum)"},
        {"epochs", "training epochs (200)"},
        {"batch_size", "mini-batch size (10)"},
        {"learning_rate", "Adam learning rate (0.001)"},
        {"clip_norm", "global gradient-norm clip, <= 0 disables (5)"},
        {"support_fraction", "share of each epoch taken from the support set, negative = whole set (-1)"},
        {"threads", "worker threads for per-datum gradients (1)"},
        {"n_generated", "samples generated per model (500)"},
        {"pca_components", "principal components in the report (3)"},
        {"export_images", "write PGM frames in run-experiment (true)"},
        {"seed", "seed of single-run subcommands (1)"},
        {"seeds", "seeds of run-experiment (1,2,3)"},
        {"out_dir", "output directory (env SVRNN_OUT_DIR, else ./svrnn-out)"},
        {"pool_path", "pool dataset file"},
        {"data_path", "training dataset file"},
        {"support_path", "support dataset file"},
        {"checkpoint_path", "model checkpoint file"},
        {"output_path", "output file"},
        {"generated_paths", "label=path list of generated datasets for eval/report"},
        {"model", "model kind for train (svrnn)"},
        {"count", "number of samples for sample (0)"},
    };
    return k;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "paper-full") return c;
    if (name == "paper-desk") {
        c.grid_side = 20;
        c.pool_size = 200;
        c.n_d = 25;
        c.n_s = 200;
        c.n_generated = 200;
        c.svae_channels = {8, 16, 32, 64};
        return c;
    }
    throw ConfigError("unknown preset '" + name + "' (expected paper-full or paper-desk)");
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(*this, key, trim(value));
}

std::string ExperimentConfig::get(const std::string& key) const {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.get(*this);
}

void ExperimentConfig::apply_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
        }
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void ExperimentConfig::apply_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_text(ss.str());
}

std::string ExperimentConfig::to_text() const {
    std::string s;
    for (const auto& [key, f] : fields()) s += key + "=" + f.get(*this) + "\n";
    return s;
}

void ExperimentConfig::validate() const {
    try {
        pool_config(seed).validate();
        train_config(seed).validate();
        for (ModelKind k : models) architecture(k).validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (models.empty()) throw ConfigError("models must name at least one model");
    if (n_d == 0) throw ConfigError("n_d must be positive");
    if (n_s == 0) throw ConfigError("n_s must be positive");
    if (pca_components == 0) throw ConfigError("pca_components must be positive");
    if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
}

void ExperimentConfig::validate_run() const {
    validate();
    if (n_d > pool_size) throw ConfigError("n_d must not exceed pool_size");
    if (n_d < 2) throw ConfigError("n_d must be at least 2 for moment reports");
    if (n_generated < pca_components + 1) throw ConfigError("n_generated must exceed pca_components");
    if (pool_size < pca_components + 1) throw ConfigError("pool_size must exceed pca_components");
}

PoolConfig ExperimentConfig::pool_config(std::uint64_t s) const {
    PoolConfig p;
    p.count = pool_size;
    p.grid_side = grid_side;
    p.horizon = horizon;
    p.n_p = n_p;
    p.sigma1 = sigma1;
    p.sigma2 = sigma2;
    p.dt = dt;
    p.seed = s;
    p.theta0_range = theta0_range;
    p.width_min = width_min;
    p.width_max = width_max;
    return p;
}

TrainConfig ExperimentConfig::train_config(std::uint64_t s) const {
    TrainConfig t;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.epochs = epochs;
    t.seed = s;
    t.clip_norm = clip_norm;
    t.support_fraction = support_fraction;
    t.threads = threads;
    return t;
}

Architecture ExperimentConfig::architecture(ModelKind kind) const {
    Architecture a = Architecture::reference(kind, grid_side, horizon);
    if (kind == ModelKind::svae) a.conv_channels = svae_channels;
    a.reconstruction = reconstruction;
    return a;
}

std::uint64_t support_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x5355505000000000ull); }

std::uint64_t generation_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x47454e0000000000ull); }

const char* report_label(ModelKind kind) {
    switch (kind) {
        case ModelKind::svae: return "S-VAE generated data";
        case ModelKind::vrnn: return "VRNN generated data";
        case ModelKind::svrnn: return "S-VRNN generated data";
    }
    return "generated data";
}

const ModelOutcome& ExperimentOutcome::model(ModelKind kind) const {
    for (const auto& m : models) {
        if (m.kind == kind) return m;
    }
    throw std::out_of_range(std::string("no outcome for model ") + to_string(kind));
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out_dir,
                                 std::ostream* log) {
    config.validate_run();
    const bool write = !out_dir.empty();
    ExperimentOutcome out;
    out.seed = seed;

    const PoolConfig pc = config.pool_config(seed);
    out.pool = generate_pool(pc);
    out.train = subsample(out.pool, config.n_d, seed);
    PoolConfig sc = pc;
    sc.seed = support_seed(seed);
    sc.count = config.n_s;
    out.support = generate_support(sc, dataset_dynamics(out.pool));
    if (log) {
        *log << "seed " << seed << ": pool " << out.pool.size() << ", training " << out.train.size() << ", support "
             << out.support.size() << '\n';
    }
    if (write) {
        write_dataset(out.pool, out_dir / "pool.svtf");
        write_dataset(out.train, out_dir / "train.svtf");
        write_dataset(out.support, out_dir / "support.svtf");
        write_text_atomic(out_dir / "config.txt", config.to_text() + "run_seed=" + std::to_string(seed) + "\n");
    }

    for (ModelKind kind : config.models) {
        const Architecture arch = config.architecture(kind);
        auto model = GenerativeModel::create(arch, seed);
        const Dataset* support = uses_support(kind) ? &out.support : nullptr;
        TrainResult tr = train(*model, out.train, support, config.train_config(seed),
                               [&](std::size_t epoch, const LossBreakdown& l) {
                                   if (log && (epoch == 1 || epoch % 50 == 0 || epoch == config.epochs)) {
                                       *log << "  " << to_string(kind) << " epoch " << epoch << " total " << l.total
                                            << '\n';
                                   }
                               });
        ModelOutcome mo;
        mo.kind = kind;
        mo.history = std::move(tr.history);
        mo.best_epoch = tr.best_epoch;
        mo.generated = model->generate(config.n_generated, generation_seed(seed));
        mo.generated.metadata["seed"] = std::to_string(seed);
        mo.decay = config.horizon >= 2 ? decay_fraction(mo.generated) : 0.0;
        if (write) {
            const std::string name = to_string(kind);
            write_checkpoint(*model, out_dir / (name + "_final.svck"));
            write_checkpoint(arch, tr.best_params, out_dir / (name + "_best.svck"));
            write_text_atomic(out_dir / (name + "_history.csv"), history_csv(mo.history));
            write_dataset(mo.generated, out_dir / (name + "_generated.svtf"));
        }
        out.models.push_back(std::move(mo));
    }

    std::vector<std::pair<std::string, const Dataset*>> gens;
    for (const auto& m : out.models) gens.emplace_back(report_label(m.kind), &m.generated);
    out.report = similarity_report(out.pool, out.train, gens, config.pca_components);
    for (auto& m : out.models) m.distance = out.report.distance(report_label(m.kind));
    if (log) *log << out.report.to_text();

    if (write) {
        write_text_atomic(out_dir / "report.txt", out.report.to_text());
        write_text_atomic(out_dir / "report.csv", out.report.to_csv());
        std::vector<std::pair<std::string, Tensor>> coords;
        coords.emplace_back("pool", project(out.report.basis, out.pool));
        coords.emplace_back("train", project(out.report.basis, out.train));
        coords.emplace_back("support", project(out.report.basis, out.support));
        for (const auto& m : out.models) coords.emplace_back(to_string(m.kind), project(out.report.basis, m.generated));
        write_text_atomic(out_dir / "pca_coordinates.csv", coordinates_csv(coords));
        if (config.export_images) {
            for (std::size_t t = 0; t < config.horizon; ++t) {
                const std::string suffix = "_t" + std::to_string(t + 1) + ".pgm";
                export_field_image(out.pool.data.front(), t, config.grid_side, out_dir / "images" / ("pool" + suffix));
                for (const auto& m : out.models) {
                    export_field_image(m.generated.data.front(), t, config.grid_side,
                                       out_dir / "images" / (std::string(to_string(m.kind)) + suffix));
                }
            }
        }
    }
    return out;
}

}  // namespace svrnn
