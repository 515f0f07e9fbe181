#include "alora/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "alora/format.hpp"

namespace alora {

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Multitask: return "multitask";
        case ExperimentKind::Federated: return "fed";
        case ExperimentKind::Analysis: return "analyze";
        case ExperimentKind::Commcost: return "commcost";
    }
    return "?";
}

ExperimentKind parse_kind(std::string_view name) {
    if (name == "multitask") return ExperimentKind::Multitask;
    if (name == "fed") return ExperimentKind::Federated;
    if (name == "analyze") return ExperimentKind::Analysis;
    if (name == "commcost") return ExperimentKind::Commcost;
    throw std::invalid_argument("unknown experiment kind '" + std::string(name) +
                                "' (expected multitask, fed, analyze or commcost)");
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
    std::string out = "invalid config:";
    for (const auto& e : errors) out += "\n  " + e;
    return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
    std::string key;
    Setter set;
    Getter get;
};

std::size_t to_size(std::string_view v) {
    const auto parsed = parse_u64(v);
    if (!parsed) throw std::invalid_argument("expected a non-negative integer, got '" + std::string(v) + "'");
    return static_cast<std::size_t>(*parsed);
}

double to_double(std::string_view v) {
    const auto parsed = parse_double(v);
    if (!parsed) throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
    return *parsed;
}

bool to_bool(std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

template <class T, class Convert>
std::vector<T> to_list(std::string_view v, Convert convert) {
    std::vector<T> out;
    if (trim(v).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = v.find(',', start);
        out.push_back(convert(trim(v.substr(start, comma - start))));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string sizes_text(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
    return out;
}

std::string doubles_text(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + format_shortest(v[k]);
    return out;
}

#define ALORA_SIZE(KEY, MEMBER)                                                                  \
    Field {                                                                                      \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_size(v); },              \
            [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                   \
    }
#define ALORA_DOUBLE(KEY, MEMBER)                                                                \
    Field {                                                                                      \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_double(v); },            \
            [](const ExperimentConfig& c) { return format_shortest(c.MEMBER); }                  \
    }
#define ALORA_TEXT(KEY, MEMBER)                                                                  \
    Field {                                                                                      \
        KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = std::string(v); },          \
            [](const ExperimentConfig& c) { return c.MEMBER; }                                   \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"kind", [](ExperimentConfig& c, std::string_view v) { c.kind = parse_kind(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.kind)); }},
        Field{"seed",
              [](ExperimentConfig& c, std::string_view v) {
                  const auto s = parse_u64(v);
                  if (!s) throw std::invalid_argument("expected an unsigned 64-bit integer, got '" + std::string(v) + "'");
                  c.seed = *s;
              },
              [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
        ALORA_TEXT("out", out),
        ALORA_TEXT("resume", resume),

        ALORA_SIZE("suite.n_tasks", suite.n_tasks),
        ALORA_SIZE("suite.d_in", suite.d_in),
        ALORA_SIZE("suite.d_out", suite.d_out),
        ALORA_SIZE("suite.true_rank", suite.true_rank),
        Field{"suite.family", [](ExperimentConfig& c, std::string_view v) { c.suite.family = parse_family(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.suite.family)); }},
        ALORA_DOUBLE("suite.noise", suite.noise),
        ALORA_DOUBLE("suite.perturbation", suite.perturbation),
        ALORA_SIZE("suite.latent_dim", suite.latent_dim),
        ALORA_DOUBLE("suite.task_shift", suite.task_shift),
        ALORA_SIZE("suite.samples_per_task", suite.samples_per_task),

        Field{"adapter.scheme", [](ExperimentConfig& c, std::string_view v) { c.adapter.scheme = parse_scheme(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.adapter.scheme)); }},
        ALORA_SIZE("adapter.rank", adapter.rank),
        ALORA_SIZE("adapter.experts", adapter.experts),
        ALORA_DOUBLE("adapter.scaling", adapter.scaling),

        Field{"train.optimizer",
              [](ExperimentConfig& c, std::string_view v) { c.train.optimizer.kind = parse_optimizer(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.train.optimizer.kind)); }},
        ALORA_DOUBLE("train.lr", train.optimizer.lr),
        ALORA_DOUBLE("train.beta1", train.optimizer.beta1),
        ALORA_DOUBLE("train.beta2", train.optimizer.beta2),
        ALORA_DOUBLE("train.eps", train.optimizer.eps),
        ALORA_SIZE("train.epochs", train.epochs),
        ALORA_SIZE("train.batch_size", train.batch_size),
        Field{"multitask.baselines", [](ExperimentConfig& c, std::string_view v) { c.baselines = to_bool(v); },
              [](const ExperimentConfig& c) { return std::string(c.baselines ? "true" : "false"); }},

        Field{"fed.strategy", [](ExperimentConfig& c, std::string_view v) { c.fed.strategy = parse_strategy(v); },
              [](const ExperimentConfig& c) { return std::string(to_string(c.fed.strategy)); }},
        ALORA_SIZE("fed.n_clients", fed.n_clients),
        ALORA_SIZE("fed.rounds", fed.rounds),
        ALORA_SIZE("fed.local_epochs", fed.local_epochs),
        Field{"fed.ranks",
              [](ExperimentConfig& c, std::string_view v) { c.fed.ranks = to_list<std::size_t>(v, to_size); },
              [](const ExperimentConfig& c) { return sizes_text(c.fed.ranks); }},
        ALORA_SIZE("fed.d_m", fed.d_m),
        Field{"fed.weights",
              [](ExperimentConfig& c, std::string_view v) { c.fed.weights = to_list<double>(v, to_double); },
              [](const ExperimentConfig& c) { return doubles_text(c.fed.weights); }},
        Field{"fed.shared_init", [](ExperimentConfig& c, std::string_view v) { c.fed.shared_init = to_bool(v); },
              [](const ExperimentConfig& c) { return std::string(c.fed.shared_init ? "true" : "false"); }},

        ALORA_SIZE("checkpoint.every", checkpoint_every),

        ALORA_TEXT("analysis.first", analysis_first),
        ALORA_TEXT("analysis.second", analysis_second),

        ALORA_SIZE("commcost.d_in", geometry.d_in),
        ALORA_SIZE("commcost.d_out", geometry.d_out),
        ALORA_SIZE("commcost.modules", geometry.modules),
        Field{"commcost.ranks",
              [](ExperimentConfig& c, std::string_view v) { c.commcost_ranks = to_list<std::size_t>(v, to_size); },
              [](const ExperimentConfig& c) { return sizes_text(c.commcost_ranks); }},
        ALORA_SIZE("commcost.d_m", commcost_d_m),
    };
    return table;
}

#undef ALORA_SIZE
#undef ALORA_DOUBLE
#undef ALORA_TEXT

void collect_validation(const ExperimentConfig& cfg, std::vector<std::string>& errors) {
    const auto check = [&](const std::function<void()>& fn, const std::string& where) {
        try {
            fn();
        } catch (const std::exception& e) {
            errors.push_back(where + ": " + e.what());
        }
    };

    if (cfg.out.empty()) errors.push_back("out: output directory must not be empty");

    switch (cfg.kind) {
        case ExperimentKind::Multitask: {
            check([&] { validate(cfg.suite); }, "suite");
            AdapterConfig ac = cfg.adapter;
            ac.d_in = cfg.suite.d_in;
            ac.d_out = cfg.suite.d_out;
            check([&] { validate(ac); }, "adapter");
            check([&] { validate(cfg.train); }, "train");
            if (cfg.train.epochs == 0) errors.push_back("train.epochs: must be >= 1");
            break;
        }
        case ExperimentKind::Federated: {
            check([&] { validate(cfg.suite); }, "suite");
            if (cfg.fed.ranks.size() != cfg.fed.n_clients)
                errors.push_back("fed.ranks lists " + std::to_string(cfg.fed.ranks.size()) +
                                 " entries but fed.n_clients is " + std::to_string(cfg.fed.n_clients));
            if (cfg.suite.n_tasks < cfg.fed.n_clients)
                errors.push_back("suite.n_tasks (" + std::to_string(cfg.suite.n_tasks) +
                                 ") must be >= fed.n_clients (" + std::to_string(cfg.fed.n_clients) +
                                 "): client i trains on task i");
            if (cfg.fed.ranks.size() == cfg.fed.n_clients) {
                FedConfig fc = cfg.fed;
                fc.train = cfg.train;
                check([&] { validate(fc); }, "fed");
                for (std::size_t r : cfg.fed.ranks)
                    if (r > std::min(cfg.suite.d_in, cfg.suite.d_out)) {
                        errors.push_back("fed.ranks: rank " + std::to_string(r) + " exceeds min(suite.d_in, suite.d_out)");
                        break;
                    }
            }
            break;
        }
        case ExperimentKind::Analysis:
            if (cfg.analysis_first.empty()) errors.push_back("analysis.first: checkpoint path required");
            if (cfg.analysis_second.empty()) errors.push_back("analysis.second: checkpoint path required");
            break;
        case ExperimentKind::Commcost:
            if (cfg.geometry.d_in == 0 || cfg.geometry.d_out == 0 || cfg.geometry.modules == 0)
                errors.push_back("commcost: d_in, d_out and modules must be >= 1");
            if (cfg.commcost_ranks.empty()) errors.push_back("commcost.ranks: at least one client rank required");
            for (std::size_t r : cfg.commcost_ranks)
                if (r == 0) {
                    errors.push_back("commcost.ranks: every rank must be >= 1");
                    break;
                }
            if (cfg.commcost_d_m == 0) errors.push_back("commcost.d_m: must be >= 1");
            break;
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

void validate(const ExperimentConfig& cfg) {
    std::vector<std::string> errors;
    collect_validation(cfg, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

ExperimentConfig parse_config_text(std::string_view text) {
    ExperimentConfig cfg;
    std::vector<std::string> errors;
    std::map<std::string, std::size_t, std::less<>> seen;
    bool ranks_given = false;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        for (std::size_t k = 0; k < line.size(); ++k)
            if (line[k] == '#' && (k == 0 || line[k - 1] == ' ' || line[k - 1] == '\t')) {
                line = line.substr(0, k);
                break;
            }
        line = trim(line);
        if (line.empty()) continue;

        const std::string where = "line " + std::to_string(line_no);
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            errors.push_back(where + ": expected 'key = value', got '" + std::string(line) + "'");
            continue;
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto& table = fields();
        const auto field = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
        if (field == table.end()) {
            errors.push_back(where + ": unknown key '" + std::string(key) + "'");
            continue;
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            errors.push_back(where + ": key '" + std::string(key) + "' already set on line " +
                             std::to_string(prev->second));
            continue;
        }
        seen.emplace(std::string(key), line_no);
        try {
            field->set(cfg, value);
            if (key == "fed.ranks") ranks_given = true;
        } catch (const std::exception& e) {
            errors.push_back(where + ": " + std::string(key) + ": " + e.what());
        }
    }

    if (!ranks_given) cfg.fed.ranks.assign(cfg.fed.n_clients, cfg.adapter.rank);
    if (cfg.kind == ExperimentKind::Federated && !seen.contains("suite.n_tasks")) cfg.suite.n_tasks = cfg.fed.n_clients;
    collect_validation(cfg, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot read config file '" + path.string() + "'"});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string echo_config(const ExperimentConfig& cfg) {
    std::string out = "# resolved configuration\n";
    for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
    ExperimentConfig keyed = cfg;
    keyed.out.clear();
    keyed.resume.clear();
    return hex64(fnv1a64(echo_config(keyed)));
}

std::uint64_t suite_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, "suite"); }
std::uint64_t train_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, "train"); }
std::uint64_t init_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, "adapter.init"); }
std::uint64_t fed_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, "fed"); }

FedConfig federation_config(const ExperimentConfig& cfg) {
    FedConfig fc = cfg.fed;
    fc.train = cfg.train;
    fc.train.seed = train_seed(cfg);
    fc.seed = fed_seed(cfg);
    return fc;
}

}  // namespace alora
