#include "paflab/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "paflab/errors.hpp"
#include "paflab/rng.hpp"

namespace paflab {

using json = nlohmann::json;

std::size_t CompareSettings::finetune_steps(std::size_t steps) const {
    const auto n = static_cast<std::size_t>(std::llround(finetune_fraction * static_cast<double>(steps)));
    return std::max<std::size_t>(1, n);
}

void ExperimentConfig::validate() const {
    model.validate();
    task.validate();
    task.check_compatible(model);
    train.validate();
    bench.validate();
    if (probe.sequences < 1) {
        throw ConfigError("probe.sequences must be >= 1");
    }
    if (compare.seeds.empty()) {
        throw ConfigError("compare.seeds must not be empty");
    }
    if (!(compare.finetune_fraction > 0.0 && compare.finetune_fraction <= 1.0)) {
        throw ConfigError("compare.finetune_fraction must be in (0, 1]");
    }
    if (grad_check.options.samples_per_tensor < 1 || grad_check.batch_size < 1) {
        throw ConfigError("grad_check.samples_per_tensor and grad_check.batch_size must be >= 1");
    }
    if (!(grad_check.options.step > 0.0)) {
        throw ConfigError("grad_check.step must be positive");
    }
    if (grad_check.variants.empty() || grad_check.activations.empty()) {
        throw ConfigError("grad_check.variants and grad_check.activations must not be empty");
    }
}

DerivedSeeds derive_seeds(std::uint64_t root) {
    return DerivedSeeds{root, mix_seed(root, 1), mix_seed(root, 2), mix_seed(root, 3), mix_seed(root, 4)};
}

void apply_root_seed(ExperimentConfig& cfg, std::uint64_t root) {
    const DerivedSeeds s = derive_seeds(root);
    cfg.seed = root;
    cfg.model.seed = s.model;
    cfg.task.seed = s.task;
    cfg.train.seed = s.train;
    cfg.bench.seed = s.bench;
    cfg.grad_check.options.seed = s.grad_check;
    cfg.compare.seeds = {root};
}

namespace {

std::size_t line_of(std::string_view text, std::size_t pos) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
        line += text[i] == '\n' ? 1 : 0;
    }
    return line;
}

class Parser {
  public:
    Parser(std::string_view text, std::string_view source) : text_(text), source_(source) {}

    [[noreturn]] void fail(std::string_view section, std::string_view key, const std::string& what) const {
        std::string where = std::string(source_) + ":" + std::to_string(locate(section, key)) + ": ";
        std::string name = section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
        throw ConfigError(where + (name.empty() ? "" : name + ": ") + what);
    }

    // Line of `"key"` inside `"section"`, or of the section itself.
    std::size_t locate(std::string_view section, std::string_view key) const {
        std::size_t from = 0;
        if (!section.empty()) {
            const std::size_t s = text_.find("\"" + std::string(section) + "\"");
            if (s == std::string_view::npos) {
                return 1;
            }
            from = s;
            if (key.empty()) {
                return line_of(text_, s);
            }
        }
        const std::size_t k = text_.find("\"" + std::string(key) + "\"", from);
        return line_of(text_, k == std::string_view::npos ? from : k);
    }

    using Handler = std::function<void(const json&)>;

    void section(const json& obj, std::string_view name, const std::map<std::string, Handler>& handlers) {
        if (!obj.is_object()) {
            fail(name, "", "expected an object");
        }
        for (const auto& [key, value] : obj.items()) {
            const auto it = handlers.find(key);
            if (it == handlers.end()) {
                fail(name, key, "unknown key");
            }
            current_section_ = name;
            current_key_ = key;
            try {
                it->second(value);
            } catch (const ConfigError& e) {
                const std::string msg = e.what();
                if (msg.rfind(std::string(source_) + ":", 0) == 0) {
                    throw;
                }
                fail(name, key, msg);
            }
        }
    }

    std::uint64_t u64(const json& v) const {
        if (!v.is_number_unsigned()) {
            fail(current_section_, current_key_, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }
    std::size_t count(const json& v) const { return static_cast<std::size_t>(u64(v)); }
    double real(const json& v) const {
        if (!v.is_number()) {
            fail(current_section_, current_key_, "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(current_section_, current_key_, "expected a finite number");
        }
        return d;
    }
    std::string str(const json& v) const {
        if (!v.is_string()) {
            fail(current_section_, current_key_, "expected a string");
        }
        return v.get<std::string>();
    }
    template <typename F>
    void list(const json& v, F&& each) const {
        if (!v.is_array()) {
            fail(current_section_, current_key_, "expected an array");
        }
        for (const json& item : v) {
            each(item);
        }
    }

  private:
    std::string_view text_;
    std::string_view source_;
    std::string_view current_section_;
    std::string current_key_;
};

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError(std::string(source) + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
    }

    Parser p(text, source);
    if (!root.is_object()) {
        p.fail("", "", "top level must be an object");
    }

    ExperimentConfig cfg;
    std::optional<std::uint64_t> model_seed, task_seed, train_seed, bench_seed, gc_seed;
    bool seeds_given = false;

    const auto model = [&](const json& v) {
        ModelConfig& m = cfg.model;
        p.section(v, "model",
                  {{"depth", [&](const json& x) { m.depth = p.count(x); }},
                   {"dim", [&](const json& x) { m.dim = p.count(x); }},
                   {"heads", [&](const json& x) { m.heads = p.count(x); }},
                   {"ffn_dim", [&](const json& x) { m.ffn_dim = p.count(x); }},
                   {"vocab", [&](const json& x) { m.vocab = p.count(x); }},
                   {"max_seq", [&](const json& x) { m.max_seq = p.count(x); }},
                   {"variant", [&](const json& x) { m.variant = parse_variant(p.str(x)); }},
                   {"activation", [&](const json& x) { m.activation = parse_activation(p.str(x)); }},
                   {"init_std", [&](const json& x) { m.init_std = p.real(x); }},
                   {"seed", [&](const json& x) { model_seed = p.u64(x); }}});
    };
    std::optional<std::size_t> task_vocab, task_len;
    const auto task = [&](const json& v) {
        ToyTask& t = cfg.task;
        p.section(v, "task",
                  {{"kind", [&](const json& x) { t.kind = parse_task_kind(p.str(x)); }},
                   {"vocab", [&](const json& x) { task_vocab = p.count(x); }},
                   {"seq_len", [&](const json& x) { task_len = p.count(x); }},
                   {"pooling", [&](const json& x) { t.pooling = parse_pooling(p.str(x)); }},
                   {"seed", [&](const json& x) { task_seed = p.u64(x); }}});
    };
    const auto train = [&](const json& v) {
        TrainConfig& t = cfg.train;
        p.section(v, "train",
                  {{"steps", [&](const json& x) { t.steps = p.count(x); }},
                   {"batch_size", [&](const json& x) { t.batch_size = p.count(x); }},
                   {"learning_rate", [&](const json& x) { t.learning_rate = p.real(x); }},
                   {"optimizer", [&](const json& x) { t.optimizer = parse_optimizer(p.str(x)); }},
                   {"beta1", [&](const json& x) { t.beta1 = p.real(x); }},
                   {"beta2", [&](const json& x) { t.beta2 = p.real(x); }},
                   {"epsilon", [&](const json& x) { t.epsilon = p.real(x); }},
                   {"eval_interval", [&](const json& x) { t.eval_interval = p.count(x); }},
                   {"eval_size", [&](const json& x) { t.eval_size = p.count(x); }},
                   {"seed", [&](const json& x) { train_seed = p.u64(x); }}});
    };
    const auto probe = [&](const json& v) {
        p.section(v, "probe",
                  {{"sequences", [&](const json& x) { cfg.probe.sequences = p.count(x); }},
                   {"seed", [&](const json& x) { cfg.probe.seed = p.u64(x); }}});
    };
    const auto bench = [&](const json& v) {
        BenchConfig& b = cfg.bench;
        p.section(v, "bench",
                  {{"depth", [&](const json& x) { b.depth = p.count(x); }},
                   {"dim", [&](const json& x) { b.dim = p.count(x); }},
                   {"heads", [&](const json& x) { b.heads = p.count(x); }},
                   {"ffn_dim", [&](const json& x) { b.ffn_dim = p.count(x); }},
                   {"seq_len", [&](const json& x) { b.seq_len = p.count(x); }},
                   {"activation", [&](const json& x) { b.activation = parse_activation(p.str(x)); }},
                   {"threads", [&](const json& x) { b.threads = p.count(x); }},
                   {"repeats", [&](const json& x) { b.repeats = p.count(x); }},
                   {"modes",
                    [&](const json& x) {
                        b.modes.clear();
                        p.list(x, [&](const json& m) { b.modes.push_back(parse_bench_mode(p.str(m))); });
                    }},
                   {"seed", [&](const json& x) { bench_seed = p.u64(x); }}});
    };
    const auto compare = [&](const json& v) {
        CompareSettings& c = cfg.compare;
        p.section(v, "compare",
                  {{"seeds",
                    [&](const json& x) {
                        seeds_given = true;
                        c.seeds.clear();
                        p.list(x, [&](const json& s) { c.seeds.push_back(p.u64(s)); });
                    }},
                   {"finetune_fraction", [&](const json& x) { c.finetune_fraction = p.real(x); }},
                   {"isotropy_margin", [&](const json& x) { c.isotropy_margin = p.real(x); }},
                   {"parity_bound", [&](const json& x) { c.parity_bound = p.real(x); }},
                   {"max_ratio_bound", [&](const json& x) { c.max_ratio_bound = p.real(x); }},
                   {"mean_ratio_bound", [&](const json& x) { c.mean_ratio_bound = p.real(x); }}});
    };
    const auto grad_check = [&](const json& v) {
        GradCheckSettings& g = cfg.grad_check;
        p.section(v, "grad_check",
                  {{"samples_per_tensor", [&](const json& x) { g.options.samples_per_tensor = p.count(x); }},
                   {"step", [&](const json& x) { g.options.step = p.real(x); }},
                   {"denominator_floor", [&](const json& x) { g.options.denominator_floor = p.real(x); }},
                   {"batch_size", [&](const json& x) { g.batch_size = p.count(x); }},
                   {"max_rel_error", [&](const json& x) { g.max_rel_error = p.real(x); }},
                   {"variants",
                    [&](const json& x) {
                        g.variants.clear();
                        p.list(x, [&](const json& s) { g.variants.push_back(parse_variant(p.str(s))); });
                    }},
                   {"activations",
                    [&](const json& x) {
                        g.activations.clear();
                        p.list(x, [&](const json& s) { g.activations.push_back(parse_activation(p.str(s))); });
                    }},
                   {"seed", [&](const json& x) { gc_seed = p.u64(x); }}});
    };

    p.section(root, "",
              {{"seed", [&](const json& x) { cfg.seed = p.u64(x); }},
               {"model", model},
               {"task", task},
               {"train", train},
               {"probe", probe},
               {"bench", bench},
               {"compare", compare},
               {"grad_check", grad_check}});

    const std::vector<std::uint64_t> explicit_seeds = cfg.compare.seeds;
    apply_root_seed(cfg, cfg.seed);
    if (seeds_given) {
        cfg.compare.seeds = explicit_seeds;
    }
    cfg.model.seed = model_seed.value_or(cfg.model.seed);
    cfg.task.seed = task_seed.value_or(cfg.task.seed);
    cfg.train.seed = train_seed.value_or(cfg.train.seed);
    cfg.bench.seed = bench_seed.value_or(cfg.bench.seed);
    cfg.grad_check.options.seed = gc_seed.value_or(cfg.grad_check.options.seed);
    cfg.task.vocab = task_vocab.value_or(cfg.model.vocab);
    cfg.task.seq_len = task_len.value_or(cfg.model.max_seq);

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        // Anchor on the first "section.key" the message names.
        const std::string msg = e.what();
        static const std::regex field(R"((model|task|train|probe|bench|compare|grad_check)\.(\w+))");
        std::smatch m;
        std::size_t line = 1;
        if (std::regex_search(msg, m, field)) {
            line = p.locate(m[1].str(), m[2].str());
        }
        throw ConfigError(std::string(source) + ":" + std::to_string(line) + ": " + msg);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

ExperimentConfig reference_config() {
    ExperimentConfig cfg;
    cfg.model.depth = 8;
    cfg.model.dim = 64;
    cfg.model.heads = 4;
    cfg.model.ffn_dim = 256;
    cfg.model.vocab = 16;
    cfg.model.max_seq = 32;
    cfg.task.kind = TaskKind::copy_classify;
    cfg.task.vocab = 16;
    cfg.task.seq_len = 32;
    cfg.train.steps = 2000;
    cfg.train.batch_size = 8;
    cfg.train.learning_rate = 3e-4;
    cfg.train.eval_interval = 200;
    cfg.train.eval_size = 256;
    apply_root_seed(cfg, 1);
    cfg.compare.seeds = {1, 2, 3, 4, 5};
    return cfg;
}

}  // namespace paflab
