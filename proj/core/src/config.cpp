// SPDX-License-Identifier: Apache-2.0
#include "metarl/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metarl/errors.hpp"
#include "metarl/metrics.hpp"

namespace metarl {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value, const char* expected) {
    throw ConfigError("[" + section + "] " + key + " = '" + value + "': expected " + expected);
}

template <typename T>
T parse_int_like(const std::string& section, const std::string& key, const std::string& value,
                 const char* expected) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc() || res.ptr != last) bad_value(section, key, value, expected);
    return out;
}

double parse_double_value(const std::string& section, const std::string& key,
                          const std::string& value) {
    double out = 0.0;
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc() || res.ptr != last) bad_value(section, key, value, "a real number");
    return out;
}

bool parse_bool_value(const std::string& section, const std::string& key,
                      const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(section, key, value, "true|false");
}

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? std::string(v) : std::move(fallback);
}

}  // namespace

const char* to_string(BackendKind k) {
    switch (k) {
        case BackendKind::Softmax: return "softmax";
        case BackendKind::Scripted: return "scripted";
        case BackendKind::Remote: return "remote";
    }
    return "?";
}

BackendKind backend_from_string(const std::string& s) {
    if (s == "softmax") return BackendKind::Softmax;
    if (s == "scripted") return BackendKind::Scripted;
    if (s == "remote") return BackendKind::Remote;
    throw ConfigError("unknown backend '" + s + "' (expected softmax | scripted | remote)");
}

const char* to_string(DatasetSource s) {
    return s == DatasetSource::Synthetic ? "synthetic" : "file";
}

DatasetSource dataset_source_from_string(const std::string& s) {
    if (s == "synthetic") return DatasetSource::Synthetic;
    if (s == "file") return DatasetSource::File;
    throw ConfigError("unknown dataset source '" + s + "' (expected synthetic | file)");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header '" + line + "'");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "run" && section != "rollout" && section != "objective" &&
                section != "metabuffer" && section != "policy" && section != "dataset" &&
                section != "envlab") {
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key '" + key + "' outside any section");
        }

        const auto unknown = [&]() -> ConfigError {
            return ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                               "' in section [" + section + "]");
        };

        if (section == "run") {
            if (key == "mode") cfg.run.mode = mode_from_string(value);
            else if (key == "steps") cfg.run.steps = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "seed") cfg.run.seed = parse_int_like<std::uint64_t>(section, key, value, "a nonnegative integer");
            else if (key == "out_dir") cfg.run.out_dir = value;
            else if (key == "eval_every") cfg.run.eval_every = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "eval_size") cfg.run.eval_size = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "eval_maj_n") cfg.run.eval_maj_n = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "snapshot_every") cfg.run.snapshot_every = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "template_dir") cfg.run.template_dir = value;
            else throw unknown();
        } else if (section == "rollout") {
            if (key == "prompts_per_step") cfg.rollout.prompts_per_step = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "group_size") cfg.rollout.group_size = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "mu") cfg.rollout.mu = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "buffer_target") cfg.rollout.buffer_target = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "strict_fill") cfg.rollout.strict_fill = parse_bool_value(section, key, value);
            else throw unknown();
        } else if (section == "objective") {
            if (key == "lambda") cfg.objective.lambda = parse_double_value(section, key, value);
            else if (key == "eps_low") cfg.objective.eps_low = parse_double_value(section, key, value);
            else if (key == "eps_high") cfg.objective.eps_high = parse_double_value(section, key, value);
            else if (key == "learning_rate") cfg.objective.learning_rate = parse_double_value(section, key, value);
            else throw unknown();
        } else if (section == "metabuffer") {
            if (key == "capacity") cfg.metabuffer.capacity = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "bm25_k1") cfg.metabuffer.bm25_k1 = parse_double_value(section, key, value);
            else if (key == "bm25_b") cfg.metabuffer.bm25_b = parse_double_value(section, key, value);
            else throw unknown();
        } else if (section == "policy") {
            if (key == "backend") cfg.policy.backend = backend_from_string(value);
            else if (key == "charset") cfg.policy.charset = value;
            else if (key == "context_order") cfg.policy.context_order = parse_int_like<int>(section, key, value, "0 or 1");
            else if (key == "max_len") cfg.policy.max_len = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "scripted_direct_p") cfg.policy.scripted_direct_p = parse_double_value(section, key, value);
            else if (key == "scripted_decomposition_p") cfg.policy.scripted_decomposition_p = parse_double_value(section, key, value);
            else if (key == "scripted_reflection_p") cfg.policy.scripted_reflection_p = parse_double_value(section, key, value);
            else if (key == "endpoint") cfg.policy.endpoint = value;
            else if (key == "model") cfg.policy.model = value;
            else if (key == "temperature") cfg.policy.temperature = parse_double_value(section, key, value);
            else if (key == "top_p") cfg.policy.top_p = parse_double_value(section, key, value);
            else if (key == "max_tokens") cfg.policy.max_tokens = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "timeout_seconds") cfg.policy.timeout_seconds = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "max_retries") cfg.policy.max_retries = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "max_concurrent") cfg.policy.max_concurrent = parse_int_like<int>(section, key, value, "an integer");
            else throw unknown();
        } else if (section == "dataset") {
            if (key == "source") cfg.dataset.source = dataset_source_from_string(value);
            else if (key == "dataset_path") cfg.dataset.dataset_path = value;
            else if (key == "dataset_size") cfg.dataset.dataset_size = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "horizon") cfg.dataset.horizon = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "sub_count") cfg.dataset.sub_count = parse_int_like<int>(section, key, value, "an integer");
            else if (key == "gamma") cfg.dataset.gamma = parse_double_value(section, key, value);
            else if (key == "operand_min") cfg.dataset.operand_min = parse_int_like<long long>(section, key, value, "an integer");
            else if (key == "operand_max") cfg.dataset.operand_max = parse_int_like<long long>(section, key, value, "an integer");
            else if (key == "operations") cfg.dataset.operations = value;
            else if (key == "task_seed") cfg.dataset.task_seed = parse_int_like<std::uint64_t>(section, key, value, "a nonnegative integer");
            else throw unknown();
        } else {  // envlab
            if (key == "rollouts") cfg.envlab.rollouts = parse_int_like<long long>(section, key, value, "an integer");
            else if (key == "lab_vocab") cfg.envlab.lab_vocab = parse_int_like<int>(section, key, value, "an integer");
            else throw unknown();
        }
    }
    return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string to_ini(const RunConfig& cfg) {
    std::string out;
    const auto kv = [&out](const char* key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };
    out += "[run]\n";
    kv("mode", to_string(cfg.run.mode));
    kv("steps", std::to_string(cfg.run.steps));
    kv("seed", std::to_string(cfg.run.seed));
    kv("out_dir", cfg.run.out_dir);
    kv("eval_every", std::to_string(cfg.run.eval_every));
    kv("eval_size", std::to_string(cfg.run.eval_size));
    kv("eval_maj_n", std::to_string(cfg.run.eval_maj_n));
    kv("snapshot_every", std::to_string(cfg.run.snapshot_every));
    kv("template_dir", cfg.run.template_dir);
    out += "\n[rollout]\n";
    kv("prompts_per_step", std::to_string(cfg.rollout.prompts_per_step));
    kv("group_size", std::to_string(cfg.rollout.group_size));
    kv("mu", std::to_string(cfg.rollout.mu));
    kv("buffer_target", std::to_string(cfg.rollout.buffer_target));
    kv("strict_fill", cfg.rollout.strict_fill ? "true" : "false");
    out += "\n[objective]\n";
    kv("lambda", format_double(cfg.objective.lambda));
    kv("eps_low", format_double(cfg.objective.eps_low));
    kv("eps_high", format_double(cfg.objective.eps_high));
    kv("learning_rate", format_double(cfg.objective.learning_rate));
    out += "\n[metabuffer]\n";
    kv("capacity", std::to_string(cfg.metabuffer.capacity));
    kv("bm25_k1", format_double(cfg.metabuffer.bm25_k1));
    kv("bm25_b", format_double(cfg.metabuffer.bm25_b));
    out += "\n[policy]\n";
    kv("backend", to_string(cfg.policy.backend));
    kv("charset", cfg.policy.charset);
    kv("context_order", std::to_string(cfg.policy.context_order));
    kv("max_len", std::to_string(cfg.policy.max_len));
    kv("scripted_direct_p", format_double(cfg.policy.scripted_direct_p));
    kv("scripted_decomposition_p", format_double(cfg.policy.scripted_decomposition_p));
    kv("scripted_reflection_p", format_double(cfg.policy.scripted_reflection_p));
    kv("endpoint", cfg.policy.endpoint);
    kv("model", cfg.policy.model);
    kv("temperature", format_double(cfg.policy.temperature));
    kv("top_p", format_double(cfg.policy.top_p));
    kv("max_tokens", std::to_string(cfg.policy.max_tokens));
    kv("timeout_seconds", std::to_string(cfg.policy.timeout_seconds));
    kv("max_retries", std::to_string(cfg.policy.max_retries));
    kv("max_concurrent", std::to_string(cfg.policy.max_concurrent));
    out += "\n[dataset]\n";
    kv("source", to_string(cfg.dataset.source));
    kv("dataset_path", cfg.dataset.dataset_path);
    kv("dataset_size", std::to_string(cfg.dataset.dataset_size));
    kv("horizon", std::to_string(cfg.dataset.horizon));
    kv("sub_count", std::to_string(cfg.dataset.sub_count));
    kv("gamma", format_double(cfg.dataset.gamma));
    kv("operand_min", std::to_string(cfg.dataset.operand_min));
    kv("operand_max", std::to_string(cfg.dataset.operand_max));
    kv("operations", cfg.dataset.operations);
    kv("task_seed", std::to_string(cfg.dataset.task_seed));
    out += "\n[envlab]\n";
    kv("rollouts", std::to_string(cfg.envlab.rollouts));
    kv("lab_vocab", std::to_string(cfg.envlab.lab_vocab));
    return out;
}

void validate_config(const RunConfig& cfg) {
    if (cfg.run.steps < 0) throw ConfigError("[run] steps must be >= 0");
    if (cfg.run.eval_every < 0) throw ConfigError("[run] eval_every must be >= 0");
    if (cfg.run.eval_size < 0) throw ConfigError("[run] eval_size must be >= 0");
    if (cfg.run.eval_maj_n < 1) throw ConfigError("[run] eval_maj_n must be >= 1");
    if (cfg.run.snapshot_every < 0) throw ConfigError("[run] snapshot_every must be >= 0");
    if (cfg.rollout.prompts_per_step < 1) throw ConfigError("[rollout] prompts_per_step must be >= 1");
    if (cfg.rollout.group_size < 1) throw ConfigError("[rollout] group_size must be >= 1");
    if (cfg.rollout.mu < 1) throw ConfigError("[rollout] mu must be >= 1");
    if (cfg.rollout.buffer_target < 1) throw ConfigError("[rollout] buffer_target must be >= 1");
    if (!(cfg.objective.lambda >= 0.0)) throw ConfigError("[objective] lambda must be >= 0");
    ClipConfig{cfg.objective.eps_low, cfg.objective.eps_high}.validate();
    if (!(cfg.objective.learning_rate >= 0.0)) {
        throw ConfigError("[objective] learning_rate must be >= 0");
    }
    if (cfg.metabuffer.capacity < 1) throw ConfigError("[metabuffer] capacity must be >= 1");
    if (!(cfg.metabuffer.bm25_k1 >= 0.0)) throw ConfigError("[metabuffer] bm25_k1 must be >= 0");
    if (!(cfg.metabuffer.bm25_b >= 0.0 && cfg.metabuffer.bm25_b <= 1.0)) {
        throw ConfigError("[metabuffer] bm25_b must be in [0, 1]");
    }
    if (cfg.policy.context_order != 0 && cfg.policy.context_order != 1) {
        throw ConfigError("[policy] context_order must be 0 or 1");
    }
    if (cfg.policy.max_len < 1) throw ConfigError("[policy] max_len must be >= 1");
    if (cfg.policy.charset.empty()) throw ConfigError("[policy] charset must be nonempty");
    for (double p : {cfg.policy.scripted_direct_p, cfg.policy.scripted_decomposition_p,
                     cfg.policy.scripted_reflection_p}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError("[policy] scripted probabilities must be in [0, 1]");
        }
    }
    if (cfg.dataset.dataset_size < 1) throw ConfigError("[dataset] dataset_size must be >= 1");
    if (cfg.dataset.source == DatasetSource::File && cfg.dataset.dataset_path.empty()) {
        throw ConfigError("[dataset] dataset_path required when source = file");
    }
    if (cfg.dataset.source == DatasetSource::Synthetic) {
        make_task_spec(cfg).validate();
    }
    if (cfg.envlab.rollouts < 1) throw ConfigError("[envlab] rollouts must be >= 1");
    if (cfg.envlab.lab_vocab < 2) throw ConfigError("[envlab] lab_vocab must be >= 2");
}

Bm25Params make_bm25(const RunConfig& cfg) {
    return Bm25Params{cfg.metabuffer.bm25_k1, cfg.metabuffer.bm25_b};
}

StepConfig make_step_config(const RunConfig& cfg) {
    StepConfig step;
    step.prompts_per_step = cfg.rollout.prompts_per_step;
    step.group_size = cfg.rollout.group_size;
    step.mu = cfg.rollout.mu;
    step.mode = cfg.run.mode;
    step.buffer_target = cfg.rollout.buffer_target;
    step.strict_fill = cfg.rollout.strict_fill;
    return step;
}

ObjectiveConfig make_objective_config(const RunConfig& cfg) {
    ObjectiveConfig obj;
    obj.clip = ClipConfig{cfg.objective.eps_low, cfg.objective.eps_high};
    obj.lambda = cfg.objective.lambda;
    obj.learning_rate = cfg.objective.learning_rate;
    return obj;
}

TrainLoopConfig make_loop_config(const RunConfig& cfg) {
    TrainLoopConfig loop;
    loop.step = make_step_config(cfg);
    loop.objective = make_objective_config(cfg);
    loop.bm25 = make_bm25(cfg);
    loop.steps = cfg.run.steps;
    loop.seed = cfg.run.seed;
    loop.eval_every = cfg.run.eval_every;
    loop.eval_maj_n = cfg.run.eval_maj_n;
    loop.snapshot_every = cfg.run.snapshot_every;
    return loop;
}

SoftmaxPolicyConfig make_softmax_config(const RunConfig& cfg) {
    SoftmaxPolicyConfig sm;
    sm.charset = cfg.policy.charset;
    sm.context_order = cfg.policy.context_order;
    sm.max_len = cfg.policy.max_len;
    sm.seed = cfg.run.seed;
    return sm;
}

ScriptedPolicyConfig make_scripted_config(const RunConfig& cfg) {
    ScriptedPolicyConfig sp;
    sp.direct_p = cfg.policy.scripted_direct_p;
    sp.decomposition_p = cfg.policy.scripted_decomposition_p;
    sp.reflection_p = cfg.policy.scripted_reflection_p;
    sp.seed = cfg.run.seed;
    return sp;
}

RemoteBackendConfig make_remote_config(const RunConfig& cfg) {
    RemoteBackendConfig rc;
    rc.endpoint = cfg.policy.endpoint.empty() ? env_or("METARL_ENDPOINT", "")
                                              : cfg.policy.endpoint;
    rc.model = cfg.policy.model.empty() ? env_or("METARL_MODEL", "") : cfg.policy.model;
    rc.api_key = env_or("METARL_API_KEY", "");  // never read from config files
    rc.max_concurrent = cfg.policy.max_concurrent;
    rc.temperature = cfg.policy.temperature;
    rc.top_p = cfg.policy.top_p;
    rc.max_tokens = cfg.policy.max_tokens;
    rc.timeout_seconds = cfg.policy.timeout_seconds;
    rc.max_retries = cfg.policy.max_retries;
    if (rc.endpoint.empty()) {
        throw ConfigError("remote backend needs [policy] endpoint or METARL_ENDPOINT");
    }
    if (rc.model.empty()) {
        throw ConfigError("remote backend needs [policy] model or METARL_MODEL");
    }
    return rc;
}

envlab::ChainTaskSpec make_task_spec(const RunConfig& cfg) {
    envlab::ChainTaskSpec spec;
    spec.horizon = cfg.dataset.horizon;
    spec.sub_count = cfg.dataset.sub_count;
    spec.gamma = cfg.dataset.gamma;
    spec.operand_min = cfg.dataset.operand_min;
    spec.operand_max = cfg.dataset.operand_max;
    spec.operations = parse_operations(cfg.dataset.operations);
    spec.seed = cfg.dataset.task_seed;
    return spec;
}

std::vector<envlab::ChainOp> parse_operations(const std::string& list) {
    std::vector<envlab::ChainOp> ops;
    std::string token;
    std::istringstream in(list);
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (token.empty()) continue;
        ops.push_back(envlab::chain_op_from_string(token));
    }
    if (ops.empty()) throw ConfigError("[dataset] operations must name at least one of add,sub,mul");
    return ops;
}

}  // namespace metarl
