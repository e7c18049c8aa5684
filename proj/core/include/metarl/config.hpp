// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metarl/envlab.hpp"
#include "metarl/metabuffer.hpp"
#include "metarl/policy.hpp"
#include "metarl/remote_policy.hpp"
#include "metarl/rollout.hpp"
#include "metarl/types.hpp"

namespace metarl {

enum class BackendKind { Softmax, Scripted, Remote };
const char* to_string(BackendKind k);
BackendKind backend_from_string(const std::string& s);

enum class DatasetSource { Synthetic, File };
const char* to_string(DatasetSource s);
DatasetSource dataset_source_from_string(const std::string& s);

// The full run configuration. Field defaults ARE the documented defaults:
// serializing a default-constructed RunConfig yields the reference config.
struct RunConfig {
    struct Run {
        Mode mode = Mode::Cascade;
        int steps = 10;
        std::uint64_t seed = 0;
        std::string out_dir = "runs/out";
        int eval_every = 1;       // 0 disables held-out evaluation
        int eval_size = 64;       // held-out problem count
        int eval_maj_n = 1;       // samples per eval problem (majority vote)
        int snapshot_every = 0;   // metabuffer snapshot cadence; 0 disables
        std::string template_dir;  // empty: built-in templates
    } run;

    struct Rollout {
        int prompts_per_step = 128;
        int group_size = 64;
        int mu = 1;
        int buffer_target = 128;
        bool strict_fill = false;
    } rollout;

    struct Objective {
        double lambda = 0.04;
        double eps_low = 0.20;
        double eps_high = 0.28;
        double learning_rate = 1.0;
    } objective;

    struct Metabuffer {
        int capacity = 512;
        double bm25_k1 = 1.2;
        double bm25_b = 0.75;
    } metabuffer;

    struct Policy {
        BackendKind backend = BackendKind::Softmax;
        std::string charset = "0123456789-";
        int context_order = 1;
        int max_len = 8;
        double scripted_direct_p = 0.05;
        double scripted_decomposition_p = 0.6;
        double scripted_reflection_p = 0.4;
        std::string endpoint;  // empty: resolved from METARL_ENDPOINT
        std::string model;     // empty: resolved from METARL_MODEL
        double temperature = 1.0;
        double top_p = 1.0;
        int max_tokens = 1024;
        int timeout_seconds = 60;
        int max_retries = 3;
        int max_concurrent = 4;
    } policy;

    struct Dataset {
        DatasetSource source = DatasetSource::Synthetic;
        std::string dataset_path;  // JSONL file when source = file
        int dataset_size = 512;
        int horizon = 12;
        int sub_count = 3;
        double gamma = 0.5;
        long long operand_min = 2;
        long long operand_max = 9;
        std::string operations = "add";  // comma-separated subset of add,sub,mul
        std::uint64_t task_seed = 1;
    } dataset;

    struct Envlab {
        long long rollouts = 100000;
        int lab_vocab = 6;  // abstract action vocabulary for variance checks
    } envlab;
};

// INI-style text: [section] headers, key = value lines, '#'/';' comments.
// Unknown sections or keys are errors (typos must not silently vanish).
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

// Canonical serialization: fixed section and key order, shortest exact
// doubles. parse(to_ini(c)) round-trips every field.
std::string to_ini(const RunConfig& cfg);

// Cross-field sanity checks shared by every subcommand.
void validate_config(const RunConfig& cfg);

// Mapping helpers onto the module-level config structs.
Bm25Params make_bm25(const RunConfig& cfg);
StepConfig make_step_config(const RunConfig& cfg);
ObjectiveConfig make_objective_config(const RunConfig& cfg);
TrainLoopConfig make_loop_config(const RunConfig& cfg);
SoftmaxPolicyConfig make_softmax_config(const RunConfig& cfg);
ScriptedPolicyConfig make_scripted_config(const RunConfig& cfg);
// Resolves endpoint/model from the environment when the config leaves them
// empty; the API key only ever comes from METARL_API_KEY.
RemoteBackendConfig make_remote_config(const RunConfig& cfg);
envlab::ChainTaskSpec make_task_spec(const RunConfig& cfg);
std::vector<envlab::ChainOp> parse_operations(const std::string& list);

}  // namespace metarl
