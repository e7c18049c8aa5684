// SPDX-License-Identifier: Apache-2.0
#include "metarl/dataset.hpp"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "metarl/envlab.hpp"
#include "metarl/errors.hpp"
#include "metarl/rng.hpp"

namespace metarl {

std::vector<Problem> load_problems_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path.string());
    std::vector<Problem> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("question") || !obj.contains("answer")) {
            throw ParseError("dataset line " + std::to_string(lineno) +
                             ": need an object with \"question\" and \"answer\"");
        }
        Problem p;
        p.id = obj.value("id", static_cast<int>(out.size()));
        p.question = obj.at("question").get<std::string>();
        p.answer = obj.at("answer").get<std::string>();
        p.difficulty = obj.value("difficulty", std::string{});
        out.push_back(std::move(p));
    }
    return out;
}

DatasetBundle build_dataset(const RunConfig& cfg) {
    DatasetBundle bundle;
    const bool want_holdout = cfg.run.eval_every > 0 && cfg.run.eval_size > 0;
    if (cfg.dataset.source == DatasetSource::Synthetic) {
        envlab::ChainTaskSpec spec = make_task_spec(cfg);
        spec.validate();
        for (const auto& task : envlab::generate_tasks(spec, cfg.dataset.dataset_size)) {
            bundle.train.push_back(task.problem);
        }
        if (want_holdout) {
            envlab::ChainTaskSpec holdout_spec = spec;
            holdout_spec.seed = derive_seed(spec.seed, 0x65766163);  // separate task stream
            int next_id = cfg.dataset.dataset_size;
            for (auto& task : envlab::generate_tasks(holdout_spec, cfg.run.eval_size)) {
                task.problem.id = next_id++;
                bundle.holdout.push_back(task.problem);
            }
        }
        return bundle;
    }

    std::vector<Problem> all = load_problems_jsonl(cfg.dataset.dataset_path);
    if (all.empty()) throw ConfigError("dataset file is empty: " + cfg.dataset.dataset_path);
    std::size_t split = 0;
    if (want_holdout) {
        split = std::min<std::size_t>(static_cast<std::size_t>(cfg.run.eval_size), all.size());
    }
    bundle.holdout.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(split));
    bundle.train.assign(all.begin() + static_cast<std::ptrdiff_t>(split), all.end());
    if (bundle.train.empty()) {
        throw ConfigError("dataset has no training problems left after the holdout split");
    }
    return bundle;
}

}  // namespace metarl
