// SPDX-License-Identifier: Apache-2.0
#include "metarl/metabuffer.hpp"

#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "metarl/errors.hpp"

namespace metarl {
namespace {

using json = nlohmann::json;

void validate_params(const Bm25Params& p) {
    if (!(p.k1 > 0.0)) throw std::invalid_argument("bm25: k1 must be > 0");
    if (!(p.b >= 0.0 && p.b <= 1.0)) throw std::invalid_argument("bm25: b must be in [0,1]");
}

json entry_to_json(const MetacogEntry& e) {
    json steps = json::array();
    for (const auto& s : e.steps) {
        steps.push_back({{"subquestion", s.subquestion}, {"subanswer", s.subanswer}});
    }
    return {{"problem", e.problem},
            {"steps", std::move(steps)},
            {"final_answer", e.final_answer},
            {"seq", e.seq}};
}

MetacogEntry entry_from_json(const json& j, std::size_t line_no) {
    const auto fail = [&](const std::string& why) -> ParseError {
        return ParseError("snapshot line " + std::to_string(line_no) + ": " + why);
    };
    if (!j.is_object()) throw fail("expected an object");
    MetacogEntry e;
    try {
        e.problem = j.at("problem").get<std::string>();
        e.final_answer = j.at("final_answer").get<std::string>();
        e.seq = j.at("seq").get<std::uint64_t>();
        for (const auto& s : j.at("steps")) {
            e.steps.push_back(SolutionStep{s.at("subquestion").get<std::string>(),
                                           s.at("subanswer").get<std::string>()});
        }
    } catch (const json::exception& ex) {
        throw fail(ex.what());
    }
    if (e.steps.empty()) throw fail("entry has no steps");
    return e;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            current.push_back(static_cast<char>(std::tolower(u)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

MetacogBuffer::MetacogBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("MetacogBuffer: capacity must be >= 1");
}

double MetacogBuffer::avg_doc_len() const {
    if (entries_.empty()) throw std::logic_error("MetacogBuffer: no documents");
    return static_cast<double>(total_terms_) / static_cast<double>(entries_.size());
}

double MetacogBuffer::score(std::string_view query, std::size_t index, const Bm25Params& params) const {
    validate_params(params);
    if (index >= entries_.size()) throw std::out_of_range("MetacogBuffer::score: bad index");
    const DocStats& doc = docs_[index];
    const double n_docs = static_cast<double>(entries_.size());
    const double avg = avg_doc_len();
    const double len = static_cast<double>(doc.terms.size());

    double total = 0.0;
    for (const auto& term : tokenize(query)) {
        const auto tf_it = doc.tf.find(term);
        if (tf_it == doc.tf.end()) continue;  // zero tf contributes zero
        const double tf = static_cast<double>(tf_it->second);
        const auto df_it = doc_freq_.find(term);
        const double df = df_it == doc_freq_.end() ? 0.0 : static_cast<double>(df_it->second);
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        total += idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * (1.0 - params.b + params.b * len / avg));
    }
    return total;
}

const MetacogEntry& MetacogBuffer::retrieve_best(std::string_view query, const Bm25Params& params) const {
    if (entries_.empty()) throw std::logic_error("MetacogBuffer::retrieve_best: buffer is empty");
    std::size_t best = 0;
    double best_score = score(query, 0, params);
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        const double s = score(query, i, params);
        if (s > best_score) {  // strict: ties keep the smallest seq
            best = i;
            best_score = s;
        }
    }
    return entries_[best];
}

void MetacogBuffer::add_stats(const DocStats& doc) {
    for (const auto& [term, _] : doc.tf) ++doc_freq_[term];
    total_terms_ += static_cast<std::int64_t>(doc.terms.size());
}

void MetacogBuffer::remove_stats(const DocStats& doc) {
    for (const auto& [term, _] : doc.tf) {
        auto it = doc_freq_.find(term);
        if (it != doc_freq_.end() && --it->second == 0) doc_freq_.erase(it);
    }
    total_terms_ -= static_cast<std::int64_t>(doc.terms.size());
}

void MetacogBuffer::push_entry(MetacogEntry entry) {
    DocStats doc;
    doc.terms = tokenize(entry.problem);
    for (const auto& t : doc.terms) ++doc.tf[t];
    add_stats(doc);
    entries_.push_back(std::move(entry));
    docs_.push_back(std::move(doc));
}

bool MetacogBuffer::insert_if_correct(MetacogEntry candidate, int reward) {
    if (reward != 1 && reward != -1) {
        throw std::invalid_argument("insert_if_correct: reward must be +1 or -1");
    }
    if (reward != 1) return false;
    if (candidate.steps.empty()) {
        throw std::invalid_argument("insert_if_correct: entry must carry at least one step");
    }

    // Dedupe by exact problem text; the newer demonstration replaces the old.
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].problem == candidate.problem) {
            remove_stats(docs_[i]);
            entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
            docs_.erase(docs_.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }

    candidate.seq = next_seq_++;
    push_entry(std::move(candidate));
    if (entries_.size() > capacity_) {
        remove_stats(docs_.front());
        entries_.pop_front();
        docs_.pop_front();
    }
    return true;
}

void MetacogBuffer::snapshot(std::ostream& out) const {
    json header = {{"capacity", capacity_}, {"next_seq", next_seq_}, {"schema_version", 1}};
    out << header.dump() << '\n';
    for (const auto& e : entries_) out << entry_to_json(e).dump() << '\n';
}

MetacogBuffer MetacogBuffer::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("snapshot line 1: missing header");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& ex) {
        throw ParseError(std::string("snapshot line 1: ") + ex.what());
    }
    if (!header.is_object() || !header.contains("capacity") || !header.contains("next_seq")) {
        throw ParseError("snapshot line 1: header must carry capacity and next_seq");
    }
    std::size_t capacity = 0;
    std::uint64_t next_seq = 0;
    try {
        capacity = header.at("capacity").get<std::size_t>();
        next_seq = header.at("next_seq").get<std::uint64_t>();
    } catch (const json::exception& ex) {
        throw ParseError(std::string("snapshot line 1: ") + ex.what());
    }
    if (capacity == 0) throw ParseError("snapshot line 1: capacity must be >= 1");

    MetacogBuffer buf(capacity);
    std::size_t line_no = 1;
    bool have_prev = false;
    std::uint64_t prev_seq = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) throw ParseError("snapshot line " + std::to_string(line_no) + ": blank line");
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw ParseError("snapshot line " + std::to_string(line_no) + ": " + ex.what());
        }
        MetacogEntry e = entry_from_json(j, line_no);
        if (have_prev && e.seq <= prev_seq) {
            throw ParseError("snapshot line " + std::to_string(line_no) + ": seq not strictly increasing");
        }
        if (e.seq >= next_seq) {
            throw ParseError("snapshot line " + std::to_string(line_no) + ": seq exceeds header next_seq");
        }
        prev_seq = e.seq;
        have_prev = true;
        if (buf.entries_.size() == capacity) {
            throw ParseError("snapshot line " + std::to_string(line_no) + ": more entries than capacity");
        }
        buf.push_entry(std::move(e));
    }
    buf.next_seq_ = next_seq;
    return buf;
}

}  // namespace metarl
