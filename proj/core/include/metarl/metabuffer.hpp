// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "metarl/types.hpp"

namespace metarl {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Lowercases and splits on runs of non-alphanumeric characters.
std::vector<std::string> tokenize(std::string_view text);

// Bounded FIFO store of verified demonstrations with BM25 lexical retrieval.
// Documents are the stored problem texts only — solutions never influence
// matching. Insertion is gated on a +1 reward and deduplicates by problem
// text (the newer entry wins). Evicts the oldest entry past capacity.
class MetacogBuffer {
public:
    explicit MetacogBuffer(std::size_t capacity = 512);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t next_seq() const { return next_seq_; }
    const std::deque<MetacogEntry>& entries() const { return entries_; }

    // BM25 score of the entry at `index` against `query`. Query terms are a
    // multiset: repeated terms contribute once per occurrence.
    double score(std::string_view query, std::size_t index, const Bm25Params& params = {}) const;

    // Highest-scoring entry; ties resolve to the smallest seq (oldest).
    // Throws std::logic_error when the buffer is empty.
    const MetacogEntry& retrieve_best(std::string_view query, const Bm25Params& params = {}) const;

    // Inserts iff reward == +1. The entry's seq is assigned here. Returns
    // whether an insertion happened. Entries must carry at least one step.
    bool insert_if_correct(MetacogEntry candidate, int reward);

    // One JSON object per line: a header {capacity, next_seq, schema_version}
    // followed by entries in seq order. Byte-deterministic.
    void snapshot(std::ostream& out) const;
    static MetacogBuffer load(std::istream& in);

    // Corpus statistics, exposed so tests can cross-check the incremental
    // bookkeeping against a from-scratch recount.
    const std::map<std::string, std::int64_t>& doc_freq() const { return doc_freq_; }
    std::int64_t total_terms() const { return total_terms_; }
    double avg_doc_len() const;

private:
    struct DocStats {
        std::vector<std::string> terms;              // tokenized problem text
        std::map<std::string, std::int64_t> tf;      // term frequencies
    };

    void add_stats(const DocStats& doc);
    void remove_stats(const DocStats& doc);
    void push_entry(MetacogEntry entry);

    std::size_t capacity_;
    std::uint64_t next_seq_ = 0;
    std::deque<MetacogEntry> entries_;  // ascending seq
    std::deque<DocStats> docs_;         // parallel to entries_
    std::map<std::string, std::int64_t> doc_freq_;
    std::int64_t total_terms_ = 0;
};

}  // namespace metarl
