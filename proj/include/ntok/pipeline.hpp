#pragma once

#include <memory>
#include <string>

#include "ntok/config.hpp"
#include "ntok/corpus.hpp"
#include "ntok/miner.hpp"
#include "ntok/patched.hpp"

namespace ntok {

// Base-encode every document, parallel across docs, index-aligned with
// corpus.docs.
IdDocs encode_corpus(const Corpus& corpus, const TokenizerDef& tok, int threads = 0);

// Mine candidates from the train split only and stamp both fingerprints.
CandidateTable mine_table(const Corpus& corpus, const IdDocs& encoded, const TokenizerDef& tok,
                          const PipelineConfig& cfg);

// mine: write candidates.avct + config.resolved.ini into the output dir.
void run_mine(const PipelineConfig& cfg, bool force);

// adapt: full artifact hand-off — tokenizer.json, patch.json, savings.json,
// optional patched embedding matrices, manifest.json with artifact hashes.
// table_path reuses a mined cache after checking its fingerprints (--force
// overrides the check).
void run_adapt(const PipelineConfig& cfg, bool force, const std::string& table_path = "");

// stats: savings of an existing patch on one split; JSON on stdout, a human
// table on stderr.
void run_stats(const PipelineConfig& cfg, const std::string& patch_path,
               const std::string& split_name);

// ablate: one savings row per grid cell into ablate.json + a table on stderr.
void run_ablate(const PipelineConfig& cfg, bool force);

}  // namespace ntok
