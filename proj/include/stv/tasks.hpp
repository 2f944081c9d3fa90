#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stv/rng.hpp"

namespace stv {

struct task_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reserved vocabulary head. Input symbols occupy [kNumSpecial, kNumSpecial+k_in),
// output symbols the k_out ids after them; everything is documented so prompts
// are bit-reproducible.
inline constexpr int kTokX = 0;
inline constexpr int kTokY = 1;
inline constexpr int kTokQ = 2;
inline constexpr int kTokSep = 3;
inline constexpr int kTokMark = 4;
inline constexpr int kNumSpecial = 8;

enum class TaskFamily { symbol_mapping, copy_with_marker, label_classification };

std::string family_name(TaskFamily f);
TaskFamily family_from_name(const std::string& name);

struct TaskSpec {
    TaskFamily family = TaskFamily::symbol_mapping;
    std::size_t k_in = 16;   // input-symbol pool size
    std::size_t k_out = 8;   // output-symbol pool size
    std::size_t n_tables = 16;  // symbol-mapping: size of the family's table set
    std::uint64_t family_seed = 7;

    int input_symbol(std::size_t i) const { return kNumSpecial + static_cast<int>(i); }
    int output_symbol(std::size_t i) const {
        return kNumSpecial + static_cast<int>(k_in) + static_cast<int>(i);
    }
    bool is_input_symbol(int tok) const {
        return tok >= kNumSpecial && tok < kNumSpecial + static_cast<int>(k_in);
    }
    bool is_output_symbol(int tok) const {
        const int o0 = kNumSpecial + static_cast<int>(k_in);
        return tok >= o0 && tok < o0 + static_cast<int>(k_out);
    }
    void validate(std::size_t vocab_size) const;
};

struct Example {
    std::vector<int> x;
    std::vector<int> y;
};

// One evaluable query: the x-part of a query block plus its gold answer.
struct Query {
    std::vector<int> x;
    std::vector<int> gold;
    bool operator==(const Query&) const = default;
};

struct Prompt {
    std::vector<Example> shots;
    std::vector<int> query_x;
    std::vector<int> gold;
    std::vector<int> tokens;  // assembled prompt (shots + query block), ends with the answer slot

    std::size_t prompt_len() const { return tokens.size(); }
    // Teacher-forced sequence and the logits rows that predict the gold tokens.
    std::vector<int> full_tokens() const;
    std::vector<std::size_t> answer_emit_positions() const;
};

// A concrete task instance: for symbol-mapping and label-classification a
// symbol -> symbol mapping table; for copy-with-marker an offset rule.
struct TaskInstance {
    TaskSpec spec;
    std::size_t instance_index = 0;
    std::vector<std::pair<int, int>> mapping;  // ordered (input, output); empty for copy
    int copy_offset = 0;                       // -1 or +1 for copy-with-marker

    int map_symbol(int sym) const;
    std::vector<int> domain_symbols() const;  // valid query symbols (mapping/label)
};

TaskInstance gen_task(const TaskSpec& spec, RngState& rng);

// Prompt with a freshly sampled query. S = 0 yields the bare query block.
Prompt build_prompt(const TaskInstance& task, std::size_t S, RngState& rng,
                    std::size_t max_seq_len = 256);
// Prompt for a fixed query (evaluation path).
Prompt build_prompt_for(const TaskInstance& task, const Query& query, std::size_t S,
                        RngState& rng, std::size_t max_seq_len = 256);

Query sample_query(const TaskInstance& task, RngState& rng);

struct QueryPools {
    std::vector<Query> train;
    std::vector<Query> test;
};

// Disjoint train/test query pools. Throws task_error when the symbol space
// cannot accommodate the request.
QueryPools split_eval(const TaskInstance& task, std::size_t n_train, std::size_t n_test,
                      RngState& rng);

struct ParsedPrompt {
    std::vector<Example> shots;
    std::vector<int> query_x;
};

// Exact inverse of prompt assembly (used by the invertibility property test).
ParsedPrompt parse_prompt(const std::vector<int>& tokens);

// JSON-lines dump of sampled examples, one {"x": [...], "y": [...]} per line.
void dump_examples_jsonl(const TaskInstance& task, std::size_t n, RngState& rng,
                         const std::filesystem::path& path);

}  // namespace stv
