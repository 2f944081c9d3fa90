#include "stv/tasks.hpp"

#include "stv/io.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace stv {

std::string family_name(TaskFamily f) {
    switch (f) {
        case TaskFamily::symbol_mapping: return "symbol-mapping";
        case TaskFamily::copy_with_marker: return "copy-with-marker";
        case TaskFamily::label_classification: return "label-classification";
    }
    return "?";
}

TaskFamily family_from_name(const std::string& name) {
    if (name == "symbol-mapping") return TaskFamily::symbol_mapping;
    if (name == "copy-with-marker") return TaskFamily::copy_with_marker;
    if (name == "label-classification") return TaskFamily::label_classification;
    throw task_error("unknown task family: " + name);
}

void TaskSpec::validate(std::size_t vocab_size) const {
    if (kNumSpecial + k_in + k_out > vocab_size)
        throw task_error("vocabulary overflow: specials + k_in + k_out exceeds vocab size");
    if (k_out < 2) throw task_error("k_out must be at least 2");
    if (family == TaskFamily::symbol_mapping && k_out > k_in)
        throw task_error("symbol-mapping needs k_in >= k_out");
    if (family == TaskFamily::copy_with_marker && k_in < 5)
        throw task_error("copy-with-marker needs at least 5 input symbols");
    if (family == TaskFamily::label_classification && (k_in % 4 != 0 || k_out < 4))
        throw task_error("label-classification needs k_in divisible by 4 and k_out >= 4");
}

namespace {

// The symbol-mapping family is a fixed set of tables derived from the family
// seed. Each table pairs k_out of the k_in input symbols bijectively with the
// output symbols; an instance is one table out of that set.
std::vector<std::vector<std::pair<int, int>>> mapping_tables(const TaskSpec& spec) {
    RngState sub = RngState(spec.family_seed).split("mapping-tables");
    std::vector<std::vector<std::pair<int, int>>> tables;
    tables.reserve(spec.n_tables);
    for (std::size_t t = 0; t < spec.n_tables; ++t) {
        const auto dom = sub.sample_without_replacement(spec.k_in, spec.k_out);
        const auto out = sub.sample_without_replacement(spec.k_out, spec.k_out);
        std::vector<std::pair<int, int>> table(spec.k_out);
        for (std::size_t i = 0; i < spec.k_out; ++i)
            table[i] = {spec.input_symbol(dom[i]), spec.output_symbol(out[i])};
        std::sort(table.begin(), table.end());
        tables.push_back(std::move(table));
    }
    return tables;
}

// Fixed partition of the input symbols into 4 classes (family-level structure,
// the model can memorize it during training).
std::vector<std::size_t> label_classes(const TaskSpec& spec) {
    RngState sub = RngState(spec.family_seed).split("label-classes");
    std::vector<std::size_t> order = sub.sample_without_replacement(spec.k_in, spec.k_in);
    std::vector<std::size_t> cls(spec.k_in);
    for (std::size_t i = 0; i < spec.k_in; ++i) cls[order[i]] = i % 4;
    return cls;
}

// Fixed global pairing of input symbols to output symbols, used by the copy
// family so answers stay inside the output partition.
int copy_twin(const TaskSpec& spec, int sym) {
    const std::size_t idx = static_cast<std::size_t>(sym - kNumSpecial);
    return spec.output_symbol(idx % spec.k_out);
}

// x-part of a copy example: four distinct symbols with the marker inserted
// before the symbol at position p in {1, 2}; answer = twin(x[p + offset]).
Query make_copy_query(const TaskInstance& task, RngState& rng) {
    const TaskSpec& spec = task.spec;
    const auto idx = rng.sample_without_replacement(spec.k_in, 4);
    const std::size_t p = 1 + rng.below(2);
    Query q;
    for (std::size_t i = 0; i < 4; ++i) {
        if (i == p) q.x.push_back(kTokMark);
        q.x.push_back(spec.input_symbol(idx[i]));
    }
    const std::size_t tgt = static_cast<std::size_t>(static_cast<int>(p) + task.copy_offset);
    q.gold = {copy_twin(spec, spec.input_symbol(idx[tgt]))};
    return q;
}

std::vector<int> assemble(const std::vector<Example>& shots, const std::vector<int>& query_x) {
    std::vector<int> toks;
    for (const Example& e : shots) {
        toks.push_back(kTokX);
        toks.insert(toks.end(), e.x.begin(), e.x.end());
        toks.push_back(kTokY);
        toks.insert(toks.end(), e.y.begin(), e.y.end());
        toks.push_back(kTokSep);
    }
    toks.push_back(kTokQ);
    toks.insert(toks.end(), query_x.begin(), query_x.end());
    toks.push_back(kTokY);
    return toks;
}

}  // namespace

int TaskInstance::map_symbol(int sym) const {
    for (const auto& [a, b] : mapping)
        if (a == sym) return b;
    throw task_error("symbol not in mapping domain");
}

std::vector<int> TaskInstance::domain_symbols() const {
    std::vector<int> out;
    out.reserve(mapping.size());
    for (const auto& [a, b] : mapping) {
        (void)b;
        out.push_back(a);
    }
    return out;
}

TaskInstance gen_task(const TaskSpec& spec, RngState& rng) {
    TaskInstance t;
    t.spec = spec;
    switch (spec.family) {
        case TaskFamily::symbol_mapping: {
            const auto tables = mapping_tables(spec);
            t.instance_index = static_cast<std::size_t>(rng.below(tables.size()));
            t.mapping = tables[t.instance_index];
            break;
        }
        case TaskFamily::copy_with_marker: {
            t.instance_index = static_cast<std::size_t>(rng.below(2));
            t.copy_offset = t.instance_index == 0 ? -1 : +1;
            break;
        }
        case TaskFamily::label_classification: {
            const auto cls = label_classes(spec);
            // decode one of the 24 label permutations from the instance index
            t.instance_index = static_cast<std::size_t>(rng.below(24));
            std::size_t code = t.instance_index;
            std::vector<std::size_t> pool = {0, 1, 2, 3};
            std::vector<std::size_t> perm;
            for (std::size_t k = 4; k >= 1; --k) {
                const std::size_t j = code % k;
                code /= k;
                perm.push_back(pool[j]);
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
            }
            for (std::size_t i = 0; i < spec.k_in; ++i)
                t.mapping.emplace_back(spec.input_symbol(i), spec.output_symbol(perm[cls[i]]));
            break;
        }
    }
    return t;
}

Query sample_query(const TaskInstance& task, RngState& rng) {
    if (task.spec.family == TaskFamily::copy_with_marker) return make_copy_query(task, rng);
    const auto dom = task.domain_symbols();
    const int sym = dom[rng.below(dom.size())];
    return Query{{sym}, {task.map_symbol(sym)}};
}

std::vector<int> Prompt::full_tokens() const {
    std::vector<int> out = tokens;
    out.insert(out.end(), gold.begin(), gold.end());
    return out;
}

std::vector<std::size_t> Prompt::answer_emit_positions() const {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < gold.size(); ++i) pos.push_back(tokens.size() - 1 + i);
    return pos;
}

Prompt build_prompt_for(const TaskInstance& task, const Query& query, std::size_t S,
                        RngState& rng, std::size_t max_seq_len) {
    const TaskSpec& spec = task.spec;
    Prompt p;
    p.query_x = query.x;
    p.gold = query.gold;

    switch (spec.family) {
        case TaskFamily::symbol_mapping: {
            // distinct pairs, never the query's own; bijectivity then keeps
            // the gold answer out of the shots
            std::vector<int> cand;
            for (const auto& [a, b] : task.mapping) {
                (void)b;
                if (a != query.x[0]) cand.push_back(a);
            }
            if (S > cand.size())
                throw task_error("not enough distinct shots for S=" + std::to_string(S));
            const auto pick = rng.sample_without_replacement(cand.size(), S);
            for (std::size_t i : pick)
                p.shots.push_back(Example{{cand[i]}, {task.map_symbol(cand[i])}});
            break;
        }
        case TaskFamily::copy_with_marker: {
            // reject shots whose answer equals the prompt's gold token
            while (p.shots.size() < S) {
                Query shot = make_copy_query(task, rng);
                if (shot.gold == query.gold || shot.x == query.x) continue;
                p.shots.push_back(Example{shot.x, shot.gold});
            }
            break;
        }
        case TaskFamily::label_classification: {
            // shots from the other classes, covering each of them first so the
            // held-out class label is inferable by elimination
            const int q_label = query.gold[0];
            std::vector<int> other_labels;
            for (const auto& [a, b] : task.mapping) {
                (void)a;
                if (b != q_label && !std::count(other_labels.begin(), other_labels.end(), b))
                    other_labels.push_back(b);
            }
            std::vector<std::size_t> order =
                rng.sample_without_replacement(other_labels.size(), other_labels.size());
            std::vector<int> chosen;
            for (std::size_t i = 0; i < S; ++i) {
                const int lbl = other_labels[order[i % order.size()]];
                std::vector<int> grp;
                for (const auto& [a, b] : task.mapping)
                    if (b == lbl && !std::count(chosen.begin(), chosen.end(), a))
                        grp.push_back(a);
                if (grp.empty()) throw task_error("label class exhausted while building shots");
                chosen.push_back(grp[rng.below(grp.size())]);
            }
            for (int sym : chosen) p.shots.push_back(Example{{sym}, {task.map_symbol(sym)}});
            break;
        }
    }
    p.tokens = assemble(p.shots, p.query_x);
    if (p.tokens.size() + p.gold.size() > max_seq_len)
        throw task_error("prompt exceeds max_seq_len");
    return p;
}

Prompt build_prompt(const TaskInstance& task, std::size_t S, RngState& rng,
                    std::size_t max_seq_len) {
    const Query q = sample_query(task, rng);
    return build_prompt_for(task, q, S, rng, max_seq_len);
}

QueryPools split_eval(const TaskInstance& task, std::size_t n_train, std::size_t n_test,
                      RngState& rng) {
    QueryPools pools;
    if (task.spec.family == TaskFamily::copy_with_marker) {
        std::set<std::vector<int>> seen;
        std::size_t guard = 0;
        while (pools.train.size() + pools.test.size() < n_train + n_test) {
            if (++guard > 10000 * (n_train + n_test))
                throw task_error("split_eval: cannot draw enough distinct queries");
            Query q = make_copy_query(task, rng);
            if (!seen.insert(q.x).second) continue;
            if (pools.train.size() < n_train)
                pools.train.push_back(std::move(q));
            else
                pools.test.push_back(std::move(q));
        }
        return pools;
    }
    const auto dom = task.domain_symbols();
    if (n_train + n_test > dom.size())
        throw task_error("split_eval: insufficient symbols for requested pools");
    const auto pick = rng.sample_without_replacement(dom.size(), n_train + n_test);
    for (std::size_t i = 0; i < pick.size(); ++i) {
        const int sym = dom[pick[i]];
        Query q{{sym}, {task.map_symbol(sym)}};
        if (i < n_train)
            pools.train.push_back(std::move(q));
        else
            pools.test.push_back(std::move(q));
    }
    return pools;
}

ParsedPrompt parse_prompt(const std::vector<int>& tokens) {
    ParsedPrompt out;
    std::size_t i = 0;
    while (i < tokens.size() && tokens[i] == kTokX) {
        Example e;
        ++i;
        while (i < tokens.size() && tokens[i] != kTokY) e.x.push_back(tokens[i++]);
        if (i == tokens.size()) throw task_error("parse_prompt: shot without answer marker");
        ++i;
        while (i < tokens.size() && tokens[i] != kTokSep) e.y.push_back(tokens[i++]);
        if (i == tokens.size()) throw task_error("parse_prompt: unterminated shot");
        ++i;
        out.shots.push_back(std::move(e));
    }
    if (i == tokens.size() || tokens[i] != kTokQ)
        throw task_error("parse_prompt: missing query marker");
    ++i;
    while (i < tokens.size() && tokens[i] != kTokY) out.query_x.push_back(tokens[i++]);
    if (i != tokens.size() - 1) throw task_error("parse_prompt: trailing tokens after query");
    return out;
}

void dump_examples_jsonl(const TaskInstance& task, std::size_t n, RngState& rng,
                         const std::filesystem::path& path) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        const Query q = sample_query(task, rng);
        nlohmann::json j;
        j["x"] = q.x;
        j["y"] = q.gold;
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace stv
