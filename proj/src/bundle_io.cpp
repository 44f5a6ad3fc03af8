#include "causalq/bundle_io.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "causalq/digest.hpp"
#include "causalq/error.hpp"

#include "json.hpp"

namespace causalq {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ValidationError("cannot write '" + path + "'");
    out << content;
    if (!out)
        throw ValidationError("short write to '" + path + "'");
}

json parse_json(const std::string& text, const std::string& context) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(context + ": " + e.what());
    }
}

void reject_unknown_fields(const json& obj, std::initializer_list<const char*> known,
                           const std::string& context) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            throw ValidationError(context + ": unknown field '" + it.key() + "'");
    }
}

const json& require(const json& obj, const char* field, const std::string& context) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw ValidationError(context + ": missing field '" + field + "'");
    return *it;
}

std::string require_string(const json& obj, const char* field, const std::string& context) {
    const json& v = require(obj, field, context);
    if (!v.is_string())
        throw ValidationError(context + ": field '" + field + "' must be a string");
    return v.get<std::string>();
}

std::vector<std::pair<std::string, std::string>> parse_edges(const json& arr,
                                                             const std::string& context) {
    if (!arr.is_array())
        throw ValidationError(context + " must be an array of [src, dst] pairs");
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
        const json& e = arr[i];
        std::string at = context + "[" + std::to_string(i) + "]";
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
            throw ValidationError(at + " must be a [src, dst] pair of node ids");
        out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    return out;
}

[[noreturn]] void throw_violations(const std::string& context,
                                   const std::vector<Violation>& violations) {
    std::ostringstream msg;
    msg << context << " failed validation:";
    size_t shown = 0;
    for (const Violation& v : violations) {
        if (shown == 12) {
            msg << "\n  ... and " << (violations.size() - shown) << " more";
            break;
        }
        msg << "\n  - [" << v.code << "] " << v.subject << ": " << v.detail;
        ++shown;
    }
    throw ValidationError(msg.str());
}

} // namespace

ActivityGraphs load_bundle(const std::string& path, bool strict) {
    const std::string context = "bundle '" + path + "'";
    json doc = parse_json(read_file(path), context);
    if (!doc.is_object())
        throw ValidationError(context + ": top level must be a JSON object");
    if (strict)
        reject_unknown_fields(doc,
                              {"activity", "nodes", "observational_edges",
                               "causal_edges", "start", "end", "format_version"},
                              context);

    int version = require(doc, "format_version", context).get<int>();
    if (version != 1)
        throw ValidationError(context + ": unsupported format_version " +
                              std::to_string(version));

    std::string activity = require_string(doc, "activity", context);
    const json& nodes_j = require(doc, "nodes", context);
    if (!nodes_j.is_array() || nodes_j.empty())
        throw ValidationError(context + ": 'nodes' must be a non-empty array");

    std::vector<EventNode> nodes;
    nodes.reserve(nodes_j.size());
    for (size_t i = 0; i < nodes_j.size(); ++i) {
        const json& n = nodes_j[i];
        std::string at = context + ": nodes[" + std::to_string(i) + "]";
        if (!n.is_object())
            throw ValidationError(at + " must be an object");
        if (strict)
            reject_unknown_fields(n, {"id", "label", "instances"}, at);
        EventNode node;
        node.id = require_string(n, "id", at);
        node.label = require_string(n, "label", at);
        if (auto it = n.find("instances"); it != n.end()) {
            if (!it->is_array())
                throw ValidationError(at + ": 'instances' must be an array of strings");
            for (const json& s : *it) {
                if (!s.is_string())
                    throw ValidationError(at + ": 'instances' must be an array of strings");
                node.instances.push_back(s.get<std::string>());
            }
        }
        nodes.push_back(std::move(node));
    }

    auto obs_edges = parse_edges(require(doc, "observational_edges", context),
                                 context + ": observational_edges");
    auto causal_edges = parse_edges(require(doc, "causal_edges", context),
                                    context + ": causal_edges");
    std::string start = require_string(doc, "start", context);
    std::string end = require_string(doc, "end", context);

    ActivityGraphs graphs;
    graphs.activity = activity;
    try {
        graphs.observational = Dag(nodes, obs_edges, start, end);
        graphs.causal = Dag(nodes, causal_edges);
    } catch (const ValidationError& e) {
        throw ValidationError(context + ": " + e.what());
    }

    std::vector<Violation> violations = validate_activity(graphs);
    if (!violations.empty())
        throw_violations(context, violations);
    return graphs;
}

void save_bundle(const std::string& path, const ActivityGraphs& graphs) {
    const Dag& g_o = graphs.observational;
    json nodes = json::array();
    for (const EventNode& n : g_o.nodes())
        nodes.push_back({{"id", n.id}, {"label", n.label}, {"instances", n.instances}});
    auto edges_json = [](const Dag& g) {
        json arr = json::array();
        for (const auto& [a, b] : g.edges())
            arr.push_back(json::array({g.node(a).id, g.node(b).id}));
        return arr;
    };
    json doc = {{"activity", graphs.activity},
                {"nodes", std::move(nodes)},
                {"observational_edges", edges_json(g_o)},
                {"causal_edges", edges_json(graphs.causal)},
                {"start", g_o.start_id()},
                {"end", g_o.end_id()},
                {"format_version", 1}};
    write_file(path, doc.dump(2) + "\n");
}

namespace {

json manifest_to_json(const DatasetManifest& m) {
    json j = {{"activity", m.activity},
              {"variant", to_string(m.variant)},
              {"level", to_string(m.level)},
              {"count", m.count},
              {"digest", m.digest},
              {"source_digest", m.source_digest},
              {"format_version", m.format_version}};
    j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
    return j;
}

DatasetManifest manifest_from_json(const json& j, const std::string& context) {
    if (!j.is_object())
        throw ValidationError(context + ": manifest line must be a JSON object");
    DatasetManifest m;
    try {
        m.activity = j.at("activity").get<std::string>();
        m.variant = variant_from_string(j.at("variant").get<std::string>());
        m.level = level_from_string(j.at("level").get<std::string>());
        m.count = j.at("count").get<uint64_t>();
        m.digest = j.at("digest").get<std::string>();
        m.source_digest = j.at("source_digest").get<std::string>();
        m.format_version = j.at("format_version").get<int>();
        if (!j.at("seed").is_null())
            m.seed = j.at("seed").get<uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(context + ": manifest: " + e.what());
    }
    if (m.format_version != 1)
        throw ValidationError(context + ": unsupported format_version " +
                              std::to_string(m.format_version));
    return m;
}

json dataset_record_to_json(const DatasetRecord& r) {
    return {{"premise", r.premise},
            {"choice1", r.choice1},
            {"choice2", r.choice2},
            {"question", to_string(r.question)},
            {"label", r.label},
            {"activity", r.activity},
            {"node_ids", {{"p", r.p_id}, {"c1", r.c1_id}, {"c2", r.c2_id}}},
            {"variant", to_string(r.variant)},
            {"level", to_string(r.level)}};
}

DatasetRecord dataset_record_from_json(const json& j, const std::string& context) {
    if (!j.is_object())
        throw ValidationError(context + ": record must be a JSON object");
    DatasetRecord r;
    try {
        r.premise = j.at("premise").get<std::string>();
        r.choice1 = j.at("choice1").get<std::string>();
        r.choice2 = j.at("choice2").get<std::string>();
        r.question = question_from_string(j.at("question").get<std::string>());
        r.label = j.at("label").get<int>();
        r.activity = j.at("activity").get<std::string>();
        const json& ids = j.at("node_ids");
        r.p_id = ids.at("p").get<std::string>();
        r.c1_id = ids.at("c1").get<std::string>();
        r.c2_id = ids.at("c2").get<std::string>();
        r.variant = variant_from_string(j.at("variant").get<std::string>());
        r.level = level_from_string(j.at("level").get<std::string>());
    } catch (const json::exception& e) {
        throw ValidationError(context + ": " + e.what());
    }
    if (r.label != 1 && r.label != 2)
        throw ValidationError(context + ": label must be 1 or 2");
    return r;
}

// Single-pass dataset writer. The manifest goes out first with a zeroed
// digest; records are hashed as they stream past; finish() seeks back and
// patches the real digest in place (same byte length by construction).
class DatasetSink {
public:
    DatasetSink(const std::string& path, DatasetManifest manifest)
        : path_(path), expected_(manifest.count) {
        manifest.digest.assign(64, '0');
        std::string line = manifest_to_json(manifest).dump();
        size_t pos = line.find(manifest.digest);
        if (pos == std::string::npos)
            throw ValidationError("internal: digest placeholder not found");
        digest_pos_ = std::streamoff(pos);
        out_.open(path, std::ios::binary | std::ios::in | std::ios::out | std::ios::trunc);
        if (!out_)
            throw ValidationError("cannot write '" + path + "'");
        out_ << line << '\n';
    }

    void add(const DatasetRecord& r) { add_line(dataset_record_to_json(r).dump()); }

    void add_line(const std::string& line) {
        hash_.update(line);
        hash_.update("\n", 1);
        out_ << line << '\n';
        ++written_;
    }

    std::string finish() {
        if (written_ != expected_)
            throw ValidationError("dataset writer: expected " + std::to_string(expected_) +
                                  " records, got " + std::to_string(written_));
        std::string digest = hash_.hex_digest();
        out_.seekp(digest_pos_);
        out_.write(digest.data(), 64);
        out_.close();
        if (!out_)
            throw ValidationError("short write to '" + path_ + "'");
        return digest;
    }

private:
    std::string path_;
    std::fstream out_;
    Sha256 hash_;
    uint64_t expected_ = 0;
    uint64_t written_ = 0;
    std::streamoff digest_pos_ = 0;
};

void flip_record(DatasetRecord& r) {
    std::swap(r.choice1, r.choice2);
    std::swap(r.c1_id, r.c2_id);
    r.label = 3 - r.label;
}

// Which records should end up with label 1: a seeded shuffle hands label 1
// to ceil(total/2) positions, so the final counts differ by at most one no
// matter how the raw labels were distributed.
std::vector<bool> label_one_mask(uint64_t total, uint64_t seed,
                                 const std::string& stream_name) {
    if (total > uint64_t(UINT32_MAX))
        throw ValidationError("dataset too large to balance");
    std::vector<uint32_t> idx(static_cast<size_t>(total));
    std::iota(idx.begin(), idx.end(), 0u);
    DeterministicRng rng(mix_seed(sha256_hex(stream_name), total, seed));
    rng.shuffle(idx);
    std::vector<bool> want(size_t(total), false);
    uint64_t ones = (total + 1) / 2;
    for (uint64_t k = 0; k < ones; ++k)
        want[idx[size_t(k)]] = true;
    return want;
}

} // namespace

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw ValidationError("dataset '" + path + "': missing manifest line");
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw ValidationError("dataset '" + path + "': line 1: not valid JSON");
    return manifest_from_json(j, "dataset '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + path + "'");
    const std::string context = "dataset '" + path + "'";
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw ValidationError(context + ": missing manifest line");
    json mj = json::parse(line, nullptr, false);
    if (mj.is_discarded())
        throw ValidationError(context + ": line 1: not valid JSON");

    Dataset ds;
    ds.manifest = manifest_from_json(mj, context);
    Sha256 hash;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        hash.update(line);
        hash.update("\n", 1);
        json rj = json::parse(line, nullptr, false);
        std::string at = context + ": line " + std::to_string(line_no);
        if (rj.is_discarded())
            throw ValidationError(at + ": not valid JSON");
        ds.records.push_back(dataset_record_from_json(rj, at));
    }
    if (ds.records.size() != ds.manifest.count)
        throw ValidationError(context + ": manifest count " +
                              std::to_string(ds.manifest.count) + " but " +
                              std::to_string(ds.records.size()) + " records");
    std::string digest = hash.hex_digest();
    if (!ds.manifest.digest.empty() && ds.manifest.digest != digest)
        throw ValidationError(context + ": record digest mismatch (file says " +
                              ds.manifest.digest.substr(0, 16) + "…, content is " +
                              digest.substr(0, 16) + "…)");
    ds.manifest.digest = digest;
    return ds;
}

void save_dataset(const std::string& path, Dataset& dataset) {
    dataset.manifest.count = dataset.records.size();
    DatasetSink sink(path, dataset.manifest);
    for (const DatasetRecord& r : dataset.records)
        sink.add(r);
    dataset.manifest.digest = sink.finish();
}

void generate_dataset_file(const std::string& path, const ActivityGraphs& graphs,
                           const std::vector<Triplet>& triplets, Variant variant,
                           Level level, uint64_t seed) {
    if (triplets.empty())
        throw ValidationError("no triplets to write");
    const Dag& g_o = graphs.observational;
    const std::string stream =
        graphs.activity + "|" + to_string(variant) + "|" + to_string(level);

    DatasetManifest manifest;
    manifest.activity = graphs.activity;
    manifest.variant = variant;
    manifest.level = level;
    manifest.seed = seed;

    if (level == Level::node) {
        manifest.count = triplets.size();
        std::vector<bool> want = label_one_mask(triplets.size(), seed, stream);
        DatasetSink sink(path, manifest);
        for (size_t i = 0; i < triplets.size(); ++i) {
            const Triplet& t = triplets[i];
            DatasetRecord r;
            r.premise = g_o.node(g_o.index_of(t.premise)).label;
            r.choice1 = g_o.node(g_o.index_of(t.choice1)).label;
            r.choice2 = g_o.node(g_o.index_of(t.choice2)).label;
            r.question = t.question;
            r.label = t.label;
            r.activity = graphs.activity;
            r.p_id = t.premise;
            r.c1_id = t.choice1;
            r.c2_id = t.choice2;
            r.variant = variant;
            r.level = level;
            if ((r.label == 1) != bool(want[i]))
                flip_record(r);
            sink.add(r);
        }
        sink.finish();
        return;
    }

    uint64_t total = count_instance_triplets(g_o, triplets);
    if (total == 0)
        throw ValidationError("instance expansion is empty (nodes without instances)");
    manifest.count = total;
    std::vector<bool> want = label_one_mask(total, seed, stream);
    DatasetSink sink(path, manifest);
    uint64_t i = 0;
    expand_instances(g_o, triplets, [&](const InstanceTriplet& it) {
        DatasetRecord r;
        r.premise = it.premise_text;
        r.choice1 = it.choice1_text;
        r.choice2 = it.choice2_text;
        r.question = it.nodes.question;
        r.label = it.nodes.label;
        r.activity = graphs.activity;
        r.p_id = it.nodes.premise;
        r.c1_id = it.nodes.choice1;
        r.c2_id = it.nodes.choice2;
        r.variant = variant;
        r.level = Level::instance;
        if ((r.label == 1) != bool(want[size_t(i)]))
            flip_record(r);
        sink.add(r);
        ++i;
    });
    sink.finish();
}

void sample_dataset_file(const std::string& in_path, const std::string& out_path,
                         uint64_t n, uint64_t seed) {
    DatasetManifest source = read_manifest(in_path);
    if (n == 0)
        throw ValidationError("sample size must be positive");
    std::vector<uint32_t> picks = frozen_sample_indices(source.count, n, seed,
                                                        source.digest);

    std::ifstream in(in_path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + in_path + "'");
    std::string line;
    std::getline(in, line); // manifest, already parsed

    DatasetManifest manifest = source;
    manifest.count = n;
    manifest.seed = seed;
    manifest.source_digest = source.digest;
    manifest.digest.clear();
    DatasetSink sink(out_path, manifest);

    Sha256 source_hash;
    uint64_t index = 0;
    size_t next_pick = 0;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        source_hash.update(line);
        source_hash.update("\n", 1);
        if (next_pick < picks.size() && picks[next_pick] == index) {
            sink.add_line(line);
            ++next_pick;
        }
        ++index;
    }
    if (index != source.count)
        throw ValidationError("dataset '" + in_path + "': manifest count " +
                              std::to_string(source.count) + " but " +
                              std::to_string(index) + " records");
    if (source_hash.hex_digest() != source.digest)
        throw ValidationError("dataset '" + in_path + "': record digest mismatch");
    sink.finish();
}

EsdCorpus load_esd_corpus(const std::string& path, const Dag& g_o) {
    const std::string context = "esd corpus '" + path + "'";
    json doc = parse_json(read_file(path), context);
    if (!doc.is_object())
        throw ValidationError(context + ": top level must be a JSON object");
    EsdCorpus corpus;
    corpus.activity = require_string(doc, "activity", context);
    const json& esds = require(doc, "esds", context);
    if (!esds.is_array())
        throw ValidationError(context + ": 'esds' must be an array");
    for (size_t i = 0; i < esds.size(); ++i) {
        const json& seq = esds[i];
        std::string at = context + ": esds[" + std::to_string(i) + "]";
        if (!seq.is_array())
            throw ValidationError(at + " must be an array of node ids");
        Trajectory t;
        for (const json& id : seq) {
            if (!id.is_string())
                throw ValidationError(at + " must be an array of node ids");
            t.push_back(id.get<std::string>());
        }
        corpus.esds.push_back(std::move(t));
    }
    std::vector<Violation> violations = validate_corpus(corpus, g_o);
    if (!violations.empty())
        throw_violations(context, violations);
    return corpus;
}

void save_esd_corpus(const std::string& path, const EsdCorpus& corpus) {
    json esds = json::array();
    for (const Trajectory& t : corpus.esds)
        esds.push_back(t);
    json doc = {{"activity", corpus.activity}, {"esds", std::move(esds)}};
    write_file(path, doc.dump(2) + "\n");
}

void save_eval_records(const std::string& path, const std::vector<EvalRecord>& records) {
    std::ostringstream out;
    for (const EvalRecord& r : records)
        out << to_json_line(r) << '\n';
    write_file(path, out.str());
}

std::vector<EvalRecord> load_eval_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + path + "'");
    std::vector<EvalRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        try {
            out.push_back(eval_record_from_json(line));
        } catch (const ValidationError& e) {
            throw ValidationError("records '" + path + "': line " +
                                  std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace causalq
