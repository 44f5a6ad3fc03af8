#include "causalq/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "causalq/error.hpp"
#include "causalq/scorers.hpp"

#include "json.hpp"

namespace causalq {

using nlohmann::json;

namespace {

json record_to_json(const EvalRecord& r) {
    json j = {{"activity", r.activity},
              {"p_id", r.p_id},
              {"c1_id", r.c1_id},
              {"c2_id", r.c2_id},
              {"question", to_string(r.question)},
              {"variant", to_string(r.variant)},
              {"true_label", r.true_label},
              {"scheme", r.scheme},
              {"predicted", r.predicted},
              {"correct", r.correct},
              {"tie", r.tie},
              {"empty_strata", r.empty_strata},
              {"excluded", r.excluded},
              {"error", r.error}};
    // NaN has no JSON literal; null marks "no delta" (direct MCQA).
    j["delta1"] = std::isnan(r.delta1) ? json(nullptr) : json(r.delta1);
    j["delta2"] = std::isnan(r.delta2) ? json(nullptr) : json(r.delta2);
    return j;
}

EvalRecord record_from_json(const json& j) {
    if (!j.is_object())
        throw ValidationError("eval record: expected a JSON object");
    EvalRecord r;
    try {
        r.activity = j.at("activity").get<std::string>();
        r.p_id = j.at("p_id").get<std::string>();
        r.c1_id = j.at("c1_id").get<std::string>();
        r.c2_id = j.at("c2_id").get<std::string>();
        r.question = question_from_string(j.at("question").get<std::string>());
        r.variant = variant_from_string(j.at("variant").get<std::string>());
        r.true_label = j.at("true_label").get<int>();
        r.scheme = j.at("scheme").get<std::string>();
        r.predicted = j.at("predicted").get<int>();
        r.correct = j.at("correct").get<bool>();
        r.tie = j.at("tie").get<bool>();
        r.empty_strata = j.at("empty_strata").get<int>();
        r.excluded = j.at("excluded").get<bool>();
        r.error = j.at("error").get<std::string>();
        r.delta1 = j.at("delta1").is_null() ? NAN : j.at("delta1").get<double>();
        r.delta2 = j.at("delta2").is_null() ? NAN : j.at("delta2").get<double>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("eval record: ") + e.what());
    }
    return r;
}

std::string sanitize_for_filename(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.')
            c = '_';
    return s;
}

std::string checkpoint_path(const EvalOptions& options, const std::string& digest,
                            const std::string& scheme) {
    std::string key = digest.empty() ? "unkeyed" : digest.substr(0, 16);
    return options.checkpoint_dir + "/" + key + "-" + sanitize_for_filename(scheme) +
           ".ckpt.json";
}

struct Resume {
    size_t next_index = 0;
    std::vector<EvalRecord> records;
};

Resume load_checkpoint(const std::string& path, const std::string& digest,
                       const std::string& scheme) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return {};
    std::stringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    // A checkpoint for another dataset or scheme (or a corrupt file) is
    // simply ignored: starting over is always safe.
    if (j.is_discarded() || !j.is_object())
        return {};
    if (j.value("digest", "") != digest || j.value("scheme", "") != scheme)
        return {};
    auto rec_it = j.find("records");
    if (rec_it == j.end() || !rec_it->is_array() || !j.contains("next_index"))
        return {};
    Resume r;
    r.next_index = j.at("next_index").get<size_t>();
    r.records.reserve(rec_it->size());
    for (const json& e : *rec_it)
        r.records.push_back(record_from_json(e));
    return r;
}

void save_checkpoint(const std::string& path, const std::string& digest,
                     const std::string& scheme,
                     const std::vector<EvalRecord>& records, size_t next_index) {
    json recs = json::array();
    for (const EvalRecord& r : records)
        recs.push_back(record_to_json(r));
    json j = {{"digest", digest},
              {"scheme", scheme},
              {"next_index", next_index},
              {"records", std::move(recs)}};
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ValidationError("cannot write checkpoint file '" + tmp + "'");
        out << j.dump() << '\n';
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ValidationError("cannot move checkpoint into place at '" + path + "'");
}

SuccessReport summarize(const std::vector<EvalRecord>& records,
                        const DatasetManifest& manifest, const std::string& scheme) {
    SuccessReport rep;
    rep.activity = manifest.activity;
    rep.scheme = scheme;
    rep.variant = manifest.variant;
    for (const EvalRecord& r : records) {
        if (r.excluded) {
            ++rep.excluded;
            continue;
        }
        ++rep.n;
        if (r.correct) ++rep.correct;
        if (r.tie) ++rep.tie_count;
        rep.empty_strata += r.empty_strata;
    }
    rep.success_rate = rep.n > 0 ? 100.0 * double(rep.correct) / double(rep.n) : 0.0;
    return rep;
}

} // namespace

std::string to_json_line(const EvalRecord& record) {
    return record_to_json(record).dump();
}

EvalRecord eval_record_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw ValidationError("eval record line is not valid JSON");
    return record_from_json(j);
}

EvalResult evaluate_mcqa(const Dataset& dataset, Scorer& scorer, McqaTemplate tmpl,
                         const EvalOptions& options) {
    if (dataset.records.empty())
        throw ValidationError("dataset is empty");
    const std::string scheme =
        std::string("mcqa:") + (tmpl == McqaTemplate::v1 ? "v1" : "v2");
    const bool ckpt = !options.checkpoint_dir.empty();
    const std::string path =
        ckpt ? checkpoint_path(options, dataset.manifest.digest, scheme) : "";

    Resume resume;
    if (ckpt)
        resume = load_checkpoint(path, dataset.manifest.digest, scheme);
    std::vector<EvalRecord> records = std::move(resume.records);
    records.reserve(dataset.records.size());

    for (size_t i = resume.next_index; i < dataset.records.size(); ++i) {
        const DatasetRecord& rec = dataset.records[i];
        RenderedPrompt prompt = render_mcqa_causal(rec.activity, rec.premise,
                                                   rec.choice1, rec.choice2,
                                                   rec.question, tmpl);
        PromptMeta meta;
        meta.premise = rec.p_id;
        meta.choice1 = rec.c1_id;
        meta.choice2 = rec.c2_id;

        McqaPrediction pred;
        try {
            pred = mcqa_predict(scorer, prompt, meta);
        } catch (const TransportError& e) {
            if (ckpt) save_checkpoint(path, dataset.manifest.digest, scheme, records, i);
            throw TransportError("record " + std::to_string(i) + " (premise '" +
                                 rec.p_id + "'): " + e.what());
        } catch (const ProtocolError& e) {
            if (ckpt) save_checkpoint(path, dataset.manifest.digest, scheme, records, i);
            throw ProtocolError("record " + std::to_string(i) + " (premise '" +
                                rec.p_id + "'): " + e.what());
        }

        EvalRecord out;
        out.activity = rec.activity;
        out.p_id = rec.p_id;
        out.c1_id = rec.c1_id;
        out.c2_id = rec.c2_id;
        out.question = rec.question;
        out.variant = rec.variant;
        out.true_label = rec.label;
        out.scheme = scheme;
        out.predicted = pred.choice;
        out.tie = pred.tie;
        out.correct = (pred.choice == rec.label);
        records.push_back(std::move(out));

        if (ckpt && records.size() % options.checkpoint_every == 0)
            save_checkpoint(path, dataset.manifest.digest, scheme, records, i + 1);
    }
    if (ckpt)
        std::remove(path.c_str());

    EvalResult result;
    result.records = std::move(records);
    result.report = summarize(result.records, dataset.manifest, scheme);
    return result;
}

EvalResult evaluate_delta(const Dataset& dataset, const DeltaFn& delta_fn,
                          const std::string& scheme_name, const EvalOptions& options) {
    if (dataset.records.empty())
        throw ValidationError("dataset is empty");
    if (!delta_fn)
        throw ValidationError("delta_fn is empty");
    const bool ckpt = !options.checkpoint_dir.empty();
    const std::string path =
        ckpt ? checkpoint_path(options, dataset.manifest.digest, scheme_name) : "";

    Resume resume;
    if (ckpt)
        resume = load_checkpoint(path, dataset.manifest.digest, scheme_name);
    std::vector<EvalRecord> records = std::move(resume.records);
    records.reserve(dataset.records.size());

    for (size_t i = resume.next_index; i < dataset.records.size(); ++i) {
        const DatasetRecord& rec = dataset.records[i];
        EvalRecord out;
        out.activity = rec.activity;
        out.p_id = rec.p_id;
        out.c1_id = rec.c1_id;
        out.c2_id = rec.c2_id;
        out.question = rec.question;
        out.variant = rec.variant;
        out.true_label = rec.label;
        out.scheme = scheme_name;

        // Pair order follows the question: a candidate cause is tested as
        // Δ(choice, premise), a candidate effect as Δ(premise, choice).
        std::pair<std::string, std::string> pair1, pair2;
        if (rec.question == Question::cause) {
            pair1 = {rec.c1_id, rec.p_id};
            pair2 = {rec.c2_id, rec.p_id};
        } else {
            pair1 = {rec.p_id, rec.c1_id};
            pair2 = {rec.p_id, rec.c2_id};
        }
        try {
            DeltaEstimate d1 = delta_fn(pair1.first, pair1.second);
            DeltaEstimate d2 = delta_fn(pair2.first, pair2.second);
            out.delta1 = d1.value;
            out.delta2 = d2.value;
            out.empty_strata = d1.empty_strata + d2.empty_strata;
            if (d2.value > d1.value) {
                out.predicted = 2;
            } else {
                out.predicted = 1;
                out.tie = (d1.value == d2.value);
            }
            out.correct = (out.predicted == rec.label);
        } catch (const Error& e) {
            out.excluded = true;
            out.error = e.what();
        }
        records.push_back(std::move(out));

        if (ckpt && records.size() % options.checkpoint_every == 0)
            save_checkpoint(path, dataset.manifest.digest, scheme_name, records, i + 1);
    }
    if (ckpt)
        std::remove(path.c_str());

    EvalResult result;
    result.records = std::move(records);
    result.report = summarize(result.records, dataset.manifest, scheme_name);
    return result;
}

DeltaFn make_graph_delta_fn(const Dag& g_o, TransitionScheme scheme) {
    auto eval = std::make_shared<DeltaGraphEvaluator>(g_o, scheme);
    auto g = std::make_shared<Dag>(g_o);
    std::string name = to_string(scheme);
    return [eval, g, name](const std::string& e1, const std::string& e2) {
        int i = g->index_of(e1);
        int j = g->index_of(e2);
        const TopoOrder& topo = eval->topo();
        if (i == j || topo.rank[size_t(i)] >= topo.rank[size_t(j)]) {
            DeltaEstimate est;
            est.scheme = name;
            est.e1 = e1;
            est.e2 = e2;
            return est; // an intervention cannot affect its own past
        }
        return (*eval)(e1, e2);
    };
}

DeltaFn make_original_delta_fn(const EsdCorpus& corpus, const Dag& g_o) {
    auto corp = std::make_shared<EsdCorpus>(corpus);
    auto g = std::make_shared<Dag>(g_o);
    auto topo = std::make_shared<TopoOrder>(topological_order(g_o));
    return [corp, g, topo](const std::string& e1, const std::string& e2) {
        int i = g->index_of(e1);
        int j = g->index_of(e2);
        if (i == j || topo->rank[size_t(i)] >= topo->rank[size_t(j)]) {
            DeltaEstimate est;
            est.scheme = "original";
            est.e1 = e1;
            est.e2 = e2;
            return est;
        }
        return delta_original(*corp, *g, e1, e2);
    };
}

DeltaFn make_graph_truth_delta_fn(const Dag& g_c) {
    auto g = std::make_shared<Dag>(g_c);
    return [g](const std::string& e1, const std::string& e2) {
        DeltaEstimate est;
        est.scheme = "oracle";
        est.e1 = e1;
        est.e2 = e2;
        est.value = d_connected(*g, e1, e2, {}) ? 1.0 : 0.0;
        return est;
    };
}

DeltaFn make_temporal_delta_fn(std::shared_ptr<Scorer> scorer, const Dag& g_o,
                               const std::string& activity, bool use_masked) {
    auto g = std::make_shared<Dag>(g_o);
    return [scorer, g, activity, use_masked](const std::string& e1,
                                             const std::string& e2) {
        const EventNode& n1 = g->node(g->index_of(e1));
        const EventNode& n2 = g->node(g->index_of(e2));
        PromptMeta meta;
        meta.e1 = e1;
        meta.e2 = e2;
        return delta_temporal(*scorer, activity, n1.label, n2.label, use_masked, meta);
    };
}

DeltaFn make_backdoor_delta_fn(std::shared_ptr<Scorer> scorer, const Dag& g_o,
                               const std::string& activity,
                               uint64_t n_trajectories, uint64_t seed) {
    auto g = std::make_shared<Dag>(g_o);
    return [scorer, g, activity, n_trajectories, seed](const std::string& e1,
                                                       const std::string& e2) {
        return delta_backdoor_lm(*scorer, *g, activity, e1, e2,
                                 static_cast<int>(n_trajectories), seed);
    };
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "text") return ReportFormat::text;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ValidationError("unknown report format '" + s + "' (text|csv|json)");
}

std::vector<SuccessReport> aggregate_records(const std::vector<EvalRecord>& records) {
    if (records.empty())
        throw ValidationError("nothing to report");
    std::map<std::tuple<std::string, std::string, std::string>, SuccessReport> groups;
    for (const EvalRecord& r : records) {
        auto key = std::make_tuple(r.activity, r.scheme, to_string(r.variant));
        SuccessReport& rep = groups[key];
        rep.activity = r.activity;
        rep.scheme = r.scheme;
        rep.variant = r.variant;
        if (r.excluded) {
            ++rep.excluded;
            continue;
        }
        ++rep.n;
        if (r.correct) ++rep.correct;
        if (r.tie) ++rep.tie_count;
        rep.empty_strata += r.empty_strata;
    }
    std::vector<SuccessReport> out;
    out.reserve(groups.size());
    for (auto& [key, rep] : groups) {
        rep.success_rate = rep.n > 0 ? 100.0 * double(rep.correct) / double(rep.n) : 0.0;
        out.push_back(std::move(rep));
    }
    return out;
}

namespace {

std::string row_label(const SuccessReport& r) {
    return r.variant == Variant::causally_hard ? r.scheme + " (hard)" : r.scheme;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string render_text(const std::vector<SuccessReport>& reports) {
    // Success-rate matrix, rows = scheme (+variant), columns = activities.
    std::vector<std::string> activities;
    std::vector<std::string> rows;
    std::map<std::pair<std::string, std::string>, const SuccessReport*> cells;
    for (const SuccessReport& r : reports) {
        if (std::find(activities.begin(), activities.end(), r.activity) ==
            activities.end())
            activities.push_back(r.activity);
        std::string label = row_label(r);
        if (std::find(rows.begin(), rows.end(), label) == rows.end())
            rows.push_back(label);
        cells[{label, r.activity}] = &r;
    }
    std::sort(activities.begin(), activities.end());
    std::sort(rows.begin(), rows.end());

    size_t label_w = std::string("scheme").size();
    for (const std::string& row : rows)
        label_w = std::max(label_w, row.size());
    std::vector<size_t> col_w;
    for (const std::string& a : activities)
        col_w.push_back(std::max<size_t>(a.size(), 6));

    std::ostringstream out;
    out << std::left << std::setw(int(label_w)) << "scheme";
    for (size_t c = 0; c < activities.size(); ++c)
        out << "  " << std::right << std::setw(int(col_w[c])) << activities[c];
    out << '\n';
    for (const std::string& row : rows) {
        out << std::left << std::setw(int(label_w)) << row;
        for (size_t c = 0; c < activities.size(); ++c) {
            out << "  " << std::right << std::setw(int(col_w[c]));
            auto it = cells.find({row, activities[c]});
            if (it == cells.end()) {
                out << "-";
            } else {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << it->second->success_rate;
                out << cell.str();
            }
        }
        out << '\n';
    }
    out << '\n';
    for (const SuccessReport& r : reports) {
        out << row_label(r) << " @ " << r.activity << ": n=" << r.n
            << " correct=" << r.correct << " ties=" << r.tie_count
            << " empty_strata=" << r.empty_strata << " excluded=" << r.excluded
            << '\n';
    }
    return out.str();
}

constexpr const char* kCsvHeader =
    "activity,scheme,variant,n,correct,success_rate,tie_count,empty_strata,excluded";

std::string render_csv(const std::vector<SuccessReport>& reports) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const SuccessReport& r : reports) {
        std::ostringstream rate;
        rate << std::setprecision(17) << r.success_rate;
        out << csv_field(r.activity) << ',' << csv_field(r.scheme) << ','
            << to_string(r.variant) << ',' << r.n << ',' << r.correct << ','
            << rate.str() << ',' << r.tie_count << ',' << r.empty_strata << ','
            << r.excluded << '\n';
    }
    return out.str();
}

json report_to_json(const SuccessReport& r) {
    return {{"activity", r.activity},
            {"scheme", r.scheme},
            {"variant", to_string(r.variant)},
            {"n", r.n},
            {"correct", r.correct},
            {"success_rate", r.success_rate},
            {"tie_count", r.tie_count},
            {"empty_strata", r.empty_strata},
            {"excluded", r.excluded}};
}

SuccessReport report_from_json(const json& j) {
    SuccessReport r;
    try {
        r.activity = j.at("activity").get<std::string>();
        r.scheme = j.at("scheme").get<std::string>();
        r.variant = variant_from_string(j.at("variant").get<std::string>());
        r.n = j.at("n").get<long>();
        r.correct = j.at("correct").get<long>();
        r.success_rate = j.at("success_rate").get<double>();
        r.tie_count = j.at("tie_count").get<long>();
        r.empty_strata = j.at("empty_strata").get<long>();
        r.excluded = j.at("excluded").get<long>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report entry: ") + e.what());
    }
    return r;
}

} // namespace

std::string render_report(const std::vector<SuccessReport>& reports,
                          ReportFormat format) {
    if (reports.empty())
        throw ValidationError("nothing to report");
    switch (format) {
    case ReportFormat::text:
        return render_text(reports);
    case ReportFormat::csv:
        return render_csv(reports);
    case ReportFormat::json: {
        json arr = json::array();
        for (const SuccessReport& r : reports)
            arr.push_back(report_to_json(r));
        return arr.dump(2) + "\n";
    }
    }
    throw ValidationError("unknown report format");
}

std::vector<SuccessReport> parse_report(const std::string& content,
                                        ReportFormat format) {
    std::vector<SuccessReport> out;
    switch (format) {
    case ReportFormat::text:
        throw ValidationError("text reports are display-only; use csv or json");
    case ReportFormat::csv: {
        std::istringstream in(content);
        std::string line;
        if (!std::getline(in, line) || line != kCsvHeader)
            throw ValidationError("csv report: missing or unexpected header");
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            std::vector<std::string> f = split_csv_line(line);
            if (f.size() != 9)
                throw ValidationError("csv report: expected 9 fields, got " +
                                      std::to_string(f.size()));
            SuccessReport r;
            try {
                r.activity = f[0];
                r.scheme = f[1];
                r.variant = variant_from_string(f[2]);
                r.n = std::stol(f[3]);
                r.correct = std::stol(f[4]);
                r.success_rate = std::stod(f[5]);
                r.tie_count = std::stol(f[6]);
                r.empty_strata = std::stol(f[7]);
                r.excluded = std::stol(f[8]);
            } catch (const std::exception& e) {
                throw ValidationError(std::string("csv report: bad field: ") + e.what());
            }
            out.push_back(std::move(r));
        }
        return out;
    }
    case ReportFormat::json: {
        json arr = json::parse(content, nullptr, false);
        if (arr.is_discarded() || !arr.is_array())
            throw ValidationError("json report: expected a JSON array");
        for (const json& e : arr)
            out.push_back(report_from_json(e));
        return out;
    }
    }
    throw ValidationError("unknown report format");
}

} // namespace causalq
