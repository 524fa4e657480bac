// qhealth: calibration-data analysis pipeline.
//
//   synth -> stats / corr -> embed / cluster -> report / recommend / validate
//
// Exit codes: 0 ok, 2 usage, 3 data validation, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qhealth/caldata.hpp"
#include "qhealth/cluster.hpp"
#include "qhealth/fitkit.hpp"
#include "qhealth/graphembed.hpp"
#include "qhealth/health.hpp"
#include "qhealth/synthdev.hpp"
#include "qhealth/tempstats.hpp"
#include "qhealth/topology.hpp"
#include "qhealth/xcorr.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qhealth;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string topology;
    std::string out = ".";
    std::string format = "csv";
};

DayWindow parse_window(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("window must look like FROM:TO, got '" + text + "'");
    try {
        std::size_t used = 0;
        const int from = std::stoi(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("from");
        const auto rest = text.substr(colon + 1);
        const int to = std::stoi(rest, &used);
        if (used != rest.size()) throw std::invalid_argument("to");
        if (to < from) throw UsageError("window end precedes start: '" + text + "'");
        return {from, to};
    } catch (const std::logic_error&) {
        throw UsageError("window must look like FROM:TO, got '" + text + "'");
    }
}

std::string window_text(DayWindow w) { return std::to_string(w.from) + ":" + std::to_string(w.to); }

DayWindow resolve_window(const std::string& text, const Dataset& ds) {
    const auto span = ds.day_span();
    if (text.empty()) return span;
    const auto w = parse_window(text);
    if (w.to < span.from || w.from > span.to)
        throw DataError("window " + text + " lies outside the data span " + window_text(span));
    return w;
}

DeviceTopology topology_of(const Globals& g) {
    return g.topology.empty() ? default_topology() : load_topology(g.topology);
}

fs::path out_dir(const Globals& g) {
    fs::path dir(g.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << content;
    if (!f) throw DataError("failed writing " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fs::path default_data(const Globals& g, const std::string& given) {
    if (!given.empty()) return given;
    for (const char* name : {"corpus.csv", "corpus.json"}) {
        const auto p = fs::path(g.out) / name;
        if (fs::exists(p)) return p;
    }
    throw UsageError("no --data given and no corpus in " + g.out + " (run `qhealth synth` first)");
}

Dataset load_data(const Globals& g, const std::string& given) {
    const auto path = default_data(g, given);
    if (!fs::exists(path)) throw DataError("data file not found: " + path.string());
    auto ds = ingest(path);
    if (ds.records().empty()) throw DataError("dataset " + path.string() + " is empty");
    return ds;
}

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

std::string join(const std::vector<int>& xs, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + std::to_string(xs[i]);
    return s;
}

std::string join_edges(const std::vector<Edge>& es) {
    std::string s;
    for (std::size_t i = 0; i < es.size(); ++i)
        s += (i ? " " : "") + std::to_string(es[i].first) + "-" + std::to_string(es[i].second);
    return s;
}

// --------------------------------------------------------------------------- synth

struct SynthArgs {
    std::string scenario;
    bool use_default = false;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
    if (a.scenario.empty() == !a.use_default)
        throw UsageError("synth needs exactly one of --scenario PATH or --default");
    DeviceScenario sc;
    if (a.use_default) {
        sc = default_scenario(g.seed);
        if (!g.topology.empty()) {
            const auto topo = load_topology(g.topology);
            if (topo.n_qubits() != sc.n_qubits || topo.edges() != sc.topology.edges())
                throw UsageError("--default uses the built-in topology; pass a scenario file for other layouts");
        }
    } else {
        std::ifstream f(a.scenario);
        if (!f) throw DataError("cannot read scenario " + a.scenario);
        std::stringstream buf;
        buf << f.rdbuf();
        sc = scenario_from_json(buf.str());
        if (g.seed_given) sc.seed = g.seed;
    }
    const auto ds = generate_corpus(sc);
    const auto dir = out_dir(g);
    std::ostringstream body;
    if (g.format == "json")
        emit_json(ds, body);
    else
        emit_csv(ds, body);
    write_file(dir / (g.format == "json" ? "corpus.json" : "corpus.csv"), body.str());
    write_file(dir / "scenario.json", scenario_to_json(sc));

    const auto span = ds.day_span();
    std::cout << "corpus: " << ds.records().size() << " records, " << ds.qubit_count() << " qubits, "
              << sc.topology.n_edges() << " couplers, days " << span.from << "-" << span.to << ", seed " << sc.seed
              << "\n";
    for (auto m : kAllMetrics) {
        std::vector<double> v;
        for (const auto& r : ds.records())
            if (r.metric == m) v.push_back(r.value);
        const auto s = summary(v);
        std::cout << "  " << to_string(m) << ": n=" << s.n << " mean=" << format_number(s.mean)
                  << " std=" << format_number(s.std) << "\n";
    }
}

// --------------------------------------------------------------------------- stats

struct StatsArgs {
    std::string data;
    int max_lag = 30;
    double drop_z = 4.0;
};

void cmd_stats(const Globals& g, const StatsArgs& a) {
    if (a.max_lag < 1) throw UsageError("--max-lag must be >= 1");
    const auto ds = load_data(g, a.data);
    const auto dir = out_dir(g);

    json summary_doc;
    summary_doc["day_span"] = window_text(ds.day_span());
    json pooled = json::object();
    std::ostringstream hist;
    hist << "metric,bin,lo,hi,count,density\n";
    for (auto m : kAllMetrics) {
        std::vector<double> v;
        for (const auto& r : ds.records())
            if (r.metric == m) v.push_back(r.value);
        if (v.size() < 2) continue;
        const auto s = summary(v);
        pooled[std::string(to_string(m))] = {{"n", s.n},       {"mean", s.mean}, {"std", s.std},
                                             {"min", s.min},   {"max", s.max},   {"skewness", s.skewness},
                                             {"lower_tail_frac", s.lower_tail_frac}};
        const auto h = histogram(v, default_bin_count(v));
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            hist << to_string(m) << ',' << b << ',' << format_number(h.edges[b]) << ','
                 << format_number(h.edges[b + 1]) << ',' << h.counts[b] << ',' << format_number(h.density[b])
                 << '\n';
    }
    summary_doc["pooled"] = pooled;

    std::ostringstream acf_csv;
    acf_csv << "target,metric,lag,r,ci\n";
    json excluded = json::array();
    json per_target = json::array();
    for (auto m : kAllMetrics) {
        for (const auto& t : ds.targets(m)) {
            const auto s = series(ds, t, m);
            if (s.size() >= 2) {
                const auto st = summary(s);
                per_target.push_back({{"target", to_string(t)},
                                      {"metric", to_string(m)},
                                      {"n", st.n},
                                      {"mean", st.mean},
                                      {"std", st.std},
                                      {"skewness", st.skewness}});
            }
            try {
                const auto r = acf(s, a.max_lag);
                for (Eigen::Index l = 0; l < r.values.size(); ++l)
                    acf_csv << to_string(t) << ',' << to_string(m) << ',' << l << ',' << format_number(r.values(l))
                            << ',' << format_number(r.ci_halfwidth) << '\n';
            } catch (const DataError& e) {
                excluded.push_back({{"target", to_string(t)}, {"metric", to_string(m)}, {"reason", e.what()}});
            }
        }
    }
    summary_doc["targets"] = per_target;
    summary_doc["acf_excluded"] = excluded;

    json lag_table = json::array();
    for (const auto& row : acf_lag_table(ds, kAllMetrics)) {
        json entry = {{"metric", to_string(row.metric)}, {"n_targets", row.n_targets}, {"excluded", row.excluded}};
        for (std::size_t i = 0; i < row.lags.size(); ++i) {
            const auto key = "lag" + std::to_string(row.lags[i]);
            if (row.n_targets > 0) {
                entry[key] = {{"mean", row.mean(static_cast<Eigen::Index>(i))},
                              {"std", row.std(static_cast<Eigen::Index>(i))}};
            } else {
                entry[key] = nullptr;
            }
        }
        lag_table.push_back(entry);
    }
    summary_doc["acf_lag_table"] = lag_table;

    std::ostringstream ranking;
    ranking << "metric,rank,target,std\n";
    json drops = json::array();
    for (auto m : kAllMetrics) {
        const auto r = instability_ranking(ds, m);
        for (std::size_t i = 0; i < r.size(); ++i)
            ranking << to_string(m) << ',' << i + 1 << ',' << to_string(r[i].first) << ','
                    << format_number(r[i].second) << '\n';
        for (const auto& t : ds.targets(m)) {
            const auto s = series(ds, t, m);
            if (s.size() < 20) continue;
            for (const auto& f : drop_detector(s, a.drop_z))
                drops.push_back({{"target", to_string(t)}, {"metric", to_string(m)}, {"day", f.day}, {"z", f.z_score}});
        }
    }
    summary_doc["drops"] = drops;

    write_file(dir / "summary.json", dump(summary_doc));
    write_file(dir / "acf.csv", acf_csv.str());
    write_file(dir / "ranking.csv", ranking.str());
    write_file(dir / "hist.csv", hist.str());
}

// --------------------------------------------------------------------------- corr

struct CorrArgs {
    std::string data;
    std::string method = "all";
    std::string window;
};

void cmd_corr(const Globals& g, const CorrArgs& a) {
    if (a.window.empty()) throw UsageError("corr needs --window FROM:TO");
    std::vector<DependenceMethod> methods;
    if (a.method == "all")
        methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
    else
        methods.push_back(parse_method(a.method));
    const auto ds = load_data(g, a.data);
    const auto window = resolve_window(a.window, ds);
    const auto dir = out_dir(g);
    for (auto method : methods) {
        const auto cm = metric_correlation_matrix(ds, method, window);
        const std::string tag(to_string(method));
        std::ostringstream csv;
        csv << "metric";
        for (auto m : cm.metric_order) csv << ',' << to_string(m);
        csv << '\n';
        for (std::size_t i = 0; i < cm.metric_order.size(); ++i) {
            csv << to_string(cm.metric_order[i]);
            for (std::size_t j = 0; j < cm.metric_order.size(); ++j)
                csv << ',' << format_number(cm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            csv << '\n';
        }
        json doc;
        doc["method"] = tag;
        doc["window"] = {window.from, window.to};
        json order = json::array();
        for (auto m : cm.metric_order) order.push_back(to_string(m));
        doc["metric_order"] = order;
        doc["values"] = matrix_json(cm.values);
        json days = json::array();
        for (Eigen::Index i = 0; i < cm.n_days.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < cm.n_days.cols(); ++j) row.push_back(cm.n_days(i, j));
            days.push_back(row);
        }
        doc["n_days"] = days;
        write_file(dir / ("corr_" + tag + ".csv"), csv.str());
        write_file(dir / ("corr_" + tag + ".json"), dump(doc));
    }
}

// --------------------------------------------------------------------------- embed / cluster

struct EmbedArgs {
    Node2VecParams params;
};

Embedding make_embedding(const Globals& g, const DeviceTopology& topo, Node2VecParams params) {
    params.seed = g.seed;
    return node2vec(topo, params);
}

json hyperparams_json(const Node2VecParams& p) {
    return {{"p", p.p},
            {"q", p.q},
            {"walk_length", p.walk_length},
            {"walks_per_node", p.walks_per_node},
            {"dims", p.dims},
            {"window", p.window},
            {"negatives", p.negatives},
            {"epochs", p.epochs},
            {"learning_rate", p.learning_rate},
            {"seed", p.seed}};
}

void cmd_embed(const Globals& g, const EmbedArgs& a) {
    const auto topo = topology_of(g);
    const auto emb = make_embedding(g, topo, a.params);
    const auto dir = out_dir(g);
    std::ostringstream csv;
    write_embedding_csv(emb, csv);
    write_file(dir / "embedding.csv", csv.str());
    write_file(dir / "embedding.json",
               dump({{"topology", topo.name()}, {"n_nodes", topo.n_qubits()}, {"hyperparams", hyperparams_json(emb.hyperparams)}}));
}

struct ClusterArgs {
    std::string data;
    std::string method = "all";
    std::string k = "auto";
    std::string window;
    Node2VecParams params;
};

void cmd_cluster(const Globals& g, const ClusterArgs& a) {
    std::vector<ClusterMethod> methods;
    if (a.method == "all")
        methods.assign(std::begin(kAllClusterMethods), std::end(kAllClusterMethods));
    else
        methods.push_back(parse_cluster_method(a.method));
    std::optional<int> fixed_k;
    if (a.k != "auto") {
        try {
            std::size_t used = 0;
            fixed_k = std::stoi(a.k, &used);
            if (used != a.k.size()) throw std::invalid_argument(a.k);
        } catch (const std::logic_error&) {
            throw UsageError("--k must be 'auto' or an integer, got '" + a.k + "'");
        }
        if (*fixed_k < 2) throw UsageError("--k must be >= 2");
    }
    const auto ds = load_data(g, a.data);
    const auto topo = topology_of(g);
    ds.check_topology(topo);
    const auto window = resolve_window(a.window, ds);
    const auto emb = make_embedding(g, topo, a.params);
    const auto features = qubit_features(ds, topo, emb, window);
    const auto n = static_cast<int>(features.values.rows());
    if (fixed_k && *fixed_k > n - 1) throw UsageError("--k must be at most " + std::to_string(n - 1));

    std::vector<int> k_range;
    if (fixed_k)
        k_range = {*fixed_k};
    else
        for (int k = 2; k <= std::min(8, n - 1); ++k) k_range.push_back(k);

    std::vector<ClusterAssignment> results;
    for (auto m : methods) results.push_back(select_k(features.values, m, k_range, g.seed));

    const auto dir = out_dir(g);
    const auto labels_csv = [&](const ClusterAssignment& c) {
        std::ostringstream csv;
        csv << "qubit,label\n";
        for (std::size_t q = 0; q < c.labels.size(); ++q) csv << q << ',' << c.labels[q] << '\n';
        return csv.str();
    };
    json doc;
    doc["window"] = {window.from, window.to};
    doc["features"] = features.names;
    doc["embedding"] = hyperparams_json(emb.hyperparams);
    json list = json::array();
    for (const auto& c : results) {
        json members = json::object();
        for (int l = 0; l < c.k; ++l) {
            std::vector<int> qs;
            for (std::size_t q = 0; q < c.labels.size(); ++q)
                if (c.labels[q] == l) qs.push_back(static_cast<int>(q));
            members[std::to_string(l)] = qs;
        }
        json entry = {{"method", to_string(c.method)}, {"k", c.k},         {"silhouette", c.silhouette},
                      {"seed", c.seed},                {"labels", c.labels}, {"members", members}};
        if (c.method == ClusterMethod::Spectral) entry["disconnected_affinity"] = c.disconnected_affinity;
        list.push_back(entry);
        if (methods.size() > 1)
            write_file(dir / ("labels_" + std::string(to_string(c.method)) + ".csv"), labels_csv(c));
    }
    doc["assignments"] = list;
    if (results.size() > 1) {
        json ari = json::array();
        for (std::size_t i = 0; i < results.size(); ++i)
            for (std::size_t j = i + 1; j < results.size(); ++j)
                ari.push_back({{"a", to_string(results[i].method)},
                               {"b", to_string(results[j].method)},
                               {"ari", adjusted_rand_index(results[i].labels, results[j].labels)}});
        doc["pairwise_ari"] = ari;
    }
    // The combined-representation method is the reference assignment when several ran.
    const auto& primary = results.back();
    write_file(dir / "labels.csv", labels_csv(primary));
    write_file(dir / "cluster.json", dump(doc));
}

// --------------------------------------------------------------------------- report / recommend / validate

struct ReportArgs {
    std::string data;
    std::string window;
};

json score_json(const HealthScore& s) {
    json flags = json::array();
    for (auto f : s.flags) flags.push_back(to_string(f));
    json drops = json::object();
    for (const auto& [m, days] : s.drop_days) drops[std::string(to_string(m))] = days;
    return {{"target", to_string(s.target)},
            {"score", s.score},
            {"components",
             {{"coherence", s.components.coherence},
              {"readout", s.components.readout},
              {"gate", s.components.gate},
              {"stability", s.components.stability}}},
            {"flags", flags},
            {"drop_days", drops}};
}

void cmd_report(const Globals& g, const ReportArgs& a) {
    const auto ds = load_data(g, a.data);
    const auto window = resolve_window(a.window, ds);
    const auto scores = health_scores(ds, window);
    std::optional<CorrMatrix> corr;
    json notes = json::array();
    try {
        corr = metric_correlation_matrix(ds, DependenceMethod::Pearson, window);
    } catch (const DataError& e) {
        notes.push_back(std::string("correlation skipped: ") + e.what());
    }
    const auto acf_rows = acf_lag_table(ds, kAllMetrics);
    const auto actions = recalibration_advice(scores, corr ? &*corr : nullptr, acf_rows);

    json doc;
    doc["window"] = {window.from, window.to};
    json sj = json::array();
    for (const auto& s : scores) sj.push_back(score_json(s));
    doc["scores"] = sj;
    json aj = json::array();
    for (const auto& act : actions) {
        json targets = json::array();
        for (const auto& t : act.targets) targets.push_back(to_string(t));
        json entry = {{"action", to_string(act.kind)}, {"targets", targets}, {"reason", act.reason}};
        if (act.span) entry["span"] = {act.span->from, act.span->to};
        aj.push_back(entry);
    }
    doc["actions"] = aj;
    if (!notes.empty()) doc["notes"] = notes;
    write_file(out_dir(g) / "health.json", dump(doc));
}

struct RecommendArgs {
    std::string data;
    std::string window;
    int k = 5;
    int top = 5;
    bool greedy = false;
    std::string layout = "path";
    double t_gate = 0.04;
};

void cmd_recommend(const Globals& g, const RecommendArgs& a) {
    RecommendOptions opts;
    opts.top_n = a.top;
    opts.greedy = a.greedy;
    opts.ghz.layout = parse_layout_mode(a.layout);
    opts.ghz.t_2q_gate = a.t_gate;
    const auto ds = load_data(g, a.data);
    const auto topo = topology_of(g);
    const auto window = resolve_window(a.window, ds);
    const auto recs = recommend_subsets(ds, topo, a.k, window, opts);
    std::ostringstream csv;
    csv << "rank,qubits,predicted_ghz_fidelity,induced_edges,layout_edges\n";
    for (const auto& r : recs)
        csv << r.rank << ',' << join(r.qubits, " ") << ',' << format_number(r.predicted_ghz_fidelity) << ','
            << join_edges(r.induced_edges) << ',' << join_edges(r.layout_edges) << '\n';
    write_file(out_dir(g) / "subsets.csv", csv.str());
}

struct ValidateArgs {
    std::string data;
    std::string clusters;
    std::string window;
    int k_subset = 5;
    int max_samples = 2000;
    std::string layout = "path";
};

ClusterAssignment read_labels(const fs::path& path, int n_qubits) {
    std::ifstream f(path);
    if (!f) throw DataError("clusters file not found: " + path.string() + " (run `qhealth cluster` first)");
    std::string line;
    if (!std::getline(f, line) || line != "qubit,label")
        throw DataError(path.string() + ": expected header 'qubit,label'");
    ClusterAssignment a;
    a.labels.assign(static_cast<std::size_t>(n_qubits), -1);
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument(line);
            const int q = std::stoi(line.substr(0, comma));
            const int l = std::stoi(line.substr(comma + 1));
            if (q < 0 || q >= n_qubits || l < 0) throw std::out_of_range(line);
            a.labels[static_cast<std::size_t>(q)] = l;
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad row '" + line + "'");
        }
    }
    for (int q = 0; q < n_qubits; ++q)
        if (a.labels[static_cast<std::size_t>(q)] < 0)
            throw DataError(path.string() + ": no label for qubit " + std::to_string(q));
    a.k = *std::max_element(a.labels.begin(), a.labels.end()) + 1;
    return a;
}

void cmd_validate(const Globals& g, const ValidateArgs& a) {
    GhzConfig cfg;
    cfg.layout = parse_layout_mode(a.layout);
    const auto ds = load_data(g, a.data);
    const auto topo = topology_of(g);
    const auto window = resolve_window(a.window, ds);
    const fs::path labels_path = a.clusters.empty() ? fs::path(g.out) / "labels.csv" : fs::path(a.clusters);
    const auto assignment = read_labels(labels_path, topo.n_qubits());
    const auto rep = validate_clusters(assignment, ds, topo, a.k_subset, window, cfg, a.max_samples, g.seed);

    json doc;
    doc["window"] = {window.from, window.to};
    doc["k_subset"] = rep.k_subset;
    doc["layout"] = to_string(cfg.layout);
    json clusters = json::array();
    for (const auto& c : rep.clusters) {
        json e = {{"label", c.label}, {"members", c.members}, {"n_subsets", c.n_subsets}, {"n_skipped", c.n_skipped}};
        if (c.n_subsets > 0) {
            e["mean"] = c.mean;
            e["std"] = c.std;
            e["min"] = c.min;
            e["max"] = c.max;
        }
        if (c.note) e["note"] = *c.note;
        clusters.push_back(e);
    }
    doc["clusters"] = clusters;
    if (rep.gap) {
        doc["gap"] = *rep.gap;
        doc["best_label"] = *rep.best_label;
        doc["worst_label"] = *rep.worst_label;
    } else {
        doc["gap"] = nullptr;
    }
    write_file(out_dir(g) / "validation.json", dump(doc));
}

// --------------------------------------------------------------------------- fit

struct FitArgs {
    std::string input;
    std::string model;
};

void cmd_fit(const Globals& g, const FitArgs& a) {
    const auto model = parse_curve_model(a.model);
    std::ifstream f(a.input);
    if (!f) throw DataError("cannot read " + a.input);
    std::string line;
    if (!std::getline(f, line) || line != "x,y") throw DataError(a.input + ": expected header 'x,y'");
    std::vector<double> xs, ys;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument(line);
            std::size_t used = 0;
            const auto xt = line.substr(0, comma), yt = line.substr(comma + 1);
            xs.push_back(std::stod(xt, &used));
            if (used != xt.size()) throw std::invalid_argument(xt);
            ys.push_back(std::stod(yt, &used));
            if (used != yt.size()) throw std::invalid_argument(yt);
        } catch (const std::logic_error&) {
            throw DataError(a.input + ":" + std::to_string(lineno) + ": bad row '" + line + "'");
        }
    }
    const auto r = fit_curve(model, xs, ys);
    json params = json::object(), errors = json::object();
    const auto names = parameter_names(model);
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        params[std::string(names[i])] = r.params(ii);
        errors[std::string(names[i])] = std::sqrt(std::max(0.0, r.covariance(ii, ii)));
    }
    json doc = {{"model", to_string(model)},     {"params", params},
                {"std_errors", errors},           {"covariance", matrix_json(r.covariance)},
                {"residual_rms", r.residual_rms}, {"converged", r.converged},
                {"iterations", r.iterations}};
    if (model == CurveModel::RBDecay) {
        const double p = r.params(2);
        if (p >= 0.0 && p <= 1.0) doc["fidelity_1q"] = fidelity_1q(p);
    }
    write_file(out_dir(g) / "fit.json", dump(doc));
}

void add_embedding_options(CLI::App* sub, Node2VecParams& p) {
    sub->add_option("--p", p.p, "Node2Vec return parameter")->capture_default_str();
    sub->add_option("--q", p.q, "Node2Vec in-out parameter")->capture_default_str();
    sub->add_option("--walk-length", p.walk_length)->capture_default_str();
    sub->add_option("--walks-per-node", p.walks_per_node)->capture_default_str();
    sub->add_option("--dims", p.dims, "Embedding dimensions")->capture_default_str();
    sub->add_option("--context", p.window, "Skip-gram context window")->capture_default_str();
    sub->add_option("--negatives", p.negatives)->capture_default_str();
    sub->add_option("--epochs", p.epochs)->capture_default_str();
    sub->add_option("--lr", p.learning_rate, "Initial learning rate")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration-data health analysis for superconducting QPUs"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--topology", g.topology, "Topology JSON (default: built-in 20-qubit layout)");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--format", g.format, "Corpus format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic calibration corpus");
    s_synth->add_option("--scenario", synth.scenario, "Scenario JSON");
    s_synth->add_flag("--default", synth.use_default, "Use the built-in scenario");

    StatsArgs stats;
    auto* s_stats = app.add_subcommand("stats", "Summaries, ACF, instability ranking, histograms");
    s_stats->add_option("--data", stats.data, "Corpus CSV/JSON (default: OUT/corpus.csv)");
    s_stats->add_option("--max-lag", stats.max_lag)->capture_default_str();
    s_stats->add_option("--drop-z", stats.drop_z)->capture_default_str();

    CorrArgs corr;
    auto* s_corr = app.add_subcommand("corr", "Metric-metric dependence of daily means");
    s_corr->add_option("--data", corr.data);
    s_corr->add_option("--method", corr.method)
        ->check(CLI::IsMember({"pearson", "spearman", "dcor", "mi", "all"}))
        ->capture_default_str();
    s_corr->add_option("--window", corr.window, "FROM:TO (required)")->required();

    EmbedArgs embed;
    auto* s_embed = app.add_subcommand("embed", "Node2Vec embedding of the topology");
    add_embedding_options(s_embed, embed.params);

    ClusterArgs cluster;
    auto* s_cluster = app.add_subcommand("cluster", "Cluster qubits on metric + topology features");
    s_cluster->add_option("--data", cluster.data);
    s_cluster->add_option("--method", cluster.method)
        ->check(CLI::IsMember({"kmeans", "gmm", "spectral", "node2vec-kmeans", "all"}))
        ->capture_default_str();
    s_cluster->add_option("--k", cluster.k, "auto or an integer >= 2")->capture_default_str();
    s_cluster->add_option("--window", cluster.window, "FROM:TO (default: whole span)");
    add_embedding_options(s_cluster, cluster.params);

    ReportArgs report;
    auto* s_report = app.add_subcommand("report", "Health scores, flags and recalibration actions");
    s_report->add_option("--data", report.data);
    s_report->add_option("--window", report.window, "FROM:TO (default: whole span)");

    RecommendArgs rec;
    auto* s_rec = app.add_subcommand("recommend", "Rank connected qubit subsets by predicted GHZ fidelity");
    s_rec->add_option("--data", rec.data);
    s_rec->add_option("--window", rec.window);
    s_rec->add_option("--k", rec.k, "Subset size")->capture_default_str();
    s_rec->add_option("--top", rec.top)->capture_default_str();
    s_rec->add_flag("--greedy", rec.greedy, "Greedy growth (required for k > 7)");
    s_rec->add_option("--layout", rec.layout, "path or tree")->capture_default_str();
    s_rec->add_option("--t-gate", rec.t_gate, "CZ layer duration in microseconds")->capture_default_str();

    ValidateArgs val;
    auto* s_val = app.add_subcommand("validate", "GHZ-estimate distributions per cluster");
    s_val->add_option("--data", val.data);
    s_val->add_option("--clusters", val.clusters, "labels.csv (default: OUT/labels.csv)");
    s_val->add_option("--window", val.window);
    s_val->add_option("--k-subset", val.k_subset)->capture_default_str();
    s_val->add_option("--max-samples", val.max_samples)->capture_default_str();
    s_val->add_option("--layout", val.layout, "path or tree")->capture_default_str();

    FitArgs fit;
    auto* s_fit = app.add_subcommand("fit", "Fit a decay curve from an x,y CSV");
    s_fit->add_option("--input", fit.input)->required();
    s_fit->add_option("--model", fit.model, "exp, ramsey or rb")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "qhealth: usage: " << e.what() << "\n";
        return 2;
    }
    g.seed_given = seed_opt->count() > 0;

    try {
        if (*s_synth) cmd_synth(g, synth);
        if (*s_stats) cmd_stats(g, stats);
        if (*s_corr) cmd_corr(g, corr);
        if (*s_embed) cmd_embed(g, embed);
        if (*s_cluster) cmd_cluster(g, cluster);
        if (*s_report) cmd_report(g, report);
        if (*s_rec) cmd_recommend(g, rec);
        if (*s_val) cmd_validate(g, val);
        if (*s_fit) cmd_fit(g, fit);
    } catch (const UsageError& e) {
        std::cerr << "qhealth: usage: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "qhealth: data: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "qhealth: numerical: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "qhealth: data: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
