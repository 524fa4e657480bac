#include "qhealth/topology.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "qhealth/common.hpp"

namespace qhealth {

DeviceTopology::DeviceTopology(std::string name, int n_qubits, std::vector<Edge> edges)
    : name_(std::move(name)), n_qubits_(n_qubits) {
    if (n_qubits < 1) throw DataError("topology needs at least one qubit");
    for (auto [x, y] : edges) {
        if (x == y) throw DataError("self-loop on node " + std::to_string(x));
        if (x < 0 || y < 0 || x >= n_qubits || y >= n_qubits)
            throw DataError("edge (" + std::to_string(x) + "," + std::to_string(y) +
                            ") references a node outside [0," + std::to_string(n_qubits) + ")");
        edges_.emplace_back(std::min(x, y), std::max(x, y));
    }
    std::sort(edges_.begin(), edges_.end());
    if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end())
        throw DataError("duplicate edge (" + std::to_string(dup->first) + "," +
                        std::to_string(dup->second) + ")");
    adjacency_.resize(static_cast<std::size_t>(n_qubits));
    for (auto [x, y] : edges_) {
        adjacency_[static_cast<std::size_t>(x)].push_back(y);
        adjacency_[static_cast<std::size_t>(y)].push_back(x);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

bool DeviceTopology::has_edge(int x, int y) const noexcept { return edge_index(x, y) >= 0; }

int DeviceTopology::edge_index(int x, int y) const noexcept {
    const Edge e{std::min(x, y), std::max(x, y)};
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
    if (it == edges_.end() || *it != e) return -1;
    return static_cast<int>(it - edges_.begin());
}

bool DeviceTopology::is_connected() const {
    std::vector<int> all(static_cast<std::size_t>(n_qubits_));
    for (int i = 0; i < n_qubits_; ++i) all[static_cast<std::size_t>(i)] = i;
    return is_connected_subset(all);
}

bool DeviceTopology::is_connected_subset(const std::vector<int>& nodes) const {
    if (nodes.empty()) return false;
    std::vector<char> member(static_cast<std::size_t>(n_qubits_), 0);
    for (int v : nodes) {
        if (v < 0 || v >= n_qubits_) return false;
        member[static_cast<std::size_t>(v)] = 1;
    }
    std::vector<char> seen(static_cast<std::size_t>(n_qubits_), 0);
    std::queue<int> frontier;
    frontier.push(nodes.front());
    seen[static_cast<std::size_t>(nodes.front())] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int w : neighbors(v)) {
            const auto wi = static_cast<std::size_t>(w);
            if (member[wi] && !seen[wi]) {
                seen[wi] = 1;
                ++reached;
                frontier.push(w);
            }
        }
    }
    std::size_t distinct = 0;
    for (char m : member) distinct += m ? 1 : 0;
    return reached == distinct;
}

std::string DeviceTopology::to_json() const {
    nlohmann::ordered_json doc;
    doc["name"] = name_;
    doc["n_qubits"] = n_qubits_;
    doc["edges"] = nlohmann::ordered_json::array();
    for (auto [x, y] : edges_) doc["edges"].push_back({x, y});
    return doc.dump(1);
}

DeviceTopology default_topology() {
    // Rotated square lattice; the same adjacency ships as data/default_topology.json.
    return DeviceTopology("square20", 20,
                          {{0, 1},   {0, 3},   {1, 4},   {2, 3},   {2, 7},   {3, 4},
                           {3, 8},   {4, 5},   {4, 9},   {5, 6},   {5, 10},  {6, 11},
                           {7, 8},   {7, 12},  {8, 9},   {8, 13},  {9, 10},  {9, 14},
                           {10, 11}, {10, 15}, {11, 16}, {12, 13}, {13, 14}, {13, 17},
                           {14, 15}, {14, 18}, {15, 16}, {15, 19}, {17, 18}, {18, 19}});
}

DeviceTopology parse_topology(std::string_view json_text, bool require_connected) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("topology: ") + e.what());
    }
    std::string name;
    int n = 0;
    std::vector<Edge> edges;
    try {
        name = doc.at("name").get<std::string>();
        n = doc.at("n_qubits").get<int>();
        for (const auto& e : doc.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw DataError("edge must be a pair [a,b]");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("topology: ") + e.what());
    }
    DeviceTopology g(std::move(name), n, std::move(edges));
    if (require_connected && !g.is_connected())
        throw DataError("topology '" + g.name() + "' is not connected");
    return g;
}

DeviceTopology load_topology(const std::filesystem::path& path, bool require_connected) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open topology " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_topology(buf.str(), require_connected);
}

}  // namespace qhealth
