#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qhealth {

using Edge = std::pair<int, int>;

/// Simple undirected connectivity graph of a QPU: qubits are nodes, tunable
/// couplers are edges. Edges are stored with a < b in ascending order.
class DeviceTopology {
public:
    DeviceTopology() = default;
    /// Throws DataError on self-loops, duplicate edges or out-of-range nodes.
    DeviceTopology(std::string name, int n_qubits, std::vector<Edge> edges);

    const std::string& name() const noexcept { return name_; }
    int n_qubits() const noexcept { return n_qubits_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t n_edges() const noexcept { return edges_.size(); }
    const std::vector<int>& neighbors(int v) const { return adjacency_.at(static_cast<std::size_t>(v)); }
    int degree(int v) const { return static_cast<int>(neighbors(v).size()); }

    bool has_edge(int x, int y) const noexcept;
    /// Position of the edge in edges(), or -1.
    int edge_index(int x, int y) const noexcept;
    bool is_connected() const;
    /// True when the subgraph induced by `nodes` is connected (empty set: false).
    bool is_connected_subset(const std::vector<int>& nodes) const;

    std::string to_json() const;

private:
    std::string name_;
    int n_qubits_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_;
};

/// The shipped 20-qubit, 30-coupler square-lattice layout.
DeviceTopology default_topology();

/// `{"name": str, "n_qubits": int, "edges": [[a,b], ...]}`.
DeviceTopology parse_topology(std::string_view json_text, bool require_connected = true);
DeviceTopology load_topology(const std::filesystem::path& path, bool require_connected = true);

}  // namespace qhealth
