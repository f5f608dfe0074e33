#pragma once

#include <string>
#include <vector>

#include "overlap/errors.hpp"

namespace overlap {

enum class TopologyKind { NVLinkRing, PcieNuma, MultiNode };

std::string to_string(TopologyKind k);
TopologyKind topology_kind_from_string(const std::string& s);

struct Topology {
    TopologyKind kind = TopologyKind::NVLinkRing;
    int ranks_per_numa = 0;  // PcieNuma
    int ranks_per_node = 0;  // MultiNode

    void validate(int tp) const;
};

enum class LinkClass { IntraNuma, InterNuma, InterNode, Forward };

// One host-side copy: a contiguous global row range moved between a shard
// buffer and an aggregation buffer.
struct TransferDesc {
    int peer = -1;       // source rank (pull) or destination rank (push)
    int row_begin = 0;   // global row index
    int rows = 0;
    LinkClass link = LinkClass::IntraNuma;
    // Forwarding gate: the transfer (dep_rank, dep_index) must complete first.
    int dep_rank = -1;
    int dep_index = -1;
};

// Topology-aware host transfer order for one rank (pull orientation: peers are
// sources, descriptors cover every non-local comm tile exactly once).
//
// NVLinkRing: direct copies, ring order starting after the local rank.
// PcieNuma:   inter-NUMA (intra-node) descriptors first, then intra-NUMA.
//             With `ring_forwarding` (simulator flavor) the intra-NUMA part is a
//             neighbor-forwarding chain gated on the neighbor's own receive.
// MultiNode:  inter-node descriptors (counterpart rank on each remote node)
//             interleaved with local intra-node ones; the remaining remote
//             shards arrive as forwarding descriptors gated on the node-mate's
//             inter-node receive.
std::vector<TransferDesc> comm_order(const Topology& topology, int rank, int tp,
                                     int rows_per_rank, int rows_per_comm_tile,
                                     bool ring_forwarding = false);

// Peer visit order implied by the descriptor list (first descriptor touching
// each rank's block, local rank excluded).
std::vector<int> peer_order(const std::vector<TransferDesc>& order, int rank, int rows_per_rank);

}  // namespace overlap
