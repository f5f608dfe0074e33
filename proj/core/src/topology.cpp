#include "overlap/topology.hpp"

#include <algorithm>

namespace overlap {

std::string to_string(TopologyKind k) {
    switch (k) {
        case TopologyKind::NVLinkRing: return "NVLinkRing";
        case TopologyKind::PcieNuma: return "PcieNuma";
        case TopologyKind::MultiNode: return "MultiNode";
    }
    return "?";
}

TopologyKind topology_kind_from_string(const std::string& s) {
    if (s == "NVLinkRing") return TopologyKind::NVLinkRing;
    if (s == "PcieNuma") return TopologyKind::PcieNuma;
    if (s == "MultiNode") return TopologyKind::MultiNode;
    throw ConfigError("unknown topology kind: '" + s + "'");
}

void Topology::validate(int tp) const {
    if (kind == TopologyKind::PcieNuma) {
        if (ranks_per_numa <= 0 || tp % ranks_per_numa != 0)
            throw ConfigError("ranks_per_numa=" + std::to_string(ranks_per_numa) +
                              " must be positive and divide tp=" + std::to_string(tp));
    }
    if (kind == TopologyKind::MultiNode) {
        if (ranks_per_node <= 0 || tp % ranks_per_node != 0)
            throw ConfigError("ranks_per_node=" + std::to_string(ranks_per_node) +
                              " must be positive and divide tp=" + std::to_string(tp));
    }
}

namespace {

void append_block(std::vector<TransferDesc>& out, int peer, int rows_per_rank,
                  int rows_per_comm_tile, LinkClass link) {
    for (int off = 0; off < rows_per_rank; off += rows_per_comm_tile)
        out.push_back({peer, peer * rows_per_rank + off, rows_per_comm_tile, link, -1, -1});
}

// Direct (non-forwarding) part of a rank's transfer order; layout is identical
// for every rank so forwarding gates can be located by row range.
std::vector<TransferDesc> direct_layout(const Topology& topo, int rank, int tp, int rows_per_rank,
                                        int rpct) {
    std::vector<TransferDesc> out;
    switch (topo.kind) {
        case TopologyKind::NVLinkRing: {
            // Ring order starting after the local rank.
            for (int d = 1; d < tp; ++d)
                append_block(out, (rank + d) % tp, rows_per_rank, rpct, LinkClass::IntraNuma);
            break;
        }
        case TopologyKind::PcieNuma: {
            const int g = topo.ranks_per_numa;
            const int my_numa = rank / g;
            // Inter-NUMA first, then intra-NUMA, each in ring order.
            for (int d = 1; d < tp; ++d) {
                int p = (rank + d) % tp;
                if (p / g != my_numa) append_block(out, p, rows_per_rank, rpct, LinkClass::InterNuma);
            }
            for (int d = 1; d < tp; ++d) {
                int p = (rank + d) % tp;
                if (p / g == my_numa) append_block(out, p, rows_per_rank, rpct, LinkClass::IntraNuma);
            }
            break;
        }
        case TopologyKind::MultiNode: {
            const int rpn = topo.ranks_per_node;
            const int nn = tp / rpn;
            const int node = rank / rpn;
            const int li = rank % rpn;
            // Inter-node counterparts issued alongside local intra-node copies.
            const int steps = std::max(rpn - 1, nn - 1);
            for (int s = 0; s < steps; ++s) {
                if (s < rpn - 1) {
                    int mate = node * rpn + (li + s + 1) % rpn;
                    append_block(out, mate, rows_per_rank, rpct, LinkClass::IntraNuma);
                }
                if (s < nn - 1) {
                    int counterpart = ((node + s + 1) % nn) * rpn + li;
                    append_block(out, counterpart, rows_per_rank, rpct, LinkClass::InterNode);
                }
            }
            break;
        }
    }
    return out;
}

int find_desc(const std::vector<TransferDesc>& list, int row_begin) {
    for (size_t i = 0; i < list.size(); ++i)
        if (list[i].row_begin == row_begin && list[i].link != LinkClass::Forward)
            return static_cast<int>(i);
    throw ConfigError("internal: forwarding gate not found in peer layout");
}

}  // namespace

std::vector<TransferDesc> comm_order(const Topology& topology, int rank, int tp, int rows_per_rank,
                                     int rows_per_comm_tile, bool ring_forwarding) {
    if (rank < 0 || rank >= tp) throw ConfigError("rank " + std::to_string(rank) + " >= tp");
    topology.validate(tp);
    if (rows_per_comm_tile <= 0 || rows_per_rank % rows_per_comm_tile != 0)
        throw ConfigError("rows_per_comm_tile=" + std::to_string(rows_per_comm_tile) +
                          " must divide rows_per_rank=" + std::to_string(rows_per_rank));

    const int rpct = rows_per_comm_tile;

    if (topology.kind == TopologyKind::MultiNode) {
        // Direct part plus intra-node forwarding of inter-node tiles: a
        // node-mate receives its counterpart's shard and passes it on.
        std::vector<TransferDesc> out = direct_layout(topology, rank, tp, rows_per_rank, rpct);
        const int rpn = topology.ranks_per_node;
        const int nn = tp / rpn;
        const int node = rank / rpn;
        const int li = rank % rpn;
        for (int dn = 1; dn < nn; ++dn) {
            const int remote_node = (node + dn) % nn;
            for (int dm = 1; dm < rpn; ++dm) {
                const int mate = node * rpn + (li + dm) % rpn;
                const int origin = remote_node * rpn + mate % rpn;  // shard forwarded via mate
                std::vector<TransferDesc> mate_layout =
                    direct_layout(topology, mate, tp, rows_per_rank, rpct);
                for (int off = 0; off < rows_per_rank; off += rpct) {
                    const int row = origin * rows_per_rank + off;
                    out.push_back({mate, row, rpct, LinkClass::Forward, mate,
                                   find_desc(mate_layout, row)});
                }
            }
        }
        return out;
    }

    if (topology.kind == TopologyKind::PcieNuma && ring_forwarding) {
        // Simulator flavor: intra-NUMA shards travel a neighbor ring; only the
        // successor's shard is copied directly.
        const int g = topology.ranks_per_numa;
        const int my_numa = rank / g;
        std::vector<TransferDesc> out;
        for (int d = 1; d < tp; ++d) {
            int p = (rank + d) % tp;
            if (p / g != my_numa) append_block(out, p, rows_per_rank, rpct, LinkClass::InterNuma);
        }
        const int inter_count = static_cast<int>(out.size());
        const int ct = rows_per_rank / rpct;
        const int succ = my_numa * g + (rank % g + 1) % g;
        for (int j = 1; j < g; ++j) {
            const int q = my_numa * g + (rank % g + j) % g;
            for (int t = 0; t < ct; ++t) {
                const int row = q * rows_per_rank + t * rpct;
                if (j == 1) {
                    out.push_back({q, row, rpct, LinkClass::IntraNuma, -1, -1});
                } else {
                    // Successor receives q's shard at position inter_count + (j-2)*ct + t
                    // of its own (identically shaped) list.
                    out.push_back({succ, row, rpct, LinkClass::Forward, succ,
                                   inter_count + (j - 2) * ct + t});
                }
            }
        }
        return out;
    }

    return direct_layout(topology, rank, tp, rows_per_rank, rpct);
}

std::vector<int> peer_order(const std::vector<TransferDesc>& order, int rank, int rows_per_rank) {
    std::vector<int> seq;
    for (const TransferDesc& d : order) {
        int block = d.row_begin / rows_per_rank;
        if (block == rank) continue;
        if (std::find(seq.begin(), seq.end(), block) == seq.end()) seq.push_back(block);
    }
    return seq;
}

}  // namespace overlap
