#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "overlap/sim.hpp"

using namespace overlap;

namespace {

Timeline one_event(double start, double end) {
    Timeline t;
    t.events.push_back({EventKind::TileCompute, 0, 0, start, end, ""});
    return t;
}

double end_of(const Timeline& t, EventKind kind, int rank, const std::string& name) {
    double e = -1;
    for (const SimEvent& ev : t.events)
        if (ev.kind == kind && ev.rank == rank && ev.name == name) e = std::max(e, ev.end_us);
    REQUIRE(e >= 0);
    return e;
}

double start_of(const Timeline& t, EventKind kind, int rank, const std::string& name) {
    double s = -1;
    for (const SimEvent& ev : t.events)
        if (ev.kind == kind && ev.rank == rank && ev.name == name) {
            REQUIRE(s < 0);  // unique
            s = ev.start_us;
        }
    REQUIRE(s >= 0);
    return s;
}

}  // namespace

TEST_CASE("strategy and event-kind names round-trip") {
    for (Strategy s : {Strategy::Coarse, Strategy::Medium, Strategy::Fine})
        CHECK(strategy_from_string(to_string(s)) == s);
    CHECK(to_string(Strategy::Fine) == "Fine");
    CHECK_THROWS_AS(strategy_from_string("fine"), ConfigError);
    CHECK(to_string(EventKind::TileCompute) == "tile_compute");
    CHECK(to_string(EventKind::KernelLaunch) == "kernel_launch");
}

TEST_CASE("split efficiency is one at full size and floored below") {
    SplitEfficiency se;  // exponent 0.15, floor 0.5
    CHECK(se(1.0) == doctest::Approx(1.0));
    CHECK(se(0.5) == doctest::Approx(std::pow(0.5, 0.15)));
    CHECK(se(1e-6) == doctest::Approx(0.5));  // hits the floor
    CHECK(se(0.25) <= se(0.5));
}

TEST_CASE("non-split gemm time examples") {
    MachineModel mach;
    mach.flops_per_us = 1;
    mach.launch_overhead_us = 0;
    mach.sm_count = 4;
    SUBCASE("single tile") {
        // One 2x2 tile with k=2: 2*2*2*2 = 16 flops at rate 1 -> 16 us.
        ProblemSpec p{2, 2, 2, 1, Pattern::GemmReduceScatter};
        CHECK(gemm_nonsplit_time(p, {2, 2}, mach) == doctest::Approx(16.0));
    }
    SUBCASE("eight tiles over four slots take two waves") {
        ProblemSpec p{8, 4, 2, 1, Pattern::GemmReduceScatter};
        const double tile_us = 2.0 * 2 * 2 * 2;  // 16
        CHECK(gemm_nonsplit_time(p, {2, 2}, mach) == doctest::Approx(2 * tile_us));
    }
    SUBCASE("seven tiles over four slots still take two waves") {
        ProblemSpec p{14, 2, 2, 1, Pattern::GemmReduceScatter};
        mach.launch_overhead_us = 5;
        CHECK(gemm_nonsplit_time(p, {2, 2}, mach) == doctest::Approx(5 + 2 * 16.0));
    }
}

TEST_CASE("metrics identities on hand-built timelines") {
    // Machine tuned so the non-split gemm time is exactly 7 us: one 2x2 tile,
    // 16 flops at 8 flops/us (2 us) plus 5 us launch overhead.
    ProblemSpec p{2, 2, 2, 1, Pattern::AllGatherGemm};
    MachineModel mach;
    mach.flops_per_us = 8;
    mach.launch_overhead_us = 5;
    REQUIRE(gemm_nonsplit_time(p, {2, 2}, mach) == doctest::Approx(7.0));

    SUBCASE("exposed time is overall minus the non-split gemm") {
        Metrics m = metrics(one_event(0, 10), one_event(0, 13), p, {2, 2}, mach);
        CHECK(m.overall_us == doctest::Approx(10.0));
        CHECK(m.ect_us == doctest::Approx(3.0));
        CHECK(m.overlap_efficiency == doctest::Approx(1.0 - 3.0 / 6.0));
    }
    SUBCASE("perfect overlap scores one") {
        Metrics m = metrics(one_event(0, 7), one_event(0, 13), p, {2, 2}, mach);
        CHECK(m.ect_us == doctest::Approx(0.0));
        CHECK(m.overlap_efficiency == doctest::Approx(1.0));
    }
    SUBCASE("matching the baseline scores zero") {
        Metrics m = metrics(one_event(0, 13), one_event(0, 13), p, {2, 2}, mach);
        CHECK(m.overlap_efficiency == doctest::Approx(0.0));
    }
    SUBCASE("zero-exposure baseline guards the division") {
        Metrics m = metrics(one_event(0, 9), one_event(0, 7), p, {2, 2}, mach);
        CHECK(m.overlap_efficiency == 0.0);
    }
    SUBCASE("timelines are measured from their earliest event") {
        Metrics m = metrics(one_event(5, 15), one_event(0, 13), p, {2, 2}, mach);
        CHECK(m.overall_us == doctest::Approx(10.0));
    }
}

TEST_CASE("all strategies collapse to the bare gemm at tp=1") {
    MachineModel mach;
    for (Pattern pat : {Pattern::AllGatherGemm, Pattern::GemmReduceScatter}) {
        ProblemSpec p{32, 32, 32, 1, pat};
        const double base = gemm_nonsplit_time(p, {8, 8}, mach);
        for (Strategy s : {Strategy::Coarse, Strategy::Fine}) {
            Timeline t = simulate(s, p, {8, 8}, mach, SwizzleKind::Naive, 0, TransferMode::Pull);
            CHECK(t.overall_us() == doctest::Approx(base).epsilon(1e-12));
        }
        if (pat == Pattern::AllGatherGemm) {
            // No transfer or add steps remain, so Medium matches too.
            Timeline t =
                simulate(Strategy::Medium, p, {8, 8}, mach, SwizzleKind::Naive, 0,
                         TransferMode::Pull);
            CHECK(t.overall_us() == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("coarse timelines match the closed-form schedule") {
    MachineModel mach;
    const TileShape tile{64, 64};
    SUBCASE("all-gather: ring first, then the full gemm") {
        ProblemSpec p{4096, 2048, 2048, 4, Pattern::AllGatherGemm};
        const double step = mach.link_latency_us +
                            1024.0 * 2048 * mach.bytes_per_element / mach.link_bw_bytes_per_us;
        const double expect =
            mach.launch_overhead_us + 3 * step + gemm_nonsplit_time(p, tile, mach);
        Timeline t =
            simulate(Strategy::Coarse, p, tile, mach, SwizzleKind::Naive, 0, TransferMode::Pull);
        CHECK(t.overall_us() == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("reduce-scatter: gemm first, then the ring") {
        ProblemSpec p{4096, 2048, 2048, 4, Pattern::GemmReduceScatter};
        const double step = mach.link_latency_us +
                            1024.0 * 2048 * mach.bytes_per_element / mach.link_bw_bytes_per_us;
        const double expect =
            gemm_nonsplit_time(p, tile, mach) + mach.launch_overhead_us + 3 * step;
        Timeline t =
            simulate(Strategy::Coarse, p, tile, mach, SwizzleKind::Naive, 0, TransferMode::Pull);
        CHECK(t.overall_us() == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("fine overlap hides all communication at infinite bandwidth") {
    ProblemSpec p{256, 256, 256, 4, Pattern::AllGatherGemm};
    MachineModel mach;
    mach.link_bw_bytes_per_us = 1e12;
    Timeline t = simulate(Strategy::Fine, p, {64, 64}, mach, SwizzleKind::ArrivalAligned, 64,
                          TransferMode::Pull);
    CHECK(t.overall_us() == doctest::Approx(gemm_nonsplit_time(p, {64, 64}, mach)));
}

TEST_CASE("overall time never beats the compute and wire lower bounds") {
    MachineModel mach;
    const TileShape tile{64, 64};
    for (Pattern pat : {Pattern::AllGatherGemm, Pattern::GemmReduceScatter}) {
        ProblemSpec p{4096, 2048, 2048, 4, pat};
        // Every rank must move tp-1 row blocks over its own link.
        const double block_bytes = static_cast<double>(p.rows_per_rank()) *
                                   (pat == Pattern::AllGatherGemm ? p.k : p.n) *
                                   mach.bytes_per_element;
        const double wire = 3 * block_bytes / mach.link_bw_bytes_per_us;
        const double compute = gemm_nonsplit_time(p, tile, mach);
        for (Strategy s : {Strategy::Coarse, Strategy::Medium, Strategy::Fine}) {
            Timeline t = simulate(s, p, tile, mach, SwizzleKind::RankShifted, 0,
                                  TransferMode::Pull);
            CHECK(t.overall_us() >= compute - 1e-9);
            CHECK(t.overall_us() >= wire - 1e-9);
        }
    }
}

TEST_CASE("fine beats medium beats coarse on the reference machine at large m") {
    MachineModel mach;
    const TileShape tile{64, 64};
    for (Pattern pat : {Pattern::AllGatherGemm, Pattern::GemmReduceScatter}) {
        ProblemSpec p{4096, 2048, 2048, 4, pat};
        const double coarse =
            simulate(Strategy::Coarse, p, tile, mach, SwizzleKind::Naive, 0, TransferMode::Pull)
                .overall_us();
        const double medium =
            simulate(Strategy::Medium, p, tile, mach, SwizzleKind::Naive, 0, TransferMode::Pull)
                .overall_us();
        const double fine = simulate(Strategy::Fine, p, tile, mach, SwizzleKind::RankShifted, 0,
                                     TransferMode::Pull)
                                .overall_us();
        CHECK(fine < medium);
        CHECK(medium < coarse);
    }
}

TEST_CASE("fine overlap is worth the trouble even at small m on reduce-scatter") {
    // At small sizes chunked overlap loses to the bulk schedule (split kernels
    // pay the efficiency penalty and extra launches) while tile-granular
    // overlap still wins.
    ProblemSpec p{256, 256, 256, 4, Pattern::GemmReduceScatter};
    MachineModel mach;
    const TileShape tile{64, 64};
    Timeline coarse =
        simulate(Strategy::Coarse, p, tile, mach, SwizzleKind::Naive, 0, TransferMode::Pull);
    Timeline medium =
        simulate(Strategy::Medium, p, tile, mach, SwizzleKind::Naive, 0, TransferMode::Pull);
    Timeline fine = simulate(Strategy::Fine, p, tile, mach, SwizzleKind::RankShifted, 0,
                             TransferMode::Pull);
    Metrics mm = metrics(medium, coarse, p, tile, mach);
    Metrics mf = metrics(fine, coarse, p, tile, mach);
    CHECK(mm.overlap_efficiency < 0.0);
    CHECK(mf.overlap_efficiency > 0.0);
}

TEST_CASE("rank-shifted writes drain faster than naive under reduce-scatter") {
    MachineModel mach;
    SUBCASE("reference machine, large m") {
        ProblemSpec p{4096, 2048, 2048, 4, Pattern::GemmReduceScatter};
        const double naive = simulate(Strategy::Fine, p, {64, 64}, mach, SwizzleKind::Naive, 0,
                                      TransferMode::Pull)
                                 .overall_us();
        const double shifted = simulate(Strategy::Fine, p, {64, 64}, mach,
                                        SwizzleKind::RankShifted, 0, TransferMode::Pull)
                                   .overall_us();
        CHECK(shifted < naive);
    }
    SUBCASE("slow link") {
        ProblemSpec p{1024, 512, 512, 4, Pattern::GemmReduceScatter};
        mach.link_bw_bytes_per_us = 50;
        const double naive = simulate(Strategy::Fine, p, {64, 64}, mach, SwizzleKind::Naive, 0,
                                      TransferMode::Pull)
                                 .overall_us();
        const double shifted = simulate(Strategy::Fine, p, {64, 64}, mach,
                                        SwizzleKind::RankShifted, 0, TransferMode::Pull)
                                   .overall_us();
        CHECK(shifted < naive);
    }
}

TEST_CASE("fine all-gather time is non-increasing in link bandwidth") {
    ProblemSpec p{1024, 512, 512, 4, Pattern::AllGatherGemm};
    double prev = 1e300;
    for (double bw : {50.0, 100.0, 200.0, 400.0, 800.0, 1600.0}) {
        MachineModel mach;
        mach.link_bw_bytes_per_us = bw;
        const double t = simulate(Strategy::Fine, p, {64, 64}, mach, SwizzleKind::ArrivalAligned,
                                  64, TransferMode::Pull)
                             .overall_us();
        CHECK(t <= prev + 1e-9);
        prev = t;
    }
}

TEST_CASE("medium reduce-scatter serializes chunk gemms behind the previous add") {
    ProblemSpec p{64, 64, 64, 2, Pattern::GemmReduceScatter};
    MachineModel mach;
    Timeline t = simulate(Strategy::Medium, p, {8, 8}, mach, SwizzleKind::Naive, 0,
                          TransferMode::Pull);
    for (int r = 0; r < 2; ++r) {
        const double add0 = end_of(t, EventKind::Reduce, r, "chunk add 0");
        // Next chunk's gemm and transfer both wait for the previous add; the
        // transfer then rides the wire while the gemm computes.
        CHECK(start_of(t, EventKind::TileCompute, r, "chunk gemm 1") >= add0 - 1e-9);
        CHECK(start_of(t, EventKind::Transfer, r, "chunk 1") >= add0 - 1e-9);
        const double gemm1_start = start_of(t, EventKind::TileCompute, r, "chunk gemm 1");
        const double xfer1_end = end_of(t, EventKind::Transfer, r, "chunk 1");
        CHECK(gemm1_start < xfer1_end);  // overlap, not serialization
        CHECK(start_of(t, EventKind::Reduce, r, "chunk add 1") >=
              std::max(end_of(t, EventKind::TileCompute, r, "chunk gemm 1"), xfer1_end) - 1e-9);
    }
}

TEST_CASE("identical inputs produce bitwise-identical timelines") {
    MachineModel mach;
    for (Pattern pat : {Pattern::AllGatherGemm, Pattern::GemmReduceScatter}) {
        ProblemSpec p{512, 256, 256, 4, pat};
        for (Strategy s : {Strategy::Coarse, Strategy::Medium, Strategy::Fine}) {
            Timeline a = simulate(s, p, {64, 64}, mach, SwizzleKind::RankShifted, 64,
                                  TransferMode::Pull);
            Timeline b = simulate(s, p, {64, 64}, mach, SwizzleKind::RankShifted, 64,
                                  TransferMode::Pull);
            REQUIRE(a.events.size() == b.events.size());
            for (size_t i = 0; i < a.events.size(); ++i) {
                CHECK(a.events[i].kind == b.events[i].kind);
                CHECK(a.events[i].rank == b.events[i].rank);
                CHECK(a.events[i].lane == b.events[i].lane);
                CHECK(a.events[i].start_us == b.events[i].start_us);
                CHECK(a.events[i].end_us == b.events[i].end_us);
                CHECK(a.events[i].name == b.events[i].name);
            }
        }
    }
}

TEST_CASE("simulate validates its inputs") {
    ProblemSpec p{64, 64, 64, 4, Pattern::AllGatherGemm};
    MachineModel mach;
    SUBCASE("rows_per_comm_tile must divide the row block") {
        CHECK_THROWS_AS(
            simulate(Strategy::Fine, p, {8, 8}, mach, SwizzleKind::Naive, 3, TransferMode::Pull),
            ConfigError);
    }
    SUBCASE("machine parameters must be positive") {
        mach.flops_per_us = 0;
        CHECK_THROWS_AS(
            simulate(Strategy::Fine, p, {8, 8}, mach, SwizzleKind::Naive, 0, TransferMode::Pull),
            ConfigError);
    }
    SUBCASE("medium partition count is constrained") {
        SimOptions opts;
        opts.medium_partitions = 3;
        CHECK_THROWS_AS(simulate(Strategy::Medium, p, {8, 8}, mach, SwizzleKind::Naive, 0,
                                 TransferMode::Pull, opts),
                        ConfigError);
    }
}

TEST_CASE("metrics csv layout is stable") {
    CHECK(metrics_csv_header() ==
          "strategy,pattern,m,n,k,tp,overall_us,gemm_us,ect_us,efficiency");
    ProblemSpec p{16, 16, 16, 4, Pattern::AllGatherGemm};
    Metrics m;
    m.overall_us = 10;
    m.gemm_nonsplit_us = 7;
    m.ect_us = 3;
    m.overlap_efficiency = 0.5;
    const std::string row = metrics_csv_row("Fine", p, m);
    CHECK(row.rfind("Fine,AllGatherGemm,16,16,16,4,", 0) == 0);
    CHECK(row.find("0.500000") != std::string::npos);
}
