#include <catch2/catch_amalgamated.hpp>

#include "nhlp/lattice.hpp"

using namespace nhlp;

namespace {

struct Built {
    DiscreteMeasure mu;
    MeasureIndex idx;
    DeltaEngine eng;
    Built(DiscreteMeasure m) : mu(std::move(m)), idx(mu), eng(mu, idx) {}
};

}  // namespace

TEST_CASE("two-atom classification oracle") {
    DiscreteMeasure mu;
    mu.dim = 1;
    mu.n = 1;
    mu.resolution = 0.5;
    mu.label = "pair";
    mu.points = {{0, 0}, {1, 0}};
    mu.weights = {1, 1};
    Built b(std::move(mu));

    // each atom sees exactly the other at distance 1, so delta to the whole
    // space is 1 for both
    CHECK(b.eng.point_delta_to_whole(0) == Catch::Approx(1.0));
    CHECK(b.eng.point_delta_to_whole(1) == Catch::Approx(1.0));

    LatticeConfig cfg;
    cfg.sigma = 0.01;
    cfg.apply_chain();
    REQUIRE(cfg.A == Catch::Approx(0.64));
    auto lat = build_lattice(b.mu, b.eng, cfg);

    CHECK(lat.k_min == -1);
    CHECK(lat.at(0, -1).cls == CubeClass::Initial);
    CHECK(lat.at(0, 0).cls == CubeClass::Initial);
    CHECK(lat.at(0, 0).Q.is_whole());

    // k=1: target 0.64 < 1, transit. The only delta levels available are
    // 1 (cube missing the neighbour) and 0 (cube holding it); 1 is closer.
    const auto& e0 = lat.at(0, 1);
    REQUIRE(e0.cls == CubeClass::Transit);
    REQUIRE(e0.Q.is_standard());
    CHECK(e0.achieved_delta == Catch::Approx(1.0));
    CHECK(e0.deviation == Catch::Approx(0.36));
    CHECK(e0.Q.len() < 2.0);  // must not swallow the neighbour

    // k=2: target 1.28 > 1, everything stops
    REQUIRE(lat.k_max == 2);
    CHECK(lat.at(0, 2).cls == CubeClass::Stopping);
    CHECK(lat.at(1, 2).cls == CubeClass::Stopping);
    CHECK(lat.at(0, 2).Q.is_point());
    CHECK(lat.stopped_fraction(2) == 1.0);
    CHECK(lat.stopped_fraction(1) == 0.0);
}

TEST_CASE("uniform interval degenerates to a single stopping generation") {
    Built b(gen_uniform_interval(500));
    Rng rng(7);
    LatticeConfig cfg = auto_config(b.mu, b.eng, rng);
    CHECK(cfg.ordered());
    CHECK(cfg.sigma_formula > cfg.sigma);  // formula value is far above the measured one

    auto lat = build_lattice(b.mu, b.eng, cfg);
    // total delta budget of a near-uniform density-2 interval is ~2 ln N,
    // an order of magnitude below one generation step A
    CHECK(lat.k_max == 1);
    CHECK(lat.stopped_fraction(1) == 1.0);
    for (std::size_t i = 0; i < lat.points(); ++i) {
        CHECK(lat.at(i, 1).cls == CubeClass::Stopping);
        CHECK(lat.at(i, 1).Q.is_point());
    }
    CHECK(verify_nesting(lat).pass);
}

TEST_CASE("deep comb builds several healthy generations") {
    Built b(gen_comb(570, 1, 0.30));
    REQUIRE(b.mu.size() == 570);
    Rng rng(11);
    LatticeConfig cfg = auto_config(b.mu, b.eng, rng);
    auto lat = tune_lattice(b.mu, b.eng, cfg, rng);
    INFO("sigma=" << lat.cfg.sigma << " A=" << lat.cfg.A << " k_max=" << lat.k_max
                  << " rounds=" << lat.cfg.tuning_rounds_used);
    REQUIRE(lat.k_max >= 3);

    // transit targets hit within the lattice step granularity
    std::size_t transit = 0;
    for (int k = 1; k <= lat.k_max; ++k)
        for (std::size_t i = 0; i < lat.points(); ++i) {
            const auto& e = lat.at(i, k);
            if (e.cls != CubeClass::Transit) continue;
            ++transit;
            double dev_budget = std::max(2 * lat.cfg.eps1, lat.cfg.sigma);
            CHECK(e.achieved_delta == Catch::Approx(double(k) * lat.cfg.A).margin(dev_budget));
            CHECK(e.deviation <= dev_budget);
            // sides shrink strictly down the generations
            const auto& p = lat.at(i, k - 1);
            if (p.Q.is_standard()) CHECK(e.Q.len() < p.Q.len());
        }
    REQUIRE(transit > lat.points());  // several live generations

    // stopping persists once entered
    for (std::size_t i = 0; i < lat.points(); ++i) {
        bool stopped = false;
        for (int k = 1; k <= lat.k_max; ++k) {
            auto c = lat.at(i, k).cls;
            if (stopped) CHECK(c == CubeClass::Stopping);
            if (c == CubeClass::Stopping) stopped = true;
        }
    }

    auto nest = verify_nesting(lat);
    INFO(nest.to_json().dump(2));
    CHECK(nest.pass);

    Rng r2(13);
    auto regu = verify_regularity(lat, r2, 10000);
    INFO(regu.report.to_json().dump(2));
    CHECK(regu.report.pass);
    if (!std::isnan(regu.eta_hat)) CHECK(regu.eta_hat > 0);

    auto j = lattice_to_json(lat);
    CHECK(j["entries"].size() == lat.points() * std::size_t(lat.k_max - lat.k_min + 1));
    CHECK(j["config"]["A"].get<double>() == lat.cfg.A);
}

TEST_CASE("aux cube deltas follow the target ladder on the comb") {
    Built b(gen_comb(300, 1, 0.30));
    Rng rng(3);
    LatticeConfig cfg = auto_config(b.mu, b.eng, rng);
    auto lat = tune_lattice(b.mu, b.eng, cfg, rng);
    std::size_t checked = 0;
    for (int k = 1; k <= lat.k_max; ++k)
        for (std::size_t i = 0; i < lat.points(); ++i) {
            const auto& e = lat.at(i, k);
            if (e.cls != CubeClass::Transit) continue;
            if (!e.aux.Q1.is_standard() || !e.aux.Q3.is_standard()) continue;
            ++checked;
            // achieved offsets ordered like the targets (up to search noise)
            auto g = [&](const char* n) { return e.aux.achieved.at(n); };
            double tol = lat.cfg.sigma;
            CHECK(g("Q1") <= g("Q2") + tol);
            CHECK(g("Q2") <= g("Q3") + tol);
            CHECK(e.aux.Q1.len() <= e.aux.Q2.len());
            CHECK(e.aux.Q2.len() <= e.aux.Q3.len());
        }
    CHECK(checked > 0);
}
