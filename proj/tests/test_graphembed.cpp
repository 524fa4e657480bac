#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "qhealth/common.hpp"
#include "qhealth/graphembed.hpp"
#include "qhealth/synthdev.hpp"

using namespace qhealth;

namespace {

// Two 5-cliques joined by a single bridge 4-5.
DeviceTopology barbell() {
    std::vector<Edge> es;
    for (int base : {0, 5})
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) es.emplace_back(base + i, base + j);
    es.emplace_back(4, 5);
    return DeviceTopology("barbell", 10, es);
}

}  // namespace

TEST_SUITE("graphembed") {

TEST_CASE("walks follow edges and are reproducible") {
    const auto g = default_topology();
    const auto walks = node2vec_walks(g, 1.0, 1.0, 12, 4, 99);
    REQUIRE(walks.size() == 80);
    for (std::size_t i = 0; i < walks.size(); ++i) {
        CHECK(walks[i].size() == 12);
        CHECK(walks[i].front() == static_cast<int>(i % 20));
        for (std::size_t s = 1; s < walks[i].size(); ++s) CHECK(g.has_edge(walks[i][s - 1], walks[i][s]));
    }
    CHECK(node2vec_walks(g, 1.0, 1.0, 12, 4, 99) == walks);
    CHECK_FALSE(node2vec_walks(g, 1.0, 1.0, 12, 4, 100) == walks);
}

TEST_CASE("walks do not depend on the worker count") {
    const auto g = default_topology();
    ::setenv("QHEALTH_THREADS", "1", 1);
    const auto serial = node2vec_walks(g, 0.5, 2.0, 15, 6, 3);
    ::setenv("QHEALTH_THREADS", "7", 1);
    const auto parallel = node2vec_walks(g, 0.5, 2.0, 15, 6, 3);
    ::unsetenv("QHEALTH_THREADS");
    CHECK(serial == parallel);
}

TEST_CASE("return parameter controls backtracking") {
    const auto g = default_topology();
    auto backtrack_rate = [&](double p) {
        const auto walks = node2vec_walks(g, p, 1.0, 30, 10, 5);
        int back = 0, total = 0;
        for (const auto& w : walks)
            for (std::size_t s = 2; s < w.size(); ++s, ++total) back += w[s] == w[s - 2];
        return static_cast<double>(back) / total;
    };
    const double low_p = backtrack_rate(0.05);
    const double high_p = backtrack_rate(20.0);
    CHECK(low_p > 0.7);
    CHECK(high_p < 0.1);
}

TEST_CASE("huge return parameter suppresses backtracking") {
    const auto walks = node2vec_walks(default_topology(), 1e6, 1.0, 26, 24, 8);
    int back = 0, total = 0;
    for (const auto& w : walks)
        for (std::size_t s = 2; s < w.size(); ++s, ++total) back += w[s] == w[s - 2];
    CHECK(total >= 10000);
    CHECK(static_cast<double>(back) / total < 0.01);
}

TEST_CASE("two-node graph walks alternate") {
    const DeviceTopology g("pair", 2, {{0, 1}});
    for (const auto& w : node2vec_walks(g, 1.0, 1.0, 6, 3, 2))
        for (std::size_t s = 0; s < w.size(); ++s) CHECK(w[s] == static_cast<int>((w[0] + s) % 2));
}

TEST_CASE("adjacent nodes embed closer than distant ones") {
    const auto g = default_topology();
    Node2VecParams p;
    p.seed = 4;
    const auto e = node2vec(g, p);
    double adj = 0.0, far = 0.0;
    int na = 0, nf = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j) {
            const double c = cosine_similarity(e.vectors.row(i).transpose(), e.vectors.row(j).transpose());
            if (g.has_edge(i, j))
                adj += c, ++na;
            else
                far += c, ++nf;
        }
    CHECK(adj / na > far / nf);
}

TEST_CASE("isolated nodes are rejected") {
    const DeviceTopology g("gap", 3, {{0, 1}});
    CHECK_THROWS_AS(node2vec_walks(g, 1.0, 1.0, 5, 2, 0), DataError);
    CHECK_THROWS_AS(train_skipgram({{0, 1, 0}}, 3, 4, 2, 2, 1, 0.025, 0), DataError);
}

TEST_CASE("zero epochs returns the initialization") {
    const auto walks = node2vec_walks(barbell(), 1.0, 1.0, 10, 2, 1);
    const auto e = train_skipgram(walks, 10, 6, 3, 3, 0, 0.025, 1);
    CHECK(e.vectors.rows() == 10);
    CHECK(e.vectors.cols() == 6);
    CHECK(e.vectors.cwiseAbs().maxCoeff() <= 0.5 / 6);
}

TEST_CASE("embedding separates communities") {
    Node2VecParams p;
    p.seed = 12;
    p.walks_per_node = 40;
    p.epochs = 5;
    const auto e = node2vec(barbell(), p);
    double within = 0.0, across = 0.0;
    int nw = 0, na = 0;
    for (int i = 0; i < 10; ++i)
        for (int j = i + 1; j < 10; ++j) {
            if (i == 4 || i == 5 || j == 4 || j == 5) continue;
            const double c = cosine_similarity(e.vectors.row(i).transpose(), e.vectors.row(j).transpose());
            if ((i < 5) == (j < 5))
                within += c, ++nw;
            else
                across += c, ++na;
        }
    CHECK(within / nw > across / na + 0.3);
}

TEST_CASE("cosine similarity") {
    Vec a(3), b(3);
    a << 1, 0, 0;
    b << 1, 1, 0;
    CHECK(cosine_similarity(a, b) == doctest::Approx(std::sqrt(0.5)));
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
}

TEST_CASE("qubit features are standardized") {
    const auto sc = default_scenario(7);
    const auto ds = generate_corpus(sc);
    Node2VecParams p;
    p.seed = 7;
    const auto emb = node2vec(sc.topology, p);
    const auto f = qubit_features(ds, sc.topology, emb, ds.day_span());
    REQUIRE(f.values.rows() == 20);
    REQUIRE(f.values.cols() == 14);
    CHECK(f.names.front() == "T1");
    CHECK(f.names[5] == "F2Q");
    CHECK(f.names.back() == "v7");
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) CHECK(std::abs(f.values.col(c).mean()) < 1e-9);
    for (Eigen::Index c = 0; c < 6; ++c) CHECK(std::abs(f.values.col(c).squaredNorm() / 20.0 - 1.0) < 1e-9);
    // Embedding columns keep their geometry: pairwise distances are unchanged.
    for (int i = 0; i < 20; i += 3)
        for (int j = i + 1; j < 20; j += 4)
            CHECK((f.values.row(i).tail(8) - f.values.row(j).tail(8)).norm() ==
                  doctest::Approx((emb.vectors.row(i) - emb.vectors.row(j)).norm()));

    // Planted families sit apart in the metric block.
    Vec stable = Vec::Zero(6), noisy = Vec::Zero(6);
    int ns = 0, nn = 0;
    for (int q = 0; q < 20; ++q) {
        if (sc.profiles[static_cast<std::size_t>(q)].family == Family::Noisy)
            noisy += f.values.row(q).head(6).transpose(), ++nn;
        else
            stable += f.values.row(q).head(6).transpose(), ++ns;
    }
    CHECK((stable / ns - noisy / nn).norm() > 1.0);

    Embedding none;
    none.vectors.resize(20, 0);
    const auto bare = qubit_features(ds, sc.topology, none, ds.day_span());
    CHECK(bare.values.cols() == 6);

    std::ostringstream csv;
    write_embedding_csv(emb, csv);
    CHECK(csv.str().rfind("node,v0,v1,v2,v3,v4,v5,v6,v7\n", 0) == 0);
}

}
