#include "etnn/config.hpp"
#include "etnn/error.hpp"
#include "etnn/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace etnn;

namespace {

template <class F>
error caught(F f) {
    try {
        f();
    } catch (const error& e) {
        return e;
    }
    ADD_FAILURE() << "expected an etnn::error";
    return error(errc::invalid_argument, "none");
}

const char* sample_config = R"(# experiment
[model]
hidden = 16
layers = 3
neighborhoods = "inc_down,inc_up,adj_up@rank=0"   # quoted list
invariants = dist:mean,hausdorff
mode = equivariant
readout = node
features = own+node_mean
features.r1 = membership
membership_tags = ring,bond
c_policy = constant
c_constant = 0.5
aggregation = sum
share_message = true

[train]
epochs = 12
lr = 0.002
loss = huber
huber_delta = 0.3
metric = r2
split = 0.6,0.2,0.2
restore_best = false
)";

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
    const auto f = parse_config(sample_config, "run.cfg");
    EXPECT_EQ(f.values.at("model.hidden").text, "16");
    EXPECT_EQ(f.values.at("model.hidden").line, 3);
    EXPECT_EQ(f.values.at("model.neighborhoods").text, "inc_down,inc_up,adj_up@rank=0");
    const auto rc = run_config(f);
    EXPECT_EQ(rc.model.hidden, 16);
    EXPECT_EQ(rc.model.num_layers, 3);
    ASSERT_EQ(rc.model.neighborhoods.size(), 3u);
    EXPECT_EQ(rc.model.neighborhoods[2].to_string(), "adj_up@rank=0");
    EXPECT_EQ(rc.model.invariants.to_string(), "dist:mean,hausdorff");
    EXPECT_EQ(rc.model.mode, Mode::equivariant);
    EXPECT_EQ(rc.model.readout, ReadoutLevel::node);
    EXPECT_EQ(rc.model.default_features, own_features | node_mean_features);
    EXPECT_EQ(rc.model.features_for(1), static_cast<unsigned>(membership_features));
    EXPECT_EQ(rc.model.features_for(2), own_features | node_mean_features);
    EXPECT_EQ(rc.model.membership_tags, (std::vector<std::string>{"ring", "bond"}));
    EXPECT_EQ(rc.model.c_policy, CPolicy::constant);
    EXPECT_EQ(rc.model.c_constant, 0.5);
    EXPECT_EQ(rc.model.aggregation, Aggregation::sum);
    EXPECT_TRUE(rc.model.share_message);
    EXPECT_EQ(rc.train.epochs, 12);
    EXPECT_EQ(rc.train.base_lr, 0.002);
    EXPECT_EQ(rc.train.loss, LossKind::huber);
    EXPECT_EQ(rc.train.huber_delta, 0.3);
    EXPECT_EQ(rc.train.metric, Metric::r2);
    EXPECT_FALSE(rc.train.restore_best);
    EXPECT_EQ(rc.split.train, 0.6);
    EXPECT_EQ(rc.split.test, 0.2);
}

TEST(Config, TextRoundTrip) {
    const auto rc = run_config(parse_config(sample_config));
    const std::string text = to_config_text(rc);
    const auto again = run_config(parse_config(text));
    EXPECT_EQ(to_config_text(again), text);
    EXPECT_EQ(to_json(again.model), to_json(rc.model));
    EXPECT_EQ(again.train.epochs, rc.train.epochs);
    EXPECT_EQ(again.train.huber_delta, rc.train.huber_delta);
    EXPECT_EQ(again.split.val, rc.split.val);
}

TEST(Config, ModelJsonRoundTrip) {
    const auto rc = run_config(parse_config(sample_config));
    EXPECT_EQ(to_json(config_from_json(to_json(rc.model))), to_json(rc.model));
}

TEST(Config, Errors) {
    auto e = caught([] { parse_config("[model]\nhidden 3\n", "a.cfg"); });
    EXPECT_EQ(e.code(), errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("a.cfg:2"), std::string::npos);
    EXPECT_EQ(caught([] { parse_config("a = 1\na = 2\n"); }).code(), errc::parse_error);
    EXPECT_EQ(caught([] { parse_config("[model\n"); }).code(), errc::parse_error);
    EXPECT_EQ(caught([] { parse_config("a = \"x\n"); }).code(), errc::parse_error);

    e = caught([] { run_config(parse_config("\n[model]\nhiden = 3\n", "b.cfg")); });
    EXPECT_EQ(e.code(), errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    EXPECT_EQ(caught([] { run_config(parse_config("model.hidden = x\n")); }).code(), errc::parse_error);
    EXPECT_EQ(caught([] { run_config(parse_config("model.hidden = 0\n")); }).code(), errc::parse_error);
    EXPECT_EQ(caught([] { run_config(parse_config("model.mode = magic\n")); }).code(), errc::parse_error);
    EXPECT_EQ(caught([] { run_config(parse_config("model.share_update = maybe\n")); }).code(), errc::parse_error);
    // Bad split fractions surface as a located parse error.
    e = caught([] { run_config(parse_config("x = 1\ntrain.split = 0.5,0.5,0.5\n", "c.cfg")); });
    EXPECT_EQ(e.code(), errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("c.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("sum to 1"), std::string::npos);
    EXPECT_EQ(caught([] { run_config(parse_config("train.split = 0.5,0.5\n")); }).code(), errc::parse_error);
}

TEST(Io, ComplexDocumentErrors) {
    EXPECT_EQ(caught([] { parse_complex(std::string("{\"num_nodes\": 1")); }).code(), errc::parse_error);
    const auto where = caught([] { parse_json_text("{\n  \"a\": ,\n}", "doc.json"); });
    EXPECT_NE(std::string(where.what()).find("doc.json:2"), std::string::npos);
    const std::string base = R"("spatial_dim": 2, "num_nodes": 2, "positions": [[0, 0], [1, 1]])";
    EXPECT_EQ(caught([&] { parse_complex("{" + base + "}"); }).code(), errc::parse_error);
    EXPECT_EQ(caught([&] { parse_complex("{" + base + R"(, "cells": [], "extra": 1})"); }).code(), errc::parse_error);
    EXPECT_EQ(caught([&] {
                  parse_complex(std::string(R"({"spatial_dim": 2, "num_nodes": 2, "positions": [[0, 0]], "cells": []})"));
              }).code(),
              errc::dimension_mismatch);
    EXPECT_EQ(caught([&] { parse_complex("{" + base + R"(, "cells": [{"nodes": [0, 1], "rank": "one"}]})"); }).code(),
              errc::parse_error);
    EXPECT_EQ(caught([&] { parse_complex("{" + base + R"(, "cells": [{"nodes": [0, 5], "rank": 1}]})"); }).code(),
              errc::out_of_range_node);
    EXPECT_EQ(
        caught([&] { parse_complex("{" + base + R"(, "cells": [], "target": {"level": "edge", "values": [1]}})"); })
            .code(),
        errc::parse_error);
    const auto ok = parse_complex("{" + base + R"(, "cells": [{"nodes": [0, 1], "rank": 1}]})");
    EXPECT_EQ(ok.complex.num_cells(), 3u);
    EXPECT_FALSE(ok.target);
}

TEST(Io, GraphDocument) {
    const auto doc = parse_graph(read_text_file(std::string(ETNN_TEST_DATA) + "/path_graph.json"));
    EXPECT_EQ(doc.graph.num_nodes, 3u);
    EXPECT_EQ(doc.graph.edges.size(), 2u);
    const std::string base = R"("spatial_dim": 1, "num_nodes": 2, "positions": [[0], [1]])";
    EXPECT_EQ(caught([&] { parse_graph("{" + base + R"(, "edges": [[0, 1, 1]]})"); }).code(), errc::parse_error);
    EXPECT_EQ(caught([&] { parse_graph("{" + base + R"(, "edges": [[0, 0]]})"); }).code(), errc::invalid_argument);
    EXPECT_EQ(caught([&] { parse_graph("{" + base + R"(, "edges": [[0, 1]], "edge_features": []})"); }).code(),
              errc::dimension_mismatch);
    const auto full = parse_graph("{" + base +
                                  R"(, "edges": [[0, 1]], "edge_features": [[2.5]], "hyperedges": [[0, 1]],
                                     "rings": [{"nodes": [0, 1], "features": [1]}]})");
    EXPECT_EQ(full.edge_features[0], std::vector<double>{2.5});
    EXPECT_EQ(full.hyperedges.size(), 1u);
    EXPECT_EQ(full.rings[0].features, std::vector<double>{1.0});
}

TEST(Io, AtomicWriteAndRead) {
    const auto path = std::filesystem::temp_directory_path() / ("etnn_io_" + std::to_string(::getpid()) + ".txt");
    write_file_atomic(path, "first");
    write_file_atomic(path, "second");
    EXPECT_EQ(read_text_file(path), "second");
    std::filesystem::remove(path);
    EXPECT_EQ(caught([&] { read_text_file(path); }).code(), errc::invalid_argument);
}
