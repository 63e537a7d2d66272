#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <optional>

#include "jsvd/budget.hpp"
#include "jsvd/errors.hpp"
#include "jsvd/resnet.hpp"

using namespace jsvd;

namespace {

TensorDecl conv(const std::string& name, Shape4 shape, int stride, int input) {
    TensorDecl t;
    t.name = name;
    t.shape = shape;
    t.stride = stride;
    t.input_h = input;
    t.input_w = input;
    return t;
}

// Two (3,3,4,4) members in one right-shared group on an 8x8 input. Each
// member holds 144 weights; rank r keeps 12r per member plus 12r shared,
// so CF(r) = 288 / 36r.
ModelManifest pair_manifest(Shape4 shape = {3, 3, 4, 4}) {
    ModelManifest m;
    m.name = "pair";
    m.tensors.push_back(conv("w1", shape, 1, 8));
    m.tensors.push_back(conv("w2", shape, 1, 8));
    GroupDecl g;
    g.group_id = 0;
    g.method = Method::rjsvd;
    g.members = {"w1", "w2"};
    m.groups.push_back(g);
    return m;
}

} // namespace

TEST_CASE("rank apportioning rounds the left share half up") {
    CHECK(apportion_rank(10, 0.3) == std::pair<int, int>{7, 3});
    CHECK(apportion_rank(1, 0.5) == std::pair<int, int>{0, 1});
    CHECK(apportion_rank(7, 0.5) == std::pair<int, int>{3, 4});
    CHECK(apportion_rank(10, 0.0) == std::pair<int, int>{10, 0});
    CHECK(apportion_rank(10, 1.0) == std::pair<int, int>{0, 10});
    CHECK(apportion_rank(4, 0.25) == std::pair<int, int>{3, 1});
    CHECK(apportion_rank(3, 0.7) == std::pair<int, int>{1, 2});
}

TEST_CASE("direct convolution MAC count") {
    // 8x8 input, stride 1: 64 output positions times 3*3*16*32 per position.
    ConvLayerSpec a{{3, 3, 16, 32}, 1, 8, 8};
    CHECK(macs_conv(a) == 64u * 3 * 3 * 16 * 32);
    // Stride 2 quarters the output grid: 16 positions times 144.
    ConvLayerSpec b{{3, 3, 4, 4}, 2, 8, 8};
    CHECK(macs_conv(b) == 2304u);
    // Odd input, stride 2: ceil(7/2) = 4 rows and columns.
    ConvLayerSpec c{{1, 1, 2, 2}, 2, 7, 7};
    CHECK(macs_conv(c) == 16u * 4);
}

TEST_CASE("split convolution MAC count") {
    // Vertical pass runs on the full-width input at 8x8 -> 8 rows kept:
    // 8*8*3*16 = 3072 per rank. Horizontal pass on the reduced grid:
    // 8*8*3*32 = 6144 per rank. Three total ranks.
    ConvLayerSpec a{{3, 3, 16, 32}, 1, 8, 8};
    CHECK(macs_decomposed(a, 2, 1) == 3u * (3072 + 6144));
    // Stride 2: vertical 4*8*3*4 = 384, horizontal 4*4*3*4 = 192.
    ConvLayerSpec b{{3, 3, 4, 4}, 2, 8, 8};
    CHECK(macs_decomposed(b, 1, 0) == 576u);
    CHECK(macs_decomposed(b, 1, 1) == 1152u);
}

TEST_CASE("parameter counting includes size-only tensors and other params") {
    ModelManifest m = pair_manifest();
    m.other_params = 17;
    TensorDecl head = conv("head", {1, 1, 6, 10}, 1, 1);
    m.tensors.push_back(head);
    CHECK(count_params(m) == 144u + 144 + 60 + 17);
}

TEST_CASE("compression factor of the paired toy inverts exactly") {
    const ModelManifest m = pair_manifest();
    CHECK(count_params(m) == 288u);

    auto cf_at = [&](int rank) {
        RankPlan plan;
        plan.entries.push_back({0, Method::rjsvd, rank, 0});
        return cf_for_plan(m, plan);
    };
    CHECK(cf_at(1) == 8.0);
    CHECK(cf_at(2) == 4.0);
    CHECK(cf_at(4) == 2.0);
    CHECK(cf_at(8) == 1.0);

    // Strictly decreasing in the rank.
    for (int r = 1; r < 8; ++r) CHECK(cf_at(r + 1) < cf_at(r));
}

TEST_CASE("plan recovers the exact rank for an exactly reachable target") {
    const ModelManifest m = pair_manifest();
    const RankPlan plan = plan_ranks(m, std::nullopt, 0.5, 8.0);
    REQUIRE(plan.entries.size() == 1);
    CHECK(plan.entries[0].rank_right == 1);
    CHECK(plan.entries[0].rank_left == 0);
    CHECK(plan.achieved_cf == 8.0);

    // The doubled-channel variant reaches the same factor one rank later:
    // members hold 576 weights each and rank r keeps 72r in total, so
    // CF(r) = 1152 / 72r = 8 at r = 2.
    const ModelManifest m8 = pair_manifest({3, 3, 8, 8});
    const RankPlan plan8 = plan_ranks(m8, std::nullopt, 0.5, 8.0);
    CHECK(plan8.entries[0].rank_right == 2);
    CHECK(plan8.achieved_cf == 8.0);
}

TEST_CASE("planned rank sits at the boundary of the target") {
    const ModelManifest m = pair_manifest({3, 3, 8, 8});
    const RankPlan plan = plan_ranks(m, std::nullopt, 0.5, 3.0);
    REQUIRE(plan.entries.size() == 1);
    CHECK(plan.achieved_cf >= 3.0);
    RankPlan grown = plan;
    grown.entries[0].rank_right += 1;
    CHECK(cf_for_plan(m, grown) < 3.0);
}

TEST_CASE("unreachable targets are rejected") {
    const ModelManifest m = pair_manifest();
    CHECK_THROWS_AS(plan_ranks(m, std::nullopt, 0.5, 100.0),
                    infeasible_error);
}

TEST_CASE("a pinned group rank overrides the search and the total") {
    ModelManifest m = pair_manifest();
    m.groups[0].rank = 3;
    const RankPlan a = plan_ranks(m, std::nullopt, 0.5, 2.0);
    CHECK(a.entries[0].rank_right == 3);
    const RankPlan b = fixed_rank_plan(m, std::nullopt, 0.5, 5);
    CHECK(b.entries[0].rank_right == 3);
}

TEST_CASE("a per-group compression target is honored") {
    ModelManifest m = pair_manifest();
    m.groups[0].target_cf = 4.0;
    const RankPlan plan = plan_ranks(m, std::nullopt, 0.5, 1.0);
    CHECK(plan.entries[0].rank_right == 2);
    CHECK(plan.achieved_cf == 4.0);
}

TEST_CASE("a method override applies to every group") {
    const ModelManifest m = pair_manifest();
    const RankPlan plan = fixed_rank_plan(m, Method::bijsvd, 0.3, 3);
    REQUIRE(plan.entries.size() == 1);
    CHECK(plan.entries[0].method == Method::bijsvd);
    CHECK(plan.entries[0].rank_right == 2);
    CHECK(plan.entries[0].rank_left == 1);

    // Shared 2x12 and 12x1 plus per-member 12x2 and 1x12 blocks.
    const std::size_t after = 24 + 12 + 2 * (24 + 12);
    CHECK(cf_for_plan(m, plan) == 288.0 / static_cast<double>(after));
    const CompressionReport rep = make_report(m, plan);
    CHECK(rep.params_after == after);
}

TEST_CASE("fixed-rank plans validate the rank range") {
    const ModelManifest m = pair_manifest();
    CHECK_THROWS_AS(fixed_rank_plan(m, std::nullopt, 0.5, 0), rank_error);
    // Stacked 24x12, so 13 exceeds every admissible right rank.
    CHECK_THROWS_AS(fixed_rank_plan(m, std::nullopt, 0.5, 13), rank_error);
    ModelManifest empty;
    empty.name = "empty";
    CHECK_THROWS_AS(fixed_rank_plan(empty, std::nullopt, 0.5, 1),
                    infeasible_error);
}

TEST_CASE("an empty plan reports the uncompressed model") {
    const ModelManifest m = pair_manifest();
    const CompressionReport rep = make_report(m, RankPlan{});
    CHECK(rep.params_before == 288u);
    CHECK(rep.params_after == 288u);
    CHECK(rep.cf == 1.0);
    CHECK(rep.macs_before == rep.macs_after);
    CHECK(rep.flops_before == 2 * rep.macs_before);
    CHECK(rep.flops_convention == "two-per-mac");
    CHECK(rep.per_group_residuals.empty());
}

TEST_CASE("report MACs cover grouped and ungrouped layers") {
    ModelManifest m = pair_manifest();
    m.tensors.push_back(conv("solo", {3, 3, 4, 4}, 2, 8));
    RankPlan plan;
    plan.entries.push_back({0, Method::rjsvd, 1, 0});
    const CompressionReport rep = make_report(m, plan);
    // Grouped members at 8x8 stride 1 cost 9216 each direct, 1536 at rank
    // 1; the ungrouped layer stays at its direct 2304 on both sides.
    CHECK(rep.macs_before == 2u * 9216 + 2304);
    CHECK(rep.macs_after == 2u * 1536 + 2304);
    CHECK(rep.flops_after == 2 * rep.macs_after);
}

TEST_CASE("bundled classifier manifests carry their frozen totals") {
    const ModelManifest r18 = resnet18_manifest();
    const ModelManifest r34 = resnet34_manifest();
    const ModelManifest r50 = resnet50_manifest();

    CHECK(count_params(r18) == 11173962u);
    CHECK(r18.other_params == 9610u);
    CHECK(count_params(r34) == 21282122u);
    CHECK(r34.other_params == 17034u);
    CHECK(count_params(r50) == 23520842u);
    CHECK(r50.other_params == 53130u);

    CHECK(make_report(r18, RankPlan{}).flops_before == 1110845440u);
    CHECK(make_report(r34, RankPlan{}).flops_before == 2318804992u);
    CHECK(make_report(r50, RankPlan{}).flops_before == 2595659776u);
}

TEST_CASE("builtin manifests resolve by name and validate") {
    for (const std::string& name : builtin_manifest_names()) {
        CHECK(is_builtin_manifest(name));
        const ModelManifest m = builtin_manifest(name);
        CHECK(m.name == name);
        CHECK(!m.groups.empty());
    }
    CHECK_FALSE(is_builtin_manifest("lenet"));
    CHECK_THROWS_AS(builtin_manifest("lenet"), parse_error);
}

TEST_CASE("every grouped stage of the builtin manifests plans and counts") {
    const ModelManifest m = resnet18_manifest();
    const RankPlan plan = plan_ranks(m, std::nullopt, 0.5, 2.0);
    CHECK(plan.achieved_cf >= 2.0);
    const CompressionReport rep = make_report(m, plan);
    CHECK(rep.params_after < rep.params_before);
    CHECK(rep.macs_after < rep.macs_before);
    CHECK(rep.cf == doctest::Approx(plan.achieved_cf));
}
