#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jsvd/manifest.hpp"

namespace jsvd {

// Geometry needed to count the work of one conv layer: kernel extent plus
// the input it is applied to. SAME padding is assumed throughout, so the
// output extent is ceil(input/stride) per axis.
struct ConvLayerSpec {
    Shape4 shape;
    int stride = 1;
    int input_h = 32;
    int input_w = 32;
};

ConvLayerSpec layer_spec(const TensorDecl& t);

struct RankPlanEntry {
    int group_id = 0;
    Method method = Method::rjsvd;
    int rank_right = 0; // shared right factor rank
    int rank_left = 0;  // shared left factor rank
};

struct RankPlan {
    std::vector<RankPlanEntry> entries;
    double p = 0.5;          // rank split proportion used for bijsvd entries
    double achieved_cf = 0.0;
};

struct CompressionReport {
    std::size_t params_before = 0;
    std::size_t params_after = 0;
    std::size_t other_params = 0;
    double cf = 0.0;
    std::size_t macs_before = 0;
    std::size_t macs_after = 0;
    // FLOP totals count two per multiply-accumulate; macs_* carry the raw
    // MAC counts so either convention can be read off directly.
    std::string flops_convention = "two-per-mac";
    std::size_t flops_before = 0;
    std::size_t flops_after = 0;
    std::vector<double> per_group_residuals; // plan entry order, unnormalized
};

// Split a total rank between the left and right shared factors. The left
// share is round(p * total) with exact halves rounded up, the right factor
// keeps the rest. p = 0 gives a pure right factorization, p = 1 pure left.
std::pair<int, int> apportion_rank(int rank_total, double p); // (right, left)

// Multiply-accumulate count of a direct SAME-padded convolution.
std::size_t macs_conv(const ConvLayerSpec& layer);

// Multiply-accumulate count of the factorized layer: a vertical (F1 x 1)
// conv at strides (s, 1) into rank channels, then a horizontal (1 x F2)
// conv at strides (1, s). Both shared halves run the same chain, so the
// cost scales with rank_right + rank_left.
std::size_t macs_decomposed(const ConvLayerSpec& layer, int rank_right,
                            int rank_left);

// Total stored parameters: all declared tensors plus other_params.
std::size_t count_params(const ModelManifest& model);

// Compression factor of a plan: original parameter total divided by the
// total after replacing every grouped tensor with its factors. Ungrouped
// tensors and other_params appear unchanged on both sides.
double cf_for_plan(const ModelManifest& model, const RankPlan& plan);

// Pick integer ranks meeting a model-level compression target. A single
// global fraction of each group's maximum admissible rank is bisected so
// the achieved CF stays at or above target_cf and sits at the integer rank
// boundary (the plan cannot be grown without dropping below target).
// Manifest groups carrying an explicit rank are pinned; groups carrying
// their own target_cf are solved against that target first. method_override
// replaces every group's method when present.
RankPlan plan_ranks(const ModelManifest& model,
                    std::optional<Method> method_override, double p,
                    double target_cf);

// Plan with the same total rank for every unpinned group, no CF search.
RankPlan fixed_rank_plan(const ModelManifest& model,
                         std::optional<Method> method_override, double p,
                         int rank_total);

// Assemble the parameter and MAC accounting for a plan. Residuals are left
// empty; the decomposition driver fills them in.
CompressionReport make_report(const ModelManifest& model, const RankPlan& plan);

} // namespace jsvd
