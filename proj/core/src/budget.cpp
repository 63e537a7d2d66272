#include "jsvd/budget.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace jsvd {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void require_geometry(const ConvLayerSpec& layer) {
    if (layer.stride < 1 || layer.input_h < 1 || layer.input_w < 1) {
        throw dimension_error("layer geometry needs stride and input >= 1, got "
                              "stride " + std::to_string(layer.stride) +
                              ", input " + std::to_string(layer.input_h) + "x" +
                              std::to_string(layer.input_w));
    }
}

// Member shapes of one group, resolved against the manifest.
struct GroupShapes {
    const GroupDecl* decl = nullptr;
    Method method = Method::rjsvd;
    std::vector<const TensorDecl*> members;

    std::size_t rows(std::size_t n) const {
        return members[n]->shape.unfolded_rows();
    }
    std::size_t cols(std::size_t n) const {
        return members[n]->shape.unfolded_cols();
    }
    std::size_t params_before() const {
        std::size_t sum = 0;
        for (const TensorDecl* t : members) sum += t->shape.volume();
        return sum;
    }
};

GroupShapes resolve_group(const ModelManifest& model, const GroupDecl& g,
                          std::optional<Method> method_override) {
    GroupShapes out;
    out.decl = &g;
    out.members = resolve_members(model, g);
    if (method_override) {
        out.method = *method_override;
    } else if (g.method) {
        out.method = *g.method;
    } else {
        throw parse_error("group " + std::to_string(g.group_id) +
                          " declares no method and none was given");
    }
    check_group_compatibility(g, out.members, out.method);
    return out;
}

// Largest total rank the planner may assign to a group. For the two-sided
// method the bound min(F1*I, F2*O) keeps every split of the total inside
// both stacking bounds.
std::size_t max_total_rank(const GroupShapes& g) {
    switch (g.method) {
        case Method::rjsvd: {
            std::size_t rows = 0;
            for (std::size_t n = 0; n < g.members.size(); ++n) rows += g.rows(n);
            return std::min(rows, g.cols(0));
        }
        case Method::ljsvd: {
            std::size_t cols = 0;
            for (std::size_t n = 0; n < g.members.size(); ++n) cols += g.cols(n);
            return std::min(g.rows(0), cols);
        }
        case Method::bijsvd:
            return std::min(g.rows(0), g.cols(0));
    }
    return 0;
}

// Stored parameters of a group's factors: the right half keeps one shared
// v (rank x F2*O) plus a u per member, the left half one shared u plus a v
// per member. Zero-rank halves store nothing.
std::size_t factor_params(const GroupShapes& g, int rank_right, int rank_left) {
    std::size_t sum = 0;
    if (rank_right > 0) {
        sum += static_cast<std::size_t>(rank_right) * g.cols(0);
        for (std::size_t n = 0; n < g.members.size(); ++n)
            sum += g.rows(n) * static_cast<std::size_t>(rank_right);
    }
    if (rank_left > 0) {
        sum += g.rows(0) * static_cast<std::size_t>(rank_left);
        for (std::size_t n = 0; n < g.members.size(); ++n)
            sum += static_cast<std::size_t>(rank_left) * g.cols(n);
    }
    return sum;
}

RankPlanEntry make_entry(const GroupShapes& g, int rank_total, double p) {
    RankPlanEntry e;
    e.group_id = g.decl->group_id;
    e.method = g.method;
    switch (g.method) {
        case Method::rjsvd:
            e.rank_right = rank_total;
            break;
        case Method::ljsvd:
            e.rank_left = rank_total;
            break;
        case Method::bijsvd: {
            auto [rr, rl] = apportion_rank(rank_total, g.decl->p.value_or(p));
            e.rank_right = rr;
            e.rank_left = rl;
            break;
        }
    }
    return e;
}

void require_p(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw rank_error("split proportion p = " + std::to_string(p) +
                         " outside [0, 1]");
    }
}

} // namespace

ConvLayerSpec layer_spec(const TensorDecl& t) {
    return ConvLayerSpec{t.shape, t.stride, t.input_h, t.input_w};
}

std::pair<int, int> apportion_rank(int rank_total, double p) {
    if (rank_total < 0) {
        throw rank_error("total rank " + std::to_string(rank_total) +
                         " is negative");
    }
    require_p(p);
    const int left = static_cast<int>(std::floor(p * rank_total + 0.5));
    return {rank_total - left, left};
}

std::size_t macs_conv(const ConvLayerSpec& layer) {
    require_geometry(layer);
    const Shape4& s = layer.shape;
    const std::size_t out_h = ceil_div(layer.input_h, layer.stride);
    const std::size_t out_w = ceil_div(layer.input_w, layer.stride);
    return out_h * out_w * s.f1 * s.f2 * s.i * s.o;
}

std::size_t macs_decomposed(const ConvLayerSpec& layer, int rank_right,
                            int rank_left) {
    require_geometry(layer);
    if (rank_right < 0 || rank_left < 0 || rank_right + rank_left < 1) {
        throw rank_error("decomposed layer needs nonnegative ranks with a "
                         "positive sum, got right " +
                         std::to_string(rank_right) + ", left " +
                         std::to_string(rank_left));
    }
    const Shape4& s = layer.shape;
    const std::size_t out_h = ceil_div(layer.input_h, layer.stride);
    const std::size_t out_w = ceil_div(layer.input_w, layer.stride);
    // Vertical pass still sees the full input width; only the horizontal
    // pass runs on the strided width.
    const std::size_t per_rank =
        out_h * static_cast<std::size_t>(layer.input_w) * s.f1 * s.i +
        out_h * out_w * s.f2 * s.o;
    return per_rank * static_cast<std::size_t>(rank_right + rank_left);
}

std::size_t count_params(const ModelManifest& model) {
    std::size_t sum = model.other_params;
    for (const TensorDecl& t : model.tensors) sum += t.shape.volume();
    return sum;
}

double cf_for_plan(const ModelManifest& model, const RankPlan& plan) {
    std::set<std::string> grouped;
    std::set<int> seen_groups;
    std::size_t after = model.other_params;
    for (const RankPlanEntry& e : plan.entries) {
        if (!seen_groups.insert(e.group_id).second) {
            throw parse_error("plan lists group " + std::to_string(e.group_id) +
                              " twice");
        }
        const GroupDecl* g = model.find_group(e.group_id);
        if (!g) {
            throw parse_error("plan references unknown group " +
                              std::to_string(e.group_id));
        }
        GroupShapes shapes = resolve_group(model, *g, e.method);
        for (const TensorDecl* t : shapes.members) {
            if (!grouped.insert(t->name).second) {
                throw parse_error("tensor \"" + t->name +
                                  "\" appears in more than one planned group");
            }
        }
        after += factor_params(shapes, e.rank_right, e.rank_left);
    }
    for (const TensorDecl& t : model.tensors) {
        if (!grouped.count(t.name)) after += t.shape.volume();
    }
    return static_cast<double>(count_params(model)) /
           static_cast<double>(after);
}

RankPlan plan_ranks(const ModelManifest& model,
                    std::optional<Method> method_override, double p,
                    double target_cf) {
    require_p(p);
    if (!(target_cf > 0.0)) {
        throw infeasible_error("compression target " +
                               std::to_string(target_cf) +
                               " must be positive");
    }
    if (model.groups.empty()) {
        throw infeasible_error("manifest declares no groups to plan");
    }

    struct Planned {
        GroupShapes shapes;
        std::size_t max_rank = 0;
        int pinned = 0; // fixed total rank, 0 when the group scales freely
    };
    std::vector<Planned> groups;
    for (const GroupDecl& g : model.groups) {
        Planned pg;
        pg.shapes = resolve_group(model, g, method_override);
        pg.max_rank = max_total_rank(pg.shapes);
        if (g.rank) {
            if (*g.rank < 1 || static_cast<std::size_t>(*g.rank) > pg.max_rank) {
                throw rank_error("group " + std::to_string(g.group_id) +
                                 " pins rank " + std::to_string(*g.rank) +
                                 " outside [1, " + std::to_string(pg.max_rank) +
                                 "]");
            }
            pg.pinned = *g.rank;
        } else if (g.target_cf) {
            // Solve this group against its own target: the largest rank
            // whose group-local CF still meets it.
            const double before = static_cast<double>(pg.shapes.params_before());
            int best = 0;
            for (int r = static_cast<int>(pg.max_rank); r >= 1; --r) {
                RankPlanEntry e = make_entry(pg.shapes, r, p);
                const double after = static_cast<double>(
                    factor_params(pg.shapes, e.rank_right, e.rank_left));
                if (before / after >= *g.target_cf) {
                    best = r;
                    break;
                }
            }
            if (best == 0) {
                throw infeasible_error(
                    "group " + std::to_string(g.group_id) +
                    " cannot reach its compression target " +
                    std::to_string(*g.target_cf) + " even at rank 1");
            }
            pg.pinned = best;
        }
        groups.push_back(std::move(pg));
    }

    auto plan_at = [&](double phi) {
        RankPlan plan;
        plan.p = p;
        for (const Planned& pg : groups) {
            int r = pg.pinned;
            if (r == 0) {
                r = std::max(1, static_cast<int>(std::floor(
                                    phi * static_cast<double>(pg.max_rank))));
                r = std::min(r, static_cast<int>(pg.max_rank));
            }
            plan.entries.push_back(make_entry(pg.shapes, r, p));
        }
        plan.achieved_cf = cf_for_plan(model, plan);
        return plan;
    };

    RankPlan floor_plan = plan_at(0.0); // every free group at rank 1
    if (floor_plan.achieved_cf < target_cf) {
        throw infeasible_error(
            "compression target " + std::to_string(target_cf) +
            " is unreachable, the maximum achievable factor is " +
            std::to_string(floor_plan.achieved_cf) + " at rank 1 everywhere");
    }
    RankPlan full_plan = plan_at(1.0);
    if (full_plan.achieved_cf >= target_cf) return full_plan;

    // CF is non-increasing in the fraction, so bisect for the largest
    // fraction that still meets the target. Ranks are integers, hence the
    // result sits exactly at the boundary where one more rank unit would
    // drop below it.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (plan_at(mid).achieved_cf >= target_cf) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return plan_at(lo);
}

RankPlan fixed_rank_plan(const ModelManifest& model,
                         std::optional<Method> method_override, double p,
                         int rank_total) {
    require_p(p);
    if (model.groups.empty()) {
        throw infeasible_error("manifest declares no groups to plan");
    }
    RankPlan plan;
    plan.p = p;
    for (const GroupDecl& g : model.groups) {
        GroupShapes shapes = resolve_group(model, g, method_override);
        const std::size_t max_rank = max_total_rank(shapes);
        const int r = g.rank.value_or(rank_total);
        if (r < 1 || static_cast<std::size_t>(r) > max_rank) {
            throw rank_error("group " + std::to_string(g.group_id) +
                             " rank " + std::to_string(r) + " outside [1, " +
                             std::to_string(max_rank) + "]");
        }
        plan.entries.push_back(make_entry(shapes, r, p));
    }
    plan.achieved_cf = cf_for_plan(model, plan);
    return plan;
}

CompressionReport make_report(const ModelManifest& model,
                              const RankPlan& plan) {
    CompressionReport rep;
    rep.params_before = count_params(model);
    rep.other_params = model.other_params;
    rep.cf = plan.entries.empty() ? 1.0 : cf_for_plan(model, plan);

    std::set<std::string> grouped;
    std::size_t after_exact = model.other_params;
    rep.macs_before = 0;
    rep.macs_after = 0;
    for (const RankPlanEntry& e : plan.entries) {
        const GroupDecl* g = model.find_group(e.group_id);
        if (!g) {
            throw parse_error("plan references unknown group " +
                              std::to_string(e.group_id));
        }
        GroupShapes shapes = resolve_group(model, *g, e.method);
        after_exact += factor_params(shapes, e.rank_right, e.rank_left);
        for (const TensorDecl* t : shapes.members) {
            grouped.insert(t->name);
            rep.macs_after +=
                macs_decomposed(layer_spec(*t), e.rank_right, e.rank_left);
        }
    }
    for (const TensorDecl& t : model.tensors) {
        const std::size_t direct = macs_conv(layer_spec(t));
        rep.macs_before += direct;
        if (!grouped.count(t.name)) {
            rep.macs_after += direct;
            after_exact += t.shape.volume();
        }
    }
    rep.params_after = after_exact;
    rep.flops_before = 2 * rep.macs_before;
    rep.flops_after = 2 * rep.macs_after;
    return rep;
}

} // namespace jsvd
