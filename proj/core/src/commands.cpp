#include "jsvd/commands.hpp"

#include "jsvd/budget.hpp"
#include "jsvd/conv.hpp"
#include "jsvd/decompose.hpp"
#include "jsvd/errors.hpp"
#include "jsvd/manifest.hpp"
#include "jsvd/model_io.hpp"
#include "jsvd/random.hpp"
#include "jsvd/resnet.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

namespace jsvd {
namespace {

namespace fs = std::filesystem;

// The --manifest argument names a file that does not exist. Mapped to exit
// status 2, unlike every other failure.
class manifest_missing : public error {
public:
    using error::error;
};

struct ModelInput {
    ModelManifest manifest;
    std::map<std::string, Tensor4> tensors;
    fs::path dir = ".";
    bool builtin = false;
};

ModelInput resolve_input(const CliConfig& cfg) {
    if (cfg.manifest.empty()) {
        throw parse_error("no manifest given");
    }
    if (is_builtin_manifest(cfg.manifest)) {
        ModelInput in;
        in.manifest = builtin_manifest(cfg.manifest);
        in.builtin = true;
        validate_manifest(in.manifest);
        return in;
    }
    const fs::path path = cfg.manifest;
    if (!fs::exists(path)) {
        throw manifest_missing("manifest " + path.string() + " does not exist");
    }
    LoadedModel lm = load_model(path);
    ModelInput in;
    in.manifest = std::move(lm.manifest);
    in.tensors = std::move(lm.tensors);
    in.dir = std::move(lm.dir);
    return in;
}

void check_cfg(const CliConfig& cfg) {
    if (cfg.rank && cfg.target_cf) {
        throw parse_error("--rank and --target-cf are mutually exclusive");
    }
    if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) {
        throw rank_error("--p must lie in [0, 1]");
    }
    if (cfg.k < 1) throw rank_error("--k must be at least 1");
    if (cfg.threads < 1) throw parse_error("--threads must be at least 1");
    if (cfg.repeats < 1) throw parse_error("--repeats must be at least 1");
}

std::optional<Method> method_override(const CliConfig& cfg) {
    if (cfg.method.empty()) return std::nullopt;
    return method_from_name(cfg.method);
}

RankPlan build_plan(const ModelManifest& manifest, const CliConfig& cfg) {
    const std::optional<Method> ov = method_override(cfg);
    if (cfg.rank) return fixed_rank_plan(manifest, ov, cfg.p, *cfg.rank);
    if (cfg.target_cf) return plan_ranks(manifest, ov, cfg.p, *cfg.target_cf);
    for (const GroupDecl& g : manifest.groups) {
        if (!g.rank && !g.target_cf) {
            throw parse_error(
                "group " + std::to_string(g.group_id) +
                " has no rank: supply --rank or --target-cf, or pin every "
                "group in the manifest");
        }
    }
    // Every group is pinned, so the plan is fixed and any reachable target
    // returns it unchanged.
    return plan_ranks(manifest, ov, cfg.p,
                      std::numeric_limits<double>::min());
}

fs::path artifact_dir(const ModelInput& in, const CliConfig& cfg) {
    if (!cfg.out.empty()) return fs::path(cfg.out);
    return in.builtin ? fs::path(".") : in.dir;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(12) << x;
    return os.str();
}

std::string fmt_sci(double x) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << x;
    return os.str();
}

void print_report(std::ostream& log, const CompressionReport& r) {
    log << "params_before=" << r.params_before
        << " params_after=" << r.params_after
        << " other_params=" << r.other_params << " cf=" << fmt(r.cf) << "\n";
    log << "macs_before=" << r.macs_before << " macs_after=" << r.macs_after
        << " flops_convention=" << r.flops_convention
        << " flops_before=" << r.flops_before
        << " flops_after=" << r.flops_after << "\n";
}

Tensor4 reconstruct_from_artifact(const FactorizedGroup& g,
                                  const FactorizedMember& mem);

// Per-group decomposition work, independent of every other group.
FactorizedGroup run_group(const ModelManifest& manifest, const GroupDecl& gd,
                          const RankPlanEntry& entry, const CliConfig& cfg,
                          const std::map<std::string, Tensor4>& tensors) {
    const std::vector<const TensorDecl*> decls = resolve_members(manifest, gd);
    LayerGroup lg;
    lg.group_id = gd.group_id;
    for (const TensorDecl* d : decls) {
        auto it = tensors.find(d->name);
        if (it == tensors.end()) {
            throw io_error("tensor \"" + d->name +
                           "\" is size-only, nothing to decompose");
        }
        lg.members.push_back(GroupMember{d->name, it->second});
    }

    FactorizedGroup out;
    out.group_id = gd.group_id;
    out.method = entry.method;
    out.rank_right = entry.rank_right;
    out.rank_left = entry.rank_left;
    const Shape4& first = decls[0]->shape;

    switch (entry.method) {
        case Method::rjsvd: {
            RightSharedFactorization f = rjsvd(lg, entry.rank_right);
            out.residual_sq = f.residual_sq;
            out.p = 0.0;
            out.right_v =
                fold_horizontal_factor(f.shared_v, first, cfg.precision);
            for (std::size_t n = 0; n < decls.size(); ++n) {
                FactorizedMember mem;
                mem.right_u = fold_vertical_factor(
                    f.member_us[n], decls[n]->shape, cfg.precision);
                out.members.push_back(std::move(mem));
            }
            break;
        }
        case Method::ljsvd: {
            LeftSharedFactorization f = ljsvd(lg, entry.rank_left);
            out.residual_sq = f.residual_sq;
            out.p = 1.0;
            out.left_u = fold_vertical_factor(f.shared_u, first, cfg.precision);
            for (std::size_t n = 0; n < decls.size(); ++n) {
                FactorizedMember mem;
                mem.left_v = fold_horizontal_factor(
                    f.member_vs[n], decls[n]->shape, cfg.precision);
                out.members.push_back(std::move(mem));
            }
            break;
        }
        case Method::bijsvd: {
            const int k = gd.k.value_or(cfg.k);
            DualFactorization f =
                bijsvd(lg, entry.rank_right, entry.rank_left, k);
            out.iterations = f.iterations;
            out.objective_trace = f.objective_trace;
            out.residual_sq = f.objective_trace.back();
            out.p = gd.p.value_or(cfg.p);
            if (entry.rank_right > 0) {
                out.right_v = fold_horizontal_factor(f.right.shared_v, first,
                                                     cfg.precision);
            }
            if (entry.rank_left > 0) {
                out.left_u = fold_vertical_factor(f.left.shared_u, first,
                                                  cfg.precision);
            }
            for (std::size_t n = 0; n < decls.size(); ++n) {
                FactorizedMember mem;
                if (entry.rank_right > 0) {
                    mem.right_u = fold_vertical_factor(
                        f.right.member_us[n], decls[n]->shape, cfg.precision);
                }
                if (entry.rank_left > 0) {
                    mem.left_v = fold_horizontal_factor(
                        f.left.member_vs[n], decls[n]->shape, cfg.precision);
                }
                out.members.push_back(std::move(mem));
            }
            break;
        }
    }
    for (std::size_t n = 0; n < decls.size(); ++n) {
        out.members[n].name = decls[n]->name;
        out.members[n].shape = decls[n]->shape;
        out.members[n].stride = decls[n]->stride;
        out.members[n].input_h = decls[n]->input_h;
        out.members[n].input_w = decls[n]->input_w;
    }
    // Record what the stored factors actually encode, after any precision
    // rounding, so verify can localize payload damage to a member.
    for (std::size_t n = 0; n < decls.size(); ++n) {
        const Tensor4& w = lg.members[n].tensor;
        const Tensor4 rec = reconstruct_from_artifact(out, out.members[n]);
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double d = w.data()[k] - rec.data()[k];
            acc += d * d;
        }
        out.members[n].residual_sq = acc;
    }
    return out;
}

// Refold a shared factor stored against another member's channel split.
// Unfold recovers the underlying matrix exactly, so this is lossless.
Tensor4 right_v_for(const FactorizedGroup& g, const FactorizedMember& mem) {
    const Shape4 want{1, mem.shape.f2, g.rank_right, mem.shape.o};
    if (g.right_v->shape() == want) return *g.right_v;
    return fold(unfold(*g.right_v), want, g.right_v->dtype());
}

Tensor4 left_u_for(const FactorizedGroup& g, const FactorizedMember& mem) {
    const Shape4 want{mem.shape.f1, 1, mem.shape.i, g.rank_left};
    if (g.left_u->shape() == want) return *g.left_u;
    return fold(unfold(*g.left_u), want, g.left_u->dtype());
}

// Low-rank surrogate the artifact encodes for one member, rebuilt from the
// stored factors.
Tensor4 reconstruct_from_artifact(const FactorizedGroup& g,
                                  const FactorizedMember& mem) {
    Matrix sum(mem.shape.unfolded_rows(), mem.shape.unfolded_cols());
    if (g.rank_right > 0) {
        Matrix part = matmul(unfold(*mem.right_u), unfold(right_v_for(g, mem)));
        for (std::size_t k = 0; k < sum.size(); ++k)
            sum.data()[k] += part.data()[k];
    }
    if (g.rank_left > 0) {
        Matrix part = matmul(unfold(left_u_for(g, mem)), unfold(*mem.left_v));
        for (std::size_t k = 0; k < sum.size(); ++k)
            sum.data()[k] += part.data()[k];
    }
    return fold(sum, mem.shape);
}

FeatureMap seeded_input(const CliConfig& cfg, int group_id,
                        std::size_t member_index, const FactorizedMember& mem) {
    std::mt19937_64 rng(cfg.seed ^
                        (static_cast<std::uint64_t>(group_id) << 32) ^
                        (static_cast<std::uint64_t>(member_index) + 1));
    FeatureMap x(mem.input_h, mem.input_w, mem.shape.i);
    fill_uniform(x.data, rng);
    return x;
}

FeatureMap factored_forward(const FactorizedGroup& g,
                            const FactorizedMember& mem, const FeatureMap& x) {
    if (g.rank_right > 0 && g.rank_left > 0) {
        return forward_dual(x, *mem.right_u, right_v_for(g, mem),
                            left_u_for(g, mem), *mem.left_v, mem.stride);
    }
    if (g.rank_right > 0) {
        return forward_split(x, *mem.right_u, right_v_for(g, mem), mem.stride);
    }
    return forward_split(x, left_u_for(g, mem), *mem.left_v, mem.stride);
}

int run_command(std::ostream& log, int (*body)(const CliConfig&, std::ostream&),
                const CliConfig& cfg) {
    try {
        return body(cfg, log);
    } catch (const manifest_missing& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
}

int decompose_body(const CliConfig& cfg, std::ostream& log) {
    check_cfg(cfg);
    ModelInput in = resolve_input(cfg);
    if (in.manifest.groups.empty()) {
        throw parse_error("manifest declares no groups to decompose");
    }
    RankPlan plan = build_plan(in.manifest, cfg);

    std::vector<FactorizedGroup> results(plan.entries.size());
    {
        // Plan entries follow manifest group order; workers pull entries
        // from a shared counter and write into their own slot, so output
        // order never depends on the thread count.
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_failure;
        std::mutex failure_mutex;
        auto worker = [&]() {
            for (;;) {
                const std::size_t idx =
                    next.fetch_add(1, std::memory_order_relaxed);
                if (idx >= plan.entries.size()) return;
                try {
                    const RankPlanEntry& e = plan.entries[idx];
                    const GroupDecl* gd = in.manifest.find_group(e.group_id);
                    results[idx] =
                        run_group(in.manifest, *gd, e, cfg, in.tensors);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!first_failure)
                        first_failure = std::current_exception();
                }
            }
        };
        const std::size_t n_threads =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.threads),
                                  plan.entries.size());
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < n_threads; ++t)
                pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }
        if (first_failure) std::rethrow_exception(first_failure);
    }

    CompressionReport report = make_report(in.manifest, plan);
    for (const FactorizedGroup& g : results)
        report.per_group_residuals.push_back(g.residual_sq);

    FactorizedModel model;
    model.source_manifest = cfg.manifest;
    model.precision = cfg.precision;
    model.groups = std::move(results);
    model.report = report;

    const fs::path out_dir = artifact_dir(in, cfg);
    save_factorized(model, out_dir, cfg.force);

    for (const FactorizedGroup& g : model.groups) {
        log << "group " << g.group_id << ": " << method_name(g.method)
            << " rank_right=" << g.rank_right << " rank_left=" << g.rank_left
            << " members=" << g.members.size()
            << " residual_sq=" << fmt(g.residual_sq) << "\n";
    }
    print_report(log, report);
    log << "wrote " << (out_dir / "model.factorized.json").string() << "\n";
    return 0;
}

int verify_body(const CliConfig& cfg, std::ostream& log) {
    check_cfg(cfg);
    ModelInput in = resolve_input(cfg);
    const fs::path dir = artifact_dir(in, cfg);
    FactorizedModel artifact = load_factorized(dir / "model.factorized.json");

    const double conv_tol = artifact.precision == Dtype::f64 ? 1e-9 : 1e-4;
    log << "seed=" << cfg.seed << " precision="
        << dtype_name(artifact.precision) << " conv_tol=" << fmt_sci(conv_tol)
        << "\n";

    // The split path and the reconstruction share the stored factors, so
    // the conv check alone cannot see payload corruption. Recomputing the
    // residual against the original weights can.
    std::size_t checked = 0;
    std::vector<std::string> failures;
    for (const FactorizedGroup& g : artifact.groups) {
        double residual = 0.0;
        double weight_norm_sq = 0.0;
        for (std::size_t n = 0; n < g.members.size(); ++n) {
            const FactorizedMember& mem = g.members[n];
            const TensorDecl* decl = in.manifest.find_tensor(mem.name);
            if (!decl) {
                throw parse_error("artifact member \"" + mem.name +
                                  "\" is not declared in the model manifest");
            }
            if (!(decl->shape == mem.shape)) {
                throw dimension_error(
                    "artifact member \"" + mem.name + "\" has shape " +
                    shape_to_string(mem.shape) + " but the model declares " +
                    shape_to_string(decl->shape));
            }
            auto it = in.tensors.find(mem.name);
            if (it == in.tensors.end()) {
                throw io_error("tensor \"" + mem.name +
                               "\" is size-only, cannot verify against it");
            }
            const Tensor4& w = it->second;
            const Tensor4 recon = reconstruct_from_artifact(g, mem);
            double member_residual = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) {
                const double d = w.data()[k] - recon.data()[k];
                member_residual += d * d;
            }
            residual += member_residual;
            weight_norm_sq += w.frobenius_norm_sq();

            const double mem_tol =
                (artifact.precision == Dtype::f64 ? 1e-6 : 1e-3) *
                    w.frobenius_norm_sq() +
                (artifact.precision == Dtype::f64 ? 1e-9 : 1e-6);
            if (std::abs(member_residual - mem.residual_sq) > mem_tol) {
                failures.push_back(mem.name + " residual mismatch (recorded " +
                                   fmt(mem.residual_sq) + ", recomputed " +
                                   fmt(member_residual) + ")");
            }

            const FeatureMap x = seeded_input(cfg, g.group_id, n, mem);
            const FeatureMap direct = conv2d(x, recon, mem.stride, mem.stride);
            const FeatureMap split = factored_forward(g, mem, x);
            const double diff = max_abs_diff(direct, split);
            const bool ok = diff <= conv_tol;
            log << "group " << g.group_id << " " << mem.name
                << ": conv max_abs_diff=" << fmt_sci(diff)
                << (ok ? " ok" : " FAIL") << "\n";
            if (!ok) {
                failures.push_back(mem.name + " (conv diff " + fmt_sci(diff) +
                                   " > " + fmt_sci(conv_tol) + ")");
            }
            ++checked;
        }

        const double res_tol =
            (artifact.precision == Dtype::f64 ? 1e-6 : 1e-3) * weight_norm_sq +
            (artifact.precision == Dtype::f64 ? 1e-9 : 1e-6);
        const double res_err = std::abs(residual - g.residual_sq);
        const bool res_ok = res_err <= res_tol;
        log << "group " << g.group_id
            << ": residual recorded=" << fmt(g.residual_sq)
            << " recomputed=" << fmt(residual) << (res_ok ? " ok" : " FAIL")
            << "\n";
        if (!res_ok) {
            failures.push_back("group " + std::to_string(g.group_id) +
                               " residual mismatch (recorded " +
                               fmt(g.residual_sq) + ", recomputed " +
                               fmt(residual) + ")");
        }
    }

    // Cross-check the embedded accounting against the stored factors.
    const std::size_t recomputed_after = factorized_params(artifact);
    if (recomputed_after != artifact.report.params_after) {
        failures.push_back(
            "report params_after=" +
            std::to_string(artifact.report.params_after) +
            " but stored factors give " + std::to_string(recomputed_after));
    }

    if (!failures.empty()) {
        log << "verify FAILED for " << failures.size() << " check(s):\n";
        for (const std::string& f : failures) log << "  " << f << "\n";
        return 1;
    }
    log << "verify ok: " << checked << " member(s) across "
        << artifact.groups.size() << " group(s)\n";
    return 0;
}

int budget_body(const CliConfig& cfg, std::ostream& log) {
    check_cfg(cfg);
    ModelInput in = resolve_input(cfg);

    const CompressionReport baseline = make_report(in.manifest, RankPlan{});
    log << "model " << (in.manifest.name.empty() ? cfg.manifest
                                                 : in.manifest.name)
        << ": tensors=" << in.manifest.tensors.size()
        << " groups=" << in.manifest.groups.size() << "\n";
    print_report(log, baseline);

    CompressionReport final_report = baseline;
    const bool pinned_only = [&] {
        if (in.manifest.groups.empty()) return false;
        for (const GroupDecl& g : in.manifest.groups)
            if (!g.rank && !g.target_cf) return false;
        return true;
    }();
    if (cfg.rank || cfg.target_cf || pinned_only) {
        RankPlan plan = build_plan(in.manifest, cfg);
        for (const RankPlanEntry& e : plan.entries) {
            log << "group " << e.group_id << ": " << method_name(e.method)
                << " rank_right=" << e.rank_right
                << " rank_left=" << e.rank_left << "\n";
        }
        final_report = make_report(in.manifest, plan);
        log << "planned cf=" << fmt(plan.achieved_cf) << "\n";
        print_report(log, final_report);
    }

    const fs::path report_file = cfg.out.empty()
                                     ? fs::path("report.json")
                                     : fs::path(cfg.out) / "report.json";
    save_report(final_report, report_file);
    log << "wrote " << report_file.string() << "\n";
    return 0;
}

int bench_body(const CliConfig& cfg, std::ostream& log) {
    check_cfg(cfg);
    ModelInput in = resolve_input(cfg);
    const fs::path dir = artifact_dir(in, cfg);
    FactorizedModel artifact = load_factorized(dir / "model.factorized.json");

    using clock = std::chrono::steady_clock;
    constexpr int warmup = 10;
    log << "seed=" << cfg.seed << " warmup=" << warmup
        << " repeats=" << cfg.repeats << "\n";

    for (const FactorizedGroup& g : artifact.groups) {
        for (std::size_t n = 0; n < g.members.size(); ++n) {
            const FactorizedMember& mem = g.members[n];
            const FeatureMap x = seeded_input(cfg, g.group_id, n, mem);
            const Tensor4 recon = reconstruct_from_artifact(g, mem);

            auto time_runs = [&](auto&& fn) {
                for (int i = 0; i < warmup; ++i) fn();
                double total = 0.0;
                for (int i = 0; i < cfg.repeats; ++i) {
                    const auto t0 = clock::now();
                    fn();
                    const auto t1 = clock::now();
                    total += std::chrono::duration<double, std::milli>(t1 - t0)
                                 .count();
                }
                return total / cfg.repeats;
            };

            const double direct_ms = time_runs(
                [&] { conv2d(x, recon, mem.stride, mem.stride); });
            const double split_ms =
                time_runs([&] { factored_forward(g, mem, x); });

            const ConvLayerSpec spec{mem.shape, mem.stride, mem.input_h,
                                     mem.input_w};
            const double mac_ratio =
                static_cast<double>(macs_conv(spec)) /
                static_cast<double>(
                    macs_decomposed(spec, g.rank_right, g.rank_left));
            std::ostringstream line;
            line << "group " << g.group_id << " " << mem.name << ": direct "
                 << std::fixed << std::setprecision(3) << direct_ms
                 << " ms, factored " << split_ms << " ms, speedup "
                 << std::setprecision(2)
                 << (direct_ms / std::max(split_ms, 1e-9))
                 << "x, mac_ratio " << mac_ratio << "x";
            log << line.str() << "\n";
        }
    }
    return 0;
}

} // namespace

int cmd_decompose(const CliConfig& cfg, std::ostream& log) {
    return run_command(log, decompose_body, cfg);
}

int cmd_verify(const CliConfig& cfg, std::ostream& log) {
    return run_command(log, verify_body, cfg);
}

int cmd_budget(const CliConfig& cfg, std::ostream& log) {
    return run_command(log, budget_body, cfg);
}

int cmd_bench(const CliConfig& cfg, std::ostream& log) {
    return run_command(log, bench_body, cfg);
}

} // namespace jsvd
