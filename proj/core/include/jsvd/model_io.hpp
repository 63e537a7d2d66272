#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jsvd/budget.hpp"
#include "jsvd/manifest.hpp"

namespace jsvd {

// A manifest plus the payloads of every tensor that declares a path.
// Size-only tensors stay manifest entries without data.
struct LoadedModel {
    ModelManifest manifest;
    std::map<std::string, Tensor4> tensors;
    std::filesystem::path dir; // directory the manifest was loaded from

    const Tensor4& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const {
        return tensors.count(name) != 0;
    }
};

// Parse and validate model.json, then load every referenced payload file.
// Payloads are headerless little-endian IEEE-754 arrays in row-major
// (f1, f2, i, o) order; the manifest is the shape authority and the file
// size must match it exactly. Errors name the offending field or file.
LoadedModel load_model(const std::filesystem::path& manifest_path);

// Validate a manifest without touching payload files.
void validate_manifest(const ModelManifest& manifest);

// Write manifest_name (default model.json) and every payload with a
// declared path into dir. Existing files are refused unless force is set.
void save_model(const ModelManifest& manifest,
                const std::map<std::string, Tensor4>& tensors,
                const std::filesystem::path& dir, bool force = false,
                const std::string& manifest_name = "model.json");

// One factorized member: the original declaration context plus the folded
// per-member factor kernels its method produced.
struct FactorizedMember {
    std::string name;
    Shape4 shape;
    int stride = 1;
    int input_h = 32;
    int input_w = 32;
    double residual_sq = 0.0; // |W - reconstruction|_F^2 of this member
    std::optional<Tensor4> right_u; // (F1, 1, I, rank_right)
    std::optional<Tensor4> left_v;  // (1, F2, rank_left, O)
};

struct FactorizedGroup {
    int group_id = 0;
    Method method = Method::rjsvd;
    int rank_right = 0;
    int rank_left = 0;
    double p = 0.0;
    int iterations = 0; // alternating iterations, 0 for one-shot methods
    double residual_sq = 0.0;
    std::vector<double> objective_trace; // two-sided method only
    std::optional<Tensor4> right_v; // shared (1, F2, rank_right, O)
    std::optional<Tensor4> left_u;  // shared (F1, 1, I, rank_left)
    std::vector<FactorizedMember> members;
};

// The complete factorized artifact: model.factorized.json plus the folded
// factor tensors under factors/. The compression report is embedded and
// also written separately as report.json.
struct FactorizedModel {
    int format_version = 1;
    std::string source_manifest; // path of the original model.json as given
    Dtype precision = Dtype::f64;
    std::vector<FactorizedGroup> groups;
    CompressionReport report;
};

// Write the artifact into out_dir: factors/*.bin (named
// g<ID>.v.bin / g<ID>.u.bin for shared factors and g<ID>.<member>.u.bin /
// g<ID>.<member>.v.bin for per-member ones), model.factorized.json and
// report.json. Existing artifact files are refused unless force is set.
void save_factorized(const FactorizedModel& model,
                     const std::filesystem::path& out_dir, bool force = false);

// Reload a factorized artifact, validating every factor shape against the
// recorded ranks and member shapes.
FactorizedModel load_factorized(const std::filesystem::path& manifest_path);

// Write a compression report as JSON on its own, for budget runs that have
// no artifact to embed it in. Overwrites silently: the report is a pure
// function of the manifest and plan.
void save_report(const CompressionReport& report,
                 const std::filesystem::path& file);

// Parameter count after factorization, recomputed from the artifact itself:
// the report's original total minus the recorded member volumes plus the
// stored factor volumes. Dividing the original total by this must reproduce
// the report's CF.
std::size_t factorized_params(const FactorizedModel& model);

} // namespace jsvd
