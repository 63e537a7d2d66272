#pragma once

#include "jsvd/manifest.hpp"

#include <string>
#include <vector>

namespace jsvd {

// Size-only manifests for the CIFAR-10 residual classifiers used as the
// standard compression benchmarks. Tensors carry shapes, strides and input
// extents but no payloads, which is enough for parameter and MAC budgeting.
//
// Every 3x3 (and bottleneck 1x1) block convolution is grouped with the
// convolutions at the same position across its stage, with shared-right
// factorization as the default method. Stem, downsample projections and the
// final classifier stay ungrouped. Batch norm scales/shifts and the
// classifier bias are counted under other_params.
ModelManifest resnet18_manifest();
ModelManifest resnet34_manifest();
ModelManifest resnet50_manifest();

// Lookup by name ("resnet18", "resnet34", "resnet50").
// Throws parse_error for unknown names.
ModelManifest builtin_manifest(const std::string& name);
bool is_builtin_manifest(const std::string& name);
std::vector<std::string> builtin_manifest_names();

} // namespace jsvd
