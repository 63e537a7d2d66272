#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jsvd/tensor.hpp"

namespace jsvd {

enum class Method { rjsvd, ljsvd, bijsvd };

const char* method_name(Method m);
Method method_from_name(std::string_view name);

// One weight tensor as declared in a model manifest. The manifest is the
// shape authority; payload files are headerless. A tensor without a path is
// size-only (architecture bookkeeping, no data to load). stride and input
// extent describe how the layer is applied and feed the MAC accounting;
// they default to stride 1 on a 32x32 input.
struct TensorDecl {
    std::string name;
    Shape4 shape;
    Dtype dtype = Dtype::f64;
    std::string path; // relative to the manifest directory; empty = size-only
    int stride = 1;
    int input_h = 32;
    int input_w = 32;
};

// A set of member tensors to factorize together, plus optional per-group
// settings. Absent settings fall back to command-line values.
struct GroupDecl {
    int group_id = 0;
    std::optional<Method> method;
    std::vector<std::string> members;
    std::optional<int> rank;        // total rank; split by p for bijsvd
    std::optional<double> target_cf;
    std::optional<double> p;
    std::optional<int> k;
};

struct ModelManifest {
    int format_version = 1;
    std::string name;
    std::vector<TensorDecl> tensors;
    std::vector<GroupDecl> groups;
    std::size_t other_params = 0; // weights outside the listed tensors

    const TensorDecl* find_tensor(std::string_view tensor_name) const;
    const GroupDecl* find_group(int group_id) const;
};

// Member declarations of a group in declaration order. Throws parse_error
// when a member name is not declared in the manifest.
std::vector<const TensorDecl*> resolve_members(const ModelManifest& model,
                                               const GroupDecl& group);

// Structural compatibility of a group under a method: a shared right factor
// needs equal F2*O across members, a shared left factor equal F1*I, the
// two-sided method both. Throws incompatibility_error naming the first
// offending pair.
void check_group_compatibility(const GroupDecl& group,
                               const std::vector<const TensorDecl*>& members,
                               Method method);

} // namespace jsvd
