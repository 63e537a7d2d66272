#include "jsvd/manifest.hpp"

namespace jsvd {

const char* method_name(Method m) {
    switch (m) {
        case Method::rjsvd: return "rjsvd";
        case Method::ljsvd: return "ljsvd";
        case Method::bijsvd: return "bijsvd";
    }
    return "?";
}

Method method_from_name(std::string_view name) {
    if (name == "rjsvd") return Method::rjsvd;
    if (name == "ljsvd") return Method::ljsvd;
    if (name == "bijsvd") return Method::bijsvd;
    throw parse_error("unknown method \"" + std::string(name) +
                      "\", expected rjsvd, ljsvd or bijsvd");
}

const TensorDecl* ModelManifest::find_tensor(std::string_view tensor_name) const {
    for (const TensorDecl& t : tensors)
        if (t.name == tensor_name) return &t;
    return nullptr;
}

const GroupDecl* ModelManifest::find_group(int group_id) const {
    for (const GroupDecl& g : groups)
        if (g.group_id == group_id) return &g;
    return nullptr;
}

std::vector<const TensorDecl*> resolve_members(const ModelManifest& model,
                                               const GroupDecl& group) {
    if (group.members.empty()) {
        throw incompatibility_error("group " + std::to_string(group.group_id) +
                                    " has no members");
    }
    std::vector<const TensorDecl*> out;
    out.reserve(group.members.size());
    for (const std::string& name : group.members) {
        const TensorDecl* t = model.find_tensor(name);
        if (!t) {
            throw parse_error("group " + std::to_string(group.group_id) +
                              " references unknown tensor \"" + name + "\"");
        }
        out.push_back(t);
    }
    return out;
}

void check_group_compatibility(const GroupDecl& group,
                               const std::vector<const TensorDecl*>& members,
                               Method method) {
    const bool need_cols = method != Method::ljsvd;
    const bool need_rows = method != Method::rjsvd;
    for (std::size_t n = 1; n < members.size(); ++n) {
        if (need_cols && members[n]->shape.unfolded_cols() !=
                             members[0]->shape.unfolded_cols()) {
            throw incompatibility_error(
                "group " + std::to_string(group.group_id) + ": members \"" +
                members[0]->name + "\" (F2*O = " +
                std::to_string(members[0]->shape.unfolded_cols()) +
                ") and \"" + members[n]->name + "\" (F2*O = " +
                std::to_string(members[n]->shape.unfolded_cols()) +
                ") are not " + method_name(method) + " compatible");
        }
        if (need_rows && members[n]->shape.unfolded_rows() !=
                             members[0]->shape.unfolded_rows()) {
            throw incompatibility_error(
                "group " + std::to_string(group.group_id) + ": members \"" +
                members[0]->name + "\" (F1*I = " +
                std::to_string(members[0]->shape.unfolded_rows()) +
                ") and \"" + members[n]->name + "\" (F1*I = " +
                std::to_string(members[n]->shape.unfolded_rows()) +
                ") are not " + method_name(method) + " compatible");
        }
    }
}

} // namespace jsvd
