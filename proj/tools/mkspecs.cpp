// Regenerates everything under specs/: the builtin architecture manifests
// and the two toy models with seeded payloads. Output is deterministic, so
// the checked-in files must match a fresh run byte for byte.

#include "jsvd/manifest.hpp"
#include "jsvd/model_io.hpp"
#include "jsvd/random.hpp"
#include "jsvd/resnet.hpp"
#include "jsvd/tensor.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

namespace fs = std::filesystem;
using namespace jsvd;

namespace {

TensorDecl conv_decl(const std::string& name, Shape4 shape, int stride,
                     int input) {
    TensorDecl t;
    t.name = name;
    t.shape = shape;
    t.path = name + ".bin";
    t.stride = stride;
    t.input_h = input;
    t.input_w = input;
    return t;
}

GroupDecl group_decl(int id, Method method, std::vector<std::string> members) {
    GroupDecl g;
    g.group_id = id;
    g.method = method;
    g.members = std::move(members);
    return g;
}

std::map<std::string, Tensor4> fill_payloads(const ModelManifest& m,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::map<std::string, Tensor4> out;
    // Declaration order, so the byte streams are seed-reproducible.
    for (const TensorDecl& t : m.tensors) {
        if (t.path.empty()) continue;
        Tensor4 w(t.shape, t.dtype);
        fill_uniform(w.data(), rng);
        out.emplace(t.name, std::move(w));
    }
    return out;
}

// Two identical-shape members in one group, nothing else. Both members have
// 144 weights, so rank r keeps 36r parameters and the compression factor is
// 288 / 36r, exactly 8 at rank 1.
void write_toy2(const fs::path& dir) {
    ModelManifest m;
    m.name = "toy2";
    m.tensors.push_back(conv_decl("w1", {3, 3, 4, 4}, 1, 8));
    m.tensors.push_back(conv_decl("w2", {3, 3, 4, 4}, 1, 8));
    m.groups.push_back(group_decl(0, Method::rjsvd, {"w1", "w2"}));
    save_model(m, fill_payloads(m, 7), dir, /*force=*/true);
}

// Four groups of identical-shape members (so every method applies), one
// ungrouped head tensor and some uncompressed parameters. Group d runs at
// stride 2.
void write_toy4(const fs::path& dir) {
    ModelManifest m;
    m.name = "toy4";
    m.tensors.push_back(conv_decl("a1", {3, 3, 4, 4}, 1, 8));
    m.tensors.push_back(conv_decl("a2", {3, 3, 4, 4}, 1, 8));
    m.tensors.push_back(conv_decl("b1", {3, 3, 6, 4}, 1, 8));
    m.tensors.push_back(conv_decl("b2", {3, 3, 6, 4}, 1, 8));
    m.tensors.push_back(conv_decl("b3", {3, 3, 6, 4}, 1, 8));
    m.tensors.push_back(conv_decl("c1", {5, 3, 3, 4}, 1, 8));
    m.tensors.push_back(conv_decl("c2", {5, 3, 3, 4}, 1, 8));
    m.tensors.push_back(conv_decl("d1", {3, 3, 4, 6}, 2, 8));
    m.tensors.push_back(conv_decl("d2", {3, 3, 4, 6}, 2, 8));
    m.tensors.push_back(conv_decl("head", {1, 1, 6, 10}, 1, 1));
    m.groups.push_back(group_decl(0, Method::rjsvd, {"a1", "a2"}));
    m.groups.push_back(group_decl(1, Method::ljsvd, {"b1", "b2", "b3"}));
    m.groups.push_back(group_decl(2, Method::bijsvd, {"c1", "c2"}));
    m.groups.push_back(group_decl(3, Method::rjsvd, {"d1", "d2"}));
    m.other_params = 17;
    save_model(m, fill_payloads(m, 11), dir, /*force=*/true);
}

} // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("specs");
    try {
        save_model(resnet18_manifest(), {}, root, /*force=*/true,
                   "resnet18.json");
        save_model(resnet34_manifest(), {}, root, /*force=*/true,
                   "resnet34.json");
        save_model(resnet50_manifest(), {}, root, /*force=*/true,
                   "resnet50.json");
        write_toy2(root / "toy2");
        write_toy4(root / "toy4");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote specs under " << root.string() << "\n";
    return 0;
}
