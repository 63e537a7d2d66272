#include "jsvd/resnet.hpp"

#include "jsvd/errors.hpp"

#include <array>
#include <utility>

namespace jsvd {
namespace {

constexpr int kInputRes = 32;
constexpr int kClasses = 10;

struct Builder {
    ModelManifest m;
    std::size_t bn_channels = 0;
    int next_group = 0;

    void conv(const std::string& name, int f, int in_ch, int out_ch,
              int stride, int res) {
        TensorDecl t;
        t.name = name;
        t.shape = Shape4{f, f, in_ch, out_ch};
        t.stride = stride;
        t.input_h = res;
        t.input_w = res;
        m.tensors.push_back(std::move(t));
        bn_channels += static_cast<std::size_t>(out_ch);
    }

    void group(std::vector<std::string> members) {
        GroupDecl g;
        g.group_id = next_group++;
        g.method = Method::rjsvd;
        g.members = std::move(members);
        m.groups.push_back(std::move(g));
    }

    void classifier(int in_ch) {
        TensorDecl t;
        t.name = "fc";
        t.shape = Shape4{1, 1, in_ch, kClasses};
        t.input_h = 1;
        t.input_w = 1;
        m.tensors.push_back(std::move(t));
        m.other_params = 2 * bn_channels + kClasses; // bn scale+shift, fc bias
    }
};

std::string block_name(int stage, int block, const char* leaf) {
    return "layer" + std::to_string(stage + 1) + "." + std::to_string(block) +
           "." + leaf;
}

constexpr std::array<int, 4> kWidths = {64, 128, 256, 512};

ModelManifest basic_net(const std::string& name,
                        const std::array<int, 4>& blocks) {
    Builder b;
    b.m.name = name;
    b.conv("conv1", 3, 3, 64, 1, kInputRes);
    int in_ch = 64;
    int res = kInputRes;
    for (int s = 0; s < 4; ++s) {
        const int w = kWidths[static_cast<std::size_t>(s)];
        const int stride = (s == 0) ? 1 : 2;
        const int res_in = res;
        res = (res + stride - 1) / stride;
        std::vector<std::string> pos1, pos2;
        for (int blk = 0; blk < blocks[static_cast<std::size_t>(s)]; ++blk) {
            const bool entry = (blk == 0);
            b.conv(block_name(s, blk, "conv1"), 3, entry ? in_ch : w, w,
                   entry ? stride : 1, entry ? res_in : res);
            b.conv(block_name(s, blk, "conv2"), 3, w, w, 1, res);
            if (entry && (stride != 1 || in_ch != w)) {
                b.conv(block_name(s, blk, "downsample.0"), 1, in_ch, w, stride,
                       res_in);
            }
            pos1.push_back(block_name(s, blk, "conv1"));
            pos2.push_back(block_name(s, blk, "conv2"));
        }
        b.group(std::move(pos1));
        b.group(std::move(pos2));
        in_ch = w;
    }
    b.classifier(in_ch);
    return std::move(b.m);
}

ModelManifest bottleneck_net(const std::string& name,
                             const std::array<int, 4>& blocks) {
    constexpr int expansion = 4;
    Builder b;
    b.m.name = name;
    b.conv("conv1", 3, 3, 64, 1, kInputRes);
    int in_ch = 64;
    int res = kInputRes;
    for (int s = 0; s < 4; ++s) {
        const int w = kWidths[static_cast<std::size_t>(s)];
        const int out_ch = w * expansion;
        const int stride = (s == 0) ? 1 : 2;
        const int res_in = res;
        res = (res + stride - 1) / stride;
        std::vector<std::string> pos1, pos2, pos3;
        for (int blk = 0; blk < blocks[static_cast<std::size_t>(s)]; ++blk) {
            const bool entry = (blk == 0);
            b.conv(block_name(s, blk, "conv1"), 1, entry ? in_ch : out_ch, w, 1,
                   entry ? res_in : res);
            // spatial stride sits on the 3x3
            b.conv(block_name(s, blk, "conv2"), 3, w, w, entry ? stride : 1,
                   entry ? res_in : res);
            b.conv(block_name(s, blk, "conv3"), 1, w, out_ch, 1, res);
            if (entry) {
                b.conv(block_name(s, blk, "downsample.0"), 1, in_ch, out_ch,
                       stride, res_in);
            }
            pos1.push_back(block_name(s, blk, "conv1"));
            pos2.push_back(block_name(s, blk, "conv2"));
            pos3.push_back(block_name(s, blk, "conv3"));
        }
        b.group(std::move(pos1));
        b.group(std::move(pos2));
        b.group(std::move(pos3));
        in_ch = out_ch;
    }
    b.classifier(in_ch);
    return std::move(b.m);
}

} // namespace

ModelManifest resnet18_manifest() {
    return basic_net("resnet18", {2, 2, 2, 2});
}

ModelManifest resnet34_manifest() {
    return basic_net("resnet34", {3, 4, 6, 3});
}

ModelManifest resnet50_manifest() {
    return bottleneck_net("resnet50", {3, 4, 6, 3});
}

ModelManifest builtin_manifest(const std::string& name) {
    if (name == "resnet18") return resnet18_manifest();
    if (name == "resnet34") return resnet34_manifest();
    if (name == "resnet50") return resnet50_manifest();
    throw parse_error("unknown builtin model \"" + name +
                      "\", expected one of resnet18, resnet34, resnet50");
}

bool is_builtin_manifest(const std::string& name) {
    for (const std::string& n : builtin_manifest_names()) {
        if (n == name) return true;
    }
    return false;
}

std::vector<std::string> builtin_manifest_names() {
    return {"resnet18", "resnet34", "resnet50"};
}

} // namespace jsvd
