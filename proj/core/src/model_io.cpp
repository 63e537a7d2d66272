#include "jsvd/model_io.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>
#include <set>
#include <string>

namespace jsvd {
namespace {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "payload io assumes a little-endian host");

// ---------------------------------------------------------------- payloads

std::vector<double> read_payload(const std::filesystem::path& file,
                                 Dtype dtype, std::size_t count) {
    std::error_code ec;
    const std::uintmax_t actual = std::filesystem::file_size(file, ec);
    if (ec) {
        throw io_error("payload file " + file.string() + " is missing");
    }
    const std::size_t expected = count * dtype_size(dtype);
    if (actual != expected) {
        throw io_error("payload file " + file.string() + " holds " +
                       std::to_string(actual) + " bytes, manifest expects " +
                       std::to_string(expected) + " (" + std::to_string(count) +
                       " x " + dtype_name(dtype) + ")");
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw io_error("cannot open payload file " + file.string());
    }
    std::vector<double> out(count);
    if (dtype == Dtype::f64) {
        in.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(expected));
    } else {
        std::vector<float> tmp(count);
        in.read(reinterpret_cast<char*>(tmp.data()),
                static_cast<std::streamsize>(expected));
        for (std::size_t k = 0; k < count; ++k) out[k] = tmp[k];
    }
    if (!in) {
        throw io_error("short read on payload file " + file.string());
    }
    return out;
}

void write_payload(const std::filesystem::path& file, Dtype dtype,
                   std::span<const double> data) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot open " + file.string() + " for writing");
    }
    if (dtype == Dtype::f64) {
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
    } else {
        std::vector<float> tmp(data.size());
        for (std::size_t k = 0; k < data.size(); ++k)
            tmp[k] = static_cast<float>(data[k]);
        out.write(reinterpret_cast<const char*>(tmp.data()),
                  static_cast<std::streamsize>(tmp.size() * sizeof(float)));
    }
    if (!out) {
        throw io_error("write failed on " + file.string());
    }
}

Tensor4 load_tensor(const std::filesystem::path& file, const Shape4& shape,
                    Dtype dtype) {
    std::vector<double> data = read_payload(file, dtype, shape.volume());
    try {
        return Tensor4(shape, std::move(data), dtype);
    } catch (const dimension_error& e) {
        throw io_error("payload file " + file.string() + ": " + e.what());
    }
}

// -------------------------------------------------------------- name rules

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '.' ||
                        c == '-';
        if (!ok) return false;
    }
    return true;
}

// Relative paths only, no parent escapes, portable charset.
bool valid_rel_path(const std::string& s) {
    if (s.empty() || s.front() == '/') return false;
    std::string part;
    for (std::size_t k = 0; k <= s.size(); ++k) {
        if (k == s.size() || s[k] == '/') {
            if (!valid_name(part) || part == "..") return false;
            part.clear();
        } else {
            part.push_back(s[k]);
        }
    }
    return true;
}

// ------------------------------------------------------------ json helpers

const ordered_json& require_field(const ordered_json& j, const char* key,
                                  const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw parse_error(ctx + " is missing required field \"" + key + "\"");
    }
    return *it;
}

std::string require_string(const ordered_json& j, const char* key,
                           const std::string& ctx) {
    const ordered_json& f = require_field(j, key, ctx);
    if (!f.is_string()) {
        throw parse_error(ctx + "." + key + " must be a string");
    }
    return f.get<std::string>();
}

long long require_int(const ordered_json& j, const char* key,
                      const std::string& ctx) {
    const ordered_json& f = require_field(j, key, ctx);
    if (!f.is_number_integer()) {
        throw parse_error(ctx + "." + key + " must be an integer");
    }
    return f.get<long long>();
}

double require_number(const ordered_json& j, const char* key,
                      const std::string& ctx) {
    const ordered_json& f = require_field(j, key, ctx);
    if (!f.is_number()) {
        throw parse_error(ctx + "." + key + " must be a number");
    }
    return f.get<double>();
}

Shape4 parse_shape(const ordered_json& f, const std::string& ctx) {
    if (!f.is_array() || f.size() != 4) {
        throw parse_error(ctx + " must be an array of four integers");
    }
    int d[4];
    for (std::size_t k = 0; k < 4; ++k) {
        if (!f[k].is_number_integer() || f[k].get<long long>() < 1 ||
            f[k].get<long long>() > (1 << 24)) {
            throw parse_error(ctx + "[" + std::to_string(k) +
                              "] must be a positive integer");
        }
        d[k] = f[k].get<int>();
    }
    return Shape4{d[0], d[1], d[2], d[3]};
}

ordered_json shape_json(const Shape4& s) {
    return ordered_json::array({s.f1, s.f2, s.i, s.o});
}

ordered_json parse_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw io_error("manifest " + path.string() + " does not exist");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open manifest " + path.string());
    }
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error("manifest " + path.string() +
                          " is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::filesystem::path& file, const ordered_json& j) {
    if (file.has_parent_path())
        std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot open " + file.string() + " for writing");
    }
    out << j.dump(2) << "\n";
    if (!out) {
        throw io_error("write failed on " + file.string());
    }
}

void refuse_existing(const std::filesystem::path& file, bool force) {
    if (!force && std::filesystem::exists(file)) {
        throw io_error(file.string() +
                       " already exists, pass force to overwrite");
    }
}

// ----------------------------------------------------------- manifest json

ModelManifest manifest_from_json(const ordered_json& j,
                                 const std::string& where) {
    if (!j.is_object()) {
        throw parse_error(where + " must be a JSON object");
    }
    ModelManifest m;
    m.format_version = static_cast<int>(require_int(j, "format_version", where));
    if (auto it = j.find("name"); it != j.end()) {
        if (!it->is_string())
            throw parse_error(where + ".name must be a string");
        m.name = it->get<std::string>();
    }

    const ordered_json& tensors = require_field(j, "tensors", where);
    if (!tensors.is_array()) {
        throw parse_error(where + ".tensors must be an array");
    }
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const std::string ctx = where + ".tensors[" + std::to_string(k) + "]";
        const ordered_json& tj = tensors[k];
        if (!tj.is_object()) throw parse_error(ctx + " must be an object");
        TensorDecl t;
        t.name = require_string(tj, "name", ctx);
        t.shape = parse_shape(require_field(tj, "shape", ctx), ctx + ".shape");
        if (auto it = tj.find("dtype"); it != tj.end()) {
            if (!it->is_string())
                throw parse_error(ctx + ".dtype must be a string");
            t.dtype = dtype_from_name(it->get<std::string>());
        }
        if (auto it = tj.find("path"); it != tj.end()) {
            if (!it->is_string())
                throw parse_error(ctx + ".path must be a string");
            t.path = it->get<std::string>();
        }
        if (auto it = tj.find("stride"); it != tj.end()) {
            if (!it->is_number_integer() || it->get<long long>() < 1)
                throw parse_error(ctx + ".stride must be a positive integer");
            t.stride = it->get<int>();
        }
        if (auto it = tj.find("input"); it != tj.end()) {
            if (!it->is_array() || it->size() != 2 ||
                !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer() ||
                (*it)[0].get<long long>() < 1 || (*it)[1].get<long long>() < 1)
                throw parse_error(ctx + ".input must be two positive integers");
            t.input_h = (*it)[0].get<int>();
            t.input_w = (*it)[1].get<int>();
        }
        m.tensors.push_back(std::move(t));
    }

    if (auto git = j.find("groups"); git != j.end()) {
        if (!git->is_array())
            throw parse_error(where + ".groups must be an array");
        for (std::size_t k = 0; k < git->size(); ++k) {
            const std::string ctx = where + ".groups[" + std::to_string(k) + "]";
            const ordered_json& gj = (*git)[k];
            if (!gj.is_object()) throw parse_error(ctx + " must be an object");
            GroupDecl g;
            g.group_id = static_cast<int>(require_int(gj, "group_id", ctx));
            if (auto it = gj.find("method"); it != gj.end()) {
                if (!it->is_string())
                    throw parse_error(ctx + ".method must be a string");
                g.method = method_from_name(it->get<std::string>());
            }
            const ordered_json& mem = require_field(gj, "members", ctx);
            if (!mem.is_array() || mem.empty()) {
                throw parse_error(ctx + ".members must be a nonempty array");
            }
            for (const ordered_json& mj : mem) {
                if (!mj.is_string())
                    throw parse_error(ctx + ".members must hold strings");
                g.members.push_back(mj.get<std::string>());
            }
            if (auto it = gj.find("rank"); it != gj.end()) {
                if (!it->is_number_integer() || it->get<long long>() < 1)
                    throw parse_error(ctx + ".rank must be a positive integer");
                g.rank = it->get<int>();
            }
            if (auto it = gj.find("target_cf"); it != gj.end()) {
                if (!it->is_number() || !(it->get<double>() > 0.0))
                    throw parse_error(ctx + ".target_cf must be positive");
                g.target_cf = it->get<double>();
            }
            if (auto it = gj.find("p"); it != gj.end()) {
                if (!it->is_number() || it->get<double>() < 0.0 ||
                    it->get<double>() > 1.0)
                    throw parse_error(ctx + ".p must lie in [0, 1]");
                g.p = it->get<double>();
            }
            if (auto it = gj.find("k"); it != gj.end()) {
                if (!it->is_number_integer() || it->get<long long>() < 1)
                    throw parse_error(ctx + ".k must be a positive integer");
                g.k = it->get<int>();
            }
            m.groups.push_back(std::move(g));
        }
    }

    if (auto it = j.find("other_params"); it != j.end()) {
        if (!it->is_number_integer() || it->get<long long>() < 0)
            throw parse_error(where +
                              ".other_params must be a nonnegative integer");
        m.other_params = it->get<std::size_t>();
    }
    return m;
}

ordered_json manifest_to_json(const ModelManifest& m) {
    ordered_json j;
    j["format_version"] = m.format_version;
    if (!m.name.empty()) j["name"] = m.name;
    j["tensors"] = ordered_json::array();
    for (const TensorDecl& t : m.tensors) {
        ordered_json tj;
        tj["name"] = t.name;
        tj["shape"] = shape_json(t.shape);
        tj["dtype"] = dtype_name(t.dtype);
        if (!t.path.empty()) tj["path"] = t.path;
        tj["stride"] = t.stride;
        tj["input"] = ordered_json::array({t.input_h, t.input_w});
        j["tensors"].push_back(std::move(tj));
    }
    if (!m.groups.empty()) {
        j["groups"] = ordered_json::array();
        for (const GroupDecl& g : m.groups) {
            ordered_json gj;
            gj["group_id"] = g.group_id;
            if (g.method) gj["method"] = method_name(*g.method);
            gj["members"] = g.members;
            if (g.rank) gj["rank"] = *g.rank;
            if (g.target_cf) gj["target_cf"] = *g.target_cf;
            if (g.p) gj["p"] = *g.p;
            if (g.k) gj["k"] = *g.k;
            j["groups"].push_back(std::move(gj));
        }
    }
    j["other_params"] = m.other_params;
    return j;
}

// --------------------------------------------------------------- factorized

ordered_json factor_json(const std::string& path, const Tensor4& t) {
    ordered_json j;
    j["path"] = path;
    j["shape"] = shape_json(t.shape());
    return j;
}

struct FactorRef {
    std::string path;
    Shape4 shape;
};

FactorRef parse_factor_ref(const ordered_json& j, const std::string& ctx) {
    if (!j.is_object()) throw parse_error(ctx + " must be an object");
    FactorRef f;
    f.path = require_string(j, "path", ctx);
    if (!valid_rel_path(f.path)) {
        throw parse_error(ctx + ".path \"" + f.path +
                          "\" is not a safe relative path");
    }
    f.shape = parse_shape(require_field(j, "shape", ctx), ctx + ".shape");
    return f;
}

ordered_json report_to_json(const CompressionReport& r) {
    ordered_json j;
    j["params_before"] = r.params_before;
    j["params_after"] = r.params_after;
    j["other_params"] = r.other_params;
    j["cf"] = r.cf;
    j["macs_before"] = r.macs_before;
    j["macs_after"] = r.macs_after;
    j["flops_convention"] = r.flops_convention;
    j["flops_before"] = r.flops_before;
    j["flops_after"] = r.flops_after;
    j["per_group_residuals"] = r.per_group_residuals;
    return j;
}

CompressionReport report_from_json(const ordered_json& j,
                                   const std::string& ctx) {
    if (!j.is_object()) throw parse_error(ctx + " must be an object");
    CompressionReport r;
    r.params_before = static_cast<std::size_t>(require_int(j, "params_before", ctx));
    r.params_after = static_cast<std::size_t>(require_int(j, "params_after", ctx));
    r.other_params = static_cast<std::size_t>(require_int(j, "other_params", ctx));
    r.cf = require_number(j, "cf", ctx);
    r.macs_before = static_cast<std::size_t>(require_int(j, "macs_before", ctx));
    r.macs_after = static_cast<std::size_t>(require_int(j, "macs_after", ctx));
    r.flops_convention = require_string(j, "flops_convention", ctx);
    r.flops_before = static_cast<std::size_t>(require_int(j, "flops_before", ctx));
    r.flops_after = static_cast<std::size_t>(require_int(j, "flops_after", ctx));
    const ordered_json& res = require_field(j, "per_group_residuals", ctx);
    if (!res.is_array())
        throw parse_error(ctx + ".per_group_residuals must be an array");
    for (const ordered_json& x : res) {
        if (!x.is_number())
            throw parse_error(ctx + ".per_group_residuals must hold numbers");
        r.per_group_residuals.push_back(x.get<double>());
    }
    return r;
}

std::string shared_v_path(int gid) {
    return "factors/g" + std::to_string(gid) + ".v.bin";
}
std::string shared_u_path(int gid) {
    return "factors/g" + std::to_string(gid) + ".u.bin";
}
std::string member_u_path(int gid, const std::string& name) {
    return "factors/g" + std::to_string(gid) + "." + name + ".u.bin";
}
std::string member_v_path(int gid, const std::string& name) {
    return "factors/g" + std::to_string(gid) + "." + name + ".v.bin";
}

} // namespace

// ------------------------------------------------------------- public api

const Tensor4& LoadedModel::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
        throw io_error("tensor \"" + name + "\" has no loaded payload");
    }
    return it->second;
}

void validate_manifest(const ModelManifest& m) {
    if (m.format_version != 1) {
        throw parse_error("unsupported format_version " +
                          std::to_string(m.format_version) + ", expected 1");
    }
    std::set<std::string> names;
    for (const TensorDecl& t : m.tensors) {
        if (!valid_name(t.name)) {
            throw parse_error("tensor name \"" + t.name +
                              "\" is empty or uses characters outside "
                              "[A-Za-z0-9._-]");
        }
        if (!names.insert(t.name).second) {
            throw parse_error("tensor \"" + t.name + "\" is declared twice");
        }
        if (!t.path.empty() && !valid_rel_path(t.path)) {
            throw parse_error("tensor \"" + t.name + "\" path \"" + t.path +
                              "\" is not a safe relative path");
        }
        if (t.shape.f1 < 1 || t.shape.f2 < 1 || t.shape.i < 1 || t.shape.o < 1) {
            throw parse_error("tensor \"" + t.name + "\" shape " +
                              shape_to_string(t.shape) + " has a dimension < 1");
        }
        if (t.stride < 1 || t.input_h < 1 || t.input_w < 1) {
            throw parse_error("tensor \"" + t.name +
                              "\" needs stride and input extents >= 1");
        }
    }
    std::set<int> gids;
    std::set<std::string> grouped;
    for (const GroupDecl& g : m.groups) {
        if (!gids.insert(g.group_id).second) {
            throw parse_error("group " + std::to_string(g.group_id) +
                              " is declared twice");
        }
        if (g.rank && g.target_cf) {
            throw parse_error("group " + std::to_string(g.group_id) +
                              " sets both rank and target_cf");
        }
        std::vector<const TensorDecl*> members = resolve_members(m, g);
        std::set<std::string> local;
        for (const TensorDecl* t : members) {
            if (!local.insert(t->name).second) {
                throw parse_error("group " + std::to_string(g.group_id) +
                                  " lists tensor \"" + t->name + "\" twice");
            }
            if (!grouped.insert(t->name).second) {
                throw parse_error("tensor \"" + t->name +
                                  "\" belongs to more than one group");
            }
        }
        if (g.method) check_group_compatibility(g, members, *g.method);
    }
}

LoadedModel load_model(const std::filesystem::path& manifest_path) {
    LoadedModel out;
    out.dir = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                              : std::filesystem::path(".");
    out.manifest =
        manifest_from_json(parse_file(manifest_path), manifest_path.string());
    validate_manifest(out.manifest);
    for (const TensorDecl& t : out.manifest.tensors) {
        if (t.path.empty()) continue; // size-only entry
        out.tensors.emplace(t.name,
                            load_tensor(out.dir / t.path, t.shape, t.dtype));
    }
    return out;
}

void save_model(const ModelManifest& manifest,
                const std::map<std::string, Tensor4>& tensors,
                const std::filesystem::path& dir, bool force,
                const std::string& manifest_name) {
    validate_manifest(manifest);
    for (const auto& [name, tensor] : tensors) {
        const TensorDecl* decl = manifest.find_tensor(name);
        if (!decl) {
            throw io_error("tensor \"" + name +
                           "\" has data but no manifest declaration");
        }
        if (decl->path.empty()) {
            throw io_error("tensor \"" + name +
                           "\" has data but its declaration has no path");
        }
        if (decl->shape != tensor.shape()) {
            throw dimension_error("tensor \"" + name + "\" data shape " +
                                  shape_to_string(tensor.shape()) +
                                  " does not match declared " +
                                  shape_to_string(decl->shape));
        }
    }
    for (const TensorDecl& t : manifest.tensors) {
        if (!t.path.empty() && !tensors.count(t.name)) {
            throw io_error("tensor \"" + t.name +
                           "\" declares a path but no data was provided");
        }
    }

    const std::filesystem::path manifest_file = dir / manifest_name;
    refuse_existing(manifest_file, force);
    for (const TensorDecl& t : manifest.tensors) {
        if (!t.path.empty()) refuse_existing(dir / t.path, force);
    }
    std::filesystem::create_directories(dir);
    for (const TensorDecl& t : manifest.tensors) {
        if (t.path.empty()) continue;
        write_payload(dir / t.path, t.dtype, tensors.at(t.name).data());
    }
    write_json_file(manifest_file, manifest_to_json(manifest));
}

void save_factorized(const FactorizedModel& model,
                     const std::filesystem::path& out_dir, bool force) {
    const std::filesystem::path manifest_file = out_dir / "model.factorized.json";
    const std::filesystem::path report_file = out_dir / "report.json";
    refuse_existing(manifest_file, force);
    refuse_existing(report_file, force);

    ordered_json j;
    j["format_version"] = model.format_version;
    if (!model.source_manifest.empty())
        j["source_manifest"] = model.source_manifest;
    j["precision"] = dtype_name(model.precision);
    j["groups"] = ordered_json::array();

    struct PendingWrite {
        std::string path;
        const Tensor4* tensor;
    };
    std::vector<PendingWrite> writes;

    for (const FactorizedGroup& g : model.groups) {
        ordered_json gj;
        gj["group_id"] = g.group_id;
        gj["method"] = method_name(g.method);
        gj["rank_right"] = g.rank_right;
        gj["rank_left"] = g.rank_left;
        gj["p"] = g.p;
        gj["iterations"] = g.iterations;
        gj["residual_sq"] = g.residual_sq;
        if (!g.objective_trace.empty())
            gj["objective_trace"] = g.objective_trace;
        if (g.right_v) {
            const std::string path = shared_v_path(g.group_id);
            gj["right_v"] = factor_json(path, *g.right_v);
            writes.push_back({path, &*g.right_v});
        }
        if (g.left_u) {
            const std::string path = shared_u_path(g.group_id);
            gj["left_u"] = factor_json(path, *g.left_u);
            writes.push_back({path, &*g.left_u});
        }
        gj["members"] = ordered_json::array();
        for (const FactorizedMember& mem : g.members) {
            if (!valid_name(mem.name)) {
                throw parse_error("member name \"" + mem.name +
                                  "\" is empty or uses characters outside "
                                  "[A-Za-z0-9._-]");
            }
            ordered_json mj;
            mj["name"] = mem.name;
            mj["shape"] = shape_json(mem.shape);
            mj["stride"] = mem.stride;
            mj["input"] = ordered_json::array({mem.input_h, mem.input_w});
            mj["residual_sq"] = mem.residual_sq;
            if (mem.right_u) {
                const std::string path = member_u_path(g.group_id, mem.name);
                mj["right_u"] = factor_json(path, *mem.right_u);
                writes.push_back({path, &*mem.right_u});
            }
            if (mem.left_v) {
                const std::string path = member_v_path(g.group_id, mem.name);
                mj["left_v"] = factor_json(path, *mem.left_v);
                writes.push_back({path, &*mem.left_v});
            }
            gj["members"].push_back(std::move(mj));
        }
        j["groups"].push_back(std::move(gj));
    }
    j["report"] = report_to_json(model.report);

    for (const PendingWrite& w : writes) {
        refuse_existing(out_dir / w.path, force);
    }
    for (const PendingWrite& w : writes) {
        write_payload(out_dir / w.path, w.tensor->dtype(), w.tensor->data());
    }
    write_json_file(manifest_file, j);
    write_json_file(report_file, report_to_json(model.report));
}

FactorizedModel load_factorized(const std::filesystem::path& manifest_path) {
    const std::string where = manifest_path.string();
    const ordered_json j = parse_file(manifest_path);
    if (!j.is_object()) throw parse_error(where + " must be a JSON object");
    const std::filesystem::path dir = manifest_path.has_parent_path()
                                          ? manifest_path.parent_path()
                                          : std::filesystem::path(".");

    FactorizedModel out;
    out.format_version = static_cast<int>(require_int(j, "format_version", where));
    if (out.format_version != 1) {
        throw parse_error(where + ": unsupported format_version " +
                          std::to_string(out.format_version));
    }
    if (auto it = j.find("source_manifest"); it != j.end()) {
        if (!it->is_string())
            throw parse_error(where + ".source_manifest must be a string");
        out.source_manifest = it->get<std::string>();
    }
    out.precision = dtype_from_name(require_string(j, "precision", where));

    const ordered_json& groups = require_field(j, "groups", where);
    if (!groups.is_array())
        throw parse_error(where + ".groups must be an array");

    auto load_factor = [&](const ordered_json& fj, const std::string& ctx,
                           const Shape4& expect) {
        FactorRef ref = parse_factor_ref(fj, ctx);
        if (!(ref.shape == expect)) {
            throw parse_error(ctx + " records shape " +
                              shape_to_string(ref.shape) + " but ranks imply " +
                              shape_to_string(expect));
        }
        return load_tensor(dir / ref.path, ref.shape, out.precision);
    };

    std::set<int> gids;
    for (std::size_t k = 0; k < groups.size(); ++k) {
        const std::string ctx = where + ".groups[" + std::to_string(k) + "]";
        const ordered_json& gj = groups[k];
        if (!gj.is_object()) throw parse_error(ctx + " must be an object");
        FactorizedGroup g;
        g.group_id = static_cast<int>(require_int(gj, "group_id", ctx));
        if (!gids.insert(g.group_id).second) {
            throw parse_error(ctx + ": group " + std::to_string(g.group_id) +
                              " appears twice");
        }
        g.method = method_from_name(require_string(gj, "method", ctx));
        g.rank_right = static_cast<int>(require_int(gj, "rank_right", ctx));
        g.rank_left = static_cast<int>(require_int(gj, "rank_left", ctx));
        if (g.rank_right < 0 || g.rank_left < 0 ||
            g.rank_right + g.rank_left < 1) {
            throw parse_error(ctx + ": ranks must be nonnegative with a "
                              "positive sum");
        }
        if ((g.method == Method::rjsvd && g.rank_left != 0) ||
            (g.method == Method::ljsvd && g.rank_right != 0)) {
            throw parse_error(ctx + ": method " + method_name(g.method) +
                              " cannot carry a rank on the unshared side");
        }
        g.p = require_number(gj, "p", ctx);
        g.iterations = static_cast<int>(require_int(gj, "iterations", ctx));
        g.residual_sq = require_number(gj, "residual_sq", ctx);
        if (auto it = gj.find("objective_trace"); it != gj.end()) {
            if (!it->is_array())
                throw parse_error(ctx + ".objective_trace must be an array");
            for (const ordered_json& x : *it) {
                if (!x.is_number())
                    throw parse_error(ctx +
                                      ".objective_trace must hold numbers");
                g.objective_trace.push_back(x.get<double>());
            }
        }

        const ordered_json& mems = require_field(gj, "members", ctx);
        if (!mems.is_array() || mems.empty()) {
            throw parse_error(ctx + ".members must be a nonempty array");
        }
        for (std::size_t mi = 0; mi < mems.size(); ++mi) {
            const std::string mctx = ctx + ".members[" + std::to_string(mi) + "]";
            const ordered_json& mj = mems[mi];
            if (!mj.is_object()) throw parse_error(mctx + " must be an object");
            FactorizedMember mem;
            mem.name = require_string(mj, "name", mctx);
            mem.shape = parse_shape(require_field(mj, "shape", mctx),
                                    mctx + ".shape");
            mem.stride = static_cast<int>(require_int(mj, "stride", mctx));
            const ordered_json& input = require_field(mj, "input", mctx);
            if (!input.is_array() || input.size() != 2)
                throw parse_error(mctx + ".input must be two integers");
            mem.input_h = input[0].get<int>();
            mem.input_w = input[1].get<int>();
            if (mem.stride < 1 || mem.input_h < 1 || mem.input_w < 1) {
                throw parse_error(mctx + " needs stride and input >= 1");
            }
            mem.residual_sq = require_number(mj, "residual_sq", mctx);
            if (mem.residual_sq < 0.0) {
                throw parse_error(mctx + ".residual_sq must be nonnegative");
            }
            if (g.rank_right > 0) {
                mem.right_u = load_factor(
                    require_field(mj, "right_u", mctx), mctx + ".right_u",
                    Shape4{mem.shape.f1, 1, mem.shape.i, g.rank_right});
            }
            if (g.rank_left > 0) {
                mem.left_v = load_factor(
                    require_field(mj, "left_v", mctx), mctx + ".left_v",
                    Shape4{1, mem.shape.f2, g.rank_left, mem.shape.o});
            }
            g.members.push_back(std::move(mem));
        }

        // Shared factors are stored folded against the first member's shape;
        // members with a different (F2, O) or (F1, I) split of the same
        // product are refolded at use.
        const Shape4& first = g.members[0].shape;
        if (g.rank_right > 0) {
            g.right_v = load_factor(require_field(gj, "right_v", ctx),
                                    ctx + ".right_v",
                                    Shape4{1, first.f2, g.rank_right, first.o});
        }
        if (g.rank_left > 0) {
            g.left_u = load_factor(require_field(gj, "left_u", ctx),
                                   ctx + ".left_u",
                                   Shape4{first.f1, 1, first.i, g.rank_left});
        }
        out.groups.push_back(std::move(g));
    }

    out.report = report_from_json(require_field(j, "report", where),
                                  where + ".report");
    return out;
}

void save_report(const CompressionReport& report,
                 const std::filesystem::path& file) {
    write_json_file(file, report_to_json(report));
}

std::size_t factorized_params(const FactorizedModel& model) {
    std::size_t after = model.report.params_before;
    for (const FactorizedGroup& g : model.groups) {
        if (g.right_v) after += g.right_v->size();
        if (g.left_u) after += g.left_u->size();
        for (const FactorizedMember& mem : g.members) {
            after -= mem.shape.volume();
            if (mem.right_u) after += mem.right_u->size();
            if (mem.left_v) after += mem.left_v->size();
        }
    }
    return after;
}

} // namespace jsvd
