#include "eclipse/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "eclipse/config.hpp"
#include "eclipse/io.hpp"

namespace eclipse {

namespace {
constexpr char kMagic[4] = {'E', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const EclipseModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    write_string(out, to_json(model.config()).dump());
    const auto& params = model.params().params();
    write_u64(out, params.size());
    for (const auto& p : params) {
        write_string(out, p.name);
        write_string(out, std::string(to_string(p.group)));
        write_tensor(out, p.value);
    }
    if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

std::unique_ptr<EclipseModel> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 4, kMagic)) throw FormatError(path.string() + " is not a checkpoint");
    if (const auto version = read_u32(in); version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig config;
    try {
        config = model_config_from_json(nlohmann::json::parse(read_string(in)));
    } catch (const std::exception& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
    auto model = std::make_unique<EclipseModel>(config, 0);
    auto& params = model->params().params();
    const std::uint64_t count = read_u64(in);
    if (count != params.size()) {
        throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                          std::to_string(params.size()));
    }
    for (auto& p : params) {
        const std::string name = read_string(in);
        const std::string group = read_string(in);
        Tensor value = read_tensor(in);
        if (name != p.name) throw FormatError("checkpoint parameter '" + name + "' where '" + p.name + "' expected");
        if (group != to_string(p.group)) throw FormatError("parameter " + name + " stored in group " + group);
        if (value.shape() != p.value.shape()) {
            throw FormatError("parameter " + name + " has shape " + format_shape(value.shape()) + ", model expects " +
                              format_shape(p.value.shape()));
        }
        std::ranges::copy(value.data(), p.value.mutable_data().begin());
    }
    return model;
}

}  // namespace eclipse
