#include "eclipse/params.hpp"

#include <set>
#include <stdexcept>

namespace eclipse {

std::string_view to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::PretrainedSlow: return "pretrained_slow";
        case ParamGroup::NewModules: return "new_modules";
    }
    return "unknown";
}

ParamGroup param_group_from_string(std::string_view name) {
    if (name == "pretrained_slow") return ParamGroup::PretrainedSlow;
    if (name == "new_modules") return ParamGroup::NewModules;
    throw std::invalid_argument("unknown parameter group '" + std::string(name) + "'");
}

Tensor ParamStore::add(std::string name, Tensor value, ParamGroup group) {
    if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    params_.push_back({std::move(name), value, group});
    return value;
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

const NamedParam* ParamStore::find(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

void ParamStore::audit() const {
    std::set<std::string> seen;
    std::set<const void*> storages;
    for (const auto& p : params_) {
        if (!seen.insert(p.name).second) throw std::logic_error("parameter '" + p.name + "' registered twice");
        if (!storages.insert(p.value.impl().get()).second) {
            throw std::logic_error("parameter '" + p.name + "' aliases another parameter's storage");
        }
        if (p.group != ParamGroup::PretrainedSlow && p.group != ParamGroup::NewModules) {
            throw std::logic_error("parameter '" + p.name + "' has no valid group");
        }
    }
}

}  // namespace eclipse
