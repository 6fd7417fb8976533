#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eclipse/tensor.hpp"

namespace eclipse {

/// Optimizer groups. The slow group holds components that would be initialized from
/// pretrained weights (text encoder, spatial attention); everything else is new.
enum class ParamGroup { PretrainedSlow, NewModules };

std::string_view to_string(ParamGroup group);
ParamGroup param_group_from_string(std::string_view name);

struct NamedParam {
    std::string name;
    Tensor value;
    ParamGroup group;
};

/// Ordered registry of trainable tensors. Registration order is the iteration order,
/// which keeps checkpoints and optimizer updates deterministic.
class ParamStore {
public:
    /// Registers `value` under a unique name, marks it trainable, and returns the handle.
    Tensor add(std::string name, Tensor value, ParamGroup group);

    const std::vector<NamedParam>& params() const { return params_; }
    std::vector<NamedParam>& params() { return params_; }
    std::size_t size() const { return params_.size(); }
    std::size_t total_values() const;

    const NamedParam* find(std::string_view name) const;

    void zero_grad();

    /// Throws unless every parameter has a unique name and exactly one known group.
    void audit() const;

private:
    std::vector<NamedParam> params_;
};

}  // namespace eclipse
