#pragma once

#include "gsplat/gaussmath.hpp"

#include <vector>

namespace gs {

/// The optimizable parameter set: Gaussians plus the active SH degree and background.
template <typename Scalar>
struct SceneModel {
    std::vector<Gaussian3D<Scalar>> gaussians;
    int sh_degree = 0;
    Vec3<Scalar> background = Vec3<Scalar>::Zero();

    std::size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }

    template <typename Other>
    SceneModel<Other> cast() const {
        SceneModel<Other> out;
        out.gaussians.reserve(gaussians.size());
        for (const auto& g : gaussians)
            out.gaussians.push_back(g.template cast<Other>());
        out.sh_degree = sh_degree;
        out.background = background.template cast<Other>();
        return out;
    }
};

using Scenef = SceneModel<float>;
using Scened = SceneModel<double>;

} // namespace gs
