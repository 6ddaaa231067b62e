#pragma once

#include "pencillab/differential.hpp"
#include "pencillab/error.hpp"
#include "pencillab/flows.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/germ_io.hpp"
#include "pencillab/linalg.hpp"
#include "pencillab/pencil.hpp"
#include "pencillab/pointcloud.hpp"
#include "pencillab/regularity.hpp"
#include "pencillab/sampling.hpp"
#include "pencillab/topology.hpp"

namespace pencillab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pencillab
