#pragma once

#include "voxcim/toolkit/config.hpp"
#include "voxcim/toolkit/scene.hpp"
#include "voxcim/toolkit/sweep.hpp"
#include "voxcim/toolkit/voxelize.hpp"
#include "voxcim/toolkit/weights.hpp"
