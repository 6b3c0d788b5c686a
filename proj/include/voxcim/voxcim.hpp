#pragma once

#include "voxcim/cimmodel.hpp"
#include "voxcim/core.hpp"
#include "voxcim/errors.hpp"
#include "voxcim/io.hpp"
#include "voxcim/mapsearch.hpp"
#include "voxcim/pipeline.hpp"
#include "voxcim/spconv.hpp"
#include "voxcim/toolkit.hpp"
