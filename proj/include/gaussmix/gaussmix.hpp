#pragma once

#include "gaussmix/corrupt.hpp"
#include "gaussmix/errors.hpp"
#include "gaussmix/fit.hpp"
#include "gaussmix/grid.hpp"
#include "gaussmix/image_io.hpp"
#include "gaussmix/mask.hpp"
#include "gaussmix/metrics.hpp"
#include "gaussmix/model.hpp"
#include "gaussmix/model_file.hpp"
#include "gaussmix/random.hpp"
#include "gaussmix/raster.hpp"
#include "gaussmix/transform.hpp"
