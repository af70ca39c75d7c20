#pragma once

#include "fracwave/errors.hpp"
#include "fracwave/quadrature.hpp"
#include "fracwave/special.hpp"
#include "fracwave/kernels.hpp"
#include "fracwave/model.hpp"
#include "fracwave/spectral.hpp"
#include "fracwave/parallel.hpp"
#include "fracwave/philox.hpp"
#include "fracwave/sampler.hpp"
#include "fracwave/regularity.hpp"
#include "fracwave/potential.hpp"
#include "fracwave/experiment.hpp"
