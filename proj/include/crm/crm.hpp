#pragma once

#include "crm/corm.hpp"
#include "crm/crm_sample.hpp"
#include "crm/diagnostics.hpp"
#include "crm/error.hpp"
#include "crm/grid.hpp"
#include "crm/intensity.hpp"
#include "crm/occupancy.hpp"
#include "crm/quadrature.hpp"
#include "crm/reference.hpp"
#include "crm/rng.hpp"
#include "crm/sampler.hpp"
