#pragma once

#include "homog/errors.hpp"
#include "homog/trig_poly.hpp"
#include "homog/profile.hpp"
#include "homog/corrector.hpp"
#include "homog/cell.hpp"
#include "homog/grid_oracle.hpp"
#include "homog/effective.hpp"
#include "homog/wiener.hpp"
#include "homog/initial.hpp"
#include "homog/spde.hpp"
#include "homog/sigma.hpp"
#include "homog/config.hpp"
#include "homog/harness.hpp"
