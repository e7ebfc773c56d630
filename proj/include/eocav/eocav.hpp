#pragma once

#include "eocav/actuator.hpp"
#include "eocav/budget.hpp"
#include "eocav/config.hpp"
#include "eocav/cqed.hpp"
#include "eocav/csv.hpp"
#include "eocav/dynamics.hpp"
#include "eocav/ensemble.hpp"
#include "eocav/fit.hpp"
#include "eocav/report.hpp"
#include "eocav/rng.hpp"
#include "eocav/spectra.hpp"
#include "eocav/spectrum.hpp"
#include "eocav/units.hpp"
#include "eocav/util.hpp"
#include "eocav/version.hpp"
