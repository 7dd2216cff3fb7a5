#pragma once

#include "descent/analysis.hpp"
#include "descent/box.hpp"
#include "descent/dynamics.hpp"
#include "descent/errors.hpp"
#include "descent/experiment.hpp"
#include "descent/expr.hpp"
#include "descent/field.hpp"
#include "descent/json_io.hpp"
#include "descent/linalg.hpp"
#include "descent/rng.hpp"
#include "descent/version.hpp"
