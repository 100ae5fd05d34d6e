#pragma once

#include "gpcentaur/error.hpp"
#include "gpcentaur/units.hpp"
#include "gpcentaur/algebra.hpp"
#include "gpcentaur/model.hpp"
#include "gpcentaur/expr.hpp"
#include "gpcentaur/document.hpp"
#include "gpcentaur/compile.hpp"
#include "gpcentaur/solver.hpp"
#include "gpcentaur/sensitivity.hpp"
#include "gpcentaur/analysis.hpp"
#include "gpcentaur/sweep.hpp"
#include "gpcentaur/service.hpp"
