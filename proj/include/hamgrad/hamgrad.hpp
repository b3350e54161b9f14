#pragma once

#include "hamgrad/errors.hpp"
#include "hamgrad/geometry.hpp"
#include "hamgrad/field.hpp"
#include "hamgrad/format.hpp"
#include "hamgrad/operators.hpp"
#include "hamgrad/sampling.hpp"
#include "hamgrad/solver.hpp"
#include "hamgrad/estimates.hpp"
#include "hamgrad/gap.hpp"
#include "hamgrad/explore.hpp"
#include "hamgrad/report.hpp"
