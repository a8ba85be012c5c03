#pragma once

#include "sdae/bounds.hpp"
#include "sdae/constraint.hpp"
#include "sdae/errors.hpp"
#include "sdae/expr.hpp"
#include "sdae/inherent.hpp"
#include "sdae/linalg.hpp"
#include "sdae/model.hpp"
#include "sdae/problem.hpp"
#include "sdae/projectors.hpp"
#include "sdae/report.hpp"
#include "sdae/rng.hpp"
#include "sdae/simulate.hpp"
