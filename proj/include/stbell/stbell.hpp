#pragma once

#include "errors.hpp"
#include "feasibility.hpp"
#include "lhv.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "qkd.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "spatial.hpp"
#include "spin_core.hpp"
