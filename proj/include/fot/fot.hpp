#pragma once

#include "fot/basis.hpp"
#include "fot/coupling.hpp"
#include "fot/errors.hpp"
#include "fot/evaluate.hpp"
#include "fot/funcdata.hpp"
#include "fot/gp_baseline.hpp"
#include "fot/rng.hpp"
#include "fot/solver.hpp"
#include "fot/transport_operator.hpp"
